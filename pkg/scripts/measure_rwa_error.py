import json
import sys

import numpy as np

from kerrcavity.model import FockTruncation
from kerrcavity.oracle import IntegratorSettings, rwa_error
from kerrcavity.sweep import preset


def measure_rwa_error(preset_ids, t_max=1.0, points=11, n_max=6, include_full=True):
    """
    Largest deviation of the pre-RWA and full propagations from the closed
    form, per preset, on [0, t_max] with a small truncation.
    """
    settings = IntegratorSettings()
    times = np.linspace(0.0, t_max, points)
    results = {}
    for preset_id in preset_ids:
        params = preset(preset_id).params
        trunc = FockTruncation(n_max=n_max, tail_eps=1e-12)
        errors = rwa_error(params, trunc, times, settings, include_full=include_full)
        results[preset_id] = {name: float(f"{value:.6g}") for name, value in errors.items()}
        print(f"{preset_id}: " + ", ".join(f"{k}={v:.3e}" for k, v in errors.items()))
    return results


if __name__ == "__main__":
    ids = sys.argv[1:] or ["fig3b", "fig5b"]
    results = measure_rwa_error(ids)

    with open("/tmp/rwa_error.json", "w") as f:
        f.write(json.dumps(results, indent=2))
    print("RWA error measurements have been saved to /tmp/rwa_error.json")
