from datetime import datetime
import json
import os
import sys

from kerrcavity.errors import KerrCavityError
from kerrcavity.report import Table, write_table
from kerrcavity.sweep import PRESET_IDS, preset, run_sweep


def create_figure_tables(out_dir="figure_tables", fmt="csv", engine="closed", points=None):
    """
    Run every figure preset and write one table per panel plus an index.json
    listing what was written, how long it took, and which panels failed.
    """
    os.makedirs(out_dir, exist_ok=True)

    index = {}
    for preset_id in PRESET_IDS:
        spec = preset(preset_id, points=points, engine=engine)
        path = os.path.join(out_dir, f"{preset_id}.{fmt}")
        try:
            result = run_sweep(spec)
        except KerrCavityError as e:
            print(f"{preset_id} failed: {e}")
            index[preset_id] = {"error": str(e)}
            continue
        write_table(Table.from_sweep(result), fmt, path)
        index[preset_id] = {
            "path": path,
            "points": len(result.rows),
            "failed_points": result.failures,
            "duration_secs": round(result.elapsed, 3),
            "max_oracle_delta": result.max_delta(),
            "metadata": dict(spec.metadata),
        }
        print(f"{preset_id}: {len(result.rows)} points in {result.elapsed:.2f} secs -> {path}")

    index_path = os.path.join(out_dir, "index.json")
    with open(index_path, "w") as fp:
        json.dump(
            {"created": datetime.now().strftime("%Y-%m-%d %H:%M:%S"), "panels": index},
            fp,
            indent=2,
        )
    return index_path


if __name__ == "__main__":
    out_dir = sys.argv[1] if len(sys.argv) > 1 else "figure_tables"
    engine = sys.argv[2] if len(sys.argv) > 2 else "closed"
    index_path = create_figure_tables(out_dir, engine=engine)

    print(f"Figure tables have been saved, index at {index_path}")
