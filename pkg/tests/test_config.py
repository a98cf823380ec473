import pytest

from kerrcavity.config import OUTPUT_ENV, load_config, output_path, parse_config, parse_params
from kerrcavity.errors import ConfigError

BASE = {
    "params": {
        "lambda": 1.0,
        "epsilon": 10,
        "delta": 10,
        "chi1": 1,
        "chi2": 1,
        "alpha1": 1.0,
        "alpha2": [1.0, 0.0],
        "gamma": [0.7071067811865476, 0.7071067811865476, 0, 0],
        "gamma_policy": "paper_ansatz",
        "deformation": "sqrt",
    },
    "truncation": {"tail_eps": 1e-10},
    "integrator": {"step": 5e-4, "max_phase": None},
    "sweep": {"variable": "time", "start": 0, "stop": 10, "points": 201, "observables": ["mandel_q1"]},
    "output": {"format": "json", "path": "fig3d.json"},
    "seed": 42,
}


def _with(section, **changes):
    data = {k: (dict(v) if isinstance(v, dict) else v) for k, v in BASE.items()}
    data[section] = dict(data[section], **changes)
    return data


def test_full_config():
    cfg = parse_config(BASE, name="fig3d")
    assert cfg.params.lam == 1.0 and cfg.params.alpha2 == 1.0
    assert cfg.params.deformation.kind == "sqrt"
    assert cfg.integrator.step == 5e-4 and cfg.integrator.max_phase is None
    assert cfg.sweep.points == 201 and cfg.sweep.tail_eps == 1e-10
    assert cfg.sweep.integrator is cfg.integrator
    assert cfg.point is None
    assert cfg.output.format == "json" and cfg.output.path == "fig3d.json"
    assert cfg.seed == 42 and cfg.name == "fig3d"


def test_defaults():
    cfg = parse_config({"params": {}, "point": {"t": 0.5, "observables": ["norm"]}})
    assert cfg.params.gamma == (1.0, 0.0, 0.0, 0.0)
    assert cfg.point.engine == "closed"
    assert cfg.output.format == "csv" and cfg.seed == 0
    assert cfg.truncation.n_max is None


def test_complex_forms():
    params = parse_params({"alpha1": {"re": 0.5, "im": -0.2}, "alpha2": [0.1, 0.3]})
    assert params.alpha1 == complex(0.5, -0.2)
    assert params.alpha2 == complex(0.1, 0.3)


def test_custom_deformation():
    params = parse_params({"deformation": {"custom": [0.0, 1.0, 1.5, 2.0]}})
    assert params.deformation.table == (0.0, 1.0, 1.5, 2.0)


@pytest.mark.parametrize(
    "data, location",
    [
        (_with("params", gamma=[0.9, 0, 0, 0]), "params.gamma"),
        (_with("params", **{"lambda": -1.0}), "params.lambda"),
        (_with("params", chi1="big"), "params.chi1"),
        (_with("params", deformation="cubic"), "params.deformation"),
        (_with("params", gamma_policy="loose"), "params.gamma_policy"),
        (_with("params", gamma=[[1, 2, 3], 0, 0, 0]), "params.gamma[0]"),
        (_with("truncation", tail_eps=2.0), "truncation.tail_eps"),
        (_with("truncation", n_max=2), "truncation.n_max"),
        (_with("sweep", points=2.5), "sweep.points"),
        (_with("sweep", variable="phi"), "sweep.variable"),
        (_with("sweep", start=5, stop=1), "sweep"),
        (_with("sweep", colour="red"), "sweep.colour"),
        (_with("output", format="png"), "output.format"),
        (_with("integrator", step=0), "integrator"),
    ],
)
def test_errors_name_their_location(data, location):
    with pytest.raises(ConfigError) as err:
        parse_config(data)
    assert err.value.location == location


def test_strict_policy_error_is_wrapped():
    with pytest.raises(ConfigError, match="gamma2 must equal gamma3") as err:
        parse_config(_with("params", gamma_policy="strict"))
    assert err.value.location == "params"


def test_null_takes_the_default_only_for_optional_keys():
    assert parse_params({"chi1": None, "lambda": 0.5}).chi1 == 0.0
    with pytest.raises(ConfigError) as err:
        parse_config({"params": {}, "point": {"t": None, "observables": ["g2_1"]}})
    assert err.value.location == "point.t"


def test_sweep_and_point_are_exclusive():
    data = dict(BASE, point={"t": 1.0, "observables": ["g2_1"]})
    with pytest.raises(ConfigError, match="exactly one"):
        parse_config(data)
    without = {k: v for k, v in BASE.items() if k != "sweep"}
    with pytest.raises(ConfigError, match="exactly one"):
        parse_config(without)


def test_unknown_top_level_key():
    with pytest.raises(ConfigError) as err:
        parse_config(dict(BASE, extra=1))
    assert err.value.location == "extra"


def test_load_config_names_run_after_file(tmp_path):
    path = tmp_path / "my_run.json"
    path.write_text('{"params": {}, "point": {"t": 1, "observables": ["g2_1"]}}')
    assert load_config(str(path)).name == "my_run"


def test_output_path_precedence(monkeypatch):
    monkeypatch.delenv(OUTPUT_ENV, raising=False)
    assert output_path(None, None, "run", "csv") == "run.csv"
    assert output_path(None, "cfg.csv", "run", "csv") == "cfg.csv"
    monkeypatch.setenv(OUTPUT_ENV, "env.csv")
    assert output_path(None, "cfg.csv", "run", "csv") == "env.csv"
    assert output_path("cli.csv", "cfg.csv", "run", "csv") == "cli.csv"
