"""
JSON run configuration.

    {
      "params": {"lambda": 1.0, "epsilon": 10, "delta": 10, "chi1": 1, "chi2": 1,
                 "alpha1": 1.0, "alpha2": [1.0, 0.0],
                 "gamma": [0.7071067811865476, 0.7071067811865476, 0, 0],
                 "gamma_policy": "paper_ansatz", "deformation": "sqrt"},
      "truncation": {"tail_eps": 1e-12},
      "integrator": {"step": 1e-3, "max_phase": 0.01},
      "sweep": {"variable": "time", "start": 0, "stop": 10, "points": 201,
                "observables": ["mandel_q1"], "engine": "closed"},
      "output": {"format": "csv", "path": "fig3b.csv"},
      "seed": 42
    }

Exactly one of "sweep" and "point" ({"t": 1.0, "observables": [...], "engine": ...})
must be present. Errors name the offending key as a dotted path.
"""
import json
import logging
import math
import os
from dataclasses import dataclass
from typing import Any, Dict, Optional, Tuple

from kerrcavity.errors import ConfigError, ParameterError
from kerrcavity.model import DEFAULT_CAP, Deformation, FockTruncation, ModelParams, choose_truncation
from kerrcavity.oracle import IntegratorSettings
from kerrcavity.sweep import DEFAULT_TAIL_EPS, ENGINES, SweepSpec

logger = logging.getLogger(__name__)

OUTPUT_ENV = "KERRCAVITY_OUT"
FORMATS = ("csv", "json", "svg")

_MISSING = object()


class _Section:
    """Typed access to one JSON object; unread keys are reported by finish()."""

    def __init__(self, data: Any, location: str):
        if not isinstance(data, dict):
            raise ConfigError(location, "expected an object")
        self.data = data
        self.location = location
        self.seen = set()

    def where(self, key: str) -> str:
        return f"{self.location}.{key}" if self.location else key

    def raw(self, key: str, default=_MISSING):
        self.seen.add(key)
        # null stands for the default; a required key may not be null
        if key not in self.data or (self.data[key] is None and default is not _MISSING):
            if default is _MISSING:
                raise ConfigError(self.where(key), "required key is missing")
            return default
        return self.data[key]

    def number(self, key: str, default=_MISSING) -> Optional[float]:
        value = self.raw(key, default)
        if value is default and default is not _MISSING:
            return value
        return _as_float(value, self.where(key))

    def integer(self, key: str, default=_MISSING) -> Optional[int]:
        value = self.raw(key, default)
        if value is default and default is not _MISSING:
            return value
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(self.where(key), f"expected an integer, got {value!r}")
        return value

    def complex(self, key: str, default=_MISSING) -> complex:
        value = self.raw(key, default)
        if value is default and default is not _MISSING:
            return value
        return _as_complex(value, self.where(key))

    def choice(self, key: str, choices, default=_MISSING) -> str:
        value = self.raw(key, default)
        if value not in choices:
            raise ConfigError(self.where(key), f"expected one of {', '.join(choices)}, got {value!r}")
        return value

    def strings(self, key: str, default=_MISSING) -> Tuple[str, ...]:
        value = self.raw(key, default)
        if not isinstance(value, (list, tuple)) or not all(isinstance(v, str) for v in value):
            raise ConfigError(self.where(key), "expected a list of strings")
        return tuple(value)

    def section(self, key: str) -> Optional["_Section"]:
        value = self.raw(key, None)
        return None if value is None else _Section(value, self.where(key))

    def finish(self) -> None:
        unknown = sorted(set(self.data) - self.seen)
        if unknown:
            raise ConfigError(self.where(unknown[0]), "unknown key")


def _as_float(value: Any, location: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(location, f"expected a number, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(location, "must be finite")
    return float(value)


def _as_complex(value: Any, location: str) -> complex:
    if isinstance(value, (list, tuple)):
        if len(value) != 2:
            raise ConfigError(location, "complex numbers are [re, im]")
        return complex(_as_float(value[0], location), _as_float(value[1], location))
    if isinstance(value, dict):
        section = _Section(value, location)
        result = complex(section.number("re", 0.0), section.number("im", 0.0))
        section.finish()
        return result
    return complex(_as_float(value, location), 0.0)


def _deformation(value: Any, location: str) -> Deformation:
    if value in ("linear", "sqrt"):
        return Deformation(value)
    if isinstance(value, dict) and set(value) == {"custom"}:
        table = value["custom"]
        if not isinstance(table, list) or not table:
            raise ConfigError(f"{location}.custom", "expected a non-empty list of f(n) values")
        try:
            return Deformation("custom", tuple(_as_float(v, f"{location}.custom") for v in table))
        except ParameterError as err:
            raise ConfigError(f"{location}.custom", str(err)) from err
    raise ConfigError(location, 'expected "linear", "sqrt" or {"custom": [...]}')


_RATES = (
    ("lambda", "lam", 1.0),
    ("epsilon", "epsilon", 0.0),
    ("phi", "phi", 0.0),
    ("delta", "delta", 0.0),
    ("beta1", "beta1", 0.0),
    ("beta2", "beta2", 0.0),
    ("chi1", "chi1", 0.0),
    ("chi2", "chi2", 0.0),
    ("chi12", "chi12", 0.0),
)


def parse_params(data: Any, location: str = "params") -> ModelParams:
    section = _Section(data, location)
    kwargs: Dict[str, Any] = {attr: section.number(key, default) for key, attr, default in _RATES}
    if kwargs["lam"] < 0:
        raise ConfigError(section.where("lambda"), "must be >= 0")
    kwargs["alpha1"] = section.complex("alpha1", 1.0)
    kwargs["alpha2"] = section.complex("alpha2", 1.0)

    gamma = section.raw("gamma", [1.0, 0.0, 0.0, 0.0])
    if not isinstance(gamma, list) or len(gamma) != 4:
        raise ConfigError(section.where("gamma"), "expected four atomic weights")
    gamma = tuple(_as_complex(g, f"{section.where('gamma')}[{i}]") for i, g in enumerate(gamma))
    norm = sum(abs(g) ** 2 for g in gamma)
    if abs(norm - 1.0) > 1e-12:
        raise ConfigError(
            section.where("gamma"), f"atomic weights must satisfy sum |gamma_k|^2 = 1, got {norm:.12g}"
        )
    kwargs["gamma"] = gamma

    kwargs["deformation"] = _deformation(section.raw("deformation", "linear"), section.where("deformation"))
    conventions = ("corrected", "paper_literal")
    kwargs["t4_convention"] = section.choice("t4_convention", conventions, "corrected")
    kwargs["a1_convention"] = section.choice("a1_convention", conventions, "corrected")
    kwargs["gamma_policy"] = section.choice("gamma_policy", ("strict", "paper_ansatz"), "strict")
    section.finish()
    try:
        return ModelParams(**kwargs)
    except ParameterError as err:
        raise ConfigError(location, str(err)) from err


@dataclass(frozen=True)
class TruncationSettings:
    tail_eps: float = DEFAULT_TAIL_EPS
    n_max: Optional[int] = None
    cap: int = DEFAULT_CAP

    def resolve(self, params: ModelParams) -> FockTruncation:
        if self.n_max is not None:
            return FockTruncation(n_max=self.n_max, tail_eps=self.tail_eps)
        return choose_truncation(params.alpha1, params.alpha2, self.tail_eps, self.cap)


@dataclass(frozen=True)
class PointRequest:
    t: float
    observables: Tuple[str, ...]
    engine: str = "closed"


@dataclass(frozen=True)
class OutputSettings:
    format: str = "csv"
    path: Optional[str] = None


@dataclass(frozen=True)
class ValidationSettings:
    """Random draws and evaluation times for the invariant suite."""

    draws: int = 5
    times: Tuple[float, ...] = (0.0, 0.5, 1.0)
    n_max: int = 6
    tolerance: float = 1e-6


@dataclass(frozen=True)
class RunConfig:
    params: ModelParams
    truncation: TruncationSettings = TruncationSettings()
    integrator: IntegratorSettings = IntegratorSettings()
    sweep: Optional[SweepSpec] = None
    point: Optional[PointRequest] = None
    output: OutputSettings = OutputSettings()
    seed: int = 0
    validation: ValidationSettings = ValidationSettings()
    name: str = "run"


def _parse_truncation(section: Optional[_Section]) -> TruncationSettings:
    if section is None:
        return TruncationSettings()
    tail_eps = section.number("tail_eps", DEFAULT_TAIL_EPS)
    if not 0.0 < tail_eps < 1.0:
        raise ConfigError(section.where("tail_eps"), "must lie in (0, 1)")
    n_max = section.integer("n_max", None)
    if n_max is not None and n_max < 4:
        raise ConfigError(section.where("n_max"), "must be >= 4")
    cap = section.integer("cap", DEFAULT_CAP)
    section.finish()
    return TruncationSettings(tail_eps=tail_eps, n_max=n_max, cap=cap)


def _parse_integrator(section: Optional[_Section]) -> IntegratorSettings:
    if section is None:
        return IntegratorSettings()
    step = section.number("step", 1e-3)
    max_phase = section.number("max_phase", None) if "max_phase" in section.data else 0.01
    section.finish()
    try:
        return IntegratorSettings(step=step, max_phase=max_phase)
    except ParameterError as err:
        raise ConfigError(section.location, str(err)) from err


def _parse_sweep(
    section: _Section, params: ModelParams, truncation: TruncationSettings, integrator: IntegratorSettings
) -> SweepSpec:
    kwargs = dict(
        variable=section.choice("variable", ("lambda", "time")),
        start=section.number("start"),
        stop=section.number("stop"),
        points=section.integer("points"),
        observables=section.strings("observables"),
        engine=section.choice("engine", ENGINES, "closed"),
        time=section.number("time", 1.0),
    )
    section.finish()
    try:
        return SweepSpec(
            params=params,
            tail_eps=truncation.tail_eps,
            n_max=truncation.n_max,
            integrator=integrator,
            **kwargs,
        )
    except ParameterError as err:
        raise ConfigError(section.location, str(err)) from err


def _parse_point(section: _Section) -> PointRequest:
    t = section.number("t")
    if t < 0:
        raise ConfigError(section.where("t"), "must be >= 0")
    request = PointRequest(
        t=t,
        observables=section.strings("observables"),
        engine=section.choice("engine", ENGINES, "closed"),
    )
    section.finish()
    return request


def _parse_validation(section: Optional[_Section]) -> ValidationSettings:
    if section is None:
        return ValidationSettings()
    draws = section.integer("draws", 5)
    if draws < 0:
        raise ConfigError(section.where("draws"), "must be >= 0")
    times = section.raw("times", [0.0, 0.5, 1.0])
    if not isinstance(times, list) or not times:
        raise ConfigError(section.where("times"), "expected a non-empty list of times")
    times = tuple(_as_float(t, section.where("times")) for t in times)
    if any(t < 0 for t in times) or list(times) != sorted(times):
        raise ConfigError(section.where("times"), "times must be >= 0 and nondecreasing")
    n_max = section.integer("n_max", 6)
    if n_max < 4:
        raise ConfigError(section.where("n_max"), "must be >= 4")
    tolerance = section.number("tolerance", 1e-6)
    section.finish()
    return ValidationSettings(draws=draws, times=times, n_max=n_max, tolerance=tolerance)


def parse_config(data: Any, name: str = "run") -> RunConfig:
    root = _Section(data, "")
    params = parse_params(root.raw("params"))
    truncation = _parse_truncation(root.section("truncation"))
    integrator = _parse_integrator(root.section("integrator"))

    sweep_section = root.section("sweep")
    point_section = root.section("point")
    if (sweep_section is None) == (point_section is None):
        raise ConfigError("sweep", 'exactly one of "sweep" and "point" must be given')
    sweep = _parse_sweep(sweep_section, params, truncation, integrator) if sweep_section else None
    point = _parse_point(point_section) if point_section else None

    output_section = root.section("output")
    output = OutputSettings()
    if output_section is not None:
        path = output_section.raw("path", None)
        if path is not None and not isinstance(path, str):
            raise ConfigError(output_section.where("path"), "expected a string")
        output = OutputSettings(format=output_section.choice("format", FORMATS, "csv"), path=path)
        output_section.finish()

    seed = root.integer("seed", 0)
    validation = _parse_validation(root.section("validation"))
    root.finish()
    return RunConfig(
        params=params,
        truncation=truncation,
        integrator=integrator,
        sweep=sweep,
        point=point,
        output=output,
        seed=seed,
        validation=validation,
        name=name,
    )


def load_config(path: str) -> RunConfig:
    try:
        with open(path, "r") as f:
            data = json.load(f)
    except OSError as err:
        raise ConfigError(path, f"cannot read config: {err.strerror}") from err
    except json.JSONDecodeError as err:
        raise ConfigError(path, f"invalid JSON at line {err.lineno}: {err.msg}") from err
    name = os.path.splitext(os.path.basename(path))[0]
    logger.debug(f"loaded config {path}")
    return parse_config(data, name=name)


def output_path(cli_path: Optional[str], configured: Optional[str], name: str, fmt: str) -> str:
    """--out, then $KERRCAVITY_OUT, then the config's path, then '<name>.<fmt>'."""
    return cli_path or os.environ.get(OUTPUT_ENV) or configured or f"{name}.{fmt}"
