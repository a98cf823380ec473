"""
Observable sweeps over lambda or time, and the figure parameter presets.
"""
import dataclasses
import logging
import math
import os
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Literal, Mapping, Optional, Sequence, Tuple

import numpy as np

from kerrcavity.errors import KerrCavityError, NumericalError, ParameterError
from kerrcavity.model import Deformation, FockTruncation, ModelParams, choose_truncation
from kerrcavity.observables import evaluate, observable
from kerrcavity.oracle import (
    IntegratorSettings,
    amplitude_deviation,
    integrate_full,
    integrate_rwa,
    product_state,
)
from kerrcavity.solver import LAMBDA_FLOOR, ClosedFormSolution

logger = logging.getLogger(__name__)

Variable = Literal["lambda", "time"]
Engine = Literal["closed", "rwa", "full", "both"]

ENGINES = ("closed", "rwa", "full", "both")
DEFAULT_TAIL_EPS = 1e-12


@dataclass(frozen=True)
class SweepSpec:
    """
    variable "lambda" evaluates every lambda in [start, stop] at `time`;
    variable "time" evaluates every t in [start, stop] at params.lam.
    """

    variable: Variable
    start: float
    stop: float
    points: int
    params: ModelParams
    observables: Tuple[str, ...]
    engine: Engine = "closed"
    time: float = 1.0
    tail_eps: float = DEFAULT_TAIL_EPS
    n_max: Optional[int] = None
    integrator: IntegratorSettings = IntegratorSettings()
    metadata: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.variable not in ("lambda", "time"):
            raise ParameterError(f"unknown sweep variable {self.variable!r}")
        if self.engine not in ENGINES:
            raise ParameterError(f"unknown engine {self.engine!r}")
        if not (math.isfinite(self.start) and math.isfinite(self.stop)):
            raise ParameterError("sweep range must be finite")
        if self.start > self.stop:
            raise ParameterError(f"sweep range needs start <= stop, got [{self.start}, {self.stop}]")
        if self.points < 2:
            raise ParameterError(f"a sweep needs at least 2 points, got {self.points}")
        if not self.observables:
            raise ParameterError("a sweep needs at least one observable")
        for name in self.observables:
            observable(name)
        if self.variable == "lambda":
            if self.start < 0:
                raise ParameterError("lambda must be >= 0")
            if self.engine == "closed" and self.start < LAMBDA_FLOOR:
                raise ParameterError(
                    f"the closed form needs lambda >= {LAMBDA_FLOOR:g}; "
                    "raise the sweep start or use engine 'both'"
                )
            if self.time < 0:
                raise ParameterError("evaluation time must be >= 0")
        elif self.start < 0:
            raise ParameterError("time sweeps start at t >= 0")
        if self.n_max is not None and self.n_max < 4:
            raise ParameterError(f"n_max must be >= 4, got {self.n_max}")

    def grid(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.points)

    def truncation(self) -> FockTruncation:
        if self.n_max is not None:
            return FockTruncation(n_max=self.n_max, tail_eps=self.tail_eps)
        return choose_truncation(self.params.alpha1, self.params.alpha2, self.tail_eps)


@dataclass
class ObservableRecord:
    x: float
    values: Dict[str, float] = field(default_factory=dict)
    oracle: Dict[str, float] = field(default_factory=dict)
    delta: Dict[str, float] = field(default_factory=dict)
    amp_delta: Optional[float] = None
    error: Optional[str] = None

    @property
    def failed(self) -> bool:
        return not self.values


@dataclass
class SweepResult:
    spec: SweepSpec
    rows: List[ObservableRecord]
    elapsed: float

    @property
    def failures(self) -> int:
        return sum(row.failed for row in self.rows)

    def max_delta(self) -> Optional[float]:
        deltas = [d for row in self.rows for d in row.delta.values()]
        deltas += [row.amp_delta for row in self.rows if row.amp_delta is not None]
        return max(deltas) if deltas else None

    def column(self, name: str) -> np.ndarray:
        return np.array([row.values.get(name, np.nan) for row in self.rows])


def engine_states(
    engine: str,
    params: ModelParams,
    trunc: FockTruncation,
    times: Sequence[float],
    settings: IntegratorSettings,
) -> list:
    """States of one engine at every time in a uniform, nondecreasing grid."""
    if engine == "closed":
        solution = ClosedFormSolution(params, trunc)
        return [solution.at(t) for t in times]
    if engine == "rwa":
        traj = integrate_rwa(params, trunc, times, settings)
        return [traj.amplitudes(i) for i in range(len(times))]
    if engine == "full":
        return integrate_full(params, trunc, product_state(params, trunc), times, settings)
    raise ParameterError(f"unknown engine {engine!r}")


def _describe(err: Exception) -> str:
    return f"{type(err).__name__}: {err}"


class _Evaluator:
    """Turns per-engine states (or their errors) into one record."""

    def __init__(self, observables: Sequence[str], engine: str):
        self.observables = tuple(observables)
        self.engine = engine

    def record(self, x: float, primary, oracle=None) -> ObservableRecord:
        row = ObservableRecord(x=float(x))
        errors = []
        values = oracle_values = None
        if isinstance(primary, Exception):
            errors.append(_describe(primary))
        else:
            try:
                values = evaluate(primary, self.observables)
            except KerrCavityError as err:
                errors.append(_describe(err))
        if self.engine == "both":
            if isinstance(oracle, Exception):
                errors.append(f"oracle {_describe(oracle)}")
            else:
                try:
                    oracle_values = evaluate(oracle, self.observables)
                except KerrCavityError as err:
                    errors.append(f"oracle {_describe(err)}")
            if oracle_values is not None:
                row.oracle = oracle_values
            if values is not None and oracle_values is not None:
                row.delta = {k: abs(values[k] - oracle_values[k]) for k in self.observables}
                row.amp_delta = amplitude_deviation(primary, oracle)
        row.values = values if values is not None else (oracle_values or {})
        row.error = "; ".join(errors) or None
        return row


def _states_or_error(engine, params, trunc, times, settings) -> list:
    try:
        return engine_states(engine, params, trunc, times, settings)
    except KerrCavityError as err:
        logger.debug(f"{engine} engine failed: {err}")
        return [err] * len(times)


def _engine_pair(
    engine: str, params: ModelParams, trunc: FockTruncation, times, settings: IntegratorSettings
) -> Tuple[list, list]:
    """Primary states and, for engine 'both', the post-RWA oracle states."""
    if engine != "both":
        return _states_or_error(engine, params, trunc, times, settings), [None] * len(times)
    oracle = _states_or_error("rwa", params, trunc, times, settings)
    if params.lam < LAMBDA_FLOOR:
        # the closed form divides by lambda; the oracle stands in for it
        return oracle, oracle
    return _states_or_error("closed", params, trunc, times, settings), oracle


def evaluate_point(
    params: ModelParams,
    trunc: FockTruncation,
    t: float,
    observables: Sequence[str],
    engine: str = "closed",
    settings: IntegratorSettings = IntegratorSettings(),
) -> ObservableRecord:
    """
    Single (params, t) evaluation. Unlike run_sweep, a failure with no value
    to report raises the underlying error.
    """
    if engine not in ENGINES:
        raise ParameterError(f"unknown engine {engine!r}")
    if t < 0:
        raise ParameterError("evaluation time must be >= 0")
    for name in observables:
        observable(name)
    primary, oracle = _engine_pair(engine, params, trunc, [t], settings)
    row = _Evaluator(observables, engine).record(t, primary[0], oracle[0])
    if row.failed:
        for candidate in (primary[0], oracle[0]):
            if isinstance(candidate, Exception):
                raise candidate
        raise NumericalError(row.error)
    return row


def run_sweep(spec: SweepSpec, workers: Optional[int] = None) -> SweepResult:
    """
    Evaluate the requested observables at every grid point, rows in grid order.

    Failures are recorded per row; NumericalError is raised only when no row
    produced a value.
    """
    start = time.time()
    trunc = spec.truncation()
    grid = spec.grid()
    evaluator = _Evaluator(spec.observables, spec.engine)
    workers = workers or min(spec.points, os.cpu_count() or 1)
    logger.info(
        f"sweep over {spec.variable} in [{spec.start:g}, {spec.stop:g}] "
        f"({spec.points} points, engine={spec.engine}, n_max={trunc.n_max})"
    )

    if spec.variable == "lambda":

        def lambda_point(x):
            params = dataclasses.replace(spec.params, lam=float(x))
            primary, oracle = _engine_pair(spec.engine, params, trunc, [spec.time], spec.integrator)
            logger.debug(f"lambda={x:.6g} done")
            return evaluator.record(x, primary[0], oracle[0])

        with ThreadPoolExecutor(max_workers=workers) as executor:
            rows = list(executor.map(lambda_point, grid))
    else:
        primary, oracle = _engine_pair(spec.engine, spec.params, trunc, grid, spec.integrator)
        with ThreadPoolExecutor(max_workers=workers) as executor:
            rows = list(executor.map(evaluator.record, grid, primary, oracle))

    result = SweepResult(spec=spec, rows=rows, elapsed=time.time() - start)
    logger.info(f"sweep finished: {len(rows)} points, {result.failures} failed, {result.elapsed:.2f} secs")
    if result.failures == len(rows):
        raise NumericalError(
            f"every sweep point failed; first error at {spec.variable}={rows[0].x:g}: {rows[0].error}"
        )
    return result


_FIGURES: Dict[str, Dict] = {
    "fig2": dict(delta=30.0, chi1=1.0, chi2=1.0, observables=("pnd_10_10",)),
    "fig3": dict(delta=10.0, chi1=1.0, chi2=1.0, observables=("mandel_q1",)),
    "fig4": dict(delta=10.0, chi1=1.0, chi2=1.0, observables=("g2_1",)),
    "fig5": dict(delta=10.0, chi1=0.0, chi2=0.0, observables=("sx_1", "sp_1")),
    "fig6": dict(delta=10.0, chi1=0.0, chi2=0.0, observables=("linear_entropy",)),
}
PANELS = ("a", "b", "c", "d")
PRESET_IDS = tuple(f"{fig}{panel}" for fig in _FIGURES for panel in PANELS)

LAMBDA_RANGE = (0.01, 2.0, 50)
TIME_RANGE = (0.0, 10.0, 201)


def parse_preset(preset_id: str) -> Tuple[str, str]:
    match = re.fullmatch(r"(fig[2-6])([a-d])", preset_id.strip().lower())
    if not match:
        raise ParameterError(f"unknown preset {preset_id!r}; expected one of {', '.join(PRESET_IDS)}")
    return match.group(1), match.group(2)


def figure_preset(figure: str, panel: str, points: Optional[int] = None, engine: Engine = "closed") -> SweepSpec:
    """
    Parameters of one figure panel. Panels a and c sweep lambda at t = 1,
    b and d sweep t at lambda = 1; c and d use f(n) = sqrt(n).
    """
    if figure not in _FIGURES or panel not in PANELS:
        raise ParameterError(f"unknown preset {figure}{panel}")
    fig = _FIGURES[figure]
    deformation = Deformation("sqrt") if panel in ("c", "d") else Deformation("linear")
    params = ModelParams(
        lam=1.0,
        epsilon=fig["delta"],
        phi=0.0,
        delta=fig["delta"],
        chi1=fig["chi1"],
        chi2=fig["chi2"],
        chi12=0.0,
        alpha1=1.0,
        alpha2=1.0,
        gamma=(1 / math.sqrt(2), 1 / math.sqrt(2), 0.0, 0.0),
        deformation=deformation,
        gamma_policy="paper_ansatz",
    )
    sweeps_lambda = panel in ("a", "c")
    start, stop, default_points = LAMBDA_RANGE if sweeps_lambda else TIME_RANGE
    metadata = {
        "preset": f"{figure}{panel}",
        "epsilon": "not given in the caption; set to delta",
        "chi": "caption chi read as the cross-Kerr constant chi12",
        "gamma": "gamma3 = gamma4 = 0; ansatz weights (g1, g2, g2, g4) rescaled to unit norm",
        "fixed": "t = 1" if sweeps_lambda else "lambda = 1",
        "tail_eps": f"{DEFAULT_TAIL_EPS:g} (plot truncation not stated)",
    }
    if figure == "fig4":
        metadata["kerr"] = "caption 'chi=0=chi1=chi2=1' read as chi12 = 0, chi1 = chi2 = 1"
    if figure == "fig5":
        metadata["squeezing"] = (
            "negative s_x, s_p not reproduced: with these weights mode 1 starts at "
            "s_x = 0.404, s_p = 0.677 and stays positive; the pair quadrature goes "
            "negative when gamma1 = 1"
        )
    return SweepSpec(
        variable="lambda" if sweeps_lambda else "time",
        start=start,
        stop=stop,
        points=points or default_points,
        params=params,
        observables=fig["observables"],
        engine=engine,
        time=1.0,
        metadata=metadata,
    )


def preset(preset_id: str, points: Optional[int] = None, engine: Engine = "closed") -> SweepSpec:
    figure, panel = parse_preset(preset_id)
    return figure_preset(figure, panel, points=points, engine=engine)
