"""
Independent numerical propagation used to check the closed form.

Three fidelity levels, all with the classical fixed-step fourth-order
Runge-Kutta scheme:

  integrate_rwa      per-cell (C1, C2, C4) equations after dropping fast terms
  integrate_pre_rwa  the same equations with fast and slow exponentials
  integrate_full     the effective Hamiltonian on atom x atom x mode x mode

The post-RWA equations are stepped in the frame X1 = C1 exp(i(a t + phi)),
X4 = C4 exp(-i(b t + phi)), where their coefficients are constant. One RK4
step is then a fixed 3 x 3 matrix per cell, and the n steps of an output
interval are applied as its n-th power.

Full basis ordering is |atomA, atomB, n1, n2> with atom index 0 = e, 1 = g and
flat index ((A * 2 + B) * D + n1) * D + n2, D = n_max + 3.
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional

import numpy as np
from scipy import sparse

from kerrcavity.errors import ParameterError, StepTooLarge, TruncationLeak
from kerrcavity.model import (
    BranchCoefficients,
    CoherentWeights,
    FockTruncation,
    ModelParams,
    branch_grid,
    field_weights,
)
from kerrcavity.solver import AmplitudeSet, ClosedFormSolution

logger = logging.getLogger(__name__)

NORM_DRIFT_TOL = 1e-6
LEAK_TOL = 1e-8


@dataclass(frozen=True)
class IntegratorSettings:
    """
    step: largest step inside any output interval.
    max_phase: largest phase a single step may advance in a cell (or in the
    full Hamiltonian); the step shrinks to respect it. None keeps `step`.
    """

    step: float = 1e-3
    max_phase: Optional[float] = 0.01

    def __post_init__(self):
        if not self.step > 0:
            raise ParameterError(f"integrator step must be > 0, got {self.step}")
        if self.max_phase is not None and not self.max_phase > 0:
            raise ParameterError(f"max_phase must be > 0 or None, got {self.max_phase}")


def _check_grid(t_grid, t0: float = 0.0) -> np.ndarray:
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size == 0:
        raise ParameterError("time grid must be a non-empty 1-d sequence")
    if t_grid[0] < t0 or np.any(np.diff(t_grid) < 0):
        raise ParameterError(f"time grid must be nondecreasing and start at >= {t0}")
    if t_grid.size > 2:
        spacing = np.diff(t_grid)
        if not np.allclose(spacing, spacing[0], rtol=1e-9, atol=1e-12):
            raise ParameterError("time grid must be uniform")
    return t_grid


def _rk4_step(rhs: Callable, t: float, y: np.ndarray, h: float) -> np.ndarray:
    k1 = rhs(t, y)
    k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1)
    k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2)
    k4 = rhs(t + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _propagate(rhs: Callable, y0: np.ndarray, t_grid: np.ndarray, h: float, t0: float = 0.0):
    """Fixed steps no longer than h inside every interval of [t0, t_grid...]."""
    t = t0
    y = y0
    out = []
    for target in t_grid:
        span = float(target) - t
        n_steps = int(math.ceil(span / h - 1e-9)) if span > 0 else 0
        if n_steps:
            dt = span / n_steps
            for i in range(n_steps):
                y = _rk4_step(rhs, t + i * dt, y, dt)
        t = float(target)
        out.append(y.copy())
    return out


def _rk4_step_matrix(generator: np.ndarray, h: float) -> np.ndarray:
    """RK4 update matrix for y' = K y: I + Z + Z^2/2 + Z^3/6 + Z^4/24, Z = h K."""
    z = h * generator
    step = np.broadcast_to(np.eye(generator.shape[-1], dtype=complex), generator.shape).copy()
    term = step.copy()
    for k in range(1, 5):
        term = term @ z / k
        step += term
    return step


def _propagate_linear(generator: np.ndarray, y0: np.ndarray, t_grid: np.ndarray, h: float, t0: float = 0.0):
    """
    _propagate for autonomous linear systems y' = K y, with K stacked per
    cell as (cells, m, m). Same steps, applied as a matrix power.
    """
    t = t0
    y = y0
    out = []
    for target in t_grid:
        span = float(target) - t
        n_steps = int(math.ceil(span / h - 1e-9)) if span > 0 else 0
        if n_steps:
            step = _rk4_step_matrix(generator, span / n_steps)
            y = (np.linalg.matrix_power(step, n_steps) @ y[..., None])[..., 0]
        t = float(target)
        out.append(y.copy())
    return out


def _step_size(settings: IntegratorSettings, omega: float) -> float:
    if settings.max_phase is None or omega <= 0:
        return settings.step
    return min(settings.step, settings.max_phase / omega)


@dataclass(frozen=True)
class CTrajectory:
    """
    Slowly varying amplitudes C1, C2, C4 per cell on the output grid,
    c[i, n1, n2, :] at times[i]. cell_step holds the step each cell used.
    """

    times: np.ndarray
    c: np.ndarray
    scheme: str
    cell_step: np.ndarray
    coefficients: BranchCoefficients
    weights: CoherentWeights

    def norms(self) -> np.ndarray:
        c = self.c
        return np.abs(c[..., 0]) ** 2 + 2 * np.abs(c[..., 1]) ** 2 + np.abs(c[..., 2]) ** 2

    def amplitudes(self, i: int) -> AmplitudeSet:
        """A = C exp(-i T t) at output index i, in the solver's convention."""
        t = float(self.times[i])
        bc = self.coefficients
        c = self.c[i]
        return AmplitudeSet(
            t=t,
            a1=c[..., 0] * np.exp(-1j * bc.t1 * t),
            a2=c[..., 1] * np.exp(-1j * bc.t2 * t),
            a4=c[..., 2] * np.exp(-1j * bc.t4 * t),
            weights=self.weights,
        )


def _cell_generator_rwa(params: ModelParams, a, b, v1, v2) -> np.ndarray:
    """
    K with X' = K X for X = (X1, C2, X4). In the lab frame
    C1' = -i lam V1 exp(-i(a t + phi)) C2,
    C2' = -i lam/2 (V1 exp(i(a t + phi)) C1 + V2 exp(-i(b t + phi)) C4),
    C4' = -i lam V2 exp(i(b t + phi)) C2.
    """
    lam = params.lam
    k = np.zeros((a.size, 3, 3), dtype=complex)
    k[:, 0, 0] = 1j * a
    k[:, 0, 1] = -1j * lam * v1
    k[:, 1, 0] = -0.5j * lam * v1
    k[:, 1, 2] = -0.5j * lam * v2
    k[:, 2, 1] = -1j * lam * v2
    k[:, 2, 2] = -1j * b
    return k


def _to_rotating(params: ModelParams, a, b, c: np.ndarray, t: float) -> np.ndarray:
    x = c.copy()
    x[..., 0] *= np.exp(1j * (a * t + params.phi))
    x[..., 2] *= np.exp(-1j * (b * t + params.phi))
    return x


def _from_rotating(params: ModelParams, a, b, x: np.ndarray, t: float) -> np.ndarray:
    c = x.copy()
    c[..., 0] *= np.exp(-1j * (a * t + params.phi))
    c[..., 2] *= np.exp(1j * (b * t + params.phi))
    return c


def _cell_rhs_pre_rwa(params: ModelParams, d, e, v1, v2) -> Callable:
    lam, phi, eps = params.lam, params.phi, params.epsilon

    def rhs(t, y):
        fast_d = np.exp(1j * ((eps + d) * t + phi))
        slow_d = np.exp(1j * ((eps - d) * t + phi))
        fast_e = np.exp(1j * ((eps + e) * t + phi))
        slow_e = np.exp(1j * ((eps - e) * t + phi))
        out = np.empty_like(y)
        out[:, 0] = -1j * lam * v1 * (fast_d + np.conj(slow_d)) * y[:, 1]
        out[:, 1] = -0.5j * lam * (
            v1 * (slow_d + np.conj(fast_d)) * y[:, 0]
            + v2 * (fast_e + np.conj(slow_e)) * y[:, 2]
        )
        out[:, 2] = -1j * lam * v2 * (slow_e + np.conj(fast_e)) * y[:, 1]
        return out

    return rhs


def _integrate_cells(
    params: ModelParams,
    trunc: FockTruncation,
    t_grid,
    settings: IntegratorSettings,
    pre_rwa: bool,
) -> CTrajectory:
    t_grid = _check_grid(t_grid)
    bc = branch_grid(params, trunc)
    shape = bc.v1.shape
    v1 = bc.v1.ravel()
    v2 = bc.v2.ravel()
    d = (bc.t1 - bc.t2).ravel()
    e = (bc.t2 - bc.t4).ravel()
    a = params.epsilon - d
    b = params.epsilon - e
    if pre_rwa:
        omega = 2 * abs(params.epsilon) + np.abs(d) + np.abs(e) + params.lam * (v1 + v2)
    else:
        omega = np.abs(a) + np.abs(b) + params.lam * (v1 + v2)

    # cells sharing a step size are integrated together
    if settings.max_phase is None:
        levels = np.zeros(v1.size, dtype=int)
    else:
        needed = np.maximum(1.0, settings.step * omega / settings.max_phase)
        levels = np.ceil(np.log2(needed) - 1e-12).astype(int)

    g1, g2, g4 = params.ansatz_weights()
    c = np.empty((t_grid.size, v1.size, 3), dtype=complex)
    cell_step = np.empty(v1.size)
    for level in np.unique(levels):
        idx = np.nonzero(levels == level)[0]
        h = settings.step / 2.0**level
        cell_step[idx] = h
        y0 = np.empty((idx.size, 3), dtype=complex)
        y0[:] = (g1, g2, g4)
        logger.debug(f"{idx.size} cells at step {h:.3g}")
        if pre_rwa:
            rhs = _cell_rhs_pre_rwa(params, d[idx], e[idx], v1[idx], v2[idx])
            for i, y in enumerate(_propagate(rhs, y0, t_grid, h)):
                c[i, idx] = y
        else:
            a_idx, b_idx = a[idx], b[idx]
            generator = _cell_generator_rwa(params, a_idx, b_idx, v1[idx], v2[idx])
            x0 = _to_rotating(params, a_idx, b_idx, y0, 0.0)
            for i, x in enumerate(_propagate_linear(generator, x0, t_grid, h)):
                c[i, idx] = _from_rotating(params, a_idx, b_idx, x, float(t_grid[i]))

    scheme = "rk4/pre_rwa" if pre_rwa else "rk4/post_rwa"
    traj = CTrajectory(
        times=t_grid,
        c=c.reshape((t_grid.size,) + shape + (3,)),
        scheme=scheme,
        cell_step=cell_step.reshape(shape),
        coefficients=bc,
        weights=field_weights(params, trunc),
    )
    drift = np.abs(traj.norms() - 1.0).max()
    if drift > NORM_DRIFT_TOL:
        raise StepTooLarge(f"{scheme}: per-cell norm drift {drift:.3e} exceeds {NORM_DRIFT_TOL:g}")
    return traj


def integrate_rwa(
    params: ModelParams,
    trunc: FockTruncation,
    t_grid,
    settings: IntegratorSettings = IntegratorSettings(),
) -> CTrajectory:
    return _integrate_cells(params, trunc, t_grid, settings, pre_rwa=False)


def integrate_pre_rwa(
    params: ModelParams,
    trunc: FockTruncation,
    t_grid,
    settings: IntegratorSettings = IntegratorSettings(),
) -> CTrajectory:
    return _integrate_cells(params, trunc, t_grid, settings, pre_rwa=True)


@dataclass(frozen=True)
class TruncatedState:
    t: float
    vector: np.ndarray
    dim: int

    def branch_fields(self) -> np.ndarray:
        return self.vector.reshape(4, self.dim, self.dim)

    def norm(self) -> float:
        return float(np.vdot(self.vector, self.vector).real)


def product_state(params: ModelParams, trunc: FockTruncation) -> TruncatedState:
    """(g1|ee> + g2|eg> + g3|ge> + g4|gg>) x |alpha1> x |alpha2>, truncated at n_max."""
    dim = trunc.dim
    weights = field_weights(params, trunc)
    q1 = np.zeros(dim, dtype=complex)
    q2 = np.zeros(dim, dtype=complex)
    q1[: trunc.n_max + 1] = weights.q1
    q2[: trunc.n_max + 1] = weights.q2
    atoms = np.asarray(params.gamma, dtype=complex)
    return TruncatedState(t=0.0, vector=np.kron(atoms, np.kron(q1, q2)), dim=dim)


def ansatz_state(amps: AmplitudeSet) -> TruncatedState:
    """Embed closed-form amplitudes in the full basis."""
    fields = amps.branch_fields()
    return TruncatedState(t=amps.t, vector=fields.ravel(), dim=fields.shape[-1])


def excitation_blocks(dim: int):
    """
    Conserved labels (N1 + atomic excitations, N2 + atomic excitations) of
    every basis state.
    """
    atom_a, atom_b, n1, n2 = np.meshgrid(
        np.arange(2), np.arange(2), np.arange(dim), np.arange(dim), indexing="ij"
    )
    excited = (atom_a == 0).astype(int) + (atom_b == 0).astype(int)
    return (n1 + excited).ravel(), (n2 + excited).ravel()


class FullHamiltonian:
    """
    H(t) = H0 + g(t) [exp(-i Delta t) X + exp(i Delta t) X^dag] with
    X = R1 R2 (sigma+^A + sigma+^B), R_j = a_j f(N_j), H0 diagonal.
    """

    def __init__(self, params: ModelParams, trunc: FockTruncation):
        self.params = params
        self.dim = dim = trunc.dim
        params.deformation.require(dim - 1)

        n = np.arange(dim)
        lower = sparse.diags(np.sqrt(n[1:].astype(float)), 1, format="csr")
        deform = sparse.diags(params.deformation(n).astype(float), 0, format="csr")
        ladder = lower @ deform
        sigma_plus = sparse.csr_matrix(np.array([[0.0, 1.0], [0.0, 0.0]]))
        eye2 = sparse.identity(2, format="csr")
        eye_f = sparse.identity(dim, format="csr")

        def embed(op_a, op_b, op_1, op_2):
            return sparse.kron(sparse.kron(sparse.kron(op_a, op_b), op_1), op_2, format="csr")

        r1 = embed(eye2, eye2, ladder, eye_f)
        r2 = embed(eye2, eye2, eye_f, ladder)
        raise_atoms = embed(sigma_plus, eye2, eye_f, eye_f) + embed(eye2, sigma_plus, eye_f, eye_f)
        self.x = (r1 @ r2 @ raise_atoms).astype(complex).tocsr()
        self.x_dag = self.x.conj().T.tocsr()

        atom_a, atom_b, n1, n2 = np.meshgrid(
            np.arange(2), np.arange(2), n, n, indexing="ij"
        )
        energy = np.zeros(atom_a.shape)
        for atom in (atom_a, atom_b):
            excited = atom == 0
            energy += np.where(excited, 0.5 * params.delta, -0.5 * params.delta)
            energy += np.where(excited, params.beta2 * n2, params.beta1 * n1)
        energy += params.chi1 * n1 * (n1 - 1) + params.chi2 * n2 * (n2 - 1)
        energy += params.chi12 * n1 * n2
        self.h0 = energy.ravel()

        col_sum = np.asarray(abs(self.x).sum(axis=0)).ravel()
        self.spectral_bound = float(np.abs(self.h0).max() + 2 * params.lam * col_sum.max())

    def apply(self, t: float, psi: np.ndarray) -> np.ndarray:
        g = self.params.coupling(t)
        rot = np.exp(-1j * self.params.delta * t)
        return self.h0 * psi + g * (rot * (self.x @ psi) + np.conj(rot) * (self.x_dag @ psi))


def _leaked_population(vector: np.ndarray, dim: int) -> float:
    k1, k2 = excitation_blocks(dim)
    cut = (k1 > dim - 1) | (k2 > dim - 1)
    return float(np.sum(np.abs(vector[cut]) ** 2))


def integrate_full(
    params: ModelParams,
    trunc: FockTruncation,
    initial: TruncatedState,
    t_grid,
    settings: IntegratorSettings = IntegratorSettings(),
) -> List[TruncatedState]:
    """
    Propagate `initial` under the effective Hamiltonian.

    Blocks with N_j + excitations above the Fock cap are cut by the truncation;
    population there raises TruncationLeak.
    """
    if initial.dim != trunc.dim:
        raise ParameterError(f"initial state dimension {initial.dim} does not match truncation {trunc.dim}")
    t_grid = _check_grid(t_grid, t0=initial.t)
    ham = FullHamiltonian(params, trunc)

    leaked = _leaked_population(initial.vector, ham.dim)
    if leaked > LEAK_TOL:
        raise TruncationLeak(f"initial population {leaked:.3e} sits in blocks cut by the Fock cap")

    h = _step_size(settings, ham.spectral_bound)
    logger.debug(f"full propagation: dim={initial.vector.size}, step={h:.3g}")

    def rhs(t, psi):
        return -1j * ham.apply(t, psi)

    norm0 = initial.norm()
    states = []
    for t, psi in zip(t_grid, _propagate(rhs, initial.vector.astype(complex), t_grid, h, t0=initial.t)):
        state = TruncatedState(t=float(t), vector=psi, dim=ham.dim)
        drift = abs(state.norm() - norm0)
        if drift > NORM_DRIFT_TOL:
            raise StepTooLarge(f"full propagation: norm drift {drift:.3e} at t={t:.4g}")
        leaked = _leaked_population(psi, ham.dim)
        if leaked > LEAK_TOL:
            raise TruncationLeak(f"population {leaked:.3e} reached truncated blocks at t={t:.4g}")
        states.append(state)
    return states


def amplitude_deviation(x: AmplitudeSet, y: AmplitudeSet) -> float:
    """Max per-cell |dA| over the three branches."""
    return float(
        max(
            np.abs(x.a1 - y.a1).max(),
            np.abs(x.a2 - y.a2).max(),
            np.abs(x.a4 - y.a4).max(),
        )
    )


def state_deviation(x, y) -> float:
    """Max |d psi| between two states exposing branch_fields()."""
    return float(np.abs(x.branch_fields() - y.branch_fields()).max())


def rwa_error(
    params: ModelParams,
    trunc: FockTruncation,
    t_grid,
    settings: IntegratorSettings = IntegratorSettings(),
    include_full: bool = True,
) -> Dict[str, float]:
    """
    Largest deviations of each oracle level from the closed form over t_grid.

    rwa and pre_rwa compare per-cell amplitudes; full compares state
    components, starting from the closed form's own t=0 state.
    """
    closed = ClosedFormSolution(params, trunc)
    t_grid = _check_grid(t_grid)
    report = {}
    for name, integrate in (("rwa", integrate_rwa), ("pre_rwa", integrate_pre_rwa)):
        traj = integrate(params, trunc, t_grid, settings)
        report[name] = max(
            amplitude_deviation(closed.at(t), traj.amplitudes(i)) for i, t in enumerate(t_grid)
        )
    if include_full:
        states = integrate_full(params, trunc, ansatz_state(closed.at(0.0)), t_grid, settings)
        report["full"] = max(
            state_deviation(ansatz_state(closed.at(s.t)), s) for s in states
        )
    return report
