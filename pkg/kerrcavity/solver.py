"""
Closed-form solution of the post-RWA amplitude equations.

Every cell (n1, n2) couples |e,e,n1,n2>, |e,g,n1+1,n2+1> (= |g,e,...>) and
|g,g,n1+2,n2+2>. Substituting C4 = exp(imt) turns the cell into the cubic
m^3 + K1 m^2 + K2 m + K3 = 0; the amplitudes are sums over its three roots.
All functions are vectorised over the cell grid (cell index n1 on axis 0).
"""
import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from kerrcavity.errors import ComplexRoots, DecoupledCell, DegenerateRoots, LambdaZero
from kerrcavity.model import (
    BranchCoefficients,
    CoherentWeights,
    FockTruncation,
    ModelParams,
    branch_grid,
    field_weights,
)

logger = logging.getLogger(__name__)

ROOT_SEP_TOL = 1e-8
CLAMP_TOL = 1e-9
LAMBDA_FLOOR = 1e-10

# (k, p, q) with {p, q} the two other roots
_PERMUTATIONS = ((0, 1, 2), (1, 0, 2), (2, 0, 1))


def _first_cell(mask: np.ndarray) -> Optional[Tuple[int, int]]:
    hits = np.argwhere(mask)
    if hits.size == 0 or hits.shape[1] != 2:
        return None
    return int(hits[0][0]), int(hits[0][1])


def _root_scale(k1, k2, k3) -> np.ndarray:
    return np.maximum.reduce(
        [np.ones_like(k1), np.abs(k1), np.sqrt(np.abs(k2)), np.cbrt(np.abs(k3))]
    )


def solve_cubic(
    k1, k2, k3, root_sep_tol: float = ROOT_SEP_TOL, clamp_tol: float = CLAMP_TOL
) -> np.ndarray:
    """
    Three real roots of m^3 + k1 m^2 + k2 m + k3 = 0 by the trigonometric
    formula, each polished by one Newton step and sorted ascending.

    Returns an array with a trailing axis of length 3.
    """
    k1, k2, k3 = np.broadcast_arrays(
        *(np.asarray(k, dtype=float) for k in (k1, k2, k3))
    )
    scale = _root_scale(k1, k2, k3)
    # p is half the sum of squared root gaps
    p = k1 * k1 - 3.0 * k2

    complex_mask = p < -clamp_tol * scale**2
    if np.any(complex_mask):
        raise ComplexRoots(
            "cubic discriminant K1^2 - 3 K2 is negative", _first_cell(complex_mask)
        )
    clustered = p <= (root_sep_tol * scale) ** 2
    if np.any(clustered):
        raise DegenerateRoots("all three roots coincide", _first_cell(clustered))

    sqrt_p = np.sqrt(p)
    arg = (9.0 * k1 * k2 - 2.0 * k1**3 - 27.0 * k3) / (2.0 * p * sqrt_p)
    out_of_range = np.abs(arg) > 1.0 + clamp_tol
    if np.any(out_of_range):
        raise ComplexRoots(
            "arccos argument leaves [-1, 1]; inputs are outside the physical regime",
            _first_cell(out_of_range),
        )
    phase = np.arccos(np.clip(arg, -1.0, 1.0)) / 3.0

    j = np.arange(3)
    roots = (-k1 / 3.0)[..., None] + (2.0 / 3.0) * sqrt_p[..., None] * np.cos(
        phase[..., None] + 2.0 * np.pi * j / 3.0
    )

    c1, c2, c3 = k1[..., None], k2[..., None], k3[..., None]
    value = ((roots + c1) * roots + c2) * roots + c3
    slope = (3.0 * roots + 2.0 * c1) * roots + c2
    with np.errstate(divide="ignore", invalid="ignore"):
        polished = np.where(slope != 0.0, roots - value / slope, roots)
    polished_value = ((polished + c1) * polished + c2) * polished + c3
    roots = np.where(np.abs(polished_value) <= np.abs(value), polished, roots)

    roots = np.sort(roots, axis=-1)
    gaps = np.diff(roots, axis=-1).min(axis=-1)
    degenerate = gaps < root_sep_tol * scale
    if np.any(degenerate):
        raise DegenerateRoots(
            f"root gap {float(gaps[degenerate].min()):.3e} below separation tolerance",
            _first_cell(degenerate),
        )
    return roots


@dataclass(frozen=True)
class CubicData:
    a: np.ndarray
    b: np.ndarray
    k1: np.ndarray
    k2: np.ndarray
    k3: np.ndarray
    roots: np.ndarray


def cubic_data(params: ModelParams, bc: BranchCoefficients) -> CubicData:
    a = params.epsilon - (bc.t1 - bc.t2)
    b = params.epsilon - (bc.t2 - bc.t4)
    lam2 = params.lam**2
    k1 = -(a + 2.0 * b)
    k2 = b * (a + b) - 0.5 * lam2 * (bc.v1**2 + bc.v2**2)
    k3 = 0.5 * lam2 * (a + b) * bc.v2**2
    roots = solve_cubic(k1, k2, k3)
    return CubicData(a=a, b=b, k1=k1, k2=k2, k3=k3, roots=roots)


@dataclass(frozen=True)
class BranchWeights:
    """a_1..a_3 per cell, stacked on a trailing axis."""

    a: np.ndarray


def branch_weights(
    cubic: CubicData,
    params: ModelParams,
    bc: BranchCoefficients,
    weights: Optional[Tuple[complex, complex, complex]] = None,
) -> BranchWeights:
    """
    Coefficients a_k fixing C1(0), C2(0), C4(0) to the initial weights.

    `weights` overrides the (C1, C2, C4) initial data taken from
    params.ansatz_weights().
    """
    g1, g2, g4 = params.ansatz_weights() if weights is None else weights
    lam = params.lam
    m = cubic.roots
    v1 = np.asarray(bc.v1)
    v2 = np.asarray(bc.v2)
    b = np.asarray(cubic.b)

    out = np.empty(m.shape, dtype=complex)
    for k, p, q in _PERMUTATIONS:
        mk, mp, mq = m[..., k], m[..., p], m[..., q]
        numerator = (
            0.5 * lam**2 * v1 * v2 * np.exp(2j * params.phi) * g1
            + lam * v2 * (-b + mp + mq) * np.exp(1j * params.phi) * g2
            + (0.5 * lam**2 * v2**2 + mp * mq) * g4
        )
        denominator = (mk - mp) * (mk - mq)
        if np.any(denominator == 0.0):
            raise DegenerateRoots("vanishing root gap in a_k", _first_cell(denominator == 0.0))
        out[..., k] = numerator / denominator
    return BranchWeights(a=out)


@dataclass(frozen=True)
class AmplitudeSet:
    """
    A1(n1, n2), A2(n1+1, n2+1) (= A3) and A4(n1+2, n2+2) on the cell grid at
    time t, arrays indexed by the cell (n1, n2).
    """

    t: float
    a1: np.ndarray
    a2: np.ndarray
    a4: np.ndarray
    weights: CoherentWeights

    @property
    def n_max(self) -> int:
        return self.a1.shape[0] - 1

    def branch_fields(self) -> np.ndarray:
        """
        Field vectors of the four atomic branches |ee>, |eg>, |ge>, |gg> on the
        (n_max + 3)^2 field grid, field index = photon number.
        """
        n = self.n_max
        w = self.weights.outer()
        fields = np.zeros((4, n + 3, n + 3), dtype=complex)
        fields[0, : n + 1, : n + 1] = w * self.a1
        fields[1, 1 : n + 2, 1 : n + 2] = w * self.a2
        fields[2, 1 : n + 2, 1 : n + 2] = w * self.a2
        fields[3, 2:, 2:] = w * self.a4
        return fields

    def norm(self) -> float:
        p = np.abs(self.weights.outer()) ** 2
        return float(
            np.sum(p * (np.abs(self.a1) ** 2 + 2 * np.abs(self.a2) ** 2 + np.abs(self.a4) ** 2))
        )


class ClosedFormSolution:
    """
    Time-independent part of the closed form for one parameter set; at(t)
    evaluates the amplitudes.
    """

    def __init__(self, params: ModelParams, trunc: FockTruncation):
        if params.lam < LAMBDA_FLOOR:
            raise LambdaZero(
                f"closed form divides by lambda; lambda={params.lam:.3g} is below {LAMBDA_FLOOR:g}"
            )
        self.params = params
        self.trunc = trunc
        self.weights = field_weights(params, trunc)
        self.coefficients = branch_grid(params, trunc)

        bc = self.coefficients
        decoupled = (bc.v1 == 0.0) | (bc.v2 == 0.0)
        if np.any(decoupled):
            raise DecoupledCell("deformation gives V1 or V2 = 0", _first_cell(decoupled))

        self.cubic = cubic_data(params, bc)
        self.branch = branch_weights(self.cubic, params, bc)

        lam = params.lam
        m = self.cubic.roots
        b = self.cubic.b[..., None]
        v1 = bc.v1[..., None]
        v2 = bc.v2[..., None]
        ak = self.branch.a
        if params.a1_convention == "corrected":
            poly = 2.0 * m * m - 2.0 * b * m - lam**2 * v2**2
        else:
            poly = m * m - b * m - lam**2 * v2**2
        self._c1 = ak * poly / (lam**2 * v1 * v2)
        self._c2 = -ak * m / (lam * v2)
        self._c4 = ak
        logger.debug(
            f"closed form ready: {m.shape[0]}x{m.shape[1]} cells, "
            f"root span [{m.min():.4g}, {m.max():.4g}]"
        )

    def at(self, t: float) -> AmplitudeSet:
        eps = self.params.epsilon
        phi = self.params.phi
        t4 = self.coefficients.t4[..., None]
        base = np.exp(1j * (self.cubic.roots - t4) * t)
        a4 = np.sum(self._c4 * base, axis=-1)
        a2 = np.sum(self._c2 * base, axis=-1) * np.exp(-1j * (eps * t + phi))
        a1 = np.sum(self._c1 * base, axis=-1) * np.exp(-2j * (eps * t + phi))
        return AmplitudeSet(t=float(t), a1=a1, a2=a2, a4=a4, weights=self.weights)


def amplitudes_at(params: ModelParams, trunc: FockTruncation, t: float) -> AmplitudeSet:
    return ClosedFormSolution(params, trunc).at(t)
