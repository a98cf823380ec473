"""
Physical parameters of the effective two-atom, two-mode Kerr model and the
per-(n1, n2) scalar coefficients every other module is built on.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Literal, Tuple, Union

import numpy as np
from scipy.special import gammaln
from scipy.stats import poisson

from kerrcavity.errors import ParameterError, TruncationError

logger = logging.getLogger(__name__)

GAMMA_NORM_TOL = 1e-12
DEFAULT_CAP = 512
MIN_N_MAX = 4  # the ansatz reaches n + 2

T4Convention = Literal["corrected", "paper_literal"]
A1Convention = Literal["corrected", "paper_literal"]
GammaPolicy = Literal["strict", "paper_ansatz"]

IntLike = Union[int, np.ndarray]


@dataclass(frozen=True)
class Deformation:
    """
    Intensity-dependent coupling f(n).

    kind "linear" is f(n) = 1, "sqrt" is f(n) = sqrt(n), "custom" reads
    f(n) from `table` (index n), which must cover every n the grid touches.
    """

    kind: Literal["linear", "sqrt", "custom"] = "linear"
    table: Tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in ("linear", "sqrt", "custom"):
            raise ParameterError(f"unknown deformation kind {self.kind!r}")
        if self.kind == "custom":
            if len(self.table) == 0:
                raise ParameterError("custom deformation needs a non-empty table")
            values = np.asarray(self.table, dtype=float)
            if not np.all(np.isfinite(values)) or np.any(values < 0):
                raise ParameterError("custom deformation values must be finite and >= 0")

    def __call__(self, n: IntLike) -> np.ndarray:
        n = np.asarray(n)
        if self.kind == "linear":
            return np.ones(n.shape)
        if self.kind == "sqrt":
            return np.sqrt(n.astype(float))
        if n.size and int(n.max()) >= len(self.table):
            raise ParameterError(
                f"custom deformation tabulated up to n={len(self.table) - 1}, "
                f"grid needs n={int(n.max())}"
            )
        return np.asarray(self.table, dtype=float)[n]

    def require(self, n_top: int) -> None:
        """Fail early if a custom table is too short for the grid."""
        self(np.arange(n_top + 1))


@dataclass(frozen=True)
class ModelParams:
    lam: float = 1.0
    epsilon: float = 0.0
    phi: float = 0.0
    delta: float = 0.0
    beta1: float = 0.0
    beta2: float = 0.0
    chi1: float = 0.0
    chi2: float = 0.0
    chi12: float = 0.0
    alpha1: complex = 1.0
    alpha2: complex = 1.0
    gamma: Tuple[complex, complex, complex, complex] = (1.0, 0.0, 0.0, 0.0)
    deformation: Deformation = field(default_factory=Deformation)
    t4_convention: T4Convention = "corrected"
    a1_convention: A1Convention = "corrected"
    gamma_policy: GammaPolicy = "strict"

    def __post_init__(self):
        rates = {
            "lambda": self.lam,
            "epsilon": self.epsilon,
            "phi": self.phi,
            "delta": self.delta,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "chi1": self.chi1,
            "chi2": self.chi2,
            "chi12": self.chi12,
        }
        for name, value in rates.items():
            if not math.isfinite(value):
                raise ParameterError(f"{name} must be finite, got {value}")
        if self.lam < 0:
            raise ParameterError(f"lambda must be >= 0, got {self.lam}")
        for name in ("alpha1", "alpha2"):
            value = complex(getattr(self, name))
            if not (math.isfinite(value.real) and math.isfinite(value.imag)):
                raise ParameterError(f"{name} must be finite")

        if len(self.gamma) != 4:
            raise ParameterError("gamma needs exactly four atomic weights")
        norm = sum(abs(g) ** 2 for g in self.gamma)
        if abs(norm - 1.0) > GAMMA_NORM_TOL:
            raise ParameterError(
                f"atomic weights must satisfy sum |gamma_k|^2 = 1, got {norm:.12g}"
            )

        if self.t4_convention not in ("corrected", "paper_literal"):
            raise ParameterError(f"unknown t4_convention {self.t4_convention!r}")
        if self.a1_convention not in ("corrected", "paper_literal"):
            raise ParameterError(f"unknown a1_convention {self.a1_convention!r}")
        if self.gamma_policy == "strict":
            if abs(self.gamma[1] - self.gamma[2]) > GAMMA_NORM_TOL:
                raise ParameterError(
                    "the ansatz identifies A2 with A3, so gamma2 must equal gamma3 "
                    "(use gamma_policy='paper_ansatz' to reproduce the figure captions)"
                )
        elif self.gamma_policy != "paper_ansatz":
            raise ParameterError(f"unknown gamma_policy {self.gamma_policy!r}")

    def ansatz_weights(self) -> Tuple[complex, complex, complex]:
        """
        Initial (C1, C2, C4) fed to every cell.

        Under paper_ansatz gamma3 is dropped and (g1, g2, g2, g4) is rescaled to
        unit norm; under strict the weights already have unit norm.
        """
        g1, g2, _, g4 = (complex(g) for g in self.gamma)
        scale = math.sqrt(abs(g1) ** 2 + 2 * abs(g2) ** 2 + abs(g4) ** 2)
        if scale == 0.0:
            raise ParameterError("ansatz weights vanish: gamma1, gamma2 and gamma4 are all zero")
        return g1 / scale, g2 / scale, g4 / scale

    def coupling(self, t: float) -> float:
        """g(t) = lambda cos(epsilon t + phi)."""
        return self.lam * math.cos(self.epsilon * t + self.phi)


def coherent_weight(alpha: complex, n: IntLike) -> np.ndarray:
    """
    q_n = exp(-|alpha|^2 / 2) alpha^n / sqrt(n!), evaluated in log space.
    """
    n = np.asarray(n)
    if np.any(n < 0):
        raise ParameterError("photon number must be >= 0")
    r = abs(alpha)
    if r == 0.0:
        return np.where(n == 0, 1.0 + 0.0j, 0.0j)
    log_mag = -0.5 * r * r + n * math.log(r) - 0.5 * gammaln(n + 1)
    return np.exp(log_mag + 1j * n * np.angle(alpha))


def coherent_weights(alpha: complex, n_max: int) -> np.ndarray:
    return coherent_weight(alpha, np.arange(n_max + 1))


@dataclass(frozen=True)
class CoherentWeights:
    """Per-mode coherent amplitudes q_n for n = 0..n_max."""

    q1: np.ndarray
    q2: np.ndarray

    @property
    def n_max(self) -> int:
        return len(self.q1) - 1

    def outer(self) -> np.ndarray:
        return np.outer(self.q1, self.q2)


def field_weights(params: "ModelParams", trunc: "FockTruncation") -> CoherentWeights:
    return CoherentWeights(
        q1=coherent_weights(params.alpha1, trunc.n_max),
        q2=coherent_weights(params.alpha2, trunc.n_max),
    )


@dataclass(frozen=True)
class FockTruncation:
    n_max: int
    tail_eps: float

    @property
    def dim(self) -> int:
        """Field levels per mode, including the n + 2 guard band."""
        return self.n_max + 3


def _poisson_cutoff(mean: float, tail_eps: float, cap: int) -> int:
    if mean == 0.0:
        return 0
    ns = np.arange(cap + 1)
    below = np.nonzero(poisson.sf(ns, mean) < tail_eps)[0]
    if below.size == 0:
        raise TruncationError(
            f"Poisson tail for mean photon number {mean:.6g} stays above "
            f"{tail_eps:.3g} up to the cap n_max={cap}"
        )
    return int(below[0])


def choose_truncation(
    alpha1: complex, alpha2: complex, tail_eps: float, cap: int = DEFAULT_CAP
) -> FockTruncation:
    if not 0.0 < tail_eps < 1.0:
        raise ParameterError(f"tail_eps must lie in (0, 1), got {tail_eps}")
    n_max = max(
        MIN_N_MAX,
        _poisson_cutoff(abs(alpha1) ** 2, tail_eps, cap),
        _poisson_cutoff(abs(alpha2) ** 2, tail_eps, cap),
    )
    logger.debug(f"truncation for alpha=({alpha1}, {alpha2}), eps={tail_eps}: n_max={n_max}")
    return FockTruncation(n_max=n_max, tail_eps=tail_eps)


@dataclass(frozen=True)
class BranchCoefficients:
    """V1, V2, T1, T2, T4 for one cell or, with array fields, a whole grid."""

    v1: np.ndarray
    v2: np.ndarray
    t1: np.ndarray
    t2: np.ndarray
    t4: np.ndarray


def branch_coefficients(params: ModelParams, n1: IntLike, n2: IntLike) -> BranchCoefficients:
    n1 = np.asarray(n1)
    n2 = np.asarray(n2)
    if np.any(n1 < 0) or np.any(n2 < 0):
        raise ParameterError("cell indices must be >= 0")
    f = params.deformation
    x1 = n1.astype(float)
    x2 = n2.astype(float)

    v1 = f(n1 + 1) * f(n2 + 1) * np.sqrt((x1 + 1) * (x2 + 1))
    v2 = f(n1 + 2) * f(n2 + 2) * np.sqrt((x1 + 2) * (x2 + 2))

    t1 = (
        params.delta
        + 2 * params.beta2 * x2
        + params.chi1 * x1 * (x1 - 1)
        + params.chi2 * x2 * (x2 - 1)
        + params.chi12 * x1 * x2
    )
    t2 = (
        params.beta1 * (x1 + 1)
        + params.beta2 * (x2 + 1)
        + params.chi1 * x1 * (x1 + 1)
        + params.chi2 * x2 * (x2 + 1)
        + params.chi12 * (x1 + 1) * (x2 + 1)
    )
    # printed form pairs chi2 with (n1 + 1)(n2 + 2)
    chi2_factor = (x2 + 1) if params.t4_convention == "corrected" else (x1 + 1)
    t4 = (
        -params.delta
        + 2 * params.beta1 * (x1 + 2)
        + params.chi1 * (x1 + 1) * (x1 + 2)
        + params.chi2 * chi2_factor * (x2 + 2)
        + params.chi12 * (x1 + 2) * (x2 + 2)
    )
    return BranchCoefficients(v1=v1, v2=v2, t1=t1, t2=t2, t4=t4)


def cell_grid(n_max: int) -> Tuple[np.ndarray, np.ndarray]:
    """(n1, n2) index arrays of shape (n_max + 1, n_max + 1), n1 along axis 0."""
    ns = np.arange(n_max + 1)
    return np.meshgrid(ns, ns, indexing="ij")


def branch_grid(params: ModelParams, trunc: FockTruncation) -> BranchCoefficients:
    params.deformation.require(trunc.n_max + 2)
    n1, n2 = cell_grid(trunc.n_max)
    return branch_coefficients(params, n1, n2)
