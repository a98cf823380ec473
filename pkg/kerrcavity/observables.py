"""
Field and atomic observables of a state given as atomic-branch field vectors.

Any object with a branch_fields() method returning a (4, D, D) array, branches
ordered |ee>, |eg>, |ge>, |gg> and field index = photon number, can be passed:
the closed-form AmplitudeSet and the oracle's TruncatedState both qualify.
"""
import logging
import re
from dataclasses import dataclass
from typing import Callable, Dict, Literal, Tuple

import numpy as np
from scipy.special import gammaln

from kerrcavity.errors import ExponentCap, ParameterError, ZeroMeanPhotonNumber
from kerrcavity.solver import AmplitudeSet

logger = logging.getLogger(__name__)

DEFAULT_EXPONENT_CAP = 4
MEAN_FLOOR = 1e-14

Mode = Literal["mode1", "mode2"]
MandelMode = Literal["mode1", "mode2", "total"]
SqueezeTarget = Literal["mode1", "mode2", "pair"]


def _lowered(fields: np.ndarray, q1: int, q2: int) -> np.ndarray:
    """a1^q1 a2^q2 applied to every branch; result keeps the input shape."""
    out = np.zeros_like(fields)
    dim1, dim2 = fields.shape[1:]
    if q1 >= dim1 or q2 >= dim2:
        return out
    n1 = np.arange(dim1 - q1)
    n2 = np.arange(dim2 - q2)
    f1 = np.exp(0.5 * (gammaln(n1 + q1 + 1) - gammaln(n1 + 1)))
    f2 = np.exp(0.5 * (gammaln(n2 + q2 + 1) - gammaln(n2 + 1)))
    out[:, : dim1 - q1, : dim2 - q2] = fields[:, q1:, q2:] * np.outer(f1, f2)
    return out


def field_moment(state, p1: int, q1: int, p2: int, q2: int, cap: int = DEFAULT_EXPONENT_CAP) -> complex:
    """
    <a1^dag^p1 a1^q1 a2^dag^p2 a2^q2>, traced over the atoms.

    Evaluated as sum over branches of <a1^p1 a2^p2 psi_b | a1^q1 a2^q2 psi_b>.
    """
    exponents = (p1, q1, p2, q2)
    if any(int(e) != e or e < 0 for e in exponents):
        raise ParameterError(f"moment exponents must be non-negative integers, got {exponents}")
    if max(exponents) > cap:
        raise ExponentCap(f"moment exponents {exponents} exceed the cap {cap}")
    fields = state.branch_fields()
    bra = _lowered(fields, p1, p2)
    ket = _lowered(fields, q1, q2)
    return complex(np.vdot(bra, ket))


def _shift_factor(m: np.ndarray, p: int, q: int) -> np.ndarray:
    """sqrt(m! (m + p - q)!) / (m - q)!, zero where a factorial argument is negative."""
    s = p - q
    valid = (m >= q) & (m + s >= 0)
    mv = np.where(valid, m, q)
    log_f = 0.5 * (gammaln(mv + 1) + gammaln(mv + s + 1)) - gammaln(mv - q + 1)
    return np.where(valid, np.exp(log_f), 0.0)


def _shifted(size: int, s: int) -> Tuple[slice, slice]:
    lo = max(0, -s)
    hi = min(size, size - s)
    return slice(lo, hi), slice(lo + s, hi + s)


def printed_moment(amps: AmplitudeSet, p: int, q: int, middle_multiplicity: int = 2) -> complex:
    """
    Equal-exponent moment <a1^dag^p a1^q a2^dag^p a2^q> summed cell by cell.

    middle_multiplicity counts the |eg>, |ge> branches; 4 reproduces the
    printed coefficient, which breaks normalisation.
    """
    w = amps.weights.outer()
    size = w.shape[0]
    s = p - q
    here, there = _shifted(size, s)
    total = 0.0j
    for offset, amp, mult in ((0, amps.a1, 1), (1, amps.a2, middle_multiplicity), (2, amps.a4, 1)):
        psi = w * amp
        m = np.arange(size)[here] + offset
        factor = np.outer(_shift_factor(m, p, q), _shift_factor(m, p, q))
        total += mult * np.sum(np.conj(psi[there, there]) * psi[here, here] * factor)
    return complex(total)


@dataclass(frozen=True)
class JointPND:
    """P(n1, n2) on the field grid, n1 along axis 0."""

    t: float
    matrix: np.ndarray

    def marginal(self, mode: Mode) -> np.ndarray:
        return self.matrix.sum(axis=1 if mode == "mode1" else 0)

    def total_number(self) -> np.ndarray:
        """Distribution of N1 + N2."""
        d1, d2 = self.matrix.shape
        out = np.zeros(d1 + d2 - 1)
        n1, n2 = np.meshgrid(np.arange(d1), np.arange(d2), indexing="ij")
        np.add.at(out, (n1 + n2).ravel(), self.matrix.ravel())
        return out

    def at(self, n1: int, n2: int) -> float:
        if 0 <= n1 < self.matrix.shape[0] and 0 <= n2 < self.matrix.shape[1]:
            return float(self.matrix[n1, n2])
        return 0.0


def joint_pnd(state) -> JointPND:
    fields = state.branch_fields()
    return JointPND(t=getattr(state, "t", 0.0), matrix=np.sum(np.abs(fields) ** 2, axis=0))


def _mandel_from_distribution(p: np.ndarray) -> float:
    n = np.arange(p.size)
    mean = float(n @ p)
    if mean < MEAN_FLOOR:
        raise ZeroMeanPhotonNumber("Mandel Q is undefined for <N> = 0")
    var = float((n * n) @ p) - mean * mean
    return var / mean - 1.0


def mandel_q(state, mode: MandelMode = "mode1", method: Literal["pnd", "moments"] = "pnd") -> float:
    """
    Q = (<N^2> - <N>^2) / <N> - 1 for N = N1, N2 or N1 + N2 ("total").

    method "pnd" uses the photon-number marginal, "moments" the normal-ordered
    moments; the two are independent evaluations of the same quantity.
    """
    if mode not in ("mode1", "mode2", "total"):
        raise ParameterError(f"unknown mode {mode!r}")
    if method == "pnd":
        pnd = joint_pnd(state)
        p = pnd.total_number() if mode == "total" else pnd.marginal(mode)
        return _mandel_from_distribution(p)
    if method != "moments":
        raise ParameterError(f"unknown method {method!r}")

    if mode == "total":
        n1 = field_moment(state, 1, 1, 0, 0).real
        n2 = field_moment(state, 0, 0, 1, 1).real
        mean = n1 + n2
        pairs = (
            field_moment(state, 2, 2, 0, 0).real
            + field_moment(state, 0, 0, 2, 2).real
            + 2 * field_moment(state, 1, 1, 1, 1).real
        )
    else:
        exps = (1, 1, 0, 0) if mode == "mode1" else (0, 0, 1, 1)
        mean = field_moment(state, *exps).real
        pairs = field_moment(state, *(2 * e for e in exps)).real
    if mean < MEAN_FLOOR:
        raise ZeroMeanPhotonNumber("Mandel Q is undefined for <N> = 0")
    # <N^2> = <a^dag^2 a^2> + <N>
    return (pairs - mean * mean) / mean


def g2_zero(state, mode: Mode = "mode1", method: Literal["moments", "pnd"] = "moments") -> float:
    """<a^dag^2 a^2> / <a^dag a>^2 for one mode."""
    if mode not in ("mode1", "mode2"):
        raise ParameterError(f"unknown mode {mode!r}")
    if method == "pnd":
        p = joint_pnd(state).marginal(mode)
        n = np.arange(p.size)
        mean = float(n @ p)
        pairs = float((n * (n - 1)) @ p)
    elif method == "moments":
        exps = (1, 1, 0, 0) if mode == "mode1" else (0, 0, 1, 1)
        mean = field_moment(state, *exps).real
        pairs = field_moment(state, *(2 * e for e in exps)).real
    else:
        raise ParameterError(f"unknown method {method!r}")
    if mean < MEAN_FLOOR:
        raise ZeroMeanPhotonNumber("g2(0) is undefined for <a^dag a> = 0")
    return pairs / (mean * mean)


_SQUEEZE_EXPONENTS = {
    # (number, a, a^2) moment exponents
    "mode1": ((1, 1, 0, 0), (0, 1, 0, 0), (0, 2, 0, 0)),
    "mode2": ((0, 0, 1, 1), (0, 0, 0, 1), (0, 0, 0, 2)),
    "pair": ((1, 1, 1, 1), (0, 1, 0, 1), (0, 2, 0, 2)),
}


def quadrature_squeezing(state, target: SqueezeTarget = "mode1") -> Tuple[float, float]:
    """
    (s_x, s_p) with s_x = 4 Var(x) - 1, x = (a + a^dag) / 2, p = (a - a^dag) / 2i.
    target "pair" substitutes a1 a2 for a.
    """
    if target not in _SQUEEZE_EXPONENTS:
        raise ParameterError(f"unknown squeezing target {target!r}")
    number_exp, first_exp, second_exp = _SQUEEZE_EXPONENTS[target]
    number = field_moment(state, *number_exp).real
    first = field_moment(state, *first_exp)
    second = field_moment(state, *second_exp)
    s_x = 2 * number + 2 * second.real - 4 * first.real**2
    s_p = 2 * number - 2 * second.real - 4 * first.imag**2
    return float(s_x), float(s_p)


@dataclass(frozen=True)
class AtomDensity:
    """rho_AB in the basis |ee>, |eg>, |ge>, |gg>."""

    t: float
    matrix: np.ndarray

    def purity(self) -> float:
        return float(np.sum(np.abs(self.matrix) ** 2))

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(0.5 * (self.matrix + self.matrix.conj().T))


def atom_density(state) -> AtomDensity:
    """Partial trace over both field modes."""
    fields = state.branch_fields()
    rho = np.einsum("bij,cij->bc", fields, fields.conj())
    return AtomDensity(t=getattr(state, "t", 0.0), matrix=rho)


def printed_density(amps: AmplitudeSet) -> AtomDensity:
    """
    rho_AB rebuilt from the closed-form element sums.

    Amplitudes are labelled by field occupation, so the coherence sums pair
    cell n + k of one branch with cell n of the other.
    """
    w = amps.weights.outer()
    prob = np.abs(w) ** 2
    rho11 = np.sum(prob * np.abs(amps.a1) ** 2)
    rho22 = np.sum(prob * np.abs(amps.a2) ** 2)
    rho44 = np.sum(prob * np.abs(amps.a4) ** 2)

    def coherence(x, y, k):
        return np.sum(w[k:, k:] * np.conj(w[:-k, :-k]) * x[k:, k:] * np.conj(y[:-k, :-k]))

    rho12 = coherence(amps.a1, amps.a2, 1)
    rho14 = coherence(amps.a1, amps.a4, 2)
    rho24 = coherence(amps.a2, amps.a4, 1)
    rho = np.array(
        [
            [rho11, rho12, rho12, rho14],
            [0, rho22, rho22, rho24],
            [0, 0, rho22, rho24],
            [0, 0, 0, rho44],
        ],
        dtype=complex,
    )
    lower = np.tril_indices(4, -1)
    rho[lower] = np.conj(rho.T[lower])
    return AtomDensity(t=amps.t, matrix=rho)


def linear_entropy(rho: AtomDensity) -> float:
    """1 - Tr(rho^2); 0 for a pure state, at most 3/4 for two qubits."""
    return 1.0 - rho.purity()


def printed_linear_entropy(rho: AtomDensity) -> float:
    """Expanded form valid under the A2 = A3 symmetry."""
    m = rho.matrix
    return 1.0 - float(
        m[0, 0].real ** 2
        + 4 * m[1, 1].real ** 2
        + m[3, 3].real ** 2
        + 4 * abs(m[0, 1]) ** 2
        + 2 * abs(m[0, 3]) ** 2
        + 4 * abs(m[1, 3]) ** 2
    )


def state_norm(state) -> float:
    return float(np.sum(np.abs(state.branch_fields()) ** 2))


_PND_ID = re.compile(r"^pnd_(\d+)_(\d+)$")

_FIXED: Dict[str, Callable] = {
    "mandel_q1": lambda s: mandel_q(s, "mode1"),
    "mandel_q2": lambda s: mandel_q(s, "mode2"),
    "mandel_q_total": lambda s: mandel_q(s, "total"),
    "g2_1": lambda s: g2_zero(s, "mode1"),
    "g2_2": lambda s: g2_zero(s, "mode2"),
    "sx_1": lambda s: quadrature_squeezing(s, "mode1")[0],
    "sp_1": lambda s: quadrature_squeezing(s, "mode1")[1],
    "sx_2": lambda s: quadrature_squeezing(s, "mode2")[0],
    "sp_2": lambda s: quadrature_squeezing(s, "mode2")[1],
    "sx_pair": lambda s: quadrature_squeezing(s, "pair")[0],
    "sp_pair": lambda s: quadrature_squeezing(s, "pair")[1],
    "linear_entropy": lambda s: linear_entropy(atom_density(s)),
    "norm": state_norm,
}

OBSERVABLE_IDS = tuple(_FIXED) + ("pnd_<n1>_<n2>",)


def observable(name: str) -> Callable:
    """Scalar evaluator for an observable id, e.g. 'g2_1' or 'pnd_10_10'."""
    if name in _FIXED:
        return _FIXED[name]
    match = _PND_ID.match(name)
    if match:
        n1, n2 = int(match.group(1)), int(match.group(2))
        return lambda s: joint_pnd(s).at(n1, n2)
    raise ParameterError(f"unknown observable {name!r}; known: {', '.join(OBSERVABLE_IDS)}")


def evaluate(state, names) -> Dict[str, float]:
    return {name: float(observable(name)(state)) for name in names}
