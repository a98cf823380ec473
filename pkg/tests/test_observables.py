import math

import numpy as np
import pytest
import qutip
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st
from scipy.special import gammaln
from scipy.stats import poisson

from kerrcavity.errors import ExponentCap, ParameterError, ZeroMeanPhotonNumber
from kerrcavity.model import FockTruncation, ModelParams, choose_truncation
from kerrcavity.observables import (
    AtomDensity,
    atom_density,
    evaluate,
    field_moment,
    g2_zero,
    joint_pnd,
    linear_entropy,
    mandel_q,
    observable,
    printed_density,
    printed_linear_entropy,
    printed_moment,
    quadrature_squeezing,
)
from kerrcavity.oracle import ansatz_state
from kerrcavity.solver import amplitudes_at

exponents = st.integers(min_value=0, max_value=4)


def _qobj(state):
    dim = state.branch_fields().shape[-1]
    vector = state.branch_fields().reshape(-1, 1)
    return qutip.Qobj(vector, dims=[[2, 2, dim, dim], [1, 1, 1, 1]])


def _power(op, k, identity):
    out = identity
    for _ in range(k):
        out = out * op
    return out


@pytest.fixture
def generic_state(generic_params):
    return amplitudes_at(generic_params, FockTruncation(n_max=12, tail_eps=1e-12), 0.8)


@pytest.fixture
def preset_state(fig3_params):
    trunc = choose_truncation(fig3_params.alpha1, fig3_params.alpha2, 1e-12)
    return amplitudes_at(fig3_params, trunc, 0.0)


def test_trivial_moments(generic_state):
    assert field_moment(generic_state, 0, 0, 0, 0) == pytest.approx(1.0, abs=1e-9)
    n1 = field_moment(generic_state, 1, 1, 0, 0)
    assert abs(n1.imag) < 1e-12 and n1.real > 0


@pytest.mark.parametrize("exps", [(1, 1, 0, 0), (0, 1, 0, 0), (2, 1, 0, 3), (0, 2, 0, 2), (1, 1, 1, 1), (4, 2, 3, 4)])
def test_moments_match_dense_operators(generic_state, exps):
    dim = generic_state.branch_fields().shape[-1]
    identity = qutip.tensor(qutip.qeye(2), qutip.qeye(2), qutip.qeye(dim), qutip.qeye(dim))
    a1 = qutip.tensor(qutip.qeye(2), qutip.qeye(2), qutip.destroy(dim), qutip.qeye(dim))
    a2 = qutip.tensor(qutip.qeye(2), qutip.qeye(2), qutip.qeye(dim), qutip.destroy(dim))
    p1, q1, p2, q2 = exps
    op = (
        _power(a1.dag(), p1, identity)
        * _power(a1, q1, identity)
        * _power(a2.dag(), p2, identity)
        * _power(a2, q2, identity)
    )
    expected = complex(qutip.expect(op, _qobj(generic_state)))
    assert field_moment(generic_state, *exps) == pytest.approx(expected, abs=1e-10)


def test_atom_density_matches_partial_trace(generic_state):
    expected = _qobj(generic_state).ptrace([0, 1]).full()
    np.testing.assert_allclose(atom_density(generic_state).matrix, expected, atol=1e-12)


def test_pnd_is_poisson_for_coherent_fields(coherent_params):
    trunc = choose_truncation(coherent_params.alpha1, coherent_params.alpha2, 1e-12)
    pnd = joint_pnd(amplitudes_at(coherent_params, trunc, 0.0))
    n = np.arange(trunc.n_max + 1)
    expected = np.outer(poisson.pmf(n, abs(coherent_params.alpha1) ** 2), poisson.pmf(n, 1.0))
    np.testing.assert_allclose(pnd.matrix[: n.size, : n.size], expected, atol=1e-9)
    assert pnd.matrix.sum() == pytest.approx(1.0, abs=1e-9)
    assert pnd.at(1, 2) == pytest.approx(expected[1, 2])
    assert pnd.at(-1, 0) == 0.0 and pnd.at(500, 0) == 0.0


def test_pnd_of_evolved_state_is_a_distribution(generic_state):
    pnd = joint_pnd(generic_state)
    assert np.all(pnd.matrix >= 0)
    assert pnd.matrix.sum() == pytest.approx(1.0, abs=1e-9)
    assert pnd.marginal("mode1").sum() == pytest.approx(1.0, abs=1e-9)
    assert pnd.total_number().sum() == pytest.approx(1.0, abs=1e-9)


def test_coherent_state_statistics(coherent_params):
    trunc = choose_truncation(coherent_params.alpha1, coherent_params.alpha2, 1e-12)
    state = amplitudes_at(coherent_params, trunc, 0.0)
    assert mandel_q(state, "mode1") == pytest.approx(0.0, abs=1e-8)
    assert mandel_q(state, "total", method="moments") == pytest.approx(0.0, abs=1e-8)
    assert g2_zero(state, "mode1") == pytest.approx(1.0, abs=1e-8)
    s_x, s_p = quadrature_squeezing(state, "mode1")
    assert s_x == pytest.approx(0.0, abs=1e-8)
    assert s_p == pytest.approx(0.0, abs=1e-8)
    assert linear_entropy(atom_density(state)) == pytest.approx(0.0, abs=1e-9)


def test_maximally_mixed_entropy():
    assert linear_entropy(AtomDensity(t=0.0, matrix=np.eye(4) / 4)) == pytest.approx(0.75)


def test_preset_statistics_at_start(preset_state):
    assert mandel_q(preset_state, "mode1") == pytest.approx(-4 / 15, abs=1e-9)
    assert g2_zero(preset_state, "mode1") == pytest.approx(21 / 25, abs=1e-9)


def test_preset_entropy_at_start(preset_state):
    n = np.arange(80)
    c = np.sum(np.exp(-1.0 - 0.5 * (gammaln(n + 1) + gammaln(n + 2)))) ** 2
    assert linear_entropy(atom_density(preset_state)) == pytest.approx((4 - 4 * c * c) / 9, abs=1e-9)


@settings(max_examples=50, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(seed=st.integers(0, 2**32 - 1), p1=exponents, q1=exponents, p2=exponents, q2=exponents)
def test_moment_hermiticity(random_amps, seed, p1, q1, p2, q2):
    amps = random_amps(seed)
    forward = field_moment(amps, p1, q1, p2, q2)
    backward = field_moment(amps, q1, p1, q2, p2)
    assert forward == pytest.approx(np.conj(backward), abs=1e-9 * max(1.0, abs(forward)))


@pytest.mark.parametrize("mode", ["mode1", "mode2", "total"])
def test_mandel_paths_agree(generic_state, mode):
    assert mandel_q(generic_state, mode, method="pnd") == pytest.approx(
        mandel_q(generic_state, mode, method="moments"), abs=1e-9
    )


@pytest.mark.parametrize("mode", ["mode1", "mode2"])
def test_g2_paths_agree(generic_state, mode):
    assert g2_zero(generic_state, mode, method="pnd") == pytest.approx(
        g2_zero(generic_state, mode, method="moments"), abs=1e-9
    )


@pytest.mark.parametrize("p, q", [(0, 0), (1, 1), (2, 1), (0, 2), (2, 2), (3, 1)])
def test_printed_moment_matches_field_moment(random_amps, generic_state, p, q):
    for amps in (generic_state, random_amps(3)):
        assert printed_moment(amps, p, q) == pytest.approx(field_moment(amps, p, q, p, q), abs=1e-10)


def test_printed_multiplicity_breaks_normalisation(generic_state):
    assert printed_moment(generic_state, 0, 0) == pytest.approx(1.0, abs=1e-9)
    middle = np.sum(np.abs(generic_state.weights.outer() * generic_state.a2) ** 2)
    assert printed_moment(generic_state, 0, 0, middle_multiplicity=4).real == pytest.approx(1.0 + 2 * middle)


def test_printed_density_matches_partial_trace(random_amps, generic_state):
    for amps in (generic_state, random_amps(11)):
        rho = atom_density(amps)
        np.testing.assert_allclose(printed_density(amps).matrix, rho.matrix, atol=1e-12)
        m = rho.matrix
        assert m[1, 1] == pytest.approx(m[2, 2]) and m[1, 2] == pytest.approx(m[1, 1])
        assert m[0, 1] == pytest.approx(m[0, 2])
        assert printed_linear_entropy(rho) == pytest.approx(linear_entropy(rho), abs=1e-12)


def test_density_of_ansatz_state_equals_amplitude_density(generic_state):
    np.testing.assert_allclose(
        atom_density(ansatz_state(generic_state)).matrix, atom_density(generic_state).matrix, atol=1e-14
    )


@pytest.mark.parametrize("seed", range(5))
def test_linear_entropy_bounds(random_amps, seed):
    amps = random_amps(seed)
    rho = atom_density(amps)
    trace = np.trace(rho.matrix).real
    assert trace == pytest.approx(np.sum(np.abs(amps.weights.outer()) ** 2))
    assert np.all(rho.eigenvalues() >= -1e-12)
    normalised = AtomDensity(t=rho.t, matrix=rho.matrix / trace)
    assert -1e-12 <= linear_entropy(normalised) <= 0.75 + 1e-12


def test_exponent_cap(generic_state):
    with pytest.raises(ExponentCap):
        field_moment(generic_state, 5, 0, 0, 0)
    assert field_moment(generic_state, 5, 5, 0, 0, cap=5).real >= 0
    with pytest.raises(ParameterError):
        field_moment(generic_state, -1, 0, 0, 0)


def test_vacuum_mode_has_no_mandel_q():
    params = ModelParams(alpha1=0.0, alpha2=1.0)
    state = amplitudes_at(params, FockTruncation(n_max=6, tail_eps=1e-12), 0.0)
    with pytest.raises(ZeroMeanPhotonNumber):
        mandel_q(state, "mode1")
    with pytest.raises(ZeroMeanPhotonNumber):
        g2_zero(state, "mode1")
    assert math.isfinite(mandel_q(state, "mode2"))


def test_observable_registry(generic_state):
    values = evaluate(generic_state, ["norm", "pnd_2_3", "g2_2", "sx_pair"])
    assert values["norm"] == pytest.approx(1.0, abs=1e-9)
    assert values["pnd_2_3"] == pytest.approx(joint_pnd(generic_state).at(2, 3))
    assert all(isinstance(v, float) for v in values.values())
    with pytest.raises(ParameterError, match="unknown observable"):
        observable("wigner")
    with pytest.raises(ParameterError):
        mandel_q(generic_state, "mode3")
