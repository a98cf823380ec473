import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from kerrcavity.errors import ComplexRoots, DecoupledCell, DegenerateRoots, LambdaZero
from kerrcavity.model import Deformation, FockTruncation, ModelParams, choose_truncation
from kerrcavity.solver import ClosedFormSolution, amplitudes_at, solve_cubic


def _coefficients(r):
    r1, r2, r3 = r
    return -(r1 + r2 + r3), r1 * r2 + r1 * r3 + r2 * r3, -r1 * r2 * r3


def test_solve_cubic_known_roots():
    np.testing.assert_allclose(solve_cubic(-6.0, 11.0, -6.0), [1.0, 2.0, 3.0], rtol=1e-14)


def test_solve_cubic_broadcasts():
    k = np.array([_coefficients((1, 2, 3)), _coefficients((-4, 0.5, 7))])
    roots = solve_cubic(k[:, 0], k[:, 1], k[:, 2])
    assert roots.shape == (2, 3)
    np.testing.assert_allclose(roots[1], [-4, 0.5, 7], atol=1e-12)


@settings(max_examples=300, deadline=None)
@given(
    st.lists(
        st.floats(min_value=-50, max_value=50, allow_nan=False, allow_infinity=False),
        min_size=3,
        max_size=3,
    )
)
def test_solve_cubic_matches_companion_matrix(r):
    r = sorted(r)
    assume(min(np.diff(r)) > 0.1)
    k1, k2, k3 = _coefficients(r)
    roots = solve_cubic(k1, k2, k3)
    scale = max(1.0, max(abs(x) for x in r))

    companion = np.array([[-k1, -k2, -k3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    reference = np.sort(np.linalg.eigvals(companion).real)
    np.testing.assert_allclose(roots, reference, atol=1e-8 * scale)
    np.testing.assert_allclose(roots, r, atol=1e-8 * scale)

    assert abs(roots.sum() + k1) <= 1e-9 * scale
    assert abs(roots[0] * roots[1] + roots[0] * roots[2] + roots[1] * roots[2] - k2) <= 1e-9 * scale**2
    assert abs(roots.prod() + k3) <= 1e-9 * scale**3


@pytest.mark.slow
def test_solve_cubic_on_ten_thousand_random_cubics():
    rng = np.random.default_rng(2024)
    r = np.sort(rng.uniform(-30, 30, size=(15000, 3)), axis=-1)
    scale = np.maximum(1.0, np.abs(r).max(axis=-1))
    separated = np.diff(r, axis=-1).min(axis=-1) > 0.02 * scale
    r, scale = r[separated][:10000], scale[separated][:10000]
    assert len(r) == 10000

    k1, k2, k3 = _coefficients(r.T)
    roots = solve_cubic(k1, k2, k3)

    companion = np.zeros((len(r), 3, 3))
    companion[:, 0] = -np.stack([k1, k2, k3], axis=-1)
    companion[:, 1, 0] = companion[:, 2, 1] = 1.0
    reference = np.sort(np.linalg.eigvals(companion).real, axis=-1)

    assert np.all(np.abs(roots - reference).max(axis=-1) <= 1e-10 * scale)
    assert np.all(np.abs(roots - r).max(axis=-1) <= 1e-10 * scale)

    m1, m2, m3 = roots.T
    assert np.all(np.abs(m1 + m2 + m3 + k1) <= 1e-9 * scale)
    assert np.all(np.abs(m1 * m2 + m1 * m3 + m2 * m3 - k2) <= 1e-9 * scale**2)
    assert np.all(np.abs(m1 * m2 * m3 + k3) <= 1e-9 * scale**3)


def test_solve_cubic_complex_roots():
    with pytest.raises(ComplexRoots):
        solve_cubic(0.0, 1.0, 0.0)


def test_solve_cubic_triple_root():
    with pytest.raises(DegenerateRoots):
        solve_cubic(-3.0, 3.0, -1.0)


def test_vieta_on_closed_form(generic_params, small_trunc):
    cubic = ClosedFormSolution(generic_params, small_trunc).cubic
    m = cubic.roots
    np.testing.assert_allclose(m.sum(axis=-1), -cubic.k1, atol=1e-9)
    np.testing.assert_allclose(
        m[..., 0] * m[..., 1] + m[..., 0] * m[..., 2] + m[..., 1] * m[..., 2], cubic.k2, atol=1e-9
    )
    np.testing.assert_allclose(m.prod(axis=-1), -cubic.k3, atol=1e-9)


def test_initial_amplitudes_reproduce_weights(generic_params, small_trunc):
    amps = amplitudes_at(generic_params, small_trunc, 0.0)
    g1, g2, g4 = generic_params.ansatz_weights()
    np.testing.assert_allclose(amps.a1, g1, atol=1e-9)
    np.testing.assert_allclose(amps.a2, g2, atol=1e-9)
    np.testing.assert_allclose(amps.a4, g4, atol=1e-9)


@pytest.mark.parametrize("t", [0.3, 1.7, 5.0])
def test_per_cell_norm_is_conserved(generic_params, small_trunc, t):
    amps = amplitudes_at(generic_params, small_trunc, t)
    cell_norm = np.abs(amps.a1) ** 2 + 2 * np.abs(amps.a2) ** 2 + np.abs(amps.a4) ** 2
    np.testing.assert_allclose(cell_norm, 1.0, atol=1e-9)


def test_norm_over_random_draws():
    rng = np.random.default_rng(7)
    for _ in range(100):
        g = rng.normal(size=3) + 1j * rng.normal(size=3)
        g /= math.sqrt(abs(g[0]) ** 2 + 2 * abs(g[1]) ** 2 + abs(g[2]) ** 2)
        alpha = rng.uniform(0, 2) * np.exp(1j * rng.uniform(0, 2 * math.pi))
        params = ModelParams(
            lam=rng.uniform(0.5, 3.0),
            epsilon=rng.uniform(0, 30),
            phi=rng.uniform(0, 2 * math.pi),
            delta=rng.uniform(-30, 30),
            beta1=rng.uniform(0, 1),
            beta2=rng.uniform(0, 1),
            chi1=rng.uniform(0, 1),
            chi2=rng.uniform(0, 1),
            chi12=rng.uniform(0, 1),
            alpha1=complex(alpha),
            alpha2=float(rng.uniform(0, 2)),
            gamma=(complex(g[0]), complex(g[1]), complex(g[1]), complex(g[2])),
        )
        trunc = FockTruncation(n_max=6, tail_eps=1e-12)
        amps = amplitudes_at(params, trunc, rng.uniform(0, 5))
        cell_norm = np.abs(amps.a1) ** 2 + 2 * np.abs(amps.a2) ** 2 + np.abs(amps.a4) ** 2
        np.testing.assert_allclose(cell_norm, 1.0, atol=1e-9)


def test_total_norm_for_full_truncation(coherent_params):
    trunc = choose_truncation(coherent_params.alpha1, coherent_params.alpha2, 1e-12)
    assert amplitudes_at(coherent_params, trunc, 2.0).norm() == pytest.approx(1.0, abs=1e-9)


def test_printed_a1_prefactor_breaks_initial_condition(small_trunc):
    params = ModelParams(lam=1.0, epsilon=1.0, delta=1.0, a1_convention="paper_literal")
    amps = amplitudes_at(params, small_trunc, 0.0)
    np.testing.assert_allclose(amps.a1, 0.5, atol=1e-9)


def test_branch_fields_layout(generic_params, small_trunc):
    amps = amplitudes_at(generic_params, small_trunc, 0.7)
    fields = amps.branch_fields()
    w = amps.weights.outer()
    assert fields.shape == (4, 7, 7)
    np.testing.assert_allclose(fields[0, :5, :5], w * amps.a1)
    np.testing.assert_allclose(fields[1], fields[2])
    np.testing.assert_allclose(fields[3, 2:, 2:], w * amps.a4)
    assert np.all(fields[3, :2, :] == 0)


def test_lambda_zero_is_rejected(small_trunc):
    with pytest.raises(LambdaZero):
        ClosedFormSolution(ModelParams(lam=0.0), small_trunc)


def test_vanishing_coupling_is_reported_with_cell(small_trunc):
    table = (1.0, 0.0) + (1.0,) * 8
    params = ModelParams(deformation=Deformation("custom", table))
    with pytest.raises(DecoupledCell) as err:
        ClosedFormSolution(params, small_trunc)
    assert err.value.cell == (0, 0)
