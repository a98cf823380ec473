import math

import numpy as np
import pytest

from kerrcavity.model import CoherentWeights, FockTruncation, ModelParams, coherent_weights
from kerrcavity.solver import AmplitudeSet
from kerrcavity.sweep import preset


def random_amplitude_set(seed, n_max=5, alpha1=0.8 + 0.3j, alpha2=1.1, t=0.0):
    """Arbitrary per-cell amplitudes, each cell normalised."""
    rng = np.random.default_rng(seed)
    shape = (3, n_max + 1, n_max + 1)
    a = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    a /= np.sqrt(np.abs(a[0]) ** 2 + 2 * np.abs(a[1]) ** 2 + np.abs(a[2]) ** 2)
    weights = CoherentWeights(q1=coherent_weights(alpha1, n_max), q2=coherent_weights(alpha2, n_max))
    return AmplitudeSet(t=t, a1=a[0], a2=a[1], a4=a[2], weights=weights)


@pytest.fixture
def random_amps():
    return random_amplitude_set


@pytest.fixture
def small_trunc():
    return FockTruncation(n_max=4, tail_eps=1e-12)


@pytest.fixture
def generic_params():
    """Every rate switched on, gamma2 = gamma3."""
    return ModelParams(
        lam=0.8,
        epsilon=3.0,
        phi=0.4,
        delta=2.5,
        beta1=0.3,
        beta2=0.2,
        chi1=0.5,
        chi2=0.3,
        chi12=0.2,
        alpha1=0.9 + 0.3j,
        alpha2=0.7,
        gamma=(0.6, 0.4 + 0.3j, 0.4 + 0.3j, math.sqrt(1 - 0.36 - 0.5)),
    )


@pytest.fixture
def gentle_params():
    """Slow dynamics for step-halving studies."""
    return ModelParams(
        lam=1.0,
        epsilon=2.0,
        phi=0.3,
        delta=2.0,
        beta1=0.1,
        beta2=0.2,
        chi1=0.2,
        chi2=0.1,
        chi12=0.1,
        alpha1=0.8,
        alpha2=0.8,
        gamma=(1 / math.sqrt(2), 0.5, 0.5, 0.0),
    )


@pytest.fixture
def coherent_params():
    """gamma1 = 1 with a complex coherent amplitude in each mode."""
    return ModelParams(
        lam=1.0,
        epsilon=10.0,
        delta=10.0,
        chi1=1.0,
        chi2=1.0,
        alpha1=0.7 + 0.4j,
        alpha2=1.0,
        gamma=(1.0, 0.0, 0.0, 0.0),
    )


@pytest.fixture
def fig3_params():
    return preset("fig3b").params
