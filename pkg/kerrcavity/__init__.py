"""
Two two-level atoms in a two-mode cavity with a Kerr medium: closed-form
amplitudes, numerical oracles and field/atom observables.
"""
from kerrcavity.errors import KerrCavityError, NumericalError, ParameterError
from kerrcavity.model import (
    Deformation,
    FockTruncation,
    ModelParams,
    branch_coefficients,
    choose_truncation,
    coherent_weights,
)
from kerrcavity.solver import AmplitudeSet, ClosedFormSolution, amplitudes_at, solve_cubic

__all__ = [
    "AmplitudeSet",
    "ClosedFormSolution",
    "Deformation",
    "FockTruncation",
    "KerrCavityError",
    "ModelParams",
    "NumericalError",
    "ParameterError",
    "amplitudes_at",
    "branch_coefficients",
    "choose_truncation",
    "coherent_weights",
    "solve_cubic",
]
