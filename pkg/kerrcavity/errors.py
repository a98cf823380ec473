"""
Exception hierarchy.

ParameterError subclasses mean the request itself is invalid (CLI exit 2);
NumericalError subclasses mean a valid request hit a numerical failure
(CLI exit 3).
"""
from typing import Optional, Tuple


class KerrCavityError(Exception):
    pass


class ParameterError(KerrCavityError, ValueError):
    pass


class ConfigError(ParameterError):
    def __init__(self, location: str, message: str):
        self.location = location
        super().__init__(f"{location}: {message}")


class TruncationError(ParameterError):
    pass


class ExponentCap(ParameterError):
    pass


class NumericalError(KerrCavityError, ArithmeticError):
    pass


class SolverError(NumericalError):
    def __init__(self, message: str, cell: Optional[Tuple[int, int]] = None):
        self.cell = cell
        if cell is not None:
            message = f"{message} at cell (n1={cell[0]}, n2={cell[1]})"
        super().__init__(message)


class LambdaZero(SolverError):
    pass


class DegenerateRoots(SolverError):
    pass


class ComplexRoots(SolverError):
    pass


class DecoupledCell(SolverError):
    pass


class OracleError(NumericalError):
    pass


class StepTooLarge(OracleError):
    pass


class TruncationLeak(OracleError):
    pass


class ZeroMeanPhotonNumber(NumericalError):
    pass
