"""
Exception types raised by the geometry and experiment modules.
"""
from typing import Optional


class LandslideError(ValueError):
    """Base class for every domain error of the package."""


class DegenerateMetric(LandslideError):
    """A metric sample is not positive-definite."""


class InvalidOperator(LandslideError):
    """An operator sample violates the self-adjoint / unimodular / positive predicates."""


class SingularOperator(LandslideError):
    """An operator that must be invertible is singular."""

    def __init__(self, message: str, eigenvalue: Optional[complex] = None):
        super().__init__(message)
        self.eigenvalue = eigenvalue


class OutOfRange(LandslideError):
    """A scalar parameter lies outside its admissible range."""


class DegenerateFace(LandslideError):
    """A mesh face violates the triangle inequality or has a degenerate image."""

    def __init__(self, message: str, face: int):
        super().__init__(f"face {face}: {message}")
        self.face = face


class SolverDiverged(LandslideError):
    """An iterative solver stopped without meeting its convergence criterion."""

    def __init__(self, message: str, gradient_norm: float, iterations: int):
        super().__init__(f"{message} (gradient norm {gradient_norm:.3e} after {iterations} iterations)")
        self.gradient_norm = gradient_norm
        self.iterations = iterations


class StructureMismatch(LandslideError):
    """Two inputs describe surfaces or fields that cannot be combined."""


class ConstructionFailed(LandslideError):
    """A representation could not be built within tolerance."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


class ConfigError(LandslideError):
    """The experiment configuration could not be parsed or validated."""
