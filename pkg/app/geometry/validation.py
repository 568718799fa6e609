"""
Validation utilities for tangent metrics and operator samples.
"""
from dataclasses import dataclass
from typing import List, Optional

import numpy as np


@dataclass
class ValidationError:
    """Represents a validation error with a field and message."""
    field: str
    message: str


class TensorValidation:
    """Validation utilities for 2x2 metric and operator samples."""

    @staticmethod
    def validate_metric_entries(g11: float, g12: float, g22: float) -> Optional[ValidationError]:
        """Validate that (g11, g12, g22) is a positive-definite form."""
        if not all(np.isfinite([g11, g12, g22])):
            return ValidationError("metric", "Entries must be finite")
        if g11 <= 0:
            return ValidationError("metric", f"g11 must be positive, got {g11:.3e}")
        det = g11 * g22 - g12 * g12
        if det <= 0:
            return ValidationError("metric", f"Determinant must be positive, got {det:.3e}")
        return None

    @staticmethod
    def validate_self_adjoint(op: np.ndarray, metric: np.ndarray, tol: float) -> Optional[ValidationError]:
        """Validate h(Au, v) = h(u, Av), i.e. A^T H symmetric."""
        form = op.T @ metric
        scale = max(1.0, float(np.abs(form).max()))
        mismatch = abs(form[0, 1] - form[1, 0])
        if mismatch > tol * scale:
            return ValidationError("operator", f"Not self-adjoint for the metric (mismatch {mismatch:.3e})")
        return None

    @staticmethod
    def validate_unimodular(op: np.ndarray, tol: float) -> Optional[ValidationError]:
        """Validate det A = 1 within tolerance."""
        det = float(np.linalg.det(op))
        if abs(det - 1.0) > tol:
            return ValidationError("operator", f"Determinant must be 1, got {det:.12g}")
        return None

    @staticmethod
    def validate_positive(op: np.ndarray, metric: np.ndarray) -> Optional[ValidationError]:
        """Validate h(Au, u) > 0 for all u != 0."""
        form = op.T @ metric
        sym = 0.5 * (form + form.T)
        if np.linalg.eigvalsh(sym).min() <= 0:
            return ValidationError("operator", "Not positive for the metric")
        return None

    @staticmethod
    def validate_open_interval(value: float, low: float, high: float, field: str) -> Optional[ValidationError]:
        """Validate low < value < high."""
        if not low < value < high:
            return ValidationError(field, f"{field} must lie in ({low:.6g}, {high:.6g}), got {value:.6g}")
        return None

    @staticmethod
    def validate_landslide_operator(op: np.ndarray, metric: np.ndarray, tol: float) -> List[ValidationError]:
        """Validate the three predicates required of the operator b."""
        errors = []
        for error in (
            TensorValidation.validate_self_adjoint(op, metric, tol),
            TensorValidation.validate_unimodular(op, tol),
            TensorValidation.validate_positive(op, metric),
        ):
            if error is not None:
                errors.append(error)
        return errors
