"""
Seeded random samples of metrics, operators and parameters.
"""
import math
from typing import Tuple

import numpy as np

from app.geometry.tensor_core import OperatorSample, TangentMetric


def random_metric(rng: np.random.Generator) -> TangentMetric:
    """A well-conditioned positive-definite metric."""
    A = rng.normal(size=(2, 2))
    H = A.T @ A + 0.25 * np.eye(2)
    return TangentMetric.from_matrix(H / math.sqrt(np.linalg.det(H)) * rng.uniform(0.5, 2.0))


def random_operator(rng: np.random.Generator, h: TangentMetric, kappa_max: float = 3.0) -> OperatorSample:
    """An h-self-adjoint positive unimodular operator with eigenvalues (kappa, 1/kappa)."""
    kappa = rng.uniform(1.0, kappa_max)
    phi = rng.uniform(0.0, math.pi)
    R = np.array([[math.cos(phi), -math.sin(phi)], [math.sin(phi), math.cos(phi)]])
    b_hat = R @ np.diag([kappa, 1.0 / kappa]) @ R.T
    O = np.linalg.cholesky(h.matrix()).T
    return OperatorSample.from_matrix(np.linalg.solve(O, b_hat @ O))


def random_pair(rng: np.random.Generator, kappa_max: float = 3.0) -> Tuple[TangentMetric, OperatorSample]:
    h = random_metric(rng)
    return h, random_operator(rng, h, kappa_max)
