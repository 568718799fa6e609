"""
Hyperboloid model helpers: upper half-plane points, SL(2,R) as Lorentz maps, distances.

A point z = u + iv of the upper half-plane is the symmetric matrix
X = (1/v) [[u^2 + v^2, u], [u, 1]] of determinant 1; g in SL(2,R) acts by X -> g X g^T.
Its hyperboloid coordinates are x0 = (X11 + X22)/2, x1 = (X11 - X22)/2, x2 = X12,
so the origin i sits at (1, 0, 0).
"""
import math

import numpy as np

LORENTZ_FORM = np.diag([1.0, -1.0, -1.0])


def from_upper(z: complex) -> np.ndarray:
    """Hyperboloid coordinates of a point in the upper half-plane."""
    u, v = z.real, z.imag
    if v <= 0:
        raise ValueError(f"Point {z} is not in the upper half-plane")
    X11 = (u * u + v * v) / v
    X22 = 1.0 / v
    return np.array([0.5 * (X11 + X22), 0.5 * (X11 - X22), u / v])


def to_upper(x: np.ndarray) -> complex:
    X11, X22, X12 = x[0] + x[1], x[0] - x[1], x[2]
    return complex(X12 / X22, 1.0 / X22)


def to_disk(x: np.ndarray) -> np.ndarray:
    """Poincare disk coordinates (x1 + i x2)/(1 + x0), as a complex array."""
    x = np.asarray(x)
    return (x[..., 1] + 1j * x[..., 2]) / (1.0 + x[..., 0])


def _matrix_of(x: np.ndarray) -> np.ndarray:
    return np.array([[x[0] + x[1], x[2]], [x[2], x[0] - x[1]]])


def _coords_of(X: np.ndarray) -> np.ndarray:
    return np.array([0.5 * (X[0, 0] + X[1, 1]), 0.5 * (X[0, 0] - X[1, 1]), 0.5 * (X[0, 1] + X[1, 0])])


def lorentz_matrix(g: np.ndarray) -> np.ndarray:
    """The 3x3 linear map on hyperboloid coordinates induced by X -> g X g^T."""
    g = np.asarray(g, dtype=float)
    columns = [_coords_of(g @ _matrix_of(e) @ g.T) for e in np.eye(3)]
    return np.column_stack(columns)


def minkowski(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """<p, q> = p0 q0 - p1 q1 - p2 q2, batched over leading axes."""
    return p[..., 0] * q[..., 0] - p[..., 1] * q[..., 1] - p[..., 2] * q[..., 2]


def distance(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Hyperbolic distance, stable for nearby points.

    Uses d = 2 asinh(sqrt(q)/2) with q = -<p - q, p - q> >= 0 instead of arccosh.
    """
    diff = np.asarray(p) - np.asarray(q)
    gap = np.maximum(-minkowski(diff, diff), 0.0)
    return 2.0 * np.arcsinh(0.5 * np.sqrt(gap))


def midpoint(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Geodesic midpoint (p + q)/sqrt(2 + 2<p, q>)."""
    return (p + q) / math.sqrt(2.0 + 2.0 * float(minkowski(p, q)))


def project(x: np.ndarray) -> np.ndarray:
    """Snap (x1, x2) back onto the upper sheet by recomputing x0."""
    x = np.array(x, dtype=float)
    x[..., 0] = np.sqrt(1.0 + x[..., 1] ** 2 + x[..., 2] ** 2)
    return x
