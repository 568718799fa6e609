"""
Pointwise tensor algebra of the landslide flow on 2x2 tangent data.

Metrics are symmetric bilinear forms h(u, v) = u^T H v in a fixed chart basis,
operators act on column vectors, so pushing h by A gives A^T H A.
"""
import cmath
import math
from dataclasses import dataclass
from enum import Enum
from typing import Tuple

import numpy as np

from app.core.errors import DegenerateMetric, InvalidOperator, OutOfRange, SingularOperator
from app.geometry.validation import TensorValidation

IDENTITY_TOL = 1e-12
PREDICATE_TOL = 1e-9
SINGULAR_TOL = 1e-13


@dataclass(frozen=True)
class SymmetricForm:
    """A symmetric bilinear form on the tangent plane (not necessarily positive)."""
    g11: float
    g12: float
    g22: float

    def matrix(self) -> np.ndarray:
        return np.array([[self.g11, self.g12], [self.g12, self.g22]])

    @property
    def det(self) -> float:
        return self.g11 * self.g22 - self.g12 * self.g12

    def to_tuple(self) -> Tuple[float, float, float]:
        return (self.g11, self.g12, self.g22)

    def distance(self, other: "SymmetricForm") -> float:
        """Largest entrywise difference."""
        return float(np.abs(np.subtract(self.to_tuple(), other.to_tuple())).max())

    def trace_with_respect_to(self, metric: "TangentMetric") -> float:
        """tr(C^-1 S): the trace of the form measured by ``metric``."""
        return float(np.trace(np.linalg.solve(metric.matrix(), self.matrix())))

    @classmethod
    def from_matrix(cls, m: np.ndarray):
        m = np.asarray(m, dtype=float)
        return cls(float(m[0, 0]), float(0.5 * (m[0, 1] + m[1, 0])), float(m[1, 1]))

    def __add__(self, other: "SymmetricForm"):
        return type(self)(self.g11 + other.g11, self.g12 + other.g12, self.g22 + other.g22)

    def __sub__(self, other: "SymmetricForm") -> "SymmetricForm":
        return SymmetricForm(self.g11 - other.g11, self.g12 - other.g12, self.g22 - other.g22)

    def scaled(self, factor: float):
        return type(self)(factor * self.g11, factor * self.g12, factor * self.g22)


@dataclass(frozen=True)
class TangentMetric(SymmetricForm):
    """A positive-definite metric sample; houses h, h*, c and the embedding forms."""

    def __post_init__(self):
        error = TensorValidation.validate_metric_entries(self.g11, self.g12, self.g22)
        if error is not None:
            raise DegenerateMetric(f"{error.field}: {error.message}")

    @property
    def area_factor(self) -> float:
        """sqrt(det G): the area form in the chart basis."""
        return math.sqrt(self.det)

    def __sub__(self, other: "SymmetricForm") -> SymmetricForm:
        return SymmetricForm(self.g11 - other.g11, self.g12 - other.g12, self.g22 - other.g22)

    @staticmethod
    def identity() -> "TangentMetric":
        return TangentMetric(1.0, 0.0, 1.0)


@dataclass(frozen=True)
class OperatorSample:
    """An endomorphism of the tangent plane; houses b, J, beta, B and E."""
    a11: float
    a12: float
    a21: float
    a22: float

    @staticmethod
    def identity() -> "OperatorSample":
        return OperatorSample(1.0, 0.0, 0.0, 1.0)

    @staticmethod
    def from_matrix(m: np.ndarray) -> "OperatorSample":
        m = np.asarray(m, dtype=float)
        return OperatorSample(float(m[0, 0]), float(m[0, 1]), float(m[1, 0]), float(m[1, 1]))

    def matrix(self) -> np.ndarray:
        return np.array([[self.a11, self.a12], [self.a21, self.a22]])

    def to_tuple(self) -> Tuple[float, float, float, float]:
        return (self.a11, self.a12, self.a21, self.a22)

    @property
    def det(self) -> float:
        return self.a11 * self.a22 - self.a12 * self.a21

    @property
    def trace(self) -> float:
        return self.a11 + self.a22

    def __matmul__(self, other: "OperatorSample") -> "OperatorSample":
        return OperatorSample.from_matrix(self.matrix() @ other.matrix())

    def __add__(self, other: "OperatorSample") -> "OperatorSample":
        return OperatorSample.from_matrix(self.matrix() + other.matrix())

    def __sub__(self, other: "OperatorSample") -> "OperatorSample":
        return OperatorSample.from_matrix(self.matrix() - other.matrix())

    def scaled(self, factor: float) -> "OperatorSample":
        return OperatorSample.from_matrix(factor * self.matrix())

    def inverse(self) -> "OperatorSample":
        if abs(self.det) < SINGULAR_TOL:
            raise SingularOperator(f"Operator is singular (det {self.det:.3e})", eigenvalue=0.0)
        return OperatorSample.from_matrix(np.linalg.inv(self.matrix()))

    def norm(self) -> float:
        """Frobenius norm."""
        return float(np.linalg.norm(self.matrix()))

    def distance(self, other: "OperatorSample") -> float:
        """Largest entrywise difference."""
        return float(np.abs(self.matrix() - other.matrix()).max())

    def is_self_adjoint(self, h: TangentMetric, tol: float = PREDICATE_TOL) -> bool:
        return TensorValidation.validate_self_adjoint(self.matrix(), h.matrix(), tol) is None

    def is_unimodular(self, tol: float = PREDICATE_TOL) -> bool:
        return TensorValidation.validate_unimodular(self.matrix(), tol) is None

    def is_positive(self, h: TangentMetric) -> bool:
        return TensorValidation.validate_positive(self.matrix(), h.matrix()) is None


@dataclass(frozen=True)
class ComplexOperator:
    """P + iQ where the complex unit acts as the complex structure J."""
    re: OperatorSample
    im: OperatorSample

    def realization(self, J: OperatorSample) -> OperatorSample:
        """The real endomorphism re + J im."""
        return self.re + J @ self.im

    def scaled(self, factor: complex) -> "ComplexOperator":
        """Multiply by a complex scalar x + iy."""
        x, y = factor.real, factor.imag
        return ComplexOperator(
            re=self.re.scaled(x) - self.im.scaled(y),
            im=self.re.scaled(y) + self.im.scaled(x),
        )


@dataclass(frozen=True)
class HopfSample:
    """Real and imaginary parts of a Hopf differential sample, both traceless for the center."""
    re_part: SymmetricForm
    im_part: SymmetricForm

    def rotated(self, theta: float) -> SymmetricForm:
        """Real part of e^{i theta} times this sample."""
        return self.re_part.scaled(math.cos(theta)) - self.im_part.scaled(math.sin(theta))


class AmbientSpace(Enum):
    HYPERBOLIC = "hyperbolic"
    ANTI_DE_SITTER = "anti_de_sitter"


@dataclass(frozen=True)
class EmbeddingData:
    """First fundamental form and shape operator of an equidistant surface."""
    first_form: TangentMetric
    shape_op: OperatorSample
    ambient: AmbientSpace

    def __post_init__(self):
        if not self.shape_op.is_self_adjoint(self.first_form):
            raise InvalidOperator("Shape operator must be self-adjoint for the first fundamental form")

    def flip_normal(self) -> "EmbeddingData":
        """Same surface with the opposite unit normal."""
        return EmbeddingData(self.first_form, self.shape_op.scaled(-1.0), self.ambient)


def validate_landslide_operator(h: TangentMetric, b: OperatorSample, tol: float = PREDICATE_TOL):
    """Raise InvalidOperator unless b is h-self-adjoint, unimodular and positive."""
    errors = TensorValidation.validate_landslide_operator(b.matrix(), h.matrix(), tol)
    if errors:
        raise InvalidOperator(f"Invalid parameters: {'; '.join(e.message for e in errors)}")


def complex_structure(h: TangentMetric, orientation: int = 1) -> OperatorSample:
    """Rotation by +90 degrees for h (or -90 for negative orientation)."""
    if orientation not in (1, -1):
        raise OutOfRange(f"orientation must be +1 or -1, got {orientation}")
    if h.det <= 0:
        raise DegenerateMetric("Complex structure needs a positive-definite metric")
    root = math.sqrt(h.det)
    J = np.array([[-h.g12, -h.g22], [h.g11, h.g12]]) / root
    return OperatorSample.from_matrix(orientation * J)


def beta(theta: float, b: OperatorSample, J: OperatorSample) -> OperatorSample:
    """beta_theta = cos(theta/2) E + sin(theta/2) J b."""
    if not b.is_unimodular():
        raise InvalidOperator(f"det b must be 1, got {b.det:.12g}")
    return OperatorSample.identity().scaled(math.cos(theta / 2)) + (J @ b).scaled(math.sin(theta / 2))


def push_metric(h: TangentMetric, A: OperatorSample) -> TangentMetric:
    """The metric (u, v) -> h(Au, Av)."""
    if abs(A.det) < SINGULAR_TOL * max(1.0, A.norm() ** 2):
        raise SingularOperator(f"Cannot push a metric by a singular operator (det {A.det:.3e})", eigenvalue=0.0)
    a = A.matrix()
    return TangentMetric.from_matrix(a.T @ h.matrix() @ a)


def landslide_point(h: TangentMetric, b: OperatorSample, theta: float) -> Tuple[TangentMetric, TangentMetric]:
    """The pair (h_theta, h*_theta) = (h(beta_theta.,.), h(beta_{theta+pi}.,.))."""
    validate_landslide_operator(h, b)
    J = complex_structure(h)
    return push_metric(h, beta(theta, b, J)), push_metric(h, beta(theta + math.pi, b, J))


def conjugated_b(b: OperatorSample, J: OperatorSample, theta: float) -> OperatorSample:
    """b_theta = beta_{-theta} b beta_theta, the operator of the pair after the flow."""
    return beta(-theta, b, J) @ b @ beta(theta, b, J)


def center(h: TangentMetric, b: OperatorSample) -> TangentMetric:
    """c = h + h(b., b.)."""
    validate_landslide_operator(h, b)
    return h + push_metric(h, b)


def hopf(h: TangentMetric, b: OperatorSample, J: OperatorSample) -> HopfSample:
    """Hopf differential of the harmonic map from the center to h.

    The real part is h((E - b^2).,.)/4 and the imaginary part is
    -h([J, b].,.)/4, which makes (h_theta - h*_theta)/4 the real part of
    e^{i theta} times the sample.
    """
    H = h.matrix()
    bm = b.matrix()
    Jm = J.matrix()
    re_part = SymmetricForm.from_matrix(0.25 * H @ (np.eye(2) - bm @ bm))
    im_part = SymmetricForm.from_matrix(-0.25 * H @ (Jm @ bm - bm @ Jm))
    return HopfSample(re_part=re_part, im_part=im_part)


def det_normalize(A: OperatorSample) -> Tuple[OperatorSample, float]:
    """Divide by sqrt(det A) and return the scale factor."""
    if A.det <= 0:
        raise InvalidOperator(f"Cannot normalize an operator with det {A.det:.3e}")
    scale = math.sqrt(A.det)
    return A.scaled(1.0 / scale), scale


def operator_sqrt(h: TangentMetric, g: TangentMetric, normalize: bool = False) -> OperatorSample:
    """The h-self-adjoint positive b with h(b., b.) = g."""
    O = np.linalg.cholesky(h.matrix()).T  # H = O^T O
    O_inv = np.linalg.inv(O)
    M = O_inv.T @ g.matrix() @ O_inv
    eigenvalues, Q = np.linalg.eigh(0.5 * (M + M.T))
    if eigenvalues.min() <= 0:
        raise DegenerateMetric("operator_sqrt needs a positive-definite target metric")
    root = Q @ np.diag(np.sqrt(eigenvalues)) @ Q.T
    b = OperatorSample.from_matrix(O_inv @ root @ O)
    if normalize:
        b, _ = det_normalize(b)
    return b


def _principal_sqrt(zeta: complex) -> complex:
    if zeta.imag == 0.0 and zeta.real < 0:
        zeta = complex(zeta.real, 0.0)
    return cmath.sqrt(zeta)


def complex_landslide_operator(zeta: complex, b: OperatorSample, J: OperatorSample) -> ComplexOperator:
    """B#_zeta = (zeta+1)/(2 sqrt zeta) E - (zeta-1)/(2 sqrt zeta) b."""
    zeta = complex(zeta)
    if zeta == 0:
        raise OutOfRange("zeta = 0 has no square root; use graft_limit_operator")
    root = _principal_sqrt(zeta)
    alpha = (zeta + 1) / (2 * root)
    gamma = -(zeta - 1) / (2 * root)
    E = OperatorSample.identity()
    operator = ComplexOperator(
        re=E.scaled(alpha.real) + b.scaled(gamma.real),
        im=E.scaled(alpha.imag) + b.scaled(gamma.imag),
    )
    realization = operator.realization(J)
    if abs(realization.det) < SINGULAR_TOL * max(1.0, realization.norm() ** 2):
        eigenvalues = np.linalg.eigvals(realization.matrix())
        worst = eigenvalues[np.argmin(np.abs(eigenvalues))]
        raise SingularOperator(f"B#_zeta is singular at zeta = {zeta}", eigenvalue=complex(worst))
    return operator


def normalized_complex_operator(zeta: complex, b: OperatorSample, J: OperatorSample) -> OperatorSample:
    """Real realization of (1 + zeta) E + (1 - zeta) b; continuous through zeta = 0."""
    zeta = complex(zeta)
    E = OperatorSample.identity()
    operator = ComplexOperator(
        re=E.scaled(1 + zeta.real) + b.scaled(1 - zeta.real),
        im=E.scaled(zeta.imag) - b.scaled(zeta.imag),
    )
    return operator.realization(J)


def graft_limit_operator(b: OperatorSample) -> OperatorSample:
    """E + b, the value of the normalized operator at zeta = 0."""
    return OperatorSample.identity() + b


def conformal_grafted_metric(h: TangentMetric, b: OperatorSample, zeta: complex) -> TangentMetric:
    """Representative of the conformal class obtained by pushing h by B#_zeta."""
    J = complex_structure(h)
    return push_metric(h, normalized_complex_operator(zeta, b, J))


def beltrami(c_ref: TangentMetric, J_ref: OperatorSample, g: TangentMetric) -> complex:
    """Beltrami coefficient of g against the conformal structure of c_ref.

    The complex coordinate is taken with d/dx the first chart vector (scaled to
    unit c_ref length) and d/dy its image under J_ref.
    """
    e1 = np.array([1.0, 0.0]) / math.sqrt(c_ref.g11)
    frame = np.column_stack([e1, J_ref.matrix() @ e1])
    G = frame.T @ g.matrix() @ frame
    E_, F_, G_ = G[0, 0], 0.5 * (G[0, 1] + G[1, 0]), G[1, 1]
    area = E_ * G_ - F_ * F_
    if area <= 0:
        raise DegenerateMetric("Beltrami coefficient needs a positive-definite metric")
    return complex(E_ - G_, 2 * F_) / (E_ + G_ + 2 * math.sqrt(area))


def cauchy_riemann_residual(mu_of_zeta, zeta: complex, step: float = 1e-4) -> float:
    """|d mu / d zeta-bar| by central differences."""
    dx = (mu_of_zeta(zeta + step) - mu_of_zeta(zeta - step)) / (2 * step)
    dy = (mu_of_zeta(zeta + 1j * step) - mu_of_zeta(zeta - 1j * step)) / (2 * step)
    return abs(0.5 * (dx + 1j * dy))


def ads_embedding_data(h: TangentMetric, b: OperatorSample, theta: float) -> EmbeddingData:
    """Equidistant surface at angle theta in the anti-de Sitter manifold of the pair."""
    error = TensorValidation.validate_open_interval(theta, 0.0, math.pi, "theta")
    if error is not None:
        raise OutOfRange(error.message)
    return EmbeddingData(
        first_form=h.scaled(math.cos(theta / 2) ** 2),
        shape_op=b.scaled(math.tan(theta / 2)),
        ambient=AmbientSpace.ANTI_DE_SITTER,
    )


def hyp_grafting_data(h: TangentMetric, b: OperatorSample, s: float) -> EmbeddingData:
    """Smooth grafting surface at distance s in hyperbolic space."""
    error = TensorValidation.validate_open_interval(s, 0.0, math.inf, "s")
    if error is not None:
        raise OutOfRange(error.message)
    return EmbeddingData(
        first_form=h.scaled(math.cosh(s / 2) ** 2),
        shape_op=b.scaled(-math.tanh(s / 2)),
        ambient=AmbientSpace.HYPERBOLIC,
    )


def embedding_curvature(data: EmbeddingData) -> float:
    """Intrinsic curvature predicted by the Gauss equation of the ambient space."""
    if data.ambient is AmbientSpace.ANTI_DE_SITTER:
        return -1.0 - data.shape_op.det
    return -1.0 + data.shape_op.det


def gauss_residual(data: EmbeddingData, h: TangentMetric) -> float:
    """Relative gap |K(I) - K_Gauss| / max(1, |K_Gauss|) for I a constant multiple of h."""
    factor = data.first_form.g11 / h.g11
    predicted = embedding_curvature(data)
    return abs(-1.0 / factor - predicted) / max(1.0, abs(predicted))


def third_form(data: EmbeddingData) -> TangentMetric:
    """III = I(B., B.)."""
    return push_metric(data.first_form, data.shape_op)


def grafted_metric(data: EmbeddingData) -> TangentMetric:
    """I((E + B)., (E + B).)."""
    return push_metric(data.first_form, OperatorSample.identity() + data.shape_op)


def grafting_operator(b: OperatorSample, s: float) -> OperatorSample:
    """gamma_s = cosh(s/2) E + sinh(s/2) b."""
    return OperatorSample.identity().scaled(math.cosh(s / 2)) + b.scaled(math.sinh(s / 2))


def variation_residuals(h: TangentMetric, b: OperatorSample, s0: float, step: float = 1e-4) -> Tuple[float, float]:
    """Central-difference residuals of the first-form and shape-operator variations.

    The first compares d/ds I_s with tanh(s0/2) I_{s0}; the second compares
    d/dt B_t at t = 0, B_t = -tanh(s0/2) beta_t b beta_{-t}, with
    (tanh(s0/2)/2)(2J - tr(b) J b).
    """
    def first(s: float) -> np.ndarray:
        return hyp_grafting_data(h, b, s).first_form.matrix()

    dI = (first(s0 + step) - first(s0 - step)) / (2 * step)
    I0 = first(s0)
    residual_first = float(np.linalg.norm(dI - math.tanh(s0 / 2) * I0) / np.linalg.norm(I0))

    J = complex_structure(h)
    t0 = math.tanh(s0 / 2)
    def B(t: float) -> np.ndarray:
        return conjugated_b(b, J, -t).scaled(-t0).matrix()

    dB = (B(step) - B(-step)) / (2 * step)
    Jm, bm = J.matrix(), b.matrix()
    target = 0.5 * t0 * (2 * Jm - b.trace * Jm @ bm)
    residual_shape = float(np.linalg.norm(dB - target) / np.linalg.norm(B(0.0)))
    return residual_first, residual_shape


def shape_variation_residual(h: TangentMetric, b: OperatorSample, s0: float, step: float = 1e-4) -> float:
    """Residual of d/ds B_s = J A' - (tr b / 4) E - (tanh(s0/2)/2) B_{s0}, A' = [J, b]/4."""
    def shape(s: float) -> np.ndarray:
        return hyp_grafting_data(h, b, s).shape_op.matrix()

    dB = (shape(s0 + step) - shape(s0 - step)) / (2 * step)
    Jm, bm = complex_structure(h).matrix(), b.matrix()
    A_prime = 0.25 * (Jm @ bm - bm @ Jm)
    target = Jm @ A_prime - 0.25 * b.trace * np.eye(2) - 0.5 * math.tanh(s0 / 2) * shape(s0)
    return float(np.linalg.norm(dB - target) / np.linalg.norm(bm))


def trace_identity_residual(b: OperatorSample) -> float:
    """|b + b^-1 - tr(b) E| for a unimodular b."""
    return (b + b.inverse() - OperatorSample.identity().scaled(b.trace)).norm()


def jb_decomposition_residual(b: OperatorSample, J: OperatorSample) -> float:
    """|Jb - ([J, b]/2 + tr(b) J / 2)|."""
    commutator = J @ b - b @ J
    return (J @ b - commutator.scaled(0.5) - J.scaled(0.5 * b.trace)).norm()


def singular_radius(kappa0: float) -> float:
    """Radius (kappa0 + 1)/(kappa0 - 1) of the disk where B#_zeta stays invertible."""
    if kappa0 < 1:
        raise OutOfRange(f"kappa0 must be >= 1, got {kappa0}")
    if kappa0 == 1:
        return math.inf
    return (kappa0 + 1) / (kappa0 - 1)


def largest_eigenvalue(b: OperatorSample) -> float:
    """kappa: the largest eigenvalue of an h-self-adjoint operator."""
    return float(np.linalg.eigvals(b.matrix()).real.max())


def eigen_bound(epsilon: float) -> float:
    """Lower bound 1/(2 epsilon) on the largest eigenvalue of b when one metric has a short curve."""
    if epsilon <= 0:
        raise OutOfRange(f"epsilon must be positive, got {epsilon}")
    return 1.0 / (2.0 * epsilon)
