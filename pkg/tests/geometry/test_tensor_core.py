"""
Tests for the pointwise landslide tensor algebra.
"""
import math
import unittest

import numpy as np
import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

from app.core.errors import DegenerateMetric, InvalidOperator, OutOfRange, SingularOperator
from app.geometry.sampling import random_pair
from app.geometry.tensor_core import (
    AmbientSpace,
    EmbeddingData,
    OperatorSample,
    TangentMetric,
    ads_embedding_data,
    beltrami,
    beta,
    cauchy_riemann_residual,
    center,
    complex_landslide_operator,
    complex_structure,
    conformal_grafted_metric,
    conjugated_b,
    det_normalize,
    eigen_bound,
    gauss_residual,
    grafted_metric,
    grafting_operator,
    hopf,
    hyp_grafting_data,
    jb_decomposition_residual,
    landslide_point,
    largest_eigenvalue,
    normalized_complex_operator,
    operator_sqrt,
    push_metric,
    shape_variation_residual,
    singular_radius,
    third_form,
    trace_identity_residual,
    variation_residuals,
)

seeds = st.integers(min_value=0, max_value=2**32 - 1)
angles = st.floats(min_value=-2 * math.pi, max_value=2 * math.pi, allow_nan=False)

E = OperatorSample.identity()


def _close(a, b, tol=1e-12):
    scale = max(1.0, float(np.abs(a.matrix()).max()), float(np.abs(b.matrix()).max()))
    return float(np.abs(a.matrix() - b.matrix()).max()) <= tol * scale


def _diag_pair(kappa):
    return TangentMetric.identity(), OperatorSample(kappa, 0.0, 0.0, 1.0 / kappa)


def _exact_pair():
    # det b is exactly 1 in floating point
    return TangentMetric(2.0, 0.0, 3.0), OperatorSample(2.0, 0.0, 0.0, 0.5)


def test_tangent_metric_rejects_indefinite_forms():
    """Test that non positive-definite forms are rejected."""
    with pytest.raises(DegenerateMetric):
        TangentMetric(1.0, 2.0, 1.0)
    with pytest.raises(DegenerateMetric):
        TangentMetric(-1.0, 0.0, 1.0)


def test_complex_structure_examples():
    """Test complex structure of the identity and a diagonal metric."""
    J = complex_structure(TangentMetric.identity())
    assert J.to_tuple() == pytest.approx((0.0, -1.0, 1.0, 0.0))

    J = complex_structure(TangentMetric(4.0, 0.0, 1.0))
    assert J.to_tuple() == pytest.approx((0.0, -0.5, 2.0, 0.0))

    J_negative = complex_structure(TangentMetric(4.0, 0.0, 1.0), orientation=-1)
    assert J_negative.to_tuple() == pytest.approx((0.0, 0.5, -2.0, 0.0))

    with pytest.raises(OutOfRange):
        complex_structure(TangentMetric.identity(), orientation=2)


@given(seeds)
@settings(max_examples=200, deadline=None)
def test_complex_structure_properties(seed):
    """Test J^2 = -E, det J = 1 and that J is an isometry."""
    h, _ = random_pair(np.random.default_rng(seed))
    J = complex_structure(h)
    assert np.abs((J @ J + E).matrix()).max() < 1e-14 * max(1.0, J.norm() ** 2)
    assert J.det == pytest.approx(1.0, abs=1e-12)
    assert _close(push_metric(h, J), h)


def test_beta_examples():
    """Test beta at 0 and pi, and beta_pi squared."""
    h, b = random_pair(np.random.default_rng(1))
    J = complex_structure(h)
    assert _close(beta(0.0, b, J), E)
    assert _close(beta(math.pi, b, J), J @ b, tol=1e-14)
    assert _close(beta(math.pi, b, J) @ beta(math.pi, b, J), E.scaled(-1.0))


def test_beta_rejects_non_unimodular_operator():
    """Test that beta refuses an operator with det != 1."""
    J = complex_structure(TangentMetric.identity())
    with pytest.raises(InvalidOperator):
        beta(0.3, OperatorSample(2.0, 0.0, 0.0, 1.0), J)


def test_push_metric_examples():
    """Test push by identity, by J and by a diagonal operator."""
    h, _ = random_pair(np.random.default_rng(2))
    assert _close(push_metric(h, E), h)
    assert _close(push_metric(h, complex_structure(h)), h)
    pushed = push_metric(TangentMetric.identity(), OperatorSample(2.0, 0.0, 0.0, 0.5))
    assert pushed.to_tuple() == pytest.approx((4.0, 0.0, 0.25))
    with pytest.raises(SingularOperator):
        push_metric(h, OperatorSample(1.0, 1.0, 1.0, 1.0))


def test_landslide_point_examples():
    """Test landslide at 0, at pi and with b = E."""
    h, b = random_pair(np.random.default_rng(3))
    h_star = push_metric(h, b)

    h0, h0_star = landslide_point(h, b, 0.0)
    assert _close(h0, h) and _close(h0_star, h_star)

    h_pi, h_pi_star = landslide_point(h, b, math.pi)
    assert _close(h_pi, h_star) and _close(h_pi_star, h)

    for theta in (0.4, 2.0, -1.3):
        h_theta, h_theta_star = landslide_point(h, E, theta)
        assert _close(h_theta, h) and _close(h_theta_star, h)


def test_landslide_point_rejects_invalid_operator():
    """Test that non self-adjoint operators are refused."""
    with pytest.raises(InvalidOperator):
        landslide_point(TangentMetric.identity(), OperatorSample(1.0, 1.0, 0.0, 1.0), 0.5)


@given(seeds, angles, angles)
@settings(max_examples=300, deadline=None)
def test_group_law(seed, theta, theta_prime):
    """Test that flowing by theta then theta' equals flowing by theta + theta'."""
    h, b = random_pair(np.random.default_rng(seed))
    J = complex_structure(h)
    h_theta, _ = landslide_point(h, b, theta)
    b_theta = conjugated_b(b, J, theta)
    composed = landslide_point(h_theta, b_theta, theta_prime)
    direct = landslide_point(h, b, theta + theta_prime)
    assert _close(composed[0], direct[0])
    assert _close(composed[1], direct[1])


@given(seeds, angles)
@settings(max_examples=200, deadline=None)
def test_conjugated_b_properties(seed, theta):
    """Test that b_theta is a valid operator for h_theta taking it to h*_theta."""
    h, b = random_pair(np.random.default_rng(seed))
    J = complex_structure(h)
    h_theta, h_theta_star = landslide_point(h, b, theta)
    b_theta = conjugated_b(b, J, theta)
    assert b_theta.is_self_adjoint(h_theta)
    assert b_theta.is_unimodular()
    assert b_theta.is_positive(h_theta)
    assert b_theta.trace == pytest.approx(b.trace, rel=1e-12)
    assert _close(push_metric(h_theta, b_theta), h_theta_star, tol=1e-11)
    assert beta(theta, b, J).det == pytest.approx(1.0, abs=1e-12)


def test_conjugated_b_examples():
    """Test b_0 = b and b_pi = b^-1."""
    h, b = random_pair(np.random.default_rng(4))
    J = complex_structure(h)
    assert _close(conjugated_b(b, J, 0.0), b)
    assert _close(conjugated_b(b, J, math.pi), b.inverse())


def test_center_examples():
    """Test center for b = E and for a diagonal pair."""
    h, _ = random_pair(np.random.default_rng(5))
    assert _close(center(h, E), h.scaled(2.0))
    c = center(TangentMetric.identity(), OperatorSample(2.0, 0.0, 0.0, 0.5))
    assert c.to_tuple() == pytest.approx((5.0, 0.0, 1.25))


@given(seeds)
@settings(max_examples=100, deadline=None)
def test_center_and_hopf_rotation_along_the_flow(seed):
    """Test center invariance and the Hopf rotation law on a theta grid."""
    h, b = random_pair(np.random.default_rng(seed))
    J = complex_structure(h)
    c = center(h, b)
    sample = hopf(h, b, J)
    for theta in np.linspace(0.0, 2 * math.pi, 64, endpoint=False):
        h_theta, h_theta_star = landslide_point(h, b, theta)
        assert _close(h_theta + h_theta_star, c)
        difference = (h_theta - h_theta_star).scaled(0.25)
        assert difference.distance(sample.rotated(theta)) <= 1e-12 * max(1.0, abs(c.g11), abs(c.g22))


def test_hopf_examples():
    """Test the Hopf sample of the identity and of a diagonal operator."""
    h, _ = random_pair(np.random.default_rng(6))
    zero = hopf(h, E, complex_structure(h))
    assert zero.re_part.to_tuple() == pytest.approx((0.0, 0.0, 0.0), abs=1e-15)
    assert zero.im_part.to_tuple() == pytest.approx((0.0, 0.0, 0.0), abs=1e-15)

    kappa = 2.5
    h, b = _diag_pair(kappa)
    sample = hopf(h, b, complex_structure(h))
    assert sample.re_part.to_tuple() == pytest.approx(
        ((1 - kappa**2) / 4, 0.0, (1 - kappa**-2) / 4)
    )
    assert abs(sample.im_part.g12) == pytest.approx((kappa - 1 / kappa) / 4)
    assert sample.im_part.g11 == pytest.approx(0.0, abs=1e-15)


@given(seeds)
@settings(max_examples=200, deadline=None)
def test_hopf_parts_are_traceless_and_complex_linear(seed):
    """Test both Hopf parts are traceless for the center and im = -re(J_c., .)."""
    h, b = random_pair(np.random.default_rng(seed))
    sample = hopf(h, b, complex_structure(h))
    c = center(h, b)
    assert abs(sample.re_part.trace_with_respect_to(c)) < 1e-12
    assert abs(sample.im_part.trace_with_respect_to(c)) < 1e-12
    J_c = complex_structure(c).matrix()
    rotated = -J_c.T @ sample.re_part.matrix()
    assert np.abs(rotated - sample.im_part.matrix()).max() < 1e-12 * max(1.0, c.g11, c.g22)


def test_operator_sqrt_examples():
    """Test square roots of h itself and of a diagonal metric."""
    h, _ = random_pair(np.random.default_rng(7))
    assert _close(operator_sqrt(h, h), E)
    b = operator_sqrt(TangentMetric.identity(), TangentMetric(4.0, 0.0, 0.25))
    assert b.to_tuple() == pytest.approx((2.0, 0.0, 0.0, 0.5))


def test_operator_sqrt_round_trip_on_random_pairs():
    """Test push_metric(h, operator_sqrt(h, g)) = g on 1000 random pairs."""
    rng = np.random.default_rng(8)
    for _ in range(1000):
        h, _ = random_pair(rng)
        g, _ = random_pair(rng)
        b = operator_sqrt(h, g)
        assert b.is_self_adjoint(h)
        assert b.is_positive(h)
        assert _close(push_metric(h, b), g)


def test_operator_sqrt_normalization():
    """Test det-normalization and its recorded scale."""
    h = TangentMetric.identity()
    g = TangentMetric(16.0, 0.0, 1.0)
    b = operator_sqrt(h, g, normalize=True)
    assert b.det == pytest.approx(1.0)
    _, scale = det_normalize(operator_sqrt(h, g))
    assert scale == pytest.approx(2.0)


def test_complex_landslide_operator_on_the_unit_circle():
    """Test B#_1 = E and that B#_{e^{it}} realizes beta_{-t}."""
    h, b = random_pair(np.random.default_rng(9))
    J = complex_structure(h)
    assert _close(complex_landslide_operator(1.0, b, J).realization(J), E)
    for t in (0.3, 1.7, -2.5):
        realization = complex_landslide_operator(complex(math.cos(t), math.sin(t)), b, J).realization(J)
        assert _close(realization, beta(-t, b, J))
        h_minus_t, _ = landslide_point(h, b, -t)
        mu = beltrami(h_minus_t, complex_structure(h_minus_t), push_metric(h, realization))
        assert abs(mu) < 1e-12


def test_complex_landslide_operator_rejects_zero():
    """Test that zeta = 0 is refused and the normalized operator takes over."""
    h, b = random_pair(np.random.default_rng(10))
    J = complex_structure(h)
    with pytest.raises(OutOfRange):
        complex_landslide_operator(0.0, b, J)
    near_zero = normalized_complex_operator(1e-12, b, J)
    assert _close(near_zero, E + b, tol=1e-11)


def test_branch_choice_does_not_change_the_conformal_class():
    """Test both sides of the square-root cut give the same Beltrami coefficient."""
    h, b = random_pair(np.random.default_rng(11))
    J = complex_structure(h)
    c = center(h, b)
    J_c = complex_structure(c)
    above = complex_landslide_operator(complex(-0.5, 1e-13), b, J).realization(J)
    below = complex_landslide_operator(complex(-0.5, -1e-13), b, J).realization(J)
    mu_above = beltrami(c, J_c, push_metric(h, above))
    mu_below = beltrami(c, J_c, push_metric(h, below))
    assert abs(mu_above - mu_below) < 1e-9


def test_beltrami_examples():
    """Test mu vanishes on conformal metrics and at zeta = 0 against the center."""
    h, b = random_pair(np.random.default_rng(12))
    c = center(h, b)
    J_c = complex_structure(c)
    for factor in (0.1, 1.0, 7.5):
        assert abs(beltrami(c, J_c, c.scaled(factor))) < 1e-14
    assert abs(beltrami(c, J_c, conformal_grafted_metric(h, b, 0.0))) < 1e-12
    kappa = largest_eigenvalue(b)
    assert abs(beltrami(c, J_c, conformal_grafted_metric(h, b, 1e-3))) < 1e-3 * kappa


def test_beltrami_is_holomorphic_in_zeta():
    """Test the discrete Cauchy-Riemann residual of zeta -> mu on a grid."""
    h, b = random_pair(np.random.default_rng(13), kappa_max=2.5)
    c = center(h, b)
    J_c = complex_structure(c)

    def mu(zeta):
        return beltrami(c, J_c, conformal_grafted_metric(h, b, zeta))

    for x in np.linspace(-0.6, 0.6, 7):
        for y in np.linspace(-0.6, 0.6, 7):
            assert cauchy_riemann_residual(mu, complex(x, y), 1e-4) < 1e-6


def test_singular_radius_examples():
    """Test the invertibility radius formula and its edge cases."""
    assert singular_radius(3.0) == pytest.approx(2.0)
    assert singular_radius(1.0) == math.inf
    with pytest.raises(OutOfRange):
        singular_radius(0.5)


def test_realization_is_singular_on_the_radius():
    """Test B#_zeta is singular at zeta = -3 for kappa0 = 2 and invertible inside."""
    h, b = _diag_pair(2.0)
    J = complex_structure(h)
    with pytest.raises(SingularOperator):
        complex_landslide_operator(-3.0, b, J)
    rng = np.random.default_rng(14)
    radius = singular_radius(2.0)
    for _ in range(1000):
        zeta = 0.99 * radius * math.sqrt(rng.uniform()) * np.exp(1j * rng.uniform(0, 2 * math.pi))
        if abs(zeta) < 1e-9:
            continue
        assert complex_landslide_operator(zeta, b, J).realization(J).det > 0


def test_ads_embedding_data():
    """Test the anti-de Sitter embedding data and its Gauss equation."""
    h, b = random_pair(np.random.default_rng(15))
    data = ads_embedding_data(h, b, math.pi / 2)
    assert data.ambient is AmbientSpace.ANTI_DE_SITTER
    assert _close(data.first_form, h.scaled(0.5))
    assert _close(data.shape_op, b)
    h_exact, b_exact = _exact_pair()
    for theta in np.linspace(0.05, math.pi - 0.05, 50):
        assert gauss_residual(ads_embedding_data(h_exact, b_exact, theta), h_exact) < 1e-14
    small = ads_embedding_data(h, b, 1e-9)
    assert _close(small.first_form, h) and small.shape_op.norm() < 1e-8
    with pytest.raises(OutOfRange):
        ads_embedding_data(h, b, math.pi)


def test_hyp_grafting_data():
    """Test the grafting embedding data and its Gauss equation."""
    h, b = random_pair(np.random.default_rng(16))
    s = 2 * math.atanh(0.5)
    data = hyp_grafting_data(h, b, s)
    assert data.ambient is AmbientSpace.HYPERBOLIC
    assert data.shape_op.det == pytest.approx(0.25)
    h_exact, b_exact = _exact_pair()
    for s in np.linspace(0.05, 5.0, 50):
        assert gauss_residual(hyp_grafting_data(h_exact, b_exact, s), h_exact) < 1e-14
    with pytest.raises(OutOfRange):
        hyp_grafting_data(h, b, 0.0)


def test_grafted_metric_examples():
    """Test grafted metrics against direct computations and the gamma_s closed form."""
    h, b = random_pair(np.random.default_rng(17))
    flat = EmbeddingData(h, OperatorSample(0.0, 0.0, 0.0, 0.0), AmbientSpace.HYPERBOLIC)
    assert _close(grafted_metric(flat), h)

    data = EmbeddingData(TangentMetric.identity(), E, AmbientSpace.HYPERBOLIC)
    assert grafted_metric(data).to_tuple() == pytest.approx((4.0, 0.0, 4.0))

    for s in (0.2, 1.0, 3.0):
        outward = hyp_grafting_data(h, b, s).flip_normal()
        assert _close(grafted_metric(outward), push_metric(h, grafting_operator(b, s)))
    assert _close(grafted_metric(hyp_grafting_data(h, b, 1e-9)), h, tol=1e-8)


def test_third_form_of_ads_data():
    """Test III = I(B., B.) scales like sin^2(theta/2) h(b., b.)."""
    h, b = random_pair(np.random.default_rng(18))
    theta = 1.1
    expected = push_metric(h, b).scaled(math.sin(theta / 2) ** 2)
    assert _close(third_form(ads_embedding_data(h, b, theta)), expected)


def test_variation_residuals():
    """Test finite-difference residuals and their second-order decay."""
    h, b = random_pair(np.random.default_rng(19))
    first, shape = variation_residuals(h, b, 1.0, 1e-4)
    assert first < 1e-7
    assert shape < 1e-6

    _, shape_identity = variation_residuals(TangentMetric.identity(), E, 1.0, 1e-4)
    assert shape_identity < 1e-10

    h, b = _exact_pair()
    coarse = variation_residuals(h, b, 1.0, 1e-3)
    fine = variation_residuals(h, b, 1.0, 5e-4)
    assert coarse[0] / fine[0] >= 3.5
    assert coarse[1] / fine[1] >= 3.5


def test_shape_variation_and_algebraic_identities():
    """Test the shape-operator variation and the identities used to derive it."""
    rng = np.random.default_rng(20)
    for _ in range(50):
        h, b = random_pair(rng)
        J = complex_structure(h)
        assert shape_variation_residual(h, b, 0.8) < 1e-6
        assert trace_identity_residual(b) < 1e-13 * max(1.0, b.norm())
        assert jb_decomposition_residual(b, J) < 1e-12 * max(1.0, (J @ b).norm())
        assert _close((J @ b) @ (J @ b), E.scaled(-1.0))
        assert abs((J @ b).trace) < 1e-12 * max(1.0, (J @ b).norm())


class TestEigenBound(unittest.TestCase):
    def test_eigen_bound(self):
        """Test the 1/(2 epsilon) bound."""
        self.assertAlmostEqual(eigen_bound(0.1), 5.0)

    def test_eigen_bound_rejects_non_positive(self):
        """Test that epsilon must be positive."""
        with self.assertRaises(OutOfRange):
            eigen_bound(0.0)
