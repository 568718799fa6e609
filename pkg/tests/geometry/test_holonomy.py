"""
Tests for surface group representations, length spectra and pinching.
"""
import math
import unittest

import numpy as np
import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

from app.core.errors import InvalidOperator, OutOfRange
from app.geometry.holonomy import (
    CurveClass,
    FNCoords,
    Mobius,
    MobiusKind,
    PANTS_CURVES,
    SurfaceGroupRep,
    canonical_word,
    conjugate_rep,
    cyclic_reduce,
    fn_to_rep,
    length_spectrum,
    normalization_factors,
    octagon_rep,
    octagon_vertex,
    pinch_sequence,
    projective_limit_diagnostic,
    psl_distance,
    translation_flow,
    translation_length,
    twist,
    twist_rep,
)

fn_lengths = st.floats(min_value=0.3, max_value=3.0)
fn_twists = st.floats(min_value=-2.0, max_value=2.0)
fn_coords = st.builds(
    lambda l, t: FNCoords(tuple(l), tuple(t)),
    st.lists(fn_lengths, min_size=3, max_size=3),
    st.lists(fn_twists, min_size=3, max_size=3),
)

BASE = FNCoords((1.0, 1.0, 1.0))


def _diag(L):
    return Mobius(math.exp(L / 2), 0.0, 0.0, math.exp(-L / 2))


def _same_rep(first, second, tol=1e-9):
    return all(
        psl_distance(first.generator(x).matrix(), second.generator(x).matrix()) < tol
        for x in "abcd"
    )


@pytest.mark.parametrize("L", [0.1, 1.0, 2.5, 7.0])
def test_translation_length_of_diagonal_elements(L):
    """Test the axis-diagonal form has translation length L."""
    assert translation_length(_diag(L)) == pytest.approx(L, abs=1e-12)
    assert _diag(L).classify() is MobiusKind.HYPERBOLIC


def test_translation_length_of_elliptic_and_parabolic():
    """Test rotations and parabolics have zero translation length."""
    phi = 0.7
    rotation = Mobius(math.cos(phi), -math.sin(phi), math.sin(phi), math.cos(phi))
    assert rotation.classify() is MobiusKind.ELLIPTIC
    assert translation_length(rotation) == 0.0
    parabolic = Mobius(1.0, 1.0, 0.0, 1.0)
    assert parabolic.classify() is MobiusKind.PARABOLIC
    assert translation_length(parabolic) == 0.0


def test_translation_length_is_conjugation_invariant():
    """Test length(g M g^-1) = length(M)."""
    M = _diag(1.3)
    g = Mobius.normalized(np.array([[2.0, 1.0], [0.5, 1.5]]))
    assert translation_length(M.conjugated_by(g)) == pytest.approx(1.3, abs=1e-12)


def test_mobius_rejects_non_unimodular_matrices():
    """Test the det = 1 invariant."""
    with pytest.raises(InvalidOperator):
        Mobius(2.0, 0.0, 0.0, 1.0)


def test_fixed_points_of_a_diagonal_element():
    """Test repelling and attracting fixed points of z -> e^L z."""
    repelling, attracting = _diag(1.0).fixed_points()
    assert repelling == 0
    assert math.isinf(attracting.real)


def test_translation_flow():
    """Test the one-parameter subgroup along the axis of M."""
    M = _diag(2.0)
    flow = translation_flow(M, 0.6)
    assert flow.to_tuple() == pytest.approx((math.exp(0.3), 0.0, 0.0, math.exp(-0.3)))

    g = Mobius.normalized(np.array([[1.0, 2.0], [-0.5, 3.0]]))
    conjugated = M.conjugated_by(g)
    assert psl_distance(translation_flow(conjugated, 2.0).matrix(), conjugated.matrix()) < 1e-12
    flow = translation_flow(conjugated, -0.4)
    assert psl_distance((flow @ conjugated).matrix(), (conjugated @ flow).matrix()) < 1e-12
    assert translation_length(flow) == pytest.approx(0.4, abs=1e-12)

    negative = Mobius(-math.exp(1.0), 0.0, 0.0, -math.exp(-1.0))
    assert translation_flow(negative, 0.6).to_tuple() == pytest.approx((math.exp(0.3), 0.0, 0.0, math.exp(-0.3)))

    with pytest.raises(OutOfRange):
        translation_flow(Mobius.identity(), 1.0)


def test_word_reduction():
    """Test free and cyclic reduction and the canonical form."""
    assert cyclic_reduce("abBA") == ""
    assert cyclic_reduce("Bab") == "a"
    assert canonical_word("A") == "a"
    assert canonical_word("ba") == "ab"
    assert canonical_word("BA") == "ab"
    assert canonical_word("cdCDabAB") == canonical_word("abABcdCD")
    assert CurveClass.of("Bab").word == "a"
    with pytest.raises(OutOfRange):
        CurveClass("A")
    with pytest.raises(OutOfRange):
        CurveClass.of("aA")
    with pytest.raises(OutOfRange):
        canonical_word("x")


def test_symmetric_representation():
    """Test pants-curve lengths of the (1, 1, 1) zero-twist representation."""
    rep = fn_to_rep(BASE)
    assert rep.relator_residual < 1e-9
    for word in PANTS_CURVES:
        assert rep.word_length(word) == pytest.approx(1.0, abs=1e-9)
    for letter in "abcd":
        assert rep.generator(letter).classify() is MobiusKind.HYPERBOLIC


@given(fn_coords)
@settings(max_examples=100, deadline=None)
def test_fn_construction_on_random_coordinates(coords):
    """Test relator residual and pants-curve lengths on random coordinates."""
    rep = fn_to_rep(coords)
    assert rep.relator_residual < 1e-9
    for word, length in zip(PANTS_CURVES, coords.lengths):
        assert rep.word_length(word) == pytest.approx(length, abs=1e-9)


def test_fn_coords_validation():
    """Test lengths must be positive and come in threes."""
    with pytest.raises(OutOfRange):
        FNCoords((1.0, 0.0, 1.0))
    with pytest.raises(OutOfRange):
        FNCoords((1.0, 1.0))
    coords = FNCoords((1.0, 2.0, 3.0), (0.5, 0.0, -1.0))
    assert FNCoords.from_dict(coords.to_dict()) == coords


@given(fn_coords, st.integers(min_value=1, max_value=3), st.floats(min_value=-3.0, max_value=3.0))
@settings(max_examples=50, deadline=None)
def test_twist_preserves_the_twisted_curve(coords, index, t):
    """Test the twisted pants curve keeps its length through the representation."""
    before = fn_to_rep(coords)
    after = fn_to_rep(twist(coords, index, t))
    word = PANTS_CURVES[index - 1]
    assert after.word_length(word) == pytest.approx(before.word_length(word), abs=1e-9)
    assert after.relator_residual < 1e-9


def test_twist_flow_property():
    """Test twist(twist(c, i, s), i, t) = twist(c, i, s + t) and t = 0 is the identity."""
    coords = FNCoords((1.0, 1.5, 0.75), (0.25, -0.5, 0.0))
    for index in (1, 2, 3):
        assert twist(coords, index, 0.0) == coords
        assert twist(twist(coords, index, 0.25), index, 0.5) == twist(coords, index, 0.75)
    with pytest.raises(OutOfRange):
        twist(coords, 4, 1.0)


def test_full_twist_keeps_pants_lengths():
    """Test a full Dehn twist changes the marking but not the pants-curve lengths."""
    twisted = fn_to_rep(twist(BASE, 1, BASE.lengths[0]))
    base = fn_to_rep(BASE)
    for word in PANTS_CURVES:
        assert twisted.word_length(word) == pytest.approx(base.word_length(word), abs=1e-9)
    assert twisted.word_length("b") != pytest.approx(base.word_length("b"), abs=1e-6)


@pytest.mark.parametrize("index,word", [(1, "a"), (2, "c"), (3, "abAB")])
def test_twist_rep_matches_coordinate_twist(index, word):
    """Test twisting the representation agrees with twisting the coordinates."""
    coords = FNCoords((1.0, 1.2, 0.8), (0.1, -0.2, 0.3))
    direct = fn_to_rep(twist(coords, index, 0.7))
    via_rep = twist_rep(fn_to_rep(coords), word, 0.7)
    assert _same_rep(direct, via_rep)
    assert via_rep.relator_residual < 1e-9


def test_twist_rep_rejects_transverse_curves():
    """Test twist_rep only accepts pants curves."""
    with pytest.raises(OutOfRange):
        twist_rep(fn_to_rep(BASE), "b", 0.1)


def test_octagon_representation():
    """Test the octagon side pairings satisfy the surface relation and pair vertices."""
    rep = octagon_rep()
    assert rep.relator_residual < 1e-9
    for letter in "abcd":
        assert abs(rep.generator(letter).trace) == pytest.approx(2 + math.sqrt(2), abs=1e-12)
    a, b = rep.generator("a"), rep.generator("b")
    assert abs(a.apply(octagon_vertex(2)) - octagon_vertex(1)) < 1e-9
    assert abs(a.apply(octagon_vertex(3)) - octagon_vertex(0)) < 1e-9
    assert abs(b.apply(octagon_vertex(1)) - octagon_vertex(4)) < 1e-9
    assert abs(b.apply(octagon_vertex(2)) - octagon_vertex(3)) < 1e-9


class TestLengthSpectrum(unittest.TestCase):
    def setUp(self):
        self.coords = FNCoords((1.0, 1.5, 0.8))
        self.rep = fn_to_rep(self.coords)
        self.spectrum = length_spectrum(self.rep, 4)

    def test_sorted_and_positive(self):
        """Test entries are sorted ascending with positive lengths."""
        lengths = [entry.length for entry in self.spectrum]
        self.assertEqual(lengths, sorted(lengths))
        self.assertTrue(all(length > 0 for length in lengths))

    def test_one_entry_per_class(self):
        """Test every class appears once under its canonical word."""
        words = [entry.curve.word for entry in self.spectrum]
        self.assertEqual(len(words), len(set(words)))
        self.assertTrue(all(canonical_word(w) == w for w in words))
        self.assertNotIn("A", words)

    def test_pants_curves_present(self):
        """Test the pants curves carry their prescribed lengths."""
        lengths = {entry.curve.word: entry.length for entry in self.spectrum}
        self.assertAlmostEqual(lengths["a"], 1.0, places=9)
        self.assertAlmostEqual(lengths["c"], 1.5, places=9)
        self.assertAlmostEqual(lengths[canonical_word("abAB")], 0.8, places=9)

    def test_conjugation_invariance(self):
        """Test the spectrum is unchanged by a global conjugation."""
        g = Mobius.normalized(np.array([[1.0, 0.3], [0.2, 1.1]]))
        conjugated = {e.curve.word: e.length for e in length_spectrum(conjugate_rep(self.rep, g), 4)}
        original = {e.curve.word: e.length for e in self.spectrum}
        self.assertEqual(set(conjugated), set(original))
        for word, length in original.items():
            self.assertAlmostEqual(conjugated[word], length, places=9)

    def test_guard(self):
        """Test the word-length guard."""
        with self.assertRaises(OutOfRange):
            length_spectrum(self.rep, 13)
        with self.assertRaises(OutOfRange):
            length_spectrum(self.rep, 0)


def test_representation_round_trip():
    """Test representations survive to_dict/from_dict."""
    rep = fn_to_rep(FNCoords((0.9, 1.1, 1.3), (0.2, 0.1, -0.3)))
    restored = SurfaceGroupRep.from_dict(rep.to_dict())
    assert _same_rep(rep, restored, tol=1e-15)
    assert restored.relator_residual == rep.relator_residual


def test_lorentz_matrix_preserves_the_form():
    """Test generator images act on the hyperboloid by Lorentz isometries."""
    rep = octagon_rep()
    form = np.diag([1.0, -1.0, -1.0])
    for letter in "abcd":
        L = rep.lorentz(letter)
        assert np.abs(L.T @ form @ L - form).max() < 1e-10


class TestPinching(unittest.TestCase):
    def setUp(self):
        self.lengths = [1.0, 0.5, 0.25, 0.125]
        self.reps = pinch_sequence(BASE, 1, self.lengths)

    def test_pinched_lengths(self):
        """Test the pinched curve takes the prescribed lengths and the others stay fixed."""
        for rep, length in zip(self.reps, self.lengths):
            self.assertAlmostEqual(rep.word_length("a"), length, places=9)
            self.assertAlmostEqual(rep.word_length("c"), 1.0, places=9)

    def test_transverse_curves_grow(self):
        """Test curves crossing the pinched curve get strictly longer."""
        for word in ("b", "ab"):
            lengths = [rep.word_length(word) for rep in self.reps]
            self.assertTrue(all(x < y for x, y in zip(lengths, lengths[1:])), msg=word)

    def test_normalized_pinched_curve_vanishes(self):
        """Test theta_n times the pinched length decreases towards 0."""
        theta = normalization_factors(self.reps, "b")
        scaled = [t * rep.word_length("a") for t, rep in zip(theta, self.reps)]
        self.assertTrue(all(x > y for x, y in zip(scaled, scaled[1:])))
        self.assertLess(scaled[-1], 0.05)

    def test_projective_diagnostic_trend(self):
        """Test the window variations of a crossing curve decrease along the sequence."""
        theta = normalization_factors(self.reps, "b")
        table = projective_limit_diagnostic(self.reps, theta, ["b", "ab"])
        self.assertEqual(table.variations["b"], pytest.approx(0.0, abs=1e-12))
        windows = table.window_variations["ab"]
        self.assertTrue(all(x > y for x, y in zip(windows, windows[1:])))
        self.assertLess(table.variations["ab"], 0.02)
        self.assertEqual(len(table.rows()), len(self.reps))

    def test_invalid_sequences(self):
        """Test lengths must decrease and stay above the guard."""
        with self.assertRaises(OutOfRange):
            pinch_sequence(BASE, 1, [0.5, 1.0])
        with self.assertRaises(OutOfRange):
            pinch_sequence(BASE, 1, [1.0, 1e-7])
        with self.assertRaises(OutOfRange):
            pinch_sequence(BASE, 0, [1.0])


def test_projective_diagnostic_examples():
    """Test constant sequences and rescaling of the normalization."""
    rep = fn_to_rep(BASE)
    table = projective_limit_diagnostic([rep] * 4, [1.0] * 4, ["b", "d"])
    assert table.converged
    assert table.variations == {"b": 0.0, "d": 0.0}

    reps = pinch_sequence(BASE, 1, [1.0, 0.5, 0.25])
    theta = normalization_factors(reps)
    table = projective_limit_diagnostic(reps, theta, ["ab", "d"])
    scaled = projective_limit_diagnostic(reps, [3.0 * t for t in theta], ["ab", "d"])
    for word in ("ab", "d"):
        assert scaled.values[word] == pytest.approx([3.0 * v for v in table.values[word]])
        assert scaled.variations[word] == pytest.approx(table.variations[word])

    with pytest.raises(OutOfRange):
        projective_limit_diagnostic(reps, theta[:2], ["ab"])
