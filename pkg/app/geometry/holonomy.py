"""
SL(2,R) representations of the genus-2 surface group.

Generators are the letters a, b, c, d (a1, b1, a2, b2) with inverses A, B, C, D;
a word is read left to right as a matrix product and the surface relation is abABcdCD.
The pants decomposition is fixed: pants curves a, c and abAB, transverse curves b and d.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from app.core.errors import ConstructionFailed, InvalidOperator, OutOfRange
from app.geometry.hyperboloid import lorentz_matrix

logger = logging.getLogger("landslide")

GENERATORS = ("a", "b", "c", "d")
INVERSE = {"a": "A", "b": "B", "c": "C", "d": "D", "A": "a", "B": "b", "C": "c", "D": "d"}
LETTER_ORDER = {letter: rank for rank, letter in enumerate("aAbBcCdD")}
RELATOR = "abABcdCD"
PANTS_CURVES = ("a", "c", "abAB")
TRANSVERSE_CURVES = ("b", "d")
MARKING = "genus2-abAB-cdCD"

DET_TOL = 1e-12
RELATOR_TOL = 1e-9
LENGTH_CLAMP = 1e-8
MIN_PINCH_LENGTH = 1e-6
MAX_SPECTRUM_WORD_LENGTH = 12


class MobiusKind(Enum):
    ELLIPTIC = "elliptic"
    PARABOLIC = "parabolic"
    HYPERBOLIC = "hyperbolic"


@dataclass(frozen=True)
class Mobius:
    """An element of SL(2,R) acting on the upper half-plane."""
    m11: float
    m12: float
    m21: float
    m22: float

    def __post_init__(self):
        scale = max(1.0, max(abs(v) for v in self.to_tuple()) ** 2)
        if abs(self.det - 1.0) > DET_TOL * scale:
            raise InvalidOperator(f"Mobius map must have det 1, got {self.det:.15g}")

    @staticmethod
    def identity() -> "Mobius":
        return Mobius(1.0, 0.0, 0.0, 1.0)

    @staticmethod
    def from_matrix(m: np.ndarray) -> "Mobius":
        m = np.asarray(m, dtype=float)
        return Mobius(float(m[0, 0]), float(m[0, 1]), float(m[1, 0]), float(m[1, 1]))

    @staticmethod
    def normalized(m: np.ndarray) -> "Mobius":
        """Scale a matrix of positive determinant into SL(2,R)."""
        m = np.asarray(m, dtype=float)
        return Mobius.from_matrix(m / math.sqrt(np.linalg.det(m)))

    def matrix(self) -> np.ndarray:
        return np.array([[self.m11, self.m12], [self.m21, self.m22]])

    def to_tuple(self) -> Tuple[float, float, float, float]:
        return (self.m11, self.m12, self.m21, self.m22)

    @property
    def det(self) -> float:
        return self.m11 * self.m22 - self.m12 * self.m21

    @property
    def trace(self) -> float:
        return self.m11 + self.m22

    def __matmul__(self, other: "Mobius") -> "Mobius":
        return Mobius.from_matrix(self.matrix() @ other.matrix())

    def inverse(self) -> "Mobius":
        return Mobius(self.m22, -self.m12, -self.m21, self.m11)

    def conjugated_by(self, g: "Mobius") -> "Mobius":
        """g M g^-1."""
        return g @ self @ g.inverse()

    def classify(self, tol: float = 1e-12) -> MobiusKind:
        t = abs(self.trace)
        if t > 2.0 + tol:
            return MobiusKind.HYPERBOLIC
        if t < 2.0 - tol:
            return MobiusKind.ELLIPTIC
        return MobiusKind.PARABOLIC

    def apply(self, z: complex) -> complex:
        return (self.m11 * z + self.m12) / (self.m21 * z + self.m22)

    def fixed_points(self) -> Tuple[complex, complex]:
        """Boundary fixed points (repelling, attracting) from the eigenvectors (z, 1)."""
        eigenvalues, vectors = np.linalg.eig(self.matrix())
        order = np.argsort(np.abs(eigenvalues))
        points = []
        for index in order:
            top, bottom = vectors[0, index], vectors[1, index]
            points.append(complex(math.inf) if abs(bottom) < 1e-300 else complex(top / bottom))
        return points[0], points[1]

    @property
    def translation_length(self) -> float:
        return translation_length(self)


def translation_length(M: Mobius) -> float:
    """2 arccosh(|tr M|/2) for hyperbolic M, 0 otherwise; values below 1e-8 clamp to 0."""
    t = abs(M.trace)
    if t <= 2.0:
        return 0.0
    length = 2.0 * math.acosh(0.5 * t)
    return length if length >= LENGTH_CLAMP else 0.0


def translation_flow(M: Mobius, t: float) -> Mobius:
    """The element translating by t along the axis of M, in the direction M translates."""
    if M.classify() is not MobiusKind.HYPERBOLIC:
        raise OutOfRange(f"translation_flow needs a hyperbolic element, trace is {M.trace:.6g}")
    m = M.matrix() * math.copysign(1.0, M.trace)
    half_trace = 0.5 * abs(M.trace)
    N = (m - half_trace * np.eye(2)) / math.sqrt(half_trace * half_trace - 1.0)
    return Mobius.from_matrix(math.cosh(t / 2) * np.eye(2) + math.sinh(t / 2) * N)


def free_reduce(word: str) -> str:
    stack: List[str] = []
    for letter in word:
        if letter not in INVERSE:
            raise OutOfRange(f"Unknown letter {letter!r} in word {word!r}")
        if stack and stack[-1] == INVERSE[letter]:
            stack.pop()
        else:
            stack.append(letter)
    return "".join(stack)


def inverse_word(word: str) -> str:
    return "".join(INVERSE[letter] for letter in reversed(word))


def cyclic_reduce(word: str) -> str:
    word = free_reduce(word)
    while len(word) > 1 and word[0] == INVERSE[word[-1]]:
        word = word[1:-1]
    return word


def _word_key(word: str) -> Tuple[int, ...]:
    return tuple(LETTER_ORDER[letter] for letter in word)


def canonical_word(word: str) -> str:
    """Least rotation of the cyclic reduction of the word or its inverse."""
    word = cyclic_reduce(word)
    if not word:
        return word
    candidates = []
    for w in (word, inverse_word(word)):
        candidates.extend(w[i:] + w[:i] for i in range(len(w)))
    return min(candidates, key=_word_key)


@dataclass(frozen=True)
class CurveClass:
    """An unoriented free homotopy class, stored as its canonical cyclic word."""
    word: str

    def __post_init__(self):
        if not self.word:
            raise OutOfRange("The trivial class has no curve")
        if canonical_word(self.word) != self.word:
            raise OutOfRange(f"Word {self.word!r} is not canonical; use CurveClass.of")

    @classmethod
    def of(cls, word: str) -> "CurveClass":
        return cls(canonical_word(word))

    def __len__(self) -> int:
        return len(self.word)


@dataclass(frozen=True)
class LengthEntry:
    curve: CurveClass
    length: float

    def to_dict(self) -> dict:
        return {"word": self.curve.word, "length": self.length}


@dataclass(frozen=True)
class FNCoords:
    """Fenchel-Nielsen lengths and twists for the fixed genus-2 pants decomposition.

    Twists are measured as hyperbolic length along the pants curve, so a full
    Dehn twist about curve i adds lengths[i] to twists[i].
    """
    lengths: Tuple[float, float, float]
    twists: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    marking: str = MARKING

    def __post_init__(self):
        object.__setattr__(self, "lengths", tuple(float(x) for x in self.lengths))
        object.__setattr__(self, "twists", tuple(float(x) for x in self.twists))
        if len(self.lengths) != 3 or len(self.twists) != 3:
            raise OutOfRange("Genus 2 has exactly three pants curves")
        if any(not x > 0 for x in self.lengths):
            raise OutOfRange(f"Pants-curve lengths must be positive, got {self.lengths}")

    def to_dict(self) -> dict:
        return {"lengths": list(self.lengths), "twists": list(self.twists), "marking": self.marking}

    @classmethod
    def from_dict(cls, data: dict) -> "FNCoords":
        return cls(tuple(data["lengths"]), tuple(data.get("twists", (0.0, 0.0, 0.0))), data.get("marking", MARKING))


def psl_distance(M: np.ndarray, N: np.ndarray) -> float:
    """Entrywise distance between two matrices up to the sign ambiguity of PSL(2,R)."""
    return float(min(np.abs(M - N).max(), np.abs(M + N).max()))


@dataclass(frozen=True)
class SurfaceGroupRep:
    """Images of a1, b1, a2, b2; the relator residual is measured in PSL(2,R)."""
    a1: Mobius
    b1: Mobius
    a2: Mobius
    b2: Mobius
    relator_residual: float = field(init=False)

    def __post_init__(self):
        product = self.word_matrix(RELATOR)
        object.__setattr__(self, "relator_residual", psl_distance(product, np.eye(2)))

    def generator(self, letter: str) -> Mobius:
        images = {"a": self.a1, "b": self.b1, "c": self.a2, "d": self.b2}
        if letter in images:
            return images[letter]
        return images[INVERSE[letter]].inverse()

    def word_matrix(self, word: str) -> np.ndarray:
        product = np.eye(2)
        for letter in word:
            product = product @ self.generator(letter).matrix()
        return product

    def word_length(self, word: str) -> float:
        return translation_length(Mobius.from_matrix(self.word_matrix(word)))

    def lorentz(self, word: str) -> np.ndarray:
        """The word's image acting on hyperboloid coordinates."""
        return lorentz_matrix(self.word_matrix(word))

    def conjugated_by(self, g: Mobius) -> "SurfaceGroupRep":
        return SurfaceGroupRep(*(m.conjugated_by(g) for m in (self.a1, self.b1, self.a2, self.b2)))

    def to_dict(self) -> dict:
        return {
            "generators": {letter: list(self.generator(letter).to_tuple()) for letter in GENERATORS},
            "relator_residual": self.relator_residual,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SurfaceGroupRep":
        generators = data["generators"]
        return cls(*(Mobius(*generators[letter]) for letter in GENERATORS))


def conjugate_rep(rep: SurfaceGroupRep, g: Mobius) -> SurfaceGroupRep:
    return rep.conjugated_by(g)


def word_matrix(rep: SurfaceGroupRep, word: str) -> np.ndarray:
    return rep.word_matrix(word)


def _checked(rep: SurfaceGroupRep, source: str) -> SurfaceGroupRep:
    if rep.relator_residual > RELATOR_TOL:
        raise ConstructionFailed(f"{source}: relator residual too large", residual=rep.relator_residual)
    return rep


def _one_holed_torus(length: float, boundary: float, twist: float) -> Tuple[Mobius, Mobius]:
    """Generators with tr a = 2cosh(length/2) and tr[a, b] = -2cosh(boundary/2)."""
    a = Mobius(math.exp(length / 2), 0.0, 0.0, math.exp(-length / 2))
    q = math.cosh(boundary / 4) / math.sinh(length / 2)
    p = math.sqrt(1.0 + q * q)
    b = Mobius(p, q, q, p)
    return a, b @ translation_flow(a, twist)


def _attracting_vector(M: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    eigenvalues, vectors = np.linalg.eig(M)
    eigenvalues, vectors = eigenvalues.real, vectors.real
    order = np.argsort(-np.abs(eigenvalues))
    return vectors[:, order[0]], vectors[:, order[1]]


def _boundary_normalization(a: Mobius, b: Mobius) -> Mobius:
    """K with K [a, b] K^-1 diagonal, attracting eigenvalue first.

    The remaining diagonal freedom is fixed by sending the attracting
    direction of a onto the line spanned by (+-1, 1).
    """
    commutator = (a @ b @ a.inverse() @ b.inverse()).matrix()
    u, w = _attracting_vector(commutator)
    v, _ = _attracting_vector(a.matrix())
    s, t = np.linalg.solve(np.column_stack([u, w]), v)
    x = math.copysign(1.0, s * t * np.linalg.det(np.column_stack([u, w])))
    K_inv = np.column_stack([s * x * u, t * w])
    return Mobius.normalized(K_inv).inverse()


SWAP = Mobius(0.0, -1.0, 1.0, 0.0)


def fn_to_rep(coords: FNCoords) -> SurfaceGroupRep:
    """Glue two one-holed tori along the third pants curve."""
    l1, l2, l3 = coords.lengths
    t1, t2, t3 = coords.twists
    a1, b1 = _one_holed_torus(l1, l3, t1)
    a2, b2 = _one_holed_torus(l2, l3, t2)

    K1 = _boundary_normalization(a1, b1)
    K2 = SWAP @ _boundary_normalization(a2, b2)
    a1, b1 = a1.conjugated_by(K1), b1.conjugated_by(K1)
    a2, b2 = a2.conjugated_by(K2), b2.conjugated_by(K2)

    if t3 != 0.0:
        flow = translation_flow(a1 @ b1 @ a1.inverse() @ b1.inverse(), t3)
        a2, b2 = a2.conjugated_by(flow), b2.conjugated_by(flow)

    rep = _checked(SurfaceGroupRep(a1, b1, a2, b2), "fn_to_rep")
    logger.debug(f"Built representation for {coords.to_dict()} (relator residual {rep.relator_residual:.2e})")
    return rep


def twist(coords: FNCoords, curve_index: int, t: float) -> FNCoords:
    """Earthquake of size t along pants curve 1, 2 or 3."""
    if curve_index not in (1, 2, 3):
        raise OutOfRange(f"curve_index must be 1, 2 or 3, got {curve_index}")
    twists = list(coords.twists)
    twists[curve_index - 1] += t
    return replace(coords, twists=tuple(twists))


def twist_rep(rep: SurfaceGroupRep, word: str, t: float) -> SurfaceGroupRep:
    """Earthquake of size t along a pants curve, applied to the representation directly."""
    if word == "a":
        result = SurfaceGroupRep(rep.a1, rep.b1 @ translation_flow(rep.a1, t), rep.a2, rep.b2)
    elif word == "c":
        result = SurfaceGroupRep(rep.a1, rep.b1, rep.a2, rep.b2 @ translation_flow(rep.a2, t))
    elif word == "abAB":
        flow = translation_flow(Mobius.from_matrix(rep.word_matrix("abAB")), t)
        result = SurfaceGroupRep(rep.a1, rep.b1, rep.a2.conjugated_by(flow), rep.b2.conjugated_by(flow))
    else:
        raise OutOfRange(f"Twists are defined along pants curves {PANTS_CURVES}, got {word!r}")
    return _checked(result, "twist_rep")


def octagon_rep() -> SurfaceGroupRep:
    """Side pairings of the regular octagon with all interior angles pi/4.

    Sides are numbered counter-clockwise, side k facing direction k pi/4 + pi/8
    from the center i; side k is paired with side k + 2 inside each half.
    """
    def rot(phi: float) -> np.ndarray:
        return np.array([[math.cos(phi / 2), math.sin(phi / 2)], [-math.sin(phi / 2), math.cos(phi / 2)]])

    inradius = math.acosh(1.0 / math.tan(math.pi / 8))
    lift = np.diag([math.exp(inradius), math.exp(-inradius)])
    partner = {0: 2, 2: 0, 1: 3, 3: 1, 4: 6, 6: 4, 5: 7, 7: 5}

    def side_pairing(k: int) -> Mobius:
        alpha = k * math.pi / 4 + math.pi / 8
        alpha_partner = partner[k] * math.pi / 4 + math.pi / 8
        return Mobius.from_matrix(rot(alpha - math.pi / 2) @ lift @ rot(-math.pi / 2 - alpha_partner))

    rep = SurfaceGroupRep(side_pairing(0), side_pairing(3), side_pairing(4), side_pairing(7))
    return _checked(rep, "octagon_rep")


def octagon_vertex(k: int) -> complex:
    """Vertex k of the octagon of octagon_rep, in the upper half-plane."""
    circumradius = math.acosh(1.0 / math.tan(math.pi / 8) ** 2)
    phi = k * math.pi / 4 - math.pi / 2
    rotation = Mobius(math.cos(phi / 2), math.sin(phi / 2), -math.sin(phi / 2), math.cos(phi / 2))
    return rotation.apply(1j * math.exp(circumradius))


def _spectrum_branch(rep: SurfaceGroupRep, first: str, max_word_length: int) -> List[LengthEntry]:
    matrices = {letter: rep.generator(letter).matrix() for letter in INVERSE}
    found: List[LengthEntry] = []
    stack = [(first, matrices[first])]
    while stack:
        word, product = stack.pop()
        if word[0] != INVERSE[word[-1]] and canonical_word(word) == word:
            t = abs(product[0, 0] + product[1, 1])
            if t > 2.0:
                length = 2.0 * math.acosh(0.5 * t)
                if length >= LENGTH_CLAMP:
                    found.append(LengthEntry(CurveClass(word), length))
        if len(word) < max_word_length:
            for letter in matrices:
                if letter != INVERSE[word[-1]]:
                    stack.append((word + letter, product @ matrices[letter]))
    return found


def length_spectrum(
    rep: SurfaceGroupRep, max_word_length: int, workers: Optional[int] = None
) -> List[LengthEntry]:
    """Lengths of all conjugacy classes with canonical words up to max_word_length.

    Each unoriented class appears once; trivial and non-hyperbolic classes are
    dropped. Sorted by length, ties broken by word.
    """
    if not 1 <= max_word_length <= MAX_SPECTRUM_WORD_LENGTH:
        raise OutOfRange(f"max_word_length must lie in 1..{MAX_SPECTRUM_WORD_LENGTH}, got {max_word_length}")
    with ThreadPoolExecutor(max_workers=workers) as pool:
        branches = list(pool.map(lambda letter: _spectrum_branch(rep, letter, max_word_length), "aAbBcCdD"))
    entries = [entry for branch in branches for entry in branch]
    entries.sort(key=lambda entry: (entry.length, _word_key(entry.curve.word)))
    logger.debug(f"Length spectrum up to word length {max_word_length}: {len(entries)} classes")
    return entries


def pinch_sequence(coords: FNCoords, curve_index: int, lengths: Sequence[float]) -> List[SurfaceGroupRep]:
    """Representations with pants curve curve_index shortened along the given lengths."""
    if curve_index not in (1, 2, 3):
        raise OutOfRange(f"curve_index must be 1, 2 or 3, got {curve_index}")
    if any(x < MIN_PINCH_LENGTH for x in lengths):
        raise OutOfRange(f"Pinch lengths must stay above {MIN_PINCH_LENGTH}")
    if any(later >= earlier for earlier, later in zip(lengths, lengths[1:])):
        raise OutOfRange("Pinch lengths must be strictly decreasing")
    reps = []
    for length in lengths:
        pinched = list(coords.lengths)
        pinched[curve_index - 1] = length
        reps.append(fn_to_rep(replace(coords, lengths=tuple(pinched))))
    return reps


def normalization_factors(reps: Sequence[SurfaceGroupRep], reference_word: str = "b") -> List[float]:
    """theta_n = 1 / length of the reference transverse curve."""
    factors = []
    for rep in reps:
        length = rep.word_length(reference_word)
        if length <= 0:
            raise OutOfRange(f"Reference curve {reference_word!r} is not hyperbolic")
        factors.append(1.0 / length)
    return factors


def relative_variation(values: Sequence[float]) -> float:
    """(max - min)/|mean|; 0 for a constant window."""
    spread = max(values) - min(values)
    if spread == 0:
        return 0.0
    mean = abs(float(np.mean(values)))
    return spread / mean if mean > 0 else math.inf


@dataclass
class ProjectiveLimitTable:
    """theta_n * length_n(curve) per step, with relative variations over sliding 3-point windows."""
    thetas: List[float]
    values: Dict[str, List[float]]
    window_variations: Dict[str, List[float]]
    tolerance: float

    @property
    def variations(self) -> Dict[str, float]:
        """Variation over the last three points, per curve."""
        return {word: windows[-1] if windows else math.inf for word, windows in self.window_variations.items()}

    @property
    def converged(self) -> bool:
        return all(v < self.tolerance for v in self.variations.values())

    def rows(self) -> List[Dict[str, float]]:
        rows = []
        for n, theta in enumerate(self.thetas):
            row = {"n": n, "theta": theta}
            row.update({word: series[n] for word, series in self.values.items()})
            rows.append(row)
        return rows


def projective_limit_diagnostic(
    reps: Sequence[SurfaceGroupRep],
    theta: Sequence[float],
    test_curves: Sequence[str],
    tolerance: float = 0.02,
) -> ProjectiveLimitTable:
    if len(reps) != len(theta):
        raise OutOfRange(f"Got {len(reps)} representations but {len(theta)} normalization factors")
    values = {
        CurveClass.of(word).word: [t * rep.word_length(word) for rep, t in zip(reps, theta)]
        for word in test_curves
    }
    windows = {
        word: [relative_variation(series[n - 2:n + 1]) for n in range(2, len(series))]
        for word, series in values.items()
    }
    return ProjectiveLimitTable(list(theta), values, windows, tolerance)
