"""
Pinching schedules, extremal-length bounds and predicted limit laminations.
"""
import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

from app.core.errors import OutOfRange

logger = logging.getLogger("landslide")

MASKIT_VALIDITY = 0.1
LAMINATION_TOL = 1e-9


@dataclass(frozen=True)
class CurveSchedule:
    """One pinched curve: hyperbolic length, weight a > 0 and exponent b in (0, 1]."""
    length: float
    a: float
    b: float


@dataclass
class PinchSchedule:
    curves: List[CurveSchedule]
    t_grid: List[float]
    c1: float = 10.0

    def __post_init__(self):
        if not self.curves:
            raise OutOfRange("A schedule needs at least one curve")
        for i, curve in enumerate(self.curves):
            if curve.length <= 0 or curve.a <= 0:
                raise OutOfRange(f"curve {i}: length and weight must be positive")
            if not 0 < curve.b <= 1:
                raise OutOfRange(f"curve {i}: exponent must lie in (0, 1], got {curve.b}")
        exponents = [curve.b for curve in self.curves]
        if any(later > earlier for earlier, later in zip(exponents, exponents[1:])):
            raise OutOfRange(f"Exponents must be non-increasing, got {exponents}")
        if exponents[0] != 1.0:
            raise OutOfRange(f"The leading exponent must be 1, got {exponents[0]}")
        if not self.t_grid or any(t <= 0 for t in self.t_grid):
            raise OutOfRange("t grid must be non-empty and positive")
        if any(later <= earlier for earlier, later in zip(self.t_grid, self.t_grid[1:])):
            raise OutOfRange("t grid must be increasing")
        if self.c1 < 0:
            raise OutOfRange(f"C1 must be non-negative, got {self.c1}")
        for i in range(len(self.curves)):
            for n in range(len(self.t_grid)):
                if self.s(i, n) <= 1:
                    raise OutOfRange(f"s[{i},{n}] = {self.s(i, n):.6g} must exceed 1")

    @classmethod
    def from_lists(
        cls, lengths: Sequence[float], a: Sequence[float], b: Sequence[float], t_grid: Sequence[float], c1: float = 10.0
    ) -> "PinchSchedule":
        if not len(lengths) == len(a) == len(b):
            raise OutOfRange("lengths, a and b must have the same size")
        curves = [CurveSchedule(float(x), float(y), float(z)) for x, y, z in zip(lengths, a, b)]
        return cls(curves, [float(t) for t in t_grid], float(c1))

    def s(self, i: int, n: int) -> float:
        """s_{i,n} = (a_i / l_i) t_n^{b_i}."""
        curve = self.curves[i]
        return curve.a / curve.length * self.t_grid[n] ** curve.b


@dataclass(frozen=True)
class LaminationClass:
    """Projective class of a weighted multicurve, normalized so the largest weight is 1."""
    weights: Tuple[float, ...]

    def __post_init__(self):
        weights = tuple(float(w) for w in self.weights)
        if any(w < 0 for w in weights):
            raise OutOfRange(f"Weights must be non-negative, got {weights}")
        top = max(weights, default=0.0)
        if top <= 0:
            raise OutOfRange("A lamination class needs a positive weight")
        object.__setattr__(self, "weights", tuple(w / top for w in weights))

    def matches(self, other: "LaminationClass", tol: float = LAMINATION_TOL) -> bool:
        if len(self.weights) != len(other.weights):
            return False
        return all(abs(x - y) <= tol for x, y in zip(self.weights, other.weights))


def flat_cylinder_extremal_length(circumference: float, height: float) -> float:
    """Extremal length of the core curve of a flat cylinder."""
    if circumference <= 0 or height <= 0:
        raise OutOfRange("Cylinder dimensions must be positive")
    return circumference / height


def ext_bounds(schedule: PinchSchedule, i: int, n: int) -> Tuple[float, float]:
    """Lower and upper bounds for the extremal length of curve i at grid point n."""
    curve = schedule.curves[i]
    growth = 2.0 * schedule.s(i, n)
    lower = 1.0 / (schedule.c1 + growth)
    upper = curve.length / (2.0 * curve.a * schedule.t_grid[n] ** curve.b)
    return lower, upper


def maskit_length(ext: float) -> float:
    """Asymptotic hyperbolic length pi * ext of a curve with small extremal length."""
    if ext < 0:
        raise OutOfRange(f"Extremal length must be non-negative, got {ext}")
    if ext > MASKIT_VALIDITY:
        logger.warning(f"Maskit estimate used outside its range: ext = {ext:.4g} > {MASKIT_VALIDITY}")
    return math.pi * ext


def transversal_length(schedule: PinchSchedule, i: int, n: int) -> float:
    """-2 log of the Maskit length at the upper extremal-length bound."""
    t = schedule.t_grid[n]
    if t <= 1:
        raise OutOfRange(f"Transversal length needs t > 1, got {t}")
    _, upper = ext_bounds(schedule, i, n)
    return -2.0 * math.log(maskit_length(upper))


def transversal_asymptote(schedule: PinchSchedule, i: int, n: int) -> float:
    """2 b_i log t_n."""
    t = schedule.t_grid[n]
    if t <= 1:
        raise OutOfRange(f"Transversal length needs t > 1, got {t}")
    return 2.0 * schedule.curves[i].b * math.log(t)


def predicted_center_limit(schedule: PinchSchedule) -> LaminationClass:
    """Centers converge to the multicurve weighted by the exponents."""
    return LaminationClass(tuple(curve.b for curve in schedule.curves))


def predicted_antipode_limit(schedule: PinchSchedule) -> LaminationClass:
    """Antipodes see only the curves with the leading exponent, weighted by a."""
    top = max(curve.b for curve in schedule.curves)
    return LaminationClass(tuple(curve.a if curve.b == top else 0.0 for curve in schedule.curves))


def weight_ratio(schedule: PinchSchedule, i: int, j: int, n: int) -> float:
    """l_i s_{i,n} / (l_j s_{j,n}) = (a_i / a_j) t_n^(b_i - b_j)."""
    first, second = schedule.curves[i], schedule.curves[j]
    return first.a / second.a * schedule.t_grid[n] ** (first.b - second.b)


def collar_area_density(trace_b: float) -> float:
    """Area of the grafting annulus per unit length of the pinched curve, sqrt(tr(b)^2 - 4)."""
    if trace_b < 2:
        raise OutOfRange(f"tr b of a positive unimodular operator is at least 2, got {trace_b}")
    return math.sqrt(trace_b * trace_b - 4.0)


def grafted_area_factor(s: float, trace_b: float) -> float:
    """det(cosh(s/2) E + sinh(s/2) b) for det b = 1."""
    c, sh = math.cosh(s / 2), math.sinh(s / 2)
    return c * c + sh * sh + sh * c * trace_b


def schedule_table(schedule: PinchSchedule) -> List[Dict[str, float]]:
    """One row per grid point: bounds, flat-cylinder comparison, transversal ratios, weight ratios."""
    rows = []
    for n, t in enumerate(schedule.t_grid):
        row: Dict[str, float] = {"n": n, "t_n": t}
        for i, curve in enumerate(schedule.curves):
            lower, upper = ext_bounds(schedule, i, n)
            row[f"ext_lower_{i}"] = lower
            row[f"ext_upper_{i}"] = upper
            row[f"ext_flat_{i}"] = flat_cylinder_extremal_length(1.0, 2.0 * schedule.s(i, n))
            if t > 1:
                row[f"trl_ratio_{i}"] = transversal_length(schedule, i, n) / transversal_asymptote(schedule, i, n)
            if i > 0:
                row[f"weight_ratio_0_{i}"] = weight_ratio(schedule, 0, i, n)
        rows.append(row)
    return rows
