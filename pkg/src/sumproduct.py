"""
Frostlab Sum-Product Module
Discretized max{|A+B|, |AC|} through the line family x₂ = c(x₁ − b)

This module provides:
- Point-line duality D: (a,b) ↦ {x₂ = a x₁ + b} and D̃: l_{a,b} ↦ (−a, b),
  both on exact numbers and as AffinePlanes
- line_family: the lines {x₂ = c(x₁ − b) : b ∈ B, c ∈ C} in the working chart
- Exponent calculators for the max, the product and the earlier bound
- growth_threshold / growth_margin: when B = C, how large A must be for
  max{|A+B|, |AB|} to beat |B|
- run_sumproduct: sizes of A+B and AC against |A|^exponent, with the
  incidence sandwich measured on F = (A+B) × (AC)

Subsets of [1,2] are 1D DeltaSets in the chart x ↦ x − 1. Planar objects
live in the working chart X ↦ (X − (2,1))/4, which maps (A+B) × (AC) into
the unit square; a δ-cell there sits at level j + 2.
"""

import logging
import math
from fractions import Fraction
from typing import Dict, NamedTuple, Tuple, Union

import numpy as np

from .errors import PreconditionError
from .generators import certify
from .grassmann import AffinePlane, Subspace
from .grid_core import DeltaSet, lebesgue_size, productset, sumset
from .incidence import AffineFamily, incidence_mass
from .measure_lab import lebesgue_measure
from .projector import BoundReport

logger = logging.getLogger(__name__)

SUMPRODUCT_COLUMNS = ('level', 'sB', 'sC', 'cardA', 'sumsize', 'prodsize', 'maxsize',
                      'exponent', 'bound', 'ratio', 'pass')

CHART_ORIGIN = np.array([2.0, 1.0])
CHART_SCALE = 4.0
CHART_SHIFT = 2   # log2 of CHART_SCALE

# Slack δ^EPSILON_SLACK standing in for the arbitrary ε of the lower bound
EPSILON_SLACK = 0.1

Number = Union[int, float, Fraction]


class SlopeLine(NamedTuple):
    """The non-vertical line x₂ = slope·x₁ + intercept"""
    slope: Number
    intercept: Number


def dual_line(a: Number, b: Number) -> SlopeLine:
    """D(a, b) = l_{a,b}"""
    return SlopeLine(a, b)


def dual_point(line: SlopeLine) -> Tuple[Number, Number]:
    """D̃(l_{a,b}) = (−a, b)"""
    return (-line.slope, line.intercept)


def on_line(point: Tuple[Number, Number], line: SlopeLine) -> bool:
    """Exact incidence test; exact for Fractions and dyadic floats"""
    return point[1] == line.slope * point[0] + line.intercept


def to_chart(points) -> np.ndarray:
    return (np.asarray(points, dtype=np.float64) - CHART_ORIGIN) / CHART_SCALE


def from_chart(points) -> np.ndarray:
    return np.asarray(points, dtype=np.float64) * CHART_SCALE + CHART_ORIGIN


def _line_plane(slope: float, intercept: float) -> AffinePlane:
    norm = math.hypot(1.0, slope)
    direction = np.array([[1.0 / norm], [slope / norm]])
    return AffinePlane.through([0.0, intercept], Subspace(direction))


def duality_point_to_line(a: float, b: float) -> AffinePlane:
    """The line x₂ = a x₁ + b as an affine 1-plane"""
    if not (math.isfinite(a) and math.isfinite(b)):
        raise PreconditionError(f"duality needs finite inputs, got ({a}, {b})")
    return _line_plane(float(a), float(b))


def _slope_intercept(line: AffinePlane) -> Tuple[float, float]:
    if line.dim_ambient != 2 or line.k != 1:
        raise PreconditionError("duality acts on lines of the plane")
    direction = line.plane.basis[:, 0]
    if abs(direction[0]) < 1e-12:
        raise PreconditionError("vertical lines have no dual point")
    slope = direction[1] / direction[0]
    step = -line.offset[0] / direction[0]
    return slope, line.offset[1] + step * direction[1]


def duality_line_to_point(line: AffinePlane) -> Tuple[float, float]:
    """D̃ on an affine line: l_{a,b} ↦ (−a, b)"""
    slope, intercept = _slope_intercept(line)
    return (-slope, intercept)


def _interval_centers(delta_set: DeltaSet) -> np.ndarray:
    """Cell centers of a subset of [1,2] in original coordinates"""
    return 1.0 + delta_set.centers()[:, 0]


def _require_interval_sets(*sets: DeltaSet):
    levels = {s.level for s in sets}
    if len(levels) != 1:
        raise PreconditionError(f"all sets must share one level, got {sorted(levels)}")
    if any(s.dim != 1 or s.extent != 1 for s in sets):
        raise PreconditionError("sets must be 1D subsets of [1,2]")


def line_family(b_set: DeltaSet, c_set: DeltaSet) -> AffineFamily:
    """
    One line x₂ = c(x₁ − b) per pair of cell centers (b, c), in the working chart

    Members are ordered with b outer and c inner and carry weight 1.
    """
    _require_interval_sets(b_set, c_set)
    members = []
    for b in _interval_centers(b_set):
        for c in _interval_centers(c_set):
            # 4Y + 1 = c(4X + 2 − b)
            members.append(_line_plane(c, (c * (2.0 - b) - 1.0) / CHART_SCALE))
    return AffineFamily(tuple(members), np.ones(len(members)), b_set.level + CHART_SHIFT)


def witness_points(a_set: DeltaSet, b: float, c: float) -> np.ndarray:
    """(a + b, a·c) for every cell center a of A: points of the (b,c)-line inside F"""
    a = _interval_centers(a_set)
    return np.stack([a + b, a * c], axis=1)


def dual_points(b_set: DeltaSet, c_set: DeltaSet) -> np.ndarray:
    """D̃(𝓛) = {(−c, −bc)} over all cell-center pairs, b outer"""
    b = np.repeat(_interval_centers(b_set), c_set.cell_count)
    c = np.tile(_interval_centers(c_set), b_set.cell_count)
    return np.stack([-c, -b * c], axis=1)


def sumproduct_exponent(s_b: float, s_c: float, strict: bool = True) -> float:
    """1 − (s_B + s_C − 1)/(2 min{s_B, s_C}); equals 1/(2 s_B) when s_B = s_C"""
    if not (0 < s_b <= 1 and 0 < s_c <= 1):
        raise PreconditionError(f"s_B, s_C must lie in (0,1], got {s_b}, {s_c}")
    if s_b + s_c < 1:
        message = f"s_B + s_C >= 1 is required, got {s_b + s_c:g}"
        if strict:
            raise PreconditionError(message)
        logger.warning("Sum-product exponent outside its hypothesis: %s", message)
    return 1.0 - (s_b + s_c - 1.0) / (2.0 * min(s_b, s_c))


def previous_exponent(s_b: float, s_c: float) -> float:
    """The earlier exponent 1 − (s_B + s_C − 1)/2"""
    return 1.0 - (s_b + s_c - 1.0) / 2.0


def product_exponent(s_b: float, s_c: float) -> float:
    """|A+B|·|AC| ≳ |A|^e with e the better of (1−s_B+s_C)/s_C and (1−s_C+s_B)/s_B"""
    if not (0 < s_b <= 1 and 0 < s_c <= 1):
        raise PreconditionError(f"s_B, s_C must lie in (0,1], got {s_b}, {s_c}")
    return min((1.0 - s_b + s_c) / s_c, (1.0 - s_c + s_b) / s_b)


def growth_threshold(s_b: float) -> float:
    """Smallest s_A for which max{|A+B|, |AB|} ≫ |B| when |A| = δ^(1−s_A): 1 − 2s_B(1 − s_B)"""
    if not 0.5 < s_b <= 1:
        raise PreconditionError(f"s_B must lie in (1/2, 1] when B = C, got {s_b}")
    return 1.0 - 2.0 * s_b * (1.0 - s_b)


def growth_margin(s_a: float, s_b: float) -> float:
    """
    β with max{|A+B|, |AB|} ≳ δ^-β·|B|, for |A| = δ^(1−s_A), |B| = δ^(1−s_B) and B = C

    Compares |A|^(1/(2 s_B)) with |B|; positive exactly when s_A exceeds
    growth_threshold(s_B).
    """
    if not 0 <= s_a <= 1:
        raise PreconditionError(f"s_A must lie in [0, 1], got {s_a}")
    growth_threshold(s_b)
    return (1.0 - s_b) - (1.0 - s_a) / (2.0 * s_b)


def _sandwich(a_set: DeltaSet, sums: DeltaSet, products: DeltaSet, lines: AffineFamily,
              max_lines: int) -> Dict[str, float]:
    """
    Incidences between lines of 𝓛 and F = (A+B) × (AC), in original areas

    Lines are subsampled evenly down to max_lines. The lower side is
    δ·|A| per line.
    """
    level = a_set.level
    picked = np.unique(np.linspace(0, len(lines) - 1, min(max_lines, len(lines))).astype(np.int64))
    sample = lines.subset(picked)

    rows = np.repeat(sums.cells[:, 0], products.cell_count)
    cols = np.tile(products.cells[:, 0], sums.cell_count)
    region = DeltaSet(2, level + CHART_SHIFT, np.stack([rows, cols], axis=1))
    area = incidence_mass(lebesgue_measure(region), sample) * CHART_SCALE ** 2

    delta = a_set.delta
    lower = delta * lebesgue_size(a_set) * sample.total_weight
    return {'sandwich_lines': len(sample), 'incidence': area, 'incidence_lower': lower,
            'incidence_lower_ratio': area / lower if lower > 0 else math.inf}


def run_sumproduct(a_set: DeltaSet, b_set: DeltaSet, c_set: DeltaSet, s_b: float, s_c: float,
                   sandwich_max_level: int = 10, max_lines: int = 64) -> BoundReport:
    """
    max{|A+B|, |AC|} against |A|^exponent

    Sizes are Lebesgue measures of unions of δ-cells. The report passes when
    the maximum is at least |A|^exponent·δ^EPSILON_SLACK. Non-concentration
    audits of B and C only annotate the report. Every report confirms an
    instance; it cannot refute the lower bound.
    """
    _require_interval_sets(a_set, b_set, c_set)
    if not len(a_set) or not len(b_set) or not len(c_set):
        raise PreconditionError("run_sumproduct needs nonempty A, B and C")
    level = a_set.level

    hypothesis = certify(b_set, s_b) and certify(c_set, s_c)
    if s_b + s_c < 1:
        hypothesis = False
    exponent = sumproduct_exponent(s_b, s_c, strict=False)

    sums = sumset(a_set, b_set)
    products = productset(a_set, c_set)
    size_a = lebesgue_size(a_set)
    sum_size = lebesgue_size(sums)
    prod_size = lebesgue_size(products)
    lhs = max(sum_size, prod_size)
    rhs = size_a ** exponent

    extras = {
        'cardA': size_a,
        'sumsize': sum_size,
        'prodsize': prod_size,
        'hypothesis_met': hypothesis,
        'mode': 'confirmation',
        'product_exponent': product_exponent(s_b, s_c),
        'previous_exponent': previous_exponent(s_b, s_c),
        'pass': lhs >= rhs * 2.0 ** (-level * EPSILON_SLACK),
    }
    if s_b == s_c and s_b > 0.5 and size_a < 1:
        # |A| = δ^(1−s_A)
        s_a = 1.0 - math.log(size_a) / math.log(a_set.delta)
        extras['growth_margin'] = growth_margin(min(max(s_a, 0.0), 1.0), s_b)
    lines = line_family(b_set, c_set)
    if level <= sandwich_max_level:
        extras.update(_sandwich(a_set, sums, products, lines, max_lines))

    params = dict(level=level, sB=s_b, sC=s_c, exponent=exponent)
    report = BoundReport('sumproduct', lhs, rhs, params, len(lines), extras)
    logger.info("Sum-product level %d: max size %.4g, bound %.4g (%s)", level, lhs, rhs,
                'pass' if extras['pass'] else 'fail')
    return report


def sumproduct_row(report: BoundReport) -> Dict[str, object]:
    extras = report.extras
    return dict(level=report.params['level'], sB=report.params['sB'], sC=report.params['sC'],
                cardA=extras['cardA'], sumsize=extras['sumsize'], prodsize=extras['prodsize'],
                maxsize=report.lhs, exponent=report.params['exponent'], bound=report.rhs,
                ratio=report.ratio, **{'pass': extras['pass']})
