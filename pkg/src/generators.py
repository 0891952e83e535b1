"""
Frostlab Generators Module
Constructors for (δ,s)-sets and structured examples

This module provides:
- cantor_set: seeded dyadic Cantor sets of any dimension s ∈ (0,1]
- ap_neighborhood_set / ap_intersection_set: δ-neighborhoods of arithmetic
  progressions and their intersections across scales
- product_set: Cartesian products of grid sets
- non_concentration_constant: the counting audit |A ∩ B(x,r)| ≤ C·(r/δ)^s
"""

import logging
import math
from typing import Sequence, Tuple

import numpy as np

from .errors import PreconditionError
from .grid_core import DeltaSet
from .measure_lab import ball_masses, dyadic_radii

logger = logging.getLogger(__name__)

NON_CONCENTRATION_THRESHOLD = 8.0


def _cantor_even(level: int, s: float, seed: int) -> DeltaSet:
    """Cantor construction by 2-level steps; `level` must be even"""
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    parents = np.zeros(1, dtype=np.int64)

    for current in range(2, level + 1, 2):
        count = len(parents)
        target = int(round(2.0 ** (current * s)))
        target = min(max(target, count), 4 * count)

        # Spread the extra children evenly over the parents
        base, extra = divmod(target, count)
        index = np.arange(count)
        bonus = ((index + 1) * extra) // count - (index * extra) // count
        keep = base + bonus

        order = np.argsort(rng.random((count, 4)), axis=1)
        children = parents[:, None] * 4 + order
        chosen = children[np.arange(4)[None, :] < keep[:, None]]
        parents = np.sort(chosen)

    return DeltaSet(1, level, parents.reshape(-1, 1))


def cantor_set(level: int, s: float, seed: int = 0) -> DeltaSet:
    """
    A (δ,s)-set in [0,1] at δ = 2^-level

    Every two levels each kept cell keeps a seeded random choice of its four
    grandchildren, as many as needed to track 2^(j·s) cells at level j. Odd
    levels are produced by coarsening the next even level, so the sets are
    nested: cantor_set(j+2) refines cantor_set(j) for the same seed.
    """
    if not 0 < s <= 1:
        raise PreconditionError(f"s must lie in (0,1], got {s}")
    if level < 2:
        raise PreconditionError(f"level must be >= 2 to realize dimension {s}, got {level}")
    if s == 1:
        return DeltaSet.full(1, level)

    if level % 2 == 0:
        result = _cantor_even(level, s, seed)
    else:
        fine = _cantor_even(level + 1, s, seed)
        result = DeltaSet.from_cells(1, level, fine.cells >> 1)
    logger.debug("Cantor set level %d, s=%.3f: %d cells", level, s, result.cell_count)
    return result


def ap_neighborhood_set(level: int, terms: int, spacing_exponent: int) -> DeltaSet:
    """
    The δ-cells containing the progression 0, h, 2h, ..., (terms−1)·h, h = 2^-spacing_exponent
    """
    if terms < 1:
        raise PreconditionError(f"terms must be >= 1, got {terms}")
    if spacing_exponent < 0:
        raise PreconditionError(f"spacing_exponent must be >= 0, got {spacing_exponent}")
    if terms > (1 << spacing_exponent):
        raise PreconditionError(
            f"{terms} terms with spacing 2^-{spacing_exponent} overflow the unit interval")

    k = np.arange(terms, dtype=np.int64)
    cells = (k << level) >> spacing_exponent
    return DeltaSet.from_cells(1, level, cells)


def ap_intersection_set(level: int, layers: Sequence[Tuple[int, int]]) -> DeltaSet:
    """
    Cells of [0,1] whose centers lie in every layer's neighborhood

    A layer (a, b) is the closed 2^-b-neighborhood of the progression 2^-a·Z,
    with a <= b <= level. Distances are compared in exact integers (units of δ/2).
    """
    if not layers:
        return DeltaSet.full(1, level)
    doubled = 2 * np.arange(1 << level, dtype=np.int64) + 1
    inside = np.ones(len(doubled), dtype=bool)
    for a, b in layers:
        if not 0 <= a <= b <= level:
            raise PreconditionError(f"layer ({a}, {b}) must satisfy 0 <= a <= b <= {level}")
        period = 1 << (level + 1 - a)
        residue = doubled % period
        distance = np.minimum(residue, period - residue)
        inside &= distance <= (1 << (level + 1 - b))
    return DeltaSet(1, level, np.flatnonzero(inside).reshape(-1, 1))


def product_set(e1: DeltaSet, e2: DeltaSet) -> DeltaSet:
    """E1 × E2 on the index grid; cells stay lexicographically sorted"""
    if e1.level != e2.level:
        raise PreconditionError(f"product_set needs equal levels, got {e1.level} and {e2.level}")
    if e1.dim + e2.dim > 3:
        raise PreconditionError(f"product dimension {e1.dim + e2.dim} exceeds 3")
    if e1.extent != 1 or e2.extent != 1:
        raise PreconditionError("product_set factors must lie in the unit cube")

    left = np.repeat(e1.cells, len(e2.cells), axis=0)
    right = np.tile(e2.cells, (len(e1.cells), 1))
    return DeltaSet(e1.dim + e2.dim, e1.level, np.hstack([left, right]))


def non_concentration_constant(delta_set: DeltaSet, s: float) -> float:
    """
    max over cells x and radii r ∈ {δ, 2δ, ..., 1} of |A ∩ B(x,r)| / (r/δ)^s

    A set passes the (δ,s) audit when this is at most NON_CONCENTRATION_THRESHOLD.
    """
    if not 0 < s <= delta_set.dim:
        raise PreconditionError(f"s must lie in (0, {delta_set.dim}], got {s}")
    if not len(delta_set):
        return 0.0
    radii = dyadic_radii(delta_set.level)
    counts = ball_masses(delta_set.centers(), np.ones(delta_set.cell_count), radii)
    return float(np.max(counts / (radii / delta_set.delta) ** s))


def certify(delta_set: DeltaSet, s: float) -> bool:
    """Run the non-concentration audit; failures are logged, not raised"""
    constant = non_concentration_constant(delta_set, s)
    if constant > NON_CONCENTRATION_THRESHOLD:
        logger.warning("(δ,%.3f) audit failed: constant %.2f > %.0f",
                       s, constant, NON_CONCENTRATION_THRESHOLD)
        return False
    return True


def expected_cantor_count(level: int, s: float) -> float:
    return math.pow(2.0, level * s)
