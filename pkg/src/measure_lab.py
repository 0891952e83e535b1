"""
Frostlab Measure Module
Discrete measures on DeltaSets and the quantities that certify their dimension

This module provides:
- DiscreteMeasure: non-negative weights on the cells of a DeltaSet, atoms at cell centers
- FubiniMeasure: a base measure μ₂ with one slice measure μ₁^{x₂} per base cell
- s-dimensional energy I_s and α-dimensional amplitude A_α with the kernel
  max(|x−y|, δ)^-s (the diagonal contributes w²·δ^-s)
- Frostman constants audited on the dyadic radius ladder δ, 2δ, ..., 1
- Product measures, marginals, coarsening and a text format

Double sums are split into row blocks evaluated on the worker pool and
reduced with math.fsum, so results do not depend on the block layout.
"""

import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, Tuple, Union

import numpy as np

from .errors import PreconditionError
from .grid_core import DeltaSet, _parse_set_lines, to_text
from .parallel import ordered_map

logger = logging.getLogger(__name__)

# Kernel entries evaluated per block (rows × atoms)
_KERNEL_BLOCK = 1 << 21


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Weights on the cells of `support`, indexed in support order"""
    support: DeltaSet
    weights: np.ndarray
    is_zero: bool = False
    total_mass: float = field(init=False)

    def __post_init__(self):
        weights = np.array(self.weights, dtype=np.float64).reshape(-1)
        if len(weights) != self.support.cell_count:
            raise PreconditionError(
                f"expected {self.support.cell_count} weights, got {len(weights)}")
        if not np.all(np.isfinite(weights)) or np.any(weights < 0):
            raise PreconditionError("weights must be finite and non-negative")

        total = math.fsum(weights)
        if total == 0 and len(weights) and not self.is_zero:
            raise PreconditionError("total mass is 0; pass is_zero=True for the zero measure")

        weights.setflags(write=False)
        object.__setattr__(self, 'weights', weights)
        object.__setattr__(self, 'total_mass', total)

    @classmethod
    def from_cells(cls, dim: int, level: int, cells, weights, extent: int = 1) -> 'DiscreteMeasure':
        """Build a measure from unsorted cells, adding the weights of repeated cells"""
        cells = np.asarray(cells, dtype=np.int64).reshape(-1, dim)
        weights = np.asarray(weights, dtype=np.float64).reshape(-1)
        if not len(cells):
            return cls(DeltaSet(dim, level, cells, extent), weights, is_zero=True)
        unique, inverse = np.unique(cells, axis=0, return_inverse=True)
        merged = np.bincount(inverse.ravel(), weights=weights, minlength=len(unique))
        support = DeltaSet(dim, level, unique, extent)
        return cls(support, merged, is_zero=not np.any(merged > 0))

    @property
    def dim(self) -> int:
        return self.support.dim

    @property
    def level(self) -> int:
        return self.support.level

    @property
    def delta(self) -> float:
        return self.support.delta

    def centers(self) -> np.ndarray:
        return self.support.centers()

    def mass_of(self, delta_set: DeltaSet) -> float:
        """μ of a union of cells at the same level"""
        if delta_set.dim != self.dim or delta_set.level != self.level:
            raise PreconditionError("set and measure must share dimension and level")
        extent = max(delta_set.extent, self.support.extent)
        inside = np.isin(self.support.with_extent(extent).keys(),
                         delta_set.with_extent(extent).keys())
        return math.fsum(self.weights[inside])


@dataclass(frozen=True, eq=False)
class FubiniMeasure:
    """
    dμ(x₁, x₂) = dμ₁^{x₂}(x₁) dμ₂(x₂)

    `slices[i]` is the measure on R^n sitting over the i-th cell of `base2`
    (a measure on R^{d−n}). Assembled points are (x₁, x₂): slice coordinates
    first, base coordinates last.
    """
    base2: DiscreteMeasure
    slices: Tuple[DiscreteMeasure, ...]

    def __post_init__(self):
        slices = tuple(self.slices)
        if len(slices) != self.base2.support.cell_count:
            raise PreconditionError(
                f"expected one slice per base cell ({self.base2.support.cell_count}), got {len(slices)}")
        if slices:
            n = slices[0].dim
            if any(piece.dim != n for piece in slices):
                raise PreconditionError("all slices must have the same dimension")
            if any(piece.level != self.base2.level for piece in slices):
                raise PreconditionError("slices and base must share one level")
            if n + self.base2.dim > 3:
                raise PreconditionError(f"assembled dimension {n + self.base2.dim} exceeds 3")
        object.__setattr__(self, 'slices', slices)

    @property
    def n(self) -> int:
        """Dimension of the slice space R^n"""
        return self.slices[0].dim

    @property
    def dim(self) -> int:
        return self.n + self.base2.dim

    @property
    def level(self) -> int:
        return self.base2.level

    @property
    def total_mass(self) -> float:
        return math.fsum(w * piece.total_mass for w, piece in zip(self.base2.weights, self.slices))

    def assemble(self) -> DiscreteMeasure:
        """The measure on R^d obtained by stacking the weighted slices"""
        cells, weights = [], []
        for base_cell, base_weight, piece in zip(self.base2.support.cells, self.base2.weights, self.slices):
            if not len(piece.support):
                continue
            tail = np.broadcast_to(base_cell, (len(piece.support), len(base_cell)))
            cells.append(np.hstack([piece.support.cells, tail]))
            weights.append(piece.weights * base_weight)
        if not cells:
            raise PreconditionError("cannot assemble a Fubini measure with no atoms")
        return DiscreteMeasure.from_cells(self.dim, self.level, np.vstack(cells), np.concatenate(weights))

    def counting_base(self) -> DiscreteMeasure:
        """Stacked slices over the normalized counting measure on supp μ₂ (the μ₁-only reading)"""
        count = self.base2.support.cell_count
        uniform = DiscreteMeasure(self.base2.support, np.full(count, 1.0 / count))
        return FubiniMeasure(uniform, self.slices).assemble()


def uniform_measure(delta_set: DeltaSet) -> DiscreteMeasure:
    """Probability measure with equal weight on every cell: (1/|A|)·χ_A"""
    if not len(delta_set):
        raise PreconditionError("uniform_measure needs a nonempty set")
    count = delta_set.cell_count
    return DiscreteMeasure(delta_set, np.full(count, 1.0 / count))


def lebesgue_measure(delta_set: DeltaSet) -> DiscreteMeasure:
    """χ_A as a measure: each cell carries its volume δ^dim"""
    if not len(delta_set):
        raise PreconditionError("lebesgue_measure needs a nonempty set")
    return DiscreteMeasure(delta_set, np.full(delta_set.cell_count, delta_set.delta ** delta_set.dim))


def _pairwise_distances(rows: np.ndarray, points: np.ndarray) -> np.ndarray:
    diff = rows[:, None, :] - points[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=-1))


def _potentials(mu: DiscreteMeasure, exponent: float) -> np.ndarray:
    """Σ_y w_y·max(|x−y|, δ)^-exponent at every atom x"""
    centers = mu.centers()
    weights = mu.weights
    count = len(centers)
    if not count:
        return np.zeros(0)
    block = max(1, _KERNEL_BLOCK // count)

    def evaluate(start: int) -> np.ndarray:
        dist = _pairwise_distances(centers[start:start + block], centers)
        kernel = np.maximum(dist, mu.delta) ** -exponent
        return kernel @ weights

    return np.concatenate(ordered_map(evaluate, range(0, count, block)))


def energy(mu: DiscreteMeasure, s: float) -> float:
    """
    Discrete s-dimensional energy

    I_s(μ) = Σ_{i,j} w_i w_j max(|x_i − x_j|, δ)^-s over cell centers,
    diagonal included.
    """
    if s <= 0:
        raise PreconditionError(f"energy needs s > 0, got {s}")
    if s >= mu.dim:
        logger.debug("energy exponent s=%s is not below dim=%d", s, mu.dim)

    start_time = time.time()
    value = math.fsum(mu.weights * _potentials(mu, s))
    logger.debug("Energy I_%s over %d atoms in %.2fs", s, len(mu.weights), time.time() - start_time)
    return value


def amplitude(mu: DiscreteMeasure, alpha: float) -> float:
    """α-dimensional amplitude: the largest potential at a support cell center"""
    if alpha <= 0:
        raise PreconditionError(f"amplitude needs alpha > 0, got {alpha}")
    potentials = _potentials(mu, alpha)
    return float(potentials.max()) if len(potentials) else 0.0


def dyadic_radii(level: int) -> np.ndarray:
    """δ, 2δ, 4δ, ..., 1"""
    return 2.0 ** -np.arange(level, -1, -1)


def ball_masses(centers: np.ndarray, weights: np.ndarray, radii: Sequence[float]) -> np.ndarray:
    """
    Masses of the open balls B(x, r) = {y : |y − x| < r}

    Returns an array of shape (len(centers), len(radii)). Centers must be
    lexicographically sorted (support order) for the 1D fast path.
    """
    radii = np.asarray(radii, dtype=float)
    count = len(centers)
    if not count:
        return np.zeros((0, len(radii)))

    if centers.shape[1] == 1:
        line = centers[:, 0]
        cumulative = np.concatenate(([0.0], np.cumsum(weights)))
        masses = np.empty((count, len(radii)))
        for column, radius in enumerate(radii):
            left = np.searchsorted(line, line - radius, side='right')
            right = np.searchsorted(line, line + radius, side='left')
            masses[:, column] = cumulative[right] - cumulative[left]
        return masses

    block = max(1, _KERNEL_BLOCK // count)

    def evaluate(start: int) -> np.ndarray:
        dist = _pairwise_distances(centers[start:start + block], centers)
        return np.stack([(dist < radius) @ weights for radius in radii], axis=1)

    return np.vstack(ordered_map(evaluate, range(0, count, block)))


def frostman_constant(mu: DiscreteMeasure, alpha: float) -> float:
    """
    Smallest c with μ(B(x,r)) ≤ c·r^α on the audited balls

    Balls are centered at support cell centers with dyadic radii δ..1.
    """
    if alpha <= 0:
        raise PreconditionError(f"frostman_constant needs alpha > 0, got {alpha}")
    if not len(mu.weights):
        return 0.0
    radii = dyadic_radii(mu.level)
    masses = ball_masses(mu.centers(), mu.weights, radii)
    return float(np.max(masses / radii ** alpha))


def product_measure(mu1: DiscreteMeasure, mu2: DiscreteMeasure) -> FubiniMeasure:
    """μ₁ × μ₂ as a Fubini measure whose slices all equal μ₁"""
    if mu1.level != mu2.level:
        raise PreconditionError(f"product_measure needs equal levels, got {mu1.level} and {mu2.level}")
    if mu1.dim + mu2.dim > 3:
        raise PreconditionError(f"product dimension {mu1.dim + mu2.dim} exceeds 3")
    return FubiniMeasure(mu2, (mu1,) * mu2.support.cell_count)


def fubini_measure(base2: DiscreteMeasure, slices: Sequence[DiscreteMeasure]) -> FubiniMeasure:
    """General Fubini measure with possibly different slices"""
    return FubiniMeasure(base2, tuple(slices))


def fubini_slice_amplitude(m: FubiniMeasure, alpha: float) -> float:
    """sup over x₂ ∈ supp μ₂ of A_α(μ₁^{x₂})"""
    if not m.slices or any(not len(piece.support) for piece in m.slices):
        raise PreconditionError("fubini_slice_amplitude needs nonempty slices")
    if not 0 < alpha < m.n:
        logger.debug("slice amplitude exponent alpha=%s is outside (0, %d)", alpha, m.n)
    active = [piece for weight, piece in zip(m.base2.weights, m.slices) if weight > 0]
    # Identical slices (product measures) are evaluated once
    distinct = {id(piece): piece for piece in active}
    return max(ordered_map(lambda piece: amplitude(piece, alpha), distinct.values()), default=0.0)


def marginal(mu: DiscreteMeasure, axes: Sequence[int]) -> DiscreteMeasure:
    """Pushforward onto the coordinates listed in `axes`"""
    axes = list(axes)
    return DiscreteMeasure.from_cells(len(axes), mu.level, mu.support.cells[:, axes],
                                      mu.weights, mu.support.extent)


def coarsen_measure(mu: DiscreteMeasure, coarse_level: int) -> DiscreteMeasure:
    """Move each atom's mass to its parent cell at coarse_level"""
    if not 1 <= coarse_level <= mu.level:
        raise PreconditionError(f"coarse_level must lie in [1, {mu.level}], got {coarse_level}")
    parents = mu.support.cells >> (mu.level - coarse_level)
    return DiscreteMeasure.from_cells(mu.dim, coarse_level, parents, mu.weights, mu.support.extent)


def measure_to_text(mu: DiscreteMeasure) -> str:
    """DeltaSet block followed by one weight per line, always in exponent form"""
    weights = '\n'.join(f"{w:.16e}" for w in mu.weights)
    return to_text(mu.support) + (weights + '\n' if weights else '')


def _is_weight_line(line: str) -> bool:
    """One token that is not a bare integer (a bare integer reads as a 1D cell)"""
    tokens = line.split()
    return len(tokens) == 1 and not tokens[0].lstrip('+-').isdigit()


def measure_from_text(text: str) -> DiscreteMeasure:
    """
    Parse `measure_to_text` output

    Weights must be written in float form (`0.5`, `1.0`, `1e-3`); a bare
    integer after the cells is rejected instead of being read as a cell.
    """
    lines = [line for line in text.splitlines() if line.strip()]
    split = len(lines)
    while split > 1 and _is_weight_line(lines[split - 1]):
        split -= 1
    support, consumed = _parse_set_lines(lines[:split])
    if consumed != split:
        raise PreconditionError(
            f"line {consumed + 1}: expected a cell or a float weight, got {lines[consumed]!r}")
    weight_lines = lines[split:]
    if len(weight_lines) != support.cell_count:
        raise PreconditionError(
            f"expected {support.cell_count} weights written as floats, got {len(weight_lines)}")
    try:
        weights = [float(line) for line in weight_lines]
    except ValueError as exc:
        raise PreconditionError(f"bad weight line: {exc}")
    return DiscreteMeasure(support, np.asarray(weights, dtype=float),
                           is_zero=not any(w > 0 for w in weights))


def write_measure(path: Union[str, Path], mu: DiscreteMeasure):
    Path(path).write_text(measure_to_text(mu), encoding='utf-8')


def read_measure(path: Union[str, Path]) -> DiscreteMeasure:
    return measure_from_text(Path(path).read_text(encoding='utf-8'))
