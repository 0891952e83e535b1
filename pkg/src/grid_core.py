"""
Frostlab Grid Module
Dyadic δ-discretization of subsets of [0,1]^d

This module provides:
- DeltaSet: unions of half-open dyadic cells [iδ, (i+1)δ), δ = 2^-level
- Quantization of points and boxes onto the grid
- Box counting, coarsening and Chebyshev neighborhoods
- Box-dimension fitting across dyadic levels
- Minkowski sums and products of 1D sets (index arithmetic, exact)
- The line-oriented text format used as the CLI interchange unit
"""

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Sequence, Tuple, Union

import numpy as np

from .errors import PreconditionError

logger = logging.getLogger(__name__)

SUPPORTED_DIMS = (1, 2, 3)

# Declared output ranges, in units of the unit interval
SUMSET_EXTENT = 2    # [0,1) + [0,1) ⊂ [0,2)
PRODUCT_EXTENT = 3   # [1,2)·[1,2) ⊂ [1,4), stored in the chart x ↦ x−1

# Rows of A processed at once by the product kernel
_PRODUCT_CHUNK = 512


@dataclass(frozen=True, eq=False)
class DeltaSet:
    """
    A union of half-open dyadic δ-cells

    `cells` holds one integer index vector per cell, sorted lexicographically
    and duplicate-free; every component lies in [0, extent·2^level). Sets of
    [0,1]^d have extent 1; sumsets and products carry their wider range in
    `extent`, and `clipped` records that cells fell outside it.
    """
    dim: int
    level: int
    cells: np.ndarray
    extent: int = 1
    clipped: bool = False

    def __post_init__(self):
        if self.dim not in SUPPORTED_DIMS:
            raise PreconditionError(f"dim must be one of {SUPPORTED_DIMS}, got {self.dim}")
        if self.level < 1:
            raise PreconditionError(f"level must be >= 1, got {self.level}")
        if self.extent < 1:
            raise PreconditionError(f"extent must be >= 1, got {self.extent}")

        cells = np.array(self.cells, dtype=np.int64)
        if cells.size == 0:
            cells = cells.reshape(0, self.dim)
        if cells.ndim != 2 or cells.shape[1] != self.dim:
            raise PreconditionError(f"cells must have shape (N, {self.dim}), got {cells.shape}")

        limit = self.extent << self.level
        if len(cells) and (cells.min() < 0 or cells.max() >= limit):
            raise PreconditionError(f"cell indices must lie in [0, {limit})")

        if len(cells) > 1:
            # Strictly increasing in lexicographic order
            steps = np.diff(cells, axis=0)
            first_change = np.argmax(steps != 0, axis=1)
            leading = steps[np.arange(len(steps)), first_change]
            if np.any(leading <= 0):
                raise PreconditionError("cells must be sorted lexicographically without duplicates")

        cells.setflags(write=False)
        object.__setattr__(self, 'cells', cells)

    @classmethod
    def from_cells(cls, dim: int, level: int, cells: Any, extent: int = 1,
                   clipped: bool = False) -> 'DeltaSet':
        """Build a set from unsorted, possibly repeated index vectors"""
        cells = np.asarray(cells, dtype=np.int64).reshape(-1, dim)
        if len(cells):
            cells = np.unique(cells, axis=0)
        return cls(dim, level, cells, extent, clipped)

    @classmethod
    def full(cls, dim: int, level: int) -> 'DeltaSet':
        """Every cell of [0,1]^dim at the given level"""
        axis = np.arange(1 << level, dtype=np.int64)
        grid = np.stack(np.meshgrid(*([axis] * dim), indexing='ij'), axis=-1)
        return cls(dim, level, grid.reshape(-1, dim))

    @property
    def delta(self) -> float:
        return 2.0 ** -self.level

    @property
    def size(self) -> int:
        """Cells per unit length along one axis"""
        return 1 << self.level

    @property
    def cell_count(self) -> int:
        return len(self.cells)

    def __len__(self) -> int:
        return len(self.cells)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DeltaSet):
            return NotImplemented
        return (self.dim == other.dim and self.level == other.level
                and self.extent == other.extent
                and np.array_equal(self.cells, other.cells))

    __hash__ = object.__hash__

    def centers(self) -> np.ndarray:
        """Cell centers (i + 1/2)·δ, one row per cell"""
        return (self.cells + 0.5) * self.delta

    def keys(self) -> np.ndarray:
        """Flat integer keys; increasing because cells are lexicographically sorted"""
        if not len(self.cells):
            return np.zeros(0, dtype=np.int64)
        shape = (self.extent << self.level,) * self.dim
        return np.ravel_multi_index(tuple(self.cells.T), shape)

    def issubset(self, other: 'DeltaSet') -> bool:
        if self.dim != other.dim or self.level != other.level:
            return False
        if self.cells.max(initial=-1) >= (other.extent << other.level):
            return False
        extent = max(self.extent, other.extent)
        return bool(np.isin(self.with_extent(extent).keys(), other.with_extent(extent).keys()).all())

    def with_extent(self, extent: int) -> 'DeltaSet':
        """Same cells viewed in another index range"""
        if extent == self.extent:
            return self
        return DeltaSet(self.dim, self.level, self.cells, extent, self.clipped)


@dataclass(frozen=True)
class DimensionFit:
    """Least-squares fit of log2 box counts against level"""
    slope: float
    intercept: float
    residual: float
    levels: Tuple[int, ...]


def _generator_bounds(generator: Any, dim: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Interpret a generator as a closed box [lo, hi]

    A point is a sequence of `dim` coordinates (a bare float in 1D); a box is
    a sequence of `dim` (lo, hi) pairs, or a single (lo, hi) pair in 1D.
    """
    arr = np.asarray(generator, dtype=float)
    if arr.ndim == 0 and dim == 1:
        lo = hi = arr.reshape(1)
    elif arr.shape == (dim, 2):
        lo, hi = arr[:, 0], arr[:, 1]
    elif dim == 1 and arr.shape == (2,):
        lo, hi = arr[:1], arr[1:]
    elif arr.shape == (dim,):
        lo = hi = arr
    else:
        raise PreconditionError(f"generator {generator!r} is neither a point nor a box in dimension {dim}")

    if np.any(lo > hi):
        raise PreconditionError(f"generator {generator!r} has lo > hi")
    if np.any(lo < 0.0) or np.any(hi > 1.0):
        raise PreconditionError(f"generator {generator!r} lies outside [0,1]^{dim}")
    return lo, hi


def quantize(generators: Iterable[Any], level: int, dim: int) -> DeltaSet:
    """
    All δ-cells meeting at least one generator (point or closed box)

    The right end 1.0 of the unit interval is assigned to the last cell.

    Args:
        generators: points or boxes inside [0,1]^dim
        level: dyadic level j, δ = 2^-j
        dim: ambient dimension

    Returns:
        DeltaSet of the covered cells
    """
    if level < 1:
        raise PreconditionError(f"level must be >= 1, got {level}")
    if dim not in SUPPORTED_DIMS:
        raise PreconditionError(f"dim must be one of {SUPPORTED_DIMS}, got {dim}")

    size = 1 << level
    blocks = []
    for generator in generators:
        lo, hi = _generator_bounds(generator, dim)
        lo_idx = np.minimum(np.floor(lo * size).astype(np.int64), size - 1)
        hi_idx = np.minimum(np.floor(hi * size).astype(np.int64), size - 1)
        ranges = [np.arange(a, b + 1, dtype=np.int64) for a, b in zip(lo_idx, hi_idx)]
        grid = np.stack(np.meshgrid(*ranges, indexing='ij'), axis=-1)
        blocks.append(grid.reshape(-1, dim))

    if not blocks:
        return DeltaSet(dim, level, np.zeros((0, dim), dtype=np.int64))
    return DeltaSet.from_cells(dim, level, np.concatenate(blocks))


def _coarse_cells(cells: np.ndarray, shift: int) -> np.ndarray:
    """Parent cells `shift` levels up, sorted lexicographically, duplicates removed"""
    parents = cells >> shift
    if len(parents) < 2:
        return parents
    # Sorted children only give sorted parents in 1D
    return np.unique(parents, axis=0)


def coarsen(delta_set: DeltaSet, coarse_level: int) -> DeltaSet:
    """The set of coarse cells containing at least one cell of delta_set"""
    if not 1 <= coarse_level <= delta_set.level:
        raise PreconditionError(
            f"coarse_level must satisfy 1 <= coarse_level <= {delta_set.level}, got {coarse_level}")
    parents = _coarse_cells(delta_set.cells, delta_set.level - coarse_level)
    return DeltaSet(delta_set.dim, coarse_level, parents, delta_set.extent, delta_set.clipped)


def box_count(delta_set: DeltaSet, coarse_level: int) -> int:
    """Number of cells at scale 2^-coarse_level containing a cell of the set"""
    if not 1 <= coarse_level <= delta_set.level:
        raise PreconditionError(
            f"coarse_level must satisfy 1 <= coarse_level <= {delta_set.level}, got {coarse_level}")
    return len(_coarse_cells(delta_set.cells, delta_set.level - coarse_level))


def neighborhood(delta_set: DeltaSet, radius_cells: int) -> DeltaSet:
    """All in-range cells within Chebyshev distance radius_cells of the set"""
    if radius_cells < 0:
        raise PreconditionError(f"radius_cells must be >= 0, got {radius_cells}")
    if radius_cells == 0 or not len(delta_set):
        return delta_set

    span = np.arange(-radius_cells, radius_cells + 1, dtype=np.int64)
    offsets = np.stack(np.meshgrid(*([span] * delta_set.dim), indexing='ij'), axis=-1)
    offsets = offsets.reshape(-1, delta_set.dim)

    grown = (delta_set.cells[:, None, :] + offsets[None, :, :]).reshape(-1, delta_set.dim)
    limit = delta_set.extent << delta_set.level
    grown = grown[np.all((grown >= 0) & (grown < limit), axis=1)]
    return DeltaSet.from_cells(delta_set.dim, delta_set.level, grown, delta_set.extent, delta_set.clipped)


def fit_dimension(levels: Sequence[int], counts: Sequence[float]) -> DimensionFit:
    """
    Ordinary least squares of log2(count) against level

    The residual is the largest absolute deviation of the data from the fitted
    line, so callers can reject bad fits instead of trusting the slope.
    """
    levels = tuple(int(level) for level in levels)
    if len(levels) < 3:
        raise PreconditionError(f"a dimension fit needs at least 3 levels, got {len(levels)}")
    if any(b <= a for a, b in zip(levels, levels[1:])):
        raise PreconditionError(f"levels must be strictly increasing, got {levels}")

    x = np.asarray(levels, dtype=float)
    y = np.log2(np.asarray(counts, dtype=float))
    slope, intercept = np.polyfit(x, y, 1)
    residual = float(np.max(np.abs(y - (slope * x + intercept))))
    return DimensionFit(float(slope), float(intercept), residual, levels)


def box_dimension(delta_set: DeltaSet, min_level: int, max_level: int) -> DimensionFit:
    """Box-dimension estimate of the set over the dyadic levels min_level..max_level"""
    if not 1 <= min_level < max_level <= delta_set.level:
        raise PreconditionError(
            f"levels must satisfy 1 <= min_level < max_level <= {delta_set.level}, "
            f"got {min_level}..{max_level}")
    if not len(delta_set):
        raise PreconditionError("cannot fit the dimension of an empty set")
    levels = list(range(min_level, max_level + 1))
    counts = [box_count(delta_set, level) for level in levels]
    return fit_dimension(levels, counts)


def _require_1d_pair(a: DeltaSet, b: DeltaSet, operation: str):
    if a.dim != 1 or b.dim != 1:
        raise PreconditionError(f"{operation} needs 1D sets, got dims {a.dim} and {b.dim}")
    if a.level != b.level:
        raise PreconditionError(f"{operation} needs equal levels, got {a.level} and {b.level}")


def sumset(a: DeltaSet, b: DeltaSet) -> DeltaSet:
    """
    Minkowski sum A + B of two 1D sets

    [iδ,(i+1)δ) + [jδ,(j+1)δ) = [(i+j)δ, (i+j+2)δ), so each pair of cells
    contributes cells i+j and i+j+1. The result lives in [0,2) (extent 2);
    anything beyond that range is dropped and flagged as clipped.
    """
    _require_1d_pair(a, b, 'sumset')
    if not len(a) or not len(b):
        return DeltaSet(1, a.level, np.zeros((0, 1), dtype=np.int64), SUMSET_EXTENT)

    indicator_a = np.zeros(a.extent << a.level, dtype=np.int64)
    indicator_b = np.zeros(b.extent << b.level, dtype=np.int64)
    indicator_a[a.cells[:, 0]] = 1
    indicator_b[b.cells[:, 0]] = 1

    # Index sums i + j present in the convolution support
    hits = np.flatnonzero(np.convolve(indicator_a, indicator_b))
    indices = np.union1d(hits, hits + 1)

    limit = SUMSET_EXTENT << a.level
    clipped = bool(indices[-1] >= limit)
    if clipped:
        logger.warning("sumset exceeded [0,%d); %d cells dropped",
                       SUMSET_EXTENT, int(np.sum(indices >= limit)))
        indices = indices[indices < limit]
    return DeltaSet(1, a.level, indices.reshape(-1, 1), SUMSET_EXTENT, clipped)


def productset(a: DeltaSet, c: DeltaSet) -> DeltaSet:
    """
    Product set A·C of two subsets of [1,2]

    Both inputs are stored in the chart x ↦ x−1, so cell i stands for
    [1+iδ, 1+(i+1)δ). Endpoint products are formed in exact integer arithmetic
    in units of δ², and every cell meeting one of the half-open product
    intervals is kept. The result is stored in the same chart, inside [0,3).
    """
    _require_1d_pair(a, c, 'productset')
    if a.extent != 1 or c.extent != 1:
        raise PreconditionError("productset inputs must be subsets of [1,2] (extent 1)")

    n = a.size
    limit = PRODUCT_EXTENT * n
    if not len(a) or not len(c):
        return DeltaSet(1, a.level, np.zeros((0, 1), dtype=np.int64), PRODUCT_EXTENT)

    c_idx = c.cells[:, 0]
    starts = np.zeros(limit + 1, dtype=np.int64)
    stops = np.zeros(limit + 1, dtype=np.int64)

    for begin in range(0, len(a), _PRODUCT_CHUNK):
        a_idx = a.cells[begin:begin + _PRODUCT_CHUNK, 0]
        # (1+iδ)(1+kδ) − 1 in units of δ is ((n+i)(n+k) − n²)/n
        low = (np.outer(n + a_idx, n + c_idx) - n * n).ravel()
        high = (np.outer(n + a_idx + 1, n + c_idx + 1) - n * n).ravel()
        first = low // n
        last = -(-high // n) - 1
        starts += np.bincount(first, minlength=limit + 1)
        stops += np.bincount(last + 1, minlength=limit + 1)

    covered = np.cumsum(starts - stops)[:limit] > 0
    indices = np.flatnonzero(covered)
    return DeltaSet(1, a.level, indices.reshape(-1, 1), PRODUCT_EXTENT)


def lebesgue_size(delta_set: DeltaSet) -> float:
    """Lebesgue measure of the union of cells: cell_count·δ^dim"""
    return delta_set.cell_count * delta_set.delta ** delta_set.dim


def to_text(delta_set: DeltaSet) -> str:
    """`dim level [extent]` header, then one index vector per line"""
    header = f"{delta_set.dim} {delta_set.level}"
    if delta_set.extent != 1:
        header += f" {delta_set.extent}"
    lines = [header]
    lines.extend(' '.join(str(int(v)) for v in row) for row in delta_set.cells)
    return '\n'.join(lines) + '\n'


def _parse_set_lines(lines: Sequence[str], start_line: int = 1) -> Tuple[DeltaSet, int]:
    """Parse a DeltaSet block; returns the set and the number of lines consumed"""
    if not lines:
        raise PreconditionError(f"line {start_line}: missing `dim level` header")
    header = lines[0].split()
    if len(header) not in (2, 3):
        raise PreconditionError(f"line {start_line}: expected `dim level [extent]`, got {lines[0]!r}")
    try:
        dim, level = int(header[0]), int(header[1])
        extent = int(header[2]) if len(header) == 3 else 1
    except ValueError:
        raise PreconditionError(f"line {start_line}: non-integer header {lines[0]!r}")

    rows = []
    consumed = 1
    for offset, line in enumerate(lines[1:], start=1):
        fields = line.split()
        if len(fields) != dim:
            break
        try:
            rows.append([int(v) for v in fields])
        except ValueError:
            break
        consumed = offset + 1

    cells = np.asarray(rows, dtype=np.int64).reshape(-1, dim)
    return DeltaSet(dim, level, cells, extent), consumed


def from_text(text: str) -> DeltaSet:
    lines = [line for line in text.splitlines() if line.strip()]
    delta_set, consumed = _parse_set_lines(lines)
    if consumed != len(lines):
        raise PreconditionError(f"line {consumed + 1}: unexpected content {lines[consumed]!r}")
    return delta_set


def write_set(path: Union[str, Path], delta_set: DeltaSet):
    Path(path).write_text(to_text(delta_set), encoding='utf-8')


def read_set(path: Union[str, Path]) -> DeltaSet:
    return from_text(Path(path).read_text(encoding='utf-8'))
