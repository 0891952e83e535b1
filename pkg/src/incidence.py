"""
Frostlab Incidence Module
δ-tubes around affine planes and the weighted incidence mass μ×λ(I_δ(E,𝒜))

This module provides:
- AffineFamily: weighted affine k-planes discretizing λ_{d,k,ν}
- rasterize_tube: the cells whose centers lie within δ of a plane, found by
  walking only the grid slabs that meet the tube
- SupportIndex: bucketed lookup of a measure's support cells
- incidence_mass and its brute-force oracle
- Greedy δ-nets in the affine metric and λ(𝒩_δ(𝒜))
- check_incidence_bound for the general and Fubini incidence estimates
- Random and full line families, and a text format
"""

import itertools
import logging
import math
import time
from collections import defaultdict
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np

from .errors import PreconditionError
from .grassmann import (AffinePlane, Subspace, grassmann_dimension, metric_to_many,
                        orthogonal_complement, spans_with_fiber)
from .grid_core import DeltaSet
from .measure_lab import (DiscreteMeasure, FubiniMeasure, amplitude, energy,
                          fubini_slice_amplitude)
from .parallel import ordered_map
from .projector import BoundReport

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class AffineFamily:
    """Affine k-planes of one shape with non-negative λ-weights, at a working level"""
    members: Tuple[AffinePlane, ...]
    weights: np.ndarray
    level: int

    def __post_init__(self):
        members = tuple(self.members)
        weights = np.array(self.weights, dtype=np.float64).reshape(-1)
        if len(weights) != len(members):
            raise PreconditionError(f"expected {len(members)} weights, got {len(weights)}")
        if np.any(weights < 0) or not np.all(np.isfinite(weights)):
            raise PreconditionError("family weights must be finite and non-negative")
        if members:
            shape = members[0].plane.basis.shape
            if any(member.plane.basis.shape != shape for member in members):
                raise PreconditionError("all members must share one (d,k)")
            reach = math.sqrt(shape[0])
            for member in members:
                outside = np.linalg.norm(member.offset - np.clip(member.offset, 0.0, 1.0))
                if outside > reach:
                    raise PreconditionError(f"member offset lies {outside:.3f} from the unit cube")
        weights.setflags(write=False)
        object.__setattr__(self, 'members', members)
        object.__setattr__(self, 'weights', weights)

    def __len__(self) -> int:
        return len(self.members)

    @property
    def d(self) -> int:
        return self.members[0].dim_ambient

    @property
    def k(self) -> int:
        return self.members[0].k

    @property
    def delta(self) -> float:
        return 2.0 ** -self.level

    @property
    def total_weight(self) -> float:
        return math.fsum(self.weights)

    @cached_property
    def offsets(self) -> np.ndarray:
        return np.stack([member.offset for member in self.members])

    @cached_property
    def projectors(self) -> np.ndarray:
        return np.stack([member.plane.projector for member in self.members])

    @cached_property
    def characteristics(self) -> Optional[np.ndarray]:
        vectors = [member.plane.characteristic for member in self.members]
        if any(vector is None for vector in vectors):
            return None
        return np.stack(vectors)

    def lexicographic_order(self) -> np.ndarray:
        """Member indices sorted by projector entries, then offset"""
        descriptors = np.stack([member.descriptor() for member in self.members])
        return np.lexsort(descriptors.T[::-1])

    def subset(self, indices) -> 'AffineFamily':
        indices = list(indices)
        return AffineFamily(tuple(self.members[i] for i in indices), self.weights[indices], self.level)


def _within_tube(distances: np.ndarray, delta: float) -> np.ndarray:
    return distances <= delta


def _solved_axes(normals: np.ndarray) -> Tuple[int, ...]:
    """The d−k coordinate axes along which the plane equations are best conditioned"""
    d, m = normals.shape
    best = max(itertools.combinations(range(d), m),
               key=lambda axes: abs(np.linalg.det(normals[list(axes), :])))
    return tuple(best)


def rasterize_tube(plane: AffinePlane, level: int) -> DeltaSet:
    """
    Cells of [0,1]^d whose centers lie within δ = 2^-level of the plane

    For every cell column along the k free axes, the plane equations are solved
    for the remaining axes; only cells within the resulting (padded) index
    window are tested against the exact point-plane distance.
    """
    d, k = plane.dim_ambient, plane.k
    if k >= d:
        raise PreconditionError("a tube needs k < d")
    size = 1 << level
    delta = 2.0 ** -level
    normals = plane.normal_basis
    solved = list(_solved_axes(normals))
    free = [axis for axis in range(d) if axis not in solved]

    axis = np.arange(size, dtype=np.int64)
    free_idx = np.stack(np.meshgrid(*([axis] * k), indexing='ij'), axis=-1).reshape(-1, k)
    x_free = (free_idx + 0.5) * delta

    system = normals[solved, :].T
    inverse = np.linalg.inv(system)
    rhs = plane.normal_offset[None, :] - x_free @ normals[free, :]
    middle = rhs @ inverse.T
    half = delta * np.linalg.norm(inverse, axis=1)

    lo = np.ceil((middle - half) * size - 0.5).astype(np.int64) - 1
    hi = np.floor((middle + half) * size - 0.5).astype(np.int64) + 1
    lo = np.maximum(lo, 0)
    hi = np.minimum(hi, size - 1)
    widths = hi - lo + 1
    alive = np.all(widths > 0, axis=1)
    if not np.any(alive):
        return DeltaSet(d, level, np.zeros((0, d), dtype=np.int64))
    free_idx, lo, widths = free_idx[alive], lo[alive], widths[alive]

    spans = [np.arange(w, dtype=np.int64) for w in widths.max(axis=0)]
    steps = np.stack(np.meshgrid(*spans, indexing='ij'), axis=-1).reshape(-1, len(solved))
    candidates = lo[:, None, :] + steps[None, :, :]
    valid = np.all(steps[None, :, :] < widths[:, None, :], axis=2)

    cells = np.empty(candidates.shape[:2] + (d,), dtype=np.int64)
    cells[:, :, free] = free_idx[:, None, :]
    cells[:, :, solved] = candidates
    cells = cells[valid]

    inside = _within_tube(plane.point_distances((cells + 0.5) * delta), delta)
    return DeltaSet.from_cells(d, level, cells[inside])


class SupportIndex:
    """
    Immutable lookup from grid cells to a measure's atoms

    Support cells are grouped in buckets of 2^bucket_shift cells per axis,
    about the thickness of a tube; queried cells in empty buckets are dropped
    before the exact key lookup.
    """

    def __init__(self, mu: DiscreteMeasure, bucket_shift: int = 1):
        if mu.support.extent != 1:
            raise PreconditionError("the support index covers measures on the unit cube only")
        self.dim = mu.dim
        self.level = mu.level
        self.bucket_shift = min(bucket_shift, mu.level)
        self.weights = mu.weights
        self.keys = mu.support.keys()
        coarse = mu.support.cells >> self.bucket_shift
        self.bucket_keys = np.unique(self._ravel(coarse, self.level - self.bucket_shift))

    def _ravel(self, cells: np.ndarray, level: int) -> np.ndarray:
        if not len(cells):
            return np.zeros(0, dtype=np.int64)
        return np.ravel_multi_index(tuple(cells.T), (1 << level,) * self.dim)

    @staticmethod
    def _members(sorted_keys: np.ndarray, queries: np.ndarray) -> np.ndarray:
        if not len(sorted_keys):
            return np.zeros(len(queries), dtype=bool)
        position = np.minimum(np.searchsorted(sorted_keys, queries), len(sorted_keys) - 1)
        return sorted_keys[position] == queries

    def locate(self, cells: np.ndarray) -> np.ndarray:
        """Indices of the atoms sitting in the given cells"""
        if not len(cells):
            return np.zeros(0, dtype=np.int64)
        buckets = self._ravel(cells >> self.bucket_shift, self.level - self.bucket_shift)
        cells = cells[self._members(self.bucket_keys, buckets)]
        keys = self._ravel(cells, self.level)
        hit = self._members(self.keys, keys)
        return np.searchsorted(self.keys, keys[hit])

    def mass(self, cells: np.ndarray) -> float:
        return math.fsum(self.weights[self.locate(cells)])


def _require_levels(mu: DiscreteMeasure, fam: AffineFamily):
    if len(fam) and mu.dim != fam.d:
        raise PreconditionError(f"measure lives in R^{mu.dim}, planes in R^{fam.d}")
    if mu.level != fam.level:
        raise PreconditionError(f"level mismatch: measure {mu.level}, family {fam.level}")


def incidence_mass(mu: DiscreteMeasure, fam: AffineFamily) -> float:
    """Σ_P weight(P)·μ(tube around P)"""
    _require_levels(mu, fam)
    if not len(fam):
        return 0.0
    start_time = time.time()
    index = SupportIndex(mu)
    masses = ordered_map(lambda member: index.mass(rasterize_tube(member, fam.level).cells), fam.members)
    total = math.fsum(weight * mass for weight, mass in zip(fam.weights, masses))
    logger.debug("Rasterized %d tubes in %.2fs", len(fam), time.time() - start_time)
    return total


def incidence_mass_bruteforce(mu: DiscreteMeasure, fam: AffineFamily) -> float:
    """The same sum with every plane tested against every atom"""
    _require_levels(mu, fam)
    centers = mu.centers()
    masses = []
    for member in fam.members:
        inside = _within_tube(member.point_distances(centers), fam.delta)
        masses.append(math.fsum(mu.weights[inside]))
    return math.fsum(weight * mass for weight, mass in zip(fam.weights, masses))


def greedy_net(fam: AffineFamily, radius: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Greedy radius-net of the members in the affine metric

    Members are visited in lexicographic order; each joins the nearest
    existing center closer than `radius` or becomes a new center.

    Returns:
        (center indices in creation order, center index assigned to every member)
    """
    if radius <= 0:
        raise PreconditionError(f"radius must be > 0, got {radius}")
    count = len(fam)
    assignment = np.full(count, -1, dtype=np.int64)
    if not count:
        return np.zeros(0, dtype=np.int64), assignment

    characteristics = fam.characteristics
    centers = np.empty(count, dtype=np.int64)
    used = 0
    # A center closer than `radius` has its offset closer than `radius`, so it
    # sits in one of the 3^d offset buckets around the member
    keys = np.floor(fam.offsets / radius).astype(np.int64)
    shifts = list(itertools.product((-1, 0, 1), repeat=fam.d))
    buckets = defaultdict(list)
    for index in fam.lexicographic_order():
        key = keys[index]
        ranks = []
        for shift in shifts:
            ranks.extend(buckets.get(tuple(int(a + b) for a, b in zip(key, shift)), ()))
        if ranks:
            ranks.sort()
            chosen = centers[ranks]
            tail = None if characteristics is None else characteristics[chosen]
            gaps = metric_to_many(fam.members[index].plane, fam.projectors[chosen], tail)
            gaps = gaps + np.linalg.norm(fam.offsets[chosen] - fam.offsets[index], axis=1)
            nearest = int(np.argmin(gaps))
            if gaps[nearest] < radius:
                assignment[index] = chosen[nearest]
                continue
        centers[used] = index
        assignment[index] = index
        buckets[tuple(int(v) for v in key)].append(used)
        used += 1
    return centers[:used].copy(), assignment


def merge_family(fam: AffineFamily, radius: float) -> AffineFamily:
    """Keep one member (with its own weight) per greedy net cell"""
    centers, _ = greedy_net(fam, radius)
    return fam.subset(np.sort(centers))


def neighborhood_weight(fam: AffineFamily, radius: float = None) -> float:
    """λ(𝒩_δ(𝒜)): the weight of the family once members within δ are merged"""
    radius = fam.delta if radius is None else radius
    if not len(fam):
        return 0.0
    return merge_family(fam, radius).total_weight


def incidence_exponent_general(d: int, k: int, s: float, sigma: float, alpha: float) -> float:
    """p = 2 + (s + σ − (k+1)(d−k)) / (d − α)"""
    threshold = (k + 1) * (d - k)
    if s + sigma < threshold:
        raise PreconditionError(f"s + sigma > {threshold} is required, got s + sigma = {s + sigma:g}")
    if not 0 < alpha < d:
        raise PreconditionError(f"incidence exponent needs 0 < alpha < {d}, got alpha={alpha}")
    return 2.0 + (s + sigma - threshold) / (d - alpha)


def incidence_exponent_fubini(d: int, k: int, s: float, sigma: float, alpha: float) -> float:
    """p = 2 + (s + σ − (k+1)(d−k)) / (d − k − α)"""
    threshold = (k + 1) * (d - k)
    if s + sigma < threshold:
        raise PreconditionError(f"s + sigma > {threshold} is required, got s + sigma = {s + sigma:g}")
    if not 0 < alpha < d - k:
        raise PreconditionError(f"Fubini incidence exponent needs 0 < alpha < {d - k}, got alpha={alpha}")
    return 2.0 + (s + sigma - threshold) / (d - k - alpha)


def conjugate(p: float) -> float:
    return p / (p - 1.0)


def check_incidence_bound(mu: Union[DiscreteMeasure, FubiniMeasure], fam: AffineFamily,
                          s: float, sigma: float, alpha: float, variant: str = 'general') -> BoundReport:
    """
    μ×λ(I_δ(E,𝒜)) against I_s(μ)^(1/p)·A^((p−2)/p)·λ(𝒩_δ(𝒜))^(1/p')·δ^(d−k)

    The fubini variant evaluates the incidence mass of both μ and the slice
    measures stacked over counting measure on supp μ₂, and keeps the larger.
    """
    if not len(fam):
        raise PreconditionError("check_incidence_bound needs a nonempty family")
    d, k = fam.d, fam.k
    measure = mu.assemble() if isinstance(mu, FubiniMeasure) else mu
    extras = {}

    if variant == 'general':
        p = incidence_exponent_general(d, k, s, sigma, alpha)
        lhs = incidence_mass(measure, fam)
        amp = amplitude(measure, alpha)
    elif variant == 'fubini':
        if not isinstance(mu, FubiniMeasure):
            raise PreconditionError("the fubini variant needs a FubiniMeasure")
        if mu.n != d - k:
            raise PreconditionError(f"slices live in R^{mu.n}; tubes of {k}-planes need R^{d - k}")
        failing = sum(not spans_with_fiber(orthogonal_complement(member.plane), k)
                      for member in fam.members)
        if failing:
            raise PreconditionError(f"{failing} members fail span{{W^⊥, {{0}}×R^{k}}} = R^{d}")
        p = incidence_exponent_fubini(d, k, s, sigma, alpha)
        lhs_mu = incidence_mass(measure, fam)
        lhs_slices = incidence_mass(mu.counting_base(), fam)
        extras = {'lhs_mu': lhs_mu, 'lhs_mu1': lhs_slices}
        lhs = max(lhs_mu, lhs_slices)
        amp = fubini_slice_amplitude(mu, alpha)
    else:
        raise PreconditionError(f"variant must be 'general' or 'fubini', got {variant!r}")

    neighborhood = neighborhood_weight(fam)
    rhs = 0.0
    if amp > 0 and neighborhood > 0:
        rhs = (energy(measure, s) ** (1.0 / p)
               * math.exp((p - 2) / p * math.log(amp))
               * neighborhood ** (1.0 / conjugate(p))
               * fam.delta ** (d - k))
    extras['neighborhood_weight'] = neighborhood

    params = dict(d=d, n=k, s=s, sigma=sigma, alpha=alpha, p=p, level=fam.level)
    report = BoundReport(f"incidence_{variant}", lhs, rhs, params, len(fam), extras)
    logger.info("Incidence bound (%s) level %d: ratio %.4g", variant, fam.level, report.ratio)
    return report


def lambda_weight(level: int, d: int, k: int, sigma: float) -> float:
    """λ-mass of one δ-cell of 𝔸(d,k): ν-mass δ^σ times offset volume δ^(d−k)"""
    delta = 2.0 ** -level
    return delta ** (sigma + d - k)


def random_affine_family(d: int, k: int, count: int, level: int, seed: int = 0,
                         sigma: float = None) -> AffineFamily:
    """
    `count` seeded random k-planes through points of the unit cube

    Directions are Haar-random (Gaussian vectors orthonormalized); each member
    carries the λ-weight of one δ-cell for a direction measure of dimension σ.
    """
    if not 1 <= k < d <= 3:
        raise PreconditionError(f"need 1 <= k < d <= 3, got d={d}, k={k}")
    sigma = float(grassmann_dimension(d, k)) if sigma is None else sigma
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    members = []
    for _ in range(count):
        plane = Subspace.from_vectors(rng.standard_normal((d, k)))
        members.append(AffinePlane.through(rng.random(d), plane))
    weights = np.full(count, lambda_weight(level, d, k, sigma))
    return AffineFamily(tuple(members), weights, level)


def full_line_family(level: int, angular_level: int = None) -> AffineFamily:
    """
    Every line of the plane meeting [0,1]^2 at resolution δ

    Normals at angles iπ/2^angular_level, signed offsets on the δ-grid between
    the extreme values of ⟨normal, corner⟩. Weights are ν(W)·δ with ν uniform.
    """
    angular_level = level if angular_level is None else angular_level
    delta = 2.0 ** -level
    corners = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    angles = np.arange(1 << angular_level) * math.pi / (1 << angular_level)
    nu = 1.0 / len(angles)

    members = []
    for angle in angles:
        normal = np.array([math.cos(angle), math.sin(angle)])
        line = Subspace(np.array([[-normal[1]], [normal[0]]]))
        heights = corners @ normal
        first = math.ceil(heights.min() / delta)
        last = math.floor(heights.max() / delta)
        for step in range(first, last + 1):
            members.append(AffinePlane(line, step * delta * normal))
    weights = np.full(len(members), nu * delta)
    logger.debug("Full line family at level %d: %d lines", level, len(members))
    return AffineFamily(tuple(members), weights, level)


def family_to_text(fam: AffineFamily) -> str:
    """Header `d k count level`; rows are basis entries, offset and weight"""
    d = fam.d if len(fam) else 0
    k = fam.k if len(fam) else 0
    lines = [f"{d} {k} {len(fam)} {fam.level}"]
    for member, weight in zip(fam.members, fam.weights):
        values = np.concatenate([member.plane.basis.ravel(), member.offset, [weight]])
        lines.append(' '.join(f"{value:.17g}" for value in values))
    return '\n'.join(lines) + '\n'


def family_from_text(text: str) -> AffineFamily:
    lines = [line for line in text.splitlines() if line.strip()]
    header = lines[0].split() if lines else []
    if len(header) != 4:
        raise PreconditionError("line 1: expected `d k count level`")
    d, k, count, level = (int(value) for value in header)
    if len(lines) - 1 != count:
        raise PreconditionError(f"expected {count} member rows, got {len(lines) - 1}")

    members, weights = [], []
    for number, line in enumerate(lines[1:], start=2):
        values = np.asarray([float(v) for v in line.split()])
        if len(values) != d * k + d + 1:
            raise PreconditionError(f"line {number}: expected {d * k + d + 1} numbers")
        plane = Subspace(values[:d * k].reshape(d, k))
        members.append(AffinePlane(plane, values[d * k:d * k + d]))
        weights.append(values[-1])
    return AffineFamily(tuple(members), np.asarray(weights), level)


def write_family(path: Union[str, Path], fam: AffineFamily):
    Path(path).write_text(family_to_text(fam), encoding='utf-8')


def read_family(path: Union[str, Path]) -> AffineFamily:
    return family_from_text(Path(path).read_text(encoding='utf-8'))
