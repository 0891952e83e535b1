"""
Frostlab Furstenberg Module
Dual Furstenberg families built from projections, and their dimension bounds

This module provides:
- dual_furstenberg_example: {V + π_{V^⊥}(x) : V ∈ 𝒱, x ∈ E}, merged at scale δ
- affine_box_dimension: greedy net counts in the affine metric across scales
- furstenberg_lower_bound (general and product-split forms), the full-σ
  closed forms, and the conjectured planar upper bound min{t+s, (3t+s)/2, t+1}
- projection_upper_bound: dim 𝒱 + max_V dim π_{V^⊥}E measured on the grid
- incidence_profile: point/plane bipartite graph with per-point fiber sizes
- Parallel and point pencils

Members are n-planes: each pair (V, x) gives the translate of V through x,
stored as V + u with u = π_{V^⊥}(x).
"""

import logging
import math
import time
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from .errors import FrostlabError, PreconditionError
from .generators import cantor_set, product_set
from .grassmann import (AffinePlane, DirectionFamily, Subspace, metric_to_many,
                        orthogonal_complement, sample_directions)
from .grid_core import DeltaSet, DimensionFit, box_dimension, fit_dimension
from .incidence import AffineFamily, greedy_net, merge_family
from .measure_lab import uniform_measure
from .parallel import ordered_map
from .projector import project

logger = logging.getLogger(__name__)

FURSTENBERG_COLUMNS = ('d', 'k', 's', 't', 'sigma', 'measured_dim',
                       'lower_bound', 'upper_bound', 'levels')

# Pre-merge containment tolerance of the (V, x) planes
CONTAINMENT_TOLERANCE = 1e-10


def dual_furstenberg_members(delta_set: DeltaSet, dirs: DirectionFamily) -> AffineFamily:
    """Every plane V + π_{V^⊥}(x), before merging; weights ν(V)·δ^(d−n)"""
    if not len(delta_set) or not len(dirs):
        raise PreconditionError("dual_furstenberg_example needs a nonempty set and direction family")
    if delta_set.dim != dirs.d:
        raise PreconditionError(f"set lives in R^{delta_set.dim}, directions in G({dirs.d},{dirs.n})")
    centers = delta_set.centers()
    cell_volume = delta_set.delta ** (dirs.d - dirs.n)

    def through_all(member: Subspace):
        planes = [AffinePlane.through(x, member) for x in centers]
        worst = max(float(plane.point_distances(x[None, :])[0]) for plane, x in zip(planes, centers))
        if worst > CONTAINMENT_TOLERANCE:
            raise FrostlabError(f"constructed plane misses its source point by {worst:.2e}")
        return planes

    planes = ordered_map(through_all, dirs.members)
    members, weights = [], []
    for weight, group in zip(dirs.nu_weights, planes):
        members.extend(group)
        weights.extend([weight * cell_volume] * len(group))
    return AffineFamily(tuple(members), np.asarray(weights), delta_set.level)


def dual_furstenberg_example(delta_set: DeltaSet, dirs: DirectionFamily) -> AffineFamily:
    """The dual Furstenberg family of E and 𝒱, with members within δ merged"""
    start_time = time.time()
    members = dual_furstenberg_members(delta_set, dirs)
    merged = merge_family(members, delta_set.delta)
    logger.info("Built dual Furstenberg family: %d pairs, %d after merging in %.2fs",
                len(members), len(merged), time.time() - start_time)
    return merged


def affine_box_dimension(fam: AffineFamily, min_level: int, max_level: int) -> DimensionFit:
    """Slope of log2 greedy-net counts at radii 2^-ℓ, ℓ = min_level..max_level"""
    if len(fam) < 2:
        raise PreconditionError("affine_box_dimension needs at least two members")
    levels = list(range(min_level, max_level + 1))
    if len(levels) < 3:
        raise PreconditionError(f"affine_box_dimension needs at least 3 levels, got {len(levels)}")
    counts = [len(greedy_net(fam, 2.0 ** -level)[0]) for level in levels]
    logger.debug("Net counts %s at levels %s", counts, levels)
    return fit_dimension(levels, counts)


def _net_count(dirs: DirectionFamily, radius: float) -> int:
    centers = []
    for index, member in enumerate(dirs.members):
        if centers:
            tail = None if dirs.characteristics is None else dirs.characteristics[centers]
            if metric_to_many(member, dirs.projectors[centers], tail).min() < radius:
                continue
        centers.append(index)
    return len(centers)


def direction_box_dimension(dirs: DirectionFamily, min_level: int, max_level: int) -> DimensionFit:
    """Box dimension of the direction set in the Grassmann metric"""
    levels = list(range(min_level, max_level + 1))
    return fit_dimension(levels, [_net_count(dirs, 2.0 ** -level) for level in levels])


def _admissible_denominator(value: float, label: str):
    if value <= 0:
        raise PreconditionError(f"{label} must be positive, got {value:g}")


def furstenberg_lower_bound(d: int, k: int, s: float, t: float, sigma: float,
                            product_split: Optional[Tuple[float, float]] = None,
                            strict: bool = False) -> float:
    """
    Lower bound for the dimension of a dual (s,t)-Furstenberg family

    General form: t + (d−k) − (d−s)(σ−t) / (d + σ − (k+1)(d−k)).
    With E = E₁ × E₂ of dimensions (s₁, s₂):
    t + (d−k) − (d−k−s₁)(σ−t) / (d−k + s₂ + σ − (k+1)(d−k)).

    The hypothesis s > (k+1)(d−k) − σ is enforced when `strict` is set and
    otherwise only logged, so the formulas can be tabulated outside it.
    """
    threshold = (k + 1) * (d - k) - sigma
    if not s > threshold:
        message = f"s > (k+1)(d−k) − sigma = {threshold:g} is required, got s = {s:g}"
        if strict:
            raise PreconditionError(message)
        logger.warning("Lower bound outside its hypothesis: %s", message)

    if product_split is None:
        denominator = d + sigma - (k + 1) * (d - k)
        _admissible_denominator(denominator, "d + sigma − (k+1)(d−k)")
        return t + (d - k) - (d - s) * (sigma - t) / denominator

    s1, s2 = product_split
    if abs(s1 + s2 - s) > 1e-12:
        raise PreconditionError(f"product_split must sum to s = {s:g}, got {s1 + s2:g}")
    denominator = d - k + s2 + sigma - (k + 1) * (d - k)
    _admissible_denominator(denominator, "d − k + s2 + sigma − (k+1)(d−k)")
    return t + (d - k) - (d - k - s1) * (sigma - t) / denominator


def lower_bound_full_sigma(d: int, k: int, s: float, t: float,
                           product_split: Optional[Tuple[float, float]] = None) -> float:
    """The lower bound with σ = k(d−k), the full Grassmannian"""
    return furstenberg_lower_bound(d, k, s, t, float(k * (d - k)), product_split)


def conjectured_upper_bound(s: float, t: float) -> float:
    """min{t + s, (3t + s)/2, t + 1}, the expected sharp value in the plane"""
    if not 0 < s <= 2:
        raise PreconditionError(f"s must lie in (0,2], got {s}")
    if not 0 < t <= 1:
        raise PreconditionError(f"t must lie in (0,1], got {t}")
    return min(t + s, (3 * t + s) / 2, t + 1)


def projection_upper_bound(delta_set: DeltaSet, dirs: DirectionFamily,
                           min_level: int, max_level: int) -> float:
    """dim 𝒱 + max over V of the box dimension of π_{V^⊥}E, both measured"""
    directions = direction_box_dimension(dirs, min_level, max_level).slope
    mu = uniform_measure(delta_set)

    def projected_dimension(member: Subspace) -> float:
        image = project(mu, orthogonal_complement(member)).histogram.support
        if image.cell_count < 2:
            return 0.0
        return box_dimension(image, min_level, max_level).slope

    return directions + max(ordered_map(projected_dimension, dirs.members))


@dataclass
class IncidenceProfile:
    """Bipartite point/plane incidences of a family at scale δ"""
    graph: nx.Graph
    fiber_sizes: np.ndarray
    components: int

    @property
    def min_fiber(self) -> int:
        return int(self.fiber_sizes.min()) if len(self.fiber_sizes) else 0

    def fiber_dimension(self, level: int) -> float:
        """log2(min fiber size)/level: the t for which every point lies on ≳ δ^-t planes"""
        if self.min_fiber <= 0:
            return 0.0
        return math.log2(self.min_fiber) / level


def incidence_profile(delta_set: DeltaSet, fam: AffineFamily) -> IncidenceProfile:
    """Connect each cell of E to every member whose δ-tube contains its center"""
    graph = nx.Graph()
    centers = delta_set.centers()
    points = [('point', index) for index in range(len(centers))]
    planes = [('plane', index) for index in range(len(fam))]
    graph.add_nodes_from(points, bipartite=0)
    graph.add_nodes_from(planes, bipartite=1)

    for index, member in enumerate(fam.members):
        hits = np.flatnonzero(member.point_distances(centers) <= fam.delta)
        graph.add_edges_from((('point', int(hit)), ('plane', index)) for hit in hits)

    fiber_sizes = np.asarray([graph.degree(node) for node in points], dtype=np.int64)
    components = nx.number_connected_components(graph)
    logger.debug("Incidence graph: %d nodes, %d edges, %d components",
                 graph.number_of_nodes(), graph.number_of_edges(), components)
    return IncidenceProfile(graph, fiber_sizes, components)


def parallel_pencil(level: int, angle: float) -> AffineFamily:
    """All lines of direction angle meeting [0,1]^2, offsets on the δ-grid"""
    delta = 2.0 ** -level
    direction = np.array([math.cos(angle), math.sin(angle)])
    normal = np.array([-direction[1], direction[0]])
    line = Subspace(direction.reshape(2, 1))
    heights = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]) @ normal
    steps = range(math.ceil(heights.min() / delta), math.floor(heights.max() / delta) + 1)
    members = tuple(AffinePlane(line, step * delta * normal) for step in steps)
    return AffineFamily(members, np.full(len(members), delta), level)


def point_pencil(point: Sequence[float], dirs: DirectionFamily, level: int) -> AffineFamily:
    """The translates of every direction through one point"""
    members = tuple(AffinePlane.through(point, member) for member in dirs.members)
    delta = 2.0 ** -level
    return AffineFamily(members, dirs.nu_weights * delta ** (dirs.d - dirs.n), level)


@dataclass
class FurstenbergReport:
    d: int
    k: int
    s: float
    t: float
    sigma: float
    measured_dim: float
    lower_bound: float
    upper_bound: float
    levels: Tuple[int, int]
    family_size: int

    @property
    def within_bounds(self) -> bool:
        return self.lower_bound - 0.15 <= self.measured_dim <= self.upper_bound + 0.15

    def csv_row(self) -> Dict[str, object]:
        return dict(d=self.d, k=self.k, s=self.s, t=self.t, sigma=self.sigma,
                    measured_dim=self.measured_dim, lower_bound=self.lower_bound,
                    upper_bound=self.upper_bound, levels=f"{self.levels[0]}..{self.levels[1]}")


def run_furstenberg(level: int, s: float, t: float, sigma: float, seed: int = 0,
                    span: int = 4) -> FurstenbergReport:
    """
    Planar sandwich experiment

    E is a product of two Cantor sets of dimension s/2, 𝒱 a Cantor angle
    family of dimension t; the merged family is measured over levels
    level−span..level and compared with the lower and conjectured upper bounds.
    """
    if not 0 < s <= 2:
        raise PreconditionError(f"s must lie in (0,2], got {s}")
    points = product_set(cantor_set(level, s / 2, seed), cantor_set(level, s / 2, seed + 1))
    dirs = sample_directions(2, 1, ('cantor', t), level, seed + 2)
    fam = dual_furstenberg_example(points, dirs)
    levels = (level - span, level)
    fit = affine_box_dimension(fam, *levels)
    return FurstenbergReport(2, 1, s, t, sigma, fit.slope,
                             furstenberg_lower_bound(2, 1, s, t, sigma),
                             conjectured_upper_bound(s, t), levels, len(fam))
