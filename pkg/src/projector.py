"""
Frostlab Projector Module
Pushforwards under orthogonal projections and the L^p projection bounds

This module provides:
- Pushforward: the histogram of π_V μ on a dyadic range grid
- lp_norm_p: L^p norm of the pushforward density as a step function
- Exponent calculators for the general and the Fubini projection bounds
- check_projection_bound: Σ_V ν(V)‖π_V μ‖_p^p against I_s(μ)·A_α(μ)^(p−2)
- check_l2_classical: Σ_V ν(V)‖π_V μ‖_2^2 against I_{n(d−n+1)−σ}(μ)

Range coordinates are taken in the frame of V and shifted by an integer
chart offset R = ⌈√d⌉, so π_V([0,1]^d) fits in [0, 2R)^n and dyadic
coarsening of the range grid stays aligned.
"""

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Any, Dict, Union

import numpy as np

from .errors import PreconditionError
from .grassmann import DirectionFamily, Subspace, project_point, spans_with_fiber
from .measure_lab import (DiscreteMeasure, FubiniMeasure, amplitude, coarsen_measure,
                          energy, fubini_slice_amplitude)
from .grid_core import DeltaSet
from .parallel import ordered_map

logger = logging.getLogger(__name__)

REPORT_COLUMNS = ('check', 'd', 'n', 's', 'sigma', 'alpha', 'p', 'level',
                  'lhs', 'rhs', 'ratio', 'family_size')


def chart_offset(d: int) -> int:
    return math.ceil(math.sqrt(d))


@dataclass(frozen=True, eq=False)
class Pushforward:
    """π_V μ as a measure on the range grid; cell i covers [iδ − R, (i+1)δ − R)"""
    direction: Subspace
    histogram: DiscreteMeasure
    range_offset: int

    @property
    def level(self) -> int:
        return self.histogram.level

    @property
    def total_mass(self) -> float:
        return self.histogram.total_mass

    def origin_cells(self) -> np.ndarray:
        """Histogram cells translated back to the unshifted grid"""
        return self.histogram.support.cells - (self.range_offset << self.level)


@dataclass
class BoundReport:
    """One bound check: lhs ≲ rhs, with the parameters that produced it"""
    check: str
    lhs: float
    rhs: float
    params: Dict[str, Any]
    family_size: int
    extras: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.lhs < 0 or self.rhs < 0:
            raise PreconditionError(f"bound sides must be non-negative, got {self.lhs}, {self.rhs}")

    @property
    def ratio(self) -> float:
        if self.rhs > 0:
            return self.lhs / self.rhs
        return 0.0 if self.lhs == 0 else math.inf

    def csv_row(self) -> Dict[str, Any]:
        row = {'check': self.check}
        for key in ('d', 'n', 's', 'sigma', 'alpha', 'p', 'level'):
            row[key] = self.params.get(key)
        row.update(lhs=self.lhs, rhs=self.rhs, ratio=self.ratio, family_size=self.family_size)
        return row


def project(mu: DiscreteMeasure, plane: Subspace) -> Pushforward:
    """Deposit each atom's mass in the range cell containing the projection of its center"""
    if mu.dim != plane.dim_ambient:
        raise PreconditionError(f"measure lives in R^{mu.dim}, plane in R^{plane.dim_ambient}")
    offset = chart_offset(mu.dim)
    extent = 2 * offset
    size = extent << mu.level
    n = plane.dim_plane

    coords = project_point(plane, mu.centers()) + offset
    cells = np.clip(np.floor(coords * (1 << mu.level)).astype(np.int64), 0, size - 1)
    if not len(cells):
        empty = DeltaSet(n, mu.level, np.zeros((0, n), dtype=np.int64), extent)
        return Pushforward(plane, DiscreteMeasure(empty, np.zeros(0), is_zero=True), offset)

    keys = np.ravel_multi_index(tuple(cells.T), (size,) * n)
    unique, inverse = np.unique(keys, return_inverse=True)
    merged = np.bincount(inverse.ravel(), weights=mu.weights, minlength=len(unique))
    binned = np.stack(np.unravel_index(unique, (size,) * n), axis=1)

    support = DeltaSet(n, mu.level, binned, extent)
    histogram = DiscreteMeasure(support, merged, is_zero=mu.is_zero or mu.total_mass == 0)
    return Pushforward(plane, histogram, offset)


def coarsen_pushforward(pf: Pushforward, coarse_level: int) -> Pushforward:
    return Pushforward(pf.direction, coarsen_measure(pf.histogram, coarse_level), pf.range_offset)


def _require_p(p: float):
    if p < 1:
        raise PreconditionError(f"p must be >= 1, got {p}")


def lp_integral(pf: Pushforward, p: float) -> float:
    """∫ |density|^p as a step function: Σ (w/δ^n)^p·δ^n"""
    _require_p(p)
    hist = pf.histogram
    volume = hist.delta ** hist.dim
    density = hist.weights / volume
    return math.fsum(np.power(density, p)) * volume


def lp_norm_p(pf: Pushforward, p: float) -> float:
    """L^p norm of the pushforward density"""
    return lp_integral(pf, p) ** (1.0 / p)


def _check_alpha(alpha: float, upper: int, label: str):
    if not 0 < alpha < upper:
        raise PreconditionError(f"{label} needs 0 < alpha < {upper}, got alpha={alpha}")


def _check_dimension_sum(s: float, sigma: float, threshold: float):
    if s + sigma < threshold:
        raise PreconditionError(f"s + sigma > {threshold:g} is required, got s + sigma = {s + sigma:g}")


def exponent_general(d: int, n: int, s: float, sigma: float, alpha: float) -> float:
    """p = 2 + (s + σ − n(d−n+1)) / (d − α)"""
    threshold = n * (d - n + 1)
    _check_dimension_sum(s, sigma, threshold)
    _check_alpha(alpha, d, 'exponent_general')
    return 2.0 + (s + sigma - threshold) / (d - alpha)


def exponent_fubini(d: int, n: int, s: float, sigma: float, alpha: float) -> float:
    """p = 2 + (s + σ − n(d−n+1)) / (n − α)"""
    threshold = n * (d - n + 1)
    _check_dimension_sum(s, sigma, threshold)
    _check_alpha(alpha, n, 'exponent_fubini')
    return 2.0 + (s + sigma - threshold) / (n - alpha)


def _weighted_lp_sum(mu: DiscreteMeasure, fam: DirectionFamily, p: float) -> float:
    """Σ_V ν(V)·‖π_V μ‖_p^p with per-direction work on the pool"""
    start_time = time.time()
    integrals = ordered_map(lambda member: lp_integral(project(mu, member), p), fam.members)
    total = math.fsum(weight * value for weight, value in zip(fam.nu_weights, integrals))
    logger.debug("Projected onto %d directions in %.2fs", len(fam), time.time() - start_time)
    return total


def _require_transversal(fam: DirectionFamily, fiber_dim: int):
    failing = sum(not spans_with_fiber(member, fiber_dim) for member in fam.members)
    if failing:
        raise PreconditionError(
            f"{failing} directions fail span{{V, {{0}}×R^{fiber_dim}}} = R^{fam.d}")


def check_projection_bound(mu: Union[DiscreteMeasure, FubiniMeasure], fam: DirectionFamily,
                           s: float, alpha: float, variant: str = 'general') -> BoundReport:
    """
    Compare Σ_V ν(V)‖π_V μ‖_p^p with I_s(μ)·A^(p−2)

    The general variant uses the amplitude A_α(μ); the fubini variant needs a
    FubiniMeasure with slices in R^n, directions transversal to the fiber
    {0}×R^(d−n), and uses sup over x₂ of A_α(μ₁^{x₂}).
    """
    d, n = fam.d, fam.n
    if variant == 'general':
        measure = mu.assemble() if isinstance(mu, FubiniMeasure) else mu
        p = exponent_general(d, n, s, fam.sigma, alpha)
    elif variant == 'fubini':
        if not isinstance(mu, FubiniMeasure):
            raise PreconditionError("the fubini variant needs a FubiniMeasure")
        if mu.n != n:
            raise PreconditionError(f"slices live in R^{mu.n}, directions in G({d},{n})")
        _require_transversal(fam, d - n)
        measure = mu.assemble()
        p = exponent_fubini(d, n, s, fam.sigma, alpha)
    else:
        raise PreconditionError(f"variant must be 'general' or 'fubini', got {variant!r}")

    if measure.dim != d:
        raise PreconditionError(f"measure lives in R^{measure.dim}, directions in G({d},{n})")

    lhs = _weighted_lp_sum(measure, fam, p)
    if variant == 'general':
        amp = amplitude(measure, alpha)
    else:
        amp = fubini_slice_amplitude(mu, alpha)
    rhs = energy(measure, s) * math.exp((p - 2) * math.log(amp)) if amp > 0 else 0.0

    params = dict(d=d, n=n, s=s, sigma=fam.sigma, alpha=alpha, p=p, level=measure.level)
    report = BoundReport(f"projection_{variant}", lhs, rhs, params, len(fam))
    logger.info("Projection bound (%s) level %d: ratio %.4g", variant, measure.level, report.ratio)
    return report


def check_l2_classical(mu: DiscreteMeasure, fam: DirectionFamily, sigma: float = None) -> BoundReport:
    """Σ_V ν(V)‖π_V μ‖_2^2 against the energy I_{n(d−n+1)−σ}(μ)"""
    d, n = fam.d, fam.n
    sigma = fam.sigma if sigma is None else sigma
    exponent = n * (d - n + 1) - sigma
    if not 0 < exponent < d:
        raise PreconditionError(f"n(d−n+1) − sigma must lie in (0, {d}), got {exponent:g}")
    if isinstance(mu, FubiniMeasure):
        mu = mu.assemble()

    lhs = _weighted_lp_sum(mu, fam, 2.0)
    rhs = energy(mu, exponent)
    params = dict(d=d, n=n, s=exponent, sigma=sigma, alpha=None, p=2.0, level=mu.level)
    report = BoundReport('l2_classical', lhs, rhs, params, len(fam))
    logger.info("Classical L2 bound level %d: ratio %.4g", mu.level, report.ratio)
    return report
