"""
Frostlab Grassmann Module
Subspaces, affine planes and discrete direction families

This module provides:
- Subspace: V ∈ G(d,n) stored by a column-orthonormal basis
- AffinePlane: W + u ∈ 𝔸(d,k) with u ∈ W^⊥
- The metrics ‖π_W − π_W'‖ on G(d,n) and ‖π_W − π_W'‖ + |u − u'| on 𝔸(d,k)
- DirectionFamily: finitely many subspaces carrying the ν-weights of λ_{d,k,ν}
- Direction sampling: uniform nets (σ = dim G) and Cantor angle families in the plane
- Frostman audits of ν in the Grassmann metric and a text format

Supported shapes are (d,n) ∈ {(2,1), (3,1), (3,2)}. In all of them a plane is
determined by one unit vector (its direction when n = 1, its normal when
n = d−1), and the Grassmann metric between two planes is the sine of the angle
between those vectors.
"""

import itertools
import logging
import math
import re
from collections import defaultdict
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from .errors import PreconditionError
from .measure_lab import DiscreteMeasure

logger = logging.getLogger(__name__)

SUPPORTED_SHAPES = ((2, 1), (3, 1), (3, 2))
ORTHONORMAL_TOLERANCE = 1e-10
SPAN_THRESHOLD = 1e-8


@dataclass(frozen=True, eq=False)
class Subspace:
    """An n-dimensional linear subspace of R^d (basis is d×n, orthonormal columns)"""
    basis: np.ndarray

    def __post_init__(self):
        basis = np.array(self.basis, dtype=np.float64)
        if basis.ndim == 1:
            basis = basis.reshape(-1, 1)
        d, n = basis.shape
        if not 1 <= n <= d:
            raise PreconditionError(f"basis must be d×n with 1 <= n <= d, got {basis.shape}")
        gram_error = np.max(np.abs(basis.T @ basis - np.eye(n)))
        if gram_error > ORTHONORMAL_TOLERANCE:
            raise PreconditionError(f"basis columns are not orthonormal (error {gram_error:.2e})")
        basis.setflags(write=False)
        object.__setattr__(self, 'basis', basis)

    @classmethod
    def from_vectors(cls, vectors) -> 'Subspace':
        """Orthonormalize the columns of a d×n matrix (or a single vector)"""
        matrix = np.asarray(vectors, dtype=np.float64)
        if matrix.ndim == 1:
            matrix = matrix.reshape(-1, 1)
        q, r = np.linalg.qr(matrix)
        if np.min(np.abs(np.diag(r))) < 1e-12:
            raise PreconditionError("vectors are linearly dependent")
        # Keep the orientation of the input vectors
        return cls(q * np.sign(np.diag(r)))

    @property
    def dim_ambient(self) -> int:
        return self.basis.shape[0]

    @property
    def dim_plane(self) -> int:
        return self.basis.shape[1]

    @cached_property
    def projector(self) -> np.ndarray:
        return self.basis @ self.basis.T

    @cached_property
    def characteristic(self) -> Optional[np.ndarray]:
        """Unit direction (n = 1) or unit normal (n = d−1) determining the plane"""
        d, n = self.basis.shape
        if n == 1:
            return self.basis[:, 0]
        if n == d - 1:
            return orthogonal_complement(self).basis[:, 0]
        return None


def orthogonal_complement(plane: Subspace) -> Subspace:
    """V^⊥ as a Subspace"""
    d, n = plane.basis.shape
    if n == d:
        raise PreconditionError("the whole space has no nonzero orthogonal complement")
    u, singular, _ = np.linalg.svd(np.eye(d) - plane.projector)
    return Subspace(u[:, :d - n])


@dataclass(frozen=True, eq=False)
class AffinePlane:
    """The affine k-plane W + u, u ⊥ W"""
    plane: Subspace
    offset: np.ndarray

    def __post_init__(self):
        offset = np.array(self.offset, dtype=np.float64).reshape(-1)
        if len(offset) != self.plane.dim_ambient:
            raise PreconditionError(f"offset must have length {self.plane.dim_ambient}")
        if not np.all(np.isfinite(offset)):
            raise PreconditionError("offset must be finite")
        along = np.linalg.norm(self.plane.basis.T @ offset)
        if along > ORTHONORMAL_TOLERANCE * max(1.0, np.linalg.norm(offset)):
            raise PreconditionError(f"offset is not orthogonal to the plane (component {along:.2e})")
        offset.setflags(write=False)
        object.__setattr__(self, 'offset', offset)

    @classmethod
    def through(cls, point, plane: Subspace) -> 'AffinePlane':
        """The translate of `plane` passing through `point`"""
        point = np.asarray(point, dtype=np.float64)
        offset = point - plane.projector @ point
        # Clean the tiny along-plane residue left by rounding
        offset = offset - plane.projector @ offset
        return cls(plane, offset)

    @property
    def dim_ambient(self) -> int:
        return self.plane.dim_ambient

    @property
    def k(self) -> int:
        return self.plane.dim_plane

    @cached_property
    def normal_basis(self) -> np.ndarray:
        """d×(d−k) orthonormal basis of W^⊥"""
        return orthogonal_complement(self.plane).basis

    @cached_property
    def normal_offset(self) -> np.ndarray:
        """Coordinates of u in the normal basis"""
        return self.normal_basis.T @ self.offset

    def point_distances(self, points: np.ndarray) -> np.ndarray:
        """
        Euclidean distances from points (N×d) to the plane

        Evaluated with an explicit, fixed operation order so every point's
        distance is the same float no matter how the points are batched.
        """
        points = np.asarray(points, dtype=np.float64)
        normals = self.normal_basis
        d, m = normals.shape
        total = np.zeros(len(points))
        for b in range(m):
            coordinate = np.full(len(points), -self.normal_offset[b])
            for a in range(d):
                coordinate = coordinate + points[:, a] * normals[a, b]
            total = total + coordinate * coordinate
        return np.sqrt(total)

    def descriptor(self) -> np.ndarray:
        """Projector entries followed by the offset; used for lexicographic member order"""
        return np.concatenate([self.plane.projector.ravel(), self.offset])


def _require_same_shape(a: Subspace, b: Subspace):
    if a.basis.shape != b.basis.shape:
        raise PreconditionError(f"shape mismatch: G{a.basis.shape} vs G{b.basis.shape}")


def grassmann_metric(v: Subspace, vp: Subspace) -> float:
    """Operator norm ‖π_V − π_V'‖ of the difference of orthogonal projectors"""
    _require_same_shape(v, vp)
    return float(np.linalg.norm(v.projector - vp.projector, 2))


def affine_metric(p: AffinePlane, pp: AffinePlane) -> float:
    """‖π_W − π_W'‖ + |u − u'|"""
    _require_same_shape(p.plane, pp.plane)
    return grassmann_metric(p.plane, pp.plane) + float(np.linalg.norm(p.offset - pp.offset))


def metric_to_many(plane: Subspace, projectors: np.ndarray,
                   characteristics: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Grassmann distances from one plane to a stack of planes

    With characteristic unit vectors available (every supported shape), the
    distance is the sine of the angle between v and v', taken as the length of
    the residual v' − ⟨v, v'⟩v; otherwise the spectral norm is taken.
    """
    if characteristics is not None and plane.characteristic is not None:
        # Equal planes give a residual at rounding level
        cosines = characteristics @ plane.characteristic
        residuals = characteristics - cosines[:, None] * plane.characteristic[None, :]
        return np.minimum(np.linalg.norm(residuals, axis=1), 1.0)
    return np.linalg.norm(projectors - plane.projector, ord=2, axis=(1, 2))


def project_point(v: Subspace, x) -> np.ndarray:
    """Coordinates of π_V(x) in the frame of V (works row-wise on N×d input)"""
    x = np.asarray(x, dtype=np.float64)
    return x @ v.basis


def spans_with_fiber(v: Subspace, fiber_dim: int) -> bool:
    """Whether span{V, {0}×R^fiber_dim} = R^d (smallest singular value test)"""
    d = v.dim_ambient
    if v.dim_plane + fiber_dim != d:
        raise PreconditionError(f"dim V + fiber_dim must equal {d}")
    fiber = np.eye(d)[:, d - fiber_dim:]
    matrix = np.hstack([v.basis, fiber])
    return bool(np.linalg.svd(matrix, compute_uv=False).min() > SPAN_THRESHOLD)


@dataclass(frozen=True, eq=False)
class DirectionFamily:
    """Finitely many planes of one shape (d,n) with ν-weights summing to 1"""
    members: Tuple[Subspace, ...]
    nu_weights: np.ndarray
    sigma: float
    angular_level: int

    def __post_init__(self):
        members = tuple(self.members)
        if not members:
            raise PreconditionError("a direction family needs at least one member")
        shape = members[0].basis.shape
        if any(member.basis.shape != shape for member in members):
            raise PreconditionError("all members must share one (d,n)")

        weights = np.array(self.nu_weights, dtype=np.float64).reshape(-1)
        if len(weights) != len(members):
            raise PreconditionError(f"expected {len(members)} weights, got {len(weights)}")
        if np.any(weights < 0) or abs(math.fsum(weights) - 1.0) > 1e-12:
            raise PreconditionError("nu_weights must be non-negative and sum to 1")
        weights.setflags(write=False)
        object.__setattr__(self, 'members', members)
        object.__setattr__(self, 'nu_weights', weights)

        self._check_separation(2.0 ** -(self.angular_level + 1))

    def _check_separation(self, separation: float):
        """Reject two members within `separation`; candidates come from a bucket grid"""
        characteristics = self.characteristics
        if characteristics is None:
            for index, member in enumerate(self.members[:-1]):
                gaps = metric_to_many(member, self.projectors[index + 1:])
                if gaps.min() <= separation:
                    raise PreconditionError(
                        f"members are not distinct at resolution 2^-{self.angular_level}")
            return

        # sin∠(v, v') <= r puts v' within √2·r of +v or of −v
        cell = math.sqrt(2.0) * separation
        keys = np.floor(characteristics / cell).astype(np.int64)
        flipped = np.floor(-characteristics / cell).astype(np.int64)
        shifts = list(itertools.product((-1, 0, 1), repeat=self.d))
        buckets = defaultdict(list)
        for index, member in enumerate(self.members):
            near = []
            for key in (keys[index], flipped[index]):
                for shift in shifts:
                    near.extend(buckets.get(tuple(int(a + b) for a, b in zip(key, shift)), ()))
            if near:
                near = np.unique(near)
                if metric_to_many(member, self.projectors[near], characteristics[near]).min() <= separation:
                    raise PreconditionError(
                        f"members are not distinct at resolution 2^-{self.angular_level}")
            buckets[tuple(int(v) for v in keys[index])].append(index)

    @property
    def d(self) -> int:
        return self.members[0].dim_ambient

    @property
    def n(self) -> int:
        return self.members[0].dim_plane

    def __len__(self) -> int:
        return len(self.members)

    @cached_property
    def projectors(self) -> np.ndarray:
        return np.stack([member.projector for member in self.members])

    @cached_property
    def characteristics(self) -> Optional[np.ndarray]:
        vectors = [member.characteristic for member in self.members]
        if any(vector is None for vector in vectors):
            return None
        return np.stack(vectors)


def transversal_subfamily(fam: DirectionFamily, fiber_dim: int) -> DirectionFamily:
    """Members V with span{V, {0}×R^fiber_dim} = R^d, ν renormalized on them"""
    keep = [index for index, member in enumerate(fam.members) if spans_with_fiber(member, fiber_dim)]
    if not keep:
        raise PreconditionError("no direction is transversal to the fiber")
    if len(keep) < len(fam):
        logger.info("Dropped %d directions not transversal to the fiber", len(fam) - len(keep))
    weights = fam.nu_weights[keep]
    return DirectionFamily(tuple(fam.members[i] for i in keep), weights / math.fsum(weights),
                           fam.sigma, fam.angular_level)


def grassmann_dimension(d: int, n: int) -> int:
    return n * (d - n)


def _parse_direction_spec(spec: Union[str, Sequence]) -> Tuple[str, Optional[float]]:
    """'full', 'cantor(0.5)' or ('cantor', 0.5)"""
    if isinstance(spec, str):
        text = spec.strip().lower()
        if text == 'full':
            return 'full', None
        match = re.fullmatch(r'cantor\(\s*([0-9.eE+-]+)\s*\)', text)
        if match:
            return 'cantor', float(match.group(1))
    elif len(spec) == 2 and str(spec[0]).lower() == 'cantor':
        return 'cantor', float(spec[1])
    raise PreconditionError(f"unknown direction spec {spec!r}; use 'full' or 'cantor(sigma)'")


def _sphere_net(angular_level: int) -> np.ndarray:
    """
    Unit vectors on the upper hemisphere, one per line through the origin

    Latitude bands of width (π/2)/2^(L−1); each band carries azimuths spaced by
    roughly π/2^L of arc, so neighbouring lines are about π·2^-L apart.
    """
    bands = 1 << (angular_level - 1)
    spacing = math.pi / (1 << angular_level)
    vectors = []
    for band in range(bands):
        polar = (band + 0.5) * (math.pi / 2) / bands
        count = max(1, int(round(2 * math.pi * math.sin(polar) / spacing)))
        for step in range(count):
            azimuth = 2 * math.pi * step / count
            vectors.append((math.sin(polar) * math.cos(azimuth),
                            math.sin(polar) * math.sin(azimuth),
                            math.cos(polar)))
    return np.asarray(vectors)


def sample_directions(d: int, n: int, spec: Union[str, Sequence], angular_level: int,
                      seed: int = 0) -> DirectionFamily:
    """
    Build a direction family with uniform ν-weights

    Args:
        d, n: shape of G(d,n); one of (2,1), (3,1), (3,2)
        spec: 'full' for a uniform net (σ = dim G(d,n)), or 'cantor(sigma)'
            for planar directions whose angle parameters form a (δ,σ)-set
        angular_level: angular spacing π·2^-angular_level
        seed: seed of the Cantor construction

    Returns:
        DirectionFamily
    """
    if (d, n) not in SUPPORTED_SHAPES:
        raise PreconditionError(f"(d,n) must be one of {SUPPORTED_SHAPES}, got {(d, n)}")
    if angular_level < 3:
        raise PreconditionError(f"angular_level must be >= 3, got {angular_level}")
    kind, sigma = _parse_direction_spec(spec)

    if kind == 'cantor':
        if d != 2:
            raise PreconditionError("Cantor direction families are only available for d = 2")
        from .generators import cantor_set
        indices = cantor_set(angular_level, sigma, seed).cells[:, 0]
        angles = indices * math.pi / (1 << angular_level)
        vectors = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    elif d == 2:
        angles = np.arange(1 << angular_level) * math.pi / (1 << angular_level)
        vectors = np.stack([np.cos(angles), np.sin(angles)], axis=1)
        sigma = float(grassmann_dimension(d, n))
    else:
        vectors = _sphere_net(angular_level)
        sigma = float(grassmann_dimension(d, n))

    if n == 1:
        members = [Subspace(vector.reshape(-1, 1)) for vector in vectors]
    else:
        members = [orthogonal_complement(Subspace(vector.reshape(-1, 1))) for vector in vectors]

    weights = np.full(len(members), 1.0 / len(members))
    logger.debug("Sampled %d directions in G(%d,%d), spec %s", len(members), d, n, kind)
    return DirectionFamily(tuple(members), weights, float(sigma), angular_level)


def direction_frostman_constant(fam: DirectionFamily, exponent: float) -> float:
    """max over members V and radii r ∈ {2^-L, ..., 1} of ν(B(V,r)) / r^exponent (open balls)"""
    if exponent <= 0:
        raise PreconditionError(f"exponent must be > 0, got {exponent}")
    radii = 2.0 ** -np.arange(fam.angular_level, -1, -1)
    worst = 0.0
    for member in fam.members:
        dist = metric_to_many(member, fam.projectors, fam.characteristics)
        for radius in radii:
            mass = math.fsum(fam.nu_weights[dist < radius])
            worst = max(worst, mass / radius ** exponent)
    return worst


def angle_measure(fam: DirectionFamily) -> DiscreteMeasure:
    """ν pushed to the angle parameter θ/π ∈ [0,1) at the family's angular level (d = 2 only)"""
    if fam.d != 2:
        raise PreconditionError("angle parameters exist for d = 2 only")
    vectors = fam.characteristics
    angles = np.mod(np.arctan2(vectors[:, 1], vectors[:, 0]), math.pi)
    size = 1 << fam.angular_level
    cells = np.mod(np.round(angles / math.pi * size).astype(np.int64), size)
    return DiscreteMeasure.from_cells(1, fam.angular_level, cells.reshape(-1, 1), fam.nu_weights)


def family_to_text(fam: DirectionFamily) -> str:
    """Header `d n count sigma angular_level`, then basis entries (row-major) and weight per member"""
    lines = [f"{fam.d} {fam.n} {len(fam)} {fam.sigma!r} {fam.angular_level}"]
    for member, weight in zip(fam.members, fam.nu_weights):
        entries = ' '.join(f"{value:.17g}" for value in member.basis.ravel())
        lines.append(f"{entries} {weight:.17g}")
    return '\n'.join(lines) + '\n'


def family_from_text(text: str) -> DirectionFamily:
    lines = [line for line in text.splitlines() if line.strip()]
    header = lines[0].split() if lines else []
    if len(header) != 5:
        raise PreconditionError("line 1: expected `d n count sigma angular_level`")
    d, n, count = int(header[0]), int(header[1]), int(header[2])
    sigma, angular_level = float(header[3]), int(header[4])
    if len(lines) - 1 != count:
        raise PreconditionError(f"expected {count} member rows, got {len(lines) - 1}")

    members, weights = [], []
    for number, line in enumerate(lines[1:], start=2):
        values = [float(v) for v in line.split()]
        if len(values) != d * n + 1:
            raise PreconditionError(f"line {number}: expected {d * n + 1} numbers")
        members.append(Subspace(np.asarray(values[:-1]).reshape(d, n)))
        weights.append(values[-1])
    return DirectionFamily(tuple(members), np.asarray(weights), sigma, angular_level)


def write_family(path: Union[str, Path], fam: DirectionFamily):
    Path(path).write_text(family_to_text(fam), encoding='utf-8')


def read_family(path: Union[str, Path]) -> DirectionFamily:
    return family_from_text(Path(path).read_text(encoding='utf-8'))
