"""Tests for subspaces, affine planes, their metrics and direction families."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from src.errors import PreconditionError
from src.generators import cantor_set
from src.grassmann import (AffinePlane, DirectionFamily, Subspace, affine_metric, angle_measure,
                           direction_frostman_constant, family_from_text, family_to_text,
                           grassmann_metric, metric_to_many, orthogonal_complement, project_point,
                           sample_directions, spans_with_fiber, transversal_subfamily)
from src.measure_lab import frostman_constant


def line(angle):
    return Subspace([[math.cos(angle)], [math.sin(angle)]])


@st.composite
def random_subspaces(draw, d, n):
    seed = draw(st.integers(0, 2 ** 31 - 1))
    rng = np.random.default_rng(seed)
    return Subspace.from_vectors(rng.normal(size=(d, n)))


class TestSubspace:
    def test_rejects_non_orthonormal_basis(self):
        with pytest.raises(PreconditionError):
            Subspace([[1.0], [1.0]])

    def test_from_vectors_keeps_orientation(self):
        plane = Subspace.from_vectors([[2.0], [0.0], [0.0]])
        np.testing.assert_allclose(plane.basis[:, 0], [1.0, 0.0, 0.0])

    def test_dependent_vectors_rejected(self):
        with pytest.raises(PreconditionError):
            Subspace.from_vectors([[1.0, 2.0], [1.0, 2.0], [0.0, 0.0]])

    def test_complement_is_orthogonal(self):
        plane = Subspace.from_vectors([[1.0, 0.0], [1.0, 1.0], [0.0, 2.0]])
        complement = orthogonal_complement(plane)
        assert complement.dim_plane == 1
        np.testing.assert_allclose(plane.basis.T @ complement.basis, 0.0, atol=1e-12)

    def test_projection_coordinates(self):
        np.testing.assert_allclose(project_point(line(0.0), [[0.3, 0.9]]), [[0.3]])


class TestMetrics:
    def test_perpendicular_lines(self):
        assert grassmann_metric(line(0.0), line(math.pi / 2)) == pytest.approx(1.0)

    def test_thirty_degrees(self):
        assert grassmann_metric(line(0.0), line(math.pi / 6)) == pytest.approx(0.5)

    def test_same_line(self):
        assert grassmann_metric(line(0.4), line(0.4)) == pytest.approx(0.0, abs=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(PreconditionError):
            grassmann_metric(line(0.0), Subspace([[1.0], [0.0], [0.0]]))

    @pytest.mark.parametrize("d,n", [(2, 1), (3, 1), (3, 2)])
    def test_closed_form_matches_spectral_norm(self, d, n):
        rng = np.random.default_rng(d * 10 + n)
        planes = [Subspace.from_vectors(rng.normal(size=(d, n))) for _ in range(12)]
        projectors = np.stack([plane.projector for plane in planes])
        characteristics = np.stack([plane.characteristic for plane in planes])
        for plane in planes:
            fast = metric_to_many(plane, projectors, characteristics)
            slow = [grassmann_metric(plane, other) for other in planes]
            np.testing.assert_allclose(fast, slow, atol=1e-9)

    @given(random_subspaces(3, 2), random_subspaces(3, 2), random_subspaces(3, 2))
    @settings(max_examples=40, deadline=None)
    def test_triangle_inequality(self, a, b, c):
        assert grassmann_metric(a, c) <= grassmann_metric(a, b) + grassmann_metric(b, c) + 1e-12

    def test_affine_metric(self):
        p = AffinePlane(line(0.0), [0.0, 0.25])
        q = AffinePlane(line(0.0), [0.0, 0.75])
        assert affine_metric(p, q) == pytest.approx(0.5)
        assert affine_metric(p, p) == 0.0


class TestAffinePlane:
    def test_through_point_contains_it(self):
        plane = Subspace.from_vectors([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
        affine = AffinePlane.through([0.2, 0.7, 0.4], plane)
        assert affine.point_distances(np.array([[0.2, 0.7, 0.4]]))[0] == pytest.approx(0.0, abs=1e-12)
        np.testing.assert_allclose(plane.basis.T @ affine.offset, 0.0, atol=1e-12)

    def test_offset_must_be_orthogonal(self):
        with pytest.raises(PreconditionError):
            AffinePlane(line(0.0), [0.3, 0.2])

    def test_point_distances(self):
        horizontal = AffinePlane(line(0.0), [0.0, 0.5])
        distances = horizontal.point_distances(np.array([[0.1, 0.5], [0.9, 0.2], [0.4, 1.0]]))
        np.testing.assert_allclose(distances, [0.0, 0.3, 0.5], atol=1e-15)

    def test_distances_independent_of_batching(self):
        rng = np.random.default_rng(2)
        affine = AffinePlane.through([0.3, 0.4], line(1.1))
        points = rng.random((50, 2))
        batched = affine.point_distances(points)
        single = np.concatenate([affine.point_distances(points[i:i + 1]) for i in range(50)])
        np.testing.assert_array_equal(batched, single)


class TestTransversality:
    def test_horizontal_line_spans_with_vertical_fiber(self):
        assert spans_with_fiber(line(0.0), 1)

    def test_vertical_line_does_not(self):
        assert not spans_with_fiber(line(math.pi / 2), 1)

    def test_transversal_subfamily_renormalizes(self):
        fam = sample_directions(2, 1, 'full', 4)
        kept = transversal_subfamily(fam, 1)
        assert len(kept) == len(fam) - 1
        assert math.fsum(kept.nu_weights) == pytest.approx(1.0)


class TestDirectionFamilies:
    @pytest.mark.parametrize("d,n,sigma", [(2, 1, 1.0), (3, 1, 2.0), (3, 2, 2.0)])
    def test_full_family_sigma(self, d, n, sigma):
        fam = sample_directions(d, n, 'full', 4)
        assert fam.sigma == sigma
        assert (fam.d, fam.n) == (d, n)
        assert math.fsum(fam.nu_weights) == pytest.approx(1.0)

    def test_planar_full_family_size(self):
        assert len(sample_directions(2, 1, 'full', 5)) == 32

    def test_unit_normals_for_planes(self):
        fam = sample_directions(3, 2, 'full', 4)
        for member in fam.members:
            assert member.dim_plane == 2
            assert np.linalg.norm(member.characteristic) == pytest.approx(1.0)

    def test_cantor_family(self):
        fam = sample_directions(2, 1, 'cantor(0.5)', 8, seed=4)
        assert len(fam) == cantor_set(8, 0.5, 4).cell_count
        assert fam.sigma == 0.5

    def test_cantor_family_only_in_plane(self):
        with pytest.raises(PreconditionError):
            sample_directions(3, 1, ('cantor', 0.5), 6)

    def test_unknown_direction_kind(self):
        with pytest.raises(PreconditionError):
            sample_directions(2, 1, 'spiral', 6)

    def test_duplicate_members_rejected(self):
        with pytest.raises(PreconditionError):
            DirectionFamily((line(0.2), line(0.2)), [0.5, 0.5], 1.0, 6)

    def test_weights_must_sum_to_one(self):
        with pytest.raises(PreconditionError):
            DirectionFamily((line(0.2), line(1.2)), [0.5, 0.6], 1.0, 6)

    def test_uniform_family_is_one_dimensional(self):
        assert direction_frostman_constant(sample_directions(2, 1, 'full', 8), 1.0) <= 2.5

    def test_cantor_angles_audit(self):
        fam = sample_directions(2, 1, 'cantor(0.5)', 10, seed=1)
        assert frostman_constant(angle_measure(fam), 0.45) <= 8.0

    def test_text_round_trip(self):
        fam = sample_directions(3, 2, 'full', 3)
        again = family_from_text(family_to_text(fam))
        assert len(again) == len(fam)
        assert again.sigma == fam.sigma
        np.testing.assert_array_equal(again.projectors, fam.projectors)


SHAPES = [(2, 1), (3, 1), (3, 2)]


@st.composite
def affine_planes(draw, d, n):
    seed = draw(st.integers(0, 2 ** 31 - 1))
    rng = np.random.default_rng(seed)
    return AffinePlane.through(rng.random(d), Subspace.from_vectors(rng.normal(size=(d, n))))


class TestMetricProperties:
    def test_quarter_turn_example(self):
        assert grassmann_metric(line(0.0), line(math.pi / 4)) == pytest.approx(1 / math.sqrt(2))
        gaps = metric_to_many(line(0.0), line(math.pi / 4).projector[None],
                              line(math.pi / 4).characteristic[None])
        assert gaps[0] == pytest.approx(1 / math.sqrt(2))

    @pytest.mark.parametrize("d,n", SHAPES)
    def test_distance_to_itself_vanishes(self, d, n):
        rng = np.random.default_rng(7 * d + n)
        for _ in range(50):
            plane = Subspace.from_vectors(rng.normal(size=(d, n)))
            gap = metric_to_many(plane, plane.projector[None], plane.characteristic[None])[0]
            assert gap < 1e-12

    def test_opposite_vectors_span_one_line(self):
        gap = metric_to_many(line(0.3), line(0.3 + math.pi).projector[None],
                             line(0.3 + math.pi).characteristic[None])[0]
        assert gap < 1e-12

    @given(affine_planes(3, 1), affine_planes(3, 1), affine_planes(3, 1))
    @settings(max_examples=40, deadline=None)
    def test_affine_triangle_inequality(self, p, q, r):
        assert affine_metric(p, r) <= affine_metric(p, q) + affine_metric(q, r) + 1e-12

    @pytest.mark.parametrize("d,n", SHAPES)
    def test_close_planes_contain_each_other_in_neighborhoods(self, d, n):
        rng = np.random.default_rng(d + 5 * n)
        for _ in range(20):
            base = rng.random(d)
            vectors = rng.normal(size=(d, n))
            p = AffinePlane.through(base, Subspace.from_vectors(vectors))
            nudge = 1e-2 * rng.normal(size=(d, n))
            q = AffinePlane.through(base + 1e-2 * rng.normal(size=d), Subspace.from_vectors(vectors + nudge))
            gap = affine_metric(p, q)
            # Points of p inside the unit cube
            points = np.vstack([base, base + rng.uniform(-2, 2, size=(400, n)) @ p.plane.basis.T])
            inside = points[np.all((points >= 0) & (points <= 1), axis=1)]
            assert len(inside)
            assert q.point_distances(inside).max() <= (1 + math.sqrt(d)) * gap + 1e-12

    @given(random_subspaces(3, 2), st.lists(st.floats(-5, 5), min_size=6, max_size=6))
    def test_projection_is_one_lipschitz(self, plane, coords):
        x, y = np.array(coords[:3]), np.array(coords[3:])
        shrunk = np.linalg.norm(project_point(plane, x) - project_point(plane, y))
        assert shrunk <= np.linalg.norm(x - y) + 1e-12


class TestSeparation:
    def test_near_duplicates_rejected(self):
        with pytest.raises(PreconditionError):
            DirectionFamily((line(0.2), line(0.2 + 1e-4)), [0.5, 0.5], 1.0, 6)

    def test_opposite_vectors_rejected(self):
        with pytest.raises(PreconditionError):
            DirectionFamily((line(0.2), line(0.2 + math.pi)), [0.5, 0.5], 1.0, 6)

    def test_opposite_normals_rejected(self):
        up = Subspace.from_vectors([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
        down = Subspace.from_vectors([[0.0, 1.0], [1.0, 0.0], [0.0, 0.0]])
        with pytest.raises(PreconditionError):
            DirectionFamily((up, down), [0.5, 0.5], 2.0, 4)

    @given(st.lists(st.floats(0.0, math.pi, exclude_max=True), min_size=2, max_size=8))
    @settings(max_examples=60, deadline=None)
    def test_matches_all_pairs(self, angles):
        members = tuple(line(angle) for angle in angles)
        closest = min(grassmann_metric(a, b) for i, a in enumerate(members) for b in members[i + 1:])
        weights = np.full(len(members), 1.0 / len(members))
        if closest <= 2.0 ** -5 - 1e-9:
            with pytest.raises(PreconditionError):
                DirectionFamily(members, weights, 1.0, 4)
        elif closest > 2.0 ** -5 + 1e-9:
            assert len(DirectionFamily(members, weights, 1.0, 4)) == len(members)

    @pytest.mark.parametrize("d,n", SHAPES)
    def test_sampled_families_pass(self, d, n):
        assert len(sample_directions(d, n, 'full', 6)) > 1
