"""Tests for dual Furstenberg families, their bounds and incidence profiles."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from src.errors import PreconditionError
from src.furstenberg import (FURSTENBERG_COLUMNS, affine_box_dimension, conjectured_upper_bound,
                             dual_furstenberg_example, dual_furstenberg_members,
                             furstenberg_lower_bound, incidence_profile, lower_bound_full_sigma,
                             parallel_pencil, point_pencil, projection_upper_bound,
                             run_furstenberg)
from src.generators import cantor_set, product_set
from src.grassmann import DirectionFamily, Subspace, metric_to_many, sample_directions
from src.grid_core import DeltaSet
from src.incidence import full_line_family


def greedy_count(fam, radius):
    """Plain-loop greedy net over the members in descriptor order"""
    order = sorted(range(len(fam)), key=lambda i: tuple(fam.members[i].descriptor()))
    centers = []
    for index in order:
        member = fam.members[index]
        joined = False
        for center in centers:
            other = fam.members[center]
            gap = metric_to_many(member.plane, other.plane.projector[None],
                                 other.plane.characteristic[None])[0]
            gap += np.linalg.norm(member.offset - other.offset)
            if gap < radius:
                joined = True
                break
        if not joined:
            centers.append(index)
    return len(centers)


class TestLowerBound:
    def test_example_value(self):
        assert furstenberg_lower_bound(2, 1, 0.5, 0.5, 1.0) == pytest.approx(0.75)

    def test_strict_enforces_hypothesis(self):
        with pytest.raises(PreconditionError):
            furstenberg_lower_bound(2, 1, 0.5, 0.5, 1.0, strict=True)

    def test_t_equal_sigma(self):
        assert furstenberg_lower_bound(2, 1, 1.5, 0.8, 0.8) == pytest.approx(1.8)
        assert furstenberg_lower_bound(3, 1, 3.0, 1.5, 1.5) == pytest.approx(3.5)

    def test_product_split_example(self):
        value = furstenberg_lower_bound(2, 1, 0.5, 0.5, 1.0, product_split=(0.25, 0.25))
        assert value == pytest.approx(0.0, abs=1e-12)

    def test_split_must_sum_to_s(self):
        with pytest.raises(PreconditionError):
            furstenberg_lower_bound(2, 1, 1.5, 0.5, 1.0, product_split=(0.5, 0.5))

    def test_full_sigma(self):
        assert lower_bound_full_sigma(2, 1, 1.5, 0.5) == furstenberg_lower_bound(2, 1, 1.5, 0.5, 1.0)

    @given(st.floats(1.0, 1.99), st.floats(0.01, 0.99))
    @settings(max_examples=60)
    def test_product_form_dominates_where_admissible(self, s, t):
        general = furstenberg_lower_bound(2, 1, s, t, 1.0)
        split = furstenberg_lower_bound(2, 1, s, t, 1.0, product_split=(s / 2, s / 2))
        assert split >= general - 1e-12


class TestUpperBound:
    @pytest.mark.parametrize("s,t,expected", [(0.5, 0.5, 1.0), (1.5, 0.5, 1.5), (2.0, 1.0, 2.0),
                                              (0.2, 0.8, 1.0)])
    def test_values(self, s, t, expected):
        assert conjectured_upper_bound(s, t) == pytest.approx(expected)

    @given(st.floats(0.01, 2.0), st.floats(0.01, 1.0))
    def test_never_above_t_plus_one(self, s, t):
        assert conjectured_upper_bound(s, t) <= t + 1

    @given(st.floats(0.01, 1.0), st.floats(0.01, 1.0))
    def test_small_s_gives_sum(self, s, t):
        if s <= t:
            assert conjectured_upper_bound(s, t) == pytest.approx(t + s)

    def test_range(self):
        with pytest.raises(PreconditionError):
            conjectured_upper_bound(0.5, 1.5)


class TestDualFamily:
    def test_single_point_single_direction(self):
        dirs = DirectionFamily((Subspace([[1.0], [0.0]]),), [1.0], 1.0, 4)
        point = DeltaSet(2, 4, [[3, 9]])
        fam = dual_furstenberg_example(point, dirs)
        assert len(fam) == 1
        assert fam.members[0].point_distances(point.centers())[0] == pytest.approx(0.0, abs=1e-12)

    def test_full_square_one_direction(self):
        dirs = DirectionFamily((Subspace([[1.0], [0.0]]),), [1.0], 1.0, 5)
        fam = dual_furstenberg_example(DeltaSet.full(2, 5), dirs)
        assert len(fam) == 32

    def test_every_member_contains_its_source(self):
        points = product_set(cantor_set(6, 0.5, 1), cantor_set(6, 0.5, 2))
        dirs = sample_directions(2, 1, 'cantor(0.5)', 6, seed=3)
        members = dual_furstenberg_members(points, dirs)
        centers = points.centers()
        for index, member in enumerate(members.members):
            source = centers[index % len(centers)]
            assert member.point_distances(source[None, :])[0] <= 1e-10

    def test_merge_matches_plain_greedy(self):
        points = product_set(cantor_set(6, 0.5, 1), cantor_set(6, 0.5, 2))
        dirs = sample_directions(2, 1, 'cantor(0.5)', 6, seed=3)
        members = dual_furstenberg_members(points, dirs)
        merged = dual_furstenberg_example(points, dirs)
        assert len(merged) == greedy_count(members, points.delta)

    def test_weights(self):
        dirs = sample_directions(2, 1, 'full', 4)
        points = DeltaSet(2, 4, [[1, 1], [7, 12]])
        members = dual_furstenberg_members(points, dirs)
        np.testing.assert_allclose(members.weights, 2.0 ** -4 / len(dirs))

    def test_dimension_mismatch(self):
        with pytest.raises(PreconditionError):
            dual_furstenberg_members(DeltaSet.full(3, 2), sample_directions(2, 1, 'full', 3))


class TestDimensions:
    def test_parallel_pencil_is_one_dimensional(self):
        fit = affine_box_dimension(parallel_pencil(8, 0.0), 3, 7)
        assert fit.slope == pytest.approx(1.0, abs=0.1)

    def test_point_pencil_is_one_dimensional(self):
        dirs = sample_directions(2, 1, 'full', 10)
        fit = affine_box_dimension(point_pencil([0.5, 0.5], dirs, 8), 3, 7)
        assert fit.slope == pytest.approx(1.0, abs=0.15)

    def test_projection_upper_bound_of_square(self):
        dirs = DirectionFamily((Subspace([[1.0], [0.0]]),), [1.0], 1.0, 6)
        value = projection_upper_bound(DeltaSet.full(2, 6), dirs, 2, 6)
        assert value == pytest.approx(1.0, abs=0.15)

    def test_needs_members(self):
        pencil = parallel_pencil(4, 0.0)
        with pytest.raises(PreconditionError):
            affine_box_dimension(pencil.subset([0]), 1, 3)


class TestIncidenceProfile:
    def test_every_point_sees_every_direction(self):
        points = DeltaSet.full(2, 3)
        dirs = sample_directions(2, 1, 'full', 3)
        profile = incidence_profile(points, dual_furstenberg_members(points, dirs))
        assert profile.min_fiber >= len(dirs)
        assert profile.fiber_dimension(3) >= 1.0
        assert profile.graph.number_of_nodes() == 64 + 64 * len(dirs)

    def test_single_line_graph(self):
        points = DeltaSet.from_cells(2, 4, [[0, 8], [15, 8], [3, 0]])
        fam = parallel_pencil(4, 0.0).subset([8])
        profile = incidence_profile(points, fam)
        assert profile.fiber_sizes.tolist() == [1, 0, 1]
        assert profile.min_fiber == 0
        assert profile.components == 2


def test_report_row_columns():
    report = run_furstenberg(8, 0.5, 0.5, 1.0, seed=2, span=3)
    assert tuple(report.csv_row()) == FURSTENBERG_COLUMNS
    assert report.levels == (5, 8)
    assert report.lower_bound == pytest.approx(0.75)
    assert report.upper_bound == pytest.approx(1.0)
    assert math.isfinite(report.measured_dim)


@pytest.mark.slow
def test_sandwich_at_level_ten():
    report = run_furstenberg(10, 0.5, 0.5, 1.0, seed=0)
    assert 0.75 - 0.15 <= report.measured_dim <= 1.0 + 0.15


@pytest.mark.slow
def test_full_line_family_is_two_dimensional():
    fit = affine_box_dimension(full_line_family(7, angular_level=10), 3, 5)
    assert 1.8 <= fit.slope <= 2.2
