"""Tests for pushforwards, L^p norms and the projection bound checks."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from src.errors import PreconditionError
from src.generators import cantor_set
from src.grassmann import Subspace, sample_directions, transversal_subfamily
from src.grid_core import DeltaSet
from src.measure_lab import (DiscreteMeasure, coarsen_measure, energy, lebesgue_measure, marginal,
                             product_measure, uniform_measure)
from src.projector import (REPORT_COLUMNS, BoundReport, Pushforward, check_l2_classical,
                           check_projection_bound, coarsen_pushforward, exponent_fubini,
                           exponent_general, lp_norm_p, project)

X_AXIS = Subspace([[1.0], [0.0]])


def histogram_pushforward(level, weights):
    """A pushforward whose histogram occupies the first cells of a unit window"""
    cells = np.arange(len(weights)).reshape(-1, 1)
    return Pushforward(X_AXIS, DiscreteMeasure(DeltaSet(1, level, cells), weights), 0)


@pytest.fixture(scope='module')
def product_cantor():
    first = uniform_measure(cantor_set(6, 0.6, 1))
    second = uniform_measure(cantor_set(6, 0.6, 2))
    return product_measure(first, second)


class TestExponents:
    def test_general(self):
        assert exponent_general(2, 1, 1.5, 1.0, 1.5) == pytest.approx(3.0)
        assert exponent_general(2, 1, 1.25, 1.0, 1.0) == pytest.approx(2.25)

    def test_fubini(self):
        assert exponent_fubini(2, 1, 1.5, 1.0, 0.25) == pytest.approx(8 / 3)

    def test_threshold_gives_two(self):
        assert exponent_general(2, 1, 1.0, 1.0, 1.0) == 2.0

    def test_below_threshold_rejected(self):
        with pytest.raises(PreconditionError):
            exponent_general(2, 1, 0.5, 0.5, 1.0)

    def test_alpha_range(self):
        with pytest.raises(PreconditionError):
            exponent_general(2, 1, 1.5, 1.0, 2.0)
        with pytest.raises(PreconditionError):
            exponent_fubini(2, 1, 1.5, 1.0, 1.0)

    @given(st.floats(1.05, 2.0), st.floats(0.05, 0.95))
    @settings(max_examples=50)
    def test_fubini_exponent_is_larger(self, s, alpha):
        assert exponent_fubini(2, 1, s, 1.0, alpha) >= exponent_general(2, 1, s, 1.0, alpha)


class TestLpNorm:
    def test_two_cell_histogram(self):
        pf = histogram_pushforward(2, [0.25, 0.75])
        assert lp_norm_p(pf, 2.0) == pytest.approx(math.sqrt(2.5))

    def test_point_mass(self):
        pf = histogram_pushforward(5, [1.0])
        assert lp_norm_p(pf, 3.0) == pytest.approx(2.0 ** (5 * (1 - 1 / 3)))

    def test_uniform_density(self):
        pf = project(uniform_measure(DeltaSet.full(2, 6)), X_AXIS)
        for p in (1.5, 2.0, 3.0):
            assert lp_norm_p(pf, p) == pytest.approx(1.0, abs=1e-12)

    def test_p_below_one_rejected(self):
        with pytest.raises(PreconditionError):
            lp_norm_p(histogram_pushforward(2, [1.0]), 0.5)

    @given(st.lists(st.floats(0.01, 1.0), min_size=16, max_size=16), st.floats(1.0, 3.0), st.floats(0.0, 2.0))
    @settings(max_examples=50)
    def test_norm_grows_with_p_on_unit_window(self, raw, p, gap):
        weights = np.asarray(raw) / math.fsum(raw)
        pf = histogram_pushforward(4, weights)
        assert lp_norm_p(pf, p) <= lp_norm_p(pf, p + gap) * (1 + 1e-12)


class TestProject:
    def test_axis_projection_is_marginal(self, product_cantor):
        assembled = product_cantor.assemble()
        pf = project(assembled, X_AXIS)
        expected = marginal(assembled, [0])
        np.testing.assert_array_equal(pf.origin_cells(), expected.support.cells)
        np.testing.assert_allclose(pf.histogram.weights, expected.weights, rtol=1e-12)

    @given(st.floats(0.0, math.pi))
    @settings(max_examples=30, deadline=None)
    def test_mass_is_conserved(self, angle):
        mu = uniform_measure(cantor_set(8, 0.5, 5))
        direction = Subspace([[math.cos(angle)], [math.sin(angle)]])
        planar = product_measure(mu, mu).assemble()
        assert project(planar, direction).total_mass == pytest.approx(planar.total_mass)

    def test_diagonal_reassignment(self):
        mu = lebesgue_measure(DeltaSet.full(2, 5))
        c = s = math.cos(math.pi / 4)
        direction = Subspace([[c], [s]])
        pf = project(mu, direction)

        size = 1 << mu.level
        expected = {}
        for (i, j), weight in zip(mu.support.cells, mu.weights):
            x, y = (i + 0.5) / size, (j + 0.5) / size
            cell = math.floor((x * c + y * s + 2) * size)
            expected[cell] = expected.get(cell, 0.0) + weight
        observed = dict(zip(pf.histogram.support.cells[:, 0].tolist(), pf.histogram.weights))
        assert observed.keys() == expected.keys()
        for cell, weight in expected.items():
            assert observed[cell] == pytest.approx(weight, rel=1e-12)

    def test_coarsening_commutes_for_axis_directions(self):
        mu = uniform_measure(DeltaSet.from_cells(2, 7, np.random.default_rng(3).integers(0, 128, (300, 2))))
        for direction in (X_AXIS, Subspace([[0.0], [1.0]])):
            left = coarsen_pushforward(project(mu, direction), 5)
            right = project(coarsen_measure(mu, 5), direction)
            assert left.histogram.support == right.histogram.support
            np.testing.assert_allclose(left.histogram.weights, right.histogram.weights, rtol=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(PreconditionError):
            project(uniform_measure(DeltaSet.full(1, 3)), X_AXIS)


class TestBoundChecks:
    def test_report_columns(self):
        report = BoundReport('projection_general', 1.0, 2.0, dict(d=2, n=1, s=1.0, sigma=1.0,
                                                                  alpha=1.0, p=2.0, level=4), 3)
        assert tuple(report.csv_row()) == REPORT_COLUMNS
        assert report.ratio == 0.5

    def test_zero_rhs_ratio(self):
        assert BoundReport('x', 0.0, 0.0, {}, 0).ratio == 0.0
        assert BoundReport('x', 1.0, 0.0, {}, 0).ratio == math.inf

    def test_point_mass_general(self):
        atom = DiscreteMeasure(DeltaSet(2, 5, [[10, 20]]), [1.0])
        report = check_projection_bound(atom, sample_directions(2, 1, 'full', 5), 1.5, 1.5)
        assert report.lhs > 0 and report.rhs > 0
        assert math.isfinite(report.ratio)
        assert report.params['p'] == pytest.approx(3.0)

    def test_general_on_product(self, product_cantor):
        fam = sample_directions(2, 1, 'full', 6)
        report = check_projection_bound(product_cantor, fam, 1.1, 1.1)
        assert report.check == 'projection_general'
        assert report.family_size == 64
        assert 0 < report.ratio < 100

    def test_fubini_needs_transversal_directions(self, product_cantor):
        fam = sample_directions(2, 1, 'full', 6)
        with pytest.raises(PreconditionError):
            check_projection_bound(product_cantor, fam, 1.1, 0.5, 'fubini')
        report = check_projection_bound(product_cantor, transversal_subfamily(fam, 1), 1.1, 0.5, 'fubini')
        assert report.check == 'projection_fubini'
        assert report.params['p'] == pytest.approx(2.2)

    def test_fubini_needs_fubini_measure(self, product_cantor):
        fam = transversal_subfamily(sample_directions(2, 1, 'full', 6), 1)
        with pytest.raises(PreconditionError):
            check_projection_bound(product_cantor.assemble(), fam, 1.1, 0.5, 'fubini')

    def test_unknown_variant(self, product_cantor):
        with pytest.raises(PreconditionError):
            check_projection_bound(product_cantor, sample_directions(2, 1, 'full', 6), 1.1, 1.1, 'mixed')

    def test_l2_classical_rhs_is_energy(self, product_cantor):
        fam = sample_directions(2, 1, 'full', 6)
        report = check_l2_classical(product_cantor, fam)
        assert report.params['s'] == 1.0
        assert report.rhs == pytest.approx(energy(product_cantor.assemble(), 1.0))


@pytest.mark.slow
class TestMultiScale:
    def test_l2_ratio_stays_in_window(self):
        ratios = []
        for level in range(6, 11):
            mu = product_measure(uniform_measure(cantor_set(level, 0.6, 1)),
                                 uniform_measure(cantor_set(level, 0.6, 2)))
            ratios.append(check_l2_classical(mu, sample_directions(2, 1, 'full', level)).ratio)
        assert max(ratios) / min(ratios) <= 4.0

    def test_projection_ratio_grows_slowly(self):
        ratios = []
        for level in range(6, 11):
            mu = product_measure(uniform_measure(cantor_set(level, 0.6, 1)),
                                 uniform_measure(cantor_set(level, 0.6, 2)))
            fam = sample_directions(2, 1, 'full', level)
            ratios.append(check_projection_bound(mu, fam, 1.1, 1.1).ratio)
        assert all(b / a <= 1.5 for a, b in zip(ratios, ratios[1:]))
