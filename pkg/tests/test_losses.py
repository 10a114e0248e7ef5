"""Unit tests for the loss abstraction: score functions, their
pseudoinverses, potential wells, and the generic-vs-closed-form parity."""

import numpy as np
import pytest

from minimax_agg import losses as L

ALL_SPECS = L.registry_losses()
ALL_IDS = [s.name for s in ALL_SPECS]

FINITE_SCORE = [s for s in ALL_SPECS if np.isfinite(s.gamma_lo)]


class TestScoreFunction:
    @pytest.mark.parametrize("spec", ALL_SPECS, ids=ALL_IDS)
    def test_score_is_increasing(self, spec):
        """Gamma(g) = l_minus(g) - l_plus(g) increases on (-1, 1)."""
        g = np.linspace(-0.999, 0.999, 301)
        vals = L.score(spec, g)
        assert np.all(np.diff(vals) > 0)

    @pytest.mark.parametrize("spec", ALL_SPECS, ids=ALL_IDS)
    def test_score_endpoints_match_stored_bounds(self, spec):
        assert L.score(spec, -1.0) == spec.gamma_lo
        assert L.score(spec, 1.0) == spec.gamma_hi

    def test_score_rejects_out_of_domain(self):
        with pytest.raises(ValueError):
            L.score(L.get_loss("square"), 1.5)


class TestScoreInverse:
    @pytest.mark.parametrize("spec", ALL_SPECS, ids=ALL_IDS)
    def test_round_trip_on_interior(self, spec):
        """Gamma(Gamma^-1(m)) == m wherever Gamma is invertible."""
        lo = spec.gamma_lo if np.isfinite(spec.gamma_lo) else -8.0
        hi = spec.gamma_hi if np.isfinite(spec.gamma_hi) else 8.0
        m = np.linspace(lo + 1e-6, hi - 1e-6, 97)
        g = L.score_inverse(spec, m)
        assert np.max(np.abs(L.score(spec, g) - m)) < 1e-8

    @pytest.mark.parametrize("spec", FINITE_SCORE,
                             ids=[s.name for s in FINITE_SCORE])
    def test_clamps_outside_score_range(self, spec):
        assert L.score_inverse(spec, spec.gamma_lo - 5.0) == -1.0
        assert L.score_inverse(spec, spec.gamma_hi + 5.0) == 1.0

    @pytest.mark.parametrize("spec", ALL_SPECS, ids=ALL_IDS)
    def test_scalar_and_vector_paths_agree(self, spec):
        m = np.linspace(-6.0, 6.0, 41)
        vec = L.score_inverse(spec, m)
        sca = np.array([L.score_inverse(spec, float(x)) for x in m])
        np.testing.assert_array_equal(vec, sca)

    def test_nan_margin_rejected(self):
        with pytest.raises(ValueError):
            L.score_inverse(L.get_loss("log"), float("nan"))


class TestPotentialWell:
    @pytest.mark.parametrize("spec", ALL_SPECS, ids=ALL_IDS)
    def test_linear_tails(self, spec):
        """Outside [Gamma(-1), Gamma(1)] the well is exactly linear."""
        if not np.isfinite(spec.gamma_lo):
            pytest.skip("score range covers the whole real line")
        for m0, slope, anchor in [
            (spec.gamma_lo - 1.0, -1.0, spec.gamma_lo - 3.0),
            (spec.gamma_hi + 1.0, 1.0, spec.gamma_hi + 3.0),
        ]:
            v0 = L.potential_well(spec, m0)
            v1 = L.potential_well(spec, anchor)
            assert v1 - v0 == pytest.approx(slope * (anchor - m0), abs=1e-12)

    @pytest.mark.parametrize("spec", ALL_SPECS, ids=ALL_IDS)
    def test_slope_is_bounded_subgradient(self, spec):
        m = np.linspace(-8.0, 8.0, 201)
        s = L.potential_well_slope(spec, m)
        assert np.all(np.abs(s) <= 1.0 + 1e-12)
        # subgradient inequality Psi(y) >= Psi(x) + s(x) (y - x)
        psi = L.potential_well(spec, m)
        gaps = psi[None, :] - (psi[:, None] + s[:, None] * (m[None, :] - m[:, None]))
        assert gaps.min() > -1e-8

    def test_known_values(self):
        assert L.potential_well(L.get_loss("zero_one"), 0.0) == 1.0
        assert L.potential_well(L.get_loss("log"), 0.0) == pytest.approx(
            2.0 * np.log(2.0), abs=1e-12)
        assert L.potential_well(L.get_loss("adaboost"), 0.0) == 2.0
        assert L.potential_well(L.get_loss("square"), 0.0) == 0.5


class TestPredictionMap:
    def test_table_values(self):
        assert L.predict_one(L.get_loss("zero_one"), 0.5) == 0.5
        assert L.predict_one(L.get_loss("zero_one"), 3.0) == 1.0
        assert L.predict_one(L.get_loss("cw:0.25"), 0.0) == 0.5
        assert L.predict_one(L.get_loss("log"), 2.0) == pytest.approx(
            np.tanh(1.0), abs=1e-12)

    @pytest.mark.parametrize("spec", ALL_SPECS, ids=ALL_IDS)
    def test_monotone_and_bounded(self, spec):
        m = np.linspace(-8.0, 8.0, 301)
        g = L.predict_one(spec, m)
        assert np.all(np.diff(g) >= -1e-12)
        assert np.all(np.abs(g) <= 1.0)


class TestExpectedLoss:
    def test_zero_coefficient_drops_infinite_partial(self):
        """A z_j = +1 label never pays the (infinite) wrong-label loss at
        g_j = +1."""
        spec = L.get_loss("log")
        val = L.expected_loss(spec, np.array([1.0]), np.array([1.0]))
        assert val == pytest.approx(np.log(2.0) - np.log(2.0), abs=1e-12)

    def test_matches_direct_average(self):
        spec = L.get_loss("square")
        rng = np.random.default_rng(3)
        z = rng.uniform(-1, 1, 7)
        g = rng.uniform(-1, 1, 7)
        direct = np.mean(0.5 * (1 + z) * spec.partial_plus(g)
                         + 0.5 * (1 - z) * spec.partial_minus(g))
        assert L.expected_loss(spec, z, g) == pytest.approx(direct, abs=1e-12)

    def test_rejects_bad_labels(self):
        with pytest.raises(ValueError):
            L.expected_loss(L.get_loss("square"), np.array([2.0]), np.array([0.0]))


class TestRegistry:
    def test_lookup_and_aliases(self):
        assert L.get_loss("cw").params["c"] == 0.5
        assert L.get_loss("cw:0.1").params["c"] == 0.1
        assert L.get_loss("hinge").gamma_hi == 2.0

    def test_unknown_name_lists_registry(self):
        with pytest.raises(ValueError, match="zero_one"):
            L.get_loss("nope")

    def test_bad_cw_parameter(self):
        with pytest.raises(ValueError):
            L.get_loss("cw:potato")
        with pytest.raises(ValueError):
            L.get_loss("cw:1.5")


class TestTabulatedLoss:
    def test_matches_closed_loss_it_tabulates(self):
        grid = np.linspace(-1.0, 1.0, 41)
        sq = L.get_loss("square")
        tab = L.loss_from_table("sq_tab", grid, sq.partial_minus(grid),
                               sq.partial_plus(grid))
        m = np.linspace(-2.0, 2.0, 101)
        diff = np.abs(L.potential_well(tab, m) - L.potential_well(sq, m))
        assert diff.max() < 1e-3   # interpolation-limited

    def test_rejects_nonmonotone_tables(self):
        grid = np.array([-1.0, 0.0, 1.0])
        with pytest.raises(ValueError):
            L.loss_from_table("bad", grid, [1.0, 0.5, 2.0], [2.0, 1.0, 0.0])
        with pytest.raises(ValueError):
            L.loss_from_table("bad", [-1.0, 0.5], [0.0, 1.0], [1.0, 0.0])
