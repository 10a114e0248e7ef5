"""Unit tests for the slack function, its subgradients, predictions, the
general-loss constraint transform, and the box-LP dual."""

import numpy as np
import pytest
from scipy.optimize import linprog

from minimax_agg import game, losses


def _random_plain(seed, loss="square", n=8, p=3, margin=0.05):
    rng = np.random.default_rng(seed)
    F = rng.uniform(-1, 1, (p, n))
    b = F @ rng.uniform(-1, 1, n) / n - margin
    with pytest.warns(UserWarning):
        return game.make_problem(F, b, losses.get_loss(loss))


class TestProblemConstruction:
    def test_validates_matrix_range(self):
        with pytest.raises(ValueError, match=r"\[-1, 1\]"):
            game.make_problem([[1.5]], [0.1], losses.get_loss("square"))

    def test_general_loss_matrix_may_leave_unit_range(self):
        prob = game.make_problem([[2.0, -2.0]], [0.1],
                                 losses.get_loss("zero_one"),
                                 variant="general_loss")
        assert prob.variant == "general_loss"

    def test_warns_on_unusual_b(self):
        with pytest.warns(UserWarning, match="outside"):
            game.make_problem([[1.0]], [-0.5], losses.get_loss("square"))

    def test_dimension_checks(self):
        spec = losses.get_loss("square")
        with pytest.raises(ValueError, match="length"):
            game.make_problem([[1.0, 0.0]], [0.1, 0.2], spec)
        with pytest.raises(ValueError, match="r length"):
            game.make_problem([[1.0, 0.0]], [0.1], spec,
                              variant="weighted", r=[1.0])

    def test_weighted_requires_weights(self):
        with pytest.raises(ValueError, match="requires r"):
            game.ConstraintSpec(b=np.array([0.1]), variant="weighted")


class TestSlack:
    def test_convex_in_sigma(self):
        prob = _random_plain(0)
        rng = np.random.default_rng(1)
        for _ in range(50):
            s1, s2 = rng.uniform(0, 3, (2, prob.p))
            mid = game.slack(prob, 0.5 * (s1 + s2))
            assert mid <= 0.5 * (game.slack(prob, s1)
                                 + game.slack(prob, s2)) + 1e-9

    def test_lipschitz_envelope(self):
        prob = _random_plain(2)
        bound = game.lipschitz_bound(prob)
        rng = np.random.default_rng(3)
        for _ in range(50):
            s1, s2 = rng.uniform(0, 3, (2, prob.p))
            gap = abs(game.slack(prob, s1) - game.slack(prob, s2))
            assert gap <= bound * np.linalg.norm(s1 - s2) + 1e-9

    def test_rejects_negative_sigma_for_plain(self):
        prob = _random_plain(4)
        with pytest.raises(ValueError, match="nonnegative"):
            game.slack(prob, -np.ones(prob.p))

    def test_value_at_zero_is_well_at_origin(self):
        prob = _random_plain(5, loss="log")
        expected = float(losses.potential_well(prob.loss, 0.0))
        assert game.slack(prob, np.zeros(prob.p)) == pytest.approx(
            expected, abs=1e-12)


class TestWeightedVariant:
    def test_zero_weight_examples_are_dropped(self):
        spec = losses.get_loss("square")
        F = np.array([[0.5, -0.5, 1.0]])
        r = np.array([1.0, 0.0, 1.0])
        with pytest.warns(UserWarning):
            prob = game.make_problem(F, [-0.1], spec, variant="weighted", r=r)
        m, weightless = game.effective_margins(prob, np.array([2.0]))
        assert list(weightless) == [False, True, False]
        assert m[1] == 0.0
        # slack only counts the two weighted examples
        psi = losses.potential_well(spec, np.array([1.0, 2.0]))
        expected = 0.1 * 2.0 + (psi[0] + psi[1]) / 3.0
        assert game.slack(prob, np.array([2.0])) == pytest.approx(expected)

    def test_noise_form_skips_margin_scaling(self):
        spec = losses.get_loss("square")
        F = np.array([[0.5, -0.5]])
        r = np.array([0.5, 0.5])
        with pytest.warns(UserWarning):
            scaled = game.make_problem(F, [-0.1], spec, variant="weighted", r=r)
        with pytest.warns(UserWarning):
            noise = game.make_problem(F, [-0.1], spec, variant="weighted",
                                      r=r, scale_margins=False)
        ms, _ = game.effective_margins(scaled, np.array([1.0]))
        mn, _ = game.effective_margins(noise, np.array([1.0]))
        np.testing.assert_allclose(ms, 2.0 * mn)


class TestPredict:
    def test_analytic_values(self):
        spec = losses.get_loss("zero_one")
        prob = game.make_problem([[1.0, 1.0]], [0.5], spec)
        out = game.predict(prob, np.array([1.0]))
        np.testing.assert_array_equal(out.g, [1.0, 1.0])
        np.testing.assert_array_equal(out.margins, [1.0, 1.0])

    def test_cw_shifted_clip(self):
        spec = losses.get_loss("cw:0.25")
        prob = game.make_problem([[0.0, 0.0]], [0.1], spec)
        out = game.predict(prob, np.array([1.0]))
        np.testing.assert_allclose(out.g, [0.5, 0.5])


class TestGeneralLossTransform:
    def test_zero_one_is_identity_with_shifted_b(self):
        rng = np.random.default_rng(7)
        raw = rng.uniform(-1, 1, (3, 5))
        eps = np.array([0.2, 0.3, 0.1])
        T, b = game.transform_general_loss(raw, eps,
                                           losses.get_loss("zero_one"))
        np.testing.assert_array_equal(T, raw)
        np.testing.assert_allclose(b, 1.0 - 2.0 * eps, atol=1e-15)

    def test_infinite_score_cells_are_located(self):
        raw = np.array([[1.0, 0.0]])
        with pytest.raises(ValueError, match=r"\(0, 0\)"):
            game.transform_general_loss(raw, np.array([0.1]),
                                        losses.get_loss("log"))


class TestDualBoxLP:
    @pytest.mark.parametrize("seed", range(8))
    def test_matches_scipy_linprog(self, seed):
        """The hand-rolled dual agrees with an LP solver on the primal
        max of z @ a / n over the box intersected with F z / n >= b."""
        rng = np.random.default_rng(seed)
        p, n = 2, 5
        F = rng.uniform(-1, 1, (p, n))
        z_true = rng.uniform(-1, 1, n)
        b = F @ z_true / n - 0.05
        a = rng.uniform(-1, 1, n)
        res = linprog(-a / n, A_ub=-F / n, b_ub=-b,
                      bounds=[(-1, 1)] * n, method="highs")
        assert res.status == 0
        dual = game.dual_box_lp(F, b, a)
        assert dual == pytest.approx(-res.fun, abs=1e-6)

    def test_detects_infeasible_primal(self):
        F = np.array([[1.0, 1.0]])
        with pytest.raises(game.InfeasibleProblemError):
            game.dual_box_lp(F, np.array([1.5]), np.array([0.3, -0.2]))


class TestSubgradient:
    def test_uncertainty_l1_term_sign_convention(self):
        spec = losses.get_loss("square")
        F = np.array([[0.5, -0.25]])
        prob = game.make_problem(F, [0.1], spec, variant="uncertainty",
                                 epsilon=0.3)
        g0 = game.slack_subgradient(prob, np.array([0.0]))
        g1 = game.slack_subgradient(prob, np.array([1.0]))
        # at sigma = 0 the L1 term contributes nothing
        assert g1[0] - g0[0] == pytest.approx(
            0.3 + (F[0] @ (losses.potential_well_slope(spec, F[0] * 1.0)
                           - losses.potential_well_slope(spec, F[0] * 0.0))) / 2,
            abs=1e-12)

    def test_example_subgradients_average_to_full(self):
        prob = _random_plain(11)
        s = np.array([0.4, 1.2, 0.1])
        full = game.slack_subgradient(prob, s)
        avg = np.mean([game.example_subgradient(prob, s, j)
                       for j in range(prob.n)], axis=0)
        np.testing.assert_allclose(avg, full, atol=1e-12)
