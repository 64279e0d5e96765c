import numpy as np
import pytest

from pdc import (
    Auto2D, ContractViolation, FitConfig, PERIODIC, SlotIndexer, TimeSeries,
    evaluate_cost, fit, generate, plan_rotation_step, randomize_bases,
    regress_dynamics, rotation_derivatives,
)
from oracles import (
    analytic_regression_gradients, dense_regression_oracle,
    fd_rotation_derivatives, random_instance, shifted_model, slot_profile,
)


class TestPlanRotationStep:
    def test_quadratic_inside_clamp(self):
        assert plan_rotation_step(0.2, 2.0, 0.5) == pytest.approx(-0.1)

    def test_clamped(self):
        assert plan_rotation_step(4.0, 2.0, 0.5) == -0.5
        assert plan_rotation_step(-4.0, 2.0, 0.5) == 0.5

    def test_negative_curvature_fallback(self):
        g, eps = 1.5, 0.5
        expected = -eps / np.sqrt(eps ** 2 + g ** 2) * g
        assert plan_rotation_step(g, -1.0, eps) == pytest.approx(expected)
        assert plan_rotation_step(g, 0.0, eps) == pytest.approx(expected)

    def test_stationary_point(self):
        assert plan_rotation_step(0.0, 3.0, 0.5) == 0.0
        assert plan_rotation_step(0.0, -3.0, 0.5) == 0.0

    def test_fallback_bounded(self):
        for g in (1e-6, 0.1, 5.0, 1e6):
            assert abs(plan_rotation_step(g, -1.0, 0.5)) <= 0.5

    def test_rejects_bad_eps(self):
        with pytest.raises(ContractViolation):
            plan_rotation_step(1.0, 1.0, 0.0)


class TestRotationDerivatives:
    @pytest.mark.parametrize("seed", range(5))
    def test_matches_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        n, m, r = 5, 2, int(rng.integers(1, 4))
        series, model = random_instance(rng, n, m, r, 30)
        k = int(rng.integers(m))
        h = int(rng.integers(n - m))
        w = rng.standard_normal(30)
        g, H = rotation_derivatives(series, model, k, h, w)
        w_slot = slot_profile(model, series, w)
        g_fd, H_fd = fd_rotation_derivatives(model, series, k, h, w_slot)
        assert g == pytest.approx(g_fd, rel=1e-6)
        assert H == pytest.approx(H_fd, rel=1e-4)

    def test_index_bounds(self):
        rng = np.random.default_rng(0)
        series, model = random_instance(rng, 4, 2, 1, 20)
        with pytest.raises(ContractViolation):
            rotation_derivatives(series, model, 2, 0, np.ones(20))
        with pytest.raises(ContractViolation):
            rotation_derivatives(series, model, 0, 2, np.ones(20))

    def test_weight_length_checked(self):
        rng = np.random.default_rng(1)
        series, model = random_instance(rng, 4, 2, 1, 20)
        with pytest.raises(ContractViolation):
            rotation_derivatives(series, model, 0, 0, np.ones(19))


class TestRegressDynamics:
    @pytest.mark.parametrize("seed", range(5))
    def test_matches_dense_oracle(self, seed):
        rng = np.random.default_rng(100 + seed)
        r = int(rng.integers(1, 4))
        series, model = random_instance(rng, 5, 2, r, 40)
        w = 0.5 + rng.random(40)
        B, d, v = regress_dynamics(series, model, w)
        Bo, do, vo = dense_regression_oracle(model, series, w)
        np.testing.assert_allclose(B, Bo, atol=1e-9)
        np.testing.assert_allclose(d, do, atol=1e-9)
        np.testing.assert_allclose(v, vo, atol=1e-9)

    @pytest.mark.parametrize("seed", range(5))
    def test_gradients_vanish_after_update(self, seed):
        rng = np.random.default_rng(200 + seed)
        r = int(rng.integers(1, 4))
        series, model = random_instance(rng, 5, 2, r, 40)
        w = 0.5 + rng.random(40)
        inc = regress_dynamics(series, model, w)
        w_slot = slot_profile(model, series, w)
        updated = shifted_model(model, inc, w_slot)
        gB, gd, gv = analytic_regression_gradients(updated, series, w)
        scale = max(1.0, float(np.abs(updated.A).max()))
        assert np.abs(gB).max() < 1e-8 * scale
        assert np.abs(gd).max() < 1e-8 * scale
        assert np.abs(gv).max() < 1e-8 * scale

    def test_update_reduces_cost(self):
        rng = np.random.default_rng(7)
        series, model = random_instance(rng, 4, 1, 2, 50)
        w = np.ones(50)
        inc = regress_dynamics(series, model, w)
        updated = shifted_model(model, inc, slot_profile(model, series, w))
        assert evaluate_cost(updated, series)[0] <= evaluate_cost(model, series)[0]


class TestRandomizeBases:
    def test_cost_invariant(self):
        rng = np.random.default_rng(9)
        series, model = random_instance(rng, 5, 2, 2, 30)
        for _ in range(5):
            scrambled = randomize_bases(model, rng)
            np.testing.assert_allclose(
                evaluate_cost(scrambled, series)[0],
                evaluate_cost(model, series)[0], rtol=1e-10)

    def test_changes_representation(self):
        rng = np.random.default_rng(10)
        series, model = random_instance(rng, 5, 2, 1, 30)
        scrambled = randomize_bases(model, rng)
        assert not np.allclose(scrambled.Q, model.Q)


class TestFit:
    def test_deterministic(self):
        series, _, _ = generate(Auto2D(N=200, seed=0))
        cfg = FitConfig(m=1, k_tot=60, seed=11)
        m1, r1 = fit(series, cfg)
        m2, r2 = fit(series, cfg)
        np.testing.assert_array_equal(m1.Q, m2.Q)
        np.testing.assert_array_equal(m1.A, m2.A)
        np.testing.assert_array_equal(r1.cost_trace, r2.cost_trace)
        assert r1.final_cost == r2.final_cost

    def test_monotone_accepted_trace(self):
        series, _, _ = generate(Auto2D(N=300, seed=1))
        _, report = fit(series, FitConfig(m=1, k_tot=150, seed=2))
        accepted_costs = report.cost_trace[report.accepted]
        assert np.all(np.diff(accepted_costs) <= 0.0)

    def test_full_trace_non_increasing(self):
        series, _, _ = generate(Auto2D(N=300, seed=1))
        _, report = fit(series, FitConfig(m=1, k_tot=150, seed=3))
        assert np.all(np.diff(report.cost_trace) <= 0.0)

    def test_final_cost_matches_evaluate(self):
        series, _, _ = generate(Auto2D(N=200, seed=4))
        model, report = fit(series, FitConfig(m=1, k_tot=50, seed=5))
        assert report.final_cost == evaluate_cost(model, series)[1]

    def test_periodic_slots(self):
        from pdc import Seasonal2D
        series, _, _ = generate(Seasonal2D(N=240, seed=0))
        model, report = fit(series, FitConfig(
            m=1, slots=SlotIndexer(PERIODIC, 12), k_tot=80, seed=0))
        assert model.n_slots == 12
        assert np.all(np.diff(report.cost_trace[report.accepted]) <= 0.0)

    def test_uncovered_slots_rejected(self):
        series = TimeSeries(np.random.default_rng(0).standard_normal((3, 8)))
        with pytest.raises(ContractViolation):
            fit(series, FitConfig(m=1, slots=SlotIndexer(PERIODIC, 20), k_tot=5))

    def test_m_bounds(self):
        series = TimeSeries(np.random.default_rng(0).standard_normal((3, 30)))
        with pytest.raises(ContractViolation):
            fit(series, FitConfig(m=3, k_tot=5))

    def test_r_bounds(self):
        series = TimeSeries(np.random.default_rng(0).standard_normal((3, 10)))
        with pytest.raises(ContractViolation):
            fit(series, FitConfig(m=1, r=10, k_tot=5))

    def test_exogenous_track_profiles(self):
        rng = np.random.default_rng(3)
        Z = rng.standard_normal((3, 120))
        series = TimeSeries(Z, exogenous={"u": np.linspace(-1, 1, 120)})
        from pdc.trials import CONSTANT, TREND_SIGMOID
        model, report = fit(series, FitConfig(
            m=1, k_tot=40, seed=0, s_track="u",
            mix={CONSTANT: 0.5, TREND_SIGMOID: 0.5}))
        assert report.steps <= 40

    def test_missing_track_rejected(self):
        series = TimeSeries(np.random.default_rng(0).standard_normal((3, 30)))
        with pytest.raises(ContractViolation):
            fit(series, FitConfig(m=1, k_tot=5, s_track="nope"))

    def test_early_stop(self):
        series, _, _ = generate(Auto2D(N=150, seed=6))
        _, report = fit(series, FitConfig(
            m=1, k_tot=4000, seed=7, stop_tol=1e-3, stop_window=10, restarts=0))
        assert report.steps < 4000

    def test_config_validation(self):
        with pytest.raises(ContractViolation):
            FitConfig(m=0)
        with pytest.raises(ContractViolation):
            FitConfig(m=1, eps_theta=2.0)
        with pytest.raises(ContractViolation):
            FitConfig(m=1, ridge=-1.0)
        with pytest.raises(ContractViolation):
            FitConfig(m=1, restarts=-1)
