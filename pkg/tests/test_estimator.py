import math
import warnings

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from fbmdelay.ddesolve import DelaySpec, TrendField, crossing_time, simulate_delay_sde, solve_delay_ode
from fbmdelay.errors import ConfigurationError, EdgeError, OutOfRangeError
from fbmdelay.estimator import (
    EstimatorConfig,
    bandwidth_smooth,
    bandwidth_theorem31,
    estimate_trend_at_level,
    estimate_trend_at_time,
    hitting_time,
    parse_bandwidth_rule,
    stieltjes_convolution,
)
from fbmdelay.fbm import SamplePath, TimeGrid, path_supremum, sample_fbm_davies_harte
from fbmdelay.kernels import eval_kernel, make_higher_order_kernel, make_standard_kernel

EPAN = make_standard_kernel("epanechnikov")


def _path(fn, T=2.0, dt=1e-3):
    g = TimeGrid.over(T, dt)
    return SamplePath(g, fn(g.times))


def _manual(bw, tau=0.5, eps=0.0, H=0.7):
    return EstimatorConfig(eps, H, tau, bw)


class TestBandwidth:
    def test_theorem31_boundary(self):
        assert bandwidth_theorem31(0.01, 0.999999999) == pytest.approx(0.1, rel=1e-8)

    @pytest.mark.parametrize("eps,H", [(0.01, 0.5), (0.1, 0.7), (0.0125, 0.3)])
    def test_theorem31_oracle(self, eps, H):
        mpmath.mp.dps = 30
        oracle = mpmath.mpf(eps) ** (1 / (3 - mpmath.mpf(H)))
        assert bandwidth_theorem31(eps, H) == pytest.approx(float(oracle), rel=1e-14)

    def test_reported_values(self):
        assert bandwidth_theorem31(0.01, 0.5) == pytest.approx(0.158489, abs=1e-6)
        assert bandwidth_theorem31(0.1, 0.7) == pytest.approx(0.367466, abs=1e-6)
        assert bandwidth_smooth(0.01, 0.5, 3, 1.0) == pytest.approx(0.359381, abs=1e-6)

    def test_smooth_reduces_to_theorem31(self):
        for eps in (0.3, 0.05, 1e-4):
            assert bandwidth_smooth(eps, 0.6, 1, 1.0) == bandwidth_theorem31(eps, 0.6)

    def test_smooth_oracle(self):
        mpmath.mp.dps = 30
        oracle = mpmath.mpf("0.05") ** (1 / (2 - mpmath.mpf("0.9") + mpmath.mpf("0.5") + 1))
        assert bandwidth_smooth(0.05, 0.9, 2, 0.5) == pytest.approx(float(oracle), rel=1e-14)

    def test_large_epsilon_warns(self):
        with pytest.warns(RuntimeWarning):
            bandwidth_theorem31(1.5, 0.7)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            bandwidth_theorem31(0.5, 0.7)

    def test_config_rules(self):
        c = EstimatorConfig.from_rule(0.05, 0.7, 0.5, "theorem31")
        assert c.bandwidth == 0.05 ** (1 / 2.3)
        c = EstimatorConfig.from_rule(0.05, 0.7, 0.5, "smooth", (3, 1.0))
        assert c.bandwidth == 0.05 ** (1 / 4.3)
        with pytest.raises(ConfigurationError):
            EstimatorConfig(0.05, 0.7, 0.5, 0.3, "theorem31")
        with pytest.raises(ConfigurationError):
            EstimatorConfig(0.0, 0.7, 0.5, 0.3, "theorem31")
        with pytest.raises(ConfigurationError):
            c.check_horizon(2.0)

    def test_parse_rule(self):
        assert parse_bandwidth_rule("theorem31") == ("theorem31", None, None)
        assert parse_bandwidth_rule({"smooth": {"k": 3, "beta": 1}}) == ("smooth", (3, 1.0), None)
        assert parse_bandwidth_rule({"manual": 0.2}) == ("manual", None, 0.2)
        with pytest.raises(ConfigurationError):
            parse_bandwidth_rule("silverman")


class TestHittingTime:
    def test_noiseless_unit_trend(self):
        x = solve_delay_ode(TrendField("constant", (1.0,)), DelaySpec(0.5, 0.0, 3.0), 0.01)
        t, fb = hitting_time(x, 1.0, 0.5, 3.0)
        assert t == pytest.approx(1.5, abs=1e-12) and not fb

    def test_fallback(self):
        X = _path(lambda t: 0.1 * t, T=3.0)
        assert hitting_time(X, 5.0, 0.5, 3.0) == (2.5, True)

    def test_only_searches_up_to_T_minus_tau(self):
        X = _path(lambda t: t, T=3.0)
        # level 2.7 is reached at s = 2.7 > T - tau = 2.5
        assert hitting_time(X, 2.7, 0.5, 3.0) == (2.5, True)

    def test_just_above_start_is_edge(self):
        X = _path(lambda t: t, T=3.0, dt=1e-3)
        t, fb = hitting_time(X, 1e-6, 0.5, 3.0)
        assert t == pytest.approx(0.5, abs=1e-5) and not fb
        est = estimate_trend_at_level(X, 1e-6, _manual(0.3), EPAN)
        assert est.edge_clipped

    def test_first_crossing_of_nonmonotone_path(self):
        X = _path(lambda t: np.sin(3 * t), T=3.0)
        t, _ = hitting_time(X, 0.5, 0.0, 3.0)
        assert t == pytest.approx(math.asin(0.5) / 3, abs=1e-6)


class TestStieltjes:
    def test_unit_drift(self):
        X = _path(lambda t: t)
        for K in (EPAN, make_standard_kernel("triangular"), make_higher_order_kernel(4)):
            for c in (0.7, 1.0, 1.3337):
                assert abs(stieltjes_convolution(X, c, K, 0.2) - 1) <= 10 * 1e-3 / 0.2

    def test_constant_path(self):
        X = _path(lambda t: np.full_like(t, 3.0))
        assert stieltjes_convolution(X, 1.0, EPAN, 0.2) == 0.0

    def test_quadratic_path(self):
        phi, dt = 0.1, 1e-4
        oracle = quad(lambda s: eval_kernel(EPAN, (s - 1) / phi) * 2 * s / phi, 0.9, 1.1)[0]
        assert oracle == pytest.approx(2.0, abs=1e-12)
        X = _path(lambda t: t * t, dt=dt)
        assert abs(stieltjes_convolution(X, 1.0, EPAN, phi) - oracle) <= phi**2 + 10 * dt / phi

    def test_resolution_guard(self):
        X = _path(lambda t: t, dt=0.01)
        with pytest.raises(ConfigurationError, match="dt <="):
            stieltjes_convolution(X, 1.0, EPAN, 0.4)

    @pytest.mark.parametrize("K", [EPAN, make_higher_order_kernel(3)], ids=["epan", "k3"])
    def test_truncation_is_exact(self, K):
        X = sample_fbm_davies_harte(TimeGrid(0.0, 1e-3, 2000), 0.7, 3)
        c, phi = 0.8123, 0.1
        s = X.grid.times[:-1]
        full = np.dot(eval_kernel(K, (s - c) / phi), np.diff(X.values)) / phi
        assert stieltjes_convolution(X, c, K, phi) == pytest.approx(full, rel=1e-13, abs=1e-15)

    @settings(max_examples=25, deadline=None)
    @given(a=st.floats(-5, 5), b=st.floats(-5, 5), seed=st.integers(0, 10_000))
    def test_linear_in_path(self, a, b, seed):
        g = TimeGrid(0.0, 1e-3, 1000)
        X = sample_fbm_davies_harte(g, 0.6, seed)
        Y = SamplePath(g, np.sin(4 * g.times))
        Z = SamplePath(g, a * X.values + b * Y.values)
        lhs = stieltjes_convolution(Z, 0.5, EPAN, 0.1)
        rhs = a * stieltjes_convolution(X, 0.5, EPAN, 0.1) + b * stieltjes_convolution(Y, 0.5, EPAN, 0.1)
        assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-9)


class TestLevelEstimator:
    def test_constant_trend_recovered(self):
        spec = DelaySpec(0.5, 0.0, 3.0)
        S = TrendField("constant", (1.7,))
        x = solve_delay_ode(S, spec, 2e-3)
        for level in (1.0, 2.0, 3.0):
            est = estimate_trend_at_level(x, level, _manual(0.2), EPAN, alpha=S.alpha)
            assert abs(est.value - 1.7) <= 1.7 * 10 * 2e-3 / 0.2
            assert not est.fallback_used and not est.edge_clipped

    def test_window(self, tanh_sine, delay_spec):
        x = solve_delay_ode(tanh_sine, delay_spec, 2e-3)
        with pytest.raises(OutOfRangeError):
            estimate_trend_at_level(x, 3.5, _manual(0.2), EPAN, alpha=tanh_sine.alpha)
        with pytest.raises(OutOfRangeError):
            estimate_trend_at_level(x, -0.1, _manual(0.2), EPAN, alpha=tanh_sine.alpha)

    def test_bias_is_quadratic_in_bandwidth(self, tanh_sine, delay_spec):
        x_fine = solve_delay_ode(tanh_sine, delay_spec, 1e-5)
        for level in (1.0, 2.4):
            tx = crossing_time(x_fine, level, 0.5)
            errs = []
            for phi in (0.4, 0.2):
                dt = 0.5 / math.ceil(0.5 / (phi / 50))
                X, _ = simulate_delay_sde(tanh_sine, delay_spec, 0.0, 0.7, dt, 0)
                est = estimate_trend_at_level(X, level, _manual(phi), EPAN)
                errs.append(abs(est.value - tanh_sine(tx, level)))
            assert errs[0] / errs[1] >= 3.5

    def test_json(self, tanh_sine, delay_spec):
        X, _ = simulate_delay_sde(tanh_sine, delay_spec, 0.05, 0.7, 1e-3, 0)
        cfg = EstimatorConfig.from_rule(0.05, 0.7, 0.5)
        d = estimate_trend_at_level(X, 2.0, cfg, EPAN).to_json()
        assert set(d) == {"value", "hitting_time", "level", "edge_clipped", "fallback_used",
                          "bandwidth", "epsilon", "H"}

    def test_hitting_time_perturbation(self, tanh_sine, delay_spec):
        dt = 1e-3
        x = solve_delay_ode(tanh_sine, delay_spec, dt / 10)
        L, T, alpha = tanh_sine.lip_x, delay_spec.T, tanh_sine.alpha
        const = (math.exp(L * T) * L * T + 1) / alpha
        slack = 10 * dt * tanh_sine.sup_bound / alpha
        for level in (1.0, 2.4):
            tx = crossing_time(x, level, 0.5)
            for seed in range(300):
                X, W = simulate_delay_sde(tanh_sine, delay_spec, 0.05, 0.7, dt, seed)
                t_eps, fb = hitting_time(X, level, 0.5, T)
                assert not fb
                assert abs(t_eps - tx) <= 0.05 * const * path_supremum(W) + slack


class TestTimeEstimator:
    def test_constant(self):
        S = TrendField("constant", (2.5,))
        X, _ = simulate_delay_sde(S, DelaySpec(0.5, 0.0, 3.0), 0.0, 0.7, 2e-3, 0)
        est = estimate_trend_at_time(X, 1.5, _manual(0.2), EPAN)
        assert abs(est.value - 2.5) <= 2.5 * 10 * 2e-3 / 0.2

    def test_edge(self, tanh_sine, delay_spec):
        X, _ = simulate_delay_sde(tanh_sine, delay_spec, 0.0, 0.7, 2e-3, 0)
        for t in (0.3, 2.7):
            with pytest.raises(EdgeError):
                estimate_trend_at_time(X, t, _manual(0.2), EPAN)

    def test_agrees_with_level_estimator(self, tanh_sine, delay_spec):
        X, _ = simulate_delay_sde(tanh_sine, delay_spec, 0.05, 0.7, 1e-3, 4)
        cfg = EstimatorConfig.from_rule(0.05, 0.7, 0.5)
        lvl = estimate_trend_at_level(X, 2.4, cfg, EPAN)
        tim = estimate_trend_at_time(X, lvl.hitting_time, cfg, EPAN)
        assert tim.value == lvl.value

    @pytest.mark.parametrize("K,order", [(EPAN, 2), (make_higher_order_kernel(3), 4)],
                             ids=["order1", "order3"])
    def test_bias_order(self, K, order):
        # omega = 3 makes the high derivatives of f large enough to dominate
        S = TrendField("tanh_sine", (2, 0.5, 0.3, 3))
        spec = DelaySpec(0.5, 0.0, 4.0)
        ref = solve_delay_ode(S, spec, 5e-5)

        def f(t):
            return S(t, np.interp(t - 0.5, ref.times, ref.values))

        errs = []
        for phi in (0.4, 0.2):
            dt = 0.5 / math.ceil(0.5 / (phi / 200))
            x = solve_delay_ode(S, spec, dt)
            t = 2.6 + 0.37 * dt
            est = estimate_trend_at_time(x, t, _manual(phi), K)
            # a left-point sum weights the increment over [s, s + dt] by G at s,
            # so the kernel is effectively centred half a step early
            errs.append(abs(est.value - f(t + dt / 2)))
        assert math.log2(errs[0] / errs[1]) >= order - 0.25


@pytest.mark.parametrize("H", [0.5, 0.75])
def test_noise_variance_shape(H):
    eps = 0.1
    g = TimeGrid(0.0, 1e-3, 2000)
    W = np.array([sample_fbm_davies_harte(g, H, s).values for s in range(2000)])
    ratios = []
    for phi in (0.4, 0.2, 0.1, 0.05):
        vals = [stieltjes_convolution(SamplePath(g, eps * w), 1.0, EPAN, phi) for w in W]
        ratios.append(np.var(vals) / (eps**2 / phi ** (2 - 2 * H)))
    assert max(ratios) / min(ratios) <= 2.0


def test_rough_regime_is_flagged():
    with pytest.warns(RuntimeWarning, match="H=0.3"):
        EstimatorConfig.from_rule(0.05, 0.3, 0.5)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        EstimatorConfig.from_rule(0.05, 0.5, 0.5)
