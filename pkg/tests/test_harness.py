import json
import math

import numpy as np
import pytest

from fbmdelay.ddesolve import DelaySpec, TrendField
from fbmdelay.errors import ConfigurationError, DomainError
from fbmdelay.harness import (
    CSV_COLUMNS,
    ExperimentConfig,
    aligned_dt,
    check_lemma31,
    export_report,
    fit_rate,
    import_report,
    read_report_csv,
    run_mse_experiment,
    theoretical_slope,
)
from fbmdelay.kernels import make_higher_order_kernel

EPS = (0.1, 0.05, 0.025, 0.0125)


def _config(**kw):
    base = dict(
        trend=TrendField("tanh_sine", (2, 0.5, 0.3, 1)),
        spec=DelaySpec(0.5, 0.0, 3.0),
        H=0.7,
        epsilons=EPS,
        replications=100,
        levels=(1.6, 2.4),
        dt=1e-3,
    )
    base.update(kw)
    return ExperimentConfig(**base)


@pytest.fixture(scope="module")
def small_report():
    return run_mse_experiment(_config())


class TestFitRate:
    def test_exact_power(self):
        slope, intercept, res = fit_rate([(e, e**2) for e in (1e-1, 1e-2, 1e-3)])
        assert slope == pytest.approx(2.0, abs=1e-12)
        assert res == pytest.approx(0.0, abs=1e-12)

    def test_intercept(self):
        slope, intercept, _ = fit_rate([(e, 3 * e**1.6) for e in EPS])
        assert slope == pytest.approx(1.6, abs=1e-12)
        assert intercept == pytest.approx(math.log(3), abs=1e-12)

    def test_least_squares_oracle(self):
        rng = np.random.default_rng(0)
        e = np.array(EPS)
        m = e**1.7 * np.exp(0.1 * rng.standard_normal(4))
        slope, intercept, _ = fit_rate(zip(e, m))
        ref = np.polyfit(np.log(e), np.log(m), 1)
        assert slope == pytest.approx(ref[0], abs=1e-12)
        assert intercept == pytest.approx(ref[1], abs=1e-12)

    def test_rejects(self):
        with pytest.raises(DomainError):
            fit_rate([(0.1, 0.0), (0.01, 1.0), (0.001, 1.0)])
        with pytest.raises(ConfigurationError):
            fit_rate([(0.1, 1.0), (0.01, 1.0)])


class TestSlope:
    @pytest.mark.parametrize("H,expected", [(0.5, 1.6), (0.7, 4 / 2.3)])
    def test_order1(self, H, expected):
        assert theoretical_slope("theorem31", H) == pytest.approx(expected, abs=1e-15)

    def test_smooth(self):
        assert theoretical_slope("smooth", 0.5, (3, 1.0)) == pytest.approx(16 / 9)
        assert theoretical_slope("smooth", 0.6, (1, 1.0)) == pytest.approx(theoretical_slope("theorem31", 0.6))

    def test_manual_has_none(self):
        assert theoretical_slope("manual", 0.7) is None

    def test_report_field(self, small_report):
        assert small_report.theoretical_slope == pytest.approx(4 / 2.3)


class TestConfig:
    def test_aligned_dt(self):
        dt = aligned_dt(1e-3, 0.5, 3.0)
        assert dt <= 1e-3
        assert abs(0.5 / dt - round(0.5 / dt)) < 1e-9 and abs(3.0 / dt - round(3.0 / dt)) < 1e-9
        dt = aligned_dt(0.0007, 0.3, 2.0)
        assert dt <= 0.0007 and abs(0.3 / dt - round(0.3 / dt)) < 1e-9

    @pytest.mark.parametrize("kw,match", [
        (dict(epsilons=(0.1, 0.05, 0.025)), "4 epsilons"),
        (dict(epsilons=(0.1, 0.05, 0.05, 0.01)), "decreasing"),
        (dict(epsilons=(1.5, 0.5, 0.25, 0.1)), r"\(0, 1\)"),
        (dict(replications=99), "replications"),
        (dict(levels=(3.0,)), "window"),
    ])
    def test_rejects(self, kw, match):
        with pytest.raises(ConfigurationError, match=match):
            _config(**kw)

    def test_json_round_trip(self):
        c = _config(kernel=make_higher_order_kernel(3), bandwidth_rule="smooth", smoothness=(3, 1.0))
        d = json.loads(json.dumps(c.to_json()))
        assert ExperimentConfig.from_json(d) == c

    def test_resolution_guard(self):
        with pytest.raises(ConfigurationError, match="dt <="):
            run_mse_experiment(_config(dt=0.01))


class TestRun:
    def test_cells_and_decomposition(self, small_report):
        assert len(small_report.cells) == len(EPS) * 2
        for c in small_report.cells:
            assert c["mse"] == pytest.approx(c["bias2"] + c["variance"], rel=1e-12)
            assert c["n_used"] + c["n_clipped"] + c["n_fallback"] >= 100

    def test_mse_decreases(self, small_report):
        for lvl in (1.6, 2.4):
            cells = [small_report.cell(e, lvl) for e in EPS]
            for a, b in zip(cells, cells[1:]):
                assert b["mse"] <= a["mse"] + 2 * math.hypot(a["mse_se"], b["mse_se"])

    def test_reproducible(self, small_report):
        assert run_mse_experiment(_config()) == small_report

    def test_thread_count_invariant(self, small_report):
        assert run_mse_experiment(_config(), threads=4) == small_report

    def test_seed_matters(self, small_report):
        assert run_mse_experiment(_config(base_seed=1000)) != small_report

    def test_constant_trend_unbiased(self):
        cfg = _config(trend=TrendField("constant", (1.0,)), levels=(1.0, 1.5), replications=300)
        rep = run_mse_experiment(cfg)
        for c in rep.cells:
            se = math.sqrt(c["variance"] / c["n_used"])
            assert abs(c["bias"]) <= 3 * se + 10 * rep.dt / c["bandwidth"]

    def test_export_round_trip(self, small_report, tmp_path):
        export_report(small_report, tmp_path / "r.json")
        assert import_report(tmp_path / "r.json") == small_report
        export_report(small_report, tmp_path / "r.csv")
        header = (tmp_path / "r.csv").read_text().splitlines()[0]
        assert header == ",".join(CSV_COLUMNS)
        rows = read_report_csv(tmp_path / "r.csv")
        for row, cell in zip(rows, small_report.cells):
            for k in CSV_COLUMNS:
                assert row[k] == cell[k]

    def test_export_unknown_format(self, small_report, tmp_path):
        with pytest.raises(ConfigurationError):
            export_report(small_report, tmp_path / "r.txt")

    def test_bad_directory(self, small_report, tmp_path):
        with pytest.raises(OSError, match="cannot write"):
            export_report(small_report, tmp_path / "missing" / "r.json")


class TestPathwiseBound:
    def test_zero_noise(self, tanh_sine, delay_spec):
        rep = check_lemma31(tanh_sine, delay_spec, 0.7, 0.0, 5, seed=0, dt=1e-3)
        assert rep.pathwise_ok
        assert np.max(rep.sup_dev) <= rep.slack

    def test_constant_trend_is_exact(self, delay_spec):
        S = TrendField("constant", (1.3,))
        rep = check_lemma31(S, delay_spec, 0.6, 0.1, 50, seed=3, dt=1e-3)
        # the deviation is exactly eps * W
        np.testing.assert_allclose(rep.sup_dev, 0.1 * rep.sup_w, rtol=1e-12)
        assert rep.pathwise_ok

    @pytest.mark.parametrize("H", [0.3, 0.7])
    def test_tanh_sine(self, tanh_sine, delay_spec, H):
        rep = check_lemma31(tanh_sine, delay_spec, H, 0.05, 200, seed=11, dt=1e-3)
        assert rep.pathwise_ok, rep.violations[:3]
        assert rep.mean_ok
        s = rep.summary()
        assert s["n_violations"] == 0 and s["replications"] == 200

    def test_threads(self, tanh_sine, delay_spec):
        a = check_lemma31(tanh_sine, delay_spec, 0.7, 0.05, 100, seed=1, dt=1e-3)
        b = check_lemma31(tanh_sine, delay_spec, 0.7, 0.05, 100, seed=1, dt=1e-3, threads=3)
        np.testing.assert_array_equal(a.sup_dev, b.sup_dev)
