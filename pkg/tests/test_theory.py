"""Quadrature checks of the cauchy inner risk, its bounds, and the rate probe."""

import math

import numpy as np
import pytest
from scipy import integrate

from kcrr.data import NoiseFamily, NoiseSpec, pareto_abs_moment, sample_noise
from kcrr.theory import (
    QUAD_DEFAULT,
    QuadSettings,
    RateProbeResult,
    TheoryReport,
    check_bayes,
    check_calibration,
    check_clipping_monotone,
    check_lipschitz,
    check_log_moment,
    check_variance_bound,
    default_bayes_grid,
    excess_inner_risk,
    format_reports,
    inner_risk_curve,
    log_moment,
    make_noise_model,
    operative_sigma,
    rate_probe,
    rate_report,
    tent_target,
    term_noise,
    theory_csv_rows,
)

# E[log(1 + eps^2)] at unit scale, frozen from unfolded quad over the whole
# real line at epsrel 1e-13 (the module integrates folded on [0, T] instead)
LOG_MOMENTS = {
    NoiseFamily.GAUSSIAN: 0.5334531798441349,
    NoiseFamily.CAUCHY: 2.0 * math.log(2.0),
    NoiseFamily.PARETO: 0.5662192766134344,
}

FAMILIES = tuple(NoiseFamily)


def unit_model(family):
    return make_noise_model(family, 1.0)


class TestNoiseModel:
    def test_tail_at_zero_is_one(self):
        for family in FAMILIES:
            assert unit_model(family).magnitude_tail(0.0) == 1.0

    def test_tail_matches_pdf_integral(self):
        for family in FAMILIES:
            model = unit_model(family)
            for T in (0.5, 3.0):
                mass, _ = integrate.quad(model.pdf, T, np.inf, epsabs=1e-13, epsrel=1e-12)
                assert model.magnitude_tail(T) == pytest.approx(2.0 * mass, abs=1e-10)

    def test_pdf_normalizes(self):
        for family in FAMILIES:
            model = unit_model(family)
            mass, _ = integrate.quad(model.pdf, 0.0, np.inf, epsabs=1e-13, epsrel=1e-12)
            assert 2.0 * mass == pytest.approx(1.0, abs=1e-10)

    def test_sampler_matches_tail(self):
        # the sampled noise and the closed-form tail describe one distribution
        n = 200_000
        for family in FAMILIES:
            model = unit_model(family)
            eps = sample_noise(model.spec, np.random.default_rng(404), n)
            for T in (0.5, 2.0):
                p = model.magnitude_tail(T)
                band = 5.0 * math.sqrt(p * (1.0 - p) / n)
                assert np.mean(np.abs(eps) > T) == pytest.approx(p, abs=band)

    def test_pareto_pdf_consistent_with_moment_closed_form(self):
        model = make_noise_model(NoiseFamily.PARETO, 1.3, shape=2.01)
        p = 1.0 / 3.0
        val, _ = integrate.quad(
            lambda t: 2.0 * t**p * model.pdf(t), 0.0, np.inf, epsabs=1e-13, epsrel=1e-12
        )
        assert val == pytest.approx(pareto_abs_moment(1.3, 2.01, p), rel=1e-9)

    def test_pareto_default_shape_applied(self):
        model = make_noise_model(NoiseFamily.PARETO, 1.0)
        assert model.spec.shape is not None and model.spec.shape > 1.0 / 3.0


class TestLogMoment:
    def test_matches_frozen_oracles(self):
        for family, expect in LOG_MOMENTS.items():
            assert log_moment(unit_model(family)) == pytest.approx(expect, abs=1e-9)

    def test_cauchy_closed_form_any_scale(self):
        # E[log(1 + X^2)] = 2 log(1 + s) for X ~ Cauchy(0, s)
        for s in (0.5, 3.0):
            model = make_noise_model(NoiseFamily.CAUCHY, s)
            assert log_moment(model) == pytest.approx(2.0 * math.log1p(s), rel=1e-10)

    def test_method_delegates(self):
        model = unit_model(NoiseFamily.GAUSSIAN)
        assert model.log_moment() == log_moment(model)

    def test_monte_carlo_agreement(self):
        n = 10**6
        for family in FAMILIES:
            model = unit_model(family)
            draws = np.log1p(sample_noise(model.spec, np.random.default_rng(11), n) ** 2)
            sem = float(draws.std() / math.sqrt(n))
            assert float(draws.mean()) == pytest.approx(log_moment(model), abs=5.0 * sem)


class TestExcessInnerRisk:
    def test_cauchy_closed_form(self):
        # harmonic extension: g(u) - g(0) = sigma^2 log1p(u^2 / (sigma + s)^2)
        u = np.linspace(-4.0, 4.0, 41)
        for sigma, s in [(1.0, 1.0), (2.0, 3.0), (0.5, 2.0)]:
            model = make_noise_model(NoiseFamily.CAUCHY, s)
            expect = sigma**2 * np.log1p(u**2 / (sigma + s) ** 2)
            got = excess_inner_risk(model, sigma, u)
            assert np.allclose(got, expect, rtol=1e-9, atol=1e-12)

    def test_frozen_values_at_unit_parameters(self):
        # unfolded quad oracles at u = 1, sigma = 1
        gauss = excess_inner_risk(unit_model(NoiseFamily.GAUSSIAN), 1.0, [1.0])
        assert gauss[0] == pytest.approx(0.3153446382578016, abs=1e-9)
        par = excess_inner_risk(unit_model(NoiseFamily.PARETO), 1.0, [1.0])
        assert par[0] == pytest.approx(0.40559458015182115, abs=1e-9)

    def test_even_in_u(self):
        u = np.array([0.3, 1.7, 4.2])
        for family in FAMILIES:
            model = unit_model(family)
            pos = excess_inner_risk(model, 1.5, u)
            neg = excess_inner_risk(model, 1.5, -u)
            assert np.allclose(pos, neg, rtol=0.0, atol=1e-13)

    def test_zero_at_origin(self):
        for family in FAMILIES:
            assert excess_inner_risk(unit_model(family), 2.0, [0.0])[0] == 0.0

    def test_empty_grid(self):
        assert excess_inner_risk(unit_model(NoiseFamily.GAUSSIAN), 1.0, []).shape == (0,)

    def test_validation(self):
        model = unit_model(NoiseFamily.GAUSSIAN)
        with pytest.raises(ValueError):
            excess_inner_risk(model, 0.0, [1.0])
        with pytest.raises(ValueError):
            excess_inner_risk(model, 1.0, [np.inf])


class TestInnerRiskCurve:
    def test_origin_equals_log_moment_at_unit_sigma(self):
        for family in FAMILIES:
            model = unit_model(family)
            g = inner_risk_curve(model, 1.0, [0.0])
            assert g[0] == pytest.approx(log_moment(model), rel=1e-10)

    def test_cauchy_curve_closed_form(self):
        # g(u) = sigma^2 (log(u^2 + (sigma + s)^2) - 2 log sigma)
        sigma, s = 2.0, 1.0
        u = np.array([0.0, 0.7, 2.5])
        model = make_noise_model(NoiseFamily.CAUCHY, s)
        expect = sigma**2 * (np.log(u**2 + (sigma + s) ** 2) - 2.0 * math.log(sigma))
        assert np.allclose(inner_risk_curve(model, sigma, u), expect, rtol=1e-9)

    def test_validation(self):
        with pytest.raises(ValueError):
            inner_risk_curve(unit_model(NoiseFamily.CAUCHY), -1.0, [0.0])


class TestCurvature:
    def test_term_noise_oracles(self):
        # rational closed form for cauchy noise; quad oracle for gaussian
        assert term_noise(unit_model(NoiseFamily.CAUCHY), 8.0) == pytest.approx(11.0 / 27.0, rel=1e-9)
        assert term_noise(unit_model(NoiseFamily.CAUCHY), 4.0) == pytest.approx(17.0 / 25.0, rel=1e-9)
        assert term_noise(unit_model(NoiseFamily.GAUSSIAN), 4.0) == pytest.approx(
            0.3304765827121341, rel=1e-9
        )

    def test_operative_sigma_ladder(self):
        expected = {
            NoiseFamily.GAUSSIAN: 4.0,
            NoiseFamily.CAUCHY: 8.0,
            NoiseFamily.PARETO: 4.0,
        }
        for family in FAMILIES:
            model = unit_model(family)
            sigma = operative_sigma(model, 4.0)
            assert sigma == expected[family]
            assert term_noise(model, sigma) <= 0.5
            # minimality on the x2 ladder
            assert sigma == 4.0 or term_noise(model, sigma / 2.0) > 0.5

    def test_operative_sigma_validation(self):
        with pytest.raises(ValueError):
            operative_sigma(unit_model(NoiseFamily.GAUSSIAN), 0.0)


class TestChecks:
    def test_calibration_passes(self):
        for family in FAMILIES:
            rep = check_calibration(unit_model(family), n_profiles=6, n_cells=16)
            assert rep.passed
            assert rep.measured["min_ratio"] >= 1.0 - 1e-6
            assert rep.measured["max_ratio"] <= 8.0 + 1e-6
            assert rep.measured["sigma"] >= 4.0

    def test_calibration_rejects_small_sigma(self):
        with pytest.raises(ValueError):
            check_calibration(unit_model(NoiseFamily.GAUSSIAN), M=1.0, sigma=3.9)

    def test_variance_bound_passes(self):
        for family in FAMILIES:
            rep = check_variance_bound(unit_model(family), n_profiles=6, n_cells=16)
            assert rep.passed
            assert rep.measured["max_ratio"] <= 1.0 + 1e-9

    def test_clipping_monotone_passes(self):
        for family in FAMILIES:
            rep = check_clipping_monotone(unit_model(family), n_profiles=6, n_cells=16)
            assert rep.passed
            assert rep.measured["max_violation"] <= rep.tolerances["max_violation"]

    def test_bayes_passes(self):
        for family in FAMILIES:
            rep = check_bayes(unit_model(family))
            assert rep.passed
            assert rep.measured["min_excess"] > 0.0
            assert rep.measured["monotonicity_violation"] == 0.0

    def test_bayes_grid(self):
        grid = default_bayes_grid()
        assert grid.size == 200
        assert np.all(grid != 0.0)
        assert np.allclose(grid, -grid[::-1])
        assert grid.max() == 5.0 and np.abs(grid).min() == 0.05

    def test_lipschitz_passes(self):
        for sigma in (1.0, 3.0):
            rep = check_lipschitz(sigma=sigma, n_triples=10**4)
            assert rep.passed
            assert rep.measured["max_ratio"] <= 1.0 + 1e-12
            assert rep.measured["max_fd_derivative"] <= sigma * (1.0 + 1e-6)

    def test_log_moment_check(self):
        rep = check_log_moment(unit_model(NoiseFamily.PARETO))
        assert rep.passed
        assert rep.measured["log_moment"] == pytest.approx(
            LOG_MOMENTS[NoiseFamily.PARETO], abs=1e-9
        )


class TestRateProbe:
    def test_tent_target(self):
        assert np.array_equal(tent_target(np.array([0.0, 0.5, 1.0])), [1.0, 0.0, 1.0])

    def test_duplicate_n_values_identical(self):
        # streams keyed by n, so repeated sizes reproduce exactly
        res = rate_probe([100, 100, 200], reps=2, seed=5)
        assert res.per_rep_errors[0] == res.per_rep_errors[1]
        assert res.mean_errors[0] == res.mean_errors[1]

    def test_near_noiseless_error_decreases(self):
        quiet = NoiseSpec(NoiseFamily.GAUSSIAN, 1e-12)
        res = rate_probe([50, 100, 200], reps=1, seed=3, noise=quiet)
        assert res.slope < 0.0
        assert res.mean_errors[-1] < res.mean_errors[0]

    def test_validation(self):
        with pytest.raises(ValueError):
            rate_probe([100, 200], reps=1, seed=0)
        with pytest.raises(ValueError):
            rate_probe([200, 100, 300], reps=1, seed=0)
        with pytest.raises(ValueError):
            rate_probe([100, 200, 400], reps=0, seed=0)
        with pytest.raises(ValueError):
            rate_probe([100, 100, 100], reps=1, seed=0)

    def test_rate_report_band(self):
        def result(slope):
            return RateProbeResult(
                n_values=(100, 200, 400),
                mean_errors=(0.1, 0.05, 0.025),
                per_rep_errors=((0.1,), (0.05,), (0.025,)),
                slope=slope,
                slope_stderr=0.01,
                ci_low=slope - 0.02,
                ci_high=slope + 0.02,
                lambda0=1e-3,
                gamma0=1.0,
                sigma=4.0,
            )

        assert rate_report(result(-0.5)).passed
        assert not rate_report(result(-0.2)).passed
        assert not rate_report(result(-1.2)).passed
        assert rate_report(result(-0.2), band=(-1.0, -0.1)).passed
        rep = rate_report(result(-0.5))
        assert rep.measured["l2err_n100"] == 0.1
        assert rep.tolerances == {"slope_low": -1.0, "slope_high": -0.35}


class TestSerialization:
    def test_csv_rows(self):
        rep = TheoryReport(
            check="demo",
            noise="gaussian",
            passed=True,
            measured={"b": 2.0, "a": 1.0},
            tolerances={"a": 0.5},
            settings={},
        )
        rows = theory_csv_rows([rep])
        assert rows[0] == ["check", "noise", "passed", "quantity", "value", "tolerance"]
        assert rows[1] == ["demo", "gaussian", "true", "a", "1.0", "0.5"]
        assert rows[2] == ["demo", "gaussian", "true", "b", "2.0", ""]

    def test_format_reports_status(self):
        ok = TheoryReport("demo", "-", True, {"x": 1.0}, {}, {})
        bad = TheoryReport("demo", "-", False, {"x": 1.0}, {}, {})
        text = format_reports([ok, bad])
        assert "[PASS] demo" in text and "[FAIL] demo" in text

    def test_refined_settings_tighter(self):
        s = QuadSettings()
        r = s.refined()
        assert r.rtol < s.rtol and r.atol < s.atol and r.tail_tol < s.tail_tol
        assert QUAD_DEFAULT == QuadSettings()
