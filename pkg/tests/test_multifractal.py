import json

import numpy as np
import pytest
from numpy.testing import assert_allclose

from fractamine.multifractal import (
    METHODS,
    MfaConfig,
    default_q_grid,
    default_scales,
    detrend,
    fluctuation,
    historical_volatility,
    hurst_profile,
    polynomial_detrend_variances,
    profile_series,
    weighted_trend,
    window_variances,
)
from fractamine.series import Series, synth_fgn, synth_gaussian_noise


class TestConfig:
    def test_defaults(self):
        cfg = MfaConfig(method="mf-dfa")
        assert cfg.vol_window == 16
        assert cfg.dfa_poly_order == 1
        assert cfg.scales is None
        assert cfg.q_grid.size == 41

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            MfaConfig(method="mf-dxa")

    def test_q_grid_shape(self):
        q = default_q_grid()
        assert q[0] == -10 and q[-1] == 10
        assert np.any(q == 0)

    def test_default_scales_range(self):
        s = default_scales(8192)
        assert s[0] == 16
        assert s[-1] == 8192 // 4
        assert np.all(np.diff(s) > 0)

    def test_default_scales_short_series(self):
        with pytest.raises(ValueError):
            default_scales(32)  # hi = 8 < lo


class TestProfile:
    def test_cumsum_of_deviations(self):
        s = Series(np.array([1.0, 2.0, 3.0, 6.0]))
        prof = profile_series(s)
        assert_allclose(prof.values, np.cumsum(s.values - 3.0))

    def test_last_value_is_zero(self):
        rng = np.random.default_rng(4)
        prof = profile_series(Series(rng.standard_normal(100)))
        assert_allclose(prof.values[-1], 0.0, atol=1e-10)


class TestHistoricalVolatility:
    def test_constant_series_zero_vol(self):
        theta = historical_volatility(Series(np.full(40, 2.0)), window=8)
        assert_allclose(theta.values, 0.0, atol=1e-14)

    def test_known_window(self):
        # alternating +-1 differences have population std 1 in any window
        y = np.cumsum(np.resize([1.0, -1.0], 30))
        theta = historical_volatility(Series(np.concatenate([[0.0], y[:-1]])), window=4)
        assert_allclose(theta.values[5:], 1.0, atol=1e-12)

    def test_early_positions_backfilled(self):
        rng = np.random.default_rng(1)
        theta = historical_volatility(Series(rng.standard_normal(64)), window=16)
        assert len(theta) == 64
        assert_allclose(theta.values[:16], theta.values[16], atol=1e-14)

    def test_length_guard(self):
        with pytest.raises(ValueError):
            historical_volatility(Series(np.arange(10.0)), window=16)


class TestWeightedTrend:
    def test_uniform_weights_track_running_blend(self):
        # with equal volatilities the recursion blends s-to-1 against the
        # newest sample
        y = Series(np.arange(1.0, 25.0))
        theta = Series(np.ones(24))
        s = 3
        trend = weighted_trend(y, theta, s)
        seed = np.mean([3.0, 4.0, 5.0])  # positions s..2s-1
        assert_allclose(trend.values[: 2 * s - 1], seed)
        expected = seed
        for i in range(2 * s - 1, 24):
            expected = (s * expected + y.values[i]) / (s + 1)
            assert_allclose(trend.values[i], expected, rtol=1e-12)

    def test_zero_volatility_carries(self):
        y = Series(np.arange(1.0, 25.0))
        theta = Series(np.zeros(24))
        trend = weighted_trend(y, theta, 3)
        assert_allclose(trend.values, trend.values[0])

    def test_constant_signal_constant_trend(self):
        y = Series(np.full(40, 7.0))
        theta = Series(np.ones(40))
        trend = weighted_trend(y, theta, 4)
        assert_allclose(trend.values, 7.0, atol=1e-12)

    def test_trend_in_signal_hull(self):
        rng = np.random.default_rng(2)
        y = Series(rng.standard_normal(80))
        theta = Series(np.abs(rng.standard_normal(80)))
        trend = weighted_trend(y, theta, 5)
        assert trend.values.max() <= y.values.max() + 1e-12
        assert trend.values.min() >= y.values.min() - 1e-12

    def test_length_guard(self):
        with pytest.raises(ValueError):
            weighted_trend(Series(np.arange(10.0)), Series(np.ones(10)), 3)

    def test_negative_volatility_rejected(self):
        with pytest.raises(ValueError):
            weighted_trend(Series(np.arange(20.0)), Series(np.full(20, -1.0)), 3)


class TestDetrend:
    def test_valid_range_and_sign(self):
        y = Series(np.arange(1.0, 21.0))
        trend = Series(np.arange(1.0, 21.0) + 2.0)
        d = detrend(y, trend, s=4)
        assert len(d) == 20 - 2 * 4 + 1
        assert_allclose(d.values, 2.0)


class TestWindowVariances:
    def test_partitions_and_mean_square(self):
        d = Series(np.array([1.0, -1.0, 2.0, -2.0, 3.0, -3.0, 9.0]))
        v = window_variances(d, 2)
        assert_allclose(v, [1.0, 4.0, 9.0])  # trailing 9.0 dropped

    def test_exact_multiple(self):
        v = window_variances(Series(np.ones(12)), 3)
        assert v.shape == (4,)
        assert_allclose(v, 1.0)


class TestFluctuation:
    def test_q2_is_rms(self):
        v = np.array([1.0, 4.0, 9.0])
        assert_allclose(fluctuation(v, 2.0), np.sqrt(v.mean()))

    def test_q0_geometric_limit(self):
        v = np.array([1.0, 4.0, 16.0])
        assert_allclose(fluctuation(v, 0.0), np.exp(np.mean(np.log(v)) / 2))

    def test_continuity_at_zero(self):
        rng = np.random.default_rng(3)
        v = rng.uniform(0.5, 2.0, size=64)
        f0 = fluctuation(v, 0.0)
        assert abs(fluctuation(v, 1e-6) - f0) / f0 < 1e-5
        assert abs(fluctuation(v, -1e-6) - f0) / f0 < 1e-5

    def test_nondecreasing_in_q(self):
        rng = np.random.default_rng(5)
        v = rng.uniform(0.1, 5.0, size=32)
        qs = np.linspace(-10, 10, 41)
        fs = [fluctuation(v, q) for q in qs]
        assert all(b >= a - 1e-12 for a, b in zip(fs, fs[1:]))

    def test_zero_variance_degenerate_for_nonpositive_q(self):
        v = np.array([0.0, 1.0, 2.0])
        assert np.isnan(fluctuation(v, 0.0))
        assert np.isnan(fluctuation(v, -2.0))
        assert np.isfinite(fluctuation(v, 2.0))

    def test_negative_variance_rejected(self):
        with pytest.raises(ValueError):
            fluctuation(np.array([-1.0, 1.0]), 2.0)


class TestPolynomialDetrend:
    def test_linear_trend_removed_exactly(self):
        y = Series(3.0 * np.arange(64.0) + 5.0)
        v = polynomial_detrend_variances(y, 8, order=1)
        assert_allclose(v, 0.0, atol=1e-18)

    def test_quadratic_needs_order_two(self):
        y = Series(np.arange(64.0) ** 2)
        v1 = polynomial_detrend_variances(y, 16, order=1)
        v2 = polynomial_detrend_variances(y, 16, order=2)
        assert np.all(v1 > 1.0)
        assert_allclose(v2, 0.0, atol=1e-10)

    def test_scale_must_exceed_order(self):
        with pytest.raises(ValueError):
            polynomial_detrend_variances(Series(np.arange(64.0)), 2, order=1)


class TestHurstProfile:
    def test_white_noise_h2_near_half(self):
        cfg = MfaConfig(method="mf-dfa", q_grid=np.array([2.0]))
        prof = hurst_profile(synth_gaussian_noise(8192, 0), cfg)
        assert 0.4 < prof.hurst[0] < 0.6
        assert prof.r_squared[0] > 0.98

    def test_all_methods_produce_finite_h2(self):
        s = synth_fgn(4096, 0.6, seed=2)
        for method in METHODS:
            cfg = MfaConfig(method=method, q_grid=np.array([2.0]))
            prof = hurst_profile(s, cfg)
            assert np.isfinite(prof.hurst[0]), method

    def test_affine_scale_invariance(self):
        # H is a scaling exponent: rescaling the signal must not move it
        s = synth_fgn(2048, 0.7, seed=3)
        cfg = MfaConfig(method="mf-dfa", q_grid=np.array([-2.0, 2.0]))
        a = hurst_profile(s, cfg)
        b = hurst_profile(Series(5.0 * s.values), cfg)
        assert_allclose(a.hurst, b.hurst, atol=1e-10)

    def test_nondecreasing_fluctuation_rows(self):
        s = synth_fgn(4096, 0.7, seed=1)
        cfg = MfaConfig(method="mf-dfa", q_grid=np.linspace(-5, 5, 11))
        prof = hurst_profile(s, cfg)
        table = prof.table.values  # rows q, columns scales
        for col in range(table.shape[1]):
            column = table[:, col]
            finite = column[np.isfinite(column)]
            assert np.all(np.diff(finite) >= -1e-10)

    def test_too_few_scales_gives_nan(self):
        s = synth_gaussian_noise(256, 0)
        cfg = MfaConfig(
            method="mf-dfa", q_grid=np.array([2.0]), scales=np.array([16, 32, 64])
        )
        prof = hurst_profile(s, cfg)
        assert np.isnan(prof.hurst[0])

    def test_json_round_trip_schema(self):
        s = synth_gaussian_noise(1024, 1)
        cfg = MfaConfig(method="mf-dfa", q_grid=np.array([-2.0, 0.0, 2.0]))
        payload = json.loads(hurst_profile(s, cfg).to_json())
        assert payload["format_version"] == 1
        assert payload["method"] == "mf-dfa"
        assert payload["q"] == [-2.0, 0.0, 2.0]
        assert len(payload["H"]) == 3
        assert len(payload["logF"]) == 3
        assert len(payload["logF"][0]) == len(payload["scales"])

    def test_fs_mfa_equals_dhv_after_denoise(self):
        # the composed method is exactly: denoise, then the volatility
        # pipeline on the cleaned signal
        from fractamine.fourier_denoise import denoise

        s = synth_fgn(2048, 0.6, seed=7)
        q = np.array([2.0])
        fs = hurst_profile(s, MfaConfig(method="fs-mfa", q_grid=q))
        den, _, _ = denoise(s)
        dhv = hurst_profile(den, MfaConfig(method="mf-dhv", q_grid=q))
        assert_allclose(fs.hurst, dhv.hurst, atol=1e-12)

    def test_degenerate_scales_reported(self):
        # a constant input zeroes the whole volatility pipeline: every
        # window variance is exactly 0, every scale is dropped, H is NaN
        scales = np.array([16, 32, 64, 128, 256])
        prof = hurst_profile(
            Series(np.full(1024, 3.0)),
            MfaConfig(method="mf-dhv", q_grid=np.array([-2.0, 2.0]), scales=scales),
        )
        assert np.array_equal(prof.degenerate_scales, scales)
        assert np.all(np.isnan(prof.hurst))
