import numpy as np
import pytest

from kerrchaos.errors import DegenerateSeriesError, InsufficientDataError
from kerrchaos.evolve import TimeSeries
from kerrchaos.fixtures import iid_series, logistic_series, sine_series, two_tone_series
from kerrchaos.tsa import (
    Embedding,
    ami_delay,
    autocorrelation,
    classify_regime,
    count_peaks,
    curve_for_plot,
    dominant_frequency,
    fnn_embedding_dim,
    mean_period_samples,
    power_spectrum,
    rosenstein_lambda,
    _nearest_outside_window,
)
from scipy.spatial import cKDTree


class TestPowerSpectrum:
    def test_pure_tone_peak(self):
        ts = sine_series(n=200_000, dt=1.0, period=8.0)
        spec = power_spectrum(ts, max_lag=2000)
        peak = int(np.argmax(spec.power))
        assert spec.freqs[peak] == pytest.approx(1.0 / 8.0, abs=2e-4)
        # background at least 40 dB down once outside the taper mainlobe
        background = np.delete(spec.power, np.arange(peak - 10, peak + 11))
        assert spec.power[peak] / background.max() > 1e4

    def test_two_tones_give_two_peaks(self):
        ts = two_tone_series(n=400_000, dt=1.0, period1=8.0, period2=8.0 * np.sqrt(2.0))
        spec = power_spectrum(ts, max_lag=2000)
        assert count_peaks(spec, db_drop=60.0) == 2

    def test_axis_runs_to_nyquist(self):
        ts = sine_series(n=5000, dt=0.25)
        spec = power_spectrum(ts, max_lag=500)
        assert spec.freqs[0] == 0.0
        assert spec.freqs[-1] == pytest.approx(1.0 / (2 * 0.25))
        assert np.all(np.diff(spec.freqs) > 0)
        assert np.all(spec.power >= 0.0)

    def test_parseval(self):
        # mean of the double-sided transform recovers the lag-0 value,
        # i.e. the variance of the (tapered) autocorrelation input
        # (lines must be well resolved or the >= 0 clipping biases the sum)
        ts = two_tone_series(n=30_000, period1=8.0, period2=8.0 * np.sqrt(2.0))
        lag = 1000
        spec = power_spectrum(ts, max_lag=lag)
        total = spec.power[0] + spec.power[-1] + 2.0 * spec.power[1:-1].sum()
        variance = autocorrelation(ts.values, 0)[0]
        assert total / (2 * lag) == pytest.approx(variance, rel=0.01)

    def test_g_scaling(self):
        ts = sine_series(n=5000, dt=0.1)
        spec = power_spectrum(ts, max_lag=500, g_scale=2.0)
        # angular Nyquist pi/dt divided by g
        assert spec.freqs[-1] == pytest.approx(np.pi / 0.1 / 2.0)

    def test_constant_series_degenerate(self):
        ts = TimeSeries(dt=1.0, values=np.full(5000, 3.7))
        with pytest.raises(DegenerateSeriesError):
            power_spectrum(ts, max_lag=100)

    def test_dominant_frequency(self):
        ts = sine_series(n=20_000, dt=0.5, period=40.0)
        spec = power_spectrum(ts, max_lag=2000)
        assert dominant_frequency(spec) == pytest.approx(1.0 / 40.0, abs=1e-3)
        assert mean_period_samples(ts, max_lag=2000) == pytest.approx(80, abs=2)


class TestAmiDelay:
    def test_periodic_signal_quarter_period(self):
        # mutual information of a strongly periodic signal first dips near a
        # quarter period; a touch of broadband content keeps the binned
        # estimate off the pure-tone grid resonances
        rng = np.random.default_rng(42)
        n = 50_000
        values = np.sin(2 * np.pi * np.arange(n) / 97.3) + 0.05 * rng.standard_normal(n)
        ts = TimeSeries(dt=1.0, values=values, label="noisy_sine")
        delay = ami_delay(ts, max_lag=80)
        assert 15 <= delay <= 35

    def test_white_noise_immediate_minimum(self):
        ts = iid_series(n=50_000, seed=7)
        assert ami_delay(ts, max_lag=50) == 1

    def test_too_short(self):
        ts = TimeSeries(dt=1.0, values=np.sin(np.arange(500.0)))
        with pytest.raises(InsufficientDataError):
            ami_delay(ts)

    def test_constant_degenerate(self):
        ts = TimeSeries(dt=1.0, values=np.zeros(2000))
        with pytest.raises(DegenerateSeriesError):
            ami_delay(ts)


class TestEmbedding:
    def test_vector_layout(self):
        ts = TimeSeries(dt=1.0, values=np.arange(10.0))
        emb = Embedding(series=ts, delay=2, dim=3)
        X = emb.as_array()
        assert X.shape == (6, 3)
        assert np.array_equal(X[0], [0.0, 2.0, 4.0])
        assert np.array_equal(X[5], [5.0, 7.0, 9.0])

    def test_count_invariant(self):
        ts = TimeSeries(dt=1.0, values=np.arange(100.0))
        emb = Embedding(series=ts, delay=3, dim=5)
        assert emb.count == 100 - 4 * 3
        with pytest.raises(ValueError):
            Embedding(series=ts, delay=40, dim=5)


class TestFnn:
    def test_sine_embeds_in_plane(self):
        ts = sine_series(n=20_000, dt=1.0, period=97.618034)
        dim = fnn_embedding_dim(ts, delay=24, max_dim=6)
        assert dim is not None and dim <= 2

    def test_noise_never_unfolds(self):
        ts = iid_series(n=20_000, seed=3)
        assert fnn_embedding_dim(ts, delay=1, max_dim=6) is None

    def test_too_short(self):
        ts = sine_series(n=300, dt=1.0, period=50.0)
        with pytest.raises(InsufficientDataError):
            fnn_embedding_dim(ts, delay=30, max_dim=10)


class TestNeighborSearch:
    def test_matches_brute_force(self):
        # accelerated search must agree exactly with O(n^2) on a 1e4 prefix
        ts = logistic_series(n=10_240)
        emb = Embedding(series=ts, delay=1, dim=3)
        X = np.ascontiguousarray(emb.as_array()[:10_000])
        theiler = 5
        refs = np.arange(0, len(X), 37)
        tree = cKDTree(X)
        nn, dist = _nearest_outside_window(tree, X, refs, theiler)

        for r, n_fast, d_fast in zip(refs[::11], nn[::11], dist[::11]):
            d2 = ((X - X[r]) ** 2).sum(axis=1)
            d2[np.abs(np.arange(len(X)) - r) <= theiler] = np.inf
            j = int(np.argmin(d2))
            assert j == n_fast
            assert np.sqrt(d2[j]) == pytest.approx(d_fast, rel=1e-12)


class TestRosenstein:
    def test_sine_has_zero_exponent(self):
        ts = sine_series(n=30_000, dt=1.0, period=97.618034)
        emb = Embedding(series=ts, delay=24, dim=2)
        curve = rosenstein_lambda(ts, emb, theiler=100, kmax=200)
        assert abs(curve.lambda_max) < 0.02
        assert curve.reliable

    def test_logistic_map_ln2(self):
        # independent oracle: the exact exponent is the orbit average of
        # ln |f'(x)| = ln |4 - 8x|, which equals ln 2 for r = 4
        ts = logistic_series(n=100_000)
        oracle = float(np.mean(np.log(np.abs(4.0 - 8.0 * ts.values))))
        assert oracle == pytest.approx(np.log(2.0), abs=5e-3)

        emb = Embedding(series=ts, delay=1, dim=1)
        curve = rosenstein_lambda(ts, emb, theiler=1, kmax=20)
        assert curve.lambda_max == pytest.approx(np.log(2.0), abs=0.05)
        assert curve.lambda_max == pytest.approx(oracle, abs=0.05)

    def test_curve_shape_and_fit_metadata(self):
        ts = logistic_series(n=50_000)
        emb = Embedding(series=ts, delay=1, dim=2)
        curve = rosenstein_lambda(ts, emb, theiler=1, kmax=30)
        assert np.all(np.isfinite(curve.mean_log_sep))
        lo, hi = curve.fit_range
        assert 0 <= lo < hi <= curve.k_values[-1]
        assert curve.n_pairs >= 100
        assert curve.slope_per_step == pytest.approx(curve.lambda_max * ts.dt)

    def test_explicit_fit_range(self):
        ts = logistic_series(n=50_000)
        emb = Embedding(series=ts, delay=1, dim=1)
        curve = rosenstein_lambda(ts, emb, theiler=1, kmax=20, fit_range=(0, 10))
        assert curve.fit_range == (0, 10)

    def test_reversed_chaotic_series_not_negative(self):
        # divergence is generic forward and backward in reconstructed space
        ts = logistic_series(n=60_000)
        rev = TimeSeries(dt=ts.dt, values=ts.values[::-1].copy(), label="rev")
        emb = Embedding(series=rev, delay=1, dim=1)
        curve = rosenstein_lambda(rev, emb, theiler=1, kmax=20)
        assert curve.lambda_max > 0.0


class TestClassify:
    def test_verdicts(self):
        assert classify_regime(0.8, 0.01) == "chaotic"
        assert classify_regime(0.001, 0.01) == "regular"
        assert classify_regime(0.0, 0.0) == "regular"
        assert classify_regime(0.5, 0.4) == "inconclusive"
        assert classify_regime(-0.5, 0.001) == "inconclusive"

    def test_significance_gate(self):
        # large exponent with huge error bar must not read as chaotic
        assert classify_regime(0.1, 0.2) != "chaotic"


class TestCurveForPlot:
    def test_single_curve_regions(self):
        ts = logistic_series(n=30_000)
        emb = Embedding(series=ts, delay=1, dim=1)
        curve = rosenstein_lambda(ts, emb, theiler=1, kmax=20)
        table = curve_for_plot(curve)
        regions = {row[3] for row in table["rows"]}
        assert regions <= {"transient", "linear", "saturation"}
        assert "linear" in regions
        meta = table["meta"]["d1"]
        assert meta["fit_k_lo"] == curve.fit_range[0]
        assert meta["fit_k_hi"] == curve.fit_range[1]

    def test_multi_dim_columns(self):
        ts = logistic_series(n=30_000)
        curves = [
            rosenstein_lambda(ts, Embedding(series=ts, delay=1, dim=d), theiler=1, kmax=20)
            for d in (1, 2)
        ]
        table = curve_for_plot(curves)
        assert "mean_log_sep_d1" in table["columns"]
        assert "mean_log_sep_d2" in table["columns"]
