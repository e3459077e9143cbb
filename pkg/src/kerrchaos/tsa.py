"""Nonlinear time-series analysis: spectrum, embedding, maximal Lyapunov exponent.

The chain follows standard practice for scalar signals: Blackman-Tukey
power spectrum, delay from the first minimum of the average mutual
information, minimum embedding dimension from false nearest neighbors,
and the maximal Lyapunov exponent from the mean log-divergence of nearest
neighbor pairs (slope of <ln d_j(k)> against time).
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.fft import next_fast_len, rfft, irfft
from scipy.signal import find_peaks
from scipy.spatial import cKDTree

from .errors import DegenerateSeriesError, InsufficientDataError
from .evolve import TimeSeries

_DEGENERATE_REL_STD = 1e-13


@dataclass(frozen=True)
class PowerSpectrum:
    """One-sided spectral estimate S(f), f = 0 .. Nyquist in cycles/time.

    freq_scale records the angular-frequency unit the axis was divided by
    (e.g. the coupling g), 1.0 meaning raw cycles/time.
    """

    freqs: np.ndarray
    power: np.ndarray
    window: str
    dt: float
    freq_scale: float = 1.0


@dataclass(frozen=True)
class Embedding:
    """Delay-coordinate view: vector i = (x_i, x_{i+J}, ..., x_{i+(d-1)J})."""

    series: TimeSeries
    delay: int
    dim: int

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("embedding dimension must be >= 1")
        if self.delay < 1:
            raise ValueError("embedding delay must be >= 1")
        if self.count <= 0:
            raise ValueError("series too short for this embedding")

    @property
    def count(self) -> int:
        return len(self.series.values) - (self.dim - 1) * self.delay

    def as_array(self) -> np.ndarray:
        """(count, dim) view; no copy."""
        x = self.series.values
        if self.dim == 1:
            return x[:, None]
        span = (self.dim - 1) * self.delay + 1
        return np.lib.stride_tricks.sliding_window_view(x, span)[:, :: self.delay]


@dataclass(frozen=True)
class LyapunovCurve:
    """<ln d_j(k)> against evolution step k, with its linear fit.

    lambda_max is the fitted slope per unit time (slope_per_step / dt);
    lambda_stderr is the largest of the OLS slope error, the slope spread
    over disjoint reference-point groups, and the spread over contiguous
    k-blocks of the window, which stays honest when the curve is flat but
    structured.
    """

    k_values: np.ndarray
    mean_log_sep: np.ndarray
    fit_range: tuple
    lambda_max: float
    fit_r2: float
    lambda_stderr: float
    slope_per_step: float
    n_pairs: int
    reliable: bool
    dim: int
    delay: int
    dt: float


def _check_not_constant(x: np.ndarray):
    scale = max(1.0, abs(float(np.mean(x))))
    if float(np.std(x)) < _DEGENERATE_REL_STD * scale:
        raise DegenerateSeriesError("series is constant")


def autocorrelation(x: np.ndarray, max_lag: int) -> np.ndarray:
    """Biased mean-removed autocovariance for lags 0..max_lag (FFT-based)."""
    n = len(x)
    xc = x - x.mean()
    nfft = next_fast_len(n + max_lag + 1, real=True)
    f = rfft(xc, nfft)
    return irfft((f * f.conj()).real, nfft)[: max_lag + 1] / n


def power_spectrum(
    series: TimeSeries,
    max_lag: Optional[int] = None,
    window: str = "hann",
    g_scale: Optional[float] = None,
) -> PowerSpectrum:
    """Blackman-Tukey estimate: cosine transform of the tapered autocorrelation.

    Frequencies run from 0 to the Nyquist 1/(2 dt) in cycles per time unit;
    pass g_scale (an angular frequency) to emit the axis as 2*pi*f/g_scale.
    """
    x = series.values
    n = len(x)
    if max_lag is None:
        max_lag = min(n // 2 - 1, 4096)
    if not 0 < max_lag < n / 2:
        raise ValueError("max_lag must satisfy 0 < max_lag < length/2")
    _check_not_constant(x)

    acov = autocorrelation(x, max_lag)
    lags = np.arange(max_lag + 1)
    if window == "hann":
        w = 0.5 * (1.0 + np.cos(np.pi * lags / max_lag))
    elif window == "bartlett":
        w = 1.0 - lags / max_lag
    elif window in ("none", "boxcar"):
        w = np.ones(max_lag + 1)
    else:
        raise ValueError(f"unknown window {window!r}")
    rw = acov * w

    # the autocovariance is even: transform its circular-even extension
    ext = np.concatenate([rw, rw[-2:0:-1]])
    power = rfft(ext).real
    power = np.maximum(power, 0.0)  # Hann lag window can leak tiny negatives
    freqs = np.arange(max_lag + 1) / (2 * max_lag * series.dt)
    scale = 1.0
    if g_scale is not None:
        if g_scale <= 0:
            raise ValueError("g_scale must be > 0")
        freqs = 2.0 * np.pi * freqs / g_scale
        scale = g_scale
    return PowerSpectrum(freqs=freqs, power=power, window=window, dt=series.dt, freq_scale=scale)


def _window_kernel_envelope(max_lag: int, window: str) -> np.ndarray:
    """Worst-case leakage of one spectral line vs distance in bins.

    envelope[j] bounds the relative power a pure line can deposit j bins
    away through the lag-window kernel, maximized over intra-bin line
    positions.
    """
    lags = np.arange(max_lag + 1)
    if window == "hann":
        w = 0.5 * (1.0 + np.cos(np.pi * lags / max_lag))
    elif window == "bartlett":
        w = 1.0 - lags / max_lag
    else:
        w = np.ones(max_lag + 1)
    env = np.zeros(max_lag + 1)
    # place a unit line at a few intra-bin offsets and record the kernel
    for frac in (0.0, 0.25, 0.5):
        f0 = (max_lag // 4 + frac) / (2 * max_lag)
        rw = np.cos(2.0 * np.pi * f0 * lags) * w
        ext = np.concatenate([rw, rw[-2:0:-1]])
        k = np.abs(rfft(ext).real)
        center = max_lag // 4
        peak = k[center : center + 2].max()
        for j in range(max_lag + 1):
            lo = center - j
            hi = center + j
            cand = 0.0
            if 0 <= lo:
                cand = max(cand, k[lo])
            if hi <= max_lag:
                cand = max(cand, k[hi])
            env[j] = max(env[j], cand / peak)
    # make the envelope non-increasing so it bounds the skirt everywhere
    return np.maximum.accumulate(env[::-1])[::-1]


def count_peaks(spectrum: PowerSpectrum, db_drop: float = 60.0, leak_margin: float = 2.0) -> int:
    """Number of resolved spectral lines within db_drop dB of the largest.

    Local maxima that sit below the leakage envelope of an already-counted
    stronger line (taper sidelobes) are discarded, strongest first.
    """
    power = spectrum.power
    height = power.max() * 10.0 ** (-db_drop / 10.0)
    if height <= 0:
        return 0
    cands, _ = find_peaks(power, height=height)
    if len(cands) == 0:
        return 0
    max_lag = len(power) - 1
    env = _window_kernel_envelope(max_lag, spectrum.window) * leak_margin
    span = int(np.searchsorted(-env, -10.0 ** (-db_drop / 10.0) / leak_margin))
    order = cands[np.argsort(power[cands])[::-1]]
    suppressed = np.zeros(len(power), dtype=bool)
    accepted = 0
    for c in order:
        if suppressed[c]:
            continue
        accepted += 1
        lo = max(0, c - span)
        hi = min(len(power), c + span + 1)
        offs = np.abs(np.arange(lo, hi) - c)
        leak = power[c] * env[offs]
        suppressed[lo:hi] |= power[lo:hi] <= leak
    return accepted


def dominant_frequency(spectrum: PowerSpectrum) -> float:
    """Frequency of the strongest non-DC spectral line, in cycles/time."""
    i = 1 + int(np.argmax(spectrum.power[1:]))
    f = float(spectrum.freqs[i])
    if spectrum.freq_scale != 1.0:  # undo the units-of-g rescaling
        f = f * spectrum.freq_scale / (2.0 * np.pi)
    return f


def mean_period_samples(series: TimeSeries, max_lag: Optional[int] = None) -> int:
    """Mean period in samples, from the dominant spectral peak."""
    spec = power_spectrum(series, max_lag=max_lag)
    f = dominant_frequency(spec)
    if f <= 0:
        return 1
    return max(1, int(round(1.0 / (f * series.dt))))


def acf_efold_lag(series: TimeSeries, max_lag: int = 1000) -> int:
    """First lag at which the autocorrelation falls below 1/e.

    An upper bound on useful embedding delays: coordinates further apart
    than the signal's memory are as good as independent, which matters for
    map-like signals whose mutual information sits on the noise floor from
    lag 1 on.
    """
    x = series.values
    max_lag = min(max_lag, len(x) // 2 - 1)
    acov = autocorrelation(x, max_lag)
    below = np.flatnonzero(acov < acov[0] / np.e)
    return int(below[0]) if len(below) else max_lag


def ami_delay(
    series: TimeSeries,
    max_lag: Optional[int] = None,
    bins: int = 16,
    max_samples: int = 2**20,
) -> int:
    """Embedding delay: first local minimum of the average mutual information.

    Mutual information uses equiprobable binning (bins quantile cells per
    axis).  Falls back to the first 1/e decay of the autocorrelation when
    no minimum occurs before max_lag.  Long series are capped at
    max_samples: the estimate converges far earlier.
    """
    x = series.values
    if len(x) < 1000:
        raise InsufficientDataError("ami_delay needs at least 1e3 samples")
    _check_not_constant(x)
    if len(x) > max_samples:
        x = x[:max_samples]
    n = len(x)
    if max_lag is None:
        max_lag = min(n // 10, 500)
    max_lag = min(max_lag, n - 2)

    edges = np.quantile(x, np.linspace(0.0, 1.0, bins + 1))[1:-1]
    b = np.searchsorted(edges, x, side="right")

    info = np.empty(max_lag + 1)
    info[0] = np.inf  # self-information; never a minimum
    for lag in range(1, max_lag + 1):
        joint = np.bincount(b[:-lag] * bins + b[lag:], minlength=bins * bins)
        p = joint / joint.sum()
        p = p.reshape(bins, bins)
        pi = p.sum(axis=1)
        pj = p.sum(axis=0)
        mask = p > 0
        info[lag] = float(
            (p[mask] * np.log(p[mask] / np.outer(pi, pj)[mask])).sum()
        )

    for lag in range(1, max_lag):
        if info[lag] <= info[lag + 1]:
            return lag

    # monotone decay: fall back to the 1/e point of the autocorrelation
    acov = autocorrelation(x, max_lag)
    below = np.flatnonzero(acov < acov[0] / np.e)
    return int(below[0]) if len(below) else max_lag


def _nearest_outside_window(tree, points, refs, theiler):
    """Nearest neighbor of each reference with |index - ref| > theiler.

    Returns (indices, distances); index -1 marks references with no
    admissible neighbor.  Progressive-k batched queries keep this exact.
    """
    n = tree.n
    nn = np.full(len(refs), -1, dtype=np.int64)
    dist = np.full(len(refs), np.inf)
    unresolved = np.arange(len(refs))
    k = min(n, max(4, theiler + 2))
    while len(unresolved):
        d, idx = tree.query(points[refs[unresolved]], k=k, workers=-1)
        ok = np.abs(idx - refs[unresolved][:, None]) > theiler
        ok &= np.isfinite(d) & (d > 0.0)  # exact duplicates carry no geometry
        has = ok.any(axis=1)
        first = np.argmax(ok, axis=1)
        rows = unresolved[has]
        nn[rows] = idx[has, first[has]]
        dist[rows] = d[has, first[has]]
        unresolved = unresolved[~has]
        if k >= n:
            break
        k = min(n, k * 4)
    return nn, dist


def _window_fits(x: np.ndarray, y: np.ndarray, min_len: int):
    """OLS fit statistics for every contiguous window of length >= min_len.

    Returns arrays (start, end, slope, r2, stderr); end inclusive.
    """
    cx = np.concatenate([[0.0], np.cumsum(x)])
    cy = np.concatenate([[0.0], np.cumsum(y)])
    cxx = np.concatenate([[0.0], np.cumsum(x * x)])
    cxy = np.concatenate([[0.0], np.cumsum(x * y)])
    cyy = np.concatenate([[0.0], np.cumsum(y * y)])

    starts, ends, slopes, r2s, errs = [], [], [], [], []
    n = len(y)
    for i0 in range(0, n - min_len + 1):
        i1 = np.arange(i0 + min_len - 1, n)
        m = i1 - i0 + 1.0
        sx = cx[i1 + 1] - cx[i0]
        sy = cy[i1 + 1] - cy[i0]
        sxx = cxx[i1 + 1] - cxx[i0]
        sxy = cxy[i1 + 1] - cxy[i0]
        syy = cyy[i1 + 1] - cyy[i0]
        vx = sxx - sx * sx / m
        vy = syy - sy * sy / m
        cov = sxy - sx * sy / m
        with np.errstate(invalid="ignore", divide="ignore"):
            slope = np.where(vx > 0, cov / np.where(vx > 0, vx, 1.0), 0.0)
            ssr = np.maximum(vy - slope * cov, 0.0)
            r2 = np.where(vy > 0, 1.0 - ssr / np.where(vy > 0, vy, 1.0), 0.0)
            se = np.sqrt(ssr / np.maximum(m - 2.0, 1.0) / np.where(vx > 0, vx, 1.0))
        starts.append(np.full(len(i1), i0))
        ends.append(i1)
        slopes.append(slope)
        r2s.append(r2)
        errs.append(se)
    return (
        np.concatenate(starts),
        np.concatenate(ends),
        np.concatenate(slopes),
        np.concatenate(r2s),
        np.concatenate(errs),
    )


def _select_fit_window(x, y, min_window, r2_threshold, offset=0):
    """Longest window with R^2 >= threshold, else the best-R^2 window."""
    min_len = min(min_window, max(4, (len(y) + 1) // 2), len(y))
    starts, ends, slopes, r2s, errs = _window_fits(x, y, min_len)
    lengths = ends - starts + 1
    qualifying = r2s >= r2_threshold
    if qualifying.any():
        idx = np.flatnonzero(qualifying)
        # longest first, then earliest start: deterministic tie-break
        order = np.lexsort((starts[idx], -lengths[idx]))
        best = idx[order[0]]
    else:
        order = np.lexsort((starts, -lengths, -r2s))
        best = order[0]
    return int(starts[best]) + offset, int(ends[best]) + offset


def _fit_window_stats(x, y, i0, i1):
    xx = np.asarray(x[i0 : i1 + 1], dtype=np.float64)
    yy = y[i0 : i1 + 1]
    slope, intercept = np.polyfit(xx, yy, 1)
    resid = yy - (slope * xx + intercept)
    vy = ((yy - yy.mean()) ** 2).sum()
    r2 = 1.0 - (resid**2).sum() / vy if vy > 0 else 0.0
    vx = ((xx - xx.mean()) ** 2).sum()
    se = np.sqrt((resid**2).sum() / max(len(yy) - 2, 1) / vx)
    return float(slope), float(r2), float(se)


def _plain_r2(x, y):
    if len(y) < 3:
        return 0.0
    _, r2, _ = _fit_window_stats(x, y, 0, len(y) - 1)
    return r2


def _auto_fit_range(kvals, curve, min_window, r2_threshold, theiler=0,
                    min_rise=1.5, sat_fraction=0.9, transient_fraction=0.6,
                    min_rise_r2=0.9):
    """Fit window for the divergence curve, per regime shape.

    The linear scaling region lives between the initial transient and the
    saturation plateau.  Exponential divergence (chaos) shows a rise that
    is straight against k; bounded dynamics either never rises appreciably
    or rises as the power law characteristic of quasiperiodic mode
    dephasing (straight against ln k), in which case the honest exponent
    is the plateau slope, ~0.

    For flow-like signals (Theiler window of several samples) the chaotic
    fit spans 1.1 to 2.2 mean periods: within the first period the
    separation is still dominated by the alignment transient, and a fixed
    period-anchored window keeps estimates comparable across embedding
    dimensions and initial states.  Map-like signals (Theiler ~ 1) use the
    60-90% band of the rise height instead.
    """
    n = len(curve)
    plateau = float(np.median(curve[-max(2, n // 4):]))
    span = plateau - curve[0]
    half = (max(0, n // 2), n - 1)
    if span < min_rise:
        return half  # no appreciable divergence: fit the plateau
    sat_level = plateau - (1.0 - sat_fraction) * span
    above = np.flatnonzero(curve >= sat_level)
    k_sat = int(above[0]) if len(above) else n - 1
    if k_sat < 6:
        return half
    # shape of the core rise (up to 75% height, k = 0 excluded: the first
    # step is dominated by the snap of the separation vector onto the
    # expanding direction, the top by the saturation bend)
    shape_above = np.flatnonzero(curve >= plateau - 0.25 * span)
    k_shape = int(shape_above[0]) if len(shape_above) else k_sat
    k_shape = max(k_shape, 6)
    rise_x = kvals[1:k_shape + 1].astype(np.float64)
    rise_y = curve[1:k_shape + 1]
    r2_lin = _plain_r2(rise_x, rise_y)
    r2_log = _plain_r2(np.log(rise_x), rise_y)
    if r2_log >= r2_lin or r2_lin < min_rise_r2:
        return half  # dephasing power law or structured wiggle: no exponent
    if theiler >= 4:
        lo_k = int(np.ceil(1.1 * theiler))
        hi_k = int(round(2.2 * theiler))
        lo_idx = int(np.searchsorted(kvals, lo_k))
        hi_idx = min(int(np.searchsorted(kvals, hi_k, side="right")) - 1, n - 1)
        # only usable when it starts before the saturation bend
        if hi_idx - lo_idx >= 4 and lo_idx < k_sat:
            return lo_idx, hi_idx
    lo_level = curve[0] + transient_fraction * span
    lo_idx = int(np.flatnonzero(curve >= lo_level)[0])
    lo_idx = max(1, min(lo_idx, k_sat - 3))
    return _select_fit_window(
        kvals[lo_idx:k_sat + 1].astype(np.float64),
        curve[lo_idx:k_sat + 1],
        min_window,
        r2_threshold,
        offset=lo_idx,
    )


def _k_grid(kmax: int, dense: int = 400, tail_points: int = 100) -> np.ndarray:
    """Evolution steps to evaluate: every step early, log-spaced later.

    The scaling region of chaotic curves lives at small k; the saturation
    plateau of regular curves extends to large k.  The mixed grid covers
    both without tracking kmax * n_refs separations.
    """
    head = np.arange(0, min(dense, kmax) + 1)
    if kmax <= dense:
        return head
    tail = np.round(np.geomspace(dense, kmax, tail_points)).astype(np.int64)
    return np.unique(np.concatenate([head, tail]))


def rosenstein_lambda(
    series: TimeSeries,
    embedding: Embedding,
    theiler: int,
    kmax: int,
    n_refs: int = 5000,
    min_window: int = 20,
    r2_threshold: float = 0.995,
    fit_range: Optional[tuple] = None,
    n_groups: int = 10,
) -> LyapunovCurve:
    """Maximal Lyapunov exponent from nearest-neighbor divergence.

    For each reference vector the nearest neighbor outside the Theiler
    window is found, the pair separation d_j(k) is followed for up to kmax
    steps, and lambda_max is the slope of <ln d_j(k)> over the linear
    scaling region (between the initial transient and the saturation
    plateau) divided by dt.  When the curve shows no exponential scaling
    region -- it stays flat, or rises only as the power law characteristic
    of quasiperiodic dephasing -- the exponent is read off the plateau and
    comes out ~0.  Pairs already separated by an attractor-scale distance
    at k = 0 carry no divergence information and are excluded.

    fit_range, given in evolution steps (k_lo, k_hi), overrides the
    automatic selection.
    """
    if theiler < 0:
        raise ValueError("theiler window must be >= 0")
    if kmax < 2:
        raise ValueError("kmax must be >= 2")
    X = embedding.as_array()
    usable = embedding.count - kmax
    if usable < 10:
        raise InsufficientDataError("series too short to follow pairs for kmax steps")

    Xc = np.ascontiguousarray(X[:usable])
    tree = cKDTree(Xc)
    refs = np.unique(np.linspace(0, usable - 1, min(n_refs, usable)).astype(np.int64))
    nn, d0 = _nearest_outside_window(tree, Xc, refs, theiler)

    # typical attractor-scale separation: median over a coarse pair sample
    probe = X[np.linspace(0, embedding.count - 1, 512).astype(np.int64)]
    half = len(probe) // 2
    sat = float(np.median(np.linalg.norm(probe[:half] - probe[half : 2 * half], axis=1)))

    keep = (nn >= 0) & (d0 > 0.0) & (d0 < sat)
    refs = refs[keep]
    nn = nn[keep]
    n_pairs = len(refs)
    reliable = n_pairs >= 100
    if n_pairs < 2:
        raise InsufficientDataError("fewer than 2 usable neighbor pairs")

    k_values = _k_grid(kmax)
    logs = np.empty((len(k_values), n_pairs))
    for i, k in enumerate(k_values):
        diff = X[refs + k] - X[nn + k]
        d = np.sqrt((diff * diff).sum(axis=1))
        with np.errstate(divide="ignore"):
            logs[i] = np.log(d)

    finite = np.isfinite(logs)
    counts = finite.sum(axis=1)
    curve = np.where(counts > 0, np.where(finite, logs, 0.0).sum(axis=1) / np.maximum(counts, 1), np.nan)
    good = np.isfinite(curve)
    ilast = int(np.flatnonzero(good)[-1]) if good.any() else 0
    if ilast < 3:
        raise InsufficientDataError("divergence curve too short to fit")
    curve = curve[: ilast + 1]
    k_values = k_values[: ilast + 1]

    if fit_range is not None:
        k_lo, k_hi = fit_range
        i0 = int(np.searchsorted(k_values, k_lo))
        i1 = int(np.searchsorted(k_values, k_hi, side="right")) - 1
        if not 0 <= i0 < i1 <= ilast:
            raise ValueError(f"fit_range {fit_range} outside curve span")
    else:
        i0, i1 = _auto_fit_range(k_values, curve, min_window, r2_threshold, theiler=theiler)
    slope, r2, se = _fit_window_stats(k_values, curve, i0, i1)

    # slope spread over disjoint reference groups: error bar that stays
    # honest when the curve is flat but structured
    group_slopes = []
    for gi in range(n_groups):
        sel = slice(gi * n_pairs // n_groups, (gi + 1) * n_pairs // n_groups)
        sub = logs[: ilast + 1, sel]
        fin = np.isfinite(sub)
        cnt = fin.sum(axis=1)
        gcurve = np.where(fin, sub, 0.0).sum(axis=1) / np.maximum(cnt, 1)
        if (cnt[i0 : i1 + 1] > 0).all():
            gs, _, _ = _fit_window_stats(k_values, gcurve, i0, i1)
            group_slopes.append(gs)
    group_se = (
        float(np.std(group_slopes, ddof=1) / np.sqrt(len(group_slopes)))
        if len(group_slopes) >= 3
        else 0.0
    )

    # slope spread over contiguous k-blocks of the fit window: catches the
    # coherent oscillation of a quasiperiodic plateau, which reference
    # groups share and OLS residuals understate
    n_blocks = min(6, (i1 - i0 + 1) // 5)
    block_se = 0.0
    if n_blocks >= 3:
        edges = np.linspace(i0, i1 + 1, n_blocks + 1).astype(int)
        block_slopes = [
            _fit_window_stats(k_values, curve, edges[b], edges[b + 1] - 1)[0]
            for b in range(n_blocks)
            if edges[b + 1] - edges[b] >= 3
        ]
        if len(block_slopes) >= 3:
            block_se = float(np.std(block_slopes, ddof=1) / np.sqrt(len(block_slopes)))

    dt = series.dt
    return LyapunovCurve(
        k_values=k_values,
        mean_log_sep=curve,
        fit_range=(int(k_values[i0]), int(k_values[i1])),
        lambda_max=slope / dt,
        fit_r2=r2,
        lambda_stderr=max(se, group_se, block_se) / dt,
        slope_per_step=slope,
        n_pairs=n_pairs,
        reliable=reliable,
        dim=embedding.dim,
        delay=embedding.delay,
        dt=dt,
    )


def fnn_embedding_dim(
    series: TimeSeries,
    delay: int,
    max_dim: int = 10,
    rtol: float = 15.0,
    atol: float = 2.0,
    threshold: float = 0.01,
    theiler: int = 0,
    max_refs: int = 20000,
) -> Optional[int]:
    """Minimum embedding dimension by the false-nearest-neighbor test.

    A neighbor pair at dimension d is false when the extra (d+1)-th
    coordinate either stretches it by more than rtol, or pushes the pair
    beyond atol standard deviations of the signal (loneliness test).
    Returns the smallest d whose false fraction drops below threshold, or
    None when no dimension up to max_dim unfolds the signal (noise).
    """
    if max_dim < 2:
        raise ValueError("max_dim must be >= 2")
    x = series.values
    _check_not_constant(x)
    sigma = float(np.std(x))
    if len(x) - max_dim * delay < 100:
        raise InsufficientDataError("series too short for the max_dim * delay span")

    for dim in range(1, max_dim + 1):
        count_next = len(x) - dim * delay  # vectors whose (d+1)-th coordinate exists
        emb = Embedding(series=series, delay=delay, dim=dim)
        X = np.ascontiguousarray(emb.as_array()[:count_next])
        tree = cKDTree(X)
        refs = np.unique(np.linspace(0, count_next - 1, min(max_refs, count_next)).astype(np.int64))
        nn, dist = _nearest_outside_window(tree, X, refs, theiler)
        ok = (nn >= 0) & (dist > 0.0)
        if ok.sum() < 10:
            continue
        r = dist[ok]
        extra = np.abs(x[refs[ok] + dim * delay] - x[nn[ok] + dim * delay])
        false = (extra / r > rtol) | (np.sqrt(r * r + extra * extra) > atol * sigma)
        if false.mean() < threshold:
            return dim
    return None


def classify_regime(
    lambda_max: float,
    lambda_stderr: float,
    abs_threshold: float = 0.02,
    n_sigma: float = 3.0,
    sigma_floor: float = 1e-3,
) -> str:
    """Map a Lyapunov estimate to "regular" / "chaotic" / "inconclusive".

    Regular demands the exponent be both small in absolute terms and
    statistically indistinguishable from zero; chaotic demands a positive
    exponent beyond both gates.  sigma_floor keeps exactly-flat curves
    (zero fit error) classifiable.
    """
    gate = max(n_sigma * lambda_stderr, sigma_floor)
    if lambda_max >= abs_threshold and lambda_max > gate:
        return "chaotic"
    if abs(lambda_max) < abs_threshold and abs(lambda_max) <= gate:
        return "regular"
    return "inconclusive"


def curve_for_plot(curves) -> dict:
    """Plot-ready table of one or more divergence curves.

    Rows carry t = k*dt and one mean-log-separation column per embedding
    dimension, each tagged transient/linear/saturation relative to its fit
    range; fit windows are echoed in the metadata.
    """
    if isinstance(curves, LyapunovCurve):
        curves = [curves]
    if not curves:
        raise ValueError("no curves given")
    n_rows = max(len(c.mean_log_sep) for c in curves)
    dt = curves[0].dt
    columns = ["k", "t"]
    for c in curves:
        columns += [f"mean_log_sep_d{c.dim}", f"region_d{c.dim}"]
    rows = []
    base_k = max(curves, key=lambda c: len(c.mean_log_sep)).k_values
    for i in range(n_rows):
        k = int(base_k[i])
        row = [k, k * dt]
        for c in curves:
            if i < len(c.mean_log_sep):
                lo, hi = c.fit_range
                ck = int(c.k_values[i])
                region = "transient" if ck < lo else ("linear" if ck <= hi else "saturation")
                row += [float(c.mean_log_sep[i]), region]
            else:
                row += ["", ""]
        rows.append(row)
    meta = {
        f"d{c.dim}": {
            "fit_k_lo": int(c.fit_range[0]),
            "fit_k_hi": int(c.fit_range[1]),
            "lambda_max": c.lambda_max,
            "slope_per_step": c.slope_per_step,
            "delay": c.delay,
        }
        for c in curves
    }
    return {"columns": columns, "rows": rows, "meta": meta}
