"""Coarse-grained recurrence statistics: invariant density, Kac check, return-time fits.

The signal is binned into cells of fixed width; a cell C of stationary
measure mu is chosen (by default the mode of the invariant density) and
the gaps between successive visits give the first-return-time
distribution.  For ergodic dynamics the Kac lemma fixes the mean return
time at 1/mu; return times are kept in integer sample units where that
identity is exact.
"""

from dataclasses import dataclass, replace
from typing import Optional, Sequence, Union

import numpy as np
from scipy import stats

from .errors import DegenerateSeriesError, InsufficientDataError
from .evolve import TimeSeries

DEFAULT_BIN_WIDTH = 1e-2


@dataclass(frozen=True)
class InvariantDensity:
    """Normalized occupation histogram of the signal."""

    bin_edges: np.ndarray
    counts: np.ndarray
    rho: np.ndarray

    @property
    def n_samples(self) -> int:
        return int(self.counts.sum())

    @property
    def bin_width(self) -> float:
        return float(self.bin_edges[1] - self.bin_edges[0])

    def cell(self, index: int) -> "Cell":
        return Cell(
            lo=float(self.bin_edges[index]),
            hi=float(self.bin_edges[index + 1]),
            origin=float(self.bin_edges[0]),
            width=self.bin_width,
            index=int(index),
        )


@dataclass(frozen=True)
class Cell:
    """Half-open interval [lo, hi), possibly tied to a histogram bin.

    When the cell came from an InvariantDensity, origin/width/index let the
    visit test reproduce the histogram's binning rule exactly, so the cell
    measure equals the density mass of the bin bit for bit.
    """

    lo: float
    hi: float
    origin: Optional[float] = None
    width: Optional[float] = None
    index: Optional[int] = None

    def membership(self, x: np.ndarray) -> np.ndarray:
        if self.index is not None:
            idx = np.floor((x - self.origin) / self.width)
            return idx.astype(np.int64) == self.index
        return (x >= self.lo) & (x < self.hi)


@dataclass(frozen=True)
class ReturnFit:
    """Verdict of the first-return-distribution test."""

    verdict: str  # "exponential" | "discrete" | "neither"
    ks_stat: float
    ks_pvalue: float
    top10_mass: float
    rate: float


@dataclass(frozen=True)
class SuccessiveFit:
    """Verdict of the two-successive-returns (Erlang-2) test."""

    accepted: bool
    ks_stat: float
    ks_pvalue: float
    serial_correlation: float
    n_pairs: int


@dataclass(frozen=True)
class RecurrenceReport:
    """Return-time statistics of one cell.

    taus are first-return times in integer samples; kac_ratio is
    mean(tau) * mu and equals 1 exactly in expectation for ergodic
    sampling.  fit and tau2s are attached by the fitting stage.
    """

    cell: Cell
    mu: float
    taus: np.ndarray
    taus_time: np.ndarray
    mean_tau: float
    kac_ratio: float
    n_visits: int
    fit: Optional[ReturnFit] = None
    tau2s: Optional[np.ndarray] = None

    def with_fit(self, fit: ReturnFit) -> "RecurrenceReport":
        return replace(self, fit=fit)


def invariant_density(series: TimeSeries, bin_width: float = DEFAULT_BIN_WIDTH) -> InvariantDensity:
    """Histogram of the signal over [min, max] with fixed-width cells."""
    x = series.values
    lo = float(x.min())
    hi = float(x.max())
    if hi <= lo:
        raise DegenerateSeriesError("series is constant; no invariant density")
    span = hi - lo
    # at least ~10 cells across the range (5% slack for float edges)
    if not 0.0 < bin_width <= span / 9.5:
        raise ValueError("bin_width must be in (0, range/10]")
    nbins = int(np.floor(span / bin_width)) + 1
    idx = np.floor((x - lo) / bin_width).astype(np.int64)
    np.clip(idx, 0, nbins - 1, out=idx)
    counts = np.bincount(idx, minlength=nbins)
    edges = lo + bin_width * np.arange(nbins + 1)
    rho = counts / (len(x) * bin_width)
    return InvariantDensity(bin_edges=edges, counts=counts, rho=rho)


def select_cell(
    density: InvariantDensity,
    policy: Union[str, Sequence[float]] = "mode",
) -> Cell:
    """Pick the cell C for the recurrence analysis.

    "mode" takes the bin of maximal measure (ties break to the
    lowest-value bin); "median-support" the bin containing the sample
    median; an explicit (lo, hi) pair is passed through untouched.
    """
    if not isinstance(policy, str):
        lo, hi = float(policy[0]), float(policy[1])
        if not lo < hi:
            raise ValueError("explicit cell needs lo < hi")
        return Cell(lo=lo, hi=hi)
    if density.counts.sum() == 0:
        raise ValueError("empty density")
    if policy == "mode":
        return density.cell(int(np.argmax(density.counts)))
    if policy == "median-support":
        cum = np.cumsum(density.counts)
        return density.cell(int(np.searchsorted(cum, 0.5 * density.n_samples)))
    raise ValueError(f"unknown cell policy {policy!r}")


def recurrence_times(series: TimeSeries, cell: Cell) -> RecurrenceReport:
    """First-return times to the cell, Kac ratio, and the visit measure.

    Every sample inside C counts as a visit (consecutive in-cell samples
    give tau = 1), which keeps the discrete Kac identity <tau> * mu = 1
    exact for ergodic sampling.
    """
    x = series.values
    visits = np.flatnonzero(cell.membership(x))
    if len(visits) < 2:
        raise InsufficientDataError(
            f"cell [{cell.lo:.6g}, {cell.hi:.6g}) visited {len(visits)} time(s); "
            "need at least 2"
        )
    mu = len(visits) / len(x)
    taus = np.diff(visits)
    mean_tau = float(taus.mean())
    return RecurrenceReport(
        cell=cell,
        mu=mu,
        taus=taus,
        taus_time=taus * series.dt,
        mean_tau=mean_tau,
        kac_ratio=mean_tau * mu,
        n_visits=len(visits),
    )


def tau_histogram(report: RecurrenceReport):
    """Distinct return times and their probabilities (plot-ready F(tau))."""
    values, counts = np.unique(report.taus, return_counts=True)
    return values, counts / len(report.taus)


def fit_return_distribution(
    report: RecurrenceReport,
    min_returns: int = 500,
    p_threshold: float = 0.01,
    discrete_top: int = 10,
    discrete_mass: float = 0.90,
) -> ReturnFit:
    """Classify F(tau): discrete support, exponential with rate mu, or neither.

    Discrete support (the quasiperiodic signature) is checked first: if
    the top discrete_top distinct tau values hold more than discrete_mass
    of the returns the verdict is "discrete".  Otherwise a one-sample KS
    test against mu * exp(-mu tau) with the rate FIXED to the measured
    cell measure (not fitted) decides "exponential" vs "neither".
    """
    taus = report.taus
    if len(taus) < min_returns:
        raise InsufficientDataError(
            f"{len(taus)} returns < {min_returns}; series too short for a fit"
        )
    values, counts = np.unique(taus, return_counts=True)
    top = np.sort(counts)[::-1][:discrete_top]
    top10_mass = float(top.sum() / len(taus))

    ks = stats.kstest(taus, "expon", args=(0.0, 1.0 / report.mu))
    if top10_mass > discrete_mass:
        verdict = "discrete"
    elif ks.pvalue > p_threshold:
        verdict = "exponential"
    else:
        verdict = "neither"
    return ReturnFit(
        verdict=verdict,
        ks_stat=float(ks.statistic),
        ks_pvalue=float(ks.pvalue),
        top10_mass=top10_mass,
        rate=report.mu,
    )


def erlang2_ks(sums: np.ndarray, rate: float):
    """KS statistic and p-value of sums against rate^2 tau e^{-rate tau}."""
    return stats.kstest(sums, "gamma", args=(2.0, 0.0, 1.0 / rate))


def successive_return_test(
    series: TimeSeries,
    cell: Cell,
    min_visits: int = 10_000,
    p_threshold: float = 0.01,
) -> SuccessiveFit:
    """Erlang-2 test on sums of two successive return times.

    For Poissonian recurrences tau_i + tau_{i+1} follows mu^2 tau e^{-mu
    tau} and consecutive returns are uncorrelated.  Sums use disjoint
    pairs so the KS test sees independent draws.
    """
    report = recurrence_times(series, cell)
    if report.n_visits < min_visits:
        raise InsufficientDataError(
            f"{report.n_visits} visits < {min_visits}; need a longer series"
        )
    taus = report.taus
    n2 = len(taus) // 2
    sums = taus[0 : 2 * n2 : 2] + taus[1 : 2 * n2 : 2]
    ks = erlang2_ks(sums, report.mu)
    r = 0.0 if taus.std() == 0 else float(np.corrcoef(taus[:-1], taus[1:])[0, 1])
    return SuccessiveFit(
        accepted=bool(ks.pvalue > p_threshold),
        ks_stat=float(ks.statistic),
        ks_pvalue=float(ks.pvalue),
        serial_correlation=r,
        n_pairs=int(n2),
    )
