"""Estimators for the stylized-fact analyses: tails, clustering, inequality, surprise.

All functions are pure: they read their inputs and return fresh values, so they
are safe to call concurrently. Return series are expected in base-10 logs, the
convention used everywhere in this package.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DegenerateInputError, SampleSizeError
from .market import SimulationRecord

#: above this many eligible cutoffs the KS scan switches to a log-spaced subset
DEFAULT_MAX_CUTOFFS = 20_000


@dataclass(frozen=True)
class TailFit:
    """Hill fit of a magnitude sample: P(|x| > x) ~ (x / cutoff)**-exponent."""

    exponent: float
    cutoff: float
    ks_distance: float
    n_tail: int


@dataclass(frozen=True)
class CcdfCurve:
    """Rank-ordered complementary CDF: k-th largest value paired with k/n."""

    values: np.ndarray         # non-increasing
    probabilities: np.ndarray  # strictly increasing to 1


@dataclass(frozen=True)
class SurpriseSeries:
    """Parallel (tau, |r|) samples for steps whose information state recurred."""

    taus: np.ndarray
    magnitudes: np.ndarray


@dataclass(frozen=True)
class SurpriseSummary:
    series: SurpriseSeries
    bin_centers: np.ndarray     # geometric centers of surviving log-spaced tau bins
    bin_means: np.ndarray       # mean |r| per bin
    bin_counts: np.ndarray
    log_correlation: float      # Pearson correlation of log tau with log |r|
    tau_ccdf: CcdfCurve
    tau_tail: Optional[TailFit]  # None when there are too few recurrences to fit


def normalize_by_std(x: Sequence[float]) -> np.ndarray:
    """Divide by the sample standard deviation so the output has std 1."""
    a = np.asarray(x, dtype=float)
    if a.size < 2:
        raise SampleSizeError(f"need at least 2 values to normalize, got {a.size}")
    std = float(a.std())
    if std == 0.0 or not math.isfinite(std):
        raise DegenerateInputError("cannot normalize a zero-variance sequence")
    return a / std


def ccdf_rank_ordered(magnitudes: Sequence[float]) -> CcdfCurve:
    """CCDF by rank ordering: the k-th largest magnitude gets probability k/n."""
    a = np.asarray(magnitudes, dtype=float)
    if a.size == 0:
        raise SampleSizeError("cannot rank-order an empty sample")
    if np.any(a < 0):
        raise ValueError("magnitudes must be nonnegative")
    values = np.sort(a)[::-1]
    probabilities = np.arange(1, a.size + 1) / a.size
    return CcdfCurve(values=values, probabilities=probabilities)


def hill_fit_ks(
    magnitudes: Sequence[float],
    min_tail: int = 10,
    max_cutoffs: Optional[int] = DEFAULT_MAX_CUTOFFS,
) -> TailFit:
    """Hill tail fit with the cutoff that minimizes the Kolmogorov-Smirnov distance.

    Every order statistic leaving at least ``min_tail`` tail points is a cutoff
    candidate; for each, the Hill estimate is the inverse mean of
    ``ln(x_i / x_min)`` over the tail and the KS distance compares the rank
    CCDF of the tail against ``(x / x_min)**-xi``. Ties in KS go to the larger
    tail. Samples with more candidates than ``max_cutoffs`` are scanned on a
    log-spaced subset of tail sizes (pass ``None`` to force the full scan).
    """
    x = np.asarray(magnitudes, dtype=float)
    x = x[x > 0]
    if x.size < 100:
        raise SampleSizeError(f"hill_fit_ks needs >= 100 positive values, got {x.size}")
    if min_tail < 2:
        raise ValueError("min_tail must be >= 2")
    x = np.sort(x)[::-1]
    logx = np.log(x)
    n = x.size

    tails = np.arange(min_tail, n + 1)
    if max_cutoffs is not None and tails.size > max_cutoffs:
        grid = np.geomspace(min_tail, n, max_cutoffs)
        tails = np.unique(np.rint(grid).astype(np.int64))
    csum = np.cumsum(logx)
    hill_means = csum[tails - 1] / tails - logx[tails - 1]

    ranks = np.arange(1, n + 1, dtype=float)
    best: Optional[tuple[float, int, float]] = None  # (ks, n_tail, xi)
    for k, mean_log in zip(tails, hill_means):
        if mean_log <= 0.0:  # degenerate tail of identical values
            continue
        xi = 1.0 / mean_log
        model = np.exp(-xi * (logx[:k] - logx[k - 1]))
        ks = float(np.abs(ranks[:k] / k - model).max())
        if best is None or ks <= best[0]:
            best = (ks, int(k), xi)
    if best is None:
        raise DegenerateInputError("all cutoff candidates have an empty log-spacing")
    ks, n_tail, xi = best
    return TailFit(exponent=xi, cutoff=float(x[n_tail - 1]), ks_distance=ks, n_tail=n_tail)


def autocorr_abs(returns: Sequence[float], max_lag: int) -> np.ndarray:
    """Sample autocorrelation of return magnitudes at lags 0..max_lag.

    Biased (1/n) normalization; the lag-0 value 1 is prepended by convention.
    """
    r = np.abs(np.asarray(returns, dtype=float))
    n = r.size
    if max_lag < 1:
        raise ValueError("max_lag must be >= 1")
    if n <= max_lag + 1:
        raise SampleSizeError(f"need more than max_lag + 1 = {max_lag + 1} values, got {n}")
    centered = r - r.mean()
    denom = float(np.dot(centered, centered))
    if denom == 0.0:
        raise DegenerateInputError("magnitude series has zero variance")
    out = np.empty(max_lag + 1)
    out[0] = 1.0
    for lag in range(1, max_lag + 1):
        out[lag] = float(np.dot(centered[:-lag], centered[lag:])) / denom
    return out


def kurtosis(x: Sequence[float]) -> float:
    """Non-excess kurtosis m4 / m2**2 (3 for a normal distribution)."""
    a = np.asarray(x, dtype=float)
    if a.size < 4:
        raise SampleSizeError(f"kurtosis needs at least 4 values, got {a.size}")
    centered = a - a.mean()
    m2 = float(np.mean(centered * centered))
    if m2 == 0.0:
        raise DegenerateInputError("kurtosis of a constant sequence is undefined")
    m4 = float(np.mean(centered ** 4))
    return m4 / (m2 * m2)


def reduction_ratio(magnitudes: Sequence[float], head: int, tail: int) -> float:
    """Mean of the first ``head`` magnitudes over the mean of the last ``tail``.

    A zero tail mean yields +inf so fully quieted markets stay representable.
    """
    a = np.asarray(magnitudes, dtype=float)
    if head < 1 or tail < 1:
        raise ValueError("head and tail must be >= 1")
    if head + tail > a.size:
        raise SampleSizeError(f"head + tail = {head + tail} exceeds sample size {a.size}")
    head_mean = float(a[:head].mean())
    tail_mean = float(a[-tail:].mean())
    if tail_mean == 0.0:
        return math.inf
    return head_mean / tail_mean


def gini(values: Sequence[float]) -> float:
    """Gini index of a nonnegative sample, in [0, 1)."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise SampleSizeError("gini of an empty sample is undefined")
    if np.any(v < 0):
        raise ValueError("gini requires nonnegative values")
    total = float(v.sum())
    if total == 0.0:
        raise DegenerateInputError("gini of an all-zero sample is undefined")
    v = np.sort(v)
    n = v.size
    ranks = np.arange(1, n + 1, dtype=float)
    return float(2.0 * np.dot(ranks, v) / (n * total) - (n + 1.0) / n)


def income_factor(mean_capitals: Sequence[float], t0: int) -> float:
    """Least-squares slope of squared mean capital versus time, over t >= t0."""
    c = np.asarray(mean_capitals, dtype=float)
    if not 0 <= t0 < c.size:
        raise ValueError(f"t0 = {t0} outside the series of length {c.size}")
    if c.size - t0 < 10:
        raise SampleSizeError(f"need at least 10 points after t0, got {c.size - t0}")
    t = np.arange(t0, c.size, dtype=float)
    y = c[t0:] ** 2
    dt = t - t.mean()
    dy = y - y.mean()
    return float(np.dot(dt, dy) / np.dot(dt, dt))


def surprise_stats(
    record: SimulationRecord,
    bins_per_decade: int = 10,
    min_bin_count: int = 20,
    max_cutoffs: Optional[int] = DEFAULT_MAX_CUTOFFS,
) -> SurpriseSummary:
    """Relate return magnitudes to the age tau of their information states.

    Pairs each step's tau with the magnitude of the return realized at that
    step, then reports (i) mean |r| in log-spaced tau bins (bins with fewer
    than ``min_bin_count`` samples are dropped), (ii) the Pearson correlation
    of log tau with log |r|, and (iii) the rank CCDF of tau with its Hill fit.
    The Hill exponent is the CCDF exponent; the density P(tau) falls off one
    power faster.
    """
    taus = record.taus
    ok = np.isfinite(taus)
    ok[0] = False  # no return is defined at the first step
    if not ok.any():
        raise DegenerateInputError("record contains no recurrent information states")
    tau = taus[ok]
    mags = np.abs(record.returns[np.flatnonzero(ok) - 1])
    series = SurpriseSeries(taus=tau.astype(np.int64), magnitudes=mags)

    # conditional means on a 10^(1/bins_per_decade) ladder starting at tau = 1
    n_edges = int(math.ceil(math.log10(tau.max()) * bins_per_decade)) + 2
    edges = 10.0 ** (np.arange(n_edges) / bins_per_decade)
    idx = np.digitize(tau, edges) - 1
    counts = np.bincount(idx, minlength=n_edges - 1)[: n_edges - 1]
    sums = np.bincount(idx, weights=mags, minlength=n_edges - 1)[: n_edges - 1]
    keep = counts >= min_bin_count
    centers = np.sqrt(edges[:-1] * edges[1:])[keep]
    means = sums[keep] / counts[keep]

    positive = mags > 0
    if positive.sum() >= 2:
        log_corr = float(np.corrcoef(np.log10(tau[positive]), np.log10(mags[positive]))[0, 1])
    else:
        log_corr = math.nan

    tau_ccdf = ccdf_rank_ordered(tau)
    tau_tail = hill_fit_ks(tau, max_cutoffs=max_cutoffs) if tau.size >= 100 else None
    return SurpriseSummary(
        series=series,
        bin_centers=centers,
        bin_means=means,
        bin_counts=counts[keep],
        log_correlation=log_corr,
        tau_ccdf=tau_ccdf,
        tau_tail=tau_tail,
    )
