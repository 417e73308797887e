"""
Turn detection timestamps into candidate-random bits.

Intervals between subsequent detections follow an exponential law. After
dropping intervals shorter than ``t0`` (dead-time depletion) and shifting the
rest by ``t0``, each interval is encoded against the value splitting the
interval distribution into equal halves, or against ``k`` equiprobable bins.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from qrng_borel.core.common import (
    EmptyResultError,
    InsufficientDataError,
    OrderingError,
    as_bit_array,
)
from qrng_borel.core.source_sim import NS_PER_SECOND, BinSeries, TimestampSeries

THRESHOLD_MODES = ("median", "analytic")

# Quantile rule shared by split_threshold and encode_multibin; "midpoint"
# averages the two straddling order statistics, so k=2 reproduces the median.
QUANTILE_METHOD = "midpoint"

# Relative slack when comparing durations against t0; far below the
# spacing of any nanosecond or bin grid.
T0_RTOL = 1e-9


@dataclass
class IntervalSeries:
    """Inter-detection durations in seconds, with the truncation offset already subtracted."""

    durations: np.ndarray
    truncation_offset: float = 0.0

    def __post_init__(self):
        self.durations = np.asarray(self.durations, dtype=np.float64)

    def __len__(self) -> int:
        return int(self.durations.size)


@dataclass
class BitSequence:
    """Ordered sequence of 0/1 symbols."""

    bits: np.ndarray

    def __post_init__(self):
        self.bits = as_bit_array(self.bits)

    @classmethod
    def from_string(cls, text: str) -> BitSequence:
        return cls(as_bit_array(text))

    @property
    def n(self) -> int:
        return int(self.bits.size)

    def __len__(self) -> int:
        return self.n

    def __str__(self) -> str:
        return (self.bits + ord("0")).tobytes().decode("ascii")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BitSequence):
            return NotImplemented
        return np.array_equal(self.bits, other.bits)

    def ones_fraction(self) -> float:
        return float(self.bits.mean()) if self.n else 0.0


def interarrival(ts: TimestampSeries) -> IntervalSeries:
    """
    Differences between subsequent detection times.

    Differences are taken on the integer nanosecond grid before scaling to
    seconds, so equal gaps give bit-identical durations.

    Raises:
        InsufficientDataError: Fewer than 2 timestamps
        OrderingError: Timestamps not strictly increasing
    """
    ns = ts.ns
    if ns.size < 2:
        raise InsufficientDataError(
            f"need at least 2 timestamps to form an interval, got {ns.size}"
        )
    steps = np.diff(ns)
    if (steps <= 0).any():
        k = int(np.argmax(steps <= 0))
        raise OrderingError(
            f"timestamps must be strictly increasing; position {k + 1} is not after {k}"
        )
    return IntervalSeries(steps / NS_PER_SECOND, 0.0)


def interarrival_bins(series: BinSeries) -> IntervalSeries:
    """
    Intervals between the 1-bins of a BinSeries, computed on the integer bin grid.

    Equal bin gaps give bit-identical durations, so threshold ties are exact.
    """
    if series.count < 2:
        raise InsufficientDataError(
            f"need at least 2 detections to form an interval, got {series.count}"
        )
    return IntervalSeries(np.diff(series.indices).astype(np.float64) * series.bin_width, 0.0)


def truncate_dead_time(iv: IntervalSeries, t0: float) -> IntervalSeries:
    """
    Drop intervals shorter than ``t0`` and map the rest ``t -> t - t0``.

    Durations within a relative ``T0_RTOL`` of ``t0`` count as equal to it, so a
    ``t0`` on the detection grid keeps the intervals of exactly ``t0``.

    Raises:
        ValueError: If t0 is negative
        EmptyResultError: If every interval is dropped
    """
    if t0 < 0:
        raise ValueError(f"t0 must be non-negative, got {t0}")
    if t0 == 0:
        return IntervalSeries(iv.durations.copy(), iv.truncation_offset)

    kept = iv.durations[iv.durations >= t0 * (1.0 - T0_RTOL)]
    kept = np.maximum(kept - t0, 0.0)
    if kept.size == 0:
        raise EmptyResultError(
            f"truncation at t0={t0:g}s dropped all {iv.durations.size} intervals"
        )
    return IntervalSeries(kept, iv.truncation_offset + t0)


def split_threshold(iv: IntervalSeries) -> float:
    """
    Empirical value splitting the durations into two equal halves.

    Even-sized samples return the midpoint of the two central values.

    Raises:
        InsufficientDataError: If the series is empty
    """
    if len(iv) == 0:
        raise InsufficientDataError("cannot compute a split threshold of an empty series")
    return float(np.quantile(iv.durations, 0.5, method=QUANTILE_METHOD))


def fit_rate(iv: IntervalSeries) -> float:
    """Maximum-likelihood exponential rate, ``1 / mean(duration)``."""
    if len(iv) == 0:
        raise InsufficientDataError("cannot fit a rate to an empty series")
    mean = float(iv.durations.mean())
    if mean <= 0:
        raise InsufficientDataError("cannot fit a rate to all-zero durations")
    return 1.0 / mean


def analytic_threshold(iv: IntervalSeries) -> float:
    """Median of the fitted exponential law, ``ln 2 / lambda``."""
    return math.log(2.0) / fit_rate(iv)


def choose_threshold(iv: IntervalSeries, mode: str = "median") -> float:
    """Threshold for encode_median according to ``mode`` (median or analytic)."""
    if mode == "median":
        return split_threshold(iv)
    if mode == "analytic":
        return analytic_threshold(iv)
    raise ValueError(f"unknown threshold mode {mode!r}; choose from {', '.join(THRESHOLD_MODES)}")


def encode_median(iv: IntervalSeries, x: float) -> BitSequence:
    """
    One bit per interval: 0 if ``t < x``, 1 if ``t > x``; intervals equal to ``x`` are dropped.
    """
    if not x > 0:
        raise ValueError(f"threshold must be positive, got {x}")
    d = iv.durations
    d = d[d != x]
    return BitSequence((d > x).astype(np.uint8))


def quantile_edges(iv: IntervalSeries, k: int) -> np.ndarray:
    """Bin edges at the empirical quantiles j/k, j=1..k-1."""
    q = np.arange(1, k) / k
    return np.quantile(iv.durations, q, method=QUANTILE_METHOD)


def encode_multibin(iv: IntervalSeries, k: int) -> BitSequence:
    """
    Encode each interval as the log2(k)-bit index of its equiprobable bin, MSB first.

    Intervals equal to any bin edge are discarded.

    Raises:
        ValueError: If k is not a power of two >= 2
        InsufficientDataError: If there are fewer intervals than bins
    """
    if k < 2 or k & (k - 1):
        raise ValueError(f"bin count must be a power of two >= 2, got {k}")
    if len(iv) < k:
        raise InsufficientDataError(f"need at least {k} intervals for {k} bins, got {len(iv)}")

    edges = quantile_edges(iv, k)
    d = iv.durations
    d = d[~np.isin(d, edges)]
    index = np.searchsorted(edges, d, side="left")

    width = int(math.log2(k))
    shifts = np.arange(width - 1, -1, -1)
    bits = (index[:, None] >> shifts[None, :]) & 1
    return BitSequence(bits.reshape(-1).astype(np.uint8))


def von_neumann(bits) -> BitSequence:
    """
    Von Neumann debiasing over non-overlapping pairs: 01 -> 0, 10 -> 1, 00/11 dropped.
    """
    arr = as_bit_array(bits)
    pairs = arr[: arr.size - arr.size % 2].reshape(-1, 2)
    keep = pairs[:, 0] != pairs[:, 1]
    return BitSequence(pairs[keep, 0].copy())


def split_sequence(bits, sequences: int, length: int) -> list[BitSequence]:
    """
    Cut ``sequences`` consecutive sub-strings of ``length`` bits from the start of ``bits``.

    Raises:
        InsufficientDataError: If fewer than sequences * length bits are available
    """
    arr = as_bit_array(bits)
    if sequences < 1 or length < 1:
        raise ValueError("sequences and length must be positive")
    needed = sequences * length
    if needed > arr.size:
        raise InsufficientDataError(
            f"{sequences} x {length} = {needed:,} bits requested, only {arr.size:,} available"
        )
    return [BitSequence(chunk.copy()) for chunk in arr[:needed].reshape(sequences, length)]


def extract_bits(
    ts: TimestampSeries,
    t0: float = 0.0,
    mode: str = "median",
    k: int = 2,
    apply_von_neumann: bool = False,
) -> tuple[BitSequence, dict]:
    """
    Full extraction: interarrival, truncation, threshold, encoding, optional debiasing.

    Returns:
        tuple: (bits, info) where info records interval counts, threshold and rate
    """
    iv = truncate_dead_time(interarrival(ts), t0)
    return encode_intervals(iv, mode=mode, k=k, apply_von_neumann=apply_von_neumann)


def encode_intervals(
    iv: IntervalSeries,
    mode: str = "median",
    k: int = 2,
    apply_von_neumann: bool = False,
) -> tuple[BitSequence, dict]:
    """Encode an already-truncated interval series; see extract_bits."""
    if k == 2:
        threshold = choose_threshold(iv, mode)
        bits = encode_median(iv, threshold)
    else:
        if mode != "median":
            raise ValueError("multi-bin encoding uses empirical quantile edges only")
        threshold = split_threshold(iv)
        bits = encode_multibin(iv, k)

    info = {
        "intervals": len(iv),
        "t0": iv.truncation_offset,
        "mode": mode,
        "bins": k,
        "threshold": threshold,
        "fitted_rate": fit_rate(iv),
        "raw_bits": bits.n,
        "von_neumann": apply_von_neumann,
    }
    if apply_von_neumann:
        bits = von_neumann(bits)
    info["bits"] = bits.n
    return bits, info
