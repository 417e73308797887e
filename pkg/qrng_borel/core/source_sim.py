"""
Seeded simulation of a two-channel photon-pair detector.

Pair events arrive at shared Poisson times in both channels; each channel also
receives independent excess events (losses and dark counts folded into one
rate). Events are binned at ``bin_width`` and a non-paralyzable dead time is
applied per channel on the bin grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from qrng_borel.core.common import ConfigurationError, ShapeError

# Reference acquisition: 0.512 s spans of 2 ns bins, 20 ns APD dead time,
# ~8.5e5 singles and ~8e4 coincidences per span. The pair rate is raised by
# the ~6% of pairs that lose a photon to dead time in either channel.
DEFAULT_SPAN = 0.512
DEFAULT_BIN_WIDTH = 2e-9
DEFAULT_DEAD_TIME = 20e-9
DEFAULT_PAIR_RATE = 1.66e5
DEFAULT_EXCESS_RATE = 1.55e6

# Bin counts are persisted in a 32-bit header field.
MAX_BINS = 2**32 - 1

# Timestamp files and TimestampSeries use integer nanoseconds.
NS_PER_SECOND = 1_000_000_000


@dataclass(frozen=True)
class SourceConfig:
    """Parameters of a simulated acquisition."""

    pair_rate: float = DEFAULT_PAIR_RATE
    singles_excess_rate: float = DEFAULT_EXCESS_RATE
    span: float = DEFAULT_SPAN
    bin_width: float = DEFAULT_BIN_WIDTH
    dead_time: float = DEFAULT_DEAD_TIME
    seed: int = 0

    @property
    def bin_count(self) -> int:
        return int(round(self.span / self.bin_width))

    @property
    def dead_bins(self) -> int:
        """Minimum spacing, in bins, between two registered events on one channel."""
        return int(math.ceil(self.dead_time / self.bin_width - 1e-9))

    def validate(self) -> SourceConfig:
        if not self.span > 0:
            raise ConfigurationError(f"span must be positive, got {self.span}")
        if not self.bin_width > 0:
            raise ConfigurationError(f"bin_width must be positive, got {self.bin_width}")
        if self.dead_time < 0:
            raise ConfigurationError(f"dead_time must be non-negative, got {self.dead_time}")
        if self.pair_rate < 0 or self.singles_excess_rate < 0:
            raise ConfigurationError("rates must be non-negative")
        ratio = self.span / self.bin_width
        if abs(ratio - round(ratio)) > 1e-6 * max(1.0, ratio):
            raise ConfigurationError(
                f"span {self.span} is not an integer multiple of bin_width {self.bin_width}"
            )
        if self.bin_count > MAX_BINS:
            raise ConfigurationError(
                f"span/bin_width gives {self.bin_count:,} bins; at most {MAX_BINS:,} supported"
            )
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigurationError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        return self

    @classmethod
    def full_scale(cls, seed: int = 0) -> SourceConfig:
        """Configuration tuned to ~8.5e5 singles and ~8e4 coincidences per 0.512 s span."""
        return cls(seed=seed)


@dataclass
class BinSeries:
    """
    One binary value per time bin, stored sparsely as the sorted indices of 1-bins.

    ``bits`` materializes the dense 0/1 array; avoid it at full scale
    (2.56e8 bins per span).
    """

    indices: np.ndarray
    length: int
    bin_width: float
    _dense: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.indices = np.asarray(self.indices, dtype=np.int64)
        if self.indices.size and (self.indices[0] < 0 or self.indices[-1] >= self.length):
            raise ShapeError("bin indices fall outside the series length")

    @classmethod
    def from_bits(cls, bits, bin_width: float) -> BinSeries:
        arr = np.asarray(bits, dtype=np.uint8)
        return cls(np.flatnonzero(arr), int(arr.size), bin_width)

    @property
    def bits(self) -> np.ndarray:
        if self._dense is None:
            dense = np.zeros(self.length, dtype=np.uint8)
            dense[self.indices] = 1
            self._dense = dense
        return self._dense

    @property
    def count(self) -> int:
        return int(self.indices.size)

    def __len__(self) -> int:
        return self.length

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BinSeries):
            return NotImplemented
        return (
            self.length == other.length
            and self.bin_width == other.bin_width
            and np.array_equal(self.indices, other.indices)
        )


@dataclass
class TimestampSeries:
    """Strictly increasing detection times, held as integer nanoseconds."""

    ns: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.ns)
        if arr.size and arr.dtype.kind not in "iu":
            raise TypeError(
                f"timestamps are integer nanoseconds, got dtype {arr.dtype}; "
                "use TimestampSeries.from_seconds for float times"
            )
        self.ns = arr.astype(np.int64)

    @classmethod
    def from_seconds(cls, times) -> TimestampSeries:
        """Round times in seconds to the nanosecond grid."""
        seconds = np.asarray(times, dtype=np.float64)
        return cls(np.rint(seconds * NS_PER_SECOND).astype(np.int64))

    @property
    def times(self) -> np.ndarray:
        """Detection times in seconds."""
        return self.ns / NS_PER_SECOND

    def __len__(self) -> int:
        return int(self.ns.size)


def make_generator(seed: int, stream: int = 0) -> np.random.Generator:
    """
    Counter-based generator for one logical stream of a seed.

    Distinct ``stream`` values give independent streams, so acquisitions can be
    simulated in any order or in parallel with identical results.
    """
    seq = np.random.SeedSequence(int(seed), spawn_key=(int(stream),))
    return np.random.Generator(np.random.Philox(seq))


def poisson_arrivals(rng: np.random.Generator, rate: float, span: float) -> np.ndarray:
    """
    Arrival times of a homogeneous Poisson process on [0, span).

    Inter-arrival gaps are drawn by inverting the exponential CDF,
    ``-log(1 - U) / rate``, in chunks sized from the expected count.
    """
    if rate <= 0:
        return np.empty(0, dtype=np.float64)

    expected = rate * span
    chunk = int(expected + 6.0 * math.sqrt(expected) + 16)
    pieces = []
    offset = 0.0
    while True:
        gaps = -np.log1p(-rng.random(chunk)) / rate
        times = offset + np.cumsum(gaps)
        if times[-1] >= span:
            pieces.append(times[times < span])
            break
        pieces.append(times)
        offset = float(times[-1])
        chunk = max(16, int(6.0 * math.sqrt(expected)) + 16)
    return np.concatenate(pieces)


def apply_dead_time(indices: np.ndarray, dead_bins: int) -> np.ndarray:
    """
    Apply a non-paralyzable dead time to sorted event bin indices.

    An event is registered iff it lies at least ``dead_bins`` bins after the
    previous *registered* event; discarded events do not extend the dead time.
    Several events in one bin collapse into a single registered event.
    """
    kept = np.unique(indices)
    if dead_bins <= 1 or kept.size < 2:
        return kept

    while True:
        bad = np.empty(kept.size, dtype=bool)
        bad[0] = False
        bad[1:] = np.diff(kept) < dead_bins
        if not bad.any():
            return kept
        # The first violation of each run follows a registered event, so it is
        # certainly unregistered; later ones are re-examined next pass.
        first = bad.copy()
        first[1:] &= ~bad[:-1]
        kept = kept[~first]


def dead_time_corrected_rate(raw_rate: float, dead_time: float) -> float:
    """Registered rate of a non-paralyzable detector: rate / (1 + rate * dead_time)."""
    return raw_rate / (1.0 + raw_rate * dead_time)


def _channel_indices(rng, pair_times, cfg: SourceConfig) -> np.ndarray:
    excess = poisson_arrivals(rng, cfg.singles_excess_rate, cfg.span)
    times = np.concatenate([pair_times, excess])
    idx = np.floor(times / cfg.bin_width).astype(np.int64)
    idx = np.clip(idx, 0, cfg.bin_count - 1)
    idx.sort(kind="stable")
    return apply_dead_time(idx, cfg.dead_bins)


def simulate_source(cfg: SourceConfig, stream: int = 0) -> tuple[BinSeries, BinSeries]:
    """
    Simulate signal and idler detection series for one acquisition span.

    Args:
        cfg: Source configuration (validated here)
        stream: Logical stream index; acquisition ``i`` of a run uses ``stream=i``

    Returns:
        tuple: (signal, idler) BinSeries of ``cfg.bin_count`` bins each

    Raises:
        ConfigurationError: If the configuration is invalid
    """
    cfg.validate()
    rng = make_generator(cfg.seed, stream)

    pair_times = poisson_arrivals(rng, cfg.pair_rate, cfg.span)
    signal_idx = _channel_indices(rng, pair_times, cfg)
    idler_idx = _channel_indices(rng, pair_times, cfg)

    return (
        BinSeries(signal_idx, cfg.bin_count, cfg.bin_width),
        BinSeries(idler_idx, cfg.bin_count, cfg.bin_width),
    )


def coincidences(signal: BinSeries, idler: BinSeries) -> BinSeries:
    """
    Coincidence channel: bit n is ``signal_n AND idler_n``.

    Raises:
        ShapeError: If lengths or bin widths differ
    """
    if signal.length != idler.length:
        raise ShapeError(
            f"cannot combine series of different lengths ({signal.length} vs {idler.length})"
        )
    if not math.isclose(signal.bin_width, idler.bin_width, rel_tol=1e-12):
        raise ShapeError(
            f"cannot combine series of different bin widths "
            f"({signal.bin_width} vs {idler.bin_width})"
        )
    both = np.intersect1d(signal.indices, idler.indices, assume_unique=True)
    return BinSeries(both, signal.length, signal.bin_width)


def bins_to_timestamps(series: BinSeries) -> TimestampSeries:
    """Detection times of the 1-bins, ``index * bin_width``, on the nanosecond grid."""
    return TimestampSeries(
        np.rint(series.indices * (series.bin_width * NS_PER_SECOND)).astype(np.int64)
    )


def timestamps_to_bins(ts: TimestampSeries, length: int, bin_width: float) -> BinSeries:
    """Re-bin detection times onto a grid of ``length`` bins of ``bin_width``."""
    idx = np.rint(ts.ns / (bin_width * NS_PER_SECOND)).astype(np.int64)
    return BinSeries(np.unique(idx), length, bin_width)


def registered_counts(signal: BinSeries, idler: BinSeries, cfg: SourceConfig) -> dict[str, Any]:
    """
    Summarize one simulated acquisition.

    Returns:
        dict: signal, idler and coincidence counts plus the expected
        registered rate of one channel under the dead-time model
    """
    coinc = coincidences(signal, idler)
    raw_rate = cfg.pair_rate + cfg.singles_excess_rate
    return {
        "bins": cfg.bin_count,
        "span_s": cfg.span,
        "signal": signal.count,
        "idler": idler.count,
        "coincidences": coinc.count,
        "raw_channel_rate": raw_rate,
        "expected_registered_rate": dead_time_corrected_rate(raw_rate, cfg.dead_time),
    }


def assert_dead_time(series: BinSeries, dead_bins: int) -> None:
    """Raise if two 1-bins are closer than ``dead_bins`` bins."""
    if series.count > 1 and dead_bins > 0:
        gap = int(np.diff(series.indices).min())
        if gap < dead_bins:
            raise ShapeError(f"dead-time violated: 1-bins {gap} apart, minimum {dead_bins}")
