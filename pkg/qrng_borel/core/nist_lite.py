"""
A subset of the SP800-22 statistical battery.

Each test maps a bit sequence to a TestResult with a p-value; run_battery
applies every test to a set of sequences and aggregates the pass proportion and
the uniformity of the p-values, the way the reference suite reports them.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable

import click
import numpy as np
from scipy import fft

from qrng_borel.core.common import as_bit_array
from qrng_borel.core.special import clip_p, erfc, igamc, normal_cdf

DEFAULT_ALPHA = 0.01
DEFAULT_MIN_PASS_FRACTION = 0.97
DEFAULT_BLOCK_SIZE = 128
DEFAULT_APEN_M = 10
UNIFORMITY_ALPHA = 0.0001
UNIFORMITY_BINS = 10

LONGEST_RUN_BLOCK = 8
# Classes of the longest run of ones in an 8-bit block: <=1, 2, 3, >=4.
LONGEST_RUN_CLASSES = (1, 2, 3, 4)
# Published values for M=8; longest_run_class_probabilities() recomputes them.
PUBLISHED_LONGEST_RUN_PROBS = (0.2148, 0.3672, 0.2305, 0.1875)

NOT_IMPLEMENTED = ("Rank", "Non-Overlapping Template", "Overlapping Template")

STATUS_PASS = "pass"
STATUS_FAIL = "fail"
STATUS_NOT_RUN = "not run"
STATUS_NOT_IMPLEMENTED = "not implemented"


class NotApplicable(Exception):
    """Raised by a test whose length precondition fails."""


@dataclass
class TestResult:
    test_name: str
    p_value: float | None
    passed: bool
    status: str = STATUS_PASS
    statistic: float | None = None
    detail: str = ""

    __test__ = False

    def to_dict(self) -> dict[str, Any]:
        return {
            "test_name": self.test_name,
            "p_value": self.p_value,
            "pass": self.passed,
            "status": self.status,
            "statistic": self.statistic,
            "detail": self.detail,
        }


def _result(name: str, p: float, alpha: float, statistic: float | None = None) -> TestResult:
    p = clip_p(p)
    passed = p >= alpha
    return TestResult(name, p, passed, STATUS_PASS if passed else STATUS_FAIL, statistic)


def _require(n: int, minimum: int, name: str) -> None:
    if n < minimum:
        raise NotApplicable(f"{name} needs at least {minimum} bits, got {n}")


def frequency_test(bits, alpha: float = DEFAULT_ALPHA) -> TestResult:
    """Monobit test: S = sum(2b - 1), p = erfc(|S| / sqrt(2n))."""
    arr = as_bit_array(bits)
    n = arr.size
    _require(n, 100, "Frequency")
    s = 2 * int(arr.sum()) - n
    return _result("Frequency", erfc(abs(s) / math.sqrt(2.0 * n)), alpha, float(s))


def block_frequency_test(
    bits, block_size: int = DEFAULT_BLOCK_SIZE, alpha: float = DEFAULT_ALPHA
) -> TestResult:
    """Proportion of ones in N = n // M blocks; chi2 = 4M sum (pi_j - 1/2)^2, p = Q(N/2, chi2/2)."""
    arr = as_bit_array(bits)
    n = arr.size
    _require(n, max(100, block_size), "Block Frequency")
    count = n // block_size
    pi = arr[: count * block_size].reshape(count, block_size).mean(axis=1)
    chi2 = 4.0 * block_size * float(np.sum((pi - 0.5) ** 2))
    return _result("Block Frequency", igamc(count / 2.0, chi2 / 2.0), alpha, chi2)


def runs_test(bits, alpha: float = DEFAULT_ALPHA) -> TestResult:
    """Total number of runs V against its expectation 2n pi (1 - pi)."""
    arr = as_bit_array(bits)
    n = arr.size
    _require(n, 100, "Runs")
    pi = float(arr.mean())
    if abs(pi - 0.5) >= 2.0 / math.sqrt(n):
        result = _result("Runs", 0.0, alpha)
        result.detail = "frequency pre-test failed"
        return result
    v = 1 + int(np.count_nonzero(arr[1:] != arr[:-1]))
    num = abs(v - 2.0 * n * pi * (1.0 - pi))
    den = 2.0 * math.sqrt(2.0 * n) * pi * (1.0 - pi)
    return _result("Runs", erfc(num / den), alpha, float(v))


def _longest_run_of_ones(block) -> int:
    best = run = 0
    for b in block:
        run = run + 1 if b else 0
        best = max(best, run)
    return best


def _run_class(longest: int) -> int:
    lo, hi = LONGEST_RUN_CLASSES[0], LONGEST_RUN_CLASSES[-1]
    return min(max(longest, lo), hi) - lo


def longest_run_class_probabilities(block_size: int = LONGEST_RUN_BLOCK) -> np.ndarray:
    """
    Class probabilities of the longest run of ones, by enumerating all 2^M blocks.
    """
    counts = np.zeros(len(LONGEST_RUN_CLASSES), dtype=np.int64)
    for block in itertools.product((0, 1), repeat=block_size):
        counts[_run_class(_longest_run_of_ones(block))] += 1
    return counts / float(2**block_size)


_LONGEST_RUN_PROBS = longest_run_class_probabilities()


def _longest_runs_per_block(blocks: np.ndarray) -> np.ndarray:
    # Column scan over M=8 positions, vectorized across blocks.
    run = np.zeros(blocks.shape[0], dtype=np.int64)
    best = np.zeros_like(run)
    for j in range(blocks.shape[1]):
        run = np.where(blocks[:, j] == 1, run + 1, 0)
        np.maximum(best, run, out=best)
    return best


def longest_run_test(bits, alpha: float = DEFAULT_ALPHA) -> TestResult:
    """Longest run of ones in 8-bit blocks, chi-square over the classes <=1, 2, 3, >=4."""
    arr = as_bit_array(bits)
    n = arr.size
    _require(n, 128, "Longest Run")
    count = n // LONGEST_RUN_BLOCK
    blocks = arr[: count * LONGEST_RUN_BLOCK].reshape(count, LONGEST_RUN_BLOCK)
    longest = _longest_runs_per_block(blocks)
    lo, hi = LONGEST_RUN_CLASSES[0], LONGEST_RUN_CLASSES[-1]
    classes = np.clip(longest, lo, hi) - lo
    observed = np.bincount(classes, minlength=len(LONGEST_RUN_CLASSES))
    expected = count * _LONGEST_RUN_PROBS
    chi2 = float(np.sum((observed - expected) ** 2 / expected))
    dof = len(LONGEST_RUN_CLASSES) - 1
    return _result("Longest Run", igamc(dof / 2.0, chi2 / 2.0), alpha, chi2)


def _cusum_p_value(n: int, z: int) -> float:
    if z == 0:
        return 1.0
    sqrt_n = math.sqrt(n)
    k1 = np.arange(math.trunc((-n / z + 1) / 4), math.trunc((n / z - 1) / 4) + 1)
    k2 = np.arange(math.trunc((-n / z - 3) / 4), math.trunc((n / z - 1) / 4) + 1)
    sum1 = np.sum(normal_cdf((4 * k1 + 1) * z / sqrt_n) - normal_cdf((4 * k1 - 1) * z / sqrt_n))
    sum2 = np.sum(normal_cdf((4 * k2 + 3) * z / sqrt_n) - normal_cdf((4 * k2 + 1) * z / sqrt_n))
    return 1.0 - float(sum1) + float(sum2)


def cusum_test(bits, direction: str = "forward", alpha: float = DEFAULT_ALPHA) -> TestResult:
    """Maximum excursion of the +/-1 random walk, scanned forward or in reverse."""
    if direction not in ("forward", "reverse"):
        raise ValueError(f"direction must be 'forward' or 'reverse', got {direction!r}")
    arr = as_bit_array(bits)
    n = arr.size
    name = f"Cumulative Sums ({direction})"
    _require(n, 100, name)
    steps = 2 * arr.astype(np.int64) - 1
    if direction == "reverse":
        steps = steps[::-1]
    z = int(np.max(np.abs(np.cumsum(steps))))
    return _result(name, _cusum_p_value(n, z), alpha, float(z))


def _phi(arr: np.ndarray, m: int) -> float:
    if m == 0:
        return 0.0
    n = arr.size
    wrapped = np.concatenate([arr, arr[: m - 1]]).astype(np.int64)
    codes = np.zeros(n, dtype=np.int64)
    for j in range(m):
        codes = (codes << 1) | wrapped[j : j + n]
    c = np.bincount(codes, minlength=2**m) / n
    c = c[c > 0]
    return float(np.sum(c * np.log(c)))


def approx_entropy_test(bits, m: int = DEFAULT_APEN_M, alpha: float = DEFAULT_ALPHA) -> TestResult:
    """ApEn(m) = phi(m) - phi(m+1) over wrapped overlapping blocks; chi2 = 2n(ln 2 - ApEn)."""
    arr = as_bit_array(bits)
    n = arr.size
    _require(n, 100, "Approximate Entropy")
    if m < 1 or not m < math.log2(n) - 5:
        raise NotApplicable(f"Approximate Entropy needs 1 <= m < log2(n) - 5; m={m}, n={n}")
    apen = _phi(arr, m) - _phi(arr, m + 1)
    chi2 = 2.0 * n * (math.log(2.0) - apen)
    return _result("Approximate Entropy", igamc(2.0 ** (m - 1), chi2 / 2.0), alpha, apen)


def dft_modulus(bits) -> np.ndarray:
    """|DFT| of the +/-1 signal over the first n/2 frequencies."""
    arr = as_bit_array(bits)
    x = 2.0 * arr.astype(np.float64) - 1.0
    return np.abs(fft.fft(x)[: arr.size // 2])


def spectral_test(bits, alpha: float = DEFAULT_ALPHA) -> TestResult:
    """Fraction of DFT peaks below T = sqrt(n ln(1/0.05)) against the expected 95%."""
    arr = as_bit_array(bits)
    n = arr.size
    _require(n, 1000, "FFT")
    modulus = dft_modulus(arr)
    threshold = math.sqrt(math.log(1.0 / 0.05) * n)
    expected = 0.95 * n / 2.0
    observed = int(np.count_nonzero(modulus < threshold))
    d = (observed - expected) / math.sqrt(n * 0.95 * 0.05 / 4.0)
    return _result("FFT", erfc(abs(d) / math.sqrt(2.0)), alpha, d)


@dataclass
class BatteryConfig:
    alpha: float = DEFAULT_ALPHA
    min_pass_fraction: float = DEFAULT_MIN_PASS_FRACTION
    block_size: int = DEFAULT_BLOCK_SIZE
    apen_m: int = DEFAULT_APEN_M
    workers: int = 1

    def min_pass_count(self, sequences: int) -> int:
        return int(math.ceil(self.min_pass_fraction * sequences - 1e-9))


def battery_tests(cfg: BatteryConfig) -> list[tuple[str, Callable[[Any], TestResult]]]:
    """Ordered (row name, callable) pairs; row order follows the reference results table."""
    a = cfg.alpha
    return [
        ("Frequency", lambda b: frequency_test(b, a)),
        ("Block Frequency", lambda b: block_frequency_test(b, cfg.block_size, a)),
        ("Cumulative Sums (forward)", lambda b: cusum_test(b, "forward", a)),
        ("Cumulative Sums (reverse)", lambda b: cusum_test(b, "reverse", a)),
        ("Runs", lambda b: runs_test(b, a)),
        ("Longest Run", lambda b: longest_run_test(b, a)),
        ("FFT", lambda b: spectral_test(b, a)),
        ("Approximate Entropy", lambda b: approx_entropy_test(b, cfg.apen_m, a)),
    ]


def run_single(name: str, func: Callable[[Any], TestResult], bits) -> TestResult:
    """Run one test, turning a failed length precondition into a 'not run' result."""
    try:
        return func(bits)
    except NotApplicable as e:
        return TestResult(name, None, False, STATUS_NOT_RUN, detail=str(e))


def binomial_min_pass(sequences: int, alpha: float) -> float:
    """Lower edge of the acceptable pass proportion, p_hat - 3 sqrt(p_hat (1 - p_hat) / s)."""
    p_hat = 1.0 - alpha
    return p_hat - 3.0 * math.sqrt(p_hat * alpha / sequences)


def uniformity_p_value(p_values) -> float:
    """Chi-square over 10 equal bins of [0, 1]; p = Q(9/2, chi2/2)."""
    p = np.asarray(p_values, dtype=np.float64)
    s = p.size
    bins = np.minimum((p * UNIFORMITY_BINS).astype(np.int64), UNIFORMITY_BINS - 1)
    observed = np.bincount(bins, minlength=UNIFORMITY_BINS)
    expected = s / UNIFORMITY_BINS
    chi2 = float(np.sum((observed - expected) ** 2 / expected))
    return igamc((UNIFORMITY_BINS - 1) / 2.0, chi2 / 2.0)


@dataclass
class BatteryRow:
    test_name: str
    uniformity_p: float | None
    passed_count: int
    total: int
    passed: bool
    status: str
    p_values: list[float] = field(default_factory=list)

    @property
    def proportion(self) -> str:
        return f"{self.passed_count}/{self.total}"

    def to_dict(self) -> dict[str, Any]:
        return {
            "test_name": self.test_name,
            "uniformity_p": self.uniformity_p,
            "proportion": self.proportion,
            "passed_count": self.passed_count,
            "total": self.total,
            "pass": self.passed,
            "status": self.status,
        }


@dataclass
class BatteryReport:
    per_test: list[BatteryRow]
    alpha: float
    min_pass_count: int
    sequences: int
    metadata: dict[str, Any] = field(default_factory=dict)

    @property
    def overall_pass(self) -> bool:
        run = [r for r in self.per_test if r.status in (STATUS_PASS, STATUS_FAIL)]
        return bool(run) and all(r.passed for r in run)

    def to_dict(self) -> dict[str, Any]:
        return {
            "alpha": self.alpha,
            "min_pass_count": self.min_pass_count,
            "sequences": self.sequences,
            "metadata": self.metadata,
            "per_test": [r.to_dict() for r in self.per_test],
            "overall_pass": self.overall_pass,
        }


def _aggregate(
    name: str, results: list[TestResult], min_pass: int, sequences: int
) -> BatteryRow:
    ran = [r for r in results if r.status != STATUS_NOT_RUN]
    if not ran:
        return BatteryRow(name, None, 0, 0, False, STATUS_NOT_RUN)

    p_values = [float(r.p_value) for r in ran if r.p_value is not None]
    passed_count = sum(1 for r in ran if r.passed)
    uniformity = uniformity_p_value(p_values) if len(p_values) >= 2 else None
    # Threshold scales with the sequences that actually ran.
    needed = min_pass if len(ran) == sequences else math.ceil(min_pass * len(ran) / sequences)
    passed = passed_count >= needed and (uniformity is None or uniformity >= UNIFORMITY_ALPHA)
    return BatteryRow(
        name,
        uniformity,
        passed_count,
        len(ran),
        passed,
        STATUS_PASS if passed else STATUS_FAIL,
        p_values,
    )


def run_battery(
    sequences,
    alpha: float = DEFAULT_ALPHA,
    config: BatteryConfig | None = None,
    verbose: bool = False,
) -> BatteryReport:
    """
    Run every implemented test on every sequence and aggregate per test.

    Args:
        sequences: List of BitSequence / bit arrays
        alpha: Per-sequence significance level
        config: Test parameters; ``config.alpha`` is replaced by ``alpha``
        verbose: Print per-test progress to the error stream

    Returns:
        BatteryReport with one row per implemented test, followed by the
        out-of-scope tests marked "not implemented"
    """
    cfg = config or BatteryConfig()
    cfg = BatteryConfig(
        alpha=alpha,
        min_pass_fraction=cfg.min_pass_fraction,
        block_size=cfg.block_size,
        apen_m=cfg.apen_m,
        workers=cfg.workers,
    )
    arrays = [as_bit_array(s) for s in sequences]
    count = len(arrays)
    if count == 0:
        raise ValueError("the battery needs at least one sequence")
    min_pass = cfg.min_pass_count(count)
    tests = battery_tests(cfg)

    jobs = [(name, func, arr) for name, func in tests for arr in arrays]
    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(lambda job: run_single(*job), jobs))
    else:
        results = [run_single(*job) for job in jobs]

    rows = []
    for t, (name, _func) in enumerate(tests):
        row = _aggregate(name, results[t * count : (t + 1) * count], min_pass, count)
        rows.append(row)
        if verbose:
            click.echo(f"  {name}: {row.proportion} ({row.status})", err=True)
    for name in NOT_IMPLEMENTED:
        rows.append(BatteryRow(name, None, 0, 0, False, STATUS_NOT_IMPLEMENTED))

    return BatteryReport(
        per_test=rows,
        alpha=alpha,
        min_pass_count=min_pass,
        sequences=count,
        metadata={
            "sequence_lengths": sorted({int(a.size) for a in arrays}),
            "block_frequency_M": cfg.block_size,
            "approximate_entropy_m": cfg.apen_m,
            "longest_run_M": LONGEST_RUN_BLOCK,
            "binomial_min_proportion": binomial_min_pass(count, alpha),
            "uniformity_computed": count >= 2,
        },
    )
