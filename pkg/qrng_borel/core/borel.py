"""
Borel normality check for finite binary sequences.

A sequence of length n passes order m when every non-overlapping m-block
occurs with frequency within sqrt(log2 n / n) of 2^-m, and the standard
deviation of those frequencies is below the same bound. Orders run from 1 to
floor(log2 log2 n). Passing is necessary, not sufficient, for algorithmic
randomness, so a pass is reported as "not falsified".
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from qrng_borel.core.common import InsufficientDataError, as_bit_array

ASSUMPTIONS = ["log2", "sigma_sqrt_bound"]

# The reference analysis prints 0.00441 for the bound at n = 10^6; the exact
# value of sqrt(log2(n) / n) there is 0.0044645.
PRINTED_BOUND_1E6 = 0.00441

PASS_LABEL = "NOT FALSIFIED"
FAIL_LABEL = "FAIL"


@dataclass
class BlockDistribution:
    """Counts of the 2^m non-overlapping m-blocks, indexed by the block's binary value."""

    m: int
    counts: np.ndarray
    total: int
    discarded: int = 0

    @property
    def probs(self) -> np.ndarray:
        if self.total == 0:
            return np.zeros_like(self.counts, dtype=np.float64)
        return self.counts / self.total

    def label(self, i: int) -> str:
        return format(i, f"0{self.m}b")

    def as_dict(self) -> dict[str, int]:
        return {self.label(i): int(c) for i, c in enumerate(self.counts)}


@dataclass
class BoxStats:
    """Five-number summary."""

    min: float
    q1: float
    median: float
    q3: float
    max: float

    def as_list(self) -> list[float]:
        return [self.min, self.q1, self.median, self.q3, self.max]


@dataclass
class OrderResult:
    m: int
    max_abs_deviation: float
    sigma_m: float
    box: BoxStats
    relative_pct: float
    passed: bool
    distribution: BlockDistribution

    def to_dict(self, include_counts: bool = False) -> dict[str, Any]:
        out: dict[str, Any] = {"m": self.m}
        if include_counts:
            out["counts"] = self.distribution.as_dict()
        out.update(
            {
                "max_dev": self.max_abs_deviation,
                "sigma": self.sigma_m,
                "box": self.box.as_list(),
                "rel_pct": self.relative_pct,
                "pass": self.passed,
            }
        )
        return out


@dataclass
class BorelVerdict:
    n: int
    m_max: int
    bound: float
    per_order: list[OrderResult] = field(default_factory=list)

    @property
    def overall_pass(self) -> bool:
        return all(r.passed for r in self.per_order)

    @property
    def label(self) -> str:
        return PASS_LABEL if self.overall_pass else FAIL_LABEL

    def failing_orders(self) -> list[int]:
        return [r.m for r in self.per_order if not r.passed]

    def to_dict(self, include_counts: bool = False) -> dict[str, Any]:
        return {
            "n": self.n,
            "m_max": self.m_max,
            "bound": self.bound,
            "assumptions": list(ASSUMPTIONS),
            "notes": bound_notes(self.n),
            "per_order": [r.to_dict(include_counts) for r in self.per_order],
            "overall_pass": self.overall_pass,
            "verdict": self.label,
        }


def max_order(n: int) -> int:
    """
    Largest block order checked for a sequence of length n: floor(log2 log2 n), at least 1.

    Raises:
        InsufficientDataError: If n < 4
    """
    if n < 4:
        raise InsufficientDataError(f"Borel analysis needs at least 4 bits, got {n}")
    m = int(math.floor(math.log2(math.log2(n))))
    # Guard exact powers such as n = 2**32 against rounding below the integer.
    while 2 ** (2 ** (m + 1)) <= n:
        m += 1
    return max(1, m)


def borel_bound(n: int) -> float:
    """sqrt(log2(n) / n)."""
    if n < 2:
        raise InsufficientDataError(f"the Borel bound needs n >= 2, got {n}")
    return math.sqrt(math.log2(n) / n)


def bound_notes(n: int) -> list[str]:
    """Caveats attached to every verdict."""
    notes = [
        "sigma_m is compared against sqrt(log2 n / n), not log2(n) / n",
        "a pass is necessary but not sufficient for algorithmic randomness",
    ]
    if n == 10**6:
        notes.append(
            f"exact bound {borel_bound(n):.7f} differs from the commonly printed "
            f"{PRINTED_BOUND_1E6}; the exact value is used"
        )
    return notes


def block_distribution(bits, m: int) -> BlockDistribution:
    """
    Count consecutive non-overlapping m-blocks starting at position 0.

    The trailing n mod m bits are discarded and reported in ``discarded``.

    Raises:
        ValueError: If m < 1
        InsufficientDataError: If m > n
    """
    arr = as_bit_array(bits)
    if m < 1:
        raise ValueError(f"block order must be >= 1, got {m}")
    if m > arr.size:
        raise InsufficientDataError(f"block order {m} exceeds sequence length {arr.size}")

    total = arr.size // m
    blocks = arr[: total * m].reshape(total, m).astype(np.int64)
    weights = 1 << np.arange(m - 1, -1, -1, dtype=np.int64)
    codes = blocks @ weights
    counts = np.bincount(codes, minlength=2**m).astype(np.int64)
    return BlockDistribution(m=m, counts=counts, total=int(total), discarded=int(arr.size % m))


def deviations(dist: BlockDistribution) -> np.ndarray:
    """|P(i) - 2^-m| for every block i."""
    return np.abs(dist.probs - 2.0**-dist.m)


def sigma(dist: BlockDistribution) -> float:
    """Root-mean-square deviation of P(i) from 2^-m over all 2^m blocks."""
    dev = dist.probs - 2.0**-dist.m
    return float(math.sqrt(float(np.mean(dev * dev))))


def box_stats(values) -> BoxStats:
    q = np.quantile(np.asarray(values, dtype=np.float64), [0.0, 0.25, 0.5, 0.75, 1.0])
    return BoxStats(*(float(v) for v in q))


def deviation_summary(dist: BlockDistribution, bound: float) -> tuple[BoxStats, float]:
    """
    Five-number summary of |P(i) - 2^-m| and the maximum as a percentage of the bound.
    """
    box = box_stats(deviations(dist))
    relative_pct = 100.0 * box.max / abs(bound) if bound else float("inf")
    return box, relative_pct


def evaluate_order(dist: BlockDistribution, bound: float) -> OrderResult:
    """Apply both criteria (max deviation and sigma_m strictly below the bound) to one order."""
    box, relative_pct = deviation_summary(dist, bound)
    sigma_m = sigma(dist)
    return OrderResult(
        m=dist.m,
        max_abs_deviation=box.max,
        sigma_m=sigma_m,
        box=box,
        relative_pct=relative_pct,
        passed=bool(box.max < bound and sigma_m < bound),
        distribution=dist,
    )


def borel_verdict(bits, bound: float | None = None, m_max: int | None = None) -> BorelVerdict:
    """
    Check orders 1..max_order(n) of a bit sequence.

    Args:
        bits: BitSequence, '0'/'1' string or array
        bound: Override for the acceptance bound (defaults to borel_bound(n))
        m_max: Override for the highest order (defaults to max_order(n))

    Raises:
        InsufficientDataError: If the sequence has fewer than 4 bits
    """
    arr = as_bit_array(bits)
    n = int(arr.size)
    top = max_order(n) if m_max is None else int(m_max)
    limit = borel_bound(n) if bound is None else float(bound)

    verdict = BorelVerdict(n=n, m_max=top, bound=limit)
    for m in range(1, top + 1):
        verdict.per_order.append(evaluate_order(block_distribution(arr, m), limit))
    return verdict
