"""Reference and adversarial bit sequences."""

from __future__ import annotations

import numpy as np

from qrng_borel.core.extract import BitSequence
from qrng_borel.core.source_sim import make_generator

FIXTURE_KINDS = ("champernowne", "periodic", "zeros", "ones", "prng")


def champernowne(n: int) -> BitSequence:
    """
    First n symbols of the binary Champernowne-style string.

    All 1-bit strings, then all 2-bit strings in ascending order, then all
    3-bit strings, and so on: 0 1 00 01 10 11 000 001 ...
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    chunks = []
    produced = 0
    width = 1
    while produced < n:
        values = np.arange(2**width, dtype=np.int64)
        shifts = np.arange(width - 1, -1, -1, dtype=np.int64)
        block = ((values[:, None] >> shifts[None, :]) & 1).astype(np.uint8).reshape(-1)
        chunks.append(block)
        produced += block.size
        width += 1
    return BitSequence(np.concatenate(chunks)[:n])


def periodic(n: int, pattern: str = "01") -> BitSequence:
    """``pattern`` repeated to length n."""
    unit = BitSequence.from_string(pattern).bits
    if unit.size == 0:
        raise ValueError("pattern must not be empty")
    reps = -(-n // unit.size)
    return BitSequence(np.tile(unit, reps)[:n])


def constant(n: int, value: int = 0) -> BitSequence:
    return BitSequence(np.full(n, value, dtype=np.uint8))


def pseudo_random(n: int, seed: int = 0) -> BitSequence:
    """Seeded pseudo-random control sequence."""
    rng = make_generator(seed, stream=2**32)
    return BitSequence(rng.integers(0, 2, size=n, dtype=np.uint8))


def make_fixture(kind: str, n: int, seed: int = 0, pattern: str = "01") -> BitSequence:
    """Build a fixture sequence by name; see FIXTURE_KINDS."""
    if kind == "champernowne":
        return champernowne(n)
    if kind == "periodic":
        return periodic(n, pattern)
    if kind == "zeros":
        return constant(n, 0)
    if kind == "ones":
        return constant(n, 1)
    if kind == "prng":
        return pseudo_random(n, seed)
    raise ValueError(f"unknown fixture {kind!r}; choose from {', '.join(FIXTURE_KINDS)}")
