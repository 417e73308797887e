"""
Pytest configuration and shared fixtures for qrng-borel tests.
"""

import os
import shutil
import tempfile

import numpy as np
import pytest

from qrng_borel.core.source_sim import SourceConfig, make_generator

# Small acquisition: 2 ms of 2 ns bins with a pair rate high enough that a
# few acquisitions give tens of thousands of coincidence intervals.
SMALL_SOURCE = SourceConfig(
    pair_rate=2.0e6,
    singles_excess_rate=1.0e6,
    span=2.0e-3,
    bin_width=2e-9,
    dead_time=20e-9,
    seed=11,
)


@pytest.fixture
def temp_output_dir():
    """Create a temporary directory for test outputs."""
    temp_dir = tempfile.mkdtemp()
    yield temp_dir
    # Cleanup after test
    shutil.rmtree(temp_dir, ignore_errors=True)


@pytest.fixture
def temp_output_file(temp_output_dir):
    """Create a temporary output file path."""
    return os.path.join(temp_output_dir, "output.bits")


@pytest.fixture
def small_source():
    """Return a source configuration small enough for unit tests."""
    return SMALL_SOURCE


@pytest.fixture
def random_bits():
    """Return 10^5 seeded pseudo-random bits."""
    rng = make_generator(1234, stream=7)
    return rng.integers(0, 2, size=100_000, dtype=np.uint8)


@pytest.fixture
def million_random_bits():
    """Return 10^6 seeded pseudo-random bits."""
    rng = make_generator(4321, stream=3)
    return rng.integers(0, 2, size=1_000_000, dtype=np.uint8)
