"""
Tests for the qrng command-line interface.
"""

import filecmp
import json
import os

import pytest
from click.testing import CliRunner

from qrng_borel import cli
from qrng_borel.core.bitio import read_bits, write_bits
from qrng_borel.core.fixtures import constant, periodic, pseudo_random

SMALL_CONFIG = """\
source.pair_rate = 2e6
source.singles_excess_rate = 1e6
source.span = 2e-3
source.seed = 11
analysis.sequences = 2
analysis.length = 10000
"""


@pytest.fixture
def runner():
    """Create a CLI test runner."""
    return CliRunner()


@pytest.fixture
def small_config(temp_output_dir):
    """Write a config file for a small simulated run."""
    path = os.path.join(temp_output_dir, "small.cfg")
    with open(path, "w") as f:
        f.write(SMALL_CONFIG)
    return path


@pytest.fixture
def random_file(temp_output_dir):
    """Write 10^5 pseudo-random bits in the packed format."""
    path = os.path.join(temp_output_dir, "prng.bits")
    write_bits(pseudo_random(100_000, seed=5), path)
    return path


@pytest.fixture
def periodic_file(temp_output_dir):
    """Write 10^5 alternating bits in the ASCII format."""
    path = os.path.join(temp_output_dir, "periodic.txt")
    write_bits(periodic(100_000, "01"), path)
    return path


class TestGroup:
    """Tests for the command group."""

    def test_version(self, runner):
        """Test --version."""
        result = runner.invoke(cli, ["--version"])
        assert result.exit_code == 0
        assert "qrng-borel, version 0.1.0" in result.output

    def test_help_lists_commands(self, runner):
        """Test that every verb is listed in the help."""
        result = runner.invoke(cli, ["--help"])
        assert result.exit_code == 0
        for verb in ("simulate", "extract", "borel", "battery", "pipeline", "fixture"):
            assert verb in result.output


class TestFixtureCommand:
    """Tests for the fixture command."""

    def test_champernowne(self, runner, temp_output_dir):
        """Test writing a Champernowne prefix as ASCII."""
        out = os.path.join(temp_output_dir, "champ.txt")
        result = runner.invoke(cli, ["fixture", "champernowne", out, "-n", "34"])
        assert result.exit_code == 0
        assert str(read_bits(out)) == "0100011011000001010011100101110111"

    def test_periodic_pattern(self, runner, temp_output_dir):
        """Test a custom periodic pattern in the packed format."""
        out = os.path.join(temp_output_dir, "p.bits")
        result = runner.invoke(cli, ["fixture", "periodic", out, "-n", "6", "--pattern", "110"])
        assert result.exit_code == 0
        assert str(read_bits(out)) == "110110"

    def test_empty_pattern(self, runner, temp_output_dir):
        """Test that an empty pattern is a usage error."""
        out = os.path.join(temp_output_dir, "p.txt")
        result = runner.invoke(cli, ["fixture", "periodic", out, "--pattern", ""])
        assert result.exit_code == 2

    def test_unknown_kind(self, runner, temp_output_dir):
        """Test that an unknown kind is rejected by click."""
        result = runner.invoke(cli, ["fixture", "primes", os.path.join(temp_output_dir, "x.txt")])
        assert result.exit_code == 2


class TestBorelCommand:
    """Tests for the borel command."""

    def test_random_passes(self, runner, random_file):
        """Test that pseudo-random bits exit 0."""
        result = runner.invoke(cli, ["borel", random_file])
        assert result.exit_code == 0
        assert "NOT FALSIFIED" in result.output

    def test_periodic_fails(self, runner, periodic_file):
        """Test that alternating bits exit 1 and name the failing order."""
        result = runner.invoke(cli, ["borel", periodic_file])
        assert result.exit_code == 1
        assert "Borel FAIL" in result.output
        assert "m=2" in result.output

    def test_json_single(self, runner, random_file):
        """Test JSON output for one file."""
        result = runner.invoke(cli, ["borel", random_file, "--json", "--counts"])
        assert result.exit_code == 0
        data = json.loads(result.output)
        assert data["sequence"] == "prng.bits"
        assert data["n"] == 100_000
        assert data["m_max"] == 4
        assert "counts" in data["per_order"][0]

    def test_json_several(self, runner, random_file, temp_output_dir):
        """Test JSON output for several files."""
        other = os.path.join(temp_output_dir, "prng2.txt")
        write_bits(pseudo_random(50_000, seed=6), other)
        result = runner.invoke(cli, ["borel", random_file, other, "--json"])
        assert result.exit_code == 0
        data = json.loads(result.output)
        assert [d["sequence"] for d in data] == ["prng.bits", "prng2.txt"]

    def test_summary_and_boxes(self, runner, random_file, periodic_file, temp_output_dir):
        """Test the multi-file summary line and the box CSV."""
        boxes = os.path.join(temp_output_dir, "boxes.csv")
        result = runner.invoke(cli, ["borel", random_file, periodic_file, "--boxes", boxes])
        assert result.exit_code == 1
        assert "Largest deviation relative to the bound" in result.output
        assert os.path.exists(boxes)

    def test_zeros_fail(self, runner, temp_output_dir):
        """Test that all zeros fail at order 1."""
        path = os.path.join(temp_output_dir, "zeros.txt")
        write_bits(constant(10_000, 0), path)
        result = runner.invoke(cli, ["borel", path])
        assert result.exit_code == 1
        assert "m=1" in result.output

    def test_malformed_file(self, runner, temp_output_dir):
        """Test that a malformed bit file exits 2 with the byte offset."""
        path = os.path.join(temp_output_dir, "bad.txt")
        with open(path, "wb") as f:
            f.write(b"0101010x01\n")
        result = runner.invoke(cli, ["borel", path])
        assert result.exit_code == 2
        assert "byte offset 7" in result.output

    def test_unknown_extension(self, runner, temp_output_dir):
        """Test that --format is needed for unknown extensions."""
        path = os.path.join(temp_output_dir, "bits.dat")
        with open(path, "w") as f:
            f.write("0110" * 100)
        assert runner.invoke(cli, ["borel", path]).exit_code == 2
        result = runner.invoke(cli, ["borel", path, "--format", "ascii"])
        assert result.exit_code in (0, 1)


class TestBatteryCommand:
    """Tests for the battery command."""

    def test_zeros_fail(self, runner, temp_output_dir):
        """Test that constant input fails the battery."""
        path = os.path.join(temp_output_dir, "zeros.bits")
        write_bits(constant(10_000, 0), path)
        result = runner.invoke(cli, ["battery", path, "--split", "10"])
        assert result.exit_code == 1
        assert "Frequency" in result.output

    def test_json(self, runner, random_file):
        """Test the JSON report structure."""
        result = runner.invoke(cli, ["battery", random_file, "--split", "10", "--json"])
        assert result.exit_code in (0, 1)
        data = json.loads(result.output)
        assert data["sequences"] == 10
        assert data["metadata"]["split"] == 10
        assert data["per_test"][0]["test_name"] == "Frequency"
        assert result.exit_code == (0 if data["overall_pass"] else 1)

    def test_split_must_divide(self, runner, random_file):
        """Test that a split not dividing the length is a usage error."""
        result = runner.invoke(cli, ["battery", random_file, "--split", "7"])
        assert result.exit_code == 2
        assert "--split" in result.output

    def test_alpha_range(self, runner, random_file):
        """Test that alpha must be inside (0, 1)."""
        result = runner.invoke(cli, ["battery", random_file, "--alpha", "1.5"])
        assert result.exit_code == 2


class TestSimulateCommand:
    """Tests for the simulate command."""

    def test_json_counts(self, runner, small_config):
        """Test the JSON count summary."""
        result = runner.invoke(cli, ["simulate", "--config", small_config, "--json"])
        assert result.exit_code == 0
        counts = json.loads(result.output)
        assert counts["bins"] == 1_000_000
        assert 0 < counts["coincidences"] <= min(counts["signal"], counts["idler"])

    def test_seed_from_environment(self, runner, small_config):
        """Test that QRNG_SEED seeds the simulation."""
        args = ["simulate", "--config", small_config, "--json"]
        first = runner.invoke(cli, args, env={"QRNG_SEED": "5"})
        second = runner.invoke(cli, args + ["--seed", "5"])
        assert first.exit_code == 0
        assert json.loads(first.output) == json.loads(second.output)

    def test_writes_series(self, runner, small_config, temp_output_dir):
        """Test --out and --timestamps."""
        out = os.path.join(temp_output_dir, "acq")
        result = runner.invoke(
            cli, ["simulate", "--config", small_config, "--out", out, "--timestamps"]
        )
        assert result.exit_code == 0
        for name in ("signal", "idler", "coincidence"):
            assert os.path.exists(os.path.join(out, f"{name}.bits"))
            assert os.path.exists(os.path.join(out, f"{name}.csv"))

    def test_invalid_span(self, runner):
        """Test that an invalid source exits 2."""
        result = runner.invoke(cli, ["simulate", "--span", "-1"])
        assert result.exit_code == 2


class TestExtractCommand:
    """Tests for the extract command."""

    @pytest.fixture
    def acquisition(self, runner, small_config, temp_output_dir):
        out = os.path.join(temp_output_dir, "acq")
        result = runner.invoke(
            cli, ["simulate", "--config", small_config, "--out", out, "--timestamps"]
        )
        assert result.exit_code == 0
        return out

    def test_from_bin_series(self, runner, acquisition, temp_output_dir):
        """Test extraction from a packed coincidence series."""
        out = os.path.join(temp_output_dir, "bits.txt")
        result = runner.invoke(
            cli, ["extract", os.path.join(acquisition, "coincidence.bits"), out, "--t0", "40e-9"]
        )
        assert result.exit_code == 0
        assert "intervals" in result.output
        assert read_bits(out).n > 1000

    def test_from_timestamps(self, runner, acquisition, temp_output_dir):
        """Test that timestamps and bin series give the same bits."""
        from_bins = os.path.join(temp_output_dir, "a.bits")
        from_csv = os.path.join(temp_output_dir, "b.bits")
        runner.invoke(cli, ["extract", os.path.join(acquisition, "signal.bits"), from_bins])
        result = runner.invoke(cli, ["extract", os.path.join(acquisition, "signal.csv"), from_csv])
        assert result.exit_code == 0
        assert read_bits(from_bins) == read_bits(from_csv)

    def test_default_t0_is_twice_dead_time(self, runner, acquisition, temp_output_dir):
        """Test that --t0 defaults to 2 x --dead-time."""
        source = os.path.join(acquisition, "coincidence.csv")
        paths = [os.path.join(temp_output_dir, f"{name}.bits") for name in "abcd"]
        runner.invoke(cli, ["extract", source, paths[0]])
        runner.invoke(cli, ["extract", source, paths[1], "--t0", "40e-9"])
        runner.invoke(cli, ["extract", source, paths[2], "--dead-time", "30e-9"])
        result = runner.invoke(cli, ["extract", source, paths[3], "--t0", "60e-9"])
        assert result.exit_code == 0
        assert filecmp.cmp(paths[0], paths[1], shallow=False)
        assert filecmp.cmp(paths[2], paths[3], shallow=False)
        assert read_bits(paths[0]) != read_bits(paths[2])

    def test_multibin(self, runner, acquisition, temp_output_dir):
        """Test that four bins give two bits per interval."""
        out = os.path.join(temp_output_dir, "bits.txt")
        result = runner.invoke(
            cli, ["extract", os.path.join(acquisition, "coincidence.bits"), out, "--bins", "4"]
        )
        assert result.exit_code == 0
        assert read_bits(out).n % 2 == 0

    def test_multibin_rejects_analytic(self, runner, acquisition, temp_output_dir):
        """Test that multi-bin extraction with the analytic threshold exits 2."""
        out = os.path.join(temp_output_dir, "bits.txt")
        result = runner.invoke(
            cli,
            [
                "extract",
                os.path.join(acquisition, "coincidence.bits"),
                out,
                "--bins",
                "4",
                "--mode",
                "analytic",
            ],
        )
        assert result.exit_code == 2


class TestPipelineCommand:
    """Tests for the pipeline command."""

    def test_simulated_run(self, runner, small_config, temp_output_dir):
        """Test a small simulated Borel run."""
        out = os.path.join(temp_output_dir, "run")
        result = runner.invoke(cli, ["pipeline", "--config", small_config, "--out", out])
        assert result.exit_code == 0, result.output
        assert "sequence_00: NOT FALSIFIED" in result.output
        assert os.path.exists(os.path.join(out, "borel_verdicts.json"))
        with open(os.path.join(out, "borel_verdicts.json")) as f:
            verdicts = json.load(f)
        assert [v["sequence"] for v in verdicts] == ["sequence_00", "sequence_01"]

    def test_flags_override_config(self, runner, small_config, temp_output_dir):
        """Test that --length and --format override the config file."""
        out = os.path.join(temp_output_dir, "run")
        result = runner.invoke(
            cli,
            [
                "pipeline",
                "--config",
                small_config,
                "--out",
                out,
                "--length",
                "5000",
                "--format",
                "ascii",
            ],
        )
        assert result.exit_code == 0, result.output
        assert read_bits(os.path.join(out, "sequence_01.txt")).n == 5000

    def test_input_file_fails(self, runner, periodic_file, temp_output_dir):
        """Test that a periodic input file exits 1."""
        out = os.path.join(temp_output_dir, "run")
        result = runner.invoke(
            cli,
            [
                "pipeline",
                "--input",
                periodic_file,
                "--sequences",
                "2",
                "--length",
                "50000",
                "--out",
                out,
            ],
        )
        assert result.exit_code == 1
        assert "sequence_00: FAIL" in result.output
        assert "m=2" in result.output

    def test_bad_config_key(self, runner, temp_output_dir):
        """Test that an unknown config key exits 2."""
        path = os.path.join(temp_output_dir, "bad.cfg")
        with open(path, "w") as f:
            f.write("source.colour = red\n")
        result = runner.invoke(cli, ["pipeline", "--config", path])
        assert result.exit_code == 2
        assert "unknown config key" in result.output

    def test_battery_split_must_divide(self, runner, small_config, temp_output_dir):
        """Test that an indivisible battery split exits 2."""
        result = runner.invoke(
            cli,
            [
                "pipeline",
                "--config",
                small_config,
                "--battery",
                "--battery-split",
                "3",
                "--out",
                os.path.join(temp_output_dir, "run"),
            ],
        )
        assert result.exit_code == 2
