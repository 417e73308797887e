"""
Tests for pipeline configuration files and overrides.
"""

import os

import pytest

from qrng_borel.core.common import ConfigurationError
from qrng_borel.core.config import (
    PipelineConfig,
    build_pipeline_config,
    load_config_file,
    parse_config_text,
)

SAMPLE = """
# small run
source.seed = 7
source.pair_rate = 1e5   # pairs per second
extraction.t0 = 40e-9

analysis.length = 1e4
analysis.battery = yes
output.dir = runs/seed7
"""


class TestParseConfigText:
    """Tests for the flat key = value format."""

    def test_comments_and_blank_lines(self):
        """Test that comments and blank lines are skipped."""
        values = parse_config_text(SAMPLE)
        assert values["source.seed"] == "7"
        assert values["source.pair_rate"] == "1e5"
        assert len(values) == 6

    def test_missing_equals(self):
        """Test that a line without '=' reports its line number."""
        with pytest.raises(ConfigurationError, match="cfg:2"):
            parse_config_text("source.seed = 1\nsource.span\n", origin="cfg")

    def test_load_file(self, temp_output_dir):
        """Test reading a config file from disk."""
        path = os.path.join(temp_output_dir, "run.cfg")
        with open(path, "w") as f:
            f.write(SAMPLE)
        assert load_config_file(path)["output.dir"] == "runs/seed7"


class TestBuildPipelineConfig:
    """Tests for build_pipeline_config."""

    def test_defaults(self):
        """Test the default configuration."""
        cfg = build_pipeline_config()
        assert cfg.source.seed == 0
        assert cfg.channel == "coincidence"
        assert cfg.analysis.sequences == 10
        assert cfg.analysis.length == 1_000_000
        assert cfg.t0 == pytest.approx(40e-9)
        cfg.validate()

    def test_typed_values(self):
        """Test that raw strings are coerced to the field types."""
        cfg = build_pipeline_config(parse_config_text(SAMPLE))
        assert cfg.source.seed == 7
        assert cfg.source.pair_rate == 1e5
        assert cfg.extraction.t0 == pytest.approx(40e-9)
        assert cfg.analysis.length == 10_000
        assert cfg.analysis.battery is True
        assert cfg.output.dir == "runs/seed7"

    def test_overrides_win(self):
        """Test that overrides replace file values and None overrides are ignored."""
        cfg = build_pipeline_config(
            parse_config_text(SAMPLE), {"source.seed": 9, "output.dir": None}
        )
        assert cfg.source.seed == 9
        assert cfg.output.dir == "runs/seed7"

    def test_input_path_replaces_source(self):
        """Test that an input file disables the simulated source."""
        cfg = build_pipeline_config({"input.path": "bits.txt"})
        assert cfg.source is None
        assert cfg.input_path == "bits.txt"
        assert cfg.t0 == 0.0

    def test_channel(self):
        """Test the channel key."""
        assert build_pipeline_config({"input.channel": "idler"}).channel == "idler"

    def test_unknown_key(self):
        """Test that unknown sections and fields are rejected."""
        with pytest.raises(ConfigurationError, match="unknown config key"):
            build_pipeline_config({"sauce.seed": "1"})
        with pytest.raises(ConfigurationError, match="unknown config key"):
            build_pipeline_config({"source.colour": "red"})

    def test_bad_value(self):
        """Test that an unparsable value names its key."""
        with pytest.raises(ConfigurationError, match="source.span"):
            build_pipeline_config({"source.span": "long"})
        with pytest.raises(ConfigurationError, match="analysis.borel"):
            build_pipeline_config({"analysis.borel": "maybe"})

    def test_to_dict(self):
        """Test that the serialized config records the effective t0."""
        data = build_pipeline_config({"source.dead_time": "10e-9"}).to_dict()
        assert data["t0_effective"] == pytest.approx(20e-9)
        assert data["extraction"]["t0"] is None


class TestValidate:
    """Tests for PipelineConfig.validate."""

    def test_needs_source_or_input(self):
        """Test that neither a source nor an input is an error."""
        with pytest.raises(ConfigurationError, match="exactly one"):
            PipelineConfig(source=None).validate()

    def test_bins_power_of_two(self):
        """Test that bins must be a power of two."""
        with pytest.raises(ConfigurationError, match="power of two"):
            build_pipeline_config({"extraction.bins": "3"}).validate()

    def test_multibin_needs_median(self):
        """Test that multi-bin extraction rejects the analytic threshold."""
        cfg = build_pipeline_config({"extraction.bins": "4", "extraction.mode": "analytic"})
        with pytest.raises(ConfigurationError, match="multi-bin"):
            cfg.validate()

    def test_unknown_mode(self):
        """Test that an unknown threshold mode is rejected."""
        with pytest.raises(ConfigurationError, match="extraction.mode"):
            build_pipeline_config({"extraction.mode": "mean"}).validate()

    def test_battery_split_divides_length(self):
        """Test that the battery split must divide the sequence length."""
        cfg = build_pipeline_config(
            {"analysis.battery": "true", "analysis.length": "1001", "analysis.battery_split": "10"}
        )
        with pytest.raises(ConfigurationError, match="divisible"):
            cfg.validate()

    def test_alpha_range(self):
        """Test that alpha must lie strictly between 0 and 1."""
        with pytest.raises(ConfigurationError, match="alpha"):
            build_pipeline_config({"analysis.alpha": "1.0"}).validate()

    def test_unknown_channel(self):
        """Test that an unknown channel is rejected."""
        with pytest.raises(ConfigurationError, match="channel"):
            build_pipeline_config({"input.channel": "both"}).validate()

    def test_source_is_validated(self):
        """Test that the source configuration is validated too."""
        with pytest.raises(ConfigurationError, match="span"):
            build_pipeline_config({"source.span": "-1"}).validate()
