"""
Pipeline configuration.

Config files are flat ``key = value`` text with ``#`` comments and dotted keys,
for example::

    source.pair_rate = 156250
    source.seed = 7
    extraction.t0 = 40e-9
    analysis.sequences = 10
    analysis.length = 1000000
    output.dir = runs/seed7

Values given on the command line override the file.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, replace
from typing import Any

import fsspec

from qrng_borel.core.common import ConfigurationError, QrngError, safe_file_url
from qrng_borel.core.extract import THRESHOLD_MODES
from qrng_borel.core.nist_lite import (
    DEFAULT_ALPHA,
    DEFAULT_APEN_M,
    DEFAULT_BLOCK_SIZE,
    DEFAULT_MIN_PASS_FRACTION,
    BatteryConfig,
)
from qrng_borel.core.source_sim import SourceConfig

CHANNELS = ("coincidence", "signal", "idler")


@dataclass
class ExtractionConfig:
    t0: float | None = None  # None: 2 x dead time
    mode: str = "median"
    bins: int = 2
    von_neumann: bool = False


@dataclass
class AnalysisConfig:
    borel: bool = True
    battery: bool = False
    alpha: float = DEFAULT_ALPHA
    min_pass_fraction: float = DEFAULT_MIN_PASS_FRACTION
    sequences: int = 10
    length: int = 1_000_000
    battery_split: int = 10
    block_size: int = DEFAULT_BLOCK_SIZE
    apen_m: int = DEFAULT_APEN_M
    workers: int = 1

    def battery_config(self) -> BatteryConfig:
        return BatteryConfig(
            alpha=self.alpha,
            min_pass_fraction=self.min_pass_fraction,
            block_size=self.block_size,
            apen_m=self.apen_m,
            workers=self.workers,
        )


@dataclass
class OutputConfig:
    dir: str = "qrng-output"
    format: str = "packed"
    include_counts: bool = False


@dataclass
class PipelineConfig:
    """Simulated source or input file, then extraction, analysis and output settings."""

    source: SourceConfig | None = field(default_factory=SourceConfig)
    input_path: str | None = None
    channel: str = "coincidence"
    extraction: ExtractionConfig = field(default_factory=ExtractionConfig)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    max_acquisitions: int = 100_000

    @property
    def t0(self) -> float:
        if self.extraction.t0 is not None:
            return self.extraction.t0
        return 2.0 * self.source.dead_time if self.source is not None else 0.0

    def validate(self) -> PipelineConfig:
        if (self.source is None) == (self.input_path is None):
            raise ConfigurationError(
                "exactly one of a simulated source or an input file is required"
            )
        if self.source is not None:
            self.source.validate()
        if self.channel not in CHANNELS:
            raise ConfigurationError(f"channel must be one of {', '.join(CHANNELS)}")
        ex = self.extraction
        if ex.mode not in THRESHOLD_MODES:
            raise ConfigurationError(f"extraction.mode must be one of {', '.join(THRESHOLD_MODES)}")
        if ex.bins < 2 or ex.bins & (ex.bins - 1):
            raise ConfigurationError(f"extraction.bins must be a power of two >= 2, got {ex.bins}")
        if ex.bins > 2 and ex.mode != "median":
            raise ConfigurationError("multi-bin extraction requires extraction.mode = median")
        if self.t0 < 0:
            raise ConfigurationError(f"extraction.t0 must be non-negative, got {self.t0}")
        an = self.analysis
        if an.sequences < 1 or an.length < 4:
            raise ConfigurationError("analysis.sequences must be >= 1 and analysis.length >= 4")
        if not 0 < an.alpha < 1:
            raise ConfigurationError(f"analysis.alpha must be in (0, 1), got {an.alpha}")
        if not 0 < an.min_pass_fraction <= 1:
            raise ConfigurationError("analysis.min_pass_fraction must be in (0, 1]")
        if an.battery and (an.battery_split < 1 or an.length % an.battery_split):
            raise ConfigurationError(
                f"analysis.length {an.length} is not divisible by battery_split {an.battery_split}"
            )
        if self.output.format not in ("ascii", "packed"):
            raise ConfigurationError("output.format must be ascii or packed")
        return self

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        out["t0_effective"] = self.t0
        return out


def _coerce(raw: str, template: Any, key: str) -> Any:
    text = raw.strip()
    try:
        if isinstance(template, bool):
            lowered = text.lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if isinstance(template, int):
            return int(float(text)) if "e" in text.lower() else int(text)
        if isinstance(template, float):
            return float(text)
    except ValueError as e:
        raise ConfigurationError(f"invalid value for {key}: {raw!r}") from e
    return text


def parse_config_text(text: str, origin: str = "<config>") -> dict[str, str]:
    """Parse flat ``key = value`` lines into a dict of raw strings."""
    values: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigurationError(f"{origin}:{lineno}: expected 'key = value', got {line!r}")
        key, value = stripped.split("=", 1)
        values[key.strip()] = value.strip()
    return values


def load_config_file(path) -> dict[str, str]:
    """Read a config file into raw key/value strings."""
    url = safe_file_url(path)
    try:
        with fsspec.open(url, "r", encoding="utf-8") as f:
            return parse_config_text(f.read(), origin=str(path))
    except OSError as e:
        raise QrngError(f"Cannot read config {path}: {e}") from e


_SECTIONS = {
    "source": SourceConfig,
    "extraction": ExtractionConfig,
    "analysis": AnalysisConfig,
    "output": OutputConfig,
}

# Fields without a usable default to infer the type from.
_FIELD_TYPES = {("extraction", "t0"): 0.0}


def build_pipeline_config(
    values: dict[str, Any] | None = None, overrides: dict[str, Any] | None = None
) -> PipelineConfig:
    """
    Build a PipelineConfig from file values plus overrides (overrides win).

    Keys are dotted (``source.seed``); ``input.path`` selects an input file
    instead of the simulated source, ``input.channel`` picks the channel.
    None-valued overrides are ignored so unset CLI flags never mask the file.
    """
    merged: dict[str, Any] = dict(values or {})
    for key, value in (overrides or {}).items():
        if value is not None:
            merged[key] = value

    sections: dict[str, dict[str, Any]] = {name: {} for name in _SECTIONS}
    input_path = None
    channel = "coincidence"
    for key, raw in merged.items():
        if key == "input.path":
            input_path = str(raw) if raw not in ("", None) else None
            continue
        if key == "input.channel":
            channel = str(raw)
            continue
        section, _, name = key.partition(".")
        if section not in _SECTIONS or not name:
            raise ConfigurationError(f"unknown config key {key!r}")
        defaults = _SECTIONS[section]()
        known = {f.name for f in fields(_SECTIONS[section])}
        if name not in known:
            raise ConfigurationError(f"unknown config key {key!r}")
        template = _FIELD_TYPES.get((section, name), getattr(defaults, name))
        sections[section][name] = _coerce(raw, template, key) if isinstance(raw, str) else raw

    source = None if input_path else replace(SourceConfig(), **sections["source"])
    return PipelineConfig(
        source=source,
        input_path=input_path,
        channel=channel,
        extraction=replace(ExtractionConfig(), **sections["extraction"]),
        analysis=replace(AnalysisConfig(), **sections["analysis"]),
        output=replace(OutputConfig(), **sections["output"]),
    )
