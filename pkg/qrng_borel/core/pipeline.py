"""
End-to-end run: acquire detections, extract bits, analyze and write artifacts.

A simulated run acquires spans with streams 0, 1, 2, ... of the configured
seed until the pooled intervals yield ``sequences * length`` bits. All
intervals share one threshold; the bit stream is then cut into sequences.
Identical configurations give byte-identical artifacts.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any

import click
import numpy as np

from qrng_borel.core.bitio import (
    TIMESTAMP_EXTENSIONS,
    extension_for,
    read_bits,
    read_timestamps,
    write_bits,
)
from qrng_borel.core.borel import BorelVerdict, borel_verdict
from qrng_borel.core.common import (
    ConfigurationError,
    EmptyResultError,
    InsufficientDataError,
)
from qrng_borel.core.config import PipelineConfig
from qrng_borel.core.extract import (
    BitSequence,
    IntervalSeries,
    encode_intervals,
    interarrival,
    interarrival_bins,
    split_sequence,
    truncate_dead_time,
)
from qrng_borel.core.nist_lite import BatteryReport, run_battery
from qrng_borel.core.report_utils import (
    block_probability_frame,
    deviation_box_frame,
    format_battery_text,
    interval_histogram_frame,
    max_relative_deviation,
    write_csv,
    write_json,
    write_text,
)
from qrng_borel.core.source_sim import BinSeries, coincidences, simulate_source

EXIT_PASS = 0
EXIT_FAIL = 1


def select_channel(signal: BinSeries, idler: BinSeries, channel: str) -> BinSeries:
    if channel == "coincidence":
        return coincidences(signal, idler)
    if channel == "signal":
        return signal
    if channel == "idler":
        return idler
    raise ConfigurationError(f"unknown channel {channel!r}")


def _bits_per_interval(cfg: PipelineConfig) -> float:
    per = math.log2(cfg.extraction.bins)
    # Debiasing keeps about a quarter of balanced input.
    return per / 4.0 if cfg.extraction.von_neumann else per


def _encode(cfg: PipelineConfig, iv: IntervalSeries) -> tuple[BitSequence, dict]:
    ex = cfg.extraction
    return encode_intervals(iv, mode=ex.mode, k=ex.bins, apply_von_neumann=ex.von_neumann)


def acquire_bits(
    cfg: PipelineConfig, verbose: bool = False
) -> tuple[BitSequence, IntervalSeries, dict]:
    """
    Simulate acquisitions until enough bits can be extracted.

    Returns:
        tuple: (bits, pooled intervals, extraction info with an ``acquisitions`` count)

    Raises:
        ConfigurationError: If ``max_acquisitions`` spans are not enough
    """
    target = cfg.analysis.sequences * cfg.analysis.length
    per_interval = _bits_per_interval(cfg)
    t0 = cfg.t0
    pieces: list[np.ndarray] = []
    pooled_count = 0

    for stream in range(cfg.max_acquisitions):
        signal, idler = simulate_source(cfg.source, stream=stream)
        series = select_channel(signal, idler, cfg.channel)
        try:
            iv = truncate_dead_time(interarrival_bins(series), t0)
        except (InsufficientDataError, EmptyResultError) as e:
            if verbose:
                click.echo(f"  acquisition {stream}: skipped ({e.message})", err=True)
            continue
        pieces.append(iv.durations)
        pooled_count += len(iv)
        if verbose:
            click.echo(
                f"  acquisition {stream}: {series.count:,} detections, "
                f"{pooled_count:,} intervals pooled",
                err=True,
            )
        # Small margin for ties dropped at the threshold.
        if pooled_count * per_interval < target * 1.001:
            continue
        pooled = IntervalSeries(np.concatenate(pieces), t0)
        bits, info = _encode(cfg, pooled)
        if bits.n >= target:
            info["acquisitions"] = stream + 1
            return bits, pooled, info

    raise ConfigurationError(
        f"{cfg.max_acquisitions} acquisitions did not yield {target:,} bits; "
        f"raise the pair rate or span, or lower analysis.sequences/length"
    )


def load_input_bits(cfg: PipelineConfig) -> tuple[BitSequence, IntervalSeries | None, dict]:
    """Bits from an input file: timestamps are extracted, bit files are used as-is."""
    path = cfg.input_path
    if Path(str(path)).suffix.lower() in TIMESTAMP_EXTENSIONS:
        iv = truncate_dead_time(interarrival(read_timestamps(path)), cfg.t0)
        bits, info = _encode(cfg, iv)
        info["acquisitions"] = 0
        return bits, iv, info
    bits = read_bits(path)
    return bits, None, {"bits": bits.n, "acquisitions": 0}


def analyze_sequences(sequences: list[BitSequence], workers: int = 1) -> list[BorelVerdict]:
    """Borel verdict per sequence, optionally in parallel; order follows the input."""
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(borel_verdict, sequences))
    return [borel_verdict(s) for s in sequences]


def battery_inputs(sequences: list[BitSequence], split: int) -> list[np.ndarray]:
    """Cut every sequence into ``split`` equal sub-strings for the battery."""
    out = []
    for seq in sequences:
        out.extend(np.split(seq.bits, split))
    return out


def _sequence_names(count: int) -> list[str]:
    width = max(2, len(str(count - 1)))
    return [f"sequence_{i:0{width}d}" for i in range(count)]


def _write_borel_artifacts(
    out_dir: Path, verdicts: list[BorelVerdict], names: list[str], include_counts: bool
) -> list[Path]:
    written = []
    payload = [{"sequence": name, **v.to_dict(include_counts)} for name, v in zip(names, verdicts)]
    path = out_dir / "borel_verdicts.json"
    write_json(payload, path)
    written.append(path)

    top = max(v.m_max for v in verdicts)
    for m in range(1, top + 1):
        path = out_dir / f"fig_block_probabilities_m{m}.csv"
        write_csv(
            block_probability_frame(verdicts, names, m),
            path,
            comment=(
                f"plot: histogram of order-{m} block probabilities with bound lines\n"
                f"block probabilities of order {m} against 2^-{m} and the acceptance band"
            ),
        )
        written.append(path)

    path = out_dir / "fig_deviation_boxes.csv"
    write_csv(
        deviation_box_frame(verdicts, names),
        path,
        comment=(
            "plot: box-whisker chart of per-block deviations\n"
            "box-whisker data of |P(i) - 2^-m| per sequence and order"
        ),
    )
    written.append(path)
    return written


def _write_histogram(out_dir: Path, iv: IntervalSeries, info: dict) -> Path:
    path = out_dir / "fig_interval_histogram.csv"
    write_csv(
        interval_histogram_frame(iv, info["fitted_rate"]),
        path,
        comment=(
            "plot: interval histogram with the fitted exponential density\n"
            f"interval durations after truncation at t0={info['t0']!r} s\n"
            f"threshold={info['threshold']!r} s fitted_rate={info['fitted_rate']!r} /s"
        ),
    )
    return path


def run_pipeline(cfg: PipelineConfig, verbose: bool = False) -> dict[str, Any]:
    """
    Run the configured pipeline and write its artifacts to ``cfg.output.dir``.

    Returns:
        dict: ``exit_code`` (0 all analyses pass, 1 an analysis failed),
        ``artifacts`` (written paths), ``extraction``, ``verdicts`` and ``battery``
    """
    cfg.validate()
    an = cfg.analysis
    out_dir = Path(cfg.output.dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    if cfg.input_path is not None:
        if verbose:
            click.echo(f"Reading {cfg.input_path}", err=True)
        bits, pooled, info = load_input_bits(cfg)
    else:
        if verbose:
            click.echo(
                f"Simulating seed={cfg.source.seed} channel={cfg.channel} "
                f"target={an.sequences * an.length:,} bits",
                err=True,
            )
        bits, pooled, info = acquire_bits(cfg, verbose)

    sequences = split_sequence(bits, an.sequences, an.length)
    names = _sequence_names(len(sequences))
    ext = extension_for(cfg.output.format)
    artifacts: list[Path] = []
    for name, seq in zip(names, sequences):
        artifacts.append(write_bits(seq, out_dir / f"{name}{ext}", cfg.output.format))

    if pooled is not None:
        artifacts.append(_write_histogram(out_dir, pooled, info))

    verdicts: list[BorelVerdict] = []
    report: BatteryReport | None = None
    failed = False

    if an.borel:
        if verbose:
            click.echo(f"Borel analysis of {len(sequences)} sequences", err=True)
        verdicts = analyze_sequences(sequences, an.workers)
        artifacts.extend(
            _write_borel_artifacts(out_dir, verdicts, names, cfg.output.include_counts)
        )
        failed |= not all(v.overall_pass for v in verdicts)

    if an.battery:
        if verbose:
            click.echo("Running the statistical battery", err=True)
        report = run_battery(
            battery_inputs(sequences, an.battery_split),
            alpha=an.alpha,
            config=an.battery_config(),
            verbose=verbose,
        )
        report.metadata.update({"source_sequences": len(sequences), "split": an.battery_split})
        path = out_dir / "battery_report.json"
        write_json(report.to_dict(), path)
        artifacts.append(path)
        path = out_dir / "battery_report.txt"
        write_text(path, format_battery_text(report))
        artifacts.append(path)
        failed |= not report.overall_pass

    summary = {
        "config": cfg.to_dict(),
        "extraction": info,
        "sequences": names,
        "max_relative_deviation_pct": {
            str(m): v for m, v in max_relative_deviation(verdicts).items()
        },
        "borel_pass": all(v.overall_pass for v in verdicts) if verdicts else None,
        "battery_pass": report.overall_pass if report is not None else None,
    }
    path = out_dir / "run_summary.json"
    write_json(summary, path)
    artifacts.append(path)

    return {
        "exit_code": EXIT_FAIL if failed else EXIT_PASS,
        "artifacts": artifacts,
        "extraction": info,
        "names": names,
        "verdicts": verdicts,
        "battery": report,
    }
