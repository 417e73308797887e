from pathlib import Path

import click

from qrng_borel.cli.decorators import (
    alpha_option,
    config_option,
    extraction_options,
    format_option,
    json_option,
    seed_option,
    split_options,
    verbose_option,
)
from qrng_borel.core.bitio import (
    TIMESTAMP_EXTENSIONS,
    read_bin_series,
    read_bits,
    read_timestamps,
    write_bin_series,
    write_bits,
    write_timestamps,
)
from qrng_borel.core.borel import borel_verdict
from qrng_borel.core.common import QrngError
from qrng_borel.core.config import CHANNELS, build_pipeline_config, load_config_file
from qrng_borel.core.extract import (
    encode_intervals,
    interarrival,
    interarrival_bins,
    truncate_dead_time,
)
from qrng_borel.core.fixtures import FIXTURE_KINDS, make_fixture
from qrng_borel.core.nist_lite import BatteryConfig, run_battery
from qrng_borel.core.pipeline import EXIT_FAIL, EXIT_PASS, battery_inputs, run_pipeline
from qrng_borel.core.report_utils import (
    deviation_box_frame,
    max_relative_deviation,
    print_battery_table,
    print_counts,
    print_verdict_table,
    to_json,
    write_csv,
)
from qrng_borel.core.source_sim import (
    DEFAULT_DEAD_TIME,
    bins_to_timestamps,
    coincidences,
    registered_counts,
    simulate_source,
)

# Version info
__version__ = "0.1.0"


@click.group()
@click.version_option(version=__version__, prog_name="qrng-borel")
def cli():
    """Simulate a photon-pair QRNG, extract bits and certify them for Borel normality."""
    pass


def _config_values(config_path):
    return load_config_file(config_path) if config_path else {}


def _echo_failures(names, verdicts):
    for name, verdict in zip(names, verdicts):
        if not verdict.overall_pass:
            orders = ", ".join(str(m) for m in verdict.failing_orders())
            click.echo(f"Borel FAIL: {name} fails order(s) m={orders}", err=True)


@cli.command()
@seed_option
@config_option
@click.option("--stream", type=click.IntRange(min=0), default=0, help="Acquisition index")
@click.option("--span", type=float, default=None, help="Acquisition span in seconds")
@click.option("--pair-rate", type=float, default=None, help="Pair rate per second")
@click.option(
    "--excess-rate", type=float, default=None, help="Per-channel excess event rate per second"
)
@click.option("--bin-width", type=float, default=None, help="Bin width in seconds")
@click.option("--dead-time", type=float, default=None, help="Detector dead time in seconds")
@click.option(
    "--out",
    "out_dir",
    type=click.Path(file_okay=False),
    default=None,
    help="Write signal, idler and coincidence series to this directory",
)
@click.option(
    "--timestamps",
    is_flag=True,
    help="Also write each channel as a timestamp CSV (integer nanoseconds)",
)
@json_option
@verbose_option
def simulate(
    seed,
    config_path,
    stream,
    span,
    pair_rate,
    excess_rate,
    bin_width,
    dead_time,
    out_dir,
    timestamps,
    json_output,
    verbose,
):
    """
    Simulate one acquisition span and report registered counts.

    Series are written as packed bin files (one bit per time bin).
    """
    cfg = build_pipeline_config(
        _config_values(config_path),
        {
            "source.seed": seed,
            "source.span": span,
            "source.pair_rate": pair_rate,
            "source.singles_excess_rate": excess_rate,
            "source.bin_width": bin_width,
            "source.dead_time": dead_time,
        },
    )
    source = cfg.source.validate()
    if verbose:
        click.echo(
            f"Simulating {source.bin_count:,} bins (seed={source.seed}, stream={stream})", err=True
        )
    signal, idler = simulate_source(source, stream=stream)
    counts = registered_counts(signal, idler, source)

    if out_dir:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        series = {"signal": signal, "idler": idler, "coincidence": coincidences(signal, idler)}
        for name, s in series.items():
            write_bin_series(s, out / f"{name}.bits")
            if timestamps:
                write_timestamps(bins_to_timestamps(s), out / f"{name}.csv")
        if verbose:
            click.echo(f"Series written to {out}", err=True)

    if json_output:
        click.echo(to_json(counts), nl=False)
    else:
        print_counts(counts)


@cli.command()
@click.argument("input_file")
@click.argument("output_file", type=click.Path())
@extraction_options
@format_option
@click.option(
    "--bin-width",
    type=float,
    default=2e-9,
    show_default=True,
    help="Bin width in seconds when INPUT_FILE is a packed bin series",
)
@click.option(
    "--dead-time",
    type=click.FloatRange(min=0),
    default=DEFAULT_DEAD_TIME,
    show_default=True,
    help="Detector dead time in seconds; --t0 defaults to twice this",
)
@verbose_option
def extract(
    input_file, output_file, t0, bins, mode, von_neumann, fmt, bin_width, dead_time, verbose
):
    """
    Extract bits from detection times.

    INPUT_FILE is a timestamp CSV (integer nanoseconds) or a packed bin series
    (.bits) as written by 'simulate'. Intervals shorter than --t0 (default:
    2 x --dead-time) are dropped.
    """
    if Path(input_file).suffix.lower() in TIMESTAMP_EXTENSIONS:
        raw = interarrival(read_timestamps(input_file))
    else:
        raw = interarrival_bins(read_bin_series(input_file, bin_width))

    if t0 is None:
        t0 = 2.0 * dead_time
    iv = truncate_dead_time(raw, t0)
    try:
        bits, info = encode_intervals(
            iv, mode=mode or "median", k=bins or 2, apply_von_neumann=von_neumann
        )
    except ValueError as e:
        raise QrngError(str(e)) from e
    write_bits(bits, output_file, fmt)

    click.echo(
        f"{info['intervals']:,} intervals -> {info['bits']:,} bits "
        f"(threshold {info['threshold']:.6g} s)",
        err=True,
    )
    if verbose:
        click.echo(f"  fitted rate: {info['fitted_rate']:.6g}/s", err=True)
        click.echo(f"  ones fraction: {bits.ones_fraction():.6f}", err=True)


@cli.command()
@click.argument("bit_files", nargs=-1, required=True)
@format_option
@json_option
@click.option("--counts", is_flag=True, help="Include block counts in JSON output")
@click.option(
    "--boxes",
    type=click.Path(dir_okay=False),
    default=None,
    help="Write box-whisker data of the deviations per file and order to this CSV",
)
@verbose_option
def borel(bit_files, fmt, json_output, counts, boxes, verbose):
    """
    Check bit files for Borel normality.

    Exits 0 if every file is not falsified and 1 if any order of any file fails.
    """
    names = [Path(p).name for p in bit_files]
    verdicts = []
    for path in bit_files:
        bits = read_bits(path, fmt)
        if verbose:
            click.echo(f"{path}: {bits.n:,} bits", err=True)
        verdicts.append(borel_verdict(bits))

    if json_output:
        payload = [{"sequence": n, **v.to_dict(counts)} for n, v in zip(names, verdicts)]
        click.echo(to_json(payload if len(payload) > 1 else payload[0]), nl=False)
    else:
        for name, verdict in zip(names, verdicts):
            print_verdict_table(verdict, name)
        if len(verdicts) > 1:
            worst = max_relative_deviation(verdicts)
            summary = ", ".join(f"m={m}: {pct:.1f}%" for m, pct in worst.items())
            click.echo(f"\nLargest deviation relative to the bound: {summary}")

    if boxes:
        write_csv(
            deviation_box_frame(verdicts, names),
            boxes,
            comment="box-whisker data of |P(i) - 2^-m| per sequence and order",
        )

    _echo_failures(names, verdicts)
    ok = all(v.overall_pass for v in verdicts)
    click.get_current_context().exit(EXIT_PASS if ok else EXIT_FAIL)


@cli.command()
@click.argument("bit_files", nargs=-1, required=True)
@format_option
@alpha_option
@click.option(
    "--split",
    type=click.IntRange(min=1),
    default=1,
    show_default=True,
    help="Cut each file into this many equal sub-strings",
)
@click.option("--block-size", type=click.IntRange(min=2), default=128, show_default=True)
@click.option(
    "--apen-m",
    type=click.IntRange(min=1),
    default=10,
    show_default=True,
    help="Block length of the approximate entropy test",
)
@click.option("--workers", type=click.IntRange(min=1), default=1, show_default=True)
@json_option
@verbose_option
def battery(bit_files, fmt, alpha, split, block_size, apen_m, workers, json_output, verbose):
    """
    Run the statistical battery over bit files.

    Each row aggregates one test over all sequences: the pass proportion and
    the uniformity p-value of the per-sequence p-values.
    """
    sequences = [read_bits(path, fmt) for path in bit_files]
    for path, seq in zip(bit_files, sequences):
        if split > 1 and seq.n % split:
            raise click.BadParameter(
                f"{path} has {seq.n:,} bits, not divisible by --split {split}",
                param_hint="--split",
            )
    cfg = BatteryConfig(block_size=block_size, apen_m=apen_m, workers=workers)
    report = run_battery(
        battery_inputs(sequences, split),
        alpha=alpha if alpha is not None else cfg.alpha,
        config=cfg,
        verbose=verbose,
    )
    report.metadata.update({"files": list(bit_files), "split": split})

    if json_output:
        click.echo(to_json(report.to_dict()), nl=False)
    else:
        print_battery_table(report)
    click.get_current_context().exit(EXIT_PASS if report.overall_pass else EXIT_FAIL)


@cli.command()
@config_option
@seed_option
@click.option(
    "--input",
    "input_path",
    default=None,
    help="Timestamp CSV or bit file to analyze instead of simulating",
)
@click.option(
    "--channel",
    type=click.Choice(CHANNELS),
    default=None,
    help="Simulated channel to extract from (default: coincidence)",
)
@split_options
@extraction_options
@alpha_option
@click.option("--battery", "with_battery", is_flag=True, help="Also run the statistical battery")
@click.option("--no-borel", is_flag=True, help="Skip the Borel analysis")
@click.option(
    "--battery-split",
    type=click.IntRange(min=1),
    default=None,
    help="Sub-strings per sequence for the battery (default: 10)",
)
@click.option("--workers", type=click.IntRange(min=1), default=None, help="Parallel workers")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None)
@format_option
@click.option("--counts", is_flag=True, help="Include block counts in the verdict JSON")
@verbose_option
def pipeline(
    config_path,
    seed,
    input_path,
    channel,
    sequences,
    length,
    t0,
    bins,
    mode,
    von_neumann,
    alpha,
    with_battery,
    no_borel,
    battery_split,
    workers,
    out_dir,
    fmt,
    counts,
    verbose,
):
    """
    Simulate (or read), extract, analyze and write all artifacts.

    Exits 0 if every requested analysis passes, 1 if any fails and 2 on errors.
    """
    cfg = build_pipeline_config(
        _config_values(config_path),
        {
            "source.seed": seed,
            "input.path": input_path,
            "input.channel": channel,
            "analysis.sequences": sequences,
            "analysis.length": length,
            "extraction.t0": t0,
            "extraction.bins": bins,
            "extraction.mode": mode,
            "extraction.von_neumann": True if von_neumann else None,
            "analysis.alpha": alpha,
            "analysis.battery": True if with_battery else None,
            "analysis.borel": False if no_borel else None,
            "analysis.battery_split": battery_split,
            "analysis.workers": workers,
            "output.dir": out_dir,
            "output.format": fmt,
            "output.include_counts": True if counts else None,
        },
    )
    result = run_pipeline(cfg, verbose=verbose)

    for name, verdict in zip(result["names"], result["verdicts"]):
        click.echo(f"{name}: {verdict.label}")
    if result["battery"] is not None:
        print_battery_table(result["battery"])
    _echo_failures(result["names"], result["verdicts"])
    click.echo(f"{len(result['artifacts'])} artifacts written to {cfg.output.dir}", err=True)
    click.get_current_context().exit(result["exit_code"])


@cli.command()
@click.argument("kind", type=click.Choice(FIXTURE_KINDS))
@click.argument("output_file", type=click.Path())
@click.option("--length", "-n", type=click.IntRange(min=1), default=1_000_000, show_default=True)
@click.option("--pattern", default="01", show_default=True, help="Unit repeated by 'periodic'")
@seed_option
@format_option
def fixture(kind, output_file, length, pattern, seed, fmt):
    """Write a reference or adversarial bit sequence."""
    try:
        bits = make_fixture(kind, length, seed=seed or 0, pattern=pattern)
    except ValueError as e:
        raise click.BadParameter(str(e)) from e
    write_bits(bits, output_file, fmt)
    click.echo(f"{kind}: {bits.n:,} bits written to {output_file}", err=True)

