"""
Formatting of verdicts, battery reports and figure data.

Terminal output goes through rich tables; files are JSON, aligned plain text
or CSV with a ``#`` comment header naming what the data plots.
"""

from __future__ import annotations

import io
import json
from typing import Any

import fsspec
import numpy as np
import pandas as pd
from rich.console import Console
from rich.table import Table

from qrng_borel.core.borel import BorelVerdict
from qrng_borel.core.common import QrngError
from qrng_borel.core.extract import IntervalSeries
from qrng_borel.core.nist_lite import (
    STATUS_NOT_IMPLEMENTED,
    STATUS_NOT_RUN,
    BatteryReport,
)

HISTOGRAM_BINS = 100


def _json_default(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def to_json(obj: Any) -> str:
    """Indented JSON with a trailing newline; numpy scalars become plain numbers."""
    return json.dumps(obj, indent=2, default=_json_default) + "\n"


def write_text(path, text: str) -> None:
    try:
        with fsspec.open(str(path), "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
    except OSError as e:
        raise QrngError(f"Cannot write {path}: {e}") from e


def write_json(obj: Any, path) -> None:
    write_text(path, to_json(obj))


def write_csv(frame: pd.DataFrame, path, comment: str | None = None) -> None:
    """Write a frame as CSV, optionally preceded by ``# comment`` lines."""
    buf = io.StringIO()
    if comment:
        for line in comment.splitlines():
            buf.write(f"# {line}\n")
    frame.to_csv(buf, index=False, lineterminator="\n")
    write_text(path, buf.getvalue())


def _yes_no(passed: bool) -> str:
    return "[green]yes[/green]" if passed else "[red]no[/red]"


def print_verdict_table(verdict: BorelVerdict, name: str, console: Console | None = None) -> None:
    """Per-order table of one Borel verdict."""
    console = console or Console()
    colour = "green" if verdict.overall_pass else "red"
    console.print()
    console.print(f"[bold]{name}[/bold]  n={verdict.n:,}  bound={verdict.bound:.6f}")

    table = Table(show_header=True, header_style="bold")
    table.add_column("m", justify="right")
    table.add_column("max |dev|", justify="right", style="blue")
    table.add_column("sigma_m", justify="right", style="blue")
    table.add_column("% of bound", justify="right")
    table.add_column("Pass", justify="center")
    for r in verdict.per_order:
        table.add_row(
            str(r.m),
            f"{r.max_abs_deviation:.6f}",
            f"{r.sigma_m:.6f}",
            f"{r.relative_pct:.1f}",
            _yes_no(r.passed),
        )
    console.print(table)
    console.print(f"Verdict: [{colour}]{verdict.label}[/{colour}]")


def print_battery_table(report: BatteryReport, console: Console | None = None) -> None:
    console = console or Console()
    table = Table(show_header=True, header_style="bold")
    table.add_column("Test", style="white")
    table.add_column("Uniformity P", justify="right", style="blue")
    table.add_column("Proportion", justify="right")
    table.add_column("Result", justify="center")
    for row in report.per_test:
        if row.status in (STATUS_NOT_RUN, STATUS_NOT_IMPLEMENTED):
            table.add_row(row.test_name, "-", "-", f"[dim]{row.status}[/dim]")
            continue
        p = "-" if row.uniformity_p is None else f"{row.uniformity_p:.6f}"
        table.add_row(row.test_name, p, row.proportion, _yes_no(row.passed))
    console.print(table)
    console.print(
        f"{report.sequences} sequences, alpha={report.alpha}, "
        f"minimum pass count {report.min_pass_count}"
    )


def format_battery_text(report: BatteryReport) -> str:
    """Plain aligned Test / P-value / Proportion / Pass table."""
    lines = [f"{'Test':<28} {'P-value':>10} {'Proportion':>11} {'Pass':>16}", "-" * 68]
    for row in report.per_test:
        p = "-" if row.uniformity_p is None else f"{row.uniformity_p:.6f}"
        if row.status in (STATUS_NOT_RUN, STATUS_NOT_IMPLEMENTED):
            lines.append(f"{row.test_name:<28} {'-':>10} {'-':>11} {row.status:>16}")
        else:
            mark = "yes" if row.passed else "no"
            lines.append(f"{row.test_name:<28} {p:>10} {row.proportion:>11} {mark:>16}")
    lines.append("")
    lines.append(
        f"sequences={report.sequences} alpha={report.alpha} min_pass={report.min_pass_count}"
    )
    return "\n".join(lines) + "\n"


def print_counts(counts: dict[str, Any], console: Console | None = None) -> None:
    console = console or Console()
    table = Table(show_header=True, header_style="bold")
    table.add_column("Quantity", style="white")
    table.add_column("Value", justify="right", style="cyan")
    for key, value in counts.items():
        text = f"{value:,}" if isinstance(value, int) else f"{value:,.6g}"
        table.add_row(key, text)
    console.print(table)


def deviation_box_frame(verdicts: list[BorelVerdict], names: list[str]) -> pd.DataFrame:
    """One row per (sequence, order): the box-whisker data of |P(i) - 2^-m|."""
    rows = []
    for name, verdict in zip(names, verdicts):
        for r in verdict.per_order:
            rows.append(
                {
                    "sequence": name,
                    "m": r.m,
                    "min": r.box.min,
                    "q1": r.box.q1,
                    "median": r.box.median,
                    "q3": r.box.q3,
                    "max": r.box.max,
                    "sigma": r.sigma_m,
                    "bound": verdict.bound,
                    "rel_pct": r.relative_pct,
                    "pass": r.passed,
                }
            )
    return pd.DataFrame(rows)


def block_probability_frame(
    verdicts: list[BorelVerdict], names: list[str], m: int
) -> pd.DataFrame:
    """
    Block probabilities of order ``m`` for each sequence, with the ideal
    value 2^-m and the acceptance band around it.
    """
    rows = []
    for name, verdict in zip(names, verdicts):
        matches = [r for r in verdict.per_order if r.m == m]
        if not matches:
            continue
        dist = matches[0].distribution
        expected = 2.0**-m
        for i, p in enumerate(dist.probs):
            rows.append(
                {
                    "sequence": name,
                    "block": dist.label(i),
                    "probability": float(p),
                    "expected": expected,
                    "lower": expected - verdict.bound,
                    "upper": expected + verdict.bound,
                }
            )
    columns = ["sequence", "block", "probability", "expected", "lower", "upper"]
    return pd.DataFrame(rows, columns=columns)


def max_relative_deviation(verdicts: list[BorelVerdict]) -> dict[int, float]:
    """Largest max-deviation-to-bound percentage per order across sequences."""
    worst: dict[int, float] = {}
    for verdict in verdicts:
        for r in verdict.per_order:
            worst[r.m] = max(worst.get(r.m, 0.0), r.relative_pct)
    return dict(sorted(worst.items()))


def interval_histogram_frame(
    iv: IntervalSeries, fitted_rate: float, bins: int = HISTOGRAM_BINS
) -> pd.DataFrame:
    """
    Histogram of truncated interval durations with the fitted exponential density.
    """
    d = iv.durations
    upper = float(np.quantile(d, 0.999)) if d.size else 1.0
    if upper <= 0:
        upper = float(d.max()) if d.size and d.max() > 0 else 1.0
    counts, edges = np.histogram(d, bins=bins, range=(0.0, upper))
    widths = np.diff(edges)
    density = counts / (d.size * widths) if d.size else np.zeros_like(widths)
    centres = 0.5 * (edges[:-1] + edges[1:])
    return pd.DataFrame(
        {
            "bin_left": edges[:-1],
            "bin_right": edges[1:],
            "count": counts.astype(np.int64),
            "density": density,
            "fitted_density": fitted_rate * np.exp(-fitted_rate * centres),
        }
    )
