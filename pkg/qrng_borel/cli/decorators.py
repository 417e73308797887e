"""
Shared Click decorators for common CLI parameters.

Options shared by several verbs live here so names, defaults and help text
stay consistent across commands.
"""

import click

from qrng_borel.core.extract import THRESHOLD_MODES


def seed_option(func):
    """
    Add --seed to a command.

    Falls back to the QRNG_SEED environment variable.
    """
    return click.option(
        "--seed",
        type=int,
        envvar="QRNG_SEED",
        default=None,
        help="Seed for the simulator (default: $QRNG_SEED, then 0)",
    )(func)


def config_option(func):
    return click.option(
        "--config",
        "config_path",
        type=click.Path(dir_okay=False),
        help="Flat key = value config file; command-line flags override it",
    )(func)


def format_option(func):
    """
    Add --format to a command writing bit files.

    When omitted the format follows the file extension (.txt ascii, .bits packed).
    """
    return click.option(
        "--format",
        "fmt",
        type=click.Choice(["ascii", "packed"]),
        default=None,
        help="Bit file format (default: from extension, .txt ascii / .bits packed)",
    )(func)


def alpha_option(func):
    return click.option(
        "--alpha",
        type=click.FloatRange(0, 1, min_open=True, max_open=True),
        default=None,
        help="Significance level per test (default: 0.01)",
    )(func)


def split_options(func):
    """
    Add --sequences and --length to a command.

    Adds:
    - --sequences: Number of sequences to cut from the bit stream
    - --length: Bits per sequence
    """
    func = click.option(
        "--sequences", type=click.IntRange(min=1), default=None, help="Number of sequences"
    )(func)
    func = click.option(
        "--length", type=click.IntRange(min=4), default=None, help="Bits per sequence"
    )(func)
    return func


def extraction_options(func):
    """
    Add bit-extraction options to a command.

    Adds:
    - --t0: Dead-time truncation in seconds (default: 2 x dead time)
    - --bins: Equiprobable bins per interval, a power of two
    - --mode: Threshold mode for two bins
    - --von-neumann: Debias the encoded bits
    """
    func = click.option(
        "--t0",
        type=click.FloatRange(min=0),
        default=None,
        help="Discard intervals shorter than T0 seconds and shift the rest",
    )(func)
    func = click.option(
        "--bins",
        type=int,
        default=None,
        help="Equiprobable bins per interval (power of two, default: 2)",
    )(func)
    func = click.option(
        "--mode",
        type=click.Choice(THRESHOLD_MODES),
        default=None,
        help="Threshold: empirical median or ln2 over the fitted rate (default: median)",
    )(func)
    func = click.option(
        "--von-neumann",
        "von_neumann",
        is_flag=True,
        help="Apply von Neumann debiasing to the encoded bits",
    )(func)
    return func


def verbose_option(func):
    """
    Add --verbose/-v option to a command.

    Progress and diagnostics go to stderr and never change the artifacts.
    """
    return click.option("--verbose", "-v", is_flag=True, help="Print verbose output")(func)


def json_option(func):
    return click.option("--json", "json_output", is_flag=True, help="Output as JSON for scripting")(
        func
    )
