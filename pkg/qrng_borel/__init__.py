from qrng_borel.cli.main import cli

__all__ = ["cli"]
