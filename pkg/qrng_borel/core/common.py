import os
import urllib.parse

import click
import numpy as np


class QrngError(click.ClickException):
    """Base error for qrng-borel. Surfaces in the CLI with exit code 2."""

    exit_code = 2


class ConfigurationError(QrngError):
    """Invalid source, extraction, analysis or pipeline configuration."""


class ShapeError(QrngError):
    """Series or sequences with incompatible lengths or bin widths."""


class InsufficientDataError(QrngError):
    """Too few timestamps, intervals or bits for the requested operation."""


class OrderingError(QrngError):
    """Timestamps that are not strictly increasing."""


class EmptyResultError(QrngError):
    """An operation removed every element of its input."""


class BitFormatError(QrngError):
    """Malformed bit file."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class LengthMismatchError(BitFormatError):
    """Packed payload size does not agree with the header length."""


def is_remote_url(path):
    """
    Check if path is a remote URL that fsspec should open.

    Supports:
    - HTTP/HTTPS: http://, https://
    - AWS S3: s3://, s3a://
    - Google Cloud Storage: gs://, gcs://
    - Azure: az://, abfs://

    Args:
        path: File path or URL to check

    Returns:
        bool: True if path is a remote URL, False otherwise
    """
    remote_schemes = [
        "http://",
        "https://",
        "s3://",
        "s3a://",
        "gs://",
        "gcs://",
        "az://",
        "abfs://",
    ]
    return any(str(path).startswith(scheme) for scheme in remote_schemes)


def safe_file_url(file_path, verbose=False):
    """
    Handle both local and remote files, returning a safe URL.

    For remote URLs, performs URL encoding if needed.
    For local files, validates existence.

    Raises:
        click.BadParameter: If local file doesn't exist
    """
    file_path = str(file_path)
    if is_remote_url(file_path):
        if file_path.startswith(("http://", "https://")):
            parsed = urllib.parse.urlparse(file_path)
            encoded_path = urllib.parse.quote(parsed.path)
            safe_url = parsed._replace(path=encoded_path).geturl()
        else:
            safe_url = file_path

        if verbose:
            protocol = file_path.split("://")[0].upper()
            click.echo(f"Reading from {protocol}: {safe_url}", err=True)
        return safe_url

    if not os.path.exists(file_path):
        raise click.BadParameter(f"Local file not found: {file_path}")
    return file_path


def as_bit_array(bits):
    """
    Coerce a BitSequence, string of '0'/'1', or array-like into a uint8 numpy array.

    Raises:
        ValueError: If any symbol is not 0 or 1, or an array has a non-integer dtype
    """
    # Imported lazily: extract imports this module.
    from qrng_borel.core.extract import BitSequence

    if isinstance(bits, BitSequence):
        return bits.bits
    if isinstance(bits, str):
        raw = np.frombuffer(bits.encode("ascii"), dtype=np.uint8) - ord("0")
    else:
        raw = np.asarray(bits)
        if raw.size and raw.dtype.kind not in "biu":
            raise ValueError(f"bit arrays need an integer or boolean dtype, got {raw.dtype}")
    arr = raw.astype(np.uint8, copy=False)
    if arr.ndim != 1:
        arr = arr.reshape(-1)
    if arr.size and arr.max() > 1:
        raise ValueError("bit sequences may only contain the symbols 0 and 1")
    return arr
