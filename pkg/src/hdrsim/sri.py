"""SRI1: a minimal spectral radiance/irradiance image container.

Layout::

    SRI1\\n
    rows <int>\\n
    cols <int>\\n
    start_nm <float>\\n
    step_nm <float>\\n
    count <int>\\n
    kind <radiance|irradiance>\\n
    units <text>\\n
    creator <text>\\n
    crc32 <8 lowercase hex digits>\\n
    end\\n
    <payload>

The header is ASCII, one ``key value`` pair per line, keys in exactly this
order. ``crc32`` is the CRC-32 of every header byte before the ``crc32``
line. The payload is rows*cols*count little-endian float32 values stored
band-major (all of band 0 row by row, then band 1, ...), nothing after it.
"""

from __future__ import annotations

import os
import zlib
from pathlib import Path

import numpy as np

from . import __version__
from .errors import SriFormatError
from .spectral import KINDS, SpectralImage, WavelengthGrid

MAGIC = b"SRI1\n"
KEYS = ("rows", "cols", "start_nm", "step_nm", "count", "kind", "units", "creator")
MAX_HEADER = 4096
_DTYPE = np.dtype("<f4")


def _fmt_float(x: float) -> str:
    return repr(float(x))


def encode_header(rows: int, cols: int, grid: WavelengthGrid, kind: str, units: str, creator: str) -> bytes:
    for name, text in (("units", units), ("creator", creator)):
        if "\n" in text or not text.isascii() or not text.strip():
            raise SriFormatError(f"{name} must be non-empty single-line ASCII")
    values = (rows, cols, _fmt_float(grid.start_nm), _fmt_float(grid.step_nm), grid.count, kind, units, creator)
    body = MAGIC + "".join(f"{k} {v}\n" for k, v in zip(KEYS, values)).encode("ascii")
    return body + f"crc32 {zlib.crc32(body):08x}\nend\n".encode("ascii")


def to_bytes(img: SpectralImage, creator: str | None = None) -> bytes:
    payload = np.ascontiguousarray(np.transpose(img.data, (2, 0, 1)), dtype=_DTYPE)
    if np.any(payload < 0) or not np.all(np.isfinite(payload)):
        raise SriFormatError("refusing to write negative or non-finite samples")
    header = encode_header(img.rows, img.cols, img.grid, img.kind, img.units,
                           creator or f"hdrsim {__version__}")
    return header + payload.tobytes()


def write_sri(path, img: SpectralImage, creator: str | None = None) -> None:
    blob = to_bytes(img, creator)
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(blob)
    os.replace(tmp, path)


def _parse_int(key, text, offset):
    if not text.isdigit() or (len(text) > 1 and text[0] == "0"):
        raise SriFormatError(f"{key} must be a positive decimal integer, got {text!r}", offset)
    value = int(text)
    if value < 1:
        raise SriFormatError(f"{key} must be positive", offset)
    return value


def _parse_float(key, text, offset):
    try:
        value = float(text)
    except ValueError:
        raise SriFormatError(f"{key} is not a number: {text!r}", offset) from None
    if not np.isfinite(value):
        raise SriFormatError(f"{key} is not finite", offset)
    return value


def parse_header(blob: bytes) -> tuple[dict, int]:
    """Parse and verify the header; returns (fields, payload offset)."""
    if not blob.startswith(MAGIC):
        raise SriFormatError("bad magic, expected 'SRI1'", 0)
    pos = len(MAGIC)
    fields: dict = {}
    for key in KEYS + ("crc32", "end"):
        nl = blob.find(b"\n", pos, pos + MAX_HEADER)
        if nl < 0:
            raise SriFormatError(f"unterminated header line while looking for {key!r}", pos)
        raw = blob[pos:nl]
        try:
            line = raw.decode("ascii")
        except UnicodeDecodeError:
            raise SriFormatError("non-ASCII byte in header", pos) from None
        if key == "end":
            if line != "end":
                raise SriFormatError(f"expected 'end', found {line!r}", pos)
            pos = nl + 1
            break
        name, sep, value = line.partition(" ")
        if name != key or not sep or not value or value != value.strip():
            raise SriFormatError(f"expected '{key} <value>', found {line!r}", pos)
        if key == "crc32":
            expected = f"{zlib.crc32(blob[:pos]):08x}"
            if value != expected:
                raise SriFormatError(f"header checksum mismatch: stored {value!r}, computed {expected!r}", pos)
        elif key in ("rows", "cols", "count"):
            fields[key] = _parse_int(key, value, pos)
        elif key in ("start_nm", "step_nm"):
            fields[key] = _parse_float(key, value, pos)
        elif key == "kind":
            if value not in KINDS:
                raise SriFormatError(f"unknown kind {value!r}", pos)
            fields[key] = value
        else:
            fields[key] = value
        pos = nl + 1
    return fields, pos


def from_bytes(blob: bytes) -> SpectralImage:
    fields, offset = parse_header(blob)
    expected = fields["rows"] * fields["cols"] * fields["count"] * 4
    actual = len(blob) - offset
    if actual != expected:
        what = "truncated payload" if actual < expected else "trailing bytes after payload"
        raise SriFormatError(
            f"{what}: header rows*cols*count*4 = {expected} bytes, found {actual}", offset + min(actual, expected)
        )
    try:
        grid = WavelengthGrid(fields["start_nm"], fields["step_nm"], fields["count"])
    except ValueError as exc:
        raise SriFormatError(f"invalid wavelength grid: {exc}", 0) from None
    data = np.frombuffer(blob, dtype=_DTYPE, offset=offset).reshape(fields["count"], fields["rows"], fields["cols"])
    bad = ~np.isfinite(data) | (data < 0)
    if np.any(bad):
        first = int(np.flatnonzero(bad.ravel())[0])
        raise SriFormatError("negative or non-finite sample", offset + 4 * first)
    meta = {"units": fields["units"], "creator": fields["creator"], "dtype": "float32"}
    return SpectralImage(np.transpose(data, (1, 2, 0)).astype(np.float64), grid, fields["kind"], meta)


def read_sri(path) -> SpectralImage:
    with open(path, "rb") as fh:
        return from_bytes(fh.read())
