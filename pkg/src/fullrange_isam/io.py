"""Sidecar binary arrays, CSV tables and 16-bit PNG export.

An array ``name.bin`` is stored as raw little-endian samples, row-major with
the A-scan index varying slowest, next to ``name.json`` holding the grid, the
sample type (``"f32"`` or ``"c64"``, the latter as interleaved f32 real and
imaginary parts) and optionally a dispersion model. Every write goes to a
temporary file in the destination directory and is renamed into place, so an
interrupted run never leaves a half-written artifact.
"""
from __future__ import annotations

import contextlib
import csv
import io as _io
import json
import os
import tempfile
from pathlib import Path

import numpy as np
from PIL import Image

from .data_model import (
    DispersionModel,
    GridSpec,
    RealSpectra,
    SusceptibilityImage,
)

__all__ = [
    "ArrayFileError",
    "sidecar_path",
    "write_array",
    "read_array",
    "read_header",
    "write_json",
    "read_json",
    "write_csv",
    "write_png16",
    "read_png16",
    "atomic_write",
]

_DTYPES = {"f32": np.dtype("<f4"), "c64": np.dtype("<c8")}


class ArrayFileError(ValueError):
    """An array or its sidecar is missing, malformed or inconsistent."""


def sidecar_path(path) -> Path:
    return Path(path).with_suffix(".json")


@contextlib.contextmanager
def atomic_write(path, mode="wb"):
    """Open a temporary sibling of ``path`` and rename it over ``path`` on success."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        newline = "" if "b" not in mode else None
        with os.fdopen(fd, mode, newline=newline) as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp)
        raise


def write_json(path, obj) -> None:
    with atomic_write(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ArrayFileError(f"cannot read {path}: {exc}") from exc


def write_array(path, obj, dispersion: DispersionModel | None = None, extra: dict | None = None) -> Path:
    """Write a spectra or image container and its sidecar header.

    Real containers are stored as ``f32`` and complex ones as ``c64``; values
    are rounded to single precision. Returns the path of the data file.
    """
    path = Path(path)
    data = np.asarray(obj.data)
    tag = "c64" if np.iscomplexobj(data) else "f32"
    header = dict(obj.grid.to_dict())
    header.update(dtype=tag, byte_order="little")
    if dispersion is not None:
        header["dispersion"] = {"k_0": dispersion.k_0, "coeffs": list(dispersion.coeffs)}
    if extra:
        header.update(extra)
    payload = np.ascontiguousarray(data, dtype=_DTYPES[tag]).tobytes()
    with atomic_write(path) as fh:
        fh.write(payload)
    write_json(sidecar_path(path), header)
    return path


def read_header(path) -> dict:
    header = read_json(sidecar_path(path))
    missing = {"n_x", "n_z", "k_min", "k_max", "lateral_pitch", "focal_z_index", "dtype"} - set(header)
    if missing:
        raise ArrayFileError(f"sidecar for {path} lacks {sorted(missing)}")
    if header.get("byte_order", "little") != "little":
        raise ArrayFileError("only little-endian arrays are supported")
    if header["dtype"] not in _DTYPES:
        raise ArrayFileError(f"unknown dtype {header['dtype']!r}")
    return header


def read_array(path):
    """Read an array file written by :func:`write_array`.

    Returns
    -------
    container, dispersion
        :class:`RealSpectra` for ``f32`` data, :class:`SusceptibilityImage`
        for ``c64`` data; ``dispersion`` is ``None`` if the header has none.
    """
    path = Path(path)
    header = read_header(path)
    try:
        grid = GridSpec.from_dict(header)
    except (TypeError, ValueError) as exc:
        raise ArrayFileError(f"invalid grid in sidecar for {path}: {exc}") from exc
    dtype = _DTYPES[header["dtype"]]
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ArrayFileError(f"cannot read {path}: {exc}") from exc
    expected = grid.n_x * grid.n_z * dtype.itemsize
    if len(raw) != expected:
        raise ArrayFileError(f"{path} holds {len(raw)} bytes, header implies {expected}")
    data = np.frombuffer(raw, dtype=dtype).reshape(grid.shape)
    try:
        if header["dtype"] == "f32":
            obj = RealSpectra(data.astype(np.float64), grid)
        else:
            obj = SusceptibilityImage(data.astype(np.complex128), grid)
    except ValueError as exc:
        raise ArrayFileError(f"{path}: {exc}") from exc
    disp = None
    if "dispersion" in header:
        d = header["dispersion"]
        disp = DispersionModel.from_grid(grid, d["k_0"], tuple(d["coeffs"]))
    return obj, disp


def write_csv(path, header, rows) -> None:
    """UTF-8, comma-separated, one header row, ``repr``-exact floats."""
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    with atomic_write(path, "w") as fh:
        fh.write(buf.getvalue())


def write_png16(path, img16) -> None:
    """Write a 16-bit grayscale PNG, depth along the vertical axis."""
    arr = np.asarray(img16)
    if arr.dtype != np.uint16:
        raise ValueError("expected a uint16 image")
    buf = _io.BytesIO()
    Image.fromarray(np.ascontiguousarray(arr.T)).save(buf, format="PNG")
    with atomic_write(path) as fh:
        fh.write(buf.getvalue())


def read_png16(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im, dtype=np.uint16).T.copy()
