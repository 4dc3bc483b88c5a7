"""PGM images, trace CSVs, complex-vector CSVs and experiment report directories."""

from __future__ import annotations

import csv
import math
import warnings
from pathlib import Path

import numpy as np

from .errors import DimensionMismatchError, MalformedFileError
from .solvers import ConvergenceTrace

TRACE_HEADER = ("k", "error", "log10_error", "objective")


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _pgm_tokens(data: bytes, count: int):
    """First ``count`` whitespace-separated header tokens (comments skipped) and the offset after them."""
    tokens = []
    i = 0
    n = len(data)
    while len(tokens) < count:
        while i < n and data[i : i + 1].isspace():
            i += 1
        if i < n and data[i : i + 1] == b"#":
            while i < n and data[i : i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        if i >= n:
            raise MalformedFileError("truncated PGM header")
        j = i
        while j < n and not data[j : j + 1].isspace() and data[j : j + 1] != b"#":
            j += 1
        tokens.append(data[i:j])
        i = j
    return tokens, i


def read_pgm(path) -> np.ndarray:
    """Grey image scaled to ``[0, 1]`` by ``maxval``; P2 (ASCII) or P5 (binary)."""
    path = Path(path)
    data = path.read_bytes()
    tokens, offset = _pgm_tokens(data, 4)
    magic = tokens[0]
    if magic not in (b"P2", b"P5"):
        raise MalformedFileError(f"{path}: not a PGM file (magic {magic!r})")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise MalformedFileError(f"{path}: non-numeric PGM header") from None
    if width <= 0 or height <= 0 or not 0 < maxval < 65536:
        raise MalformedFileError(f"{path}: invalid PGM dimensions or maxval")
    count = width * height
    if magic == b"P2":
        try:
            values = np.array(data[offset:].split(), dtype=np.int64)
        except ValueError:
            raise MalformedFileError(f"{path}: non-numeric pixel data") from None
        if values.size != count:
            raise MalformedFileError(f"{path}: expected {count} pixels, found {values.size}")
    else:
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        raster = data[offset + 1 :]
        if len(raster) < count * dtype.itemsize:
            raise MalformedFileError(f"{path}: raster too short")
        values = np.frombuffer(raster, dtype=dtype, count=count)
    if values.min() < 0 or values.max() > maxval:
        raise MalformedFileError(f"{path}: pixel values outside [0, {maxval}]")
    return values.reshape(height, width).astype(float) / maxval


def write_pgm(path, image, binary: bool = True) -> None:
    """Write a ``[0, 1]`` image with maxval 255; out-of-range values are clamped with a warning."""
    img = np.asarray(image, dtype=float)
    if img.ndim != 2:
        raise DimensionMismatchError(f"expected a 2D image, got shape {img.shape}")
    if img.min() < 0.0 or img.max() > 1.0:
        warnings.warn(f"{path}: clamping values outside [0, 1]", stacklevel=2)
        img = np.clip(img, 0.0, 1.0)
    q = np.rint(img * 255.0).astype(np.uint8)
    h, w = q.shape
    path = Path(path)
    if binary:
        path.write_bytes(f"P5\n{w} {h}\n255\n".encode() + q.tobytes())
    else:
        rows = "\n".join(" ".join(str(v) for v in row) for row in q)
        path.write_text(f"P2\n{w} {h}\n255\n{rows}\n")


def read_mask(path) -> np.ndarray:
    """Binary mask from a PGM: 0 is unsampled, maxval is sampled."""
    return (read_pgm(path) >= 0.5).astype(float)


def write_mask(path, mask) -> None:
    write_pgm(path, (np.asarray(mask) > 0).astype(float))


def write_trace_csv(trace: ConvergenceTrace, path) -> None:
    """One row per iterate: ``k,error,log10_error,objective`` at 17 significant digits."""
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(TRACE_HEADER)
            for k, (err, obj) in enumerate(zip(trace.iterates_error, trace.objective)):
                log_err = math.log10(err) if err > 0 else -math.inf
                writer.writerow((k, _fmt(err), _fmt(log_err), _fmt(obj)))
    except OSError as exc:
        raise OSError(f"cannot write trace to {path}: {exc.strerror}") from exc


def read_trace_csv(path) -> ConvergenceTrace:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if tuple(header or ()) != TRACE_HEADER:
            raise MalformedFileError(f"{path}: unexpected header {header}")
        errors, objective = [], []
        for row in reader:
            errors.append(float(row[1]))
            objective.append(float(row[3]))
    return ConvergenceTrace(errors, objective, 0.0, "unknown")


def write_complex_csv(path, values) -> None:
    v = np.asarray(values, dtype=complex).ravel()
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("re", "im"))
        for z in v:
            writer.writerow((_fmt(z.real), _fmt(z.imag)))


def read_complex_csv(path) -> np.ndarray:
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if tuple(header or ()) != ("re", "im"):
            raise MalformedFileError(f"{path}: expected header re,im")
        return np.array([complex(float(a), float(b)) for a, b in reader])


def _display(img) -> np.ndarray:
    img = np.asarray(img, dtype=float)
    return np.clip(img, 0.0, 1.0)


def write_report(report, directory, prefix: str = "") -> None:
    """``<prefix>report.txt``, ``<prefix><label>.csv`` per trace and ``<prefix><name>.pgm`` per image."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / f"{prefix}report.txt").write_text(report.to_text())
    for label, trace in report.traces.items():
        write_trace_csv(trace, directory / f"{prefix}{label.replace('/', '_')}.csv")
    for name, img in report.images.items():
        write_pgm(directory / f"{prefix}{name}.pgm", _display(img))
