"""Deterministic file emission: 16-bit PGM images, CSV tables, manifests.

All writers are timestamp-free and format floats with repr, so a run
with a fixed configuration and seed reproduces its output tree
bit-exactly.
"""

from __future__ import annotations

import csv
import hashlib
from pathlib import Path

import numpy as np

PGM_MAXVAL = 65535


def write_pgm16(path, array: np.ndarray, sidecar: bool = True) -> None:
    """Write a float array as big-endian 16-bit P5 PGM with a scaling sidecar.

    Values are mapped linearly from [min, max] to [0, 65535]; the sidecar
    `<path>.txt` records min and max so the image is invertible.
    """
    path = Path(path)
    data = np.asarray(array, dtype=float)
    if data.ndim != 2:
        raise ValueError("PGM output needs a 2-D array")
    lo = float(np.nanmin(data))
    hi = float(np.nanmax(data))
    if hi > lo:
        scaled = (np.nan_to_num(data, nan=lo) - lo) / (hi - lo) * PGM_MAXVAL
    else:
        scaled = np.zeros_like(data)
    u16 = np.round(scaled).astype(">u2")
    header = f"P5\n{data.shape[1]} {data.shape[0]}\n{PGM_MAXVAL}\n".encode("ascii")
    path.write_bytes(header + u16.tobytes())
    if sidecar:
        Path(str(path) + ".txt").write_text(f"min = {lo!r}\nmax = {hi!r}\n")


def read_pgm16(path) -> np.ndarray:
    """Read a binary P5 PGM written by `write_pgm16` (returns uint16)."""
    raw = Path(path).read_bytes()
    fields: list[bytes] = []
    pos = 0
    while len(fields) < 4:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if raw[pos : pos + 1] == b"#":  # comment line
            pos = raw.index(b"\n", pos) + 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        fields.append(raw[start:pos])
    if fields[0] != b"P5":
        raise ValueError(f"not a binary PGM: magic {fields[0]!r}")
    width, height, maxval = (int(f) for f in fields[1:])
    if maxval != PGM_MAXVAL:
        raise ValueError(f"expected 16-bit PGM (maxval {PGM_MAXVAL}), got {maxval}")
    pos += 1  # single whitespace after maxval
    pixels = np.frombuffer(raw, dtype=">u2", offset=pos, count=width * height)
    return pixels.reshape(height, width).astype(np.uint16)


def read_scaled_pgm(path) -> np.ndarray:
    """Read a PGM plus its sidecar back into physical float values."""
    u16 = read_pgm16(path)
    meta = {}
    for line in Path(str(path) + ".txt").read_text().splitlines():
        key, _, value = line.partition("=")
        meta[key.strip()] = float(value)
    lo, hi = meta["min"], meta["max"]
    return lo + (u16.astype(float) / PGM_MAXVAL) * (hi - lo)


def write_csv(path, header: list[str], rows) -> None:
    """RFC-4180 CSV with repr-formatted floats for bit-stable output."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


def read_csv_floats(path) -> np.ndarray:
    """Read a headerless CSV of numbers into a 2-D float array."""
    with open(path, newline="") as fh:
        rows = [[float(v) for v in row] for row in csv.reader(fh) if row]
    if not rows:
        raise ValueError(f"{path} holds no data")
    return np.asarray(rows, dtype=float)


def sha256_file(path) -> str:
    h = hashlib.sha256()
    h.update(Path(path).read_bytes())
    return h.hexdigest()


def write_manifest(path, entries: dict, files: list[Path] | None = None) -> None:
    """key = value manifest; files are listed with their SHA-256 hashes.

    Entries are written in sorted key order and file paths relative to
    the manifest directory, keeping the manifest itself reproducible.
    """
    path = Path(path)
    lines = [f"{key} = {entries[key]}" for key in sorted(entries)]
    for f in sorted(files or []):
        rel = Path(f).name
        lines.append(f"file.{rel} = sha256:{sha256_file(f)}")
    path.write_text("\n".join(lines) + "\n")


def hash_tree(directory) -> str:
    """Order-independent digest of every file (name and bytes) under a directory."""
    directory = Path(directory)
    h = hashlib.sha256()
    for f in sorted(p for p in directory.rglob("*") if p.is_file()):
        h.update(str(f.relative_to(directory)).encode())
        h.update(b"\0")
        h.update(f.read_bytes())
        h.update(b"\0")
    return h.hexdigest()
