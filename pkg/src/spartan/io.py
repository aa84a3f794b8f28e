"""Plain-text file formats: decimal vectors, index lists, CSV tables.

All writers go through :func:`atomic_write_text`, which writes a temporary
file next to the target and renames it into place.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np

__all__ = [
    "InputError",
    "atomic_write_text",
    "read_vector",
    "write_vector",
    "read_indices",
    "write_indices",
    "format_float",
    "csv_text",
    "write_csv",
    "read_csv",
    "write_json",
]

PathLike = Union[str, os.PathLike]


class InputError(ValueError):
    """Malformed or missing input file."""


def atomic_write_text(path: PathLike, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _lines(path: PathLike) -> list[tuple[int, str]]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from exc
    return [(i + 1, s.strip()) for i, s in enumerate(text.splitlines()) if s.strip()]


def read_vector(path: PathLike) -> np.ndarray:
    """One decimal number per line; blank lines are ignored."""
    out = []
    for lineno, s in _lines(path):
        try:
            out.append(float(s))
        except ValueError:
            raise InputError(f"{path}:{lineno}: not a number: {s!r}") from None
    return np.asarray(out, dtype=np.float64)


def format_float(x: float, decimals: Optional[int] = None) -> str:
    """Shortest round-trip repr, or fixed ``decimals`` places."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if decimals is None:
        return repr(x)
    return f"{x:.{decimals}f}"


def write_vector(path: PathLike, values: Iterable[float], decimals: Optional[int] = None) -> None:
    atomic_write_text(path, "".join(format_float(v, decimals) + "\n" for v in values))


def read_indices(path: PathLike) -> np.ndarray:
    out = []
    for lineno, s in _lines(path):
        try:
            out.append(int(s))
        except ValueError:
            raise InputError(f"{path}:{lineno}: not an integer index: {s!r}") from None
    return np.asarray(out, dtype=np.int64)


def write_indices(path: PathLike, indices: Iterable[int]) -> None:
    atomic_write_text(path, "".join(f"{int(i)}\n" for i in indices))


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (float, np.floating)):
        return format_float(v)
    return str(v)


def csv_text(columns: Sequence[str], rows: Iterable[Mapping]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_cell(row[c]) for c in columns])
    return buf.getvalue()


def write_csv(path: PathLike, columns: Sequence[str], rows: Iterable[Mapping]) -> None:
    atomic_write_text(path, csv_text(columns, rows))


def read_csv(path: PathLike) -> tuple[list[str], list[dict[str, str]]]:
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            rows = list(reader)
            return list(reader.fieldnames or []), rows
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from exc


def write_json(path: PathLike, obj) -> None:
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")
