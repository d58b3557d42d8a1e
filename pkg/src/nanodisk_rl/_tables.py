"""Reader for the small plain-text numeric tables shipped with the package."""

from __future__ import annotations

import io
import os
import re
from importlib import resources
from typing import IO, Callable, Optional, Union

import numpy as np

Source = Union[str, os.PathLike, IO[str]]

_SPLIT = re.compile(r"[,\s]+")


class TableError(ValueError):
    """A data table is malformed or violates a physical constraint."""


def open_source(source: Source) -> IO[str]:
    if hasattr(source, "read"):
        return source  # type: ignore[return-value]
    return open(source, encoding="utf-8")


def bundled_path(*parts: str):
    path = resources.files("nanodisk_rl").joinpath("data")
    for part in parts:
        path = path.joinpath(part)
    return path


def read_rows(
    source: Source,
    ncols: int,
    label: str = "table",
    check: Optional[Callable[[list[float]], Optional[str]]] = None,
) -> np.ndarray:
    """Parse comma/whitespace separated rows into an ``(nrows, ncols)`` array.

    Blank lines and ``#`` comments are skipped. The first column must be
    strictly increasing (it is always a wavelength in this package).
    ``check`` may return an error message for a parsed row; it is raised
    with the line number attached.
    """
    stream = open_source(source)
    close = stream is not source
    rows: list[list[float]] = []
    prev = None
    try:
        for lineno, raw in enumerate(stream, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            fields = [f for f in _SPLIT.split(line) if f]
            if len(fields) != ncols:
                raise TableError(
                    f"{label}: malformed row at line {lineno}: expected {ncols} columns, "
                    f"got {len(fields)}"
                )
            try:
                values = [float(f) for f in fields]
            except ValueError:
                raise TableError(f"{label}: malformed row at line {lineno}: {line!r}") from None
            if not all(np.isfinite(values)):
                raise TableError(f"{label}: non-finite value at line {lineno}")
            if prev is not None and values[0] <= prev:
                raise TableError(f"{label}: non-monotone wavelength at line {lineno} ({values[0]:g})")
            if check is not None:
                problem = check(values)
                if problem:
                    raise TableError(f"{label}: {problem} at line {lineno}")
            prev = values[0]
            rows.append(values)
    finally:
        if close:
            stream.close()
    if not rows:
        raise TableError(f"{label}: no samples")
    return np.asarray(rows, dtype=np.float64)


def from_text(text: str) -> IO[str]:
    return io.StringIO(text)
