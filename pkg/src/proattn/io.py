"""Text matrix files, config JSON and CSV reports.

Matrix file layout: a ``rows cols`` header line, then ``rows`` lines of
``cols`` whitespace-separated decimals. Floats are written with Python's
shortest round-trip ``repr`` so reading back is bit-exact.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from typing import Iterable, Mapping, Sequence

import numpy as np

from .attention import AttentionConfig


class MatrixFormatError(ValueError):
    def __init__(self, path, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.path = path
        self.line = line


def format_float(x: float) -> str:
    return repr(float(x))


def atomic_write_text(path, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def matrix_to_text(M) -> str:
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {M.shape}")
    lines = [f"{M.shape[0]} {M.shape[1]}"]
    lines.extend(" ".join(format_float(x) for x in row) for row in M)
    return "\n".join(lines) + "\n"


def write_matrix(path, M) -> None:
    atomic_write_text(path, matrix_to_text(M))


def parse_matrix(text: str, path="<string>") -> np.ndarray:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise MatrixFormatError(path, 1, "empty file")
    header = lines[0].split()
    if len(header) != 2 or not all(tok.isdigit() for tok in header):
        raise MatrixFormatError(path, 1, f"bad header {lines[0]!r}, expected 'rows cols'")
    rows, cols = int(header[0]), int(header[1])
    if rows < 1 or cols < 1:
        raise MatrixFormatError(path, 1, "rows and cols must be positive")
    if len(lines) - 1 != rows:
        # point at the first missing or first surplus line
        line = len(lines) + 1 if len(lines) - 1 < rows else rows + 2
        raise MatrixFormatError(path, line, f"expected {rows} data rows, found {len(lines) - 1}")
    out = np.empty((rows, cols))
    for i, line in enumerate(lines[1:]):
        toks = line.split()
        if len(toks) != cols:
            raise MatrixFormatError(path, i + 2, f"expected {cols} values, found {len(toks)}")
        for j, tok in enumerate(toks):
            try:
                x = float(tok)
            except ValueError:
                raise MatrixFormatError(path, i + 2, f"not a number: {tok!r}") from None
            if not math.isfinite(x):
                raise MatrixFormatError(path, i + 2, f"non-finite value {tok!r}")
            out[i, j] = x
    return out


def read_matrix(path) -> np.ndarray:
    with open(path, encoding="utf-8") as f:
        return parse_matrix(f.read(), path)


def load_config(path) -> AttentionConfig:
    with open(path, encoding="utf-8") as f:
        data = json.load(f)
    if not isinstance(data, dict):
        raise ValueError(f"{path}: config must be a JSON object")
    return AttentionConfig.from_dict(data)


def csv_text(header: Sequence[str], rows: Iterable[Sequence], meta: Mapping | None = None) -> str:
    """CSV with optional ``# key=value`` comment lines before the header."""
    out = []
    for key, value in (meta or {}).items():
        out.append(f"# {key}={value}")
    out.append(",".join(header))
    for row in rows:
        out.append(",".join(format_float(x) if isinstance(x, (float, np.floating)) else str(x) for x in row))
    return "\n".join(out) + "\n"


def write_csv(path, header, rows, meta=None) -> None:
    atomic_write_text(path, csv_text(header, rows, meta))


def read_csv(path):
    """Returns ``(meta, header, rows)`` with rows as lists of strings."""
    meta, header, rows = {}, None, []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.rstrip("\n")
            if header is None and line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                meta[key] = value
            elif header is None:
                header = line.split(",")
            elif line:
                rows.append(line.split(","))
    return meta, header, rows
