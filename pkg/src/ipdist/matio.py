"""Plain-text matrix files and their JSON sidecars."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .oracle import Matrix


def format_matrix(M: Matrix) -> str:
    if M.real:
        rows = (" ".join(repr(float(x)) for x in row) for row in M.entries)
    else:
        rows = (" ".join(str(int(x)) for x in row) for row in M.entries)
    return f"{M.n}\n" + "\n".join(rows) + "\n"


def parse_matrix(text: str, real: bool | None = None) -> Matrix:
    """Parse the "n, then n rows" format; real mode is inferred from decimals unless given."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty matrix file")
    try:
        n = int(lines[0].strip())
    except ValueError:
        raise ValueError(f"first line must be the side length, got {lines[0]!r}") from None
    if len(lines) - 1 != n:
        raise ValueError(f"expected {n} rows, found {len(lines) - 1}")
    body = " ".join(lines[1:])
    if real is None:
        real = any(c in body for c in ".eE")
    values = np.array(body.split(), dtype=np.float64 if real else np.int64)
    if values.size != n * n:
        raise ValueError(f"expected {n * n} entries, found {values.size}")
    return Matrix(values.reshape(n, n), real=real)


def write_matrix(path: str | Path, M: Matrix) -> None:
    Path(path).write_text(format_matrix(M))


def read_matrix(path: str | Path, real: bool | None = None) -> Matrix:
    return parse_matrix(Path(path).read_text(), real)


def write_sidecar(path: str | Path, meta: dict) -> None:
    Path(path).write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")


def read_sidecar(path: str | Path) -> dict:
    return json.loads(Path(path).read_text())
