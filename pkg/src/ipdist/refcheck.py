"""Brute-force ground truth. Reads matrices directly and never touches oracle counters.

Kept apart from the estimators; only tests and the CLI ``verify`` command use it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .oracle import DimensionMismatch, Matrix, OracleHandle, SymmetrizedView, LOWER, UPPER


def _entries(M) -> np.ndarray:
    if isinstance(M, Matrix):
        return M.entries
    if isinstance(M, OracleHandle):
        return _entries(M.target)
    if isinstance(M, SymmetrizedView):
        return materialize_view(M.base.target, M.mode).entries
    return np.asarray(M)


def _mismatch(A, B) -> np.ndarray:
    a, b = _entries(A), _entries(B)
    if a.shape != b.shape:
        raise DimensionMismatch(f"shapes differ: {a.shape} vs {b.shape}")
    return a != b


def exact_matrix_distance(A, B) -> int:
    return int(_mismatch(A, B).sum())


def exact_row_distance(A, B, i: int, S: Iterable[int] | None = None) -> int:
    row = _mismatch(A, B)[i]
    if S is None:
        return int(row.sum())
    idx = np.fromiter(S, dtype=np.int64)
    return int(row[idx].sum()) if idx.size else 0


def exact_row_distances(A, B) -> np.ndarray:
    return _mismatch(A, B).sum(axis=1)


def exact_neq_set(A, B, i: int) -> frozenset:
    return frozenset(np.flatnonzero(_mismatch(A, B)[i]).tolist())


def materialize_view(M: Matrix, mode: str) -> Matrix:
    """Explicit matrix behind a lower or upper symmetrized view."""
    e = M.entries
    if mode == LOWER:
        low = np.tril(e)
        out = low + np.tril(e, -1).T
    elif mode == UPPER:
        up = np.triu(e)
        out = up + np.triu(e, 1).T
    else:
        raise ValueError(f"unknown view mode {mode!r}")
    return Matrix(out, real=M.real, tol=M.tol)


@dataclass
class BucketPartition:
    ratio: float
    t: int
    buckets: dict[int, list[int]]
    zero_bucket: list[int]
    D: int
    bucket_sum: float
    lower_bound: float
    upper_bound: float
    holds: bool


def exact_bucket_partition(A, B, epsilon: float, divisor: float = 50.0) -> BucketPartition:
    """Bucket every row by its true distance and check the sandwich around sum |Y_k| ratio^k."""
    from .estimator import ZERO_BUCKET, bucket_index

    ratio = 1 + epsilon / divisor
    dists = exact_row_distances(A, B)
    n = dists.size
    t = math.ceil(math.log(max(n, 1)) / math.log(ratio)) + 1
    buckets: dict[int, list[int]] = {}
    zero: list[int] = []
    for i, a in enumerate(dists.tolist()):
        k = bucket_index(a, ratio)
        (zero if k == ZERO_BUCKET else buckets.setdefault(k, [])).append(i)
    D = int(dists.sum())
    total = sum(len(rows) * ratio**k for k, rows in buckets.items())
    lower = (1 - epsilon / divisor) * D
    upper = ratio**2 * D
    holds = lower - 1e-9 <= total <= upper + 1e-9
    for k, rows in buckets.items():
        s = float(dists[rows].sum())
        holds = holds and s - 1e-9 <= len(rows) * ratio**k <= ratio * s + 1e-9
    return BucketPartition(ratio, t, buckets, zero, D, total, lower, upper, holds)


def exact_restricted_distance(handles, i: int, S, params=None, rng=None) -> float:
    """Drop-in for restrict_dist_bet_rows that answers exactly from the matrices."""
    hA, hB = handles
    cols = np.asarray(list(S) if not isinstance(S, np.ndarray) else S, dtype=np.int64)
    return float(exact_row_distance(hA, hB, i, cols))


def exact_full_distance(handles, i: int, params=None, rng=None) -> float:
    """Drop-in for dist_bet_rows."""
    return float(exact_row_distance(handles[0], handles[1], i))


def uniform_neq_sampler(seed: int = 0):
    """Drop-in for approx_sample drawing exactly uniformly from the true mismatch set."""
    from .sampler import EmptyRow

    gen = np.random.default_rng(seed)

    def sample(handles, i, alpha=None, delta=None, rng=None):
        cols = np.flatnonzero(_mismatch(handles[0], handles[1])[i])
        if cols.size == 0:
            raise EmptyRow(f"row {i} has no mismatch")
        return int(cols[gen.integers(cols.size)])

    return sample


def jl_l2_distance(A, B, i: int, k: int, rng: np.random.Generator) -> float:
    """Squared-norm JL estimate of the row distance; only meaningful for 0/1 matrices."""
    u = (_entries(A)[i] - _entries(B)[i]).astype(np.float64)
    R = rng.choice([-1.0, 1.0], size=(k, u.size))
    return float(np.mean((R @ u) ** 2))
