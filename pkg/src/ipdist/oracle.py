"""Hidden matrices behind inner-product query oracles, with per-kind query accounting.

Indices are 0-based throughout. A query vector is either binary ({0,1}) or
sign ({-1,+1}, widened to {-1,0,+1} once restricted to a support). A sign
query is charged as two binary queries, since it splits into the indicator
vectors of its +1 and -1 coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Union

import numpy as np
import scipy.sparse as sp

BINARY = "binary"
SIGN = "sign"
LOWER = "lower"
UPPER = "upper"

DEFAULT_TOL = 1e-9


class DimensionMismatch(ValueError):
    pass


class QueryIndexError(IndexError):
    pass


class Matrix:
    """Dense n x n matrix. Integer-valued unless ``real`` is set."""

    def __init__(self, entries, real: bool = False, tol: float = DEFAULT_TOL):
        arr = np.asarray(entries)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] == 0:
            raise DimensionMismatch(f"expected a non-empty square matrix, got shape {arr.shape}")
        if real:
            arr = arr.astype(np.float64)
        else:
            if arr.dtype.kind == "f" and not np.all(arr == np.round(arr)):
                raise ValueError("non-integer entries require real=True")
            arr = arr.astype(np.int64)
        arr.setflags(write=False)
        self.entries = arr
        self.real = real
        self.tol = tol

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @cached_property
    def symmetric(self) -> bool:
        if self.real:
            return bool(np.allclose(self.entries, self.entries.T, rtol=0.0, atol=self.tol))
        return bool(np.array_equal(self.entries, self.entries.T))

    @classmethod
    def zeros(cls, n: int) -> "Matrix":
        return cls(np.zeros((n, n), dtype=np.int64))

    @classmethod
    def ones(cls, n: int) -> "Matrix":
        return cls(np.ones((n, n), dtype=np.int64))

    @classmethod
    def identity(cls, n: int) -> "Matrix":
        return cls(np.eye(n, dtype=np.int64))

    def equals(self, other: "Matrix") -> bool:
        return self.n == other.n and bool(np.array_equal(self.entries, other.entries))

    def __repr__(self) -> str:
        mode = "real" if self.real else "int"
        return f"Matrix(n={self.n}, {mode}, symmetric={self.symmetric})"

    def _dot_row(self, i: int, V, kind: str = SIGN) -> np.ndarray:
        return np.asarray(V @ self.entries[i]).ravel()

    def _dot_col(self, j: int, V, kind: str = SIGN) -> np.ndarray:
        return np.asarray(V @ self.entries[:, j]).ravel()


@dataclass(frozen=True, eq=False)
class QueryVec:
    """A single query vector; ``support`` is set when the vector is a restriction r|_S."""

    coords: np.ndarray
    kind: str = BINARY
    support: frozenset | None = None

    def __post_init__(self):
        coords = np.asarray(self.coords)
        if coords.ndim != 1:
            raise ValueError("query vector must be one-dimensional")
        if self.kind not in (BINARY, SIGN):
            raise ValueError(f"unknown query kind {self.kind!r}")
        coords = coords.astype(np.int8)
        allowed = (0, 1) if self.kind == BINARY else (-1, 0, 1) if self.support is not None else (-1, 1)
        if not np.isin(coords, allowed).all():
            raise ValueError(f"coordinates outside the {self.kind} alphabet")
        if self.support is not None:
            outside = np.ones(coords.size, dtype=bool)
            outside[list(self.support)] = False
            if coords[outside].any():
                raise ValueError("nonzero coordinate outside the declared support")
        coords.setflags(write=False)
        object.__setattr__(self, "coords", coords)

    @property
    def n(self) -> int:
        return self.coords.size

    @classmethod
    def binary(cls, coords) -> "QueryVec":
        return cls(np.asarray(coords), BINARY)

    @classmethod
    def sign(cls, coords) -> "QueryVec":
        return cls(np.asarray(coords), SIGN)

    @classmethod
    def random_sign(cls, n: int, rng: np.random.Generator) -> "QueryVec":
        return cls(1 - 2 * rng.integers(0, 2, size=n, dtype=np.int8), SIGN)


def sign_query_decompose(v: QueryVec) -> tuple[QueryVec, QueryVec]:
    """Split a sign vector into the binary indicators of its +1 and -1 coordinates."""
    if v.kind != SIGN:
        raise ValueError("only sign vectors decompose")
    plus = (v.coords > 0).astype(np.int8)
    minus = (v.coords < 0).astype(np.int8)
    return QueryVec(plus, BINARY), QueryVec(minus, BINARY)


def restrict(v: QueryVec, S: Iterable[int]) -> QueryVec:
    """Zero every coordinate outside S and record S as the support."""
    S = frozenset(int(s) for s in S)
    if any(s < 0 or s >= v.n for s in S):
        raise QueryIndexError("restriction set leaves [0, n)")
    if v.support is not None:
        S = S & v.support
    coords = np.zeros(v.n, dtype=np.int8)
    idx = np.fromiter(S, dtype=np.int64, count=len(S))
    coords[idx] = v.coords[idx]
    return QueryVec(coords, v.kind, S)


QueryBatch = Union[np.ndarray, sp.spmatrix, sp.sparray]


def _batch_values(V) -> np.ndarray:
    return V.data if sp.issparse(V) else np.asarray(V)


def _check_batch(V, n: int, kind: str) -> int:
    if V.ndim != 2 or V.shape[1] != n:
        raise DimensionMismatch(f"query vectors have length {V.shape[-1]}, matrix has n={n}")
    vals = _batch_values(V)
    if vals.size:
        lo = -1 if kind == SIGN else 0
        if vals.min() < lo or vals.max() > 1 or (vals.dtype.kind == "f" and not np.all(vals == np.round(vals))):
            raise ValueError(f"query batch has coordinates outside the {kind} alphabet")
    return V.shape[0]


@dataclass
class QueryCounters:
    row_ip_binary: int = 0
    col_ip_binary: int = 0
    row_ip_sign: int = 0
    col_ip_sign: int = 0
    # extra base-matrix cost of symmetrized-view queries
    surcharge: int = 0

    @property
    def effective_binary_total(self) -> int:
        return (
            self.row_ip_binary
            + self.col_ip_binary
            + 2 * (self.row_ip_sign + self.col_ip_sign)
            + self.surcharge
        )

    def as_dict(self) -> dict:
        return {
            "row_ip_binary": self.row_ip_binary,
            "col_ip_binary": self.col_ip_binary,
            "row_ip_sign": self.row_ip_sign,
            "col_ip_sign": self.col_ip_sign,
            "surcharge": self.surcharge,
            "effective_binary_total": self.effective_binary_total,
        }


class OracleHandle:
    """Query gateway to one matrix or symmetrized view.

    Single-owner: the counters mutate on every query, so concurrent trials
    need their own handles.
    """

    def __init__(self, target: "Matrix | SymmetrizedView"):
        self.target = target
        self.counters = QueryCounters()

    @property
    def n(self) -> int:
        return self.target.n

    @property
    def real(self) -> bool:
        return self.target.real

    @property
    def tol(self) -> float:
        return self.target.tol

    @property
    def symmetric(self) -> bool:
        return self.target.symmetric

    @property
    def effective_binary_total(self) -> int:
        return self.counters.effective_binary_total

    def _check_index(self, i: int) -> int:
        if not 0 <= i < self.n:
            raise QueryIndexError(f"index {i} outside [0, {self.n})")
        return int(i)

    def _query(self, axis: str, idx: int, V: QueryBatch, kind: str) -> np.ndarray:
        idx = self._check_index(idx)
        k = _check_batch(V, self.n, kind)
        base = getattr(self.target, "base", None)
        before = base.effective_binary_total if base is not None else 0
        if axis == "row":
            values = self.target._dot_row(idx, V, kind)
        else:
            values = self.target._dot_col(idx, V, kind)
        c = self.counters
        if kind == BINARY:
            own = k
            if axis == "row":
                c.row_ip_binary += k
            else:
                c.col_ip_binary += k
        else:
            own = 2 * k
            if axis == "row":
                c.row_ip_sign += k
            else:
                c.col_ip_sign += k
        if base is not None:
            c.surcharge += base.effective_binary_total - before - own
        return values

    def row_ip_many(self, i: int, V: QueryBatch, kind: str = SIGN) -> np.ndarray:
        """Answer <row i, v> for every row v of the batch V (dense or sparse)."""
        return self._query("row", i, V, kind)

    def col_ip_many(self, j: int, V: QueryBatch, kind: str = SIGN) -> np.ndarray:
        return self._query("col", j, V, kind)

    def row_ip(self, i: int, v: QueryVec):
        return self._query("row", i, v.coords[None, :], v.kind)[0].item()

    def col_ip(self, j: int, v: QueryVec):
        return self._query("col", j, v.coords[None, :], v.kind)[0].item()


def row_ip(handle: OracleHandle, i: int, v: QueryVec):
    return handle.row_ip(i, v)


def col_ip(handle: OracleHandle, j: int, v: QueryVec):
    return handle.col_ip(j, v)


def _split_columns(V, keep: np.ndarray):
    """Return (V restricted to columns where keep is True, the rest)."""
    if sp.issparse(V):
        V = sp.csr_matrix(V)
        mask = keep[V.indices]
        first = sp.csr_matrix((np.where(mask, V.data, 0), V.indices, V.indptr), shape=V.shape)
        second = sp.csr_matrix((np.where(mask, 0, V.data), V.indices, V.indptr), shape=V.shape)
        return first, second
    V = np.asarray(V)
    return V * keep, V * ~keep


class SymmetrizedView:
    """Symmetric matrix mirrored from one triangle of the base matrix.

    mode="lower": entry (i, j) is base(i, j) for i >= j and base(j, i) otherwise.
    mode="upper": entry (i, j) is base(i, j) for i <= j and base(j, i) otherwise.
    Each row query costs exactly one row and one column query on the base.
    """

    symmetric = True

    def __init__(self, base: OracleHandle, mode: str):
        if mode not in (LOWER, UPPER):
            raise ValueError(f"mode must be {LOWER!r} or {UPPER!r}")
        if isinstance(base.target, SymmetrizedView):
            raise TypeError("a symmetrized view needs a handle on a plain matrix")
        self.base = base
        self.mode = mode

    @property
    def n(self) -> int:
        return self.base.n

    @property
    def real(self) -> bool:
        return self.base.real

    @property
    def tol(self) -> float:
        return self.base.tol

    def _dot_row(self, i: int, V, kind: str = SIGN) -> np.ndarray:
        cols = np.arange(self.n)
        from_row = cols <= i if self.mode == LOWER else cols >= i
        row_part, col_part = _split_columns(V, from_row)
        return self.base.row_ip_many(i, row_part, kind) + self.base.col_ip_many(i, col_part, kind)

    def _dot_col(self, j: int, V, kind: str = SIGN) -> np.ndarray:
        return self._dot_row(j, V, kind)


def delta_row_ip(view: SymmetrizedView, i: int, r: QueryVec):
    """<view(i, *), r>, answered with two queries on the base matrix."""
    if not 0 <= i < view.n:
        raise QueryIndexError(f"index {i} outside [0, {view.n})")
    _check_batch(r.coords[None, :], view.n, r.kind)
    return view._dot_row(i, r.coords[None, :], r.kind)[0].item()


def handle_pair(A: Matrix, B: Matrix) -> tuple[OracleHandle, OracleHandle]:
    if A.n != B.n:
        raise DimensionMismatch(f"matrices differ in size: {A.n} vs {B.n}")
    return OracleHandle(A), OracleHandle(B)


def symmetrized_pairs(hA: OracleHandle, hB: OracleHandle):
    """Handles on (lower A, lower B) and (upper A, upper B)."""
    lower = (OracleHandle(SymmetrizedView(hA, LOWER)), OracleHandle(SymmetrizedView(hB, LOWER)))
    upper = (OracleHandle(SymmetrizedView(hA, UPPER)), OracleHandle(SymmetrizedView(hB, UPPER)))
    return lower, upper
