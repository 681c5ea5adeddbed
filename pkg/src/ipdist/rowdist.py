"""Row-level primitives: zero tests, subset-size estimation, row distances, mismatch recovery.

Everything here talks to the hidden matrices only through OracleHandle
queries. Subsets are passed around in a CSR-like ``SubsetBatch`` so that
hundreds of identity tests become one sparse product per matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .oracle import SIGN, OracleHandle, QueryIndexError
from .rng import Streams, as_streams

Handles = Sequence[OracleHandle]


@dataclass(frozen=True)
class RowDistParams:
    """Accuracy knobs for row-distance estimation.

    ``exact_limit`` caps how many certainly-differing disjoint nodes the
    exact descent may hold before the estimator switches to geometric
    sampling (default ceil(1/alpha^2)).
    """

    alpha: float
    delta: float
    jl_reps: int | None = None
    emptiness_trials: int | None = None
    exact_limit: int | None = None
    emptiness_const: float = 12.0
    rounding: bool = False

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha must lie in (0,1), got {self.alpha}")
        if not 0 < self.delta < 1:
            raise ValueError(f"delta must lie in (0,1), got {self.delta}")
        if self.jl_reps is not None and self.jl_reps < 1:
            raise ValueError("jl_reps must be positive")
        if self.emptiness_trials is not None and self.emptiness_trials < 1:
            raise ValueError("emptiness_trials must be positive")
        if self.exact_limit is not None and self.exact_limit < 0:
            raise ValueError("exact_limit must be non-negative")

    def trials_for(self, m: int) -> int:
        if self.emptiness_trials is not None:
            return self.emptiness_trials
        return default_trials(m, self.alpha, self.delta, self.emptiness_const)

    def query_budget(self, m: int) -> int:
        return 4 * _levels(m) * self.trials_for(m)

    def test_delta(self, m: int) -> float:
        return self.delta / (2 * self.query_budget(m))

    def reps_for(self, m: int) -> int:
        if self.jl_reps is not None:
            return self.jl_reps
        return default_reps(self.test_delta(m))

    def exact_limit_value(self) -> int:
        if self.exact_limit is not None:
            return self.exact_limit
        return math.ceil(1.0 / self.alpha**2)


def default_trials(m: int, alpha: float, delta: float, const: float = 12.0) -> int:
    return max(1, math.ceil(const * math.log(2 * max(m, 1) / delta) / alpha**2))


def default_reps(delta: float) -> int:
    """Sign vectors per zero test: each one misses a nonzero difference w.p. <= 1/2."""
    return math.ceil(math.log2(1.0 / delta)) + 2


def _levels(m: int) -> int:
    return max(1, math.ceil(math.log2(max(m, 2))))


@dataclass
class SubsetBatch:
    """k subsets of a universe, stored as CSR row pointers and member indices."""

    indptr: np.ndarray
    indices: np.ndarray

    @property
    def size(self) -> int:
        return len(self.indptr) - 1

    def lengths(self) -> np.ndarray:
        return np.diff(self.indptr)

    @classmethod
    def from_ranges(cls, starts, stops) -> "SubsetBatch":
        starts = np.asarray(starts, dtype=np.int64)
        stops = np.asarray(stops, dtype=np.int64)
        lengths = stops - starts
        indptr = np.zeros(len(starts) + 1, dtype=np.int64)
        np.cumsum(lengths, out=indptr[1:])
        offsets = np.arange(indptr[-1], dtype=np.int64) - np.repeat(indptr[:-1], lengths)
        return cls(indptr, np.repeat(starts, lengths) + offsets)

    @classmethod
    def from_lists(cls, lists: Iterable[Iterable[int]]) -> "SubsetBatch":
        arrays = [np.asarray(list(s), dtype=np.int64) for s in lists]
        indptr = np.zeros(len(arrays) + 1, dtype=np.int64)
        np.cumsum([a.size for a in arrays], out=indptr[1:])
        indices = np.concatenate(arrays) if arrays else np.zeros(0, dtype=np.int64)
        return cls(indptr, indices)

    def members(self, q: int) -> np.ndarray:
        return self.indices[self.indptr[q] : self.indptr[q + 1]]

    def map(self, universe: np.ndarray) -> "SubsetBatch":
        """Translate universe positions into the labels stored in ``universe``."""
        return SubsetBatch(self.indptr, universe[self.indices])


EmptinessOracle = Callable[[SubsetBatch], np.ndarray]


def _check_row(handles: Handles, i: int) -> tuple[OracleHandle, OracleHandle]:
    hA, hB = handles
    if hA.n != hB.n:
        raise ValueError(f"handles disagree on n: {hA.n} vs {hB.n}")
    if not 0 <= i < hA.n:
        raise QueryIndexError(f"row {i} outside [0, {hA.n})")
    return hA, hB


def _sign_queries(batch: SubsetBatch, reps: int, n: int, rng: np.random.Generator) -> sp.csr_matrix:
    """``reps`` independent random sign vectors restricted to each subset, one CSR row each."""
    lengths = batch.lengths()
    row_len = np.repeat(lengths, reps)
    indptr = np.zeros(row_len.size + 1, dtype=np.int64)
    np.cumsum(row_len, out=indptr[1:])
    total = int(indptr[-1])
    starts = np.repeat(np.repeat(batch.indptr[:-1], reps), row_len)
    offsets = np.arange(total, dtype=np.int64) - np.repeat(indptr[:-1], row_len)
    indices = batch.indices[starts + offsets]
    data = rng.integers(0, 2, size=total, dtype=np.int8) * np.int8(2) - np.int8(1)
    return sp.csr_matrix((data, indices, indptr), shape=(row_len.size, n))


def identity_tests(
    handles: Handles,
    i: int,
    batch: SubsetBatch,
    delta: float,
    rng: np.random.Generator,
    reps: int | None = None,
) -> np.ndarray:
    """Batched zero test: entry q is True iff row i of A and B look identical on subset q.

    One-sided: identical restrictions always return True; a differing
    restriction returns True with probability at most 2^-reps.
    """
    hA, hB = _check_row(handles, i)
    reps = default_reps(delta) if reps is None else reps
    identical = np.ones(batch.size, dtype=bool)
    lengths = batch.lengths()
    live = np.flatnonzero(lengths > 0)
    if live.size == 0:
        return identical
    if live.size < batch.size:
        sub = SubsetBatch.from_lists(batch.members(q) for q in live)
    else:
        sub = batch
    V = _sign_queries(sub, reps, hA.n, rng)
    a = hA.row_ip_many(i, V, SIGN)
    b = hB.row_ip_many(i, V, SIGN)
    if hA.real or hB.real:
        differs = np.abs(a - b) > max(hA.tol, hB.tol)
    else:
        differs = a != b
    identical[live] = ~differs.reshape(live.size, reps).any(axis=1)
    return identical


def identity_test(
    handles: Handles,
    i: int,
    S: Iterable[int],
    delta: float,
    rng: Streams | int | None = None,
    reps: int | None = None,
) -> bool:
    """True iff the rows look identical on S (always True when they are)."""
    streams = as_streams(rng)
    batch = SubsetBatch.from_lists([np.unique(np.fromiter(S, dtype=np.int64))])
    return bool(identity_tests(handles, i, batch, delta, streams.signs, reps)[0])


class RowEmptiness:
    """Emptiness oracle for X = mismatched columns of row i inside a universe of columns.

    "Q misses X" is answered by an identity test of row i restricted to Q.
    """

    def __init__(self, handles: Handles, i: int, columns: np.ndarray, delta: float, reps: int, rng: np.random.Generator):
        _check_row(handles, i)
        self.handles = handles
        self.i = i
        self.columns = columns
        self.delta = delta
        self.reps = reps
        self.rng = rng
        self.queries = 0

    def __call__(self, batch: SubsetBatch) -> np.ndarray:
        self.queries += batch.size
        return identity_tests(self.handles, self.i, batch.map(self.columns), self.delta, self.rng, self.reps)


class SetEmptiness:
    """Emptiness oracle over a known set; test support for the size estimator."""

    def __init__(self, X: Iterable[int], m: int):
        self.mask = np.zeros(m, dtype=bool)
        self.mask[np.fromiter(X, dtype=np.int64)] = True
        self.queries = 0

    def __call__(self, batch: SubsetBatch) -> np.ndarray:
        self.queries += batch.size
        rows = np.repeat(np.arange(batch.size), batch.lengths())
        hits = np.bincount(rows[self.mask[batch.indices]], minlength=batch.size)
        return hits == 0


def _descend(empties: EmptinessOracle, m: int, limit: int | None) -> np.ndarray | None:
    """Split nonempty dyadic ranges down to singletons; None once more than ``limit`` are certain."""
    frontier = np.array([[0, m]], dtype=np.int64)
    found: list[np.ndarray] = []
    n_found = 0
    while frontier.size:
        lo, hi = frontier[:, 0], frontier[:, 1]
        mid = (lo + hi + 1) // 2
        children = np.concatenate([np.stack([lo, mid], 1), np.stack([mid, hi], 1)])
        children = children[children[:, 1] > children[:, 0]]
        empty = empties(SubsetBatch.from_ranges(children[:, 0], children[:, 1]))
        hit = children[~empty]
        single = hit[:, 1] - hit[:, 0] == 1
        found.append(hit[single, 0])
        n_found += int(single.sum())
        frontier = hit[~single]
        # every node still held is disjoint from the others and certainly contains a mismatch
        if limit is not None and n_found + len(frontier) > limit:
            return None
    return np.sort(np.concatenate(found)) if found else np.zeros(0, dtype=np.int64)


def bernoulli_subsets(m: int, p: float, count: int, rng: np.random.Generator) -> SubsetBatch:
    """``count`` independent subsets of [m], each element kept with probability p."""
    if p >= 0.125:
        mask = rng.random((count, m)) < p
        rows, cols = np.nonzero(mask)
        indptr = np.zeros(count + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows, minlength=count), out=indptr[1:])
        return SubsetBatch(indptr, cols.astype(np.int64))
    # sparse rates: walk geometric gaps instead of flipping m coins per subset
    width = int(m * p + 6 * math.sqrt(m * p) + 8)
    pos = np.cumsum(rng.geometric(p, size=(count, width)), axis=1) - 1
    short = np.flatnonzero(pos[:, -1] < m)
    while short.size:
        extra = np.cumsum(rng.geometric(p, size=(short.size, width)), axis=1) + pos[short, -1:]
        grown = np.full((count, pos.shape[1] + width), m, dtype=np.int64)
        grown[:, : pos.shape[1]] = pos
        grown[short, pos.shape[1] :] = extra
        pos = grown
        short = short[pos[short, -1] < m]
    keep = pos < m
    indptr = np.zeros(count + 1, dtype=np.int64)
    np.cumsum(keep.sum(axis=1), out=indptr[1:])
    return SubsetBatch(indptr, pos[keep].astype(np.int64))


def _empty_fraction(empties: EmptinessOracle, m: int, k: int, trials: int, rng) -> int:
    return int(empties(bernoulli_subsets(m, 2.0**-k, trials, rng)).sum())


def subset_size_estimate(
    empties: EmptinessOracle,
    m: int,
    alpha: float,
    delta: float,
    rng: np.random.Generator | Streams | int | None = None,
    trials: int | None = None,
    exact_limit: int | None = None,
    emptiness_const: float = 12.0,
    rounding: bool = False,
) -> float:
    """(1 +- alpha)-estimate of |X| for an unknown X in [m], seen only through emptiness queries.

    Returns exactly 0 iff the whole-universe query reports empty. Small sets
    are counted exactly by tree descent; larger ones by the empty fraction of
    random subsets at a geometric inclusion rate.
    """
    if m <= 0:
        return 0.0
    if not isinstance(rng, np.random.Generator):
        rng = as_streams(rng).emptiness
    if empties(SubsetBatch.from_ranges([0], [m]))[0]:
        return 0.0
    limit = math.ceil(1.0 / alpha**2) if exact_limit is None else exact_limit
    exact = _descend(empties, m, limit)
    if exact is not None:
        return float(max(exact.size, 1))
    trials = default_trials(m, alpha, delta, emptiness_const) if trials is None else trials

    counts: dict[int, int] = {}
    chosen = None
    for k in range(_levels(m), 0, -1):
        counts[k] = _empty_fraction(empties, m, k, trials, rng)
        frac = counts[k] / trials
        if 0.25 <= frac <= 0.75:
            chosen = k
        elif frac < 0.25:
            break
    if chosen is None:
        chosen = min(counts, key=lambda k: abs(counts[k] / trials - 0.5))
    total = counts[chosen] + _empty_fraction(empties, m, chosen, trials, rng)
    frac = min(max(total / (2 * trials), 0.5 / (2 * trials)), 1 - 0.5 / (2 * trials))
    est = math.log(frac) / math.log1p(-(2.0**-chosen))
    est = min(max(est, 1.0), float(m))
    if rounding and alpha * est < 0.5:
        est = float(max(1, round(est)))
    return est


def restrict_dist_bet_rows(
    handles: Handles,
    i: int,
    S: Iterable[int],
    params: RowDistParams,
    rng: Streams | int | None = None,
) -> float:
    """(1 +- alpha)-estimate of the Hamming distance of row i of A and B restricted to S."""
    _check_row(handles, i)
    streams = as_streams(rng)
    columns = np.unique(np.asarray(list(S) if not isinstance(S, np.ndarray) else S, dtype=np.int64))
    m = columns.size
    if m == 0:
        return 0.0
    oracle = RowEmptiness(handles, i, columns, params.test_delta(m), params.reps_for(m), streams.signs)
    return subset_size_estimate(
        oracle,
        m,
        params.alpha,
        params.delta,
        rng=streams.emptiness,
        trials=params.trials_for(m),
        exact_limit=params.exact_limit_value(),
        rounding=params.rounding,
    )


def dist_bet_rows(handles: Handles, i: int, params: RowDistParams, rng: Streams | int | None = None) -> float:
    """(1 +- alpha)-estimate of the full Hamming distance of row i."""
    return restrict_dist_bet_rows(handles, i, np.arange(handles[0].n), params, rng)


def descent_reps(m: int, delta: float) -> int:
    # the descent tree has fewer than 2m nodes, each tested at most once
    return default_reps(delta / (2 * 2 * max(m, 1)))


def exact_mismatch_set(
    handles: Handles,
    i: int,
    S: Iterable[int],
    delta: float,
    rng: Streams | int | None = None,
) -> frozenset:
    """Recover {k in S : A(i,k) != B(i,k)} by binary-tree descent (exact w.p. >= 1 - delta)."""
    _check_row(handles, i)
    streams = as_streams(rng)
    columns = np.unique(np.asarray(list(S) if not isinstance(S, np.ndarray) else S, dtype=np.int64))
    m = columns.size
    if m == 0:
        return frozenset()
    reps = descent_reps(m, delta)
    oracle = RowEmptiness(handles, i, columns, delta, reps, streams.signs)
    if oracle(SubsetBatch.from_ranges([0], [m]))[0]:
        return frozenset()
    found = _descend(oracle, m, None)
    return frozenset(int(c) for c in columns[found])
