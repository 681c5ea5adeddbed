"""Dyadic hierarchy over columns and almost-uniform sampling of mismatched columns."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .oracle import QueryIndexError
from .rng import Streams, as_streams
from .rowdist import Handles, RowDistParams, exact_mismatch_set, restrict_dist_bet_rows

DistFn = Callable[..., float]


class EmptyRow(ValueError):
    """No mismatch is detectable in the row being sampled."""


class DegenerateWeights(RuntimeError):
    """A node believed to hold mismatches has none left after exact recovery."""


def depth(n: int) -> int:
    """Number of levels below the root once n is padded to a power of two."""
    if n < 1:
        raise ValueError("n must be positive")
    return math.ceil(math.log2(n)) if n > 1 else 0


@dataclass(frozen=True)
class HierNode:
    """Node (level, index) of the dyadic hierarchy; level j has 2^j intervals of width 2^(L-j)."""

    level: int
    index: int

    def children(self) -> tuple["HierNode", "HierNode"]:
        return HierNode(self.level + 1, 2 * self.index), HierNode(self.level + 1, 2 * self.index + 1)

    def parent(self) -> "HierNode":
        if self.level == 0:
            raise ValueError("the root has no parent")
        return HierNode(self.level - 1, self.index // 2)

    def span(self, n: int) -> tuple[int, int]:
        """Half-open column range of this node, clipped to the true n."""
        width = 1 << (depth(n) - self.level)
        lo = self.index * width
        return min(lo, n), min(lo + width, n)

    def columns(self, n: int) -> np.ndarray:
        lo, hi = self.span(n)
        return np.arange(lo, hi, dtype=np.int64)


ROOT = HierNode(0, 0)


def hier_locate(ell: int, j: int, n: int) -> int:
    """Index k of the level-j node containing column ell."""
    L = depth(n)
    if not 0 <= ell < n:
        raise QueryIndexError(f"column {ell} outside [0, {n})")
    if not 0 <= j <= L:
        raise ValueError(f"level {j} outside [0, {L}]")
    return ell >> (L - j)


class _NodeEstimates:
    """Restricted-distance estimates per node, optionally kept across draws."""

    def __init__(self, handles, i, params, dist_fn, streams, keep: bool):
        self.handles = handles
        self.i = i
        self.params = params
        self.dist_fn = dist_fn
        self.streams = streams
        self.keep = keep
        self.values: dict[HierNode, float] = {}
        self.exact_sets: dict[HierNode, list[int]] = {}
        self.calls = 0

    def __call__(self, node: HierNode) -> float:
        if self.keep and node in self.values:
            return self.values[node]
        cols = node.columns(self.handles[0].n)
        if cols.size == 0:
            value = 0.0
        else:
            self.calls += 1
            value = float(self.dist_fn(self.handles, self.i, cols, self.params, self.streams))
        if self.keep:
            self.values[node] = value
        return value

    def exact(self, node: HierNode) -> list[int]:
        if self.keep and node in self.exact_sets:
            return self.exact_sets[node]
        cols = node.columns(self.handles[0].n)
        found = sorted(exact_mismatch_set(self.handles, self.i, cols, self.params.delta, self.streams))
        if self.keep:
            self.exact_sets[node] = found
        return found


def _descend_once(est: _NodeEstimates, n: int, rng: np.random.Generator) -> int:
    node = ROOT
    if n == 1:
        if est(ROOT) == 0:
            raise EmptyRow("row shows no mismatch")
        return 0
    for _ in range(depth(n)):
        left, right = node.children()
        d1, d2 = est(left), est(right)
        if d1 + d2 <= 0:
            if node == ROOT:
                raise EmptyRow("row shows no mismatch")
            # a nonzero parent with two zero children: recover the node exactly
            found = est.exact(node)
            if not found:
                raise DegenerateWeights(f"node {node} holds no mismatch after exact recovery")
            return int(found[rng.integers(len(found))])
        node = left if rng.random() * (d1 + d2) < d1 else right
    return node.index


def sampler_params(alpha: float, delta: float, n: int, divisor: float = 50.0, emptiness_const: float = 12.0) -> RowDistParams:
    """Inner accuracy alpha/(divisor log n) and failure delta/(divisor log n) for each node estimate."""
    scale = divisor * max(depth(n), 1)
    return RowDistParams(alpha / scale, delta / scale, emptiness_const=emptiness_const)


def approx_sample(
    handles: Handles,
    i: int,
    alpha: float,
    delta: float,
    rng: Streams | int | None = None,
    *,
    divisor: float = 50.0,
    dist_fn: DistFn | None = None,
    emptiness_const: float = 12.0,
) -> int:
    """One (1 +- alpha)-uniform draw from the mismatched columns of row i, fresh estimates throughout."""
    n = handles[0].n
    if not 0 <= i < n:
        raise QueryIndexError(f"row {i} outside [0, {n})")
    streams = as_streams(rng)
    params = sampler_params(alpha, delta, n, divisor, emptiness_const)
    est = _NodeEstimates(handles, i, params, dist_fn or restrict_dist_bet_rows, streams, keep=False)
    return _descend_once(est, n, streams.descent)


class RowSampler:
    """Repeated draws from one row, reusing node estimates between draws.

    All draws then come from the single (1 +- alpha)-uniform distribution
    fixed by the first visit of each node, which keeps large draw counts cheap.
    """

    def __init__(
        self,
        handles: Handles,
        i: int,
        alpha: float,
        delta: float,
        rng: Streams | int | None = None,
        *,
        divisor: float = 50.0,
        dist_fn: DistFn | None = None,
        emptiness_const: float = 12.0,
    ):
        self.n = handles[0].n
        if not 0 <= i < self.n:
            raise QueryIndexError(f"row {i} outside [0, {self.n})")
        self.streams = as_streams(rng)
        params = sampler_params(alpha, delta, self.n, divisor, emptiness_const)
        self.estimates = _NodeEstimates(handles, i, params, dist_fn or restrict_dist_bet_rows, self.streams, keep=True)

    def draw(self) -> int:
        return _descend_once(self.estimates, self.n, self.streams.descent)

    def draws(self, count: int) -> np.ndarray:
        return np.fromiter((self.draw() for _ in range(count)), dtype=np.int64, count=count)

    def leaf_probabilities(self) -> dict[int, float]:
        """Exact output distribution implied by the cached estimates (visits every live node)."""
        probs: dict[int, float] = {}
        stack = [(ROOT, 1.0)]
        L = depth(self.n)
        while stack:
            node, mass = stack.pop()
            if node.level == L:
                probs[node.index] = probs.get(node.index, 0.0) + mass
                continue
            left, right = node.children()
            d1, d2 = self.estimates(left), self.estimates(right)
            if d1 + d2 <= 0:
                if node == ROOT:
                    raise EmptyRow("row shows no mismatch")
                found = self.estimates.exact(node)
                for c in found:
                    probs[c] = probs.get(c, 0.0) + mass / len(found)
                continue
            if d1 > 0:
                stack.append((left, mass * d1 / (d1 + d2)))
            if d2 > 0:
                stack.append((right, mass * d2 / (d1 + d2)))
        return probs
