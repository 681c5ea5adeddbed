"""Seeded test-matrix generators: planted-distance pairs and disjointness block constructions."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .oracle import Matrix

KINDS = ("planted_random", "planted_symmetric", "disjointness_ip", "disjointness_decip")


@dataclass(frozen=True)
class InstanceSpec:
    """What to generate.

    ``D_or_T`` is the planted distance for planted kinds and the block
    area T for disjointness kinds. ``x``/``y`` default to all-zero bit
    vectors (a disjoint pair). ``promise`` enforces that x and y share at
    most one 1 for disjointness_ip.
    """

    kind: str
    n: int
    D_or_T: int
    seed: int = 0
    x: tuple[int, ...] | None = None
    y: tuple[int, ...] | None = None
    real: bool = False
    promise: bool = True

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown instance kind {self.kind!r}")
        if self.n < 1:
            raise ValueError("n must be positive")
        if not 0 <= self.D_or_T <= self.n * self.n:
            raise ValueError(f"D_or_T must lie in [0, n^2], got {self.D_or_T}")
        if self.kind.startswith("disjointness"):
            side = math.isqrt(self.D_or_T)
            if side < 1 or side * side != self.D_or_T:
                raise ValueError("T must be a positive perfect square")
            if self.n % side:
                raise ValueError(f"sqrt(T)={side} must divide n={self.n}")
            N = self.block_count
            for name in ("x", "y"):
                bits = getattr(self, name)
                if bits is not None and (len(bits) != N or any(b not in (0, 1) for b in bits)):
                    raise ValueError(f"{name} must be a 0/1 vector of length {N}")
            if self.kind == "disjointness_ip" and self.promise:
                both = sum(a & b for a, b in zip(self.bits("x"), self.bits("y")))
                if both > 1:
                    raise ValueError("x and y may intersect in at most one position")

    @property
    def block_side(self) -> int:
        return math.isqrt(self.D_or_T)

    @property
    def block_count(self) -> int:
        side = self.block_side
        if self.kind == "disjointness_ip":
            return self.n // side
        return (self.n // side) ** 2

    def bits(self, name: str) -> tuple[int, ...]:
        bits = getattr(self, name)
        return tuple(bits) if bits is not None else (0,) * self.block_count

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "n": self.n,
            "D_or_T": self.D_or_T,
            "seed": self.seed,
            "x": list(self.bits("x")) if self.kind.startswith("disjointness") else None,
            "y": list(self.bits("y")) if self.kind.startswith("disjointness") else None,
            "real": self.real,
        }


def _alteration(real: bool):
    return 1.5 if real else 1


def gen_planted(spec: InstanceSpec) -> tuple[Matrix, Matrix, int]:
    """Random 0/1 matrix A and a copy B altered in exactly D cells."""
    if spec.kind not in ("planted_random", "planted_symmetric"):
        raise ValueError(f"gen_planted cannot build {spec.kind!r}")
    n, D = spec.n, spec.D_or_T
    rng = np.random.default_rng(spec.seed)
    dtype = np.float64 if spec.real else np.int64
    A = rng.integers(0, 2, size=(n, n)).astype(dtype)
    if spec.kind == "planted_symmetric":
        A = np.triu(A) + np.triu(A, 1).T
    B = A.copy()
    bump = _alteration(spec.real)
    if spec.kind == "planted_random":
        cells = rng.choice(n * n, size=D, replace=False)
        B.flat[cells] += bump
    else:
        off = n * (n - 1) // 2
        # each off-diagonal pair adds 2, a diagonal cell adds 1; use as many pairs as fit
        pairs = min(D // 2, off)
        diag = D - 2 * pairs
        if diag > n:
            raise ValueError(f"cannot plant D={D} symmetrically at n={n}")
        iu, ju = np.triu_indices(n, 1)
        chosen = rng.choice(off, size=pairs, replace=False)
        B[iu[chosen], ju[chosen]] += bump
        B[ju[chosen], iu[chosen]] += bump
        d = rng.choice(n, size=diag, replace=False)
        B[d, d] += bump
    return Matrix(A, real=spec.real), Matrix(B, real=spec.real), int(D)


def gen_disjointness_ip(spec: InstanceSpec) -> tuple[Matrix, Matrix, int]:
    """Null A; block-diagonal B whose k-th sqrt(T) x sqrt(T) block is all ones iff x_k = y_k = 1."""
    if spec.kind != "disjointness_ip":
        raise ValueError(f"gen_disjointness_ip cannot build {spec.kind!r}")
    n, side = spec.n, spec.block_side
    B = np.zeros((n, n), dtype=np.int64)
    on = [k for k, (a, b) in enumerate(zip(spec.bits("x"), spec.bits("y"))) if a and b]
    for k in on:
        B[k * side : (k + 1) * side, k * side : (k + 1) * side] = 1
    return Matrix.zeros(n), Matrix(B), len(on) * spec.D_or_T


def block_position(k: int, n: int, side: int) -> tuple[int, int]:
    """Row-major grid position (block row, block column) of block k."""
    per_row = n // side
    return divmod(k, per_row)


def gen_disjointness_decip(spec: InstanceSpec) -> tuple[Matrix, Matrix, int]:
    """All-ones A; B equal to A except that block k is zeroed iff x_k = y_k = 1."""
    if spec.kind != "disjointness_decip":
        raise ValueError(f"gen_disjointness_decip cannot build {spec.kind!r}")
    n, side = spec.n, spec.block_side
    B = np.ones((n, n), dtype=np.int64)
    on = [k for k, (a, b) in enumerate(zip(spec.bits("x"), spec.bits("y"))) if a and b]
    for k in on:
        r, c = block_position(k, n, side)
        B[r * side : (r + 1) * side, c * side : (c + 1) * side] = 0
    return Matrix.ones(n), Matrix(B), len(on) * spec.D_or_T


def generate(spec: InstanceSpec) -> tuple[Matrix, Matrix, int]:
    if spec.kind.startswith("planted"):
        return gen_planted(spec)
    if spec.kind == "disjointness_ip":
        return gen_disjointness_ip(spec)
    return gen_disjointness_decip(spec)


def disjointness_bits(N: int, intersect: int, rng: np.random.Generator, density: float = 0.5) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Random x, y of length N sharing exactly ``intersect`` positions, otherwise disjoint."""
    if not 0 <= intersect <= N:
        raise ValueError("intersect must lie in [0, N]")
    order = rng.permutation(N)
    common = set(order[:intersect].tolist())
    x = [0] * N
    y = [0] * N
    for k in common:
        x[k] = y[k] = 1
    for k in order[intersect:].tolist():
        r = rng.random()
        if r < density / 2:
            x[k] = 1
        elif r < density:
            y[k] = 1
    return tuple(x), tuple(y)
