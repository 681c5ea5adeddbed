"""Matrix-distance estimators: bucketed guess phase, guess-halving wrapper, trivial fallback,
and the reduction from arbitrary to symmetric matrices."""

from __future__ import annotations

import dataclasses
import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .oracle import OracleHandle, DimensionMismatch, symmetrized_pairs
from .rng import Streams, as_streams
from .rowdist import Handles, RowDistParams, dist_bet_rows
from .sampler import EmptyRow, RowSampler, approx_sample

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
ZERO_BUCKET = 0


class GuessTooSmall(ValueError):
    """The guess T is below the threshold psi; the trivial estimator must be used instead."""


@dataclass(frozen=True)
class EstimatorParams:
    """Every tunable constant of the estimators.

    Defaults are the values the analysis fixes; ``preset("relaxed", eps)``
    gives a desk-scale variant that is reported as non-conforming.
    """

    epsilon: float
    bucket_ratio_divisor: float = 50.0
    tau_divisor: float = 40.0
    ss_divisor: float = 1600.0
    psi_const: float = 1.0
    psi: float | None = None
    gamma_multiplier: float = 1.0
    quit_divisor: float = 10.0
    sampler_divisor: float = 50.0
    eta_exponent: float = 3.0
    trivial_delta_exponent: float = 10.0
    emptiness_const: float = 12.0
    reuse_sampler: bool = False

    def __post_init__(self):
        if not 0 < self.epsilon < 0.5 + 1e-12:
            raise ValueError(f"epsilon must lie in (0, 1/2], got {self.epsilon}")
        for name in ("bucket_ratio_divisor", "tau_divisor", "ss_divisor", "psi_const",
                     "gamma_multiplier", "quit_divisor", "sampler_divisor", "emptiness_const"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.psi is not None and self.psi < 1:
            raise ValueError("psi must be at least 1")

    @classmethod
    def preset(cls, name: str, epsilon: float, **overrides) -> "EstimatorParams":
        if name == "conforming":
            return cls(epsilon, **overrides)
        if name == "relaxed":
            # psi_const = gamma_multiplier^2 keeps |Gamma| <= n for every guess T >= psi;
            # the quit divisor keeps its 1:5 proportion to the bucket divisor, so the
            # quit slack still dominates the upward bias of coarser buckets
            base = dict(
                bucket_ratio_divisor=8.0,
                tau_divisor=8.0,
                ss_divisor=1600.0,
                gamma_multiplier=1 / 8,
                psi_const=1 / 64,
                sampler_divisor=8.0,
                trivial_delta_exponent=3.0,
                emptiness_const=1.0,
                quit_divisor=1.6,
            )
            base.update(overrides)
            return cls(epsilon, **base)
        raise ValueError(f"unknown preset {name!r}")

    @property
    def conforming(self) -> bool:
        reference = EstimatorParams(self.epsilon)
        return all(
            getattr(self, f.name) == getattr(reference, f.name)
            for f in dataclasses.fields(self)
            if f.name not in ("epsilon", "reuse_sampler")
        ) and not self.reuse_sampler

    @property
    def beta(self) -> float:
        return self.epsilon / self.bucket_ratio_divisor

    @property
    def ratio(self) -> float:
        return 1.0 + self.beta

    @property
    def quit_slack(self) -> float:
        return 1.0 + self.epsilon / self.quit_divisor

    def psi_value(self, n: int) -> float:
        if self.psi is not None:
            return self.psi
        return max(1.0, self.psi_const * math.log2(max(n, 2)) ** 4 / self.epsilon**4)

    def gamma_size(self, n: int, T: float) -> int:
        return max(1, math.ceil(self.gamma_multiplier * n * math.log2(max(n, 2)) ** 2 / (self.epsilon**2 * math.sqrt(T))))

    def bucket_count(self, n: int) -> int:
        return math.ceil(math.log(max(n, 1)) / math.log(self.ratio)) + 1

    def tau(self, n: int, T: float, gamma_size: int) -> float:
        return (gamma_size / n) * math.sqrt(self.epsilon * T) / (self.tau_divisor * self.bucket_count(n))

    def eta(self, n: int) -> float:
        return min(0.5, float(max(n, 2)) ** -self.eta_exponent)

    def row_params(self, n: int) -> RowDistParams:
        return RowDistParams(self.beta, self.eta(n), emptiness_const=self.emptiness_const)

    def trivial_row_params(self, n: int) -> RowDistParams:
        delta = min(0.5, float(max(n, 2)) ** -self.trivial_delta_exponent)
        return RowDistParams(self.epsilon, delta, emptiness_const=self.emptiness_const)

    def to_text(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if value is not None:
                lines.append(f"{f.name} = {value}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, base: "EstimatorParams | None" = None) -> "EstimatorParams":
        """Parse ``key = value`` lines (``#`` starts a comment) over ``base``."""
        types = {f.name: f.type for f in dataclasses.fields(cls)}
        values = dataclasses.asdict(base) if base is not None else {}
        preset = None
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"line {lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            if key == "preset":
                preset = value
                continue
            if key not in types:
                raise ValueError(f"line {lineno}: unknown parameter {key!r}")
            values[key] = _parse_value(value, types[key])
        if preset is not None:
            eps = values.pop("epsilon", base.epsilon if base else None)
            if eps is None:
                raise ValueError("preset needs an epsilon")
            defaults = {f.name: f.default for f in dataclasses.fields(cls) if f.name != "epsilon"}
            overrides = {k: v for k, v in values.items() if k in defaults and v != defaults[k]}
            return cls.preset(preset, eps, **overrides)
        if "epsilon" not in values:
            raise ValueError("parameters must set epsilon")
        return cls(**values)

    @classmethod
    def from_file(cls, path: str | Path, base: "EstimatorParams | None" = None) -> "EstimatorParams":
        return cls.from_text(Path(path).read_text(), base)


def _parse_value(text: str, annotation) -> object:
    ann = str(annotation)
    if "bool" in ann:
        if text.lower() in ("true", "1", "yes"):
            return True
        if text.lower() in ("false", "0", "no"):
            return False
        raise ValueError(f"bad boolean {text!r}")
    if text.lower() == "none":
        return None
    if "/" in text:
        num, den = text.split("/", 1)
        return float(num) / float(den)
    return float(text)


def bucket_index(a_hat_value: float, ratio: float) -> int:
    """k with ratio^(k-1) <= a < ratio^k for a >= 1, else ZERO_BUCKET."""
    if ratio <= 1:
        raise ValueError("ratio must exceed 1")
    if a_hat_value < 1:
        return ZERO_BUCKET
    k = int(math.floor(math.log(a_hat_value) / math.log(ratio))) + 1
    # guard the float logarithm at bucket edges
    while k > 1 and ratio ** (k - 1) > a_hat_value:
        k -= 1
    while ratio**k <= a_hat_value:
        k += 1
    return k


@dataclass
class BucketTable:
    t: int
    ratio: float
    gamma: np.ndarray
    a_hat: dict[int, float]
    buckets: dict[int, list[int]]
    bucket_sizes: dict[int, int]
    zero_bucket: list[int]
    tau: float
    large: list[int]
    small: list[int]

    @classmethod
    def build(cls, gamma: np.ndarray, a_hat: dict[int, float], ratio: float, t: int, tau: float) -> "BucketTable":
        rows, mult = np.unique(gamma, return_counts=True)
        buckets: dict[int, list[int]] = {}
        sizes: dict[int, int] = {}
        zero: list[int] = []
        for i, c in zip(rows.tolist(), mult.tolist()):
            k = bucket_index(a_hat[i], ratio)
            if k == ZERO_BUCKET:
                zero.append(i)
                continue
            buckets.setdefault(k, []).append(i)
            sizes[k] = sizes.get(k, 0) + c
        large = sorted(k for k, s in sizes.items() if s >= tau)
        small = [k for k in range(1, t + 1) if k not in set(large)]
        return cls(t, ratio, gamma, a_hat, buckets, sizes, zero, tau, large, small)

    def multiset(self, k: int) -> np.ndarray:
        """Members of bucket k repeated by their multiplicity in gamma."""
        members = np.asarray(self.buckets.get(k, []), dtype=np.int64)
        return self.gamma[np.isin(self.gamma, members)]


@dataclass
class EstimateReport:
    d_hat: float
    d_hat_L: float
    d_hat_S: float
    zeta_hat: dict[int, float]
    counters_snapshot: dict[str, int]
    guess_trace: list[dict]
    conforming: bool
    method: str
    n: int
    epsilon: float
    effective_binary_total: int
    T: float | None = None
    details: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)

    def to_dict(self, include_timings: bool = False) -> dict:
        out = {
            "schema_version": SCHEMA_VERSION,
            "method": self.method,
            "n": self.n,
            "epsilon": self.epsilon,
            "T": self.T,
            "d_hat": self.d_hat,
            "d_hat_L": self.d_hat_L,
            "d_hat_S": self.d_hat_S,
            "zeta_hat": {str(k): v for k, v in sorted(self.zeta_hat.items())},
            "effective_binary_total": self.effective_binary_total,
            "counters_snapshot": self.counters_snapshot,
            "guess_trace": self.guess_trace,
            "conforming": self.conforming,
            "details": self.details,
        }
        if include_timings:
            out["timings"] = self.timings
        return out

    def to_json(self, include_timings: bool = False) -> str:
        return json.dumps(self.to_dict(include_timings), sort_keys=True, indent=2)


def _total(handles: Handles) -> int:
    return sum(h.effective_binary_total for h in handles)


RowDist = Callable[[Handles, int, RowDistParams, Streams], float]
Sampler = Callable[[Handles, int, float, float, Streams], int]


def _default_sampler(params: EstimatorParams) -> Sampler:
    def sample(handles, i, alpha, delta, streams):
        return approx_sample(
            handles, i, alpha, delta, streams,
            divisor=params.sampler_divisor, emptiness_const=params.emptiness_const,
        )

    return sample


def _cached_sampler(params: EstimatorParams) -> Sampler:
    samplers: dict[int, RowSampler] = {}

    def sample(handles, i, alpha, delta, streams):
        if i not in samplers:
            samplers[i] = RowSampler(
                handles, i, alpha, delta, streams,
                divisor=params.sampler_divisor, emptiness_const=params.emptiness_const,
            )
        return samplers[i].draw()

    return sample


def guess_estimate(
    handles: Handles,
    params: EstimatorParams,
    T: float,
    rng: Streams | int | None = None,
    *,
    row_dist: RowDist | None = None,
    sampler: Sampler | None = None,
) -> EstimateReport:
    """Estimate of D_M under the guess T for a symmetric pair.

    Rows of a sample Gamma are bucketed by estimated row distance; large
    buckets are scaled up directly and the mass they send into small-bucket
    columns is measured by sampling mismatched columns.
    """
    hA, hB = handles
    n = hA.n
    psi = params.psi_value(n)
    if T < psi:
        raise GuessTooSmall(f"guess T={T} is below psi={psi:.4g}")
    streams = as_streams(rng)
    row_dist = row_dist or dist_bet_rows
    if sampler is None:
        sampler = _cached_sampler(params) if params.reuse_sampler else _default_sampler(params)
    row_params = params.row_params(n)
    started = time.perf_counter()
    start_total = _total(handles)

    a_hat: dict[int, float] = {}
    row_calls = 0

    def estimate_row(i: int) -> float:
        nonlocal row_calls
        if i not in a_hat:
            row_calls += 1
            a_hat[i] = float(row_dist(handles, i, row_params, streams))
        return a_hat[i]

    g = params.gamma_size(n, T)
    gamma = streams.gamma.integers(0, n, size=g)
    for i in np.unique(gamma).tolist():
        estimate_row(i)
    t = params.bucket_count(n)
    tau = params.tau(n, T, g)
    table = BucketTable.build(gamma, a_hat, params.ratio, t, tau)
    after_gamma = _total(handles)
    gamma_time = time.perf_counter() - started

    scale = n / g
    large = set(table.large)
    d_L = scale * sum(table.bucket_sizes[k] * params.ratio**k for k in table.large)
    zeta: dict[int, float] = {}
    draws = 0
    empty_draws = 0
    for k in table.large:
        size = table.bucket_sizes[k]
        pool = table.multiset(k)
        picks = pool[streams.zdraws.integers(0, pool.size, size=size)]
        hits = 0
        for i in picks.tolist():
            draws += 1
            try:
                j = sampler(handles, i, params.beta, params.eta(n), streams)
            except EmptyRow:
                empty_draws += 1
                continue
            kj = bucket_index(estimate_row(j), params.ratio)
            if kj == ZERO_BUCKET or kj not in large:
                hits += 1
        zeta[k] = hits / size
    d_S = scale * sum(zeta[k] * table.bucket_sizes[k] * params.ratio**k for k in table.large)
    end_total = _total(handles)
    d_hat = d_L + d_S
    assert all(0.0 <= z <= 1.0 for z in zeta.values())
    log.debug("guess T=%g: |Gamma|=%d tau=%.3g large=%s d_hat=%.4g", T, g, tau, table.large, d_hat)
    return EstimateReport(
        d_hat=d_hat,
        d_hat_L=d_L,
        d_hat_S=d_S,
        zeta_hat=zeta,
        counters_snapshot={
            "gamma": after_gamma - start_total,
            "zeta": end_total - after_gamma,
        },
        guess_trace=[],
        conforming=params.conforming,
        method="guess",
        n=n,
        epsilon=params.epsilon,
        effective_binary_total=end_total - start_total,
        T=T,
        details={
            "gamma_size": g,
            "distinct_rows": int(np.unique(gamma).size),
            "tau": tau,
            "t": t,
            "psi": psi,
            "bucket_sizes": {str(k): v for k, v in sorted(table.bucket_sizes.items())},
            "large": table.large,
            "zero_bucket_rows": len(table.zero_bucket),
            "row_dist_calls": row_calls,
            "z_draws": draws,
            "empty_draws": empty_draws,
        },
        timings={"gamma": gamma_time, "total": time.perf_counter() - started},
    )


def trivial_estimate(
    handles: Handles,
    epsilon: float,
    rng: Streams | int | None = None,
    *,
    params: EstimatorParams | None = None,
    row_dist: RowDist | None = None,
) -> EstimateReport:
    """Sum of (1 +- epsilon) row-distance estimates over every row."""
    params = params or EstimatorParams(min(epsilon, 0.5))
    streams = as_streams(rng)
    row_dist = row_dist or dist_bet_rows
    n = handles[0].n
    row_params = dataclasses.replace(params.trivial_row_params(n), alpha=epsilon)
    started = time.perf_counter()
    start_total = _total(handles)
    d_hat = float(sum(row_dist(handles, i, row_params, streams) for i in range(n)))
    spent = _total(handles) - start_total
    return EstimateReport(
        d_hat=d_hat,
        d_hat_L=d_hat,
        d_hat_S=0.0,
        zeta_hat={},
        counters_snapshot={"trivial": spent},
        guess_trace=[],
        conforming=params.conforming,
        method="trivial",
        n=n,
        epsilon=epsilon,
        effective_binary_total=spent,
        details={"row_delta": row_params.delta},
        timings={"total": time.perf_counter() - started},
    )


def symm_estimate(
    handles: Handles,
    params: EstimatorParams,
    rng: Streams | int | None = None,
    *,
    row_dist: RowDist | None = None,
    sampler: Sampler | None = None,
) -> EstimateReport:
    """Halve the guess from n^2/2 until a guess estimate clears it; trivial fallback below psi."""
    streams = as_streams(rng)
    n = handles[0].n
    psi = params.psi_value(n)
    started = time.perf_counter()
    start_total = _total(handles)
    trace: list[dict] = []
    snapshot: dict[str, int] = {}
    T = n * n / 2
    while T >= psi:
        rep = guess_estimate(handles, params, T, streams, row_dist=row_dist, sampler=sampler)
        snapshot[f"guess:{T:g}"] = rep.effective_binary_total
        if T <= rep.d_hat / params.quit_slack:
            trace.append({"T": T, "m_hat": rep.d_hat, "decision": "quit"})
            rep.guess_trace = trace
            rep.counters_snapshot = snapshot
            rep.method = "symmetric"
            rep.effective_binary_total = _total(handles) - start_total
            rep.timings = {"total": time.perf_counter() - started}
            return rep
        trace.append({"T": T, "m_hat": rep.d_hat, "decision": "halve"})
        T /= 2
    rep = trivial_estimate(handles, params.epsilon, streams, params=params, row_dist=row_dist)
    snapshot["trivial"] = rep.effective_binary_total
    trace.append({"T": T, "m_hat": rep.d_hat, "decision": "trivial"})
    rep.guess_trace = trace
    rep.counters_snapshot = snapshot
    rep.method = "symmetric"
    rep.effective_binary_total = _total(handles) - start_total
    rep.timings = {"total": time.perf_counter() - started}
    return rep


def arbitrary_estimate(
    hA: OracleHandle,
    hB: OracleHandle,
    params: EstimatorParams,
    rng: Streams | int | None = None,
) -> EstimateReport:
    """Half the sum of symmetric estimates (accuracy epsilon/2) on the lower and upper mirrored views."""
    if hA.n != hB.n:
        raise DimensionMismatch(f"matrices differ in size: {hA.n} vs {hB.n}")
    streams = as_streams(rng)
    half = dataclasses.replace(params, epsilon=params.epsilon / 2)
    started = time.perf_counter()
    start_total = hA.effective_binary_total + hB.effective_binary_total
    lower, upper = symmetrized_pairs(hA, hB)
    lo = symm_estimate(lower, half, streams)
    up = symm_estimate(upper, half, streams)
    total = hA.effective_binary_total + hB.effective_binary_total - start_total
    return EstimateReport(
        d_hat=(lo.d_hat + up.d_hat) / 2,
        d_hat_L=(lo.d_hat_L + up.d_hat_L) / 2,
        d_hat_S=(lo.d_hat_S + up.d_hat_S) / 2,
        zeta_hat={},
        counters_snapshot={"lower": lo.effective_binary_total, "upper": up.effective_binary_total},
        guess_trace=[dict(view="lower", **e) for e in lo.guess_trace] + [dict(view="upper", **e) for e in up.guess_trace],
        conforming=params.conforming,
        method="arbitrary",
        n=hA.n,
        epsilon=params.epsilon,
        effective_binary_total=total,
        details={"lower": lo.to_dict(), "upper": up.to_dict()},
        timings={"total": time.perf_counter() - started},
    )
