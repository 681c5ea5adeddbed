"""Command-line front end: gen, estimate, sweep, verify."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import refcheck
from .estimator import (
    EstimatorParams,
    GuessTooSmall,
    arbitrary_estimate,
    guess_estimate,
    symm_estimate,
    trivial_estimate,
)
from .instances import InstanceSpec, disjointness_bits, generate
from .matio import read_matrix, read_sidecar, write_matrix, write_sidecar
from .oracle import handle_pair

EXIT_OK = 0
EXIT_PRECONDITION = 2
EXIT_IO = 3
EXIT_INTERNAL = 4

SWEEP_COLUMNS = [
    "trial", "n", "true_D", "epsilon", "mode", "seed", "d_hat", "rel_error",
    "queries", "phase_breakdown", "guesses", "conforming",
]


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def pair_paths(out: str) -> tuple[Path, Path, Path]:
    base = Path(out)
    return (base.with_name(base.name + "_A.txt"), base.with_name(base.name + "_B.txt"),
            base.with_name(base.name + ".json"))


def build_spec(args) -> InstanceSpec:
    kind = args.kind
    size = args.t if kind.startswith("disjointness") else args.d
    if size is None:
        raise CliError(f"--{'t' if kind.startswith('disjointness') else 'd'} is required for {kind}", EXIT_PRECONDITION)
    x = y = None
    if kind.startswith("disjointness"):
        probe = InstanceSpec(kind, args.n, size, args.seed)
        x, y = disjointness_bits(probe.block_count, args.intersect, np.random.default_rng(args.seed))
    return InstanceSpec(kind, args.n, size, args.seed, x, y, real=args.real, promise=args.intersect <= 1)


def cmd_gen(args) -> int:
    try:
        spec = build_spec(args)
        A, B, D = generate(spec)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_PRECONDITION) from exc
    pa, pb, meta = pair_paths(args.out)
    try:
        write_matrix(pa, A)
        write_matrix(pb, B)
        write_sidecar(meta, {"seed": spec.seed, "generator": spec.kind, "planted_distance": D,
                             "true_distance": D, "spec": spec.to_dict()})
    except OSError as exc:
        raise CliError(f"cannot write output: {exc}", EXIT_IO) from exc
    print(json.dumps({"A": str(pa), "B": str(pb), "sidecar": str(meta), "true_distance": D}))
    return EXIT_OK


def load_params(args) -> EstimatorParams:
    try:
        params = EstimatorParams.preset(args.preset, args.epsilon)
        if args.params:
            params = EstimatorParams.from_file(args.params, params)
    except OSError as exc:
        raise CliError(f"cannot read params: {exc}", EXIT_IO) from exc
    except ValueError as exc:
        raise CliError(f"bad parameters: {exc}", EXIT_PRECONDITION) from exc
    return params


def load_pair(paths):
    try:
        return read_matrix(paths[0]), read_matrix(paths[1])
    except OSError as exc:
        raise CliError(f"cannot read matrix: {exc}", EXIT_IO) from exc
    except ValueError as exc:
        raise CliError(f"cannot parse matrix: {exc}", EXIT_PRECONDITION) from exc


def run_estimate(A, B, params: EstimatorParams, mode: str, seed: int):
    if A.n != B.n:
        raise CliError(f"matrices differ in size: {A.n} vs {B.n}", EXIT_PRECONDITION)
    hA, hB = handle_pair(A, B)
    symmetric = A.symmetric and B.symmetric
    if mode == "auto":
        return symm_estimate((hA, hB), params, seed) if symmetric else arbitrary_estimate(hA, hB, params, seed)
    if mode == "symmetric":
        if not symmetric:
            raise CliError("mode symmetric needs two symmetric matrices", EXIT_PRECONDITION)
        return symm_estimate((hA, hB), params, seed)
    if mode == "trivial":
        return trivial_estimate((hA, hB), params.epsilon, seed, params=params)
    if mode.startswith("guess:"):
        try:
            T = float(mode.split(":", 1)[1])
        except ValueError:
            raise CliError(f"bad guess in mode {mode!r}", EXIT_PRECONDITION) from None
        if not symmetric:
            raise CliError("guess mode needs two symmetric matrices", EXIT_PRECONDITION)
        try:
            return guess_estimate((hA, hB), params, T, seed)
        except GuessTooSmall as exc:
            raise CliError(str(exc), EXIT_PRECONDITION) from exc
    raise CliError(f"unknown mode {mode!r}", EXIT_PRECONDITION)


def cmd_estimate(args) -> int:
    A, B = load_pair(args.matrices)
    params = load_params(args)
    report = run_estimate(A, B, params, args.mode, args.seed)
    if report.d_hat < 0:
        raise CliError("negative estimate", EXIT_INTERNAL)
    print(report.to_json(include_timings=args.timings))
    return EXIT_OK


def _sweep_trial(job: dict) -> dict:
    spec = InstanceSpec(job["kind"], job["n"], job["D"], job["instance_seed"])
    A, B, D = generate(spec)
    params = EstimatorParams.preset(job["preset"], job["epsilon"], **job["overrides"])
    report = run_estimate(A, B, params, job["mode"], job["seed"])
    rel = abs(report.d_hat - D) / D if D else float(report.d_hat != 0)
    return {
        "trial": job["trial"],
        "n": job["n"],
        "true_D": D,
        "epsilon": job["epsilon"],
        "mode": job["mode"],
        "seed": job["seed"],
        "d_hat": report.d_hat,
        "rel_error": rel,
        "queries": report.effective_binary_total,
        "phase_breakdown": json.dumps(report.counters_snapshot, sort_keys=True),
        "guesses": len(report.guess_trace),
        "conforming": report.conforming,
    }


def sweep_jobs(config: dict, trials: int | None = None) -> list[dict]:
    """Expand a sweep config into one job per trial, in a fixed order; ``trials`` overrides every run."""
    defaults = {
        "kind": "planted_symmetric", "epsilon": 0.5, "trials": 1, "mode": "auto",
        "preset": "relaxed", "overrides": {}, "seed": 0,
    }
    defaults.update(config.get("defaults", {}))
    jobs = []
    for entry in config.get("runs", []):
        run = {**defaults, **entry}
        if trials is not None:
            run["trials"] = trials
            run.pop("seeds", None)
        ns = run["n"] if isinstance(run["n"], list) else [run["n"]]
        for n in ns:
            if "D" in run:
                D = int(run["D"])
            elif "D_fraction" in run:
                D = int(round(run["D_fraction"] * n * n))
            else:
                raise ValueError("each run needs D or D_fraction")
            seeds = run.get("seeds") or [run["seed"] + t for t in range(int(run["trials"]))]
            for s in seeds:
                jobs.append({
                    "trial": len(jobs), "kind": run["kind"], "n": int(n), "D": D,
                    "epsilon": float(run["epsilon"]), "mode": run["mode"], "preset": run["preset"],
                    "overrides": dict(run["overrides"]), "seed": int(s), "instance_seed": int(s),
                })
    return jobs


def cmd_sweep(args) -> int:
    try:
        config = json.loads(Path(args.config).read_text())
    except OSError as exc:
        raise CliError(f"cannot read config: {exc}", EXIT_IO) from exc
    except json.JSONDecodeError as exc:
        raise CliError(f"cannot parse config: {exc}", EXIT_PRECONDITION) from exc
    try:
        jobs = sweep_jobs(config, args.trials)
    except (KeyError, ValueError, TypeError) as exc:
        raise CliError(f"bad sweep config: {exc}", EXIT_PRECONDITION) from exc
    if args.workers > 1:
        with ProcessPoolExecutor(args.workers) as pool:
            rows = list(pool.map(_sweep_trial, jobs))
    else:
        rows = [_sweep_trial(job) for job in jobs]
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        writer = csv.DictWriter(out, fieldnames=SWEEP_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)
    finally:
        if args.out:
            out.close()
    return EXIT_OK


def cmd_verify(args) -> int:
    A, B = load_pair(args.matrices)
    if A.n != B.n:
        raise CliError(f"matrices differ in size: {A.n} vs {B.n}", EXIT_PRECONDITION)
    D = refcheck.exact_matrix_distance(A, B)
    rows = refcheck.exact_row_distances(A, B)
    result = {
        "n": A.n,
        "D": D,
        "row_distance_min": int(rows.min()),
        "row_distance_max": int(rows.max()),
        "row_distance_mean": float(rows.mean()),
        "rows_with_mismatch": int((rows > 0).sum()),
        "A_symmetric": A.symmetric,
        "B_symmetric": B.symmetric,
        "row_sum_identity": bool(int(rows.sum()) == D),
    }
    if args.sidecar:
        try:
            meta = read_sidecar(args.sidecar)
        except (OSError, json.JSONDecodeError) as exc:
            raise CliError(f"cannot read sidecar: {exc}", EXIT_IO) from exc
        result["sidecar_distance"] = meta.get("true_distance")
        result["sidecar_match"] = meta.get("true_distance") == D
    print(json.dumps(result, sort_keys=True, indent=2))
    if not result["row_sum_identity"]:
        return EXIT_INTERNAL
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ipdist", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a matrix pair and sidecar")
    gen.add_argument("--kind", required=True,
                     choices=["planted_random", "planted_symmetric", "disjointness_ip", "disjointness_decip"])
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--d", type=int, help="planted distance")
    gen.add_argument("--t", type=int, help="block area T for disjointness kinds")
    gen.add_argument("--intersect", type=int, default=0, help="shared positions of x and y")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--real", action="store_true")
    gen.add_argument("--out", default="pair", help="output prefix")
    gen.set_defaults(func=cmd_gen)

    est = sub.add_parser("estimate", help="estimate the distance between two matrix files")
    est.add_argument("matrices", nargs=2)
    est.add_argument("--epsilon", type=float, default=0.5)
    est.add_argument("--seed", type=int, default=0)
    est.add_argument("--mode", default="auto", help="auto, symmetric, trivial or guess:T")
    est.add_argument("--preset", default="conforming", choices=["conforming", "relaxed"])
    est.add_argument("--params", help="key = value file overriding constants")
    est.add_argument("--timings", action="store_true", help="include wall-clock timings")
    est.set_defaults(func=cmd_estimate)

    sw = sub.add_parser("sweep", help="run a JSON-configured batch and write CSV")
    sw.add_argument("config")
    sw.add_argument("--out")
    sw.add_argument("--trials", type=int, help="override the trial count of every run")
    sw.add_argument("--workers", type=int, default=1)
    sw.set_defaults(func=cmd_sweep)

    ver = sub.add_parser("verify", help="brute-force report for a matrix pair")
    ver.add_argument("matrices", nargs=2)
    ver.add_argument("--sidecar")
    ver.set_defaults(func=cmd_verify)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except AssertionError as exc:
        print(f"internal invariant violated: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
