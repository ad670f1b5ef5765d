"""Command-line interface: estimation, synthetic sweeps, evaluation, benchmarks.

Every command writes a manifest JSON next to its outputs with the fully
resolved configuration; ``replay`` re-executes a manifest.  All output files
are written atomically (temp file + rename), use ``.`` as decimal separator,
and end with a newline.  Failures exit nonzero with a single ``error:`` line.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, datagen, evaluate, fairness, solver
from .model import (
    FairGlassoError,
    GroupAssignment,
    LipschitzMode,
    PenaltyKind,
    SolverConfig,
)

__all__ = ["main"]


# ---------------------------------------------------------------------------
# file IO helpers

def _atomic_write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_matrix_csv(path: Path, M: np.ndarray) -> None:
    rows = (",".join(repr(float(v)) for v in row) for row in M)
    _atomic_write_text(path, "\n".join(rows) + "\n")


def _jsonable(value):
    """Replace non-finite floats with None so the JSON stays standard."""
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return v if math.isfinite(v) else None
    if isinstance(value, np.integer):
        return int(value)
    return value


def write_json(path: Path, obj: dict) -> None:
    _atomic_write_text(
        path, json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"
    )


def read_matrix_csv(path: str, header: bool = False) -> np.ndarray:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if header and lines:
        lines = lines[1:]
    rows: list[list[float]] = []
    width = None
    for idx, line in enumerate(lines, start=1 + int(header)):
        if not line.strip():
            continue
        cells = line.split(",")
        if width is None:
            width = len(cells)
        elif len(cells) != width:
            raise FairGlassoError(
                f"{path}: ragged CSV, row {idx} has {len(cells)} cells, "
                f"expected {width}"
            )
        parsed = []
        for col, cell in enumerate(cells, start=1):
            try:
                parsed.append(float(cell))
            except ValueError:
                raise FairGlassoError(
                    f"{path}: non-numeric cell at row {idx}, column {col}: "
                    f"{cell.strip()!r}"
                ) from None
        rows.append(parsed)
    if not rows:
        raise FairGlassoError(f"{path}: no data rows")
    return np.array(rows)


def read_groups(path: str) -> list[int]:
    labels = []
    for idx, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            labels.append(int(line.strip()))
        except ValueError:
            raise FairGlassoError(
                f"{path}: non-integer group label at line {idx}: {line.strip()!r}"
            ) from None
    if not labels:
        raise FairGlassoError(f"{path}: no group labels")
    return labels


def _write_manifest(out: Path, command: str, args: dict, seed: int) -> None:
    write_json(
        Path(f"{out}.manifest.json"),
        {
            "command": command,
            "tool_version": __version__,
            "timestamp_utc": datetime.now(timezone.utc).isoformat(),
            "seed": seed,
            "config": {k: _fmt_config(v) for k, v in sorted(args.items())},
        },
    )


def _fmt_config(value):
    if isinstance(value, (list, tuple)):
        return [_fmt_config(v) for v in value]
    return value


# ---------------------------------------------------------------------------
# commands

def _solver_config(args: dict) -> SolverConfig:
    return SolverConfig(
        mu1=args["mu1"],
        mu2=args["mu2"],
        epsilon=args["epsilon"],
        alpha=args["alpha"],
        penalty=PenaltyKind(args["penalty"]),
        max_iter=args["max_iter"],
        tol=args["tol"],
        lipschitz_mode=LipschitzMode(args["lipschitz"]),
    )


def cmd_estimate(args: dict) -> None:
    X = read_matrix_csv(args["observations"], header=args["header"])
    n, p = X.shape
    if n < 2:
        raise FairGlassoError(f"need at least 2 observations, got {n}")
    if p < 4:
        raise FairGlassoError(f"need at least 4 variables, got {p}")
    labels = read_groups(args["groups"])
    if len(labels) != p:
        raise FairGlassoError(
            f"group file has {len(labels)} labels but data has {p} columns"
        )
    Z = GroupAssignment.from_labels(labels)
    if args["center"]:
        X = X - X.mean(axis=0)
    denom = n - 1 if args["unbiased_cov"] else n
    sigma_hat = (X.T @ X) / denom

    cfg = _solver_config(args)
    res = solver.fista_solve(sigma_hat, Z, cfg)

    out = Path(args["out"])
    write_matrix_csv(Path(f"{out}.theta.csv"), res.theta)
    try:
        nbias = fairness.normalized_bias(res.theta, Z)
    except FairGlassoError:
        nbias = None
    write_json(
        Path(f"{out}.metrics.json"),
        {
            "p": p,
            "n": n,
            "g": Z.g,
            "iterations": res.iterations,
            "converged": res.converged,
            "final_objective": res.final_objective,
            "bias_group": fairness.bias_group(res.theta, Z),
            "bias_node": fairness.bias_node(res.theta, Z),
            "normalized_bias": nbias,
            "model_fit_sample": evaluate.model_fit(res.theta, sigma_hat),
        },
    )
    _write_manifest(out, "estimate", args, args["seed"])


SWEEP_HEADER = "method,p,n,g,seed,mu1,mu2,beta,error,bias,runtime_s"


def cmd_synth(args: dict) -> None:
    scenario = evaluate.SweepScenario(args["scenario"])
    grid = evaluate.SweepGrid(
        betas=tuple(args["betas"]),
        ps=tuple(args["ps"]),
        ns=tuple(args["ns"]),
        p=args["p"],
        n=args["n"],
        g=args["g"],
        avg_degree=args["avg_degree"],
        graph=args["graph"],
        methods=tuple(args["methods"]),
        mu1=args["mu1"],
        mu2_grid=tuple(args["mu2"]),
        epsilon=args["epsilon"],
        tol=args["tol"],
        max_iter=args["max_iter"],
        alpha=args["alpha"],
    )
    records = evaluate.run_sweep(scenario, grid, args["seeds"], args["base_seed"])
    lines = [SWEEP_HEADER]
    for r in records:
        beta = "" if r.beta is None else repr(r.beta)
        lines.append(
            ",".join(
                [
                    r.method,
                    str(r.p),
                    str(r.n),
                    str(r.g),
                    str(r.seed),
                    repr(r.mu1),
                    _fmt(r.mu2),
                    beta,
                    _fmt(r.error),
                    _fmt(r.bias),
                    repr(r.runtime_s),
                ]
            )
        )
    out = Path(args["out"])
    _atomic_write_text(Path(f"{out}.sweep.csv"), "\n".join(lines) + "\n")

    summary = evaluate.summarize(records)
    cols = list(summary[0].keys())
    sl = [",".join(cols)]
    for row in summary:
        sl.append(",".join("" if row[c] is None else _fmt(row[c]) for c in cols))
    _atomic_write_text(Path(f"{out}.sweep.summary.csv"), "\n".join(sl) + "\n")
    _write_manifest(out, "synth", args, args["base_seed"])


def cmd_eval(args: dict) -> None:
    theta = read_matrix_csv(args["theta"])
    if theta.shape[0] != theta.shape[1]:
        raise FairGlassoError(
            f"theta must be square, got shape {theta.shape[0]}x{theta.shape[1]}"
        )
    labels = read_groups(args["groups"])
    if len(labels) != theta.shape[0]:
        raise FairGlassoError(
            f"group file has {len(labels)} labels but theta is "
            f"{theta.shape[0]}x{theta.shape[0]}"
        )
    Z = GroupAssignment.from_labels(labels)

    threshold = args["threshold"]
    if threshold is None:
        threshold = evaluate.default_edge_threshold(theta)
    ratios = evaluate.sign_ratios(theta, Z, threshold)
    try:
        nbias = fairness.normalized_bias(theta, Z)
    except FairGlassoError:
        nbias = None
    try:
        mod = evaluate.modularity(theta, Z)
    except FairGlassoError:
        mod = None
    metrics = {
        "p": theta.shape[0],
        "g": Z.g,
        "edge_threshold": threshold,
        "bias_group": fairness.bias_group(theta, Z),
        "bias_node": fairness.bias_node(theta, Z),
        "normalized_bias": nbias,
        "modularity": mod,
        "sign_ratios": {
            "within_positive": ratios.within_positive,
            "within_negative": ratios.within_negative,
            "within_ratio": ratios.within_ratio,
            "across_positive": ratios.across_positive,
            "across_negative": ratios.across_negative,
            "across_ratio": ratios.across_ratio,
        },
    }
    if args["theta0"] is not None:
        theta0 = read_matrix_csv(args["theta0"])
        if theta0.shape != theta.shape:
            raise FairGlassoError("theta0 shape does not match theta")
        metrics["normalized_error"] = evaluate.normalized_error(theta, theta0)
    if args["sigma"] is not None:
        sigma = read_matrix_csv(args["sigma"])
        if sigma.shape != theta.shape:
            raise FairGlassoError("sigma shape does not match theta")
        metrics["model_fit"] = evaluate.model_fit(theta, sigma)

    out = Path(args["out"])
    write_json(Path(f"{out}.metrics.json"), metrics)
    _write_manifest(out, "eval", args, args["seed"])


def cmd_bench(args: dict) -> None:
    rows = []
    slopes = {}
    methods = {"FGL-0": 0.0, "FGL-1": args["mu2"]}
    for method, mu2 in methods.items():
        med_runtimes = []
        for p in args["ps"]:
            gt = datagen.fair_ground_truth(
                p, args["g"], args["avg_degree"], datagen.derive_seed(args["seed"], p)
            )
            X = datagen.sample_from_covariance(
                gt.sigma0, args["n"], datagen.derive_seed(args["seed"], p, 1)
            )
            Xc = X - X.mean(axis=0)
            sigma_hat = (Xc.T @ Xc) / args["n"]
            cfg = SolverConfig(
                mu1=args["mu1"],
                mu2=mu2,
                epsilon=args["epsilon"],
                alpha=None,
                penalty=PenaltyKind.GROUP,
                max_iter=args["iters"],
                tol=1e-300,  # run the full iteration budget
                lipschitz_mode=LipschitzMode.UPPER,
            )
            times = []
            iters = args["iters"]
            for _ in range(args["seeds"]):
                t0 = time.perf_counter()
                res = solver.fista_solve(sigma_hat, gt.Z, cfg)
                times.append(time.perf_counter() - t0)
                iters = res.iterations
            med = float(np.median(times))
            med_runtimes.append(med)
            rows.append((p, method, med, iters))
        slope = float(
            np.polyfit(np.log(np.asarray(args["ps"], dtype=float)),
                       np.log(np.asarray(med_runtimes)), 1)[0]
        )
        slopes[method] = slope
        print(f"slope {method} {slope:.4f}")

    out = Path(args["out"])
    lines = ["p,method,median_runtime_s,iterations"]
    for p, method, med, iters in rows:
        lines.append(f"{p},{method},{repr(med)},{iters}")
    _atomic_write_text(Path(f"{out}.bench.csv"), "\n".join(lines) + "\n")
    _write_manifest(out, "bench", {**args, "slopes": slopes}, args["seed"])


def cmd_replay(args: dict) -> None:
    manifest = json.loads(Path(args["manifest"]).read_text(encoding="utf-8"))
    command = manifest["command"]
    if command not in _DISPATCH:
        raise FairGlassoError(f"manifest names unknown command {command!r}")
    stored = dict(manifest["config"])
    stored.pop("slopes", None)
    if args["out"] is not None:
        stored["out"] = args["out"]
    # JSON round-trips tuples as lists; commands accept both.
    _DISPATCH[command](stored)


_DISPATCH = {
    "estimate": cmd_estimate,
    "synth": cmd_synth,
    "eval": cmd_eval,
    "bench": cmd_bench,
}


# ---------------------------------------------------------------------------
# argument parsing

def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated float list: {text!r}")


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated int list: {text!r}")


def _add_solver_flags(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--mu1", type=float, default=0.1, help="l1 weight")
    sp.add_argument("--mu2", type=float, default=1.0, help="bias penalty weight")
    sp.add_argument("--penalty", choices=["none", "group", "node"], default="group")
    sp.add_argument("--epsilon", type=float, default=1e-4,
                    help="diagonal loading inside the log-det")
    sp.add_argument("--alpha", type=float, default=None,
                    help="squared spectral cap (default: derived from data)")
    sp.add_argument("--max-iter", dest="max_iter", type=int, default=1000)
    sp.add_argument("--tol", type=float, default=1e-6)
    sp.add_argument("--lipschitz", choices=["exact", "upper"], default="upper")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fairglasso",
        description="Estimate sparse Gaussian graphical models with balanced "
        "statistical dependencies across sensitive node groups.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("estimate", help="estimate a precision matrix from a CSV")
    sp.add_argument("observations", help="CSV with one observation per row")
    sp.add_argument("groups", help="file with one integer group label per line")
    sp.add_argument("--out", required=True, help="output path prefix")
    sp.add_argument("--header", action="store_true",
                    help="observations CSV has a header row")
    sp.add_argument("--center", action=argparse.BooleanOptionalAction, default=True,
                    help="subtract column means before the covariance")
    sp.add_argument("--unbiased-cov", dest="unbiased_cov", action="store_true",
                    help="divide by n-1 instead of n")
    sp.add_argument("--seed", type=int, default=0)
    _add_solver_flags(sp)

    sp = sub.add_parser("synth", help="run a synthetic benchmark sweep")
    sp.add_argument("--scenario", choices=["bias", "dim", "sample"], required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--p", type=int, default=50)
    sp.add_argument("--g", type=int, default=2)
    sp.add_argument("--n", type=int, default=1000)
    sp.add_argument("--avg-degree", dest="avg_degree", type=float, default=10.0)
    sp.add_argument("--betas", type=_float_list, default=[0.0, 0.25, 0.5])
    sp.add_argument("--ps", type=_int_list, default=[30, 50])
    sp.add_argument("--ns", type=_int_list, default=[500, 2000])
    sp.add_argument("--graph", choices=["er", "karate"], default="er")
    sp.add_argument("--methods", type=lambda s: s.upper().split(","),
                    default=["GL", "FGL", "NFGL", "RWGL"])
    sp.add_argument("--mu1", type=float, default=0.05)
    sp.add_argument("--mu2", type=_float_list, default=[10.0],
                    help="bias weight; a comma list is tuned by grid search")
    sp.add_argument("--epsilon", type=float, default=0.1)
    sp.add_argument("--tol", type=float, default=1e-5)
    sp.add_argument("--max-iter", dest="max_iter", type=int, default=1500)
    sp.add_argument("--alpha", type=float, default=None)
    sp.add_argument("--seeds", type=int, default=5)
    sp.add_argument("--base-seed", dest="base_seed", type=int, default=0)

    sp = sub.add_parser("eval", help="compute metrics for a stored estimate")
    sp.add_argument("theta", help="p x p precision CSV")
    sp.add_argument("groups")
    sp.add_argument("--theta0", default=None, help="true precision CSV (optional)")
    sp.add_argument("--sigma", default=None, help="covariance CSV (optional)")
    sp.add_argument("--threshold", type=float, default=None,
                    help="edge threshold (default 1e-6 * max off-diagonal)")
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("bench", help="time the solver across dimensions")
    sp.add_argument("--ps", type=_int_list, default=[50, 100, 200])
    sp.add_argument("--out", required=True)
    sp.add_argument("--seeds", type=int, default=3, help="timing repeats per p")
    sp.add_argument("--iters", type=int, default=30, help="iterations per solve")
    sp.add_argument("--n", type=int, default=1000)
    sp.add_argument("--g", type=int, default=2)
    sp.add_argument("--avg-degree", dest="avg_degree", type=float, default=10.0)
    sp.add_argument("--mu1", type=float, default=0.05)
    sp.add_argument("--mu2", type=float, default=1.0)
    sp.add_argument("--epsilon", type=float, default=0.1)
    sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("replay", help="re-run a command from its manifest")
    sp.add_argument("manifest")
    sp.add_argument("--out", default=None, help="override the output prefix")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    args = vars(ns)
    command = args.pop("command")
    handler = _DISPATCH.get(command, cmd_replay if command == "replay" else None)
    try:
        handler(args)
    except FairGlassoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
