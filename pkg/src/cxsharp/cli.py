"""Command-line entry point.

Usage:
    cxsharp constants --kind gaussian
    cxsharp envelope --kind exponential --umax 10 --points 1001
    cxsharp verify --seed 7 --n 1000000
    cxsharp extremal --cdf --points 5
    cxsharp extremal --sample 100 --seed 1
    cxsharp tensorize --random 100 --depth 3 --seed 2
    cxsharp tensorize --file tree.json
    cxsharp tensorize --ridge --dim 8 --n 1000000

Exit codes: 0 success, 1 a mathematical check failed, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from typing import Optional

import numpy as np

from . import comparison, tensorize, verifier
from .envelope import Kind, envelope_J, knee_function
from .extremal import ExtremalDistribution
from .numerics import DomainError, mills_ratio

SCHEMA_VERSION = 1
EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
ENVELOPE_HEADER = ["u", "envelope", "comparator", "gap"]


class UsageError(Exception):
    pass


def round_sig(x: float, digits: int) -> float:
    if x == 0 or not math.isfinite(x):
        return x
    return float(f"{x:.{digits}g}")


def _emit(args, payload: str) -> None:
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(payload)
    else:
        sys.stdout.write(payload)


def _json(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)  # RFC-4180 line endings
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _fmt(args, default: str) -> str:
    return args.format or default


# -------------------------------------------------------------------- commands


def cmd_constants(args) -> int:
    sharp = comparison.sharp_constants(args.kind)
    values = {k: round_sig(v, args.digits) for k, v in sharp.as_dict().items()}
    if _fmt(args, "json") == "csv":
        _emit(args, _csv(["name", "value"], values.items()))
    else:
        _emit(args, _json({"schema_version": SCHEMA_VERSION, "kind": sharp.kind.value, **values}))
    return EXIT_OK


def cmd_envelope(args) -> int:
    sharp = comparison.sharp_constants(args.kind)
    c = args.scale * sharp.scale
    umax = 10.0 if args.umax is None else args.umax
    points = 1001 if args.points is None else args.points
    if umax <= 0 or points < 2:
        raise UsageError("--umax must be positive and --points >= 2")
    grid = np.linspace(0.0, umax, points)
    tangency = c * sharp.quantile
    if tangency <= umax:
        grid = np.union1d(grid, [tangency])
    env_vals = np.asarray(envelope_J(sharp.sol, grid))
    comp_vals = np.asarray(comparison.comparator_stop_loss(args.kind, c, grid))
    gaps = comp_vals - env_vals
    rows = [[repr(float(u)), repr(float(e)), repr(float(g)), repr(float(d))]
            for u, e, g, d in zip(grid, env_vals, comp_vals, gaps)]
    if _fmt(args, "csv") == "csv":
        _emit(args, _csv(ENVELOPE_HEADER, rows))
    else:
        _emit(args, _json({
            "schema_version": SCHEMA_VERSION,
            "kind": sharp.kind.value,
            "scale": c,
            "rows": [dict(zip(ENVELOPE_HEADER, map(float, r))) for r in rows],
        }))
    if args.assert_dominance and float(gaps.min()) < -comparison.DOMINANCE_TOL:
        print(f"dominance fails: min gap {gaps.min()!r} at u={grid[int(gaps.argmin())]!r}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def _check(ok: bool, **details) -> dict:
    return {"status": "pass" if ok else "fail", **details}


def run_verification(kind, scale: float = 1.0, n: int = 1_000_000, seed: int = 0) -> dict:
    """The full invariant suite for one envelope; returns the summary document."""
    kind = Kind(kind)
    sharp = comparison.sharp_constants(kind)
    sol = sharp.sol
    dist = ExtremalDistribution(sol)
    checks: dict[str, dict] = {}

    if kind is Kind.SUB_GAUSSIAN:
        grid = np.linspace(1e-3, 10.0, 10_000)
        mills_ok = bool(np.all(np.asarray(mills_ratio(grid)) <= grid + 1.0 / grid))
        bounds = {
            "a_gt_sqrt2": sol.knee > math.sqrt(2.0),
            "c0_gt_sqrt2": sharp.scale > math.sqrt(2.0),
            "p0_lt_half": sol.knee_tail < 0.5,
            "z_positive": sharp.quantile > 0,
        }
        checks["crude_bounds"] = _check(all(bounds.values()) and mills_ok, mills_ratio=mills_ok, **bounds)
    else:
        identity = abs(sharp.quantile - (sol.knee - 2.0 * math.log(2.0))) <= 1e-12
        checks["crude_bounds"] = _check(
            sharp.scale > 1 and sol.knee > 2 * math.log(2.0) and identity,
            scale_gt_1=sharp.scale > 1, quantile_identity=identity,
        )
    checks["knee_equation"] = _check(
        abs(float(knee_function(sol.env, sol.knee)) - sol.half_mass) <= 1e-12,
        residual=float(knee_function(sol.env, sol.knee)) - sol.half_mass,
    )

    rep = comparison.dominance_report(kind, scale * sharp.scale)
    checks["dominance"] = _check(rep.dominated, **{k: rep.summary()[k] for k in ("scale", "min_gap", "argmin_u", "points")})
    sharp_rep = rep if scale == 1.0 else comparison.dominance_report(kind, sharp.scale)
    checks["tangency"] = _check(abs(sharp_rep.tangency_gap) < 1e-9, u=sharp_rep.tangency_u, gap=sharp_rep.tangency_gap)
    pre = comparison.monotone_ratio_preconditions(kind, sharp.scale)
    checks["monotone_ratio"] = _check(pre.pop("holds"), **pre)

    factors = (0.9, 0.99, 1.0, 1.01)
    witnesses = {str(f): comparison.sharpness_witness(kind, f * sharp.scale) for f in factors}
    signs_ok = (witnesses["0.9"] > 0 and witnesses["0.99"] > 0
                and abs(witnesses["1.0"]) <= 1e-12 and witnesses["1.01"] < 0)
    samples = dist.sample(n, seed)
    c99 = 0.99 * sharp.scale
    gap, se = verifier.hinge_gap_estimate(samples, c99, c99 * sharp.quantile, kind)
    checks["sharpness"] = _check(signs_ok and gap > 4 * se, witnesses=witnesses, mc_gap=gap, mc_stderr=se)

    t = np.linspace(0.0, 6.0, 200)
    sat = float(np.max(np.abs(np.asarray(dist.two_sided_tail(t)) - np.asarray(sol.env.s(t)))))
    checks["extremal_tail"] = _check(sat <= 1e-12, max_error=sat)
    checks["extremal_mean"] = _check(abs(dist.mean()) <= 1e-10, mean=dist.mean())
    mc = {}
    for u in (0.0, 1.0, sol.knee, 3.0):
        m, s = verifier.hinge_mean(samples, u)
        mc[repr(u)] = {"mc": m, "stderr": s, "exact": float(dist.stop_loss(u)), "ok": abs(m - float(dist.stop_loss(u))) <= 4 * s}
    checks["extremal_stop_loss_mc"] = _check(all(v["ok"] for v in mc.values()), points=mc)
    tail = verifier.check_tail_constraint(samples, sol.env)
    checks["tail_constraint"] = _check(tail.ok, exceedances=len(tail.exceedances), band=tail.band)
    ks = verifier.ks_distance(samples, dist.cdf)
    eps = verifier.dkw_epsilon(samples.size, 1e-6)
    checks["dkw"] = _check(ks <= eps, ks=ks, band=eps)

    failed = [name for name, c in checks.items() if c["status"] != "pass"]
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": kind.value,
        "scale": scale,
        "n": n,
        "seed": seed,
        "checks": checks,
        "failed": failed,
        "ok": not failed,
    }


def cmd_verify(args) -> int:
    n = 1_000_000 if args.n is None else args.n
    doc = run_verification(args.kind, args.scale, n, args.seed)
    _emit(args, _json(doc))
    if doc["failed"]:
        print("failed checks: " + ", ".join(doc["failed"]), file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def cmd_extremal(args) -> int:
    dist = ExtremalDistribution.for_kind(args.kind)
    if args.sample is not None:
        if args.sample < 0:
            raise UsageError("--sample must be >= 0")
        xs = dist.sample(args.sample, args.seed)
        if _fmt(args, "csv") == "csv":
            _emit(args, _csv(["x"], ([repr(float(x))] for x in xs)))
        else:
            _emit(args, _json({"schema_version": SCHEMA_VERSION, "kind": args.kind, "seed": args.seed,
                               "samples": xs.tolist()}))
        return EXIT_OK
    points = 101 if args.points is None else args.points
    umax = 6.0 if args.umax is None else args.umax
    if points < 2 or umax <= -dist.knee:
        raise UsageError("--points must be >= 2 and --umax must exceed -a")
    xs = np.linspace(-dist.knee, umax, points)
    fs = np.asarray(dist.cdf(xs))
    if _fmt(args, "csv") == "csv":
        _emit(args, _csv(["x", "cdf"], ([repr(float(x)), repr(float(f))] for x, f in zip(xs, fs))))
    else:
        _emit(args, _json({"schema_version": SCHEMA_VERSION, "kind": args.kind,
                           "rows": [{"x": float(x), "cdf": float(f)} for x, f in zip(xs, fs)]}))
    return EXIT_OK


def _tensorize_file(args, n_mc: int) -> tuple[dict, int]:
    try:
        with open(args.file) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read tree document: {exc}") from exc
    tree, comps = tensorize.tree_from_document(doc)
    rep = tensorize.tensorization_check(tree, comps, n_mc=n_mc, seed=args.seed)
    out = {"schema_version": SCHEMA_VERSION, "mode": "file", **rep.to_dict()}
    if not rep.hypothesis.ok:
        out["witness"] = tensorize.tree_to_document(tree, comps)
        print(f"conditional dominance fails at node {rep.hypothesis.node}", file=sys.stderr)
        return out, EXIT_FAIL
    return out, EXIT_OK if rep.holds else EXIT_FAIL


def _tensorize_random(args) -> tuple[dict, int]:
    if args.random < 1 or args.depth < 1:
        raise UsageError("--random and --depth must be >= 1")
    checked = 0
    for k in range(args.random):
        tree, comps = tensorize.random_instance(args.seed, k, args.depth)
        rep = tensorize.tensorization_check(tree, comps)
        if rep.status != "checked":
            continue
        checked += 1
        if not rep.holds:
            return {"schema_version": SCHEMA_VERSION, "mode": "random", "instances": args.random,
                    "checked": checked, "holds": False, "failing_instance": k, "report": rep.to_dict(),
                    "witness": tensorize.tree_to_document(tree, comps)}, EXIT_FAIL
    return {"schema_version": SCHEMA_VERSION, "mode": "random", "instances": args.random,
            "depth": args.depth, "seed": args.seed, "checked": checked, "holds": True}, EXIT_OK


def _tensorize_ridge(args, n: int) -> tuple[dict, int]:
    if args.dim < 1:
        raise UsageError("--dim must be >= 1")
    v = tensorize.unit_direction(args.dim, args.seed)
    reports = [tensorize.ridge_mc_check(v, f, n, args.seed) for f in tensorize.ridge_catalog(v, args.seed)]
    var = ExtremalDistribution.for_kind(Kind.SUB_GAUSSIAN).variance()
    c2 = comparison.compute_gaussian_comparison().scale_squared
    ok = all(r.holds for r in reports) and var <= c2
    return {"schema_version": SCHEMA_VERSION, "mode": "ridge", "dim": args.dim, "n": n, "seed": args.seed,
            "variance": var, "c0_squared": c2, "results": [r.to_dict() for r in reports],
            "holds": ok}, EXIT_OK if ok else EXIT_FAIL


def cmd_tensorize(args) -> int:
    modes = [args.file is not None, args.random is not None, args.ridge]
    if sum(modes) != 1:
        raise UsageError("choose exactly one of --file, --random, --ridge")
    if args.file is not None:
        out, code = _tensorize_file(args, 200_000 if args.n is None else args.n)
    elif args.random is not None:
        out, code = _tensorize_random(args)
    else:
        out, code = _tensorize_ridge(args, 1_000_000 if args.n is None else args.n)
    _emit(args, _json(out))
    return code


# ---------------------------------------------------------------------- parser


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def _digits(text: str) -> int:
    value = int(text)
    if not 1 <= value <= 15:
        raise argparse.ArgumentTypeError("digits must lie in [1, 15]")
    return value


def _seed(text: str) -> int:
    value = int(text)
    if not -(1 << 63) <= value < (1 << 64):
        raise argparse.ArgumentTypeError("seed must fit in 64 bits")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--kind", choices=[k.value for k in Kind], default=Kind.SUB_GAUSSIAN.value)
    common.add_argument("--digits", type=_digits, default=9)
    common.add_argument("--umax", type=float)
    common.add_argument("--points", type=_positive_int)
    common.add_argument("--n", type=_positive_int)
    common.add_argument("--seed", type=_seed, default=0)
    common.add_argument("--format", choices=["json", "csv"])
    common.add_argument("--out")
    common.add_argument("--scale", type=float, default=1.0, help="comparator scale multiplier")

    parser = argparse.ArgumentParser(prog="cxsharp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("constants", parents=[common], help="sharp comparison constants as JSON")
    env = sub.add_parser("envelope", parents=[common], help="stop-loss envelope vs comparator table")
    env.add_argument("--assert-dominance", action="store_true")
    sub.add_parser("verify", parents=[common], help="run the invariant suite")
    ext = sub.add_parser("extremal", parents=[common], help="extremal CDF table or samples")
    group = ext.add_mutually_exclusive_group()
    group.add_argument("--cdf", action="store_true")
    group.add_argument("--sample", type=int)
    ten = sub.add_parser("tensorize", parents=[common], help="multivariate domination checks")
    ten.add_argument("--file")
    ten.add_argument("--random", type=int)
    ten.add_argument("--depth", type=int, default=3)
    ten.add_argument("--ridge", action="store_true")
    ten.add_argument("--dim", type=int, default=8)
    return parser


COMMANDS = {
    "constants": cmd_constants,
    "envelope": cmd_envelope,
    "verify": cmd_verify,
    "extremal": cmd_extremal,
    "tensorize": cmd_tensorize,
}


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not (math.isfinite(args.scale) and args.scale > 0):
        parser.error("--scale must be positive")
    args.seed &= (1 << 64) - 1
    try:
        return COMMANDS[args.command](args)
    except (UsageError, tensorize.TreeError, DomainError) as exc:
        print(f"cxsharp: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
