"""Command-line driver.

Commands: ``analyze``, ``maximal``, ``rbmo``, ``jn``, ``generate``.  Exit
codes: 0 when every check passes, 1 when a mathematical check fails, 2 for
usage and configuration errors.  A ``--config`` JSON file may supply any
option under its flag name (``"rho"``, ``"lambda"``, ...); flags given on the
command line win.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .covering import doubling_diagnostics
from .dominating import (
    BallMeasure,
    DoublingParams,
    HypothesisError,
    PowerLaw,
    default_params,
    fit_power_law,
    kernel_log_bound,
    minimal_envelope,
    verify_upper_doubling,
)
from .generate import generate_space, parse_generator
from .johnnirenberg import lp_oscillation, lp_oscillation_bound, verify_jn
from .operators import maximal_function, weak_type_check
from .rbmo import (
    SCALE_CAP,
    build_problem,
    check_section5,
    constraint_triplets,
    kernel_matrix,
    solve_rbmo,
)
from .space import Ball, SpaceError, canonical_balls, load_space

log = logging.getLogger("rbmokit")

EXIT_OK, EXIT_CHECK, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


# --- parsing helpers -------------------------------------------------------

def parse_lambda(text: str, space):
    """``ball_measure``, ``power_law(C,d)``, ``fit_power_law(d)`` or ``envelope(C)``."""
    try:
        name, args = parse_generator(text)
    except SpaceError as exc:
        raise UsageError(str(exc)) from None
    try:
        if name == "ball_measure" and not args:
            return BallMeasure(space)
        if name == "power_law" and len(args) == 2:
            return PowerLaw(float(args[0]), float(args[1]), space.min_positive_distance)
        if name == "fit_power_law" and len(args) == 1:
            return fit_power_law(space, float(args[0]))
        if name == "envelope" and len(args) == 1:
            return minimal_envelope(space, float(args[0]))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    raise UsageError(f"cannot parse dominating function {text!r}")


def parse_function(text, space, seed: int) -> np.ndarray:
    """Values list ``1,0,0``, a JSON file, or ``spike(i)``, ``const(c)``, ``sawtooth(p)``, ``random``."""
    n = space.n
    if text is None:
        text = "random"
    p = Path(text)
    if p.suffix == ".json" and p.exists():
        vals = json.loads(p.read_text())
        vals = vals["f"] if isinstance(vals, dict) else vals
        f = np.asarray(vals, dtype=float)
    elif "," in text or _is_number(text):
        f = np.array([float(t) for t in text.split(",")])
    else:
        name, args = parse_generator(text)
        if name == "spike":
            f = np.zeros(n)
            f[space.index(int(args[0]) if args else n // 2)] = 1.0
        elif name == "const":
            f = np.full(n, float(args[0]) if args else 1.0)
        elif name == "sawtooth":
            period = int(args[0]) if args else 4
            f = (np.arange(n) % period).astype(float)
        elif name == "random":
            f = np.random.default_rng(seed).normal(size=n)
        else:
            raise UsageError(f"unknown function spec {text!r}")
    if f.shape != (n,):
        raise UsageError(f"function has {f.size} values, space has {n} points")
    return f


def _is_number(t: str) -> bool:
    try:
        float(t)
        return True
    except ValueError:
        return False


def parse_t_grid(text: str):
    try:
        lo, hi, steps = text.split(":")
        lo, hi, steps = float(lo), float(hi), int(steps)
    except ValueError:
        raise UsageError(f"--t-grid expects min:max:steps, got {text!r}") from None
    if not (0 < lo <= hi and steps >= 1):
        raise UsageError("--t-grid needs 0 < min <= max and steps >= 1")
    return np.linspace(lo, hi, steps).tolist()


def _json_default(o):
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Ball):
        return {"center": o.center, "radius": o.radius}
    raise TypeError(f"not serialisable: {type(o).__name__}")


def _finite(o):
    # JSON has no infinities; encode them as strings
    if isinstance(o, float) and not math.isfinite(o):
        return "inf" if o > 0 else ("-inf" if o < 0 else "nan")
    if isinstance(o, dict):
        return {k: _finite(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_finite(v) for v in o]
    return o


def write_json(path: Path, doc) -> None:
    doc = json.loads(json.dumps(doc, default=_json_default))
    path.write_text(json.dumps(_finite(doc), indent=2, sort_keys=True) + "\n")


def write_csv(path: Path, header, rows) -> None:
    with path.open("w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        wr.writerows(rows)


# --- shared setup ----------------------------------------------------------

def _load(args):
    if args.space and args.generate:
        raise UsageError("give either --space or --generate, not both")
    try:
        if args.space:
            if not Path(args.space).exists():
                raise UsageError(f"space file not found: {args.space}")
            return load_space(Path(args.space))
        if args.generate:
            return generate_space(args.generate)
    except SpaceError as exc:
        raise UsageError(str(exc)) from None
    raise UsageError("a space is required: --space FILE or --generate 'name(args)'")


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _params(args, rho, lam, n_exponent) -> DoublingParams:
    base = default_params(rho, lam.C_lambda, n_exponent)
    alpha = args.alpha if args.alpha is not None else base.alpha
    beta = args.beta if args.beta is not None else base.beta
    try:
        return DoublingParams(alpha, beta)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _check_rho(args):
    if args.rho is not None and not args.rho > 1:
        raise UsageError(f"--rho must exceed 1, got {args.rho}")
    if args.sigma is not None:
        if not args.sigma > 1:
            raise UsageError(f"--sigma must exceed 1, got {args.sigma}")
        if args.rho is not None and not args.rho > args.sigma:
            raise UsageError("--rho must exceed --sigma")


def _fail(name, detail=None) -> int:
    msg = f"FAIL: {name}"
    if detail is not None:
        msg += f" {json.dumps(detail, default=_json_default)}"
    print(msg, file=sys.stderr)
    return EXIT_CHECK


# --- commands --------------------------------------------------------------

def cmd_generate(args) -> int:
    space = _load(args)
    out = _outdir(args)
    write_json(out / "space.json", space.to_document())
    print(out / "space.json")
    return EXIT_OK


def cmd_analyze(args) -> int:
    space = _load(args)
    lam = parse_lambda(args.lam or "ball_measure", space)
    out = _outdir(args)
    diag = doubling_diagnostics(space)
    upper = verify_upper_doubling(space, lam)
    fam = canonical_balls(space)
    # kernel bound sweep: every inclusion pair under the scale cap, concentric pairs beyond it
    worst, failures, count = 0.0, [], 0
    balls = fam.balls
    if space.n <= SCALE_CAP or args.force:
        pb = build_problem(space, lam, np.zeros(space.n), 2.0, force=True)
        pairs = [(pb.balls[i], pb.balls[j], k) for (i, j), k in zip(pb.pairs, pb.K)]
        scope = "all_inclusion_pairs"
    else:
        pairs = []
        for c in range(space.n):
            own = [b for b in balls if b.center == c]
            K = kernel_matrix(space, lam, own, space.dist[[b.center for b in own]] < np.array([b.radius for b in own])[:, None])
            for i, B in enumerate(own):
                for j, B1 in enumerate(own):
                    if B.radius < B1.radius:
                        pairs.append((B, B1, K[i, j]))
        scope = "concentric_pairs"
    for B, B1, k in pairs:
        count += 1
        rhs = kernel_log_bound(lam, B, B1)
        if rhs > 0:
            worst = max(worst, (k - 1) / rhs)
        if k - 1 > rhs and len(failures) < 20:
            failures.append({"B": B, "B1": B1, "lhs": k - 1, "rhs": rhs})
    kernel_doc = {"passed": not failures, "scope": scope, "pairs": count, "worst_ratio": worst, "failures": failures}
    report = {
        "space": {"name": space.name, "points": space.n, "mass": space.total_mass, "diameter": space.diameter},
        "lambda": lam.to_json() if not hasattr(lam, "breaks") else {"variant": "envelope", "C_lambda": lam.C_lambda},
        "doubling": diag.to_json(space),
        "upper_doubling": upper.to_json(),
        "kernel_log_bound": kernel_doc,
        "passed": upper.passed and not failures,
    }
    write_json(out / "analyze.json", report)
    write_csv(out / "canonical_balls.csv", ["center", "radius", "members", "measure"], fam.to_rows())
    print(f"N_bound={diag.N_bound} n={diag.n_exponent:.4g} C_mu={diag.C_mu:.6g} C_lambda={lam.C_lambda:.6g}")
    if not upper.passed:
        return _fail("upper_doubling", upper.first_failure())
    if failures:
        return _fail("kernel_log_bound", failures[0])
    print("PASS analyze")
    return EXIT_OK


def cmd_maximal(args) -> int:
    space = _load(args)
    f = parse_function(args.f, space, args.seed)
    out = _outdir(args)
    prof = maximal_function(space, f)
    write_csv(out / "maximal.csv", ["point", "value"], prof.rows(space))
    grid = parse_t_grid(args.t_grid) if args.t_grid else np.linspace(0.05, 1.0, 20) * max(prof.values.max(), 1e-300)
    rep = weak_type_check(space, f, grid, profile=prof)
    write_json(out / "weak_type.json", rep.to_json())
    if not rep.passed:
        return _fail("weak_type", {"ratio": rep.tightest_ratio, "t": rep.witness_t})
    print(f"PASS maximal (tightest ratio {rep.tightest_ratio:.6g})")
    return EXIT_OK


def _solve(args, space, lam, f, rho):
    try:
        pb = build_problem(space, lam, f, rho, force=args.force)
    except ValueError as exc:
        raise UsageError(f"{exc} (use --force to override)") from None
    return solve_rbmo(pb)


def cmd_rbmo(args) -> int:
    _check_rho(args)
    space = _load(args)
    lam = parse_lambda(args.lam or "ball_measure", space)
    f = parse_function(args.f, space, args.seed)
    rho = args.rho if args.rho is not None else 2.0
    out = _outdir(args)
    fam = _solve(args, space, lam, f, rho)
    doc = fam.to_json()
    doc["function"] = f.tolist()
    doc["lambda"] = {"C_lambda": lam.C_lambda}
    write_json(out / "rbmo.json", doc)
    osc, reg = fam.slacks()
    pb = fam.problem
    rows = [("oscillation", repr(pb.balls[i]), "", repr(float(s))) for i, s in enumerate(osc)]
    rows += [("regularity", repr(pb.balls[i]), repr(pb.balls[j]), repr(float(s)))
             for (i, j), s in zip(pb.pairs, reg)]
    write_csv(out / "slacks.csv", ["constraint", "ball", "ball1", "slack"], rows)
    trip, rhs = constraint_triplets(pb)
    with (out / "constraints.txt").open("w") as fh:
        fh.write("# inequality system M x <= b; x = (A, f_B..., t_{B,y}...)\n")
        fh.write(f"# rows {len(rhs)} cols {1 + pb.n_balls + int(pb.masks.sum())}\n")
        for r, c, v in trip:
            fh.write(f"{r} {c} {v!r}\n")
        fh.write("# rhs\n")
        for r, v in enumerate(rhs):
            fh.write(f"{r} {float(v)!r}\n")
    diag = doubling_diagnostics(space)
    params = _params(args, rho, lam, diag.n_exponent)
    try:
        fam_a = fam if math.isclose(params.alpha, rho) else _solve(args, space, lam, f, params.alpha)
        s5 = check_section5(space, lam, f, fam_a, params)
    except HypothesisError as exc:
        raise UsageError(str(exc)) from None
    s5["alpha"], s5["beta"] = params.alpha, params.beta
    write_json(out / "doubling_checks.json", s5)
    tol = -1e-9 * (1 + fam.A)
    print(f"A={fam.A!r} rho={rho:g} balls={pb.n_balls} pairs={pb.pair_count}")
    if fam.min_slack() < tol:
        return _fail("admissibility", {"min_slack": fam.min_slack()})
    if not s5["passed"]:
        bad = next(k for k in ("ancestor", "neighbours", "ave_vs_const") if not s5[k]["passed"])
        return _fail(f"doubling_checks.{bad}", s5[bad])
    print("PASS rbmo")
    return EXIT_OK


GNUPLOT = """# tail distribution against the fitted exponential envelope
set datafile separator ','
set key top right
set logscale y
set xlabel 't'
set ylabel 'mass'
plot '{csv}' using 1:2 every ::1 with steps title 'tail', \\
     '{csv}' using 1:3 every ::1 with lines title 'envelope'
"""


def cmd_jn(args) -> int:
    _check_rho(args)
    space = _load(args)
    lam = parse_lambda(args.lam or "ball_measure", space)
    f = parse_function(args.f, space, args.seed)
    rho = args.rho if args.rho is not None else 2.0
    if args.alpha is not None and not math.isclose(args.alpha, 5 * rho):
        raise UsageError(f"--alpha must equal 5*rho = {5 * rho:g} for the decomposition")
    out = _outdir(args)
    fam = _solve(args, space, lam, f, rho)
    diag = doubling_diagnostics(space)
    params = _params(args, rho, lam, diag.n_exponent)
    center = space.index(args.center) if args.center is not None else 0
    radius = args.radius if args.radius is not None else 2 * space.diameter + 1.0
    B0 = fam.problem.family.balls[fam.problem.family.lookup(Ball(center, radius))]
    grid = parse_t_grid(args.t_grid) if args.t_grid else np.linspace(0.0, max(np.ptp(f), 1e-300), 21)[1:].tolist()
    rep = verify_jn(space, lam, f, fam, B0, rho, params, grid)
    doc = rep.to_json(space)
    doc["lp"] = []
    if rep.L:
        for p in (1, 2, 4):
            v = lp_oscillation(space, f, fam, B0, p, rho)
            bound = lp_oscillation_bound(p, rep.L, fam.A)
            doc["lp"].append({"p": p, "value": v, "bound": bound, "passed": v <= bound})
    doc["params"] = {"alpha": params.alpha, "beta": params.beta}
    write_json(out / "jn.json", doc)
    csv_text = rep.tail_csv() if fam.A > 0 else "t,tail,envelope\n"
    (out / "tail.csv").write_text(csv_text)
    (out / "tail.gp").write_text(GNUPLOT.format(csv="tail.csv"))
    print(f"A={fam.A!r} L={rep.L!r} c_fit={doc['c_fit']} c_required={doc['c_required']}")
    if not rep.passed:
        return _fail("john_nirenberg", {"failures": doc["failures"], "L_trace": doc["L_trace"]})
    if not all(r["passed"] for r in doc["lp"]):
        return _fail("lp_oscillation", doc["lp"])
    print("PASS jn")
    return EXIT_OK


COMMANDS = {
    "analyze": cmd_analyze,
    "maximal": cmd_maximal,
    "rbmo": cmd_rbmo,
    "jn": cmd_jn,
    "generate": cmd_generate,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with option defaults")
    common.add_argument("--space", help="space document (JSON)")
    common.add_argument("--generate", help="generator spec, e.g. 'uniform_grid(16,1)'")
    common.add_argument("--lambda", dest="lam", help="ball_measure | power_law(C,d) | fit_power_law(d) | envelope(C)")
    common.add_argument("--f", help="function: values '1,0,0', JSON file, spike(i), const(c), sawtooth(p), random")
    common.add_argument("--rho", type=float)
    common.add_argument("--sigma", type=float)
    common.add_argument("--alpha", type=float)
    common.add_argument("--beta", type=float)
    common.add_argument("--t-grid", dest="t_grid", help="min:max:steps")
    common.add_argument("--center", help="center label of B0 (jn)")
    common.add_argument("--radius", type=float, help="radius of B0 (jn)")
    common.add_argument("--out", default="out")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--force", action="store_true", help="lift the point-count cap")
    common.add_argument("-v", "--verbose", action="store_true")
    p = argparse.ArgumentParser(prog="rbmokit", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return p


def _apply_config(args, argv) -> None:
    if not args.config:
        return
    path = Path(args.config)
    if not path.exists():
        raise UsageError(f"config file not found: {path}")
    try:
        conf = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"config is not valid JSON: {exc}") from None
    given = {a.split("=")[0] for a in argv if a.startswith("--")}
    for key, val in conf.items():
        dest = {"lambda": "lam", "t-grid": "t_grid"}.get(key, key.replace("-", "_"))
        flag = "--" + key.replace("_", "-")
        if not hasattr(args, dest):
            raise UsageError(f"unknown config key {key!r}")
        if flag not in given and not (key == "lambda" and "--lambda" in given):
            setattr(args, dest, val)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        _apply_config(args, argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SpaceError, HypothesisError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
