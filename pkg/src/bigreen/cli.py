"""Reproducible scenario runner.

Commands: kernel, solve, verify-estimate, verify-positivity, nehari, blowup,
duffin, convergence.  Parameters come from flags or from a line-oriented
``key = value`` config file (`#` comments); flags override file values.
Every run writes a JSON report (schema 1) whose payload is byte-identical
for identical configs, wall clock aside.  Exit status: 0 pass, 1 violations
found, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import time

import numpy as np
import scipy

from . import __version__, analysis, geometry, kernels, solver

SCHEMA = 1

COMMANDS = ("kernel", "solve", "verify-estimate", "verify-positivity",
            "nehari", "blowup", "duffin", "convergence")


def _point(text: str) -> tuple:
    try:
        vals = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad point {text!r}") from None
    if len(vals) < 2:
        raise argparse.ArgumentTypeError(f"point needs >= 2 coordinates: {text!r}")
    return vals


def _float_list(text: str) -> list:
    return [float(v) for v in text.split(",")]


def load_config(path: str) -> dict:
    """Parse `key = value` lines; '#' starts a comment, strings unquoted."""
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
            key, _, value = line.partition("=")
            out[key.strip().replace("_", "-")] = value.strip()
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="bigreen",
        description="Biharmonic Green function toolkit: kernels, solver, estimate checks.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="key = value config file; flags override it")
        sp.add_argument("--out", help="write the JSON report here")
        sp.add_argument("--csv", help="write the per-sample CSV dump here")
        sp.add_argument("--seed", type=int, default=42, help="sampling seed (default 42)")

    sp = sub.add_parser("kernel", help="evaluate one closed-form kernel value")
    common(sp)
    sp.add_argument("--n", type=int, default=2, help="dimension (default 2)")
    sp.add_argument("--geometry", default="halfspace",
                    choices=["halfspace", "ball", "fundamental", "comparison"])
    sp.add_argument("--xi", type=_point, help="first point, e.g. '-1,0'")
    sp.add_argument("--eta", type=_point, help="second point")
    sp.add_argument("--radius", type=float, default=1.0, help="ball radius (default 1)")
    sp.add_argument("--r", type=float, help="radial / pair distance argument")
    sp.add_argument("--dx", type=float, help="boundary distance of x (comparison)")
    sp.add_argument("--dy", type=float, help="boundary distance of y (comparison)")

    sp = sub.add_parser("solve", help="one Green column on a grid, CSV exportable")
    common(sp)
    sp.add_argument("--domain", default="disk:1", help="disk:R ellipse:a,b limacon:a,b rect:w,h")
    sp.add_argument("--h", type=float, default=1 / 32, help="grid spacing (default 1/32)")
    sp.add_argument("--source", type=_point, required=True, help="source point y")
    sp.add_argument("--eval", type=_point, action="append", default=None,
                    help="evaluation point (repeatable)")
    sp.add_argument("--tol", type=float, default=solver.DEFAULT_TOL)

    sp = sub.add_parser("verify-estimate", help="fit the two-sided band constants")
    common(sp)
    sp.add_argument("--domain", default="disk:1")
    sp.add_argument("--n", type=int, default=2)
    sp.add_argument("--h", type=float, default=1 / 64,
                    help="grid spacing for solver-backed sampling")
    sp.add_argument("--pairs", type=int, default=5000)
    sp.add_argument("--epsilon", type=float, default=0.01, help="c1 margin (default 0.01)")
    sp.add_argument("--source", default="auto", choices=["auto", "exact", "solver"],
                    help="Green values from the exact disk kernel or the FD solver")
    sp.add_argument("--strategy", default="boundary-stratified",
                    choices=list(geometry.SAMPLING_STRATEGIES))
    sp.add_argument("--band-csv", help="write band-plot data here")
    sp.add_argument("--band-axis", default="pair-distance",
                    choices=["pair-distance", "boundary-distance"])

    sp = sub.add_parser("verify-positivity", help="positivity radius and negative-part bounds")
    common(sp)
    sp.add_argument("--domain", default="disk:1")
    sp.add_argument("--n", type=int, default=2)
    sp.add_argument("--h", type=float, default=1 / 64)
    sp.add_argument("--pairs", type=int, default=5000)
    sp.add_argument("--epsilon", type=float, default=0.01)
    sp.add_argument("--source", default="auto", choices=["auto", "exact", "solver"])
    sp.add_argument("--strategy", default="boundary-stratified",
                    choices=list(geometry.SAMPLING_STRATEGIES))
    sp.add_argument("--bound-c", type=float, default=None,
                    help="constant for the negative-part bounds (default: fitted c1)")

    sp = sub.add_parser("nehari", help="near-diagonal lower bound on the unit ball")
    common(sp)
    sp.add_argument("--n", type=int, default=3)
    sp.add_argument("--delta", type=float, default=0.5)
    sp.add_argument("--pairs", type=int, default=10000)
    sp.add_argument("--domain", default=None,
                    help="planar domain for the n=2 solver-backed path")
    sp.add_argument("--h", type=float, default=1 / 64)

    sp = sub.add_parser("blowup", help="boundary rescaling toward the half-space kernel")
    common(sp)
    sp.add_argument("--domain", default="disk:1")
    sp.add_argument("--x0", type=_point, default=(1.0, 0.0), help="boundary point")
    sp.add_argument("--regime", default="A", choices=["A", "B"])
    sp.add_argument("--steps", type=int, default=4)
    sp.add_argument("--xi", type=_point, default=(-1.0, 0.0))
    sp.add_argument("--eta", type=_point, default=(-2.0, 0.0))
    sp.add_argument("--s0", type=float, default=0.64, help="initial zoom scale")
    sp.add_argument("--nodes-per-scale", type=int, default=8)
    sp.add_argument("--budget", type=int, default=1_000_000, help="grid node budget")

    sp = sub.add_parser("duffin", help="reflection extension residual under refinement")
    common(sp)
    sp.add_argument("--x0", type=_point, default=(-1.0, 0.0),
                    help="half-plane source of the kernel slice")
    sp.add_argument("--h0", type=float, default=0.08, help="coarsest spacing")
    sp.add_argument("--grids", type=int, default=3, help="number of halvings + 1")
    sp.add_argument("--depth", type=float, default=1.0)
    sp.add_argument("--height", type=float, default=0.3)
    sp.add_argument("--band", type=float, default=0.2, help="residual band half-width")

    sp = sub.add_parser("convergence", help="grid convergence against kernel or Richardson")
    common(sp)
    sp.add_argument("--domain", default="disk:1")
    sp.add_argument("--h-list", type=_float_list, default=[1 / 16, 1 / 32, 1 / 64])
    sp.add_argument("--pairs", type=int, default=4)
    sp.add_argument("--min-d", type=float, default=None,
                    help="pair clearance from the boundary (default 4*max h)")
    sp.add_argument("--min-r", type=float, default=None)

    return p


# ---------------------------------------------------------------------------
# report plumbing

def _checksum(*arrays) -> str:
    digest = hashlib.sha256()
    for a in arrays:
        digest.update(np.ascontiguousarray(np.asarray(a, dtype=np.float64)).tobytes())
    return digest.hexdigest()


def _sample_record(s, c1=0.0):
    ratio = (s.green + c1 * (s.pair.dx * s.pair.dy) ** 2) / s.bound
    return {
        "x1": s.pair.x[0], "x2": s.pair.x[1],
        "y1": s.pair.y[0], "y2": s.pair.y[1],
        "dx": s.pair.dx, "dy": s.pair.dy, "r": s.pair.r,
        "G": s.green, "H": s.bound, "ratio": ratio,
    }


def write_sample_csv(samples, path, c1=0.0):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x1", "x2", "y1", "y2", "dx", "dy", "r", "G", "H", "ratio"])
        for s in samples:
            rec = _sample_record(s, c1)
            w.writerow([repr(rec[k]) for k in
                        ("x1", "x2", "y1", "y2", "dx", "dy", "r", "G", "H", "ratio")])


def emit_band_data(report: dict, axis: str, path):
    """Band-plot CSV from a verify-estimate report: abscissa, G, band edges."""
    if report.get("command") != "verify-estimate":
        raise ValueError("emit_band_data needs a verify-estimate report")
    res = report["results"]
    c1, c2 = res["c1"], res["c2"]
    rows = []
    for rec in res["samples"]:
        absc = rec["r"] if axis == "pair-distance" else min(rec["dx"], rec["dy"])
        dd = (rec["dx"] * rec["dy"]) ** 2
        rows.append((absc, rec["G"], rec["H"] / c2 - c1 * dd, rec["H"] * c2 - c1 * dd))
    rows.sort(key=lambda t: t[0])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["abscissa", "G", "band_lower", "band_upper"])
        for row in rows:
            w.writerow([repr(v) for v in row])
    return rows


def _make_report(command, config, results, checksum, t0):
    return {
        "schema": SCHEMA,
        "command": command,
        "config": config,
        "results": results,
        "versions": {
            "bigreen": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": ".".join(map(str, sys.version_info[:3])),
        },
        "sample_checksum": checksum,
        "wall_clock_s": time.perf_counter() - t0,
    }


def _config_echo(args, skip=("config", "out", "csv", "band_csv")):
    cfg = {}
    for k, v in sorted(vars(args).items()):
        if k in ("command",) or k in skip or v is None:
            continue
        cfg[k] = list(v) if isinstance(v, tuple) else v
    return cfg


def _collect_samples(args, dom):
    """Green samples for the verify commands: exact disk kernel or solver."""
    source = args.source
    if source == "auto":
        source = "exact" if isinstance(dom, geometry.Disk) and args.n == 2 else "solver"
    if args.n != 2:
        raise ValueError("verify commands run in the plane; use `nehari` for n >= 3")
    if source == "exact":
        if not isinstance(dom, geometry.Disk):
            raise ValueError("exact sampling needs a disk domain")
        samples = analysis.exact_disk_samples(dom.radius, args.pairs, args.seed,
                                              args.strategy, center=tuple(dom.center))
    else:
        samples = solver.green_samples(dom, args.h, args.pairs, args.seed)
    return source, samples


# ---------------------------------------------------------------------------
# command bodies (each returns (results dict, checksum, violations bool))

def _run_kernel(args):
    n = args.n
    if args.geometry == "halfspace":
        if args.xi is None or args.eta is None:
            raise ValueError("halfspace needs --xi and --eta")
        value = float(kernels.halfspace_green(n, args.xi, args.eta))
    elif args.geometry == "ball":
        if args.xi is None or args.eta is None:
            raise ValueError("ball needs --xi and --eta")
        value = float(kernels.ball_green(n, args.xi, args.eta, args.radius))
    elif args.geometry == "fundamental":
        if args.r is None:
            raise ValueError("fundamental needs --r")
        value = float(kernels.fundamental_solution(n, args.r))
    else:
        if args.dx is None or args.dy is None or args.r is None:
            raise ValueError("comparison needs --dx, --dy and --r")
        value = float(kernels.comparison_kernel(n, args.dx, args.dy, args.r))
    print(repr(value))
    return {"value": value, "geometry": args.geometry, "n": n}, _checksum([value]), False


def _run_solve(args):
    dom = geometry.parse_domain(args.domain)
    field = solver.discrete_green(dom, args.h, args.source, tol=args.tol)
    results = {
        "domain": dom.tag(), "h": args.h, "source": list(args.source),
        "n_interior": field.mask.n_interior,
    }
    if args.eval:
        results["values"] = [
            {"x": list(x), "value": solver.green_value(field, x)} for x in args.eval]
    if args.csv:
        solver.write_column_csv(field, args.csv)
        results["csv"] = True
    print(f"green column on {dom.tag()} h={args.h:g}: "
          f"{field.mask.n_interior} interior nodes")
    return results, _checksum(field.values), False


def _run_verify_estimate(args):
    dom = geometry.parse_domain(args.domain)
    source, samples = _collect_samples(args, dom)
    band = analysis.estimate_constants(
        samples, epsilon=args.epsilon, domain=dom.tag(), seed=args.seed,
        grid_h=None if source == "exact" else args.h)
    bad = analysis.band_violations(samples, band)
    records = [_sample_record(s, band.c1) for s in samples]
    results = {
        "domain": dom.tag(), "n": args.n, "source": source,
        "h": None if source == "exact" else args.h,
        "seed": args.seed, "pairs": len(samples),
        "c1": band.c1, "c2": band.c2, "epsilon": band.epsilon,
        "violations": bad,
        "samples": records,
        "smooth_domain": dom.smooth,
    }
    if args.csv:
        write_sample_csv(samples, args.csv, band.c1)
    checksum = _checksum([r["G"] for r in records], [r["H"] for r in records])
    print(f"band on {dom.tag()}: c1={band.c1:.6g} c2={band.c2:.6g} "
          f"violations={len(bad)}/{len(samples)}")
    return results, checksum, bool(bad)


def _run_verify_positivity(args):
    dom = geometry.parse_domain(args.domain)
    source, samples = _collect_samples(args, dom)
    band = analysis.estimate_constants(
        samples, epsilon=args.epsilon, domain=dom.tag(), seed=args.seed)
    c = band.c1 if args.bound_c is None else args.bound_c
    r_pos = analysis.positivity_radius(samples, dom.diameter)
    rep = analysis.negative_part_report(samples, c)
    results = {
        "domain": dom.tag(), "n": args.n, "source": source,
        "h": None if source == "exact" else args.h,
        "seed": args.seed, "pairs": len(samples),
        "r_positivity": r_pos,
        "diameter": dom.diameter,
        "no_counterexample": not rep.negatives,
        "bound_c": c,
        "n_negative": len(rep.negatives),
        "max_negative": rep.max_negative,
        "max_positive": rep.max_positive,
        "worst_product_ratio": rep.worst_product_ratio,
        "worst_scaled_ratio": rep.worst_scaled_ratio,
        "violations": [_sample_record(s, band.c1) for s in rep.violations],
        "negatives": [_sample_record(s, band.c1) for s in rep.negatives],
        "smooth_domain": dom.smooth,
    }
    if args.csv:
        write_sample_csv(samples, args.csv, band.c1)
    checksum = _checksum([s.green for s in samples])
    print(f"positivity on {dom.tag()}: r={r_pos:.6g} negatives={len(rep.negatives)} "
          f"violations={len(rep.violations)}")
    return results, checksum, not rep.ok


def _run_nehari(args):
    if args.n == 2 and args.domain:
        dom = geometry.parse_domain(args.domain)
        samples = solver.green_samples(dom, args.h, args.pairs, args.seed)
        region = analysis.RegionSamples.from_green_samples(samples)
        tag = dom.tag()
    else:
        region = analysis.ball_pair_samples(args.n, args.pairs, args.seed, args.delta)
        tag = f"ball^{args.n}:1"
    res = analysis.nehari_region_check(args.n, args.delta, region)
    results = {
        "domain": tag, "n": args.n, "delta": args.delta, "seed": args.seed,
        "pairs": args.pairs, "in_region": res.n_region,
        "c3": res.c3, "violations": list(res.violation_indices),
    }
    checksum = _checksum(region.green)
    print(f"nehari n={args.n} delta={args.delta:g}: c3={res.c3:.6g} "
          f"region={res.n_region} violations={res.n_violations}")
    return results, checksum, res.n_violations > 0


def _run_blowup(args):
    dom = geometry.parse_domain(args.domain)
    seq = analysis.blowup_sequence(
        dom, args.x0, regime=args.regime, steps=args.steps,
        xi=args.xi, eta=args.eta, s0=args.s0,
        nodes_per_scale=args.nodes_per_scale, node_budget=args.budget)
    steps = [{
        "k": st.k, "scale": st.scale, "h": st.h,
        "x": list(st.x), "y": list(st.y),
        "Gk": st.gk, "G_halfspace": st.g_halfspace,
        "abs_error": st.abs_error, "growth_diag": st.growth_diag,
    } for st in seq]
    violation = False
    if len(seq) >= 2:
        violation = seq[-1].abs_error > 0.5 * seq[0].abs_error
    results = {
        "domain": dom.tag(), "regime": args.regime,
        "xi": list(args.xi), "eta": list(args.eta), "x0": list(args.x0),
        "target": seq[0].g_halfspace if len(seq) else None,
        "steps": steps, "truncated": seq.truncated,
        "first_error": seq[0].abs_error if len(seq) else None,
        "final_error": seq[-1].abs_error if len(seq) else None,
    }
    checksum = _checksum([st.gk for st in seq] if len(seq) else [0.0])
    if len(seq):
        print(f"blowup {args.regime} on {dom.tag()}: error "
              f"{seq[0].abs_error:.4g} -> {seq[-1].abs_error:.4g} over {len(seq)} steps")
    else:
        print("blowup: no steps run")
    return results, checksum, violation


def _run_duffin(args):
    h_list = [args.h0 / 2**i for i in range(args.grids)]

    def make(h):
        return analysis.halfspace_slice_field(
            args.x0, h, depth=args.depth, height=args.height)

    rows = analysis.duffin_refinement_study(make, h_list, band_halfwidth=args.band)
    decreasing = all(b < a for (_, a), (_, b) in zip(rows, rows[1:]))
    ratios = [a / b for (_, a), (_, b) in zip(rows, rows[1:])]
    results = {
        "x0": list(args.x0), "rows": [{"h": h, "residual": r} for h, r in rows],
        "ratios": ratios, "decreasing": decreasing,
    }
    checksum = _checksum([r for _, r in rows])
    print("duffin residuals: " + " -> ".join(f"{r:.3e}" for _, r in rows))
    return results, checksum, not decreasing


def _run_convergence(args):
    dom = geometry.parse_domain(args.domain)
    h_max = max(args.h_list)
    min_d = args.min_d if args.min_d is not None else 4.0 * h_max
    min_r = args.min_r if args.min_r is not None else 4.0 * h_max
    pairs = []
    i = 0
    attempts = 0
    while len(pairs) < args.pairs and attempts < 200 * args.pairs:
        cand = geometry.sample_pairs(dom, 1, args.seed + i, "uniform")[0]
        i += 1
        attempts += 1
        if cand.dx >= min_d and cand.dy >= min_d and cand.r >= min_r:
            pairs.append(cand)
    if len(pairs) < args.pairs:
        raise ValueError("could not find enough well-separated pairs; relax --min-d/--min-r")
    study = solver.convergence_study(dom, pairs, args.h_list)
    rows = [{"h": r.h, "max_rel_err": r.max_rel_err, "order": r.order} for r in study.rows]
    errs = [r.max_rel_err for r in study.rows]
    decreasing = all(b < a for a, b in zip(errs, errs[1:]))
    results = {
        "domain": dom.tag(), "mode": study.mode, "rows": rows,
        "overall_order": study.overall_order, "decreasing": decreasing,
        "min_d": min_d, "min_r": min_r,
        "pairs": [{"x": list(p.x), "y": list(p.y)} for p in pairs],
    }
    checksum = _checksum(errs)
    print(f"convergence on {dom.tag()} ({study.mode}): "
          + " -> ".join(f"{e:.3e}" for e in errs)
          + f", order ~ {study.overall_order:.2f}")
    return results, checksum, not decreasing


_RUNNERS = {
    "kernel": _run_kernel,
    "solve": _run_solve,
    "verify-estimate": _run_verify_estimate,
    "verify-positivity": _run_verify_positivity,
    "nehari": _run_nehari,
    "blowup": _run_blowup,
    "duffin": _run_duffin,
    "convergence": _run_convergence,
}


_POINT_FLAGS = ("--xi", "--eta", "--x0", "--source", "--eval")


def _fuse_point_flags(argv):
    """Join point flags with values like '-1,0' that argparse would read as
    options: ['--xi', '-1,0'] becomes ['--xi=-1,0']."""
    out = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        if tok in _POINT_FLAGS and i + 1 < len(argv) and argv[i + 1].startswith("-"):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
        else:
            out.append(tok)
            i += 1
    return out


def _merge_config(argv):
    """Fold --config file values into argv; explicit flags win."""
    argv = list(argv)
    path = None
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            path = argv[i + 1]
        elif tok.startswith("--config="):
            path = tok.split("=", 1)[1]
    if path is None:
        return argv
    cfg = load_config(path)
    command = cfg.pop("command", None)
    tokens = []
    for k, v in cfg.items():
        tokens.append(f"--{k}={v}")
    if argv and not argv[0].startswith("-"):
        return [argv[0]] + tokens + argv[1:]
    if command is None:
        raise ValueError("config file must set `command` when none is given on the line")
    return [command] + tokens + argv


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        argv = _merge_config(_fuse_point_flags(argv))
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    t0 = time.perf_counter()
    try:
        results, checksum, violations = _RUNNERS[args.command](args)
    except (ValueError, solver.SolverError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    report = _make_report(args.command, _config_echo(args), results, checksum, t0)
    if getattr(args, "out", None):
        with open(args.out, "w") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
    if getattr(args, "band_csv", None):
        emit_band_data(report, args.band_axis, args.band_csv)
    return 1 if violations else 0


if __name__ == "__main__":
    sys.exit(main())
