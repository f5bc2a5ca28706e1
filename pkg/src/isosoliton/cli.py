"""Command line entry point: ``isosoliton <command> [options]``.

Exit codes: 0 success, 2 verification failure, 1 usage or runtime error.
Every artifact is written atomically and gets a ``<artifact>.config.json``
echo of the parsed arguments beside it.
"""

from __future__ import annotations

import argparse
import math
import re
import sys
from pathlib import Path

import numpy as np

from . import __version__
from ._io import dumps_json, write_csv, write_json
from .bryant_builder import (
    CSV_HEADER,
    integrate_unstable,
    reconstruct_metric,
    verify_ratio_limit,
)
from .experiments import check_inequality
from .flow_engine import DIAG_HEADER, FlowNotConverged, FlowParams, GraphState, fit_decay_rate, run
from .profile import build_profile, fiber_grid
from .warp_core import (
    check_condition,
    load_model,
    make_cigar,
    make_euclidean,
    make_sphere_warp,
    save_model,
    soliton_residual,
    WarpModel,
)

BUILTINS = ("cigar", "euclidean2", "euclidean3", "sphere-warp", "bryant3", "bryant4", "bryant5", "bryant6")
EXIT_OK, EXIT_ERROR, EXIT_FAIL = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


# -- models --------------------------------------------------------------------


def resolve_model(source: str, cache_dir: str | Path) -> WarpModel:
    """Builtin name or path to a model JSON document."""
    if source == "cigar":
        return make_cigar()
    if source == "euclidean2":
        return make_euclidean(2)
    if source == "euclidean3":
        return make_euclidean(3)
    if source == "sphere-warp":
        return make_sphere_warp()
    m = re.fullmatch(r"bryant([3-6])", source)
    if m:
        path = Path(cache_dir) / f"{source}.json"
        if not path.exists():
            save_model(reconstruct_metric(integrate_unstable(int(m.group(1)))), path)
        # always use the serialised copy so cached and fresh runs agree bit for bit
        return load_model(path)
    path = Path(source)
    if path.suffix == ".json" and path.exists():
        return load_model(path)
    raise UsageError(f"unknown model {source!r}: expected one of {', '.join(BUILTINS)} or a JSON path")


_NUM = r"(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?"
_TERM = re.compile(
    rf"\s*(?P<sign>[+-])\s*(?P<coef>{_NUM})?\s*(?P<star>\*)?\s*"
    r"(?P<cos>cos\(\s*(?P<k>\d+)?\s*\*?\s*(?:θ|theta|t)\s*\))?\s*"
)


def parse_cosine_series(text: str) -> list[tuple[int, float]]:
    """Parse e.g. ``"1 + 0.1 cos(2θ) - 2e-3*cos(3*theta)"`` into sorted [(k, a_k), ...]."""
    s = text.strip()
    if not s:
        raise UsageError("empty --init expression")
    if s[0] not in "+-":
        s = "+" + s
    terms: dict[int, float] = {}
    pos = 0
    while pos < len(s):
        m = _TERM.match(s, pos)
        if m is None or m.end() == pos or not (m.group("coef") or m.group("cos")) \
                or (m.group("star") and not (m.group("coef") and m.group("cos"))):
            raise UsageError(f"malformed --init expression {text!r} near position {pos}")
        coef = float(m.group("coef")) if m.group("coef") else 1.0
        k = (int(m.group("k")) if m.group("k") else 1) if m.group("cos") else 0
        terms[k] = terms.get(k, 0.0) + (coef if m.group("sign") == "+" else -coef)
        pos = m.end()
    return sorted(terms.items())


def _series(theta, terms):
    return sum(a * np.cos(k * theta) for k, a in terms) + 0.0 * theta


# -- artifacts -----------------------------------------------------------------


def _echo(args) -> dict:
    skip = {"func"}
    return {
        "command": args.command,
        "version": __version__,
        "args": {k: v for k, v in sorted(vars(args).items()) if k not in skip},
    }


def _emit_json(path, payload, args):
    path = Path(path)
    write_json(path, payload)
    write_json(path.with_name(path.name + ".config.json"), _echo(args))
    return path


def _emit_csv(path, header, rows, args):
    path = Path(path)
    write_csv(path, header, rows)
    write_json(path.with_name(path.name + ".config.json"), _echo(args))
    return path


def _say(msg: str) -> None:
    print(msg)


# -- commands ------------------------------------------------------------------


def cmd_cigar_verify(args) -> int:
    model = make_cigar(args.s_max)
    res = soliton_residual(model, args.grid)
    cond = check_condition(model, 1.0, args.grid)
    q = cond.q_values
    decreasing = bool(np.all(np.diff(q) < 0))
    checks = {
        "soliton_residual": res.max_abs <= 1e-10,
        "q_in_unit_interval": bool(cond.q_min > 0 and cond.q_max <= 1.0),
        "q_at_tip_is_one": abs(q[0] - 1.0) <= 1e-12,
        "q_max_is_one": abs(cond.q_max - 1.0) <= 1e-12,
        "q_strictly_decreasing": decreasing,
    }
    report = {
        "model": model.name,
        "s_max": args.s_max,
        "grid": args.grid,
        "soliton_max_abs": res.max_abs,
        "condition": cond.summary(),
        "checks": checks,
        "passed": all(checks.values()),
    }
    _emit_json(args.out, report, args)
    _say(f"cigar-verify: residual {res.max_abs:.3e}, q in [{cond.q_min:.6g}, {cond.q_max:.15g}] -> "
         + ("PASS" if report["passed"] else "FAIL"))
    return EXIT_OK if report["passed"] else EXIT_FAIL


def _trajectory(args):
    return integrate_unstable(args.dim, eps0=args.eps0, tol=args.tol, x_stop=args.x_stop)


def cmd_bryant_build(args) -> int:
    traj = _trajectory(args)
    model = reconstruct_metric(traj)
    out = Path(args.out_dir)
    csv_path = _emit_csv(out / f"bryant{args.dim}_trajectory.csv", CSV_HEADER, traj.csv_rows(), args)
    model_path = out / f"bryant{args.dim}.json"
    save_model(model, model_path)
    write_json(model_path.with_name(model_path.name + ".config.json"), _echo(args))
    _say(f"bryant-build: n = {args.dim}, {traj.t.size} samples, final x = {traj.x[-1]:.6g}; "
         f"wrote {csv_path} and {model_path}")
    return EXIT_OK


def cmd_bryant_lemmas(args) -> int:
    traj = _trajectory(args)
    rep = verify_ratio_limit(traj)
    model = reconstruct_metric(traj)
    res = soliton_residual(model)
    cond = check_condition(model, 1.0)
    checks = {
        "xy_strictly_between": rep.xy_bounds_held,
        "tail_xy": abs(rep.tail_xy_gap) <= 1e-3,
        "tail_ratio": rep.tail_distance <= 5e-3,
        "strict_ratio_bound": rep.strict_bound_held,
        "ratio_derivative_identity": rep.derivative_rel_error <= 1e-2,
        "x_decreasing_y_increasing": rep.x_monotone and rep.y_monotone,
        "soliton_residual": res.max_abs <= 1e-5,
        "condition_strict": bool(cond.q_min > 0 and cond.q_max < 1),
    }
    report = {
        "n": args.dim,
        "lemmas": rep.as_dict(),
        "soliton_max_abs": res.max_abs,
        "condition": cond.summary(),
        "checks": checks,
        "passed": all(checks.values()),
    }
    out = args.out or f"bryant{args.dim}_lemmas.json"
    _emit_json(out, report, args)
    _say(f"bryant-lemmas: n = {args.dim}, tail |X/Y^2 - alpha| = {rep.tail_distance:.3e} -> "
         + ("PASS" if report["passed"] else "FAIL"))
    return EXIT_OK if report["passed"] else EXIT_FAIL


def _profile(args):
    model = resolve_model(args.model, args.cache_dir)
    top = None if args.r_max is None else min(args.r_max, model.r_hi)
    return model, build_profile(model, args.grid, r_max=top)


def cmd_profile_table(args) -> int:
    model, prof = _profile(args)
    out = Path(args.out)
    _emit_csv(out, ("r", "A", "V"), zip(prof.r_grid, prof.A_values, prof.V_values), args)
    meta = {
        "model": model.name,
        "n": model.n,
        "omega": prof.omega,
        "grid_size": int(prof.r_grid.size),
        "r_range": [float(prof.r_grid[0]), float(prof.r_grid[-1])],
        "v_range": [float(prof.V_values[0]), prof.v_max],
        "volume_origin": "S(r_lo)",
        "interpolation": "monotone cubic (PCHIP) r(V) start, safeguarded Newton on V(r) = v, then A = omega phi^(n-1)",
        "out_of_range": "error",
    }
    _emit_json(out.with_suffix(".json"), meta, args)
    _say(f"profile: wrote {out} ({prof.r_grid.size} rows)")
    return EXIT_OK


def cmd_profile_eval(args) -> int:
    model, prof = _profile(args)
    vals = [{"v": v, "xi": prof.xi(v), "r": prof.inverse_volume(v)} for v in args.v]
    payload = {"model": model.name, "values": vals}
    if args.out:
        _emit_json(args.out, payload, args)
    sys.stdout.write(dumps_json(payload))
    return EXIT_OK


def cmd_flow(args) -> int:
    model = resolve_model(args.model, args.cache_dir)
    terms = parse_cosine_series(args.init)
    theta = fiber_grid(model.n, args.nodes).theta
    state = GraphState(model, _series(theta, terms))
    params = FlowParams(cfl=args.cfl, osc_tol=args.osc_tol, max_steps=args.max_steps)
    converged = True
    try:
        final, diags = run(state, params)
    except FlowNotConverged as exc:
        final, diags, converged = exc.state, exc.diagnostics, False
    _emit_csv(args.diag_out, DIAG_HEADER, (d.row() for d in diags), args)
    v0, v1 = diags[0].volume, diags[-1].volume
    summary = {
        "model": model.name,
        "init": terms,
        "nodes": args.nodes,
        "converged": converged,
        "steps": len(diags) - 1,
        "final_time": final.time,
        "final_oscillation": final.oscillation,
        "final_mean_radius": float(final.rho.mean()),
        "volume_drift": abs(v1 - v0) / v0 if v0 > 0 else math.nan,
        "area_initial": diags[0].area,
        "area_final": diags[-1].area,
        "decay_rate": fit_decay_rate(diags) if len(diags) > 2 else None,
    }
    summary_path = args.summary or str(Path(args.diag_out).with_suffix(".json"))
    _emit_json(summary_path, summary, args)
    _say(f"flow: {summary['steps']} steps, oscillation {final.oscillation:.3e}, "
         f"volume drift {summary['volume_drift']:.3e}" + ("" if converged else " (NOT converged)"))
    return EXIT_OK if converged else EXIT_FAIL


def cmd_isocheck(args) -> int:
    model = resolve_model(args.model, args.cache_dir)
    cond = check_condition(model, 1.0)
    rep = check_inequality(model, args.samples, tol=args.tol, seed=args.seed, nodes=args.nodes)
    payload = rep.as_dict()
    payload["condition"] = cond.summary()
    _emit_json(args.report, payload, args)
    _say(f"isocheck: {model.name}, {rep.samples} graphs, min deficit {rep.min_deficit:.3e}, "
         f"{rep.violations} violations")
    return EXIT_OK if rep.passed else EXIT_FAIL


# -- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    p = _Parser(prog="isosoliton", description="Steady soliton isoperimetric laboratory.", formatter_class=fmt)
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("--cache-dir", default="isosoliton-cache", help="where tabulated builtin models are cached")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("cigar-verify", help="soliton identity and condition check for the cigar", formatter_class=fmt)
    c.add_argument("--s-max", type=float, default=6.0, help="right end of the cigar domain [0, s_max]")
    c.add_argument("--grid", type=int, default=2048, help="uniform sample count")
    c.add_argument("--out", default="cigar_verify.json", help="report path")
    c.set_defaults(func=cmd_cigar_verify)

    def bryant_opts(q):
        q.add_argument("--dim", type=int, default=3, choices=(3, 4, 5, 6), help="dimension n")
        q.add_argument("--eps0", type=float, default=1e-8, help="offset from the saddle along the unstable direction")
        q.add_argument("--tol", type=float, default=1e-10, help="integrator relative tolerance")
        q.add_argument("--x-stop", type=float, default=1e-4, help="stop once x = phi' drops to this value")

    b = sub.add_parser("bryant-build", help="integrate the unstable trajectory and tabulate the metric", formatter_class=fmt)
    bryant_opts(b)
    b.add_argument("--out-dir", default=".", help="directory for the trajectory CSV and model JSON")
    b.set_defaults(func=cmd_bryant_build)

    bl = sub.add_parser("bryant-lemmas", help="verify the xy bounds and X/Y^2 limit lemmas", formatter_class=fmt)
    bryant_opts(bl)
    bl.add_argument("--out", default=None, help="report path; when omitted, bryant<dim>_lemmas.json")
    bl.set_defaults(func=cmd_bryant_lemmas)

    pr = sub.add_parser("profile", help="isoperimetric profile table or evaluation", formatter_class=fmt)
    psub = pr.add_subparsers(dest="action", required=True, parser_class=_Parser)

    def profile_opts(q):
        q.add_argument("--model", default="cigar", help="builtin name or model JSON path")
        q.add_argument("--grid", type=int, default=2048, help="level-set table size")
        q.add_argument("--r-max", type=float, default=None, help="truncate the table; when omitted, use the model r_hi")

    pt = psub.add_parser("table", help="write r,A,V CSV and a JSON sidecar", formatter_class=fmt)
    profile_opts(pt)
    pt.add_argument("--out", default="profile.csv", help="CSV path; the sidecar gets a .json suffix")
    pt.set_defaults(func=cmd_profile_table)
    pe = psub.add_parser("eval", help="evaluate xi at given volumes", formatter_class=fmt)
    profile_opts(pe)
    pe.add_argument("--v", type=float, action="append", required=True, help="volume (repeatable)")
    pe.add_argument("--out", default=None, help="optional JSON copy of the printed values")
    pe.set_defaults(func=cmd_profile_eval)

    f = sub.add_parser("flow", help="run the volume-preserving flow from a cosine series", formatter_class=fmt)
    f.add_argument("--model", default="cigar", help="builtin name or model JSON path")
    f.add_argument("--init", default="1 + 0.1 cos(2θ)", help="initial graph as a finite cosine series")
    f.add_argument("--nodes", type=int, default=256, help="fiber grid nodes (poles included for n >= 3)")
    f.add_argument("--cfl", type=float, default=0.2, help="dt = cfl h^2 / max(1, diffusion coefficient)")
    f.add_argument("--osc-tol", type=float, default=1e-6, help="stop when max rho - min rho falls below this")
    f.add_argument("--max-steps", type=int, default=200_000, help="give up (exit 2) after this many steps")
    f.add_argument("--diag-out", default="flow_diagnostics.csv", help="per-step diagnostics CSV")
    f.add_argument("--summary", default=None, help="summary JSON; when omitted, diag-out with a .json suffix")
    f.set_defaults(func=cmd_flow)

    ic = sub.add_parser("isocheck", help="random and curated isoperimetric inequality checks", formatter_class=fmt)
    ic.add_argument("--model", default="cigar", help="builtin name or model JSON path")
    ic.add_argument("--samples", type=int, default=100, help="random graphs besides the curated set")
    ic.add_argument("--seed", type=int, default=1, help="sample i uses seed + i")
    ic.add_argument("--tol", type=float, default=1e-9, help="deficits below -tol count as violations")
    ic.add_argument("--nodes", type=int, default=1024, help="quadrature nodes per graph")
    ic.add_argument("--report", default="isocheck_report.json", help="report path")
    ic.set_defaults(func=cmd_isocheck)
    return p


def dispatch(args) -> int:
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - every failure maps to exit code 1
        print(f"isosoliton {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return dispatch(args)


if __name__ == "__main__":
    sys.exit(main())
