"""Command-line front end.

Every command prints a JSON document to stdout and, with ``--out DIR``,
writes ``<command>.json`` and a long-format ``<command>.csv`` with columns
``x, series, value, valid``.

Exit codes: 0 success, 2 invalid input, 3 infeasible or refused request,
4 internal invariant violation.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import bounds as bd
from . import lpapprox as lp
from . import mechanisms as mech
from .geometry import InfeasibleError, build_context, error_bounds
from .instances import FAMILIES, Instance, load_instance
from .oracle import GridSpec, RefusedError, brute_force_g, brute_force_h, slack
from .probcore import JointDist, ValidationError, entropy_suite

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE, EXIT_INTERNAL = 0, 2, 3, 4


class UsageError(ValueError):
    pass


# ---------------------------------------------------------------------------
# helpers


def _instance(args, theta: float | None = None) -> Instance:
    if args.instance and args.family:
        raise UsageError("use either --instance or --family, not both")
    if args.instance:
        return load_instance(args.instance)
    if args.family:
        th = args.theta if theta is None else theta
        if th is None:
            raise UsageError("--family requires --theta")
        return Instance(FAMILIES[args.family](th), name=f"{args.family}({th})")
    raise UsageError("an instance is required: --instance FILE or --family {bsc,erasure}")


def _joint(args, theta: float | None = None) -> JointDist:
    inst = _instance(args, theta)
    if inst.joint is None:
        raise UsageError("this command needs a two-variable instance")
    return inst.joint


def _jsonable(o):
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, np.ndarray):
        return _jsonable(o.tolist())
    if isinstance(o, (np.floating, float)):
        v = float(o)
        return None if math.isnan(v) else (str(v) if math.isinf(v) else v)
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, np.bool_):
        return bool(o)
    return o


def _emit(args, name: str, doc: dict, rows: list[dict]) -> None:
    doc = _jsonable(doc)
    text = json.dumps(doc, indent=2, ensure_ascii=False)
    print(text)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{name}.json").write_text(text + "\n")
        with (out / f"{name}.csv").open("w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=["x", "series", "value", "valid"])
            w.writeheader()
            w.writerows(rows)


# ---------------------------------------------------------------------------
# commands


def cmd_info(args) -> int:
    j = _joint(args)
    s = entropy_suite(j, args.base)
    doc = {
        "shape": list(j.shape),
        "base": args.base,
        "p_x": j.px,
        "p_y": j.py,
        "H(X)": s.h_x,
        "H(Y)": s.h_y,
        "H(X|Y)": s.h_x_given_y,
        "H(Y|X)": s.h_y_given_x,
        "I(X;Y)": s.i_xy,
        "H(Y|X=x)": s.h_y_given_x_each,
    }
    rows = [{"x": 0, "series": k, "value": doc[k], "valid": True} for k in ("H(X)", "H(Y)", "H(X|Y)", "H(Y|X)", "I(X;Y)")]
    try:
        ctx = build_context(j)
        doc["geometry"] = json.loads(ctx.to_json())
    except mech.DomainError as e:
        doc["geometry"] = {"unavailable": str(e)}
    _emit(args, "info", doc, rows)
    return EXIT_OK


def _bounds_doc(j: JointDist, eps: float, criterion: str, base: str):
    reports = {}
    if criterion == "mi":
        g0 = lp.solve_g0(j, base).utility_lb
        s = entropy_suite(j, base)
        reports["h0"] = bd.h0_report(j, base)
        if eps < s.i_xy:
            reports["h_eps"] = bd.h_bounds_mi(j, eps, g0, base)
            pos = bd.positivity_condition(j, eps, base)
            eq = bd.equality_detector(j, eps, base)
            extra = {"g0": g0, "positivity": pos.__dict__, "equality": eq.__dict__}
        else:
            extra = {"g0": g0, "note": f"eps >= I(X;Y) = {s.i_xy}: optimum is H(Y) = {s.h_y}"}
    else:
        reports["per_letter"] = bd.perletter_closed_bounds(j, eps, base)
        extra = {}
    return reports, extra


def cmd_bounds(args) -> int:
    j = _joint(args)
    eps = args.eps or 0.0
    crit = args.criterion or "mi"
    if crit not in ("mi", "wl", "l"):
        raise UsageError("bounds supports --criterion mi, wl or l")
    reports, extra = _bounds_doc(j, eps, crit, args.base)
    rows = [r for rep in reports.values() for r in rep.rows(eps)]
    doc = {"eps": eps, "base": args.base, "criterion": crit, **{k: v.to_dict() for k, v in reports.items()}, **extra}
    _emit(args, "bounds", doc, rows)
    return EXIT_OK


def cmd_mechanism(args) -> int:
    j = _joint(args)
    eps = args.eps or 0.0
    kind = args.kind
    if kind in ("sfrl", "esfrl") and args.seed is None:
        raise UsageError("sampling mechanisms require --seed")
    if kind == "frl":
        rep = mech.frl(j)
        doc = {"representation": json.loads(rep.to_json())}
        m = rep.mechanism()
    elif kind == "efrl":
        rep = mech.efrl(j, eps, args.base)
        doc = {"representation": json.loads(rep.to_json()), "entropy_cap": mech.entropy_cap_check(rep).__dict__}
        m = rep.mechanism()
    elif kind == "sfrl":
        m = mech.sfrl_sample(j, args.draws, args.max_index, args.seed)
        doc = {"atoms": list(m.u_labels), "p_u": m.p_u}
    else:
        m = mech.esfrl_sample(j, eps, args.draws, args.max_index, args.seed, args.base)
        doc = {"atoms": list(m.u_labels), "p_u": m.p_u}
    summary = m.summary(args.base)
    s = entropy_suite(j, args.base)
    summary["sfrl_constant"] = mech.sfrl_constant(s.i_xy, args.base)
    summary["sfrl_constant_tight"] = mech.sfrl_constant(s.i_xy, args.base, tight=True)
    doc = {"kind": kind, "eps": eps, "summary": summary, **doc}
    rows = [{"x": eps, "series": k, "value": v, "valid": True} for k, v in summary.items() if isinstance(v, float)]
    _emit(args, "mechanism", doc, rows)
    return EXIT_OK


def cmd_lp(args) -> int:
    j = _joint(args)
    eps = args.eps or 0.0
    if args.kind == "g0":
        res = lp.solve_g0(j, args.base)
    elif args.kind == "gwl":
        res = lp.solve_g_wl(j, eps, args.base)
    else:
        res = lp.solve_g_l(j, eps, args.base)
    doc = res.to_dict()
    if args.kind != "g0":
        ctx = build_context(j)
        doc["coarse_boundary"] = ctx.coarse_boundary
        doc["fine_boundary"] = ctx.fine_boundary
    rows = [
        {"x": eps, "series": "utility_lb", "value": res.utility_lb, "valid": True},
        {"x": eps, "series": "approx_utility", "value": res.approx_utility, "valid": True},
    ] + [{"x": eps, "series": k, "value": v, "valid": True} for k, v in res.upper_bounds.items()]
    _emit(args, "lp", doc, rows)
    return EXIT_OK


def cmd_oracle(args) -> int:
    j = _joint(args)
    eps = args.eps or 0.0
    crit = args.criterion or "perfect"
    card = args.card or (3 if crit == "h" else min(j.shape[1], 3))
    grid = GridSpec(args.grid or 0.02, card)
    if crit == "h":
        res = brute_force_h(j, eps, grid, args.base)
    elif crit in ("mi", "wl", "l", "perfect"):
        res = brute_force_g(j, eps, crit, grid, args.base)
    else:
        raise UsageError("oracle --criterion must be one of mi, wl, l, perfect, h")
    if not res.feasible:
        raise InfeasibleError("no grid kernel satisfies the criterion")
    doc = {
        "criterion": crit,
        "eps": eps,
        "grid": {"resolution": grid.resolution, "max_card": grid.max_card},
        "value": res.value,
        "slack": slack(j.shape[1], grid.resolution, args.base),
        "evaluated": res.evaluated,
        "kernel": res.kernel,
        "base": args.base,
    }
    _emit(args, "oracle", doc, [{"x": eps, "series": f"oracle_{crit}", "value": res.value, "valid": True}])
    return EXIT_OK


SERIES = (
    "u01 u02 l01 l02 L1 L2 L3 upper g0 gl_lb gl_approx U1_gl U2_gl gwl_lb gwl_approx "
    "U_hl U_gwl L1_hwl L2_hwl"
).split()


def _series_point(j: JointDist, eps: float, names: list[str], base: str) -> dict[str, tuple[float, bool]]:
    out: dict[str, tuple[float, bool]] = {}
    cache: dict[str, object] = {}

    def get(key, fn):
        if key not in cache:
            try:
                cache[key] = fn()
            except (mech.DomainError, InfeasibleError):
                cache[key] = None
        return cache[key]

    nan = (float("nan"), False)
    for n in names:
        if n in ("u01", "u02", "l01", "l02"):
            r = get("h0", lambda: bd.h0_report(j, base))
            out[n] = (r[n.upper()[0] + n[1:]], True)
        elif n == "g0":
            out[n] = (get("g0", lambda: lp.solve_g0(j, base)).utility_lb, True)
        elif n in ("L1", "L2", "L3", "upper"):
            g0 = get("g0", lambda: lp.solve_g0(j, base)).utility_lb
            r = get("hmi", lambda: bd.h_bounds_mi(j, eps, g0, base))
            out[n] = (r[n], True) if r is not None else nan
        elif n.startswith("gl") or n.endswith("_gl"):
            r = get("gl", lambda: lp.solve_g_l(j, eps, base))
            if r is None:
                out[n] = nan
            elif n == "gl_lb":
                out[n] = (r.utility_lb, True)
            elif n == "gl_approx":
                out[n] = (r.approx_utility, True)
            else:
                out[n] = (r.upper_bounds.get(n, float("nan")), n in r.upper_bounds)
        elif n.startswith("gwl"):
            r = get("gwl", lambda: lp.solve_g_wl(j, eps, base))
            out[n] = nan if r is None else ((r.utility_lb if n == "gwl_lb" else r.approx_utility), True)
        elif n in ("U_hl", "U_gwl", "L1_hwl", "L2_hwl"):
            r = get("pl", lambda: bd.perletter_closed_bounds(j, eps, base))
            out[n] = (r[n], True) if n in r else nan
        else:
            raise UsageError(f"unknown series {n!r}; choose from {', '.join(SERIES)}")
    return out


def _parse_range(spec: str) -> np.ndarray:
    try:
        lo, hi, steps = spec.split(":")
        lo, hi, steps = float(lo), float(hi), int(steps)
    except ValueError as e:
        raise UsageError(f"--range must be lo:hi:steps, got {spec!r}") from e
    if not lo < hi or steps < 2:
        raise UsageError("--range needs lo < hi and steps >= 2")
    return np.linspace(lo, hi, steps)


def cmd_sweep(args) -> int:
    if args.var not in ("eps", "theta"):
        raise UsageError("--var must be eps or theta")
    if args.var == "theta" and not args.family:
        raise UsageError("a theta sweep needs --family")
    xs = _parse_range(args.range)
    names = [s.strip() for s in (args.series or "u01,u02").split(",") if s.strip()]
    for n in names:
        if n not in SERIES:
            raise UsageError(f"unknown series {n!r}; choose from {', '.join(SERIES)}")
    rows: list[dict] = []
    fh = writer = None
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        fh = (out / "sweep.csv").open("w", newline="")
        writer = csv.DictWriter(fh, fieldnames=["x", "series", "value", "valid"])
        writer.writeheader()
    try:
        fixed = None if args.var == "theta" else _joint(args)
        for x in xs:
            x = float(x)
            j = _joint(args, theta=x) if args.var == "theta" else fixed
            eps = (args.eps or 0.0) if args.var == "theta" else x
            for n, (v, ok) in _series_point(j, eps, names, args.base).items():
                row = {"x": x, "series": n, "value": v, "valid": ok}
                rows.append(row)
                if writer:
                    writer.writerow(row)
            if fh:
                fh.flush()
    finally:
        if fh:
            fh.close()
    doc = {"var": args.var, "range": args.range, "series": names, "base": args.base, "rows": rows}
    text = json.dumps(_jsonable(doc), indent=2)
    print(text)
    if args.out:
        (Path(args.out) / "sweep.json").write_text(text + "\n")
    return EXIT_OK


def cmd_report(args) -> int:
    """All closed-form bounds, ``g0`` and (when defined) the LP bounds in one file."""
    j = _joint(args)
    eps = args.eps or 0.0
    base = args.base
    reports, extra = _bounds_doc(j, eps, "mi", base)
    doc = {"eps": eps, "base": base, **{k: v.to_dict() for k, v in reports.items()}, **extra}
    rows = [r for rep in reports.values() for r in rep.rows(eps)]
    pl = bd.perletter_closed_bounds(j, eps, base)
    doc["per_letter"] = pl.to_dict()
    rows += pl.rows(eps)
    try:
        ctx = build_context(j)
        doc["eps2"] = ctx.eps2
        doc["regime"] = error_bounds(ctx, eps).regime
        if eps < ctx.eps2:
            for kind, fn in (("gl", lp.solve_g_l), ("gwl", lp.solve_g_wl)):
                r = fn(j, eps, base, ctx=ctx)
                doc[kind] = r.to_dict()
                rows.append({"x": eps, "series": f"{kind}_lb", "value": r.utility_lb, "valid": True})
    except mech.DomainError as e:
        doc["geometry"] = {"unavailable": str(e)}
    _emit(args, "report", doc, rows)
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--instance", help="JSON or CSV instance file")
    common.add_argument("--family", choices=sorted(FAMILIES))
    common.add_argument("--theta", type=float)
    common.add_argument("--eps", type=float)
    common.add_argument("--criterion")
    common.add_argument("--grid", type=float, help="oracle grid resolution")
    common.add_argument("--card", type=int, help="oracle cap on |U|")
    common.add_argument("--seed", type=int)
    common.add_argument("--draws", type=int, default=100_000)
    common.add_argument("--max-index", type=int, default=10_000)
    common.add_argument("--base", choices=("bits", "nats"), default="bits")
    common.add_argument("--out", help="directory for JSON and CSV outputs")

    p = argparse.ArgumentParser(prog="privfunnel", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("info", parents=[common]).set_defaults(fn=cmd_info)
    sub.add_parser("bounds", parents=[common]).set_defaults(fn=cmd_bounds)
    m = sub.add_parser("mechanism", parents=[common])
    m.add_argument("kind", choices=("frl", "efrl", "sfrl", "esfrl"))
    m.set_defaults(fn=cmd_mechanism)
    l = sub.add_parser("lp", parents=[common])
    l.add_argument("kind", choices=("g0", "gwl", "gl"))
    l.set_defaults(fn=cmd_lp)
    sub.add_parser("oracle", parents=[common]).set_defaults(fn=cmd_oracle)
    s = sub.add_parser("sweep", parents=[common])
    s.add_argument("--var", required=True)
    s.add_argument("--range", required=True)
    s.add_argument("--series")
    s.set_defaults(fn=cmd_sweep)
    sub.add_parser("report", parents=[common]).set_defaults(fn=cmd_report)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_INPUT if e.code else EXIT_OK
    try:
        return args.fn(args)
    except (ValidationError, UsageError, mech.DomainError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except (InfeasibleError, RefusedError) as e:
        print(f"infeasible: {e}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except bd.InvariantError as e:
        print(f"internal invariant violated: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
