"""Command-line front end.

Subcommands: pair, solve, weld, analyze, render.  Exit codes: 0 success,
2 bad input, 3 no convergence, 4 welding constraint violated, 5 numerical
failure.  Output files go to --out-dir, which defaults to $PGCURVES_OUT or
the current directory.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import re
import sys
from pathlib import Path

import numpy as np

from . import pwmobius as pw
from .curve import PGCurve
from .render import RenderOptions, triskele_curve, write_svg

EXIT_OK, EXIT_INPUT, EXIT_NOCONV, EXIT_CONSTRAINT, EXIT_NUMERIC = 0, 2, 3, 4, 5
OUT_ENV = "PGCURVES_OUT"

log = logging.getLogger("pgcurves")


class InputError(Exception):
    pass


class NumericalError(Exception):
    pass


# -- helpers ---------------------------------------------------------------
def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (complex, np.complexfloating)):
        return [_jsonable(obj.real), _jsonable(obj.imag)]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return None
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


def _dump(path: Path, obj) -> None:
    path.write_text(json.dumps(_jsonable(obj), indent=1) + "\n")


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc


def _out_dir(args) -> Path:
    d = Path(args.out_dir or os.environ.get(OUT_ENV) or ".")
    d.mkdir(parents=True, exist_ok=True)
    return d


def _target(args, name: str) -> Path:
    p = Path(name)
    return p if p.is_absolute() or p.parent != Path(".") else _out_dir(args) / p


def _point(v) -> complex:
    if isinstance(v, (list, tuple)) and len(v) == 2:
        return complex(float(v[0]), float(v[1]))
    if isinstance(v, (int, float)):
        return complex(v)
    if isinstance(v, str):
        return complex(v.replace(" ", "").replace("i", "j"))
    raise ValueError(f"not a point: {v!r}")


def parse_vertices(text: str) -> list:
    """Vertices from a JSON file or an inline list such as '0, 1, 0.5+2j'."""
    if os.path.exists(text):
        data = _load_json(text)
        if isinstance(data, dict):
            data = data.get("vertices", data.get("points"))
        if not isinstance(data, list):
            raise InputError("vertex file must hold a list of points")
        items = data
    else:
        items = [s for s in re.split(r"[,;\s]+", text.strip()) if s]
    try:
        pts = [_point(v) for v in items]
    except (ValueError, TypeError) as exc:
        raise InputError(f"cannot parse vertices: {exc}") from exc
    if not all(np.isfinite(p) for p in pts):
        raise InputError("vertices must be finite")
    return pts


def _reals(path, key):
    data = _load_json(path)
    if isinstance(data, dict):
        data = data.get(key)
    try:
        return [float(v) for v in data]
    except (TypeError, ValueError) as exc:
        raise InputError(f"{path}: expected a list of reals") from exc


def _render_opts(args, title=None) -> RenderOptions:
    try:
        return RenderOptions(size=args.size, stroke=args.stroke, markers=not args.no_markers,
                             clip=getattr(args, "clip", None), title=title)
    except ValueError as exc:
        raise InputError(str(exc)) from exc


def _solver_config(args):
    from .geodesic_solver import SolverConfig

    base = {}
    if args.config:
        base = _load_json(args.config)
        if not isinstance(base, dict):
            raise InputError("config file must hold a JSON object")
        unknown = set(base) - set(SolverConfig.__dataclass_fields__)
        if unknown:
            raise InputError(f"unknown config keys: {sorted(unknown)}")
    for key in ("edge_samples", "max_sweeps", "tol_move", "conformal_N", "damping", "workers"):
        v = getattr(args, key, None)
        if v is not None:
            base[key] = v
    if getattr(args, "parallel", False):
        base["parallel"] = True
    try:
        return SolverConfig.from_dict(base)
    except (TypeError, ValueError) as exc:
        raise InputError(f"bad solver config: {exc}") from exc


def _term(c, first=False) -> str:
    c = complex(c)
    v = f"{c.real:.10g}" if abs(c.imag) < 1e-15 else f"({c:.10g})"
    if v == "-0":
        v = "0"
    if first:
        return v
    return f"- {v[1:]}" if v.startswith("-") else f"+ {v}"


def _describe_branch(T) -> str:
    a, b, c, d = T.coefficients
    if abs(c) < 1e-15:  # affine: show as slope x + shift
        a, b = a / d, b / d
        return f"{_term(a, True)} x {_term(b)}"
    return f"({_term(a, True)} x {_term(b)}) / ({_term(c, True)} x {_term(d)})"


def _welding_lines(w: pw.PiecewiseMobius):
    bps = w.breakpoints
    out = []
    for k, T in enumerate(w.branches):
        lo, hi = bps[k], bps[(k + 1) % len(bps)]
        out.append(f"  on ({lo:.10g}, {hi:.10g}): {_describe_branch(T)}")
    return out


# -- subcommands -----------------------------------------------------------
def cmd_pair(args) -> int:
    from .explicit_pairs import GeodesicPairParams, pair_welding, trace_pair

    th = args.theta
    if not math.isfinite(th):
        raise InputError("theta must be finite")
    try:
        p = GeodesicPairParams(th)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    if args.samples < 3:
        raise InputError("samples must be at least 3")
    curve = trace_pair(th, args.samples)
    stem = args.out
    _dump(_target(args, stem + ".json"), curve.to_json())
    _target(args, stem + ".csv").write_text(curve.to_csv())
    write_svg(_target(args, stem + ".svg"), curve, _render_opts(args, f"geodesic pair theta={th:.6g}"))
    print(f"theta = {th:.12g}")
    for k in ("A", "B", "C", "D", "shift"):
        print(f"{k} = {getattr(p, k):.12g}")
    report = {"constants": p.as_dict()}
    try:
        w = pair_welding(th)
        print("welding:")
        print(f"  x for x > B; x {_term(p.shift)} for x < C; Möbius on (C, B):")
        print("\n".join(_welding_lines(w)))
        report["welding"] = w.to_json()
    except ValueError:
        print("welding: none (the chord closes up into a Jordan curve)")
        report["welding"] = None
    _dump(_target(args, stem + "_report.json"), report)
    return EXIT_OK


def cmd_solve(args) -> int:
    from .geodesic_solver import (SolverError, check_automorphisms, check_modulus, extract_welding,
                                  solve_through_vertices)

    verts = parse_vertices(args.vertices)
    if len(verts) < 3:
        raise InputError("need at least three vertices")
    if len(set(verts)) != len(verts):
        raise InputError("vertices must be distinct")
    config = _solver_config(args)
    try:
        res = solve_through_vertices(verts, config)
    except SolverError as exc:
        raise NumericalError(str(exc)) from exc
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    stem = args.out
    _dump(_target(args, stem + ".json"), res.curve.to_json())
    _target(args, stem + "_log.csv").write_text(res.log_csv())
    write_svg(_target(args, stem + ".svg"), res.curve, _render_opts(args))
    print(f"converged = {res.converged} after {res.sweeps} sweeps")
    if res.log:
        print(f"last displacement = {res.log[-1]['max_displacement']:.3e}")
    if len(verts) == 4 and res.converged and not args.no_report:
        try:
            fit = extract_welding(res.curve, config)
            aut = check_automorphisms(res.curve, fit.maps)
            report = {"automorphisms": aut.as_dict(), "welding_residual": fit.residual}
            if fit.normalized is not None:
                report["modulus_residual"] = check_modulus(fit.normalized)
                report["normalized_welding"] = fit.normalized.to_json()
            _dump(_target(args, stem + "_report.json"), report)
            print(f"symmetry distances = {', '.join(f'{d:.2e}' for d in aut.distances)}; "
                  f"pattern ok = {aut.pattern_ok}")
            if "modulus_residual" in report:
                print(f"modulus residual = {report['modulus_residual']:.2e}")
        except (SolverError, ValueError) as exc:
            log.warning("symmetry report skipped: %s", exc)
    return EXIT_OK if res.converged else EXIT_NOCONV


def cmd_weld(args) -> int:
    out = _target(args, args.out or "welding.json")
    if args.construct:
        x = _reals(args.construct[0], "x")
        y = _reals(args.construct[1], "y")
        try:
            P = pw.check_product(x, y)
        except ValueError as exc:
            raise InputError(str(exc)) from exc
        print(f"product = {P:.15g}")
        try:
            nw = pw.construct(x, y)
        except pw.ConstraintError as exc:
            print(f"constraint violated: product = {exc.product:.15g}", file=sys.stderr)
            return EXIT_CONSTRAINT
        except ValueError as exc:
            raise InputError(str(exc)) from exc
        print("branches:")
        print("\n".join(_welding_lines(nw.to_piecewise())))
        _dump(out, dict(nw.to_json(), product=P))
        return EXIT_OK
    src = args.normalize or args.check
    data = _load_json(src)
    try:
        w = pw.PiecewiseMobius.from_json(data)
    except pw.ConstraintError as exc:
        print(f"constraint violated: product = {exc.product:.15g}", file=sys.stderr)
        return EXIT_CONSTRAINT
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"not a welding: {exc}") from exc
    if args.check:
        jumps = pw.jumps(w) if w.breakpoints else np.array([])
        report = {"breakpoints": w.to_json()["breakpoints"], "jumps": jumps, "C1": pw.is_C1(w),
                  "qs_constant": pw.qs_constant(w)}
        if "x" in data and "y" in data:
            report["product"] = pw.check_product(data["x"], data["y"])
        elif pw.is_C1(w) and len(w.breakpoints) >= 2:
            nw, _, _ = pw.normalize(w)
            report["product"] = pw.check_product(nw.x, nw.y)
        for k, j in zip(w.breakpoints, jumps):
            print(f"jump at {k:.10g} = {j:.12g}")
        print(f"C1 = {report['C1']}")
        print(f"qs constant = {report['qs_constant']:.6g}")
        if "product" in report:
            print(f"product = {report['product']:.15g}")
        if args.out:
            _dump(out, report)
        if "product" in report and abs(report["product"] - 1) > 1e-9:
            return EXIT_CONSTRAINT
        return EXIT_OK
    try:
        nw, pre, post = pw.normalize(w)
    except pw.NotC1Error as exc:
        print(f"not C1: jumps = {pw.jumps(w).tolist()}", file=sys.stderr)
        return EXIT_CONSTRAINT
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    P = pw.check_product(nw.x, nw.y)
    print(f"product = {P:.15g}")
    print("normalized x = " + ", ".join(f"{v:.12g}" for v in nw.x))
    print("normalized y = " + ", ".join(f"{v:.12g}" for v in nw.y))
    _dump(out, dict(nw.to_json(), product=P, sigma_pre=pre.to_json(), sigma_post=post.to_json()))
    return EXIT_OK


def cmd_analyze(args) -> int:
    from .geodesic_solver import (SolverError, check_automorphisms, check_modulus, classify_jump,
                                  extract_welding)
    from .schwarzian import analyze_curve

    curve = _load_curve(args.curve)
    if not curve.closed or curve.n < 2:
        raise InputError("analyze needs a closed curve with at least two vertices")
    config = _solver_config(args)
    spiral = "spiral" in str(curve.meta.get("kind", "")) or any(
        isinstance(f, dict) and "spiral" in f for f in curve.flags)
    resample = not (args.no_resample or spiral)
    report = {"vertices": curve.vertex_points, "n": curve.n}
    fit = None
    try:
        fit = extract_welding(curve, config) if resample else None
    except (SolverError, ValueError, np.linalg.LinAlgError) as exc:
        report["welding_error"] = str(exc)
    if fit is not None:
        report["welding"] = {
            "residual": fit.residual,
            "edge_residuals": fit.edge_residuals,
            "x_vertices": fit.x_vertices,
            "y_vertices": fit.y_vertices,
            "jumps": fit.jumps,
            "map": fit.welding.to_json(),
            "normalized": None if fit.normalized is None else fit.normalized.to_json(),
            "product": fit.product,
        }
    try:
        rs = analyze_curve(curve, config, quad=args.quad, resample=resample)
    except (SolverError, ValueError, np.linalg.LinAlgError) as exc:
        raise NumericalError(f"mapping failed: {exc}") from exc
    sch = rs.as_dict()
    report["schwarzian"] = sch
    classes = []
    for k in range(curve.n):
        rate = sch["spiral_rates"][k]
        jump = sch.get("jumps", [None] * curve.n)[k]
        if jump is not None:
            vc = classify_jump(jump)
            classes.append({"kind": vc.kind, "rate": vc.rate, "jump": jump})
        elif rate is not None:
            classes.append({"kind": "spiral", "rate": rate, "jump": math.exp(2 * math.pi * rate)})
        else:
            classes.append({"kind": "unresolved", "rate": None, "jump": None})
    report["classification"] = classes
    if curve.n == 4 and fit is not None:
        try:
            if fit.normalized is not None:
                report["modulus_residual"] = check_modulus(fit.normalized)
            report["automorphisms"] = check_automorphisms(curve, fit.maps).as_dict()
        except (SolverError, ValueError) as exc:
            report["symmetry_error"] = str(exc)
    _dump(_target(args, args.out), report)
    for k, c in enumerate(classes):
        rate = "" if c["rate"] is None else f" rate {c['rate']:.6g}"
        print(f"vertex {k}: {c['kind']}{rate}")
    print(f"decay exponent = {sch.get('decay_exponent', float('nan')):.4f}")
    if "normalized_constraint_residuals" in sch:
        vals = [float(r) for r in sch["normalized_constraint_residuals"] if r is not None]
        print(f"normalized constraint residuals = {', '.join(f'{v:.2e}' for v in vals)}")
    if "modulus_residual" in report:
        print(f"modulus residual = {report['modulus_residual']:.2e}")
    return EXIT_OK


def _load_curve(path) -> PGCurve:
    data = _load_json(path)
    try:
        return PGCurve.from_json(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{path}: not a curve: {exc}") from exc


def cmd_render(args) -> int:
    if args.triskele:
        curve = triskele_curve(args.rate)
    elif args.curve:
        curve = _load_curve(args.curve)
    else:
        raise InputError("give --curve or --triskele")
    if len(curve.samples) == 0 or not np.any(np.isfinite(curve.samples)):
        raise InputError("curve has no samples")
    try:
        write_svg(_target(args, args.svg), curve, _render_opts(args, args.title))
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    return EXIT_OK


# -- parser ----------------------------------------------------------------
def _add_render_flags(p):
    p.add_argument("--size", type=int, default=600, help="SVG size in pixels")
    p.add_argument("--stroke", type=float, default=1.5)
    p.add_argument("--no-markers", action="store_true", help="omit vertex circles")


def _add_solver_flags(p):
    p.add_argument("--config", help="JSON file overriding solver defaults")
    p.add_argument("--edge-samples", dest="edge_samples", type=int)
    p.add_argument("--max-sweeps", dest="max_sweeps", type=int)
    p.add_argument("--tol", dest="tol_move", type=float, help="relative displacement tolerance")
    p.add_argument("--N", dest="conformal_N", type=int, help="conformal map resolution")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pgcurves", description="Piecewise geodesic Jordan curves.")
    ap.add_argument("--out-dir", help=f"output directory (default ${OUT_ENV} or .)")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pair", help="explicit geodesic pair in the disc")
    p.add_argument("--theta", type=float, required=True)
    p.add_argument("--samples", type=int, default=201, help="samples per arc")
    p.add_argument("--out", default="pair", help="output file stem")
    _add_render_flags(p)
    p.set_defaults(func=cmd_pair)

    p = sub.add_parser("solve", help="piecewise geodesic curve through vertices")
    p.add_argument("--vertices", required=True, help="JSON file or inline list, e.g. '0, 1, 0.5+2j'")
    p.add_argument("--out", default="curve", help="output file stem")
    p.add_argument("--damping", type=float)
    p.add_argument("--parallel", action="store_true", help="Jacobi sweeps on worker threads (not bit-reproducible)")
    p.add_argument("--workers", type=int)
    p.add_argument("--no-report", action="store_true", help="skip the four-vertex symmetry report")
    _add_solver_flags(p)
    _add_render_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("weld", help="construct, normalize or check welding maps")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--construct", nargs=2, metavar=("X_JSON", "Y_JSON"))
    g.add_argument("--normalize", metavar="W_JSON")
    g.add_argument("--check", metavar="W_JSON")
    p.add_argument("--out", help="output JSON (default welding.json; --check writes only when given)")
    p.set_defaults(func=cmd_weld)

    p = sub.add_parser("analyze", help="welding, vertex classes and Schwarzian model of a curve")
    p.add_argument("--curve", required=True)
    p.add_argument("--out", default="report.json")
    p.add_argument("--quad", choices=("free", "preset", "zero"), default="free",
                   help="treatment of double-pole coefficients")
    p.add_argument("--no-resample", action="store_true", help="zip the samples as given")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("render", help="curve to SVG")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--curve")
    src.add_argument("--triskele", action="store_true", help="three spirals of equal rate")
    p.add_argument("--rate", type=float, default=2.0, help="spiral rate for --triskele")
    p.add_argument("--svg", default="curve.svg")
    p.add_argument("--clip", type=float)
    p.add_argument("--title")
    _add_render_flags(p)
    p.set_defaults(func=cmd_render)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
