"""Command-line entry point: ``crmaps <subcommand> [options]``.

Every subcommand writes JSON (or CSV where tabular) to stdout or ``--out``.
Exit codes: 0 success, 1 domain error (JSON on stderr), 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import acceptance
from .algebra import RationalMapGerm
from .catalog import (JET_LABELS, NormalFormID, catalog_entries, faran_lebl_germ, faran_lebl_map,
                      jet_coordinates, normal_form_map)
from .errors import CRMapsError, SearchStalled
from .group_action import RANK_REL_TOL, RANK_STEP, rank_at_base, stabilizer_classify
from .hypersurfaces import (DEFAULT_SEED, SourcePoint, check_eps, formal_membership, is_in_F2, maps_hypersurface,
                            maps_sphere_model)
from .isotropies import GammaParams, GammaPrimeParams, act
from .normalization import CLASSIFY_TOL, MAX_ITER, TARGET_TOL, classify, normalize
from .topology_lab import CSV_COLUMNS, accumulation_search, component_census, make_grid, orbit_sweep, s_coverage


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------

@dataclass
class RunConfig:
    eps: int | None = None
    membership_tol: float = 1e-10
    jet_tol: float = CLASSIFY_TOL
    solver_tol: float = TARGET_TOL
    jet_order: int = 4
    seed: int = DEFAULT_SEED
    membership_samples: int = 1000
    stabilizer_samples: int = 10_000
    format: str = "json"
    out: str | None = None

    def validate(self) -> "RunConfig":
        for name in ("membership_tol", "jet_tol", "solver_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.jet_order < 3:
            raise ValueError("jet order must be at least 3")
        if self.format not in ("json", "csv"):
            raise ValueError("format must be json or csv")
        if self.eps is not None:
            check_eps(self.eps)
        return self


_CONFIG_KEYS = {f.name for f in fields(RunConfig)}


def load_config(path: str | None) -> dict:
    if not path:
        return {}
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    flat = {f"{k}_tol": v for k, v in data.get("tolerances", {}).items()}
    flat.update({f"{k}_samples": v for k, v in data.get("samples", {}).items()})
    flat.update({k.replace("-", "_"): v for k, v in data.items() if not isinstance(v, dict)})
    unknown = set(flat) - _CONFIG_KEYS
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return flat


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Flags override the TOML file, which overrides the defaults."""
    cfg = replace(RunConfig(), **load_config(args.config))
    flags = {k: getattr(args, k) for k in _CONFIG_KEYS if getattr(args, k, None) is not None}
    cfg = replace(cfg, **flags)
    if args.format is None and cfg.out and cfg.out.endswith(".csv"):
        cfg = replace(cfg, format="csv")
    return cfg.validate()


# --------------------------------------------------------------------------
# output
# --------------------------------------------------------------------------

def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if hasattr(obj, "to_json"):
        return _plain(obj.to_json())
    return obj


def _encode(obj, indent: int, level: int = 0) -> str:
    pad, inner = " " * (indent * level), " " * (indent * (level + 1))
    if isinstance(obj, float):
        if not math.isfinite(obj):
            return "null"
        text = format(obj, ".17g")
        return text if any(ch in text for ch in ".en") else text + ".0"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(k)}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list)) for v in obj):
            return "[" + ", ".join(_encode(v, indent) for v in obj) + "]"
        return "[\n" + ",\n".join(inner + _encode(v, indent, level + 1) for v in obj) + "\n" + pad + "]"
    return json.dumps(obj)


def dumps(obj, indent: int = 2) -> str:
    """JSON with every float written at 17 significant digits (lossless for doubles)."""
    return _encode(_plain(obj), indent)


def _csv_text(rows: list[dict], columns: list[str] | None = None) -> str:
    columns = columns or (list(rows[0]) if rows else [])
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (format(v, ".17g") if isinstance(v, float) else v) for k, v in _plain(row).items()})
    return buf.getvalue()


def emit(cfg: RunConfig, payload, rows: list[dict] | None = None, columns: list[str] | None = None):
    if cfg.format == "csv":
        if rows is None:
            raise ValueError("this subcommand has no tabular output; use --format json")
        text = _csv_text(rows, columns)
    else:
        text = dumps(payload) + "\n"
    if cfg.out:
        Path(cfg.out).write_text(text)
    else:
        sys.stdout.write(text)


# --------------------------------------------------------------------------
# map input
# --------------------------------------------------------------------------

def _point_arg(text: str) -> SourcePoint:
    parts = [float(x) for x in text.split(",")]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("base point must be 'x,y,u' (z = x + iy)")
    return SourcePoint(complex(parts[0], parts[1]), parts[2])


def _read_json(spec: str):
    if spec == "-":
        return json.load(sys.stdin)
    if spec.lstrip().startswith("{"):
        return json.loads(spec)
    return json.loads(Path(spec).read_text())


def _add_map_args(p: argparse.ArgumentParser, sphere: bool = True):
    g = p.add_argument_group("map selection")
    g.add_argument("--map", help="rational map JSON (file path, inline JSON or '-')")
    g.add_argument("--family", type=int, choices=(1, 2, 3), help="catalog family k")
    g.add_argument("--s", type=float, default=0.0, help="catalog parameter s (default 0)")
    if sphere:
        g.add_argument("--sphere", type=int, choices=range(1, 8), metavar="INDEX",
                       help="sphere-model list entry 1..7")
        g.add_argument("--at", type=_point_arg, default=None, metavar="X,Y,U",
                       help="base point for --sphere (moved to Heisenberg and recentered)")


def _need_eps(cfg: RunConfig) -> int:
    if cfg.eps is None:
        raise ValueError("--eps is required (flag or config)")
    return cfg.eps


def load_map(args, cfg: RunConfig) -> RationalMapGerm:
    eps = _need_eps(cfg)
    chosen = [x for x in ("map", "family", "sphere") if getattr(args, x, None) is not None]
    if len(chosen) != 1:
        raise ValueError("give exactly one of --map, --family, --sphere")
    if args.map is not None:
        return RationalMapGerm.from_json(_read_json(args.map))
    if args.family is not None:
        return normal_form_map(NormalFormID(args.family, args.s, eps))
    p = args.at if args.at is not None else SourcePoint(0j, 0.0)
    return faran_lebl_germ(args.sphere, eps, p)


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------

def cmd_catalog(args, cfg):
    if args.action == "list":
        rows = catalog_entries()
        emit(cfg, rows, rows, ["name", "family", "index", "parameter", "eps", "model", "in_F2", "note"])
        return
    eps = _need_eps(cfg)
    if args.sphere is not None:
        H = faran_lebl_map(args.sphere, eps)
        ident = {"sphere": args.sphere, "eps": eps}
    else:
        if args.family is None:
            raise ValueError("catalog emit/jets needs --family or --sphere")
        nf = NormalFormID(args.family, args.s, eps)
        H, ident = normal_form_map(nf), nf.to_json()
    if args.action == "emit":
        emit(cfg, {**ident, "map": H.to_json()})
        return
    J = jet_coordinates(H, cfg.jet_order)
    rows = [{"label": lab, "re": float(v.real), "im": float(v.imag)} for lab, v in zip(JET_LABELS, J.values)]
    emit(cfg, {**ident, "jets": J.to_json()}, rows, ["label", "re", "im"])


def cmd_expand(args, cfg):
    H = load_map(args, cfg)
    jets = H.jets(cfg.jet_order)
    out, rows = [], []
    for i, j in enumerate(jets):
        terms = []
        for k, e in enumerate(j.basis.exps):
            v = complex(j.c[..., k])
            if v != 0:
                terms.append({"exponent": list(e), "coefficient": v})
                rows.append({"component": i, "i": e[0], "j": e[1], "re": v.real, "im": v.imag})
        out.append(terms)
    emit(cfg, {"order": cfg.jet_order, "components": out}, rows, ["component", "i", "j", "re", "im"])


def cmd_check_membership(args, cfg):
    eps = _need_eps(cfg)
    if args.formal:
        H = load_map(args, cfg)
        worst = formal_membership(H, eps, cfg.jet_order)
        emit(cfg, {"model": "heisenberg", "method": "formal", "order": cfg.jet_order, "max_coefficient": worst,
                   "pass": worst <= cfg.membership_tol})
        return
    if args.sphere is not None and args.at is None:
        rep = maps_sphere_model(faran_lebl_map(args.sphere, eps), eps, n=cfg.membership_samples,
                                tol=cfg.membership_tol, seed=cfg.seed)
        emit(cfg, {"model": "sphere", **rep.to_json()})
        return
    H = load_map(args, cfg)
    rep = maps_hypersurface(H, eps, n=cfg.membership_samples, radius=args.radius, tol=cfg.membership_tol,
                            seed=cfg.seed)
    payload = {"model": "heisenberg", **rep.to_json()}
    if args.f2:
        payload["F2"] = is_in_F2(H, eps, n=cfg.membership_samples, radius=args.radius, tol=cfg.membership_tol,
                                 seed=cfg.seed).to_json()
    emit(cfg, payload)


def cmd_normalize(args, cfg):
    res = normalize(load_map(args, cfg), _need_eps(cfg), tol=cfg.solver_tol, max_iter=args.max_iter)
    emit(cfg, res.to_json())


def cmd_classify(args, cfg):
    c = classify(load_map(args, cfg), _need_eps(cfg), tol=cfg.jet_tol, order=cfg.jet_order)
    payload = c.to_json()
    if args.details:
        payload["normalization"] = c.result.to_json()
    emit(cfg, payload)


def cmd_act(args, cfg):
    eps = _need_eps(cfg)
    g = GammaParams.from_json(_read_json(args.gamma)) if args.gamma else GammaParams()
    gp = GammaPrimeParams.from_json(_read_json(args.gamma_prime)) if args.gamma_prime else GammaPrimeParams()
    gp.check(eps)
    H2 = act(g, gp, load_map(args, cfg), eps)
    emit(cfg, {"gamma": g.to_json(), "gamma_p": gp.to_json(), "map": H2.to_json(),
               "jets": jet_coordinates(H2, cfg.jet_order).to_json()})


def cmd_stabilizer(args, cfg):
    rep = stabilizer_classify(load_map(args, cfg), _need_eps(cfg), n_random=cfg.stabilizer_samples, seed=cfg.seed)
    emit(cfg, rep.to_json())


def cmd_rank(args, cfg):
    if args.family not in (2, 3):
        raise ValueError("rank needs --family 2 or 3")
    rep = rank_at_base(args.family, _need_eps(cfg), args.s0, step=args.step, rel_tol=args.rel_tol)
    rep["singular_values"] = list(rep["singular_values"])[:20]
    emit(cfg, {"family": args.family, "eps": cfg.eps, "s0": args.s0, **rep})


def cmd_sweep(args, cfg):
    base = NormalFormID(args.family, args.s, _need_eps(cfg))
    recs = orbit_sweep(base, make_grid(args.grid), orient=not args.no_orient)
    rows = [r.to_row() for r in recs]
    fams = sorted({r.classified.family for r in recs if r.classified})
    emit(cfg, {"base": base.to_json(), "grid": args.grid, "n_points": len(recs), "families": fams,
               "coverage": s_coverage(recs, 0.0, args.s_hi), "rows": rows}, rows, CSV_COLUMNS)


def cmd_accumulate(args, cfg):
    eps = _need_eps(cfg)
    target = NormalFormID(args.target_family, args.target_s, eps)
    source = NormalFormID(args.source_family, args.source_s, eps)
    try:
        rep = accumulation_search(target, source, radius=args.radius, n_grid=args.n_grid, steps=args.steps,
                                  threshold=args.threshold)
    except SearchStalled as exc:
        if exc.report is not None:
            _emit_trace(cfg, exc.report)
        raise
    _emit_trace(cfg, rep)


TRACE_COLUMNS = ["eval", "best_distance", "p_re", "p_im", "p_u"]


def _emit_trace(cfg, rep):
    rows = [dict(zip(TRACE_COLUMNS, t)) for t in rep.trace]
    emit(cfg, {**rep.to_json(), "trace": rows}, rows, TRACE_COLUMNS)


def cmd_census(args, cfg):
    emit(cfg, component_census(_need_eps(cfg), s_max=args.s_max, ds=args.ds))


def cmd_verify(args, cfg):
    which = None if args.suite == "all" else [int(x) for x in args.suite.split(",")]
    results = acceptance.run_all(which)
    for r in results:
        print(r.line(), file=sys.stderr)
    rows = [{"criterion": r.number, "name": r.name, "pass": r.passed, "seconds": r.seconds} for r in results]
    emit(cfg, {"all_passed": all(r.passed for r in results), "criteria": [r.to_json() for r in results]},
         rows, ["criterion", "name", "pass", "seconds"])
    return 0 if all(r.passed for r in results) else 1


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--eps", type=int, choices=(1, -1), default=None, help="target signature")
    common.add_argument("--seed", type=int, default=None, help=f"RNG seed (default {DEFAULT_SEED})")
    common.add_argument("--jet-order", dest="jet_order", type=int, default=None, help="jet order K (default 4)")
    common.add_argument("--format", choices=("json", "csv"), default=None)
    common.add_argument("--out", default=None, help="output file (default stdout)")
    common.add_argument("--config", default=None, help="TOML config file")

    parser = argparse.ArgumentParser(prog="crmaps", description="CR maps of hyperquadrics: normal forms and orbits.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, func, help_):
        p = sub.add_parser(name, parents=[common], help=help_, description=help_)
        p.set_defaults(func=func)
        return p

    p = add("catalog", cmd_catalog, "list catalog entries or emit a map / its jet coordinates")
    p.add_argument("action", choices=("list", "emit", "jets"))
    p.add_argument("--family", type=int, choices=(1, 2, 3))
    p.add_argument("--s", type=float, default=0.0)
    p.add_argument("--sphere", type=int, choices=range(1, 8), metavar="INDEX")

    p = add("expand", cmd_expand, "Taylor coefficients of a map to the jet order")
    _add_map_args(p)

    p = add("check-membership", cmd_check_membership, "sampled hypersurface residual (and F2 test)")
    _add_map_args(p)
    p.add_argument("--radius", type=float, default=0.1)
    p.add_argument("--samples", dest="membership_samples", type=int, default=None)
    p.add_argument("--tol", dest="membership_tol", type=float, default=None)
    p.add_argument("--f2", action="store_true", help="also run the F2 diagnostics")
    p.add_argument("--formal", action="store_true",
                   help="exact-order series identity instead of sampling (order = --jet-order, at most 6)")

    p = add("normalize", cmd_normalize, "bring a map to normal form")
    _add_map_args(p)
    p.add_argument("--max-iter", dest="max_iter", type=int, default=MAX_ITER)
    p.add_argument("--tol", dest="solver_tol", type=float, default=None, help="residual target of the solver")

    p = add("classify", cmd_classify, "identify the catalog normal form of a map")
    _add_map_args(p)
    p.add_argument("--tol", dest="jet_tol", type=float, default=None, help="certificate threshold")
    p.add_argument("--details", action="store_true", help="include the normalizing isotropies")

    p = add("act", cmd_act, "apply an isotropy pair to a map")
    _add_map_args(p)
    p.add_argument("--gamma", help="source isotropy JSON (file, inline or '-')")
    p.add_argument("--gamma-prime", dest="gamma_prime", help="target isotropy JSON")

    p = add("stabilizer", cmd_stabilizer, "classify the stabilizer of a map")
    _add_map_args(p)

    p = add("rank", cmd_rank, "rank of the orbit map at the catalog base point")
    p.add_argument("--family", type=int, required=True, choices=(2, 3))
    p.add_argument("--s0", type=float, required=True)
    p.add_argument("--step", type=float, default=RANK_STEP)
    p.add_argument("--rel-tol", dest="rel_tol", type=float, default=RANK_REL_TOL)

    p = add("sweep", cmd_sweep, "classify recentered catalog maps over a grid of base points")
    p.add_argument("--base-family", "--family", dest="family", type=int, required=True, choices=(1, 2, 3))
    p.add_argument("--base-s", "--s", dest="s", type=float, default=0.0)
    p.add_argument("--grid-spec", "--grid", dest="grid", default="polar:rmax=0.5,nr=10,ntheta=5,u=0",
                   help="polar:rmax=,nr=,ntheta=,u= | ray:angle=,rmax=,n=,u= | box:rmax=,n=,umax=")
    p.add_argument("--s-hi", dest="s_hi", type=float, default=0.5, help="upper end of the coverage window")
    p.add_argument("--no-orient", dest="no_orient", action="store_true",
                   help="do not compose with the sign-reversing target isotropy")

    p = add("accumulate", cmd_accumulate, "search an orbit for points near another normal form")
    p.add_argument("--target-family", dest="target_family", type=int, default=2, choices=(1, 2, 3))
    p.add_argument("--target-s", dest="target_s", type=float, default=0.5)
    p.add_argument("--source-family", dest="source_family", type=int, default=3, choices=(1, 2, 3))
    p.add_argument("--source-s", dest="source_s", type=float, default=0.0)
    p.add_argument("--radius", type=float, default=1.0)
    p.add_argument("--n-grid", dest="n_grid", type=int, default=20)
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--threshold", type=float, default=1e-2)

    p = add("census", cmd_census, "count connected components of the catalog")
    p.add_argument("--s-max", dest="s_max", type=float, default=2.0)
    p.add_argument("--ds", type=float, default=0.05)

    p = add("verify", cmd_verify, "run the acceptance suite")
    p.add_argument("--suite", default="all", help="'all' or comma-separated criterion numbers")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = resolve_config(args)
        code = args.func(args, cfg)
        return int(code or 0)
    except CRMapsError as exc:
        err = {"error": type(exc).__name__, "message": str(exc)}
        for attr in ("certificate", "residuals", "report"):
            if getattr(exc, attr, None) is not None:
                err[attr] = getattr(exc, attr)
        sys.stderr.write(dumps(err) + "\n")
        return 1
    except (ValueError, TypeError, OSError, KeyError, json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        parser.print_usage(sys.stderr)
        sys.stderr.write(f"crmaps: error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
