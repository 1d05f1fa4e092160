"""Command-line interface: ``badflow {orbit, bad-check, cantor, scan}``.

Every output carries a manifest (command, resolved configuration, tool
version, seed).  Wall-clock time goes to stderr, and for ``cantor`` to
run.json, so that equal manifests give byte-identical payloads.
Exit codes: 0 success, 2 usage or invalid input, 3 resource cap hit.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from fractions import Fraction
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .errors import ResourceError
from .flows import Weight
from .parallel import resolve_workers

EXIT_OK, EXIT_USAGE, EXIT_RESOURCE = 0, 2, 3
ORBIT_HEADER = ["t", "lambda1", "certified_floor_so_far"]


class UsageError(ValueError):
    pass


# ---------------------------------------------------------------- helpers

def _number(text: str) -> float:
    """A float, also accepting fractions such as 1/2."""
    try:
        return float(Fraction(text))
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")


def _weight(values, n: Optional[int] = None) -> Weight:
    if values is None:
        if n is None:
            raise UsageError("--weight is required")
        values = [1.0 / n] * n
    if n is not None and len(values) != n:
        raise UsageError(f"--n {n} does not match a weight of length {len(values)}")
    if abs(math.fsum(values) - 1.0) > 1e-9:
        raise UsageError(f"weight must sum to 1, got {math.fsum(values)!r}")
    w = Weight(values)
    w.require_standard()
    return w


def load_schema(name: str) -> dict:
    """Shipped JSON schema, e.g. ``load_schema("tree")``."""
    from importlib import resources
    return json.loads(resources.files("badflow").joinpath(f"schemas/{name}.schema.json").read_text())


def manifest(command: str, config: dict, seed: Optional[int] = None) -> dict:
    return {"command": command, "config": config, "version": __version__, "seed": seed}


def _dump(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=False, allow_nan=False) + "\n"


def _emit(text: str, out: Optional[str]) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _clean(v):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, np.ndarray):
        return _clean(v.tolist())
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else None
    return v


# ---------------------------------------------------------------- orbit

def cmd_orbit(args) -> int:
    from .diophantine import XVec, certified_floor, orbit_trace
    x = XVec.of(args.x)
    w = _weight(args.weight)
    conv = {"aV": "a_V", "dU": "d_U"}[args.convention]
    tr = orbit_trace(x, w, conv, T=args.T, step=args.step)
    pair = np.minimum(tr.lambda1[:-1], tr.lambda1[1:]) * \
        np.exp(-(1 + w.r[0]) * np.diff(tr.times) / 2)
    running = np.concatenate([[tr.lambda1[0]], np.minimum.accumulate(pair)])
    # the last entry equals the trace's own floor
    assert len(tr.times) == 1 or running[-1] == certified_floor(tr.times, tr.lambda1, w.r[0])
    cfg = {"x": list(x.labels), "weight": list(w.r), "convention": conv, "T": args.T,
           "step": args.step}
    buf = io.StringIO()
    buf.write("# manifest: " + json.dumps(manifest("orbit", cfg)) + "\n")
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(ORBIT_HEADER)
    for t, lam, fl in zip(tr.times, tr.lambda1, running):
        wr.writerow([repr(float(t)), repr(float(lam)), repr(float(fl))])
    _emit(buf.getvalue(), args.out)
    return EXIT_OK


# ---------------------------------------------------------------- bad-check

def cmd_bad_check(args) -> int:
    from .diophantine import (XVec, badness_constant_direct, classify,
                              dual_only_zero_solution)
    x = XVec.of(args.x)
    w = _weight(args.weight)
    if x.n != w.n:
        raise UsageError(f"{x.n} coordinates but a weight of length {w.n}")
    Q = int(args.Q)
    if Q < 1:
        raise UsageError("--Q must be >= 1")
    c = args.c if args.c is not None else args.tau
    N = args.N if args.N is not None else Q + 1
    cfg = {"x": list(x.labels), "weight": list(w.r), "Q": Q, "mode": args.mode,
           "tau": args.tau, "c": c, "N": N}
    out = {"manifest": manifest("bad-check", cfg)}
    if args.mode in ("direct", "both"):
        rep = badness_constant_direct(x, w, Q)
        out["direct"] = {"constant": rep.constant, "witness": list(rep.witness),
                         "horizon": rep.horizon, "class": classify(rep.constant, args.tau)}
    if args.mode in ("dual", "both"):
        ok = dual_only_zero_solution(x, w, c, N)
        out["dual"] = {"c": c, "N": N, "only_zero_solution": ok,
                       "class": "bad at this scale" if ok else "not bad at this scale"}
    if args.mode == "both":
        agree = out["direct"]["class"] == out["dual"]["class"]
        out["consistency"] = {"agree": agree, "verdict": "consistent" if agree else "inconsistent"}
    _emit(_dump(_clean(out)), args.out)
    return EXIT_OK


# ---------------------------------------------------------------- construction

def _config_from(args):
    from .cantor.config import ConstructionConfig
    w = _weight(args.weight, args.n)
    if args.R < 2:
        raise UsageError("--R must be >= 2")
    if args.m < 1:
        raise UsageError("--m must be >= 1")
    return ConstructionConfig(
        weight=w, R=args.R, m=args.m, curve_name=args.curve,
        rho=getattr(args, "cfg_rho", 0.25), rho1=args.rho1, depth=args.depth, eta=args.eta, l_min=args.l_min, l_max=args.l_max,
        l_generic=args.l_generic, grid=args.node_grid, refine_rounds=args.refine_rounds,
        max_nodes=args.max_nodes)


def _tree_json(tree, cfg, man) -> dict:
    from .cantor.richness import index_ranges
    levels = []
    for lev in tree.levels:
        dead = []
        for d in lev.dead:
            lo, hi = cfg.node_interval(lev.q, d.index)
            dead.append({"index": d.index, "interval": [lo, hi], "witness": list(d.witness),
                         "s_star": d.s_star, "witness_min": d.witness_min,
                         "witness_max": d.witness_max, "indeterminate": d.indeterminate,
                         "classification": d.classification.to_dict()
                         if d.classification is not None else None})
        levels.append({"q": lev.q, "node_length": cfg.node_length(lev.q),
                       "alive_count": int(lev.alive.size),
                       "alive_ranges": [list(r) for r in index_ranges(lev.alive)],
                       "dead": dead})
    return {"manifest": man, "levels": levels}


SURVIVOR_HEADER_BASE = ["index", "lo", "hi", "midpoint"]


def cmd_cantor(args) -> int:
    from .cantor.recheck import derived_dual_threshold, survivor_checks
    from .cantor.tree import build_sequence
    t0 = time.perf_counter()
    cfg = _config_from(args)
    workers = resolve_workers(args.workers)
    res = build_sequence(cfg, workers=workers, classify=not args.no_classify)
    tree = res.tree
    cdict = dict(cfg.to_dict(), classify=not args.no_classify)
    man = manifest("cantor", cdict)
    outdir = Path(args.out_dir)
    outdir.mkdir(parents=True, exist_ok=True)

    surv = tree.survivors()
    ivals = np.array([cfg.node_interval(cfg.depth, int(i)) for i in surv]).reshape(-1, 2)
    mids = ivals.mean(axis=1)
    table, direct, dual = survivor_checks(cfg, mids, workers)
    c_dual, n_dual = derived_dual_threshold(cfg)

    rich = res.richness.to_dict()
    rich["survivor_checks"] = {
        "recheck_radius": 0.98 * cfg.kappa,
        "recheck_min_by_q": [float(v) for v in table.min(axis=0)] if surv.size else [],
        "recheck_all_pass": bool(np.all(table > 0.98 * cfg.kappa)),
        "direct_horizon": int(math.floor(cfg.b ** cfg.depth * (1 + 1e-12))),
        "direct_min_lower_bound": float(direct.min()) if surv.size else None,
        "direct_all_positive": bool(np.all(direct > 0)),
        "dual_c": c_dual, "dual_N_max": n_dual,
        "dual_min_constant": float(dual.min()) if surv.size else None,
        "dual_all_pass": bool(np.all(dual >= c_dual)),
    }
    (outdir / "tree.json").write_text(_dump(_clean(_tree_json(tree, cfg, man))))
    (outdir / "richness.json").write_text(_dump(_clean({"manifest": man, **rich})))

    buf = io.StringIO()
    buf.write("# manifest: " + json.dumps(_clean(man)) + "\n")
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(SURVIVOR_HEADER_BASE + [f"norm_q{q}" for q in range(cfg.depth + 1)]
                + ["direct_lower_bound", "dual_constant"])
    for k, idx in enumerate(surv):
        wr.writerow([int(idx), repr(float(ivals[k, 0])), repr(float(ivals[k, 1])),
                     repr(float(mids[k]))] + [repr(float(v)) for v in table[k]]
                    + [repr(float(direct[k])), repr(float(dual[k]))])
    (outdir / "survivors.csv").write_text(buf.getvalue())

    elapsed = time.perf_counter() - t0
    (outdir / "run.json").write_text(_dump({"manifest": man, "wall_clock_seconds": elapsed,
                                            "workers": workers}))
    print(f"survivors: {surv.size}; wall-clock {elapsed:.2f} s with {workers} worker(s)",
          file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------- scans

def _lattice_from(args, cfg_needed: bool = False):
    from .lattice import LatticeBasis
    if args.basis is not None:
        try:
            B = np.array(json.loads(args.basis), dtype=float)
        except (json.JSONDecodeError, ValueError) as exc:
            raise UsageError(f"--basis must be a JSON matrix: {exc}")
        if B.ndim != 2 or B.shape[0] != B.shape[1]:
            raise UsageError("--basis must be square")
        return LatticeBasis(B, unimodular=False), {"basis": B.tolist()}
    if args.lattice == "identity":
        return LatticeBasis(np.eye(args.dim), unimodular=True), {"lattice": "identity",
                                                                   "dim": args.dim}
    if args.lattice == "curve":
        from .cantor.taxonomy import lattice_at
        cfg = _config_from(args)
        if args.s is None or args.at_q is None:
            raise UsageError("--lattice curve needs --s and --at-q")
        return lattice_at(cfg, args.at_q, args.s), dict(cfg.to_dict(), lattice="curve",
                                                         s=args.s, at_q=args.at_q)
    raise UsageError(f"unknown lattice {args.lattice!r}")


def scan_sublattices(args) -> dict:
    from .lattice import enumerate_primitive_sublattices, sublattice_covolume
    L, ldict = _lattice_from(args)
    subs = enumerate_primitive_sublattices(L, args.k, args.rho, method=args.method)
    items = [{"columns": [[int(v) for v in col] for col in S.columns()],
              "covolume": float(sublattice_covolume(S, L))} for S in subs]
    cfg = dict(ldict, k=args.k, rho=args.rho, method=args.method)
    return {"manifest": manifest("scan sublattices", cfg), "count": len(subs),
            "sublattices": items if args.list else []}


def scan_minima(args) -> dict:
    from .lattice import successive_minima
    L, ldict = _lattice_from(args)
    prof = successive_minima(L)
    return {"manifest": manifest("scan minima", ldict),
            "minima": prof.minima, "product": float(np.prod(prof.minima)),
            "witnesses": prof.witnesses.T, "coefficients": prof.coefficients.T.astype(int)}


def scan_dangerous(args) -> dict:
    from .cantor.taxonomy import detect_dangerous
    cfg = _config_from(args)
    recs = detect_dangerous(args.q, args.l, cfg, region=args.region, extreme=args.extreme)
    c = dict(cfg.to_dict(), q=args.q, l=args.l, region=args.region, extreme=args.extreme)
    return {"manifest": manifest("scan dangerous", c), "count": len(recs),
            "records": [r.to_dict() for r in recs]}


def scan_eq(args) -> dict:
    from .cantor.taxonomy import eq_fraction, eq_membership
    cfg = _config_from(args)
    c = dict(cfg.to_dict(), q=args.q, s=args.s, grid=args.grid)
    out = {"manifest": manifest("scan eq", c)}
    if args.s is not None:
        out["membership"] = []
        for q in args.q:
            hit, wit = eq_membership(args.s, q, cfg)
            out["membership"].append({"q": q, "member": hit,
                                      "witness": list(wit) if wit is not None else None})
    else:
        out["fractions"] = [{"q": q, "fraction": eq_fraction(q, cfg, grid=args.grid)}
                            for q in args.q]
    return out


def scan_nondiv(args) -> dict:
    from .cantor.taxonomy import nondivergence_fraction
    cfg = _config_from(args)
    J = tuple(args.J) if args.J is not None else cfg.domain
    c = dict(cfg.to_dict(), q=args.q, J=list(J), eps=args.eps, grid=args.grid)
    reps = [nondivergence_fraction(args.q, J, e, cfg, grid=args.grid) for e in args.eps]
    return {"manifest": manifest("scan nondiv", c),
            "reports": [{"eps": r.eps, "fraction": r.fraction, "grid": r.grid,
                         "hypothesis_holds": r.hypothesis_holds,
                         "hypothesis_min_ratio": r.hypothesis_min_ratio} for r in reps]}


def scan_shah(args) -> dict:
    import warnings
    from .cantor.taxonomy import empirical_shah_constant
    cfg = _config_from(args)
    c = dict(cfg.to_dict(), grade=args.grade, t=args.t, samples=args.samples)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        val = empirical_shah_constant(cfg, args.grade, args.t, args.samples, args.seed)
    return {"manifest": manifest("scan shah", c, seed=args.seed), "empirical_constant": val,
            "rho_power": cfg.rho ** (cfg.n + 1),
            "warnings": [str(w.message) for w in caught]}


SCANS = {"sublattices": scan_sublattices, "minima": scan_minima, "dangerous": scan_dangerous,
         "eq": scan_eq, "nondiv": scan_nondiv, "shah": scan_shah}


def cmd_scan(args) -> int:
    _emit(_dump(_clean(SCANS[args.scan](args))), args.out)
    return EXIT_OK


# ---------------------------------------------------------------- parser

def _config_parent(with_rho: bool = True) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("construction")
    g.add_argument("--n", type=int, default=None, help="dimension (defaults to len(weight))")
    g.add_argument("--curve", default="moment", choices=["moment"])
    g.add_argument("--weight", type=_number, nargs="+", default=None,
                   help="r_1 >= ... >= r_n summing to 1 (default uniform)")
    g.add_argument("--R", type=int, default=16)
    g.add_argument("--m", type=int, default=1)
    g.add_argument("--depth", type=int, default=4)
    if with_rho:
        g.add_argument("--rho", dest="cfg_rho", type=float, default=0.25)
    g.add_argument("--rho1", type=float, default=0.05)
    g.add_argument("--eta", type=float, default=None)
    g.add_argument("--l-min", type=int, default=1)
    g.add_argument("--l-max", type=int, default=None)
    g.add_argument("--l-generic", type=int, default=None)
    g.add_argument("--node-grid", type=int, default=9, help="initial samples per node")
    g.add_argument("--refine-rounds", type=int, default=6)
    g.add_argument("--max-nodes", type=int, default=10_000_000)
    return p


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="badflow", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    conf = _config_parent()

    p = sub.add_parser("orbit", help="lambda_1 along a diagonal orbit (CSV)")
    p.add_argument("--x", nargs="+", required=True, help="coordinates, e.g. '(sqrt(5)-1)/2'")
    p.add_argument("--weight", type=_number, nargs="+", required=True)
    p.add_argument("--convention", choices=["aV", "dU"], default="aV")
    p.add_argument("--T", type=float, default=30.0)
    p.add_argument("--step", type=float, default=0.01)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_orbit)

    p = sub.add_parser("bad-check", help="direct and dual badness tests (JSON)")
    p.add_argument("--x", nargs="+", required=True)
    p.add_argument("--weight", type=_number, nargs="+", required=True)
    p.add_argument("--Q", type=int, required=True)
    p.add_argument("--mode", choices=["direct", "dual", "both"], default="both")
    p.add_argument("--tau", type=float, default=0.01, help="classification threshold")
    p.add_argument("--c", type=float, default=None, help="dual constant (default tau)")
    p.add_argument("--N", type=float, default=None, help="dual scale (default Q + 1)")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_bad_check)

    p = sub.add_parser("cantor", parents=[conf], help="build the R-sequence")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--no-classify", action="store_true")
    p.set_defaults(func=cmd_cantor)

    p = sub.add_parser("scan", help="module-level scans (JSON)")
    ssub = p.add_subparsers(dest="scan", required=True)
    lat = argparse.ArgumentParser(add_help=False)
    lat.add_argument("--lattice", choices=["identity", "curve"], default="identity")
    lat.add_argument("--dim", type=int, default=3)
    lat.add_argument("--basis", default=None, help="JSON matrix whose columns are the basis")
    lat.add_argument("--s", type=float, default=None)
    lat.add_argument("--at-q", type=float, default=None)
    outp = argparse.ArgumentParser(add_help=False)
    outp.add_argument("--out", default=None)

    s = ssub.add_parser("sublattices", parents=[_config_parent(with_rho=False), lat, outp])
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--rho", type=float, required=True, help="covolume bound")
    s.add_argument("--method", choices=["auto", "general", "dual"], default="auto")
    s.add_argument("--list", action="store_true", help="include every sublattice")
    ssub.add_parser("minima", parents=[conf, lat, outp])
    s = ssub.add_parser("dangerous", parents=[conf, outp])
    s.add_argument("--q", type=int, required=True)
    s.add_argument("--l", type=int, required=True)
    s.add_argument("--region", type=float, nargs=2, default=None)
    s.add_argument("--extreme", action="store_true")
    s = ssub.add_parser("eq", parents=[conf, outp])
    s.add_argument("--q", type=int, nargs="+", required=True)
    s.add_argument("--s", type=float, default=None, help="single point (else a grid fraction)")
    s.add_argument("--grid", type=int, default=10001)
    s = ssub.add_parser("nondiv", parents=[conf, outp])
    s.add_argument("--q", type=int, required=True)
    s.add_argument("--eps", type=float, nargs="+", required=True)
    s.add_argument("--J", type=float, nargs=2, default=None)
    s.add_argument("--grid", type=int, default=2001)
    s = ssub.add_parser("shah", parents=[conf, outp])
    s.add_argument("--grade", type=int, default=1)
    s.add_argument("--t", type=float, default=1.0)
    s.add_argument("--samples", type=int, default=100)
    s.add_argument("--seed", type=int, default=0)
    for name, sp in ssub.choices.items():
        sp.set_defaults(func=cmd_scan)
    return ap


def main(argv: Optional[list] = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:   # argparse reports usage errors with code 2
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ResourceError as exc:
        print(f"badflow: resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (ValueError, TypeError, ZeroDivisionError, KeyError) as exc:
        print(f"badflow: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
