"""Command-line front end.

Subcommands: ``diagnose`` (weight constants), ``run`` (experiment from a
config file), ``sparse-demo`` (stopping-time and median decompositions with
their certificates) and ``norm`` (Morrey norm of a function file).

Exit codes: 0 success, 2 malformed input or unknown experiment, 3 weight
outside its domain (``alpha <= -n`` or a nonpositive density), 4 grid size
cap exceeded.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .experiments import ConfigError, load_config, run_experiment
from .grid import (DyadicGrid, GridFunction, GridSizeError, Weight, WeightDomainError,
                   function_from_csv, grid_for_cell_count, read_cell_csv, weight_from_power)
from .morrey import MorreyParams, morrey_norm
from .sparse import (cz_sparse, lerner_certificate, lerner_decompose, plain_sparse_lambda,
                     stopping_report, validate_sparse)
from .weights import _json_safe, power_weight_classifier, weight_report

EXIT_INPUT = 2
EXIT_DOMAIN = 3
EXIT_SIZE = 4


class InputError(ValueError):
    pass


def _levels(text: str) -> list:
    try:
        out = [int(t) for t in text.replace(",", " ").split()]
    except ValueError as exc:
        raise InputError(f"bad --levels {text!r}") from exc
    if not out:
        raise InputError("--levels is empty")
    return out


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc


def _weight_from_file(path: str, dim: int, J: int) -> Weight:
    try:
        dens = read_cell_csv(_read(path))
        grid = grid_for_cell_count(dens.size, dim, J)
    except ValueError as exc:
        if isinstance(exc, (InputError, GridSizeError)):
            raise
        raise InputError(f"{path}: {exc}") from exc
    if np.any(~np.isfinite(dens)):
        raise InputError(f"{path}: non-finite density")
    if np.any(dens <= 0):
        raise WeightDomainError(f"{path}: weight densities must be positive")
    return Weight(grid, dens.reshape(grid.shape))


def _power_weight(alpha: float, grid: DyadicGrid) -> Weight:
    if alpha <= -grid.dim:
        raise WeightDomainError(f"|x|^{alpha} is not locally integrable in dimension {grid.dim}")
    if alpha == 0:
        return Weight.lebesgue(grid)
    return weight_from_power(grid, alpha)


def _weights(args, default_power=None) -> list:
    """``(label, Weight)`` pairs from --power/--levels or --weight.

    With neither flag, ``default_power`` is used when given.
    """
    if args.power is None and args.weight is None and default_power is not None:
        args.power = default_power
    if (args.power is None) == (args.weight is None):
        raise InputError("give exactly one of --power and --weight")
    if args.weight is not None:
        w = _weight_from_file(args.weight, args.dim, args.J)
        return [(f"L={w.grid.L}", w)]
    out = []
    for L in _levels(args.levels):
        g = DyadicGrid(args.dim, args.J, L)
        out.append((f"L={L}", _power_weight(args.power, g)))
    return out


# -- subcommands -----------------------------------------------------------------------

def cmd_diagnose(args) -> int:
    if not 0 < args.q <= args.p:
        raise InputError("need 0 < q <= p")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lines = []
    reports = {}
    for label, w in _weights(args):
        rep = weight_report(w, args.p, args.q)
        reports[label] = rep
        (out / f"diagnose_{label.replace('=', '')}.json").write_text(rep.to_json(indent=2))
        lines.append(f"[{label}]")
        lines.append(f"  A_q constants   {', '.join(f'q={k}: {v:.6g}' for k, v in rep.a_q_constants.items())}")
        lines.append(f"  A_1 constant    {rep.a1_const:.6g}")
        lines.append(f"  A_inf estimate  {rep.a_inf_est:.6g}")
        lines.append(f"  RH epsilon      {rep.rh_epsilon:.6g}")
        lines.append(f"  doubling        {rep.doubling_const:.6g}")
        lines.append(f"  B_pq constant   {rep.bpq_const:.6g}")
        lines.append(f"  WIC constant    {rep.wic_const:.6g}")
    if args.power is not None and 1 < args.q:
        pc = power_weight_classifier(args.power, args.p, args.q, args.dim)
        n = args.dim
        flags = {
            "classes": pc.__dict__,
            "HLM_lower_boundary": abs(args.power + args.q * n / args.p) < 1e-12,
            "HLM_upper_boundary": abs(args.power - n * (args.q - args.q / args.p)) < 1e-12,
        }
        (out / "classes.json").write_text(json.dumps(_json_safe(flags), indent=2))
        lines.append("[power-weight classes]")
        for k, v in pc.__dict__.items():
            lines.append(f"  {k:<20}{v}")
        if flags["HLM_lower_boundary"]:
            lines.append("  alpha = -qn/p: M is bounded, singular integrals are not")
    text = "\n".join(lines) + "\n"
    (out / "diagnose.txt").write_text(text)
    sys.stdout.write(text)
    return 0


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    manifest = run_experiment(cfg, out_dir=args.out, plot=args.plot)
    result = manifest["result"]
    per = {}
    for a, L, m, v in result.rows:
        per.setdefault((a, L), []).append(f"{m}={v:.4g}" if isinstance(v, float) else f"{m}={v}")
    for (a, L), items in per.items():
        print(f"alpha={a} L={L}: " + " ".join(items))
    print(f"wrote {', '.join(manifest['files'])} and {cfg.experiment}.json "
          f"to {args.out or cfg.out_dir}")
    return 0


def _function_for(args, grid: DyadicGrid) -> GridFunction:
    if args.function is not None:
        try:
            return function_from_csv(_read(args.function), grid)
        except ValueError as exc:
            if isinstance(exc, InputError):
                raise
            raise InputError(f"{args.function}: {exc}") from exc
    if args.constant is not None:
        return GridFunction.constant(grid, args.constant)
    rng = np.random.default_rng(args.seed)
    return GridFunction(grid, rng.normal(size=grid.shape))


def cmd_sparse_demo(args) -> int:
    (label, w), *rest = _weights(args, default_power=0.0)
    if rest:
        raise InputError("sparse-demo takes a single level")
    g = w.grid
    lam = plain_sparse_lambda(g.dim) if args.lam is None else args.lam
    if not 0 < lam <= plain_sparse_lambda(g.dim):
        raise InputError(f"--lam must lie in (0, {plain_sparse_lambda(g.dim)}]")
    if args.a <= 2 ** g.dim:
        raise InputError(f"--a must exceed 2^n = {2 ** g.dim}")
    f = _function_for(args, g)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    fam = cz_sparse(w, g.root, args.a)
    srep = stopping_report(w, fam, args.a)
    vrep = validate_sparse(fam, 2 ** g.dim / args.a)
    (out / "cz_family.json").write_text(fam.to_json())

    dec = lerner_decompose(f, g.root, lam)
    cert = lerner_certificate(f, dec)
    (out / "lerner_family.json").write_text(dec.family.to_json())
    report = {
        "grid": {"dim": g.dim, "J": g.J, "L": g.L},
        "lambda": lam,
        "a": args.a,
        "cz": {"levels": [len(lv) for lv in fam.levels], "lower_slack": srep.lower_slack,
               "upper_slack": srep.upper_slack, "sparsity_slack": vrep.sparsity_slack,
               "disjoint_slack": vrep.disjoint_slack, "nested_slack": vrep.nested_slack},
        "lerner": {"m0": dec.m0, "selected": len(dec.family) - 1,
                   "empty_family": len(dec.family) == 1,
                   "level_measures": dec.level_measures, "level_ratios": cert.level_ratios,
                   "min_pointwise_slack": cert.min_slack, "g_slack": cert.g_slack,
                   "alpha_slack": cert.alpha_slack, "residual_max": dec.residual_max,
                   "certificate_ok": cert.ok},
    }
    (out / "certificate.json").write_text(json.dumps(_json_safe(report), indent=2))
    print(f"stopping-time family ({label}, a={args.a}):")
    for k, lv in enumerate(fam.levels):
        print(f"  level {k}: {len(lv)} cubes " + " ".join(f"{Q.level}:{Q.index}" for Q in lv[:8])
              + (" ..." if len(lv) > 8 else ""))
    if len(dec.family) == 1:
        print("median decomposition: empty family (no cube selected)")
    else:
        print("median decomposition:")
        for k, lv in enumerate(dec.family.levels):
            print(f"  level {k}: {len(lv)} cubes, measure {dec.level_measures[k]:.6g}")
    print(f"pointwise certificate slack {cert.min_slack:.6g} "
          f"({'ok' if cert.ok else 'VIOLATED'})")
    return 0


def cmd_norm(args) -> int:
    (label, w), *rest = _weights(args, default_power=0.0)
    if rest:
        raise InputError("norm takes a single level")
    if not 0 < args.q <= args.p:
        raise InputError("need 0 < q <= p")
    f = _function_for(args, w.grid)
    if args.flavor == "samko":
        params = MorreyParams.samko(args.p, args.q, w)
    else:
        params = MorreyParams.komori_shirai(args.p, args.q, w)
    val, Q = morrey_norm(f, params, return_cube=True)
    print(f"{args.flavor} norm = {val!r} attained at level {Q.level}, index {Q.index}")
    if args.s is not None:
        if not 0 < args.s <= args.q:
            raise InputError("need 0 < s <= q")
        sparams = MorreyParams(args.p, args.s, params.flavor, w2=w, w1=params.w1)
        print(f"{args.flavor} norm with q=s={args.s}: {morrey_norm(f, sparams)!r}")
    return 0


# -- parser ----------------------------------------------------------------------------

def _add_weight_args(sp, levels_default="8"):
    sp.add_argument("--power", type=float, help="weight |x|^alpha (sparse-demo and norm default to 0)")
    sp.add_argument("--weight", help="weight density CSV (cell_index,value)")
    sp.add_argument("--dim", type=int, default=1, choices=(1, 2))
    sp.add_argument("--J", type=int, default=0, help="root cube side is 2^J")
    sp.add_argument("--levels", default=levels_default, help="comma separated depths")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="morreylab", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    d = sub.add_parser("diagnose", help="weight-class constants and power-weight flags")
    _add_weight_args(d, "6,8,10")
    d.add_argument("--p", type=float, required=True)
    d.add_argument("--q", type=float, required=True)
    d.add_argument("--out", default="diagnose_out")
    d.set_defaults(func=cmd_diagnose)

    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config")
    r.add_argument("--out", default=None, help="output directory (overrides the config)")
    r.add_argument("--plot", action="store_true", help="also write an SVG plot")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sparse-demo", help="sparse families and their certificates")
    _add_weight_args(s)
    s.add_argument("--function", help="function CSV (default: seeded Gaussian values)")
    s.add_argument("--constant", type=float, help="use a constant function")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--lam", type=float, default=None, help="default 2^(-n-2)")
    s.add_argument("--a", type=float, default=8.0, help="stopping-time ratio, > 2^n")
    s.add_argument("--out", default="sparse_out")
    s.set_defaults(func=cmd_sparse_demo)

    n = sub.add_parser("norm", help="Morrey norm of a function file")
    _add_weight_args(n)
    n.add_argument("--function", help="function CSV")
    n.add_argument("--constant", type=float)
    n.add_argument("--seed", type=int, default=0)
    n.add_argument("--p", type=float, required=True)
    n.add_argument("--q", type=float, required=True)
    n.add_argument("--s", type=float, default=None, help="also report the norm with exponent s in place of q")
    n.add_argument("--flavor", choices=("samko", "komori-shirai"), default="samko")
    n.set_defaults(func=cmd_norm)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except WeightDomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except GridSizeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SIZE
    except (InputError, ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
