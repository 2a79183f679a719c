"""Command-line front end.

    linopgp [global flags] bench {integro,heat,fractional} [--noisy]
    linopgp [global flags] fit CONFIG.json
    linopgp [global flags] gapgene synth --lambda L --diff D [--gene G] [--points N]
    linopgp [global flags] gapgene fit --data CSV --gene G [--table JSON]

Global flags (accepted before or after the sub-command): --seed, --restarts,
--max-iter, --tol, --out.

Exit codes: 0 success; 1 usage, parse, configuration or malformed-input
errors; 2 training or numerical failure, or input that leaves nothing to fit.
"""
import argparse
import csv
import json
import logging
import os
import sys
import time

import numpy as np

from . import benchmarks, gapgene
from .dsl import parse_operator
from .errors import (DataGenerationError, LinopGPError, NoUsablePointsError, NumericalError,
                     TrainingError)
from .gp import JointDataset, posterior
from .trainer import TrainConfig, fit

EXIT_OK, EXIT_USAGE, EXIT_FAILURE = 0, 1, 2

GLOBAL_DEFAULTS = {"seed": 0, "restarts": None, "max_iter": None, "tol": None, "out": "out"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _global_flags(parser, suppress):
    kw = {"default": argparse.SUPPRESS} if suppress else {}
    parser.add_argument("--seed", type=int, help="random seed (unsigned 64-bit)", **kw)
    parser.add_argument("--restarts", type=int, help="optimiser restarts", **kw)
    parser.add_argument("--max-iter", dest="max_iter", type=int, help="L-BFGS iterations per restart", **kw)
    parser.add_argument("--tol", type=float, help="gradient tolerance", **kw)
    parser.add_argument("--out", help="output directory", **kw)


def build_parser():
    parser = _Parser(prog="linopgp", description="GP inference of linear operator parameters.")
    _global_flags(parser, suppress=False)
    parser.set_defaults(**GLOBAL_DEFAULTS)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("bench", help="run a synthetic benchmark")
    _global_flags(p, suppress=True)
    p.add_argument("name", choices=benchmarks.NAMES)
    p.add_argument("--noisy", action="store_true", help="noisy variant (integro only)")

    p = sub.add_parser("fit", help="fit user data described by a JSON config")
    _global_flags(p, suppress=True)
    p.add_argument("config")

    p = sub.add_parser("gapgene", help="gap-gene synthetic data and inference")
    _global_flags(p, suppress=True)
    gsub = p.add_subparsers(dest="gap_command", parser_class=_Parser)
    gsub.required = True
    s = gsub.add_parser("synth", help="write simulator-generated expression CSV")
    _global_flags(s, suppress=True)
    s.add_argument("--lambda", dest="lam", type=float, required=True, help="decay rate (1/min)")
    s.add_argument("--diff", type=float, required=True, help="diffusion rate (%%EL^2/min)")
    s.add_argument("--gene", default=gapgene.SYNTH_GENE)
    s.add_argument("--points", type=int, default=60, help="number of (t, x) observation points")
    s.add_argument("--table", help="JSON gene-table override")
    f = gsub.add_parser("fit", help="infer decay and diffusion for one gene")
    _global_flags(f, suppress=True)
    f.add_argument("--data", required=True, help="expression CSV")
    f.add_argument("--gene", required=True)
    f.add_argument("--table", help="JSON gene-table override")
    return parser


def _train_overrides(args):
    kw = {"seed": args.seed}
    if args.restarts is not None:
        kw["restarts"] = args.restarts
    if args.max_iter is not None:
        kw["max_iters"] = args.max_iter
    if args.tol is not None:
        kw["grad_tol"] = args.tol
    return kw


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _timing(t0):
    return {"timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z", time.localtime(t0)),
            "wall_time_s": time.time() - t0}


# -- bench --

def cmd_bench(args):
    spec = benchmarks.BenchmarkSpec(args.name, noisy=args.noisy, seed=args.seed)
    cfg = benchmarks.default_train_config(spec, **_train_overrides(args))
    report, grid = benchmarks.run_benchmark(spec, cfg)
    benchmarks.write_outputs(args.out, report, grid)
    print(f"{args.name}: " + ", ".join(f"{k} = {v:.6g}" for k, v in report.phi.items())
          + f"; rel-L2 u = {report.rel_l2_u:.3e}, f = {report.rel_l2_f:.3e} -> {args.out}")
    return EXIT_OK


# -- fit --

def read_dataset_csv(path, dims):
    """Joint dataset from a CSV with header ``kind,<dims...>,value`` and kind in {u, f}."""
    expected = ["kind", *dims, "value"]
    rows = {"u": ([], []), "f": ([], [])}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != expected:
            raise UsageError(f"{path}: expected header {','.join(expected)}, got {header}")
        for row_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(expected):
                raise UsageError(f"{path}: row {row_no}: expected {len(expected)} fields, got {len(row)}")
            kind = row[0].strip()
            if kind not in rows:
                raise UsageError(f"{path}: row {row_no}: kind must be 'u' or 'f', got {kind!r}")
            try:
                vals = [float(c) for c in row[1:]]
            except ValueError as exc:
                raise UsageError(f"{path}: row {row_no}: {exc}") from exc
            if not all(np.isfinite(vals)):
                raise UsageError(f"{path}: row {row_no}: non-finite value")
            rows[kind][0].append(vals[:-1])
            rows[kind][1].append(vals[-1])
    D = len(dims)
    (Xu, yu), (Xf, yf) = rows["u"], rows["f"]
    if not yu and not yf:
        raise NoUsablePointsError(f"{path}: no data rows")
    return JointDataset(np.array(Xu).reshape(-1, D), np.array(yu),
                        np.array(Xf).reshape(-1, D), np.array(yf))


TRAIN_KEYS = {"restarts", "max_iters", "grad_tol", "fd_step", "seed", "noise_u", "noise_f",
              "transforms", "init", "noise_ladder"}


def load_run_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(cfg, dict):
        raise UsageError(f"{path}: top level must be an object")
    for key in ("operator", "data"):
        if key not in cfg:
            raise UsageError(f"{path}: missing required key {key!r}")
    unknown = set(cfg) - {"operator", "data", "dims", "train", "out", "grid"}
    if unknown:
        raise UsageError(f"{path}: unknown keys {sorted(unknown)}")
    train = cfg.get("train", {})
    bad = set(train) - TRAIN_KEYS
    if bad:
        raise UsageError(f"{path}: unknown train settings {sorted(bad)}")
    base = os.path.dirname(os.path.abspath(path))
    # relative paths in the config are relative to the config file
    data = os.path.join(base, cfg["data"])
    out = os.path.join(base, cfg["out"]) if cfg.get("out") else None
    return {"operator": cfg["operator"], "data": data, "dims": tuple(cfg.get("dims", ["x"])),
            "train": train, "out": out, "grid": cfg.get("grid")}


def _eval_points(grid_spec, data, dims):
    """Tensor grid from {dim: [lo, hi, n]}; default spans the data with 200 (1-D) or 50 per axis."""
    X = np.vstack([data.X_u, data.X_f])
    axes = []
    for j, d in enumerate(dims):
        if grid_spec and d in grid_spec:
            lo, hi, n = grid_spec[d]
        else:
            lo, hi, n = float(X[:, j].min()), float(X[:, j].max()), 200 if len(dims) == 1 else 50
        axes.append(np.linspace(float(lo), float(hi), int(n)))
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([m.ravel() for m in mesh])


def _grid_columns(model, dims, X):
    pu = posterior(model, X, "u")
    pf = posterior(model, X, "f")
    grid = {d: X[:, j] for j, d in enumerate(dims)}
    grid.update(mean_u=pu.mean, std_u=pu.std, mean_f=pf.mean, std_f=pf.std)
    return grid


def cmd_fit(args):
    t0 = time.time()
    rc = load_run_config(args.config)
    expr = parse_operator(rc["operator"], rc["dims"])
    data = read_dataset_csv(rc["data"], rc["dims"])
    train = dict(rc["train"])
    train.update({k: v for k, v in _train_overrides(args).items()
                  if k != "seed" or "seed" not in train or args.seed_given})
    cfg = TrainConfig(**train)
    model, rep = fit(data, expr, cfg)
    out = args.out if args.out_given or not rc["out"] else rc["out"]
    os.makedirs(out, exist_ok=True)
    report = {"operator": rc["operator"], "dims": list(rc["dims"]), "n_u": data.n_u,
              "n_f": data.n_f, "nlml": rep.best_nlml, "phi": dict(rep.best.phi),
              "fit": rep.to_dict(), "timing": _timing(t0)}
    for k, v in rep.best.phi.items():
        report.setdefault(k, v)
    _write_json(os.path.join(out, "report.json"), report)
    X = _eval_points(rc["grid"], data, rc["dims"])
    benchmarks.write_grid_csv(os.path.join(out, "grid.csv"), _grid_columns(model, rc["dims"], X))
    print("fit: " + ", ".join(f"{k} = {v:.6g}" for k, v in rep.best.phi.items())
          + f"; nlml = {rep.best_nlml:.6g} -> {out}")
    return EXIT_OK


# -- gapgene --

def _table(path):
    return gapgene.GeneTable.from_json(path) if path else gapgene.GeneTable()


def cmd_gapgene_synth(args):
    table = _table(args.table)
    recs = gapgene.synth_records(args.lam, args.diff, args.gene, args.points, args.seed, table)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "expression.csv")
    gapgene.write_expression_csv(path, recs)
    _write_json(os.path.join(args.out, "truth.json"),
                {"gene": args.gene, "lambda": args.lam, "D": args.diff,
                 "points": args.points, "seed": args.seed})
    print(f"synth: {len(recs)} records for {args.points} points -> {path}")
    return EXIT_OK


def cmd_gapgene_fit(args):
    t0 = time.time()
    gapgene._check_gene(args.gene)
    table = _table(args.table)
    records = gapgene.read_expression_csv(args.data)
    data, dropped = gapgene.build_f_data(records, args.gene, table, return_dropped=True)
    cfg = gapgene.default_gene_config(**_train_overrides(args))
    lam, D, model, rep = gapgene.fit_gene(records, args.gene, table, cfg, return_report=True)
    os.makedirs(args.out, exist_ok=True)
    _write_json(os.path.join(args.out, "report.json"),
                {"gene": args.gene, "lambda": lam, "D": D, "nlml": rep.best_nlml,
                 "n_u": data.n_u, "n_f": data.n_f, "dropped_points": dropped,
                 "fit": rep.to_dict(), "timing": _timing(t0)})
    X = np.vstack([data.X_u, data.X_f])
    ts = np.linspace(X[:, 0].min(), X[:, 0].max(), 30)
    xs = np.linspace(gapgene.X_RANGE[0], gapgene.X_RANGE[1], 58)
    T, Xg = np.meshgrid(ts, xs, indexing="ij")
    pts = np.column_stack([T.ravel(), Xg.ravel()])
    benchmarks.write_grid_csv(os.path.join(args.out, "grid.csv"),
                              _grid_columns(model, gapgene.DIMS, pts))
    print(f"gapgene {args.gene}: lambda = {lam:.6g}, D = {D:.6g} -> {args.out}")
    return EXIT_OK


def _dispatch(args):
    if args.command == "bench":
        return cmd_bench(args)
    if args.command == "fit":
        return cmd_fit(args)
    if args.gap_command == "synth":
        return cmd_gapgene_synth(args)
    return cmd_gapgene_fit(args)


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    args.seed_given = any(a == "--seed" or a.startswith("--seed=") for a in argv)
    args.out_given = any(a == "--out" or a.startswith("--out=") for a in argv)
    try:
        return _dispatch(args)
    except (TrainingError, NumericalError, NoUsablePointsError, DataGenerationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        for line in getattr(exc, "diagnostics", []):
            print(f"  {line}", file=sys.stderr)
        return EXIT_FAILURE
    except (UsageError, LinopGPError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
