"""Command-line front end: sample -> (bench | external solve) -> fit ->
analyze / metrics / export / report.

Exit codes: 0 ok, 2 configuration error, 3 data error, 4 numerical
failure.  Set POLYSENS_THREADS to parallelize per-subdomain solves.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import benchmarks, gsa, metrics, storage
from .config import ConfigError, RunConfig, space_from_config
from .distributions import DistributionError
from .multires import DecompositionError
from .polybasis import BasisConstructionError, DegenerateMomentsError
from .qmc import (UnsupportedDimensionError, mc_design, qmc_design)
from .surrogate import DataError, FitError, TrainingSet, fit, predict_batch

BENCH_MODELS = ("g_function", "ishigami", "field_toy")


def _bench_model(name, a=None, grid=(20, 20)):
    if name == "g_function":
        return benchmarks.g_function(a if a is not None else [0.0, 1.0, 9.0])
    if name == "ishigami":
        return benchmarks.ishigami()
    if name == "field_toy":
        from .distributions import porous_flow_space
        return benchmarks.field_toy(porous_flow_space(), grid=grid)
    raise ConfigError(f"unknown benchmark {name!r}; choose from {BENCH_MODELS}")


def _load_config(args):
    cfg = RunConfig.load(args.config) if getattr(args, "config", None) else RunConfig()
    return cfg


def _make_design(cfg, args):
    space = space_from_config(
        args.space if getattr(args, "space", None) else cfg.space)
    block = dict(cfg.design)
    for key in ("kind", "n", "skip", "seed"):
        v = getattr(args, key, None)
        if v is not None:
            block[key] = v
    n = int(block.get("n", 0))
    if block.get("kind", "qmc") == "mc":
        return mc_design(space, n, int(block.get("seed", 0)))
    return qmc_design(space, n, skip=int(block.get("skip", 1)))


def cmd_sample(args):
    cfg = _load_config(args)
    design = _make_design(cfg, args)
    out = args.out or cfg.paths.get("design")
    if not out:
        raise ConfigError("no output path: pass --out or set paths.design")
    if design.n == 0:
        print("warning: writing header-only design (n=0)", file=sys.stderr)
    storage.save_design(out, design)
    print(f"wrote {design.n} x {design.M} design to {out}")
    return 0


def cmd_bench(args):
    if args.list or args.name is None:
        for name in BENCH_MODELS:
            print(name)
        return 0
    grid = tuple(args.grid) if args.grid else (20, 20)
    model = _bench_model(args.name, a=args.a, grid=grid)
    cfg = _load_config(args)
    block = dict(cfg.design)
    if args.n is not None:
        block["n"] = args.n
    if args.skip is not None:
        block["skip"] = args.skip
    n = int(block.get("n", 1024))
    if block.get("kind", "qmc") == "mc" or args.kind == "mc":
        design = mc_design(model.space, n, int(args.seed or block.get("seed", 0)))
    else:
        design = qmc_design(model.space, n, skip=int(block.get("skip", 1)))
    outputs = np.asarray(model(design.values)).reshape(design.n, -1)
    if args.design_out:
        storage.save_design(args.design_out, design)
        print(f"wrote design to {args.design_out}")
    if args.outputs_out:
        bench_grid = model.meta.get("grid")
        storage.save_outputs(args.outputs_out, outputs,
                             grid=bench_grid, components=("y",))
        print(f"wrote outputs ({outputs.shape[0]} runs x {outputs.shape[1]} "
              f"cells) to {args.outputs_out}")
    if args.reference_out:
        ref = metrics.mc_reference(model, model.space,
                                   n=args.reference_n, seed=args.reference_seed)
        storage.save_reference(args.reference_out, ref)
        print(f"wrote reference stats (n={ref.n}) to {args.reference_out}")
    return 0


def cmd_fit(args):
    cfg = _load_config(args)
    design_path = args.design or cfg.paths.get("design")
    outputs_path = args.outputs or cfg.paths.get("outputs")
    model_path = args.out or cfg.paths.get("model")
    if not (design_path and outputs_path and model_path):
        raise ConfigError("fit needs --design, --outputs and --out "
                          "(or config paths)")
    design = storage.load_design(design_path)
    outputs, grid, _components = storage.load_outputs(outputs_path)
    if outputs.shape[0] != design.n:
        raise DataError(f"design has {design.n} rows but outputs have "
                        f"{outputs.shape[0]}")
    surr = dict(cfg.surrogate)
    if args.nr is not None:
        surr["level"] = args.nr
    if args.no is not None:
        surr["order"] = args.no
    if args.q is not None:
        surr["q"] = args.q
    if args.rcond is not None:
        surr["rcond"] = args.rcond
    if cfg.grid and grid is None:
        grid = (int(cfg.grid["rows"]), int(cfg.grid["cols"]))
    train = TrainingSet(design=design, outputs=outputs, grid=grid)
    model = fit(train, level=int(surr["level"]), order=int(surr["order"]),
                q=float(surr["q"]), rcond=float(surr["rcond"]))
    storage.save_model(model_path, model)
    d = model.diagnostics
    print(f"fitted {model.P} cells: level={model.level} order={model.order} "
          f"q={model.q} coefficients/cell={model.coeffs.shape[1] * model.coeffs.shape[2]}")
    print(f"subdomain rows min={int(d['sd_rows'].min())} "
          f"max={int(d['sd_rows'].max())}, worst condition="
          f"{float(d['sd_cond'].max()):.3e}, gram deviation="
          f"{d['gram_dev_max']:.3e}")
    for w in d["warnings"]:
        print(f"warning: {w}", file=sys.stderr)
    print(f"wrote model to {model_path}")
    return 0


def _parse_indices(spec_text, M):
    want_all = False
    subsets = []
    for tok in (spec_text or "first,total").split(","):
        tok = tok.strip()
        if tok in ("", "first", "total"):
            continue  # always computed
        if tok == "all":
            want_all = True
        elif tok.isdigit():
            subsets.append(tuple(int(ch) for ch in tok))
        else:
            raise ConfigError(f"bad --indices token {tok!r}")
    if want_all:
        return "all"
    return subsets or "none"


def cmd_analyze(args):
    cfg = _load_config(args)
    model_path = args.model or cfg.paths.get("model")
    report_path = args.out or cfg.paths.get("report")
    if not (model_path and report_path):
        raise ConfigError("analyze needs --model and --out (or config paths)")
    model = storage.load_model(model_path)
    var_floor = args.var_floor if args.var_floor is not None \
        else float(cfg.surrogate.get("var_floor", 1e-10))
    interactions = _parse_indices(args.indices, model.M)
    report = gsa.analyze(model, interactions=interactions, var_floor=var_floor)
    payload = _report_payload(report)
    storage.save_json(report_path, payload)
    print(f"wrote report to {report_path} "
          f"({payload['space_averaged']['retained_cells']} of "
          f"{payload['space_averaged']['total_cells']} cells retained)")
    return 0


def _report_payload(report):
    payload = {
        "schema_version": 1,
        "metadata": dict(report.meta, var_floor=report.var_floor,
                         names=list(report.names)),
        "cells": {
            "mean": report.mean,
            "variance": report.variance,
        },
        "first_order": {name: report.first_order[k]
                        for k, name in enumerate(report.names)},
        "total": {name: report.total[k] for k, name in enumerate(report.names)},
        "interactions": {",".join(map(str, k)): v
                         for k, v in report.interactions.items()},
        "space_averaged": report.space_averaged(),
    }
    return payload


def cmd_metrics(args):
    cfg = _load_config(args)
    model_path = args.model or cfg.paths.get("model")
    if not model_path:
        raise ConfigError("metrics needs --model")
    model = storage.load_model(model_path)
    out = {"schema_version": 1}
    if args.test:
        parts = args.test.split(",")
        if len(parts) != 2:
            raise ConfigError("--test wants 'design.csv,outputs.csv'")
        design = storage.load_design(parts[0])
        truth, _, _ = storage.load_outputs(parts[1])
        pred = predict_batch(model, design.values)
        out["rmse"] = metrics.rmse(pred, truth)
        out["relative_mse"] = metrics.relative_mse(pred, truth)
        out["n_test"] = int(design.n)
    if args.reference:
        ref = storage.load_reference(args.reference)
        mean = gsa.mean_from_coeffs(model)
        sd = np.sqrt(gsa.variance_from_coeffs(model))
        out["l2_mean_error"] = metrics.l2_field_error(mean, ref.mean)
        out["l2_sd_error"] = metrics.l2_field_error(sd, ref.sd)
        out["reference_n"] = ref.n
    if len(out) == 1:
        raise ConfigError("metrics needs --test and/or --reference")
    if args.out:
        storage.save_json(args.out, out)
        print(f"wrote metrics to {args.out}")
    else:
        print(storage.dump_json(out), end="")
    return 0


def _export_fields(model, out_dir, var_floor):
    os.makedirs(out_dir, exist_ok=True)
    report = gsa.analyze(model, interactions="none", var_floor=var_floor)
    grid = model.meta.get("grid")
    grid = tuple(grid) if grid else None
    sd = np.sqrt(report.variance)
    logvar = np.where(report.variance >= var_floor,
                      np.log(np.maximum(report.variance, 1e-300)), np.nan)
    fields = {"mean": report.mean, "sd": sd, "logvar": logvar}
    for k, name in enumerate(report.names):
        fields[f"total_{name}"] = report.total[k]
    written = []
    for stem, values in fields.items():
        path = os.path.join(out_dir, f"{stem}.csv")
        storage.save_outputs(path, values[None, :], grid=grid)
        written.append(path)
    return report, grid, written


def cmd_export(args):
    cfg = _load_config(args)
    model_path = args.model or cfg.paths.get("model")
    if not (model_path and args.out_dir):
        raise ConfigError("export needs --model and --out-dir")
    model = storage.load_model(model_path)
    var_floor = args.var_floor if args.var_floor is not None \
        else float(cfg.surrogate.get("var_floor", 1e-10))
    _, _, written = _export_fields(model, args.out_dir, var_floor)
    for path in written:
        print(f"wrote {path}")
    return 0


def cmd_report(args):
    cfg = _load_config(args)
    model_path = args.model or cfg.paths.get("model")
    if not (model_path and args.out_dir):
        raise ConfigError("report needs --model and --out-dir")
    model = storage.load_model(model_path)
    var_floor = args.var_floor if args.var_floor is not None \
        else float(cfg.surrogate.get("var_floor", 1e-10))
    report, grid, written = _export_fields(model, args.out_dir, var_floor)
    payload = _report_payload(report)
    report_path = os.path.join(args.out_dir, "report.json")
    storage.save_json(report_path, payload)
    written.append(report_path)

    from . import plotting
    sd = np.sqrt(report.variance)
    averaged = payload["space_averaged"]
    if grid is not None:
        written.append(plotting.plot_moment_fields(
            os.path.join(args.out_dir, "moments.png"),
            report.mean, sd, report.variance, grid, var_floor=var_floor))
        written.append(plotting.plot_index_fields(
            os.path.join(args.out_dir, "total_indices.png"),
            report.total, report.names, grid, suptitle="total indices"))
    written.append(plotting.plot_index_boxes(
        os.path.join(args.out_dir, "total_boxes.png"),
        averaged["total"], list(report.names),
        title="space-averaged total indices"))
    for path in written:
        print(f"wrote {path}")
    return 0


def cmd_oracle(args):
    grid = tuple(args.grid) if args.grid else (20, 20)
    model = _bench_model(args.bench, a=args.a, grid=grid)
    result = gsa.mc_sobol_oracle(model, model.space, n=args.n, seed=args.seed)
    payload = {
        "schema_version": 1,
        "bench": args.bench,
        "n": result.n,
        "seed": result.seed,
        "names": list(model.space.names),
        "first_order": result.first_order,
        "total": result.total,
        "first_order_std": result.first_order_std,
        "total_std": result.total_std,
    }
    if model.decomposition is not None:
        payload["closed_form_first_order"] = [
            model.sobol_truth([i]) for i in range(1, model.space.M + 1)]
        payload["closed_form_total"] = [
            model.total_truth(i) for i in range(1, model.space.M + 1)]
    if args.out:
        storage.save_json(args.out, payload)
        print(f"wrote oracle estimates to {args.out}")
    else:
        print(storage.dump_json(payload), end="")
    return 0


def build_parser():
    p = argparse.ArgumentParser(
        prog="polysens",
        description="Polynomial-chaos surrogates and Sobol' sensitivity "
                    "analysis from QMC training designs.")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("sample", help="generate a training design CSV")
    sp.add_argument("--config")
    sp.add_argument("--space", help="space preset name (e.g. porous_flow)")
    sp.add_argument("--kind", choices=["qmc", "mc"])
    sp.add_argument("--n", type=int)
    sp.add_argument("--skip", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_sample)

    bp = sub.add_parser("bench", help="list benchmark models or emit datasets")
    bp.add_argument("name", nargs="?", choices=BENCH_MODELS)
    bp.add_argument("--list", action="store_true")
    bp.add_argument("--config")
    bp.add_argument("--a", type=float, nargs="+",
                    help="g-function coefficients (sets dimension)")
    bp.add_argument("--grid", type=int, nargs=2, help="field grid rows cols")
    bp.add_argument("--kind", choices=["qmc", "mc"], default="qmc")
    bp.add_argument("--n", type=int)
    bp.add_argument("--skip", type=int)
    bp.add_argument("--seed", type=int)
    bp.add_argument("--design-out")
    bp.add_argument("--outputs-out")
    bp.add_argument("--reference-out")
    bp.add_argument("--reference-n", type=int, default=50_000)
    bp.add_argument("--reference-seed", type=int, default=0)
    bp.set_defaults(func=cmd_bench)

    fp = sub.add_parser("fit", help="fit a surrogate model")
    fp.add_argument("--config")
    fp.add_argument("--design")
    fp.add_argument("--outputs")
    fp.add_argument("--nr", type=int, help="dyadic refinement level")
    fp.add_argument("--no", type=int, help="maximal polynomial degree")
    fp.add_argument("--q", type=float, help="hyperbolic truncation exponent")
    fp.add_argument("--rcond", type=float)
    fp.add_argument("--out")
    fp.set_defaults(func=cmd_fit)

    ap = sub.add_parser("analyze", help="sensitivity report from a model")
    ap.add_argument("--config")
    ap.add_argument("--model")
    ap.add_argument("--indices", default="first,total",
                    help="comma list: first,total,all or digit subsets like 12")
    ap.add_argument("--var-floor", type=float, dest="var_floor")
    ap.add_argument("--out")
    ap.set_defaults(func=cmd_analyze)

    mp = sub.add_parser("metrics", help="error metrics for a model")
    mp.add_argument("--config")
    mp.add_argument("--model")
    mp.add_argument("--test", help="held-out pair: design.csv,outputs.csv")
    mp.add_argument("--reference", help="reference-statistics container")
    mp.add_argument("--out")
    mp.set_defaults(func=cmd_metrics)

    ep = sub.add_parser("export", help="write per-cell field CSVs")
    ep.add_argument("--config")
    ep.add_argument("--model")
    ep.add_argument("--out-dir", dest="out_dir")
    ep.add_argument("--var-floor", type=float, dest="var_floor")
    ep.set_defaults(func=cmd_export)

    rp = sub.add_parser("report", help="report JSON + field CSVs + figures")
    rp.add_argument("--config")
    rp.add_argument("--model")
    rp.add_argument("--out-dir", dest="out_dir")
    rp.add_argument("--var-floor", type=float, dest="var_floor")
    rp.set_defaults(func=cmd_report)

    op = sub.add_parser("oracle", help="Monte-Carlo pick-freeze oracle on a "
                                       "benchmark model")
    op.add_argument("--bench", required=True, choices=BENCH_MODELS)
    op.add_argument("--a", type=float, nargs="+")
    op.add_argument("--grid", type=int, nargs=2)
    op.add_argument("--n", type=int, default=65_536)
    op.add_argument("--seed", type=int, default=0)
    op.add_argument("--out")
    op.set_defaults(func=cmd_oracle)

    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DistributionError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (DataError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except (FitError, BasisConstructionError, DegenerateMomentsError,
            DecompositionError, UnsupportedDimensionError,
            np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
