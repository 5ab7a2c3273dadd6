"""Command-line front end.

Subcommands: fit, predict, benchmark, real-data, gen-data.  Exit codes:
0 success, 2 invalid arguments, 3 solver failure in at least one cell,
4 I/O failure.  A JSON config file can pre-fill benchmark/real-data flags;
explicit flags win.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys

import numpy as np

from .bench import (ExperimentSpec, RealDataSpec, emit, run_benchmark,
                    run_real_data)
from .data import (CsvSchema, PreprocessPlan, SyntheticSpec,
                   generate_synthetic, read_csv_columns, write_dataset_csv,
                   write_market_like_csv)
from .exceptions import InvalidArgumentError, SolveError
from .fitting import FitConfig, fit_drcr
from .model import (Dataset, format_float, load_model, predict_many,
                    save_model)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_SOLVER = 3
EXIT_IO = 4

log = logging.getLogger(__name__)


def _csv_list(text):
    return tuple(s.strip() for s in text.split(",") if s.strip())


def _int_list(text):
    return tuple(int(s) for s in _csv_list(text))


def _dataset_from_csv(path, covariates, response):
    columns = read_csv_columns(path)
    for name in covariates + (response,):
        if name not in columns:
            raise InvalidArgumentError(f"{path}: missing column {name!r}")
    xs = np.column_stack([columns[c] for c in covariates])
    return Dataset(xs=xs, ys=columns[response], tag=f"csv:{path}")


def _add_fit_flags(p):
    p.add_argument("--delta", type=float, default=None,
                   help="explicit ambiguity radius (schedule=fixed)")
    p.add_argument("--schedule", default=None,
                   choices=["experimental", "theoretical", "fixed"])
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--grad-cap", type=float, default=None)


def _fit_config(args, defaults):
    schedule = args.schedule or defaults.get("schedule")
    if schedule is None:
        schedule = "fixed" if args.delta is not None else "experimental"
    return dict(delta=args.delta if args.delta is not None
                else defaults.get("delta"),
                schedule=schedule,
                gamma=args.gamma if args.gamma is not None
                else defaults.get("gamma"),
                grad_cap=args.grad_cap if args.grad_cap is not None
                else defaults.get("grad_cap"))


def build_parser():
    p = argparse.ArgumentParser(prog="convexreg",
                                description=__doc__.splitlines()[0])
    p.add_argument("--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="fit the robust convex estimator")
    fit.add_argument("--data", required=True)
    fit.add_argument("--covariates", required=True, type=_csv_list)
    fit.add_argument("--response", required=True)
    _add_fit_flags(fit)
    fit.add_argument("--out", required=True, help="model JSON path")

    pred = sub.add_parser("predict", help="evaluate a saved model")
    pred.add_argument("--model", required=True)
    pred.add_argument("--data", required=True)
    pred.add_argument("--covariates", required=True, type=_csv_list)
    pred.add_argument("--out", required=True, help="predictions CSV path")

    bench = sub.add_parser("benchmark", help="synthetic method comparison")
    bench.add_argument("--methods", type=_csv_list, default=None,
                       help="e.g. drcr,lse(0.8),lse(10),kernel,linear")
    bench.add_argument("--n", type=_int_list, default=None,
                       help="comma-separated sample sizes")
    bench.add_argument("--d", type=int, default=None)
    bench.add_argument("--dist", choices=["gaussian", "t10"], default=None)
    bench.add_argument("--sigma", type=float, default=None)
    bench.add_argument("--reps", type=int, default=None)
    bench.add_argument("--seed", type=int, default=None)
    bench.add_argument("--workers", type=int, default=1)
    _add_fit_flags(bench)
    bench.add_argument("--config", default=None, help="JSON flag defaults")
    bench.add_argument("--out", required=True, help="output directory")

    real = sub.add_parser("real-data", help="replicated split comparison")
    real.add_argument("--data", required=True)
    real.add_argument("--covariates", required=True, type=_csv_list)
    real.add_argument("--response", required=True)
    real.add_argument("--log-transform", type=_csv_list, default=None,
                      help="covariate columns to log (default: all)")
    real.add_argument("--train-rows", type=int, default=None)
    real.add_argument("--reps", type=int, default=None)
    real.add_argument("--seed", type=int, default=None)
    real.add_argument("--methods", type=_csv_list, default=None)
    real.add_argument("--lr-loss", choices=["absolute", "squared"],
                      default=None)
    real.add_argument("--raw-response", action="store_true",
                      help="do not standardize the response column")
    _add_fit_flags(real)
    real.add_argument("--config", default=None)
    real.add_argument("--out", required=True, help="output directory")

    gen = sub.add_parser("gen-data", help="write a synthetic CSV")
    gen.add_argument("--kind", choices=["synthetic", "market"],
                     default="synthetic")
    gen.add_argument("--n", type=int, default=200)
    gen.add_argument("--d", type=int, default=5)
    gen.add_argument("--dist", choices=["gaussian", "t10"],
                     default="gaussian")
    gen.add_argument("--sigma", type=float, default=0.2)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True)
    return p


def _load_config(path):
    if path is None:
        return {}
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _cmd_fit(args):
    data = _dataset_from_csv(args.data, args.covariates, args.response)
    cfg = FitConfig(**_fit_config(args, {}))
    model = fit_drcr(data, cfg)
    save_model(model, args.out)
    print(f"fitted n={data.n} d={data.d} objective="
          f"{format_float(model.fit_meta.objective)} -> {args.out}")
    return EXIT_OK


def _cmd_predict(args):
    model = load_model(args.model)
    columns = read_csv_columns(args.data)
    for name in args.covariates:
        if name not in columns:
            raise InvalidArgumentError(f"{args.data}: missing column {name!r}")
    xs = np.column_stack([columns[c] for c in args.covariates])
    preds = predict_many(model, xs)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["prediction"])
        for v in preds:
            w.writerow([format_float(v)])
    print(f"wrote {len(preds)} predictions -> {args.out}")
    return EXIT_OK


def _cmd_benchmark(args):
    cfgfile = _load_config(args.config)
    spec = ExperimentSpec(
        methods=args.methods or tuple(cfgfile.get("methods", ("drcr",))),
        d=args.d if args.d is not None else cfgfile.get("d", 5),
        n_list=args.n or tuple(cfgfile.get("n_list", (50, 100))),
        covariate_dist=args.dist or cfgfile.get("dist", "gaussian"),
        noise_sigma=args.sigma if args.sigma is not None
        else cfgfile.get("sigma", 0.2),
        replications=args.reps if args.reps is not None
        else cfgfile.get("reps", 1),
        base_seed=args.seed if args.seed is not None
        else cfgfile.get("seed", 0),
        **_fit_config(args, cfgfile),
    )
    table = run_benchmark(spec, workers=args.workers)
    files = emit(table, args.out)
    for path in files:
        print(f"wrote {path}")
    if table.total_failures:
        print(f"{table.total_failures} cell run(s) failed", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def _cmd_real_data(args):
    cfgfile = _load_config(args.config)
    schema = CsvSchema(covariates=args.covariates, response=args.response)
    logs = (args.log_transform if args.log_transform is not None
            else tuple(cfgfile.get("log_transform", args.covariates)))
    spec = RealDataSpec(
        methods=args.methods
        or tuple(cfgfile.get("methods", ("drcr", "lse(10)", "linear"))),
        train_rows=args.train_rows if args.train_rows is not None
        else cfgfile.get("train_rows", 400),
        replications=args.reps if args.reps is not None
        else cfgfile.get("reps", 10),
        base_seed=args.seed if args.seed is not None
        else cfgfile.get("seed", 0),
        lr_loss=args.lr_loss or cfgfile.get("lr_loss", "absolute"),
        standardize_response=not args.raw_response,
        **_fit_config(args, cfgfile),
    )
    plan = PreprocessPlan(log_columns=logs,
                          standardize_response=spec.standardize_response)
    table = run_real_data(args.data, schema, spec, plan=plan)
    files = emit(table, args.out)
    for path in files:
        print(f"wrote {path}")
    for cell in table.cells:
        print(f"{cell.method:10s} {cell.dist:5s} l1="
              f"{format_float(cell.mean_l1)}")
    if table.total_failures:
        print(f"{table.total_failures} cell run(s) failed", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def _cmd_gen_data(args):
    if args.kind == "market":
        write_market_like_csv(args.out, n_rows=args.n, seed=args.seed)
    else:
        spec = SyntheticSpec(n=args.n, d=args.d, covariate_dist=args.dist,
                             noise_sigma=args.sigma, seed=args.seed)
        write_dataset_csv(generate_synthetic(spec), args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


_COMMANDS = {
    "fit": _cmd_fit,
    "predict": _cmd_predict,
    "benchmark": _cmd_benchmark,
    "real-data": _cmd_real_data,
    "gen-data": _cmd_gen_data,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except InvalidArgumentError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except SolveError as err:
        print(f"solver error: {err}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as err:
        print(f"i/o error: {err}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
