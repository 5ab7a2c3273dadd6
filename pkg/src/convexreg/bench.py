"""Benchmark harness: method x sample-size matrices and the real-data table.

Every replication draws its dataset from a stream keyed by (base seed,
replication index, n), so results are independent of execution order and
worker count; aggregation reduces cells in sorted key order.  Emitted files
carry 17-significant-digit numbers and exclude wall-clock timings, making a
repeated run byte-identical (timings stay in the in-memory table and logs).
"""

from __future__ import annotations

import csv
import logging
import math
import re
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .baselines import (KernelModel, LseConfig, fit_convex_lse,
                        fit_linear_absolute, fit_linear_squared,
                        kernel_predict_many, select_bandwidth)
from .data import (CsvSchema, PreprocessPlan, SyntheticSpec, f_star_many,
                   generate_synthetic, load_and_preprocess, stream)
from .exceptions import InvalidArgumentError, SolveError
from .fitting import FitConfig, fit_drcr
from .model import Dataset, empirical_l1, empirical_l2, format_float, predict_many

__all__ = [
    "ExperimentSpec",
    "RealDataSpec",
    "ResultCell",
    "ResultTable",
    "run_benchmark",
    "run_real_data",
    "emit",
    "parse_result_table",
    "loglog_slopes",
]

log = logging.getLogger(__name__)

_METHOD_RE = re.compile(r"^(drcr|kernel|linear|lse(\(([0-9.eE+-]+)\))?)$")


def _check_methods(methods):
    methods = tuple(methods)
    if not methods:
        raise InvalidArgumentError("methods must be nonempty")
    for m in methods:
        if not _METHOD_RE.match(m):
            raise InvalidArgumentError(
                f"unknown method {m!r}; expected drcr, lse(c), kernel, linear")
    return methods


def _lse_cap(token: str) -> float:
    m = _METHOD_RE.match(token)
    cap = m.group(3)
    return float(cap) if cap else 10.0


@dataclass(frozen=True)
class ExperimentSpec:
    """The synthetic benchmark matrix: methods x n_list, replicated."""

    methods: tuple = ("drcr",)
    d: int = 5
    n_list: tuple = (50, 100)
    covariate_dist: str = "gaussian"
    noise_sigma: float = 0.2
    replications: int = 1
    base_seed: int = 0
    schedule: str = "experimental"
    gamma: float | None = None
    delta: float | None = None
    grad_cap: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "methods", _check_methods(self.methods))
        object.__setattr__(self, "n_list", tuple(int(n) for n in self.n_list))
        if not self.n_list or list(self.n_list) != sorted(set(self.n_list)):
            raise InvalidArgumentError("n_list must be nonempty ascending")
        if self.replications < 1:
            raise InvalidArgumentError("replications must be >= 1")
        if self.d < 1:
            raise InvalidArgumentError("d must be >= 1")

    def fit_config(self) -> FitConfig:
        return FitConfig(delta=self.delta, schedule=self.schedule,
                         gamma=self.gamma, grad_cap=self.grad_cap)


@dataclass(frozen=True)
class RealDataSpec:
    """The real-data protocol: seeded splits, three methods, l1 errors."""

    methods: tuple = ("drcr", "lse(10)", "linear")
    train_rows: int = 400
    replications: int = 10
    base_seed: int = 0
    schedule: str = "experimental"
    gamma: float | None = None
    delta: float | None = None
    grad_cap: float | None = None
    lr_loss: str = "absolute"
    standardize_response: bool = True

    def __post_init__(self):
        object.__setattr__(self, "methods", _check_methods(self.methods))
        if self.replications < 1:
            raise InvalidArgumentError("replications must be >= 1")
        if self.train_rows < 2:
            raise InvalidArgumentError("train_rows must be >= 2")
        if self.lr_loss not in ("absolute", "squared"):
            raise InvalidArgumentError("lr_loss must be absolute or squared")


@dataclass(frozen=True)
class ResultCell:
    method: str
    n: int
    dist: str
    mean_l1: float
    mean_l2: float
    stderr_l1: float
    stderr_l2: float
    runs: int
    failures: int
    seconds: float   # in-memory only; excluded from emitted files

    def key(self):
        return (self.dist, self.method, self.n)


@dataclass(frozen=True)
class ResultTable:
    cells: tuple

    @property
    def total_failures(self) -> int:
        return sum(c.failures for c in self.cells)

    def cell(self, method, n, dist) -> ResultCell:
        for c in self.cells:
            if (c.method, c.n, c.dist) == (method, int(n), dist):
                return c
        raise KeyError((method, n, dist))

    def equals_emitted(self, other: "ResultTable") -> bool:
        """Equality on the emitted fields (timings are not emitted)."""
        a = [replace(c, seconds=0.0) for c in self.cells]
        b = [replace(c, seconds=0.0) for c in other.cells]
        return a == b


def _fit_and_eval(method, train: Dataset, eval_xs, truth, cfg: FitConfig):
    """Fit one method, return (l1, l2, seconds) against truth at eval_xs."""
    t0 = time.perf_counter()
    if method == "drcr":
        model = fit_drcr(train, cfg)
        fitted = predict_many(model, eval_xs)
    elif method.startswith("lse"):
        model = fit_convex_lse(train, LseConfig(c=_lse_cap(method)))
        fitted = predict_many(model, eval_xs)
    elif method == "kernel":
        h, _ = select_bandwidth(train)
        fitted = kernel_predict_many(KernelModel(train=train, bandwidth=h),
                                     eval_xs)
    elif method == "linear":
        model = fit_linear_absolute(train)
        fitted = predict_many(model, eval_xs)
    else:  # pragma: no cover - guarded by _check_methods
        raise InvalidArgumentError(method)
    return (empirical_l1(fitted, truth), empirical_l2(fitted, truth),
            time.perf_counter() - t0)


def _benchmark_task(spec: ExperimentSpec, rep: int, n: int):
    """One replication at one n: fresh dataset, every method fitted on it."""
    seed = int(stream(spec.base_seed, "benchmark", rep, n)
               .integers(0, 2**63 - 1))
    data = generate_synthetic(SyntheticSpec(
        n=n, d=spec.d, covariate_dist=spec.covariate_dist,
        noise_sigma=spec.noise_sigma, seed=seed))
    truth = f_star_many(data.xs)
    cfg = spec.fit_config()
    out = []
    for method in spec.methods:
        try:
            l1, l2, secs = _fit_and_eval(method, data, data.xs, truth, cfg)
            out.append((method, n, l1, l2, secs, None))
        except (SolveError, InvalidArgumentError) as err:
            log.error("benchmark cell failed method=%s n=%d rep=%d err=%s",
                      method, n, rep, err)
            out.append((method, n, math.nan, math.nan, 0.0, str(err)))
    return out


def _aggregate(records, methods, n_values, dist, replications):
    by_cell = {}
    for method, n, l1, l2, secs, err in records:
        by_cell.setdefault((method, n), []).append((l1, l2, secs, err))
    cells = []
    for method in methods:
        for n in n_values:
            runs = by_cell.get((method, int(n)), [])
            good = [(l1, l2) for l1, l2, _, err in runs if err is None]
            failures = len(runs) - len(good)
            secs = float(sum(s for _, _, s, _ in runs))
            if good:
                l1s = np.array([g[0] for g in good])
                l2s = np.array([g[1] for g in good])
                sem1 = (float(l1s.std(ddof=1) / math.sqrt(len(good)))
                        if len(good) > 1 else 0.0)
                sem2 = (float(l2s.std(ddof=1) / math.sqrt(len(good)))
                        if len(good) > 1 else 0.0)
                cell = ResultCell(method, int(n), dist, float(l1s.mean()),
                                  float(l2s.mean()), sem1, sem2,
                                  len(good), failures, secs)
            else:
                cell = ResultCell(method, int(n), dist, math.nan, math.nan,
                                  math.nan, math.nan, 0, failures, secs)
            assert cell.runs + cell.failures == replications
            cells.append(cell)
    return ResultTable(cells=tuple(sorted(cells, key=ResultCell.key)))


def run_benchmark(spec: ExperimentSpec, workers: int = 1) -> ResultTable:
    """Execute the benchmark matrix; deterministic for a given spec.

    Replications run in a process pool when ``workers > 1``; each task owns
    its keyed random stream, and reduction is order-independent, so the
    table does not depend on scheduling.
    """
    tasks = [(rep, n) for rep in range(spec.replications)
             for n in spec.n_list]
    records = []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_benchmark_task, spec, rep, n)
                       for rep, n in tasks]
            for fut in futures:
                records.extend(fut.result())
    else:
        for rep, n in tasks:
            records.extend(_benchmark_task(spec, rep, n))
    table = _aggregate(records, spec.methods, spec.n_list,
                       spec.covariate_dist, spec.replications)
    for method, dist, slope in loglog_slopes(table):
        log.info("benchmark slope method=%s dist=%s dlog_l1/dlog_n=%.4f",
                 method, dist, slope)
    return table


def run_real_data(path, schema: CsvSchema, spec: RealDataSpec,
                  plan: PreprocessPlan | None = None) -> ResultTable:
    """Replicated random splits of a CSV; train/test l1 per method.

    Cells are keyed (method, split size, "train"/"test"); the metric is the
    empirical l1 distance between fitted values and observed responses.
    """
    if plan is None:
        plan = PreprocessPlan(log_columns=schema.covariates,
                              standardize_response=spec.standardize_response)
    else:
        plan = replace(plan, standardize_response=spec.standardize_response)
    records = []
    sizes = {}
    for rep in range(spec.replications):
        split_seed = int(stream(spec.base_seed, "real-data", rep)
                         .integers(0, 2**63 - 1))
        train, test, _ = load_and_preprocess(path, schema, plan,
                                             spec.train_rows, split_seed)
        sizes = {"train": train.n, "test": test.n}
        cfg = FitConfig(delta=spec.delta, schedule=spec.schedule,
                        gamma=spec.gamma, grad_cap=spec.grad_cap)
        for method in spec.methods:
            try:
                t0 = time.perf_counter()
                if method == "drcr":
                    model = fit_drcr(train, cfg)
                    predict = lambda xs: predict_many(model, xs)
                elif method.startswith("lse"):
                    model = fit_convex_lse(train,
                                           LseConfig(c=_lse_cap(method)))
                    predict = lambda xs: predict_many(model, xs)
                elif method == "kernel":
                    h, _ = select_bandwidth(train)
                    km = KernelModel(train=train, bandwidth=h)
                    predict = lambda xs: kernel_predict_many(km, xs)
                else:
                    fit = (fit_linear_absolute if spec.lr_loss == "absolute"
                           else fit_linear_squared)
                    model = fit(train)
                    predict = lambda xs: predict_many(model, xs)
                secs = time.perf_counter() - t0
                for split, ds in (("train", train), ("test", test)):
                    l1 = empirical_l1(predict(ds.xs), ds.ys)
                    l2 = empirical_l2(predict(ds.xs), ds.ys)
                    records.append((method, split, l1, l2, secs, None))
            except (SolveError, InvalidArgumentError) as err:
                log.error("real-data cell failed method=%s rep=%d err=%s",
                          method, rep, err)
                for split in ("train", "test"):
                    records.append((method, split, math.nan, math.nan,
                                    0.0, str(err)))
    cells = []
    for split in ("train", "test"):
        sub = [(m, sizes[split], l1, l2, s, e)
               for m, sp, l1, l2, s, e in records if sp == split]
        cells.extend(_aggregate(sub, spec.methods, [sizes[split]], split,
                                spec.replications).cells)
    return ResultTable(cells=tuple(sorted(cells, key=ResultCell.key)))


def loglog_slopes(table: ResultTable):
    """Least-squares slope of log(mean l1) on log(n) per (method, dist)."""
    out = []
    groups = {}
    for c in table.cells:
        groups.setdefault((c.method, c.dist), []).append(c)
    for (method, dist), cells in sorted(groups.items()):
        pts = [(math.log(c.n), math.log(c.mean_l1)) for c in cells
               if c.runs > 0 and c.mean_l1 > 0]
        if len(pts) < 2:
            continue
        xs = np.array([p[0] for p in pts])
        ys = np.array([p[1] for p in pts])
        slope = float(np.polyfit(xs, ys, 1)[0])
        out.append((method, dist, slope))
    return out


_CELL_FIELDS = ("method", "n", "dist", "mean_l1", "mean_l2",
                "stderr_l1", "stderr_l2", "runs", "failures")


def emit(table: ResultTable, out_dir) -> list:
    """Write cells.csv, per-figure plot data, and the slope report.

    Returns the list of paths written.  Raises OSError when the directory
    is unwritable; numbers use 17 significant digits so re-running an
    identical spec reproduces every byte.
    """
    if not table.cells:
        raise InvalidArgumentError("table is empty")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    cells_path = out / "cells.csv"
    with open(cells_path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(_CELL_FIELDS)
        for c in table.cells:
            w.writerow([c.method, c.n, c.dist, format_float(c.mean_l1),
                        format_float(c.mean_l2), format_float(c.stderr_l1),
                        format_float(c.stderr_l2), c.runs, c.failures])
    written.append(cells_path)

    dists = sorted({c.dist for c in table.cells})
    for dist in dists:
        for metric in ("l1", "l2"):
            path = out / f"plot_{dist}_{metric}.csv"
            with open(path, "w", encoding="utf-8", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["method", "n", "mean", "stderr"])
                for c in table.cells:
                    if c.dist != dist:
                        continue
                    mean = c.mean_l1 if metric == "l1" else c.mean_l2
                    err = c.stderr_l1 if metric == "l1" else c.stderr_l2
                    w.writerow([c.method, c.n, format_float(mean),
                                format_float(err)])
            written.append(path)

    slopes_path = out / "slopes.csv"
    with open(slopes_path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "dist", "loglog_slope_l1"])
        for method, dist, slope in loglog_slopes(table):
            w.writerow([method, dist, format_float(slope)])
    written.append(slopes_path)
    return written


def parse_result_table(path) -> ResultTable:
    """Re-read an emitted cells.csv (timings come back as zero)."""
    cells = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            cells.append(ResultCell(
                method=row["method"], n=int(row["n"]), dist=row["dist"],
                mean_l1=float(row["mean_l1"]), mean_l2=float(row["mean_l2"]),
                stderr_l1=float(row["stderr_l1"]),
                stderr_l2=float(row["stderr_l2"]),
                runs=int(row["runs"]), failures=int(row["failures"]),
                seconds=0.0))
    return ResultTable(cells=tuple(cells))
