"""Data generation, CSV ingestion, preprocessing, and seeded randomness.

Random streams are counter-based (Philox) and keyed by (seed, purpose,
indices...), so parallel replications reproduce bit-identically regardless
of scheduling.  Normal variates go through the inverse CDF of uniforms
rather than rejection sampling, keeping draws platform-independent; the
Student t(10) option divides a normal by sqrt(chi2_10 / 10) drawn from the
same stream.
"""

from __future__ import annotations

import csv
import zlib
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .exceptions import InvalidArgumentError
from .model import Dataset, format_float

__all__ = [
    "stream",
    "normal_icdf",
    "student_t10",
    "SyntheticSpec",
    "f_star",
    "generate_synthetic",
    "CsvSchema",
    "PreprocessPlan",
    "read_csv_columns",
    "write_dataset_csv",
    "fit_preprocess_plan",
    "apply_preprocess_plan",
    "split_indices",
    "load_and_preprocess",
    "write_market_like_csv",
]

COVARIATE_DISTS = ("gaussian", "t10")


def _key_part(part) -> int:
    if isinstance(part, (int, np.integer)):
        if part < 0:
            raise InvalidArgumentError("stream key integers must be >= 0")
        return int(part)
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    raise InvalidArgumentError(f"stream key parts must be int or str, got {part!r}")


def stream(seed: int, *key) -> np.random.Generator:
    """Philox generator for the (seed, *key) stream.

    Distinct keys give statistically independent streams; the same
    (seed, key) always yields the same draws.
    """
    spawn = tuple(_key_part(p) for p in key)
    seq = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=spawn)
    return np.random.Generator(np.random.Philox(seq))


def _open_uniform(gen: np.random.Generator, size) -> np.ndarray:
    # (k + 0.5) / 2^53 lies strictly inside (0, 1): ndtri never sees 0 or 1
    return (gen.integers(0, 2**53, size=size).astype(np.float64) + 0.5) / 2**53


def normal_icdf(gen: np.random.Generator, size) -> np.ndarray:
    """Standard normals via the inverse CDF of open-interval uniforms."""
    return ndtri(_open_uniform(gen, size))


def student_t10(gen: np.random.Generator, size) -> np.ndarray:
    """t(10) draws as normal / sqrt(chi2_10 / 10), all from one stream."""
    z = normal_icdf(gen, size)
    chi = np.sum(normal_icdf(gen, tuple(np.atleast_1d(size)) + (10,)) ** 2,
                 axis=-1)
    return z / np.sqrt(chi / 10.0)


def f_star(x) -> float:
    """Target function of the synthetic protocol: sum of absolute coordinates."""
    x = np.asarray(x, dtype=np.float64)
    if not np.isfinite(x).all():
        raise InvalidArgumentError("x must be finite")
    return float(np.abs(x).sum())


def f_star_many(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    return np.abs(X).sum(axis=-1)


@dataclass(frozen=True)
class SyntheticSpec:
    """Synthetic draw: n points in d dimensions, covariate family, noise."""

    n: int
    d: int
    covariate_dist: str = "gaussian"
    noise_sigma: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.n < 2:
            raise InvalidArgumentError(f"n must be >= 2, got {self.n}")
        if self.d < 1:
            raise InvalidArgumentError(f"d must be >= 1, got {self.d}")
        if self.covariate_dist not in COVARIATE_DISTS:
            raise InvalidArgumentError(
                f"covariate_dist must be one of {COVARIATE_DISTS}")
        if self.noise_sigma < 0:
            raise InvalidArgumentError("noise_sigma must be >= 0")


def generate_synthetic(spec: SyntheticSpec) -> Dataset:
    """Draw Y_i = f_star(X_i) + sigma * Z_i; bit-identical for equal specs."""
    gen = stream(spec.seed, "synthetic", spec.n, spec.d)
    if spec.covariate_dist == "gaussian":
        X = normal_icdf(gen, (spec.n, spec.d))
    else:
        X = student_t10(gen, (spec.n, spec.d))
    noise = normal_icdf(gen, spec.n)
    Y = f_star_many(X) + spec.noise_sigma * noise
    tag = (f"synthetic:{spec.covariate_dist}:seed={spec.seed}"
           f":n={spec.n}:d={spec.d}:sigma={spec.noise_sigma:g}")
    return Dataset(xs=X, ys=Y, tag=tag)


# -- CSV ingestion and preprocessing ------------------------------------------

@dataclass(frozen=True)
class CsvSchema:
    """Column roles by name: which are covariates, which is the response."""

    covariates: tuple
    response: str

    def __post_init__(self):
        object.__setattr__(self, "covariates", tuple(self.covariates))
        if not self.covariates:
            raise InvalidArgumentError("schema needs at least one covariate")
        if self.response in self.covariates:
            raise InvalidArgumentError("response column repeated in covariates")


@dataclass(frozen=True)
class PreprocessPlan:
    """Log flags per covariate plus standardization fitted on training rows.

    ``means``/``scales`` are None before fitting.  Columns whose training
    standard deviation vanishes keep scale 1 (centering only), so constant
    columns survive the pipeline.
    """

    log_columns: tuple = ()
    standardize: bool = True
    standardize_response: bool = True
    means: dict | None = None
    scales: dict | None = None

    def __post_init__(self):
        object.__setattr__(self, "log_columns", tuple(self.log_columns))

    @property
    def fitted(self) -> bool:
        return self.means is not None


def read_csv_columns(path):
    """Parse a header CSV into {column: float array}; '#' lines are comments.

    Raises
    ------
    InvalidArgumentError
        Missing header, ragged row, or unparsable number, with the
        offending 1-based line number.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        raw = fh.readlines()
    lines = [(i + 1, row) for i, row in enumerate(raw)
             if row.strip() and not row.lstrip().startswith("#")]
    if not lines:
        raise InvalidArgumentError(f"{path}: no header row found")
    reader = csv.reader([row for _, row in lines])
    table = list(reader)
    header = [h.strip() for h in table[0]]
    ncol = len(header)
    columns = {h: [] for h in header}
    for k, row in enumerate(table[1:]):
        lineno = lines[k + 1][0]
        if len(row) != ncol:
            raise InvalidArgumentError(
                f"{path}: line {lineno}: expected {ncol} fields, got {len(row)}")
        for h, cell in zip(header, row):
            try:
                columns[h].append(float(cell))
            except ValueError:
                raise InvalidArgumentError(
                    f"{path}: line {lineno}: cannot parse {cell!r} as a number"
                ) from None
    return {h: np.array(v, dtype=np.float64) for h, v in columns.items()}


def write_dataset_csv(data: Dataset, path, column_names=None) -> None:
    """Export a dataset; the first line is a '#' provenance comment."""
    names = (list(column_names) if column_names
             else [f"x{k + 1}" for k in range(data.d)] + ["y"])
    if len(names) != data.d + 1:
        raise InvalidArgumentError("need d + 1 column names")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# {data.tag}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(names)
        for i in range(data.n):
            writer.writerow([format_float(v) for v in data.xs[i]]
                            + [format_float(data.ys[i])])


def split_indices(n_rows: int, train_rows: int, seed: int):
    """Deterministic seeded permutation split into (train, test) indices."""
    if not 0 < train_rows < n_rows:
        raise InvalidArgumentError(
            f"train_rows must be in (0, {n_rows}), got {train_rows}")
    perm = stream(seed, "split", n_rows).permutation(n_rows)
    return perm[:train_rows], perm[train_rows:]


def fit_preprocess_plan(columns: dict, schema: CsvSchema, plan: PreprocessPlan,
                        train_idx) -> PreprocessPlan:
    """Fit standardization parameters on the training rows only."""
    for name in plan.log_columns:
        if name not in schema.covariates:
            raise InvalidArgumentError(
                f"log-transform column {name!r} is not a covariate")
    means = {}
    scales = {}
    wanted = list(schema.covariates)
    if plan.standardize_response:
        wanted.append(schema.response)
    for name in wanted:
        vals = columns[name][train_idx]
        if name in plan.log_columns:
            _check_positive(columns[name], name)
            vals = np.log(vals)
        if plan.standardize:
            mu = float(np.mean(vals))
            sd = float(np.std(vals))
            means[name] = mu
            scales[name] = sd if sd > 1e-12 else 1.0
        else:
            means[name] = 0.0
            scales[name] = 1.0
    return PreprocessPlan(log_columns=plan.log_columns,
                          standardize=plan.standardize,
                          standardize_response=plan.standardize_response,
                          means=means, scales=scales)


def _check_positive(vals, name):
    bad = np.nonzero(vals <= 0)[0]
    if bad.size:
        raise InvalidArgumentError(
            f"column {name!r}: log transform needs positive values, "
            f"row {int(bad[0])} has {vals[bad[0]]!r}")


def apply_preprocess_plan(columns: dict, schema: CsvSchema,
                          plan: PreprocessPlan, idx, tag: str) -> Dataset:
    """Apply a fitted plan to the selected rows; pure function of its inputs."""
    if not plan.fitted:
        raise InvalidArgumentError("plan is not fitted")
    idx = np.asarray(idx, dtype=np.int64)
    cols = []
    for name in schema.covariates:
        vals = columns[name][idx]
        if name in plan.log_columns:
            _check_positive(columns[name], name)
            vals = np.log(vals)
        if name in plan.means:
            vals = (vals - plan.means[name]) / plan.scales[name]
        cols.append(vals)
    ys = columns[schema.response][idx]
    if schema.response in (plan.means or {}):
        ys = (ys - plan.means[schema.response]) / plan.scales[schema.response]
    return Dataset(xs=np.column_stack(cols), ys=ys, tag=tag)


def load_and_preprocess(path, schema: CsvSchema, plan: PreprocessPlan,
                        train_rows: int, seed: int):
    """Read a CSV, split by seeded permutation, fit the plan on train only.

    Returns (train Dataset, test Dataset, fitted plan).
    """
    columns = read_csv_columns(path)
    for name in schema.covariates + (schema.response,):
        if name not in columns:
            raise InvalidArgumentError(f"{path}: missing column {name!r}")
    n_rows = len(columns[schema.response])
    train_idx, test_idx = split_indices(n_rows, train_rows, seed)
    fitted = fit_preprocess_plan(columns, schema, plan, train_idx)
    base = f"csv:{path}"
    train = apply_preprocess_plan(columns, schema, fitted, train_idx,
                                  tag=f"{base}:train:seed={seed}")
    test = apply_preprocess_plan(columns, schema, fitted, test_idx,
                                 tag=f"{base}:test:seed={seed}")
    return train, test, fitted


def write_market_like_csv(path, n_rows: int = 600, seed: int = 0) -> None:
    """Synthetic stand-in for the real pipeline's input file.

    Four strictly positive covariates (log-normal, so the log transform is
    exact) and a response that is convex in the log covariates; a linear
    fit is misspecified on it by construction.
    """
    if n_rows < 10:
        raise InvalidArgumentError("need at least 10 rows")
    gen = stream(seed, "market", n_rows)
    Z = normal_icdf(gen, (n_rows, 4))
    noise = normal_icdf(gen, n_rows)
    X = np.exp(Z)
    y = np.abs(Z).sum(axis=1) + 0.5 * np.maximum(Z[:, 0] + Z[:, 1], 0.0) \
        + 0.1 * noise
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# market-like synthetic: seed={seed} rows={n_rows}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["so2", "nox", "co2", "noxrate", "heat"])
        for i in range(n_rows):
            writer.writerow([format_float(v) for v in X[i]]
                            + [format_float(y[i])])
