"""Core domain types: datasets, max-affine models, and empirical loss metrics.

A max-affine model is a pointwise maximum of affine pieces, each anchored at
a training point.  Everything here is immutable after construction and every
operation is a pure function, so values can be shared freely across threads.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .exceptions import InvalidArgumentError

__all__ = [
    "Dataset",
    "AffinePiece",
    "FitMeta",
    "MaxAffineModel",
    "LossReport",
    "predict",
    "predict_many",
    "gradient_sup_norm",
    "empirical_l1",
    "empirical_l2",
    "loss_report",
    "dual_objective",
    "model_to_dict",
    "model_from_dict",
    "save_model",
    "load_model",
    "format_float",
]


def _as_matrix(xs, name="xs"):
    arr = np.asarray(xs, dtype=np.float64)
    if arr.ndim != 2:
        raise InvalidArgumentError(f"{name} must be a 2-d array, got ndim={arr.ndim}")
    if not np.isfinite(arr).all():
        raise InvalidArgumentError(f"{name} contains non-finite entries")
    return arr


def _as_vector(ys, name="ys"):
    arr = np.asarray(ys, dtype=np.float64)
    if arr.ndim != 1:
        raise InvalidArgumentError(f"{name} must be a 1-d array, got ndim={arr.ndim}")
    if not np.isfinite(arr).all():
        raise InvalidArgumentError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True)
class Dataset:
    """Paired observations (X_i, Y_i) with provenance metadata.

    Parameters
    ----------
    xs : (n, d) array
        Covariates, one row per observation.
    ys : (n,) array
        Responses.
    tag : str
        Free-text provenance, e.g. ``"synthetic:gaussian:seed=7"``.
    """

    xs: np.ndarray
    ys: np.ndarray
    tag: str = ""

    def __post_init__(self):
        xs = _as_matrix(self.xs)
        ys = _as_vector(self.ys)
        if xs.shape[0] < 1 or xs.shape[1] < 1:
            raise InvalidArgumentError(f"need n >= 1 and d >= 1, got shape {xs.shape}")
        if ys.shape[0] != xs.shape[0]:
            raise InvalidArgumentError(
                f"ys has length {ys.shape[0]} but xs has {xs.shape[0]} rows"
            )
        xs.setflags(write=False)
        ys.setflags(write=False)
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)

    @property
    def n(self) -> int:
        return self.xs.shape[0]

    @property
    def d(self) -> int:
        return self.xs.shape[1]


@dataclass(frozen=True)
class AffinePiece:
    """One affine piece: x -> g + <xi, x - anchor>."""

    g: float
    xi: np.ndarray
    anchor: np.ndarray

    def __post_init__(self):
        xi = _as_vector(self.xi, "xi")
        anchor = _as_vector(self.anchor, "anchor")
        if xi.shape != anchor.shape:
            raise InvalidArgumentError(
                f"xi has length {xi.shape[0]} but anchor has {anchor.shape[0]}"
            )
        xi.setflags(write=False)
        anchor.setflags(write=False)
        object.__setattr__(self, "g", float(self.g))
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "anchor", anchor)


@dataclass(frozen=True)
class FitMeta:
    """How a model was fitted: objective value, solver effort, radius used."""

    objective: float = math.nan
    iterations: int = 0
    delta: float = math.nan
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "objective": self.objective,
            "iterations": self.iterations,
            "delta": self.delta,
            "extra": dict(self.extra),
        }


class MaxAffineModel:
    """Pointwise maximum of affine pieces; always convex by construction.

    Parameters
    ----------
    d : int
        Covariate dimension.
    pieces : sequence of AffinePiece
        Nonempty; every piece must have dimension ``d``.
    grad_cap : float
        The gradient bound imposed at fit time (``math.inf`` when the fit
        used no cap, e.g. the single-piece linear baseline).
    fit_meta : FitMeta, optional
    """

    def __init__(self, d: int, pieces: Sequence[AffinePiece], grad_cap: float,
                 fit_meta: FitMeta | None = None):
        if d < 1:
            raise InvalidArgumentError(f"d must be >= 1, got {d}")
        pieces = tuple(pieces)
        if not pieces:
            raise InvalidArgumentError("a model needs at least one piece")
        for p in pieces:
            if p.xi.shape[0] != d:
                raise InvalidArgumentError(
                    f"piece dimension {p.xi.shape[0]} does not match model d={d}"
                )
        grad_cap = float(grad_cap)
        if not (grad_cap > 0):
            raise InvalidArgumentError(f"grad_cap must be positive, got {grad_cap}")
        if math.isfinite(grad_cap):
            worst = max(float(np.abs(p.xi).max()) for p in pieces)
            if worst > grad_cap * (1 + 1e-12) + 1e-12:
                raise InvalidArgumentError(
                    f"a piece gradient entry {worst} exceeds grad_cap {grad_cap}"
                )
        self.d = int(d)
        self.pieces = pieces
        self.grad_cap = grad_cap
        self.fit_meta = fit_meta if fit_meta is not None else FitMeta()
        # dense views for vectorised evaluation
        self._xi = np.array([p.xi for p in pieces])
        self._anchors = np.array([p.anchor for p in pieces])
        self._g = np.array([p.g for p in pieces])
        # piece i evaluates at x as offset_i + <xi_i, x>
        self._offsets = self._g - np.einsum("ij,ij->i", self._xi, self._anchors)
        for arr in (self._xi, self._anchors, self._g, self._offsets):
            arr.setflags(write=False)

    @property
    def n_pieces(self) -> int:
        return len(self.pieces)

    def __repr__(self):
        return (f"MaxAffineModel(d={self.d}, n_pieces={self.n_pieces}, "
                f"grad_cap={self.grad_cap})")


def predict(model: MaxAffineModel, x) -> float:
    """Evaluate the model at one point: max_i (g_i + <xi_i, x - anchor_i>).

    Raises
    ------
    InvalidArgumentError
        If ``x`` does not have length ``model.d``.
    """
    x = _as_vector(np.atleast_1d(np.asarray(x, dtype=np.float64)), "x")
    if x.shape[0] != model.d:
        raise InvalidArgumentError(f"x has length {x.shape[0]}, model.d={model.d}")
    return float(np.max(model._offsets + model._xi @ x))


def predict_many(model: MaxAffineModel, X) -> np.ndarray:
    """Evaluate the model at each row of ``X``; returns a (m,) array."""
    X = _as_matrix(X, "X")
    if X.shape[1] != model.d:
        raise InvalidArgumentError(f"X has {X.shape[1]} columns, model.d={model.d}")
    return np.max(X @ model._xi.T + model._offsets[None, :], axis=1)


def gradient_sup_norm(model: MaxAffineModel) -> float:
    """Largest l-infinity norm over the pieces' gradients: max_i ||xi_i||_inf."""
    return float(np.abs(model._xi).max())


def _check_pair(f_vals, g_vals):
    f = _as_vector(f_vals, "f_vals")
    g = _as_vector(g_vals, "g_vals")
    if f.shape[0] == 0:
        raise InvalidArgumentError("empty input")
    if f.shape != g.shape:
        raise InvalidArgumentError(f"length mismatch: {f.shape[0]} vs {g.shape[0]}")
    return f, g


def empirical_l1(f_vals, g_vals) -> float:
    """Mean absolute deviation between two function value vectors."""
    f, g = _check_pair(f_vals, g_vals)
    return float(np.mean(np.abs(f - g)))


def empirical_l2(f_vals, g_vals) -> float:
    """Root mean squared deviation between two function value vectors."""
    f, g = _check_pair(f_vals, g_vals)
    return float(np.sqrt(np.mean((f - g) ** 2)))


@dataclass(frozen=True)
class LossReport:
    """Empirical l1/l2 distance between two functions over n_points samples."""

    l1: float
    l2: float
    n_points: int

    def __post_init__(self):
        if self.n_points < 1:
            raise InvalidArgumentError("n_points must be >= 1")
        if self.l1 < 0 or self.l2 < 0:
            raise InvalidArgumentError("losses must be nonnegative")


def loss_report(f_vals, g_vals) -> LossReport:
    f, g = _check_pair(f_vals, g_vals)
    return LossReport(l1=empirical_l1(f, g), l2=empirical_l2(f, g), n_points=f.shape[0])


def dual_objective(model: MaxAffineModel, data: Dataset, delta: float) -> float:
    """Penalised empirical objective: delta * ||grad||_sup + mean |Y - f(X)|.

    The Lipschitz factor of the absolute loss in the penalty term is 1
    (|d/dz |y-z|| = 1), so the penalty is exactly ``delta`` times the
    gradient sup-norm.
    """
    delta = float(delta)
    if delta < 0:
        raise InvalidArgumentError(f"delta must be >= 0, got {delta}")
    if data.d != model.d:
        raise InvalidArgumentError(f"data.d={data.d} does not match model.d={model.d}")
    fitted = predict_many(model, data.xs)
    return delta * gradient_sup_norm(model) + empirical_l1(data.ys, fitted)


# -- serialization -----------------------------------------------------------
#
# Flat JSON-compatible dict; numbers rendered with 17 significant digits so a
# round trip reproduces every float64 exactly.

def format_float(x: float) -> str:
    return f"{float(x):.17g}"


def _render(value) -> str:
    if isinstance(value, float):
        if math.isnan(value):
            return "NaN"      # json.loads parses the Python extension literals
        if math.isinf(value):
            return "Infinity" if value > 0 else "-Infinity"
        return format_float(value)
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, str):
        return json.dumps(value)
    if value is None:
        return "null"
    if isinstance(value, np.ndarray):
        value = value.tolist()
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_render(v) for v in value) + "]"
    if isinstance(value, dict):
        items = (f"{json.dumps(str(k))}: {_render(v)}" for k, v in value.items())
        return "{" + ", ".join(items) + "}"
    raise InvalidArgumentError(f"cannot serialize value of type {type(value)!r}")


def model_to_dict(model: MaxAffineModel) -> dict:
    return {
        "d": model.d,
        "grad_cap": "unbounded" if math.isinf(model.grad_cap) else model.grad_cap,
        "pieces": [
            {"g": p.g, "xi": p.xi.tolist(), "anchor": p.anchor.tolist()}
            for p in model.pieces
        ],
        "fit_meta": model.fit_meta.to_dict(),
    }


def model_from_dict(doc: dict) -> MaxAffineModel:
    cap = doc["grad_cap"]
    cap = math.inf if cap == "unbounded" else float(cap)
    meta_doc = doc.get("fit_meta", {})
    meta = FitMeta(
        objective=float(meta_doc.get("objective", math.nan)),
        iterations=int(meta_doc.get("iterations", 0)),
        delta=float(meta_doc.get("delta", math.nan)),
        extra=dict(meta_doc.get("extra", {})),
    )
    pieces = [
        AffinePiece(g=float(p["g"]), xi=np.array(p["xi"], dtype=np.float64),
                    anchor=np.array(p["anchor"], dtype=np.float64))
        for p in doc["pieces"]
    ]
    return MaxAffineModel(d=int(doc["d"]), pieces=pieces, grad_cap=cap, fit_meta=meta)


def save_model(model: MaxAffineModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_render(model_to_dict(model)))
        fh.write("\n")


def load_model(path) -> MaxAffineModel:
    with open(path, "r", encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))
