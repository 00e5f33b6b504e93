"""Linear discriminant, sigmoid probabilities, Bernoulli log-likelihood and
a maximum-likelihood (IRLS) baseline.

Parameters are handled internally as one vector ``w = (w0, w1, ..., wD)``
against the design matrix ``[1, X]``; :class:`LinearModel` splits the bias
out for the public surface.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.special import expit

from .data import Dataset, StandardizationStats, transform
from .errors import Degenerate, DimensionMismatch, NumericalFailure

FORMAT_VERSION = 1

_TINY = np.finfo(np.float64).tiny
_ONE_MINUS = np.nextafter(1.0, 0.0)


def sigmoid(f):
    """Logistic function clamped to ``[tiny, 1 - ulp]`` so logs stay finite."""
    return np.clip(expit(f), _TINY, _ONE_MINUS)


def augment(X):
    """Prepend a column of ones for the bias coordinate."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    return np.hstack([np.ones((X.shape[0], 1)), X])


@dataclass(frozen=True, eq=False)
class LinearModel:
    """Fitted linear classifier.

    ``active_mask`` covers ``(bias, w1..wD)``; inactive entries carry an exact
    zero. ``standardization`` holds the training z-score stats when the model
    was fitted on standardized data, and ``bandwidth`` the correntropy kernel
    width for CSLR fits.
    """

    bias: float
    weights: np.ndarray
    active_mask: Optional[np.ndarray] = None
    standardization: Optional[StandardizationStats] = None
    bandwidth: Optional[float] = None
    algorithm: str = "none"
    train_meta: dict = field(default_factory=dict)

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64).reshape(-1)
        if self.active_mask is None:
            mask = np.ones(w.shape[0] + 1, dtype=bool)
        else:
            mask = np.array(self.active_mask, dtype=bool).reshape(-1)
        if mask.shape[0] != w.shape[0] + 1:
            raise DimensionMismatch("active_mask must have D + 1 entries")
        if not np.all(np.isfinite(w)) or not np.isfinite(self.bias):
            raise NumericalFailure("model weights must be finite")
        bias = float(self.bias) if mask[0] else 0.0
        w = np.where(mask[1:], w, 0.0)
        w.setflags(write=False)
        mask.setflags(write=False)
        object.__setattr__(self, "bias", bias)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "active_mask", mask)

    @classmethod
    def from_vector(cls, w_full, active_mask=None, **kw):
        w_full = np.asarray(w_full, dtype=np.float64)
        return cls(bias=float(w_full[0]), weights=w_full[1:], active_mask=active_mask, **kw)

    @classmethod
    def zeros(cls, dim, **kw):
        return cls(bias=0.0, weights=np.zeros(dim), **kw)

    @property
    def dim(self):
        return self.weights.shape[0]

    @property
    def vector(self):
        """Full parameter vector ``(w0, w1, ..., wD)``."""
        return np.concatenate([[self.bias], self.weights])

    @property
    def n_selected(self):
        """Number of active non-bias features."""
        return int(self.active_mask[1:].sum())

    def transform(self, X):
        """Map raw inputs into the space the weights live in."""
        if self.standardization is None:
            return np.asarray(X, dtype=np.float64)
        return transform(self.standardization, X)


def _check_dim(model, X):
    X = np.asarray(X, dtype=np.float64)
    if X.shape[-1] != model.dim:
        raise DimensionMismatch(f"input has {X.shape[-1]} features, model expects {model.dim}")
    return X


def discriminant(model: LinearModel, x):
    """``f(x) = sum_d w_d x_d + w0`` for a vector or a row-stacked matrix."""
    x = _check_dim(model, x)
    return x @ model.weights + model.bias


def predict_prob(model: LinearModel, x):
    return sigmoid(discriminant(model, x))


def predict_label(model: LinearModel, x):
    """Class 1 iff the discriminant is strictly positive."""
    f = discriminant(model, x)
    return (f > 0).astype(np.int64)


def log_sigmoid_terms(f, t):
    """Per-sample ``t log y + (1 - t) log(1 - y)`` evaluated without cancellation."""
    return -np.logaddexp(0.0, np.where(t == 1, -f, f))


def log_likelihood(model: LinearModel, data: Dataset) -> float:
    f = discriminant(model, data.attributes)
    return float(np.sum(log_sigmoid_terms(f, data.labels)))


# ---------------------------------------------------------------------------
# Maximum likelihood

@dataclass(frozen=True)
class OptimizerConfig:
    tol: float = 1e-5
    max_iter: int = 300
    ridge: float = 1e-8


@dataclass
class MleTrace:
    objective: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False


def _penalized_loglik(Xa, t, w, alphas):
    f = Xa @ w
    val = float(np.sum(log_sigmoid_terms(f, t)))
    if alphas is not None:
        val -= 0.5 * float(np.sum(alphas * w * w))
    return val


def _scaled_solve(H, g, ridge=0.0):
    """Solve ``(H + ridge I) x = g`` after symmetric diagonal scaling; ARD
    precisions make the raw diagonal span many orders of magnitude."""
    diag = np.diag(H) + ridge
    d = np.sqrt(np.where(diag > 0, diag, 1.0))
    Hs = H / np.outer(d, d)
    Hs[np.diag_indices_from(Hs)] += ridge / (d * d)
    return np.linalg.solve(Hs, g / d) / d


def newton_logistic(Xa, t, w0, alphas=None, tol=1e-5, max_iter=300, ridge=1e-8,
                    trace=None):
    """Damped Newton ascent of the (optionally ARD-penalized) Bernoulli log-likelihood.

    ``alphas`` adds ``-0.5 * sum(alphas * w**2)``. Steps are halved until the
    objective does not decrease. Returns ``(w, H)`` with ``H`` the negative
    Hessian (without the ridge) at the returned ``w``.
    """
    w = np.array(w0, dtype=np.float64)
    obj = _penalized_loglik(Xa, t, w, alphas)
    if not np.isfinite(obj):
        raise NumericalFailure("non-finite log-likelihood at start")
    if trace is not None:
        trace.objective.append(obj)
    k = Xa.shape[1]
    it = 0
    for it in range(1, max_iter + 1):
        y = sigmoid(Xa @ w)
        g = Xa.T @ (t - y)
        H = (Xa.T * (y * (1.0 - y))) @ Xa
        if alphas is not None:
            g -= alphas * w
            H[np.diag_indices(k)] += alphas
        step = _scaled_solve(H, g, ridge)
        lam = 1.0
        while True:
            w_new = w + lam * step
            obj_new = _penalized_loglik(Xa, t, w_new, alphas)
            if not np.isfinite(obj_new):
                raise NumericalFailure("non-finite log-likelihood")
            if obj_new >= obj or lam < 1e-10:
                break
            lam *= 0.5
        if obj_new < obj:
            # no ascent possible along the Newton direction
            break
        change = float(np.max(np.abs(w_new - w)))
        w, obj = w_new, obj_new
        if trace is not None:
            trace.objective.append(obj)
        if change < tol:
            if trace is not None:
                trace.converged = True
            break
    if trace is not None:
        trace.iterations = it
    y = sigmoid(Xa @ w)
    H = (Xa.T * (y * (1.0 - y))) @ Xa
    if alphas is not None:
        H[np.diag_indices(k)] += alphas
    return w, H


def train_mle(data: Dataset, config: OptimizerConfig = OptimizerConfig(), trace=None) -> LinearModel:
    """Plain logistic regression by IRLS with all features active."""
    if not data.has_both_classes():
        raise Degenerate("training data contains a single class")
    trace = trace if trace is not None else MleTrace()
    Xa = augment(data.attributes)
    w, _ = newton_logistic(Xa, data.labels.astype(np.float64), np.zeros(Xa.shape[1]),
                           tol=config.tol, max_iter=config.max_iter, ridge=config.ridge,
                           trace=trace)
    meta = {"iterations": trace.iterations,
            "objective_trace_last": trace.objective[-1]}
    return LinearModel.from_vector(w, algorithm="mle", train_meta=meta)


# ---------------------------------------------------------------------------
# Serialization

def model_to_dict(model: LinearModel) -> dict:
    stats = model.standardization
    return {
        "format_version": FORMAT_VERSION,
        "algorithm": model.algorithm,
        "bias": float(model.bias),
        "weights": [float(v) for v in model.weights],
        "active_mask": [bool(v) for v in model.active_mask],
        "means": None if stats is None else [float(v) for v in stats.means],
        "stds": None if stats is None else [float(v) for v in stats.stds],
        "bandwidth": None if model.bandwidth is None else float(model.bandwidth),
        "train_meta": dict(model.train_meta),
    }


def model_from_dict(doc: dict) -> LinearModel:
    if doc.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported model format_version {doc.get('format_version')!r}")
    stats = None
    if doc.get("means") is not None:
        stats = StandardizationStats(np.array(doc["means"], dtype=np.float64),
                                     np.array(doc["stds"], dtype=np.float64))
    return LinearModel(
        bias=float(doc["bias"]),
        weights=np.array(doc["weights"], dtype=np.float64),
        active_mask=np.array(doc["active_mask"], dtype=bool),
        standardization=stats,
        bandwidth=doc.get("bandwidth"),
        algorithm=doc.get("algorithm", "none"),
        train_meta=doc.get("train_meta", {}),
    )


def save_model(model: LinearModel, path):
    """Write the model as JSON. Python's float repr is the shortest string
    that round-trips, so storage is bit-exact."""
    text = json.dumps(model_to_dict(model), indent=1, sort_keys=False)
    Path(path).write_text(text + "\n", encoding="utf-8")


def load_model(path) -> LinearModel:
    return model_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
