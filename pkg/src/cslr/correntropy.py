"""Correntropy-based sparse logistic regression (CSLR).

The Bernoulli log-likelihood of SLR is replaced by the empirical correntropy
between labels and predicted probabilities under a Gaussian kernel of width
``sigma``. The weight step maximizes

    (1/N) sum_n exp(-e_n**2 / (2 sigma**2)) - 0.5 * w' diag(alpha) w,
    e_n = t_n - y_n,

with a half-quadratic scheme: auxiliary variables ``v_n = -exp(-e_n**2 / 2 sigma**2)``
turn the kernel into a weighted squared error, which is then ascended with a
line search. The relevance step and pruning are shared with SLR.

Training multiplies the averaged correntropy by ``N sigma**2`` by default
(``reduction="scaled"``); see :func:`reduction_scale`.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg as sla

from .ard import (ArdConfig, PosteriorApprox, RelevanceState, fit_ard,
                  laplace_variances)
from .data import Dataset
from .errors import DimensionMismatch, NumericalFailure
from .logistic import LinearModel, augment, sigmoid

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CslrConfig(ArdConfig):
    bandwidth: float = 1.0
    max_hq_iter: int = 100
    max_hq_inner: int = 50
    hq_tol: float = 1e-8
    inner_tol: float = 1e-6
    reduction: str = "scaled"

    def __post_init__(self):
        super().__post_init__()
        if self.reduction not in REDUCTIONS:
            raise ValueError(f"reduction must be one of {REDUCTIONS}, got {self.reduction!r}")
        if not self.bandwidth > 0:
            raise ValueError(f"bandwidth must be positive, got {self.bandwidth}")


@dataclass
class HqState:
    """Half-quadratic auxiliaries ``v_n`` in ``[-1, 0)`` and the objective value."""

    auxiliaries: np.ndarray
    surrogate_objective: float = float("nan")


def gaussian_kernel(e, sigma):
    return np.exp(-np.square(e) / (2.0 * sigma * sigma))


def correntropy_estimate(targets, predictions, sigma) -> float:
    """Empirical correntropy ``mean(exp(-(t - y)**2 / (2 sigma**2)))``."""
    targets = np.asarray(targets, dtype=np.float64)
    predictions = np.asarray(predictions, dtype=np.float64)
    if targets.shape != predictions.shape:
        raise DimensionMismatch(f"{targets.shape} targets vs {predictions.shape} predictions")
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    return float(np.mean(gaussian_kernel(targets - predictions, sigma)))


# ---------------------------------------------------------------------------
# Array-level objective, gradient and Hessian on the augmented design matrix

def _forward(Xa, t, w):
    y = sigmoid(Xa @ w)
    return y, t - y


def objective_arrays(Xa, t, w, alphas, sigma, scale=1.0):
    _, e = _forward(Xa, t, w)
    return float(scale * np.mean(gaussian_kernel(e, sigma)) - 0.5 * np.sum(alphas * w * w))


def gradient_arrays(Xa, t, w, alphas, sigma, scale=1.0):
    y, e = _forward(Xa, t, w)
    r = gaussian_kernel(e, sigma) * e * y * (1.0 - y)
    return Xa.T @ r * (scale / (Xa.shape[0] * sigma ** 2)) - alphas * w


def hessian_arrays(Xa, t, w, alphas, sigma, scale=1.0):
    y, e = _forward(Xa, t, w)
    s = y * (1.0 - y)
    c = gaussian_kernel(e, sigma) * ((e * e / sigma ** 2 - 1.0) * s * s + e * s * (1.0 - 2.0 * y))
    H = (Xa.T * c) @ Xa * (scale / (Xa.shape[0] * sigma ** 2))
    H = 0.5 * (H + H.T)
    H[np.diag_indices_from(H)] -= alphas
    return H


def _active_arrays(data, model, alphas):
    Xa = augment(data.attributes)
    w = model.vector
    if alphas is None:
        act = np.ones(Xa.shape[1], dtype=bool)
        a = np.zeros(Xa.shape[1])
    else:
        act = alphas.active
        a = alphas.alphas
    if Xa.shape[1] != a.shape[0]:
        raise DimensionMismatch("relevance state does not match the data dimension")
    return Xa[:, act], data.labels.astype(np.float64), w[act], a[act]


REDUCTIONS = ("mean", "sum", "scaled")


def reduction_scale(reduction, n_samples, sigma):
    """Multiplier on the averaged correntropy term.

    ``"mean"``: 1. ``"sum"``: N. ``"scaled"``: N * sigma**2, which turns the
    data term into N sigma**2 minus a sum of Welsch losses, so sigma sets the
    robustness but not the strength of the fit, and the large-sigma limit is
    a squared-error fit of the probabilities.
    """
    if reduction == "mean":
        return 1.0
    if reduction == "sum":
        return float(n_samples)
    if reduction == "scaled":
        return float(n_samples) * sigma * sigma
    raise ValueError(f"reduction must be one of {REDUCTIONS}, got {reduction!r}")


def cslr_objective(data: Dataset, model: LinearModel, alphas: Optional[RelevanceState],
                   sigma: float, reduction="mean") -> float:
    """Correntropy of labels vs. predictions minus the ARD penalty, over active coordinates.

    ``alphas=None`` means no penalty and all coordinates active. The default
    ``reduction="mean"`` is the plain average; training uses ``"scaled"``
    unless configured otherwise.
    """
    scale = reduction_scale(reduction, data.n_samples, sigma)
    return objective_arrays(*_active_arrays(data, model, alphas), sigma, scale)


def cslr_gradient(data, model, alphas, sigma, reduction="mean"):
    """Gradient of :func:`cslr_objective` with respect to the active parameters
    (bias first)."""
    scale = reduction_scale(reduction, data.n_samples, sigma)
    return gradient_arrays(*_active_arrays(data, model, alphas), sigma, scale)


def cslr_hessian(data, model, alphas, sigma, reduction="mean"):
    scale = reduction_scale(reduction, data.n_samples, sigma)
    return hessian_arrays(*_active_arrays(data, model, alphas), sigma, scale)


# ---------------------------------------------------------------------------
# Half-quadratic solver

def hq_update_auxiliaries(errors, sigma) -> HqState:
    """Optimal auxiliaries for fixed errors: ``v_n = -exp(-e_n**2 / (2 sigma**2))``."""
    v = -gaussian_kernel(np.asarray(errors, dtype=np.float64), sigma)
    return HqState(v)


def hq_conjugate(v):
    """``phi(v) = -v log(-v) + v`` for ``v < 0``."""
    v = np.asarray(v, dtype=np.float64)
    return -v * np.log(-v) + v


def hq_energy(Xa, t, w, alphas, v, sigma, scale=1.0):
    """Augmented objective ``E(w, v)``; equals the correntropy objective when
    ``v`` is optimal for ``w``."""
    _, e = _forward(Xa, t, w)
    return float(scale * np.mean(v * e * e / (2.0 * sigma ** 2) - hq_conjugate(v))
                 - 0.5 * np.sum(alphas * w * w))


def surrogate_arrays(Xa, t, w, alphas, v, sigma, scale=1.0):
    _, e = _forward(Xa, t, w)
    return float(scale * np.mean(v * e * e) / (2.0 * sigma ** 2) - 0.5 * np.sum(alphas * w * w))


def surrogate_gradient_arrays(Xa, t, w, alphas, v, sigma, scale=1.0):
    y, e = _forward(Xa, t, w)
    r = -v * e * y * (1.0 - y)
    return Xa.T @ r * (scale / (Xa.shape[0] * sigma ** 2)) - alphas * w


def _newton_direction(Xa, sample_weights, alphas, g):
    """Solve ``(diag(alphas) + X' diag(sample_weights) X) d = g``; ``None`` if
    that matrix is not positive definite."""
    P = (Xa.T * sample_weights) @ Xa
    P[np.diag_indices_from(P)] += alphas
    try:
        L = np.linalg.cholesky(P)
    except np.linalg.LinAlgError:
        return None
    return sla.cho_solve((L, True), g, check_finite=False)


def hq_inner_solve_arrays(Xa, t, w0, alphas, v, sigma, tol=1e-6, max_iter=50, trace=None,
                          scale=1.0):
    """Ascend the fixed-``v`` surrogate from ``w0``.

    Search directions are Newton steps on the surrogate when its negative
    Hessian is positive definite, otherwise the gradient preconditioned by the
    Gauss-Newton curvature ``diag(alpha) + X' diag(-v y**2 (1-y)**2) X / (N sigma**2)``
    (always positive definite). Armijo backtracking makes every accepted step
    increase the surrogate.
    """
    N, k = Xa.shape
    c = scale / (N * sigma ** 2)
    # the data gradient shrinks like scale / sigma**2; tighten tol to match
    gtol = tol * min(1.0, scale / sigma ** 2)
    w = np.array(w0, dtype=np.float64)
    S = surrogate_arrays(Xa, t, w, alphas, v, sigma, scale)
    if not np.isfinite(S):
        raise NumericalFailure("non-finite surrogate objective")
    if trace is not None:
        trace.append(S)
    for _ in range(max_iter):
        y, e = _forward(Xa, t, w)
        s = y * (1.0 - y)
        g = Xa.T @ (-v * e * s) * c - alphas * w
        if np.max(np.abs(g)) < gtol:
            break
        d = _newton_direction(Xa, -v * (s * s - e * s * (1.0 - 2.0 * y)) * c, alphas, g)
        if d is None:
            d = _newton_direction(Xa, -v * s * s * c, alphas, g)
        if d is None:
            d = g / (alphas + 1e-12)
        slope = float(g @ d)
        if not slope > 0:
            d, slope = g, float(g @ g)
        lam = 1.0
        while lam > 1e-12:
            w_new = w + lam * d
            S_new = surrogate_arrays(Xa, t, w_new, alphas, v, sigma, scale)
            if not np.isfinite(S_new):
                raise NumericalFailure("non-finite surrogate objective")
            if S_new >= S + 1e-4 * lam * slope:
                break
            lam *= 0.5
        else:
            break
        w, S = w_new, S_new
        if trace is not None:
            trace.append(S)
    return w


def hq_inner_solve(data: Dataset, alphas: RelevanceState, auxiliaries: HqState, sigma,
                   warm_start: Optional[LinearModel] = None, tol=1e-6, max_iter=50,
                   trace=None, reduction="mean") -> LinearModel:
    """Ascend the fixed-auxiliary surrogate over the active coordinates of
    ``alphas``; ``trace`` (a list) collects the surrogate value after each
    accepted step."""
    Xa = augment(data.attributes)
    act = alphas.active
    v = np.asarray(auxiliaries.auxiliaries, dtype=np.float64)
    if np.any(v >= 0):
        raise ValueError("auxiliaries must be negative")
    P = Xa.shape[1]
    w0 = np.zeros(P) if warm_start is None else warm_start.vector
    w_act = hq_inner_solve_arrays(Xa[:, act], data.labels.astype(np.float64), w0[act],
                                  alphas.alphas[act], v, sigma, tol, max_iter, trace,
                                  reduction_scale(reduction, data.n_samples, sigma))
    w = np.zeros(P)
    w[act] = w_act
    return LinearModel.from_vector(w, active_mask=act)


def omega_step_cslr_arrays(Xa, t, alphas, w0, sigma, max_hq_iter=100, max_hq_inner=50,
                           hq_tol=1e-8, inner_tol=1e-6, scale=1.0):
    """Half-quadratic weight step plus Laplace variances on the active columns."""
    w = np.array(w0, dtype=np.float64)
    _, e = _forward(Xa, t, w)
    v = -gaussian_kernel(e, sigma)
    E_prev = hq_energy(Xa, t, w, alphas, v, sigma, scale)
    trace = [E_prev]
    for _ in range(max_hq_iter):
        _, e = _forward(Xa, t, w)
        v = -gaussian_kernel(e, sigma)
        # v underflows to -0.0 for huge errors; keep it strictly negative
        v = np.minimum(v, -np.finfo(np.float64).tiny)
        w = hq_inner_solve_arrays(Xa, t, w, alphas, v, sigma, inner_tol, max_hq_inner,
                                  scale=scale)
        E = hq_energy(Xa, t, w, alphas, v, sigma, scale)
        if not np.isfinite(E):
            raise NumericalFailure("non-finite half-quadratic objective")
        trace.append(E)
        if abs(E - E_prev) < hq_tol * (1.0 + abs(E)):
            break
        E_prev = E
    H = hessian_arrays(Xa, t, w, alphas, sigma, scale)
    variances, repair = laplace_variances(-H)
    obj = objective_arrays(Xa, t, w, alphas, sigma, scale)
    return PosteriorApprox(w, variances, obj, repair, trace)


def omega_step_cslr(data: Dataset, alphas: RelevanceState, warm_start: Optional[LinearModel],
                    config: CslrConfig) -> PosteriorApprox:
    """Weight step of CSLR on the active coordinates of ``alphas``.

    ``hq_trace`` of the result holds ``E(w^k, v^k)`` for k = 0, 1, ...
    """
    Xa = augment(data.attributes)
    act = alphas.active
    if not act.any():
        raise ValueError("no active parameters")
    P = Xa.shape[1]
    w0 = np.zeros(P) if warm_start is None else warm_start.vector
    sub = omega_step_cslr_arrays(Xa[:, act], data.labels.astype(np.float64), alphas.alphas[act],
                                 w0[act], config.bandwidth, config.max_hq_iter,
                                 config.max_hq_inner, config.hq_tol, config.inner_tol,
                                 reduction_scale(config.reduction, data.n_samples,
                                                 config.bandwidth))
    mean = np.zeros(P)
    var = np.zeros(P)
    mean[act] = sub.mean
    var[act] = sub.variances
    return PosteriorApprox(mean, var, sub.objective, sub.repair, sub.hq_trace)


def cslr_step(config: CslrConfig):
    """Weight-step callable for :func:`cslr.ard.fit_ard` on array inputs."""

    def step(Xa, t, alphas, w0):
        scale = reduction_scale(config.reduction, Xa.shape[0], config.bandwidth)
        return omega_step_cslr_arrays(Xa, t, alphas, w0, config.bandwidth, config.max_hq_iter,
                                      config.max_hq_inner, config.hq_tol, config.inner_tol,
                                      scale)

    return step


def train_cslr(data: Dataset, config: CslrConfig = CslrConfig()):
    """Fit CSLR with a fixed bandwidth. Returns ``(model, report)``; the
    report's ``hq_trace`` lists ``(outer_iteration, hq_iteration, E)``."""
    model, report, _ = fit_ard(data, config, cslr_step(config), "cslr",
                               bandwidth=config.bandwidth)
    return model, report
