"""Automatic relevance determination for logistic models.

The training loop alternates a weight step (MAP estimate plus a Laplace
approximation of the weight posterior) with a relevance step that re-estimates
one prior precision per parameter. Precisions that reach ``alpha_max`` prune
their parameter for the rest of the run. The loop is shared between the
Bernoulli-likelihood SLR and the correntropy-based CSLR, which differ only in
the weight step.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np
import scipy.linalg as sla

from .data import Dataset
from .errors import Degenerate, NumericalFailure
from .logistic import LinearModel, augment, newton_logistic, _penalized_loglik

log = logging.getLogger(__name__)

ALPHA_CAP = 1e30


class AlphaRule(str, Enum):
    FAST = "fast"
    EXPECTATION = "expectation"


@dataclass(frozen=True)
class ArdConfig:
    alpha_max: float = 1e8
    max_iter: int = 300
    tol: float = 1e-4
    alpha_rule: AlphaRule = AlphaRule.FAST
    alpha_min: float = 1e-12
    protect_bias: bool = False
    bias_alpha: float = 1e-6
    newton_tol: float = 1e-8
    newton_max_iter: int = 100

    def __post_init__(self):
        object.__setattr__(self, "alpha_rule", AlphaRule(self.alpha_rule))
        if self.alpha_max <= 0 or self.max_iter < 1 or self.tol <= 0:
            raise ValueError("alpha_max, max_iter and tol must be positive")


@dataclass
class RelevanceState:
    """Per-parameter prior precisions; index 0 is the bias."""

    alphas: np.ndarray
    pruned: np.ndarray
    alpha_max: float = 1e8

    @classmethod
    def initial(cls, n_params, alpha_max=1e8, value=1.0):
        return cls(np.full(n_params, float(value)), np.zeros(n_params, dtype=bool), alpha_max)

    @property
    def active(self):
        return ~self.pruned

    def copy(self):
        return RelevanceState(self.alphas.copy(), self.pruned.copy(), self.alpha_max)


@dataclass
class PosteriorApprox:
    """Gaussian approximation of the weight posterior.

    ``mean`` and ``variances`` are full length (D + 1) with zeros at pruned
    coordinates. ``repair`` is the multiple of the identity that had to be
    added to the negative Hessian before it factorized (0.0 if none).
    """

    mean: np.ndarray
    variances: np.ndarray
    objective: float = float("nan")
    repair: float = 0.0
    hq_trace: list = field(default_factory=list)


@dataclass
class TrainReport:
    records: list = field(default_factory=list)
    termination_reason: str = "IterationCap"
    hq_trace: list = field(default_factory=list)
    pruned_at: dict = field(default_factory=dict)

    @property
    def n_iterations(self):
        return len(self.records)

    def n_active(self):
        return [r["n_active"] for r in self.records]

    FIELDS = ("iteration", "objective", "n_active", "max_weight_change",
              "max_alpha_change", "repair")

    def write_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.FIELDS)
            for r in self.records:
                w.writerow([r[k] if isinstance(r[k], int) else repr(float(r[k]))
                            for k in self.FIELDS])


# ---------------------------------------------------------------------------
# Shared numerical pieces

def laplace_variances(neg_hessian):
    """Diagonal of the inverse of ``neg_hessian``.

    If the matrix is not positive definite, the smallest ``10**k * I``
    (k = -8, -7, ...) that lets a Cholesky factorization succeed is added.
    Returns ``(variances, repair)``.
    """
    A = np.array(neg_hessian, dtype=np.float64)
    k = A.shape[0]
    repair = 0.0
    for p in range(-8, 31):
        try:
            c = sla.cho_factor(A if repair == 0.0 else A + repair * np.eye(k),
                               lower=True, check_finite=False)
            if np.all(np.diag(c[0]) > 0):
                break
        except sla.LinAlgError:
            pass
        repair = 10.0 ** p
    else:
        raise NumericalFailure("negative Hessian could not be made positive definite")
    Linv = sla.solve_triangular(c[0], np.eye(k), lower=True, check_finite=False)
    variances = np.einsum("ij,ij->j", Linv, Linv)
    return np.maximum(variances, 0.0), repair


def alpha_step(posterior: PosteriorApprox, state: RelevanceState,
               rule: AlphaRule = AlphaRule.FAST, alpha_min=1e-12,
               frozen=None) -> RelevanceState:
    """Re-estimate relevance precisions from a posterior approximation.

    Expectation rule: ``1 / (m**2 + s2)``. Fast rule:
    ``(1 - alpha * s2) / m**2`` with the previous ``alpha``; coordinates where
    it is not positive fall back to the expectation rule. Means below 1e-12 in
    magnitude send the precision straight to ``alpha_max``. Newly pruned
    entries are marked; pruned entries are never revived.
    """
    rule = AlphaRule(rule)
    new = state.copy()
    upd = state.active.copy()
    if frozen is not None:
        upd &= ~np.asarray(frozen, dtype=bool)
    m2 = posterior.mean[upd] ** 2
    s2 = posterior.variances[upd]
    a_prev = state.alphas[upd]
    with np.errstate(divide="ignore", invalid="ignore"):
        expect = 1.0 / (m2 + s2)
        if rule is AlphaRule.FAST:
            num = 1.0 - a_prev * s2
            a = np.where(num > 0, num / m2, expect)
        else:
            a = expect
    a = np.where(m2 < 1e-24, state.alpha_max, a)
    a = np.where(np.isfinite(a), a, ALPHA_CAP)
    new.alphas[upd] = np.clip(a, alpha_min, ALPHA_CAP)
    new.pruned |= upd & (new.alphas >= state.alpha_max)
    return new


# Signature: (Xa_active, t, alphas_active, w_active) -> PosteriorApprox on the active coords
OmegaStep = Callable[[np.ndarray, np.ndarray, np.ndarray, np.ndarray], PosteriorApprox]


def fit_ard(data: Dataset, config: ArdConfig, omega_step: OmegaStep,
            algorithm: str, bandwidth=None):
    """Run the alternating weight/relevance loop and return ``(model, report)``."""
    if not data.has_both_classes():
        raise Degenerate("training data contains a single class")
    Xa = augment(data.attributes)
    t = data.labels.astype(np.float64)
    P = Xa.shape[1]
    state = RelevanceState.initial(P, config.alpha_max)
    frozen = np.zeros(P, dtype=bool)
    if config.protect_bias:
        frozen[0] = True
        state.alphas[0] = config.bias_alpha
    w = np.zeros(P)
    report = TrainReport()
    obj = float("nan")

    for it in range(1, config.max_iter + 1):
        act = state.active
        sub = omega_step(Xa[:, act], t, state.alphas[act], w[act])
        if not np.all(np.isfinite(sub.mean)) or not np.isfinite(sub.objective):
            raise NumericalFailure(f"weight step produced non-finite values at iteration {it}")
        post = PosteriorApprox(np.zeros(P), np.zeros(P), sub.objective, sub.repair)
        post.mean[act] = sub.mean
        post.variances[act] = sub.variances
        for k, e in enumerate(sub.hq_trace):
            report.hq_trace.append((it, k, e))

        new_state = alpha_step(post, state, config.alpha_rule, config.alpha_min, frozen)
        newly = new_state.pruned & ~state.pruned
        for d in np.flatnonzero(newly):
            report.pruned_at[int(d)] = it
        w_new = np.where(new_state.pruned, 0.0, post.mean)

        still = new_state.active
        dw = float(np.max(np.abs(w_new[act] - w[act]))) if act.any() else 0.0
        da = (float(np.max(np.abs(np.log(new_state.alphas[still]) - np.log(state.alphas[still]))))
              if still.any() else 0.0)
        obj = sub.objective
        report.records.append({
            "iteration": it, "objective": obj, "n_active": int(still.sum()),
            "max_weight_change": dw, "max_alpha_change": da, "repair": sub.repair,
        })
        log.debug("%s iter %d: obj=%.6g active=%d dw=%.3g dlogalpha=%.3g",
                  algorithm, it, obj, int(still.sum()), dw, da)
        w, state = w_new, new_state
        if not still.any():
            report.termination_reason = "Converged"
            break
        if not newly.any() and max(dw, da) < config.tol:
            report.termination_reason = "Converged"
            break

    meta = {"iterations": report.n_iterations,
            "objective_trace_last": float(obj),
            "termination_reason": report.termination_reason}
    model = LinearModel.from_vector(w, active_mask=state.active, algorithm=algorithm,
                                    bandwidth=bandwidth, train_meta=meta)
    model_state = state
    return model, report, model_state


# ---------------------------------------------------------------------------
# SLR

def omega_step_slr_arrays(Xa, t, alphas, w0, tol=1e-8, max_iter=100):
    w, H = newton_logistic(Xa, t, w0, alphas=alphas, tol=tol, max_iter=max_iter, ridge=0.0)
    variances, repair = laplace_variances(H)
    return PosteriorApprox(w, variances, _penalized_loglik(Xa, t, w, alphas), repair)


def omega_step_slr(data: Dataset, alphas: RelevanceState, warm_start: Optional[LinearModel] = None,
                   tol=1e-8, max_iter=100) -> PosteriorApprox:
    """MAP weights and Laplace variances of the ARD-penalized Bernoulli likelihood.

    Works on the active coordinates of ``alphas``; pruned entries of the
    returned mean and variances are zero.
    """
    Xa = augment(data.attributes)
    act = alphas.active
    if not act.any():
        raise ValueError("no active parameters")
    P = Xa.shape[1]
    w0 = np.zeros(P) if warm_start is None else warm_start.vector
    sub = omega_step_slr_arrays(Xa[:, act], data.labels.astype(np.float64),
                                alphas.alphas[act], w0[act], tol, max_iter)
    mean = np.zeros(P)
    var = np.zeros(P)
    mean[act] = sub.mean
    var[act] = sub.variances
    return PosteriorApprox(mean, var, sub.objective, sub.repair)


def slr_step(config: ArdConfig):
    """Weight-step callable for :func:`fit_ard` on array inputs."""

    def step(Xa, t, alphas, w0):
        return omega_step_slr_arrays(Xa, t, alphas, w0, config.newton_tol, config.newton_max_iter)

    return step


def train_slr(data: Dataset, config: ArdConfig = ArdConfig()):
    """Sparse logistic regression with ARD. Returns ``(model, report)``."""
    model, report, _ = fit_ard(data, config, slr_step(config), "slr")
    return model, report
