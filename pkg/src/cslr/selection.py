"""Bandwidth cross-validation, train/test splitting and the Monte-Carlo
robustness benchmark on synthetic data."""

from __future__ import annotations

import csv
import logging
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from threadpoolctl import threadpool_limits

from .ard import ArdConfig, train_slr
from .correntropy import CslrConfig, train_cslr
from .data import (ContaminationSpec, Dataset, SyntheticSpec, apply_standardize,
                   contaminate, fit_standardize, generate_synthetic)
from .errors import CslrError, FoldDegenerate
from .logistic import OptimizerConfig, predict_label, train_mle
from .metrics import accuracy, selection_score
from .rng import substream

log = logging.getLogger(__name__)

DEFAULT_BANDWIDTHS = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0,
                      1.2, 1.4, 1.6, 1.8, 2.0, 4.0, 7.0, 10.0, 30.0, 100.0)
DEFAULT_PROPORTIONS = tuple(round(0.05 * i, 2) for i in range(21))
DEFAULT_NOISE_STDS = (0.1, 0.3, 0.7, 1.0, 2.0, 3.0)
ALGORITHMS = ("slr", "cslr", "mle")


@dataclass(frozen=True)
class CvPlan:
    n_folds: int = 5
    candidate_bandwidths: tuple = DEFAULT_BANDWIDTHS
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "candidate_bandwidths",
                           tuple(float(c) for c in self.candidate_bandwidths))
        if self.n_folds < 2:
            raise ValueError("n_folds must be at least 2")
        if not self.candidate_bandwidths or min(self.candidate_bandwidths) <= 0:
            raise ValueError("candidate bandwidths must be a non-empty list of positive values")


def stratified_folds(labels, n_folds, rng):
    """Fold index per sample; each class is shuffled and dealt round-robin."""
    labels = np.asarray(labels)
    fold = np.empty(labels.shape[0], dtype=np.int64)
    for cls in (0, 1):
        idx = np.flatnonzero(labels == cls)
        idx = idx[rng.permutation(idx.shape[0])]
        fold[idx] = np.arange(idx.shape[0]) % n_folds
    return fold


def cv_scores(data: Dataset, plan: CvPlan, template: CslrConfig = CslrConfig(), jobs: int = 1):
    """Mean held-out accuracy of CSLR for each candidate bandwidth.

    Each fold's training part is standardized with its own statistics.
    Returns a list of ``(bandwidth, mean_accuracy)`` in candidate order.
    """
    rng = substream(plan.seed, "cv-folds")
    fold = stratified_folds(data.labels, plan.n_folds, rng)
    splits = []
    for k in range(plan.n_folds):
        tr, te = data.subset(fold != k), data.subset(fold == k)
        if not tr.has_both_classes() or not te.has_both_classes():
            raise FoldDegenerate(f"fold {k} lacks one of the classes")
        stats = fit_standardize(tr)
        splits.append((apply_standardize(stats, tr), apply_standardize(stats, te)))
    tasks = [(replace(template, bandwidth=sigma), splits) for sigma in plan.candidate_bandwidths]
    out = []
    for sigma, acc in zip(plan.candidate_bandwidths, _map(_cv_candidate, tasks, jobs)):
        log.info("cv sigma=%g accuracy=%.4f", sigma, acc)
        out.append((sigma, acc))
    return out


def _cv_candidate(args):
    cfg, splits = args
    accs = []
    for tr, te in splits:
        model, _ = train_cslr(tr, cfg)
        accs.append(accuracy(predict_label(model, te.attributes), te.labels))
    return statistics.fmean(accs)


def select_bandwidth(data: Dataset, plan: CvPlan = CvPlan(),
                     template: CslrConfig = CslrConfig(), jobs: int = 1) -> float:
    """Bandwidth with the best cross-validated accuracy; ties go to the larger one."""
    if len(plan.candidate_bandwidths) == 1:
        return plan.candidate_bandwidths[0]
    scores = cv_scores(data, plan, template, jobs)
    best = max(acc for _, acc in scores)
    return max(s for s, acc in scores if acc == best)


def split(data: Dataset, train_fraction: float, seed=0):
    """Shuffle and split into ``(train, test)``; the train part gets
    ``round(train_fraction * N)`` rows."""
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must lie strictly between 0 and 1")
    rng = substream(seed, "split")
    perm = rng.permutation(data.n_samples)
    n_train = int(np.floor(train_fraction * data.n_samples + 0.5))
    return data.subset(perm[:n_train]), data.subset(perm[n_train:])


# ---------------------------------------------------------------------------
# Benchmark

@dataclass(frozen=True)
class BenchSpec:
    """Grid of contamination settings crossed with repetitions and algorithms.

    ``sigma`` pins the CSLR bandwidth. Otherwise it is chosen by cross-
    validation, either on every repetition's training set
    (``sigma_selection="per-repetition"``) or once per grid cell on a separate
    calibration draw with the same contamination (``"per-cell"``).
    """

    synthetic: SyntheticSpec = SyntheticSpec()
    modes: tuple = ("sample",)
    proportions: tuple = DEFAULT_PROPORTIONS
    noise_stds: tuple = DEFAULT_NOISE_STDS
    n_repetitions: int = 20
    algorithms: tuple = ("slr", "cslr")
    seed: int = 0
    sigma: Optional[float] = None
    sigma_selection: str = "per-repetition"
    cv_plan: CvPlan = CvPlan()
    ard: ArdConfig = ArdConfig()
    cslr: CslrConfig = CslrConfig()
    record_timing: bool = False

    def __post_init__(self):
        if any(not 0 <= p <= 1 for p in self.proportions):
            raise ValueError("proportions must lie in [0, 1]")
        if any(a not in ALGORITHMS for a in self.algorithms):
            raise ValueError(f"algorithms must be among {ALGORITHMS}")
        if self.sigma_selection not in ("per-repetition", "per-cell"):
            raise ValueError("sigma_selection must be 'per-repetition' or 'per-cell'")
        if self.n_repetitions < 1:
            raise ValueError("n_repetitions must be positive")

    def cells(self):
        return [(m, float(p), float(s)) for m in self.modes
                for p in self.proportions for s in self.noise_stds]


RAW_COLUMNS = ("algorithm", "mode", "proportion", "noise_std", "repetition", "accuracy",
               "n_selected", "precision", "recall", "f1", "wall_time_ms", "sigma", "error")
METRICS = ("accuracy", "n_selected", "precision", "recall", "f1", "wall_time_ms")


@dataclass
class BenchResult:
    rows: list = field(default_factory=list)
    cell_sigmas: dict = field(default_factory=dict)

    def aggregates(self):
        """Mean and sample standard deviation (n - 1) per algorithm and cell,
        over the rows that did not fail."""
        groups = {}
        for r in self.rows:
            key = (r["algorithm"], r["mode"], r["proportion"], r["noise_std"])
            groups.setdefault(key, []).append(r)
        out = []
        for key, rows in groups.items():
            ok = [r for r in rows if not r["error"]]
            agg = {"algorithm": key[0], "mode": key[1], "proportion": key[2],
                   "noise_std": key[3], "n": len(ok), "n_failed": len(rows) - len(ok)}
            for m in METRICS:
                vals = [float(r[m]) for r in ok if r[m] is not None]
                agg[f"{m}_mean"] = statistics.fmean(vals) if vals else float("nan")
                agg[f"{m}_std"] = statistics.stdev(vals) if len(vals) > 1 else float("nan")
            out.append(agg)
        return out

    def write_raw_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(RAW_COLUMNS)
            for r in self.rows:
                w.writerow([_fmt(r[c]) for c in RAW_COLUMNS])

    def write_aggregate_csv(self, path):
        aggs = self.aggregates()
        cols = ["algorithm", "mode", "proportion", "noise_std", "n", "n_failed"]
        for m in METRICS:
            cols += [f"{m}_mean", f"{m}_std"]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for a in aggs:
                w.writerow([_fmt(a[c]) for c in cols])


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _cell_key(cell):
    mode, prop, std = cell
    return f"{mode}:{prop!r}:{std!r}"


def _draw(spec: BenchSpec, rep: int, cell, purpose="synthetic"):
    """Train/test data for one repetition and cell, train side contaminated."""
    data_rng = substream(spec.seed, purpose, rep) if purpose == "synthetic" \
        else substream(spec.seed, purpose, rep, _cell_key(cell))
    train, test, w_true, relevant = generate_synthetic(spec.synthetic, data_rng)
    mode, prop, std = cell
    cspec = ContaminationSpec(mode, prop, std)
    train = contaminate(train, cspec, substream(spec.seed, f"contaminate-{purpose}", rep,
                                                _cell_key(cell)))
    return train, test, relevant


def _cv_seed(spec, *keys):
    return int(substream(spec.seed, "cv", *keys).integers(2 ** 31))


def _calibrate(args):
    spec, cell = args
    train, _, _ = _draw(spec, 0, cell, purpose="calibration")
    plan = replace(spec.cv_plan, seed=_cv_seed(spec, "cell", _cell_key(cell)))
    return select_bandwidth(train, plan, spec.cslr)


def _run_one(args):
    spec, cell, rep, sigma = args
    train, test, relevant = _draw(spec, rep, cell)
    stats = fit_standardize(train)
    train_s = apply_standardize(stats, train)
    test_s = apply_standardize(stats, test)
    rows = []
    for algo in spec.algorithms:
        row = {"algorithm": algo, "mode": cell[0], "proportion": cell[1], "noise_std": cell[2],
               "repetition": rep, "accuracy": None, "n_selected": None, "precision": None,
               "recall": None, "f1": None, "wall_time_ms": None, "sigma": None, "error": ""}
        t0 = time.perf_counter()
        try:
            if algo == "slr":
                model, _ = train_slr(train_s, spec.ard)
            elif algo == "mle":
                model = train_mle(train_s, OptimizerConfig(max_iter=spec.ard.max_iter))
            else:
                s = sigma
                if s is None:
                    plan = replace(spec.cv_plan,
                                   seed=_cv_seed(spec, "rep", rep, _cell_key(cell)))
                    s = select_bandwidth(train_s, plan, spec.cslr)
                model, _ = train_cslr(train_s, replace(spec.cslr, bandwidth=s))
                row["sigma"] = float(s)
        except (CslrError, ValueError, ArithmeticError) as exc:
            row["error"] = f"{type(exc).__name__}: {exc}"
            rows.append(row)
            continue
        elapsed = (time.perf_counter() - t0) * 1000.0
        sel = model.active_mask[1:]
        score = selection_score(sel, relevant)
        row.update(accuracy=accuracy(predict_label(model, test_s.attributes), test_s.labels),
                   n_selected=int(sel.sum()), precision=score.precision, recall=score.recall,
                   f1=score.f1, wall_time_ms=elapsed if spec.record_timing else None)
        rows.append(row)
    return rows


def _single_thread_blas():
    threadpool_limits(limits=1)


def _map(fn, tasks, jobs):
    """Ordered map; with ``jobs > 1`` tasks run in worker processes whose BLAS
    is pinned to one thread, matching :func:`deterministic_blas`."""
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs, initializer=_single_thread_blas) as ex:
        return list(ex.map(fn, tasks))


def deterministic_blas():
    """Context manager pinning BLAS to one thread so results do not depend on
    how work is spread over processes."""
    return threadpool_limits(limits=1)


def run_benchmark(spec: BenchSpec, jobs: int = 1) -> BenchResult:
    """Run every (cell, repetition) of ``spec``.

    Only training data is contaminated; standardization is fitted on the
    (contaminated) training set; test data stays clean. Rows come out in
    cell-major, repetition-minor, algorithm order whatever ``jobs`` is.
    """
    cells = spec.cells()
    cell_sigma = {c: spec.sigma for c in cells}
    if "cslr" in spec.algorithms and spec.sigma is None and spec.sigma_selection == "per-cell":
        sig = _map(_calibrate, [(spec, c) for c in cells], jobs)
        cell_sigma = dict(zip(cells, sig))
    tasks = [(spec, c, rep, cell_sigma[c]) for c in cells for rep in range(spec.n_repetitions)]
    result = BenchResult(cell_sigmas={_cell_key(c): s for c, s in cell_sigma.items()})
    for rows in _map(_run_one, tasks, jobs):
        result.rows.extend(rows)
    return result
