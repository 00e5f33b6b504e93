"""Datasets, CSV ingestion, standardization, synthetic data and contamination."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .errors import (DimensionMismatch, MissingColumn, NonBinaryLabel,
                     NonNumericCell, DataError)
from .rng import substream


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Labeled sample matrix.

    Attributes
    ----------
    attributes : ndarray, shape (N, D)
    labels : ndarray of int, shape (N,)
        Values in {0, 1}.
    feature_names : tuple of str, optional
    """

    attributes: np.ndarray
    labels: np.ndarray
    feature_names: Optional[tuple] = None

    def __post_init__(self):
        X = _frozen(self.attributes, np.float64)
        if X.ndim != 2:
            raise DimensionMismatch(f"attributes must be 2-D, got shape {X.shape}")
        t = _frozen(self.labels, np.int64)
        if t.ndim != 1 or t.shape[0] != X.shape[0]:
            raise DimensionMismatch(
                f"{X.shape[0]} samples but {t.shape} labels")
        if X.shape[0] < 1 or X.shape[1] < 1:
            raise DataError("dataset needs at least one sample and one feature")
        if not np.all(np.isfinite(X)):
            raise DataError("attribute matrix contains non-finite values")
        if not np.all((t == 0) | (t == 1)):
            bad = int(np.flatnonzero((t != 0) & (t != 1))[0])
            raise NonBinaryLabel(bad, "label", int(t[bad]))
        names = self.feature_names
        if names is not None:
            names = tuple(str(n) for n in names)
            if len(names) != X.shape[1]:
                raise DimensionMismatch(
                    f"{len(names)} feature names for {X.shape[1]} features")
        object.__setattr__(self, "attributes", X)
        object.__setattr__(self, "labels", t)
        object.__setattr__(self, "feature_names", names)

    @property
    def n_samples(self):
        return self.attributes.shape[0]

    @property
    def n_features(self):
        return self.attributes.shape[1]

    def names(self):
        if self.feature_names is not None:
            return list(self.feature_names)
        return [f"x{d + 1}" for d in range(self.n_features)]

    def subset(self, rows):
        rows = np.asarray(rows)
        return Dataset(self.attributes[rows], self.labels[rows], self.feature_names)

    def with_attributes(self, attributes):
        return Dataset(attributes, self.labels, self.feature_names)

    def has_both_classes(self):
        return 0 < int(self.labels.sum()) < self.n_samples


# ---------------------------------------------------------------------------
# CSV

def _parse_float(text, row, column):
    try:
        value = float(text)
    except ValueError:
        raise NonNumericCell(row, column, text) from None
    if not math.isfinite(value):
        raise NonNumericCell(row, column, text)
    return value


def load_csv(path: Union[str, Path], label_column: Union[str, int] = "label") -> Dataset:
    """Read a headed CSV file into a :class:`Dataset`.

    ``label_column`` is a header name or a 0-based column index. All other
    columns become features, in file order. Rows are numbered from 1 (the
    first data row) in error messages.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if isinstance(label_column, int) or (isinstance(label_column, str)
                                             and label_column not in header
                                             and label_column.isdigit()):
            li = int(label_column)
            if not 0 <= li < len(header):
                raise MissingColumn(f"{path}: no column index {li}")
        else:
            if label_column not in header:
                raise MissingColumn(f"{path}: no column named {label_column!r}")
            li = header.index(label_column)
        label_name = header[li]
        feature_cols = [j for j in range(len(header)) if j != li]
        if not feature_cols:
            raise DataError(f"{path}: no feature columns")

        rows, labels = [], []
        for r, record in enumerate(reader, start=1):
            if not record or all(not c.strip() for c in record):
                continue
            if len(record) != len(header):
                raise DataError(
                    f"{path}: row {r} has {len(record)} cells, expected {len(header)}")
            lv = record[li].strip()
            try:
                lf = float(lv)
            except ValueError:
                raise NonBinaryLabel(r, label_name, lv) from None
            if lf not in (0.0, 1.0):
                raise NonBinaryLabel(r, label_name, lv)
            labels.append(int(lf))
            rows.append([_parse_float(record[j].strip(), r, header[j]) for j in feature_cols])
    if not rows:
        raise DataError(f"{path}: no data rows")
    return Dataset(np.array(rows, dtype=np.float64), np.array(labels),
                   tuple(header[j] for j in feature_cols))


def write_csv(data: Dataset, path: Union[str, Path], label_name: str = "label"):
    """Write ``data`` with a header; floats use shortest round-trip repr."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(data.names() + [label_name])
        for x, t in zip(data.attributes, data.labels):
            w.writerow([repr(float(v)) for v in x] + [int(t)])


# ---------------------------------------------------------------------------
# Standardization

@dataclass(frozen=True, eq=False)
class StandardizationStats:
    """Per-feature z-score parameters. ``stds[d] == 0`` flags a constant feature."""

    means: np.ndarray
    stds: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "means", _frozen(self.means, np.float64))
        object.__setattr__(self, "stds", _frozen(self.stds, np.float64))
        if self.means.shape != self.stds.shape or self.means.ndim != 1:
            raise DimensionMismatch("means and stds must be equal-length vectors")

    @property
    def constant(self):
        return self.stds == 0.0

    def __len__(self):
        return self.means.shape[0]


def fit_standardize(train: Dataset) -> StandardizationStats:
    """Population mean/std of each feature of ``train``."""
    if train.n_samples < 2:
        raise DataError("standardization needs at least 2 samples")
    X = train.attributes
    means = X.mean(axis=0)
    stds = X.std(axis=0)
    const = stds <= 1e-12 * (1.0 + np.abs(means))
    stds = np.where(const, 0.0, stds)
    return StandardizationStats(means, stds)


def transform(stats: StandardizationStats, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.shape[-1] != len(stats):
        raise DimensionMismatch(f"data has {X.shape[-1]} features, stats have {len(stats)}")
    const = stats.constant
    safe = np.where(const, 1.0, stats.stds)
    Z = (X - stats.means) / safe
    if const.any():
        Z = np.where(const, 0.0, Z)
    return Z


def apply_standardize(stats: StandardizationStats, data: Dataset) -> Dataset:
    return data.with_attributes(transform(stats, data.attributes))


def inverse_standardize(stats: StandardizationStats, data: Dataset) -> Dataset:
    """Undo :func:`apply_standardize`; constant features come back as their mean."""
    Z = data.attributes
    if Z.shape[1] != len(stats):
        raise DimensionMismatch(f"data has {Z.shape[1]} features, stats have {len(stats)}")
    return data.with_attributes(Z * stats.stds + stats.means)


# ---------------------------------------------------------------------------
# Synthetic data and contamination

@dataclass(frozen=True)
class SyntheticSpec:
    n_train: int = 300
    n_test: int = 300
    dim: int = 500
    n_relevant: int = 5
    seed: int = 0

    def __post_init__(self):
        if min(self.n_train, self.n_test, self.dim) < 1:
            raise ValueError("n_train, n_test and dim must be positive")
        if not 0 <= self.n_relevant <= self.dim:
            raise ValueError("n_relevant must lie in [0, dim]")


def generate_synthetic(spec: SyntheticSpec, rng=None):
    """Draw the sparse linear-threshold task.

    Returns ``(train, test, true_weights, relevant_mask)``. Attributes are
    i.i.d. standard normal; the first ``n_relevant`` true weights are i.i.d.
    standard normal and the rest are zero. A sample is labeled 1 iff its
    inner product with the true weights is positive. ``rng`` defaults to a
    substream of ``spec.seed``.
    """
    if rng is None:
        rng = substream(spec.seed, "synthetic")
    w = np.zeros(spec.dim)
    w[:spec.n_relevant] = rng.standard_normal(spec.n_relevant)
    Xtr = rng.standard_normal((spec.n_train, spec.dim))
    Xte = rng.standard_normal((spec.n_test, spec.dim))
    train = Dataset(Xtr, (Xtr @ w > 0).astype(np.int64))
    test = Dataset(Xte, (Xte @ w > 0).astype(np.int64))
    return train, test, w, w != 0


class ContaminationMode(str, Enum):
    SAMPLE = "sample"
    ARBITRARY = "arbitrary"


@dataclass(frozen=True)
class ContaminationSpec:
    mode: ContaminationMode = ContaminationMode.SAMPLE
    proportion: float = 0.0
    noise_std: float = 1.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "mode", ContaminationMode(self.mode))
        if not 0.0 <= self.proportion <= 1.0:
            raise ValueError(f"proportion {self.proportion} outside [0, 1]")
        if self.noise_std < 0:
            raise ValueError("noise_std must be non-negative")


def round_half_up(x):
    return int(math.floor(x + 0.5))


def contaminate(data: Dataset, spec: ContaminationSpec, rng=None) -> Dataset:
    """Replace whole rows (sample mode) or single cells (arbitrary mode) by
    zero-mean Gaussian noise. Labels are untouched.

    The generator defaults to a substream of ``spec.seed``.
    """
    if rng is None:
        rng = substream(spec.seed, "contaminate")
    X = np.array(data.attributes)
    N, D = X.shape
    if spec.mode is ContaminationMode.SAMPLE:
        k = round_half_up(spec.proportion * N)
        if k == 0:
            return data
        rows = rng.choice(N, size=k, replace=False)
        X[rows] = rng.normal(0.0, spec.noise_std, size=(k, D))
    else:
        k = round_half_up(spec.proportion * N * D)
        if k == 0:
            return data
        cells = rng.choice(N * D, size=k, replace=False)
        X.reshape(-1)[cells] = rng.normal(0.0, spec.noise_std, size=k)
    return data.with_attributes(X)
