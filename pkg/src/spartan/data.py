"""Synthetic and CSV datasets with a seeded train/eval split."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional

import numpy as np

__all__ = ["SOURCES", "DatasetSpec", "Dataset", "load_dataset", "DatasetError"]

SOURCES = ("planted_sparse_regression", "gaussian_mixture_classification", "csv_file")


class DatasetError(ValueError):
    """Bad dataset spec or unreadable data file."""


@dataclass(frozen=True)
class DatasetSpec:
    source: str
    n_samples: int = 1000
    dim: int = 20
    true_support_size: int = 5
    noise_std: float = 0.01
    classes: int = 2
    separation: float = 2.0
    path: Optional[str] = None
    label_column: Optional[str] = None
    eval_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self) -> None:
        if self.source not in SOURCES:
            raise DatasetError(f"source must be one of {SOURCES}, got {self.source!r}")
        if not 0.0 <= self.eval_fraction < 1.0:
            raise DatasetError("eval_fraction must lie in [0, 1)")
        if self.source == "csv_file":
            if not self.path or not self.label_column:
                raise DatasetError("csv_file needs path and label_column")
            return
        if self.n_samples < 2 or self.dim < 1:
            raise DatasetError("n_samples must be >= 2 and dim >= 1")
        if self.source == "planted_sparse_regression":
            if not 1 <= self.true_support_size <= self.dim:
                raise DatasetError("true_support_size must lie in [1, dim]")
            if self.noise_std < 0:
                raise DatasetError("noise_std must be >= 0")
        elif self.classes < 2:
            raise DatasetError("classes must be >= 2")


@dataclass
class Dataset:
    X_train: np.ndarray
    y_train: np.ndarray
    X_eval: np.ndarray
    y_eval: np.ndarray
    task: str  # "regression" or "classification"
    true_weights: Optional[np.ndarray] = None

    @property
    def dim(self) -> int:
        return int(self.X_train.shape[1])

    @property
    def n_classes(self) -> int:
        return int(max(self.y_train.max(initial=0), self.y_eval.max(initial=0))) + 1

    @property
    def true_support(self) -> Optional[np.ndarray]:
        if self.true_weights is None:
            return None
        return np.flatnonzero(self.true_weights)


def _planted(spec: DatasetSpec, rng: np.random.Generator):
    d, s = spec.dim, spec.true_support_size
    X = rng.standard_normal((spec.n_samples, d))
    w = np.zeros(d)
    support = np.sort(rng.choice(d, size=s, replace=False))
    w[support] = rng.choice([-1.0, 1.0], size=s) * rng.uniform(0.5, 1.5, size=s)
    y = X @ w + spec.noise_std * rng.standard_normal(spec.n_samples)
    return X, y.reshape(-1, 1), w


def _mixture(spec: DatasetSpec, rng: np.random.Generator):
    means = rng.standard_normal((spec.classes, spec.dim))
    means *= (0.5 * spec.separation) / np.linalg.norm(means, axis=1, keepdims=True)
    labels = rng.integers(0, spec.classes, size=spec.n_samples)
    X = means[labels] + rng.standard_normal((spec.n_samples, spec.dim))
    return X, labels.astype(np.int64)


def _read_csv(path: str, label_column: str):
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DatasetError(f"cannot read {path}: {exc}") from exc
    if len(rows) < 3:
        raise DatasetError(f"{path}: need a header and at least two data rows")
    header = [h.strip() for h in rows[0]]
    if label_column not in header:
        raise DatasetError(f"{path}: label column {label_column!r} not in header {header}")
    try:
        data = np.array([[float(x) for x in r] for r in rows[1:] if r], dtype=np.float64)
    except ValueError as exc:
        raise DatasetError(f"{path}: non-numeric value ({exc})") from exc
    if data.ndim != 2 or data.shape[1] != len(header):
        raise DatasetError(f"{path}: ragged rows")
    j = header.index(label_column)
    return np.delete(data, j, axis=1), data[:, j]


def load_dataset(spec: DatasetSpec, task: Optional[str] = None) -> Dataset:
    """Generate or read the data and split it with ``spec.seed``.

    ``task`` matters only for CSV input: "classification" casts integer
    labels, anything else keeps them as regression targets.
    """
    rng = np.random.default_rng(spec.seed)
    true_w = None
    if spec.source == "planted_sparse_regression":
        X, y, true_w = _planted(spec, rng)
        task = "regression"
    elif spec.source == "gaussian_mixture_classification":
        X, y = _mixture(spec, rng)
        task = "classification"
    else:
        X, y = _read_csv(spec.path, spec.label_column)
        if task == "classification":
            if np.any(y != np.round(y)) or np.any(y < 0):
                raise DatasetError("classification labels must be non-negative integers")
            y = y.astype(np.int64)
        else:
            task = "regression"
            y = y.reshape(-1, 1)
    n = X.shape[0]
    order = rng.permutation(n)
    n_eval = int(round(spec.eval_fraction * n))
    n_eval = min(n_eval, n - 1)
    tr, ev = order[n_eval:], order[:n_eval]
    return Dataset(X[tr], y[tr], X[ev], y[ev], task, true_w)
