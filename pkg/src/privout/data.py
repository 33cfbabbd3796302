"""Labeled datasets: CSV ingestion, validation, synthetic blob generators."""

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataFormatError, InputError


@dataclass
class LabeledDataset:
    features: np.ndarray  # (n, m) float64
    labels: np.ndarray  # (n,) int64 in [0, class_count)
    class_count: int
    name: str = ""

    def __post_init__(self):
        self.features = np.ascontiguousarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64).ravel()
        if self.features.ndim != 2:
            raise InputError("features must be a 2-d matrix")
        if self.features.shape[0] != self.labels.shape[0]:
            raise InputError("feature/label row counts differ")
        if self.features.shape[0] < 2:
            raise InputError("need at least two rows")
        if not np.all(np.isfinite(self.features)):
            raise InputError("features contain NaN or Inf")
        if self.class_count < 2:
            raise InputError("class_count must be >= 2")
        if self.labels.min() < 0 or self.labels.max() >= self.class_count:
            raise InputError("label outside [0, class_count)")

    @property
    def n_rows(self):
        return self.features.shape[0]

    @property
    def n_features(self):
        return self.features.shape[1]

    def subset(self, indices, name=None):
        return LabeledDataset(
            features=self.features[indices],
            labels=self.labels[indices],
            class_count=self.class_count,
            name=self.name if name is None else name,
        )


def normalize_features(X):
    """Min-max scale every column into [-1, 1]; constant columns become 0."""
    X = np.asarray(X, dtype=np.float64)
    lo = X.min(axis=0)
    hi = X.max(axis=0)
    span = hi - lo
    constant = span == 0
    span[constant] = 1.0
    out = 2.0 * (X - lo) / span - 1.0
    out[:, constant] = 0.0
    return out


def load_dataset(path, label_column="label", *, normalize=False, class_count=None,
                 name=None):
    """Read a headered CSV into a LabeledDataset; errors carry line numbers."""
    path = Path(path)
    with path.open(newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if label_column not in header:
            raise DataFormatError(f"{path}: no column named {label_column!r}")
        label_pos = header.index(label_column)
        rows, labels = [], []
        for line_number, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataFormatError(
                    f"{path}: line {line_number}: expected {len(header)} fields, "
                    f"got {len(row)}",
                    line_number,
                )
            try:
                labels.append(int(row[label_pos]))
            except ValueError:
                raise DataFormatError(
                    f"{path}: line {line_number}: label {row[label_pos]!r} "
                    "is not an integer",
                    line_number,
                ) from None
            try:
                rows.append(
                    [float(v) for i, v in enumerate(row) if i != label_pos]
                )
            except ValueError:
                raise DataFormatError(
                    f"{path}: line {line_number}: non-numeric feature value",
                    line_number,
                ) from None
    if not rows:
        raise DataFormatError(f"{path}: no data rows")
    features = np.asarray(rows, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if labels.min() < 0:
        raise DataFormatError(f"{path}: negative class label")
    if class_count is None:
        class_count = int(labels.max()) + 1
    if normalize:
        features = normalize_features(features)
    return LabeledDataset(
        features=features,
        labels=labels,
        class_count=class_count,
        name=path.stem if name is None else name,
    )


def save_dataset(dataset, path):
    """Write the dataset as a headered CSV (f0..fm-1, label); repr floats
    round-trip exactly."""
    path = Path(path)
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow([f"f{i}" for i in range(dataset.n_features)] + ["label"])
        for x, label in zip(dataset.features, dataset.labels):
            writer.writerow([repr(float(v)) for v in x] + [int(label)])


def make_synthetic(classes, rows, features, separation, seed, name=None):
    """Gaussian class blobs with min-max scaled features.

    `separation` scales the distance between class centres relative to the
    unit within-class noise: small values make classes overlap (overfit-prone
    tasks), large values make them trivially separable.
    """
    if classes < 2 or rows < 2 or features < 1:
        raise InputError("need classes >= 2, rows >= 2, features >= 1")
    if separation < 0:
        raise InputError("separation must be >= 0")
    rng = np.random.default_rng(seed)
    centers = rng.normal(0.0, 1.0, size=(classes, features)) * separation
    labels = rng.permutation(np.arange(rows, dtype=np.int64) % classes)
    X = centers[labels] + rng.normal(0.0, 1.0, size=(rows, features))
    return LabeledDataset(
        features=normalize_features(X),
        labels=labels,
        class_count=classes,
        name=name or f"synthetic-c{classes}-n{rows}",
    )
