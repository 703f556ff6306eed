"""Dataset loading, label handling, standardization, and CV fold plans."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .exceptions import DataError, InputError

__all__ = [
    "Dataset",
    "StandardizeParams",
    "CvPlan",
    "load_csv",
    "save_csv",
    "load_sparse_text",
    "map_labels",
    "standardize_fit",
    "standardize_apply",
    "make_cv",
]


@dataclass
class Dataset:
    """Feature matrix plus labels in {-1, +1}."""

    x: np.ndarray
    y: np.ndarray
    feature_names: list | None = None

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]


@dataclass
class StandardizeParams:
    """Per-feature shift and scale fitted on training data."""

    mean: np.ndarray
    scale: np.ndarray


def map_labels(raw) -> np.ndarray:
    """Map raw labels to {-1.0, +1.0}.

    Accepts {-1, +1} or {0, 1} numeric labels.  Anything else (including
    more than two classes) raises a ``DataError``.
    """
    y = np.asarray(raw, dtype=float).ravel()
    vals = set(np.unique(y).tolist())
    if vals <= {-1.0, 1.0}:
        return y
    if vals <= {0.0, 1.0}:
        return 2.0 * y - 1.0
    raise DataError(f"labels must be binary in {{-1,+1}} or {{0,1}}, got {sorted(vals)}")


def _parse_float(token: str, line_no: int, path) -> float:
    try:
        return float(token)
    except ValueError:
        raise DataError(
            f"{path}:{line_no}: cannot parse {token!r} as a number"
        ) from None


def _open_data(path, **kwargs):
    try:
        return open(path, **kwargs)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc


def load_csv(path, label_col: int | str = -1, delimiter: str = ",") -> Dataset:
    """Load a dense CSV file.

    A header row is detected automatically (any cell of the first row
    that does not parse as a number).  ``label_col`` selects the label
    column by index (negative indices allowed) or, when a header is
    present, by name.
    """
    rows = []
    header = None
    with _open_data(path, newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        for line_no, row in enumerate(reader, start=1):
            row = [c.strip() for c in row]
            if not row or all(c == "" for c in row):
                continue
            if line_no == 1:
                try:
                    [float(c) for c in row]
                except ValueError:
                    header = row
                    continue
            rows.append((line_no, row))
    if not rows:
        raise DataError(f"{path}: no data rows")

    width = len(rows[0][1])
    if isinstance(label_col, str):
        if header is None or label_col not in header:
            raise DataError(f"{path}: no column named {label_col!r}")
        li = header.index(label_col)
    else:
        li = label_col % width

    x = np.empty((len(rows), width - 1))
    y_raw = np.empty(len(rows))
    for i, (line_no, row) in enumerate(rows):
        if len(row) != width:
            raise DataError(
                f"{path}:{line_no}: expected {width} columns, got {len(row)}"
            )
        vals = [_parse_float(c, line_no, path) for c in row]
        y_raw[i] = vals.pop(li)
        x[i] = vals
    names = None
    if header is not None:
        names = [h for k, h in enumerate(header) if k != li]
    return Dataset(x=x, y=map_labels(y_raw), feature_names=names)


def save_csv(dataset: Dataset, path, label_col: int = -1) -> None:
    """Write a dataset as CSV with 17-significant-digit floats.

    The precision guarantees that ``load_csv`` reproduces every value
    bit-exactly.  The label is placed at ``label_col`` (first or last);
    a header row is written when the dataset has feature names.
    """
    x, y = dataset.x, dataset.y
    last = label_col in (-1, x.shape[1])
    if not (last or label_col == 0):
        raise InputError("label_col must be 0 (first) or -1 (last)")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if dataset.feature_names is not None:
            names = list(dataset.feature_names)
            writer.writerow(names + ["label"] if last else ["label"] + names)
        for i in range(len(y)):
            feats = [format(v, ".17g") for v in x[i]]
            label = format(y[i], ".17g")
            writer.writerow(feats + [label] if last else [label] + feats)


def load_sparse_text(path, n_features: int | None = None,
                     max_cells: int = 50_000_000) -> Dataset:
    """Load '<label> idx:value ...' sparse text with 1-based indices.

    Features absent from a row are zero.  ``max_cells`` caps the size of
    the densified matrix (rows times features) as a memory guard.
    """
    labels = []
    entries = []
    max_idx = 0
    with _open_data(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            labels.append(_parse_float(tokens[0], line_no, path))
            row = []
            for tok in tokens[1:]:
                if ":" not in tok:
                    raise DataError(
                        f"{path}:{line_no}: expected idx:value, got {tok!r}"
                    )
                idx_s, val_s = tok.split(":", 1)
                try:
                    idx = int(idx_s)
                except ValueError:
                    raise DataError(
                        f"{path}:{line_no}: bad feature index {idx_s!r}"
                    ) from None
                if idx < 1:
                    raise DataError(
                        f"{path}:{line_no}: feature indices are 1-based"
                    )
                row.append((idx, _parse_float(val_s, line_no, path)))
                max_idx = max(max_idx, idx)
            entries.append(row)
    if not labels:
        raise DataError(f"{path}: no data rows")
    d = n_features if n_features is not None else max_idx
    if max_idx > d:
        raise DataError(
            f"{path}: feature index {max_idx} exceeds n_features={d}"
        )
    if len(labels) * d > max_cells:
        raise DataError(
            f"densified size {len(labels)} x {d} exceeds the cell budget "
            f"({max_cells}); raise max_cells to override"
        )
    x = np.zeros((len(labels), d))
    for i, row in enumerate(entries):
        for idx, val in row:
            x[i, idx - 1] = val
    return Dataset(x=x, y=map_labels(labels))


def standardize_fit(x) -> StandardizeParams:
    """Per-feature mean and standard deviation; constant features get
    scale 1 so they map to exactly zero."""
    x = np.asarray(x, dtype=float)
    mean = x.mean(axis=0)
    scale = x.std(axis=0)
    scale = np.where(scale <= 0.0, 1.0, scale)
    return StandardizeParams(mean=mean, scale=scale)


def standardize_apply(params: StandardizeParams, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[1] != len(params.mean):
        raise InputError(
            f"x has {x.shape[1]} features, standardizer expects {len(params.mean)}"
        )
    return (x - params.mean) / params.scale


@dataclass
class CvPlan:
    """Stratified fold assignment: fold_of[i] is the fold of point i."""

    fold_of: np.ndarray
    k: int
    seed: int

    def folds(self):
        for j in range(self.k):
            test = np.flatnonzero(self.fold_of == j)
            train = np.flatnonzero(self.fold_of != j)
            yield train, test


def make_cv(y, k: int, seed: int = 0) -> CvPlan:
    """Stratified k-fold plan.

    Each class is shuffled and dealt round-robin; the dealing counter
    continues across classes so overall fold sizes differ by at most one.
    """
    y = np.asarray(y, dtype=float).ravel()
    n = len(y)
    if k < 2:
        raise InputError("k must be at least 2")
    if k > n:
        raise InputError(f"k={k} exceeds n={n}")
    rng = np.random.default_rng(seed)
    fold_of = np.empty(n, dtype=int)
    counter = 0
    for cls in np.unique(y):
        members = np.flatnonzero(y == cls)
        rng.shuffle(members)
        for idx in members:
            fold_of[idx] = counter % k
            counter += 1
    return CvPlan(fold_of=fold_of, k=k, seed=seed)
