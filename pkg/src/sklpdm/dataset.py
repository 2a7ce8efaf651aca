"""Labeled data model, CSV ingestion, synthetic generators, and group-aware splitting.

Feature matrices are D x n with one sample per column. Labels are dense
integer ids in [0, K); the original label strings are retained for
reporting. Group ids (video / person identity) are optional and likewise
stored densely alongside their original names.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from ._util import atomic_write_text, format_float


def _dense_ids(values):
    """Map arbitrary hashable ids to dense ints in first-appearance order."""
    names = []
    index = {}
    ids = np.empty(len(values), dtype=np.int64)
    for pos, value in enumerate(values):
        if value not in index:
            index[value] = len(names)
            names.append(value)
        ids[pos] = index[value]
    return ids, tuple(names)


@dataclass(frozen=True)
class LabeledDataset:
    """Feature columns plus integer class labels and optional group ids.

    features : D x n float matrix, one sample per column
    labels   : n dense class ids in [0, class_count)
    class_count : K
    label_names : original label strings, indexed by dense id
    groups   : optional n dense group ids (video/person identity)
    group_names : original group strings when groups are present
    """

    features: np.ndarray
    labels: np.ndarray
    class_count: int
    label_names: tuple = ()
    groups: np.ndarray | None = None
    group_names: tuple | None = None

    def __post_init__(self):
        # own private copies so freezing them cannot alias caller arrays
        features = np.array(self.features, dtype=np.float64)
        labels = np.array(self.labels, dtype=np.int64)
        if features.ndim != 2:
            raise DataError("features must be a 2-D matrix (columns are samples)")
        if features.shape[0] < 1:
            raise DataError("dataset needs at least one feature dimension")
        if features.shape[1] < 1:
            raise DataError("dataset needs at least one sample")
        if not np.all(np.isfinite(features)):
            raise DataError("all feature entries must be finite")
        if labels.shape != (features.shape[1],):
            raise DataError(
                f"label count {labels.shape} does not match sample count {features.shape[1]}"
            )
        if self.class_count < 1:
            raise DataError("class_count must be positive")
        if labels.min() < 0 or labels.max() >= self.class_count:
            raise DataError(f"labels must lie in [0, {self.class_count})")
        if len(np.unique(labels)) != self.class_count:
            raise DataError("every class id in [0, K) must occur at least once")
        names = self.label_names or tuple(f"c{k}" for k in range(self.class_count))
        if len(names) != self.class_count:
            raise DataError("label_names length must equal class_count")
        groups = self.groups
        group_names = self.group_names
        if groups is not None:
            groups = np.array(groups, dtype=np.int64)
            if groups.shape != (features.shape[1],):
                raise DataError("group count does not match sample count")
            if group_names is None:
                group_names = tuple(f"g{g}" for g in range(int(groups.max()) + 1))
        features.flags.writeable = False
        labels.flags.writeable = False
        if groups is not None:
            groups.flags.writeable = False
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "label_names", tuple(str(n) for n in names))
        object.__setattr__(self, "groups", groups)
        object.__setattr__(
            self, "group_names", tuple(str(n) for n in group_names) if group_names else None
        )

    @property
    def dim(self):
        return self.features.shape[0]

    @property
    def sample_count(self):
        return self.features.shape[1]


@dataclass(frozen=True)
class SplitPlan:
    """Cross-validation folds as (train indices, test indices) pairs."""

    folds: tuple

    def __post_init__(self):
        object.__setattr__(
            self,
            "folds",
            tuple((np.asarray(tr, dtype=np.int64), np.asarray(te, dtype=np.int64)) for tr, te in self.folds),
        )


def load_csv(path) -> LabeledDataset:
    """Read a dataset from CSV: header row, a `label` column, optional `group`, numeric features.

    Labels are re-indexed to dense ids in first-appearance order; feature
    columns keep header order. Errors report the offending data row
    (1-based) and column name.
    """
    try:
        with open(path, "r", encoding="utf-8", newline="") as handle:
            rows = list(csv.reader(handle))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise DataError(f"{path}: empty file")
    header = rows[0]
    if "label" not in header:
        raise DataError(f"{path}: missing `label` column")
    label_col = header.index("label")
    group_col = header.index("group") if "group" in header else None
    feature_cols = [c for c in range(len(header)) if c != label_col and c != group_col]
    if not rows[1:]:
        raise DataError(f"{path}: no data rows")

    labels_raw = []
    groups_raw = [] if group_col is not None else None
    values = np.empty((len(rows) - 1, len(feature_cols)), dtype=np.float64)
    for r, row in enumerate(rows[1:], start=1):
        if len(row) != len(header):
            raise DataError(f"{path}: row {r}: expected {len(header)} fields, got {len(row)}")
        labels_raw.append(row[label_col])
        if groups_raw is not None:
            groups_raw.append(row[group_col])
        for j, c in enumerate(feature_cols):
            cell = row[c]
            try:
                parsed = float(cell)
            except ValueError:
                raise DataError(
                    f"{path}: row {r}, column {header[c]}: non-numeric value {cell!r}"
                ) from None
            if not math.isfinite(parsed):
                raise DataError(f"{path}: row {r}, column {header[c]}: non-finite value {cell!r}")
            values[r - 1, j] = parsed

    labels, label_names = _dense_ids(labels_raw)
    groups = group_names = None
    if groups_raw is not None:
        groups, group_names = _dense_ids(groups_raw)
    return LabeledDataset(
        features=values.T,
        labels=labels,
        class_count=len(label_names),
        label_names=label_names,
        groups=groups,
        group_names=group_names,
    )


def save_csv(dataset: LabeledDataset, path) -> None:
    """Write a dataset as CSV (`label,f0..fN[,group]`), round-tripping features exactly."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    header = ["label"] + [f"f{j}" for j in range(dataset.dim)]
    if dataset.groups is not None:
        header.append("group")
    writer.writerow(header)
    for i in range(dataset.sample_count):
        row = [dataset.label_names[dataset.labels[i]]]
        row += [format_float(v) for v in dataset.features[:, i]]
        if dataset.groups is not None:
            row.append(dataset.group_names[dataset.groups[i]])
        writer.writerow(row)
    try:
        atomic_write_text(path, buffer.getvalue())
    except OSError as exc:
        raise DataError(f"cannot write {path}: {exc}") from exc


def gen_gaussian_classes(K, n_per_class, D, spread, separation, seed) -> LabeledDataset:
    """Isotropic Gaussian blobs with class means at mutual distance >= `separation`.

    Deterministic per seed (PCG64 generator). For K <= D the means sit on a
    scaled random orthonormal frame (pairwise distances exactly `separation`);
    otherwise they are spaced along a random line.
    """
    if K < 1 or n_per_class < 1 or D < 1:
        raise DataError("gen_gaussian_classes requires K >= 1, n_per_class >= 1, D >= 1")
    if spread < 0 or separation < 0:
        raise DataError("spread and separation must be nonnegative")
    rng = np.random.default_rng(seed)
    if K <= D:
        frame, _ = np.linalg.qr(rng.standard_normal((D, K)))
        means = frame[:, :K] * (separation / math.sqrt(2.0))
    else:
        direction = rng.standard_normal(D)
        direction /= np.linalg.norm(direction)
        means = np.outer(direction, np.arange(K) * separation)
    features = np.empty((D, K * n_per_class))
    labels = np.empty(K * n_per_class, dtype=np.int64)
    for k in range(K):
        block = slice(k * n_per_class, (k + 1) * n_per_class)
        features[:, block] = means[:, [k]] + spread * rng.standard_normal((D, n_per_class))
        labels[block] = k
    return LabeledDataset(features=features, labels=labels, class_count=K)


def gen_ring_classes(K, n_per_class, noise, ambient_dim, seed) -> LabeledDataset:
    """Concentric rings (radii 1..K) in a random 2-plane of R^D, plus Gaussian noise.

    The plane is a random orthonormal embedding, so with noise=0 each sample's
    distance to the origin equals its ring radius. Deterministic per seed
    (PCG64 generator).
    """
    if K < 2:
        raise DataError("gen_ring_classes requires K >= 2")
    if ambient_dim < 3:
        raise DataError("gen_ring_classes requires ambient_dim >= 3")
    if noise < 0 or n_per_class < 1:
        raise DataError("noise must be >= 0 and n_per_class >= 1")
    rng = np.random.default_rng(seed)
    plane, _ = np.linalg.qr(rng.standard_normal((ambient_dim, 2)))
    features = np.empty((ambient_dim, K * n_per_class))
    labels = np.empty(K * n_per_class, dtype=np.int64)
    for k in range(K):
        radius = float(k + 1)
        angles = rng.uniform(0.0, 2.0 * math.pi, n_per_class)
        circle = np.vstack([radius * np.cos(angles), radius * np.sin(angles)])
        block = slice(k * n_per_class, (k + 1) * n_per_class)
        features[:, block] = plane @ circle
        if noise > 0:
            features[:, block] += noise * rng.standard_normal((ambient_dim, n_per_class))
        labels[block] = k
    return LabeledDataset(features=features, labels=labels, class_count=K)


def leave_one_group_out(dataset: LabeledDataset) -> SplitPlan:
    """One fold per distinct group id; that group is the test side."""
    if dataset.groups is None:
        raise DataError("leave_one_group_out requires group ids")
    group_ids = np.unique(dataset.groups)
    if len(group_ids) < 2:
        raise DataError("leave_one_group_out requires at least 2 distinct groups")
    indices = np.arange(dataset.sample_count)
    folds = []
    for g in group_ids:
        test = indices[dataset.groups == g]
        train = indices[dataset.groups != g]
        folds.append((train, test))
    return SplitPlan(folds=tuple(folds))


def with_groups(dataset: LabeledDataset, group_count: int) -> LabeledDataset:
    """Assign synthetic group ids round-robin within each class.

    Every (group, class) cell receives a near-equal share of that class's
    samples, so each leave-one-group-out fold keeps all classes in training.
    """
    if group_count < 1:
        raise DataError("group_count must be positive")
    groups = np.zeros(dataset.sample_count, dtype=np.int64)
    for k in range(dataset.class_count):
        members = np.where(dataset.labels == k)[0]
        groups[members] = np.arange(len(members)) % group_count
    return LabeledDataset(
        features=dataset.features,
        labels=dataset.labels,
        class_count=dataset.class_count,
        label_names=dataset.label_names,
        groups=groups,
    )
