"""KNN / linear-SVM classification, video-level voting, confusion matrices,
and the leave-one-group-out evaluation pipeline.

Tie rules are fixed for reproducibility: KNN breaks distance ties by lower
training index and vote ties by the nearest tied neighbor; SVM score ties
go to the lowest class id; video vote ties go to the earliest frame's
label among the tied labels.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import LabeledDataset, leave_one_group_out
from .errors import DataError
from . import baselines
from . import diffusion_map
from . import sklp_projection
from .sklp_projection import SklpConfig


@dataclass(frozen=True)
class KnnConfig:
    k: int = 1
    distance: str = "squared-euclidean"

    def __post_init__(self):
        if int(self.k) < 1:
            raise DataError("k must be >= 1")
        if self.distance != "squared-euclidean":
            raise DataError("only squared-euclidean distance is supported")


@dataclass(frozen=True)
class SvmConfig:
    regularization: float = 1e-3
    epochs: int = 200
    seed: int = 0

    def __post_init__(self):
        if not self.regularization > 0:
            raise DataError("regularization must be positive")
        if int(self.epochs) < 1:
            raise DataError("epochs must be >= 1")


@dataclass(frozen=True)
class SvmModel:
    """One-vs-rest linear classifiers: scores = weights @ x + biases."""

    weights: np.ndarray
    biases: np.ndarray
    class_count: int
    config: SvmConfig
    objective_histories: tuple = ()


@dataclass(frozen=True)
class ConfusionMatrix:
    """K x K counts, rows = true class, columns = predicted class."""

    counts: np.ndarray
    class_names: tuple

    def __post_init__(self):
        counts = np.array(self.counts, dtype=np.int64)
        if counts.ndim != 2 or counts.shape[0] != counts.shape[1]:
            raise DataError("confusion counts must be square")
        if np.any(counts < 0):
            raise DataError("confusion counts must be nonnegative")
        if len(self.class_names) != counts.shape[0]:
            raise DataError("class_names length must match matrix size")
        counts.flags.writeable = False
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "class_names", tuple(str(n) for n in self.class_names))

    @property
    def total(self):
        return int(self.counts.sum())

    @property
    def accuracy(self):
        if self.total == 0:
            raise DataError("empty confusion matrix has no accuracy")
        return float(np.trace(self.counts)) / self.total

    def per_class_accuracy(self):
        """Diagonal fraction per row; None for classes with no test samples."""
        out = []
        for k in range(self.counts.shape[0]):
            row = self.counts[k].sum()
            out.append(float(self.counts[k, k]) / row if row > 0 else None)
        return out


def accuracy(confusion_matrix: ConfusionMatrix):
    """Overall accuracy: trace / total."""
    return confusion_matrix.accuracy


def knn_predict(train, test, config: KnnConfig | None = None):
    """Majority label among the k nearest training columns, per test column."""
    if config is None:
        config = KnnConfig()
    train_X, train_y = train
    train_X = np.asarray(train_X, dtype=np.float64)
    train_y = np.asarray(train_y, dtype=np.int64)
    test_X = np.asarray(test, dtype=np.float64)
    n_train = train_X.shape[1]
    if n_train == 0:
        raise DataError("empty training set")
    if config.k > n_train:
        raise DataError(f"k={config.k} exceeds training size {n_train}")
    if test_X.shape[0] != train_X.shape[0]:
        raise DataError("train and test dimensionality differ")

    diff = test_X[:, :, None] - train_X[:, None, :]
    sq = np.einsum("dij,dij->ij", diff, diff)
    order = np.argsort(sq, axis=1, kind="stable")  # distance ties -> lower train index
    predictions = np.empty(test_X.shape[1], dtype=np.int64)
    for i in range(test_X.shape[1]):
        neighbors = train_y[order[i, : config.k]]
        counts = np.bincount(neighbors)
        top = counts.max()
        tied = set(np.flatnonzero(counts == top))
        for label in neighbors:  # nearest tied neighbor decides
            if label in tied:
                predictions[i] = label
                break
    return predictions


def _hinge_objective(X, targets, w, b, reg):
    margins = targets * (w @ X + b)
    hinge = np.maximum(0.0, 1.0 - margins)
    return 0.5 * reg * float(w @ w) + float(hinge.mean())


def _fit_binary_svm(X, targets, config: SvmConfig):
    """Deterministic batch subgradient descent with backtracking.

    The step halves until the objective does not increase, so the recorded
    per-epoch objective sequence is non-increasing by construction.
    """
    D, n = X.shape
    reg = config.regularization
    w = np.zeros(D)
    b = 0.0
    step = 1.0
    history = [_hinge_objective(X, targets, w, b, reg)]
    for _ in range(config.epochs):
        margins = targets * (w @ X + b)
        active = margins < 1.0
        grad_w = reg * w - (X[:, active] * targets[active]).sum(axis=1) / n
        grad_b = -targets[active].sum() / n
        if not np.any(grad_w) and grad_b == 0.0:
            break
        accepted = False
        trial = step
        for _ in range(60):
            w_new = w - trial * grad_w
            b_new = b - trial * grad_b
            value = _hinge_objective(X, targets, w_new, b_new, reg)
            if value <= history[-1]:
                w, b = w_new, b_new
                history.append(value)
                step = trial * 1.5
                accepted = True
                break
            trial /= 2.0
        if not accepted:
            break  # subgradient plateau
    return w, b, history


def svm_fit(train, config: SvmConfig | None = None) -> SvmModel:
    """One-vs-rest hinge-loss linear classifiers.

    Training is deterministic (zero initialization, batch subgradient with
    backtracking); the seed is recorded for the config echo but no
    randomness is consumed.
    """
    if config is None:
        config = SvmConfig()
    X, y = train
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    K = int(y.max()) + 1
    if len(np.unique(y)) < 2:
        raise DataError("svm_fit needs at least 2 classes")
    weights = np.zeros((K, X.shape[0]))
    biases = np.zeros(K)
    histories = []
    for k in range(K):
        targets = np.where(y == k, 1.0, -1.0)
        w, b, history = _fit_binary_svm(X, targets, config)
        weights[k] = w
        biases[k] = b
        histories.append(tuple(history))
    return SvmModel(
        weights=weights,
        biases=biases,
        class_count=K,
        config=config,
        objective_histories=tuple(histories),
    )


def svm_predict(model: SvmModel, test):
    """Argmax of per-class scores; ties resolve to the lowest class id."""
    test_X = np.asarray(test, dtype=np.float64)
    if test_X.shape[0] != model.weights.shape[1]:
        raise DataError("test dimensionality does not match the fitted model")
    scores = model.weights @ test_X + model.biases[:, None]
    return np.argmax(scores, axis=0)


def video_majority_vote(frame_labels, frame_groups):
    """Most frequent frame label per group id; ties go to the earliest frame's label.

    Returns {group id -> label} in first-appearance order of the groups.
    """
    frame_labels = list(frame_labels)
    frame_groups = list(frame_groups)
    if len(frame_labels) != len(frame_groups):
        raise DataError("frame_labels and frame_groups lengths differ")
    if not frame_labels:
        raise DataError("empty input: nothing to vote on")
    per_group = {}
    for label, group in zip(frame_labels, frame_groups):
        per_group.setdefault(group, []).append(label)
    result = {}
    for group, labels in per_group.items():
        counts = {}
        for label in labels:
            counts[label] = counts.get(label, 0) + 1
        top = max(counts.values())
        tied = {label for label, c in counts.items() if c == top}
        for label in labels:  # earliest frame among tied labels
            if label in tied:
                result[group] = label
                break
    return result


def confusion(true_labels, predicted_labels, class_count, class_names=None) -> ConfusionMatrix:
    """Tally a K x K confusion matrix from parallel label sequences."""
    true_labels = np.asarray(true_labels, dtype=np.int64)
    predicted_labels = np.asarray(predicted_labels, dtype=np.int64)
    if true_labels.shape != predicted_labels.shape:
        raise DataError("true and predicted label lengths differ")
    if true_labels.size and (
        true_labels.min() < 0
        or true_labels.max() >= class_count
        or predicted_labels.min() < 0
        or predicted_labels.max() >= class_count
    ):
        raise DataError(f"labels must lie in [0, {class_count})")
    counts = np.zeros((class_count, class_count), dtype=np.int64)
    np.add.at(counts, (true_labels, predicted_labels), 1)
    names = class_names if class_names is not None else [f"c{k}" for k in range(class_count)]
    return ConfusionMatrix(counts=counts, class_names=tuple(names))


PIPELINES = ("pca", "lda", "dm", "sklp+dm")


@dataclass(frozen=True)
class PipelineConfig:
    """Names the reduction arm and classifier for cross-validated evaluation.

    target_dim applies to the linear projection ("auto" = K - 1). The same
    DiffusionConfig drives the `dm` and `sklp+dm` arms so their parameters
    stay identical.
    """

    reduction: str = "sklp+dm"
    classifier: str = "knn"
    target_dim: int | str = "auto"
    knn: KnnConfig = field(default_factory=KnnConfig)
    svm: SvmConfig = field(default_factory=SvmConfig)
    sklp: SklpConfig = field(default_factory=SklpConfig)
    diffusion: diffusion_map.DiffusionConfig | None = None

    def __post_init__(self):
        if self.reduction not in PIPELINES:
            raise DataError(f"unknown pipeline {self.reduction!r}; choose from {PIPELINES}")
        if self.classifier not in ("knn", "svm"):
            raise DataError("classifier must be 'knn' or 'svm'")
        if self.diffusion is None:
            object.__setattr__(self, "diffusion", diffusion_map.DiffusionConfig())

    def echo(self):
        return {
            "reduction": self.reduction,
            "classifier": self.classifier,
            "target_dim": self.target_dim,
            "knn_k": self.knn.k,
            "svm_regularization": self.svm.regularization,
            "svm_epochs": self.svm.epochs,
            "svm_seed": self.svm.seed,
            "sklp": self.sklp.echo(),
            "diffusion": {
                "bandwidth": self.diffusion.bandwidth,
                "embed_dim": self.diffusion.embed_dim,
                "time": self.diffusion.time,
                "drop_trivial": self.diffusion.drop_trivial,
            },
        }


@dataclass(frozen=True)
class CrossValidationResult:
    confusion: ConfusionMatrix
    accuracy: float
    fold_accuracies: tuple
    pipeline: dict


def _embed_fold(train_X, train_y, test_X, class_count, pipeline: PipelineConfig):
    """Fit the named reduction on the training side; embed both sides."""
    d = class_count - 1 if pipeline.target_dim == "auto" else int(pipeline.target_dim)
    d = max(1, min(d, train_X.shape[0], train_X.shape[1] - 1))
    if pipeline.reduction == "pca":
        model = baselines.pca_fit(train_X, d)
        return baselines.apply_model(model, train_X), baselines.apply_model(model, test_X)
    if pipeline.reduction == "lda":
        fold_set = LabeledDataset(features=train_X, labels=train_y, class_count=class_count)
        model = baselines.lda_fit(fold_set, min(d, class_count - 1))
        return baselines.apply_model(model, train_X), baselines.apply_model(model, test_X)
    if pipeline.reduction == "sklp+dm":
        fold_set = LabeledDataset(features=train_X, labels=train_y, class_count=class_count)
        sklp_cfg = pipeline.sklp
        if sklp_cfg.target_dim == "auto" and pipeline.target_dim != "auto":
            sklp_cfg = SklpConfig(**{**sklp_cfg.echo(), "target_dim": d})
        model, _ = sklp_projection.fit(fold_set, sklp_cfg)
        train_X = sklp_projection.project(model, train_X)
        test_X = sklp_projection.project(model, test_X)
    dm = diffusion_map.fit(train_X, pipeline.diffusion)
    return dm.embedding.T, diffusion_map.extend(dm, test_X).T


def cross_validate_actions(dataset: LabeledDataset, pipeline: PipelineConfig) -> CrossValidationResult:
    """Leave-one-group-out evaluation with per-video majority voting.

    Groups identify actors; within a fold's test side, the frames of each
    (group, class) pair form one video, and the video's predicted label is
    the majority vote over its frames. The confusion matrix accumulates one
    entry per video across all folds.
    """
    if dataset.groups is None:
        raise DataError("cross_validate_actions requires group ids")
    plan = leave_one_group_out(dataset)
    K = dataset.class_count
    counts = np.zeros((K, K), dtype=np.int64)
    fold_accuracies = []
    for train_idx, test_idx in plan.folds:
        train_y = dataset.labels[train_idx]
        if len(np.unique(train_y)) != K:
            raise DataError("fold leaves a class with no training samples")
        train_X = dataset.features[:, train_idx]
        test_X = dataset.features[:, test_idx]
        test_y = dataset.labels[test_idx]
        emb_train, emb_test = _embed_fold(train_X, train_y, test_X, K, pipeline)
        if pipeline.classifier == "knn":
            predicted = knn_predict((emb_train, train_y), emb_test, pipeline.knn)
        else:
            model = svm_fit((emb_train, train_y), pipeline.svm)
            predicted = svm_predict(model, emb_test)
        fold_correct = 0
        fold_total = 0
        for k in np.unique(test_y):
            video = predicted[test_y == k]
            votes = video_majority_vote(video.tolist(), [0] * len(video))
            counts[k, votes[0]] += 1
            fold_correct += int(votes[0] == k)
            fold_total += 1
        fold_accuracies.append(fold_correct / fold_total)
    matrix = ConfusionMatrix(counts=counts, class_names=dataset.label_names)
    return CrossValidationResult(
        confusion=matrix,
        accuracy=matrix.accuracy,
        fold_accuracies=tuple(fold_accuracies),
        pipeline=pipeline.echo(),
    )
