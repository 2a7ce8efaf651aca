"""Diffusion-map embedding: Markov transition eigendecomposition plus out-of-sample extension.

The affinity is a Gaussian kernel on pairwise squared distances; rows of
the normalized transition matrix T are jumping probabilities. T is
eigendecomposed through its symmetric conjugate D^(1/2) T D^(-1/2) for
stability, and embedding coordinates are lambda_l^t * phi_l(i) over the
retained eigenpairs. New points are embedded by the Nystrom rule: their
normalized affinities to the training points averaged against each
eigenvector, scaled by lambda_l^(t-1).
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np

from .errors import DataError, NumericalError
from .sklp_projection import pairwise_sq_distances, _fix_signs
from ._util import atomic_write_text, format_float


@dataclass(frozen=True)
class DiffusionConfig:
    """bandwidth: kernel sigma > 0 or "auto" (median pairwise distance);
    embed_dim: number of retained coordinates; time: diffusion steps;
    drop_trivial: exclude the constant top eigenvector (default)."""

    bandwidth: float | str = "auto"
    embed_dim: int = 2
    time: int = 1
    drop_trivial: bool = True

    def __post_init__(self):
        if self.bandwidth != "auto" and not float(self.bandwidth) > 0:
            raise DataError("bandwidth must be positive or 'auto'")
        if int(self.embed_dim) < 1:
            raise DataError("embed_dim must be >= 1")
        if int(self.time) < 1:
            raise DataError("time must be >= 1")


@dataclass(frozen=True)
class DiffusionModel:
    """Fitted diffusion embedding.

    eigenvalues are the full transition spectrum, descending; eigenvectors
    holds the right eigenvectors of T as unit-norm columns in the same
    order. retained gives the column indices used for the embedding
    (n x embed_dim, rows are embedded training points).
    """

    train_points: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    embedding: np.ndarray
    row_sums: np.ndarray
    bandwidth: float
    time: int
    embed_dim: int
    drop_trivial: bool
    retained: np.ndarray

    def __post_init__(self):
        if abs(self.eigenvalues[0] - 1.0) > 1e-8:
            raise NumericalError("leading transition eigenvalue must be 1")
        if np.any(np.abs(self.eigenvalues) > 1.0 + 1e-8):
            raise NumericalError("transition eigenvalues must lie in [-1, 1]")


def affinity(Xhat, bandwidth):
    """Gaussian affinities W_ij = exp(-||x_i - x_j||^2 / sigma^2); symmetric, unit diagonal."""
    if not float(bandwidth) > 0:
        raise DataError("bandwidth must be positive")
    M = pairwise_sq_distances(np.asarray(Xhat, dtype=np.float64))
    return np.exp(-M / (float(bandwidth) ** 2))


def transition(W):
    """Row-normalize an affinity matrix into transition probabilities."""
    W = np.asarray(W, dtype=np.float64)
    if np.any(W < 0):
        raise DataError("affinities must be nonnegative")
    sums = W.sum(axis=1)
    if np.any(sums <= 0):
        raise NumericalError("zero affinity row sum: transition matrix undefined")
    return W / sums[:, None]


def median_pairwise_distance(points):
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[1]
    if n < 2:
        raise DataError("need at least 2 points")
    M = pairwise_sq_distances(points)
    return float(np.median(np.sqrt(M[np.triu_indices(n, 1)])))


def fit(Xhat, config: DiffusionConfig) -> DiffusionModel:
    """Fit the diffusion embedding on columns of Xhat."""
    X = np.asarray(Xhat, dtype=np.float64)
    if X.ndim != 2:
        raise DataError("Xhat must be a 2-D matrix (columns are samples)")
    n = X.shape[1]
    needed = config.embed_dim + (1 if config.drop_trivial else 0)
    if n < needed:
        raise DataError(
            f"embed_dim {config.embed_dim} exceeds available eigenpairs for n={n}"
        )
    if config.bandwidth == "auto":
        sigma = median_pairwise_distance(X)
        if sigma <= 0:
            raise NumericalError("median pairwise distance is zero: bandwidth degenerate")
    else:
        sigma = float(config.bandwidth)

    W = affinity(X, sigma)
    row_sums = W.sum(axis=1)
    # symmetric conjugate of T = D^-1 W shares its (real) spectrum
    inv_root = 1.0 / np.sqrt(row_sums)
    S = W * np.outer(inv_root, inv_root)
    S = (S + S.T) / 2.0
    values, vectors = np.linalg.eigh(S)
    order = np.argsort(values)[::-1]
    values = values[order]
    phi = inv_root[:, None] * vectors[:, order]  # right eigenvectors of T
    phi /= np.linalg.norm(phi, axis=0, keepdims=True)
    phi = _fix_signs(phi)

    start = 1 if config.drop_trivial else 0
    retained = np.arange(start, start + config.embed_dim)
    scale = values[retained] ** config.time
    embedding = phi[:, retained] * scale[None, :]
    return DiffusionModel(
        train_points=X.copy(),
        eigenvalues=values,
        eigenvectors=phi,
        embedding=embedding,
        row_sums=row_sums,
        bandwidth=sigma,
        time=config.time,
        embed_dim=config.embed_dim,
        drop_trivial=config.drop_trivial,
        retained=retained,
    )


def extend(model: DiffusionModel, Xnew):
    """Nystrom embedding of new columns into the fitted diffusion space.

    Coordinates: lambda_l^(t-1) * sum_j p_j phi_l(j), where p is the new
    point's normalized affinity row to the training points. A new point
    equal to a training point reproduces that training embedding row.
    """
    Xnew = np.asarray(Xnew, dtype=np.float64)
    if Xnew.ndim != 2 or Xnew.shape[0] != model.train_points.shape[0]:
        raise DataError(
            f"expected {model.train_points.shape[0]} feature rows, got {Xnew.shape}"
        )
    m = Xnew.shape[1]
    if m == 0:
        return np.zeros((0, model.embed_dim))
    diff = Xnew[:, :, None] - model.train_points[:, None, :]
    cross = np.einsum("dij,dij->ij", diff, diff)
    weights = np.exp(-cross / (model.bandwidth**2))
    probs = weights / weights.sum(axis=1, keepdims=True)
    lam = model.eigenvalues[model.retained]
    coords = probs @ model.eigenvectors[:, model.retained]
    return coords * (lam ** (model.time - 1))[None, :]


def save_embedding_csv(path, embedding, labels=None):
    """Embedding export: columns `label` (when provided) and c1..c_d."""
    embedding = np.asarray(embedding, dtype=np.float64)
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    d = embedding.shape[1]
    header = (["label"] if labels is not None else []) + [f"c{j + 1}" for j in range(d)]
    writer.writerow(header)
    for i in range(embedding.shape[0]):
        row = [labels[i]] if labels is not None else []
        row += [format_float(v) for v in embedding[i]]
        writer.writerow(row)
    try:
        atomic_write_text(path, buffer.getvalue())
    except OSError as exc:
        raise DataError(f"cannot write {path}: {exc}") from exc


def save_model_json(model: DiffusionModel, path):
    """Serialize the fitted diffusion model (full float precision)."""
    payload = {
        "bandwidth": model.bandwidth,
        "time": model.time,
        "embed_dim": model.embed_dim,
        "drop_trivial": model.drop_trivial,
        "eigenvalues": model.eigenvalues.tolist(),
        "retained": model.retained.tolist(),
        "row_sums": model.row_sums.tolist(),
        "train_points": model.train_points.tolist(),
        "eigenvectors": model.eigenvectors.tolist(),
        "embedding": model.embedding.tolist(),
    }
    try:
        atomic_write_text(path, json.dumps(payload) + "\n")
    except OSError as exc:
        raise DataError(f"cannot write {path}: {exc}") from exc
