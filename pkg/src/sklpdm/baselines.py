"""PCA and LDA reference projections sharing the ProjectionModel contract."""

from __future__ import annotations

import numpy as np

from .dataset import LabeledDataset
from .errors import DataError, NumericalError
from .sklp_projection import ProjectionModel, _sorted_eigh, top_eigendirections, project


def pca_fit(X, d) -> ProjectionModel:
    """Top-d directions of the sample covariance (1/(n-1) normalization).

    The mean is stored on the model and subtracted before projecting.
    Zero-variance directions are kept so the reported spectrum matches the
    covariance exactly.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise DataError("X must be a 2-D matrix (columns are samples)")
    D, n = X.shape
    if n < 2:
        raise DataError("pca_fit needs at least 2 samples")
    if d < 1 or d > min(D, n - 1):
        raise DataError(f"d={d} too large: must satisfy 1 <= d <= min(D, n-1) = {min(D, n - 1)}")
    mean = X.mean(axis=1)
    centered = X - mean[:, None]
    cov = centered @ centered.T / (n - 1)
    cov = (cov + cov.T) / 2.0
    values, vectors = _sorted_eigh(cov)
    return ProjectionModel(
        matrix=vectors[:, :d],
        kind="pca",
        dim_in=D,
        dim_out=d,
        eigenvalues=values[:d],
        mean=mean,
        config={"target_dim": d},
    )


def lda_fit(dataset: LabeledDataset, d) -> ProjectionModel:
    """Discriminant directions from the ridge-regularized scatter pencil.

    Solves the between/within scatter problem in whitened form: eigenvectors
    of G^(-1/2) S_b G^(-1/2) with G = S_w + gamma I and
    gamma = 1e-6 * trace(S_w) / D (floored when the within-scatter
    vanishes, e.g. single-sample classes). The whitened formulation keeps
    the returned columns orthonormal while the eigenvalues remain the
    generalized discriminant values. d is capped at K - 1.
    """
    X = dataset.features
    labels = dataset.labels
    D, n = X.shape
    K = dataset.class_count
    if K < 2:
        raise DataError("lda_fit needs at least 2 classes")
    if d < 1 or d > K - 1:
        raise DataError(f"d={d} out of range: must satisfy 1 <= d <= K-1 = {K - 1}")
    overall_mean = X.mean(axis=1)
    S_w = np.zeros((D, D))
    S_b = np.zeros((D, D))
    for k in range(K):
        members = X[:, labels == k]
        mu_k = members.mean(axis=1)
        centered = members - mu_k[:, None]
        S_w += centered @ centered.T
        delta = mu_k - overall_mean
        S_b += members.shape[1] * np.outer(delta, delta)
    gamma = 1e-6 * float(np.trace(S_w)) / D
    if gamma <= 0:
        # within-scatter is zero (e.g. singleton classes); fall back to an
        # absolute ridge so the pencil stays definite
        gamma = 1e-6 * max(float(np.trace(S_b)) / D, 1.0)
    G = S_w + gamma * np.eye(D)
    g_values, g_vectors = np.linalg.eigh(G)
    if np.any(g_values <= 0):
        raise NumericalError("within-class scatter singular even after regularization")
    whiten = g_vectors @ np.diag(1.0 / np.sqrt(g_values)) @ g_vectors.T
    discriminant = whiten @ S_b @ whiten
    discriminant = (discriminant + discriminant.T) / 2.0
    values, vectors = top_eigendirections(discriminant, d, positive_only=True)
    return ProjectionModel(
        matrix=vectors,
        kind="lda",
        dim_in=D,
        dim_out=vectors.shape[1],
        eigenvalues=values,
        config={"target_dim": d, "ridge": gamma},
    )


def apply_model(model: ProjectionModel, X):
    """Project columns of X through any fitted model (same contract as `project`)."""
    return project(model, X)
