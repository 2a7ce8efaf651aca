"""Supervised kernel linear projection (SKLP).

Learns an orthonormal linear map P that pulls same-class samples together
and pushes different-class samples apart, measured by Gaussian kernel
similarities of the projected pairwise distances. Each iteration:

  1. summarise the current projected squared distances M into per-class and
     inter-class kernel averages (m_c, m_o),
  2. convert those averages into signed pair weights alpha (negative for
     intra-class pairs, positive for inter-class pairs),
  3. assemble the weighted pairwise scatter X L X^T and take its top
     positive eigenvectors as the new projection,
  4. relax M toward the new projected distances with learning rate eta,
  5. evaluate the objective J on the updated M.

The fit keeps the projection with the best observed objective.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .dataset import LabeledDataset
from .errors import DataError, NumericalError
from ._util import atomic_write_text

MODEL_KINDS = ("sklp", "pca", "lda")


@dataclass(frozen=True)
class SklpConfig:
    """Hyperparameters of the supervised projection.

    rho              : inter/intra balance in (0, 1); (1-rho) weights the
                       intra-class term, rho the inter-class term
    class_weights    : per-class weights lambda_k > 0, or None for the
                       pair-count balancing default n_o / (K * n_k)
    kernel_bandwidth : Gaussian kernel sigma > 0, or "auto" for the median
                       of the initial projected pairwise distances
    target_dim       : output dimension d, or "auto" for K - 1 (capped at
                       min(D, n-1))
    learning_rate    : distance relaxation step eta in (0, 1]
    """

    rho: float = 0.1
    class_weights: tuple | None = None
    kernel_bandwidth: float | str = "auto"
    target_dim: int | str = "auto"
    learning_rate: float = 0.1
    max_iters: int = 100
    rel_tolerance: float = 1e-6

    def __post_init__(self):
        if not 0.0 < self.rho < 1.0:
            raise DataError("rho must lie in (0, 1)")
        if not 0.0 < self.learning_rate <= 1.0:
            raise DataError("learning_rate must lie in (0, 1]")
        if self.max_iters < 1:
            raise DataError("max_iters must be positive")
        if self.rel_tolerance <= 0:
            raise DataError("rel_tolerance must be positive")
        if self.kernel_bandwidth != "auto":
            if not float(self.kernel_bandwidth) > 0:
                raise DataError("kernel_bandwidth must be positive or 'auto'")
        if self.target_dim != "auto":
            if int(self.target_dim) < 1:
                raise DataError("target_dim must be a positive integer or 'auto'")
        if self.class_weights is not None:
            weights = tuple(float(w) for w in self.class_weights)
            if any(w <= 0 for w in weights):
                raise DataError("class_weights must all be positive")
            object.__setattr__(self, "class_weights", weights)

    def echo(self):
        """Plain-dict hyperparameter echo for serialized models."""
        return {
            "rho": self.rho,
            "class_weights": list(self.class_weights) if self.class_weights else None,
            "kernel_bandwidth": self.kernel_bandwidth,
            "target_dim": self.target_dim,
            "learning_rate": self.learning_rate,
            "max_iters": self.max_iters,
            "rel_tolerance": self.rel_tolerance,
        }


@dataclass(frozen=True)
class ProjectionModel:
    """A fitted linear map: columns of `matrix` are orthonormal directions.

    `eigenvalues` are the spectrum entries the directions were selected by
    (scatter eigenvalues for sklp, covariance for pca, generalized
    discriminant values for lda), sorted descending. `mean` is subtracted
    before projecting when present (pca only).
    """

    matrix: np.ndarray
    kind: str
    dim_in: int
    dim_out: int
    eigenvalues: np.ndarray
    mean: np.ndarray | None = None
    config: dict | None = None

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise DataError(f"unknown model kind {self.kind!r}")
        matrix = np.array(self.matrix, dtype=np.float64)
        eigenvalues = np.array(self.eigenvalues, dtype=np.float64)
        if matrix.shape != (self.dim_in, self.dim_out):
            raise DataError("matrix shape does not match dim_in x dim_out")
        if eigenvalues.shape != (self.dim_out,):
            raise DataError("eigenvalues length must equal dim_out")
        gram = matrix.T @ matrix
        if np.max(np.abs(gram - np.eye(self.dim_out))) > 1e-10:
            raise NumericalError("projection columns are not orthonormal")
        if np.any(np.diff(eigenvalues) > 0):
            raise NumericalError("eigenvalues must be sorted descending")
        if self.kind == "sklp" and np.any(eigenvalues <= 0):
            raise NumericalError("sklp retains only positive eigenvalues")
        mean = self.mean
        if mean is not None:
            mean = np.array(mean, dtype=np.float64)
            if mean.shape != (self.dim_in,):
                raise DataError("mean length must equal dim_in")
            mean.flags.writeable = False
        matrix.flags.writeable = False
        eigenvalues.flags.writeable = False
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "eigenvalues", eigenvalues)
        object.__setattr__(self, "mean", mean)


@dataclass(frozen=True)
class ScatterAssembly:
    """Weighted pairwise scatter in both its factored and assembled forms.

    A = X L X^T with L = E - Dm, E_ii = 2 * sum_j alpha_ij, Dm = 2 * alpha.
    A equals the direct pairwise sum over ordered pairs of
    alpha_ij * z_ij z_ij^T for symmetric alpha.
    """

    A: np.ndarray
    E: np.ndarray
    Dm: np.ndarray
    L: np.ndarray


@dataclass
class SklpState:
    """Per-iteration state of the projection fit.

    M holds the current symmetric matrix of low-dimensional squared
    distances; m_c / m_o / alpha reflect the latest kernel summaries.
    objective_history[0] is the objective at initialization; entry t is the
    objective after iteration t. predicted_increments records, per
    iteration, the sum of the selected eigenvalues plus the constant
    (1-rho) * sum_k lambda_k n_k - rho * n_o  (a reported diagnostic of the
    expected objective gain; not enforced).
    """

    M: np.ndarray
    m_c: np.ndarray
    m_o: float
    alpha: np.ndarray
    objective_history: list = field(default_factory=list)
    iteration: int = 0
    sigma: float = 0.0
    class_weights: np.ndarray | None = None
    predicted_increments: list = field(default_factory=list)
    eigenvalue_history: list = field(default_factory=list)
    best_index: int = 0
    best_objective: float = -math.inf
    best_matrix: np.ndarray | None = None
    best_eigenvalues: np.ndarray | None = None
    best_scatter: np.ndarray | None = None


def _pair_counts(labels, class_count):
    """Ordered-pair counts: n_k = c_k (c_k - 1) per class, n_o for inter-class."""
    counts = np.bincount(labels, minlength=class_count)
    n_k = counts * (counts - 1)
    n = len(labels)
    n_o = n * (n - 1) - int(n_k.sum())
    return n_k, n_o


def default_class_weights(labels, class_count):
    """Pair-count balancing weights lambda_k = n_o / (K * n_k).

    Classes without intra-class pairs (singletons) get a placeholder weight
    of n_o / K; it never enters any sum because such classes contribute no
    pairs.
    """
    n_k, n_o = _pair_counts(labels, class_count)
    if n_o == 0:
        raise NumericalError("no inter-class pairs: need at least 2 classes")
    return n_o / (class_count * np.maximum(n_k, 1))


def _resolve_weights(config, labels, class_count):
    if config.class_weights is not None:
        weights = np.asarray(config.class_weights, dtype=np.float64)
        if weights.shape != (class_count,):
            raise DataError(f"class_weights must have length {class_count}")
        return weights
    return default_class_weights(labels, class_count)


def _resolve_sigma(config, sigma):
    if sigma is not None:
        return float(sigma)
    if config.kernel_bandwidth == "auto":
        raise DataError("kernel_bandwidth 'auto' is resolved by init_state; pass sigma explicitly")
    return float(config.kernel_bandwidth)


def pairwise_sq_distances(points):
    """Exact symmetric matrix of squared Euclidean distances between columns."""
    diff = points[:, :, None] - points[:, None, :]
    return np.einsum("dij,dij->ij", diff, diff)


def kernel_averages(M, labels, config, *, sigma=None, class_count=None):
    """Per-class and inter-class kernel averages of the distance matrix M.

    m_ck = exp(-(1/n_k) * sum over ordered same-class pairs of exp(-M_ij/sigma^2)),
    m_o analogously over inter-class pairs. Both lie in (exp(-1), 1].
    Singleton classes (no intra pairs) report m_ck = 1.
    """
    labels = np.asarray(labels)
    K = class_count if class_count is not None else int(labels.max()) + 1
    sig = _resolve_sigma(config, sigma)
    n_k, n_o = _pair_counts(labels, K)
    if n_o == 0:
        raise NumericalError("no inter-class pairs: need at least 2 classes")
    kernels = np.exp(-M / (sig * sig))
    np.fill_diagonal(kernels, 0.0)  # ordered pairs with i != j only
    same = labels[:, None] == labels[None, :]
    m_c = np.ones(K)
    for k in range(K):
        if n_k[k] == 0:
            continue
        members = labels == k
        m_c[k] = math.exp(-(kernels[np.ix_(members, members)].sum() / n_k[k]))
    m_o = math.exp(-(kernels[~same].sum() / n_o))
    return m_c, m_o


def alpha_weights(m_c, m_o, labels, config, *, class_weights=None):
    """Signed pair weights: -(1-rho) * lambda_k / m_ck within class k, rho / m_o across."""
    labels = np.asarray(labels)
    K = len(m_c)
    weights = (
        np.asarray(class_weights, dtype=np.float64)
        if class_weights is not None
        else _resolve_weights(config, labels, K)
    )
    intra = -(1.0 - config.rho) * weights[labels] / np.asarray(m_c)[labels]
    alpha = np.where(labels[:, None] == labels[None, :], intra[:, None], config.rho / m_o)
    np.fill_diagonal(alpha, 0.0)
    return alpha


def scatter_matrix(X, alpha) -> ScatterAssembly:
    """Assemble A = X L X^T from symmetric pair weights alpha."""
    X = np.asarray(X, dtype=np.float64)
    Dm = 2.0 * alpha
    E = np.diag(Dm.sum(axis=1))
    L = E - Dm
    A = X @ L @ X.T
    A = (A + A.T) / 2.0
    return ScatterAssembly(A=A, E=E, Dm=Dm, L=L)


def _fix_signs(vectors):
    """Deterministic sign convention: largest-magnitude entry of each column positive."""
    vectors = vectors.copy()
    for j in range(vectors.shape[1]):
        lead = int(np.argmax(np.abs(vectors[:, j])))  # ties -> lowest index
        if vectors[lead, j] < 0:
            vectors[:, j] = -vectors[:, j]
    return vectors


def _sorted_eigh(A):
    values, vectors = np.linalg.eigh(A)
    order = np.argsort(values)[::-1]
    return values[order], _fix_signs(vectors[:, order])


def top_eigendirections(A, d, *, positive_only, eig_floor=None):
    """Top-d eigenpairs of a symmetric matrix, optionally restricted to positive ones.

    With positive_only, d is further capped at the number of eigenvalues
    above the floor 1e-10 * (||A|| + 1); zero positive eigenvalues is an
    error (degenerate configuration).
    """
    values, vectors = _sorted_eigh(A)
    if positive_only:
        floor = eig_floor if eig_floor is not None else 1e-10 * (np.abs(values).max() + 1.0)
        available = int((values > floor).sum())
        if available == 0:
            raise NumericalError(
                "no positive eigenvalues: the weighted scatter is degenerate "
                "(all directions decrease the objective)"
            )
        d = min(d, available)
    if d < 1 or d > len(values):
        raise DataError(f"cannot extract {d} eigenpairs from a {len(values)}-dim matrix")
    return values[:d], vectors[:, :d]


def solve_eig(assembly: ScatterAssembly, d, *, config=None) -> ProjectionModel:
    """Projection from the top positive eigenvectors of the assembled scatter."""
    values, vectors = top_eigendirections(assembly.A, d, positive_only=True)
    return ProjectionModel(
        matrix=vectors,
        kind="sklp",
        dim_in=assembly.A.shape[0],
        dim_out=vectors.shape[1],
        eigenvalues=values,
        config=config.echo() if config is not None else None,
    )


def objective(M, labels, config, *, sigma=None, class_weights=None):
    """J = (1-rho) sum_k lambda_k sum_intra kernel - rho sum_inter kernel.

    Also re-verifies the log-mean identity
    sum_intra kernel == -n_k * ln(m_ck) to 1e-10 relative.
    """
    labels = np.asarray(labels)
    K = int(labels.max()) + 1
    sig = _resolve_sigma(config, sigma)
    weights = (
        np.asarray(class_weights, dtype=np.float64)
        if class_weights is not None
        else _resolve_weights(config, labels, K)
    )
    n_k, n_o = _pair_counts(labels, K)
    if n_o == 0:
        raise NumericalError("no inter-class pairs: need at least 2 classes")
    kernels = np.exp(-M / (sig * sig))
    np.fill_diagonal(kernels, 0.0)
    same = labels[:, None] == labels[None, :]
    total = 0.0
    for k in range(K):
        members = labels == k
        intra_sum = kernels[np.ix_(members, members)].sum()
        if n_k[k] > 0:
            recon = -n_k[k] * math.log(math.exp(-(intra_sum / n_k[k])))
            if abs(recon - intra_sum) > 1e-10 * (abs(intra_sum) + 1.0):
                raise NumericalError("log-mean reparameterization identity violated")
        total += (1.0 - config.rho) * weights[k] * intra_sum
    inter_sum = kernels[~same].sum()
    recon = -n_o * math.log(math.exp(-(inter_sum / n_o)))
    if abs(recon - inter_sum) > 1e-10 * (abs(inter_sum) + 1.0):
        raise NumericalError("log-mean reparameterization identity violated")
    return total - config.rho * inter_sum


def update_distances(M, model: ProjectionModel, X, learning_rate):
    """Relax M toward the projected squared distances: M + eta * (d_P - M)."""
    if not 0.0 < learning_rate <= 1.0:
        raise DataError("learning_rate must lie in (0, 1]")
    projected = model.matrix.T @ np.asarray(X, dtype=np.float64)
    target = pairwise_sq_distances(projected)
    if learning_rate == 1.0:
        return target  # full step is exact, no cancellation residue
    return M + learning_rate * (target - M)


def init_state(dataset: LabeledDataset, config: SklpConfig) -> SklpState:
    """Initial state: distances from the top-d principal directions, sigma from their median.

    The kernel bandwidth, class weights, and target dimension are resolved
    here: sigma = median of the initial projected pairwise distances when
    'auto'; d = K - 1 capped at min(D, n-1) when 'auto'.
    """
    X = dataset.features
    n = dataset.sample_count
    K = dataset.class_count
    if n < 2:
        raise DataError("need at least 2 samples")
    if K < 2:
        raise NumericalError("need at least 2 classes (K >= 2) to contrast pairs")
    d = K - 1 if config.target_dim == "auto" else int(config.target_dim)
    d = max(1, min(d, dataset.dim, n - 1))
    weights = _resolve_weights(config, dataset.labels, K)

    centered = X - X.mean(axis=1, keepdims=True)
    cov = centered @ centered.T / (n - 1)
    cov = (cov + cov.T) / 2.0
    values, vectors = _sorted_eigh(cov)
    positive = int((values > 1e-10 * (np.abs(values).max() + 1.0)).sum())
    if positive == 0:
        raise NumericalError("all samples identical: cannot scale initial distances")
    d0 = min(d, positive)
    init_matrix = vectors[:, :d0]
    init_values = values[:d0]

    M = pairwise_sq_distances(init_matrix.T @ X)
    if config.kernel_bandwidth == "auto":
        upper = np.sqrt(M[np.triu_indices(n, 1)])
        sigma = float(np.median(upper))
        if sigma <= 0:
            raise NumericalError("median pairwise distance is zero: bandwidth degenerate")
    else:
        sigma = float(config.kernel_bandwidth)
    m_c, m_o = kernel_averages(M, dataset.labels, config, sigma=sigma, class_count=K)
    alpha = alpha_weights(m_c, m_o, dataset.labels, config, class_weights=weights)
    J0 = objective(M, dataset.labels, config, sigma=sigma, class_weights=weights)
    return SklpState(
        M=M,
        m_c=m_c,
        m_o=m_o,
        alpha=alpha,
        objective_history=[J0],
        iteration=0,
        sigma=sigma,
        class_weights=weights,
        eigenvalue_history=[init_values],
        best_index=0,
        best_objective=J0,
        best_matrix=init_matrix,
        best_eigenvalues=init_values,
        best_scatter=None,
    )


def fit(dataset: LabeledDataset, config: SklpConfig | None = None):
    """Run the iterative fit; returns (ProjectionModel, SklpState).

    Stops when the objective change drops below rel_tolerance * (|J| + 1)
    or after max_iters iterations. The returned projection is the iterate
    with the best observed objective (the initialization counts as
    iterate 0, carrying the covariance spectrum).
    """
    if config is None:
        config = SklpConfig()
    state = init_state(dataset, config)
    X = dataset.features
    labels = dataset.labels
    K = dataset.class_count
    d = K - 1 if config.target_dim == "auto" else int(config.target_dim)
    d = max(1, min(d, dataset.dim, dataset.sample_count - 1))
    n_k, n_o = _pair_counts(labels, K)
    increment_constant = float(
        (1.0 - config.rho) * np.sum(state.class_weights * n_k) - config.rho * n_o
    )

    previous = state.objective_history[0]
    for t in range(1, config.max_iters + 1):
        state.m_c, state.m_o = kernel_averages(
            state.M, labels, config, sigma=state.sigma, class_count=K
        )
        state.alpha = alpha_weights(
            state.m_c, state.m_o, labels, config, class_weights=state.class_weights
        )
        assembly = scatter_matrix(X, state.alpha)
        step_model = solve_eig(assembly, d, config=config)
        state.M = update_distances(state.M, step_model, X, config.learning_rate)
        current = objective(
            state.M, labels, config, sigma=state.sigma, class_weights=state.class_weights
        )
        state.objective_history.append(current)
        state.eigenvalue_history.append(step_model.eigenvalues)
        state.predicted_increments.append(float(step_model.eigenvalues.sum()) + increment_constant)
        state.iteration = t
        if current > state.best_objective:
            state.best_objective = current
            state.best_index = t
            state.best_matrix = step_model.matrix
            state.best_eigenvalues = step_model.eigenvalues
            state.best_scatter = assembly.A
        if abs(current - previous) <= config.rel_tolerance * (abs(previous) + 1.0):
            break
        previous = current

    model = ProjectionModel(
        matrix=state.best_matrix,
        kind="sklp",
        dim_in=dataset.dim,
        dim_out=state.best_matrix.shape[1],
        eigenvalues=state.best_eigenvalues,
        config=config.echo(),
    )
    return model, state


def project(model: ProjectionModel, X):
    """Apply the fitted map: P^T X, after mean subtraction when the model stores one."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != model.dim_in:
        raise DataError(f"expected {model.dim_in} feature rows, got {X.shape}")
    if model.mean is not None:
        X = X - model.mean[:, None]
    return model.matrix.T @ X


def save_model(model: ProjectionModel, path):
    """Serialize a projection to JSON (full float precision round-trip)."""
    payload = {
        "kind": model.kind,
        "dim_in": model.dim_in,
        "dim_out": model.dim_out,
        "matrix": model.matrix.tolist(),
        "eigenvalues": model.eigenvalues.tolist(),
        "mean": model.mean.tolist() if model.mean is not None else None,
        "config": model.config,
    }
    try:
        atomic_write_text(path, json.dumps(payload, indent=1) + "\n")
    except OSError as exc:
        raise DataError(f"cannot write {path}: {exc}") from exc


def load_model(path) -> ProjectionModel:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            payload = json.load(handle)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: malformed model file: {exc}") from exc
    for key in ("kind", "dim_in", "dim_out", "matrix", "eigenvalues"):
        if key not in payload:
            raise DataError(f"{path}: model file missing field {key!r}")
    return ProjectionModel(
        matrix=np.asarray(payload["matrix"], dtype=np.float64),
        kind=payload["kind"],
        dim_in=int(payload["dim_in"]),
        dim_out=int(payload["dim_out"]),
        eigenvalues=np.asarray(payload["eigenvalues"], dtype=np.float64),
        mean=np.asarray(payload["mean"], dtype=np.float64) if payload.get("mean") else None,
        config=payload.get("config"),
    )
