import logging
from pathlib import Path
from typing import Iterable

import numpy as np
import scipy.linalg

from rtbust.artifacts import load_tensor_file, require_tensors, save_tensor_file
from rtbust.exceptions import ConfigurationError, IncompatibleArtifactError, NumericalFailureError
from rtbust.rtbust_ingest.models import RleSequence
from rtbust.rtbust_linproj.models import (
    DEFAULT_SEQ_LEN,
    TICA_EPSILON,
    CorpusStats,
    FixedVector,
    LinearProjector,
    ProjectorKind,
)

logger = logging.getLogger(__name__)

PROJECTOR_MAGIC = {ProjectorKind.PCA: "RTBUST-PCA", ProjectorKind.TICA: "RTBUST-TICA"}


def signed_log(values) -> np.ndarray:
    """v -> sign(v) * ln(1 + |v|), odd and zero-preserving."""
    v = np.asarray(values, dtype=np.float64)
    return np.sign(v) * np.log1p(np.abs(v))


def corpus_stats(sequences: Iterable[RleSequence]) -> CorpusStats:
    """Mean and std of the signed-log values pooled over every sequence."""
    chunks = [signed_log(rle.values) for rle in sequences if rle.values]
    if not chunks:
        return CorpusStats()
    pooled = np.concatenate(chunks)
    std = float(pooled.std())
    return CorpusStats(mean=float(pooled.mean()), std=std if std > 0 else 1.0)


def vectorize(rle: RleSequence, seq_len: int = DEFAULT_SEQ_LEN, stats: CorpusStats | None = None) -> FixedVector:
    """
    Signed-log transform, corpus z-scoring, then truncation to the most
    recent ``seq_len`` entries or right zero-padding.

    Raises:
        ConfigurationError: If seq_len <= 0.
    """
    if seq_len <= 0:
        raise ConfigurationError(f"sequence length must be positive, got {seq_len}")
    stats = stats or CorpusStats()
    z = (signed_log(rle.values) - stats.mean) / stats.std
    z = z[-seq_len:]
    values = np.zeros(seq_len, dtype=np.float64)
    values[:z.shape[0]] = z
    return FixedVector(values=values, length=int(z.shape[0]))


def vectorize_corpus(rle_map: dict[str, RleSequence], seq_len: int = DEFAULT_SEQ_LEN,
                     stats: CorpusStats | None = None) -> tuple[list[str], np.ndarray, np.ndarray]:
    """
    Vectorises every sequence.

    Returns:
        tuple: user ids, an (n, seq_len) value matrix and the per-row lengths.
    """
    user_ids = list(rle_map)
    vectors = [vectorize(rle_map[u], seq_len, stats) for u in user_ids]
    matrix = np.vstack([v.values for v in vectors]) if vectors else np.zeros((0, seq_len))
    lengths = np.array([v.length for v in vectors], dtype=np.int64)
    return user_ids, matrix, lengths


def _fix_signs(basis: np.ndarray) -> np.ndarray:
    # Largest-magnitude entry of each column made positive.
    rows = np.argmax(np.abs(basis), axis=0)
    signs = np.sign(basis[rows, np.arange(basis.shape[1])])
    signs[signs == 0] = 1.0
    return basis * signs


def _check_dims(matrix: np.ndarray, d: int) -> np.ndarray:
    x = np.asarray(matrix, dtype=np.float64)
    if x.ndim != 2:
        raise ConfigurationError(f"expected a 2-D matrix, got shape {x.shape}")
    n, width = x.shape
    if d < 1 or d > width:
        raise ConfigurationError(f"latent dimension {d} must lie in [1, {width}]")
    if not np.all(np.isfinite(x)):
        raise NumericalFailureError("input matrix holds non-finite values")
    return x


def pca_fit(matrix: np.ndarray, d: int, stats: CorpusStats | None = None) -> LinearProjector:
    """
    Principal component analysis by eigendecomposition of the sample covariance.

    Components are sorted by decreasing eigenvalue and sign-fixed so their
    largest-magnitude entry is positive. When fewer than ``d`` eigenvalues are
    positive the remaining columns come from the orthonormal null-space
    eigenvectors, with a warning.

    Raises:
        ConfigurationError: Unless n >= d >= 1 and d <= L.
    """
    x = _check_dims(matrix, d)
    n = x.shape[0]
    if n < d:
        raise ConfigurationError(f"PCA needs at least d={d} rows, got {n}")
    mean = x.mean(axis=0)
    centered = x - mean
    covariance = centered.T @ centered / max(n - 1, 1)

    eigenvalues, eigenvectors = scipy.linalg.eigh(covariance)
    if not np.all(np.isfinite(eigenvalues)):
        raise NumericalFailureError("PCA produced non-finite eigenvalues")
    order = np.argsort(eigenvalues)[::-1]
    eigenvalues = np.clip(eigenvalues[order], 0.0, None)
    eigenvectors = eigenvectors[:, order]

    tolerance = 1e-12 * max(1.0, float(eigenvalues[0]))
    n_positive = int(np.count_nonzero(eigenvalues > tolerance))
    if n_positive < d:
        logger.warning(f"Covariance has only {n_positive} positive eigenvalues, "
                       f"filling {d - n_positive} PCA components from its null space")

    total = float(eigenvalues.sum())
    ratio = eigenvalues[:d] / total if total > 0 else np.zeros(d)
    return LinearProjector(
        kind=ProjectorKind.PCA,
        mean=mean,
        basis=_fix_signs(eigenvectors[:, :d]),
        eigenvalues=eigenvalues[:d],
        explained_variance_ratio=ratio,
        stats=stats or CorpusStats(),
    )


def solve_tica_eigenproblem(c0: np.ndarray, c_lag: np.ndarray, d: int,
                            epsilon: float = TICA_EPSILON) -> tuple[np.ndarray, np.ndarray]:
    """
    Solves C_lag v = lambda (C_0 + epsilon I) v for the top-``d`` eigenpairs.

    Returns:
        tuple: eigenvalues sorted non-increasing, and the matching
        eigenvectors as columns (sign-fixed, C_0-normalised).

    Raises:
        NumericalFailureError: If an eigenvalue is not finite or C_0 is not
            positive definite after regularisation.
    """
    c_lag = 0.5 * (c_lag + c_lag.T)
    c0 = 0.5 * (c0 + c0.T) + epsilon * np.eye(c0.shape[0])
    try:
        eigenvalues, eigenvectors = scipy.linalg.eigh(c_lag, c0)
    except (np.linalg.LinAlgError, ValueError) as e:
        raise NumericalFailureError(f"TICA eigenproblem failed: {e}") from e
    if not np.all(np.isfinite(eigenvalues)):
        raise NumericalFailureError("TICA produced non-finite eigenvalues")
    order = np.argsort(eigenvalues)[::-1][:d]
    return eigenvalues[order], _fix_signs(eigenvectors[:, order])


def lagged_covariances(matrix: np.ndarray, lag: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Symmetrised instantaneous and time-lagged covariances, rows being
    consecutive time steps.

    Returns:
        tuple: the mean, C_0 and C_lag.
    """
    mean = matrix.mean(axis=0)
    centered = matrix - mean
    head, tail = centered[:-lag], centered[lag:]
    m = head.shape[0]
    c0 = (head.T @ head + tail.T @ tail) / (2.0 * m)
    c_lag = (head.T @ tail + tail.T @ head) / (2.0 * m)
    return mean, c0, c_lag


def tica_fit(matrix: np.ndarray, d: int, lag: int = 1, stats: CorpusStats | None = None,
             epsilon: float = TICA_EPSILON) -> LinearProjector:
    """
    Time-lagged independent component analysis: the ``d`` linear
    combinations with the highest lag-``lag`` autocorrelation.

    Rows are consecutive time steps and columns the input dimensions. For
    account corpora the caller fixes the row order (``fit_linear`` uses
    sorted user ids), so the lagged covariance pairs neighbouring accounts
    and is only as meaningful as that order.

    Raises:
        ConfigurationError: If lag < 1, lag >= L, there are not more rows
            than lag, or d is out of range.
    """
    x = _check_dims(matrix, d)
    if lag < 1:
        raise ConfigurationError(f"TICA lag must be at least 1, got {lag}")
    if lag >= x.shape[1]:
        raise ConfigurationError(f"TICA lag {lag} must be smaller than the vector length {x.shape[1]}")
    if x.shape[0] <= lag:
        raise ConfigurationError(f"TICA needs more than lag={lag} rows, got {x.shape[0]}")
    mean, c0, c_lag = lagged_covariances(x, lag)
    eigenvalues, basis = solve_tica_eigenproblem(c0, c_lag, d, epsilon)
    return LinearProjector(kind=ProjectorKind.TICA, mean=mean, basis=basis, eigenvalues=eigenvalues,
                           lag=lag, stats=stats or CorpusStats())


def project(projector: LinearProjector, vectors: np.ndarray) -> np.ndarray:
    """Projects one vector (L,) or a matrix of row vectors (n, L)."""
    x = np.asarray(vectors, dtype=np.float64)
    if x.shape[-1] != projector.input_dim:
        raise ConfigurationError(f"projector expects {projector.input_dim} inputs, got {x.shape[-1]}")
    return (x - projector.mean) @ projector.basis


def save_projector(projector: LinearProjector, path: str | Path) -> None:
    fields: dict[str, int | str] = {"d": projector.d, "L": projector.input_dim}
    if projector.kind is ProjectorKind.TICA:
        fields["lag"] = projector.lag
    tensors = {
        "mean": projector.mean,
        "basis": projector.basis,
        "eigenvalues": projector.eigenvalues,
        "norm_stats": np.array([projector.stats.mean, projector.stats.std]),
    }
    if projector.explained_variance_ratio is not None:
        tensors["explained_variance_ratio"] = projector.explained_variance_ratio
    save_tensor_file(path, PROJECTOR_MAGIC[projector.kind], fields, tensors)


def load_projector(path: str | Path, kind: ProjectorKind) -> LinearProjector:
    fields, tensors = load_tensor_file(path, PROJECTOR_MAGIC[kind])
    try:
        d, width = int(fields["d"]), int(fields["L"])
        lag = int(fields.get("lag", 0))
    except (KeyError, ValueError) as e:
        raise IncompatibleArtifactError(f"{path}: header lacks d/L fields") from e
    require_tensors(tensors, {"mean": (width,), "basis": (width, d), "eigenvalues": (d,), "norm_stats": (2,)},
                    str(path))
    norm = tensors["norm_stats"]
    return LinearProjector(
        kind=kind,
        mean=tensors["mean"],
        basis=tensors["basis"],
        eigenvalues=tensors["eigenvalues"],
        lag=lag,
        explained_variance_ratio=tensors.get("explained_variance_ratio"),
        stats=CorpusStats(mean=float(norm[0]), std=float(norm[1])),
    )
