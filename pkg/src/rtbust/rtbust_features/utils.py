import csv
import logging
import math
from pathlib import Path

import numpy as np

from rtbust.exceptions import ConfigurationError, IncompatibleArtifactError, InputNotFoundError
from rtbust.rtbust_features.models import ExtractorKind, LatentTable
from rtbust.rtbust_handcrafted.models import FEATURE_NAMES
from rtbust.rtbust_handcrafted.utils import handcrafted_matrix, standardize_columns
from rtbust.rtbust_ingest.models import RleSequence, UserSeries
from rtbust.rtbust_linproj.models import DEFAULT_LATENT_DIM, DEFAULT_SEQ_LEN, DEFAULT_TICA_LAG, LinearProjector
from rtbust.rtbust_linproj.utils import corpus_stats, pca_fit, project, tica_fit, vectorize_corpus
from rtbust.rtbust_vae.models import VaeModel
from rtbust.rtbust_vae.utils import extract_latent

logger = logging.getLogger(__name__)


def save_latents(table: LatentTable, path: str | Path) -> None:
    """Writes ``user_id,<columns...>`` with shortest round-trip floats."""
    with Path(path).open("w", encoding="utf-8", newline="") as stream:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(["user_id", *table.columns])
        for user_id, row in zip(table.user_ids, table.matrix):
            writer.writerow([user_id, *(repr(float(v)) for v in row)])


def load_latents(path: str | Path) -> LatentTable:
    """
    Raises:
        InputNotFoundError: If the file is missing.
        IncompatibleArtifactError: On a bad header, ragged rows or non-finite values.
    """
    path = Path(path)
    if not path.is_file():
        raise InputNotFoundError(f"No such latents file: '{path}'")
    with path.open("r", encoding="utf-8", newline="") as stream:
        rows = list(csv.reader(stream))
    if not rows or not rows[0] or rows[0][0] != "user_id" or len(rows[0]) < 2:
        raise IncompatibleArtifactError(f"{path}: expected a 'user_id,...' header")
    columns = rows[0][1:]
    user_ids: list[str] = []
    values: list[list[float]] = []
    for line_no, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(columns) + 1:
            raise IncompatibleArtifactError(f"{path}:{line_no}: expected {len(columns) + 1} fields, got {len(row)}")
        try:
            floats = [float(v) for v in row[1:]]
        except ValueError as e:
            raise IncompatibleArtifactError(f"{path}:{line_no}: {e}") from e
        if not all(math.isfinite(v) for v in floats):
            raise IncompatibleArtifactError(f"{path}:{line_no}: non-finite feature value")
        user_ids.append(row[0])
        values.append(floats)
    matrix = np.array(values, dtype=np.float64).reshape(len(values), len(columns))
    try:
        return LatentTable(user_ids=user_ids, matrix=matrix, columns=columns)
    except ValueError as e:
        raise IncompatibleArtifactError(f"{path}: {e}") from e


def fit_linear(kind: ExtractorKind, rle_map: dict[str, RleSequence], d: int = DEFAULT_LATENT_DIM,
               seq_len: int = DEFAULT_SEQ_LEN, lag: int = DEFAULT_TICA_LAG) -> LinearProjector:
    """
    Fits PCA or TICA on the vectorised corpus. Rows follow user-id order,
    which TICA treats as its time axis.
    """
    ordered = {user_id: rle_map[user_id] for user_id in sorted(rle_map) if rle_map[user_id].values}
    stats = corpus_stats(ordered.values())
    _, matrix, _ = vectorize_corpus(ordered, seq_len, stats)
    if kind is ExtractorKind.PCA:
        return pca_fit(matrix, d, stats)
    if kind is ExtractorKind.TICA:
        return tica_fit(matrix, d, lag, stats)
    raise ConfigurationError(f"{kind.value} is not a linear extractor")


def linear_latents(projector: LinearProjector, rle_map: dict[str, RleSequence]) -> LatentTable:
    kept = {user_id: rle for user_id, rle in rle_map.items() if rle.values}
    if len(kept) < len(rle_map):
        logger.warning(f"Skipping {len(rle_map) - len(kept)} user(s) with empty sequences")
    user_ids, matrix, _ = vectorize_corpus(kept, projector.input_dim, projector.stats)
    return LatentTable.from_matrix(user_ids, project(projector, matrix).reshape(len(user_ids), projector.d))


def vae_latents(model: VaeModel, rle_map: dict[str, RleSequence]) -> LatentTable:
    latents = extract_latent(model, rle_map)
    user_ids = list(latents)
    matrix = np.array([latents[u].values for u in user_ids]).reshape(len(user_ids), model.config.latent_dim)
    return LatentTable.from_matrix(user_ids, matrix)


def handcrafted_table(series_map: dict[str, UserSeries]) -> LatentTable:
    """Raw handcrafted features, columns in their canonical order."""
    user_ids, matrix = handcrafted_matrix(series_map)
    return LatentTable(user_ids=user_ids, matrix=matrix, columns=list(FEATURE_NAMES))


def clustering_matrix(table: LatentTable, kind: ExtractorKind) -> np.ndarray:
    """The matrix handed to clustering: handcrafted columns are z-scored, latents are used as is."""
    if kind is ExtractorKind.HANDCRAFTED:
        return standardize_columns(table.matrix)
    return table.matrix
