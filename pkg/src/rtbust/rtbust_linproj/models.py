from enum import Enum

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

DEFAULT_SEQ_LEN = 512
DEFAULT_LATENT_DIM = 8
DEFAULT_TICA_LAG = 1
TICA_EPSILON = 1e-6


class CorpusStats(BaseModel):
    """Mean and standard deviation of signed-log RLE values over a corpus."""
    model_config = ConfigDict(frozen=True)

    mean: float = 0.0
    std: float = Field(default=1.0, gt=0)


class FixedVector(BaseModel):
    """
    A sequence normalised and padded/truncated to exactly L entries.
    ``length`` counts the leading entries that carry data; the rest is padding.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True)

    values: np.ndarray
    length: int

    @property
    def mask(self) -> np.ndarray:
        mask = np.zeros(self.values.shape[0], dtype=np.float64)
        mask[:self.length] = 1.0
        return mask


class ProjectorKind(str, Enum):
    PCA = "pca"
    TICA = "tica"


class LinearProjector(BaseModel):
    """Fitted linear feature extractor: latent = (x - mean) @ basis."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    kind: ProjectorKind
    mean: np.ndarray
    basis: np.ndarray
    eigenvalues: np.ndarray
    lag: int = 0
    explained_variance_ratio: np.ndarray | None = None
    # Normalisation the projector was fitted under.
    stats: CorpusStats = CorpusStats()

    @property
    def d(self) -> int:
        return int(self.basis.shape[1])

    @property
    def input_dim(self) -> int:
        return int(self.basis.shape[0])
