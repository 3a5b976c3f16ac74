from enum import Enum

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator


class ExtractorKind(str, Enum):
    VAE = "vae"
    PCA = "pca"
    TICA = "tica"
    HANDCRAFTED = "handcrafted"


class LatentTable(BaseModel):
    """
    One feature vector per account, rows aligned with ``user_ids``.
    ``columns`` names the feature columns written to CSV.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True)

    user_ids: list[str]
    matrix: np.ndarray
    columns: list[str]

    @model_validator(mode="after")
    def _check_shape(self) -> "LatentTable":
        if self.matrix.ndim != 2:
            raise ValueError(f"latent matrix must be 2-D, got shape {self.matrix.shape}")
        if self.matrix.shape != (len(self.user_ids), len(self.columns)):
            raise ValueError(f"latent matrix {self.matrix.shape} does not match "
                             f"{len(self.user_ids)} users x {len(self.columns)} columns")
        if len(set(self.user_ids)) != len(self.user_ids):
            raise ValueError("duplicate user ids in latent table")
        return self

    @property
    def d(self) -> int:
        return len(self.columns)

    def __len__(self) -> int:
        return len(self.user_ids)

    @classmethod
    def from_matrix(cls, user_ids: list[str], matrix: np.ndarray) -> "LatentTable":
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.ndim == 1:
            matrix = matrix.reshape(-1, 1)
        return cls(user_ids=user_ids, matrix=matrix, columns=[f"z{i}" for i in range(matrix.shape[1])])
