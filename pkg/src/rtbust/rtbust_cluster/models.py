from typing import NamedTuple

from pydantic import BaseModel, Field, model_validator

NOISE = -1
# Upper bound for lambda = 1 / distance when distances reach zero.
LAMBDA_CAP = 1e12


class ClusterParams(BaseModel):
    min_cluster_size: int = Field(default=11, ge=2)
    min_samples: int = Field(default=10, ge=1)


class MstEdge(NamedTuple):
    i: int
    j: int
    weight: float


class CondensedRecord(NamedTuple):
    """
    One row of the condensed tree: ``child`` is a point index (< n) falling
    out of ``parent`` or a new cluster label (>= n) split off from it.
    """
    parent: int
    child: int
    lambda_val: float
    size: int


class ClusterLabeling(BaseModel):
    """
    Cluster id per account (``NOISE`` for unclustered ones) and the
    stability of every selected cluster, indexed by cluster id.
    """
    user_ids: list[str]
    labels: list[int]
    stabilities: list[float] = []

    @model_validator(mode="after")
    def _check(self) -> "ClusterLabeling":
        if len(self.user_ids) != len(self.labels):
            raise ValueError(f"{len(self.user_ids)} user ids but {len(self.labels)} labels")
        used = sorted({label for label in self.labels if label != NOISE})
        if used != list(range(len(used))):
            raise ValueError(f"cluster ids must be dense from 0, got {used}")
        if any(label < NOISE for label in self.labels):
            raise ValueError("cluster ids must be >= 0 or NOISE")
        return self

    @property
    def n_clusters(self) -> int:
        return len({label for label in self.labels if label != NOISE})

    @property
    def n_noise(self) -> int:
        return sum(1 for label in self.labels if label == NOISE)

    def stability_of(self, label: int) -> float:
        if label == NOISE or label >= len(self.stabilities):
            return 0.0
        return self.stabilities[label]

    def cluster_sizes(self) -> dict[int, int]:
        sizes: dict[int, int] = {}
        for label in self.labels:
            if label != NOISE:
                sizes[label] = sizes.get(label, 0) + 1
        return sizes
