import numpy as np
from pydantic import BaseModel, Field

FEATURE_NAMES = (
    "rt_users_entropy",
    "rt_days_entropy",
    "rt_rate",
    "daily_mean_rts",
    "rt_days",
    "min_irt",
    "mean_irt",
    "stdev_irt",
    "min_rt_delay",
    "mean_rt_delay",
    "stdev_rt_delay",
    "rt_sessions",
)


class HandcraftedVector(BaseModel):
    """The twelve handcrafted retweet-behaviour features of one account."""
    rt_users_entropy: float = Field(ge=0)
    rt_days_entropy: float = Field(ge=0)
    rt_rate: float = Field(ge=0)
    daily_mean_rts: float = Field(ge=0)
    rt_days: int = Field(ge=0)
    min_irt: float = Field(ge=0)
    mean_irt: float = Field(ge=0)
    stdev_irt: float = Field(ge=0)
    min_rt_delay: float = Field(ge=0)
    mean_rt_delay: float = Field(ge=0)
    stdev_rt_delay: float = Field(ge=0)
    rt_sessions: int = Field(ge=0)

    def as_array(self) -> np.ndarray:
        return np.array([float(getattr(self, name)) for name in FEATURE_NAMES], dtype=np.float64)
