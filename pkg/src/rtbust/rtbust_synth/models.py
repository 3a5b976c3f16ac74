from dataclasses import dataclass
from enum import Enum

import numpy as np
from pydantic import BaseModel, Field, model_validator

from rtbust.rtbust_detection.models import Label
from rtbust.rtbust_ingest.models import DEFAULT_WINDOW_DAYS, AnalysisWindow, RetweetEvent

# 2018-06-17 00:00:00 UTC, used only as the default start of synthetic corpora.
SYNTH_WINDOW_START = 1_529_193_600


class BehaviorKind(str, Enum):
    """
    Retweeting patterns: the benign droplet behaviour and the three
    suspicious ones.
    """
    HUMAN = "human"
    STRAIGHT_LINE = "straight_line"
    TRIANGULAR = "triangular"
    WATERFALL = "waterfall"

    @property
    def is_bot(self) -> bool:
        return self is not BehaviorKind.HUMAN


class BehaviorSpec(BaseModel):
    kind: BehaviorKind
    rate_per_day: float = Field(default=10.0, ge=2.0, le=50.0)
    session_period_s: float = Field(default=21_600.0, gt=0)
    session_length_s: float = Field(default=7_200.0, gt=0)
    jitter_s: float = Field(default=30.0, ge=0)
    botnet_id: str | None = None

    @model_validator(mode="after")
    def _check_sessions(self) -> "BehaviorSpec":
        if self.session_length_s >= self.session_period_s:
            raise ValueError(
                f"session_length_s ({self.session_length_s}) must be shorter than "
                f"session_period_s ({self.session_period_s})")
        return self


class AccountGroup(BaseModel):
    """A number of accounts sharing one behaviour (and one botnet pool)."""
    behavior: BehaviorSpec
    count: int = Field(ge=0)
    # When set, each account draws its own rate log-uniformly from this range.
    rate_range: tuple[float, float] | None = None

    @model_validator(mode="after")
    def _check_rate_range(self) -> "AccountGroup":
        if self.rate_range is not None:
            low, high = self.rate_range
            if not 2.0 <= low <= high <= 50.0:
                raise ValueError(f"rate_range {self.rate_range} must lie inside [2, 50]")
        return self


class CorpusSpec(BaseModel):
    groups: list[AccountGroup] = []
    window_start: int = SYNTH_WINDOW_START
    window_days: float = Field(default=DEFAULT_WINDOW_DAYS, gt=0)
    pool_rate_per_day: float = Field(default=600.0, gt=0)
    pool_lookback_s: int = Field(default=3 * 86_400, ge=0)
    pool_authors: int = Field(default=6, ge=1)
    human_authors: int = Field(default=2_000, ge=1)

    @property
    def window(self) -> AnalysisWindow:
        return AnalysisWindow.from_days(self.window_start, self.window_days)

    @property
    def n_accounts(self) -> int:
        return sum(group.count for group in self.groups)

    @classmethod
    def default(cls, bot_fraction: float | None = None) -> "CorpusSpec":
        """
        The acceptance corpus: 200 humans and botnets of 40 straight-line,
        60 triangular and 100 waterfall accounts. With ``bot_fraction`` the
        human count is rescaled so bots make up that share of the accounts.
        """
        n_bots = 40 + 60 + 100
        n_humans = 200
        if bot_fraction is not None:
            if not 0.0 < bot_fraction < 1.0:
                raise ValueError(f"bot_fraction must lie in (0, 1), got {bot_fraction}")
            n_humans = int(round(n_bots * (1.0 - bot_fraction) / bot_fraction))
        return cls(groups=[
            AccountGroup(behavior=BehaviorSpec(kind=BehaviorKind.HUMAN), count=n_humans,
                         rate_range=(3.0, 45.0)),
            AccountGroup(behavior=BehaviorSpec(kind=BehaviorKind.STRAIGHT_LINE, rate_per_day=20.0,
                                               session_period_s=21_600.0, session_length_s=7_200.0,
                                               botnet_id="net-a"), count=40),
            AccountGroup(behavior=BehaviorSpec(kind=BehaviorKind.TRIANGULAR, rate_per_day=15.0,
                                               session_period_s=14_400.0, session_length_s=5_400.0,
                                               botnet_id="net-b"), count=60),
            AccountGroup(behavior=BehaviorSpec(kind=BehaviorKind.WATERFALL, rate_per_day=25.0,
                                               session_period_s=43_200.0, session_length_s=600.0,
                                               botnet_id="net-c"), count=100),
        ])


@dataclass(frozen=True)
class BotnetPool:
    """
    Shared stream of original tweets a botnet retweets from, sorted by
    timestamp with unique timestamps.
    """
    botnet_id: str
    tweet_ids: list[str]
    timestamps: np.ndarray
    authors: list[str]
    # Phase of the botnet's session schedule relative to the window start.
    phase_s: float = 0.0

    def __len__(self) -> int:
        return len(self.tweet_ids)

    def between(self, start: float, stop: float) -> tuple[int, int]:
        """Index range of tweets with start <= ts <= stop."""
        lo = int(np.searchsorted(self.timestamps, start, side="left"))
        hi = int(np.searchsorted(self.timestamps, stop, side="right"))
        return lo, hi


class LabeledCorpus(BaseModel):
    events: list[RetweetEvent]
    truth: dict[str, Label]
    seed: int
    window: AnalysisWindow
