import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

SECONDS_PER_DAY = 86_400
DEFAULT_WINDOW_DAYS = 14


class RetweetEvent(BaseModel):
    """
    One retweet: who retweeted, when, which original tweet and when that
    original tweet was published.
    """
    model_config = ConfigDict(frozen=True)

    user_id: str
    retweet_id: str
    retweet_ts: int
    source_tweet_id: str
    source_ts: int
    source_user_id: str | None = None

    @property
    def delay(self) -> int:
        return self.retweet_ts - self.source_ts

    @property
    def author(self) -> str:
        """Author of the retweeted tweet, falling back to the tweet id."""
        return self.source_user_id if self.source_user_id is not None else self.source_tweet_id


class AnalysisWindow(BaseModel):
    """Half-open analysis window [t_ref, t_ref + duration_s)."""
    model_config = ConfigDict(frozen=True)

    t_ref: int
    duration_s: int = Field(default=DEFAULT_WINDOW_DAYS * SECONDS_PER_DAY, gt=0)

    @classmethod
    def from_days(cls, t_ref: int, days: float = DEFAULT_WINDOW_DAYS) -> "AnalysisWindow":
        return cls(t_ref=t_ref, duration_s=int(round(days * SECONDS_PER_DAY)))

    @property
    def end(self) -> int:
        return self.t_ref + self.duration_s

    @property
    def days(self) -> float:
        return self.duration_s / SECONDS_PER_DAY

    def contains(self, ts: int) -> bool:
        return self.t_ref <= ts < self.end


def event_sort_key(event: RetweetEvent) -> tuple[int, str]:
    return event.retweet_ts, event.retweet_id


class UserSeries(BaseModel):
    """A user's retweets inside the analysis window, in timestamp order."""
    user_id: str
    events: list[RetweetEvent]
    window: AnalysisWindow

    @model_validator(mode="after")
    def _check_order_and_window(self) -> "UserSeries":
        keys = [event_sort_key(e) for e in self.events]
        if keys != sorted(keys):
            raise ValueError(f"events of user {self.user_id} are not sorted by (retweet_ts, retweet_id)")
        for event in self.events:
            if not self.window.contains(event.retweet_ts):
                raise ValueError(f"event {event.retweet_id} of user {self.user_id} lies outside the window")
        return self

    @property
    def n_retweets(self) -> int:
        return len(self.events)

    @property
    def rate_per_day(self) -> float:
        return self.n_retweets / self.window.days


class RleSequence(BaseModel):
    """
    Run-length compressed retweet time series: positive entries are
    |t(x) - t_ref| of retweeted tweets, negative entries are minus the length
    of a run of empty seconds.
    """
    values: list[int]

    @property
    def n_retweets(self) -> int:
        return sum(1 for v in self.values if v > 0)

    @property
    def covered_seconds(self) -> int:
        return sum(1 if v > 0 else -v for v in self.values)


class SparseSeries(BaseModel):
    """Decoded per-second series kept sparse: (second offset, value) pairs."""
    seconds: list[int]
    values: list[int]
    length: int

    def to_dense(self) -> np.ndarray:
        dense = np.zeros(self.length, dtype=np.int64)
        dense[np.asarray(self.seconds, dtype=np.int64)] = np.asarray(self.values, dtype=np.int64)
        return dense


class ParseReport(BaseModel):
    """Counters filled in by parse_events."""
    n_lines: int = 0
    n_events: int = 0
    n_malformed: int = 0
    n_causality: int = 0
    n_blank: int = 0
