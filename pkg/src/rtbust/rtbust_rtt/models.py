from pydantic import BaseModel, Field, model_validator

# Qualitative 12-colour palette, cycled over the accounts of a group.
PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
    "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#393b79", "#e7969c",
)
CANVAS_SIZE = 600
MARGIN = 50
INSET_BINS = 40


class RttPoint(BaseModel):
    retweet_ts: int
    source_ts: int
    color_index: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _check_causality(self) -> "RttPoint":
        if self.source_ts > self.retweet_ts:
            raise ValueError(f"source at {self.source_ts} is later than its retweet at {self.retweet_ts}")
        return self

    @property
    def delay(self) -> int:
        return self.retweet_ts - self.source_ts


class DelayHistogram(BaseModel):
    """Log10-spaced delay bins; ``counts`` sums to the number of plotted points."""
    edges: list[float]
    counts: list[int]

    @property
    def total(self) -> int:
        return sum(self.counts)


class RttFigure(BaseModel):
    """
    Everything an RTT plot shows: points in data coordinates, the shared
    axis range (both axes use it so the diagonal is y = x), the delay
    inset and an optional zoomed sub-window.
    """
    title: str = ""
    points: list[RttPoint]
    axis_range: tuple[int, int]
    histogram: DelayHistogram
    rug: list[float]
    n_accounts: int = 1
    zoom: tuple[int, int] | None = None

    @model_validator(mode="after")
    def _check_range(self) -> "RttFigure":
        lo, hi = self.axis_range
        if hi <= lo:
            raise ValueError(f"empty axis range {self.axis_range}")
        if self.zoom is not None and self.zoom[1] <= self.zoom[0]:
            raise ValueError(f"empty zoom range {self.zoom}")
        return self

    @property
    def delays(self) -> list[int]:
        return [p.delay for p in self.points]
