from enum import Enum

from pydantic import BaseModel


class Label(str, Enum):
    """Account class; bot is the positive class."""
    BOT = "bot"
    HUMAN = "human"


class Provenance(str, Enum):
    """Why an account received its label."""
    CLUSTERED = "clustered"
    NOISE = "noise"
    BASELINE = "baseline"


class DetectionResult(BaseModel):
    """
    Bot/human decision for every analysed account.
    """
    labels: dict[str, Label]
    provenance: dict[str, Provenance]

    @property
    def bots(self) -> set[str]:
        return {user_id for user_id, label in self.labels.items() if label is Label.BOT}


class MetricsReport(BaseModel):
    """
    Confusion counts and the five derived metrics, bot being the positive class.
    """
    tp: int
    fp: int
    fn: int
    tn: int
    precision: float
    recall: float
    accuracy: float
    f1: float
    mcc: float
    undefined: list[str] = []

    def flat(self) -> dict[str, float | int | list[str]]:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "accuracy": self.accuracy,
            "f1": self.f1,
            "mcc": self.mcc,
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "tn": self.tn,
            "undefined": list(self.undefined),
        }
