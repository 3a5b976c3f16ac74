from pathlib import Path

from pydantic import BaseModel, ConfigDict, Field, model_validator

from rtbust.rtbust_cluster.models import ClusterParams
from rtbust.rtbust_detection.models import DetectionResult, MetricsReport
from rtbust.rtbust_features.models import ExtractorKind
from rtbust.rtbust_ingest.models import DEFAULT_WINDOW_DAYS, AnalysisWindow
from rtbust.rtbust_ingest.utils import DEFAULT_MAX_RATE, DEFAULT_MIN_RATE
from rtbust.rtbust_linproj.models import DEFAULT_LATENT_DIM, DEFAULT_SEQ_LEN, DEFAULT_TICA_LAG
from rtbust.rtbust_vae.models import DEFAULT_HIDDEN, VaeConfig

STAGES = ("ingest", "features", "cluster", "detect", "eval")


class PipelineConfig(BaseModel):
    """
    Every knob of a full run. Defaults: 14-day window, 2 to 50 retweets per
    day, an 8-dimensional VAE on 512-step sequences, HDBSCAN with
    min_cluster_size 11 and min_samples 10.
    """
    model_config = ConfigDict(frozen=True)

    events_path: Path
    out_dir: Path
    truth_path: Path | None = None
    window_start: int
    window_days: float = Field(default=DEFAULT_WINDOW_DAYS, gt=0)
    min_rate: float = Field(default=DEFAULT_MIN_RATE, ge=0)
    max_rate: float = Field(default=DEFAULT_MAX_RATE, ge=0)
    strict: bool = False
    extractor: ExtractorKind = ExtractorKind.VAE
    latent_dim: int = Field(default=DEFAULT_LATENT_DIM, gt=0)
    seq_len: int = Field(default=DEFAULT_SEQ_LEN, gt=0)
    tica_lag: int = Field(default=DEFAULT_TICA_LAG, ge=1)
    cluster: ClusterParams = ClusterParams()
    lstm_hidden: int = Field(default=DEFAULT_HIDDEN, gt=0)
    epochs: int = Field(default=50, gt=0)
    batch_size: int = Field(default=64, gt=0)
    learning_rate: float = Field(default=1e-3, gt=0)
    kl_weight: float = Field(default=1.0, gt=0)
    seed: int = Field(default=0, ge=0, lt=2 ** 64)

    @model_validator(mode="after")
    def _check_bands(self) -> "PipelineConfig":
        if self.min_rate > self.max_rate:
            raise ValueError(f"min_rate {self.min_rate} is greater than max_rate {self.max_rate}")
        if self.extractor is ExtractorKind.VAE and self.latent_dim > self.lstm_hidden:
            raise ValueError(f"latent_dim {self.latent_dim} exceeds lstm_hidden {self.lstm_hidden}")
        if self.extractor in (ExtractorKind.PCA, ExtractorKind.TICA) and self.latent_dim > self.seq_len:
            raise ValueError(f"latent_dim {self.latent_dim} exceeds seq_len {self.seq_len}")
        return self

    @property
    def window(self) -> AnalysisWindow:
        return AnalysisWindow.from_days(self.window_start, self.window_days)

    def vae_config(self, latent_dim: int | None = None) -> VaeConfig:
        return VaeConfig(
            latent_dim=latent_dim or self.latent_dim,
            lstm_hidden=self.lstm_hidden,
            max_seq_len=self.seq_len,
            epochs=self.epochs,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            kl_weight=self.kl_weight,
            seed=self.seed,
        )


class StageRecord(BaseModel):
    stage: str
    seconds: float
    records: int


class PipelineResult(BaseModel):
    labels_path: Path
    report_path: Path | None = None
    trace_path: Path
    detection: DetectionResult
    report: MetricsReport | None = None
    stages: list[StageRecord] = []


class SweepPoint(BaseModel):
    extractor: str
    latent_dim: int
    min_cluster_size: int
    n_clusters: int
    f1: float
    mcc: float
    precision: float
    recall: float
