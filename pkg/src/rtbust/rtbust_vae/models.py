import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from rtbust.rtbust_linproj.models import DEFAULT_LATENT_DIM, DEFAULT_SEQ_LEN, CorpusStats

DEFAULT_HIDDEN = 32
GRADIENT_CLIP_NORM = 5.0
DIVERGENCE_THRESHOLD = 1e6
ADAM_BETAS = (0.9, 0.999)
ADAM_EPSILON = 1e-8

# Gate blocks inside every 4h-wide LSTM weight matrix, in this order.
GATES = ("input", "forget", "output", "cell")


class VaeConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    latent_dim: int = Field(default=DEFAULT_LATENT_DIM, gt=0)
    lstm_hidden: int = Field(default=DEFAULT_HIDDEN, gt=0)
    max_seq_len: int = Field(default=DEFAULT_SEQ_LEN, gt=0)
    epochs: int = Field(default=50, gt=0)
    batch_size: int = Field(default=64, gt=0)
    learning_rate: float = Field(default=1e-3, gt=0)
    kl_weight: float = Field(default=1.0, gt=0)
    seed: int = Field(default=0, ge=0, lt=2 ** 64)

    @model_validator(mode="after")
    def _check_latent_dim(self) -> "VaeConfig":
        if self.latent_dim > self.lstm_hidden:
            raise ValueError(f"latent_dim ({self.latent_dim}) must not exceed lstm_hidden ({self.lstm_hidden})")
        return self


def parameter_shapes(config: VaeConfig) -> dict[str, tuple[int, ...]]:
    """Name and shape of every trainable tensor, in persistence order."""
    h, d = config.lstm_hidden, config.latent_dim
    return {
        "enc_W": (1 + h, 4 * h),
        "enc_b": (4 * h,),
        "W_mu": (h, d),
        "b_mu": (d,),
        "W_logvar": (h, d),
        "b_logvar": (d,),
        "W_zh": (d, h),
        "b_zh": (h,),
        "W_zc": (d, h),
        "b_zc": (h,),
        "dec_U": (h, 4 * h),
        "dec_b": (4 * h,),
        "W_out": (h, 1),
        "b_out": (1,),
    }


class VaeModel(BaseModel):
    """
    Encoder LSTM (one input per step, weights stacked as [x; h]), the two
    heads producing mu and log-variance, the z -> (h0, c0) maps, the decoder
    LSTM with zero inputs and its per-step scalar output map, plus the
    normalisation the model was trained under.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True)

    config: VaeConfig
    params: dict[str, np.ndarray]
    stats: CorpusStats = CorpusStats()

    @model_validator(mode="after")
    def _check_params(self) -> "VaeModel":
        for name, shape in parameter_shapes(self.config).items():
            if name not in self.params:
                raise ValueError(f"missing parameter '{name}'")
            if self.params[name].shape != shape:
                raise ValueError(f"parameter '{name}' has shape {self.params[name].shape}, expected {shape}")
            if not np.all(np.isfinite(self.params[name])):
                raise ValueError(f"parameter '{name}' holds non-finite values")
        return self

    @classmethod
    def zeros(cls, config: VaeConfig, stats: CorpusStats | None = None) -> "VaeModel":
        params = {name: np.zeros(shape) for name, shape in parameter_shapes(config).items()}
        return cls(config=config, params=params, stats=stats or CorpusStats())

    @classmethod
    def initialize(cls, config: VaeConfig, rng: np.random.Generator, stats: CorpusStats | None = None) -> "VaeModel":
        """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases, forget-gate bias 1."""
        h = config.lstm_hidden
        params = {}
        for name, shape in parameter_shapes(config).items():
            if name.startswith("b_") or name.endswith("_b"):
                params[name] = np.zeros(shape)
                continue
            bound = 1.0 / np.sqrt(shape[0])
            params[name] = rng.uniform(-bound, bound, size=shape)
        params["enc_b"][h:2 * h] = 1.0
        params["dec_b"][h:2 * h] = 1.0
        return cls(config=config, params=params, stats=stats or CorpusStats())

    def copy(self) -> "VaeModel":
        return VaeModel(config=self.config, params={k: v.copy() for k, v in self.params.items()}, stats=self.stats)


class LatentVector(BaseModel):
    """An account's feature vector: the encoder mean."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    user_id: str
    values: np.ndarray

    @property
    def d(self) -> int:
        return int(self.values.shape[0])


class LossBreakdown(BaseModel):
    total: float
    reconstruction: float
    kl: float


class TrainingResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    model: VaeModel
    # Mean total loss per epoch, in epoch order.
    loss_trace: list[float]
