import logging
import time
from pathlib import Path
from typing import Sequence

import numpy as np

from rtbust.artifacts import load_tensor_file, require_tensors, save_tensor_file
from rtbust.exceptions import ConfigurationError, IncompatibleArtifactError, TrainingDivergedError
from rtbust.rtbust_ingest.models import RleSequence
from rtbust.rtbust_linproj.models import CorpusStats, FixedVector
from rtbust.rtbust_linproj.utils import corpus_stats, vectorize
from rtbust.rtbust_vae.models import (
    ADAM_BETAS,
    ADAM_EPSILON,
    DIVERGENCE_THRESHOLD,
    GRADIENT_CLIP_NORM,
    LatentVector,
    LossBreakdown,
    TrainingResult,
    VaeConfig,
    VaeModel,
    parameter_shapes,
)
from rtbust.rtbust_vae.network import encode_batch, forward_backward, forward_loss

logger = logging.getLogger(__name__)

VAE_MAGIC = "RTBUST-VAE"
INFERENCE_BATCH = 256


def stack_batch(vectors: Sequence[FixedVector]) -> tuple[np.ndarray, np.ndarray]:
    """Stacks fixed vectors into (B, L) value and mask arrays."""
    if not vectors:
        raise ConfigurationError("cannot stack an empty batch")
    x = np.vstack([v.values for v in vectors])
    mask = np.vstack([v.mask for v in vectors])
    return x, mask


def encode(model: VaeModel, vector: FixedVector) -> tuple[np.ndarray, np.ndarray]:
    """Encoder mean and log-variance of a single sequence."""
    mu, logvar = encode_batch(model, vector.values[None, :], vector.mask[None, :])
    return mu[0], logvar[0]


def loss(model: VaeModel, batch: Sequence[FixedVector], rng: np.random.Generator) -> LossBreakdown:
    x, mask = stack_batch(batch)
    noise = rng.standard_normal((x.shape[0], model.config.latent_dim))
    return forward_loss(model, x, mask, noise)


class AdamOptimizer:
    """Adaptive moment estimation with bias correction, one state per parameter."""

    def __init__(self, params: dict[str, np.ndarray], learning_rate: float):
        self.learning_rate = learning_rate
        self.beta1, self.beta2 = ADAM_BETAS
        self.step_count = 0
        self.m = {name: np.zeros_like(value) for name, value in params.items()}
        self.v = {name: np.zeros_like(value) for name, value in params.items()}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.step_count += 1
        correction1 = 1.0 - self.beta1 ** self.step_count
        correction2 = 1.0 - self.beta2 ** self.step_count
        for name in params:
            g = grads[name]
            self.m[name] = self.beta1 * self.m[name] + (1.0 - self.beta1) * g
            self.v[name] = self.beta2 * self.v[name] + (1.0 - self.beta2) * g * g
            m_hat = self.m[name] / correction1
            v_hat = self.v[name] / correction2
            params[name] -= self.learning_rate * m_hat / (np.sqrt(v_hat) + ADAM_EPSILON)


def clip_gradients(grads: dict[str, np.ndarray], max_norm: float = GRADIENT_CLIP_NORM) -> float:
    """Scales all gradients in place so their global norm is at most max_norm; returns the norm before clipping."""
    norm = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))
    if norm > max_norm:
        scale = max_norm / norm
        for g in grads.values():
            g *= scale
    return norm


def train(config: VaeConfig, corpus: Sequence[FixedVector], stats: CorpusStats | None = None) -> TrainingResult:
    """
    Trains the VAE with mini-batch Adam on a seeded permutation of the corpus.

    Args:
        config: Architecture and optimisation settings; ``config.seed`` fixes
            initialisation, batch order and reparameterisation noise.
        corpus: Vectorised sequences, all of length ``config.max_seq_len``.
        stats: Normalisation used to vectorise the corpus, stored in the model.

    Returns:
        TrainingResult: The model and its mean total loss per epoch.

    Raises:
        ConfigurationError: On an empty corpus or a sequence-length mismatch.
        TrainingDivergedError: If a batch loss exceeds 1e6 or is not finite.
    """
    if not corpus:
        raise ConfigurationError("cannot train on an empty corpus")
    x_all, mask_all = stack_batch(corpus)
    if x_all.shape[1] != config.max_seq_len:
        raise ConfigurationError(f"sequences have length {x_all.shape[1]}, config expects {config.max_seq_len}")
    n = x_all.shape[0]
    batch_size = config.batch_size
    if n < batch_size:
        logger.warning(f"Corpus of {n} sequences is smaller than batch_size {batch_size}, using one batch of {n}")
        batch_size = n

    rng = np.random.default_rng(config.seed)
    model = VaeModel.initialize(config, rng, stats)
    optimizer = AdamOptimizer(model.params, config.learning_rate)
    trace: list[float] = []

    logger.info(f"Training VAE d={config.latent_dim} h={config.lstm_hidden} L={config.max_seq_len} "
                f"on {n} sequences for {config.epochs} epochs (seed {config.seed})")
    for epoch in range(config.epochs):
        started = time.perf_counter()
        order = rng.permutation(n)
        weighted = 0.0
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            noise = rng.standard_normal((idx.shape[0], config.latent_dim))
            breakdown, grads = forward_backward(model, x_all[idx], mask_all[idx], noise)
            if not np.isfinite(breakdown.total) or breakdown.total > DIVERGENCE_THRESHOLD:
                trace.append(breakdown.total)
                logger.error(f"Training diverged at epoch {epoch}: loss {breakdown.total}")
                raise TrainingDivergedError(f"VAE training diverged at epoch {epoch} (loss {breakdown.total})",
                                            trace)
            clip_gradients(grads)
            optimizer.step(model.params, grads)
            weighted += breakdown.total * idx.shape[0]
        trace.append(weighted / n)
        logger.info(f"Epoch {epoch + 1}/{config.epochs}: loss {trace[-1]:.6f} "
                    f"({time.perf_counter() - started:.1f}s)")
    return TrainingResult(model=model, loss_trace=trace)


def train_on_series(config: VaeConfig, rle_map: dict[str, RleSequence]) -> TrainingResult:
    """Vectorises the corpus under its own statistics and trains on the non-empty sequences."""
    stats = corpus_stats(rle_map.values())
    corpus = [vectorize(rle, config.max_seq_len, stats) for rle in rle_map.values() if rle.values]
    return train(config, corpus, stats)


def extract_latent(model: VaeModel, rle_map: dict[str, RleSequence]) -> dict[str, LatentVector]:
    """
    Encoder means of every account; empty sequences are skipped with a warning.
    No sampling happens at inference, so repeated calls agree exactly.
    """
    user_ids: list[str] = []
    vectors: list[FixedVector] = []
    for user_id, rle in rle_map.items():
        if not rle.values:
            logger.warning(f"Skipping user {user_id}: empty sequence")
            continue
        user_ids.append(user_id)
        vectors.append(vectorize(rle, model.config.max_seq_len, model.stats))

    latents: dict[str, LatentVector] = {}
    for start in range(0, len(vectors), INFERENCE_BATCH):
        x, mask = stack_batch(vectors[start:start + INFERENCE_BATCH])
        mu, _ = encode_batch(model, x, mask)
        for offset, row in enumerate(mu):
            user_id = user_ids[start + offset]
            latents[user_id] = LatentVector(user_id=user_id, values=row)
    logger.info(f"Extracted {len(latents)} latent vectors of dimension {model.config.latent_dim}")
    return latents


def save_model(model: VaeModel, path: str | Path) -> None:
    config = model.config
    fields = {"d": config.latent_dim, "h": config.lstm_hidden, "L": config.max_seq_len}
    tensors = {name: model.params[name] for name in parameter_shapes(config)}
    tensors["norm_stats"] = np.array([model.stats.mean, model.stats.std])
    save_tensor_file(path, VAE_MAGIC, fields, tensors)
    logger.info(f"Saved VAE model to {path}")


def load_model(path: str | Path) -> VaeModel:
    """
    Raises:
        InputNotFoundError: If the file is missing.
        IncompatibleArtifactError: On a wrong header or missing / misshapen tensors.
    """
    fields, tensors = load_tensor_file(path, VAE_MAGIC)
    try:
        config = VaeConfig(latent_dim=int(fields["d"]), lstm_hidden=int(fields["h"]), max_seq_len=int(fields["L"]))
    except (KeyError, ValueError) as e:
        raise IncompatibleArtifactError(f"{path}: invalid VAE header fields {fields}") from e
    expected = dict(parameter_shapes(config))
    expected["norm_stats"] = (2,)
    require_tensors(tensors, expected, str(path))
    norm = tensors["norm_stats"]
    try:
        stats = CorpusStats(mean=float(norm[0]), std=float(norm[1]))
        return VaeModel(config=config, params={name: tensors[name] for name in parameter_shapes(config)},
                        stats=stats)
    except ValueError as e:
        raise IncompatibleArtifactError(f"{path}: {e}") from e
