import numpy as np
import pytest
from scipy.spatial.distance import pdist

import rtbust.rtbust_vae.utils as vae_utils
from rtbust.exceptions import ConfigurationError, IncompatibleArtifactError, TrainingDivergedError, UndefinedInputError
from rtbust.rtbust_ingest.models import RleSequence
from rtbust.rtbust_ingest.utils import build_user_series, filter_users, rle_encode
from rtbust.rtbust_linproj.models import CorpusStats, FixedVector
from rtbust.rtbust_vae.models import LossBreakdown, VaeConfig, VaeModel
from rtbust.rtbust_vae.network import encode_batch, forward_backward, forward_loss, kl_divergence, reparameterize
from rtbust.rtbust_vae.utils import encode, extract_latent, load_model, loss, save_model, stack_batch, train, train_on_series


def _small_config(**overrides) -> VaeConfig:
    values = dict(latent_dim=2, lstm_hidden=4, max_seq_len=6, epochs=3, batch_size=2, seed=5)
    values.update(overrides)
    return VaeConfig(**values)


def _vectors(lengths, width, seed=0) -> list[FixedVector]:
    rng = np.random.default_rng(seed)
    vectors = []
    for length in lengths:
        values = np.zeros(width)
        values[:length] = rng.normal(size=length)
        vectors.append(FixedVector(values=values, length=length))
    return vectors


def test_config_rejects_latent_wider_than_hidden():
    with pytest.raises(ValueError):
        VaeConfig(latent_dim=8, lstm_hidden=4)


def test_zero_model_encodes_to_standard_normal():
    model = VaeModel.zeros(_small_config())
    mu, logvar = encode_batch(model, np.ones((3, 6)), np.ones((3, 6)))
    assert np.all(mu == 0.0)
    assert np.all(logvar == 0.0)


def test_padding_does_not_change_the_encoding():
    config = _small_config()
    model = VaeModel.initialize(config, np.random.default_rng(1))
    x = np.array([[0.5, -1.0, 2.0, 0.0, 0.0, 0.0]])
    mask = np.array([[1.0, 1.0, 1.0, 0.0, 0.0, 0.0]])
    garbage = x.copy()
    garbage[0, 3:] = [7.0, -3.0, 1.0]
    mu, logvar = encode_batch(model, x, mask)
    mu_g, logvar_g = encode_batch(model, garbage, mask)
    mu_short, _ = encode_batch(model, x[:, :3], mask[:, :3])
    assert np.array_equal(mu, mu_g)
    assert np.array_equal(logvar, logvar_g)
    assert np.allclose(mu, mu_short, atol=0.0)


def test_all_padding_is_undefined():
    model = VaeModel.zeros(_small_config())
    with pytest.raises(UndefinedInputError):
        encode_batch(model, np.zeros((1, 6)), np.zeros((1, 6)))


@pytest.mark.parametrize("mu, logvar, expected", [([[0.0, 0.0]], [[0.0, 0.0]], 0.0), ([[1.0]], [[0.0]], 0.5)])
def test_kl_divergence(mu, logvar, expected):
    assert kl_divergence(np.array(mu), np.array(logvar)) == pytest.approx(expected)


def test_kl_divergence_averages_over_batch():
    assert kl_divergence(np.array([[1.0], [0.0]]), np.zeros((2, 1))) == pytest.approx(0.25)


def test_reparameterize_with_tiny_variance_returns_mean():
    mu = np.array([[1.0, -2.0]])
    z = reparameterize(mu, np.full((1, 2), -30.0), np.random.default_rng(0))
    assert np.allclose(z, mu, atol=1e-5)


def test_reparameterize_moments():
    rng = np.random.default_rng(2)
    mu = np.full((20_000, 1), 2.0)
    z = reparameterize(mu, np.full((20_000, 1), np.log(4.0)), rng)
    assert z.mean() == pytest.approx(2.0, abs=0.05)
    assert z.var() == pytest.approx(4.0, abs=0.2)


def test_gradients_match_finite_differences():
    config = _small_config(kl_weight=0.5)
    model = VaeModel.initialize(config, np.random.default_rng(3))
    rng = np.random.default_rng(4)
    for name in model.params:
        model.params[name] += rng.normal(scale=0.1, size=model.params[name].shape)
    vectors = _vectors([6, 4, 2], 6, seed=5)
    x = np.vstack([v.values for v in vectors])
    mask = np.vstack([v.mask for v in vectors])
    noise = rng.standard_normal((3, config.latent_dim))

    _, grads = forward_backward(model, x, mask, noise)
    eps = 1e-6
    for name, param in model.params.items():
        numeric = np.zeros_like(param)
        for index in np.ndindex(param.shape):
            original = param[index]
            param[index] = original + eps
            plus = forward_loss(model, x, mask, noise).total
            param[index] = original - eps
            minus = forward_loss(model, x, mask, noise).total
            param[index] = original
            numeric[index] = (plus - minus) / (2.0 * eps)
        error = np.linalg.norm(grads[name] - numeric) / max(np.linalg.norm(grads[name]) + np.linalg.norm(numeric), 1e-8)
        assert error <= 1e-4, name


def test_forward_backward_loss_matches_forward_loss():
    config = _small_config()
    model = VaeModel.initialize(config, np.random.default_rng(6))
    vectors = _vectors([6, 3], 6)
    x = np.vstack([v.values for v in vectors])
    mask = np.vstack([v.mask for v in vectors])
    noise = np.random.default_rng(7).standard_normal((2, 2))
    breakdown, _ = forward_backward(model, x, mask, noise)
    assert breakdown == forward_loss(model, x, mask, noise)
    assert breakdown.total == pytest.approx(breakdown.reconstruction + breakdown.kl)


def test_single_sequence_encode_matches_batch_rows():
    model = VaeModel.initialize(_small_config(), np.random.default_rng(8))
    vectors = _vectors([6, 4, 1], 6, seed=9)
    x, mask = stack_batch(vectors)
    mu_batch, logvar_batch = encode_batch(model, x, mask)
    for row, vector in enumerate(vectors):
        mu, logvar = encode(model, vector)
        assert mu.shape == (2,)
        assert np.allclose(mu, mu_batch[row], rtol=0.0, atol=1e-12)
        assert np.allclose(logvar, logvar_batch[row], rtol=0.0, atol=1e-12)


def test_batch_loss_draws_noise_from_the_generator():
    model = VaeModel.initialize(_small_config(), np.random.default_rng(10))
    vectors = _vectors([6, 5, 2], 6, seed=11)
    x, mask = stack_batch(vectors)
    noise = np.random.default_rng(12).standard_normal((3, 2))
    assert loss(model, vectors, np.random.default_rng(12)) == forward_loss(model, x, mask, noise)


def test_training_is_deterministic():
    config = _small_config()
    corpus = _vectors([6, 5, 4, 3, 2], 6, seed=8)
    first = train(config, corpus)
    second = train(config, corpus)
    assert first.loss_trace == second.loss_trace
    assert len(first.loss_trace) == config.epochs
    for name, value in first.model.params.items():
        assert np.array_equal(value, second.model.params[name])


def test_batch_size_larger_than_corpus_is_clamped():
    result = train(_small_config(batch_size=64, epochs=1), _vectors([6, 4], 6))
    assert len(result.loss_trace) == 1


def test_train_rejects_bad_corpus():
    with pytest.raises(ConfigurationError):
        train(_small_config(), [])
    with pytest.raises(ConfigurationError):
        train(_small_config(), _vectors([3], 5))


def test_training_divergence_carries_the_trace(monkeypatch):
    def exploding(model, x, mask, noise):
        grads = {name: np.zeros_like(value) for name, value in model.params.items()}
        return LossBreakdown(total=float("nan"), reconstruction=float("nan"), kl=0.0), grads

    monkeypatch.setattr(vae_utils, "forward_backward", exploding)
    with pytest.raises(TrainingDivergedError) as excinfo:
        train(_small_config(), _vectors([6, 4], 6))
    assert len(excinfo.value.trace) == 1


def test_extract_latent_skips_empty_and_is_repeatable():
    rle_map = {"a": RleSequence(values=[3, -2, 5]), "b": RleSequence(values=[]), "c": RleSequence(values=[-4, 1])}
    model = train_on_series(_small_config(epochs=1), rle_map).model
    latents = extract_latent(model, rle_map)
    assert list(latents) == ["a", "c"]
    assert latents["a"].d == 2
    again = extract_latent(model, rle_map)
    assert np.array_equal(latents["c"].values, again["c"].values)


def test_model_file_is_stable(tmp_path):
    model = VaeModel.initialize(_small_config(), np.random.default_rng(9), CorpusStats(mean=0.3, std=2.5))
    first = tmp_path / "first.model"
    second = tmp_path / "second.model"
    save_model(model, first)
    loaded = load_model(first)
    save_model(loaded, second)
    assert first.read_bytes() == second.read_bytes()
    assert loaded.stats == model.stats
    assert loaded.config.latent_dim == 2


def test_load_model_rejects_corruption(tmp_path):
    path = tmp_path / "vae.model"
    save_model(VaeModel.zeros(_small_config()), path)
    text = path.read_text(encoding="utf-8")

    bad_magic = tmp_path / "bad_magic.model"
    bad_magic.write_text(text.replace("RTBUST-VAE", "RTBUST-PCA", 1), encoding="utf-8")
    with pytest.raises(IncompatibleArtifactError):
        load_model(bad_magic)

    bad_shape = tmp_path / "bad_shape.model"
    bad_shape.write_text(text.replace("h=4", "h=5", 1), encoding="utf-8")
    with pytest.raises(IncompatibleArtifactError):
        load_model(bad_shape)


@pytest.mark.integration
def test_training_lowers_the_loss(small_corpus):
    series_map = filter_users(build_user_series(small_corpus.events, small_corpus.window), 0.0, 1e9)
    base = {user_id: rle_encode(series) for user_id, series in series_map.items()}
    rle_map = {f"{user_id}-{k}": rle for k in range(4) for user_id, rle in base.items()}
    assert len(rle_map) >= 200
    config = VaeConfig(latent_dim=2, lstm_hidden=8, max_seq_len=64, epochs=50, batch_size=32, seed=1)
    trace = train_on_series(config, rle_map).loss_trace
    assert len(trace) == 50
    assert trace[-1] < trace[0]


def _botnet_of(events) -> str | None:
    # Pool tweets are named <botnet>-tw-<i>.
    sources = {e.source_tweet_id.split("-tw-")[0] for e in events if "-tw-" in e.source_tweet_id}
    return sources.pop() if len(sources) == 1 else None


@pytest.mark.integration
def test_botnet_members_sit_closer_than_the_median_pair(small_corpus):
    series_map = filter_users(build_user_series(small_corpus.events, small_corpus.window), 0.0, 1e9)
    rle_map = {user_id: rle_encode(series) for user_id, series in series_map.items()}
    config = VaeConfig(latent_dim=4, lstm_hidden=8, max_seq_len=128, epochs=40, batch_size=16, seed=3)
    model = train_on_series(config, rle_map).model
    latents = extract_latent(model, rle_map)

    user_ids = sorted(latents)
    matrix = np.vstack([latents[user_id].values for user_id in user_ids])
    corpus_median = np.median(pdist(matrix))

    members: dict[str, list[int]] = {}
    for row, user_id in enumerate(user_ids):
        botnet = _botnet_of(series_map[user_id].events)
        if botnet is not None:
            members.setdefault(botnet, []).append(row)
    assert sorted(members) == ["net-a", "net-c"]
    for botnet, rows in members.items():
        assert np.median(pdist(matrix[rows])) < corpus_median, botnet
