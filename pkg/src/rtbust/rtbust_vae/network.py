"""
Forward and backward passes of the sequence VAE.

Everything works on a batch: ``x`` and ``mask`` are (B, T) arrays, the mask
being 1 on the leading data steps and 0 on the trailing padding. Gradients
are derived by hand (backpropagation through time) and checked against
finite differences in the tests.
"""
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from rtbust.exceptions import UndefinedInputError
from rtbust.rtbust_vae.models import LossBreakdown, VaeModel


@dataclass
class _EncoderCache:
    inputs: np.ndarray      # (T, B, 1 + h): [x_t, h_{t-1}]
    gates: np.ndarray       # (T, B, 4h) after the non-linearities
    c_prev: np.ndarray      # (T, B, h)
    c_new: np.ndarray       # (T, B, h), candidate cell before masking
    mask: np.ndarray        # (T, B, 1)
    h_last: np.ndarray      # (B, h)


@dataclass
class _DecoderCache:
    h_prev: np.ndarray      # (T, B, h)
    c_prev: np.ndarray
    gates: np.ndarray       # (T, B, 4h)
    c: np.ndarray
    h: np.ndarray


def _lstm_gates(pre: np.ndarray, h: int) -> np.ndarray:
    gates = np.empty_like(pre)
    gates[:, :3 * h] = expit(pre[:, :3 * h])
    gates[:, 3 * h:] = np.tanh(pre[:, 3 * h:])
    return gates


def _gate_grads(gates: np.ndarray, c_prev: np.ndarray, c: np.ndarray, dh: np.ndarray, dc: np.ndarray,
                h: int) -> tuple[np.ndarray, np.ndarray]:
    """Gradient w.r.t. the gate pre-activations and the previous cell state."""
    i, f, o, g = gates[:, :h], gates[:, h:2 * h], gates[:, 2 * h:3 * h], gates[:, 3 * h:]
    tanh_c = np.tanh(c)
    dc = dc + dh * o * (1.0 - tanh_c ** 2)
    d_pre = np.empty_like(gates)
    d_pre[:, :h] = dc * g * i * (1.0 - i)
    d_pre[:, h:2 * h] = dc * c_prev * f * (1.0 - f)
    d_pre[:, 2 * h:3 * h] = dh * tanh_c * o * (1.0 - o)
    d_pre[:, 3 * h:] = dc * i * (1.0 - g ** 2)
    return d_pre, dc * f


def _check_mask(mask: np.ndarray) -> None:
    lengths = mask.sum(axis=1)
    if np.any(lengths == 0):
        raise UndefinedInputError(f"{int(np.count_nonzero(lengths == 0))} sequence(s) are all padding")


def _encode(params: dict[str, np.ndarray], x: np.ndarray, mask: np.ndarray) -> _EncoderCache:
    batch, steps = x.shape
    w, b = params["enc_W"], params["enc_b"]
    h = w.shape[0] - 1
    inputs = np.empty((steps, batch, 1 + h))
    gates = np.empty((steps, batch, 4 * h))
    c_prev_all = np.empty((steps, batch, h))
    c_new_all = np.empty((steps, batch, h))
    m_all = mask.T[:, :, None].astype(np.float64)

    h_t = np.zeros((batch, h))
    c_t = np.zeros((batch, h))
    for t in range(steps):
        inputs[t, :, 0] = x[:, t]
        inputs[t, :, 1:] = h_t
        g_t = _lstm_gates(inputs[t] @ w + b, h)
        c_new = g_t[:, h:2 * h] * c_t + g_t[:, :h] * g_t[:, 3 * h:]
        h_new = g_t[:, 2 * h:3 * h] * np.tanh(c_new)
        gates[t], c_prev_all[t], c_new_all[t] = g_t, c_t, c_new
        m = m_all[t]
        # Padding steps carry the state through unchanged.
        h_t = m * h_new + (1.0 - m) * h_t
        c_t = m * c_new + (1.0 - m) * c_t
    return _EncoderCache(inputs, gates, c_prev_all, c_new_all, m_all, h_t)


def encode_batch(model: VaeModel, x: np.ndarray, mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """
    Runs the encoder over a batch.

    Returns:
        tuple: mu and logvar, each (B, d).

    Raises:
        UndefinedInputError: If a sequence is all padding.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    mask = np.atleast_2d(np.asarray(mask, dtype=np.float64))
    _check_mask(mask)
    p = model.params
    h_last = _encode(p, x, mask).h_last
    return h_last @ p["W_mu"] + p["b_mu"], h_last @ p["W_logvar"] + p["b_logvar"]


def reparameterize(mu: np.ndarray, logvar: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """z = mu + exp(logvar / 2) * eps with eps ~ N(0, I)."""
    mu = np.asarray(mu, dtype=np.float64)
    logvar = np.asarray(logvar, dtype=np.float64)
    if mu.shape != logvar.shape:
        raise ValueError(f"mu {mu.shape} and logvar {logvar.shape} differ in shape")
    return mu + np.exp(0.5 * logvar) * rng.standard_normal(mu.shape)


def kl_divergence(mu: np.ndarray, logvar: np.ndarray) -> float:
    """KL(N(mu, exp(logvar)) || N(0, I)), summed over dimensions, averaged over the batch."""
    mu = np.atleast_2d(np.asarray(mu, dtype=np.float64))
    logvar = np.atleast_2d(np.asarray(logvar, dtype=np.float64))
    per_sample = 0.5 * np.sum(mu ** 2 + np.exp(logvar) - logvar - 1.0, axis=1)
    return float(per_sample.mean())


def reconstruction_error(y: np.ndarray, x: np.ndarray, mask: np.ndarray) -> float:
    """Mean squared error over the non-padded steps of the batch."""
    return float(np.sum(mask * (y - x) ** 2) / np.sum(mask))


def _decode(params: dict[str, np.ndarray], z: np.ndarray, steps: int) -> tuple[np.ndarray, _DecoderCache]:
    u, b = params["dec_U"], params["dec_b"]
    h = u.shape[0]
    batch = z.shape[0]
    h_t = z @ params["W_zh"] + params["b_zh"]
    c_t = z @ params["W_zc"] + params["b_zc"]
    cache = _DecoderCache(
        h_prev=np.empty((steps, batch, h)), c_prev=np.empty((steps, batch, h)),
        gates=np.empty((steps, batch, 4 * h)), c=np.empty((steps, batch, h)), h=np.empty((steps, batch, h)),
    )
    for t in range(steps):
        g_t = _lstm_gates(h_t @ u + b, h)
        cache.h_prev[t], cache.c_prev[t], cache.gates[t] = h_t, c_t, g_t
        c_t = g_t[:, h:2 * h] * c_t + g_t[:, :h] * g_t[:, 3 * h:]
        h_t = g_t[:, 2 * h:3 * h] * np.tanh(c_t)
        cache.c[t], cache.h[t] = c_t, h_t
    y = (cache.h @ params["W_out"])[:, :, 0].T + params["b_out"][0]
    return y, cache


def _trim(x: np.ndarray, mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # Steps past the longest sequence affect neither encoder nor loss.
    steps = int(mask.sum(axis=1).max())
    return x[:, :steps], mask[:, :steps]


def forward_loss(model: VaeModel, x: np.ndarray, mask: np.ndarray, noise: np.ndarray) -> LossBreakdown:
    """Loss of a batch for fixed reparameterisation noise (B, d)."""
    x, mask = _trim(np.asarray(x, dtype=np.float64), np.asarray(mask, dtype=np.float64))
    _check_mask(mask)
    p = model.params
    h_last = _encode(p, x, mask).h_last
    mu = h_last @ p["W_mu"] + p["b_mu"]
    logvar = h_last @ p["W_logvar"] + p["b_logvar"]
    z = mu + np.exp(0.5 * logvar) * noise
    y, _ = _decode(p, z, x.shape[1])
    recon = reconstruction_error(y, x, mask)
    kl = kl_divergence(mu, logvar)
    return LossBreakdown(total=recon + model.config.kl_weight * kl, reconstruction=recon, kl=kl)


def forward_backward(model: VaeModel, x: np.ndarray, mask: np.ndarray,
                     noise: np.ndarray) -> tuple[LossBreakdown, dict[str, np.ndarray]]:
    """
    Loss of a batch and the gradient of its total w.r.t. every parameter.

    Args:
        model: The VAE.
        x: (B, T) normalised sequences, zero on padding.
        mask: (B, T) with ones on data steps.
        noise: (B, d) standard normal draws used by the reparameterisation.

    Returns:
        tuple: the loss breakdown and a gradient per parameter name.
    """
    x, mask = _trim(np.asarray(x, dtype=np.float64), np.asarray(mask, dtype=np.float64))
    _check_mask(mask)
    p = model.params
    beta = model.config.kl_weight
    batch, steps = x.shape
    h = p["dec_U"].shape[0]

    enc = _encode(p, x, mask)
    mu = enc.h_last @ p["W_mu"] + p["b_mu"]
    logvar = enc.h_last @ p["W_logvar"] + p["b_logvar"]
    sigma = np.exp(0.5 * logvar)
    z = mu + sigma * noise
    y, dec = _decode(p, z, steps)

    n_valid = np.sum(mask)
    recon = float(np.sum(mask * (y - x) ** 2) / n_valid)
    kl = kl_divergence(mu, logvar)
    breakdown = LossBreakdown(total=recon + beta * kl, reconstruction=recon, kl=kl)

    grads = {name: np.zeros_like(value) for name, value in p.items()}

    # Decoder output map and recurrence.
    dy = (2.0 / n_valid) * mask * (y - x)                  # (B, T)
    dy_steps = dy.T[:, :, None]                            # (T, B, 1)
    grads["W_out"] = np.einsum("tbh,tbo->ho", dec.h, dy_steps)
    grads["b_out"] = np.array([dy.sum()])
    dh_from_out = dy_steps @ p["W_out"].T                  # (T, B, h)

    dh_next = np.zeros((batch, h))
    dc_next = np.zeros((batch, h))
    for t in range(steps - 1, -1, -1):
        dh = dh_next + dh_from_out[t]
        d_pre, dc_next = _gate_grads(dec.gates[t], dec.c_prev[t], dec.c[t], dh, dc_next, h)
        grads["dec_U"] += dec.h_prev[t].T @ d_pre
        grads["dec_b"] += d_pre.sum(axis=0)
        dh_next = d_pre @ p["dec_U"].T
    dh0, dc0 = dh_next, dc_next

    grads["W_zh"] = z.T @ dh0
    grads["b_zh"] = dh0.sum(axis=0)
    grads["W_zc"] = z.T @ dc0
    grads["b_zc"] = dc0.sum(axis=0)
    dz = dh0 @ p["W_zh"].T + dc0 @ p["W_zc"].T

    # Reparameterisation and KL.
    dmu = dz + beta * mu / batch
    dlogvar = dz * noise * 0.5 * sigma + beta * 0.5 * (np.exp(logvar) - 1.0) / batch
    grads["W_mu"] = enc.h_last.T @ dmu
    grads["b_mu"] = dmu.sum(axis=0)
    grads["W_logvar"] = enc.h_last.T @ dlogvar
    grads["b_logvar"] = dlogvar.sum(axis=0)

    # Encoder, with masked steps passing gradients straight through.
    dh = dmu @ p["W_mu"].T + dlogvar @ p["W_logvar"].T
    dc = np.zeros((batch, h))
    w_h = p["enc_W"][1:]
    for t in range(steps - 1, -1, -1):
        m = enc.mask[t]
        d_pre, dc_prev = _gate_grads(enc.gates[t], enc.c_prev[t], enc.c_new[t], m * dh, m * dc, h)
        grads["enc_W"] += enc.inputs[t].T @ d_pre
        grads["enc_b"] += d_pre.sum(axis=0)
        dh = d_pre @ w_h.T + (1.0 - m) * dh
        dc = dc_prev + (1.0 - m) * dc

    return breakdown, grads
