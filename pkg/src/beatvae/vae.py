"""Linear auto-encoder and beta-VAE with hand-written backpropagation.

Layout (all activations linear)::

    AE:       x(30) -> enc1(20) -> enc2(10) -> dec1(20) -> dec2(30)
    beta-VAE: x(30) -> enc1(20) -> {mu_head(10), logvar_head(10)}
              -> z = mu + exp(logvar / 2) * noise -> dec1(20) -> dec2(30)

The VAE's posterior scale is parameterized as a log-variance.
"""
from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .nncore import DenseLayer, dense_backward, dense_forward, rmse_loss

N_SAMPLES = 30
N_INTERMEDIATE = 20
N_EMBED = 10


class _LinearModel:
    layer_names: tuple = ()
    kind = ""

    def layers(self):
        return [getattr(self, name) for name in self.layer_names]

    def params(self):
        """Parameter arrays in canonical order (W, b per layer)."""
        out = []
        for layer in self.layers():
            out.extend([layer.weights, layer.bias])
        return out

    def shapes(self):
        return [p.shape for p in self.params()]

    def copy(self):
        return type(self)(*[layer.copy() for layer in self.layers()])

    def set_params(self, arrays):
        arrays = list(arrays)
        if len(arrays) != 2 * len(self.layer_names):
            raise ShapeError(f"expected {2 * len(self.layer_names)} arrays, got {len(arrays)}")
        for i, layer in enumerate(self.layers()):
            w, b = arrays[2 * i], arrays[2 * i + 1]
            if w.shape != layer.weights.shape or b.shape != layer.bias.shape:
                raise ShapeError(f"parameter shape mismatch in layer {self.layer_names[i]}")
            layer.weights[...] = w
            layer.bias[...] = b

    def decode(self, z):
        z = np.asarray(z, dtype=np.float64)
        if z.ndim == 1:
            return self.decode(z[None, :])[0]
        return dense_forward(self.dec2, dense_forward(self.dec1, z))


@dataclass(eq=False)
class AeModel(_LinearModel):
    enc1: DenseLayer
    enc2: DenseLayer
    dec1: DenseLayer
    dec2: DenseLayer

    layer_names = ("enc1", "enc2", "dec1", "dec2")
    kind = "ae"

    @classmethod
    def init(cls, rng, n_samples=N_SAMPLES, n_intermediate=N_INTERMEDIATE, n_embed=N_EMBED):
        return cls(
            DenseLayer.glorot(n_samples, n_intermediate, rng),
            DenseLayer.glorot(n_intermediate, n_embed, rng),
            DenseLayer.glorot(n_embed, n_intermediate, rng),
            DenseLayer.glorot(n_intermediate, n_samples, rng),
        )

    @property
    def n_embed(self):
        return self.enc2.out_dim

    def encode(self, x):
        return dense_forward(self.enc2, dense_forward(self.enc1, x))


@dataclass(eq=False)
class VaeModel(_LinearModel):
    enc1: DenseLayer
    mu_head: DenseLayer
    logvar_head: DenseLayer
    dec1: DenseLayer
    dec2: DenseLayer

    layer_names = ("enc1", "mu_head", "logvar_head", "dec1", "dec2")
    kind = "beta-vae"

    @classmethod
    def init(cls, rng, n_samples=N_SAMPLES, n_intermediate=N_INTERMEDIATE, n_embed=N_EMBED):
        return cls(
            DenseLayer.glorot(n_samples, n_intermediate, rng),
            DenseLayer.glorot(n_intermediate, n_embed, rng),
            DenseLayer.glorot(n_intermediate, n_embed, rng),
            DenseLayer.glorot(n_embed, n_intermediate, rng),
            DenseLayer.glorot(n_intermediate, n_samples, rng),
        )

    @property
    def n_embed(self):
        return self.mu_head.out_dim

    def encode(self, x):
        """Deterministic embedding (the posterior mean)."""
        return vae_encode(self, x)[0]


@dataclass
class LatentBatch:
    mu: np.ndarray
    logvar: np.ndarray
    z: np.ndarray
    noise: np.ndarray


def _check_input(model, x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.enc1.in_dim:
        raise ShapeError(f"expected batch with {model.enc1.in_dim} columns, got shape {x.shape}")
    return x


# --- auto-encoder -------------------------------------------------------------

def ae_forward(model, x):
    """Return ``(x_hat, embedding)``."""
    x = _check_input(model, x)
    z = model.encode(x)
    return model.decode(z), z


def ae_backward(model, x):
    """RMSE loss of the AE on ``x`` and gradients aligned with ``model.params()``."""
    x = _check_input(model, x)
    h1 = dense_forward(model.enc1, x)
    z = dense_forward(model.enc2, h1)
    h2 = dense_forward(model.dec1, z)
    x_hat = dense_forward(model.dec2, h2)
    loss, g = rmse_loss(x_hat, x)

    gw4, gb4, g = dense_backward(model.dec2, h2, g)
    gw3, gb3, g = dense_backward(model.dec1, z, g)
    gw2, gb2, g = dense_backward(model.enc2, h1, g)
    gw1, gb1, _ = dense_backward(model.enc1, x, g)
    return loss, [gw1, gb1, gw2, gb2, gw3, gb3, gw4, gb4]


# --- beta-VAE -----------------------------------------------------------------

def vae_encode(model, x):
    x = _check_input(model, x)
    h = dense_forward(model.enc1, x)
    return dense_forward(model.mu_head, h), dense_forward(model.logvar_head, h)


def reparameterize(mu, logvar, rng=None, noise=None):
    """Draw ``z = mu + exp(logvar/2) * noise``.

    Pass ``noise`` explicitly to reuse a draw; with neither ``rng`` nor
    ``noise`` the noise is zero (deterministic mode).
    """
    mu = np.asarray(mu, dtype=np.float64)
    logvar = np.asarray(logvar, dtype=np.float64)
    if mu.shape != logvar.shape:
        raise ShapeError(f"mu {mu.shape} and logvar {logvar.shape} differ")
    if noise is None:
        noise = rng.standard_normal(mu.shape) if rng is not None else np.zeros_like(mu)
    elif noise.shape != mu.shape:
        raise ShapeError(f"noise {noise.shape} does not match mu {mu.shape}")
    z = mu + np.exp(0.5 * logvar) * noise
    return z, noise


def kl_divergence(mu, logvar):
    """KL(N(mu, exp(logvar)) || N(0, 1)), summed over dimensions, averaged over the batch."""
    mu = np.atleast_2d(np.asarray(mu, dtype=np.float64))
    logvar = np.atleast_2d(np.asarray(logvar, dtype=np.float64))
    if mu.shape != logvar.shape:
        raise ShapeError(f"mu {mu.shape} and logvar {logvar.shape} differ")
    per_sample = 0.5 * np.sum(mu * mu + np.exp(logvar) - logvar - 1.0, axis=1)
    return float(per_sample.mean())


def vae_loss(x, x_hat, mu, logvar, beta):
    """Return ``(loss, (l_r, d_kl))`` with ``loss = l_r + beta * d_kl``."""
    if beta < 0:
        raise ValueError(f"beta must be nonnegative, got {beta}")
    l_r, _ = rmse_loss(x_hat, x)
    d_kl = kl_divergence(mu, logvar)
    return l_r + beta * d_kl, (l_r, d_kl)


@dataclass
class VaeForward:
    latent: LatentBatch
    x_hat: np.ndarray


def vae_forward(model, x, rng=None, noise=None):
    x = _check_input(model, x)
    mu, logvar = vae_encode(model, x)
    z, noise = reparameterize(mu, logvar, rng=rng, noise=noise)
    x_hat = model.decode(z)
    return VaeForward(LatentBatch(mu, logvar, z, noise), x_hat)


def vae_backward(model, x, latent, x_hat, beta):
    """Gradients of ``rmse + beta * kl`` aligned with ``model.params()``.

    ``latent.noise`` must be the draw used to produce ``x_hat``.
    """
    x = _check_input(model, x)
    n = x.shape[0]
    if latent.noise.shape != (n, model.n_embed) or x_hat.shape != x.shape:
        raise ShapeError("latent batch or reconstruction does not match the input batch")

    h = dense_forward(model.enc1, x)
    h2 = dense_forward(model.dec1, latent.z)
    _, g = rmse_loss(x_hat, x)

    gw_d2, gb_d2, g = dense_backward(model.dec2, h2, g)
    gw_d1, gb_d1, g_z = dense_backward(model.dec1, latent.z, g)

    sigma = np.exp(0.5 * latent.logvar)
    g_mu = g_z + beta * latent.mu / n
    g_logvar = g_z * 0.5 * sigma * latent.noise + beta * 0.5 * (sigma * sigma - 1.0) / n

    gw_mu, gb_mu, g_h_mu = dense_backward(model.mu_head, h, g_mu)
    gw_lv, gb_lv, g_h_lv = dense_backward(model.logvar_head, h, g_logvar)
    gw_e1, gb_e1, _ = dense_backward(model.enc1, x, g_h_mu + g_h_lv)
    return [gw_e1, gb_e1, gw_mu, gb_mu, gw_lv, gb_lv, gw_d1, gb_d1, gw_d2, gb_d2]
