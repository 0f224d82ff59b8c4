"""Interpretability analyses of a trained embedding: per-dimension spread,
single-dimension sweeps and decoding at the corners of a 2-D latent slice.

Every decode here is deterministic (posterior mean, no sampling noise).
"""
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .nncore import rmse_loss
from .vae import vae_encode
from .wfdb import BeatLabel

DEFAULT_TAU = 0.2
DEFAULT_GRID = tuple(np.linspace(-3.0, 3.0, 7))
CORNER_SIGNS = ((-1, 1), (1, 1), (-1, -1), (1, -1))


@dataclass
class EmbeddingStats:
    mean: np.ndarray
    std: np.ndarray
    mean_sigma: np.ndarray  # NaN for the AE, which has no posterior scale
    count: int

    @property
    def spectrum(self):
        """Dimensions sorted by std, largest first, as ``(dim, std)`` pairs."""
        order = np.argsort(-self.std, kind="stable")
        return [(int(d), float(self.std[d])) for d in order]

    def gap_ratio(self, k):
        """k-th largest std over the (k+1)-th largest."""
        s = np.sort(self.std)[::-1]
        if k < 1 or k >= len(s):
            raise ValueError(f"k must lie in [1, {len(s) - 1}]")
        return float(s[k - 1] / s[k]) if s[k] > 0 else float("inf")


@dataclass
class SweepResult:
    base: np.ndarray  # 30-sample input epoch
    base_latent: np.ndarray
    dimension: int
    grid: np.ndarray
    latents: np.ndarray
    decoded: np.ndarray  # (len(grid), 30)


@dataclass
class CornerResult:
    dims: tuple
    value: float
    corners: np.ndarray  # (4, n_embed)
    decoded: np.ndarray  # (4, 30)

    @property
    def labels(self):
        return [f"[{int(a * self.value)},{int(b * self.value)}]" for a, b in CORNER_SIGNS]


def _posterior(model, x):
    if model.kind == "ae":
        mu = model.encode(x)
        return mu, np.full_like(mu, np.nan)
    mu, logvar = vae_encode(model, x)
    return mu, np.exp(0.5 * logvar)


def embed_dataset(model, x):
    """Deterministic embedding of every row and its per-dimension statistics."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise DataError("cannot embed an empty dataset")
    mu, sigma = _posterior(model, x)
    n = mu.shape[0]
    std = mu.std(axis=0, ddof=1) if n > 1 else np.zeros(mu.shape[1])
    return mu, EmbeddingStats(mu.mean(axis=0), std, sigma.mean(axis=0), n)


def significant_dims(stats, tau=DEFAULT_TAU):
    """Dimensions whose std of the mean exceeds ``tau``, largest std first."""
    if tau <= 0:
        raise ValueError(f"tau must be positive, got {tau}")
    return [d for d, s in stats.spectrum if s > tau]


def _check_dim(model, dim):
    if not 0 <= dim < model.n_embed:
        raise IndexError(f"dimension {dim} out of range [0, {model.n_embed})")


def perturb_sweep(model, epoch, dim, grid=DEFAULT_GRID, from_origin=False):
    """Decode the epoch's embedding with dimension ``dim`` replaced by each grid value.

    With ``from_origin`` the other dimensions are zeroed instead of taken from
    the encoding.
    """
    _check_dim(model, dim)
    grid = np.asarray(grid, dtype=np.float64)
    if grid.size == 0:
        raise ValueError("empty sweep grid")
    samples = np.asarray(getattr(epoch, "samples", epoch), dtype=np.float64)
    base_latent = model.encode(samples[None, :])[0]
    start = np.zeros_like(base_latent) if from_origin else base_latent
    latents = np.tile(start, (len(grid), 1))
    latents[:, dim] = grid
    return SweepResult(samples, base_latent, dim, grid, latents, model.decode(latents))


def corner_decode(model, dims, value=2.0):
    """Decode at (+-value, +-value) in ``dims`` with all other dimensions zero."""
    a, b = dims
    _check_dim(model, a)
    _check_dim(model, b)
    if a == b:
        raise ValueError("corner decoding needs two distinct dimensions")
    corners = np.zeros((4, model.n_embed))
    for i, (sa, sb) in enumerate(CORNER_SIGNS):
        corners[i, a] = sa * value
        corners[i, b] = sb * value
    return CornerResult((a, b), value, corners, model.decode(corners))


# --- linearity self-checks -----------------------------------------------------

def sweep_collinearity_error(result):
    """Max deviation of sweep outputs from the straight line through the first two.

    A linear decoder makes every sample index move along a line as the swept
    value changes, so this is zero up to rounding.
    """
    g, d = result.grid, result.decoded
    if len(g) < 2:
        return 0.0
    slope = (d[1] - d[0]) / (g[1] - g[0])
    predicted = d[0] + np.outer(g - g[0], slope)
    return float(np.abs(predicted - d).max())


def corner_superposition_error(model, dims, value=2.0):
    """Check decode(a, b) == decode(0) + [decode(a, 0) - decode(0)] + [decode(0, b) - decode(0)]."""
    res = corner_decode(model, dims, value)
    i, j = res.dims
    origin = model.decode(np.zeros(model.n_embed))
    worst = 0.0
    for corner, out in zip(res.corners, res.decoded):
        za = np.zeros(model.n_embed)
        za[i] = corner[i]
        zb = np.zeros(model.n_embed)
        zb[j] = corner[j]
        pred = origin + (model.decode(za) - origin) + (model.decode(zb) - origin)
        worst = max(worst, float(np.abs(pred - out).max()))
    return worst


# --- reconstruction / separability ------------------------------------------------

def _reconstruct(model, x):
    return model.decode(model.encode(x))


def reconstruction_report(model, datasets):
    """Rows of ``(split, class, count, l_r)``; class ``"all"`` covers the whole split."""
    rows = []
    for ds in datasets:
        x = ds.X
        if len(x) == 0:
            continue
        x_hat = _reconstruct(model, x)
        rows.append((ds.split, "all", len(x), rmse_loss(x_hat, x)[0]))
        labels = np.array([e.label.value for e in ds.epochs])
        for label in BeatLabel:
            mask = labels == label.value
            if mask.any():
                rows.append((ds.split, label.value, int(mask.sum()), rmse_loss(x_hat[mask], x[mask])[0]))
    return rows


@dataclass
class ThresholdRule:
    dim: int
    threshold: float
    paced_above: bool

    def predict(self, mu):
        above = np.asarray(mu)[:, self.dim] > self.threshold
        return (above if self.paced_above else ~above).astype(int)


def fit_threshold(mu, y, dim):
    """Best single threshold on one embedding dimension (exhaustive over midpoints)."""
    v = np.asarray(mu)[:, dim]
    y = np.asarray(y)
    order = np.argsort(v, kind="stable")
    vs, ys = v[order], y[order]
    # paced-above accuracy when splitting after position k
    neg_below = np.concatenate([[0], np.cumsum(ys == 0)])
    pos_above = np.concatenate([[0], np.cumsum(ys[::-1] == 1)])[::-1]
    acc_above = (neg_below + pos_above) / len(ys)
    acc_below = 1.0 - acc_above
    k_up, k_down = int(np.argmax(acc_above)), int(np.argmax(acc_below))
    if acc_above[k_up] >= acc_below[k_down]:
        k, paced_above = k_up, True
    else:
        k, paced_above = k_down, False
    if k == 0:
        thr = vs[0] - 1.0
    elif k == len(vs):
        thr = vs[-1] + 1.0
    else:
        thr = 0.5 * (vs[k - 1] + vs[k])
    return ThresholdRule(dim, float(thr), paced_above)


def accuracy(pred, y):
    return float(np.mean(np.asarray(pred) == np.asarray(y)))
