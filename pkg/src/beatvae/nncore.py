"""Dense-network numerics: linear layers, RMSE loss, AdaDelta and a gradient checker.

Everything operates on float64 numpy arrays. A batch is a 2-D array with one
sample per row.
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError, ShapeError


def _as_batch(x, name="x"):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeError(f"{name} must be 2-D (batch x features), got shape {x.shape}")
    return x


@dataclass
class DenseLayer:
    """Fully connected layer with identity activation: ``y = x @ W.T + b``."""

    weights: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weights.ndim != 2:
            raise ShapeError(f"weights must be 2-D, got shape {self.weights.shape}")
        if self.bias.shape != (self.weights.shape[0],):
            raise ShapeError(
                f"bias shape {self.bias.shape} does not match {self.weights.shape[0]} outputs"
            )

    @property
    def in_dim(self):
        return self.weights.shape[1]

    @property
    def out_dim(self):
        return self.weights.shape[0]

    @classmethod
    def glorot(cls, in_dim, out_dim, rng):
        limit = np.sqrt(6.0 / (in_dim + out_dim))
        weights = rng.uniform(-limit, limit, size=(out_dim, in_dim))
        return cls(weights, np.zeros(out_dim))

    def copy(self):
        return DenseLayer(self.weights.copy(), self.bias.copy())


def dense_forward(layer, x):
    x = _as_batch(x)
    if x.shape[1] != layer.in_dim:
        raise ShapeError(f"input has {x.shape[1]} columns, layer expects {layer.in_dim}")
    return x @ layer.weights.T + layer.bias


def dense_backward(layer, x, upstream):
    """Return ``(grad_W, grad_b, grad_x)`` for upstream gradient dL/dy."""
    x = _as_batch(x)
    upstream = _as_batch(upstream, "upstream")
    if x.shape[1] != layer.in_dim or upstream.shape != (x.shape[0], layer.out_dim):
        raise ShapeError(
            f"shapes x={x.shape}, upstream={upstream.shape} inconsistent with "
            f"layer {layer.in_dim}->{layer.out_dim}"
        )
    grad_w = upstream.T @ x
    grad_b = upstream.sum(axis=0)
    grad_x = upstream @ layer.weights
    return grad_w, grad_b, grad_x


def rmse_loss(x_hat, x):
    """Root-mean-squared error over every element, and its gradient w.r.t. ``x_hat``.

    When the loss is exactly zero the gradient is defined as zero.
    """
    x_hat = _as_batch(x_hat, "x_hat")
    x = _as_batch(x)
    if x_hat.shape != x.shape:
        raise ShapeError(f"x_hat {x_hat.shape} and x {x.shape} differ")
    if x.size == 0:
        raise ShapeError("empty batch")
    diff = x_hat - x
    n = diff.size
    loss = float(np.sqrt(np.sum(diff * diff) / n))
    if loss == 0.0:
        return 0.0, np.zeros_like(diff)
    return loss, diff / (n * loss)


@dataclass
class AdaDeltaState:
    """Running averages E[g^2] and E[dx^2], one array per parameter."""

    sq_grad: list
    sq_delta: list
    rho: float = 0.95
    epsilon: float = 1e-6

    @classmethod
    def zeros_like(cls, params, rho=0.95, epsilon=1e-6):
        if not 0.0 < rho < 1.0:
            raise ValueError(f"rho must lie in (0, 1), got {rho}")
        if epsilon <= 0:
            raise ValueError(f"epsilon must be positive, got {epsilon}")
        return cls(
            [np.zeros_like(p, dtype=np.float64) for p in params],
            [np.zeros_like(p, dtype=np.float64) for p in params],
            rho,
            epsilon,
        )


def adadelta_step(params, grads, state):
    """Apply one AdaDelta update in place to ``params`` and ``state``.

    Returns the list of applied deltas.
    """
    if len(params) != len(grads) or len(params) != len(state.sq_grad):
        raise ShapeError("params, grads and optimizer state have different lengths")
    rho, eps = state.rho, state.epsilon
    deltas = []
    for i, (p, g) in enumerate(zip(params, grads)):
        g = np.asarray(g, dtype=np.float64)
        if g.shape != p.shape:
            raise ShapeError(f"gradient {i} has shape {g.shape}, parameter has {p.shape}")
        if not np.all(np.isfinite(g)):
            raise NumericalError(f"non-finite gradient for parameter {i}")
        eg2 = state.sq_grad[i]
        edx2 = state.sq_delta[i]
        eg2 *= rho
        eg2 += (1.0 - rho) * g * g
        delta = -(np.sqrt(edx2 + eps) / np.sqrt(eg2 + eps)) * g
        edx2 *= rho
        edx2 += (1.0 - rho) * delta * delta
        p += delta
        deltas.append(delta)
    return deltas


@dataclass
class GradCheckResult:
    max_rel_error: float
    analytic: list = field(repr=False, default_factory=list)
    numeric: list = field(repr=False, default_factory=list)


def gradient_check(loss_fn, params, analytic_grads, h=1e-5):
    """Compare analytic gradients with central differences.

    ``loss_fn()`` must evaluate the scalar loss using the *current* contents of
    ``params`` (arrays are perturbed in place and restored). The error per entry
    is ``|a - n| / max(1e-8, |a| + |n|)``; the maximum over all entries is
    reported.
    """
    worst = 0.0
    numerics = []
    for p, a in zip(params, analytic_grads):
        num = np.zeros_like(p, dtype=np.float64)
        flat = p.reshape(-1)
        num_flat = num.reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + h
            up = loss_fn()
            flat[j] = orig - h
            down = loss_fn()
            flat[j] = orig
            num_flat[j] = (up - down) / (2.0 * h)
        a = np.asarray(a, dtype=np.float64)
        if a.size:
            rel = np.abs(a - num) / np.maximum(1e-8, np.abs(a) + np.abs(num))
            worst = max(worst, float(rel.max()))
        numerics.append(num)
    return GradCheckResult(worst, list(analytic_grads), numerics)
