"""Training loop, evaluation, history CSV and the binary model artifact."""
import csv
import hashlib
import json
import logging
import struct
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ArtifactError, DataError, NumericalError
from .nncore import AdaDeltaState, DenseLayer, adadelta_step, rmse_loss
from .vae import AeModel, VaeModel, ae_backward, ae_forward, vae_backward, vae_forward, vae_loss

log = logging.getLogger(__name__)

MODEL_KINDS = ("ae", "beta-vae")
BETA_SWEEP = (0.01, 0.05, 0.1, 0.25, 0.5, 1.0)


@dataclass
class TrainConfig:
    model_kind: str = "beta-vae"
    beta: float = 0.5
    epochs: int = 50
    batch_size: int = 128
    rho: float = 0.95
    epsilon: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.model_kind not in MODEL_KINDS:
            raise ValueError(f"model_kind must be one of {MODEL_KINDS}, got {self.model_kind!r}")
        if self.beta < 0:
            raise ValueError(f"beta must be nonnegative, got {self.beta}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")

    def to_dict(self):
        return asdict(self)


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    l_r: float
    d_kl: float
    test_loss: float


@dataclass
class TrainHistory:
    records: list = field(default_factory=list)
    # loss, l_r, d_kl of every optimizer step, for auditing the loss identity
    steps: list = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def write_csv(self, path, model_kind="beta-vae"):
        cols = ["epoch", "loss", "l_r", "d_kl", "test_loss"]
        if model_kind == "ae":
            cols.remove("d_kl")
        with open(path, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(cols)
            for r in self.records:
                row = asdict(r)
                w.writerow([row["epoch"]] + [f"{row[c]:.12g}" for c in cols[1:]])


def make_model(kind, rng):
    return AeModel.init(rng) if kind == "ae" else VaeModel.init(rng)


def _batch_step(model, xb, config, rng):
    """One forward/backward pass. Returns ``(loss, l_r, d_kl, grads)``."""
    if model.kind == "ae":
        loss, grads = ae_backward(model, xb)
        return loss, loss, 0.0, grads
    fwd = vae_forward(model, xb, rng=rng)
    lat = fwd.latent
    loss, (l_r, d_kl) = vae_loss(xb, fwd.x_hat, lat.mu, lat.logvar, config.beta)
    grads = vae_backward(model, xb, lat, fwd.x_hat, config.beta)
    return loss, l_r, d_kl, grads


def train(x_train, x_test, config, model=None, rng=None):
    """Train an AE or beta-VAE with AdaDelta on row-wise epochs.

    The single random stream ``rng`` (default: seeded from ``config.seed``)
    is consumed in a fixed order: weight initialization, then per training
    epoch one permutation followed by one noise draw per batch.

    Returns ``(model, history)``.
    """
    x_train = np.asarray(x_train, dtype=np.float64)
    if x_train.ndim != 2 or x_train.shape[0] == 0:
        raise DataError("training set is empty")
    x_test = None if x_test is None or len(x_test) == 0 else np.asarray(x_test, dtype=np.float64)
    if rng is None:
        rng = np.random.default_rng(config.seed)
    if model is None:
        model = make_model(config.model_kind, rng)
    params = model.params()
    state = AdaDeltaState.zeros_like(params, config.rho, config.epsilon)
    history = TrainHistory()
    n = x_train.shape[0]

    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        sums = np.zeros(3)
        for b, start in enumerate(range(0, n, config.batch_size)):
            xb = x_train[order[start:start + config.batch_size]]
            loss, l_r, d_kl, grads = _batch_step(model, xb, config, rng)
            if not np.isfinite(loss):
                raise NumericalError(f"non-finite loss at epoch {epoch}, batch {b}")
            history.steps.append((loss, l_r, d_kl))
            sums += np.array([loss, l_r, d_kl]) * xb.shape[0]
            adadelta_step(params, grads, state)
        mean = sums / n
        test_loss = evaluate(model, x_test, config.beta)["loss"] if x_test is not None else float("nan")
        history.records.append(EpochRecord(epoch, *map(float, mean), test_loss))
        log.debug("epoch %d loss %.6f l_r %.6f d_kl %.6f test %.6f", epoch, *mean, test_loss)
    return model, history


def evaluate(model, x, beta=0.0):
    """Deterministic (noise-free) metrics; never mutates the model."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise DataError("cannot evaluate on an empty dataset")
    if model.kind == "ae":
        x_hat, _ = ae_forward(model, x)
        l_r, _ = rmse_loss(x_hat, x)
        return {"loss": l_r, "l_r": l_r}
    fwd = vae_forward(model, x)
    loss, (l_r, d_kl) = vae_loss(x, fwd.x_hat, fwd.latent.mu, fwd.latent.logvar, beta)
    return {"loss": loss, "l_r": l_r, "d_kl": d_kl}


# --- artifact -----------------------------------------------------------------

MAGIC = b"BVAE"
FORMAT_VERSION = 1
_KIND_CODES = {"ae": 0, "beta-vae": 1}


def save_model(model, config, path, dataset_hash=""):
    """Write the self-describing little-endian artifact.

    Layout: magic, u16 version, u8 kind, u16 n_arrays, per array u8 ndim + u32
    dims, u32 metadata length + UTF-8 JSON (config, dataset hash), then every
    parameter as float64 in canonical order.
    """
    params = model.params()
    meta = json.dumps(
        {"config": config.to_dict() if config is not None else None, "dataset_hash": dataset_hash},
        sort_keys=True,
    ).encode()
    parts = [MAGIC, struct.pack("<HBH", FORMAT_VERSION, _KIND_CODES[model.kind], len(params))]
    for p in params:
        parts.append(struct.pack("<B", p.ndim) + struct.pack(f"<{p.ndim}I", *p.shape))
    parts.append(struct.pack("<I", len(meta)) + meta)
    for p in params:
        parts.append(np.ascontiguousarray(p, dtype="<f8").tobytes())
    with open(path, "wb") as f:
        f.write(b"".join(parts))


@dataclass
class ModelArtifact:
    model: object
    config: object
    dataset_hash: str
    version: int = FORMAT_VERSION

    @property
    def model_kind(self):
        return self.model.kind


def load_model(path):
    with open(path, "rb") as f:
        data = f.read()
    if data[:4] != MAGIC:
        raise ArtifactError(f"{path}: not a model artifact")
    try:
        version, kind_code, n_arrays = struct.unpack_from("<HBH", data, 4)
        if version != FORMAT_VERSION:
            raise ArtifactError(f"{path}: artifact version {version}, expected {FORMAT_VERSION}")
        kind = {v: k for k, v in _KIND_CODES.items()}.get(kind_code)
        if kind is None:
            raise ArtifactError(f"{path}: unknown model kind code {kind_code}")
        off = 9
        shapes = []
        for _ in range(n_arrays):
            (ndim,) = struct.unpack_from("<B", data, off)
            shapes.append(struct.unpack_from(f"<{ndim}I", data, off + 1))
            off += 1 + 4 * ndim
        (meta_len,) = struct.unpack_from("<I", data, off)
        meta = json.loads(data[off + 4:off + 4 + meta_len].decode())
        off += 4 + meta_len
    except (struct.error, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ArtifactError(f"{path}: truncated or corrupt header ({exc})") from exc

    expected = sum(int(np.prod(s)) for s in shapes) * 8
    if len(data) - off != expected:
        raise ArtifactError(
            f"{path}: parameter block is {len(data) - off} bytes, shapes declare {expected}"
        )
    arrays = []
    for s in shapes:
        count = int(np.prod(s))
        arrays.append(np.frombuffer(data, dtype="<f8", count=count, offset=off).reshape(s).astype(np.float64))
        off += count * 8

    cls = AeModel if kind == "ae" else VaeModel
    if len(arrays) != 2 * len(cls.layer_names):
        raise ArtifactError(f"{path}: {len(arrays)} arrays do not describe a {kind} model")
    try:
        model = cls(*[DenseLayer(arrays[2 * i], arrays[2 * i + 1]) for i in range(len(cls.layer_names))])
    except ValueError as exc:
        raise ArtifactError(f"{path}: inconsistent layer shapes ({exc})") from exc
    cfg = meta.get("config")
    config = TrainConfig(**cfg) if cfg else None
    return ModelArtifact(model, config, meta.get("dataset_hash", ""), version)


def hash_array(x):
    return hashlib.sha256(np.ascontiguousarray(x, dtype="<f8").tobytes()).hexdigest()
