"""scikit-learn compatible front-ends for the linear AE and beta-VAE.

>>> vae = BetaVAE(beta=0.1, random_state=0).fit(X_train)
>>> Z = vae.transform(X_test)           # posterior means
>>> X_rec = vae.inverse_transform(Z)    # decoder
"""
import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from . import analysis
from .dataset import PreprocessConfig, record_epochs
from .pipeline import TrainConfig, evaluate, load_model, save_model, train
from .vae import N_EMBED, N_SAMPLES


class LinearAutoEncoder(TransformerMixin, BaseEstimator):
    """Deterministic 30-20-10-20-30 linear auto-encoder trained with AdaDelta on RMSE."""

    model_kind = "ae"

    def __init__(self, epochs=50, batch_size=128, rho=0.95, epsilon=1e-6, random_state=0):
        self.epochs = epochs
        self.batch_size = batch_size
        self.rho = rho
        self.epsilon = epsilon
        self.random_state = random_state

    def _train_config(self):
        return TrainConfig(
            model_kind=self.model_kind,
            beta=getattr(self, "beta", 0.0),
            epochs=self.epochs,
            batch_size=self.batch_size,
            rho=self.rho,
            epsilon=self.epsilon,
            seed=self.random_state,
        )

    def _validate(self, X):
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != N_SAMPLES:
            raise ValueError(f"expected {N_SAMPLES} features per epoch, got {X.shape[1]}")
        return X

    def fit(self, X, y=None, X_test=None):
        X = self._validate(X)
        X_test = None if X_test is None else self._validate(X_test)
        self.config_ = self._train_config()
        self.model_, self.history_ = train(X, X_test, self.config_)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "model_")
        return self.model_.encode(self._validate(X))

    def inverse_transform(self, Z):
        check_is_fitted(self, "model_")
        Z = check_array(Z, dtype=np.float64)
        if Z.shape[1] != N_EMBED:
            raise ValueError(f"expected {N_EMBED} latent dimensions, got {Z.shape[1]}")
        return self.model_.decode(Z)

    def reconstruct(self, X):
        return self.inverse_transform(self.transform(X))

    def score(self, X, y=None):
        """Negative reconstruction RMSE (higher is better)."""
        check_is_fitted(self, "model_")
        return -evaluate(self.model_, self._validate(X))["l_r"]

    def embedding_stats(self, X):
        check_is_fitted(self, "model_")
        return analysis.embed_dataset(self.model_, self._validate(X))[1]

    def save(self, path, dataset_hash=""):
        check_is_fitted(self, "model_")
        save_model(self.model_, self.config_, path, dataset_hash)

    @classmethod
    def load(cls, path):
        art = load_model(path)
        est_cls = BetaVAE if art.model_kind == "beta-vae" else LinearAutoEncoder
        cfg = art.config or TrainConfig(model_kind=art.model_kind)
        kwargs = dict(
            epochs=cfg.epochs, batch_size=cfg.batch_size, rho=cfg.rho,
            epsilon=cfg.epsilon, random_state=cfg.seed,
        )
        if est_cls is BetaVAE:
            kwargs["beta"] = cfg.beta
        est = est_cls(**kwargs)
        est.model_, est.config_ = art.model, cfg
        est.n_features_in_ = N_SAMPLES
        return est


class BetaVAE(LinearAutoEncoder):
    """Linear beta-VAE; ``transform`` returns the posterior mean."""

    model_kind = "beta-vae"

    def __init__(self, beta=0.5, epochs=50, batch_size=128, rho=0.95, epsilon=1e-6, random_state=0):
        super().__init__(epochs, batch_size, rho, epsilon, random_state)
        self.beta = beta

    def significant_dims(self, X, tau=analysis.DEFAULT_TAU):
        return analysis.significant_dims(self.embedding_stats(X), tau)


class BeatEpochExtractor(TransformerMixin, BaseEstimator):
    """Stateless transformer turning WFDB records into a (n_beats, 30) epoch matrix."""

    def __init__(self, channel=0, filter_order=5, f_low=1.0, f_high=60.0, extra_lowpass_hz=None):
        self.channel = channel
        self.filter_order = filter_order
        self.f_low = f_low
        self.f_high = f_high
        self.extra_lowpass_hz = extra_lowpass_hz

    def fit(self, records, y=None):
        return self

    def transform(self, records):
        cfg = PreprocessConfig(self.channel, self.filter_order, self.f_low, self.f_high, self.extra_lowpass_hz)
        epochs = [e for r in records for e in record_epochs(r, cfg)]
        self.labels_ = [e.label for e in epochs]
        if not epochs:
            return np.zeros((0, N_SAMPLES))
        return np.vstack([e.samples for e in epochs])
