"""Interpretable ECG beat embeddings with linear auto-encoders and beta-VAEs."""
from .estimators import BeatEpochExtractor, BetaVAE, LinearAutoEncoder
from .pipeline import TrainConfig, evaluate, load_model, save_model, train
from .wfdb import BeatLabel

__version__ = "0.1.0"

__all__ = [
    "BeatEpochExtractor",
    "BeatLabel",
    "BetaVAE",
    "LinearAutoEncoder",
    "TrainConfig",
    "evaluate",
    "load_model",
    "save_model",
    "train",
]
