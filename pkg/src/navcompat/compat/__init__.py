"""Dual-encoder instruction/trajectory compatibility model."""

from .data import FeatureCache, Minibatch, Provenance, TrainingPair, TrainingSet, sample_minibatch
from .features import ViewFeatures, build_view_features, encode_orientation, load_features, save_features
from .io import ModelFormatError, load_model, save_model
from .losses import (ClassificationKind, LossConfig, classification_loss, classification_prob,
                     compatibility_score, contrastive_loss, total_loss)
from .model import CompatModel, ModelConfig, build_vocab
from .train import NumericError, TrainConfig, gradient_check, loss_and_grads, train

__all__ = [
    "ClassificationKind", "CompatModel", "FeatureCache", "LossConfig", "Minibatch", "ModelConfig",
    "ModelFormatError", "NumericError", "Provenance", "TrainConfig", "TrainingPair", "TrainingSet",
    "ViewFeatures", "build_view_features", "build_vocab", "classification_loss",
    "classification_prob", "compatibility_score", "contrastive_loss", "encode_orientation",
    "gradient_check", "load_features", "load_model", "loss_and_grads", "sample_minibatch",
    "save_features", "save_model", "total_loss", "train",
]
