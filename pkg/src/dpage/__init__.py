"""Diverse paraphrase generation with learned rewriting-pattern embeddings."""

from .errors import (ConfigError, ContractError, DataFormatError, DimensionError,
                     DomainError, DPageError)
from .model import ModelConfig, Seq2SeqModel
from .training import TrainingConfig, TrainResult, train
from .vocab import Vocabulary, ParaphrasePair, build_vocab

__all__ = [
    "ConfigError", "ContractError", "DataFormatError", "DimensionError",
    "DomainError", "DPageError", "ModelConfig", "Seq2SeqModel",
    "TrainingConfig", "TrainResult", "train", "Vocabulary", "ParaphrasePair",
    "build_vocab",
]

__version__ = "0.1.0"
