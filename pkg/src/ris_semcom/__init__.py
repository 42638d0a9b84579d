"""Desk-scale simulator of a reflecting-surface-assisted semantic text link.

A transformer semantic codec and a dense channel codec are trained jointly
through a differentiable Rayleigh-fading channel whose reflected paths are
phase-aligned by the surface; reconstruction quality is scored with BLEU
against a direct-link baseline and a noiseless upper bound.
"""

from .autodiff import Tensor, backward, finite_diff_check
from .channel import (
    ChannelRealization,
    ReflectionConfig,
    align_phases,
    effective_gain,
    sample_channels,
)
from .errors import ConfigError, NumericalError
from .harness import ExperimentConfig, RunResult, SystemVariant, evaluate, sweep, train
from .metrics import BleuConfig, bleu, corpus_bleu, cross_entropy_loss
from .model import ShapeConfig, Transceiver
from .text import TokenBatch, Vocabulary, build_vocab, encode_sentence, tokenize

__version__ = "0.1.0"

__all__ = [
    "Tensor",
    "backward",
    "finite_diff_check",
    "ChannelRealization",
    "ReflectionConfig",
    "align_phases",
    "effective_gain",
    "sample_channels",
    "ConfigError",
    "NumericalError",
    "ExperimentConfig",
    "RunResult",
    "SystemVariant",
    "evaluate",
    "sweep",
    "train",
    "BleuConfig",
    "bleu",
    "corpus_bleu",
    "cross_entropy_loss",
    "ShapeConfig",
    "Transceiver",
    "TokenBatch",
    "Vocabulary",
    "build_vocab",
    "encode_sentence",
    "tokenize",
    "__version__",
]
