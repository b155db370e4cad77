"""lexprobe: probing how well frozen word representations compose.

The package trains minimal classifiers over frozen static or layered
contextual embeddings on six lexical-composition tasks (verb-particle and
light-verb detection, compound literality and relation paraphrases,
adjective attributes, and phrase-type tagging), with lexically disjoint
splits, majority baselines, an encoder/layer experiment grid, and input
ablations. Gradients come from a small built-in reverse-mode autodiff core.
"""

from . import autodiff, embeddings, evaluation, model, tasks
from .errors import (
    ConfigError,
    ContractError,
    DimensionError,
    FormatError,
    LabelError,
    LexprobeError,
    MissingEmbeddingError,
    SplitError,
)

__version__ = "0.1.0"

__all__ = [
    "autodiff",
    "embeddings",
    "model",
    "tasks",
    "evaluation",
    "LexprobeError",
    "ConfigError",
    "ContractError",
    "DimensionError",
    "FormatError",
    "LabelError",
    "MissingEmbeddingError",
    "SplitError",
    "__version__",
]
