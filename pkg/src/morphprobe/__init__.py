"""Morphological probing tasks for word representations."""

from .errors import (
    DegenerateDataset,
    DegenerateFeature,
    DimensionMismatch,
    EmptyLexicon,
    FormatError,
    InsufficientData,
    MismatchedSubjects,
    ProbingError,
    SchemaError,
    ZeroVariance,
)
from .schema import Dimension, FeatureBundle, LanguageConfig, ParadigmEntry, parse_bundle

__version__ = "0.1.0"
