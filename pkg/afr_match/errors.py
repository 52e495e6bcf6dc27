"""Exception hierarchy for afr-match.

Every error raised by the library derives from ``AfrMatchError``. Errors that
describe a bad input value also derive from ``ValueError``.
"""
from typing import Optional


class AfrMatchError(Exception):
    """Base class for all afr-match errors."""


# dataset

class UnparseableName(AfrMatchError, ValueError):
    """Filename does not follow the SOCOFing naming convention."""


class UnknownAlterationTag(AfrMatchError, ValueError):
    """Filename carries an alteration suffix we do not recognise."""


class DuplicateSource(AfrMatchError, ValueError):
    """The same source filename appears twice in one listing."""


class EncodeFailure(AfrMatchError, ValueError):
    """Pixel matrix cannot be encoded (e.g. zero-sized)."""


class InvalidFraction(AfrMatchError, ValueError):
    """Split fraction outside (0, 1) or empty record list."""


class BadParameter(AfrMatchError, ValueError):
    """Augmentation parameter out of range."""


# features

class EmptyImage(AfrMatchError, ValueError):
    """Image has no pixels."""


class ModelLoadFailure(AfrMatchError):
    """Backbone model file missing or unreadable."""


class ShapeMismatch(AfrMatchError, ValueError):
    """Model input signature or tensor shape is not what we expect."""


class DegenerateEmbedding(AfrMatchError, ValueError):
    """Extractor produced an all-zero vector."""


class MixedExtractors(AfrMatchError, ValueError):
    """Vectors from different extractors were combined."""


class CorruptCache(AfrMatchError):
    """Embedding cache file is malformed."""


class CorruptReport(AfrMatchError, ValueError):
    """Report file is not in the emit_report layout."""


class DimMismatch(AfrMatchError, ValueError):
    """Vector dimensions disagree."""


class ExtractionError(AfrMatchError):
    """Extraction failed for one record; carries the offending record_ref."""

    def __init__(self, record_ref: str, cause: Exception):
        super().__init__(f"{record_ref}: {cause}")
        self.record_ref = record_ref
        self.cause = cause


# matcher

class ZeroVector(AfrMatchError, ValueError):
    """Cosine similarity is undefined for a zero-magnitude vector."""


class BadThreshold(AfrMatchError, ValueError):
    """Threshold outside the open interval (0, 1)."""


class EmptyGallery(AfrMatchError, ValueError):
    """No reference vectors to search."""


class PairError(AfrMatchError):
    """Cosine failed for a specific (real, altered) pair."""

    def __init__(self, real_ref: str, altered_ref: str, cause: Exception):
        super().__init__(f"({real_ref}, {altered_ref}): {cause}")
        self.real_ref = real_ref
        self.altered_ref = altered_ref
        self.cause = cause


# eval / stats

class EmptyEvaluation(AfrMatchError, ValueError):
    """No pairs to evaluate."""


class MissingGroundTruth(AfrMatchError, ValueError):
    """A decision has no genuine/impostor label."""


class InsufficientData(AfrMatchError, ValueError):
    """Too few samples for the requested statistic."""


class MissingEmbeddings(AfrMatchError, ValueError):
    """Embeddings for a requested mode are absent."""


class LengthMismatch(AfrMatchError, ValueError):
    """Paired series have different lengths (or too few points)."""


class ConstantSeries(AfrMatchError, ValueError):
    """Correlation undefined for a constant series."""


class BadDf(AfrMatchError, ValueError):
    """Degrees of freedom must be a positive integer."""


# cli

class ConfigError(AfrMatchError, ValueError):
    """Invalid run configuration."""

    def __init__(self, message: str, key: Optional[str] = None):
        super().__init__(message)
        self.key = key


class MissingInput(AfrMatchError, FileNotFoundError):
    """A required input directory or file (category, manifest, cache) is absent."""


class OutputExists(AfrMatchError, FileExistsError):
    """Output already present and overwriting was not requested."""
