"""Embedding extractor registry and feature-extraction API."""
from pathlib import Path
from typing import Callable, Dict, Optional, Union

from afr_match.features.base import EmbeddingExtractor, EmbeddingVector, make_embedding
from afr_match.features.baseline import (
    BASELINE_DIM,
    BASELINE_EXTRACTOR_ID,
    GradientHistogramExtractor,
    extract_baseline,
)
from afr_match.features.backbone import (
    BACKBONE_EXTRACTOR_ID,
    OnnxBackboneExtractor,
    PreprocessedImage,
    extract,
    preprocess,
)
from afr_match.features.cache import CACHE_SUFFIX, cache_header, cache_load, cache_save
from afr_match.features.extraction import DEFAULT_BATCH_SIZE, batch_count, batch_extract


def _build_baseline(model_path: Optional[Union[str, Path]] = None, **kwargs) -> EmbeddingExtractor:
    return GradientHistogramExtractor()


def _build_backbone(model_path: Optional[Union[str, Path]] = None, **kwargs) -> EmbeddingExtractor:
    return OnnxBackboneExtractor(model_path=model_path, output_name=kwargs.get('output_name'))


# Registry mapping CLI extractor names to factories
EXTRACTOR_REGISTRY: Dict[str, Callable[..., EmbeddingExtractor]] = {
    'baseline': _build_baseline,
    'backbone': _build_backbone,
}


def get_extractor(
    name: str,
    model_path: Optional[Union[str, Path]] = None,
    **kwargs
) -> EmbeddingExtractor:
    """
    Get an extractor instance by name.

    Args:
        name: 'baseline' or 'backbone' (case-insensitive)
        model_path: ONNX file for the backbone (falls back to AFRNET_MODEL_PATH)
        **kwargs: Extra factory options, e.g. output_name for the backbone

    Returns:
        EmbeddingExtractor instance

    Raises:
        ValueError: If the name is not registered
        ModelLoadFailure / ShapeMismatch: From the backbone loader
    """
    key = str(name).lower().strip()
    if key not in EXTRACTOR_REGISTRY:
        raise ValueError(f"Unknown extractor {name!r}; choose one of {sorted(EXTRACTOR_REGISTRY)}")
    return EXTRACTOR_REGISTRY[key](model_path=model_path, **kwargs)


__all__ = [
    'BACKBONE_EXTRACTOR_ID',
    'BASELINE_DIM',
    'BASELINE_EXTRACTOR_ID',
    'CACHE_SUFFIX',
    'DEFAULT_BATCH_SIZE',
    'EXTRACTOR_REGISTRY',
    'EmbeddingExtractor',
    'EmbeddingVector',
    'GradientHistogramExtractor',
    'OnnxBackboneExtractor',
    'PreprocessedImage',
    'batch_count',
    'batch_extract',
    'cache_header',
    'cache_load',
    'cache_save',
    'extract',
    'extract_baseline',
    'get_extractor',
    'make_embedding',
    'preprocess',
]
