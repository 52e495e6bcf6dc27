"""Threshold and mode settings shared by the matcher, the sweep and the run configuration."""
from typing import Iterable, List

from afr_match.dataset.socofing import ALTERED_LEVELS, Level
from afr_match.errors import BadThreshold, EmptyEvaluation

DEFAULT_THRESHOLDS = (0.92, 0.82, 0.72)
DEFAULT_MODES = tuple(level.value for level in ALTERED_LEVELS)


def check_threshold(threshold: float) -> float:
    """Return threshold as float, or raise BadThreshold outside (0, 1)."""
    if not 0.0 < threshold < 1.0:
        raise BadThreshold(f"Threshold must be in (0, 1), got {threshold}")
    return float(threshold)


def normalize_thresholds(thresholds: Iterable[float]) -> List[float]:
    """Validate, de-duplicate and sort thresholds in descending order."""
    normalized = sorted({check_threshold(float(t)) for t in thresholds}, reverse=True)
    if not normalized:
        raise EmptyEvaluation("At least one threshold is required")
    return normalized


def normalize_modes(modes: Iterable[str]) -> List[str]:
    """Validate altered modes and put them in Easy, Medium, Hard order."""
    requested = {Level.parse(m).value for m in modes}
    if Level.REAL.value in requested:
        raise ValueError("Real is the gallery, not an altered mode")
    ordered = [m for m in DEFAULT_MODES if m in requested]
    if not ordered:
        raise EmptyEvaluation("At least one altered mode is required")
    return ordered
