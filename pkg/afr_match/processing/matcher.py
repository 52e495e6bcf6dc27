"""Cosine similarity matching between real and altered fingerprint embeddings."""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from afr_match.dataset.socofing import split_record_ref
from afr_match.errors import (
    DimMismatch,
    EmptyGallery,
    MixedExtractors,
    PairError,
    ZeroVector,
)
from afr_match.features.base import EmbeddingVector
from afr_match.utils.sweep_options import check_threshold

logger = logging.getLogger(__name__)

VectorLike = Union[EmbeddingVector, Sequence[float], np.ndarray]
GroundTruth = Dict[Tuple[str, str], bool]


@dataclass(frozen=True)
class SimilarityScore:
    real_ref: str
    altered_ref: str
    value: float


@dataclass(frozen=True)
class MatchDecision:
    score: SimilarityScore
    threshold: float
    matched: bool
    genuine: Optional[bool] = None


def _values(v: VectorLike) -> np.ndarray:
    raw = v.values if isinstance(v, EmbeddingVector) else v
    # Accumulate in float64 even though vectors are stored as float32
    return np.asarray(raw, dtype=np.float64).reshape(-1)


def _ref(v: VectorLike, default: str) -> str:
    return v.record_ref if isinstance(v, EmbeddingVector) else default


def _clamp(value: float) -> float:
    return float(min(1.0, max(-1.0, value)))


def magnitude(v: VectorLike) -> float:
    """
    Euclidean norm sqrt(sum(v_i^2)).

    Args:
        v: EmbeddingVector or plain sequence

    Returns:
        Non-negative norm; 0.0 only for the all-zero vector
    """
    values = _values(v)
    return float(np.sqrt(np.dot(values, values)))


def cosine(a: VectorLike, b: VectorLike) -> SimilarityScore:
    """
    Cosine of the angle between two vectors: dot(a, b) / (|a| |b|).

    The result is clamped to [-1, 1] to absorb rounding drift. The score
    records a's ref as real_ref and b's ref as altered_ref.

    Raises:
        DimMismatch: If lengths differ
        ZeroVector: If either vector has zero magnitude
    """
    va = _values(a)
    vb = _values(b)
    # Both vectors must live in the same embedding space
    if va.shape != vb.shape:
        raise DimMismatch(f"Cannot compare vectors of dim {va.shape[0]} and {vb.shape[0]}")
    norm_a = np.sqrt(np.dot(va, va))
    norm_b = np.sqrt(np.dot(vb, vb))
    if norm_a == 0.0 or norm_b == 0.0:
        raise ZeroVector("Cosine similarity is undefined for a zero vector")
    value = np.dot(va, vb) / (norm_a * norm_b)
    return SimilarityScore(
        real_ref=_ref(a, 'a'),
        altered_ref=_ref(b, 'b'),
        value=_clamp(value),
    )


def decide(
    score: SimilarityScore,
    threshold: float,
    genuine: Optional[bool] = None
) -> MatchDecision:
    """
    Apply a threshold: a pair matches only if its score strictly exceeds it.

    Args:
        score: Similarity score of a pair
        threshold: Decision threshold in (0, 1)
        genuine: Optional ground-truth label to carry along

    Raises:
        BadThreshold: If threshold is outside (0, 1)
    """
    threshold = check_threshold(threshold)
    return MatchDecision(
        score=score,
        threshold=threshold,
        matched=score.value > threshold,
        genuine=genuine,
    )


def _stack(vectors: Sequence[EmbeddingVector], role: str) -> Tuple[np.ndarray, np.ndarray]:
    dims = {v.dim for v in vectors}
    if len(dims) > 1:
        raise DimMismatch(f"{role} vectors have mixed dims: {sorted(dims)}")
    matrix = np.vstack([_values(v) for v in vectors])
    norms = np.sqrt(np.einsum('ij,ij->i', matrix, matrix))
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        ref = vectors[zero[0]].record_ref
        cause = ZeroVector(f"{role} vector {ref} has zero magnitude")
        if role == 'real':
            raise PairError(ref, '*', cause)
        raise PairError('*', ref, cause)
    return matrix, norms


def score_matrix(
    reals: Sequence[EmbeddingVector],
    altereds: Sequence[EmbeddingVector],
    jobs: int = 1
) -> np.ndarray:
    """
    Cosine similarity of every (real, altered) pair as a |reals| x |altereds| array.

    Rows are computed in chunks that may run on several threads; the result
    is the same regardless of jobs.

    Raises:
        EmptyGallery: If either list is empty
        MixedExtractors: If vectors come from different extractors
        DimMismatch / PairError: On incompatible or zero vectors
    """
    # Validate the inputs before any arithmetic
    if not reals or not altereds:
        raise EmptyGallery("match_all needs at least one real and one altered vector")
    ids = {v.extractor_id for v in reals} | {v.extractor_id for v in altereds}
    if len(ids) > 1:
        raise MixedExtractors(f"Vectors come from several extractors: {sorted(ids)}")

    real_matrix, real_norms = _stack(reals, 'real')
    altered_matrix, altered_norms = _stack(altereds, 'altered')
    if real_matrix.shape[1] != altered_matrix.shape[1]:
        raise PairError(
            reals[0].record_ref, altereds[0].record_ref,
            DimMismatch(f"real dim {real_matrix.shape[1]} != altered dim {altered_matrix.shape[1]}"),
        )

    def rows(bounds: Tuple[int, int]) -> np.ndarray:
        lo, hi = bounds
        dots = real_matrix[lo:hi] @ altered_matrix.T
        return dots / np.outer(real_norms[lo:hi], altered_norms)

    n = len(reals)
    # Split the real rows into one chunk per worker
    if jobs <= 1 or n < 2:
        scores = rows((0, n))
    else:
        step = -(-n // jobs)
        chunks = [(lo, min(lo + step, n)) for lo in range(0, n, step)]
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            scores = np.vstack(list(pool.map(rows, chunks)))
    return np.clip(scores, -1.0, 1.0)


def match_all(
    reals: Sequence[EmbeddingVector],
    altereds: Sequence[EmbeddingVector],
    threshold: float,
    ground_truth: Optional[GroundTruth] = None,
    jobs: int = 1
) -> List[MatchDecision]:
    """
    Score and decide every (real, altered) pair.

    Args:
        reals: Gallery of real-print embeddings
        altereds: Altered-print embeddings (queries)
        threshold: Decision threshold in (0, 1)
        ground_truth: Optional (real_ref, altered_ref) -> genuine map
        jobs: Worker threads for the score computation

    Returns:
        |reals| x |altereds| decisions, real-major then altered order
    """
    threshold = check_threshold(threshold)
    scores = score_matrix(reals, altereds, jobs=jobs)
    # Real-major order: every altered print for reals[0], then reals[1], ...
    decisions = []
    for i, real in enumerate(reals):
        for j, altered in enumerate(altereds):
            value = float(scores[i, j])
            key = (real.record_ref, altered.record_ref)
            decisions.append(MatchDecision(
                score=SimilarityScore(real.record_ref, altered.record_ref, value),
                threshold=threshold,
                matched=value > threshold,
                genuine=ground_truth.get(key) if ground_truth is not None else None,
            ))
    logger.debug(
        "match_all: %d pairs at threshold %.2f, %d matched",
        len(decisions), threshold, sum(d.matched for d in decisions)
    )
    return decisions


def _record_id(record_ref: str) -> str:
    try:
        return split_record_ref(record_ref)[1]
    except ValueError:
        return record_ref


def best_match(
    altered: EmbeddingVector,
    reals: Sequence[EmbeddingVector]
) -> Tuple[str, SimilarityScore]:
    """
    Find the real print most similar to an altered print.

    Ties go to the lexicographically smallest record_id.

    Returns:
        Tuple of (real_ref, SimilarityScore)

    Raises:
        EmptyGallery: If reals is empty
    """
    if not reals:
        raise EmptyGallery("Cannot search an empty gallery")

    best_score: Optional[SimilarityScore] = None
    best_key: Optional[Tuple[float, str]] = None
    # Sort key: highest score first, then smallest record_id
    for real in reals:
        value = cosine(real, altered).value
        key = (-value, _record_id(real.record_ref))
        if best_key is None or key < best_key:
            best_key = key
            best_score = SimilarityScore(real.record_ref, altered.record_ref, value)

    return best_score.real_ref, best_score
