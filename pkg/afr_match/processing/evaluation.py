"""Threshold sweeps and the recognition metrics reported per (mode, threshold)."""
import logging
import time
from dataclasses import asdict, dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from sklearn.metrics import confusion_matrix, precision_recall_fscore_support

from afr_match.dataset.socofing import Level
from afr_match.errors import (
    EmptyEvaluation,
    InsufficientData,
    MissingEmbeddings,
    MissingGroundTruth,
    MixedExtractors,
)
from afr_match.features.base import EmbeddingVector
from afr_match.processing.matcher import (
    GroundTruth,
    MatchDecision,
    SimilarityScore,
    match_all,
)
from afr_match.utils.sweep_options import (
    DEFAULT_MODES,
    DEFAULT_THRESHOLDS,
    normalize_modes,
    normalize_thresholds,
)

logger = logging.getLogger(__name__)


def round_half_up(value: float, places: int) -> float:
    """Round for display: halves go away from zero (2.345 -> 2.35)."""
    quantum = Decimal(1).scaleb(-places)
    return float(Decimal(repr(float(value))).quantize(quantum, rounding=ROUND_HALF_UP))


def paper_accuracy(matched: int, unmatched: int) -> float:
    """
    Headline accuracy as printed in the threshold tables: the share of pairs
    rejected, in percent, rounded to 2 decimals.

    Args:
        matched: Pairs scoring above the threshold
        unmatched: Pairs at or below the threshold

    Returns:
        100 * unmatched / (matched + unmatched)

    Raises:
        EmptyEvaluation: If there are no pairs
    """
    total = matched + unmatched
    if matched < 0 or unmatched < 0 or total <= 0:
        raise EmptyEvaluation(f"No pairs to evaluate (matched={matched}, unmatched={unmatched})")
    return round_half_up(100.0 * unmatched / total, 2)


def f1_score(precision: Optional[float], recall: Optional[float]) -> Optional[float]:
    """2PR / (P + R); None when either input is absent or both are zero."""
    if precision is None or recall is None or precision + recall == 0:
        return None
    return 2.0 * precision * recall / (precision + recall)


@dataclass(frozen=True)
class GroundTruthMetrics:
    """Confusion-matrix metrics; rates are None when their denominator is 0."""
    true_positives: int
    false_positives: int
    true_negatives: int
    false_negatives: int
    accuracy: float
    precision: Optional[float]
    recall: Optional[float]
    f1: Optional[float]
    far: Optional[float]
    frr: Optional[float]


def _ratio(numerator: int, denominator: int) -> Optional[float]:
    return numerator / denominator if denominator else None


def _optional(value: float) -> Optional[float]:
    return None if np.isnan(value) else float(value)


def gt_metrics(decisions: Sequence[MatchDecision]) -> GroundTruthMetrics:
    """
    Accuracy, precision, recall and F1 against genuine/impostor labels.

    A matched genuine pair is a true positive, a matched impostor pair a false
    positive. FAR is the share of impostors accepted, FRR the share of
    genuines rejected.

    Raises:
        EmptyEvaluation: If decisions is empty
        MissingGroundTruth: If any decision lacks a label
    """
    if not decisions:
        raise EmptyEvaluation("No decisions to evaluate")
    for decision in decisions:
        if decision.genuine is None:
            raise MissingGroundTruth(
                f"No ground-truth label for ({decision.score.real_ref}, {decision.score.altered_ref})"
            )

    y_true = [bool(d.genuine) for d in decisions]
    y_pred = [bool(d.matched) for d in decisions]
    # Fixed label order keeps the 2x2 shape even when one class is absent
    tn, fp, fn, tp = (int(v) for v in confusion_matrix(y_true, y_pred, labels=[False, True]).ravel())

    # Undefined rates come back as NaN and are reported as absent
    precision, recall, _, _ = precision_recall_fscore_support(
        y_true, y_pred, labels=[True], average=None, zero_division=np.nan
    )
    precision = _optional(precision[0])
    recall = _optional(recall[0])
    return GroundTruthMetrics(
        true_positives=tp,
        false_positives=fp,
        true_negatives=tn,
        false_negatives=fn,
        accuracy=(tp + tn) / len(decisions),
        precision=precision,
        recall=recall,
        # 2PR/(P+R) is absent when P+R=0, where sklearn would report 0
        f1=f1_score(precision, recall),
        far=_ratio(fp, fp + tn),
        frr=_ratio(fn, fn + tp),
    )


def _score_values(scores: Iterable[Union[SimilarityScore, float]]) -> np.ndarray:
    return np.array(
        [s.value if isinstance(s, SimilarityScore) else float(s) for s in scores],
        dtype=np.float64,
    )


def similarity_mean(scores: Iterable[Union[SimilarityScore, float]]) -> float:
    """Arithmetic mean of similarity values (needs at least one)."""
    values = _score_values(scores)
    if values.size == 0:
        raise InsufficientData("Mean similarity needs at least one score")
    return float(values.mean())


def similarity_stats(scores: Iterable[Union[SimilarityScore, float]]) -> Tuple[float, float]:
    """
    Mean and sample standard deviation (n - 1 denominator) of similarity values.

    Raises:
        InsufficientData: With fewer than two scores (use similarity_mean for one)
    """
    values = _score_values(scores)
    if values.size < 2:
        raise InsufficientData(f"Sample standard deviation needs >= 2 scores, got {values.size}")
    return float(values.mean()), float(values.std(ddof=1))


@dataclass(frozen=True)
class Separation:
    """How well genuine and impostor score distributions separate."""
    genuine_mean: Optional[float]
    impostor_mean: Optional[float]
    genuine_count: int
    impostor_count: int
    far: Optional[float]
    frr: Optional[float]

    @property
    def separated(self) -> bool:
        if self.genuine_mean is None or self.impostor_mean is None:
            return False
        return self.genuine_mean > self.impostor_mean


def separation(decisions: Sequence[MatchDecision]) -> Separation:
    """
    Mean similarity of genuine vs impostor pairs, plus FAR/FRR at the
    decisions' threshold.

    Raises:
        MissingGroundTruth: If any decision lacks a label
    """
    metrics = gt_metrics(decisions)
    genuine = [d.score.value for d in decisions if d.genuine]
    impostor = [d.score.value for d in decisions if not d.genuine]
    return Separation(
        genuine_mean=float(np.mean(genuine)) if genuine else None,
        impostor_mean=float(np.mean(impostor)) if impostor else None,
        genuine_count=len(genuine),
        impostor_count=len(impostor),
        far=metrics.far,
        frr=metrics.frr,
    )


@dataclass
class ThresholdReport:
    """One row of the threshold table for a (mode, threshold) pair."""
    mode: str
    threshold: float
    matched_pairs: int
    unmatched_pairs: int
    paper_accuracy_pct: float
    avg_similarity: float
    std_similarity: float
    precision: Optional[float] = None
    recall: Optional[float] = None
    f1: Optional[float] = None
    gt_accuracy_pct: Optional[float] = None
    wall_time_s: float = 0.0

    @property
    def total_pairs(self) -> int:
        return self.matched_pairs + self.unmatched_pairs

    def to_dict(self) -> Dict[str, object]:
        return asdict(self)


@dataclass
class SweepConfig:
    """What to sweep: thresholds x altered modes."""
    thresholds: List[float] = field(default_factory=lambda: list(DEFAULT_THRESHOLDS))
    modes: List[str] = field(default_factory=lambda: list(DEFAULT_MODES))
    extractor_id: Optional[str] = None
    report_destinations: Dict[str, str] = field(default_factory=dict)
    jobs: int = 1
    deterministic: bool = False

    def __post_init__(self):
        self.thresholds = normalize_thresholds(self.thresholds)
        self.modes = normalize_modes(self.modes)


def build_report(
    mode: str,
    threshold: float,
    decisions: Sequence[MatchDecision],
    wall_time_s: float = 0.0
) -> ThresholdReport:
    """Summarize one (mode, threshold) decision set as a ThresholdReport."""
    if not decisions:
        raise EmptyEvaluation(f"No decisions for mode {mode}")
    # Count decisions on each side of the threshold
    matched = sum(1 for d in decisions if d.matched)
    unmatched = len(decisions) - matched
    values = [d.score.value for d in decisions]
    # A single pair has no spread
    if len(values) >= 2:
        avg, std = similarity_stats(values)
    else:
        avg, std = similarity_mean(values), 0.0

    report = ThresholdReport(
        mode=mode,
        threshold=threshold,
        matched_pairs=matched,
        unmatched_pairs=unmatched,
        paper_accuracy_pct=paper_accuracy(matched, unmatched),
        avg_similarity=avg,
        std_similarity=std,
        wall_time_s=wall_time_s,
    )
    # Ground-truth columns only when every pair is labelled
    if all(d.genuine is not None for d in decisions):
        metrics = gt_metrics(decisions)
        report.precision = metrics.precision
        report.recall = metrics.recall
        report.f1 = metrics.f1
        report.gt_accuracy_pct = 100.0 * metrics.accuracy
    return report


def sweep(
    config: SweepConfig,
    embeddings: Dict[str, Sequence[EmbeddingVector]],
    ground_truth: Optional[Dict[str, GroundTruth]] = None
) -> List[ThresholdReport]:
    """
    Match every altered mode against the Real gallery at every threshold.

    Args:
        config: Thresholds, modes and run options
        embeddings: Level name -> vectors; must contain 'Real' and each mode
        ground_truth: Optional level name -> (real_ref, altered_ref) -> genuine

    Returns:
        Reports ordered Easy -> Medium -> Hard, thresholds descending. Each
        report's wall_time_s covers its full match-and-decide pass (0.0 when
        config.deterministic is set).

    Raises:
        MissingEmbeddings: If Real or a requested mode has no vectors
        MixedExtractors: If the vectors disagree with config.extractor_id
    """
    # Check every requested category is present before matching anything
    reals = embeddings.get(Level.REAL.value)
    if not reals:
        raise MissingEmbeddings("No Real embeddings to match against")
    for mode in config.modes:
        if not embeddings.get(mode):
            raise MissingEmbeddings(f"No embeddings for mode {mode}")

    if config.extractor_id is not None:
        for name in [Level.REAL.value] + config.modes:
            other = {v.extractor_id for v in embeddings[name]} - {config.extractor_id}
            if other:
                raise MixedExtractors(
                    f"{name} embeddings come from {sorted(other)}, expected {config.extractor_id}"
                )

    reports = []
    for mode in config.modes:
        labels = (ground_truth or {}).get(mode)
        for threshold in config.thresholds:
            # Time covers matching and the report together
            started = time.perf_counter()
            decisions = match_all(reals, embeddings[mode], threshold, labels, jobs=config.jobs)
            report = build_report(mode, threshold, decisions)
            elapsed = time.perf_counter() - started
            report.wall_time_s = 0.0 if config.deterministic else elapsed
            logger.info(
                "%s @ %.2f: %d matched / %d unmatched (accuracy %.2f%%)",
                mode, threshold, report.matched_pairs, report.unmatched_pairs, report.paper_accuracy_pct
            )
            reports.append(report)
    return reports
