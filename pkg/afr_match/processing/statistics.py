"""Correlation and confidence-interval analysis over threshold reports."""
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy import stats

from afr_match.errors import (
    AfrMatchError,
    BadDf,
    ConstantSeries,
    InsufficientData,
    LengthMismatch,
)
from afr_match.processing.evaluation import ThresholdReport
from afr_match.utils.sweep_options import DEFAULT_MODES

logger = logging.getLogger(__name__)

Z_95 = 1.96


@dataclass(frozen=True)
class CorrelationResult:
    x_name: str
    y_name: str
    r: float
    p_value: float
    n: int

    @property
    def interpretation(self) -> str:
        """Plain-language strength and direction, e.g. 'Strong negative correlation'."""
        strength = abs(self.r)
        if strength >= 0.7:
            label = 'Strong'
        elif strength >= 0.4:
            label = 'Moderate'
        elif strength >= 0.1:
            label = 'Weak'
        else:
            return 'No meaningful correlation'
        direction = 'positive' if self.r > 0 else 'negative'
        return f"{label} {direction} correlation"

    def to_dict(self) -> Dict[str, object]:
        data = asdict(self)
        data['interpretation'] = self.interpretation
        return data


@dataclass(frozen=True)
class ConfidenceInterval:
    mode: Optional[str]
    mean: float
    sample_std: float
    lower: float
    upper: float
    n: int
    level: float = 0.95

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def to_dict(self) -> Dict[str, object]:
        return asdict(self)


def _check_df(df: float) -> float:
    if not df >= 1:
        raise BadDf(f"Degrees of freedom must be >= 1, got {df}")
    return float(df)


def t_cdf(t: float, df: float) -> float:
    """
    Cumulative distribution of Student's t with df degrees of freedom.

    Raises:
        BadDf: If df < 1
    """
    return float(stats.t.cdf(t, _check_df(df)))


def t_two_tailed_p(t: float, df: float) -> float:
    """P(|T| >= |t|), taken from the survival function to avoid 1 - cdf cancellation."""
    return float(2.0 * stats.t.sf(abs(t), _check_df(df)))


def pearson(
    x: Sequence[float],
    y: Sequence[float],
    x_name: str = 'x',
    y_name: str = 'y'
) -> CorrelationResult:
    """
    Pearson correlation with a two-tailed p-value from the t-distribution (n - 2 df).

    Args:
        x: First series
        y: Second series, same length as x
        x_name: Label stored on the result
        y_name: Label stored on the result

    Returns:
        CorrelationResult

    Raises:
        LengthMismatch: If lengths differ or n < 3
        ConstantSeries: If either series has zero variance
    """
    xs = np.asarray(x, dtype=np.float64)
    ys = np.asarray(y, dtype=np.float64)
    if xs.shape != ys.shape:
        raise LengthMismatch(f"Series lengths differ: {xs.size} vs {ys.size}")
    n = xs.size
    if n < 3:
        raise LengthMismatch(f"Pearson correlation needs n >= 3, got {n}")

    # pearsonr only warns on constant input and returns NaN
    for name, series in ((x_name, xs), (y_name, ys)):
        if np.ptp(series) == 0.0:
            raise ConstantSeries(f"Series {name!r} is constant")

    r, p_value = stats.pearsonr(xs, ys)
    return CorrelationResult(x_name=x_name, y_name=y_name, r=float(r), p_value=float(p_value), n=n)


def ci95(values: Sequence[float], mode: Optional[str] = None) -> ConfidenceInterval:
    """
    Normal-approximation 95% interval: mean +/- 1.96 * s / sqrt(n).

    s is the sample standard deviation (n - 1 denominator). Bounds are not
    clamped, so accuracy intervals may extend past 100.

    Raises:
        InsufficientData: If fewer than two values
    """
    data = np.asarray(values, dtype=np.float64)
    n = data.size
    if n < 2:
        raise InsufficientData(f"Confidence interval needs >= 2 values, got {n}")
    mean = float(data.mean())
    std = float(data.std(ddof=1))
    half_width = Z_95 * std / math.sqrt(n)
    return ConfidenceInterval(
        mode=mode,
        mean=mean,
        sample_std=std,
        lower=mean - half_width,
        upper=mean + half_width,
        n=n,
    )


@dataclass
class StatsSummary:
    """Everything written to stats.json."""
    correlations: List[CorrelationResult] = field(default_factory=list)
    intervals: List[ConfidenceInterval] = field(default_factory=list)
    skipped: List[Dict[str, str]] = field(default_factory=list)

    def correlation(self, y_name: str) -> Optional[CorrelationResult]:
        for result in self.correlations:
            if result.y_name == y_name:
                return result
        return None

    def interval(self, mode: str) -> Optional[ConfidenceInterval]:
        for result in self.intervals:
            if result.mode == mode:
                return result
        return None

    def to_dict(self) -> Dict[str, object]:
        return {
            'correlations': [c.to_dict() for c in self.correlations],
            'confidence_intervals': [ci.to_dict() for ci in self.intervals],
            'skipped': list(self.skipped),
        }


def stats_summary(reports: Sequence[ThresholdReport]) -> StatsSummary:
    """
    Threshold-vs-accuracy and threshold-vs-time correlations over all reports,
    plus an accuracy confidence interval per mode.

    Analyses the data cannot support (too few rows, constant times from a
    deterministic run) are listed under `skipped` instead of failing the run.
    """
    summary = StatsSummary()
    thresholds = [r.threshold for r in reports]

    for y_name, values in (
        ('accuracy_pct', [r.paper_accuracy_pct for r in reports]),
        ('time_s', [r.wall_time_s for r in reports]),
    ):
        try:
            summary.correlations.append(pearson(thresholds, values, 'threshold', y_name))
        except AfrMatchError as e:
            logger.warning("Skipping threshold vs %s correlation: %s", y_name, e)
            summary.skipped.append({'analysis': f"pearson:threshold~{y_name}", 'reason': str(e)})

    present = {r.mode for r in reports}
    modes = [m for m in DEFAULT_MODES if m in present] + sorted(present - set(DEFAULT_MODES))
    for mode in modes:
        accuracies = [r.paper_accuracy_pct for r in reports if r.mode == mode]
        try:
            summary.intervals.append(ci95(accuracies, mode))
        except AfrMatchError as e:
            logger.warning("Skipping %s confidence interval: %s", mode, e)
            summary.skipped.append({'analysis': f"ci95:{mode}", 'reason': str(e)})

    return summary
