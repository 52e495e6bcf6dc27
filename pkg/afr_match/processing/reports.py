"""Report, plot-data and decision-dump serialization."""
import csv
import io
import json
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import pandas as pd

from afr_match.errors import CorruptReport, EmptyEvaluation
from afr_match.processing.evaluation import ThresholdReport
from afr_match.processing.matcher import MatchDecision

REPORT_COLUMNS = [
    'mode',
    'threshold',
    'matched_pairs',
    'unmatched_pairs',
    'accuracy_pct',
    'avg_similarity',
    'std_similarity',
    'precision',
    'recall',
    'f1',
    'gt_accuracy_pct',
    'time_s',
]

# CSV column -> (ThresholdReport attribute, decimals; None = integer/text)
_COLUMN_FIELDS = {
    'mode': ('mode', None),
    'threshold': ('threshold', None),
    'matched_pairs': ('matched_pairs', None),
    'unmatched_pairs': ('unmatched_pairs', None),
    'accuracy_pct': ('paper_accuracy_pct', 2),
    'avg_similarity': ('avg_similarity', 4),
    'std_similarity': ('std_similarity', 4),
    'precision': ('precision', 4),
    'recall': ('recall', 4),
    'f1': ('f1', 4),
    'gt_accuracy_pct': ('gt_accuracy_pct', 2),
    'time_s': ('wall_time_s', 2),
}

PLOT_COLUMNS = ['series', 'x', 'y']

# Series name -> (ThresholdReport attribute, decimals; None = integer)
PLOT_SERIES = {
    'accuracy': ('paper_accuracy_pct', 2),
    'f1': ('f1', 4),
    'time': ('wall_time_s', 2),
    'matched': ('matched_pairs', None),
    'unmatched': ('unmatched_pairs', None),
}

DECISION_COLUMNS = ['real_ref', 'altered_ref', 'similarity', 'threshold', 'matched', 'genuine']

REPORT_FORMATS = ('csv', 'json')


def format_fixed(value: Optional[float], places: int) -> str:
    """Fixed-point text rounded half-up; '' for absent values."""
    if value is None:
        return ''
    # Round the shortest decimal form, not the binary value
    quantum = Decimal(1).scaleb(-places)
    return str(Decimal(repr(float(value))).quantize(quantum, rounding=ROUND_HALF_UP))


def format_threshold(threshold: float) -> str:
    """Shortest text for a threshold: 0.92 -> '0.92'."""
    return f"{float(threshold):g}"


def _csv_bytes(fieldnames: List[str], rows: List[Dict[str, str]]) -> bytes:
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=fieldnames, lineterminator='\n')
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    return buffer.getvalue().encode('utf-8')


def _report_row(report: ThresholdReport) -> Dict[str, str]:
    row = {}
    for column, (attribute, places) in _COLUMN_FIELDS.items():
        value = getattr(report, attribute)
        if column == 'threshold':
            row[column] = format_threshold(value)
        elif places is None:
            row[column] = str(value)
        else:
            row[column] = format_fixed(value, places)
    return row


def emit_report(reports: Sequence[ThresholdReport], fmt: str = 'csv') -> bytes:
    """
    Serialize sweep reports in the published threshold-table column order.

    CSV rounds accuracy columns to 2 decimals and similarity/precision/recall/F1
    to 4; absent metrics are empty fields. JSON keeps full precision and uses
    null for absent metrics.

    Args:
        reports: Reports to serialize (order is preserved)
        fmt: 'csv' or 'json'

    Returns:
        UTF-8 bytes

    Raises:
        EmptyEvaluation: If reports is empty
        ValueError: For an unknown format
    """
    if not reports:
        raise EmptyEvaluation("No reports to emit")
    fmt = fmt.lower()
    if fmt == 'csv':
        return _csv_bytes(REPORT_COLUMNS, [_report_row(r) for r in reports])
    if fmt == 'json':
        payload = [r.to_dict() for r in reports]
        return (json.dumps(payload, indent=2, ensure_ascii=False) + '\n').encode('utf-8')
    raise ValueError(f"Unknown report format {fmt!r}; choose one of {REPORT_FORMATS}")


def _optional_float(value) -> Optional[float]:
    if value is None or (isinstance(value, float) and pd.isna(value)) or value == '':
        return None
    return float(value)


def _report_from_row(row) -> ThresholdReport:
    return ThresholdReport(
        mode=row['mode'],
        threshold=float(row['threshold']),
        matched_pairs=int(row['matched_pairs']),
        unmatched_pairs=int(row['unmatched_pairs']),
        paper_accuracy_pct=float(row['accuracy_pct']),
        avg_similarity=float(row['avg_similarity']),
        std_similarity=float(row['std_similarity']),
        precision=_optional_float(row['precision']),
        recall=_optional_float(row['recall']),
        f1=_optional_float(row['f1']),
        gt_accuracy_pct=_optional_float(row['gt_accuracy_pct']),
        wall_time_s=_optional_float(row['time_s']) or 0.0,
    )


def parse_report(payload: bytes, fmt: str = 'csv') -> List[ThresholdReport]:
    """
    Parse bytes produced by emit_report (or a fixture in the same CSV layout).

    Raises:
        ValueError: For an unknown format
        CorruptReport: For missing columns, unparseable values or malformed JSON
    """
    fmt = fmt.lower()
    if fmt not in REPORT_FORMATS:
        raise ValueError(f"Unknown report format {fmt!r}; choose one of {REPORT_FORMATS}")

    if fmt == 'json':
        try:
            items = json.loads(payload.decode('utf-8'))
            return [ThresholdReport(**item) for item in items]
        except (TypeError, ValueError) as e:
            raise CorruptReport(f"Report JSON is malformed: {e}") from e

    try:
        frame = pd.read_csv(io.BytesIO(payload), dtype=str, keep_default_na=False)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, ValueError) as e:
        raise CorruptReport(f"Report CSV is unreadable: {e}") from e
    missing = [c for c in REPORT_COLUMNS if c not in frame.columns]
    if missing:
        raise CorruptReport(f"Report CSV is missing columns: {missing}")

    reports = []
    for index, row in frame.iterrows():
        try:
            reports.append(_report_from_row(row))
        except (TypeError, ValueError) as e:
            # Row numbers count the header as line 1
            raise CorruptReport(f"Report CSV line {index + 2}: {e}") from e
    return reports


def load_report(filepath: Union[str, Path]) -> List[ThresholdReport]:
    """
    Load a report CSV or JSON file (format chosen by extension).

    Raises:
        FileNotFoundError: If the file doesn't exist
        CorruptReport: If the contents are not a report
    """
    path = Path(filepath)
    if not path.exists():
        raise FileNotFoundError(f"Report not found: {filepath}")
    fmt = 'json' if path.suffix.lower() == '.json' else 'csv'
    return parse_report(path.read_bytes(), fmt)


def emit_plot_data(reports: Sequence[ThresholdReport]) -> bytes:
    """
    Long-format plot data: one `series,x,y` row per metric, mode and threshold.

    Series are named `<metric>/<mode>` for accuracy, f1, time, matched and
    unmatched; x is the threshold. Absent metrics are skipped.

    Raises:
        EmptyEvaluation: If reports is empty
    """
    if not reports:
        raise EmptyEvaluation("No reports to emit plot data for")
    rows = []
    # Metric-major, then report order
    for metric, (attribute, places) in PLOT_SERIES.items():
        for report in reports:
            value = getattr(report, attribute)
            if value is None:
                continue
            rows.append({
                'series': f"{metric}/{report.mode}",
                'x': format_threshold(report.threshold),
                'y': str(value) if places is None else format_fixed(value, places),
            })
    return _csv_bytes(PLOT_COLUMNS, rows)


def _flag(value: Optional[bool]) -> str:
    if value is None:
        return ''
    return 'true' if value else 'false'


def decisions_to_csv(decisions: Sequence[MatchDecision]) -> bytes:
    """Decision dump with similarity at 4 decimals; empty genuine when unlabeled."""
    rows = [
        {
            'real_ref': d.score.real_ref,
            'altered_ref': d.score.altered_ref,
            'similarity': format_fixed(d.score.value, 4),
            'threshold': format_threshold(d.threshold),
            'matched': _flag(d.matched),
            'genuine': _flag(d.genuine),
        }
        for d in decisions
    ]
    return _csv_bytes(DECISION_COLUMNS, rows)
