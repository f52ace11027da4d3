import csv
import logging
from typing import Optional, Sequence, TextIO

from src.tdoa.services.harness import Claim, SuiteSummary

logger = logging.getLogger(__name__)

SUMMARY_HEADER = ("scenario", "algorithm", "checkpoint", "runs", "failed", "median", "q1", "q3", "iqr")
THRESHOLD_HEADER = ("scenario", "algorithm", "threshold", "median_iterations", "reached", "runs")
CLAIMS_HEADER = ("claim", "passed", "detail")
NOT_REACHED = "not-reached"


def _cell(value: Optional[float]) -> str:
    return "" if value is None else format(value, ".6g")


def _writer(sink: TextIO):
    return csv.writer(sink, lineterminator="\n")


def write_summary(summary: SuiteSummary, sink: TextIO) -> None:
    """Медиана и межквартильный размах ошибки по (сценарий, алгоритм, контрольная итерация)."""
    writer = _writer(sink)
    writer.writerow(SUMMARY_HEADER)
    for cell in summary.cells:
        for stats in cell.checkpoints:
            writer.writerow(
                (
                    cell.scenario,
                    cell.algorithm.value,
                    stats.checkpoint,
                    stats.runs,
                    len(cell.failures),
                    _cell(stats.median),
                    _cell(stats.q1),
                    _cell(stats.q3),
                    _cell(stats.iqr),
                )
            )


def write_thresholds(summary: SuiteSummary, sink: TextIO) -> None:
    writer = _writer(sink)
    writer.writerow(THRESHOLD_HEADER)
    for cell in summary.cells:
        stats = cell.threshold
        median = NOT_REACHED if stats.median is None else format(stats.median, "g")
        writer.writerow(
            (cell.scenario, cell.algorithm.value, format(stats.threshold, "g"), median, stats.reached, stats.runs)
        )


def write_claims(claims: Sequence[Claim], sink: TextIO) -> None:
    writer = _writer(sink)
    writer.writerow(CLAIMS_HEADER)
    for claim in claims:
        writer.writerow((claim.name, "pass" if claim.passed else "fail", claim.detail))
