import csv
import io
import logging
from typing import BinaryIO, Dict

import numpy as np

from src.tdoa.errors import ConfigParseError
from src.tdoa.services.harness import ConvergenceTrace

logger = logging.getLogger(__name__)

# Формат версии 1: порядок колонок зафиксирован
CSV_HEADER = ("iteration", "x", "y", "cost", "position_error")


def _number(value: float) -> str:
    return format(float(value), ".17g")


def emit_csv(trace: ConvergenceTrace, sink: BinaryIO) -> None:
    """Трасса в CSV: заголовок и по строке на запись, 17 значащих цифр, окончания строк LF."""
    lines = [",".join(CSV_HEADER)]
    for record in trace.records():
        lines.append(
            ",".join(
                (
                    str(record.iteration),
                    _number(record.x),
                    _number(record.y),
                    _number(record.cost),
                    _number(record.position_error),
                )
            )
        )
    sink.write(("\n".join(lines) + "\n").encode("ascii"))


def read_csv(source: BinaryIO) -> Dict[str, np.ndarray]:
    """Обратный разбор файла emit_csv: словарь колонка → массив."""
    text = source.read().decode("ascii")
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(header) != CSV_HEADER:
        raise ConfigParseError(f"unexpected trace header {header!r}", line=1)

    columns = {name: [] for name in CSV_HEADER}
    for line_number, row in enumerate(reader, start=2):
        if len(row) != len(CSV_HEADER):
            raise ConfigParseError(f"expected {len(CSV_HEADER)} columns, got {len(row)}", line=line_number)
        try:
            columns["iteration"].append(int(row[0]))
            for name, value in zip(CSV_HEADER[1:], row[1:]):
                columns[name].append(float(value))
        except ValueError as exc:
            raise ConfigParseError(str(exc), line=line_number) from exc

    return {
        "iteration": np.array(columns["iteration"], dtype=int),
        **{name: np.array(columns[name], dtype=float) for name in CSV_HEADER[1:]},
    }
