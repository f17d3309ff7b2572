"""Atomic, bit-stable result files.

CSV files start with ``# {header json}`` followed by a column row; JSON-lines
files start with ``{"header": ...}``. Floats are written with 17 significant
digits and lines end with LF, so a repeated run reproduces the file byte for
byte.
"""
import csv
import json
import logging
import os
import tempfile
from contextlib import contextmanager
from enum import Enum
from typing import Any, Dict, Iterable, Iterator, List, Mapping, TextIO

import numpy as np

from quditport.qudit import QuditError

logger = logging.getLogger(__name__)


class OutputFormat(str, Enum):
    CSV = "csv"
    JSONL = "jsonl"


class OutputError(QuditError):
    """A result file could not be written."""

    def __init__(self, path: str, reason: str):
        super().__init__(f"Could not write {path}: {reason}")
        self.path = path


def format_value(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    if isinstance(value, Enum):
        return str(value.value)
    return str(value)


def to_json_value(value: Any) -> Any:
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value)
    if isinstance(value, Mapping):
        return {str(k): to_json_value(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [to_json_value(v) for v in value]
    return value


def dumps(value: Any) -> str:
    return json.dumps(to_json_value(value), sort_keys=True, separators=(",", ":"))


@contextmanager
def atomic_writer(path: str) -> Iterator[TextIO]:
    """Writes to a sibling temporary file and renames it over ``path``.

    The temporary file is removed if anything fails, so a partial result
    never appears under ``path``.
    """
    directory = os.path.dirname(os.path.abspath(path))
    try:
        fd, tmp_path = tempfile.mkstemp(
            dir=directory, prefix=".quditport-", suffix=".tmp"
        )
    except OSError as e:
        raise OutputError(path, e.strerror or str(e))
    try:
        with os.fdopen(fd, "w", newline="", encoding="utf-8") as f:
            yield f
        os.replace(tmp_path, path)
    except BaseException as e:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        if isinstance(e, OSError):
            raise OutputError(path, e.strerror or str(e))
        raise
    logger.debug(f"Wrote {path}")


def write_csv(
    path: str,
    header: Dict[str, Any],
    columns: List[str],
    rows: Iterable[Mapping[str, Any]],
) -> None:
    with atomic_writer(path) as f:
        f.write(f"# {dumps(header)}\n")
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_value(row.get(c)) for c in columns])


def write_jsonl(
    path: str,
    header: Dict[str, Any],
    columns: List[str],
    rows: Iterable[Mapping[str, Any]],
) -> None:
    with atomic_writer(path) as f:
        f.write(dumps({"header": header}) + "\n")
        for row in rows:
            f.write(dumps({c: row.get(c) for c in columns}) + "\n")


def write_records(
    path: str,
    output_format: OutputFormat,
    header: Dict[str, Any],
    columns: List[str],
    rows: Iterable[Mapping[str, Any]],
) -> None:
    """Writes ``rows`` in the requested format, all or nothing."""
    output_format = OutputFormat(output_format)
    if output_format is OutputFormat.CSV:
        write_csv(path, header, columns, rows)
    else:
        write_jsonl(path, header, columns, rows)
