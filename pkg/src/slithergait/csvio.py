"""Versioned CSV files.

Every file starts with a schema line ``# schema: <name>/<version>`` followed
by the header row. Readers refuse files whose schema they don't know, so
format drift fails loudly instead of silently misparsing.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path

from .errors import ValidationError


def schema_line(name: str, version: int = 1) -> str:
    return f"# schema: {name}/{version}"


def write_csv(path, name: str, header, rows, version: int = 1) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(schema_line(name, version) + "\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)


def read_csv(path, name: str, version: int = 1) -> tuple[list[str], list[list[str]]]:
    path = Path(path)
    text = path.read_text()
    return parse_csv(text, name, version, source=str(path))


def parse_csv(text: str, name: str, version: int = 1, source: str = "<string>") -> tuple[list[str], list[list[str]]]:
    lines = text.splitlines()
    if not lines:
        raise ValidationError(f"{source}: empty CSV")
    expected = schema_line(name, version)
    if lines[0].strip() != expected:
        raise ValidationError(f"{source}: expected schema line '{expected}', got '{lines[0].strip()}'")
    reader = csv.reader(io.StringIO("\n".join(lines[1:])))
    rows = [row for row in reader if row]
    if not rows:
        raise ValidationError(f"{source}: missing header row")
    return rows[0], rows[1:]


class IncrementalCsvWriter:
    """Appendable CSV writer that knows how many data rows already exist.

    Used for resumable sweeps: rows are flushed as they are written, and a
    fresh writer on an existing file validates the schema and continues after
    the last complete row.
    """

    def __init__(self, path, name: str, header, version: int = 1, resume: bool = False):
        self.path = Path(path)
        self.name = name
        self.version = version
        self.header = list(header)
        self.rows_present = 0
        if resume and self.path.exists():
            got_header, rows = read_csv(self.path, name, version)
            if got_header != self.header:
                raise ValidationError(f"{self.path}: header mismatch on resume")
            self.rows_present = len(rows)
            self._fh = self.path.open("a", newline="")
        else:
            self._fh = self.path.open("w", newline="")
            self._fh.write(schema_line(name, version) + "\n")
            csv.writer(self._fh).writerow(self.header)
            self._fh.flush()
        self._writer = csv.writer(self._fh)

    def write_row(self, row) -> None:
        self._writer.writerow(row)
        self._fh.flush()
        self.rows_present += 1

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
