"""Plain-text key-value configuration files.

Format: one ``key = value`` per line, ``#`` starts a comment, blank lines
ignored. Values are kept as strings; consumers coerce them.
"""

from __future__ import annotations

from pathlib import Path

from .errors import ValidationError


def parse_kv(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"line {lineno}: expected 'key = value', got '{raw.strip()}'")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ValidationError(f"line {lineno}: empty key")
        if key in out:
            raise ValidationError(f"line {lineno}: duplicate key '{key}'")
        out[key] = value.strip()
    return out


def read_kv(path) -> dict[str, str]:
    return parse_kv(Path(path).read_text())


def format_kv(values: dict) -> str:
    lines = [f"{key} = {value}" for key, value in values.items()]
    return "\n".join(lines) + "\n"


def write_kv(path, values: dict) -> None:
    Path(path).write_text(format_kv(values))
