"""Source catalogs in the SExtractor ASCII_HEAD layout.

Header lines look like ``#   1 NUMBER  Running object number``: a 1-based
column index followed by the column name. Any other ``#`` line is a comment.
Coordinates on disk are 1-indexed (FITS convention); records hold 0-indexed
pixel coordinates.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, TextIO

from ..errors import FormatError

REQUIRED = ("NUMBER", "X_IMAGE", "Y_IMAGE", "MAG_BEST", "FLAGS")

_DESCRIPTIONS = {
    "NUMBER": "Running object number",
    "X_IMAGE": "Object position along x [pixel]",
    "Y_IMAGE": "Object position along y [pixel]",
    "MAG_BEST": "Best of MAG_AUTO and MAG_ISOCOR [mag]",
    "FLAGS": "Extraction flags",
}


@dataclass(frozen=True)
class SourceRecord:
    id: int
    x: float
    y: float
    mag: float
    flags: int = 0


def parse_catalog(stream: TextIO | Iterable[str]) -> list[SourceRecord]:
    columns: dict[str, int] = {}
    records = []
    for lineno, line in enumerate(stream, start=1):
        text = line.strip()
        if not text:
            continue
        if text.startswith("#"):
            parts = text[1:].split()
            if len(parts) >= 2 and parts[0].isdigit():
                columns[parts[1]] = int(parts[0]) - 1
            continue
        missing = [name for name in REQUIRED if name not in columns]
        if missing:
            raise FormatError(f"line {lineno}: catalog header lacks column(s) {', '.join(missing)}")
        fields = text.split()
        try:
            values = {name: fields[columns[name]] for name in REQUIRED}
        except IndexError:
            raise FormatError(f"line {lineno}: expected at least {max(columns.values()) + 1} "
                              f"fields, found {len(fields)}") from None
        try:
            records.append(SourceRecord(
                id=int(values["NUMBER"]),
                x=float(values["X_IMAGE"]) - 1.0,
                y=float(values["Y_IMAGE"]) - 1.0,
                mag=float(values["MAG_BEST"]),
                flags=int(values["FLAGS"]),
            ))
        except ValueError as exc:
            raise FormatError(f"line {lineno}: non-numeric field ({exc})") from None
    return records


def read_catalog(path) -> list[SourceRecord]:
    with open(path, encoding="ascii") as fh:
        return parse_catalog(fh)


def format_catalog(records: Iterable[SourceRecord]) -> str:
    out = io.StringIO()
    for i, name in enumerate(REQUIRED, start=1):
        out.write(f"#{i:4d} {name:<15s} {_DESCRIPTIONS[name]}\n")
    for r in records:
        out.write(f"{r.id:10d} {r.x + 1.0!r} {r.y + 1.0!r} {r.mag!r} {r.flags:d}\n")
    return out.getvalue()


def write_catalog(records: Iterable[SourceRecord], path) -> None:
    Path(path).write_text(format_catalog(records), encoding="ascii")
