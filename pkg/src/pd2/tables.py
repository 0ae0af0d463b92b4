"""Tables and their two text encodings.

Columnar text is comma-separated with a header row. Metadata goes in
leading ``# key=<json>`` lines, and floats are written with 17 significant
digits. Parsing a columnar document and emitting it again reproduces it
byte for byte.

Structured text is a JSON document {"metadata", "columns", "rows"} carrying
the same values.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

__all__ = ["Table", "format_cell", "parse_cell", "to_columnar", "from_columnar", "to_structured",
           "from_structured"]


def format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return "%.17g" % value
    if hasattr(value, "item"):  # numpy scalar
        return format_cell(value.item())
    text = str(value)
    if any(c in text for c in ',\n"'):
        raise ValueError(f"cell text may not contain commas, quotes or newlines: {text!r}")
    return text


def parse_cell(text: str):
    if text == "":
        return None
    if text in ("true", "false"):
        return text == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


@dataclass
class Table:
    columns: list
    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def column(self, name):
        i = self.columns.index(name)
        return [row[i] for row in self.rows]

    def records(self):
        return [dict(zip(self.columns, row)) for row in self.rows]

    def append(self, **values):
        self.rows.append(tuple(values.get(c) for c in self.columns))


def to_columnar(table: Table) -> str:
    lines = [f"# {key}={json.dumps(value, separators=(',', ':'))}" for key, value in table.metadata.items()]
    lines.append(",".join(table.columns))
    for row in table.rows:
        lines.append(",".join(format_cell(v) for v in row))
    return "\n".join(lines) + "\n"


def from_columnar(text: str) -> Table:
    metadata = {}
    lines = text.splitlines()
    i = 0
    while i < len(lines) and lines[i].startswith("# "):
        key, _, value = lines[i][2:].partition("=")
        metadata[key] = json.loads(value)
        i += 1
    if i >= len(lines):
        raise ValueError("missing header row")
    columns = lines[i].split(",")
    rows = []
    for line in lines[i + 1:]:
        cells = line.split(",")
        if len(cells) != len(columns):
            raise ValueError(f"row has {len(cells)} cells, header has {len(columns)}")
        rows.append(tuple(parse_cell(c) for c in cells))
    return Table(columns, rows, metadata)


def _json_cell(value):
    if hasattr(value, "item"):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return format_cell(value)
    return value


def to_structured(table: Table) -> str:
    doc = {
        "metadata": table.metadata,
        "columns": list(table.columns),
        "rows": [[_json_cell(v) for v in row] for row in table.rows],
    }
    return json.dumps(doc, indent=1) + "\n"


def from_structured(text: str) -> Table:
    doc = json.loads(text)
    rows = []
    for row in doc["rows"]:
        rows.append(tuple(float(v) if v in ("inf", "-inf", "nan") else v for v in row))
    return Table(doc["columns"], rows, doc["metadata"])
