"""CSV / JSON data files and the run manifests that accompany them.

CSV files are UTF-8 with a header row and ``,`` separators; floats carry 17
significant digits so a re-read recovers every bit. JSON reports carry a
schema tag and store NaN as ``null``.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from pathlib import Path
from typing import Any, Iterable, Sequence

SCHEMA = "entb92/1"


def format_value(v: Any) -> str:
    if isinstance(v, float):
        text = format(v, ".17g")
        # keep integral floats recognizable as floats on re-read
        return text if any(ch in text for ch in ".eni") else text + ".0"
    return str(v)


def csv_text(columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([format_value(v) for v in row])
    return buf.getvalue()


def _parse(cell: str):
    try:
        return int(cell)
    except ValueError:
        pass
    try:
        return float(cell)
    except ValueError:
        return cell


def read_csv(path: str | Path) -> dict[str, list]:
    """Columns of a CSV written by this package, keyed by header name."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        cols: dict[str, list] = {h: [] for h in header}
        for row in reader:
            for h, cell in zip(header, row):
                cols[h].append(_parse(cell))
    return cols


def _clean(obj):
    if isinstance(obj, float):
        return None if math.isnan(obj) or math.isinf(obj) else obj
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "item") and callable(obj.item):  # numpy scalars
        return _clean(obj.item())
    return obj


def json_text(report: dict) -> str:
    return json.dumps(_clean({"schema": SCHEMA, **report}), indent=2, sort_keys=True, allow_nan=False) + "\n"


def read_json(path: str | Path) -> dict:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if data.get("schema") != SCHEMA:
        raise ValueError(f"unsupported schema {data.get('schema')!r}")
    return data


def sha256(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def manifest_path(out: str | Path) -> Path:
    out = Path(out)
    return out.with_name(out.name + ".manifest.json")


def write_output(text: str, out: str | Path | None, manifest: dict) -> None:
    """Write ``text`` to ``out`` (stdout when None) plus a sidecar manifest with its checksum."""
    if out is None:
        print(text, end="")
        return
    out = Path(out)
    out.write_text(text, encoding="utf-8")
    manifest_path(out).write_text(json_text({**manifest, "output": out.name, "sha256": sha256(text)}), encoding="utf-8")
