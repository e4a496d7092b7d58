"""File formats: microdata CSV, distribution and sensitivity JSON, CSV outputs.

Observed distributions and counts share one JSON layout::

    {
      "items": ["Ind", "Sec", "Att"],
      "levels": [["yes", "no"], ["yes", "no"], ["yes", "no"]],
      "patterns": ["000", "001", ...],
      "cells": {"001": [{"cell": ["yes", "no"], "mass": 0.01}, ...], ...}
    }

``cell`` lists the labels of the items observed under the pattern, in item
order.  Count files use integer masses (``"count"`` is accepted as an alias).
All writes go to a temporary file that is renamed into place.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .categorical import MISSING, CategoricalSpace, FullDataDistribution, ObservedDistribution
from .continuous import WeightedSample
from .errors import InvalidArgumentError
from .lattice import Pattern
from .posterior import ObservedCounts
from .sensitivity import SensitivityFunction, SensitivityGrid

__all__ = [
    "MicrodataTable",
    "fmt",
    "write_text",
    "write_json",
    "write_csv",
    "file_digest",
    "space_to_json",
    "space_from_json",
    "observed_to_json",
    "observed_from_json",
    "read_distribution",
    "full_data_rows",
    "full_data_to_json",
    "read_microdata",
    "aggregate",
    "read_weighted_sample",
    "xi_from_json",
    "grid_from_json",
    "parse_functional",
]

DEFAULT_MISSING = ("", "NA")


def fmt(value) -> str:
    """Serialise a number; floats get 17 significant digits."""
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


def write_text(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _jsonable(obj):
    if isinstance(obj, Mapping):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, Pattern):
        return str(obj)
    return obj


def write_json(path, obj) -> Path:
    return write_text(path, json.dumps(_jsonable(obj), indent=2) + "\n")


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return write_text(path, buf.getvalue())


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


# --------------------------------------------------------------------------
# Distributions


def space_to_json(space: CategoricalSpace) -> dict:
    return {"items": list(space.names), "levels": [list(lab) for lab in space.labels]}


def space_from_json(doc: Mapping) -> CategoricalSpace:
    levels = doc["levels"]
    if all(isinstance(v, int) for v in levels):
        return CategoricalSpace(tuple(levels), doc.get("items"))
    return CategoricalSpace(tuple(len(v) for v in levels), doc.get("items"), tuple(tuple(v) for v in levels))


def observed_to_json(obj: ObservedDistribution | ObservedCounts) -> dict:
    space = obj.space
    arrays = obj.mass if isinstance(obj, ObservedDistribution) else obj.counts
    cells = {}
    for m in obj.patterns:
        arr = arrays[m]
        entries = []
        for idx in np.ndindex(arr.shape):
            labels = [space.labels[j][k] for j, k in zip(m.observed, idx)]
            entries.append({"cell": labels, "mass": arr[idx].item()})
        cells[str(m)] = entries
    return {**space_to_json(space), "patterns": [str(m) for m in obj.patterns], "cells": cells}


def observed_from_json(doc: Mapping, tol: float = 1e-9):
    """Parse a distribution or count document.

    Returns :class:`ObservedCounts` when every entry is an integer count
    (or the document sets ``"kind": "counts"``), else an
    :class:`ObservedDistribution` whose total must be 1 within `tol`.
    """
    try:
        space = space_from_json(doc)
        patterns = [Pattern(s) for s in doc.get("patterns", doc["cells"].keys())]
        arrays, all_int = {}, True
        for m in patterns:
            arr = np.zeros(space.observed_shape(m))
            seen = set()
            for entry in doc["cells"].get(str(m), []):
                cell = tuple(space.level_index(j, lab) for j, lab in zip(m.observed, entry["cell"]))
                if len(cell) != len(m.observed):
                    raise InvalidArgumentError(f"pattern {m}: cell {entry['cell']} has wrong length")
                if cell in seen:
                    raise InvalidArgumentError(f"pattern {m}: duplicate cell {entry['cell']}")
                seen.add(cell)
                value = entry["mass"] if "mass" in entry else entry["count"]
                all_int &= isinstance(value, int) and not isinstance(value, bool)
                arr[cell] = value
            arrays[m] = arr
    except (KeyError, TypeError) as exc:
        raise InvalidArgumentError(f"malformed distribution document: {exc}") from exc
    if doc.get("kind") == "counts" or (all_int and doc.get("kind") != "distribution"):
        return ObservedCounts(space, arrays)
    return ObservedDistribution(space, arrays, tol=tol)


def read_distribution(path, tol: float = 1e-9):
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidArgumentError(f"{path}: invalid JSON ({exc})") from exc
    return observed_from_json(doc, tol)


def full_data_rows(g: FullDataDistribution):
    """Rows ``(x_1 label, ..., x_p label, pattern, g)`` in pattern then cell order."""
    space = g.space
    for cell, m, value in g.records():
        yield [space.labels[j][k] for j, k in enumerate(cell)] + [str(m), value]


def full_data_to_json(g: FullDataDistribution) -> dict:
    return {
        **space_to_json(g.space),
        "patterns": [str(m) for m in g.patterns],
        "cells": [
            {"cell": row[:-2], "pattern": row[-2], "mass": row[-1]} for row in full_data_rows(g)
        ],
    }


# --------------------------------------------------------------------------
# Microdata


@dataclass
class MicrodataTable:
    """Categorical records as level indices with :data:`MISSING` blanks."""

    space: CategoricalSpace
    records: np.ndarray
    weights: np.ndarray | None = None


def _read_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InvalidArgumentError(f"{path}: empty file") from None
        rows = [(i + 2, row) for i, row in enumerate(reader) if row]
    if not rows:
        raise InvalidArgumentError(f"{path}: no data rows")
    return [h.strip() for h in header], rows


def read_microdata(
    path,
    items: Sequence[str] | None = None,
    levels: Mapping[str, Sequence[str]] | None = None,
    missing: Sequence[str] = DEFAULT_MISSING,
    recode: Mapping[str, str | None] | None = None,
    weight: str | None = None,
) -> MicrodataTable:
    """Read categorical microdata.

    Values found in `recode` are replaced first (a None target means
    missing), then values in `missing` become blanks.  Without `levels`, the
    domain of each item is its sorted distinct non-missing values.
    """
    header, rows = _read_rows(path)
    items = list(items) if items else [h for h in header if h != weight]
    try:
        cols = [header.index(c) for c in items]
        wcol = header.index(weight) if weight else None
    except ValueError as exc:
        raise InvalidArgumentError(f"{path}: column not found ({exc})") from exc
    recode = dict(recode or {})
    missing = set(missing)

    def clean(v):
        v = v.strip()
        if v in recode:
            v = recode[v]
        return None if v is None or v in missing else v

    values = [[clean(row[c]) if c < len(row) else None for c in cols] for _, row in rows]
    if levels is None:
        levels = {
            name: sorted({v[j] for v in values if v[j] is not None}) for j, name in enumerate(items)
        }
    space = CategoricalSpace.from_labels({name: list(levels[name]) for name in items})
    records = np.full((len(rows), space.p), MISSING, dtype=np.int64)
    for i, ((line, _), vals) in enumerate(zip(rows, values)):
        for j, v in enumerate(vals):
            if v is None:
                continue
            try:
                records[i, j] = space.level_index(j, v)
            except InvalidArgumentError:
                raise InvalidArgumentError(
                    f"{path}, line {line}: value {v!r} outside the domain of {items[j]}"
                ) from None
    weights = None
    if wcol is not None:
        try:
            weights = np.array([float(row[wcol]) for _, row in rows])
        except ValueError as exc:
            raise InvalidArgumentError(f"{path}: bad weight ({exc})") from exc
        if np.any(weights <= 0):
            raise InvalidArgumentError(f"{path}: weights must be positive")
    return MicrodataTable(space, records, weights)


def aggregate(table: MicrodataTable) -> ObservedCounts:
    """Counts per (pattern, observed cell); the realised patterns define the set."""
    if table.records.shape[0] == 0:
        raise InvalidArgumentError("no records")
    complete = np.all(table.records != MISSING, axis=1)
    if not complete.any():
        raise InvalidArgumentError(
            "no record observes every item; the all-observed pattern must occur"
        )
    return ObservedCounts.from_records(table.space, table.records)


def read_weighted_sample(
    path,
    columns: tuple[str, str] = ("x1", "x2"),
    weight: str | None = "weight",
    where=None,
    missing: Sequence[str] = DEFAULT_MISSING,
) -> WeightedSample:
    """Read two continuous columns (blank or NA = missing) and an optional weight column.

    `where` is an optional predicate over the row dict used to filter rows.
    """
    header, rows = _read_rows(path)
    try:
        c1, c2 = header.index(columns[0]), header.index(columns[1])
    except ValueError as exc:
        raise InvalidArgumentError(f"{path}: column not found ({exc})") from exc
    wcol = header.index(weight) if weight and weight in header else None
    x1, x2, w = [], [], []
    for line, row in rows:
        record = dict(zip(header, row))
        if where is not None and not where(record):
            continue
        try:
            vals = [np.nan if row[c].strip() in missing else float(row[c]) for c in (c1, c2)]
            wt = float(row[wcol]) if wcol is not None else 1.0
        except (ValueError, IndexError) as exc:
            raise InvalidArgumentError(f"{path}, line {line}: {exc}") from exc
        x1.append(vals[0])
        x2.append(vals[1])
        w.append(wt)
    if not x1:
        raise InvalidArgumentError(f"{path}: no rows left after filtering")
    return WeightedSample(np.array(x1), np.array(x2), np.array(w))


# --------------------------------------------------------------------------
# Sensitivity specifications


def xi_from_json(doc: Mapping, space: CategoricalSpace) -> SensitivityFunction:
    """``{"reference": {item: level}, "offsets": {item: {level: value}}}``."""
    return SensitivityFunction.from_offsets(space, doc.get("offsets", {}), doc.get("reference"))


def grid_from_json(doc: Mapping, space: CategoricalSpace) -> SensitivityGrid:
    """``{"reference": {...}, "grid": {item: {"level": L, "values": [...]}}}``, crossed."""
    axes = {item: (spec["level"], spec["values"]) for item, spec in doc["grid"].items()}
    return SensitivityGrid.cross(space, axes, doc.get("reference"))


def parse_functional(text: str) -> tuple[str, dict]:
    """Parse ``name=item:level[|level],item:level`` into a conjunction mapping.

    An empty right-hand side is the sure event.
    """
    if "=" not in text:
        raise InvalidArgumentError(f"functional {text!r} must look like name=item:level,...")
    name, spec = text.split("=", 1)
    event = {}
    for part in filter(None, (s.strip() for s in spec.split(","))):
        if ":" not in part:
            raise InvalidArgumentError(f"functional term {part!r} must look like item:level")
        item, levels = part.split(":", 1)
        event[item.strip()] = [lv.strip() for lv in levels.split("|")]
    return name.strip(), event
