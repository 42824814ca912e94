"""CSV ingestion and report emission.

Dataset formats
---------------
replicates  long format, header ``item,value``, one row per observation
twoclass    wide format, header ``label,<item>,<item>,...``, one row per observation
binomial    header ``item,successes,trials``, one row per item

Numbers are written with 17 significant digits so every table round-trips.
"""

from __future__ import annotations

import csv
import json
import math
from array import array
from pathlib import Path

import numpy as np

from .bootstrap_infer import Binomial, Replicates, TwoClass
from .errors import DataError


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def _parse_cell(text: str):
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


def _float(text, line, what="value"):
    try:
        v = float(text)
    except ValueError:
        raise DataError(f"{what} {text!r} is not a number", line=line) from None
    if not math.isfinite(v):
        raise DataError(f"{what} {text!r} is not finite", line=line)
    return v


def _int(text, line, what):
    try:
        return int(text)
    except ValueError:
        raise DataError(f"{what} {text!r} is not an integer", line=line) from None


def _open(path):
    return open(path, newline="", encoding="utf-8")


def _header(reader, expected, path):
    try:
        header = next(reader)
    except StopIteration:
        raise DataError(f"{path} is empty", line=1) from None
    header = [h.strip() for h in header]
    if expected is not None and header != list(expected):
        raise DataError(f"expected header {','.join(expected)!r}, got {','.join(header)!r}", line=1)
    return header


def parse_replicates(path) -> Replicates:
    """Read long-format replicate data; items keep first-appearance order."""
    groups: dict[str, array] = {}
    with _open(path) as fh:
        reader = csv.reader(fh)
        _header(reader, ("item", "value"), path)
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != 2:
                raise DataError(f"expected 2 fields, got {len(row)}", line=line)
            item = row[0].strip()
            if not item:
                raise DataError("empty item id", line=line)
            groups.setdefault(item, array("d")).append(_float(row[1].strip(), line))
    if not groups:
        raise DataError(f"{path} has a header but no observations", line=2)
    return Replicates(list(groups), [np.frombuffer(a, dtype=float) for a in groups.values()])


def parse_twoclass(path) -> TwoClass:
    with _open(path) as fh:
        reader = csv.reader(fh)
        header = _header(reader, None, path)
        if not header or header[0] != "label":
            raise DataError("first column must be 'label'", line=1)
        items = header[1:]
        if not items:
            raise DataError("no item columns", line=1)
        if any(not i for i in items):
            raise DataError("empty item id in header", line=1)
        if len(set(items)) != len(items):
            raise DataError("duplicate item ids in header", line=1)
        labels = []
        values = array("d")
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"ragged row: expected {len(header)} fields, got {len(row)}", line=line)
            label = row[0].strip()
            if label not in ("0", "1"):
                raise DataError(f"label {label!r} must be 0 or 1", line=line)
            labels.append(int(label))
            values.extend(_float(v.strip(), line) for v in row[1:])
    if not labels:
        raise DataError(f"{path} has no observations", line=2)
    labels = np.array(labels)
    for c in (0, 1):
        if not (labels == c).any():
            raise DataError(f"only one class present; no rows with label {c}")
    matrix = np.frombuffer(values, dtype=float).reshape(len(labels), len(items))
    return TwoClass(labels, matrix, items)


def parse_binomial(path) -> Binomial:
    ids, succ, trials = [], [], []
    seen = set()
    with _open(path) as fh:
        reader = csv.reader(fh)
        _header(reader, ("item", "successes", "trials"), path)
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != 3:
                raise DataError(f"expected 3 fields, got {len(row)}", line=line)
            item = row[0].strip()
            if not item:
                raise DataError("empty item id", line=line)
            if item in seen:
                raise DataError(f"duplicate item id {item!r}", line=line)
            s = _int(row[1].strip(), line, "successes")
            t = _int(row[2].strip(), line, "trials")
            if t < 1:
                raise DataError(f"trials must be >= 1, got {t}", line=line)
            if not 0 <= s <= t:
                raise DataError(f"successes {s} must lie in [0, trials={t}]", line=line)
            seen.add(item)
            ids.append(item)
            succ.append(s)
            trials.append(t)
    if not ids:
        raise DataError(f"{path} has no items", line=2)
    return Binomial(ids, np.array(succ), np.array(trials))


PARSERS = {"replicates": parse_replicates, "twoclass": parse_twoclass, "binomial": parse_binomial}


def write_replicates(ds: Replicates, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["item", "value"])
        for iid, s in zip(ds.item_ids, ds.samples):
            w.writerows([iid, fmt(v)] for v in s)


def write_twoclass(ds: TwoClass, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["label", *ds.item_ids])
        for lab, row in zip(ds.labels, ds.matrix):
            w.writerow([str(int(lab)), *(fmt(v) for v in row)])


def write_binomial(ds: Binomial, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["item", "successes", "trials"])
        for iid, s, t in zip(ds.item_ids, ds.successes, ds.trials):
            w.writerow([iid, int(s), int(t)])


def write_table(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows([fmt(v) for v in row] for row in rows)


def read_table(path) -> tuple[list[str], list[list]]:
    """Inverse of :func:`write_table`: header plus typed rows."""
    with _open(path) as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, [[_parse_cell(c) for c in row] for row in reader]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        obj = float(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps_report(bundle: dict) -> str:
    return json.dumps(_jsonable(bundle), indent=2, sort_keys=True) + "\n"


def sibling(out: Path, suffix: str) -> Path:
    """``report.json`` -> ``report.table.csv`` for ``suffix='.table.csv'``."""
    out = Path(out)
    stem = out.name[: -len(out.suffix)] if out.suffix else out.name
    return out.with_name(stem + suffix)
