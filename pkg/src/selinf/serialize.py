"""CSV ingestion and JSON/CSV result artifacts.

Result JSON layout::

    {manifest, model: [names], signs, lambda, sigma2, null_model,
     intervals: [{name, estimate, lower, upper, p_value, mode, region: [[a, b], ...]}]}

Floats are written in shortest round-trip form. JSON has no infinity, so an
infinite endpoint is written as ``null``; its position (left or right end of
an interval) tells which sign it carries.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .errors import ValidationError

__all__ = [
    "read_csv_table",
    "result_to_dict",
    "intervals_to_csv",
    "parse_intervals_csv",
    "dumps",
    "write_atomic",
    "file_sha256",
]


def read_csv_table(path, response: str):
    """Read a headed numeric CSV; return ``(X, y, predictor_names)``."""
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"data file not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValidationError(f"{path}: file is empty") from None
        if response not in header:
            raise ValidationError(f"{path}: response column {response!r} not in header {header}")
        if len(set(header)) != len(header):
            raise ValidationError(f"{path}: duplicate column names in header")
        rows = []
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ValidationError(
                    f"{path}: line {line_no} has {len(row)} fields, expected {len(header)}"
                )
            values = []
            for col, cell in zip(header, row):
                try:
                    v = float(cell)
                except ValueError:
                    raise ValidationError(
                        f"{path}: line {line_no}, column {col!r}: non-numeric value {cell!r}"
                    ) from None
                if not math.isfinite(v):
                    raise ValidationError(
                        f"{path}: line {line_no}, column {col!r}: non-finite value {cell!r}"
                    )
                values.append(v)
            rows.append(values)
    if not rows:
        raise ValidationError(f"{path}: no data rows")
    data = np.array(rows)
    r = header.index(response)
    names = [h for i, h in enumerate(header) if i != r]
    X = np.delete(data, r, axis=1)
    if X.shape[1] == 0:
        raise ValidationError(f"{path}: no predictor columns besides the response")
    return X, data[:, r], names


def _num(v):
    if v is None:
        return None
    v = float(v)
    return v if math.isfinite(v) else None


def clean_json(obj):
    """Recursively replace non-finite floats with ``None`` and numpy scalars with Python ones."""
    if isinstance(obj, dict):
        return {str(k): clean_json(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean_json(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _num(obj)
    return obj


def interval_to_dict(iv):
    d = {
        "name": iv.name,
        "estimate": iv.estimate,
        "lower": iv.lower,
        "upper": iv.upper,
        "p_value": iv.pivot_at_zero,
        "mode": iv.mode,
        "region": iv.region_summary(),
    }
    if iv.error:
        d["error"] = iv.error
    return d


def result_to_dict(result, manifest: dict, baselines: dict | None = None) -> dict:
    out = {
        "manifest": manifest,
        "model": result.model_names,
        "signs": result.signs,
        "lambda": result.penalty.lam,
        "gamma": result.penalty.gamma,
        "sigma2": result.sigma2,
        "null_model": result.null_model,
        "intervals": [interval_to_dict(iv) for iv in result.intervals],
    }
    if baselines:
        out["baselines"] = {k: [interval_to_dict(iv) for iv in v] for k, v in baselines.items()}
    return clean_json(out)


def dumps(obj) -> str:
    return json.dumps(clean_json(obj), indent=2, allow_nan=False) + "\n"


CSV_FIELDS = ["name", "estimate", "lower", "upper", "p_value", "mode", "region", "error"]


def _fmt(v):
    return repr(float(v))


def _fmt_region(region):
    return ";".join(f"{_fmt(a)}:{_fmt(b)}" for a, b in region)


def intervals_to_csv(intervals) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for iv in intervals:
        w.writerow([
            iv.name, _fmt(iv.estimate), _fmt(iv.lower), _fmt(iv.upper), _fmt(iv.pivot_at_zero),
            iv.mode, _fmt_region(iv.region_summary()), iv.error or "",
        ])
    return buf.getvalue()


def parse_intervals_csv(text: str) -> list[dict]:
    """Inverse of :func:`intervals_to_csv`, infinite values mapped to ``None`` as in JSON."""
    out = []
    for row in csv.DictReader(io.StringIO(text)):
        region = []
        if row["region"]:
            for piece in row["region"].split(";"):
                a, b = piece.split(":")
                region.append([_num(a), _num(b)])
        d = {
            "name": row["name"],
            "estimate": _num(row["estimate"]),
            "lower": _num(row["lower"]),
            "upper": _num(row["upper"]),
            "p_value": _num(row["p_value"]),
            "mode": row["mode"],
            "region": region,
        }
        if row["error"]:
            d["error"] = row["error"]
        out.append(d)
    return out


def write_atomic(path, data) -> None:
    """Write text or bytes to ``path`` via a temporary file and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"newline": ""})) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()
