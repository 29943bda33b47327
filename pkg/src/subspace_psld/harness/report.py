"""Aggregate result CSVs into per-task, per-method summaries.

Rows are grouped by task, algorithm and regime, and additionally by
``config_hash`` so that two configurations of the same algorithm (say a
matrix and a scalar step) stay apart.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .runner import COLUMNS

METRICS = ("relative_error", "oracle_error", "psnr", "ssim")
KEYS = ("task", "algorithm", "regime", "config_hash")


class ReportError(ValueError):
    pass


def read_rows(paths) -> list[dict]:
    rows = []
    for p in paths:
        try:
            with open(p, newline="") as fh:
                reader = csv.DictReader(fh)
                if reader.fieldnames is None or not set(COLUMNS) <= set(reader.fieldnames):
                    raise ReportError(f"{p}: missing result columns")
                for line, raw in enumerate(reader, start=2):
                    try:
                        row = {k: raw[k] for k in KEYS}
                        row.update({m: float(raw[m]) for m in METRICS})
                    except (TypeError, ValueError) as exc:
                        raise ReportError(f"{p}:{line}: malformed row ({exc})") from None
                    rows.append(row)
        except OSError as exc:
            raise ReportError(f"cannot read {p}: {exc}") from None
    return rows


def _mean_std(values):
    v = np.asarray(values, dtype=float)
    v = v[~np.isnan(v)]
    if v.size == 0:
        return float("nan"), float("nan")
    if np.any(np.isinf(v)):
        same = bool(np.all(v == v[0]))
        return (float(v[0]) if same else float("inf")), (0.0 if same else float("nan"))
    return float(v.mean()), float(v.std())


def summarize(rows: list[dict]) -> list[dict]:
    groups: dict[tuple, list[dict]] = {}
    for r in rows:
        groups.setdefault(tuple(r[k] for k in KEYS), []).append(r)
    out = []
    for key in sorted(groups):
        g = groups[key]
        entry = dict(zip(KEYS, key))
        entry["n"] = len(g)
        for m in METRICS:
            entry[f"{m}_mean"], entry[f"{m}_std"] = _mean_std([r[m] for r in g])
        out.append(entry)
    return out


def _fmt(v):
    if isinstance(v, float):
        if math.isinf(v) or math.isnan(v):
            return str(v)
        return f"{v:.6g}"
    return str(v)


def write_summary(summary: list[dict], out_dir) -> tuple[Path, str]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cols = list(KEYS) + ["n"] + [f"{m}_{s}" for m in METRICS for s in ("mean", "std")]
    path = out / "summary.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for e in summary:
            w.writerow([format(e[c], ".17g") if isinstance(e[c], float) else e[c] for c in cols])
    headers = list(KEYS) + ["n"] + [f"{m} (mean ± std)" for m in METRICS]
    body = [[e[k] for k in KEYS] + [str(e["n"])]
            + [f"{_fmt(e[m + '_mean'])} ± {_fmt(e[m + '_std'])}" for m in METRICS] for e in summary]
    widths = [max(len(str(x)) for x in col) for col in zip(headers, *body)]
    lines = ["  ".join(str(x).ljust(w) for x, w in zip(row, widths)) for row in [headers] + body]
    text = "\n".join(lines) + "\n"
    (out / "summary.txt").write_text(text)
    return path, text
