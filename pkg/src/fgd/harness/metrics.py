"""Comma-separated metrics files; reals carry 17 significant digits."""
from dataclasses import astuple, dataclass, fields
import csv
import math

import numpy as np
from typing import Optional


@dataclass
class MetricsRow:
    step: int
    epoch: int
    loss: float
    loss_gap: Optional[float]
    v_value: float
    stiefel_dist: float
    tangency: float
    wall_ns: int


METRIC_COLUMNS = tuple(f.name for f in fields(MetricsRow))


def fmt(x):
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(x)
    x = float(x)
    if math.isnan(x):
        return "nan"
    return format(x, ".17g")


def write_table(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def write_metrics(path, rows, extra=None):
    """``rows``: MetricsRow list; ``extra``: optional {column: per-row values}."""
    extra = extra or {}
    header = list(METRIC_COLUMNS) + list(extra)
    body = []
    for i, r in enumerate(rows):
        body.append(list(astuple(r)) + [extra[c][i] for c in extra])
    write_table(path, header, body)


def read_table(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
