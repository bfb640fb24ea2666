"""Long-format choice CSV: ``task_id,alt_id,chosen,<covariates...>``.

One row per alternative. Within a task exactly one row has ``chosen=1``,
or none when the dataset has an outside option and it was chosen. Rows of
a task need not be contiguous; tasks keep their first-appearance order.
"""
from __future__ import annotations

import csv

import numpy as np

from .errors import ConfigError, NormLogitError
from .model import OUTSIDE, ChoiceDataset

HEADER = ("task_id", "alt_id", "chosen")


def read_long_csv(path, includes_outside_option=True, explicit_intercept=False) -> ChoiceDataset:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ConfigError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if tuple(header[:3]) != HEADER or len(header) < 4:
            raise ConfigError(
                f"{path}: header must be task_id,alt_id,chosen,<covariates...>; got {header}"
            )
        names = tuple(header[3:])
        if len(set(names)) != len(names):
            raise ConfigError(f"{path}: duplicate covariate names")

        tasks = {}
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ConfigError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            if any(cell.strip() == "" for cell in row):
                raise ConfigError(f"{path}:{lineno}: missing value")
            task_id, alt_id, flag = row[0], row[1], row[2].strip()
            if flag not in ("0", "1"):
                raise ConfigError(f"{path}:{lineno}: chosen must be 0 or 1, got {flag!r}")
            try:
                x = [float(c) for c in row[3:]]
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: {exc}") from None
            if not np.all(np.isfinite(x)):
                raise ConfigError(f"{path}:{lineno}: non-finite covariate")
            tasks.setdefault(task_id, []).append((alt_id, flag == "1", x))

    if not tasks:
        raise ConfigError(f"{path}: no data rows")
    X, ptr, chosen, alt_ids = [], [0], [], []
    for task_id, rows in tasks.items():
        picks = [j for j, r in enumerate(rows) if r[1]]
        if len(picks) > 1:
            raise ConfigError(f"{path}: task {task_id!r} has {len(picks)} chosen rows")
        if not picks and not includes_outside_option:
            raise ConfigError(f"{path}: task {task_id!r} has no chosen row and no outside option")
        chosen.append(picks[0] if picks else OUTSIDE)
        for alt_id, _, x in rows:
            X.append(x)
            alt_ids.append(alt_id)
        ptr.append(len(X))
    try:
        return ChoiceDataset(np.array(X), np.array(ptr), np.array(chosen), names,
                             includes_outside_option, explicit_intercept,
                             tuple(tasks), tuple(alt_ids))
    except NormLogitError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def write_long_csv(data: ChoiceDataset, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HEADER + tuple(data.covariate_names))
        for t in range(data.n_tasks):
            lo, hi = data.task_ptr[t], data.task_ptr[t + 1]
            for j, r in enumerate(range(lo, hi)):
                w.writerow([data.task_ids[t], data.alt_ids[r], int(data.chosen[t] == j)]
                           + [repr(float(v)) for v in data.X[r]])
