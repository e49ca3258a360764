"""CSV readers and writers for area-level, unit-level and report tables."""

from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import InvalidDatasetError
from .fh_model import AreaDataset
from .survey_moments import AreaUnitSample, group_units

AREA_FIXED = ("id", "y", "D", "kappa_e")
UNIT_COLUMNS = ("area_id", "y", "pi")
MSPE_COLUMNS = ("id", "theta_hat", "B", "psi_hat", "mspe_naive", "mspe_normal", "mspe_robust")
FIT_COLUMNS = ("id", "theta_hat", "B", "psi_hat")
UNIT_MOMENT_COLUMNS = ("area_id", "y_bar", "n_hat", "v", "mu4", "kappa_e")
STUDY_COLUMNS = ("group", "D", "estimator", "rb_pct", "rrmse_pct", "mc_se_rb")


def format_value(value) -> str:
    """Shortest round-trip text for floats; ``str`` for everything else."""
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return repr(value)
    return str(value)


def _number(text: str, column: str, line: int) -> float:
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise InvalidDatasetError(
            f"row {line}: column {column!r} is not a number: {text!r}"
        ) from None
    if not math.isfinite(value):
        raise InvalidDatasetError(f"row {line}: column {column!r} is not finite: {text!r}")
    return value


def read_area_csv(path: str | Path) -> AreaDataset:
    """Read ``id,y,D,kappa_e,x1,...,xp``; row numbers in errors count the header as 1."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise InvalidDatasetError(f"{path}: empty file") from None
        if tuple(header[:4]) != AREA_FIXED or len(header) < 5:
            raise InvalidDatasetError(
                f"{path}: header must be id,y,D,kappa_e,x1,...,xp; got {','.join(header)}"
            )
        xcols = header[4:]
        ids, ys, ds, ks, xs = [], [], [], [], []
        for line, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise InvalidDatasetError(
                    f"row {line}: expected {len(header)} fields, got {len(row)}"
                )
            ids.append(row[0].strip())
            ys.append(_number(row[1], "y", line))
            ds.append(_number(row[2], "D", line))
            ks.append(_number(row[3], "kappa_e", line))
            xs.append([_number(v, c, line) for v, c in zip(row[4:], xcols)])
            if not ds[-1] > 0:
                raise InvalidDatasetError(f"row {line}: D must be > 0")
            if not ks[-1] >= -2:
                raise InvalidDatasetError(f"row {line}: kappa_e must be >= -2")
    if not ids:
        raise InvalidDatasetError(f"{path}: no data rows")
    return AreaDataset(ys, xs, ds, ks, ids)


def write_area_csv(path: str | Path, data: AreaDataset) -> None:
    header = list(AREA_FIXED) + [f"x{j + 1}" for j in range(data.p)]
    rows = (
        [data.ids[i], float(data.y[i]), float(data.d[i]), float(data.kappa_e[i]),
         *map(float, data.x[i])]
        for i in range(data.m)
    )
    write_rows(path, header, rows)


def read_unit_csv(path: str | Path) -> list[AreaUnitSample]:
    """Read ``area_id,y,pi`` and split it into per-area samples."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise InvalidDatasetError(f"{path}: empty file") from None
        if tuple(header) != UNIT_COLUMNS:
            raise InvalidDatasetError(f"{path}: header must be area_id,y,pi; got {','.join(header)}")
        areas, ys, pis = [], [], []
        for line, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 3:
                raise InvalidDatasetError(f"row {line}: expected 3 fields, got {len(row)}")
            areas.append(row[0].strip())
            ys.append(_number(row[1], "y", line))
            pi = _number(row[2], "pi", line)
            if not 0 < pi <= 1:
                raise InvalidDatasetError(f"row {line}: pi must be in (0, 1], got {pi}")
            pis.append(pi)
    if not areas:
        raise InvalidDatasetError(f"{path}: no data rows")
    return group_units(areas, ys, pis)


def write_rows(path: str | Path, header: Sequence[str], rows: Iterable) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            if isinstance(row, Mapping):
                row = [row[h] for h in header]
            w.writerow([format_value(v) for v in row])
