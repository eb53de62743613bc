"""Dataset and units ingestion, noise injection, report persistence."""

from __future__ import annotations

import csv
import json
import math
from decimal import Decimal
from fractions import Fraction
from pathlib import Path

import numpy as np

from .core import Dataset
from .dimension import UnitVector
from .errors import ParseError, ShapeError

TARGET_ROW = "__target__"


def rng(seed: int) -> np.random.Generator:
    """Seeded generator on Philox-4x64, a counter-based PRNG with a fixed stream."""
    return np.random.Generator(np.random.Philox(int(seed)))


def load_points(path) -> tuple[list[str], np.ndarray, np.ndarray]:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError("empty file", 1) from None
        if len(header) < 2:
            raise ParseError("need at least one variable column and a target column", 1)
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ShapeError(f"expected {len(header)} fields, got {len(row)}", lineno)
            try:
                vals = [float(c) for c in row]
            except ValueError as exc:
                raise ParseError(str(exc), lineno) from None
            if not all(math.isfinite(v) for v in vals):
                raise ValueError(f"line {lineno}: NaN or infinite value")
            rows.append(vals)
    if not rows:
        raise ShapeError("no data rows")
    arr = np.array(rows, dtype=float)
    return header[:-1], arr[:, :-1], arr[:, -1]


def load_units(path) -> tuple[list[str], dict[str, UnitVector], UnitVector]:
    """Units CSV: ``name,dim1,...`` header, one row per variable and a ``__target__`` row."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError("empty units file", 1) from None
        dims = header[1:]
        if not dims:
            raise ParseError("units header needs at least one dimension", 1)
        table: dict[str, UnitVector] = {}
        target = None
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ShapeError(f"expected {len(header)} fields, got {len(row)}", lineno)
            try:
                vec = UnitVector(tuple(Fraction(c.strip()) for c in row[1:]))
            except (ValueError, ZeroDivisionError) as exc:
                raise ParseError(f"bad exponent: {exc}", lineno) from None
            name = row[0].strip()
            if name == TARGET_ROW:
                target = vec
            else:
                table[name] = vec
    if target is None:
        raise ParseError(f"units file lacks a {TARGET_ROW} row")
    return dims, table, target


def load_dataset(points_path, units_path=None) -> Dataset:
    names, X, y = load_points(points_path)
    units = target = None
    if units_path is not None:
        _, units, target = load_units(units_path)
        missing = [v for v in names if v not in units]
        if missing:
            raise ShapeError(f"units file lacks {', '.join(missing)}")
        units = {v: units[v] for v in names}
    return Dataset(names, X, y, units, target)


def write_points(path, data: Dataset) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(list(data.variable_names) + ["y"])
        for xi, yi in zip(data.X, data.y):
            w.writerow([repr(float(v)) for v in xi] + [repr(float(yi))])


def write_units(path, data: Dataset, dim_names=None) -> None:
    dims = len(data.target_units)
    dim_names = dim_names or [f"dim{i + 1}" for i in range(dims)]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["name"] + list(dim_names))
        for v in data.variable_names:
            w.writerow([v] + [_fmt_fraction(e) for e in data.units[v].exps])
        w.writerow([TARGET_ROW] + [_fmt_fraction(e) for e in data.target_units.exps])


def _fmt_fraction(f: Fraction) -> str:
    if f.denominator == 1:
        return str(f.numerator)
    d = f.denominator
    for q in (2, 5):
        while d % q == 0:
            d //= q
    if d == 1:
        return str(Decimal(f.numerator) / Decimal(f.denominator))
    return f"{f.numerator}/{f.denominator}"


def inject_noise(data: Dataset, level: float, seed: int) -> Dataset:
    """Multiplicative Gaussian noise on the targets: y * (1 + level * g)."""
    if level < 0:
        raise ValueError("noise level must be non-negative")
    if level == 0:
        return data.with_targets(data.y.copy())
    g = rng(seed).standard_normal(data.n_points)
    return data.with_targets(data.y * (1.0 + level * g))


def save_report(report, path) -> None:
    Path(path).write_text(json.dumps(report.to_dict(), indent=2), encoding="utf-8")


def load_report(path):
    from .scheduler import SearchReport

    return SearchReport.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
