"""Interval lower bounds on the SSE of partially assigned gentrees."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import EPS_DIV, Dataset, Gentree, Node, Operator, monomial_table

INF = math.inf


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    def __add__(self, o):
        return Interval(self.lo + o.lo, self.hi + o.hi)

    def __sub__(self, o):
        return Interval(self.lo - o.hi, self.hi - o.lo)

    def __mul__(self, o):
        ps = [_mul(a, b) for a in (self.lo, self.hi) for b in (o.lo, o.hi)]
        return Interval(min(ps), max(ps))

    def __truediv__(self, o):
        if o.lo <= EPS_DIV and o.hi >= -EPS_DIV:
            return Interval(-INF, INF)
        return self * Interval(1.0 / o.hi, 1.0 / o.lo)

    def sqrt(self):
        if self.hi < 0:
            return None
        return Interval(math.sqrt(max(self.lo, 0.0)), math.sqrt(self.hi))

    def exp(self):
        return Interval(_exp(self.lo), _exp(self.hi))

    def sq_dist(self, y: float) -> float:
        if self.lo <= y <= self.hi:
            return 0.0
        gap = self.lo - y if y < self.lo else y - self.hi
        return gap * gap


def _mul(a: float, b: float) -> float:
    # 0 * inf counts as 0: the zero endpoint is attained by a finite value
    if a == 0.0 or b == 0.0:
        return 0.0
    return a * b


def _exp(v: float) -> float:
    try:
        return math.exp(v)
    except OverflowError:
        return INF


@dataclass
class PartialState:
    """Remaining freedom per leaf: candidate power vectors and a constant range."""

    leaf_powers: list[Sequence[tuple[int, ...]]]
    leaf_h: list[tuple[float, float]]

    @property
    def fully_assigned(self) -> bool:
        return all(len(p) == 1 for p in self.leaf_powers) and all(lo == hi for lo, hi in self.leaf_h)


def _eval_interval(root: Node, leaf_iv: list[Interval | None]) -> Interval | None:
    it = iter(leaf_iv)

    def ev(n: Node):
        if n.op is None:
            return next(it)
        kids = [ev(c) for c in n.children]
        if any(k is None for k in kids):
            return None
        op = n.op
        if op is Operator.ADD:
            return kids[0] + kids[1]
        if op is Operator.SUB:
            return kids[0] - kids[1]
        if op is Operator.MUL:
            return kids[0] * kids[1]
        if op is Operator.DIV:
            return kids[0] / kids[1]
        if op is Operator.SQRT:
            return kids[0].sqrt()
        return kids[0].exp()

    return ev(root)


def interval_lower_bound(tree: Gentree, state: PartialState, data: Dataset) -> float:
    """Sum over points of the squared distance from y to the model's range.

    ``inf`` when some point is undefined for every completion.
    """
    tables = [monomial_table(data.X, list(p)) for p in state.leaf_powers]
    total = 0.0
    for i, y in enumerate(data.y):
        ivs: list[Interval | None] = []
        for tab, (hlo, hhi) in zip(tables, state.leaf_h):
            col = tab[:, i]
            col = col[np.isfinite(col)]
            if col.size == 0:
                ivs.append(None)
            else:
                ivs.append(Interval(float(col.min()), float(col.max())) * Interval(hlo, hhi))
        f = _eval_interval(tree.root, ivs)
        if f is None:
            return INF
        total += f.sq_dist(float(y))
    return total


def zero_lower_bound(tree: Gentree, state: PartialState | None, data: Dataset) -> float:
    return 0.0


def lower_bound(tree: Gentree, state: PartialState | None, data: Dataset, method: str = "zero") -> float:
    if method == "zero" or state is None:
        return zero_lower_bound(tree, state, data)
    if method == "interval":
        return interval_lower_bound(tree, state, data)
    raise ValueError(f"unknown lower bound method {method!r}")
