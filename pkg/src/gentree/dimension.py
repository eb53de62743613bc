"""Dimensional-consistency constraints over leaf power vectors.

Units are vectors of exact rationals over a fixed list of base dimensions.
For a gentree and a constant-gate pattern we build linear equations on the
leaf unit vectors U_j = sum_i p_{j,i} u(x_i) (+ w_j for a gated leaf whose
constant may carry units), eliminate the free w_j, and reduce the rest to
row-echelon form.  Feasible power assignments are then enumerated by picking
unit classes for the non-pivot leaves and solving for the pivot leaves.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Sequence

from .core import CandidateModel, Dataset, Gentree, Node, Operator
from .errors import ConfigError


@dataclass(frozen=True)
class UnitVector:
    exps: tuple[Fraction, ...]

    def __post_init__(self):
        object.__setattr__(self, "exps", tuple(Fraction(e) for e in self.exps))

    @classmethod
    def zero(cls, dims: int) -> "UnitVector":
        return cls((Fraction(0),) * dims)

    @classmethod
    def parse(cls, values: Sequence[str | int | Fraction]) -> "UnitVector":
        # Fraction("0.5") is exact, unlike Fraction(0.5) from a float literal of e.g. 0.1
        return cls(tuple(Fraction(str(v).strip()) if isinstance(v, str) else Fraction(v) for v in values))

    def __len__(self):
        return len(self.exps)

    def __add__(self, other: "UnitVector") -> "UnitVector":
        return UnitVector(tuple(a + b for a, b in zip(self.exps, other.exps)))

    def __sub__(self, other: "UnitVector") -> "UnitVector":
        return UnitVector(tuple(a - b for a, b in zip(self.exps, other.exps)))

    def __mul__(self, c) -> "UnitVector":
        c = Fraction(c)
        return UnitVector(tuple(a * c for a in self.exps))

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1

    @property
    def is_zero(self) -> bool:
        return all(e == 0 for e in self.exps)

    def __str__(self):
        return "[" + ", ".join(str(e) for e in self.exps) + "]"


def power_units(powers: Sequence[int], var_units: Sequence[UnitVector]) -> UnitVector:
    dims = len(var_units[0]) if var_units else 0
    acc = [Fraction(0)] * dims
    for p, u in zip(powers, var_units):
        if p:
            for b, e in enumerate(u.exps):
                acc[b] += p * e
    return UnitVector(tuple(acc))


def _units_of(data: Dataset) -> tuple[list[UnitVector], UnitVector]:
    if data.units is None or data.target_units is None:
        raise ConfigError("dataset has no units table")
    missing = [v for v in data.variable_names if v not in data.units]
    if missing:
        raise ConfigError(f"units table lacks {', '.join(missing)}")
    var_units = [data.units[v] for v in data.variable_names]
    dims = {len(u) for u in var_units} | {len(data.target_units)}
    if len(dims) != 1:
        raise ConfigError("unit vectors have inconsistent dimension counts")
    return var_units, data.target_units


# An affine form over leaf unit vectors: (coeffs over leaves, constant unit vector).
_Form = tuple[tuple[Fraction, ...], UnitVector]


@dataclass
class UnitConstraintSystem:
    """``sum_j coeffs[j] * U_j = rhs`` for every row, over non-free leaves only."""

    n_leaves: int
    var_units: list[UnitVector]
    target: UnitVector
    free_leaves: frozenset
    rows: list[tuple[tuple[Fraction, ...], UnitVector]]
    raw_rows: list[tuple[tuple[Fraction, ...], UnitVector]]
    pivots: list[int]
    inconsistent: bool = False

    @property
    def dims(self) -> int:
        return len(self.target)

    def satisfied_by(self, leaf_units: Sequence[UnitVector]) -> bool:
        if self.inconsistent:
            return False
        zero = UnitVector.zero(self.dims)
        for coeffs, rhs in self.rows:
            acc = zero
            for c, u in zip(coeffs, leaf_units):
                if c:
                    acc = acc + u * c
            if acc != rhs:
                return False
        return True


def _leaf_forms(root: Node, dims: int) -> tuple[_Form, list[tuple[_Form, UnitVector]]]:
    """Bottom-up unit forms plus the equality constraints found on the way."""
    m = root.n_leaves
    zero_vec = UnitVector.zero(dims)
    zero_c = (Fraction(0),) * m
    constraints: list[tuple[_Form, UnitVector]] = []
    counter = itertools.count()

    def sub(f: _Form, g: _Form) -> _Form:
        return tuple(a - b for a, b in zip(f[0], g[0])), f[1] - g[1]

    def walk(n: Node) -> _Form:
        if n.op is None:
            j = next(counter)
            coeffs = list(zero_c)
            coeffs[j] = Fraction(1)
            return tuple(coeffs), zero_vec
        if n.op.arity == 1:
            f = walk(n.children[0])
            if n.op is Operator.SQRT:
                half = Fraction(1, 2)
                return tuple(c * half for c in f[0]), f[1] * half
            constraints.append((f, zero_vec))
            return zero_c, zero_vec
        f, g = walk(n.children[0]), walk(n.children[1])
        if n.op in (Operator.ADD, Operator.SUB):
            constraints.append((sub(f, g), zero_vec))
            return f
        if n.op is Operator.MUL:
            return tuple(a + b for a, b in zip(f[0], g[0])), f[1] + g[1]
        return sub(f, g)

    return walk(root), constraints


def tree_unit_constraints(tree: Gentree, z: Sequence[bool], data: Dataset,
                          dimensioned_constants: bool) -> UnitConstraintSystem:
    var_units, target = _units_of(data)
    dims = len(target)
    m = tree.n_leaves
    if len(z) != m:
        raise ValueError(f"z has {len(z)} entries for {m} leaves")
    root_form, constraints = _leaf_forms(tree.root, dims)
    raw = [(c, rhs - const) for (c, const), rhs in constraints]
    raw.append((root_form[0], target - root_form[1]))

    free = frozenset(j for j in range(m) if z[j] and dimensioned_constants)
    # Free leaves first so their pivot rows (which only fix w_j) can be dropped.
    order = sorted(range(m), key=lambda j: (j not in free, j))
    mat = [[c[j] for j in order] + list(rhs.exps) for c, rhs in raw]
    pivcols = []
    r = 0
    for col in range(m):
        pr = next((i for i in range(r, len(mat)) if mat[i][col] != 0), None)
        if pr is None:
            continue
        mat[r], mat[pr] = mat[pr], mat[r]
        pv = mat[r][col]
        mat[r] = [v / pv for v in mat[r]]
        for i in range(len(mat)):
            if i != r and mat[i][col] != 0:
                f = mat[i][col]
                mat[i] = [a - f * b for a, b in zip(mat[i], mat[r])]
        pivcols.append(col)
        r += 1

    rows, pivots, inconsistent = [], [], False
    for i, row in enumerate(mat):
        coeffs_sorted, rhs = row[:m], UnitVector(tuple(row[m:]))
        pivot_col = pivcols[i] if i < len(pivcols) else None
        if pivot_col is not None and order[pivot_col] in free:
            continue
        if pivot_col is None:
            if not rhs.is_zero:
                inconsistent = True
            continue
        coeffs = [Fraction(0)] * m
        for col, j in enumerate(order):
            coeffs[j] = coeffs_sorted[col]
        rows.append((tuple(coeffs), rhs))
        pivots.append(order[pivot_col])
    return UnitConstraintSystem(m, var_units, target, free, rows, raw, pivots, inconsistent)


def power_equations(sys: UnitConstraintSystem) -> tuple[list[list[Fraction]], list[Fraction]]:
    """Linear equations ``A p = b`` over the flattened leaf powers (leaf-major).

    One equation per (system row, base dimension); free leaves never appear.
    An inconsistent system gets the single equation ``0 = 1``.
    """
    n = len(sys.var_units)
    A, b = [], []
    if sys.inconsistent:
        return [[Fraction(0)] * (sys.n_leaves * n)], [Fraction(1)]
    for coeffs, rhs in sys.rows:
        for d in range(sys.dims):
            eq = [Fraction(0)] * (sys.n_leaves * n)
            for j, c in enumerate(coeffs):
                if c:
                    for i, u in enumerate(sys.var_units):
                        eq[j * n + i] += c * u.exps[d]
            A.append(eq)
            b.append(rhs.exps[d])
    return A, b


def power_box(n: int, delta: int, tau: int) -> list[tuple[int, ...]]:
    """All integer vectors with |p_i| <= delta and sum |p_i| <= tau, lexicographic."""
    return [p for p in itertools.product(range(-delta, delta + 1), repeat=n)
            if sum(abs(v) for v in p) <= tau]


class UnitClasses:
    """Power vectors of a box grouped by the unit vector they produce."""

    def __init__(self, box: Sequence[tuple[int, ...]], var_units: Sequence[UnitVector]):
        self.box = list(box)
        self.by_unit: dict[UnitVector, list[int]] = {}
        for idx, p in enumerate(self.box):
            self.by_unit.setdefault(power_units(p, var_units), []).append(idx)
        # simpler classes first: smallest achievable |p| sum, then size
        self.ordered = sorted(
            self.by_unit.items(),
            key=lambda kv: (min(sum(abs(v) for v in self.box[i]) for i in kv[1]), len(kv[1]), str(kv[0])),
        )
        self.all_indices = list(range(len(self.box)))


def iter_feasible_blocks(sys: UnitConstraintSystem | None, classes: UnitClasses,
                         m: int) -> Iterator[tuple[list[int], ...]]:
    """Yield blocks of box indices per leaf; the cartesian product of a block
    is a set of feasible assignments, and blocks are disjoint."""
    if sys is None:
        yield tuple(classes.all_indices for _ in range(m))
        return
    if sys.inconsistent:
        return
    pivots = set(sys.pivots)
    chosen = [j for j in range(m) if j not in pivots and j not in sys.free_leaves]
    options = [classes.ordered for _ in chosen]
    zero = UnitVector.zero(sys.dims)
    for combo in itertools.product(*options):
        units: dict[int, UnitVector] = {j: u for j, (u, _) in zip(chosen, combo)}
        block: list[list[int] | None] = [None] * m
        for j, (_, idxs) in zip(chosen, combo):
            block[j] = idxs
        ok = True
        for (coeffs, rhs), pj in zip(sys.rows, sys.pivots):
            acc = zero
            for j in chosen:
                if coeffs[j]:
                    acc = acc + units[j] * coeffs[j]
            need = (rhs - acc) * (1 / coeffs[pj])
            idxs = classes.by_unit.get(need)
            if idxs is None:
                ok = False
                break
            block[pj] = idxs
        if not ok:
            continue
        for j in sys.free_leaves:
            block[j] = classes.all_indices
        yield tuple(block)


def feasible_power_sets(sys: UnitConstraintSystem, delta: int, tau: int) -> list[tuple[tuple[int, ...], ...]]:
    """Every per-leaf power assignment in the bounded box satisfying ``sys``, lexicographic."""
    n = len(sys.var_units)
    classes = UnitClasses(power_box(n, delta, tau), sys.var_units)
    out = []
    for block in iter_feasible_blocks(sys, classes, sys.n_leaves):
        for combo in itertools.product(*block):
            out.append(tuple(classes.box[i] for i in combo))
    out.sort()
    return out


_FREE = object()


def check_model_units(model: CandidateModel, data: Dataset, dimensioned_constants: bool) -> bool:
    """Audit a concrete model's units by direct bottom-up inference."""
    if not data.has_units:
        return True
    var_units, target = _units_of(data)
    leaves = iter(model.params.leaves)
    zero = UnitVector.zero(len(target))

    class Mismatch(Exception):
        pass

    def walk(n: Node):
        if n.op is None:
            leaf = next(leaves)
            if leaf.gated and dimensioned_constants:
                return _FREE
            return power_units(leaf.powers, var_units)
        if n.op.arity == 1:
            u = walk(n.children[0])
            if n.op is Operator.SQRT:
                return u if u is _FREE else u * Fraction(1, 2)
            if u is not _FREE and not u.is_zero:
                raise Mismatch
            return zero
        a, b = walk(n.children[0]), walk(n.children[1])
        if n.op in (Operator.ADD, Operator.SUB):
            if a is _FREE:
                return b
            if b is not _FREE and a != b:
                raise Mismatch
            return a
        if a is _FREE or b is _FREE:
            return _FREE
        return a + b if n.op is Operator.MUL else a - b

    try:
        u = walk(model.tree.root)
    except Mismatch:
        return False
    return u is _FREE or u == target
