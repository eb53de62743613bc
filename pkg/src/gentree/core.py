"""Expression trees with L-monomial leaves and their evaluation.

A leaf of a gentree is an L-monomial ``h * x1^a1 * ... * xn^an`` with integer
powers and an optional free constant ``h``.  Internal nodes carry one of a
small set of arithmetic operators.  Two evaluation routes live here: a scalar
one (:func:`eval_gentree`) that raises :class:`DomainError`, and a batched
numpy one (:func:`eval_batch`) that marks undefined entries with NaN.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import DomainError, ShapeError

EPS_DIV = 1e-30


class Operator(enum.Enum):
    ADD = ("+", 2)
    SUB = ("-", 2)
    MUL = ("*", 2)
    DIV = ("/", 2)
    SQRT = ("sqrt", 1)
    EXP = ("exp", 1)

    def __init__(self, symbol: str, arity: int):
        self.symbol = symbol
        self.arity = arity

    @property
    def commutative(self) -> bool:
        return self in (Operator.ADD, Operator.MUL)

    @classmethod
    def parse(cls, token: str) -> "Operator":
        token = token.strip().lower()
        for op in cls:
            if token in (op.symbol, op.name.lower()):
                return op
        aliases = {"plus": cls.ADD, "minus": cls.SUB, "times": cls.MUL, "x": cls.MUL,
                   "×": cls.MUL, "÷": cls.DIV, "√": cls.SQRT, "−": cls.SUB}
        if token in aliases:
            return aliases[token]
        raise ValueError(f"unknown operator {token!r}")


@dataclass(frozen=True)
class Node:
    """A gentree node; ``op is None`` marks an L-monomial slot."""

    op: Operator | None = None
    children: tuple["Node", ...] = ()

    def __post_init__(self):
        if self.op is None:
            if self.children:
                raise ValueError("a leaf has no children")
        elif len(self.children) != self.op.arity:
            raise ValueError(f"{self.op.name} takes {self.op.arity} children, got {len(self.children)}")

    @property
    def is_leaf(self) -> bool:
        return self.op is None

    @cached_property
    def serial(self) -> str:
        if self.op is None:
            return "L"
        return "(" + " ".join([self.op.symbol] + [c.serial for c in self.children]) + ")"

    @cached_property
    def depth(self) -> int:
        if self.op is None:
            return 0
        return 1 + max(c.depth for c in self.children)

    @cached_property
    def size(self) -> int:
        return 1 + sum(c.size for c in self.children)

    @cached_property
    def n_leaves(self) -> int:
        if self.op is None:
            return 1
        return sum(c.n_leaves for c in self.children)

    def subtrees(self):
        yield self
        for c in self.children:
            yield from c.subtrees()


LEAF = Node()


def node(op: Operator, *children: Node) -> Node:
    return Node(op, tuple(children))


class Gentree:
    """A rooted operator tree whose leaves are numbered left to right."""

    def __init__(self, root: Node):
        self.root = root

    @classmethod
    def parse(cls, text: str) -> "Gentree":
        return cls(parse_prefix(text))

    @property
    def depth(self) -> int:
        return self.root.depth

    @property
    def n_leaves(self) -> int:
        return self.root.n_leaves

    @property
    def serial(self) -> str:
        return self.root.serial

    @property
    def complexity(self) -> int:
        return self.root.size

    def __eq__(self, other):
        return isinstance(other, Gentree) and self.root == other.root

    def __hash__(self):
        return hash(self.root)

    def __repr__(self):
        return f"Gentree({self.serial!r})"

    @cached_property
    def leaf_paths(self) -> tuple[tuple[tuple[Operator, int], ...], ...]:
        """For each leaf, the (operator, child position) pairs from the root down."""
        out: list[tuple] = []

        def walk(n: Node, path):
            if n.is_leaf:
                out.append(tuple(path))
                return
            for pos, c in enumerate(n.children):
                walk(c, path + [(n.op, pos)])

        walk(self.root, [])
        return tuple(out)


def parse_prefix(text: str) -> Node:
    """Parse the canonical prefix notation, e.g. ``(+ L (sqrt (+ L L)))``."""
    tokens = text.replace("(", " ( ").replace(")", " ) ").split()
    pos = 0

    def parse() -> Node:
        nonlocal pos
        if pos >= len(tokens):
            raise ValueError(f"unexpected end of tree text: {text!r}")
        tok = tokens[pos]
        pos += 1
        if tok == "L":
            return LEAF
        if tok != "(":
            raise ValueError(f"unexpected token {tok!r} in {text!r}")
        op = Operator.parse(tokens[pos])
        pos += 1
        kids = tuple(parse() for _ in range(op.arity))
        if pos >= len(tokens) or tokens[pos] != ")":
            raise ValueError(f"expected ')' in {text!r}")
        pos += 1
        return Node(op, kids)

    root = parse()
    if pos != len(tokens):
        raise ValueError(f"trailing tokens in {text!r}")
    return root


@dataclass(frozen=True)
class LMonomial:
    powers: tuple[int, ...]
    gated: bool = False
    h: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "powers", tuple(int(p) for p in self.powers))
        if not self.gated and self.h != 1.0:
            raise ValueError("an ungated L-monomial has constant exactly 1")

    @property
    def abs_power_sum(self) -> int:
        return sum(abs(p) for p in self.powers)


@dataclass(frozen=True)
class ParamAssignment:
    leaves: tuple[LMonomial, ...]

    def __post_init__(self):
        object.__setattr__(self, "leaves", tuple(self.leaves))

    @property
    def z(self) -> tuple[bool, ...]:
        return tuple(leaf.gated for leaf in self.leaves)

    @property
    def powers(self) -> tuple[tuple[int, ...], ...]:
        return tuple(leaf.powers for leaf in self.leaves)

    @property
    def h(self) -> tuple[float, ...]:
        return tuple(leaf.h for leaf in self.leaves)

    @property
    def n_constants(self) -> int:
        return sum(self.z)

    def within_bounds(self, delta: int, tau: int, omega: float, k: int) -> bool:
        if self.n_constants > k:
            return False
        for leaf in self.leaves:
            if any(abs(p) > delta for p in leaf.powers) or leaf.abs_power_sum > tau:
                return False
            if leaf.gated and abs(leaf.h) > omega:
                return False
            if not leaf.gated and leaf.h != 1.0:
                return False
        return True


def tiebreak_key(params: ParamAssignment) -> tuple:
    """Order among equal-SSE models: fewer powers, then lexicographic, then small |h|."""
    return (
        sum(leaf.abs_power_sum for leaf in params.leaves),
        params.powers,
        tuple(abs(h) for h in params.h),
    )


@dataclass(frozen=True)
class CandidateModel:
    tree: Gentree
    params: ParamAssignment
    sse: float
    complexity: int = field(default=0)

    def __post_init__(self):
        if not self.complexity:
            object.__setattr__(self, "complexity", self.tree.complexity)


@dataclass
class Dataset:
    variable_names: list[str]
    X: np.ndarray
    y: np.ndarray
    units: dict | None = None
    target_units: object | None = None

    def __post_init__(self):
        self.variable_names = list(self.variable_names)
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.X.ndim != 2 or self.X.shape[1] != len(self.variable_names):
            raise ShapeError(f"points must be |I| x {len(self.variable_names)}, got {self.X.shape}")
        if self.y.shape != (self.X.shape[0],):
            raise ShapeError(f"targets must have length {self.X.shape[0]}, got {self.y.shape}")
        if self.X.shape[0] < 1:
            raise ShapeError("dataset has no points")
        if not (np.all(np.isfinite(self.X)) and np.all(np.isfinite(self.y))):
            raise ValueError("dataset contains NaN or infinite values")
        if (self.units is None) != (self.target_units is None):
            raise ValueError("units and target_units go together")

    @property
    def n(self) -> int:
        return self.X.shape[1]

    @property
    def n_points(self) -> int:
        return self.X.shape[0]

    @property
    def has_units(self) -> bool:
        return self.units is not None

    def with_targets(self, y) -> "Dataset":
        return Dataset(self.variable_names, self.X.copy(), np.asarray(y, dtype=float),
                       self.units, self.target_units)


# -- scalar evaluation -------------------------------------------------------

def ipow(x: float, p: int) -> float:
    """``x**p`` for integer ``p`` by repeated squaring."""
    if p < 0:
        if x == 0.0:
            raise DomainError("zero_to_negative_power", f"0^{p}")
        return 1.0 / ipow(x, -p)
    result, base = 1.0, x
    while p:
        if p & 1:
            result *= base
        base *= base
        p >>= 1
    return result


def eval_lmonomial(leaf: LMonomial, x: Sequence[float]) -> float:
    if len(x) != len(leaf.powers):
        raise ShapeError(f"point has {len(x)} values, monomial has {len(leaf.powers)} powers")
    value = leaf.h
    for xi, p in zip(x, leaf.powers):
        if p:
            value *= ipow(float(xi), p)
    if not math.isfinite(value):
        raise DomainError("overflow", "monomial value")
    return value


def eval_gentree(tree: Gentree, params: ParamAssignment, x: Sequence[float]) -> float:
    if len(params.leaves) != tree.n_leaves:
        raise ValueError(f"tree has {tree.n_leaves} leaves, got {len(params.leaves)} monomials")
    leaves = iter(params.leaves)

    def ev(n: Node) -> float:
        if n.op is None:
            return eval_lmonomial(next(leaves), x)
        vals = [ev(c) for c in n.children]
        op = n.op
        if op is Operator.ADD:
            r = vals[0] + vals[1]
        elif op is Operator.SUB:
            r = vals[0] - vals[1]
        elif op is Operator.MUL:
            r = vals[0] * vals[1]
        elif op is Operator.DIV:
            if abs(vals[1]) < EPS_DIV:
                raise DomainError("div_by_zero", f"denominator {vals[1]!r}")
            r = vals[0] / vals[1]
        elif op is Operator.SQRT:
            if vals[0] < 0:
                raise DomainError("sqrt_negative", f"sqrt({vals[0]!r})")
            r = math.sqrt(vals[0])
        else:
            try:
                r = math.exp(vals[0])
            except OverflowError:
                raise DomainError("overflow", f"exp({vals[0]!r})") from None
        if not math.isfinite(r):
            raise DomainError("overflow", op.name)
        return r

    return ev(tree.root)


def sse(tree: Gentree, params: ParamAssignment, data: Dataset) -> float:
    """Sum of squared residuals; ``inf`` if the model is undefined at any point."""
    total = 0.0
    try:
        for xi, yi in zip(data.X, data.y):
            r = float(yi) - eval_gentree(tree, params, xi)
            total += r * r
    except DomainError:
        return math.inf
    return total if math.isfinite(total) else math.inf


def make_model(tree: Gentree, params: ParamAssignment, data: Dataset) -> CandidateModel:
    return CandidateModel(tree, params, sse(tree, params, data))


# -- batched evaluation ------------------------------------------------------

def ipow_array(x: np.ndarray, p: int) -> np.ndarray:
    """Elementwise integer power; NaN where zero meets a negative power."""
    if p < 0:
        with np.errstate(divide="ignore", invalid="ignore"):
            out = 1.0 / ipow_array(x, -p)
        out[x == 0.0] = np.nan
        return out
    result = np.ones_like(x, dtype=float)
    base = np.array(x, dtype=float)
    while p:
        if p & 1:
            result = result * base
        base = base * base
        p >>= 1
    return result


def monomial_table(X: np.ndarray, box: Sequence[Sequence[int]]) -> np.ndarray:
    """Values of every power vector in ``box`` at every point, shape (len(box), |I|)."""
    X = np.asarray(X, dtype=float)
    cache: dict[tuple[int, int], np.ndarray] = {}
    out = np.empty((len(box), X.shape[0]))
    with np.errstate(over="ignore", invalid="ignore"):
        for r, powers in enumerate(box):
            v = np.ones(X.shape[0])
            for i, p in enumerate(powers):
                if p:
                    key = (i, p)
                    if key not in cache:
                        cache[key] = ipow_array(X[:, i], p)
                    v = v * cache[key]
            out[r] = v
    out[~np.isfinite(out)] = np.nan
    return out


def eval_batch(root: Node, leaf_values: Sequence[np.ndarray]) -> np.ndarray:
    """Evaluate a tree on broadcastable arrays of leaf values.

    Undefined entries (negative sqrt, tiny denominators, overflow) become NaN
    and stay NaN through the rest of the tree.
    """
    it = iter(leaf_values)

    def ev(n: Node):
        if n.op is None:
            return next(it)
        op = n.op
        if op.arity == 1:
            a = ev(n.children[0])
            if op is Operator.SQRT:
                r = np.sqrt(a)
            else:
                r = np.exp(a)
        else:
            a = ev(n.children[0])
            b = ev(n.children[1])
            if op is Operator.ADD:
                r = a + b
            elif op is Operator.SUB:
                r = a - b
            elif op is Operator.MUL:
                r = a * b
            else:
                r = a / b
                r = np.where(np.abs(b) < EPS_DIV, np.nan, r)
        return np.where(np.isfinite(r), r, np.nan)

    with np.errstate(all="ignore"):
        return ev(root)


# -- rendering ---------------------------------------------------------------

_PREC = {Operator.ADD: 1, Operator.SUB: 1, Operator.MUL: 2, Operator.DIV: 2}


def format_constant(h: float) -> str:
    return f"{h:.10g}"


def render_lmonomial(leaf: LMonomial, names: Sequence[str]) -> tuple[str, int]:
    factors = []
    if leaf.gated:
        factors.append(format_constant(leaf.h))
    for name, p in zip(names, leaf.powers):
        if p == 1:
            factors.append(name)
        elif p:
            factors.append(f"{name}^{p}")
    if not factors:
        return "1", 3
    text = "·".join(factors)
    prec = 3 if len(factors) == 1 and not text.startswith("-") else 2
    return text, prec


def render(tree: Gentree, params: ParamAssignment, names: Sequence[str] | None = None) -> str:
    if names is None:
        n = len(params.leaves[0].powers) if params.leaves else 0
        names = [f"x{i + 1}" for i in range(n)]
    leaves = iter(params.leaves)

    def rd(n: Node) -> tuple[str, int]:
        if n.op is None:
            return render_lmonomial(next(leaves), names)
        if n.op.arity == 1:
            inner, _ = rd(n.children[0])
            return f"{n.op.symbol}({inner})", 3
        prec = _PREC[n.op]
        parts = []
        for pos, c in enumerate(n.children):
            text, cprec = rd(c)
            right_assoc_clash = pos == 1 and n.op in (Operator.SUB, Operator.DIV) and cprec == prec
            if cprec < prec or right_assoc_clash:
                text = f"({text})"
            parts.append(text)
        sep = {Operator.ADD: " + ", Operator.SUB: " - ", Operator.MUL: "·", Operator.DIV: " / "}[n.op]
        return sep.join(parts), prec

    return rd(tree.root)[0]
