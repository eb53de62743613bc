"""Gentree enumeration, redundancy pruning and complexity ordering."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

from .core import LEAF, Gentree, Node, Operator
from .errors import ConfigError

# Fixed reporting order for prune().
RULES = ("R1", "R2a", "R2b", "R3", "SQRT_L")
ALL_RULES = frozenset(RULES)


@dataclass(frozen=True)
class OperatorSet:
    binary: frozenset = frozenset()
    unary: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "binary", frozenset(self.binary))
        object.__setattr__(self, "unary", frozenset(self.unary))
        for op in self.binary:
            if op.arity != 2:
                raise ConfigError(f"{op.name} is not binary")
        for op in self.unary:
            if op.arity != 1:
                raise ConfigError(f"{op.name} is not unary")

    @classmethod
    def of(cls, *ops: Operator) -> "OperatorSet":
        return cls(frozenset(o for o in ops if o.arity == 2), frozenset(o for o in ops if o.arity == 1))

    @classmethod
    def parse(cls, text: str) -> "OperatorSet":
        return cls.of(*(Operator.parse(t) for t in text.split(",") if t.strip()))

    @property
    def ops(self) -> list[Operator]:
        return [op for op in Operator if op in self.binary or op in self.unary]

    def __bool__(self):
        return bool(self.binary or self.unary)

    def __str__(self):
        return ",".join(op.name.lower() for op in self.ops)


# Operators used for the reported experiments: "-" dropped, sqrt kept.
DEFAULT_OPS = OperatorSet.of(Operator.ADD, Operator.MUL, Operator.DIV, Operator.SQRT)
EXP_OPS = OperatorSet.of(Operator.ADD, Operator.MUL, Operator.DIV, Operator.EXP)

# Best match found by scripts/calibrate_counts.py; see README for the counts it gives.
PAPER_COUNTS = {"ops": DEFAULT_OPS, "rules": ALL_RULES, "canonicalize": True}


def parse_rules(text: str) -> frozenset:
    text = text.strip()
    if text.lower() == "all":
        return ALL_RULES
    if text.lower() in ("none", ""):
        return frozenset()
    lookup = {r.lower(): r for r in RULES}
    lookup["sqrt"] = "SQRT_L"
    out = set()
    for tok in text.split(","):
        key = tok.strip().lower()
        if key not in lookup:
            raise ConfigError(f"unknown pruning rule {tok!r}; choose from {', '.join(RULES)}")
        out.add(lookup[key])
    return frozenset(out)


def _leaf_sum(n: Node) -> bool:
    return n.op in (Operator.ADD, Operator.SUB) and n.children[0].is_leaf and n.children[1].is_leaf


def match_rule(n: Node, rules: frozenset = ALL_RULES) -> str | None:
    """The first rule matching at the root of ``n`` (not its subtrees)."""
    op = n.op
    if op is None:
        return None
    if op in (Operator.MUL, Operator.DIV):
        a, b = n.children
        if "R1" in rules and a.is_leaf and b.is_leaf:
            return "R1"
        if op is Operator.MUL:
            if "R2a" in rules and ((a.is_leaf and _leaf_sum(b)) or (b.is_leaf and _leaf_sum(a))):
                return "R2a"
            if "R2b" in rules and _leaf_sum(a) and _leaf_sum(b):
                return "R2b"
        elif "R3" in rules and _leaf_sum(a) and b.is_leaf:
            return "R3"
    if op is Operator.SQRT and "SQRT_L" in rules and n.children[0].is_leaf:
        return "SQRT_L"
    return None


def prune(tree: Gentree | Node, rules: frozenset = ALL_RULES) -> str | None:
    """Return the id of the first rule (in RULES order) matched anywhere in the tree, or None to keep."""
    root = tree.root if isinstance(tree, Gentree) else tree
    hits = {match_rule(sub, rules) for sub in root.subtrees()} - {None}
    for r in RULES:
        if r in hits:
            return r
    return None


def complexity(tree: Gentree | Node) -> int:
    root = tree.root if isinstance(tree, Gentree) else tree
    return root.size


def canonical(n: Node) -> Node:
    """Sort children of commutative nodes by serialization, bottom-up."""
    if n.is_leaf:
        return n
    kids = tuple(canonical(c) for c in n.children)
    if n.op.commutative and kids[1].serial < kids[0].serial:
        kids = (kids[1], kids[0])
    return Node(n.op, kids)


def sort_key(tree: Gentree) -> tuple[int, str]:
    return (tree.complexity, tree.serial)


@dataclass
class GentreeCatalog:
    trees: list[Gentree]
    depth_index: dict[int, list[int]] = field(default_factory=dict)

    def __post_init__(self):
        self.trees = sorted(self.trees, key=sort_key)
        self.depth_index = {}
        for i, t in enumerate(self.trees):
            self.depth_index.setdefault(t.depth, []).append(i)

    def __len__(self):
        return len(self.trees)

    def __iter__(self):
        return iter(self.trees)

    def __getitem__(self, i):
        return self.trees[i]

    def count_by_depth(self) -> dict[int, int]:
        return {d: len(v) for d, v in sorted(self.depth_index.items())}

    def cumulative_counts(self, max_depth: int) -> list[int]:
        out, total = [], 0
        for d in range(max_depth + 1):
            total += len(self.depth_index.get(d, []))
            out.append(total)
        return out

    def serials(self) -> list[str]:
        return [t.serial for t in self.trees]


def _compose(ops: OperatorSet, pool: list[Node], rules: frozenset, canonicalize: bool) -> Iterable[Node]:
    pool = sorted(pool, key=lambda n: n.serial)
    for op in ops.ops:
        if op.arity == 1:
            for a in pool:
                cand = Node(op, (a,))
                if match_rule(cand, rules) is None:
                    yield cand
            continue
        for i, a in enumerate(pool):
            start = i if (canonicalize and op.commutative) else 0
            for b in pool[start:]:
                cand = Node(op, (a, b))
                if match_rule(cand, rules) is None:
                    yield cand


def enumerate_gentrees(d: int, ops: OperatorSet = DEFAULT_OPS, rules: frozenset = ALL_RULES,
                       canonicalize: bool = True) -> GentreeCatalog:
    """All structurally distinct gentrees of depth <= d surviving ``rules``.

    A tree survives iff no subtree matches a rule at its root, so survivors of
    depth <= k are exactly the operator applications over survivors of depth
    <= k-1 whose root does not match.
    """
    if d < 0:
        raise ConfigError("depth must be non-negative")
    if not ops:
        raise ConfigError("operator set is empty")
    pool = [LEAF]
    for _ in range(d):
        pool = [LEAF] + list(_compose(ops, pool, rules, canonicalize))
    return GentreeCatalog([Gentree(n) for n in pool])
