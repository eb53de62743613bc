import itertools

import pytest
from hypothesis import given, settings, strategies as st

from gentree.core import LEAF, Gentree, Node, Operator
from gentree.enumeration import (
    ALL_RULES, DEFAULT_OPS, EXP_OPS, RULES, OperatorSet, canonical, complexity, enumerate_gentrees,
    parse_rules, prune,
)
from gentree.errors import ConfigError

# Frozen after the calibration search in scripts/calibrate_counts.py.
GOLDEN_CUMULATIVE = {0: 1, 1: 2, 2: 7, 3: 107, 4: 23107}


def brute_force(d, ops, canonicalize=True):
    """Every tree of depth <= d with no pruning, built level by level."""
    level = {LEAF}
    for _ in range(d):
        nxt = {LEAF}
        for op in ops.unary:
            nxt |= {Node(op, (c,)) for c in level}
        for op in ops.binary:
            nxt |= {Node(op, (a, b)) for a, b in itertools.product(level, repeat=2)}
        level = nxt
    if canonicalize:
        level = {canonical(n) for n in level}
    return level


@pytest.mark.parametrize("d", [0, 1, 2, 3])
@pytest.mark.parametrize("ops", [DEFAULT_OPS, EXP_OPS, OperatorSet.parse("add,sub,mul,div,sqrt")],
                         ids=["default", "exp", "with-sub"])
def test_oracle_equivalence(d, ops):
    expect = {n.serial for n in brute_force(d, ops) if prune(n, ALL_RULES) is None}
    got = enumerate_gentrees(d, ops).serials()
    assert len(got) == len(set(got))
    assert set(got) == expect


@pytest.mark.parametrize("rules", [frozenset(), frozenset({"R1"}), frozenset({"R1", "SQRT_L"})])
def test_oracle_equivalence_partial_rules(rules):
    expect = {n.serial for n in brute_force(2, DEFAULT_OPS) if prune(n, rules) is None}
    assert set(enumerate_gentrees(2, DEFAULT_OPS, rules).serials()) == expect


def test_depth_zero_is_single_leaf():
    for ops in (DEFAULT_OPS, EXP_OPS):
        cat = enumerate_gentrees(0, ops)
        assert cat.serials() == ["L"]


def test_depth_one_survivors():
    cat = enumerate_gentrees(1)
    assert cat.serials() == ["L", "(+ L L)"]


def test_depth_two_catalog_contents():
    assert enumerate_gentrees(2).serials() == [
        "L", "(+ L L)", "(sqrt (+ L L))", "(+ (+ L L) L)", "(/ L (+ L L))",
        "(+ (+ L L) (+ L L))", "(/ (+ L L) (+ L L))",
    ]


def test_frozen_golden_counts():
    cat = enumerate_gentrees(4)
    assert cat.cumulative_counts(4) == [GOLDEN_CUMULATIVE[d] for d in range(5)]


@pytest.mark.parametrize("text,rule", [
    ("(* L L)", "R1"), ("(/ L L)", "R1"),
    ("(* L (+ L L))", "R2a"), ("(* (+ L L) L)", "R2a"),
    ("(* (+ L L) (+ L L))", "R2b"),
    ("(/ (+ L L) L)", "R3"),
    ("(sqrt L)", "SQRT_L"),
])
def test_prune_examples(text, rule):
    assert prune(Gentree.parse(text)) == rule


@pytest.mark.parametrize("text", ["(sqrt (+ L L))", "(/ L (+ L L))", "(+ L L)", "L"])
def test_prune_keeps(text):
    assert prune(Gentree.parse(text)) is None


def test_prune_looks_inside_subtrees():
    assert prune(Gentree.parse("(+ L (* L L))")) == "R1"


# Each rule removes a tree whose function a surviving tree of no greater depth also expresses.
# The witness pairs: (removed, survivor, reason)
COVERAGE = [
    ("(* L L)", "L", "product of monomials is a monomial"),
    ("(/ L L)", "L", "quotient of monomials is a monomial"),
    ("(* L (+ L L))", "(+ L L)", "distribute the monomial over the sum"),
    ("(* (+ L L) (+ L L))", "(+ (+ L L) (+ L L))", "expand into four monomials"),
    ("(/ (+ L L) L)", "(+ L L)", "divide each term"),
    ("(sqrt L)", "L", "sqrt of a monomial with even powers is a monomial"),
]


@pytest.mark.parametrize("removed,survivor,_why", COVERAGE)
def test_rule_coverage_witness(removed, survivor, _why):
    r, s = Gentree.parse(removed), Gentree.parse(survivor)
    assert prune(r) is not None
    assert prune(s) is None
    assert s.depth <= r.depth
    assert s.serial in enumerate_gentrees(r.depth).serials()


def test_rule_coverage_numeric():
    # L1*(L2+L3) == L1*L2 + L1*L3 for monomials: check R2a's rewrite numerically
    x = 1.7
    a, b, c = 2 * x, x ** -1, 3 * x ** 2
    assert a * (b + c) == pytest.approx(a * b + a * c)


@pytest.mark.parametrize("d", [0, 1, 2, 3])
def test_monotone_in_depth(d):
    assert set(enumerate_gentrees(d).serials()) <= set(enumerate_gentrees(d + 1).serials())


def test_deterministic_order():
    assert enumerate_gentrees(3).serials() == enumerate_gentrees(3).serials()


def test_sorted_by_complexity_then_serial():
    cat = enumerate_gentrees(3)
    keys = [(t.complexity, t.serial) for t in cat]
    assert keys == sorted(keys)


def test_complexity_examples():
    assert complexity(Gentree(LEAF)) == 1
    assert complexity(Gentree.parse("(+ L L)")) == 3
    assert complexity(Gentree.parse("(+ (+ L L) L)")) == 5


def test_canonicalize_off_keeps_mirror_images():
    on = enumerate_gentrees(2, canonicalize=True)
    off = enumerate_gentrees(2, canonicalize=False)
    assert len(off) > len(on)
    assert "(+ L (+ L L))" in off.serials() and "(+ L (+ L L))" not in on.serials()


def test_bad_arguments():
    with pytest.raises(ConfigError):
        enumerate_gentrees(-1)
    with pytest.raises(ConfigError):
        parse_rules("R9")
    assert parse_rules("all") == ALL_RULES
    assert parse_rules("none") == frozenset()
    assert parse_rules("r1,sqrt") == frozenset({"R1", "SQRT_L"})
    assert set(RULES) == ALL_RULES


@st.composite
def trees(draw, depth=3):
    if depth == 0 or draw(st.integers(0, 3)) == 0:
        return LEAF
    op = draw(st.sampled_from([Operator.ADD, Operator.MUL, Operator.DIV, Operator.SQRT, Operator.SUB]))
    return Node(op, tuple(draw(trees(depth - 1)) for _ in range(op.arity)))


@given(trees())
@settings(max_examples=200, deadline=None)
def test_canonical_is_idempotent_and_preserves_shape(n):
    c = canonical(n)
    assert canonical(c) == c
    assert c.size == n.size and c.depth == n.depth


@given(trees())
@settings(max_examples=200, deadline=None)
def test_prune_is_invariant_under_canonicalization(n):
    assert (prune(n) is None) == (prune(canonical(n)) is None)
