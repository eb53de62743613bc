"""Best parameter assignment for a single gentree.

The discrete part (constant gates and integer powers) is enumerated
exhaustively, restricted to the dimensionally feasible blocks; the
continuous part (gated constants) is fitted per assignment, in closed form
when the model is affine in the constants and by dense grid plus
golden-section refinement otherwise.  Work is done in numpy batches and can
be paused between batches and resumed later.
"""

from __future__ import annotations

import itertools
import math
import threading
import time
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np
from scipy import optimize

from .core import (
    EPS_DIV,
    CandidateModel,
    Dataset,
    Gentree,
    LMonomial,
    Node,
    Operator,
    ParamAssignment,
    eval_batch,
    monomial_table,
    sse,
    tiebreak_key,
)
from .dimension import UnitClasses, iter_feasible_blocks, power_box, tree_unit_constraints
from .enumeration import ALL_RULES, DEFAULT_OPS, OperatorSet
from .errors import ConfigError
from .intervals import PartialState, lower_bound

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
MAX_BLOCK = 10**12


@dataclass
class SolverConfig:
    depth: int = 3
    max_constants: int = 1
    omega: float = 100.0
    delta: int = 2
    tau: int = 6
    tol: float = 1e-4
    tol_relative: bool = False
    time_limit_s: float = 600.0
    eps_div: float = EPS_DIV
    grid_points: int = 2001
    grid_points_multi: int = 41
    multistart: int = 4
    refine_tol: float = 1e-12
    dimensioned_constants: bool = False
    use_units: bool = True
    bound: str = "zero"
    chunk_size: int = 4096
    ops: OperatorSet = DEFAULT_OPS
    rules: frozenset = ALL_RULES
    canonicalize: bool = True

    def __post_init__(self):
        if self.depth < 0 or self.max_constants < 0 or self.delta < 0 or self.tau < 0:
            raise ConfigError("depth, k, delta and tau must be non-negative")
        if self.omega <= 0 or self.tol <= 0 or self.time_limit_s <= 0:
            raise ConfigError("omega, tol and time limit must be positive")
        if self.grid_points < 3 or self.grid_points % 2 == 0:
            raise ConfigError("grid_points must be odd and >= 3")
        if self.eps_div != EPS_DIV:
            raise ConfigError("the division guard is fixed at 1e-30")
        if self.bound not in ("zero", "interval"):
            raise ConfigError(f"unknown bound {self.bound!r}")

    def threshold(self, data: Dataset) -> float:
        """Absolute SSE below which a model counts as solving the data."""
        if self.tol_relative:
            return self.tol * float(np.sum(data.y ** 2))
        return self.tol

    def to_dict(self) -> dict:
        return {
            "depth": self.depth, "max_constants": self.max_constants, "omega": self.omega,
            "delta": self.delta, "tau": self.tau, "tol": self.tol, "tol_relative": self.tol_relative,
            "time_limit_s": self.time_limit_s, "grid_points": self.grid_points,
            "grid_points_multi": self.grid_points_multi, "multistart": self.multistart,
            "dimensioned_constants": self.dimensioned_constants, "use_units": self.use_units,
            "bound": self.bound, "ops": str(self.ops), "rules": sorted(self.rules),
            "canonicalize": self.canonicalize,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SolverConfig":
        d = dict(d)
        if "ops" in d:
            d["ops"] = OperatorSet.parse(d["ops"])
        if "rules" in d:
            d["rules"] = frozenset(d["rules"])
        return cls(**d)


SOLVED, EXHAUSTED, CUTOFF, TIMEOUT, PAUSED, CANCELLED = (
    "SOLVED", "EXHAUSTED", "CUTOFF", "TIMEOUT", "PAUSED", "CANCELLED")


@dataclass
class SolveStatus:
    kind: str
    model: CandidateModel | None = None
    bound: float | None = None
    state: "SolveState | None" = None
    evaluated: int = 0


class SharedIncumbent:
    """Best SSE across workers; reads are lock-free, offers are serialized."""

    def __init__(self, sse: float = math.inf):
        self._lock = threading.Lock()
        self.sse = sse
        self.model: CandidateModel | None = None

    def get(self) -> float:
        return self.sse

    def offer(self, model: CandidateModel) -> bool:
        with self._lock:
            if model.sse < self.sse:
                self.sse = model.sse
                self.model = model
                return True
            return False


class SolverContext:
    """Per-dataset tables shared by every gentree solve."""

    def __init__(self, data: Dataset, cfg: SolverConfig):
        self.data = data
        self.cfg = cfg
        self.box = power_box(data.n, cfg.delta, cfg.tau)
        self.table = monomial_table(data.X, self.box)
        self.use_units = cfg.use_units and data.has_units
        var_units = [data.units[v] for v in data.variable_names] if self.use_units else [None] * data.n
        if self.use_units:
            self.classes = UnitClasses(self.box, var_units)
        else:
            self.classes = UnitClasses(self.box, [])
        self.threshold = cfg.threshold(data)
        self.grid = np.linspace(-cfg.omega, cfg.omega, cfg.grid_points)


def z_patterns(m: int, k: int) -> list[tuple[bool, ...]]:
    """Gate patterns with at most k constants, fewest constants first."""
    out = []
    for s in range(min(k, m) + 1):
        for combo in itertools.combinations(range(m), s):
            out.append(tuple(j in combo for j in range(m)))
    return out


def affine_in_gated(tree: Gentree, gated: Sequence[int]) -> bool:
    """True when the tree is jointly affine in the constants of ``gated`` leaves.

    Every gated leaf must reach the root through ADD/SUB, through MUL whose
    other operand holds no gated leaf, or as the numerator of a DIV whose
    denominator holds no gated leaf.
    """
    gated = set(gated)
    counter = itertools.count()

    def walk(n: Node) -> tuple[bool, bool]:
        # returns (contains gated leaf, affine so far)
        if n.op is None:
            return next(counter) in gated, True
        results = [walk(c) for c in n.children]
        has = any(r[0] for r in results)
        ok = all(r[1] for r in results)
        if not has:
            return False, ok
        if n.op in (Operator.SQRT, Operator.EXP):
            return True, False
        if n.op is Operator.MUL and results[0][0] and results[1][0]:
            return True, False
        if n.op is Operator.DIV and results[1][0]:
            return True, False
        return True, ok

    has, ok = walk(tree.root)
    return ok


def _linear_parts(root: Node, values: Sequence[np.ndarray], gated: Sequence[int]):
    """Split f = a + sum_g h_g * b_g for an affine tree; returns (a, {g: b_g})."""
    gated = set(gated)
    counter = itertools.count()

    def walk(n: Node):
        if n.op is None:
            j = next(counter)
            if j in gated:
                return np.zeros_like(values[j]), {j: values[j]}
            return values[j], {}
        kids = [walk(c) for c in n.children]
        op = n.op
        if op.arity == 1:
            a, _ = kids[0]
            return (np.sqrt(a) if op is Operator.SQRT else np.exp(a)), {}
        (a1, b1), (a2, b2) = kids
        if op in (Operator.ADD, Operator.SUB):
            sign = 1.0 if op is Operator.ADD else -1.0
            b = dict(b1)
            for g, v in b2.items():
                b[g] = b.get(g, 0.0) + sign * v
            return a1 + sign * a2, b
        if op is Operator.MUL:
            b = {g: v * a2 for g, v in b1.items()}
            b.update({g: a1 * v for g, v in b2.items()})
            return a1 * a2, b
        bad = np.abs(a2) < EPS_DIV
        a = np.where(bad, np.nan, a1 / a2)
        return a, {g: np.where(bad, np.nan, v / a2) for g, v in b1.items()}

    with np.errstate(all="ignore"):
        a, b = walk(root)
        a = np.where(np.isfinite(a), a, np.nan)
        b = {g: np.where(np.isfinite(v), v, np.nan) for g, v in b.items()}
    return a, b


def _sse_rows(y: np.ndarray, f: np.ndarray) -> np.ndarray:
    with np.errstate(all="ignore"):
        r = y - f
        s = np.sum(r * r, axis=-1)
    return np.where(np.isfinite(s), s, np.inf)


def _scaled(values: list[np.ndarray], g: int, h: np.ndarray) -> list[np.ndarray]:
    out = list(values)
    out[g] = values[g] * h
    return out


def _golden(F, lo: np.ndarray, hi: np.ndarray, tol: float, max_iter: int = 200):
    """Vectorized golden-section minimization on [lo, hi]; returns (x, F(x))."""
    lo, hi = lo.copy(), hi.copy()
    c = hi - GOLDEN * (hi - lo)
    d = lo + GOLDEN * (hi - lo)
    fc, fd = F(c), F(d)
    for _ in range(max_iter):
        if np.all(hi - lo <= tol):
            break
        left = fc <= fd
        hi = np.where(left, d, hi)
        lo = np.where(left, lo, c)
        new_c = hi - GOLDEN * (hi - lo)
        new_d = lo + GOLDEN * (hi - lo)
        x_new = np.where(left, new_c, new_d)
        f_new = F(x_new)
        d, fd, c, fc = (np.where(left, c, new_d), np.where(left, fc, f_new),
                        np.where(left, new_c, d), np.where(left, f_new, fd))
    better = fc <= fd
    return np.where(better, c, d), np.where(better, fc, fd)


def fit_constants_batch(root: Node, values: list[np.ndarray], gated: Sequence[int], y: np.ndarray,
                        cfg: SolverConfig, grid: np.ndarray, affine: bool):
    """Fit the gated constants for a batch of N assignments.

    ``values[j]`` has shape (N, |I|).  Returns (sse[N], h[N, len(gated)]).
    """
    N = values[0].shape[0]
    k = len(gated)
    if k == 0:
        return _sse_rows(y, eval_batch(root, values)), np.zeros((N, 0))
    omega = cfg.omega
    if affine and k == 1:
        g = gated[0]
        a, b = _linear_parts(root, values, gated)
        bg = b[g]
        with np.errstate(all="ignore"):
            num = np.sum((y - a) * bg, axis=-1)
            den = np.sum(bg * bg, axis=-1)
            h = np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)
        h = np.clip(np.where(np.isfinite(h), h, 0.0), -omega, omega)
        with np.errstate(all="ignore"):
            f = a + h[:, None] * bg
        return _sse_rows(y, f), h[:, None]
    if k == 1:
        return _fit_grid_1d(root, values, gated[0], y, cfg, grid)
    return _fit_multi(root, values, gated, y, cfg, affine)


def _fit_grid_1d(root, values, g, y, cfg, grid):
    N = values[0].shape[0]
    G = grid.size
    per = max(1, int(2_000_000 // (G * max(1, y.size))))
    out_s = np.empty(N)
    out_h = np.empty(N)
    for s in range(0, N, per):
        vals = [v[s:s + per] for v in values]
        n = vals[0].shape[0]
        expanded = [v[:, None, :] for v in vals]
        expanded[g] = vals[g][:, None, :] * grid[None, :, None]
        S = _sse_rows(y, eval_batch(root, expanded))  # (n, G)
        gi = np.argmin(S, axis=1)
        best_s = S[np.arange(n), gi]
        lo = grid[np.maximum(gi - 1, 0)]
        hi = grid[np.minimum(gi + 1, G - 1)]

        def F(h):
            return _sse_rows(y, eval_batch(root, _scaled(vals, g, h[:, None])))

        hr, sr = _golden(F, lo, hi, cfg.refine_tol)
        use = sr < best_s
        out_h[s:s + n] = np.where(use, hr, grid[gi])
        out_s[s:s + n] = np.where(use, sr, best_s)
    return out_s, out_h[:, None]


def _fit_multi(root, values, gated, y, cfg, affine):
    """k >= 2: bounded linear least squares, or coarse grid plus multistart L-BFGS-B."""
    N = values[0].shape[0]
    k = len(gated)
    out_s = np.full(N, np.inf)
    out_h = np.zeros((N, k))
    bounds = (-cfg.omega, cfg.omega)
    for r in range(N):
        vals = [v[r:r + 1] for v in values]

        def obj(hvec):
            vv = list(vals)
            for g, hv in zip(gated, hvec):
                vv[g] = vals[g] * hv
            return float(_sse_rows(y, eval_batch(root, vv))[0])

        if affine:
            a, b = _linear_parts(root, vals, gated)
            A = np.stack([b[g][0] for g in gated], axis=1)
            rhs = y - a[0]
            if np.all(np.isfinite(A)) and np.all(np.isfinite(rhs)):
                res = optimize.lsq_linear(A, rhs, bounds=bounds, tol=1e-14)
                out_h[r] = res.x
                out_s[r] = obj(res.x)
            continue
        axis = np.linspace(-cfg.omega, cfg.omega, cfg.grid_points_multi)
        pts = np.array(list(itertools.product(axis, repeat=k)))
        vv = [np.repeat(v, len(pts), axis=0) for v in vals]
        for col, g in enumerate(gated):
            vv[g] = vv[g] * pts[:, col:col + 1]
        S = _sse_rows(y, eval_batch(root, vv))
        order = np.argsort(S)[: cfg.multistart]
        with np.errstate(all="ignore"):
            for i in order:
                if not np.isfinite(S[i]):
                    continue
                if S[i] < out_s[r]:
                    out_s[r], out_h[r] = S[i], pts[i]
                res = optimize.minimize(obj, pts[i], method="L-BFGS-B", bounds=[bounds] * k)
                if np.isfinite(res.fun) and res.fun < out_s[r]:
                    out_s[r], out_h[r] = res.fun, res.x
            if np.isfinite(out_s[r]):
                out_s[r], out_h[r] = _polish(root, vals, gated, y, out_h[r], out_s[r], bounds, obj)
    return out_s, out_h


def _polish(root, vals, gated, y, h0, s0, bounds, obj):
    """Bounded trust-region least squares on the residual vector from ``h0``."""

    def resid(hvec):
        vv = list(vals)
        for g, hv in zip(gated, hvec):
            vv[g] = vals[g] * hv
        f = eval_batch(root, vv)[0]
        r = f - y
        return np.where(np.isfinite(r), r, 1e150)

    lo, hi = bounds
    x0 = np.clip(h0, lo + 1e-12, hi - 1e-12)
    try:
        res = optimize.least_squares(resid, x0, bounds=(lo, hi), xtol=1e-15, ftol=1e-15, gtol=1e-15,
                                     max_nfev=200)
    except ValueError:
        return s0, h0
    s = obj(res.x)
    if np.isfinite(s) and s < s0:
        return s, res.x
    return s0, h0


def fit_constants(tree: Gentree, powers: Sequence[Sequence[int]], z: Sequence[bool], data: Dataset,
                  cfg: SolverConfig) -> tuple[tuple[float, ...], float]:
    """Best constants for fixed powers and gates; returns (h per leaf, sse)."""
    if sum(z) > cfg.max_constants:
        raise ConfigError(f"{sum(z)} gated leaves exceed k={cfg.max_constants}")
    table = monomial_table(data.X, [tuple(p) for p in powers])
    values = [table[j:j + 1] for j in range(tree.n_leaves)]
    gated = [j for j, g in enumerate(z) if g]
    grid = np.linspace(-cfg.omega, cfg.omega, cfg.grid_points)
    s, H = fit_constants_batch(tree.root, values, gated, data.y, cfg, grid, affine_in_gated(tree, gated))
    h = [1.0] * tree.n_leaves
    for col, g in enumerate(gated):
        h[g] = float(H[0, col])
    if not np.isfinite(s[0]):
        return tuple(h), math.inf
    params = _params(powers, z, h)
    return tuple(h), sse(tree, params, data)


def _params(powers, z, h) -> ParamAssignment:
    return ParamAssignment(tuple(
        LMonomial(tuple(p), bool(g), float(hv) if g else 1.0) for p, g, hv in zip(powers, z, h)))


@dataclass
class SolveState:
    """Resumable cursor over (gate pattern, feasible block, offset in block)."""

    tree: Gentree
    patterns: list[tuple[bool, ...]]
    z_index: int = -1
    blocks: Iterator | None = None
    block: tuple | None = None
    block_sizes: tuple[int, ...] = ()
    block_total: int = 0
    block_index: int = -1
    offset: int = 0
    best: CandidateModel | None = None
    evaluated: int = 0
    gated: list[int] = field(default_factory=list)
    affine: bool = True
    done: bool = False

    @property
    def cursor(self) -> tuple[int, int, int]:
        return (self.z_index, self.block_index, self.offset)


def _split_blocks(blocks: Iterator[tuple]) -> Iterator[tuple]:
    """Fix leading leaves until a block's product fits comfortably in int64."""
    for block in blocks:
        stack = [block]
        while stack:
            b = stack.pop()
            if math.prod(len(x) for x in b) <= MAX_BLOCK:
                yield b
                continue
            j = next(i for i, x in enumerate(b) if len(x) > 1)
            for idx in reversed(b[j]):
                stack.append(b[:j] + ([idx],) + b[j + 1:])


def _better(a: CandidateModel | None, b: CandidateModel) -> bool:
    if a is None:
        return True
    if b.sse != a.sse:
        return b.sse < a.sse
    return tiebreak_key(b.params) < tiebreak_key(a.params)


def _block_bound(state: SolveState, ctx: SolverContext, z) -> float:
    omega = ctx.cfg.omega
    lp = [[ctx.box[i] for i in idxs] for idxs in state.block]
    lh = [(-omega, omega) if g else (1.0, 1.0) for g in z]
    return lower_bound(state.tree, PartialState(lp, lh), ctx.data, ctx.cfg.bound)


def new_state(tree: Gentree, cfg: SolverConfig) -> SolveState:
    return SolveState(tree, z_patterns(tree.n_leaves, cfg.max_constants))


def _advance(state: SolveState, ctx: SolverContext) -> bool:
    """Move to the next non-empty block; False when the tree is exhausted."""
    while True:
        if state.blocks is not None:
            nxt = next(state.blocks, None)
            if nxt is not None:
                state.block = nxt
                state.block_sizes = tuple(len(x) for x in nxt)
                state.block_total = math.prod(state.block_sizes)
                state.block_index += 1
                state.offset = 0
                if state.block_total:
                    return True
                continue
        state.z_index += 1
        if state.z_index >= len(state.patterns):
            state.done = True
            state.block = None
            return False
        z = state.patterns[state.z_index]
        m = state.tree.n_leaves
        system = None
        if ctx.use_units:
            system = tree_unit_constraints(state.tree, z, ctx.data, ctx.cfg.dimensioned_constants)
        state.blocks = _split_blocks(iter_feasible_blocks(system, ctx.classes, m))
        state.block_index = -1
        state.gated = [j for j, g in enumerate(z) if g]
        state.affine = affine_in_gated(state.tree, state.gated)


def _chunk_len(state: SolveState, ctx: SolverContext) -> int:
    cfg = ctx.cfg
    if not state.gated or state.affine:
        return cfg.chunk_size
    if len(state.gated) == 1:
        return max(8, int(4_000_000 // (cfg.grid_points * ctx.data.n_points)))
    return 8


def solve_gentree(tree: Gentree, data: Dataset, cfg: SolverConfig,
                  incumbent_sse: float | SharedIncumbent = math.inf, budget_s: float = math.inf, *,
                  state: SolveState | None = None, context: SolverContext | None = None,
                  cancel: threading.Event | None = None, budget_evals: int | None = None) -> SolveStatus:
    """Search the (z, p) space of one gentree, fitting constants per assignment.

    Returns SOLVED as soon as a model meets the tolerance, PAUSED (with the
    resumable state) once ``budget_s`` or ``budget_evals`` is spent, CUTOFF
    when the lower bound reaches the incumbent, EXHAUSTED otherwise.
    """
    ctx = context or SolverContext(data, cfg)
    if state is None:
        state = new_state(tree, cfg)
    shared = incumbent_sse if isinstance(incumbent_sse, SharedIncumbent) else None

    def incumbent() -> float:
        return shared.get() if shared is not None else float(incumbent_sse)

    if state.done:
        return SolveStatus(EXHAUSTED, state.best, state=state, evaluated=state.evaluated)
    start = time.perf_counter()
    start_evals = state.evaluated
    y = data.y
    root = tree.root

    while True:
        if cancel is not None and cancel.is_set():
            return SolveStatus(CANCELLED, state.best, state=state, evaluated=state.evaluated)
        inc = incumbent()
        if inc <= 0.0:
            return SolveStatus(CUTOFF, state.best, bound=0.0, state=state, evaluated=state.evaluated)
        if time.perf_counter() - start >= budget_s or (
                budget_evals is not None and state.evaluated - start_evals >= budget_evals):
            return SolveStatus(PAUSED, state.best, state=state, evaluated=state.evaluated)

        if state.block is None or state.offset >= state.block_total:
            if not _advance(state, ctx):
                return SolveStatus(EXHAUSTED, state.best, state=state, evaluated=state.evaluated)
            if ctx.cfg.bound != "zero":
                z = state.patterns[state.z_index]
                cap = min(inc, state.best.sse if state.best else math.inf)
                if _block_bound(state, ctx, z) >= cap:
                    state.offset = state.block_total
                    continue

        n = min(_chunk_len(state, ctx), state.block_total - state.offset)
        flat = np.arange(state.offset, state.offset + n, dtype=np.int64)
        pos = np.unravel_index(flat, state.block_sizes)
        idx = [np.asarray(state.block[j], dtype=np.int64)[pos[j]] for j in range(tree.n_leaves)]
        values = [ctx.table[ix] for ix in idx]
        S, H = fit_constants_batch(root, values, state.gated, y, cfg, ctx.grid, state.affine)
        state.offset += n
        state.evaluated += n

        smin = float(np.min(S))
        if not np.isfinite(smin):
            continue
        hit = S <= ctx.threshold
        if hit.any():
            cand_rows = np.flatnonzero(hit)
        elif state.best is None or smin <= state.best.sse:
            cand_rows = np.flatnonzero(S == smin)
        else:
            continue
        cand_rows = cand_rows[np.argsort(S[cand_rows], kind="stable")][:64]
        z = state.patterns[state.z_index]
        chosen = None
        for r in cand_rows:
            powers = [ctx.box[idx[j][r]] for j in range(tree.n_leaves)]
            h = [1.0] * tree.n_leaves
            for col, g in enumerate(state.gated):
                h[g] = float(H[r, col])
            params = _params(powers, z, h)
            model = CandidateModel(tree, params, sse(tree, params, data))
            if math.isfinite(model.sse) and _better(chosen, model):
                chosen = model
        if chosen is None:
            continue
        if _better(state.best, chosen):
            state.best = chosen
        if state.best.sse <= ctx.threshold:
            state.done = True
            return SolveStatus(SOLVED, state.best, state=state, evaluated=state.evaluated)
