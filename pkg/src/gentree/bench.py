"""Feynman-style benchmark problems and the benchmark runner.

Variables are sampled uniformly from the listed ranges with the Philox
generator in :mod:`gentree.data`.  Base dimensions are mass, length, time,
temperature and charge.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
import sympy

from .core import CandidateModel, Dataset, Node, Operator, render
from .data import rng
from .dimension import UnitVector
from .errors import UnknownLabel
from .scheduler import DEFAULT_PLAN, SearchReport, search_with_restarts
from .subsolver import SOLVED, SolverConfig

DIMENSIONS = ("M", "L", "T", "Theta", "Q")

_U = {
    "1": (0, 0, 0, 0, 0),
    "mass": (1, 0, 0, 0, 0),
    "length": (0, 1, 0, 0, 0),
    "area": (0, 2, 0, 0, 0),
    "volume": (0, 3, 0, 0, 0),
    "time": (0, 0, 1, 0, 0),
    "temperature": (0, 0, 0, 1, 0),
    "charge": (0, 0, 0, 0, 1),
    "velocity": (0, 1, -1, 0, 0),
    "frequency": (0, 0, -1, 0, 0),
    "force": (1, 1, -2, 0, 0),
    "energy": (1, 2, -2, 0, 0),
    "power": (1, 2, -3, 0, 0),
    "pressure": (1, -1, -2, 0, 0),
    "permittivity": (-1, -3, 2, 0, 2),
    "efield": (1, 1, -2, 0, -1),
    "voltage": (1, 2, -2, 0, -1),
    "capacitance": (-1, -2, 2, 0, 2),
    "bfield": (1, 0, -1, 0, -1),
    "magmoment": (0, 2, -1, 0, 1),
    "gravconst": (-1, 3, -2, 0, 0),
    "boltzmann": (1, 2, -2, -1, 0),
    "conductivity": (1, 1, -3, -1, 0),
}


def unit(name: str) -> UnitVector:
    return UnitVector(_U[name])


@dataclass(frozen=True)
class ProblemSpec:
    label: str
    true_form: str
    variables: tuple[str, ...]
    ranges: tuple[tuple[float, float], ...]
    units: tuple[str, ...]
    target_unit: str
    fn: Callable
    expect_solved: bool = True
    notes: str = ""

    def generate(self, seed: int = 0, n_points: int = 10) -> Dataset:
        g = rng(seed)
        cols = [g.uniform(lo, hi, n_points) for lo, hi in self.ranges]
        X = np.column_stack(cols)
        y = np.array([self.fn(*row) for row in X], dtype=float)
        units = {v: unit(u) for v, u in zip(self.variables, self.units)}
        return Dataset(list(self.variables), X, y, units, unit(self.target_unit))

    def sympy_truth(self):
        syms = {v: sympy.Symbol(v, positive=True) for v in self.variables}
        return sympy.sympify(self.true_form, locals=syms), syms


def _p(label, form, variables, ranges, units, target, fn, **kw) -> ProblemSpec:
    return ProblemSpec(label, form, tuple(variables), tuple(ranges), tuple(units), target, fn, **kw)


_R15 = (1.0, 5.0)

REGISTRY: dict[str, ProblemSpec] = {p.label: p for p in [
    _p("I.6.20a", "exp(-theta**2/2)/sqrt(2*pi)", ["theta"], [(1.0, 3.0)], ["1"], "1",
       lambda t: math.exp(-t * t / 2) / math.sqrt(2 * math.pi),
       notes="needs the exp() restart phase"),
    _p("I.9.18", "G*m1*m2/((x2-x1)**2+(y2-y1)**2+(z2-z1)**2)",
       ["m1", "m2", "G", "x1", "x2", "y1", "y2", "z1", "z2"],
       [(1, 2), (1, 2), (1, 2), (3, 4), (1, 2), (3, 4), (1, 2), (3, 4), (1, 2)],
       ["mass", "mass", "gravconst"] + ["length"] * 6, "force",
       lambda m1, m2, G, x1, x2, y1, y2, z1, z2: G * m1 * m2 / ((x2 - x1) ** 2 + (y2 - y1) ** 2 + (z2 - z1) ** 2),
       expect_solved=False, notes="reported as a failure"),
    _p("I.10.7", "m0/sqrt(1-v**2/c**2)", ["m0", "v", "c"], [_R15, (1, 2), (3, 10)],
       ["mass", "velocity", "velocity"], "mass", lambda m0, v, c: m0 / math.sqrt(1 - v * v / (c * c))),
    _p("I.12.2", "q1*q2/(4*pi*epsilon*r**2)", ["q1", "q2", "epsilon", "r"], [_R15] * 4,
       ["charge", "charge", "permittivity", "length"], "force",
       lambda q1, q2, eps, r: q1 * q2 / (4 * math.pi * eps * r * r)),
    _p("I.12.4", "q1/(4*pi*epsilon*r**2)", ["q1", "epsilon", "r"], [_R15] * 3,
       ["charge", "permittivity", "length"], "efield",
       lambda q1, eps, r: q1 / (4 * math.pi * eps * r * r)),
    _p("I.13.4", "m*(v**2+u**2+w**2)/2", ["m", "v", "u", "w"], [_R15] * 4,
       ["mass", "velocity", "velocity", "velocity"], "energy",
       lambda m, v, u, w: 0.5 * m * (v * v + u * u + w * w)),
    _p("I.13.12", "G*m1*m2*(1/r2-1/r1)", ["m1", "m2", "r1", "r2", "G"], [_R15] * 5,
       ["mass", "mass", "length", "length", "gravconst"], "energy",
       lambda m1, m2, r1, r2, G: G * m1 * m2 * (1 / r2 - 1 / r1)),
    _p("I.18.4", "(m1*r1+m2*r2)/(m1+m2)", ["m1", "m2", "r1", "r2"], [_R15] * 4,
       ["mass", "mass", "length", "length"], "length",
       lambda m1, m2, r1, r2: (m1 * r1 + m2 * r2) / (m1 + m2)),
    _p("I.24.6", "m*(omega**2+omega_0**2)*x**2/4", ["m", "omega", "omega_0", "x"], [_R15] * 4,
       ["mass", "frequency", "frequency", "length"], "energy",
       lambda m, w, w0, x: 0.25 * m * (w * w + w0 * w0) * x * x),
    _p("I.25.13", "q/C", ["q", "C"], [_R15] * 2, ["charge", "capacitance"], "voltage",
       lambda q, C: q / C),
    _p("I.27.6", "1/(1/d1+n/d2)", ["d1", "d2", "n"], [_R15] * 3, ["length", "length", "1"], "length",
       lambda d1, d2, n: 1 / (1 / d1 + n / d2)),
    _p("I.34.10", "omega_0/(1-v/c)", ["c", "v", "omega_0"], [(3, 10), (1, 2), _R15],
       ["velocity", "velocity", "frequency"], "frequency",
       lambda c, v, w0: w0 / (1 - v / c)),
    _p("I.39.11", "pF*V/(gamma-1)", ["gamma", "pF", "V"], [(2, 5), _R15, _R15],
       ["1", "pressure", "volume"], "energy",
       lambda gamma, pF, V: pF * V / (gamma - 1)),
    _p("I.43.43", "kb*v/((gamma-1)*A)", ["gamma", "kb", "A", "v"], [(2, 5), _R15, _R15, _R15],
       ["1", "boltzmann", "area", "velocity"], "conductivity",
       lambda gamma, kb, A, v: kb * v / ((gamma - 1) * A)),
    _p("II.2.42", "kappa*(T2-T1)*A/d", ["kappa", "T1", "T2", "A", "d"], [_R15] * 5,
       ["conductivity", "temperature", "temperature", "area", "length"], "power",
       lambda kappa, T1, T2, A, d: kappa * (T2 - T1) * A / d),
    _p("II.34.11", "g_*q*B/(2*m)", ["g_", "q", "B", "m"], [_R15] * 4,
       ["1", "charge", "bfield", "mass"], "frequency",
       lambda g, q, B, m: g * q * B / (2 * m)),
    _p("II.37.1", "mom*(1+chi)*B", ["mom", "B", "chi"], [_R15] * 3,
       ["magmoment", "bfield", "1"], "energy",
       lambda mom, B, chi: mom * (1 + chi) * B),
    _p("II.38.3", "Y*A*x/d", ["Y", "A", "d", "x"], [_R15] * 4,
       ["pressure", "area", "length", "length"], "force",
       lambda Y, A, d, x: Y * A * x / d),
]}

EASY_SUBSET = ("I.12.4", "I.25.13", "II.34.11", "I.34.10", "I.39.11")


def get_problem(label: str) -> ProblemSpec:
    try:
        return REGISTRY[label]
    except KeyError:
        raise UnknownLabel(label) from None


def snap_constant(h: float, rel: float = 1e-6, max_den: int = 64):
    """Nearest q * pi^k with q a small-denominator rational and k in {-1, 0, 1}.

    Falls back to the float itself when nothing lies within ``rel``.
    """
    for k in (0, -1, 1):
        base = h / math.pi ** k
        q = Fraction(base).limit_denominator(max_den)
        if q != 0 and abs(float(q) - base) <= rel * abs(base):
            return sympy.Rational(q.numerator, q.denominator) * sympy.pi ** k
    return sympy.Float(h)


def model_to_sympy(model: CandidateModel, names: Sequence[str], symbolic_constants: bool = False):
    """Sympy expression of a model; constants become snapped numbers or symbols C0, C1, ..."""
    syms = [sympy.Symbol(v, positive=True) for v in names]
    leaves = iter(model.params.leaves)
    consts = []

    def const(h: float):
        if symbolic_constants:
            c = sympy.Symbol(f"C{len(consts)}")
            consts.append((c, h))
            return c
        return snap_constant(h)

    def build(n: Node):
        if n.op is None:
            leaf = next(leaves)
            e = const(leaf.h) if leaf.gated else sympy.Integer(1)
            for s, p in zip(syms, leaf.powers):
                e = e * s ** p
            return e
        kids = [build(c) for c in n.children]
        return {
            Operator.ADD: lambda a, b: a + b,
            Operator.SUB: lambda a, b: a - b,
            Operator.MUL: lambda a, b: a * b,
            Operator.DIV: lambda a, b: a / b,
            Operator.SQRT: lambda a: sympy.sqrt(a),
            Operator.EXP: lambda a: sympy.exp(a),
        }[n.op](*kids)

    return build(model.tree.root), consts


def form_matches(model: CandidateModel, problem: ProblemSpec) -> bool:
    """Symbolic check: with constants snapped to nearby simple numbers, the
    model and the true formula differ by zero."""
    truth, syms = problem.sympy_truth()
    expr, _ = model_to_sympy(model, problem.variables)
    expr = expr.subs({sympy.Symbol(v, positive=True): syms[v] for v in problem.variables})
    try:
        return sympy.simplify(expr - truth) == 0 or sympy.simplify(expr / truth - 1) == 0
    except (TypeError, ZeroDivisionError):
        return False


def power_pattern(model: CandidateModel) -> tuple:
    """Tree shape plus per-leaf (powers, gated): the model with constants erased."""
    return (model.tree.serial, tuple((l.powers, l.gated) for l in model.params.leaves))


def benchmark_config(**overrides) -> SolverConfig:
    """Registry benchmark settings: d=3, k=1, Omega=100, delta=2, tau=6."""
    base = SolverConfig(depth=3, max_constants=1, omega=100.0, delta=2, tau=6, tol=1e-4,
                        time_limit_s=600.0)
    return replace(base, **overrides)


@dataclass
class BenchRow:
    label: str
    solved: bool
    form_ok: bool
    elapsed_s: float
    formula: str | None
    sse: float | None
    status: str
    report: SearchReport | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {"label": self.label, "solved": self.solved, "form_ok": self.form_ok,
                "elapsed_s": self.elapsed_s, "formula": self.formula, "sse": self.sse,
                "status": self.status}


def run_problem(label: str, cfg: SolverConfig | None = None, threads: int = 4, *, seed: int = 0,
                n_points: int = 10, noise: float = 0.0, noise_seed: int | None = None, plan=DEFAULT_PLAN,
                slice_s: float = 10.0) -> BenchRow:
    """Generate a dataset for `label`, search it and check the recovered form.

    The noise stream defaults to ``seed + 1`` so that noise and sampling never
    share a Philox key.
    """
    from .data import inject_noise

    problem = get_problem(label)
    cfg = cfg or benchmark_config()
    data = problem.generate(seed, n_points)
    if noise:
        data = inject_noise(data, noise, seed + 1 if noise_seed is None else noise_seed)
    t0 = time.perf_counter()
    report = search_with_restarts(data, cfg, plan, threads=threads, slice_s=slice_s)
    elapsed = time.perf_counter() - t0
    report.label, report.seed = label, seed
    ans = report.answer
    solved = report.status == SOLVED
    form_ok = bool(ans is not None and solved and form_matches(ans, problem))
    return BenchRow(label, solved, form_ok, elapsed,
                    render(ans.tree, ans.params, data.variable_names) if ans else None,
                    ans.sse if ans else None, report.status, report)


def run_benchmark(labels: Sequence[str], cfg: SolverConfig | None = None, threads: int = 4,
                  **kwargs) -> list[BenchRow]:
    for label in labels:
        get_problem(label)
    return [run_problem(label, cfg, threads, **kwargs) for label in labels]


def summarize(rows: Sequence[BenchRow]) -> str:
    lines = [f"{'label':<10} {'solved':<7} {'form':<6} {'time_s':>8}  formula"]
    for r in rows:
        lines.append(f"{r.label:<10} {str(r.solved):<7} {str(r.form_ok):<6} {r.elapsed_s:>8.2f}  {r.formula}")
    n_ok = sum(r.form_ok for r in rows)
    lines.append(f"{n_ok}/{len(rows)} recovered")
    return "\n".join(lines)
