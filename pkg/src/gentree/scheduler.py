"""Portfolio search over a gentree catalog.

Workers run :func:`solve_gentree` on up to ``threads`` trees at a time, each
for one slice; paused trees go to the back of the queue.  The best SSE is
shared through a :class:`SharedIncumbent`.  Once a tree of depth d' solves,
deeper trees are cancelled and only trees of depth <= d' keep running.
"""

from __future__ import annotations

import logging
import math
import threading
import time
from collections import deque
from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from dataclasses import dataclass, field, replace

from .core import CandidateModel, Dataset, Gentree, LMonomial, ParamAssignment, render, tiebreak_key
from .dimension import check_model_units
from .enumeration import DEFAULT_OPS, EXP_OPS, GentreeCatalog, OperatorSet, enumerate_gentrees
from .errors import ConfigError
from .subsolver import (
    CANCELLED, CUTOFF, EXHAUSTED, PAUSED, SOLVED, TIMEOUT,
    SharedIncumbent, SolverConfig, SolverContext, new_state, solve_gentree,
)

log = logging.getLogger(__name__)


def model_to_dict(model: CandidateModel, names=None) -> dict:
    return {
        "tree": model.tree.serial,
        "leaves": [{"powers": list(l.powers), "gated": l.gated, "h": l.h} for l in model.params.leaves],
        "sse": model.sse,
        "complexity": model.complexity,
        "formula": render(model.tree, model.params, names),
    }


def model_from_dict(d: dict) -> CandidateModel:
    params = ParamAssignment(tuple(LMonomial(tuple(l["powers"]), l["gated"], l["h"]) for l in d["leaves"]))
    return CandidateModel(Gentree.parse(d["tree"]), params, d["sse"], d.get("complexity", 0))


@dataclass
class SearchReport:
    status: str = "NO_MODEL"
    incumbent: CandidateModel | None = None
    answer: CandidateModel | None = None
    solved: list[dict] = field(default_factory=list)
    statuses: list[dict] = field(default_factory=list)
    slice_log: list[dict] = field(default_factory=list)
    events: list[dict] = field(default_factory=list)
    cutoff_depth: int | None = None
    elapsed_s: float = 0.0
    variable_names: list[str] = field(default_factory=list)
    config: dict = field(default_factory=dict)
    phases: list["SearchReport"] = field(default_factory=list)
    label: str | None = None
    seed: int | None = None

    @property
    def formula(self) -> str | None:
        if self.answer is None:
            return None
        return render(self.answer.tree, self.answer.params, self.variable_names)

    @property
    def sse(self) -> float | None:
        return None if self.answer is None else self.answer.sse

    def to_dict(self) -> dict:
        names = self.variable_names
        return {
            "label": self.label,
            "status": self.status,
            "formula": self.formula,
            "sse": self.sse,
            "elapsed_s": self.elapsed_s,
            "config": self.config,
            "seed": self.seed,
            "variable_names": names,
            "answer": model_to_dict(self.answer, names) if self.answer else None,
            "incumbent": model_to_dict(self.incumbent, names) if self.incumbent else None,
            "solved": self.solved,
            "statuses": self.statuses,
            "slice_log": self.slice_log,
            "events": self.events,
            "cutoff_depth": self.cutoff_depth,
            "phases": [p.to_dict() for p in self.phases],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SearchReport":
        return cls(
            status=d["status"],
            incumbent=model_from_dict(d["incumbent"]) if d.get("incumbent") else None,
            answer=model_from_dict(d["answer"]) if d.get("answer") else None,
            solved=d.get("solved", []),
            statuses=d.get("statuses", []),
            slice_log=d.get("slice_log", []),
            events=d.get("events", []),
            cutoff_depth=d.get("cutoff_depth"),
            elapsed_s=d.get("elapsed_s", 0.0),
            variable_names=d.get("variable_names", []),
            config=d.get("config", {}),
            phases=[cls.from_dict(p) for p in d.get("phases", [])],
            label=d.get("label"),
            seed=d.get("seed"),
        )


def _run_one(tree, data, cfg, shared, budget, state, ctx, cancel, budget_evals):
    status = solve_gentree(tree, data, cfg, shared, budget, state=state, context=ctx,
                           cancel=cancel, budget_evals=budget_evals)
    return status, time.perf_counter()


def search(data: Dataset, cfg: SolverConfig, threads: int = 1, slice_s: float = 10.0, *,
           slice_evals: int | None = None, catalog: GentreeCatalog | None = None) -> SearchReport:
    """Round-robin portfolio search; see module docstring.

    ``slice_evals`` replaces the wall-clock slice by a count of evaluated
    assignments, which makes single-thread runs reproducible.
    """
    if threads < 1:
        raise ConfigError("threads must be >= 1")
    if catalog is None:
        catalog = enumerate_gentrees(cfg.depth, cfg.ops, cfg.rules, cfg.canonicalize)
    report = SearchReport(variable_names=list(data.variable_names), config=cfg.to_dict())
    t0 = time.perf_counter()
    if len(catalog) == 0:
        return report

    ctx = SolverContext(data, cfg)
    shared = SharedIncumbent()
    n = len(catalog)
    states = [None] * n
    final: list[str | None] = [None] * n
    best: list[CandidateModel | None] = [None] * n
    cancels = [threading.Event() for _ in range(n)]
    queue = deque(range(n))
    running: dict = {}
    d_prime: int | None = None
    deadline = t0 + cfg.time_limit_s
    audit = data.has_units and cfg.use_units

    def clock(t=None):
        return (t if t is not None else time.perf_counter()) - t0

    def cancel_deeper(depth: int):
        for fut, i in running.items():
            if catalog[i].depth > depth:
                cancels[i].set()

    with ThreadPoolExecutor(max_workers=threads) as pool:
        while queue or running:
            while len(running) < threads and queue:
                i = queue.popleft()
                if final[i] is not None:
                    continue
                if d_prime is not None and catalog[i].depth > d_prime:
                    final[i] = CANCELLED
                    continue
                remaining = deadline - time.perf_counter()
                if remaining <= 0:
                    queue.appendleft(i)
                    break
                if states[i] is None:
                    states[i] = new_state(catalog[i], cfg)
                budget = min(slice_s, remaining)
                fut = pool.submit(_run_one, catalog[i], data, cfg, shared, budget, states[i], ctx,
                                  cancels[i], slice_evals)
                running[fut] = i
                report.slice_log.append({"tree": i, "start": clock(), "event": "start"})
            if not running:
                break
            done, _ = wait(list(running), return_when=FIRST_COMPLETED)
            results = sorted(((f.result(), running.pop(f)) for f in done), key=lambda r: r[0][1])
            for (status, t_done), i in results:
                kind = status.kind
                tree = catalog[i]
                if kind == SOLVED and d_prime is not None and tree.depth > d_prime:
                    kind = CANCELLED
                report.slice_log.append({"tree": i, "end": clock(t_done), "event": kind,
                                         "evaluated": status.evaluated})
                model = status.model
                if model is not None and (best[i] is None or model.sse < best[i].sse or kind == SOLVED):
                    best[i] = model
                    shared.offer(model)
                    ev = {"t": clock(t_done), "tree": i, "depth": tree.depth, "kind": kind, "sse": model.sse}
                    if audit:
                        ev["units_ok"] = check_model_units(model, data, cfg.dimensioned_constants)
                    report.events.append(ev)
                if kind == SOLVED:
                    final[i] = SOLVED
                    report.solved.append({"tree": i, "serial": tree.serial, "depth": tree.depth,
                                          "sse": model.sse, "t": clock(t_done)})
                    if d_prime is None or tree.depth < d_prime:
                        d_prime = tree.depth
                        log.info("solved at depth %d by %s, sse=%.3g", d_prime, tree.serial, model.sse)
                    cancel_deeper(d_prime)
                elif kind == PAUSED:
                    if time.perf_counter() >= deadline:
                        final[i] = TIMEOUT
                    else:
                        queue.append(i)
                else:
                    final[i] = kind
            if time.perf_counter() >= deadline and not running:
                break

    for i in queue:
        if final[i] is None:
            final[i] = TIMEOUT
    for i in range(n):
        if final[i] is None:
            final[i] = CANCELLED if d_prime is not None and catalog[i].depth > d_prime else TIMEOUT
        report.statuses.append({
            "tree": i, "serial": catalog[i].serial, "depth": catalog[i].depth, "status": final[i],
            "sse": best[i].sse if best[i] is not None else None,
        })

    report.incumbent = shared.model
    report.cutoff_depth = d_prime
    solved = [(catalog[s["tree"]].depth, best[s["tree"]].sse, tiebreak_key(best[s["tree"]].params), s["tree"])
              for s in report.solved]
    if solved:
        report.answer = best[min(solved)[3]]
        report.status = SOLVED
    elif shared.model is not None:
        report.answer = shared.model
        report.status = TIMEOUT if TIMEOUT in final else EXHAUSTED
    report.elapsed_s = clock()
    return report


@dataclass(frozen=True)
class Phase:
    ops: OperatorSet
    tol: float
    budget_s: float | None = None


DEFAULT_PLAN = (Phase(DEFAULT_OPS, 1e-4, 600.0), Phase(EXP_OPS, 1e-8, None))


def parse_plan(text: str) -> list[Phase]:
    """``ops:tol:budget;ops:tol:budget`` with ops comma-separated and budget optional."""
    phases = []
    for chunk in text.split(";"):
        if not chunk.strip():
            continue
        parts = chunk.split(":")
        if len(parts) not in (2, 3):
            raise ConfigError(f"bad restart phase {chunk!r}")
        budget = float(parts[2]) if len(parts) == 3 and parts[2].strip() else None
        phases.append(Phase(OperatorSet.parse(parts[0]), float(parts[1]), budget))
    return phases


def search_with_restarts(data: Dataset, cfg: SolverConfig, plan=DEFAULT_PLAN, threads: int = 1,
                         slice_s: float = 10.0, **kwargs) -> SearchReport:
    """Run phases in order until one solves.  A phase without a budget gets
    ``cfg.time_limit_s``."""
    plan = list(plan)
    if not plan:
        raise ConfigError("restart plan is empty")
    t0 = time.perf_counter()
    reports = []
    for phase in plan:
        budget = phase.budget_s if phase.budget_s is not None else cfg.time_limit_s
        pcfg = replace(cfg, ops=phase.ops, tol=phase.tol, time_limit_s=budget)
        rep = search(data, pcfg, threads, slice_s, **kwargs)
        reports.append(rep)
        if rep.status == SOLVED:
            break
    if len(reports) == 1:
        out = reports[0]
    else:
        last = reports[-1]
        out = replace(last, phases=reports)
        if last.status != SOLVED:
            cands = [r.answer for r in reports if r.answer is not None]
            out.answer = min(cands, key=lambda m: m.sse) if cands else None
            out.incumbent = out.answer
    out.elapsed_s = time.perf_counter() - t0
    return out
