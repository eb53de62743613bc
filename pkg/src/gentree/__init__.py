"""Symbolic regression by exhaustive search over gentrees with L-monomial leaves."""

from .core import (
    CandidateModel, Dataset, Gentree, LMonomial, Node, Operator, ParamAssignment,
    eval_gentree, render, sse,
)
from .data import inject_noise, load_dataset, load_report, save_report
from .dimension import UnitVector, check_model_units, feasible_power_sets, tree_unit_constraints
from .enumeration import DEFAULT_OPS, EXP_OPS, GentreeCatalog, OperatorSet, enumerate_gentrees, prune
from .errors import ConfigError, DomainError, ParseError, ShapeError, UnknownLabel
from .scheduler import Phase, SearchReport, search, search_with_restarts
from .subsolver import SharedIncumbent, SolverConfig, SolveStatus, fit_constants, solve_gentree

__all__ = [
    "CandidateModel", "Dataset", "Gentree", "LMonomial", "Node", "Operator", "ParamAssignment",
    "eval_gentree", "render", "sse",
    "inject_noise", "load_dataset", "load_report", "save_report",
    "UnitVector", "check_model_units", "feasible_power_sets", "tree_unit_constraints",
    "DEFAULT_OPS", "EXP_OPS", "GentreeCatalog", "OperatorSet", "enumerate_gentrees", "prune",
    "ConfigError", "DomainError", "ParseError", "ShapeError", "UnknownLabel",
    "Phase", "SearchReport", "search", "search_with_restarts",
    "SharedIncumbent", "SolverConfig", "SolveStatus", "fit_constants", "solve_gentree",
]
