"""Penalty approximation of sweeping processes and Maximum Principle checks."""

import json as _json

from ._sweepmp import (
    Problem,
    SweepmpError,
    catching_up,
    derivative,
    evaluate,
    load_problem,
    run_cli,
    simulate,
)
from . import _sweepmp

__all__ = [
    "Problem",
    "SweepmpError",
    "catching_up",
    "certify",
    "derivative",
    "evaluate",
    "load_problem",
    "run_cli",
    "simulate",
    "validate_a1",
]


def validate_a1(problem, samples=20000, seed=1):
    """A1 report as a dict."""
    return _json.loads(_sweepmp.validate_a1(problem, samples, seed))


def certify(problem, gamma=400.0):
    """Maximum Principle report for the problem's control at one penalty level."""
    return _json.loads(_sweepmp.certify(problem, gamma))
