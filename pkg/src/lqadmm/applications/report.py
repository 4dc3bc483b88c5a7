"""Experiment reports and the shared solver harness."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..lqp import LQProblem
from ..solvers import ConvergenceTrace, SolverParams, solve
from ..tuning import TunerResult

EPSILON = 1e-6
BASELINES = ("gd", "gd-n", "gd-nr", "cg")


@dataclass
class ExperimentReport:
    problem_descriptor: str
    tuned: dict = field(default_factory=dict)  # variant -> TunerResult
    traces: dict = field(default_factory=dict)  # solver label -> ConvergenceTrace
    summary: dict = field(default_factory=dict)  # solver label -> iterations to EPSILON (None if not reached)
    rates: dict = field(default_factory=dict)  # solver label -> predicted convergence factor
    details: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    images: dict = field(default_factory=dict, repr=False)

    def add_trace(self, label: str, trace: ConvergenceTrace, rate: Optional[float] = None):
        self.traces[label] = trace
        self.summary[label] = trace.iterations_to(EPSILON)
        if rate is not None:
            self.rates[label] = rate

    def to_text(self) -> str:
        lines = [f"problem: {self.problem_descriptor}"]
        for name, res in self.tuned.items():
            alpha = "-" if res.alpha_star is None else f"{res.alpha_star:.10g}"
            lines.append(f"tuned {name}: theta={res.theta_star:.10g} alpha={alpha} objective={res.objective_at_optimum:.10g}")
        for key in sorted(self.details):
            lines.append(f"{key}: {self.details[key]}")
        lines.append(f"iterations to relative error {EPSILON:g}:")
        for label, count in self.summary.items():
            rate = self.rates.get(label)
            extra = "" if rate is None else f" (predicted factor {rate:.6g})"
            lines.append(f"  {label}: {'not reached' if count is None else count}{extra}")
        lines.extend(f"note: {n}" for n in self.notes)
        return "\n".join(lines) + "\n"


def tuned_result(theta: float, alpha: Optional[float], objective_value: float, kind: str, note: str = "") -> TunerResult:
    """A TunerResult for parameters obtained in closed form."""
    return TunerResult(theta, alpha, objective_value, [(theta, objective_value)], True, kind, note)


def run_solver(report: ExperimentReport, label: str, problem: LQProblem, params: SolverParams, u_star,
               rate: Optional[float] = None, u0=None):
    u, trace = solve(problem, params, u0=u0, u_star=u_star)
    report.add_trace(label, trace, rate)
    return u


def run_baselines(report: ExperimentReport, problem: LQProblem, u_star, max_iters: int, tol: float,
                  methods=BASELINES, u0=None):
    for m in methods:
        run_solver(report, m, problem, SolverParams(m, max_iters=max_iters, tol=tol), u_star, u0=u0)


def relative_error(u, ref) -> float:
    return float(np.linalg.norm(u - ref) / max(np.linalg.norm(ref), 1e-300))
