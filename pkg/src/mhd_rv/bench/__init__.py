from .problems import (BenchmarkConfig, ProblemSpec, PROBLEMS,
                       initial_condition, exact_solution)
from .norms import ErrorReport, error_norms, convergence_rate, \
    divergence_monitor
from .runner import run, sweep, RunResult
from .tables import check_tables

__all__ = [
    "BenchmarkConfig", "ProblemSpec", "PROBLEMS", "initial_condition",
    "exact_solution", "ErrorReport", "error_norms", "convergence_rate",
    "divergence_monitor", "run", "sweep", "RunResult", "check_tables",
]
