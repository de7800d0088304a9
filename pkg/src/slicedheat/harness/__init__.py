from .config import RunConfig, dumps, load, loads
from .convergence import ConvergenceReport, run_convergence
from .properties import PropertyResult, run_property_suite
from .report import emit_report

__all__ = [
    "ConvergenceReport",
    "PropertyResult",
    "RunConfig",
    "dumps",
    "emit_report",
    "load",
    "loads",
    "run_convergence",
    "run_property_suite",
]
