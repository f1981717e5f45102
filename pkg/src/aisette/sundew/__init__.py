"""SMT-backed validation: script emission, chktest proving, fault reachability, call-site obligations."""

from .encode import DEFAULT_BOUNDS, Bounds, Unsupported
from .solver import SolverError, SolverNotFound
from .validate import (
    MissingClause, ObligationReport, SiteResult, SmtScript, ValidationResult, check_api_call_site,
    check_error_reachability, emit_smt, replay_obligation, run_chktest, summarize,
)

__all__ = [
    "Bounds", "DEFAULT_BOUNDS", "Unsupported", "SolverError", "SolverNotFound", "MissingClause",
    "ObligationReport", "SiteResult", "SmtScript", "ValidationResult", "check_api_call_site",
    "check_error_reachability", "emit_smt", "replay_obligation", "run_chktest", "summarize",
]
