"""The service runtime: routed tasks, discovery routes, sandboxing and safe abort."""

from .app import Caller, FaultLog, LintBlocked, MintApp, Response, negotiate, scrub
from .config import ConfigError, MintConfig, Route, load_config, match_route, parse_config
from .lint import LintFinding, lint_sensitive_exposure
from .server import make_server, serve_in_background
from .tokens import TokenError, make_token, verify_token

__all__ = [
    "Caller", "ConfigError", "FaultLog", "LintBlocked", "LintFinding", "MintApp", "MintConfig", "Response", "Route",
    "TokenError", "lint_sensitive_exposure", "load_config", "make_server", "make_token", "match_route", "negotiate",
    "parse_config", "scrub", "serve_in_background", "verify_token",
]
