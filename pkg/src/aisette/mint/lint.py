"""Sensitivity lint: which routes could carry sensitive values across their boundary."""

from __future__ import annotations

from dataclasses import dataclass

from ..lang.checker import TypedModule
from .config import MintConfig


@dataclass(frozen=True)
class LintFinding:
    severity: str  # error | warning
    route: str
    message: str

    def __str__(self) -> str:
        return f"{self.severity}: route {self.route}: {self.message}"


def task_decl(tm: TypedModule, name: str):
    return tm.apis.get(name) or tm.functions.get(name)


def sensitive_types(tm: TypedModule, t, seen=None) -> list[str]:
    """Names of sensitive aliases reachable from ``t``, in first-seen order."""
    seen = set() if seen is None else seen
    if t is None or t.name in seen:
        return []
    seen.add(t.name)
    if tm.is_sensitive(t):
        return [t.name]
    out = []
    for a in t.args:
        out += sensitive_types(tm, a, seen)
    ent = tm.entities.get(t.name)
    if ent is not None:
        for f in ent.fields:
            out += sensitive_types(tm, f.type, seen)
    return out


def lint_sensitive_exposure(config: MintConfig, tm: TypedModule) -> list[LintFinding]:
    findings = []
    for r in config.routes:
        if r.task is None:
            continue
        decl = task_decl(tm, r.task)
        if decl is None:
            continue
        flows = []
        for p in decl.params:
            flows += [(f"parameter {p.name}", s) for s in sensitive_types(tm, p.type)]
        flows += [("result", s) for s in sensitive_types(tm, decl.return_type)]
        if not flows:
            continue
        where = ", ".join(f"{w} carries {s}" for w, s in flows)
        if r.public:
            findings.append(LintFinding("error", r.path, f"public endpoint {r.task} may expose sensitive data ({where})"))
        elif r.ceiling == "none":
            findings.append(LintFinding("error", r.path, f"{r.task} exceeds its no-sensitive ceiling ({where})"))
    return findings
