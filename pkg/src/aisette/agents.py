"""Agent bindings and typed output shaping.

A binding is any callable taking an :class:`AgentRequest` and returning raw
text. Bindings see only the :class:`EnvRecord` the caller built for them.
"""

from __future__ import annotations

import json
import os
import subprocess
import urllib.error
import urllib.request
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from . import regex as safe_regex
from .bapi import DecodeError, decode_lenient
from .lang.ast import TypeRef
from .runtime.interp import EnvRecord
from .runtime.values import NONE, AliasV, BoolV, DecV, EntityV, Fault, IntV, ListV, NoneV, SomeV, StrV, Value, dec_text


class AgentMiss(Exception):
    """A scripted table had no rule for the request."""


@dataclass(frozen=True)
class AgentRequest:
    name: str
    env: EnvRecord
    input: str
    prompt: str
    shape: TypeRef


AgentBinding = Callable[[AgentRequest], str]


@dataclass(frozen=True)
class Rule:
    input: safe_regex.SafeRegex
    prompt: safe_regex.SafeRegex
    response: str


class ScriptedTable:
    """First matching (input pattern, prompt pattern) rule answers; no match is :class:`AgentMiss`."""

    def __init__(self, rules: list[tuple[str, str, str]]):
        self.rules = [Rule(safe_regex.compile(i), safe_regex.compile(p), r) for i, p, r in rules]

    @classmethod
    def parse(cls, text: str) -> "ScriptedTable":
        rules = []
        for n, line in enumerate(text.splitlines(), 1):
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ValueError(f"line {n}: expected 'input-pattern<TAB>prompt-pattern<TAB>response'")
            rules.append(tuple(parts))
        return cls(rules)

    @classmethod
    def load(cls, path) -> "ScriptedTable":
        return cls.parse(Path(path).read_text(encoding="utf-8"))

    def __call__(self, req: AgentRequest) -> str:
        for rule in self.rules:
            if rule.input.matches(req.input) and rule.prompt.matches(req.prompt):
                return rule.response
        raise AgentMiss(f"no scripted rule for agent {req.name}")


def value_json(v: Value):
    """Untyped JSON-compatible rendering of a value (aliases erased, decimals as text)."""
    if isinstance(v, AliasV):
        return value_json(v.inner)
    if isinstance(v, (IntV, BoolV, StrV)):
        return v.value
    if isinstance(v, DecV):
        return dec_text(v.scaled)
    if isinstance(v, EntityV):
        return {n: value_json(x) for n, x in v.fields}
    if isinstance(v, ListV):
        return [value_json(x) for x in v.items]
    if isinstance(v, SomeV):
        return value_json(v.value)
    if isinstance(v, NoneV):
        return None
    return None


def request_json(req: AgentRequest) -> str:
    return json.dumps({
        "agent": req.name,
        "env": {n: value_json(v) for n, v in req.env.items()},
        "input": req.input,
        "prompt": req.prompt,
        "shape": str(req.shape),
    })


class ChildProcessAgent:
    """Runs ``command`` per request: JSON request on stdin, raw answer on stdout.

    The child gets a scrubbed process environment (PATH only).
    """

    def __init__(self, command: list[str], timeout: float = 30.0):
        self.command = list(command)
        self.timeout = timeout

    def __call__(self, req: AgentRequest) -> str:
        try:
            proc = subprocess.run(
                self.command, input=request_json(req), capture_output=True, text=True,
                timeout=self.timeout, env={"PATH": os.environ.get("PATH", os.defpath)},
            )
        except (OSError, subprocess.TimeoutExpired) as exc:
            raise Fault("agent", f"agent process failed: {exc}") from None
        if proc.returncode != 0:
            raise Fault("agent", f"agent process exited with status {proc.returncode}")
        return proc.stdout


class HttpAgent:
    """POSTs the JSON request to ``url``; the response body is the answer."""

    def __init__(self, url: str, timeout: float = 30.0):
        self.url = url
        self.timeout = timeout

    def __call__(self, req: AgentRequest) -> str:
        data = request_json(req).encode("utf-8")
        request = urllib.request.Request(self.url, data=data, headers={"Content-Type": "application/json"}, method="POST")
        try:
            with urllib.request.urlopen(request, timeout=self.timeout) as resp:
                return resp.read().decode("utf-8")
        except (urllib.error.URLError, OSError) as exc:
            raise Fault("agent", f"agent endpoint failed: {exc}") from None


def invoke_agent(binding: AgentBinding, env: EnvRecord, input: str, prompt: str, shape: TypeRef, tm, name: str = "") -> Value:
    """Ask ``binding`` and shape the answer as ``shape``.

    Option shapes turn a miss or an undecodable answer into ``none``; other
    shapes fault.
    """
    req = AgentRequest(name, env, input, prompt, shape)
    optional = shape.name == "Option"
    try:
        raw = binding(req)
    except AgentMiss as miss:
        if optional:
            return NONE
        raise Fault("shape", str(miss)) from None
    try:
        return decode_lenient(tm, raw, shape)
    except DecodeError as exc:
        if optional:
            return NONE
        raise Fault("shape", f"agent answer is not a {shape}: {exc.diagnostics[0].message}") from None


def load_binding(spec: str) -> AgentBinding:
    """Binding from a config string: ``table:PATH``, ``exec:CMD ARGS``, or an http(s) URL."""
    if spec.startswith("table:"):
        return ScriptedTable.load(spec[len("table:"):])
    if spec.startswith("exec:"):
        import shlex

        return ChildProcessAgent(shlex.split(spec[len("exec:"):]))
    if spec.startswith(("http://", "https://")):
        return HttpAgent(spec)
    raise ValueError(f"unrecognised agent binding {spec!r}")
