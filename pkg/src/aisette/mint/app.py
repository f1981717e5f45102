"""Request handling for the service, independent of the socket layer.

``MintApp.handle`` takes a method, a path with query, headers and a body and
returns a :class:`Response`. Faults inside a task end in :meth:`MintApp.safe_abort`:
no partial body, one redacted fault record, one ``TaskFaulted`` event.
"""

from __future__ import annotations

import itertools
import json
import logging
import mimetypes
import os
import threading
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable
from urllib.parse import parse_qs, unquote, urlsplit

from ..agents import load_binding
from ..bapi import FORM_MEDIA, MEDIA_TYPES, DecodeError, decode, encode
from ..diagnostics import NO_SPAN, AisetteError, error
from ..lang import ast as A
from ..lang import check_source
from ..lang.checker import TypedModule
from ..runtime.events import EventLog, completed, faulted
from ..runtime.holes import HoleStore
from ..runtime.interp import ApiBinding, EnvRecord, Interpreter
from ..runtime.values import VOID, Fault, Value, sensitive_leaves
from ..sandbox import SandboxPolicy, glob_to_regex
from . import discovery
from .config import ConfigError, MintConfig, Route, config_error, match_route, schema
from .lint import LintFinding, lint_sensitive_exposure, task_decl
from .tokens import TokenError, verify_token

log = logging.getLogger("aisette.mint")

STATUS_FOR = {"precondition": 412, "permission-denied": 403}


class LintBlocked(AisetteError):
    def __init__(self, findings: list[LintFinding]):
        self.findings = findings
        super().__init__([error("lint", str(f), NO_SPAN) for f in findings])


@dataclass
class Response:
    status: int
    body: bytes = b""
    headers: dict[str, str] = field(default_factory=dict)

    @property
    def text(self) -> str:
        return self.body.decode("utf-8")

    def json(self):
        return json.loads(self.body)


@dataclass
class Caller:
    permissions: tuple[str, ...] = ()
    everything: bool = False

    def may_use(self, route: Route) -> bool:
        if route.public or self.everything:
            return True
        return any(glob_to_regex("route:" + g).fullmatch("route:" + route.path) for g in self.permissions)


class FaultLog:
    """Append-only fault records (already redacted), optionally mirrored to a JSON-lines file."""

    def __init__(self, path: Path | None = None):
        self.path = path
        self.records: list[dict] = []
        self._lock = threading.Lock()

    def append(self, record: dict) -> None:
        with self._lock:
            self.records.append(record)
            if self.path is not None:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with self.path.open("a", encoding="utf-8") as fh:
                    fh.write(json.dumps(record, sort_keys=True) + "\n")


def scrub(text: str, secrets) -> str:
    """Mask every occurrence of each secret with asterisks of the same length, longest first."""
    for s in sorted({s for s in secrets if s}, key=len, reverse=True):
        text = text.replace(s, "*" * len(s))
    return text


def negotiate(accept: str | None) -> str:
    """Wire form for an Accept header; JSON unless a BAPI media type is preferred."""
    if not accept:
        return "json"
    best, best_q = "json", -1.0
    for i, part in enumerate(accept.split(",")):
        media, *params = [x.strip() for x in part.split(";")]
        q = 1.0
        for p in params:
            if p.startswith("q="):
                try:
                    q = float(p[2:])
                except ValueError:
                    q = 0.0
        form = MEDIA_TYPES.get(media.lower())
        if form is None and media in ("*/*", "application/*"):
            form = "json"
        if form is not None and q > best_q:
            best, best_q = form, q
    return best


def request_schema(tm: TypedModule, decl) -> TypedModule:
    """``tm`` plus an entity named after the task whose fields are its parameters."""
    ent = A.EntityDecl(decl.name, tuple(decl.params))
    return replace(tm, entities={**tm.entities, decl.name: ent})


def env_type(tm: TypedModule, name: str):
    for decl in [*tm.apis.values(), *tm.functions.values(), *tm.agents.values()]:
        for p in decl.env:
            if p.name == name:
                return p.type
    return None


class MintApp:
    def __init__(
        self, config: MintConfig, tm: TypedModule | None = None, apis: dict[str, ApiBinding] | None = None,
        agents: dict | None = None, secret: bytes | str | None = None, allow_lint_warnings: bool = False,
        rollback: Callable[[str], None] | None = None,
    ):
        self.config = config
        if tm is None:
            path = config.resolve(config.source)
            try:
                tm = check_source(path.read_text(encoding="utf-8"))
            except OSError as exc:
                raise config_error(f"cannot read module {path}: {exc.strerror}") from None
        self.tm = tm
        self._check_tasks()
        self.findings = lint_sensitive_exposure(config, tm)
        if self.findings and not allow_lint_warnings:
            raise LintBlocked(self.findings)
        for f in self.findings:
            log.warning("lint %s", f)
        self.env = self._decode_env()
        self.agents = {name: load_binding(self._resolve_binding(spec)) for name, spec in config.agents.items()}
        self.agents.update(agents or {})
        self.apis = dict(apis or {})
        if secret is None:
            secret = os.environ.get("MINT_SECRET")
        self.secret = secret
        self.events = EventLog()
        self.faults = FaultLog(config.resolve(config.faultlog))
        self.rollback = rollback or (lambda request_id: None)
        self.holes = HoleStore(tm, None, config.resolve(config.examples))
        self._ids = itertools.count(1)

    # -- setup -------------------------------------------------------------

    def _check_tasks(self) -> None:
        for r in self.config.routes:
            if r.task is not None and task_decl(self.tm, r.task) is None:
                raise config_error(f"route {r.path} names unknown task {r.task}", "unknown-task")
            decl = task_decl(self.tm, r.task) if r.task else None
            if isinstance(decl, A.FunctionDecl) and decl.kind != "action":
                raise config_error(f"route {r.path}: {r.task} is a function, not an api or action", "unknown-task")
            if decl is not None:
                for p in decl.env:
                    if p.name not in self.config.bindings:
                        raise config_error(f"route {r.path}: no binding for env.{p.name}", "env-binding")

    def _decode_env(self) -> dict[str, Value]:
        out = {}
        for name, text in self.config.bindings.items():
            t = env_type(self.tm, name)
            if t is None:
                raise config_error(f"env binding {name} is not declared by any api, action or agent", "env-binding")
            try:
                out[name] = decode(self.tm, text, t)
            except DecodeError as exc:
                raise ConfigError(exc.diagnostics) from None
        return out

    def _resolve_binding(self, spec: str) -> str:
        if spec.startswith("table:"):
            return "table:" + str(self.config.resolve(spec[len("table:"):]))
        return spec

    def _secrets(self, *values) -> list[str]:
        out = []
        for v in [*values, *self.env.values()]:
            if v is not None:
                out += sensitive_leaves(v)
        return out

    # -- request entry -------------------------------------------------------

    def caller(self, headers: dict[str, str]) -> Caller:
        auth = headers.get("authorization", "")
        if not auth:
            return Caller(everything=not self.config.auth)
        if not auth.lower().startswith("bearer ") or self.secret is None:
            raise TokenError("unsupported authorization")
        return Caller(verify_token(self.secret, auth[7:].strip()))

    def handle(self, method: str, target: str, headers: dict[str, str] | None = None, body: bytes = b"") -> Response:
        headers = {k.lower(): v for k, v in (headers or {}).items()}
        request_id = f"r{next(self._ids)}"
        url = urlsplit(target)
        path = unquote(url.path)
        try:
            caller = self.caller(headers)
        except TokenError as exc:
            resp = self._error(401, "unauthorized", str(exc))
        else:
            resp = self._route(method.upper(), path, parse_qs(url.query), headers, body, caller, request_id)
        if method.upper() == "HEAD":
            resp.headers["Content-Length"] = str(len(resp.body))
            resp = Response(resp.status, b"", resp.headers)
        if self.config.logging:
            log.info("%s %s %s %d", request_id, method.upper(), path, resp.status)
        return resp

    def _route(self, method, path, query, headers, body, caller: Caller, request_id) -> Response:
        form = negotiate(headers.get("accept"))
        if method in ("GET", "HEAD"):
            if path == "/actions":
                return self._payload(discovery.actions_index(self.tm, self.config, caller.may_use), "ActionsIndex", form)
            if path.startswith("/actions/"):
                name = path[len("/actions/"):]
                route = next((r for r in discovery.task_routes(self.config) if r.task == name and caller.may_use(r)), None)
                if route is None:
                    return self._error(404, "not-found", f"no endpoint {name}")
                return self._payload(discovery.action_detail(self.tm, self.config, route), "ActionDetail", form)
            if path == "/search":
                q = " ".join(query.get("q", []))
                return self._payload(discovery.search(self.tm, self.config, q, caller.may_use), "SearchResults", form)
        route = match_route(self.config.routes, path)
        if route is None or not caller.may_use(route):
            return self._error(404, "not-found", f"no route for {path}")
        if route.file is not None:
            if method not in ("GET", "HEAD"):
                return self._error(405, "method", "static routes accept GET only")
            return self._static(route, path)
        if method != "POST":
            return self._error(405, "method", f"{route.task} is invoked with POST")
        return self.dispatch(route, headers, body, form, request_id)

    # -- payloads ------------------------------------------------------------

    def _payload(self, value: Value, type_name: str, form: str) -> Response:
        text = encode(schema(), value, type_name, form)
        return Response(200, text.encode("utf-8"), {"Content-Type": FORM_MEDIA[form]})

    def _error(self, status: int, code: str, message: str, extra: dict | None = None) -> Response:
        body = {"error": code, "message": message, **(extra or {})}
        return Response(status, json.dumps(body, sort_keys=True).encode(), {"Content-Type": "application/json"})

    def _static(self, route: Route, path: str) -> Response:
        root = self.config.resolve(route.file).resolve()
        prefix = route.path.split("*", 1)[0]
        rel = path[len(prefix):] if path.startswith(prefix) else ""
        target = (root / rel).resolve() if rel else root
        policy = SandboxPolicy((f"file://{root.as_posix()}/**", f"file://{root.as_posix()}"))
        if not policy.check(f"file://{target.as_posix()}"):
            return self._error(403, "permission-denied", f"{path} is outside {route.path}")
        if not target.is_file():
            return self._error(404, "not-found", f"no file for {path}")
        ctype = mimetypes.guess_type(target.name)[0] or "application/octet-stream"
        return Response(200, target.read_bytes(), {"Content-Type": ctype})

    # -- task dispatch -------------------------------------------------------

    def decode_args(self, decl, headers: dict[str, str], body: bytes) -> list[Value]:
        ctype = headers.get("content-type", "").split(";")[0].strip().lower()
        form = MEDIA_TYPES.get(ctype)
        if ctype and form is None:
            raise DecodeError([error("media-type", f"unsupported Content-Type {ctype}", NO_SPAN)])
        text = body.decode("utf-8") if body else ""
        if not decl.params and not text.strip():
            return []
        tm = request_schema(self.tm, decl)
        v = decode(tm, text, decl.name, form)
        return [v.get(p.name) for p in decl.params]

    def dispatch(self, route: Route, headers: dict[str, str], body: bytes, form: str, request_id: str) -> Response:
        decl = task_decl(self.tm, route.task)
        try:
            args = self.decode_args(decl, headers, body)
        except (DecodeError, UnicodeDecodeError) as exc:
            msg = str(exc.diagnostics[0]) if isinstance(exc, DecodeError) else "body is not UTF-8"
            code = exc.code if isinstance(exc, DecodeError) else "syntax"
            return self._error(400, code, scrub(msg, self._secrets()))
        env = EnvRecord({p.name: self.env[p.name] for p in decl.env})
        snapshot = EventLog(self.events.entries)
        interp = Interpreter(self.tm, apis=self._api_bindings(), agents=self.agents, holes=self.holes, events=snapshot)
        try:
            if isinstance(decl, A.ApiDecl):
                result = interp.invoke_api(decl, env, args, snapshot)
            else:
                result = interp.call(decl.name, args, env)
        except Fault as fault:
            return self.safe_abort(route, decl, fault, args, request_id)
        self.events.append(completed(decl.name))
        if result == VOID:
            return Response(200, b"", {"Content-Type": FORM_MEDIA[form]})
        text = encode(self.tm, result, decl.return_type, form)
        return Response(200, text.encode("utf-8"), {"Content-Type": FORM_MEDIA[form]})

    def _api_bindings(self) -> dict[str, ApiBinding]:
        out = dict(self.apis)
        for name, decl in self.tm.apis.items():
            if name not in out and decl.body is None and decl.return_type.name == "Void":
                out[name] = _accept
        return out

    def safe_abort(self, route: Route, decl, fault: Fault, args, request_id: str) -> Response:
        """Record a redacted fault, run mitigations, and answer without any partial result."""
        secrets = self._secrets(*args)
        record = {
            "request": request_id,
            "task": decl.name,
            "kind": fault.kind,
            "clause": scrub(fault.clause or "", secrets),
            "message": scrub(fault.message, secrets),
            "span": str(fault.span) if fault.span else "",
        }
        try:
            self.events.append(faulted(decl.name, fault.kind, record["clause"]))
            self.faults.append(record)
            self.rollback(request_id)
        except Exception as exc:  # the abort path itself must not fault
            log.error("%s secondary fault during abort: %s", request_id, scrub(str(exc), secrets))
        log.warning("%s aborted %s: %s", request_id, decl.name, record["message"])
        status = STATUS_FOR.get(fault.kind, 500)
        extra = {"fault": record} if status != 500 else {"fault": {"request": request_id, "kind": fault.kind}}
        return self._error(status, fault.kind, record["message"] if status != 500 else "internal fault; see fault log", extra)


def _accept(ctx) -> None:
    log.info("api %s accepted (no implementation bound)", ctx.api)
