"""Big-step evaluator for typed modules.

Contracts are checked in the order requires, body, result invariants,
ensures. Api invocations see only the env names they declare, run under a
sandbox built from their interpolated permission globs, and check their
preconditions against the supplied event log before the body is entered.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from ..lang import ast as A
from ..lang.checker import TypedModule
from ..sandbox import SandboxPolicy, interpolate
from .events import EventLog
from .values import (
    FALSE, NONE, TRUE, VOID, AliasV, BoolV, DecV, EntityV, Fault, IntV, ListV, NoneV, SomeV, StrV, Value,
    check_dec, check_int, conforms, dec_from_text, trunc_div, unwrap, DEC_SCALE,
)


class EnvRecord:
    """Name to value bindings fixed at invocation; reading an absent name faults."""

    def __init__(self, bindings: dict[str, Value] | None = None):
        self._b = dict(bindings or {})

    def get(self, name: str) -> Value:
        if name not in self._b:
            raise Fault("env-missing", f"env.{name} is not available in this environment", clause=f"env.{name}")
        return self._b[name]

    def __contains__(self, name: str) -> bool:
        return name in self._b

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(self._b)

    def items(self):
        return self._b.items()

    def restrict(self, names) -> "EnvRecord":
        return EnvRecord({n: self._b[n] for n in names if n in self._b})


@dataclass
class ApiContext:
    """What an externally bound api implementation receives."""

    api: str
    env: EnvRecord
    args: dict[str, Value]
    sandbox: SandboxPolicy
    events: EventLog


ApiBinding = Callable[[ApiContext], "Value | None"]


class _Return(Exception):
    def __init__(self, value: Value):
        self.value = value


@dataclass
class _Frame:
    vars: dict[str, Value]
    owner: str
    env: EnvRecord | None = None
    specials: dict[str, Value] = field(default_factory=dict)
    sandbox: SandboxPolicy | None = None


class Interpreter:
    def __init__(
        self,
        tm: TypedModule,
        *,
        apis: dict[str, ApiBinding] | None = None,
        agents: dict | None = None,
        holes=None,
        events: EventLog | None = None,
    ):
        self.tm = tm
        self.apis = dict(apis or {})
        self.agents = dict(agents or {})
        self.holes = holes
        self.events = events if events is not None else EventLog()

    # -- entry points ------------------------------------------------------

    def call(self, name: str, args, env: EnvRecord | dict | None = None) -> Value:
        """Evaluate function or action ``name``; faults propagate as :class:`Fault`."""
        decl = self.tm.functions.get(name)
        if decl is None:
            if name in self.tm.apis:
                return self.invoke_api(name, env, args)
            raise KeyError(f"no function or action named {name!r}")
        if isinstance(env, dict):
            env = EnvRecord(env)
        self._check_args(decl, args)
        return self._call(decl, list(args), env if env is not None else EnvRecord())

    def run_chktest(self, name: str, args) -> bool | None:
        """Run a chktest on concrete inputs: True if it passes, None if its requires filter the
        inputs out; a failing assert raises Fault(assert)."""
        t = self.tm.chktests[name]
        self._check_args(t, args)
        frame = _Frame(dict(zip((p.name for p in t.params), args)), t.name)
        for c in t.requires:
            if self.eval(c.expr, frame) != TRUE:
                return None
        try:
            self.exec_block(t.body, frame)
        except _Return as r:
            return r.value == TRUE
        return True

    def invoke_api(self, api, env, args, events: EventLog | None = None) -> Value:
        decl = api if isinstance(api, A.ApiDecl) else self.tm.apis[api]
        if isinstance(env, dict) or env is None:
            env = EnvRecord(env)
        self._check_args(decl, args)
        return self._invoke_api(decl, env, list(args), events if events is not None else self.events)

    def _check_args(self, decl, args) -> None:
        if len(args) != len(decl.params):
            raise Fault("type", f"{decl.name} expects {len(decl.params)} argument(s), {len(args)} given", owner=decl.name)
        for p, v in zip(decl.params, args):
            if not conforms(self.tm, v, p.type):
                raise Fault("type", f"argument {p.name} of {decl.name} is not a well-formed {p.type}", owner=decl.name)

    # -- functions and apis ------------------------------------------------

    def _call(self, decl: A.FunctionDecl, args: list[Value], env: EnvRecord | None) -> Value:
        frame = _Frame(dict(zip((p.name for p in decl.params), args)), decl.name, env)
        self._requires(decl, frame)
        if isinstance(decl.body, A.Hole):
            result = self.exec_hole(decl.body, tuple(zip((p.name for p in decl.params), args)))
        else:
            result = self._run_body(decl.body, frame, decl.return_type)
        self._ensures(decl, frame, result)
        return result

    def _requires(self, decl, frame: _Frame) -> None:
        for c in decl.requires:
            if self.eval(c.expr, frame) != TRUE:
                raise Fault("precondition", f"{decl.name}: requires {c.text}", c.text, c.span, decl.name)

    def _ensures(self, decl, frame: _Frame, result: Value) -> None:
        if not conforms(self.tm, result, decl.return_type):
            raise Fault("type", f"{decl.name} produced a value that is not a well-formed {decl.return_type}", owner=decl.name)
        if not decl.ensures:
            return
        post = _Frame(frame.vars, frame.owner, frame.env, {"result": result})
        for c in decl.ensures:
            if self.eval(c.expr, post) != TRUE:
                raise Fault("postcondition", f"{decl.name}: ensures {c.text}", c.text, c.span, decl.name)

    def _run_body(self, body, frame: _Frame, ret: A.TypeRef) -> Value:
        try:
            self.exec_block(body, frame)
        except _Return as r:
            return r.value
        return VOID

    def _invoke_api(self, decl: A.ApiDecl, env: EnvRecord, args: list[Value], events: EventLog) -> Value:
        for p in decl.env:
            if p.name not in env:
                raise Fault("env-missing", f"{decl.name} requires env.{p.name}", f"env.{p.name}", p.span, decl.name)
            if not conforms(self.tm, env.get(p.name), p.type):
                raise Fault("type", f"env.{p.name} is not a well-formed {p.type}", f"env.{p.name}", p.span, decl.name)
        env = env.restrict(p.name for p in decl.env)
        named = dict(zip((p.name for p in decl.params), args))
        policy = self.permissions(decl, named)
        saved, self.events = self.events, events
        try:
            frame = _Frame(dict(named), decl.name, env, sandbox=policy)
            self._requires(decl, frame)
            if decl.body is not None:
                result = self._run_body(decl.body, frame, decl.return_type)
            else:
                binding = self.apis.get(decl.name)
                if binding is None:
                    raise Fault("unbound", f"no implementation bound for api {decl.name}", owner=decl.name)
                result = binding(ApiContext(decl.name, env, named, policy, events))
                result = VOID if result is None else result
            self._ensures(decl, frame, result)
            return result
        finally:
            self.events = saved

    def permissions(self, decl: A.ApiDecl, named: dict[str, Value]) -> SandboxPolicy:
        def lookup(path: str):
            parts = path.split(".")
            v = named[parts[0]]
            sensitive = False
            for p in parts[1:]:
                v = unwrap_entity(v).get(p)
            while isinstance(v, AliasV):
                sensitive = sensitive or v.sensitive
                v = v.inner
            text = v.value if isinstance(v, StrV) else (str(v.value) if isinstance(v, IntV) else str(v))
            return text, sensitive

        pairs = [interpolate(g, lookup) for g in decl.permissions]
        return SandboxPolicy(tuple(g for g, _ in pairs), tuple(d for _, d in pairs))

    # -- holes -------------------------------------------------------------

    def exec_hole(self, hole: A.Hole, args: tuple) -> Value:
        if self.holes is None:
            raise Fault("unfilled-hole", f"unfilled hole {hole.hole_id}", hole.hole_id, hole.span)
        return self.holes.execute(hole, args)

    # -- construction --------------------------------------------------------

    def make_alias(self, alias: str, inner: Value, span=None) -> AliasV:
        decl = self.tm.aliases[alias]
        rx = decl.compiled
        if rx is not None and not rx.matches(inner.value):
            shown = "*" * len(str(inner.value)) if decl.sensitive else inner.value
            raise Fault("constraint", f"{shown!r} does not match {alias} pattern {decl.regex}", decl.regex, span)
        return AliasV(alias, inner, decl.sensitive)

    def construct_entity(self, type_name: str, values, span=None) -> EntityV:
        """Build an entity from values in declaration order (or a name->value dict) and check invariants."""
        ent = self.tm.entities[type_name]
        if isinstance(values, dict):
            values = [values[f.name] for f in ent.fields]
        if len(values) != len(ent.fields):
            raise Fault("type", f"{type_name} has {len(ent.fields)} fields, {len(values)} given", span=span)
        ev = EntityV(type_name, tuple(zip(ent.field_names, values)))
        if ent.invariants:
            frame = _Frame({}, type_name, specials=dict(ev.fields))
            for c in ent.invariants:
                if self.eval(c.expr, frame) != TRUE:
                    raise Fault("invariant", f"{type_name}: invariant {c.text}", c.text, c.span, type_name)
        return ev

    # -- statements ----------------------------------------------------------

    def exec_block(self, stmts, frame: _Frame) -> None:
        for s in stmts:
            self.exec_stmt(s, frame)

    def exec_stmt(self, s, frame: _Frame) -> None:
        if isinstance(s, (A.VarDecl, A.Assign)):
            frame.vars[s.name] = self.eval(s.expr, frame)
        elif isinstance(s, A.If):
            if self.eval(s.cond, frame) == TRUE:
                self.exec_block(s.then, frame)
            elif s.else_ is not None:
                self.exec_block(s.else_, frame)
        elif isinstance(s, A.Return):
            raise _Return(VOID if s.expr is None else self.eval(s.expr, frame))
        elif isinstance(s, A.Assert):
            if self.eval(s.expr, frame) != TRUE:
                raise Fault("assert", f"assert {s.text}", s.text, s.span, frame.owner)
        elif isinstance(s, A.ExprStmt):
            self.eval(s.expr, frame)
        else:
            raise TypeError(type(s).__name__)

    # -- expressions ---------------------------------------------------------

    def eval(self, e: A.Expr, frame: _Frame) -> Value:
        m = getattr(self, "_e_" + type(e).__name__)
        return m(e, frame)

    def _lit(self, e, inner: Value) -> Value:
        alias = e.alias
        if alias is None and e.ty is not None and e.ty.name in self.tm.aliases:
            alias = e.ty.name
        return self.make_alias(alias, inner, e.span) if alias else inner

    def _e_IntLit(self, e, frame):
        return self._lit(e, IntV(e.value))

    def _e_DecLit(self, e, frame):
        return self._lit(e, DecV(dec_from_text(e.text)))

    def _e_NumLit(self, e, frame):
        base = self.tm.aliases[e.alias].base
        inner = IntV(int(e.text)) if base == "Int" else DecV(dec_from_text(e.text))
        return self.make_alias(e.alias, inner, e.span)

    def _e_StrLit(self, e, frame):
        return self._lit(e, StrV(e.value, e.cstring))

    def _e_BoolLit(self, e, frame):
        return TRUE if e.value else FALSE

    def _e_NoneLit(self, e, frame):
        return NONE

    def _e_SomeExpr(self, e, frame):
        return SomeV(self.eval(e.expr, frame))

    def _e_Var(self, e, frame):
        v = frame.vars[e.name]
        if e.narrowed:
            if not isinstance(v, SomeV):
                raise Fault("type", f"{e.name} is none", span=e.span)
            return v.value
        return v

    def _e_EnvVar(self, e, frame):
        if frame.env is None:
            raise Fault("env-missing", f"env.{e.name} read with no environment", f"env.{e.name}", e.span, frame.owner)
        try:
            return frame.env.get(e.name)
        except Fault as f:
            f.span, f.owner = e.span, frame.owner
            raise

    def _e_Special(self, e, frame):
        return frame.specials[e.name]

    def _e_Unary(self, e, frame):
        v = self.eval(e.expr, frame)
        if e.op == "!":
            return FALSE if v == TRUE else TRUE
        return self._rewrap(v, self._neg(unwrap(v), e.span))

    def _neg(self, x, span):
        if isinstance(x, IntV):
            return check_int(-x.value, span)
        return check_dec(-x.scaled, span)

    def _rewrap(self, like: Value, inner: Value) -> Value:
        if isinstance(like, AliasV):
            return AliasV(like.alias, inner, like.sensitive)
        return inner

    def _e_Binary(self, e, frame):
        op = e.op
        if op == "&&":
            return TRUE if self.eval(e.left, frame) == TRUE and self.eval(e.right, frame) == TRUE else FALSE
        if op == "||":
            return TRUE if self.eval(e.left, frame) == TRUE or self.eval(e.right, frame) == TRUE else FALSE
        a = self.eval(e.left, frame)
        b = self.eval(e.right, frame)
        if op == "===":
            return BoolV(a == b)
        if op == "!==":
            return BoolV(a != b)
        x, y = unwrap(a), unwrap(b)
        if op in ("<", "<=", ">", ">="):
            p, q = _num(x), _num(y)
            return BoolV({"<": p < q, "<=": p <= q, ">": p > q, ">=": p >= q}[op])
        return self._rewrap(a, arith(op, x, y, e.span))

    def _e_IfExpr(self, e, frame):
        return self.eval(e.then if self.eval(e.cond, frame) == TRUE else e.else_, frame)

    def _e_Access(self, e, frame):
        v = self.eval(e.expr, frame)
        if isinstance(v, AliasV) and e.name == "value":
            return v.inner
        return unwrap_entity(v).get(e.name)

    def _e_Construct(self, e, frame):
        if e.type.name in self.tm.aliases:
            return self.make_alias(e.type.name, unwrap(self.eval(e.fields[0][1], frame)), e.span)
        vals = [(n, self.eval(x, frame)) for n, x in e.fields]
        if vals and vals[0][0] is not None:
            vals = dict(vals)
        else:
            vals = [v for _, v in vals]
        return self.construct_entity(e.type.name, vals, e.span)

    def _e_ListLit(self, e, frame):
        return ListV(tuple(self.eval(x, frame) for x in e.items))

    def _e_Method(self, e, frame):
        recv = self.eval(e.receiver, frame)
        items = recv.items
        if e.name == "sum":
            elem = e.receiver.ty.elem if e.receiver.ty is not None else A.INT
            base = self.tm.base(elem)
            acc: Value = IntV(0) if base == A.INT else DecV(0)
            for x in items:
                acc = arith("+", acc, unwrap(x), e.span)
            if elem.name in self.tm.aliases:
                return self.make_alias(elem.name, acc, e.span)
            return acc
        lam = e.args[0]

        def apply(x):
            inner = _Frame(dict(frame.vars), frame.owner, frame.env, frame.specials, frame.sandbox)
            inner.vars[lam.param] = x
            return self.eval(lam.body, inner)

        if e.name == "allOf":
            return TRUE if all(apply(x) == TRUE for x in items) else FALSE
        if e.name == "noneOf":
            return TRUE if not any(apply(x) == TRUE for x in items) else FALSE
        if e.name == "filter":
            return ListV(tuple(x for x in items if apply(x) == TRUE))
        if e.name == "map":
            return ListV(tuple(apply(x) for x in items))
        raise TypeError(e.name)

    def _e_Call(self, e, frame):
        decl = self.tm.functions[e.name]
        return self._call(decl, [self.eval(x, frame) for x in e.args], None)

    def _env_for(self, env: A.EnvExpr, frame: _Frame) -> EnvRecord:
        if env.kind == "spread":
            return frame.env if frame.env is not None else EnvRecord()
        return EnvRecord({n: self.eval(x, frame) for n, x in env.bindings})

    def _e_ApiCall(self, e, frame):
        decl = self.tm.apis[e.name]
        env = self._env_for(e.env, frame)
        args = [self.eval(x, frame) for x in e.args]
        return self._invoke_api(decl, env, args, self.events)

    def _e_AgentCall(self, e, frame):
        from ..agents import invoke_agent

        env = self._env_for(e.env, frame)
        text = unwrap(self.eval(e.input, frame)).value
        prompt = unwrap(self.eval(e.prompt, frame)).value
        binding = self.agents.get(e.name)
        if binding is None:
            raise Fault("agent", f"no binding for agent {e.name}", span=e.span, owner=frame.owner)
        try:
            return invoke_agent(binding, env, text, prompt, e.shape, self.tm, e.name)
        except Fault as f:
            if f.span is None:
                f.span, f.owner = e.span, frame.owner
            raise

    def _e_EventsContains(self, e, frame):
        pat = {n: self.eval(x, frame) for n, x in e.pattern.fields}
        return BoolV(self.events.contains(e.pattern.type.name, pat))

    def _e_Hole(self, e, frame):
        args = tuple((n, frame.vars[n]) for n, _ in e.scope if n in frame.vars)
        return self.exec_hole(e, args)

    def _e_Fail(self, e, frame):
        msg = unwrap(self.eval(e.message, frame)).value
        raise Fault("user", msg, msg, e.span, frame.owner)


def unwrap_entity(v: Value) -> EntityV:
    if isinstance(v, EntityV):
        return v
    raise Fault("type", f"expected an entity value, found {type(v).__name__}")


def _num(x: Value) -> int:
    return x.value if isinstance(x, IntV) else x.scaled


def arith(op: str, x: Value, y: Value, span=None) -> Value:
    """Checked arithmetic on unwrapped Int or Decimal values."""
    if isinstance(x, IntV):
        a, b = x.value, y.value
        if op == "+":
            return check_int(a + b, span)
        if op == "-":
            return check_int(a - b, span)
        if op == "*":
            return check_int(a * b, span)
        if b == 0:
            raise Fault("division-by-zero", "division by zero", span=span)
        q = trunc_div(a, b)
        return check_int(q if op == "/" else a - q * b, span)
    a, b = x.scaled, y.scaled
    if op == "+":
        return check_dec(a + b, span)
    if op == "-":
        return check_dec(a - b, span)
    if op == "*":
        return check_dec(trunc_div(a * b, DEC_SCALE), span)
    if b == 0:
        raise Fault("division-by-zero", "division by zero", span=span)
    return check_dec(trunc_div(a * DEC_SCALE, b), span)


__all__ = ["Interpreter", "EnvRecord", "ApiContext", "ApiBinding", "arith", "NoneV"]
