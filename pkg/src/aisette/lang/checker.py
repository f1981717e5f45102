"""Type checker: resolves names, annotates every expression with its type and
produces a :class:`TypedModule` shared by the evaluator, codec, validator and server.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .. import regex as safe_regex
from ..diagnostics import Diagnostic, Span, TypeCheckError, error
from . import ast as A
from .ast import BOOL, CSTRING, DECIMAL, INT, NONE_T, NOTHING, STRING, VOID, TypeRef
from .parser import parse_module

# Sentinel for expressions that already produced a diagnostic; compatible with everything.
ERR = TypeRef("?")

BUILTIN_SOURCE = """
entity TaskCompleted {
  field task: CString;
}
entity TaskFaulted {
  field task: CString;
  field kind: CString;
  field clause: String;
}
"""

SLOT_RE = re.compile(r"\$\{([^}]*)\}")


@dataclass
class TypedModule:
    source: A.SourceModule
    aliases: dict[str, A.TypeAliasDecl] = field(default_factory=dict)
    entities: dict[str, A.EntityDecl] = field(default_factory=dict)
    functions: dict[str, A.FunctionDecl] = field(default_factory=dict)
    apis: dict[str, A.ApiDecl] = field(default_factory=dict)
    agents: dict[str, A.AgentDecl] = field(default_factory=dict)
    chktests: dict[str, A.ChkTestDecl] = field(default_factory=dict)
    holes: dict[str, A.Hole] = field(default_factory=dict)

    def kind(self, t: TypeRef) -> str:
        if t.name in A.PRIMITIVES:
            return "prim"
        if t.name in ("List", "Option"):
            return t.name.lower()
        if t.name in self.aliases:
            return "alias"
        if t.name in self.entities:
            return "entity"
        return t.name.lower()

    def base(self, t: TypeRef) -> TypeRef:
        """Primitive underlying ``t`` (``t`` itself unless it is an alias)."""
        a = self.aliases.get(t.name)
        return TypeRef(a.base) if a else t

    def is_sensitive(self, t: TypeRef) -> bool:
        a = self.aliases.get(t.name)
        return bool(a and a.sensitive)

    def contains_sensitive(self, t: TypeRef, _seen=None) -> bool:
        seen = _seen or set()
        if t.name in seen:
            return False
        if self.is_sensitive(t):
            return True
        if t.args:
            return any(self.contains_sensitive(x, seen) for x in t.args)
        ent = self.entities.get(t.name)
        if ent:
            seen = seen | {t.name}
            return any(self.contains_sensitive(f.type, seen) for f in ent.fields)
        return False

    def is_numeric(self, t: TypeRef) -> bool:
        return self.base(t) in (INT, DECIMAL)

    def callable(self, name: str):
        return self.functions.get(name) or self.apis.get(name) or self.chktests.get(name)


@dataclass
class _Binding:
    type: TypeRef
    mutable: bool
    narrowed: bool = False


@dataclass
class _Ctx:
    decl: object
    owner: str
    env: dict[str, TypeRef]
    result: TypeRef | None = None  # `$result` allowed (ensures)
    fields: dict[str, TypeRef] | None = None  # `$field` allowed (invariants)
    events: bool = False  # `$events` allowed (api requires)
    effects: bool = False  # api/agent calls allowed (actions)


class Checker:
    def __init__(self, module: A.SourceModule):
        self.m = module
        self.tm = TypedModule(module)
        self.diags: list[Diagnostic] = []
        self.calls: dict[str, set[str]] = {}

    def err(self, code: str, msg: str, span: Span) -> TypeRef:
        self.diags.append(error(code, msg, span))
        return ERR

    # -- declarations ------------------------------------------------------

    def run(self) -> TypedModule:
        tm = self.tm
        builtins = parse_module(BUILTIN_SOURCE).entities
        for e in builtins:
            tm.entities[e.name] = e
        for a in self.m.aliases:
            if a.name in A.PRIMITIVES or a.name in tm.aliases or a.name in tm.entities or a.name in ("List", "Option", "Void"):
                self.err("duplicate", f"type {a.name!r} is already declared", a.span)
                continue
            tm.aliases[a.name] = a
        for e in self.m.entities:
            if e.name in A.PRIMITIVES or e.name in tm.aliases or e.name in tm.entities or e.name in ("List", "Option", "Void"):
                self.err("duplicate", f"type {e.name!r} is already declared", e.span)
                continue
            tm.entities[e.name] = e
        for kind, decls, table in (
            ("function", self.m.functions, tm.functions),
            ("api", self.m.apis, tm.apis),
            ("chktest", self.m.chktests, tm.chktests),
            ("agent", self.m.agents, tm.agents),
        ):
            for d in decls:
                if d.name in tm.functions or d.name in tm.apis or d.name in tm.chktests or d.name in tm.agents:
                    self.err("duplicate", f"{kind} {d.name!r} is already declared", d.span)
                    continue
                table[d.name] = d

        for a in self.m.aliases:
            self.check_alias(a)
        for e in self.m.entities:
            self.check_entity(e)
        for ag in self.m.agents:
            for p in ag.env:
                self.resolve(p.type, p.span)
        for api in self.m.apis:
            self.check_api(api)
        for f in self.m.functions:
            self.check_function(f)
        for t in self.m.chktests:
            self.check_chktest(t)
        self.check_recursion()
        if self.diags:
            raise TypeCheckError(self.diags)
        return tm

    def resolve(self, t: TypeRef | None, span: Span) -> bool:
        if t is None:
            return True
        if t.name in ("List", "Option"):
            if len(t.args) != 1:
                self.err("bad-type", f"{t.name} takes exactly one type argument", span)
                return False
            return self.resolve(t.args[0], span)
        if t.args:
            self.err("bad-type", f"type {t.name!r} takes no type arguments", span)
            return False
        if t.name in A.PRIMITIVES or t.name in self.tm.aliases or t.name in self.tm.entities:
            return True
        self.err("unknown-type", f"unknown type {t.name!r}", span)
        return False

    def check_alias(self, a: A.TypeAliasDecl) -> None:
        if a.base not in A.PRIMITIVES:
            self.err("bad-alias", f"alias base must be a primitive type, not {a.base!r}", a.span)
            return
        if a.regex is None:
            return
        if a.base not in ("CString", "String"):
            self.err("bad-alias", "a regex constraint requires a CString or String base", a.span)
            return
        try:
            a.compiled = safe_regex.compile(a.regex)
        except safe_regex.RegexError as exc:
            self.err("regex-" + exc.code, f"{a.name}: {exc.message}", a.span)

    def check_entity(self, e: A.EntityDecl) -> None:
        seen = set()
        for f in e.fields:
            if f.name in seen:
                self.err("duplicate", f"field {f.name!r} declared twice in {e.name}", f.span)
            seen.add(f.name)
            self.resolve(f.type, f.span)
        ctx = _Ctx(e, e.name, {}, fields={f.name: f.type for f in e.fields})
        for c in e.invariants:
            self.expect_bool(c.expr, {}, ctx, "invariant")

    def params_scope(self, params, span) -> dict[str, _Binding]:
        scope = {}
        for p in params:
            if p.name in scope:
                self.err("duplicate", f"parameter {p.name!r} declared twice", p.span)
            self.resolve(p.type, p.span)
            scope[p.name] = _Binding(p.type, False)
        return scope

    def env_map(self, env) -> dict[str, TypeRef]:
        out = {}
        for p in env:
            if p.name in out:
                self.err("duplicate", f"env name {p.name!r} declared twice", p.span)
            self.resolve(p.type, p.span)
            out[p.name] = p.type
        return out

    def check_api(self, api: A.ApiDecl) -> None:
        scope = self.params_scope(api.params, api.span)
        self.resolve(api.ret, api.span)
        env = self.env_map(api.env)
        for glob in api.permissions:
            for slot in SLOT_RE.findall(glob):
                self.check_slot(slot, api, scope)
        ctx = _Ctx(api, api.name, env, events=True)
        for c in api.requires:
            self.expect_bool(c.expr, scope, ctx, "requires")
        ens = _Ctx(api, api.name, env, result=api.return_type)
        for c in api.ensures:
            self.expect_bool(c.expr, scope, ens, "ensures")
        if api.body is not None:
            body_ctx = _Ctx(api, api.name, env, effects=True)
            self.check_body(api.body, dict(scope), body_ctx, api.return_type, api.span)

    def check_slot(self, slot: str, api: A.ApiDecl, scope) -> None:
        parts = slot.split(".")
        b = scope.get(parts[0])
        if b is None:
            self.err("bad-permission", f"permission slot ${{{slot}}} names no parameter", api.span)
            return
        t = b.type
        for name in parts[1:]:
            ent = self.tm.entities.get(t.name)
            ft = ent.field_type(name) if ent else None
            if ft is None:
                self.err("bad-permission", f"permission slot ${{{slot}}}: {t} has no field {name!r}", api.span)
                return
            t = ft
        if self.tm.base(t).name not in A.PRIMITIVES:
            self.err("bad-permission", f"permission slot ${{{slot}}} must reach a primitive value", api.span)

    def check_function(self, f: A.FunctionDecl) -> None:
        scope = self.params_scope(f.params, f.span)
        self.resolve(f.ret, f.span)
        env = self.env_map(f.env)
        if f.env and f.kind != "action":
            self.err("bad-env", "only actions may declare an env clause", f.span)
        pre = _Ctx(f, f.name, env)
        for c in f.requires:
            self.expect_bool(c.expr, scope, pre, "requires")
        post = _Ctx(f, f.name, env, result=f.return_type)
        for c in f.ensures:
            self.expect_bool(c.expr, scope, post, "ensures")
        ctx = _Ctx(f, f.name, env, effects=f.kind == "action")
        self.calls[f.name] = set()
        if isinstance(f.body, A.Hole):
            h = f.body
            if h.type is not None and h.type != f.return_type:
                self.err("type-mismatch", f"body hole type {h.type} differs from return type {f.return_type}", h.span)
            self.infer(h, scope, ctx, f.return_type)
        else:
            self.check_body(f.body, dict(scope), ctx, f.return_type, f.span)

    def check_chktest(self, t: A.ChkTestDecl) -> None:
        scope = self.params_scope(t.params, t.span)
        if t.return_type != BOOL:
            self.err("bad-chktest", "a chktest must return Bool", t.span)
        ctx = _Ctx(t, t.name, {})
        for c in t.requires:
            self.expect_bool(c.expr, scope, ctx, "requires")
        self.calls[t.name] = set()
        self.block(t.body, dict(scope), ctx, BOOL)

    def check_body(self, body, scope, ctx, ret: TypeRef, span: Span) -> None:
        self.block(body, scope, ctx, ret)
        if ret != VOID and not _exits(body):
            self.err("missing-return", f"{ctx.owner}: not every path returns a {ret}", span)

    def check_recursion(self) -> None:
        state: dict[str, int] = {}

        def visit(n: str, path: list[str]) -> None:
            state[n] = 1
            for m in sorted(self.calls.get(n, ())):
                if state.get(m) == 1:
                    cyc = path[path.index(m):] + [m] if m in path else [n, m]
                    decl = self.tm.callable(m)
                    self.err("recursion", "recursive call cycle: " + " -> ".join(cyc), decl.span)
                elif m not in state:
                    visit(m, path + [m])
            state[n] = 2

        for n in sorted(self.calls):
            if n not in state:
                visit(n, [n])

    # -- statements --------------------------------------------------------

    def block(self, stmts, scope: dict[str, _Binding], ctx: _Ctx, ret: TypeRef) -> dict[str, _Binding]:
        for s in stmts:
            scope = self.stmt(s, scope, ctx, ret)
        return scope

    def stmt(self, s, scope, ctx, ret):
        if isinstance(s, A.VarDecl):
            if s.name in scope:
                self.err("shadowing", f"{s.name!r} is already bound", s.span)
            if s.type is not None:
                self.resolve(s.type, s.span)
            t = self.infer(s.expr, scope, ctx, s.type)
            if s.type is not None:
                self.assign_check(t, s.type, s.expr.span)
                t = s.type
            elif t in (NONE_T, NOTHING, VOID):
                self.err("needs-annotation", f"cannot infer a type for {s.name!r}; add a type annotation", s.span)
                t = ERR
            scope = dict(scope)
            scope[s.name] = _Binding(t, s.mutable)
            return scope
        if isinstance(s, A.Assign):
            b = scope.get(s.name)
            if b is None:
                self.err("unknown-name", f"unknown variable {s.name!r}", s.span)
                self.infer(s.expr, scope, ctx, None)
                return scope
            if not b.mutable:
                self.err("immutable", f"immutable binding {s.name!r} cannot be reassigned", s.span)
            t = self.infer(s.expr, scope, ctx, b.type)
            self.assign_check(t, b.type, s.expr.span)
            if b.narrowed:
                scope = dict(scope)
                scope[s.name] = _Binding(b.type, b.mutable)
            return scope
        if isinstance(s, A.If):
            self.expect_bool(s.cond, scope, ctx, "if condition")
            then_scope, else_scope = dict(scope), dict(scope)
            target = _none_test(s.cond)
            if target is not None:
                name, is_none = target
                b = scope.get(name)
                if b is not None and not b.mutable and b.type.name == "Option":
                    narrowed = _Binding(b.type, False, True)
                    if is_none:
                        else_scope[name] = narrowed
                    else:
                        then_scope[name] = narrowed
            self.block(s.then, then_scope, ctx, ret)
            if s.else_ is not None:
                self.block(s.else_, else_scope, ctx, ret)
            then_exits = _exits(s.then)
            else_exits = s.else_ is not None and _exits(s.else_)
            if then_exits and not else_exits:
                # code after the if runs only on the else path
                return {k: else_scope[k] for k in scope}
            if else_exits and not then_exits:
                return {k: then_scope[k] for k in scope}
            return scope
        if isinstance(s, A.Return):
            if s.expr is None:
                if ret != VOID:
                    self.err("type-mismatch", f"return without a value in a function returning {ret}", s.span)
            else:
                t = self.infer(s.expr, scope, ctx, ret)
                if ret == VOID and t not in (NOTHING, VOID, ERR):
                    self.err("type-mismatch", f"{ctx.owner} returns Void but a {t} is returned", s.expr.span)
                elif ret != VOID:
                    self.assign_check(t, ret, s.expr.span)
            return scope
        if isinstance(s, A.Assert):
            self.expect_bool(s.expr, scope, ctx, "assert")
            return scope
        if isinstance(s, A.ExprStmt):
            self.infer(s.expr, scope, ctx, None)
            return scope
        raise TypeError(type(s).__name__)

    # -- expressions -------------------------------------------------------

    def assignable(self, src: TypeRef, dst: TypeRef) -> bool:
        if src == dst or ERR in (src, dst) or src == NOTHING:
            return True
        if src == NONE_T and dst.name == "Option":
            return True
        if src.name == dst.name and src.args and len(src.args) == len(dst.args):
            return all(self.assignable(a, b) for a, b in zip(src.args, dst.args))
        return False

    def assign_check(self, src: TypeRef, dst: TypeRef, span: Span) -> None:
        if not self.assignable(src, dst):
            self.err("type-mismatch", f"expected {dst}, found {src}", span)

    def expect_bool(self, e, scope, ctx, what: str) -> None:
        t = self.infer(e, scope, ctx, BOOL)
        if t not in (BOOL, ERR, NOTHING):
            self.err("type-mismatch", f"{what} must be Bool, found {t}", e.span)

    def infer(self, e: A.Expr, scope, ctx: _Ctx, expected: TypeRef | None) -> TypeRef:
        t = self._infer(e, scope, ctx, expected)
        e.ty = t
        return t

    def literal_alias(self, alias: str | None, base: TypeRef, span: Span) -> TypeRef:
        if alias is None:
            return base
        a = self.tm.aliases.get(alias)
        if a is None:
            return self.err("unknown-type", f"unknown alias {alias!r}", span)
        if TypeRef(a.base) != base:
            return self.err("type-mismatch", f"{alias} is an alias of {a.base}, not {base}", span)
        return TypeRef(alias)

    def _infer(self, e, scope, ctx, expected):
        tm = self.tm
        if isinstance(e, A.IntLit):
            return self.literal_alias(e.alias, INT, e.span)
        if isinstance(e, A.DecLit):
            return self.literal_alias(e.alias, DECIMAL, e.span)
        if isinstance(e, A.NumLit):
            a = tm.aliases.get(e.alias)
            if a is None:
                return self.err("unknown-type", f"unknown alias {e.alias!r}", e.span)
            if a.base == "Int" and "." in e.text:
                return self.err("type-mismatch", f"{e.alias} is an alias of Int; literal has a fractional part", e.span)
            if a.base not in ("Int", "Decimal"):
                return self.err("type-mismatch", f"{e.alias} is not a numeric alias", e.span)
            return TypeRef(e.alias)
        if isinstance(e, A.StrLit):
            base = CSTRING if e.cstring else STRING
            if e.cstring and any(not (0x20 <= ord(c) <= 0x7E) for c in e.value):
                return self.err("bad-literal", "CString literals hold printable ASCII only", e.span)
            t = self.literal_alias(e.alias, base, e.span)
            a = tm.aliases.get(e.alias) if e.alias else None
            if a is not None and a.compiled is not None and t != ERR and not a.compiled.matches(e.value):
                return self.err("constraint", f"literal does not match {a.name} pattern {a.regex}", e.span)
            return t
        if isinstance(e, A.BoolLit):
            return BOOL
        if isinstance(e, A.NoneLit):
            return expected if expected is not None and expected.name == "Option" else NONE_T
        if isinstance(e, A.SomeExpr):
            inner_exp = expected.elem if expected is not None and expected.name == "Option" else None
            inner = self.infer(e.expr, scope, ctx, inner_exp)
            if inner in (NONE_T, NOTHING, VOID):
                return self.err("type-mismatch", f"some(...) cannot wrap {inner}", e.span)
            return A.option_of(inner)
        if isinstance(e, A.Var):
            b = scope.get(e.name)
            if b is None:
                return self.err("unknown-name", f"unknown identifier {e.name!r}", e.span)
            if b.narrowed:
                e.narrowed = True
                return b.type.elem
            return b.type
        if isinstance(e, A.EnvVar):
            if e.name not in ctx.env:
                return self.err("env-undeclared", f"env.{e.name} is not declared in the env clause of {ctx.owner}", e.span)
            return ctx.env[e.name]
        if isinstance(e, A.Special):
            if e.name == "result":
                if ctx.result is None:
                    return self.err("bad-special", "$result is only allowed in ensures clauses", e.span)
                return ctx.result
            if e.name == "events":
                return self.err("bad-special", "$events is only usable as $events.contains(...) in api requires", e.span)
            if ctx.fields is None:
                return self.err("bad-special", f"${e.name} is only allowed in entity invariants", e.span)
            if e.name not in ctx.fields:
                return self.err("unknown-name", f"{ctx.owner} has no field {e.name!r}", e.span)
            return ctx.fields[e.name]
        if isinstance(e, A.Unary):
            t = self.infer(e.expr, scope, ctx, None)
            if t == ERR:
                return ERR
            if e.op == "!":
                if t != BOOL:
                    return self.err("type-mismatch", f"'!' needs Bool, found {t}", e.span)
                return BOOL
            if not tm.is_numeric(t):
                return self.err("type-mismatch", f"'-' needs a numeric operand, found {t}", e.span)
            return t
        if isinstance(e, A.Binary):
            return self.binary(e, scope, ctx)
        if isinstance(e, A.IfExpr):
            self.expect_bool(e.cond, scope, ctx, "if condition")
            a = self.infer(e.then, scope, ctx, expected)
            b = self.infer(e.else_, scope, ctx, expected)
            j = self.join(a, b)
            if j is None:
                return self.err("type-mismatch", f"if branches differ: {a} vs {b}", e.span)
            return j
        if isinstance(e, A.Access):
            t = self.infer(e.expr, scope, ctx, None)
            if t == ERR:
                return ERR
            if t.name in tm.aliases and e.name == "value":
                return tm.base(t)
            ent = tm.entities.get(t.name)
            if ent is None:
                return self.err("bad-access", f"{t} has no field {e.name!r}", e.span)
            ft = ent.field_type(e.name)
            if ft is None:
                return self.err("bad-access", f"{t} has no field {e.name!r}", e.span)
            return ft
        if isinstance(e, A.Construct):
            return self.construct(e, scope, ctx)
        if isinstance(e, A.ListLit):
            if not self.resolve(e.elem, e.span):
                return ERR
            for x in e.items:
                self.assign_check(self.infer(x, scope, ctx, e.elem), e.elem, x.span)
            return A.list_of(e.elem)
        if isinstance(e, A.Method):
            return self.method(e, scope, ctx)
        if isinstance(e, A.Call):
            f = tm.functions.get(e.name) or tm.chktests.get(e.name)
            if f is None or (isinstance(f, A.FunctionDecl) and f.kind == "action"):
                if e.name in tm.apis:
                    return self.err("bad-call", f"api {e.name!r} must be called as `api {e.name}(env{{...}}, ...)`", e.span)
                what = "action" if f is not None else "function"
                return self.err("unknown-name", f"unknown {what} {e.name!r}" if f is None else f"actions cannot be called directly: {e.name!r}", e.span)
            if isinstance(f, A.ChkTestDecl):
                return self.err("bad-call", f"chktest {e.name!r} cannot be called", e.span)
            self.calls.setdefault(ctx.owner, set()).add(e.name)
            self.args(e.args, f.params, scope, ctx, e.span, e.name)
            return f.return_type
        if isinstance(e, A.ApiCall):
            if not ctx.effects:
                self.err("impure", f"api calls are only allowed in actions, not in {ctx.owner}", e.span)
            api = tm.apis.get(e.name)
            if api is None:
                return self.err("unknown-name", f"unknown api {e.name!r}", e.span)
            self.env_expr(e.env, api.env, scope, ctx, e.span)
            self.args(e.args, api.params, scope, ctx, e.span, e.name)
            return api.return_type
        if isinstance(e, A.AgentCall):
            if not ctx.effects:
                self.err("impure", f"agent calls are only allowed in actions, not in {ctx.owner}", e.span)
            ag = tm.agents.get(e.name)
            if ag is None:
                self.err("unknown-name", f"unknown agent {e.name!r}", e.span)
            self.resolve(e.shape, e.span)
            self.env_expr(e.env, ag.env if ag else (), scope, ctx, e.span)
            for x, what in ((e.input, "input"), (e.prompt, "prompt")):
                t = self.infer(x, scope, ctx, None)
                if tm.base(t) not in (STRING, CSTRING, ERR):
                    self.err("type-mismatch", f"agent {what} must be text, found {t}", x.span)
            return e.shape
        if isinstance(e, A.EventsContains):
            if not ctx.events:
                return self.err("bad-special", "$events is only allowed in api requires clauses", e.span)
            self.construct(e.pattern, scope, ctx, allow_partial=True)
            return BOOL
        if isinstance(e, A.Hole):
            if e.type is not None:
                self.resolve(e.type, e.span)
            t = e.type or expected
            if t is None:
                return self.err("needs-annotation", "hole needs a declared type here (?_ -> T)", e.span)
            if expected is not None and e.type is not None:
                self.assign_check(e.type, expected, e.span)
            e.owner = ctx.owner
            e.scope = tuple((n, b.type) for n, b in scope.items())
            hid = e.hole_id
            if hid in tm.holes and tm.holes[hid] is not e:
                self.err("duplicate", f"hole {hid!r} appears more than once", e.span)
            tm.holes[hid] = e
            return t
        if isinstance(e, A.Fail):
            t = self.infer(e.message, scope, ctx, None)
            if tm.base(t) not in (STRING, CSTRING, ERR):
                self.err("type-mismatch", f"fail message must be text, found {t}", e.message.span)
            return NOTHING
        if isinstance(e, A.Lambda):
            return self.err("bad-lambda", "lambdas are only allowed as collection operation arguments", e.span)
        raise TypeError(type(e).__name__)

    def join(self, a: TypeRef, b: TypeRef) -> TypeRef | None:
        if a == b or b in (NOTHING, ERR):
            return a
        if a in (NOTHING, ERR):
            return b
        if a == NONE_T and b.name == "Option":
            return b
        if b == NONE_T and a.name == "Option":
            return a
        return None

    def binary(self, e: A.Binary, scope, ctx) -> TypeRef:
        tm = self.tm
        if e.op in ("&&", "||"):
            self.expect_bool(e.left, scope, ctx, f"'{e.op}' operand")
            self.expect_bool(e.right, scope, ctx, f"'{e.op}' operand")
            return BOOL
        a = self.infer(e.left, scope, ctx, None)
        b = self.infer(e.right, scope, ctx, a if a.name == "Option" else None)
        if ERR in (a, b):
            return BOOL if e.op in ("===", "!==", "<", "<=", ">", ">=") else ERR
        if e.op in ("===", "!=="):
            if not (self.assignable(a, b) or self.assignable(b, a)):
                return self.err("type-mismatch", f"cannot compare {a} with {b}", e.span)
            return BOOL
        if a != b:
            return self.err("type-mismatch", f"operands of '{e.op}' differ: {a} vs {b}", e.span)
        if not tm.is_numeric(a):
            return self.err("type-mismatch", f"'{e.op}' needs numeric operands, found {a}", e.span)
        if e.op == "%" and tm.base(a) != INT:
            return self.err("type-mismatch", "'%' is defined on Int only", e.span)
        if e.op in ("<", "<=", ">", ">="):
            return BOOL
        return a

    def construct(self, e: A.Construct, scope, ctx, allow_partial: bool = False) -> TypeRef:
        tm = self.tm
        if e.partial and not allow_partial:
            return self.err("bad-pattern", "partial patterns T{|...|} are only allowed in $events.contains", e.span)
        alias = tm.aliases.get(e.type.name)
        if alias is not None:
            if len(e.fields) != 1 or e.fields[0][0] is not None:
                return self.err("bad-construct", f"{alias.name}{{...}} takes a single {alias.base} value", e.span)
            x = e.fields[0][1]
            self.assign_check(self.infer(x, scope, ctx, TypeRef(alias.base)), TypeRef(alias.base), x.span)
            if isinstance(x, A.StrLit) and alias.compiled is not None and not alias.compiled.matches(x.value):
                return self.err("constraint", f"literal does not match {alias.name} pattern {alias.regex}", x.span)
            return TypeRef(alias.name)
        ent = tm.entities.get(e.type.name)
        if ent is None:
            return self.err("unknown-type", f"unknown entity {e.type.name!r}", e.span)
        named = [n for n, _ in e.fields if n is not None]
        if named and len(named) != len(e.fields):
            return self.err("bad-construct", "mix of named and positional fields", e.span)
        if named:
            seen = set()
            for n, x in e.fields:
                ft = ent.field_type(n)
                if ft is None:
                    self.err("bad-construct", f"{ent.name} has no field {n!r}", x.span)
                    self.infer(x, scope, ctx, None)
                    continue
                if n in seen:
                    self.err("bad-construct", f"field {n!r} given twice", x.span)
                seen.add(n)
                self.assign_check(self.infer(x, scope, ctx, ft), ft, x.span)
            missing = [f for f in ent.field_names if f not in seen]
            if missing and not e.partial:
                self.err("bad-construct", f"{ent.name} is missing field(s) {', '.join(missing)}", e.span)
        else:
            if e.partial:
                return self.err("bad-pattern", "partial patterns need named fields", e.span)
            if len(e.fields) != len(ent.fields):
                return self.err("bad-construct", f"{ent.name} has {len(ent.fields)} fields, {len(e.fields)} given", e.span)
            for (_, x), f in zip(e.fields, ent.fields):
                self.assign_check(self.infer(x, scope, ctx, f.type), f.type, x.span)
        return TypeRef(ent.name)

    def method(self, e: A.Method, scope, ctx) -> TypeRef:
        tm = self.tm
        rt = self.infer(e.receiver, scope, ctx, None)
        if rt == ERR:
            return ERR
        if rt.name != "List":
            return self.err("bad-method", f"{e.name} needs a List receiver, found {rt}", e.span)
        elem = rt.elem
        if e.name == "sum":
            if e.args:
                return self.err("bad-method", "sum takes no arguments", e.span)
            if not tm.is_numeric(elem):
                return self.err("type-mismatch", f"sum needs numeric elements, found {elem}", e.span)
            return elem
        want = "fn" if e.name == "map" else "pred"
        if len(e.args) != 1 or not isinstance(e.args[0], A.Lambda) or e.args[0].kind != want:
            return self.err("bad-method", f"{e.name} takes one {want}(x) => ... argument", e.span)
        lam = e.args[0]
        if lam.param in scope:
            self.err("shadowing", f"{lam.param!r} is already bound", lam.span)
        inner = dict(scope)
        inner[lam.param] = _Binding(elem, False)
        if e.name == "map":
            if e.targ is not None:
                self.resolve(e.targ, e.span)
            bt = self.infer(lam.body, inner, ctx, e.targ)
            if e.targ is not None:
                self.assign_check(bt, e.targ, lam.body.span)
                return A.list_of(e.targ)
            if bt in (NONE_T, NOTHING, VOID):
                return self.err("needs-annotation", "map needs an explicit result type here", e.span)
            return A.list_of(bt)
        if e.targ is not None:
            self.err("bad-method", f"{e.name} takes no type argument", e.span)
        self.expect_bool(lam.body, inner, ctx, f"{e.name} predicate")
        return A.list_of(elem) if e.name == "filter" else BOOL

    def args(self, args, params, scope, ctx, span, name) -> None:
        if len(args) != len(params):
            self.err("arity", f"{name} expects {len(params)} argument(s), {len(args)} given", span)
        for x, p in zip(args, params):
            self.assign_check(self.infer(x, scope, ctx, p.type), p.type, x.span)
        for x in args[len(params):]:
            self.infer(x, scope, ctx, None)

    def env_expr(self, env: A.EnvExpr, wanted, scope, ctx, span) -> None:
        if env.kind == "spread":
            for p in wanted:
                have = ctx.env.get(p.name)
                if have is None:
                    self.err("env-undeclared", f"env{{...}} forwards no {p.name!r}: not declared by {ctx.owner}", env.span)
                elif have != p.type:
                    self.err("type-mismatch", f"env {p.name} is {have} here but {p.type} is required", env.span)
            return
        declared = {p.name: p.type for p in wanted}
        for n, x in env.bindings:
            want = declared.get(n)
            t = self.infer(x, scope, ctx, want)
            if want is None:
                self.err("env-undeclared", f"env name {n!r} is not requested by the callee", x.span)
            else:
                self.assign_check(t, want, x.span)


def _none_test(cond) -> tuple[str, bool] | None:
    """Recognise ``v === none`` / ``v !== none`` (either operand order)."""
    if not isinstance(cond, A.Binary) or cond.op not in ("===", "!=="):
        return None
    for a, b in ((cond.left, cond.right), (cond.right, cond.left)):
        if isinstance(a, A.Var) and isinstance(b, A.NoneLit):
            return a.name, cond.op == "==="
    return None


def _exits(stmts) -> bool:
    for s in stmts:
        if isinstance(s, A.Return):
            return True
        if isinstance(s, A.ExprStmt) and isinstance(s.expr, A.Fail):
            return True
        if isinstance(s, A.If) and s.else_ is not None and _exits(s.then) and _exits(s.else_):
            return True
    return False


def typecheck(module: A.SourceModule) -> TypedModule:
    """Check ``module``; raises :class:`TypeCheckError` listing every problem found."""
    return Checker(module).run()


def check_source(source: str) -> TypedModule:
    return typecheck(parse_module(source))
