"""Syntax tree for the language.

Spans, clause source text and checker annotations (``ty``, ``narrowed`` ...)
are excluded from equality so two trees compare structurally.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..diagnostics import NO_SPAN, Span


@dataclass(frozen=True)
class TypeRef:
    name: str
    args: tuple["TypeRef", ...] = ()

    def __str__(self) -> str:
        if self.args:
            return f"{self.name}<{', '.join(str(a) for a in self.args)}>"
        return self.name

    @property
    def elem(self) -> "TypeRef":
        return self.args[0]


INT = TypeRef("Int")
DECIMAL = TypeRef("Decimal")
BOOL = TypeRef("Bool")
CSTRING = TypeRef("CString")
STRING = TypeRef("String")
VOID = TypeRef("Void")
# type of the bare `none` literal and of `fail(...)`
NONE_T = TypeRef("None")
NOTHING = TypeRef("Nothing")

PRIMITIVES = {"Int", "Decimal", "Bool", "CString", "String"}


def list_of(t: TypeRef) -> TypeRef:
    return TypeRef("List", (t,))


def option_of(t: TypeRef) -> TypeRef:
    return TypeRef("Option", (t,))


def _span() -> Span:
    return field(default=NO_SPAN, compare=False, repr=False)


def _note(default=None):
    return field(default=default, compare=False, repr=False)


class Node:
    pass


# --- expressions ------------------------------------------------------------


class Expr(Node):
    pass


@dataclass(eq=True)
class IntLit(Expr):
    value: int
    alias: str | None = None
    span: Span = _span()
    ty: TypeRef | None = _note()


@dataclass(eq=True)
class DecLit(Expr):
    text: str
    alias: str | None = None
    span: Span = _span()
    ty: TypeRef | None = _note()


@dataclass(eq=True)
class NumLit(Expr):
    """Digits with an alias annotation but no suffix, e.g. ``0.0<USD>``."""

    text: str
    alias: str
    span: Span = _span()
    ty: TypeRef | None = _note()


@dataclass(eq=True)
class StrLit(Expr):
    value: str
    cstring: bool
    alias: str | None = None
    span: Span = _span()
    ty: TypeRef | None = _note()


@dataclass(eq=True)
class BoolLit(Expr):
    value: bool
    span: Span = _span()
    ty: TypeRef | None = _note()


@dataclass(eq=True)
class NoneLit(Expr):
    span: Span = _span()
    ty: TypeRef | None = _note()


@dataclass(eq=True)
class SomeExpr(Expr):
    expr: Expr
    span: Span = _span()
    ty: TypeRef | None = _note()


@dataclass(eq=True)
class Var(Expr):
    name: str
    span: Span = _span()
    ty: TypeRef | None = _note()
    # set when flow typing has proven an Option-typed binding is `some`
    narrowed: bool = _note(False)


@dataclass(eq=True)
class EnvVar(Expr):
    name: str
    span: Span = _span()
    ty: TypeRef | None = _note()


@dataclass(eq=True)
class Special(Expr):
    """``$result`` in ensures clauses, ``$field`` in entity invariants."""

    name: str
    span: Span = _span()
    ty: TypeRef | None = _note()


@dataclass(eq=True)
class Unary(Expr):
    op: str
    expr: Expr
    span: Span = _span()
    ty: TypeRef | None = _note()


@dataclass(eq=True)
class Binary(Expr):
    op: str
    left: Expr
    right: Expr
    span: Span = _span()
    ty: TypeRef | None = _note()


@dataclass(eq=True)
class IfExpr(Expr):
    cond: Expr
    then: Expr
    else_: Expr
    span: Span = _span()
    ty: TypeRef | None = _note()


@dataclass(eq=True)
class Access(Expr):
    expr: Expr
    name: str
    span: Span = _span()
    ty: TypeRef | None = _note()


@dataclass(eq=True)
class Construct(Expr):
    """``T{a, b}`` / ``T{f = a}`` entity or alias construction; ``T{|f = a|}`` is a partial pattern."""

    type: TypeRef
    fields: tuple[tuple[str | None, Expr], ...]
    partial: bool = False
    span: Span = _span()
    ty: TypeRef | None = _note()


@dataclass(eq=True)
class ListLit(Expr):
    elem: TypeRef
    items: tuple[Expr, ...]
    span: Span = _span()
    ty: TypeRef | None = _note()


@dataclass(eq=True)
class Lambda(Node):
    kind: str  # "pred" | "fn"
    param: str
    body: Expr
    span: Span = _span()


@dataclass(eq=True)
class Method(Expr):
    """Collection operation on a list receiver: allOf, noneOf, map, filter, sum."""

    receiver: Expr
    name: str
    targ: TypeRef | None
    args: tuple
    span: Span = _span()
    ty: TypeRef | None = _note()


@dataclass(eq=True)
class Call(Expr):
    name: str
    args: tuple[Expr, ...]
    span: Span = _span()
    ty: TypeRef | None = _note()


@dataclass(eq=True)
class EnvExpr(Node):
    kind: str  # "empty" | "spread" | "explicit"
    bindings: tuple[tuple[str, Expr], ...] = ()
    span: Span = _span()


@dataclass(eq=True)
class ApiCall(Expr):
    name: str
    env: EnvExpr
    args: tuple[Expr, ...]
    span: Span = _span()
    ty: TypeRef | None = _note()


@dataclass(eq=True)
class AgentCall(Expr):
    name: str
    shape: TypeRef
    env: EnvExpr
    input: Expr
    prompt: Expr
    span: Span = _span()
    ty: TypeRef | None = _note()


@dataclass(eq=True)
class EventsContains(Expr):
    pattern: Construct
    span: Span = _span()
    ty: TypeRef | None = _note()


@dataclass(eq=True)
class Hole(Expr):
    name: str
    type: TypeRef | None = None
    doc: str | None = None
    examples: bool = False
    span: Span = _span()
    ty: TypeRef | None = _note()
    # (name, type) of every binding in scope, filled in by the checker
    scope: tuple = _note(())
    owner: str = _note("")

    @property
    def hole_id(self) -> str:
        if self.name != "_":
            return self.name
        return f"{self.owner}@{self.span.line}:{self.span.col}"


@dataclass(eq=True)
class Fail(Expr):
    message: Expr
    span: Span = _span()
    ty: TypeRef | None = _note()


# --- statements -------------------------------------------------------------


class Stmt(Node):
    pass


@dataclass(eq=True)
class VarDecl(Stmt):
    mutable: bool
    name: str
    type: TypeRef | None
    expr: Expr
    span: Span = _span()


@dataclass(eq=True)
class Assign(Stmt):
    name: str
    expr: Expr
    span: Span = _span()


@dataclass(eq=True)
class If(Stmt):
    cond: Expr
    then: tuple[Stmt, ...]
    else_: tuple[Stmt, ...] | None = None
    span: Span = _span()


@dataclass(eq=True)
class Return(Stmt):
    expr: Expr | None = None
    span: Span = _span()


@dataclass(eq=True)
class Assert(Stmt):
    expr: Expr
    span: Span = _span()
    text: str = _note("")


@dataclass(eq=True)
class ExprStmt(Stmt):
    expr: Expr
    span: Span = _span()


# --- declarations -----------------------------------------------------------


@dataclass(eq=True)
class Clause(Node):
    expr: Expr
    text: str = _note("")
    span: Span = _span()


@dataclass(eq=True)
class Param(Node):
    name: str
    type: TypeRef
    span: Span = _span()


@dataclass(eq=True)
class TypeAliasDecl(Node):
    name: str
    base: str
    regex: str | None = None
    sensitive: bool = False
    doc: str | None = None
    span: Span = _span()
    compiled: object = _note()


@dataclass(eq=True)
class EntityDecl(Node):
    name: str
    fields: tuple[Param, ...]
    invariants: tuple[Clause, ...] = ()
    doc: str | None = None
    span: Span = _span()

    def field_type(self, name: str) -> TypeRef | None:
        for f in self.fields:
            if f.name == name:
                return f.type
        return None

    @property
    def field_names(self) -> list[str]:
        return [f.name for f in self.fields]


@dataclass(eq=True)
class FunctionDecl(Node):
    """A ``function`` (pure) or ``action`` (may call apis and agents).

    ``body`` is either a statement tuple or a :class:`Hole` standing for the
    whole body.
    """

    name: str
    params: tuple[Param, ...]
    ret: TypeRef | None
    requires: tuple[Clause, ...] = ()
    ensures: tuple[Clause, ...] = ()
    body: object = ()
    kind: str = "function"
    env: tuple[Param, ...] = ()
    doc: str | None = None
    span: Span = _span()

    @property
    def body_hole(self) -> Hole | None:
        return self.body if isinstance(self.body, Hole) else None

    @property
    def return_type(self) -> TypeRef:
        return self.ret or VOID


@dataclass(eq=True)
class ApiDecl(Node):
    name: str
    params: tuple[Param, ...]
    ret: TypeRef | None = None
    env: tuple[Param, ...] = ()
    permissions: tuple[str, ...] = ()
    requires: tuple[Clause, ...] = ()
    ensures: tuple[Clause, ...] = ()
    body: tuple[Stmt, ...] | None = None
    doc: str | None = None
    span: Span = _span()
    kind = "api"

    @property
    def return_type(self) -> TypeRef:
        return self.ret or VOID


@dataclass(eq=True)
class AgentDecl(Node):
    name: str
    env: tuple[Param, ...] = ()
    doc: str | None = None
    span: Span = _span()


@dataclass(eq=True)
class ChkTestDecl(Node):
    name: str
    params: tuple[Param, ...]
    ret: TypeRef | None = None
    requires: tuple[Clause, ...] = ()
    body: tuple[Stmt, ...] = ()
    doc: str | None = None
    span: Span = _span()
    kind = "chktest"
    ensures = ()

    @property
    def return_type(self) -> TypeRef:
        return self.ret or TypeRef("Bool")


@dataclass(eq=True)
class SourceModule(Node):
    aliases: tuple[TypeAliasDecl, ...] = ()
    entities: tuple[EntityDecl, ...] = ()
    functions: tuple[FunctionDecl, ...] = ()
    apis: tuple[ApiDecl, ...] = ()
    agents: tuple[AgentDecl, ...] = ()
    chktests: tuple[ChkTestDecl, ...] = ()
    source: str = _note("")


def walk_expr(e):
    """Yield ``e`` and every sub-expression (lambdas included, statements excluded)."""
    yield e
    if isinstance(e, (Unary, SomeExpr)):
        yield from walk_expr(e.expr)
    elif isinstance(e, Binary):
        yield from walk_expr(e.left)
        yield from walk_expr(e.right)
    elif isinstance(e, IfExpr):
        yield from walk_expr(e.cond)
        yield from walk_expr(e.then)
        yield from walk_expr(e.else_)
    elif isinstance(e, Access):
        yield from walk_expr(e.expr)
    elif isinstance(e, Construct):
        for _, x in e.fields:
            yield from walk_expr(x)
    elif isinstance(e, ListLit):
        for x in e.items:
            yield from walk_expr(x)
    elif isinstance(e, Method):
        yield from walk_expr(e.receiver)
        for a in e.args:
            yield from walk_expr(a.body if isinstance(a, Lambda) else a)
    elif isinstance(e, Call):
        for x in e.args:
            yield from walk_expr(x)
    elif isinstance(e, ApiCall):
        for _, x in e.env.bindings:
            yield from walk_expr(x)
        for x in e.args:
            yield from walk_expr(x)
    elif isinstance(e, AgentCall):
        for _, x in e.env.bindings:
            yield from walk_expr(x)
        yield from walk_expr(e.input)
        yield from walk_expr(e.prompt)
    elif isinstance(e, EventsContains):
        yield from walk_expr(e.pattern)
    elif isinstance(e, Fail):
        yield from walk_expr(e.message)


def walk_stmts(stmts):
    """Yield every statement in ``stmts``, descending into if-branches."""
    for s in stmts:
        yield s
        if isinstance(s, If):
            yield from walk_stmts(s.then)
            if s.else_:
                yield from walk_stmts(s.else_)


def stmt_exprs(s):
    if isinstance(s, (VarDecl, Assign, Assert, ExprStmt)):
        return [s.expr]
    if isinstance(s, If):
        return [s.cond]
    if isinstance(s, Return) and s.expr is not None:
        return [s.expr]
    return []
