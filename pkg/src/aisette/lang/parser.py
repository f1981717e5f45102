"""Recursive-descent parser producing a :class:`SourceModule`."""

from __future__ import annotations

from ..diagnostics import ParseError, Span, error
from . import ast as A
from .lexer import Token, tokenize

_DECL_STARTS = {"kw_type", "kw_sensitive", "kw_entity", "kw_function", "kw_action", "kw_api", "kw_agent", "kw_chktest"}
_COLLECTION_OPS = {"allOf", "noneOf", "map", "filter", "sum"}

_BINARY_LEVELS = [
    ("||",),
    ("&&",),
    ("===", "!=="),
    ("<", "<=", ">", ">="),
    ("+", "-"),
    ("*", "/", "%"),
]


def _strip_docs(tokens: list[Token]) -> list[Token]:
    """Drop doc comments that do not precede a declaration or a hole."""
    out = []
    for i, t in enumerate(tokens):
        if t.kind == "doc":
            nxt = tokens[i + 1].kind if i + 1 < len(tokens) else None
            if nxt not in _DECL_STARTS and nxt != "hole":
                continue
        out.append(t)
    return out


class Parser:
    def __init__(self, source: str, tokens: list[Token]):
        self.src = source
        self.toks = _strip_docs(tokens)
        self.i = 0
        end = len(source)
        line = source.count("\n") + 1
        col = len(source) - (source.rfind("\n") + 1) + 1
        self.eof = Token("eof", "", Span(line, col, end, end))

    # -- token helpers -----------------------------------------------------

    def peek(self, k: int = 0) -> Token:
        j = self.i + k
        return self.toks[j] if j < len(self.toks) else self.eof

    def at(self, *kinds: str) -> bool:
        return self.peek().kind in kinds

    def take(self) -> Token:
        t = self.peek()
        if self.i < len(self.toks):
            self.i += 1
        return t

    @property
    def prev(self) -> Token:
        return self.toks[self.i - 1] if self.i > 0 else self.eof

    def expect(self, *kinds: str) -> Token:
        t = self.peek()
        if t.kind not in kinds:
            self.fail(kinds)
        return self.take()

    def accept(self, kind: str) -> Token | None:
        if self.peek().kind == kind:
            return self.take()
        return None

    def fail(self, expected, message: str | None = None):
        t = self.peek()
        got = "end of input" if t.kind == "eof" else repr(t.text)
        msg = message or f"unexpected {got}"
        raise ParseError([error("syntax", msg, t.span, tuple(expected))])

    def span_from(self, start: Span) -> Span:
        return Span(start.line, start.col, start.offset, max(self.prev.span.end, start.offset))

    def ident(self) -> str:
        return self.expect("ident").value

    # -- module ------------------------------------------------------------

    def module(self) -> A.SourceModule:
        buckets: dict[str, list] = {k: [] for k in ("aliases", "entities", "functions", "apis", "agents", "chktests")}
        while not self.at("eof"):
            doc = None
            if self.at("doc"):
                doc = self.take().value
            t = self.peek()
            if t.kind in ("kw_type", "kw_sensitive"):
                buckets["aliases"].append(self.alias_decl(doc))
            elif t.kind == "kw_entity":
                buckets["entities"].append(self.entity_decl(doc))
            elif t.kind in ("kw_function", "kw_action"):
                buckets["functions"].append(self.function_decl(doc))
            elif t.kind == "kw_api":
                buckets["apis"].append(self.api_decl(doc))
            elif t.kind == "kw_agent":
                buckets["agents"].append(self.agent_decl(doc))
            elif t.kind == "kw_chktest":
                buckets["chktests"].append(self.chktest_decl(doc))
            else:
                self.fail(sorted(_DECL_STARTS), f"expected a declaration, found {t.text!r}")
        return A.SourceModule(**{k: tuple(v) for k, v in buckets.items()}, source=self.src)

    def type_ref(self) -> A.TypeRef:
        name = self.ident()
        args = []
        if self.accept("<"):
            args.append(self.type_ref())
            while self.accept("comma"):
                args.append(self.type_ref())
            self.expect(">")
        return A.TypeRef(name, tuple(args))

    def alias_decl(self, doc) -> A.TypeAliasDecl:
        start = self.peek().span
        sensitive = bool(self.accept("kw_sensitive"))
        self.expect("kw_type")
        name = self.ident()
        self.expect("eq")
        base = self.ident()
        regex = None
        if self.accept("kw_of"):
            regex = self.expect("regex").value
        self.expect("semi")
        return A.TypeAliasDecl(name, base, regex, sensitive, doc, span=self.span_from(start))

    def entity_decl(self, doc) -> A.EntityDecl:
        start = self.expect("kw_entity").span
        name = self.ident()
        self.expect("lbrace")
        fields, invs = [], []
        while not self.at("rbrace"):
            if self.at("kw_invariant"):
                self.take()
                invs.append(self.clause())
                continue
            fstart = self.peek().span
            self.accept("kw_field")
            fname = self.ident()
            self.expect("colon")
            ftype = self.type_ref()
            self.expect("semi")
            fields.append(A.Param(fname, ftype, span=self.span_from(fstart)))
        self.expect("rbrace")
        return A.EntityDecl(name, tuple(fields), tuple(invs), doc, span=self.span_from(start))

    def clause(self) -> A.Clause:
        e = self.expr()
        self.expect("semi")
        return A.Clause(e, self.src[e.span.offset:e.span.end], e.span)

    def params(self) -> tuple[A.Param, ...]:
        self.expect("lparen")
        out = []
        if not self.at("rparen"):
            while True:
                pstart = self.peek().span
                pname = self.ident()
                self.expect("colon")
                out.append(A.Param(pname, self.type_ref(), span=self.span_from(pstart)))
                if not self.accept("comma"):
                    break
        self.expect("rparen")
        return tuple(out)

    def env_clause(self) -> tuple[A.Param, ...]:
        if not (self.at("kw_env") and self.peek(1).kind == "eq"):
            return ()
        self.take()
        self.take()
        self.expect("lbrace")
        out = []
        while not self.at("rbrace"):
            pstart = self.peek().span
            pname = self.ident()
            self.expect("colon")
            out.append(A.Param(pname, self.type_ref(), span=self.span_from(pstart)))
            if not self.accept("comma"):
                break
        self.expect("rbrace")
        return tuple(out)

    def contracts(self, allow_ensures: bool = True):
        requires, ensures = [], []
        while True:
            if self.accept("kw_requires"):
                requires.append(self.clause())
            elif allow_ensures and self.accept("kw_ensures"):
                ensures.append(self.clause())
            else:
                return tuple(requires), tuple(ensures)

    def function_decl(self, doc) -> A.FunctionDecl:
        kw = self.take()
        name = self.ident()
        params = self.params()
        ret = self.type_ref() if self.accept("colon") else None
        env = self.env_clause()
        requires, ensures = self.contracts()
        body = self.block()
        if len(body) == 1 and isinstance(body[0], A.ExprStmt) and isinstance(body[0].expr, A.Hole):
            body = body[0].expr
        kind = "action" if kw.kind == "kw_action" else "function"
        return A.FunctionDecl(name, params, ret, requires, ensures, body, kind, env, doc, span=self.span_from(kw.span))

    def api_decl(self, doc) -> A.ApiDecl:
        start = self.expect("kw_api").span
        name = self.ident()
        params = self.params()
        ret = self.type_ref() if self.accept("colon") else None
        env = self.env_clause()
        perms = []
        if self.at("kw_permissions"):
            self.take()
            self.expect("eq")
            self.expect("lbrace")
            while not self.at("rbrace"):
                perms.append(self.expect("glob").value)
                if not self.accept("comma"):
                    break
            self.expect("rbrace")
        requires, ensures = self.contracts()
        body = None
        if self.at("lbrace"):
            body = self.block()
        else:
            self.expect("semi", "lbrace")
        return A.ApiDecl(name, params, ret, env, tuple(perms), requires, ensures, body, doc, span=self.span_from(start))

    def agent_name(self) -> str:
        parts = [self.ident()]
        while self.accept("::"):
            parts.append(self.ident())
        return "::".join(parts)

    def agent_decl(self, doc) -> A.AgentDecl:
        start = self.expect("kw_agent").span
        name = self.agent_name()
        env = self.env_clause()
        self.expect("semi")
        return A.AgentDecl(name, env, doc, span=self.span_from(start))

    def chktest_decl(self, doc) -> A.ChkTestDecl:
        start = self.expect("kw_chktest").span
        name = self.ident()
        params = self.params()
        ret = self.type_ref() if self.accept("colon") else None
        requires, _ = self.contracts(allow_ensures=False)
        body = self.block()
        return A.ChkTestDecl(name, params, ret, requires, body, doc, span=self.span_from(start))

    # -- statements --------------------------------------------------------

    def block(self) -> tuple[A.Stmt, ...]:
        self.expect("lbrace")
        out = []
        while not self.at("rbrace"):
            if self.at("eof"):
                self.fail(["}"])
            out.append(self.stmt())
        self.expect("rbrace")
        return tuple(out)

    def stmt(self) -> A.Stmt:
        t = self.peek()
        start = t.span
        if t.kind in ("kw_var", "kw_let"):
            self.take()
            name = self.ident()
            ty = self.type_ref() if self.accept("colon") else None
            self.expect("eq")
            e = self.expr()
            self.expect("semi")
            return A.VarDecl(t.kind == "kw_var", name, ty, e, span=self.span_from(start))
        if t.kind == "ident" and self.peek(1).kind == "eq":
            name = self.take().value
            self.take()
            e = self.expr()
            self.expect("semi")
            return A.Assign(name, e, span=self.span_from(start))
        if t.kind == "kw_if":
            return self.if_stmt()
        if t.kind == "kw_return":
            self.take()
            e = None if self.at("semi") else self.expr()
            self.expect("semi")
            return A.Return(e, span=self.span_from(start))
        if t.kind == "kw_assert":
            self.take()
            e = self.expr()
            self.expect("semi")
            return A.Assert(e, span=self.span_from(start), text=self.src[e.span.offset:e.span.end])
        e = self.expr()
        self.expect("semi")
        return A.ExprStmt(e, span=self.span_from(start))

    def if_stmt(self) -> A.If:
        start = self.expect("kw_if").span
        self.expect("lparen")
        cond = self.expr()
        self.expect("rparen")
        then = self.block()
        else_ = None
        if self.accept("kw_else"):
            if self.at("kw_if"):
                else_ = (self.if_stmt(),)
            else:
                else_ = self.block()
        return A.If(cond, then, else_, span=self.span_from(start))

    # -- expressions -------------------------------------------------------

    def expr(self) -> A.Expr:
        return self.binary(0)

    def binary(self, level: int) -> A.Expr:
        if level == len(_BINARY_LEVELS):
            return self.unary()
        left = self.binary(level + 1)
        ops = _BINARY_LEVELS[level]
        while self.peek().kind in ops:
            op = self.take().kind
            right = self.binary(level + 1)
            left = A.Binary(op, left, right, span=left.span.join(right.span))
        return left

    def unary(self) -> A.Expr:
        t = self.peek()
        if t.kind in ("-", "!"):
            self.take()
            inner = self.unary()
            return A.Unary(t.kind, inner, span=t.span.join(inner.span))
        return self.postfix(self.primary())

    def postfix(self, e: A.Expr) -> A.Expr:
        while self.at("dot"):
            self.take()
            name = self.ident()
            if name in _COLLECTION_OPS and self.at("lparen", "<"):
                targ = None
                if self.accept("<"):
                    targ = self.type_ref()
                    self.expect(">")
                self.expect("lparen")
                args = []
                if not self.at("rparen"):
                    args.append(self.lambda_or_expr())
                    while self.accept("comma"):
                        args.append(self.lambda_or_expr())
                self.expect("rparen")
                e = A.Method(e, name, targ, tuple(args), span=self.span_from(e.span))
            else:
                e = A.Access(e, name, span=self.span_from(e.span))
        return e

    def lambda_or_expr(self):
        if self.at("kw_pred", "kw_fn"):
            t = self.take()
            self.expect("lparen")
            param = self.ident()
            self.expect("rparen")
            self.expect("=>")
            body = self.expr()
            return A.Lambda("pred" if t.kind == "kw_pred" else "fn", param, body, span=self.span_from(t.span))
        return self.expr()

    def primary(self) -> A.Expr:
        t = self.peek()
        k = t.kind
        if k == "int_lit":
            self.take()
            return A.IntLit(t.value, t.alias, span=t.span)
        if k == "dec_lit":
            self.take()
            return A.DecLit(t.value, t.alias, span=t.span)
        if k == "num_lit":
            self.take()
            return A.NumLit(t.value, t.alias, span=t.span)
        if k in ("cstr_lit", "str_lit"):
            self.take()
            return A.StrLit(t.value, k == "cstr_lit", t.alias, span=t.span)
        if k in ("kw_true", "kw_false"):
            self.take()
            return A.BoolLit(k == "kw_true", span=t.span)
        if k == "kw_none":
            self.take()
            return A.NoneLit(span=t.span)
        if k == "kw_some":
            self.take()
            self.expect("lparen")
            inner = self.expr()
            self.expect("rparen")
            return A.SomeExpr(inner, span=self.span_from(t.span))
        if k == "lparen":
            self.take()
            inner = self.expr()
            self.expect("rparen")
            return inner
        if k == "kw_if":
            self.take()
            self.expect("lparen")
            cond = self.expr()
            self.expect("rparen")
            self.expect("kw_then")
            a = self.expr()
            self.expect("kw_else")
            b = self.expr()
            return A.IfExpr(cond, a, b, span=self.span_from(t.span))
        if k == "kw_env":
            self.take()
            self.expect("dot")
            return A.EnvVar(self.ident(), span=self.span_from(t.span))
        if k == "dollar":
            self.take()
            if t.value == "events":
                self.expect("dot")
                meth = self.ident()
                if meth != "contains":
                    raise ParseError([error("syntax", "only $events.contains(...) is supported", self.prev.span, ("contains",))])
                self.expect("lparen")
                pat = self.primary()
                if not isinstance(pat, A.Construct):
                    raise ParseError([error("syntax", "$events.contains expects an entity pattern", pat.span)])
                self.expect("rparen")
                return A.EventsContains(pat, span=self.span_from(t.span))
            return A.Special(t.value, span=t.span)
        if k == "kw_fail":
            self.take()
            self.expect("lparen")
            msg = self.expr()
            self.expect("rparen")
            return A.Fail(msg, span=self.span_from(t.span))
        if k == "kw_api":
            self.take()
            name = self.ident()
            self.expect("lparen")
            env = self.env_expr()
            args = []
            while self.accept("comma"):
                args.append(self.expr())
            self.expect("rparen")
            return A.ApiCall(name, env, tuple(args), span=self.span_from(t.span))
        if k == "kw_agent":
            self.take()
            name = self.agent_name()
            self.expect("<")
            shape = self.type_ref()
            self.expect(">")
            self.expect("lparen")
            env = self.env_expr()
            self.expect("comma")
            inp = self.expr()
            self.expect("comma")
            prompt = self.expr()
            self.expect("rparen")
            return A.AgentCall(name, shape, env, inp, prompt, span=self.span_from(t.span))
        if k in ("doc", "hole"):
            return self.hole()
        if k == "ident":
            return self.ident_expr()
        self.fail(["expression"], f"expected an expression, found {t.text or 'end of input'!r}")

    def hole(self) -> A.Hole:
        doc = None
        if self.at("doc"):
            doc = self.take().value
        t = self.expect("hole")
        examples = False
        if self.at("lparen"):
            self.take()
            while not self.at("rparen"):
                key = self.ident()
                self.expect("eq")
                if key == "examples":
                    v = self.expect("kw_true", "kw_false")
                    examples = v.kind == "kw_true"
                elif key == "doc":
                    doc = self.expect("str_lit", "cstr_lit").value
                else:
                    raise ParseError([error("syntax", f"unknown hole option {key!r}", self.prev.span, ("examples", "doc"))])
                if not self.accept("comma"):
                    break
            self.expect("rparen")
        ty = None
        if self.accept("->"):
            ty = self.type_ref()
        return A.Hole(t.value, ty, doc, examples, span=self.span_from(t.span))

    def env_expr(self) -> A.EnvExpr:
        start = self.expect("kw_env").span
        self.expect("lbrace")
        if self.at("dot"):
            for _ in range(3):
                self.expect("dot")
            self.expect("rbrace")
            return A.EnvExpr("spread", span=self.span_from(start))
        bindings = []
        while not self.at("rbrace"):
            name = self.ident()
            self.expect("eq")
            bindings.append((name, self.expr()))
            if not self.accept("comma"):
                break
        self.expect("rbrace")
        return A.EnvExpr("explicit" if bindings else "empty", tuple(bindings), span=self.span_from(start))

    def ident_expr(self) -> A.Expr:
        t = self.take()
        name = t.value
        if self.at("lparen"):
            self.take()
            args = []
            if not self.at("rparen"):
                args.append(self.expr())
                while self.accept("comma"):
                    args.append(self.expr())
            self.expect("rparen")
            return A.Call(name, tuple(args), span=self.span_from(t.span))
        if name[0].isupper() and self.at("<") and name == "List":
            self.take()
            elem = self.type_ref()
            self.expect(">")
            self.expect("lbrace")
            items = []
            while not self.at("rbrace"):
                items.append(self.expr())
                if not self.accept("comma"):
                    break
            self.expect("rbrace")
            return A.ListLit(elem, tuple(items), span=self.span_from(t.span))
        if name[0].isupper() and self.at("lbrace", "{|"):
            return self.construct(A.TypeRef(name), t.span)
        return A.Var(name, span=t.span)

    def construct(self, tref: A.TypeRef, start: Span) -> A.Construct:
        partial = self.take().kind == "{|"
        close = "|}" if partial else "rbrace"
        fields: list[tuple[str | None, A.Expr]] = []
        while not self.at(close):
            if self.at("ident") and self.peek(1).kind == "eq":
                fname = self.take().value
                self.take()
                fields.append((fname, self.expr()))
            else:
                if partial:
                    self.fail(["field = expr"])
                fields.append((None, self.expr()))
            if not self.accept("comma"):
                break
        self.expect(close)
        return A.Construct(tref, tuple(fields), partial, span=self.span_from(start))


def parse_module(source: str) -> A.SourceModule:
    """Parse ``source``; raises :class:`LexError` or :class:`ParseError`."""
    return Parser(source, tokenize(source)).module()


def parse_expr(source: str) -> A.Expr:
    p = Parser(source, tokenize(source))
    e = p.expr()
    p.expect("eof")
    return e
