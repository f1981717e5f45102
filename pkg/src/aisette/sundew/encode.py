"""Translation of typed programs into SMT-LIB terms.

Functions become ``define-fun``s over their parameters. Every runtime check a
function can fail (contracts, invariants, overflow, alias constraints, ...)
becomes a *site*: a Boolean ``define-fun`` that holds exactly when that check
is the first fault raised on the given inputs. Callers reuse a callee's sites
by applying them to the call arguments.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .. import regex as safe_regex
from ..diagnostics import NO_SPAN, AisetteError, Span, error
from ..lang import ast as A
from ..lang.ast import TypeRef
from ..runtime.values import DEC_SCALE, INT_MAX, dec_from_text
from .smt import FALSE, TRUE, and_, atoms, implies, ite, not_, num, or_, show, string_lit

MAX_CHAR = 0x2FFFF  # largest code point SMT-LIB string theories must support

RESERVED = {
    "abs", "div", "mod", "and", "or", "not", "ite", "let", "forall", "exists", "true", "false",
    "distinct", "select", "store", "xor", "as", "par", "match", "_", "!", "=>", "to_real", "to_int",
}


class Unsupported(AisetteError):
    """A construct the encoder cannot express."""

    def __init__(self, message: str, span: Span = NO_SPAN):
        super().__init__([error("smt-unsupported", message, span)])


@dataclass(frozen=True)
class Bounds:
    string_len: int = 64
    list_len: int = 8
    events_len: int = 8

    def __post_init__(self):
        if min(self.string_len, self.list_len, self.events_len) <= 0:
            raise Unsupported("bounds profile values must be positive")

    def __str__(self) -> str:
        return f"string<={self.string_len}, list<={self.list_len}, events<={self.events_len}"

    def to_json(self) -> dict:
        return {"string_len": self.string_len, "list_len": self.list_len, "events_len": self.events_len}


DEFAULT_BOUNDS = Bounds()


def sym(name: str) -> str:
    return name + "!" if name in RESERVED else name


@dataclass
class Site:
    """One runtime check. ``cond`` holds iff this check is the first fault."""

    kind: str
    span: Span
    clause: str
    owner: str
    cond: object
    origin: "Site | None" = None
    fun: str | None = None  # define-fun name when the site belongs to a function
    api: str | None = None  # api whose precondition this is, for call-site obligations
    clause_index: int = -1
    args: dict = field(default_factory=dict)  # api param -> closed term

    @property
    def root(self) -> "Site":
        return self.origin.root if self.origin is not None else self

    def key(self) -> tuple:
        r = self.root
        return (r.kind, r.span.line, r.span.col, r.span.offset, r.owner)


@dataclass
class FnInfo:
    decl: object
    sym: str
    sites: list
    has_value: bool


@dataclass
class Const:
    name: str
    sort: str
    type: TypeRef | None
    label: str
    span: Span = NO_SPAN


class Encoder:
    """Shared state for one script: datatypes, helper and function definitions."""

    def __init__(self, tm, bounds: Bounds = DEFAULT_BOUNDS):
        self.tm = tm
        self.bounds = bounds
        self.defs: list[str] = []
        self.symbols: dict[str, Span] = {}
        self.options: dict[str, str] = {}  # Opt sort name -> element sort
        self.event_types: set[str] = set()
        self.entities_used: set[str] = set()
        self.functions: dict[str, FnInfo] = {}
        self.wf_done: set[str] = set()
        self.holes: dict[str, str] = {}
        self.hole_syms: set[str] = set()
        self.regex_flag = False
        self.exhausted = False
        self._in_progress: set[str] = set()
        self._helpers()

    # -- output -------------------------------------------------------------

    def add(self, text: str, name: str | None = None, span: Span = NO_SPAN) -> None:
        self.defs.append(text)
        if name is not None:
            self.symbols.setdefault(name, span)

    def _helpers(self) -> None:
        self.add(f"(define-fun int!ok ((v Int)) Bool (and (<= {num(-INT_MAX)} v) (<= v {INT_MAX})))", "int!ok")
        self.add(
            "(define-fun tdiv ((a Int) (b Int)) Int "
            "(ite (= (>= a 0) (> b 0)) (div (abs a) (abs b)) (- (div (abs a) (abs b)))))",
            "tdiv",
        )
        self.add("(define-fun tmod ((a Int) (b Int)) Int (- a (* b (tdiv a b))))", "tmod")

    def datatypes(self) -> str:
        """The ``declare-datatypes`` block for every sort used so far."""
        names: list[str] = []
        bodies: list[str] = []
        pending = sorted(self.entities_used)
        seen = set()
        # entity fields may pull in more entities / options
        while pending:
            e = pending.pop(0)
            if e in seen:
                continue
            seen.add(e)
            for f in self.tm.entities[e].fields:
                self.sort(f.type)
            pending.extend(sorted(self.entities_used - seen))
        for e in self.tm.entities:
            if e not in seen:
                continue
            ent = self.tm.entities[e]
            names.append(f"({e} 0)")
            if ent.fields:
                sels = " ".join(f"({e}!{f.name} {self.sort(f.type)})" for f in ent.fields)
                bodies.append(f"((mk!{e} {sels}))")
            else:
                bodies.append(f"((mk!{e}))")
            self.symbols.setdefault(e, ent.span)
            self.symbols.setdefault(f"mk!{e}", ent.span)
            for f in ent.fields:
                self.symbols.setdefault(f"{e}!{f.name}", f.span)
        for o in sorted(self.options):
            s = self.options[o]
            tag = o[len("Opt!"):]
            names.append(f"({o} 0)")
            bodies.append(f"((none!{tag}) (some!{tag} (val!{tag} {s})))")
            for n in (o, f"none!{tag}", f"some!{tag}", f"val!{tag}"):
                self.symbols.setdefault(n, NO_SPAN)
        if self.event_types:
            names.append("(Event 0)")
            ctors = " ".join(f"(ev!{t} (ev!{t}!val {t}))" for t in sorted(self.event_types))
            bodies.append(f"({ctors})")
            self.symbols.setdefault("Event", NO_SPAN)
            for t in sorted(self.event_types):
                self.symbols.setdefault(f"ev!{t}", NO_SPAN)
                self.symbols.setdefault(f"ev!{t}!val", NO_SPAN)
        if not names:
            return ""
        return f"(declare-datatypes ({' '.join(names)}) ({' '.join(bodies)}))"

    # -- sorts --------------------------------------------------------------

    def sort(self, t: TypeRef) -> str:
        t = self.tm.base(t)
        n = t.name
        if n in ("Int", "Decimal"):
            return "Int"
        if n == "Bool":
            return "Bool"
        if n in ("CString", "String"):
            return "String"
        if n == "List":
            return f"(Seq {self.sort(t.elem)})"
        if n == "Option":
            inner = self.sort(t.elem)
            tag = _tag(inner)
            self.options[f"Opt!{tag}"] = inner
            return f"Opt!{tag}"
        if n in self.tm.entities:
            self.entities_used.add(n)
            return n
        raise Unsupported(f"type {t} has no SMT encoding")

    def opt_tag(self, elem: TypeRef) -> str:
        """Constructor suffix of ``Option<elem>`` (registers the datatype)."""
        self.sort(A.option_of(elem))
        return _tag(self.sort(elem))

    def events_sort(self) -> str:
        return "(Seq Event)"

    def add_event_type(self, name: str) -> None:
        self.event_types.add(name)
        self.sort(TypeRef(name))

    def default(self, t: TypeRef) -> str:
        """Some value of ``t``'s sort, used on paths that have already faulted."""
        t = self.tm.base(t)
        n = t.name
        if n in ("Int", "Decimal"):
            return "0"
        if n == "Bool":
            return FALSE
        if n in ("CString", "String"):
            return '""'
        if n == "List":
            return f"(as seq.empty {self.sort(t)})"
        if n == "Option":
            return f"none!{self.opt_tag(t.elem)}"
        if n in self.tm.entities:
            ent = self.tm.entities[n]
            self.sort(t)
            if not ent.fields:
                return f"mk!{n}"
            return "(mk!%s %s)" % (n, " ".join(show(self.default(f.type)) for f in ent.fields))
        if n in ("Void", "Nothing", "None"):
            return FALSE
        raise Unsupported(f"type {t} has no SMT encoding")

    # -- well-formedness ------------------------------------------------------

    def wf(self, t: TypeRef, x) -> object:
        """Predicate: ``x`` is a well-formed value of ``t`` within the bounds profile."""
        n = t.name
        if n in ("Int", "Decimal"):
            return ("int!ok", x)
        if n == "Bool":
            return TRUE
        if n == "CString":
            return and_(("<=", ("str.len", x), str(self.bounds.string_len)), ("str.in_re", x, '(re.* (re.range " " "~"))'))
        if n == "String":
            return ("<=", ("str.len", x), str(self.bounds.string_len))
        if n == "List":
            cap = self.bounds.list_len
            parts = [("<=", ("seq.len", x), str(cap))]
            for i in range(cap):
                w = self.wf(t.elem, ("seq.nth", x, str(i)))
                if w != TRUE:
                    parts.append(implies(("<", str(i), ("seq.len", x)), w))
            return and_(*parts)
        if n == "Option":
            w = self.wf(t.elem, (f"val!{self.opt_tag(t.elem)}", x))
            if w == TRUE:
                return TRUE
            return or_((f"(_ is none!{self.opt_tag(t.elem)})", x), w)
        if n in self.tm.aliases or n in self.tm.entities:
            self._define_wf(n)
            return (f"wf!{n}", x)
        raise Unsupported(f"type {t} has no SMT encoding")

    def _define_wf(self, name: str) -> None:
        if name in self.wf_done:
            return
        if name in self._in_progress:
            raise Unsupported(f"recursive type {name} has no bounded encoding")
        self._in_progress.add(name)
        t = TypeRef(name)
        srt = self.sort(t)
        if name in self.tm.aliases:
            a = self.tm.aliases[name]
            if a.compiled is not None:
                # a /c pattern only admits printable ASCII, so the CString check is implied
                base = TypeRef("String") if a.compiled.cstring else TypeRef(a.base)
                body = and_(self.wf(base, "x"), self.member(a.compiled, "x"))
            else:
                body = self.wf(TypeRef(a.base), "x")
            span = a.span
        else:
            ent = self.tm.entities[name]
            parts = [self.wf(f.type, (f"{name}!{f.name}", "x")) for f in ent.fields]
            if ent.invariants:
                specials = {f.name: (f"{name}!{f.name}", "x") for f in ent.fields}
                tr = Translator(self, name)
                for c in ent.invariants:
                    term, _ = tr.ex(c.expr, {}, (), specials=specials)
                    parts.append(term)
            body = and_(*parts)
            span = ent.span
        self._in_progress.discard(name)
        self.wf_done.add(name)
        self.add(f"(define-fun wf!{name} ((x {srt})) Bool {show(body)})", f"wf!{name}", span)

    # -- regex ------------------------------------------------------------------

    def member(self, rx, x):
        """``x`` matches ``rx``. Patterns that are a run of character classes with fixed
        widths (the last may vary) are encoded position by position, which the string
        solver handles far faster than regex membership."""
        segs = _segments(rx.ast)
        if segs is None or segs[-1][2] is None:
            return ("str.in_re", x, self.regex(rx))
        parts = []
        pos = 0
        cap = self.bounds.string_len
        total_lo = sum(lo for _, lo, _ in segs)
        last_hi = segs[-1][2]
        total_hi = None if last_hi is None else sum(hi for _, _, hi in segs)
        length = ("str.len", x)
        parts.append(("<=", str(total_lo), length))
        if total_hi is not None:
            parts.append(("<=", length, str(total_hi)))
        for chars, lo, hi in segs:
            cls = show(self._re(chars))
            top = cap if hi is None else pos + hi
            for i in range(pos, min(top, cap)):
                c = ("str.in_re", ("str.at", x, str(i)), cls)
                parts.append(c if i < pos + lo else implies(("<", str(i), length), c))
            pos += lo
        self.regex_flag = True
        return and_(*parts)

    def regex(self, rx) -> str:
        self.regex_flag = True
        return show(self._re(rx.ast))

    def _re(self, node):
        if isinstance(node, safe_regex.Chars):
            parts = []
            for lo, hi in node.ranges:
                if lo > MAX_CHAR:
                    continue
                hi = min(hi, MAX_CHAR)
                if lo == hi:
                    parts.append(("str.to_re", string_lit(chr(lo))))
                else:
                    parts.append(("re.range", string_lit(chr(lo)), string_lit(chr(hi))))
            if not parts:
                return "re.none"
            return parts[0] if len(parts) == 1 else ("re.union", *parts)
        if isinstance(node, safe_regex.Concat):
            items = [self._re(x) for x in node.items]
            if not items:
                return ("str.to_re", '""')
            return items[0] if len(items) == 1 else ("re.++", *items)
        if isinstance(node, safe_regex.Alt):
            items = [self._re(x) for x in node.items]
            return items[0] if len(items) == 1 else ("re.union", *items)
        if isinstance(node, safe_regex.Repeat):
            r = self._re(node.node)
            lo, hi = node.lo, node.hi
            if hi is None:
                if lo == 0:
                    return ("re.*", r)
                if lo == 1:
                    return ("re.+", r)
                return ("re.++", (f"(_ re.loop {lo} {lo})", r), ("re.*", r))
            if lo == 0 and hi == 1:
                return ("re.opt", r)
            return (f"(_ re.loop {lo} {hi})", r)
        raise Unsupported(f"regex node {type(node).__name__}")

    # -- holes --------------------------------------------------------------------

    def hole(self, h: A.Hole, arg_types: list[TypeRef], ret: TypeRef) -> str:
        name = "hole!" + h.hole_id.replace(":", ".")
        if name in self.holes:
            return name
        self.holes[name] = h.hole_id
        self.hole_syms.add(name)
        sorts = " ".join(self.sort(t) for t in arg_types)
        self.add(f"(declare-fun {name} ({sorts}) {self.sort(ret)})", name, h.span)
        return name

    # -- functions ------------------------------------------------------------------

    def function(self, name: str) -> FnInfo:
        if name in self.functions:
            return self.functions[name]
        if name in self._in_progress:
            raise Unsupported(f"{name} is recursive")
        decl = self.tm.functions[name]
        if decl.kind == "action":
            raise Unsupported(f"action {name} cannot be called from a pure context", decl.span)
        self._in_progress.add(name)
        tr = Translator(self, name)
        env = {p.name: sym(p.name) for p in decl.params}
        fr = ()
        for c in decl.requires:
            t, fr = tr.ex(c.expr, env, fr)
            fr = tr.site("precondition", c.span, c.text, not_(t), fr)
        if isinstance(decl.body, A.Hole):
            h = decl.body
            hname = self.hole(h, [p.type for p in decl.params], decl.return_type)
            value = (hname, *[env[p.name] for p in decl.params]) if decl.params else hname
            self._hole_axiom(decl, hname, env)
        else:
            value = tr.block(list(decl.body), env, fr, decl)
        self._in_progress.discard(name)
        params = " ".join(f"({sym(p.name)} {self.sort(p.type)})" for p in decl.params)
        fsym = sym(name)
        has_value = decl.return_type != A.VOID
        if has_value:
            self.add(f"(define-fun {fsym} ({params}) {self.sort(decl.return_type)} {show(value)})", fsym, decl.span)
            if self.depends_on_holes(value):
                self.hole_syms.add(fsym)
        for k, s in enumerate(tr.sites):
            s.fun = f"{name}!err!{k}"
            self.add(f"(define-fun {s.fun} ({params}) Bool {show(s.cond)})", s.fun, s.span)
            if self.depends_on_holes(s.cond):
                self.hole_syms.add(s.fun)
        info = FnInfo(decl, fsym, tr.sites, has_value)
        self.functions[name] = info
        return info

    def _hole_axiom(self, decl, hname: str, env: dict) -> None:
        app = (hname, *[env[p.name] for p in decl.params]) if decl.params else hname
        tr = Translator(self, decl.name)
        pre = []
        for c in decl.requires:
            t, _ = tr.ex(c.expr, env, ())
            pre.append(t)
        post = [self.wf(decl.return_type, app)]
        for c in decl.ensures:
            t, _ = tr.ex(c.expr, env, (), specials={"result": app})
            post.append(t)
        body = implies(and_(*[self.wf(p.type, env[p.name]) for p in decl.params], *pre), and_(*post))
        if decl.params:
            binds = tuple((env[p.name], self.sort(p.type)) for p in decl.params)
            body = ("forall", binds, body)
        self.add(f"(assert {show(body)})")

    def depends_on_holes(self, term) -> bool:
        return any(a in self.hole_syms for a in atoms(term))


def _segments(node):
    """``[(chars, lo, hi)]`` when ``node`` is a concatenation of character classes, each
    repeated a fixed number of times except possibly the last; otherwise None."""
    items = node.items if isinstance(node, safe_regex.Concat) else (node,)
    segs = []
    for it in items:
        if isinstance(it, safe_regex.Chars):
            segs.append((it, 1, 1))
        elif isinstance(it, safe_regex.Repeat) and isinstance(it.node, safe_regex.Chars):
            segs.append((it.node, it.lo, it.hi))
        else:
            return None
    if not segs or any(lo != hi for _, lo, hi in segs[:-1]):
        return None
    return segs


def _tag(sort: str) -> str:
    return sort.replace("(", "").replace(")", "").replace(" ", ".")


def wrap(frames, body):
    """Close ``body`` under the let-bindings and path conditions in ``frames``."""
    for item in reversed(frames):
        if item[0] == "let":
            if body not in (TRUE, FALSE) and item[1] in set(atoms(body)):
                body = ("let", ((item[1], item[2]),), body)
        else:
            body = and_(item[1], body)
    return body


def wrap_lets(frames, body):
    for item in reversed(frames):
        if item[0] == "let" and item[1] in set(atoms(body)):
            body = ("let", ((item[1], item[2]),), body)
    return body


class _Failed:
    """Marker for an expression that always faults (``fail(...)``)."""


FAILED = _Failed()


class Translator:
    """Symbolic execution of one declaration body into terms and sites."""

    def __init__(self, enc: Encoder, owner: str):
        self.enc = enc
        self.tm = enc.tm
        self.owner = owner
        self.sites: list[Site] = []
        self.names: dict[str, int] = {}
        self.env_terms: dict | None = None
        self.events = None
        self.consts: list[Const] = []
        self.chktest = False

    # -- helpers ------------------------------------------------------------------

    def fresh(self, name: str) -> str:
        base = sym(name)
        k = self.names.get(name)
        self.names[name] = 0 if k is None else k + 1
        return base if k is None else f"{base}@{k + 1}"

    def const(self, prefix: str, t: TypeRef, label: str, span: Span) -> str:
        name = f"{prefix}!{len(self.consts)}"
        self.consts.append(Const(name, self.enc.sort(t), t, label, span))
        return name

    def site(self, kind, span, clause, viol, fr, **extra):
        if viol == FALSE:
            return fr
        cond = wrap(fr, viol)
        if cond != FALSE:
            self.sites.append(Site(kind, span, clause, self.owner, cond, **extra))
        return fr + (("assume", not_(viol)),)

    def coerce(self, term, t: TypeRef):
        return self.enc.default(t) if term is FAILED else term

    # -- statements -------------------------------------------------------------

    def block(self, stmts: list, env: dict, fr: tuple, decl):
        """Value of running ``stmts``; statements after an ``if`` are duplicated into both branches."""
        if not stmts:
            if self.chktest:
                return TRUE
            return self.enc.default(decl.return_type) if decl.return_type != A.VOID else FALSE
        s, rest = stmts[0], stmts[1:]
        if isinstance(s, (A.VarDecl, A.Assign)):
            t, fr = self.ex(s.expr, env, fr)
            ty = s.expr.ty if isinstance(s, A.Assign) or s.type is None else s.type
            t = self.coerce(t, ty or A.BOOL)
            n = self.fresh(s.name)
            env = dict(env)
            env[s.name] = n
            body = self.block(rest, env, fr + (("let", n, t),), decl)
            if n in set(atoms(body)):
                return ("let", ((n, t),), body)
            return body
        if isinstance(s, A.If):
            c, fr = self.ex(s.cond, env, fr)
            a = self.block(list(s.then) + rest, env, fr + (("guard", c),), decl)
            b = self.block(list(s.else_ or ()) + rest, env, fr + (("guard", not_(c)),), decl)
            return ite(c, a, b)
        if isinstance(s, A.Return):
            if s.expr is None:
                return FALSE
            t, fr = self.ex(s.expr, env, fr)
            t = self.coerce(t, decl.return_type)
            if self.chktest:
                self.site("false", s.span, "return", not_(t), fr)
                return t
            if decl.ensures:
                for c in decl.ensures:
                    p, fr = self.ex(c.expr, env, fr, specials={"result": t})
                    fr = self.site("postcondition", c.span, c.text, not_(p), fr)
            return t
        if isinstance(s, A.Assert):
            t, fr = self.ex(s.expr, env, fr)
            fr = self.site("assert", s.span, s.text, not_(t), fr)
            return self.block(rest, env, fr, decl)
        if isinstance(s, A.ExprStmt):
            _, fr = self.ex(s.expr, env, fr)
            return self.block(rest, env, fr, decl)
        raise Unsupported(f"statement {type(s).__name__}", getattr(s, "span", NO_SPAN))

    # -- expressions ------------------------------------------------------------

    def ex(self, e, env: dict, fr: tuple, specials: dict | None = None):
        if specials is not None:
            saved = getattr(self, "_specials", None)
            self._specials = specials
            try:
                return self.ex(e, env, fr)
            finally:
                self._specials = saved
        m = getattr(self, "_x_" + type(e).__name__, None)
        if m is None:
            raise Unsupported(f"expression {type(e).__name__}", getattr(e, "span", NO_SPAN))
        return m(e, env, fr)

    def _x_IntLit(self, e, env, fr):
        return num(e.value), fr

    def _x_DecLit(self, e, env, fr):
        return num(dec_from_text(e.text)), fr

    def _x_NumLit(self, e, env, fr):
        base = self.tm.aliases[e.alias].base
        return num(int(e.text) if base == "Int" else dec_from_text(e.text)), fr

    def _x_StrLit(self, e, env, fr):
        return string_lit(e.value), fr

    def _x_BoolLit(self, e, env, fr):
        return (TRUE if e.value else FALSE), fr

    def _x_NoneLit(self, e, env, fr):
        if e.ty is None or e.ty.name != "Option":
            raise Unsupported("untyped none", e.span)
        return f"none!{self.enc.opt_tag(e.ty.elem)}", fr

    def _x_SomeExpr(self, e, env, fr):
        t, fr = self.ex(e.expr, env, fr)
        return (f"some!{self.enc.opt_tag(e.ty.elem)}", self.coerce(t, e.ty.elem)), fr

    def _x_Var(self, e, env, fr):
        t = env[e.name]
        if e.narrowed:
            return (f"val!{self.enc.opt_tag(e.ty)}", t), fr
        return t, fr

    def _x_EnvVar(self, e, env, fr):
        if self.env_terms is None or e.name not in self.env_terms:
            fr = self.site("env-missing", e.span, f"env.{e.name}", TRUE, fr)
            return self.enc.default(e.ty), fr
        return self.env_terms[e.name], fr

    def _x_Special(self, e, env, fr):
        specials = getattr(self, "_specials", None) or {}
        if e.name not in specials:
            raise Unsupported(f"${e.name} outside its clause", e.span)
        return specials[e.name], fr

    def _x_Unary(self, e, env, fr):
        t, fr = self.ex(e.expr, env, fr)
        if t is FAILED:
            return FAILED, fr
        if e.op == "!":
            return not_(t), fr
        r = ("-", t)
        fr = self.site("overflow", e.span, "-", not_(("int!ok", r)), fr)
        return r, fr

    def _x_Binary(self, e, env, fr):
        op = e.op
        if op in ("&&", "||"):
            a, fr1 = self.ex(e.left, env, fr)
            a = self.coerce(a, A.BOOL)
            guard = a if op == "&&" else not_(a)
            mark = len(fr1) + 1
            b, fr2 = self.ex(e.right, env, fr1 + (("guard", guard),))
            b = self.coerce(b, A.BOOL)
            ok = and_(*[x[1] for x in fr2[mark:]])
            out = fr1 + (("assume", implies(guard, ok)),) if ok != TRUE else fr1
            return (and_(a, b) if op == "&&" else or_(a, b)), out
        if op in ("===", "!=="):
            if isinstance(e.right, A.NoneLit) and (e.right.ty is None or e.right.ty.name != "Option"):
                a, fr = self.ex(e.left, env, fr)
                t = (f"(_ is none!{self.enc.opt_tag(e.left.ty.elem)})", a)
            elif isinstance(e.left, A.NoneLit) and (e.left.ty is None or e.left.ty.name != "Option"):
                b, fr = self.ex(e.right, env, fr)
                t = (f"(_ is none!{self.enc.opt_tag(e.right.ty.elem)})", b)
            else:
                a, fr = self.ex(e.left, env, fr)
                b, fr = self.ex(e.right, env, fr)
                if a is FAILED or b is FAILED:
                    return FAILED, fr
                t = ("=", a, b)
            return (t if op == "===" else not_(t)), fr
        a, fr = self.ex(e.left, env, fr)
        b, fr = self.ex(e.right, env, fr)
        if a is FAILED or b is FAILED:
            return FAILED, fr
        if op in ("<", "<=", ">", ">="):
            return (op, a, b), fr
        dec = self.tm.base(e.left.ty) == A.DECIMAL
        scale = str(DEC_SCALE)
        if op in ("+", "-"):
            r = (op, a, b)
        elif op == "*":
            r = ("tdiv", ("*", a, b), scale) if dec else ("*", a, b)
        else:
            fr = self.site("division-by-zero", e.span, op, ("=", b, "0"), fr)
            if op == "/":
                r = ("tdiv", ("*", a, scale), b) if dec else ("tdiv", a, b)
            else:
                r = ("tmod", a, b)
        fr = self.site("overflow", e.span, op, not_(("int!ok", r)), fr)
        return r, fr

    def _x_IfExpr(self, e, env, fr):
        c, fr = self.ex(e.cond, env, fr)
        c = self.coerce(c, A.BOOL)
        mark = len(fr) + 1
        a, fa = self.ex(e.then, env, fr + (("guard", c),))
        b, fb = self.ex(e.else_, env, fr + (("guard", not_(c)),))
        oka = and_(*[x[1] for x in fa[mark:]])
        okb = and_(*[x[1] for x in fb[mark:]])
        if (oka, okb) != (TRUE, TRUE):
            fr = fr + (("assume", ite(c, oka, okb)),)
        return ite(c, self.coerce(a, e.ty), self.coerce(b, e.ty)), fr

    def _x_Access(self, e, env, fr):
        t, fr = self.ex(e.expr, env, fr)
        if t is FAILED:
            return FAILED, fr
        ty = e.expr.ty
        if ty.name in self.tm.aliases and e.name == "value":
            return t, fr
        return (f"{ty.name}!{e.name}", t), fr

    def _x_Construct(self, e, env, fr):
        name = e.type.name
        if e.partial:
            raise Unsupported("partial patterns are only valid inside $events.contains", e.span)
        if name in self.tm.aliases:
            inner = e.fields[0][1]
            t, fr = self.ex(inner, env, fr)
            if t is FAILED:
                return FAILED, fr
            a = self.tm.aliases[name]
            if a.compiled is not None and not isinstance(inner, A.StrLit):
                fr = self.site("constraint", e.span, a.regex, not_(self.enc.member(a.compiled, t)), fr)
            return t, fr
        ent = self.tm.entities[name]
        vals = {}
        order = []
        for i, (n, x) in enumerate(e.fields):
            t, fr = self.ex(x, env, fr)
            key = n if n is not None else ent.fields[i].name
            vals[key] = self.coerce(t, ent.field_type(key))
            order.append(key)
        self.enc.sort(e.type)
        args = [vals[f.name] for f in ent.fields]
        value = (f"mk!{name}", *args) if args else f"mk!{name}"
        if ent.invariants:
            specials = dict(zip(ent.field_names, args))
            for c in ent.invariants:
                p, fr = self.ex(c.expr, env, fr, specials=specials)
                fr = self.site("invariant", c.span, c.text, not_(p), fr)
        return value, fr

    def _x_ListLit(self, e, env, fr):
        items = []
        for x in e.items:
            t, fr = self.ex(x, env, fr)
            items.append(("seq.unit", self.coerce(t, e.elem)))
        if len(items) > self.enc.bounds.list_len:
            self.enc.exhausted = True
        if not items:
            return f"(as seq.empty {self.enc.sort(A.list_of(e.elem))})", fr
        return (items[0] if len(items) == 1 else ("seq.++", *items)), fr

    def _x_Method(self, e, env, fr):
        recv, fr = self.ex(e.receiver, env, fr)
        if recv is FAILED:
            return FAILED, fr
        elem = e.receiver.ty.elem
        n = self.enc.bounds.list_len
        if isinstance(e.receiver, A.ListLit):
            n = min(n, len(e.receiver.items))
        length = ("seq.len", recv)

        def item(i):
            return ("seq.nth", recv, str(i))

        def inside(i):
            return ("<", str(i), length)

        if e.name == "sum":
            acc = "0"
            for i in range(n):
                nxt = ("+", acc, item(i))
                fr = self.site("overflow", e.span, "sum", and_(inside(i), not_(("int!ok", nxt))), fr)
                acc = ite(inside(i), nxt, acc)
            return acc, fr
        lam = e.args[0]
        mark = len(fr)
        results = []
        oks = []
        prior = TRUE
        for i in range(n):
            scope = dict(env)
            scope[lam.param] = item(i)
            g = and_(inside(i), prior)
            t, fi = self.ex(lam.body, scope, fr + (("guard", g),))
            t = self.coerce(t, A.BOOL if e.name in ("allOf", "noneOf", "filter") else lam.body.ty)
            ok = and_(*[x[1] for x in fi[mark + 1:]])
            if ok != TRUE:
                oks.append(implies(g, ok))
            results.append(t)
            if e.name == "allOf":
                prior = and_(prior, t)
            elif e.name == "noneOf":
                prior = and_(prior, not_(t))
        if oks:
            fr = fr + (("assume", and_(*oks)),)
        if e.name == "allOf":
            return and_(*[implies(inside(i), results[i]) for i in range(n)]), fr
        if e.name == "noneOf":
            return and_(*[implies(inside(i), not_(results[i])) for i in range(n)]), fr
        out_elem = e.targ if e.name == "map" and e.targ is not None else (e.ty.elem if e.ty is not None else elem)
        empty = f"(as seq.empty {self.enc.sort(A.list_of(out_elem))})"
        parts = []
        for i in range(n):
            keep = inside(i) if e.name == "map" else and_(inside(i), results[i])
            unit = ("seq.unit", results[i] if e.name == "map" else item(i))
            parts.append(ite(keep, unit, empty))
        if not parts:
            return empty, fr
        return (parts[0] if len(parts) == 1 else ("seq.++", *parts)), fr

    def _x_Call(self, e, env, fr):
        info = self.enc.function(e.name)
        decl = info.decl
        args = []
        for p, x in zip(decl.params, e.args):
            t, fr = self.ex(x, env, fr)
            args.append(self.coerce(t, p.type))
        apps = []
        for s in info.sites:
            app = (s.fun, *args) if args else s.fun
            apps.append(app)
            cond = wrap(fr, app)
            if cond != FALSE:
                self.sites.append(Site(s.kind, s.span, s.clause, s.owner, cond, origin=s))
        if apps:
            fr = fr + (("assume", and_(*[not_(a) for a in apps])),)
        if not info.has_value:
            return FALSE, fr
        return ((info.sym, *args) if args else info.sym), fr

    def _env_terms_for(self, env_expr: A.EnvExpr, env, fr):
        if env_expr.kind == "spread":
            return dict(self.env_terms or {}), fr
        out = {}
        for n, x in env_expr.bindings:
            t, fr = self.ex(x, env, fr)
            out[n] = t
        return out, fr

    def _x_ApiCall(self, e, env, fr):
        decl = self.tm.apis[e.name]
        api_env, fr = self._env_terms_for(e.env, env, fr)
        args = []
        for p, x in zip(decl.params, e.args):
            t, fr = self.ex(x, env, fr)
            args.append(self.coerce(t, p.type))
        for p in decl.env:
            if p.name not in api_env:
                fr = self.site("env-missing", p.span, f"env.{p.name}", TRUE, fr)
        named = {p.name: a for p, a in zip(decl.params, args)}
        saved_env, saved_events = self.env_terms, self.events
        self.env_terms = {p.name: api_env[p.name] for p in decl.env if p.name in api_env}
        try:
            for k, c in enumerate(decl.requires):
                t, fr = self.ex(c.expr, named, fr)
                closed = {n: wrap_lets(fr, a) for n, a in named.items()}
                fr = self.site("precondition", c.span, c.text, not_(t), fr, api=decl.name, clause_index=k, args=closed)
        finally:
            self.env_terms, self.events = saved_env, saved_events
        if decl.return_type == A.VOID:
            return FALSE, fr
        r = self.const("api", decl.return_type, f"result of {decl.name}", e.span)
        return r, fr + (("assume", self.enc.wf(decl.return_type, r)),)

    def _x_AgentCall(self, e, env, fr):
        _, fr = self._env_terms_for(e.env, env, fr)
        _, fr = self.ex(e.input, env, fr)
        _, fr = self.ex(e.prompt, env, fr)
        r = self.const("agent", e.shape, f"answer of {e.name}", e.span)
        return r, fr + (("assume", self.enc.wf(e.shape, r)),)

    def _x_EventsContains(self, e, env, fr):
        pat = e.pattern
        name = pat.type.name
        ent = self.tm.entities[name]
        vals = []
        for n, x in pat.fields:
            t, fr = self.ex(x, env, fr)
            vals.append((n, t))
        if self.events is None:
            return FALSE, fr
        self.enc.add_event_type(name)
        cases = []
        for i in range(self.enc.bounds.events_len):
            ev = ("seq.nth", self.events, str(i))
            body = (f"ev!{name}!val", ev)
            conds = [("<", str(i), ("seq.len", self.events)), (f"(_ is ev!{name})", ev)]
            for k, (n, t) in enumerate(vals):
                fname = n if n is not None else ent.fields[k].name
                conds.append(("=", (f"{name}!{fname}", body), t))
            cases.append(and_(*conds))
        return or_(*cases), fr

    def _x_Hole(self, e, env, fr):
        scope = [(n, t) for n, t in e.scope if n in env]
        hname = self.enc.hole(e, [t for _, t in scope], e.type or e.ty)
        app = (hname, *[env[n] for n, _ in scope]) if scope else hname
        ret = e.type or e.ty
        return app, fr + (("assume", self.enc.wf(ret, app)),)

    def _x_Fail(self, e, env, fr):
        _, fr = self.ex(e.message, env, fr)
        text = e.message.value if isinstance(e.message, A.StrLit) else "fail"
        self.site("user", e.span, text, TRUE, fr)
        return FAILED, fr + (("assume", FALSE),)
