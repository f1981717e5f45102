"""Solver-backed checks: chktest proving, error-site reachability and api call-site obligations.

Every witness the solver produces is replayed through the evaluator before it
is reported, so a Counterexample or Witness always reproduces its fault.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..diagnostics import Span
from ..lang import ast as A
from ..lang.ast import TypeRef
from ..lang.printer import print_expr
from ..runtime.events import EventLog
from ..runtime.interp import EnvRecord, Interpreter
from ..runtime.values import Fault, Value
from .encode import DEFAULT_BOUNDS, Bounds, Const, Encoder, Translator, Unsupported, sym
from .model import ModelError, decode, decode_events, term_of
from .smt import FALSE, TRUE, or_, show
from .solver import DEFAULT_TIMEOUT_MS, solve

LOGIC = "ALL"


@dataclass
class SmtScript:
    text: str
    logic: str
    symbols: dict[str, Span]
    bounds: Bounds

    def __str__(self) -> str:
        return self.text


@dataclass
class ValidationResult:
    status: str  # valid | counterexample | unknown
    witness: dict[str, Value] = field(default_factory=dict)
    reason: str | None = None
    fault: Fault | None = None
    elapsed: float = 0.0
    bounds: Bounds = DEFAULT_BOUNDS

    @property
    def valid(self) -> bool:
        return self.status == "valid"


@dataclass
class SiteResult:
    entry: str
    kind: str
    span: Span
    clause: str
    owner: str
    status: str  # impossible | witness | unknown
    witness: dict[str, Value] = field(default_factory=dict)
    reason: str | None = None


@dataclass
class MissingClause:
    clause: str
    summary: str
    witness: dict[str, Value]
    status: str = "missing"  # missing | unknown


@dataclass
class ObligationReport:
    api: str
    satisfied: bool
    missing: list[MissingClause]
    checked: list[str]


# -- script assembly ------------------------------------------------------------


def _inputs(enc: Encoder, consts: list[Const], input_range=None) -> list[str]:
    out = []
    for c in consts:
        out.append(f"(declare-const {c.name} {c.sort})")
        enc.symbols.setdefault(c.name, c.span)
        if c.type is not None:
            w = enc.wf(c.type, c.name)
            if w != TRUE:
                out.append(f"(assert {show(w)})")
            if input_range is not None and enc.tm.base(c.type) == A.INT:
                lo, hi = input_range
                out.append(f"(assert (and (<= {_n(lo)} {c.name}) (<= {c.name} {_n(hi)})))")
    return out


def _n(v: int) -> str:
    return str(v) if v >= 0 else f"(- {-v})"


def _assemble(enc: Encoder, decls: list[str], goal) -> SmtScript:
    # declarations may register more sorts, so render them before the datatypes
    lines = [f"(set-logic {LOGIC})", "(set-option :produce-models true)"]
    dt = enc.datatypes()
    if dt:
        lines.append(dt)
    lines.extend(enc.defs)
    lines.extend(decls)
    lines.append(f"(assert {show(goal)})")
    return SmtScript("\n".join(lines) + "\n", LOGIC, dict(sorted(enc.symbols.items())), enc.bounds)


def _param_consts(enc: Encoder, params) -> list[Const]:
    return [Const(sym(p.name), enc.sort(p.type), p.type, p.name, p.span) for p in params]


# -- chktests -------------------------------------------------------------------


@dataclass
class _Query:
    enc: Encoder
    consts: list[Const]
    goal: object
    sites: list
    extra: list = field(default_factory=list)


def _chktest_query(tm, name: str, bounds: Bounds) -> _Query:
    t = tm.chktests[name]
    enc = Encoder(tm, bounds)
    tr = Translator(enc, name)
    tr.chktest = True
    env = {p.name: sym(p.name) for p in t.params}
    consts = _param_consts(enc, t.params)
    fr = ()
    for c in t.requires:
        g, fr = tr.ex(c.expr, env, fr)
        fr = fr + (("guard", g),)
    tr.block(list(t.body), env, fr, t)
    return _Query(enc, consts, or_(*[s.cond for s in tr.sites]), tr.sites)


def _function_query(tm, name: str, bounds: Bounds) -> _Query:
    enc = Encoder(tm, bounds)
    info = enc.function(name)
    decl = info.decl
    consts = _param_consts(enc, decl.params)
    args = [c.name for c in consts]
    sites = [s for s in info.sites if not _own_requires(s, name)]
    goal = or_(*[((s.fun, *args) if args else s.fun) for s in sites])
    return _Query(enc, consts, goal, sites)


def _own_requires(site, name: str) -> bool:
    r = site.root
    return r.kind == "precondition" and r.owner == name and site.origin is None


def emit_smt(tm, target, bounds: Bounds = DEFAULT_BOUNDS) -> SmtScript:
    """Script for ``target``: a chktest (negated property), a function (any fault site
    reachable) or an ``(action, api)`` pair (any precondition of the api violated)."""
    if isinstance(target, tuple):
        q = _call_site_query(tm, target[0], target[1], (), bounds)
        goal = or_(*[s.cond for s in q.sites])
    elif target in tm.chktests:
        q = _chktest_query(tm, target, bounds)
        goal = q.goal
    elif target in tm.functions and tm.functions[target].kind == "function":
        q = _function_query(tm, target, bounds)
        goal = q.goal
    else:
        raise Unsupported(f"no function, chktest or call site named {target!r}")
    decls = _inputs(q.enc, q.consts) + q.extra
    script = _assemble(q.enc, decls, goal)
    script.text += "(check-sat)\n"
    return script


def run_chktest(
    tm, name: str, solver: str | None = None, timeout_ms: int = DEFAULT_TIMEOUT_MS,
    bounds: Bounds = DEFAULT_BOUNDS, input_range: tuple[int, int] | None = None,
) -> ValidationResult:
    t = tm.chktests[name]
    q = _chktest_query(tm, name, bounds)
    decls = _inputs(q.enc, q.consts, input_range)
    script = _assemble(q.enc, decls, q.goal)
    ans = solve(script.text, [c.name for c in q.consts], solver, timeout_ms)
    if ans.status == "unsat":
        if q.enc.exhausted:
            return ValidationResult("unknown", reason="bound-exhausted", elapsed=ans.elapsed, bounds=bounds)
        return ValidationResult("valid", elapsed=ans.elapsed, bounds=bounds)
    if ans.status != "sat":
        return ValidationResult("unknown", reason=_reason(ans.status), elapsed=ans.elapsed, bounds=bounds)
    if q.enc.depends_on_holes(q.goal):
        return ValidationResult("unknown", reason="hole", elapsed=ans.elapsed, bounds=bounds)
    witness = _decode_inputs(tm, q.consts, ans.values)
    args = [witness[p.name] for p in t.params]
    fault = None
    try:
        outcome = Interpreter(tm).run_chktest(name, args)
    except Fault as f:
        outcome, fault = False, f
    if outcome is not False:
        return ValidationResult("unknown", witness, reason="replay-mismatch", elapsed=ans.elapsed, bounds=bounds)
    return ValidationResult("counterexample", witness, fault=fault, elapsed=ans.elapsed, bounds=bounds)


def _reason(status: str) -> str:
    return "timeout" if status == "timeout" else "incomplete"


def _decode_inputs(tm, consts: list[Const], values: list) -> dict[str, Value]:
    try:
        return {c.label: decode(tm, c.type, v) for c, v in zip(consts, values)}
    except ModelError as exc:
        raise Unsupported(f"could not decode solver model: {exc}") from None


# -- error reachability --------------------------------------------------------


def check_error_reachability(
    tm, entries: list[str] | None = None, solver: str | None = None,
    timeout_ms: int = DEFAULT_TIMEOUT_MS, bounds: Bounds = DEFAULT_BOUNDS,
    input_range: tuple[int, int] | None = None,
) -> list[SiteResult]:
    """Classify every fault site reachable from each pure function (all of them by default)."""
    names = entries or [f.name for f in tm.source.functions if f.kind == "function"]
    out: list[SiteResult] = []
    for name in names:
        q = _function_query(tm, name, bounds)
        decl = q.enc.functions[name].decl
        decls = _inputs(q.enc, q.consts, input_range)
        args = [c.name for c in q.consts]
        groups: dict[tuple, list] = {}
        for s in q.sites:
            groups.setdefault(s.key(), []).append(s)
        for group in groups.values():
            root = group[0].root
            goal = or_(*[((s.fun, *args) if args else s.fun) for s in group])
            script = _assemble(q.enc, decls, goal)
            res = SiteResult(name, root.kind, root.span, root.clause, root.owner, "unknown")
            ans = solve(script.text, args, solver, timeout_ms)
            if ans.status == "unsat":
                res.status = "impossible"
            elif ans.status != "sat":
                res.reason = _reason(ans.status)
            elif q.enc.depends_on_holes(goal):
                res.reason = "hole"
            else:
                witness = _decode_inputs(tm, q.consts, ans.values)
                res.witness = witness
                if _replays(tm, decl, witness, root):
                    res.status = "witness"
                else:
                    res.reason = "replay-mismatch"
            out.append(res)
    return out


def _replays(tm, decl, witness: dict[str, Value], site) -> bool:
    try:
        Interpreter(tm).call(decl.name, [witness[p.name] for p in decl.params])
    except Fault as f:
        return f.kind == site.kind and f.span is not None and f.span.offset == site.span.offset and f.span.end == site.span.end
    return False


# -- api call-site obligations ---------------------------------------------------


def _call_site_query(tm, action: str, api: str, facts, bounds: Bounds) -> _Query:
    decl = tm.functions.get(action)
    if decl is None:
        raise Unsupported(f"no action named {action!r}")
    if api not in tm.apis:
        raise Unsupported(f"no api named {api!r}")
    enc = Encoder(tm, bounds)
    tr = Translator(enc, action)
    env = {p.name: sym(p.name) for p in decl.params}
    consts = _param_consts(enc, decl.params)
    tr.env_terms = {}
    for p in decl.env:
        name = f"env.{p.name}"
        tr.env_terms[p.name] = name
        consts.append(Const(name, enc.sort(p.type), p.type, name, p.span))
    tr.events = "events!log"
    fr = ()
    for c in decl.requires:
        g, fr = tr.ex(c.expr, env, fr)
        fr = fr + (("guard", g),)
    if isinstance(decl.body, A.Hole):
        raise Unsupported(f"{action} has no body to introspect", decl.span)
    tr.block(list(decl.body), env, fr, decl)
    sites = [s for s in tr.sites if s.api == api]
    if not sites:
        raise Unsupported(f"{action} never calls api {api}", decl.span)
    consts.extend(tr.consts)
    extra = []
    for ev in facts:
        enc.add_event_type(ev.type)
    if enc.event_types:
        consts.append(Const("events!log", "(Seq Event)", None, "$events"))
        extra.append(f"(assert (<= (seq.len events!log) {bounds.events_len}))")
        for ev in facts:
            term = show(term_of(tm, enc, ev, TypeRef(ev.type)))
            cases = " ".join(
                f"(and (< {i} (seq.len events!log)) (= (seq.nth events!log {i}) (ev!{ev.type} {term})))"
                for i in range(bounds.events_len)
            )
            extra.append(f"(assert (or {cases}))")
    return _Query(enc, consts, None, sites, extra)


def check_api_call_site(
    tm, action: str, api: str, facts: list = (), solver: str | None = None,
    timeout_ms: int = DEFAULT_TIMEOUT_MS, bounds: Bounds = DEFAULT_BOUNDS,
) -> ObligationReport:
    """Check each requires clause of ``api`` at its call site(s) in ``action``.

    Agent answers and api results are unconstrained values of their declared
    shapes; ``facts`` are events assumed to be in the log already.
    """
    q = _call_site_query(tm, action, api, facts, bounds)
    decl = tm.apis[api]
    missing = []
    for k, clause in enumerate(decl.requires):
        here = [s for s in q.sites if s.clause_index == k]
        goal = or_(*[s.cond for s in here])
        if goal == FALSE:
            continue
        decls = _inputs(q.enc, q.consts) + q.extra
        script = _assemble(q.enc, decls, goal)
        probes = [c.name for c in q.consts]
        for s in here:
            probes.append(show(s.cond))
            probes.extend(show(a) for a in s.args.values())
        ans = solve(script.text, probes, solver, timeout_ms)
        if ans.status == "unsat":
            continue
        if ans.status != "sat":
            missing.append(MissingClause(clause.text, f"could not be decided ({_reason(ans.status)})", {}, "unknown"))
            continue
        witness = _obligation_witness(tm, q, here, decl, ans.values)
        missing.append(MissingClause(clause.text, summarize(clause.expr), witness))
    return ObligationReport(api, not missing, missing, [c.text for c in decl.requires])


def _obligation_witness(tm, q: _Query, sites, api_decl, values) -> dict[str, Value]:
    it = iter(values)
    out: dict[str, Value] = {}
    try:
        for c in q.consts:
            v = next(it)
            if c.type is None:
                out["$events"] = decode_events(tm, v)
            elif c.label.startswith(("answer of", "result of")):
                continue
            else:
                out[c.label] = decode(tm, c.type, v)
        chosen = None
        for s in sites:
            hit = next(it) == "true"
            vals = [next(it) for _ in s.args]
            if hit and chosen is None:
                chosen = dict(zip(s.args, vals))
        if chosen is not None:
            types = {p.name: p.type for p in api_decl.params}
            for n, v in chosen.items():
                out[n] = decode(tm, types[n], v)
    except ModelError as exc:
        raise Unsupported(f"could not decode solver model: {exc}") from None
    return out


def summarize(clause: A.Expr) -> str:
    """One-line reading of a failed clause, e.g. ``amt may exceed PAYMENT_LIMIT in env``."""
    cmp = next((x for x in A.walk_expr(clause) if isinstance(x, A.Binary) and x.op in ("<", "<=", ">", ">=")), None)
    if cmp is None:
        return f"{print_expr(clause)} may not hold"
    lo, hi = (cmp.left, cmp.right) if cmp.op in ("<", "<=") else (cmp.right, cmp.left)
    strict = cmp.op in ("<", ">")
    if _is_literal(lo) and not _is_literal(hi):
        word = "may be at most" if strict else "may be below"
        return f"{print_expr(hi)} {word} {print_expr(lo)}"
    word = "may exceed" if not strict else "may reach"
    return f"{print_expr(lo)} {word} {_bound(hi)}"


def _is_literal(e) -> bool:
    return isinstance(e, (A.IntLit, A.DecLit, A.NumLit, A.StrLit))


def _bound(e) -> str:
    if isinstance(e, A.EnvVar):
        return f"{e.name} in env"
    return print_expr(e)


def replay_obligation(tm, action: str, api: str, witness: dict[str, Value]) -> Fault | None:
    """Invoke ``api`` directly with a witness's arguments, env and events; the fault it raises (if any)."""
    decl = tm.apis[api]
    env = EnvRecord({k[len("env."):]: v for k, v in witness.items() if k.startswith("env.")})
    log = EventLog(witness.get("$events", ()))
    args = [witness[p.name] for p in decl.params]
    try:
        Interpreter(tm, apis={api: lambda ctx: None}).invoke_api(api, env, args, log)
    except Fault as f:
        return f
    return None

