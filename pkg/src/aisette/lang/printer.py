"""Pretty-printer whose output parses back to a structurally equal module."""

from __future__ import annotations

from . import ast as A

_PREC = {"||": 1, "&&": 2, "===": 3, "!==": 3, "<": 4, "<=": 4, ">": 4, ">=": 4, "+": 5, "-": 5, "*": 6, "/": 6, "%": 6}
_UNARY_PREC = 7


def _quote(s: str, q: str) -> str:
    out = []
    for ch in s:
        if ch in (q, "\\"):
            out.append("\\" + ch)
        elif ch == "\n":
            out.append("\\n")
        elif ch == "\t":
            out.append("\\t")
        elif ch == "\r":
            out.append("\\r")
        elif ord(ch) < 0x20:
            out.append(f"\\u{{{ord(ch):x}}}")
        else:
            out.append(ch)
    return q + "".join(out) + q


def _ann(alias):
    return f"<{alias}>" if alias else ""


def print_expr(e: A.Expr, prec: int = 0) -> str:
    if isinstance(e, A.IntLit):
        return f"{e.value}i{_ann(e.alias)}"
    if isinstance(e, A.DecLit):
        return f"{e.text}d{_ann(e.alias)}"
    if isinstance(e, A.NumLit):
        return f"{e.text}{_ann(e.alias)}"
    if isinstance(e, A.StrLit):
        return _quote(e.value, "'" if e.cstring else '"') + _ann(e.alias)
    if isinstance(e, A.BoolLit):
        return "true" if e.value else "false"
    if isinstance(e, A.NoneLit):
        return "none"
    if isinstance(e, A.SomeExpr):
        return f"some({print_expr(e.expr)})"
    if isinstance(e, A.Var):
        return e.name
    if isinstance(e, A.EnvVar):
        return f"env.{e.name}"
    if isinstance(e, A.Special):
        return f"${e.name}"
    if isinstance(e, A.Unary):
        text = e.op + print_expr(e.expr, _UNARY_PREC)
        return f"({text})" if prec > _UNARY_PREC else text
    if isinstance(e, A.Binary):
        p = _PREC[e.op]
        # left-associative: the right operand needs parens at equal precedence
        text = f"{print_expr(e.left, p)} {e.op} {print_expr(e.right, p + 1)}"
        return f"({text})" if prec > p else text
    if isinstance(e, A.IfExpr):
        text = f"if ({print_expr(e.cond)}) then {print_expr(e.then)} else {print_expr(e.else_)}"
        return f"({text})" if prec > 0 else text
    if isinstance(e, A.Access):
        return f"{print_expr(e.expr, 99)}.{e.name}"
    if isinstance(e, A.Construct):
        parts = [f"{n} = {print_expr(x)}" if n else print_expr(x) for n, x in e.fields]
        if e.partial:
            return f"{e.type}{{|{', '.join(parts)}|}}"
        return f"{e.type}{{{', '.join(parts)}}}"
    if isinstance(e, A.ListLit):
        return f"List<{e.elem}>{{{', '.join(print_expr(x) for x in e.items)}}}"
    if isinstance(e, A.Method):
        targ = f"<{e.targ}>" if e.targ else ""
        args = ", ".join(_print_arg(a) for a in e.args)
        return f"{print_expr(e.receiver, 99)}.{e.name}{targ}({args})"
    if isinstance(e, A.Call):
        return f"{e.name}({', '.join(print_expr(x) for x in e.args)})"
    if isinstance(e, A.ApiCall):
        args = [_print_env(e.env)] + [print_expr(x) for x in e.args]
        return f"api {e.name}({', '.join(args)})"
    if isinstance(e, A.AgentCall):
        args = [_print_env(e.env), print_expr(e.input), print_expr(e.prompt)]
        return f"agent {e.name}<{e.shape}>({', '.join(args)})"
    if isinstance(e, A.EventsContains):
        return f"$events.contains({print_expr(e.pattern)})"
    if isinstance(e, A.Hole):
        text = f"/** {e.doc} */ " if e.doc else ""
        text += f"?{e.name}"
        if e.examples:
            text += "(examples = true)"
        if e.type is not None:
            text += f" -> {e.type}"
        return f"({text})" if prec > 0 and e.type is not None else text
    if isinstance(e, A.Fail):
        return f"fail({print_expr(e.message)})"
    raise TypeError(f"cannot print {type(e).__name__}")


def _print_arg(a) -> str:
    if isinstance(a, A.Lambda):
        return f"{a.kind}({a.param}) => {print_expr(a.body)}"
    return print_expr(a)


def _print_env(env: A.EnvExpr) -> str:
    if env.kind == "spread":
        return "env{...}"
    return "env{" + ", ".join(f"{n} = {print_expr(x)}" for n, x in env.bindings) + "}"


def _block(stmts, indent: int) -> list[str]:
    pad = "  " * indent
    out = []
    for s in stmts:
        if isinstance(s, A.VarDecl):
            kw = "var" if s.mutable else "let"
            ty = f": {s.type}" if s.type else ""
            out.append(f"{pad}{kw} {s.name}{ty} = {print_expr(s.expr)};")
        elif isinstance(s, A.Assign):
            out.append(f"{pad}{s.name} = {print_expr(s.expr)};")
        elif isinstance(s, A.If):
            out.extend(_if(s, indent, pad))
        elif isinstance(s, A.Return):
            out.append(f"{pad}return;" if s.expr is None else f"{pad}return {print_expr(s.expr)};")
        elif isinstance(s, A.Assert):
            out.append(f"{pad}assert {print_expr(s.expr)};")
        elif isinstance(s, A.ExprStmt):
            out.append(f"{pad}{print_expr(s.expr)};")
    return out


def _if(s: A.If, indent: int, lead: str) -> list[str]:
    pad = "  " * indent
    out = [f"{lead}if ({print_expr(s.cond)}) {{"] + _block(s.then, indent + 1)
    if s.else_ is None:
        out.append(pad + "}")
    elif len(s.else_) == 1 and isinstance(s.else_[0], A.If):
        out.extend(_if(s.else_[0], indent, pad + "} else "))
    else:
        out.append(pad + "} else {")
        out.extend(_block(s.else_, indent + 1))
        out.append(pad + "}")
    return out


def _doc(doc) -> list[str]:
    if not doc:
        return []
    return ["/**"] + [f" * {line}" if line else " *" for line in doc.splitlines()] + [" */"]


def _params(ps) -> str:
    return ", ".join(f"{p.name}: {p.type}" for p in ps)


def _env(ps) -> list[str]:
    if not ps:
        return []
    return ["  env={" + ", ".join(f"{p.name}: {p.type}" for p in ps) + "}"]


def _clauses(decl) -> list[str]:
    out = [f"  requires {print_expr(c.expr)};" for c in decl.requires]
    out += [f"  ensures {print_expr(c.expr)};" for c in decl.ensures]
    return out


def _body(body) -> list[str]:
    if isinstance(body, A.Hole):
        return ["{", f"  {print_expr(body)};", "}"]
    return ["{"] + _block(body, 1) + ["}"]


def print_module(m: A.SourceModule) -> str:
    chunks: list[list[str]] = []
    for a in m.aliases:
        lines = _doc(a.doc)
        kw = "sensitive type" if a.sensitive else "type"
        rx = f" of {a.regex}" if a.regex else ""
        lines.append(f"{kw} {a.name} = {a.base}{rx};")
        chunks.append(lines)
    for e in m.entities:
        lines = _doc(e.doc) + [f"entity {e.name} {{"]
        lines += [f"  field {f.name}: {f.type};" for f in e.fields]
        lines += [f"  invariant {print_expr(c.expr)};" for c in e.invariants]
        chunks.append(lines + ["}"])
    for api in m.apis:
        ret = f": {api.ret}" if api.ret else ""
        lines = _doc(api.doc) + [f"api {api.name}({_params(api.params)}){ret}"] + _env(api.env)
        if api.permissions:
            lines.append("  permissions={" + ", ".join(f"\\{g}\\" for g in api.permissions) + "}")
        lines += _clauses(api)
        lines += [";"] if api.body is None else _body(api.body)
        chunks.append(lines)
    for ag in m.agents:
        env = " env={" + ", ".join(f"{p.name}: {p.type}" for p in ag.env) + "}"
        chunks.append(_doc(ag.doc) + [f"agent {ag.name}{env};"])
    for f in m.functions:
        ret = f": {f.ret}" if f.ret else ""
        lines = _doc(f.doc) + [f"{f.kind} {f.name}({_params(f.params)}){ret}"] + _env(f.env) + _clauses(f)
        chunks.append(lines + _body(f.body))
    for t in m.chktests:
        ret = f": {t.ret}" if t.ret else ""
        lines = _doc(t.doc) + [f"chktest {t.name}({_params(t.params)}){ret}"] + _clauses(t)
        chunks.append(lines + _body(t.body))
    return "\n\n".join("\n".join(c) for c in chunks) + "\n"
