"""Solver model values back into runtime values, and runtime values into terms."""

from __future__ import annotations

from ..lang.ast import TypeRef
from ..runtime.values import (
    FALSE, NONE, TRUE, AliasV, DecV, EntityV, IntV, ListV, NoneV, SomeV, StrV, Value, unwrap,
)
from .smt import num, string_lit


class ModelError(ValueError):
    pass


def _int(sx) -> int:
    if isinstance(sx, str):
        return int(sx)
    if isinstance(sx, list) and len(sx) == 2 and sx[0] == "-":
        return -_int(sx[1])
    raise ModelError(f"expected an integer, got {sx!r}")


def _seq_items(sx) -> list:
    if isinstance(sx, list):
        if sx and sx[0] == "seq.++":
            out = []
            for x in sx[1:]:
                out.extend(_seq_items(x))
            return out
        if sx and sx[0] == "seq.unit":
            return [sx[1]]
        if sx and sx[0] == "as" and sx[1] == "seq.empty":
            return []
    if sx == "seq.empty":
        return []
    raise ModelError(f"expected a sequence, got {sx!r}")


def _ctor(sx) -> tuple[str, list]:
    if isinstance(sx, str):
        return sx, []
    if isinstance(sx, list) and sx:
        if sx[0] == "as":
            return _ctor(sx[1])
        if isinstance(sx[0], str):
            return sx[0], sx[1:]
    raise ModelError(f"expected a constructor application, got {sx!r}")


def decode(tm, t: TypeRef, sx) -> Value:
    n = t.name
    if n == "Int":
        return IntV(_int(sx))
    if n == "Decimal":
        return DecV(_int(sx))
    if n == "Bool":
        if sx not in ("true", "false"):
            raise ModelError(f"expected a Bool, got {sx!r}")
        return TRUE if sx == "true" else FALSE
    if n in ("CString", "String"):
        if not (isinstance(sx, tuple) and sx[0] == "#str"):
            raise ModelError(f"expected a string, got {sx!r}")
        return StrV(sx[1], n == "CString")
    if n == "List":
        return ListV(tuple(decode(tm, t.elem, x) for x in _seq_items(sx)))
    if n == "Option":
        head, args = _ctor(sx)
        if head.startswith("none!"):
            return NONE
        if head.startswith("some!"):
            return SomeV(decode(tm, t.elem, args[0]))
        raise ModelError(f"expected an Option, got {sx!r}")
    alias = tm.aliases.get(n)
    if alias is not None:
        return AliasV(n, decode(tm, TypeRef(alias.base), sx), alias.sensitive)
    ent = tm.entities.get(n)
    if ent is not None:
        head, args = _ctor(sx)
        if head != f"mk!{n}" or len(args) != len(ent.fields):
            raise ModelError(f"expected {n}, got {sx!r}")
        return EntityV(n, tuple((f.name, decode(tm, f.type, a)) for f, a in zip(ent.fields, args)))
    raise ModelError(f"cannot decode a value of type {t}")


def decode_events(tm, sx) -> list[EntityV]:
    out = []
    for item in _seq_items(sx):
        head, args = _ctor(item)
        name = head[len("ev!"):]
        out.append(decode(tm, TypeRef(name), args[0]))
    return out


def term_of(tm, enc, v: Value, t: TypeRef):
    """SMT term for a concrete value of type ``t``."""
    v = unwrap(v) if t.name in tm.aliases else v
    base = tm.base(t)
    n = base.name
    if n == "Int":
        return num(v.value)
    if n == "Decimal":
        return num(v.scaled)
    if n == "Bool":
        return "true" if v == TRUE else "false"
    if n in ("CString", "String"):
        return string_lit(v.value)
    if n == "List":
        if not v.items:
            return f"(as seq.empty {enc.sort(base)})"
        units = [("seq.unit", term_of(tm, enc, x, base.elem)) for x in v.items]
        return units[0] if len(units) == 1 else ("seq.++", *units)
    if n == "Option":
        tag = enc.opt_tag(base.elem)
        if isinstance(v, NoneV):
            return f"none!{tag}"
        return (f"some!{tag}", term_of(tm, enc, v.value, base.elem))
    ent = tm.entities[n]
    enc.sort(base)
    if not ent.fields:
        return f"mk!{n}"
    return (f"mk!{n}", *[term_of(tm, enc, v.get(f.name), f.type) for f in ent.fields])
