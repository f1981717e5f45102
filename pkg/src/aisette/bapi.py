"""Type-directed encoding and decoding of values in four wire forms.

* verbose: ``Order{ orderid = 'A53'<OrderId>, amount = 45.50d, ... }``
* minimal: ``Order{ 'A53', 45.50d, '123456789' }`` (declaration order, no alias annotations)
* redacted: verbose with sensitive text masked by ``*`` of equal length
* json: plain JSON objects; aliases erased, big Ints as ``"#n:..."`` strings

The BAPI decoder is a single left-to-right recursive descent driven by the
expected type; tokens are produced on demand, so auxiliary memory is bounded
by the nesting depth.
"""

from __future__ import annotations

import json
import re

from .diagnostics import AisetteError, Span, error
from .lang import ast as A
from .lang.ast import TypeRef
from .lang.checker import TypedModule
from .lang.lexer import tokenize
from .lang.parser import Parser
from .lang.printer import _quote
from .runtime.values import (
    INT_MAX, INT_MIN, NONE, AliasV, BoolV, DecV, EntityV, Fault, IntV, ListV, NoneV, SomeV, StrV, Value, VoidV,
    dec_from_text, dec_text,
)

FORMS = ("verbose", "minimal", "redacted", "json")
MEDIA_TYPES = {
    "application/bapi+verbose": "verbose",
    "application/bapi+min": "minimal",
    "application/json": "json",
}
FORM_MEDIA = {v: k for k, v in MEDIA_TYPES.items()}
JSON_SAFE = 2**53 - 1
BIG = "#n:"
REDACTED = "#redacted"


class DecodeError(AisetteError):
    @property
    def code(self) -> str:
        return self.diagnostics[0].code


def parse_type(text: str) -> TypeRef:
    p = Parser(text, tokenize(text))
    t = p.type_ref()
    p.expect("eof")
    return t


def _as_type(t) -> TypeRef:
    return parse_type(t) if isinstance(t, str) else t


# -- encoding -----------------------------------------------------------------


def encode(tm: TypedModule, value: Value, t, form: str = "verbose") -> str:
    t = _as_type(t)
    if form == "json":
        return to_json_bridge(tm, value, t)
    if form == "redacted":
        return _bapi(tm, redact(value), t, verbose=True, masked=True)
    if form not in ("verbose", "minimal"):
        raise ValueError(f"unknown wire form {form!r}")
    return _bapi(tm, value, t, verbose=form == "verbose", masked=False)


def _bapi(tm: TypedModule, v: Value, t: TypeRef, verbose: bool, masked: bool) -> str:
    name = t.name
    if name == "Option":
        if isinstance(v, NoneV):
            return "none"
        return f"some({_bapi(tm, v.value, t.args[0], verbose, masked)})"
    if name == "List":
        items = ", ".join(_bapi(tm, x, t.args[0], verbose, masked) for x in v.items)
        head = f"List<{t.args[0]}>" if verbose else "List"
        return f"{head}{{ {items} }}" if items else f"{head}{{ }}"
    alias = tm.aliases.get(name)
    if alias is not None:
        if masked and alias.sensitive and not isinstance(v.inner, StrV):
            return REDACTED
        text = _prim(v.inner)
        return f"{text}<{name}>" if verbose else text
    ent = tm.entities.get(name)
    if ent is not None:
        parts = []
        for f, (_, x) in zip(ent.fields, v.fields):
            lit = _bapi(tm, x, f.type, verbose, masked)
            parts.append(f"{f.name} = {lit}" if verbose else lit)
        return f"{name}{{ {', '.join(parts)} }}" if parts else f"{name}{{ }}"
    return _prim(v)


def _prim(v: Value) -> str:
    if isinstance(v, IntV):
        return f"{v.value}i"
    if isinstance(v, DecV):
        return f"{dec_text(v.scaled)}d"
    if isinstance(v, BoolV):
        return "true" if v.value else "false"
    if isinstance(v, StrV):
        return _quote(v.value, "'" if v.cstring else '"')
    if isinstance(v, VoidV):
        return "void"
    raise TypeError(f"not a primitive: {v!r}")


def redact(v: Value) -> Value:
    """Mask every sensitive text leaf with ``*`` of the same length; idempotent."""
    if isinstance(v, AliasV):
        if v.sensitive and isinstance(v.inner, StrV):
            return AliasV(v.alias, StrV("*" * len(v.inner.value), v.inner.cstring), True)
        return v
    if isinstance(v, EntityV):
        return EntityV(v.type, tuple((n, redact(x)) for n, x in v.fields))
    if isinstance(v, ListV):
        return ListV(tuple(redact(x) for x in v.items))
    if isinstance(v, SomeV):
        return SomeV(redact(v.value))
    return v


# -- JSON bridge ----------------------------------------------------------------


def to_json_bridge(tm: TypedModule, value: Value, t) -> str:
    return _json(tm, value, _as_type(t))


def _json(tm: TypedModule, v: Value, t: TypeRef) -> str:
    name = t.name
    if name == "Option":
        if isinstance(v, NoneV):
            return "null"
        inner = _json(tm, v.value, t.args[0])
        # nested options need a marker so some(none) differs from none
        return f'{{"#some": {inner}}}' if t.args[0].name == "Option" else inner
    if name == "List":
        return "[" + ", ".join(_json(tm, x, t.args[0]) for x in v.items) + "]"
    alias = tm.aliases.get(name)
    if alias is not None:
        return _json(tm, v.inner, TypeRef(alias.base))
    ent = tm.entities.get(name)
    if ent is not None:
        parts = [f"{json.dumps(f.name)}: {_json(tm, x, f.type)}" for f, (_, x) in zip(ent.fields, v.fields)]
        return "{" + ", ".join(parts) + "}"
    if isinstance(v, IntV):
        return str(v.value) if abs(v.value) <= JSON_SAFE else json.dumps(f"{BIG}{v.value}")
    if isinstance(v, DecV):
        text = dec_text(v.scaled)
        # JSON numbers beyond 15 significant digits lose precision in common readers
        return text if len(text.lstrip("-").replace(".", "").lstrip("0")) <= 15 else json.dumps(BIG + text)
    if isinstance(v, BoolV):
        return "true" if v.value else "false"
    if isinstance(v, StrV):
        return json.dumps(v.value, ensure_ascii=False)
    if isinstance(v, VoidV):
        return "null"
    raise TypeError(f"cannot encode {v!r}")


class _Num(str):
    """JSON number kept as its exact source text."""


def from_json_bridge(tm: TypedModule, text: str, t) -> Value:
    t = _as_type(t)
    try:
        data = json.loads(text, parse_float=_Num, parse_int=_Num, parse_constant=_reject_constant)
    except (json.JSONDecodeError, ValueError) as exc:
        pos = getattr(exc, "pos", 0)
        raise DecodeError([error("syntax", f"invalid JSON: {exc}", _span_at(text, pos))]) from None
    return _from_json(tm, data, t, "$", text)


def _reject_constant(name):
    raise ValueError(f"{name} is not allowed")


def _jerr(code: str, msg: str, path: str, text: str):
    return DecodeError([error(code, f"{path}: {msg}", _span_at(text, 0))])


def _from_json(tm: TypedModule, d, t: TypeRef, path: str, text: str) -> Value:
    name = t.name
    if name == "Option":
        if d is None:
            return NONE
        if t.args[0].name == "Option":
            if not (isinstance(d, dict) and set(d) == {"#some"}):
                raise _jerr("type", "nested option needs {\"#some\": ...}", path, text)
            d = d["#some"]
        return SomeV(_from_json(tm, d, t.args[0], path, text))
    if name == "List":
        if not isinstance(d, list):
            raise _jerr("type", f"expected a JSON array for {t}", path, text)
        return ListV(tuple(_from_json(tm, x, t.args[0], f"{path}[{i}]", text) for i, x in enumerate(d)))
    alias = tm.aliases.get(name)
    if alias is not None:
        inner = _from_json(tm, d, TypeRef(alias.base), path, text)
        return _wrap_alias(tm, name, inner, lambda code, msg: _jerr(code, msg, path, text))
    ent = tm.entities.get(name)
    if ent is not None:
        if not isinstance(d, dict):
            raise _jerr("type", f"expected a JSON object for {name}", path, text)
        extra = set(d) - set(ent.field_names)
        if extra:
            raise _jerr("field-count", f"{name} has no field(s) {', '.join(sorted(extra))}", path, text)
        vals = []
        for f in ent.fields:
            if f.name not in d:
                if f.type.name == "Option":
                    vals.append(NONE)
                    continue
                raise _jerr("field-count", f"{name} is missing field {f.name!r}", path, text)
            vals.append(_from_json(tm, d[f.name], f.type, f"{path}.{f.name}", text))
        return _build_entity(tm, name, vals, lambda code, msg: _jerr(code, msg, path, text))
    if name == "Int":
        s = _json_num(d, path, text)
        if not re.fullmatch(r"-?\d+", s):
            raise _jerr("type", f"expected an integer, found {s}", path, text)
        return _checked_int(int(s), lambda code, msg: _jerr(code, msg, path, text))
    if name == "Decimal":
        s = _json_num(d, path, text)
        try:
            return DecV(_checked_dec(s))
        except ValueError as exc:
            raise _jerr("type", str(exc), path, text) from None
    if name == "Bool":
        if not isinstance(d, bool):
            raise _jerr("type", "expected true or false", path, text)
        return BoolV(d)
    if name in ("CString", "String"):
        if not isinstance(d, str) or isinstance(d, _Num):
            raise _jerr("type", f"expected a JSON string for {name}", path, text)
        return _string(d, name == "CString", lambda code, msg: _jerr(code, msg, path, text))
    raise _jerr("type", f"unknown type {name}", path, text)


def _json_num(d, path, text) -> str:
    if isinstance(d, _Num):
        return str(d)
    if isinstance(d, str) and d.startswith(BIG):
        return d[len(BIG):]
    raise _jerr("type", f"expected a number, found {json.dumps(d)}", path, text)


def _checked_dec(s: str) -> int:
    if "e" in s.lower():
        raise ValueError(f"exponent notation is not supported: {s}")
    scaled = dec_from_text(s)
    if not INT_MIN <= scaled <= INT_MAX:
        raise ValueError("Decimal out of range")
    return scaled


def _checked_int(n: int, fail) -> IntV:
    if not INT_MIN <= n <= INT_MAX:
        raise fail("overflow", f"Int {n} out of range")
    return IntV(n)


def _string(s: str, cstring: bool, fail) -> StrV:
    if cstring and any(not 0x20 <= ord(c) <= 0x7E for c in s):
        raise fail("type", "CString holds printable ASCII only")
    return StrV(s, cstring)


def _wrap_alias(tm: TypedModule, name: str, inner: Value, fail) -> AliasV:
    alias = tm.aliases[name]
    if alias.compiled is not None and not alias.compiled.matches(inner.value):
        shown = "*" * len(str(inner.value)) if alias.sensitive else inner.value
        raise fail("constraint", f"{shown!r} does not match {name} pattern {alias.regex}")
    return AliasV(name, inner, alias.sensitive)


def _build_entity(tm: TypedModule, name: str, vals, fail) -> EntityV:
    from .runtime.interp import Interpreter

    try:
        return Interpreter(tm).construct_entity(name, vals)
    except Fault as f:
        raise fail(f.kind, f.message) from None


# -- BAPI decoding ----------------------------------------------------------------

_PUNCT = set("{}(),=<>-")
_NUM = re.compile(r"\d+(\.\d+)?([id])?")
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*(::[A-Za-z_][A-Za-z0-9_]*)*")


class _Tok:
    __slots__ = ("kind", "text", "value", "pos")

    def __init__(self, kind, text, value, pos):
        self.kind, self.text, self.value, self.pos = kind, text, value, pos

    def __repr__(self):
        return f"{self.kind}:{self.text}"


def _span_at(text: str, pos: int) -> Span:
    pos = max(0, min(pos, len(text)))
    line = text.count("\n", 0, pos) + 1
    col = pos - (text.rfind("\n", 0, pos) + 1) + 1
    return Span(line, col, pos, min(pos + 1, len(text)) if text else pos)


class _Reader:
    """On-demand tokenizer with a two-token window."""

    def __init__(self, text: str):
        self.text = text
        self.i = 0
        self.buf: list[_Tok] = []

    def fail(self, code: str, msg: str, pos: int | None = None):
        p = self.peek().pos if pos is None else pos
        return DecodeError([error(code, msg, _span_at(self.text, p))])

    def _scan(self) -> _Tok:
        s, i = self.text, self.i
        while i < len(s) and s[i] in " \t\r\n":
            i += 1
        if i >= len(s):
            self.i = i
            return _Tok("eof", "", None, i)
        ch = s[i]
        if ch in _PUNCT:
            self.i = i + 1
            return _Tok(ch, ch, None, i)
        if "0" <= ch <= "9":
            m = _NUM.match(s, i)
            self.i = m.end()
            return _Tok("num", m.group(0), (m.group(0).rstrip("id"), m.group(2)), i)
        if ch in "'\"":
            return self._string(ch, i)
        if s.startswith(REDACTED, i):
            self.i = i + len(REDACTED)
            return _Tok("redacted", REDACTED, None, i)
        m = _IDENT.match(s, i)
        if m:
            self.i = m.end()
            return _Tok("ident", m.group(0), m.group(0), i)
        raise DecodeError([error("syntax", f"unexpected character {ch!r}", _span_at(s, i))])

    def _string(self, q: str, start: int) -> _Tok:
        s = self.text
        i = start + 1
        out = []
        while True:
            if i >= len(s):
                raise DecodeError([error("syntax", "unterminated string", _span_at(s, start))])
            ch = s[i]
            if ch == q:
                break
            if ch == "\\":
                i += 1
                if i >= len(s):
                    continue
                esc = s[i]
                if esc == "u" and s.startswith("{", i + 1):
                    end = s.find("}", i)
                    try:
                        out.append(chr(int(s[i + 2:end], 16)))
                    except ValueError:
                        raise DecodeError([error("syntax", "malformed \\u{...} escape", _span_at(s, i))]) from None
                    i = end + 1
                    continue
                out.append({"n": "\n", "t": "\t", "r": "\r"}.get(esc, esc))
                i += 1
                continue
            out.append(ch)
            i += 1
        self.i = i + 1
        return _Tok("cstr" if q == "'" else "str", s[start:self.i], "".join(out), start)

    def peek(self, k: int = 0) -> _Tok:
        while len(self.buf) <= k:
            self.buf.append(self._scan())
        return self.buf[k]

    def take(self) -> _Tok:
        t = self.peek()
        self.buf.pop(0)
        return t

    def expect(self, kind: str, what: str | None = None) -> _Tok:
        t = self.peek()
        if t.kind != kind:
            found = "end of input" if t.kind == "eof" else repr(t.text)
            raise self.fail("syntax", f"expected {what or repr(kind)}, found {found}")
        return self.take()

    def accept(self, kind: str) -> bool:
        if self.peek().kind == kind:
            self.take()
            return True
        return False


class _Decoder:
    def __init__(self, tm: TypedModule, text: str):
        self.tm = tm
        self.r = _Reader(text)

    def value(self, t: TypeRef) -> Value:
        r = self.r
        name = t.name
        if name == "Option":
            tok = r.peek()
            if tok.kind == "ident" and tok.text == "none":
                r.take()
                return NONE
            if tok.kind == "ident" and tok.text == "some":
                r.take()
                r.expect("(")
                v = self.value(t.args[0])
                r.expect(")")
                return SomeV(v)
            raise r.fail("syntax", f"expected none or some(...) for {t}")
        if name == "List":
            tok = r.expect("ident", "List{...}")
            if tok.text != "List":
                raise r.fail("type", f"expected a List, found {tok.text}", tok.pos)
            if r.peek().kind == "<":
                pos = r.peek().pos
                r.take()
                et = self.type_text()
                r.expect(">")
                if et != t.args[0]:
                    raise r.fail("type", f"List element type {et} where {t.args[0]} was expected", pos)
            r.expect("{")
            items = []
            while r.peek().kind != "}":
                items.append(self.value(t.args[0]))
                if not r.accept(","):
                    break
            r.expect("}")
            return ListV(tuple(items))
        alias = self.tm.aliases.get(name)
        if alias is not None:
            pos = r.peek().pos
            inner = self.value(TypeRef(alias.base))
            if r.peek().kind == "<":
                r.take()
                ann = r.expect("ident", "an alias name").text
                r.expect(">")
                if ann != name:
                    raise r.fail("type", f"annotation <{ann}> where {name} was expected", pos)
            return _wrap_alias(self.tm, name, inner, lambda code, msg: r.fail(code, msg, pos))
        ent = self.tm.entities.get(name)
        if ent is not None:
            return self.entity(ent)
        return self.primitive(name)

    def type_text(self) -> TypeRef:
        r = self.r
        name = r.expect("ident", "a type name").text
        args = []
        if r.accept("<"):
            args.append(self.type_text())
            while r.accept(","):
                args.append(self.type_text())
            r.expect(">")
        return TypeRef(name, tuple(args))

    def entity(self, ent: A.EntityDecl) -> EntityV:
        r = self.r
        start = r.peek().pos
        tok = r.expect("ident", f"{ent.name}{{...}}")
        if tok.text != ent.name:
            raise r.fail("type", f"expected {ent.name}, found {tok.text}", tok.pos)
        r.expect("{")
        named = r.peek().kind == "ident" and r.peek(1).kind == "=" and r.peek().text in ent.field_names
        if named:
            got: dict[str, Value] = {}
            while r.peek().kind != "}":
                ftok = r.expect("ident", "a field name")
                ft = ent.field_type(ftok.text)
                if ft is None:
                    raise r.fail("field-count", f"{ent.name} has no field {ftok.text!r}", ftok.pos)
                if ftok.text in got:
                    raise r.fail("field-count", f"field {ftok.text!r} given twice", ftok.pos)
                r.expect("=")
                got[ftok.text] = self.value(ft)
                if not r.accept(","):
                    break
            end = r.expect("}", "'}'")
            missing = [f for f in ent.field_names if f not in got]
            if missing:
                raise r.fail("field-count", f"{ent.name} is missing field(s) {', '.join(missing)}", end.pos)
            vals = [got[f] for f in ent.field_names]
        else:
            vals = []
            while r.peek().kind != "}":
                if len(vals) == len(ent.fields):
                    raise r.fail("field-count", f"{ent.name} takes {len(ent.fields)} field(s), more given")
                vals.append(self.value(ent.fields[len(vals)].type))
                if not r.accept(","):
                    break
            end = r.expect("}", "'}'")
            if len(vals) != len(ent.fields):
                raise r.fail("field-count", f"{ent.name} takes {len(ent.fields)} field(s), {len(vals)} given", end.pos)
        return _build_entity(self.tm, ent.name, vals, lambda code, msg: r.fail(code, msg, start))

    def primitive(self, name: str) -> Value:
        r = self.r
        tok = r.peek()
        if tok.kind == "redacted":
            raise r.fail("redacted", "redacted values cannot be decoded")
        if name in ("Int", "Decimal"):
            neg = r.accept("-")
            tok = r.expect("num", f"a {name} literal")
            digits, suffix = tok.value
            want = "i" if name == "Int" else "d"
            if suffix != want:
                raise r.fail("type", f"{name} literal needs the '{want}' suffix: {tok.text}", tok.pos)
            text = ("-" if neg else "") + digits
            if name == "Int":
                return _checked_int(int(text), lambda code, msg: r.fail(code, msg, tok.pos))
            try:
                return DecV(_checked_dec(text))
            except ValueError as exc:
                raise r.fail("type", str(exc), tok.pos) from None
        if name == "Bool":
            tok = r.expect("ident", "true or false")
            if tok.text not in ("true", "false"):
                raise r.fail("type", f"expected true or false, found {tok.text}", tok.pos)
            return BoolV(tok.text == "true")
        if name in ("CString", "String"):
            kind = "cstr" if name == "CString" else "str"
            quote = "'...'" if kind == "cstr" else '"..."'
            tok = r.expect(kind, f"a {name} literal {quote}")
            return _string(tok.value, kind == "cstr", lambda code, msg: r.fail(code, msg, tok.pos))
        raise r.fail("type", f"unknown type {name}")


def _looks_json(text: str) -> bool:
    s = text.lstrip()
    if not s:
        return False
    if s[0] in "{[":
        return True
    try:
        json.loads(s)
    except ValueError:
        return False
    return True


def decode(tm: TypedModule, text: str, t, form: str | None = None) -> Value:
    """Decode ``text`` as a value of type ``t``. ``form`` None picks JSON or BAPI by shape."""
    t = _as_type(t)
    if form == "json" or (form is None and _looks_json(text)):
        return from_json_bridge(tm, text, t)
    d = _Decoder(tm, text)
    v = d.value(t)
    d.r.expect("eof", "end of input")
    return v


_LENIENT_NUM = re.compile(r"\s*(-?\d+(?:\.\d+)?)([id])?\s*")


def decode_lenient(tm: TypedModule, text: str, t) -> Value:
    """Decode agent output: framed BAPI/JSON first, then bare primitives for primitive shapes.

    ``"22.75"`` shaped as ``Option<USD>`` gives ``some(22.75d<USD>)``.
    """
    t = _as_type(t)
    try:
        return decode(tm, text, t)
    except DecodeError as first:
        target = t.args[0] if t.name == "Option" else t
        base = tm.base(target)
        if base.name not in A.PRIMITIVES:
            raise
        raw = text.strip()
        fail = lambda code, msg: DecodeError([error(code, msg, _span_at(text, 0))])  # noqa: E731
        if base.name in ("Int", "Decimal"):
            m = _LENIENT_NUM.fullmatch(raw)
            if not m or (base.name == "Int" and "." in m.group(1)):
                raise first
            inner = _checked_int(int(m.group(1)), fail) if base.name == "Int" else DecV(_checked_dec(m.group(1)))
        elif base.name == "Bool":
            if raw not in ("true", "false"):
                raise first
            inner = BoolV(raw == "true")
        else:
            inner = _string(raw, base.name == "CString", fail)
        v = _wrap_alias(tm, target.name, inner, fail) if target.name in tm.aliases else inner
        return SomeV(v) if t.name == "Option" else v
