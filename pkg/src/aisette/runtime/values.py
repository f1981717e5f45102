"""Runtime values and faults.

Every value class is a frozen dataclass, so equality is structural and values
can key memo tables.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..diagnostics import Span
from ..lang.ast import TypeRef

INT_MAX = 2**63 - 1
INT_MIN = -INT_MAX
DEC_SCALE = 10_000
DEC_DIGITS = 4


class Value:
    __slots__ = ()


@dataclass(frozen=True)
class IntV(Value):
    value: int


@dataclass(frozen=True)
class DecV(Value):
    """Exact decimal held as an integer scaled by 10**4."""

    scaled: int

    def __str__(self) -> str:
        return dec_text(self.scaled)


@dataclass(frozen=True)
class BoolV(Value):
    value: bool


@dataclass(frozen=True)
class StrV(Value):
    value: str
    cstring: bool = False


@dataclass(frozen=True)
class AliasV(Value):
    alias: str
    inner: Value
    sensitive: bool = False


@dataclass(frozen=True)
class EntityV(Value):
    type: str
    fields: tuple[tuple[str, Value], ...]

    def get(self, name: str) -> Value:
        for n, v in self.fields:
            if n == name:
                return v
        raise KeyError(name)


@dataclass(frozen=True)
class ListV(Value):
    items: tuple[Value, ...] = ()


@dataclass(frozen=True)
class NoneV(Value):
    pass


@dataclass(frozen=True)
class SomeV(Value):
    value: Value


@dataclass(frozen=True)
class VoidV(Value):
    pass


NONE = NoneV()
VOID = VoidV()
TRUE = BoolV(True)
FALSE = BoolV(False)


class Fault(Exception):
    """A runtime fault: contract, invariant, overflow, hole, env or sandbox failure.

    ``kind`` is one of precondition, postcondition, invariant, overflow,
    division-by-zero, constraint, unfilled-hole, type, shape, env-missing,
    permission-denied, user, assert.
    """

    def __init__(self, kind: str, message: str, clause: str | None = None, span: Span | None = None, owner: str | None = None):
        self.kind = kind
        self.message = message
        self.clause = clause
        self.span = span
        self.owner = owner
        super().__init__(f"{kind}: {message}")

    def site(self) -> tuple:
        """(kind, line, col) identifying where the fault was raised."""
        return (self.kind, self.span.line if self.span else None, self.span.col if self.span else None)

    def to_json(self) -> dict:
        out = {"kind": self.kind, "message": self.message}
        if self.clause is not None:
            out["clause"] = self.clause
        if self.span is not None:
            out["span"] = self.span.to_json()
        if self.owner is not None:
            out["owner"] = self.owner
        return out


def check_int(v: int, span: Span | None = None) -> IntV:
    if not INT_MIN <= v <= INT_MAX:
        raise Fault("overflow", "Int arithmetic overflow", span=span)
    return IntV(v)


def check_dec(scaled: int, span: Span | None = None) -> DecV:
    if not INT_MIN <= scaled <= INT_MAX:
        raise Fault("overflow", "Decimal arithmetic overflow", span=span)
    return DecV(scaled)


def dec_from_text(text: str) -> int:
    """Scaled integer for decimal text such as ``-45.50``; raises ValueError."""
    s = text.strip()
    neg = s.startswith("-")
    if s[:1] in "+-":
        s = s[1:]
    whole, _, frac = s.partition(".")
    ascii_digits = whole.isascii() and whole.isdigit() and (not frac or (frac.isascii() and frac.isdigit()))
    if not ascii_digits or len(frac) > DEC_DIGITS or (_ and not frac):
        raise ValueError(f"not a decimal: {text!r}")
    scaled = int(whole) * DEC_SCALE + int(frac.ljust(DEC_DIGITS, "0") or "0")
    return -scaled if neg else scaled


def dec_text(scaled: int) -> str:
    """Canonical text: at least two fractional digits, trailing zeros beyond that dropped."""
    sign = "-" if scaled < 0 else ""
    whole, frac = divmod(abs(scaled), DEC_SCALE)
    digits = f"{frac:0{DEC_DIGITS}d}".rstrip("0").ljust(2, "0")
    return f"{sign}{whole}.{digits}"


def trunc_div(a: int, b: int) -> int:
    q = abs(a) // abs(b)
    return q if (a < 0) == (b < 0) else -q


def unwrap(v: Value) -> Value:
    """Strip alias wrappers down to the primitive."""
    while isinstance(v, AliasV):
        v = v.inner
    return v


def contains_sensitive(v: Value) -> bool:
    if isinstance(v, AliasV):
        return v.sensitive or contains_sensitive(v.inner)
    if isinstance(v, EntityV):
        return any(contains_sensitive(x) for _, x in v.fields)
    if isinstance(v, ListV):
        return any(contains_sensitive(x) for x in v.items)
    if isinstance(v, SomeV):
        return contains_sensitive(v.value)
    return False


def sensitive_leaves(v: Value) -> list[str]:
    """Text of every sensitive leaf in ``v`` (used by leak checks)."""
    out: list[str] = []

    def walk(x: Value, hot: bool) -> None:
        if isinstance(x, AliasV):
            walk(x.inner, hot or x.sensitive)
        elif isinstance(x, EntityV):
            for _, y in x.fields:
                walk(y, hot)
        elif isinstance(x, ListV):
            for y in x.items:
                walk(y, hot)
        elif isinstance(x, SomeV):
            walk(x.value, hot)
        elif hot:
            out.append(x.value if isinstance(x, StrV) else str(x.value if isinstance(x, IntV) else x))

    walk(v, False)
    return out


def py(v: Value):
    """Plain Python rendering for tests and debugging (aliases erased)."""
    v = unwrap(v)
    if isinstance(v, (IntV, BoolV, StrV)):
        return v.value
    if isinstance(v, DecV):
        return dec_text(v.scaled)
    if isinstance(v, EntityV):
        return {n: py(x) for n, x in v.fields}
    if isinstance(v, ListV):
        return [py(x) for x in v.items]
    if isinstance(v, SomeV):
        return py(v.value)
    return None


def conforms(tm, v: Value, t) -> bool:
    """Structural check that ``v`` is a well-formed value of type ``t`` in module ``tm``."""
    name = t.name
    if name == "Int":
        return isinstance(v, IntV) and INT_MIN <= v.value <= INT_MAX
    if name == "Decimal":
        return isinstance(v, DecV) and INT_MIN <= v.scaled <= INT_MAX
    if name == "Bool":
        return isinstance(v, BoolV)
    if name == "CString":
        return isinstance(v, StrV) and v.cstring and all(0x20 <= ord(c) <= 0x7E for c in v.value)
    if name == "String":
        return isinstance(v, StrV) and not v.cstring
    if name == "Void":
        return isinstance(v, VoidV)
    if name == "List":
        return isinstance(v, ListV) and all(conforms(tm, x, t.args[0]) for x in v.items)
    if name == "Option":
        return isinstance(v, NoneV) or (isinstance(v, SomeV) and conforms(tm, v.value, t.args[0]))
    alias = tm.aliases.get(name)
    if alias is not None:
        if not (isinstance(v, AliasV) and v.alias == name and v.sensitive == alias.sensitive):
            return False
        if not conforms(tm, v.inner, TypeRef(alias.base)):
            return False
        return alias.compiled is None or alias.compiled.matches(v.inner.value)
    ent = tm.entities.get(name)
    if ent is not None:
        if not isinstance(v, EntityV) or v.type != name or len(v.fields) != len(ent.fields):
            return False
        return all(n == f.name and conforms(tm, x, f.type) for (n, x), f in zip(v.fields, ent.fields))
    return False
