"""SMT-LIB terms as nested tuples, with a printer, light simplification and an s-expression reader."""

from __future__ import annotations

# A term is an atom (str) or a tuple ``(head, *args)``. Two heads are special:
# ("let", ((name, term), ...), body) and ("forall", ((name, sort), ...), body).
Term = object

TRUE = "true"
FALSE = "false"


def show(t: Term) -> str:
    if isinstance(t, str):
        return t
    head = t[0]
    if head == "let":
        binds = " ".join(f"({n} {show(v)})" for n, v in t[1])
        return f"(let ({binds}) {show(t[2])})"
    if head == "forall":
        binds = " ".join(f"({n} {s})" for n, s in t[1])
        return f"(forall ({binds}) {show(t[2])})"
    return "(" + " ".join(show(x) for x in t) + ")"


def num(n: int) -> str:
    return str(n) if n >= 0 else f"(- {-n})"


def string_lit(s: str) -> str:
    out = []
    for ch in s:
        c = ord(ch)
        if ch == '"':
            out.append('""')
        elif 0x20 <= c <= 0x7E and ch != "\\":
            out.append(ch)
        else:
            out.append(f"\\u{{{c:x}}}")
    return '"' + "".join(out) + '"'


def and_(*xs: Term) -> Term:
    parts = []
    for x in xs:
        if x == TRUE:
            continue
        if x == FALSE:
            return FALSE
        if isinstance(x, tuple) and x[0] == "and":
            parts.extend(x[1:])
        else:
            parts.append(x)
    if not parts:
        return TRUE
    return parts[0] if len(parts) == 1 else ("and", *parts)


def or_(*xs: Term) -> Term:
    parts = []
    for x in xs:
        if x == FALSE:
            continue
        if x == TRUE:
            return TRUE
        if isinstance(x, tuple) and x[0] == "or":
            parts.extend(x[1:])
        else:
            parts.append(x)
    if not parts:
        return FALSE
    return parts[0] if len(parts) == 1 else ("or", *parts)


def not_(x: Term) -> Term:
    if x == TRUE:
        return FALSE
    if x == FALSE:
        return TRUE
    if isinstance(x, tuple) and x[0] == "not":
        return x[1]
    return ("not", x)


def implies(a: Term, b: Term) -> Term:
    if a == TRUE:
        return b
    if a == FALSE or b == TRUE:
        return TRUE
    return ("=>", a, b)


def ite(c: Term, a: Term, b: Term) -> Term:
    if c == TRUE or a == b:
        return a
    if c == FALSE:
        return b
    return ("ite", c, a, b)


def atoms(t: Term):
    """Every atom in ``t`` (let-bound names included)."""
    if isinstance(t, str):
        yield t
        return
    if t[0] in ("let", "forall"):
        for n, v in t[1]:
            yield n
            if t[0] == "let":
                yield from atoms(v)
        yield from atoms(t[2])
        return
    for x in t:
        yield from atoms(x)


# -- reading solver output ------------------------------------------------------


class SexpError(ValueError):
    pass


def read_sexps(text: str) -> list:
    """Parse every s-expression in ``text``. Strings come back as ``("#str", value)``."""
    out = []
    i = 0
    n = len(text)

    def parse(i):
        while i < n and text[i].isspace():
            i += 1
        if i >= n:
            raise SexpError("unexpected end of solver output")
        ch = text[i]
        if ch == "(":
            items = []
            i += 1
            while True:
                while i < n and text[i].isspace():
                    i += 1
                if i >= n:
                    raise SexpError("unbalanced parentheses in solver output")
                if text[i] == ")":
                    return items, i + 1
                item, i = parse(i)
                items.append(item)
        if ch == ")":
            raise SexpError("unexpected ')' in solver output")
        if ch == '"':
            j = i + 1
            buf = []
            while True:
                if j >= n:
                    raise SexpError("unterminated string in solver output")
                if text[j] == '"':
                    if j + 1 < n and text[j + 1] == '"':
                        buf.append('"')
                        j += 2
                        continue
                    break
                buf.append(text[j])
                j += 1
            return ("#str", _unescape("".join(buf))), j + 1
        if ch == "|":
            j = text.index("|", i + 1)
            return text[i + 1:j], j + 1
        j = i
        while j < n and not text[j].isspace() and text[j] not in "()":
            j += 1
        return text[i:j], j

    while True:
        while i < n and text[i].isspace():
            i += 1
        if i >= n:
            return out
        item, i = parse(i)
        out.append(item)


def _unescape(s: str) -> str:
    out = []
    i = 0
    while i < len(s):
        if s.startswith("\\u{", i):
            j = s.index("}", i)
            out.append(chr(int(s[i + 3:j], 16)))
            i = j + 1
        elif s.startswith("\\u", i) and i + 6 <= len(s) and all(c in "0123456789abcdefABCDEF" for c in s[i + 2:i + 6]):
            out.append(chr(int(s[i + 2:i + 6], 16)))
            i += 6
        elif s.startswith("\\x", i) and i + 4 <= len(s):
            out.append(chr(int(s[i + 2:i + 4], 16)))
            i += 4
        else:
            out.append(s[i])
            i += 1
    return "".join(out)
