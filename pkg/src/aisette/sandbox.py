"""URI-glob allowlists for api bodies and external bindings.

Glob syntax: the scheme (``file:``, ``account:``, ...) is literal, ``*``
matches within one ``/``-separated segment, ``**`` matches across segments,
``\\*`` and ``\\\\`` are literal characters, everything else matches itself
case-sensitively. Access is denied unless some glob matches the whole URI.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .runtime.values import Fault

_SCHEME = re.compile(r"[A-Za-z][A-Za-z0-9+.\-]*:")
_SLOT = re.compile(r"\$\{([^}]*)\}")


class GlobError(ValueError):
    pass


def glob_to_regex(glob: str) -> re.Pattern:
    m = _SCHEME.match(glob)
    if not m:
        raise GlobError(f"glob {glob!r} must start with a literal scheme such as 'file:'")
    out = [re.escape(m.group(0))]
    i = m.end()
    while i < len(glob):
        ch = glob[i]
        if ch == "\\":
            if i + 1 >= len(glob):
                raise GlobError(f"glob {glob!r} ends with a dangling escape")
            out.append(re.escape(glob[i + 1]))
            i += 2
        elif glob.startswith("**", i):
            out.append(".*")
            i += 2
        elif ch == "*":
            out.append("[^/]*")
            i += 1
        else:
            out.append(re.escape(ch))
            i += 1
    return re.compile("".join(out))


def escape_literal(text: str) -> str:
    """Escape interpolated text so glob metacharacters in it match literally."""
    return text.replace("\\", "\\\\").replace("*", "\\*")


@dataclass(frozen=True)
class SandboxPolicy:
    """Allowed URI globs. ``display`` mirrors ``allowed`` with sensitive slots masked."""

    allowed: tuple[str, ...] = ()
    display: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "_compiled", tuple(glob_to_regex(g) for g in self.allowed))
        if not self.display:
            object.__setattr__(self, "display", self.allowed)

    def check(self, uri: str) -> bool:
        return any(rx.fullmatch(uri) for rx in self._compiled)

    def require(self, uri: str) -> None:
        if not self.check(uri):
            summary = ", ".join(self.display) if self.display else "nothing (empty policy)"
            raise Fault("permission-denied", f"access to {uri} denied; policy allows {summary}", clause=uri)

    def summary(self) -> str:
        return "; ".join(self.display) or "deny all"


def sandbox_check(policy: SandboxPolicy, uri: str) -> str:
    return "allow" if policy.check(uri) else "deny"


def interpolate(template: str, lookup) -> tuple[str, str]:
    """Fill ``${a.b}`` slots. ``lookup(path)`` returns ``(text, sensitive)``.

    Returns the glob and a display copy where sensitive slots are masked.
    """
    glob_parts, shown = [], []
    pos = 0
    for m in _SLOT.finditer(template):
        glob_parts.append(template[pos:m.start()])
        shown.append(template[pos:m.start()])
        text, sensitive = lookup(m.group(1))
        glob_parts.append(escape_literal(text))
        shown.append("*" * len(text) if sensitive else escape_literal(text))
        pos = m.end()
    glob_parts.append(template[pos:])
    shown.append(template[pos:])
    return "".join(glob_parts), "".join(shown)


def globs_overlap(a: str, b: str) -> bool:
    """True when some URI matches both globs (product-automaton search)."""
    ta, tb = _glob_tokens(a), _glob_tokens(b)
    seen = set()
    stack = [(0, 0)]
    while stack:
        i, j = stack.pop()
        if (i, j) in seen:
            continue
        seen.add((i, j))
        if i == len(ta) and j == len(tb):
            return True
        # a wildcard may match nothing
        if i < len(ta) and ta[i][0] != "lit":
            stack.append((i + 1, j))
        if j < len(tb) and tb[j][0] != "lit":
            stack.append((i, j + 1))
        if i < len(ta) and j < len(tb):
            ka, ca = ta[i]
            kb, cb = tb[j]
            if ka == "lit" and kb == "lit":
                if ca == cb:
                    stack.append((i + 1, j + 1))
            elif ka == "lit":
                if kb == "any" or ca != "/":
                    stack.append((i + 1, j))  # b's wildcard consumes a's char
            elif kb == "lit":
                if ka == "any" or cb != "/":
                    stack.append((i, j + 1))
    return False


def _glob_tokens(glob: str) -> list[tuple[str, str]]:
    out = []
    i = 0
    while i < len(glob):
        if glob[i] == "\\" and i + 1 < len(glob):
            out.append(("lit", glob[i + 1]))
            i += 2
        elif glob.startswith("**", i):
            out.append(("any", ""))
            i += 2
        elif glob[i] == "*":
            out.append(("seg", ""))
            i += 1
        else:
            out.append(("lit", glob[i]))
            i += 1
    return out


def literal_prefix(glob: str) -> int:
    """Length of the literal text before the first wildcard."""
    n = 0
    for kind, _ in _glob_tokens(glob):
        if kind != "lit":
            break
        n += 1
    return n
