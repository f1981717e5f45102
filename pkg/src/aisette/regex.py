"""Linear-time regular expressions for string alias constraints.

Patterns compile to a DFA up front, so matching is one table lookup per input
character no matter how the pattern is written. Anything that needs
backtracking (backreferences, lookaround, lazy or possessive quantifiers) is
rejected at compile time.

Pattern syntax, written either bare or as ``/body/`` with an optional ``c``
flag (``/body/c`` restricts the alphabet to printable ASCII):

* plain characters, quoted literals ``'-'`` or ``"abc"``, escapes ``\\.``
* classes ``[a-z0-9]``, negated classes ``[^...]``, ``.``, ``\\d \\w \\s``
* grouping ``(...)`` and ``(?:...)``, alternation ``|``
* quantifiers ``* + ?`` and ``{m}``, ``{m,}``, ``{m,n}``
* a leading ``^`` / trailing ``$`` per top-level branch (redundant: matching
  is always whole-string)
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field

DEFAULT_STATE_CAP = 10_000
MAX_REPEAT = 1000

UNICODE = ((0, 0xD7FF), (0xE000, 0x10FFFF))
PRINTABLE_ASCII = ((0x20, 0x7E),)


class RegexError(ValueError):
    def __init__(self, code: str, message: str, position: int = 0):
        self.code = code
        self.position = position
        super().__init__(f"{message} (at offset {position})")


# --- character sets ---------------------------------------------------------

Intervals = tuple[tuple[int, int], ...]


def _normalize(ivs) -> Intervals:
    out: list[list[int]] = []
    for lo, hi in sorted(ivs):
        if out and lo <= out[-1][1] + 1:
            out[-1][1] = max(out[-1][1], hi)
        else:
            out.append([lo, hi])
    return tuple((a, b) for a, b in out)


def _intersect(a: Intervals, b: Intervals) -> Intervals:
    out = []
    i = j = 0
    while i < len(a) and j < len(b):
        lo = max(a[i][0], b[j][0])
        hi = min(a[i][1], b[j][1])
        if lo <= hi:
            out.append((lo, hi))
        if a[i][1] < b[j][1]:
            i += 1
        else:
            j += 1
    return tuple(out)


def _complement(a: Intervals, universe: Intervals) -> Intervals:
    gaps = []
    prev = 0
    for lo, hi in a:
        if lo > prev:
            gaps.append((prev, lo - 1))
        prev = hi + 1
    if prev <= 0x10FFFF:
        gaps.append((prev, 0x10FFFF))
    return _intersect(tuple(gaps), universe)


_DIGIT = ((0x30, 0x39),)
_WORD = _normalize([(0x30, 0x39), (0x41, 0x5A), (0x5F, 0x5F), (0x61, 0x7A)])
_SPACE = _normalize([(0x09, 0x0D), (0x20, 0x20)])


# --- AST --------------------------------------------------------------------


@dataclass(frozen=True)
class Chars:
    ranges: Intervals


@dataclass(frozen=True)
class Concat:
    items: tuple


@dataclass(frozen=True)
class Alt:
    items: tuple


@dataclass(frozen=True)
class Repeat:
    node: object
    lo: int
    hi: int | None


EPSILON = Concat(())


# --- parser -----------------------------------------------------------------

_SIMPLE_ESCAPES = {"n": 0x0A, "t": 0x09, "r": 0x0D, "f": 0x0C, "v": 0x0B, "0": 0x00}


class _Parser:
    def __init__(self, body: str, universe: Intervals):
        self.s = body
        self.i = 0
        self.universe = universe

    def peek(self) -> str | None:
        return self.s[self.i] if self.i < len(self.s) else None

    def take(self) -> str:
        if self.i >= len(self.s):
            raise RegexError("malformed", "unexpected end of pattern", self.i)
        ch = self.s[self.i]
        self.i += 1
        return ch

    def chars(self, ivs) -> Chars:
        return Chars(_intersect(_normalize(ivs), self.universe))

    def parse(self):
        node = self.alternation(top=True)
        if self.i != len(self.s):
            raise RegexError("malformed", f"unbalanced {self.s[self.i]!r}", self.i)
        return node

    def alternation(self, top: bool = False):
        branches = [self.branch(top)]
        while self.peek() == "|":
            self.i += 1
            branches.append(self.branch(top))
        return branches[0] if len(branches) == 1 else Alt(tuple(branches))

    def branch(self, top: bool):
        items = []
        if self.peek() == "^":
            if not top:
                raise RegexError("unsupported", "unsupported construct: anchor '^' inside a group", self.i)
            self.i += 1
        while True:
            ch = self.peek()
            if ch is None or ch in "|)":
                break
            if ch == "$":
                nxt = self.s[self.i + 1] if self.i + 1 < len(self.s) else None
                if not top or nxt not in (None, "|"):
                    raise RegexError("unsupported", "unsupported construct: anchor '$' before end of pattern", self.i)
                self.i += 1
                break
            items.append(self.quantified())
        if len(items) == 1:
            return items[0]
        return Concat(tuple(items))

    def quantified(self):
        node = self.atom()
        while True:
            ch = self.peek()
            if ch == "*":
                self.i += 1
                node = Repeat(node, 0, None)
            elif ch == "+":
                self.i += 1
                node = Repeat(node, 1, None)
            elif ch == "?":
                self.i += 1
                node = Repeat(node, 0, 1)
            elif ch == "{":
                lo, hi = self.bounds()
                node = Repeat(node, lo, hi)
            else:
                return node
            nxt = self.peek()
            if nxt == "?":
                raise RegexError("unsupported", "unsupported construct: lazy quantifier", self.i)
            if nxt == "+":
                raise RegexError("unsupported", "unsupported construct: possessive quantifier", self.i)
            if nxt in ("*", "{"):
                raise RegexError("malformed", "nothing to repeat", self.i)

    def bounds(self) -> tuple[int, int | None]:
        pos = self.i
        self.i += 1
        lo = self.number(pos)
        hi: int | None = lo
        if self.peek() == ",":
            self.i += 1
            hi = None if self.peek() == "}" else self.number(pos)
        if self.peek() != "}":
            raise RegexError("malformed", "malformed repetition bounds", pos)
        self.i += 1
        if hi is not None and hi < lo:
            raise RegexError("malformed", "repetition upper bound below lower bound", pos)
        if lo > MAX_REPEAT or (hi is not None and hi > MAX_REPEAT):
            raise RegexError("unsupported", f"repetition bound exceeds {MAX_REPEAT}", pos)
        return lo, hi

    def number(self, pos: int) -> int:
        start = self.i
        while self.peek() is not None and "0" <= self.peek() <= "9":
            self.i += 1
        if start == self.i:
            raise RegexError("malformed", "malformed repetition bounds", pos)
        return int(self.s[start:self.i])

    def atom(self):
        pos = self.i
        ch = self.take()
        if ch == "(":
            if self.peek() == "?":
                if self.s.startswith("?:", self.i):
                    self.i += 2
                elif self.s.startswith(("?=", "?!", "?<=", "?<!"), self.i):
                    raise RegexError("unsupported", "unsupported construct: lookaround", pos)
                else:
                    raise RegexError("unsupported", "unsupported construct: inline group syntax", pos)
            if self.peek() == ")":
                self.i += 1
                return EPSILON
            inner = self.alternation()
            if self.peek() != ")":
                raise RegexError("malformed", "missing ')'", pos)
            self.i += 1
            return inner
        if ch == "[":
            return self.char_class(pos)
        if ch == ".":
            return Chars(self.universe)
        if ch in ("'", '"'):
            return self.quoted(ch, pos)
        if ch == "\\":
            return self.chars(self.escape(pos, in_class=False))
        if ch in "*+?{":
            raise RegexError("malformed", "nothing to repeat", pos)
        if ch in ")]}":
            raise RegexError("malformed", f"unbalanced {ch!r}", pos)
        if ch in "^$":
            raise RegexError("unsupported", f"unsupported construct: anchor {ch!r} inside pattern", pos)
        cp = ord(ch)
        return self.chars([(cp, cp)])

    def quoted(self, quote: str, pos: int):
        items = []
        while True:
            if self.peek() is None:
                raise RegexError("malformed", "unterminated quoted literal", pos)
            ch = self.take()
            if ch == quote:
                break
            if ch == "\\":
                ivs = self.escape(pos, in_class=True)
                items.append(self.chars(ivs))
            else:
                items.append(self.chars([(ord(ch), ord(ch))]))
        if len(items) == 1:
            return items[0]
        return Concat(tuple(items))

    def escape(self, pos: int, in_class: bool) -> Intervals:
        ch = self.take()
        if ch in "123456789":
            raise RegexError("unsupported", "unsupported construct: backreference", pos)
        if ch in "bBAzZG":
            raise RegexError("unsupported", f"unsupported construct: anchor escape \\{ch}", pos)
        if ch in "kpP":
            raise RegexError("unsupported", f"unsupported construct: \\{ch}", pos)
        if ch == "d":
            return _DIGIT
        if ch == "D":
            return _complement(_DIGIT, self.universe)
        if ch == "w":
            return _WORD
        if ch == "W":
            return _complement(_WORD, self.universe)
        if ch == "s":
            return _SPACE
        if ch == "S":
            return _complement(_SPACE, self.universe)
        if ch in _SIMPLE_ESCAPES:
            cp = _SIMPLE_ESCAPES[ch]
            return ((cp, cp),)
        if ch == "x":
            digits = self.s[self.i:self.i + 2]
            if len(digits) != 2 or any(c not in "0123456789abcdefABCDEF" for c in digits):
                raise RegexError("malformed", "malformed \\x escape", pos)
            self.i += 2
            cp = int(digits, 16)
            return ((cp, cp),)
        if ch == "u":
            if self.peek() == "{":
                end = self.s.find("}", self.i)
                if end < 0:
                    raise RegexError("malformed", "malformed \\u escape", pos)
                digits = self.s[self.i + 1:end]
                self.i = end + 1
            else:
                digits = self.s[self.i:self.i + 4]
                self.i += 4
            try:
                cp = int(digits, 16)
            except ValueError:
                raise RegexError("malformed", "malformed \\u escape", pos) from None
            if cp > 0x10FFFF:
                raise RegexError("malformed", "code point out of range", pos)
            return ((cp, cp),)
        if ch.isalnum():
            raise RegexError("malformed", f"unknown escape \\{ch}", pos)
        cp = ord(ch)
        return ((cp, cp),)

    def char_class(self, pos: int) -> Chars:
        negate = False
        if self.peek() == "^":
            negate = True
            self.i += 1
        ivs: list[tuple[int, int]] = []
        first = True
        while True:
            if self.peek() is None:
                raise RegexError("malformed", "unterminated character class", pos)
            ch = self.take()
            if ch == "]" and not first:
                break
            first = False
            if ch == "\\":
                item = self.escape(pos, in_class=True)
            else:
                item = ((ord(ch), ord(ch)),)
            if self.peek() == "-" and self.i + 1 < len(self.s) and self.s[self.i + 1] != "]":
                if len(item) != 1 or item[0][0] != item[0][1]:
                    raise RegexError("malformed", "class escape used as range endpoint", pos)
                self.i += 1
                hi_ch = self.take()
                if hi_ch == "\\":
                    hi_item = self.escape(pos, in_class=True)
                    if len(hi_item) != 1 or hi_item[0][0] != hi_item[0][1]:
                        raise RegexError("malformed", "class escape used as range endpoint", pos)
                    hi = hi_item[0][0]
                else:
                    hi = ord(hi_ch)
                lo = item[0][0]
                if hi < lo:
                    raise RegexError("malformed", "reversed character range", pos)
                ivs.append((lo, hi))
            else:
                ivs.extend(item)
        ranges = _intersect(_normalize(ivs), self.universe)
        if negate:
            ranges = _complement(ranges, self.universe)
        return Chars(ranges)


# --- NFA / DFA --------------------------------------------------------------


class _Nfa:
    def __init__(self):
        self.eps: list[list[int]] = []
        self.edges: list[list[tuple[Intervals, int]]] = []

    def state(self) -> int:
        self.eps.append([])
        self.edges.append([])
        return len(self.eps) - 1

    def build(self, node) -> tuple[int, int]:
        if isinstance(node, Chars):
            s, t = self.state(), self.state()
            if node.ranges:
                self.edges[s].append((node.ranges, t))
            return s, t
        if isinstance(node, Concat):
            s = cur = self.state()
            for item in node.items:
                a, b = self.build(item)
                self.eps[cur].append(a)
                cur = b
            return s, cur
        if isinstance(node, Alt):
            s, t = self.state(), self.state()
            for item in node.items:
                a, b = self.build(item)
                self.eps[s].append(a)
                self.eps[b].append(t)
            return s, t
        if isinstance(node, Repeat):
            s = cur = self.state()
            for _ in range(node.lo):
                a, b = self.build(node.node)
                self.eps[cur].append(a)
                cur = b
            if node.hi is None:
                a, b = self.build(node.node)
                loop = self.state()
                self.eps[cur].append(loop)
                self.eps[loop].append(a)
                self.eps[b].append(loop)
                return s, loop
            end = self.state()
            self.eps[cur].append(end)
            for _ in range(node.hi - node.lo):
                a, b = self.build(node.node)
                self.eps[cur].append(a)
                self.eps[b].append(end)
                cur = b
            return s, end
        raise TypeError(f"unknown regex node {node!r}")


def _collect_ranges(node, out: list) -> None:
    if isinstance(node, Chars):
        out.append(node.ranges)
    elif isinstance(node, (Concat, Alt)):
        for item in node.items:
            _collect_ranges(item, out)
    elif isinstance(node, Repeat):
        _collect_ranges(node.node, out)


@dataclass(frozen=True)
class SafeRegex:
    """A compiled pattern. ``matches`` is whole-string and O(len(text))."""

    pattern: str
    ast: object = field(repr=False, compare=False)
    cstring: bool = False
    class_starts: tuple[int, ...] = field(default=(), repr=False, compare=False)
    class_ends: tuple[int, ...] = field(default=(), repr=False, compare=False)
    table: tuple[tuple[int, ...], ...] = field(default=(), repr=False, compare=False)
    accepting: frozenset = field(default=frozenset(), repr=False, compare=False)

    @property
    def state_count(self) -> int:
        return len(self.table)

    def matches(self, text: str) -> bool:
        starts, ends, table = self.class_starts, self.class_ends, self.table
        state = 0
        for ch in text:
            cp = ord(ch)
            k = bisect.bisect_right(starts, cp) - 1
            if k < 0 or cp > ends[k]:
                return False
            state = table[state][k]
            if state < 0:
                return False
        return state in self.accepting


def split_literal(pattern: str) -> tuple[str, bool]:
    """Split ``/body/flags`` into ``(body, cstring_mode)``; bare text passes through."""
    if len(pattern) >= 2 and pattern.startswith("/"):
        end = pattern.rfind("/")
        if end > 0:
            flags = pattern[end + 1:]
            if set(flags) <= {"c"}:
                return pattern[1:end], "c" in flags
            raise RegexError("malformed", f"unknown regex flags {flags!r}", end)
    return pattern, False


def parse(pattern: str):
    body, cmode = split_literal(pattern)
    universe = PRINTABLE_ASCII if cmode else UNICODE
    return _Parser(body, universe).parse(), cmode


def compile(pattern: str, state_cap: int = DEFAULT_STATE_CAP) -> SafeRegex:  # noqa: A001
    ast, cmode = parse(pattern)
    universe = PRINTABLE_ASCII if cmode else UNICODE

    nfa = _Nfa()
    start, accept = nfa.build(ast)

    # Partition the alphabet into classes no pattern character set splits.
    cuts = set()
    sets: list[Intervals] = [universe]
    _collect_ranges(ast, sets)
    for ivs in sets:
        for lo, hi in ivs:
            cuts.add(lo)
            cuts.add(hi + 1)
    points = sorted(cuts)
    starts, ends = [], []
    for a, b in zip(points, points[1:]):
        if _intersect(((a, b - 1),), universe) == ((a, b - 1),):
            starts.append(a)
            ends.append(b - 1)

    def classes_of(ivs: Intervals) -> list[int]:
        out = []
        for lo, hi in ivs:
            k = bisect.bisect_left(starts, lo)
            while k < len(starts) and ends[k] <= hi:
                out.append(k)
                k += 1
        return out

    moves: list[dict[int, list[int]]] = []
    for edges in nfa.edges:
        m: dict[int, list[int]] = {}
        for ivs, target in edges:
            for k in classes_of(ivs):
                m.setdefault(k, []).append(target)
        moves.append(m)

    def closure(states) -> frozenset:
        seen = set(states)
        stack = list(states)
        while stack:
            s = stack.pop()
            for t in nfa.eps[s]:
                if t not in seen:
                    seen.add(t)
                    stack.append(t)
        return frozenset(seen)

    init = closure([start])
    index = {init: 0}
    order = [init]
    table: list[list[int]] = []
    nclasses = len(starts)
    i = 0
    while i < len(order):
        cur = order[i]
        row = [-1] * nclasses
        targets: dict[int, set[int]] = {}
        for s in cur:
            for k, ts in moves[s].items():
                targets.setdefault(k, set()).update(ts)
        for k, ts in targets.items():
            nxt = closure(ts)
            j = index.get(nxt)
            if j is None:
                if len(order) >= state_cap:
                    raise RegexError("state-limit", f"pattern needs more than {state_cap} DFA states", 0)
                j = index[nxt] = len(order)
                order.append(nxt)
            row[k] = j
        table.append(row)
        i += 1

    accepting = frozenset(j for j, st in enumerate(order) if accept in st)
    return SafeRegex(
        pattern=pattern,
        ast=ast,
        cstring=cmode,
        class_starts=tuple(starts),
        class_ends=tuple(ends),
        table=tuple(tuple(r) for r in table),
        accepting=accepting,
    )


def matches(regex: SafeRegex, text: str) -> bool:
    return regex.matches(text)
