"""Tokenizer for ``.bsq`` sources."""

from __future__ import annotations

from dataclasses import dataclass

from ..diagnostics import LexError, Span, error

KEYWORDS = {
    "function", "action", "api", "agent", "entity", "type", "sensitive", "of",
    "field", "invariant", "requires", "ensures", "var", "let", "if", "then",
    "else", "return", "assert", "true", "false", "none", "some", "fail", "env",
    "permissions", "chktest", "pred", "fn",
}

# Longest first: the scanner takes the first prefix that matches.
PUNCT = [
    "===", "!==", "{|", "|}", "::", "==", "!=", "<=", ">=", "&&", "||", "=>", "->",
    "<", ">", "+", "-", "*", "/", "%", "!", "=", ":", ";", ",", ".", "(", ")",
    "{", "}", "[", "]",
]

INT_MAX = 2**63 - 1


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    span: Span
    value: object = None
    # Adjacent ``<Alias>`` annotation on a literal token.
    alias: str | None = None

    def __repr__(self) -> str:
        if self.kind in ("ident", "int_lit", "dec_lit", "cstr_lit", "str_lit"):
            return f"{self.kind}({self.value})"
        return self.kind


def _tok_kind(punct: str) -> str:
    names = {
        "=": "eq", ";": "semi", ",": "comma", ":": "colon", ".": "dot", "(": "lparen",
        ")": "rparen", "{": "lbrace", "}": "rbrace", "[": "lbrack", "]": "rbrack",
    }
    return names.get(punct, punct)


class _Scanner:
    def __init__(self, source: str):
        self.src = source
        self.i = 0
        self.line = 1
        self.col = 1
        self.tokens: list[Token] = []
        self.diags = []
        self.pending_doc: str | None = None

    def span_from(self, start: int, line: int, col: int) -> Span:
        return Span(line, col, start, self.i)

    def advance(self, n: int = 1) -> None:
        for _ in range(n):
            if self.i >= len(self.src):
                return
            if self.src[self.i] == "\n":
                self.line += 1
                self.col = 1
            else:
                self.col += 1
            self.i += 1

    def emit(self, kind: str, start: int, line: int, col: int, value=None, alias=None) -> None:
        self.tokens.append(Token(kind, self.src[start:self.i], self.span_from(start, line, col), value, alias))

    def fail(self, code: str, message: str, start: int, line: int, col: int) -> None:
        self.diags.append(error(code, message, Span(line, col, start, max(self.i, start + 1))))

    def run(self) -> list[Token]:
        src = self.src
        while self.i < len(src):
            ch = src[self.i]
            start, line, col = self.i, self.line, self.col
            if ch in " \t\r\n":
                self.advance()
            elif src.startswith("/**", self.i) and not src.startswith("/**/", self.i):
                end = src.find("*/", self.i + 3)
                if end < 0:
                    self.advance(len(src) - self.i)
                    self.fail("unterminated-comment", "unterminated doc comment", start, line, col)
                    break
                body = src[self.i + 3:end]
                self.advance(end + 2 - self.i)
                self.emit("doc", start, line, col, value=_clean_doc(body))
            elif src.startswith("//", self.i):
                while self.i < len(src) and src[self.i] != "\n":
                    self.advance()
            elif src.startswith("/*", self.i):
                end = src.find("*/", self.i + 2)
                if end < 0:
                    self.advance(len(src) - self.i)
                    self.fail("unterminated-comment", "unterminated comment", start, line, col)
                    break
                self.advance(end + 2 - self.i)
            elif "0" <= ch <= "9":
                self.number(start, line, col)
            elif ch.isalpha() or ch == "_":
                while self.i < len(src) and (src[self.i].isalnum() or src[self.i] == "_"):
                    self.advance()
                word = src[start:self.i]
                if word in KEYWORDS:
                    self.emit("kw_" + word, start, line, col)
                else:
                    self.emit("ident", start, line, col, value=word)
            elif ch == "$":
                self.advance()
                nstart = self.i
                while self.i < len(src) and (src[self.i].isalnum() or src[self.i] == "_"):
                    self.advance()
                if self.i == nstart:
                    self.fail("unknown-char", "expected a name after '$'", start, line, col)
                    continue
                self.emit("dollar", start, line, col, value=src[nstart:self.i])
            elif ch == "?" and self.i + 1 < len(src) and src[self.i + 1] == "_":
                self.advance()
                while self.i < len(src) and (src[self.i].isalnum() or src[self.i] == "_"):
                    self.advance()
                self.emit("hole", start, line, col, value=src[start + 1:self.i])
            elif ch in "'\"":
                self.string(ch, start, line, col)
            elif ch == "/" and self.tokens and self.tokens[-1].kind == "kw_of":
                self.regex(start, line, col)
            elif ch == "\\":
                self.glob(start, line, col)
            else:
                for p in PUNCT:
                    if src.startswith(p, self.i):
                        self.advance(len(p))
                        self.emit(_tok_kind(p), start, line, col)
                        break
                else:
                    self.advance()
                    self.fail("unknown-char", f"unknown character {ch!r}", start, line, col)
        return self.tokens

    def annotation(self) -> str | None:
        """Consume an adjacent ``<Ident>`` literal annotation, if present."""
        src = self.src
        if self.i < len(src) and src[self.i] == "<":
            j = self.i + 1
            if j < len(src) and (src[j].isalpha() or src[j] == "_"):
                while j < len(src) and (src[j].isalnum() or src[j] == "_"):
                    j += 1
                if j < len(src) and src[j] == ">":
                    name = src[self.i + 1:j]
                    self.advance(j + 1 - self.i)
                    return name
        return None

    def number(self, start: int, line: int, col: int) -> None:
        src = self.src
        while self.i < len(src) and "0" <= src[self.i] <= "9":
            self.advance()
        is_dec = False
        if self.i + 1 < len(src) and src[self.i] == "." and "0" <= src[self.i + 1] <= "9":
            is_dec = True
            self.advance()
            while self.i < len(src) and "0" <= src[self.i] <= "9":
                self.advance()
        digits = src[start:self.i]
        suffix = None
        if self.i < len(src) and src[self.i] in "id" and not (
            self.i + 1 < len(src) and (src[self.i + 1].isalnum() or src[self.i + 1] == "_")
        ):
            suffix = src[self.i]
            self.advance()
        alias = self.annotation()
        if suffix is None and alias is None:
            self.fail("missing-suffix", "missing type suffix on numeric literal", start, line, col)
            return
        if suffix == "i" and is_dec:
            self.fail("bad-literal", "Int literal cannot have a fractional part", start, line, col)
            return
        if suffix == "d" or is_dec:
            frac = digits.split(".")[1] if "." in digits else ""
            if len(frac) > 4:
                self.fail("bad-literal", "Decimal literal has more than 4 fractional digits", start, line, col)
                return
            self.emit("dec_lit", start, line, col, value=digits, alias=alias)
        elif suffix == "i":
            value = int(digits)
            if value > INT_MAX:
                self.fail("bad-literal", "Int literal out of range", start, line, col)
                return
            self.emit("int_lit", start, line, col, value=value, alias=alias)
        else:
            # bare digits with an alias annotation: the alias decides Int vs Decimal
            self.emit("num_lit", start, line, col, value=digits, alias=alias)

    def string(self, quote: str, start: int, line: int, col: int) -> None:
        src = self.src
        self.advance()
        out = []
        while True:
            if self.i >= len(src) or src[self.i] == "\n":
                self.fail("unterminated-string", "unterminated string literal", start, line, col)
                return
            ch = src[self.i]
            if ch == quote:
                self.advance()
                break
            if ch == "\\":
                self.advance()
                if self.i >= len(src):
                    continue
                esc = src[self.i]
                if esc == "u" and self.i + 1 < len(src) and src[self.i + 1] == "{":
                    end = src.find("}", self.i)
                    try:
                        out.append(chr(int(src[self.i + 2:end], 16)))
                    except ValueError:
                        self.fail("bad-escape", "malformed \\u{...} escape", start, line, col)
                    self.advance(end + 1 - self.i)
                    continue
                out.append({"n": "\n", "t": "\t", "r": "\r"}.get(esc, esc))
                self.advance()
                continue
            out.append(ch)
            self.advance()
        alias = self.annotation()
        self.emit("cstr_lit" if quote == "'" else "str_lit", start, line, col, value="".join(out), alias=alias)

    def regex(self, start: int, line: int, col: int) -> None:
        src = self.src
        self.advance()
        in_class = False
        while True:
            if self.i >= len(src) or src[self.i] == "\n":
                self.fail("unterminated-regex", "unterminated regex literal", start, line, col)
                return
            ch = src[self.i]
            if ch == "\\":
                self.advance(2)
                continue
            if ch == "[":
                in_class = True
            elif ch == "]":
                in_class = False
            elif ch == "/" and not in_class:
                self.advance()
                break
            self.advance()
        while self.i < len(src) and src[self.i].isalpha():
            self.advance()
        self.emit("regex", start, line, col, value=src[start:self.i])

    def glob(self, start: int, line: int, col: int) -> None:
        src = self.src
        self.advance()
        end = src.find("\\", self.i)
        nl = src.find("\n", self.i)
        if end < 0 or (0 <= nl < end):
            self.advance((nl if nl >= 0 else len(src)) - self.i)
            self.fail("unterminated-glob", "unterminated permission glob", start, line, col)
            return
        self.advance(end + 1 - self.i)
        self.emit("glob", start, line, col, value=src[start + 1:end])


def _clean_doc(body: str) -> str:
    lines = []
    for raw in body.splitlines():
        s = raw.strip()
        if s.startswith("*"):
            s = s[1:].strip()
        lines.append(s)
    return "\n".join(line for line in lines).strip()


def tokenize(source: str) -> list[Token]:
    """Split ``source`` into tokens; raises :class:`LexError` with every diagnostic found."""
    sc = _Scanner(source)
    tokens = sc.run()
    if sc.diags:
        raise LexError(sc.diags)
    return tokens
