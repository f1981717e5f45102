"""Source spans, diagnostics and the error types that carry them."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class Span:
    """A half-open byte range ``[offset, end)`` plus the 1-based line/column of its start."""

    line: int
    col: int
    offset: int
    end: int

    def __str__(self) -> str:
        return f"{self.line}:{self.col}"

    def join(self, other: "Span") -> "Span":
        if other.end <= self.end:
            return self
        return Span(self.line, self.col, self.offset, other.end)

    def to_json(self) -> dict:
        return {"line": self.line, "col": self.col, "offset": self.offset, "end": self.end}


NO_SPAN = Span(1, 1, 0, 0)


@dataclass(frozen=True)
class Diagnostic:
    severity: str
    code: str
    message: str
    span: Span
    expected: tuple[str, ...] = field(default=())

    def __str__(self) -> str:
        text = f"{self.span}: {self.severity}[{self.code}]: {self.message}"
        if self.expected:
            text += f" (expected one of: {', '.join(self.expected)})"
        return text

    def to_json(self) -> dict:
        out = {
            "severity": self.severity,
            "code": self.code,
            "message": self.message,
            "span": self.span.to_json(),
        }
        if self.expected:
            out["expected"] = list(self.expected)
        return out


class AisetteError(Exception):
    """Base error carrying one or more diagnostics."""

    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = list(diagnostics)
        super().__init__("\n".join(str(d) for d in self.diagnostics))


class LexError(AisetteError):
    pass


class ParseError(AisetteError):
    pass


class TypeCheckError(AisetteError):
    pass


def error(code: str, message: str, span: Span, expected: tuple[str, ...] = ()) -> Diagnostic:
    return Diagnostic("error", code, message, span, expected)
