from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class SourceSpan:
    line: int
    column: int
    length: int = 0

    def __post_init__(self):
        if self.line < 1 or self.column < 1 or self.length < 0:
            raise ValueError(f"invalid span {self.line}:{self.column}+{self.length}")

    def __str__(self):
        return f"{self.line}:{self.column}"


class DSLError(Exception):
    """Base class for all DSL toolchain errors."""


class LexError(DSLError):
    def __init__(self, message: str, span: SourceSpan):
        super().__init__(f"{span}: {message}")
        self.message = message
        self.span = span


class ParseError(DSLError):
    def __init__(self, message: str, span: SourceSpan, expected: frozenset[str] = frozenset()):
        detail = message
        if expected:
            detail += f" (expected one of: {', '.join(sorted(expected))})"
        super().__init__(f"{span}: {detail}")
        self.message = message
        self.span = span
        self.expected = expected


@dataclass(frozen=True)
class Diagnostic:
    span: SourceSpan
    message: str

    def __str__(self):
        return f"{self.span}: {self.message}"


class ValidationError(DSLError):
    def __init__(self, diagnostics: list[Diagnostic]):
        super().__init__("\n".join(str(d) for d in diagnostics))
        self.diagnostics = list(diagnostics)
