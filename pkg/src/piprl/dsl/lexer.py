"""Tokenizer for the navigation-program language.

Statements are newline terminated and blocks are delimited by indentation,
so the token stream carries explicit NEWLINE / INDENT / DEDENT markers.
Identifiers may span several space-separated words (``pose estimate``,
``Last SNR``); consecutive non-keyword words on one line are merged into a
single NAME token whose value is the words joined by single spaces.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import LexError, SourceSpan

KEYWORDS = frozenset({
    "Factor", "Feature", "Policy", "Effect", "ActionRestriction", "Option",
    "Execute", "Return", "if", "else", "init", "until", "and", "or", "w/", "P",
    "not", "in", "NeuralPolicy", "terminate", "reset", "executed", "Π",
})
# ASCII spelling of the angle-set symbol
KEYWORD_ALIASES = {"Pi": "Π"}

LAYOUT = frozenset({"NEWLINE", "INDENT", "DEDENT"})

_WORD = re.compile(r"[^\W\d]\w*(?:-[^\W\d]\w*)*")
_NUMBER = re.compile(r"\d+(?:\.\d+)?(?:[eE][+-]?\d+)?")
_OPERATORS = (":=", "==", "<=", ">=", "<", ">", "+", "-", "*", "/",
              "(", ")", "[", "]", ",", ":", "=", "#")
_CONTINUATION = {("KEYWORD", "and"), ("KEYWORD", "or"), ("OP", ",")}


@dataclass(frozen=True)
class Token:
    kind: str  # KEYWORD, NAME, NUMBER, ANGLE, OP, NEWLINE, INDENT, DEDENT
    value: object
    span: SourceSpan

    def is_(self, kind: str, value=None) -> bool:
        return self.kind == kind and (value is None or self.value == value)

    def __repr__(self):
        return f"Token({self.kind}, {self.value!r}, {self.span})"


def _keyword(word: str) -> str | None:
    word = KEYWORD_ALIASES.get(word, word)
    return word if word in KEYWORDS else None


def _read_word(line: str, pos: int):
    """Return (word, end) for a word at pos, treating ``w/`` as one keyword."""
    m = _WORD.match(line, pos)
    if m is None:
        return None, pos
    if m.group() == "w" and line.startswith("/", m.end()):
        return "w/", m.end() + 1
    return m.group(), m.end()


def tokenize(source: str) -> list[Token]:
    tokens: list[Token] = []
    indents = [0]
    continuing = False

    for lineno, raw in enumerate(source.split("\n"), start=1):
        line = raw.rstrip("\r")
        body = line.split("//", 1)[0]
        if not body.strip():
            continue

        pos = 0
        while pos < len(body) and body[pos] == " ":
            pos += 1
        if pos < len(body) and body[pos] == "\t":
            raise LexError("tab characters are not allowed in indentation", SourceSpan(lineno, pos + 1, 1))

        if not continuing:
            if pos > indents[-1]:
                indents.append(pos)
                tokens.append(Token("INDENT", pos, SourceSpan(lineno, 1, pos)))
            else:
                while pos < indents[-1]:
                    indents.pop()
                    tokens.append(Token("DEDENT", pos, SourceSpan(lineno, 1, pos)))
                if pos != indents[-1]:
                    raise LexError("inconsistent dedent", SourceSpan(lineno, 1, pos))

        line_tokens: list[Token] = []
        while pos < len(body):
            ch = body[pos]
            if ch in " \t":
                pos += 1
                continue
            start = pos

            if ch.isdigit():
                m = _NUMBER.match(body, pos)
                pos = m.end()
                value = float(m.group())
                if body.startswith("deg", pos) and not re.match(r"\w", body[pos + 3:pos + 4]):
                    pos += 3
                    line_tokens.append(Token("ANGLE", value, SourceSpan(lineno, start + 1, pos - start)))
                elif body.startswith("°", pos):
                    pos += 1
                    line_tokens.append(Token("ANGLE", value, SourceSpan(lineno, start + 1, pos - start)))
                else:
                    line_tokens.append(Token("NUMBER", value, SourceSpan(lineno, start + 1, pos - start)))
                continue

            word, end = _read_word(body, pos)
            if word is not None:
                kw = _keyword(word)
                if kw is not None:
                    line_tokens.append(Token("KEYWORD", kw, SourceSpan(lineno, start + 1, end - start)))
                    pos = end
                    continue
                words = [word]
                pos = end
                # merge following non-keyword words into one multi-word name
                while True:
                    look = pos
                    while look < len(body) and body[look] in " \t":
                        look += 1
                    if look == pos:
                        break
                    nxt, nend = _read_word(body, look)
                    if nxt is None or _keyword(nxt) is not None:
                        break
                    words.append(nxt)
                    pos = nend
                line_tokens.append(Token("NAME", " ".join(words), SourceSpan(lineno, start + 1, pos - start)))
                continue

            for op in _OPERATORS:
                if body.startswith(op, pos):
                    pos += len(op)
                    line_tokens.append(Token("OP", op, SourceSpan(lineno, start + 1, len(op))))
                    break
            else:
                length = 1
                while start + length < len(body) and not body[start + length].isspace() \
                        and body[start + length] == ch:
                    length += 1
                raise LexError(f"unrecognized character {ch!r}", SourceSpan(lineno, start + 1, length))

        tokens.extend(line_tokens)
        last = line_tokens[-1]
        continuing = (last.kind, last.value) in _CONTINUATION
        if not continuing:
            tokens.append(Token("NEWLINE", None, SourceSpan(lineno, len(body) + 1, 0)))

    if continuing:
        last = tokens[-1]
        raise LexError("unexpected end of input after line continuation", last.span)
    end_line = max(1, source.count("\n") + 1)
    while len(indents) > 1:
        indents.pop()
        tokens.append(Token("DEDENT", 0, SourceSpan(end_line, 1, 0)))
    return tokens
