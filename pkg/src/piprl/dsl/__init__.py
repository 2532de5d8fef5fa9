"""Lexer, parser, validator and printer for navigation programs (``.pirl``)."""
from . import ast
from .errors import Diagnostic, DSLError, LexError, ParseError, SourceSpan, ValidationError
from .lexer import Token, tokenize
from .parser import parse, parse_source
from .printer import pretty_print
from .validate import validate


def load_program(source: str) -> ast.Program:
    """Tokenize, parse and validate in one go."""
    return validate(parse(tokenize(source)))


__all__ = [
    "ast", "Diagnostic", "DSLError", "LexError", "ParseError", "SourceSpan", "ValidationError",
    "Token", "tokenize", "parse", "parse_source", "pretty_print", "validate", "load_program",
]
