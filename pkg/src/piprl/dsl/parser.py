"""Recursive-descent parser producing :class:`~piprl.dsl.ast.Program`."""
from __future__ import annotations

from . import ast
from .errors import ParseError, SourceSpan
from .lexer import Token, tokenize

_BLOCK_DECLS = {
    "Policy": ast.PolicyDecl,
    "Effect": ast.EffectDecl,
    "ActionRestriction": ast.ActionRestrictionDecl,
}
_DECL_KEYWORDS = frozenset({"Factor", "Feature", "Option", *_BLOCK_DECLS})


def _describe(tok: Token | None) -> str:
    if tok is None:
        return "end of input"
    if tok.kind in ("NEWLINE", "INDENT", "DEDENT"):
        return tok.kind.lower()
    return repr(tok.value)


class Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    # -- token helpers ------------------------------------------------------

    def peek(self, offset: int = 0) -> Token | None:
        i = self.pos + offset
        return self.tokens[i] if i < len(self.tokens) else None

    def at(self, kind: str, value=None, offset: int = 0) -> bool:
        tok = self.peek(offset)
        return tok is not None and tok.is_(kind, value)

    def at_end(self) -> bool:
        return self.pos >= len(self.tokens)

    def _here(self) -> SourceSpan:
        tok = self.peek()
        if tok is not None:
            return tok.span
        if self.tokens:
            last = self.tokens[-1].span
            return SourceSpan(last.line, last.column + last.length, 0)
        return SourceSpan(1, 1, 0)

    def error(self, message: str, expected=()) -> ParseError:
        return ParseError(f"{message}, found {_describe(self.peek())}", self._here(), frozenset(expected))

    def expect(self, kind: str, value=None) -> Token:
        if self.at(kind, value):
            tok = self.tokens[self.pos]
            self.pos += 1
            return tok
        label = value if value is not None else kind.lower()
        raise self.error("unexpected token", {str(label)})

    def accept(self, kind: str, value=None) -> Token | None:
        if self.at(kind, value):
            tok = self.tokens[self.pos]
            self.pos += 1
            return tok
        return None

    def end_statement(self):
        # the final line of a file may lack its NEWLINE when tokens are built by hand
        if self.at_end() or self.at("DEDENT"):
            return
        self.expect("NEWLINE")

    # -- declarations -------------------------------------------------------

    def parse_program(self) -> ast.Program:
        decls = []
        while not self.at_end():
            if self.accept("NEWLINE"):
                continue
            decls.append(self.parse_declaration())
        meta = next((d.name for d in decls
                     if isinstance(d, ast.PolicyDecl) and d.name.lower() == ast.META_NAME), None)
        return ast.Program(tuple(decls), meta)

    def parse_declaration(self) -> ast.Declaration:
        tok = self.peek()
        if tok is None or tok.kind != "KEYWORD" or tok.value not in _DECL_KEYWORDS:
            raise self.error("expected a declaration", _DECL_KEYWORDS)
        self.pos += 1
        self.accept("OP", ":")
        name = self.expect("NAME").value

        if tok.value in ("Factor", "Feature"):
            self.expect("OP", ":=")
            if self.accept("OP", "("):
                parts = [self.expect("NAME").value]
                while self.accept("OP", ","):
                    parts.append(self.expect("NAME").value)
                self.expect("OP", ")")
            else:
                parts = [self.expect("NAME").value]
            self.end_statement()
            cls = ast.FactorDecl if tok.value == "Factor" else ast.FeatureDecl
            return cls(name, tuple(parts), tok.span)

        if tok.value == "Option":
            self.end_statement()
            return ast.OptionDecl(name, tok.span)

        self.accept("OP", ":")
        body = self.parse_block(f"{tok.value} {name}")
        return _BLOCK_DECLS[tok.value](name, body, tok.span)

    def parse_block(self, owner: str) -> tuple:
        self.expect("NEWLINE")
        if not self.at("INDENT"):
            raise self.error(f"empty body for {owner}", {"indent"})
        self.pos += 1
        body = []
        while not self.at("DEDENT") and not self.at_end():
            body.append(self.parse_statement())
        self.accept("DEDENT")
        return tuple(body)

    # -- statements ---------------------------------------------------------

    def parse_statement(self) -> ast.Statement:
        tok = self.peek()
        if tok is None:
            raise self.error("expected a statement")
        if tok.is_("KEYWORD", "if"):
            return self.parse_if()
        if tok.is_("KEYWORD", "Execute"):
            return self.parse_execute()
        if tok.is_("KEYWORD", "Return"):
            self.pos += 1
            target = None
            if self.at("NAME") and self.at("OP", "=", offset=1):
                target = self.expect("NAME").value
                self.pos += 1
            value = self.parse_expr()
            self.end_statement()
            return ast.Return(value, target, tok.span)
        if tok.is_("KEYWORD", "terminate"):
            self.pos += 1
            self.expect("KEYWORD", "NeuralPolicy")
            self.expect("KEYWORD", "and")
            self.expect("KEYWORD", "reset")
            self.end_statement()
            return ast.Terminate(tok.span)
        if tok.kind == "NAME":
            target = self.parse_target()
            if self.accept("OP", ":="):
                cls = ast.Assign
            elif self.accept("OP", "="):
                cls = ast.Update
            else:
                raise self.error("expected assignment", {":=", "="})
            value = self.parse_expr()
            self.end_statement()
            return cls(target, value, tok.span)
        raise self.error("expected a statement", {"if", "Execute", "Return", "terminate", "name"})

    def parse_target(self) -> ast.Target:
        tok = self.expect("NAME")
        index = None
        if self.accept("OP", "["):
            index = self.parse_index_literal()
            self.expect("OP", "]")
        return ast.Target(tok.value, index, tok.span)

    def parse_index_literal(self) -> int:
        tok = self.expect("NUMBER")
        if tok.value != int(tok.value):
            raise ParseError("index must be an integer", tok.span, frozenset({"integer"}))
        return int(tok.value)

    def parse_if(self) -> ast.If:
        tok = self.expect("KEYWORD", "if")
        cond = self.parse_expr()
        self.expect("OP", ":")
        then = self.parse_block("if")
        orelse = ()
        if self.at("KEYWORD", "else"):
            self.pos += 1
            self.expect("OP", ":")
            orelse = self.parse_block("else")
        return ast.If(cond, then, orelse, tok.span)

    def parse_execute(self) -> ast.Statement:
        tok = self.expect("KEYWORD", "Execute")
        if self.accept("KEYWORD", "Policy"):
            self.expect("OP", ":")
            name = self.expect("NAME").value
            self.end_statement()
            return ast.ExecutePolicy(name, tok.span)
        if self.accept("KEYWORD", "Option"):
            self.expect("OP", ":")
            name = self.expect("NAME").value
            self.expect("OP", ":")
            self.expect("KEYWORD", "init")
            self.expect("OP", ":=")
            init = self.parse_expr()
            self.expect("KEYWORD", "until")
            self.expect("OP", ":=")
            until = self.parse_expr()
            self.end_statement()
            return ast.ExecuteOption(name, init, until, tok.span)
        if self.accept("KEYWORD", "NeuralPolicy"):
            return self.parse_neural_tail(tok)
        if self.at("NAME"):
            action = self.expect("NAME").value
            if not self.at("KEYWORD", "w/"):
                self.end_statement()
                return ast.ExecuteAction(action, tok.span)
            choices = [(ast.ExecuteAction(action, tok.span), self.parse_probability())]
            self.end_statement()
            while self.at("KEYWORD", "or") and self.at("KEYWORD", "Execute", offset=1):
                self.pos += 1
                alt = self.expect("KEYWORD", "Execute")
                name = self.expect("NAME").value
                choices.append((ast.ExecuteAction(name, alt.span), self.parse_probability()))
                self.end_statement()
            return ast.ProbChoice(tuple(choices), tok.span)
        raise self.error("expected an Execute target", {"Policy", "Option", "NeuralPolicy", "name"})

    def parse_probability(self) -> float:
        self.expect("KEYWORD", "w/")
        self.expect("KEYWORD", "P")
        self.expect("OP", "(")
        value = self.expect("NUMBER").value
        self.expect("OP", ")")
        return value

    def parse_neural_tail(self, tok: Token) -> ast.ExecuteNeural:
        model = None
        if self.accept("OP", ":"):
            model = self.expect("NAME").value
        restriction = None
        effects: list[str] = []
        while self.accept("KEYWORD", "and"):
            if self.accept("KEYWORD", "ActionRestriction"):
                if restriction is not None:
                    raise self.error("duplicate ActionRestriction")
                self.expect("OP", ":")
                restriction = self.expect("NAME").value
            elif self.accept("KEYWORD", "Effect"):
                self.expect("OP", ":")
                effects.append(self.expect("NAME").value)
                while self.accept("OP", ","):
                    effects.append(self.expect("NAME").value)
            else:
                raise self.error("expected a policy modifier", {"ActionRestriction", "Effect"})
        self.end_statement()
        return ast.ExecuteNeural(model, restriction, tuple(effects), tok.span)

    # -- expressions --------------------------------------------------------

    def parse_expr(self) -> ast.Expr:
        return self.parse_or()

    def parse_or(self):
        lhs = self.parse_and()
        while self.at("KEYWORD", "or") and not self.at("KEYWORD", "Execute", offset=1):
            tok = self.tokens[self.pos]
            self.pos += 1
            lhs = ast.Binary("or", lhs, self.parse_and(), tok.span)
        return lhs

    def parse_and(self):
        lhs = self.parse_not()
        while self.at("KEYWORD", "and"):
            tok = self.tokens[self.pos]
            self.pos += 1
            lhs = ast.Binary("and", lhs, self.parse_not(), tok.span)
        return lhs

    def parse_not(self):
        tok = self.accept("KEYWORD", "not")
        if tok:
            return ast.Unary("not", self.parse_not(), tok.span)
        return self.parse_comparison()

    def parse_comparison(self):
        first = self.parse_membership()
        operands, ops, spans = [first], [], []
        while self.peek() is not None and self.peek().kind == "OP" and self.peek().value in ast.COMPARISONS:
            tok = self.tokens[self.pos]
            self.pos += 1
            ops.append(tok.value)
            spans.append(tok.span)
            operands.append(self.parse_membership())
        if not ops:
            return first
        if len(ops) == 1:
            return ast.Binary(ops[0], operands[0], operands[1], spans[0])
        return ast.Chain(tuple(operands), tuple(ops), spans[0])

    def parse_membership(self):
        elem = self.parse_additive()
        tok = self.accept("KEYWORD", "in")
        if tok:
            return ast.Member(elem, self.parse_additive(), tok.span)
        return elem

    def parse_additive(self):
        lhs = self.parse_multiplicative()
        while self.at("OP", "+") or self.at("OP", "-"):
            tok = self.tokens[self.pos]
            self.pos += 1
            lhs = ast.Binary(tok.value, lhs, self.parse_multiplicative(), tok.span)
        return lhs

    def parse_multiplicative(self):
        lhs = self.parse_unary()
        while self.at("OP", "*") or self.at("OP", "/"):
            tok = self.tokens[self.pos]
            self.pos += 1
            lhs = ast.Binary(tok.value, lhs, self.parse_unary(), tok.span)
        return lhs

    def parse_unary(self):
        if self.at("OP", "-") or self.at("OP", "#"):
            tok = self.tokens[self.pos]
            self.pos += 1
            return ast.Unary(tok.value, self.parse_unary(), tok.span)
        return self.parse_postfix()

    def parse_postfix(self):
        expr = self.parse_primary()
        while True:
            if self.at("OP", "["):
                tok = self.tokens[self.pos]
                self.pos += 1
                index = self.parse_index_literal()
                self.expect("OP", "]")
                expr = ast.Index(expr, index, tok.span)
            elif self.at("KEYWORD", "executed"):
                tok = self.tokens[self.pos]
                self.pos += 1
                expr = ast.Executed(expr, tok.span)
            else:
                return expr

    def parse_primary(self):
        tok = self.peek()
        if tok is None:
            raise self.error("expected an expression")
        if tok.kind == "NUMBER":
            self.pos += 1
            return ast.Number(tok.value, tok.span)
        if tok.kind == "ANGLE":
            self.pos += 1
            return ast.AngleLit(tok.value, tok.span)
        if tok.is_("KEYWORD", "Π"):
            self.pos += 1
            return ast.PiSet(tok.span)
        if tok.is_("KEYWORD", "P"):
            self.pos += 1
            self.expect("OP", "(")
            self.expect("KEYWORD", "NeuralPolicy")
            self.expect("OP", ")")
            self.expect("OP", "(")
            arg = self.parse_expr()
            self.expect("OP", ")")
            return ast.PolicyProb(arg, tok.span)
        if tok.kind == "NAME":
            self.pos += 1
            if tok.value in ast.CALLS and self.at("OP", "("):
                self.pos += 1
                args = [self.parse_expr()]
                while self.accept("OP", ","):
                    args.append(self.parse_expr())
                self.expect("OP", ")")
                return ast.Call(tok.value, tuple(args), tok.span)
            return ast.Name(tok.value, tok.span)
        if tok.is_("OP", "("):
            self.pos += 1
            inner = self.parse_expr()
            self.expect("OP", ")")
            return inner
        raise self.error("expected an expression", {"number", "angle", "name", "(", "Π", "P"})


def parse(tokens: list[Token]) -> ast.Program:
    return Parser(tokens).parse_program()


def parse_source(source: str) -> ast.Program:
    return parse(tokenize(source))
