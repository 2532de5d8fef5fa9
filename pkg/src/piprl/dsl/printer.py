from __future__ import annotations

from . import ast

INDENT = "    "

_PREC_OR, _PREC_AND, _PREC_NOT, _PREC_CMP, _PREC_IN = 1, 2, 3, 4, 5
_PREC_ADD, _PREC_MUL, _PREC_UNARY, _PREC_POSTFIX, _PREC_ATOM = 6, 7, 8, 9, 10

_BINARY_PREC = {"or": _PREC_OR, "and": _PREC_AND, "+": _PREC_ADD, "-": _PREC_ADD,
                "*": _PREC_MUL, "/": _PREC_MUL}
_DECL_KEYWORD = {
    ast.PolicyDecl: "Policy",
    ast.EffectDecl: "Effect",
    ast.ActionRestrictionDecl: "ActionRestriction",
}


def format_number(value: float) -> str:
    if float(value).is_integer() and abs(value) < 1e15:
        return str(int(value))
    return repr(float(value))


def _prec(e) -> int:
    if isinstance(e, ast.Binary):
        return _BINARY_PREC.get(e.op, _PREC_CMP)
    if isinstance(e, ast.Chain):
        return _PREC_CMP
    if isinstance(e, ast.Unary):
        return _PREC_NOT if e.op == "not" else _PREC_UNARY
    if isinstance(e, ast.Member):
        return _PREC_IN
    if isinstance(e, (ast.Index, ast.Executed)):
        return _PREC_POSTFIX
    return _PREC_ATOM


def format_expr(e, min_prec: int = 0) -> str:
    text = _format(e)
    return f"({text})" if _prec(e) < min_prec else text


def _format(e) -> str:
    if isinstance(e, ast.Number):
        return format_number(e.value)
    if isinstance(e, ast.AngleLit):
        return f"{format_number(e.degrees)}deg"
    if isinstance(e, ast.Name):
        return e.name
    if isinstance(e, ast.PiSet):
        return "Π"
    if isinstance(e, ast.Index):
        return f"{format_expr(e.base, _PREC_POSTFIX)}[{e.index}]"
    if isinstance(e, ast.Executed):
        return f"{format_expr(e.action, _PREC_POSTFIX)} executed"
    if isinstance(e, ast.Call):
        return f"{e.fn}({', '.join(format_expr(a) for a in e.args)})"
    if isinstance(e, ast.PolicyProb):
        return f"P(NeuralPolicy)({format_expr(e.arg)})"
    if isinstance(e, ast.Unary):
        if e.op == "not":
            return f"not {format_expr(e.operand, _PREC_NOT)}"
        return f"{e.op}{format_expr(e.operand, _PREC_UNARY)}"
    if isinstance(e, ast.Member):
        return f"{format_expr(e.element, _PREC_ADD)} in {format_expr(e.collection, _PREC_ADD)}"
    if isinstance(e, ast.Chain):
        parts = [format_expr(e.operands[0], _PREC_IN)]
        for op, operand in zip(e.ops, e.operands[1:]):
            parts.append(f"{op} {format_expr(operand, _PREC_IN)}")
        return " ".join(parts)
    if isinstance(e, ast.Binary):
        prec = _prec(e)
        if prec == _PREC_CMP:
            return f"{format_expr(e.lhs, _PREC_IN)} {e.op} {format_expr(e.rhs, _PREC_IN)}"
        # left associative: the right operand binds one level tighter
        return f"{format_expr(e.lhs, prec)} {e.op} {format_expr(e.rhs, prec + 1)}"
    raise TypeError(f"not an expression node: {e!r}")


def _target(t: ast.Target) -> str:
    return t.name if t.index is None else f"{t.name}[{t.index}]"


def _statement_lines(stmt, depth: int) -> list[str]:
    pad = INDENT * depth
    if isinstance(stmt, ast.If):
        lines = [f"{pad}if {format_expr(stmt.condition)}:"]
        for s in stmt.then:
            lines += _statement_lines(s, depth + 1)
        if stmt.orelse:
            lines.append(f"{pad}else:")
            for s in stmt.orelse:
                lines += _statement_lines(s, depth + 1)
        return lines
    if isinstance(stmt, ast.Assign):
        return [f"{pad}{_target(stmt.target)} := {format_expr(stmt.value)}"]
    if isinstance(stmt, ast.Update):
        return [f"{pad}{_target(stmt.target)} = {format_expr(stmt.value)}"]
    if isinstance(stmt, ast.ExecuteAction):
        return [f"{pad}Execute {stmt.action}"]
    if isinstance(stmt, ast.ProbChoice):
        lines = []
        for i, (choice, p) in enumerate(stmt.choices):
            lead = "" if i == 0 else "or "
            lines.append(f"{pad}{lead}Execute {choice.action} w/ P({format_number(p)})")
        return lines
    if isinstance(stmt, ast.ExecutePolicy):
        return [f"{pad}Execute Policy: {stmt.policy}"]
    if isinstance(stmt, ast.ExecuteOption):
        return [f"{pad}Execute Option: {stmt.option}: init := {format_expr(stmt.init)} "
                f"until := {format_expr(stmt.until)}"]
    if isinstance(stmt, ast.ExecuteNeural):
        text = f"{pad}Execute NeuralPolicy"
        if stmt.model is not None:
            text += f": {stmt.model}"
        if stmt.restriction is not None:
            text += f" and ActionRestriction: {stmt.restriction}"
        if stmt.effects:
            text += f" and Effect: {', '.join(stmt.effects)}"
        return [text]
    if isinstance(stmt, ast.Return):
        if stmt.target is not None:
            return [f"{pad}Return {stmt.target} = {format_expr(stmt.value)}"]
        return [f"{pad}Return {format_expr(stmt.value)}"]
    if isinstance(stmt, ast.Terminate):
        return [f"{pad}terminate NeuralPolicy and reset"]
    raise TypeError(f"not a statement node: {stmt!r}")


def _declaration_lines(decl) -> list[str]:
    if isinstance(decl, (ast.FactorDecl, ast.FeatureDecl)):
        keyword = "Factor" if isinstance(decl, ast.FactorDecl) else "Feature"
        if len(decl.components) == 1:
            rhs = decl.components[0]
        else:
            rhs = f"({', '.join(decl.components)})"
        return [f"{keyword} {decl.name} := {rhs}"]
    if isinstance(decl, ast.OptionDecl):
        return [f"Option {decl.name}"]
    lines = [f"{_DECL_KEYWORD[type(decl)]} {decl.name}:"]
    for stmt in decl.body:
        lines += _statement_lines(stmt, 1)
    return lines


def pretty_print(program: ast.Program) -> str:
    lines: list[str] = []
    for decl in program.declarations:
        lines += _declaration_lines(decl)
    return "\n".join(lines) + ("\n" if lines else "")
