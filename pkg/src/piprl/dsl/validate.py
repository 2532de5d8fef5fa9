"""Static checks over a parsed program.

Validation is all-or-nothing: either the program comes back unchanged or a
:class:`ValidationError` carrying every diagnostic is raised.
"""
from __future__ import annotations

from . import ast
from .errors import Diagnostic, ValidationError

ACTIONS = ("a_F", "a_L", "a_R")
BUILTIN_OPTIONS = ("visual control",)
# symbols the runtime binds without a declaration; value is arity
BUILTINS = {
    "goal": 3,
    "d": 1,
    "snr": 1,
    "last snr": 1,
    "movement angle": 1,
    "angle": 1,
    "cost": 1,
    "link state estimate": 1,
    "last link state estimate": 1,
}
PROBABILITY_TOLERANCE = 0.02

_POLICY_STMTS = (ast.If, ast.Assign, ast.ExecuteAction, ast.ProbChoice, ast.ExecutePolicy,
                 ast.ExecuteOption, ast.ExecuteNeural)
_EFFECT_STMTS = (ast.If, ast.Return, ast.Terminate, ast.Update)
_RESTRICTION_STMTS = (ast.If, ast.Return)


class _Checker:
    def __init__(self, program: ast.Program):
        self.program = program
        self.diagnostics: list[Diagnostic] = []
        self.decls: dict[str, object] = {}
        self.locals: dict[str, int] = {}

    def report(self, span, message):
        self.diagnostics.append(Diagnostic(span, message))

    def run(self):
        for decl in self.program.declarations:
            key = decl.name.lower()
            if key in self.decls:
                self.report(decl.span, f"duplicate declaration {decl.name}")
            else:
                self.decls[key] = decl

        for decl in self.program.declarations:
            if isinstance(decl, ast.PolicyDecl):
                self.locals = _collect_locals(decl.body)
                self.check_body(decl.body, _POLICY_STMTS, "Policy")
            elif isinstance(decl, ast.EffectDecl):
                self.locals = {}
                self.check_body(decl.body, _EFFECT_STMTS, "Effect")
            elif isinstance(decl, ast.ActionRestrictionDecl):
                self.locals = {}
                self.check_body(decl.body, _RESTRICTION_STMTS, "ActionRestriction")
        self.check_policy_cycles()

    # -- lookups ------------------------------------------------------------

    def arity(self, name: str) -> int | None:
        key = name.lower()
        decl = self.decls.get(key)
        if isinstance(decl, (ast.FactorDecl, ast.FeatureDecl)):
            return decl.arity
        if key in self.locals:
            return self.locals[key]
        if key in BUILTINS:
            return BUILTINS[key]
        return None

    def resolves(self, name: str) -> bool:
        key = name.lower()
        return (key in self.decls or key in self.locals or key in BUILTINS
                or name in ACTIONS)

    def expect_decl(self, name, cls, span, what):
        decl = self.decls.get(name.lower())
        if decl is None:
            self.report(span, f"unresolved identifier {name}")
        elif not isinstance(decl, cls):
            self.report(span, f"{name} is not {what}")

    # -- statements ---------------------------------------------------------

    def check_body(self, body, allowed, owner):
        for stmt in body:
            if not isinstance(stmt, allowed):
                self.report(stmt.span, f"{type(stmt).__name__} statement not allowed in {owner}")
            self.check_statement(stmt, allowed, owner)

    def check_statement(self, stmt, allowed, owner):
        if isinstance(stmt, ast.If):
            self.check_expr(stmt.condition)
            self.check_body(stmt.then, allowed, owner)
            self.check_body(stmt.orelse, allowed, owner)
        elif isinstance(stmt, ast.Assign):
            if stmt.target.index is not None and stmt.target.index < 1:
                self.report(stmt.target.span, f"index {stmt.target.index} out of range (indices start at 1)")
            self.check_expr(stmt.value)
        elif isinstance(stmt, ast.Update):
            key = stmt.target.name.lower()
            decl = self.decls.get(key)
            if key != "cost" and not isinstance(decl, (ast.FactorDecl, ast.FeatureDecl)):
                self.report(stmt.target.span, f"unresolved identifier {stmt.target.name}")
            self.check_expr(stmt.value)
        elif isinstance(stmt, ast.ExecuteAction):
            if stmt.action not in ACTIONS:
                self.report(stmt.span, f"unknown action {stmt.action}")
        elif isinstance(stmt, ast.ProbChoice):
            total = 0.0
            for choice, p in stmt.choices:
                if choice.action not in ACTIONS:
                    self.report(choice.span, f"unknown action {choice.action}")
                if not 0.0 <= p <= 1.0:
                    self.report(choice.span, f"probability {p:g} outside [0, 1]")
                total += p
            if abs(total - 1.0) > PROBABILITY_TOLERANCE:
                self.report(stmt.span, f"probabilities sum to {total:g}")
        elif isinstance(stmt, ast.ExecutePolicy):
            self.expect_decl(stmt.policy, ast.PolicyDecl, stmt.span, "a Policy")
        elif isinstance(stmt, ast.ExecuteOption):
            if stmt.option.lower() not in BUILTIN_OPTIONS:
                self.expect_decl(stmt.option, ast.OptionDecl, stmt.span, "an Option")
            if stmt.init is None or stmt.until is None:
                self.report(stmt.span, "Option requires both init and until")
            else:
                self.check_expr(stmt.init)
                self.check_expr(stmt.until)
        elif isinstance(stmt, ast.ExecuteNeural):
            if stmt.restriction is not None:
                self.expect_decl(stmt.restriction, ast.ActionRestrictionDecl, stmt.span, "an ActionRestriction")
            for name in stmt.effects:
                self.expect_decl(name, ast.EffectDecl, stmt.span, "an Effect")
        elif isinstance(stmt, ast.Return):
            if stmt.target is not None:
                key = stmt.target.lower()
                decl = self.decls.get(key)
                if key != "cost" and not isinstance(decl, (ast.FactorDecl, ast.FeatureDecl)):
                    self.report(stmt.span, f"unresolved identifier {stmt.target}")
            self.check_expr(stmt.value)

    # -- expressions --------------------------------------------------------

    def check_expr(self, e):
        if isinstance(e, (ast.Number, ast.AngleLit, ast.PiSet)):
            return
        if isinstance(e, ast.Name):
            if not self.resolves(e.name):
                self.report(e.span, f"unresolved identifier {e.name}")
        elif isinstance(e, ast.Index):
            self.check_expr(e.base)
            if e.index < 1:
                self.report(e.span, f"index {e.index} out of range (indices start at 1)")
            elif isinstance(e.base, ast.Name) and self.resolves(e.base.name):
                arity = self.arity(e.base.name)
                if arity is None:
                    self.report(e.span, f"{e.base.name} cannot be indexed")
                elif e.index > arity:
                    self.report(e.span, f"index {e.index} out of range for {e.base.name} of arity {arity}")
        elif isinstance(e, ast.Binary):
            self.check_expr(e.lhs)
            self.check_expr(e.rhs)
        elif isinstance(e, ast.Chain):
            for operand in e.operands:
                self.check_expr(operand)
        elif isinstance(e, ast.Member):
            self.check_expr(e.element)
            if not isinstance(e.collection, ast.PiSet):
                self.report(e.span, "membership is only defined over Π")
        elif isinstance(e, ast.Unary):
            if e.op == "#":
                if not isinstance(e.operand, ast.Name):
                    self.report(e.span, "# expects an ActionRestriction name")
                else:
                    self.expect_decl(e.operand.name, ast.ActionRestrictionDecl, e.operand.span,
                                     "an ActionRestriction")
            else:
                self.check_expr(e.operand)
        elif isinstance(e, ast.Call):
            expected = (1, 2) if e.fn == "arctan" else (1,)
            if len(e.args) not in expected:
                self.report(e.span, f"{e.fn} takes {' or '.join(map(str, expected))} argument(s)")
            for a in e.args:
                self.check_expr(a)
        elif isinstance(e, ast.PolicyProb):
            self.check_expr(e.arg)
        elif isinstance(e, ast.Executed):
            if not (isinstance(e.action, ast.Name) and e.action.name in ACTIONS):
                self.report(e.span, "executed expects an action")

    def check_policy_cycles(self):
        graph = {}
        for decl in self.program.of_type(ast.PolicyDecl):
            graph[decl.name.lower()] = {p.lower() for p in _called_policies(decl.body)}
        state: dict[str, int] = {}

        def visit(node, stack):
            state[node] = 1
            for nxt in graph.get(node, ()):
                if state.get(nxt) == 1:
                    decl = self.decls[node]
                    self.report(decl.span, f"recursive policy {decl.name}")
                elif nxt in graph and nxt not in state:
                    visit(nxt, stack)
            state[node] = 2

        for node in graph:
            if node not in state:
                visit(node, [])


def _collect_locals(body) -> dict[str, int]:
    found: dict[str, int] = {}
    for stmt in body:
        if isinstance(stmt, ast.Assign):
            key = stmt.target.name.lower()
            found[key] = max(found.get(key, 1), stmt.target.index or 1)
        elif isinstance(stmt, ast.If):
            for k, v in {**_collect_locals(stmt.then), **_collect_locals(stmt.orelse)}.items():
                found[k] = max(found.get(k, 1), v)
    return found


def _called_policies(body):
    for stmt in body:
        if isinstance(stmt, ast.ExecutePolicy):
            yield stmt.policy
        elif isinstance(stmt, ast.If):
            yield from _called_policies(stmt.then)
            yield from _called_policies(stmt.orelse)


def validate(program: ast.Program) -> ast.Program:
    checker = _Checker(program)
    checker.run()
    if checker.diagnostics:
        raise ValidationError(checker.diagnostics)
    return program
