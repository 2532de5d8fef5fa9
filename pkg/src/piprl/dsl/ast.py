"""AST node types.

Nodes are frozen dataclasses. Source spans are excluded from comparison so
``==`` is structural equality, which is what the print/parse round trip is
checked against.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

from .errors import SourceSpan

_NOSPAN = SourceSpan(1, 1, 0)


def _span():
    return field(default=_NOSPAN, compare=False, repr=False)


# -- expressions -------------------------------------------------------------

@dataclass(frozen=True)
class Number:
    value: float
    span: SourceSpan = _span()


@dataclass(frozen=True)
class AngleLit:
    degrees: float
    span: SourceSpan = _span()


@dataclass(frozen=True)
class Name:
    name: str
    span: SourceSpan = _span()


@dataclass(frozen=True)
class PiSet:
    """The discretized waypoint-angle set."""
    span: SourceSpan = _span()


@dataclass(frozen=True)
class Index:
    base: "Expr"
    index: int  # 1-based
    span: SourceSpan = _span()


@dataclass(frozen=True)
class Binary:
    op: str
    lhs: "Expr"
    rhs: "Expr"
    span: SourceSpan = _span()


@dataclass(frozen=True)
class Unary:
    op: str  # "not", "-", "#"
    operand: "Expr"
    span: SourceSpan = _span()


@dataclass(frozen=True)
class Chain:
    """Chained comparison such as ``lo <= angle <= hi``."""
    operands: tuple
    ops: tuple
    span: SourceSpan = _span()


@dataclass(frozen=True)
class Member:
    element: "Expr"
    collection: "Expr"
    span: SourceSpan = _span()


@dataclass(frozen=True)
class Call:
    fn: str
    args: tuple
    span: SourceSpan = _span()


@dataclass(frozen=True)
class PolicyProb:
    """``P(NeuralPolicy)(angle)``: probability the neural policy assigns to an angle."""
    arg: "Expr"
    span: SourceSpan = _span()


@dataclass(frozen=True)
class Executed:
    action: "Expr"
    span: SourceSpan = _span()


Expr = Union[Number, AngleLit, Name, PiSet, Index, Binary, Unary, Chain, Member,
             Call, PolicyProb, Executed]

COMPARISONS = ("==", "<=", ">=", "<", ">")
CALLS = ("cos", "sin", "arctan")


# -- statements --------------------------------------------------------------

@dataclass(frozen=True)
class Target:
    name: str
    index: Optional[int] = None
    span: SourceSpan = _span()


@dataclass(frozen=True)
class Assign:
    """``target := expr``: binds a policy-local value."""
    target: Target
    value: Expr
    span: SourceSpan = _span()


@dataclass(frozen=True)
class Update:
    """``target = expr``: an effect's description of a changed quantity."""
    target: Target
    value: Expr
    span: SourceSpan = _span()


@dataclass(frozen=True)
class If:
    condition: Expr
    then: tuple
    orelse: tuple = ()
    span: SourceSpan = _span()


@dataclass(frozen=True)
class ExecuteAction:
    action: str  # a_F, a_L or a_R
    span: SourceSpan = _span()


@dataclass(frozen=True)
class ProbChoice:
    choices: tuple  # of (ExecuteAction, probability)
    span: SourceSpan = _span()


@dataclass(frozen=True)
class ExecutePolicy:
    policy: str
    span: SourceSpan = _span()


@dataclass(frozen=True)
class ExecuteOption:
    option: str
    init: Expr
    until: Expr
    span: SourceSpan = _span()


@dataclass(frozen=True)
class ExecuteNeural:
    model: Optional[str]
    restriction: Optional[str]
    effects: tuple
    span: SourceSpan = _span()


@dataclass(frozen=True)
class Return:
    value: Expr
    target: Optional[str] = None
    span: SourceSpan = _span()


@dataclass(frozen=True)
class Terminate:
    span: SourceSpan = _span()


Statement = Union[Assign, Update, If, ExecuteAction, ProbChoice, ExecutePolicy,
                  ExecuteOption, ExecuteNeural, Return, Terminate]


# -- declarations ------------------------------------------------------------

@dataclass(frozen=True)
class FactorDecl:
    name: str
    components: tuple  # symbolic sensor names
    span: SourceSpan = _span()

    @property
    def arity(self) -> int:
        return len(self.components)


@dataclass(frozen=True)
class FeatureDecl:
    name: str
    components: tuple
    span: SourceSpan = _span()

    @property
    def arity(self) -> int:
        return len(self.components)


@dataclass(frozen=True)
class PolicyDecl:
    name: str
    body: tuple
    span: SourceSpan = _span()


@dataclass(frozen=True)
class EffectDecl:
    name: str
    body: tuple
    span: SourceSpan = _span()


@dataclass(frozen=True)
class ActionRestrictionDecl:
    name: str
    body: tuple
    span: SourceSpan = _span()


@dataclass(frozen=True)
class OptionDecl:
    name: str
    span: SourceSpan = _span()


Declaration = Union[FactorDecl, FeatureDecl, PolicyDecl, EffectDecl,
                    ActionRestrictionDecl, OptionDecl]

META_NAME = "meta-program"


@dataclass(frozen=True)
class Program:
    declarations: tuple
    meta: Optional[str] = None

    def get(self, name: str):
        key = name.lower()
        for decl in self.declarations:
            if decl.name.lower() == key:
                return decl
        return None

    def of_type(self, cls) -> list:
        return [d for d in self.declarations if isinstance(d, cls)]

    def without(self, *names: str) -> "Program":
        """Copy with the named declarations erased and references to them dropped."""
        drop = {n.lower() for n in names}
        decls = []
        for d in self.declarations:
            if d.name.lower() in drop:
                continue
            if isinstance(d, PolicyDecl):
                d = PolicyDecl(d.name, _strip_refs(d.body, drop), d.span)
            decls.append(d)
        return Program(tuple(decls), self.meta)


def _strip_refs(body: tuple, drop: set) -> tuple:
    out = []
    for stmt in body:
        if isinstance(stmt, If):
            stmt = If(stmt.condition, _strip_refs(stmt.then, drop), _strip_refs(stmt.orelse, drop), stmt.span)
        elif isinstance(stmt, ExecuteNeural):
            restriction = stmt.restriction
            if restriction is not None and restriction.lower() in drop:
                restriction = None
            effects = tuple(e for e in stmt.effects if e.lower() not in drop)
            stmt = ExecuteNeural(stmt.model, restriction, effects, stmt.span)
        out.append(stmt)
    return tuple(out)
