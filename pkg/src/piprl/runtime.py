"""Evaluate validated programs against per-step features.

The runtime walks the meta-program once per decision and turns it into a
:class:`StepDirective` for the agent loop: a primitive action, an option
to run, a hand-off to the neural policy, or the end of the episode.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Union

import numpy as np

from .angles import PI_SET, wrap
from .dsl import ast
from .dsl.validate import ACTIONS

OFFSET_DISTANCE = 2.5  # D, meters
TIE_TOLERANCE = 1e-9


class BindingError(KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


class EvalError(RuntimeError):
    pass


# -- values ------------------------------------------------------------------

class Angle(float):
    """Degrees, normalized into (-180, 180] on construction."""

    def __new__(cls, degrees):
        return super().__new__(cls, wrap(float(degrees)))

    def __repr__(self):
        return f"Angle({float(self)!r})"


@dataclass(frozen=True)
class Vector:
    items: tuple

    def __len__(self):
        return len(self.items)

    def __getitem__(self, i):
        return self.items[i]


@dataclass(frozen=True)
class ActionRef:
    name: str


@dataclass(frozen=True)
class Waypoint:
    x: float
    y: float


@dataclass(frozen=True)
class GoalRegion:
    """Stand-in for the unknown target pose: ``x == goal`` is the found predicate."""
    found: bool


@dataclass(frozen=True)
class AngleSet:
    members: tuple


Value = Union[float, Angle, bool, Vector, ActionRef, Waypoint, GoalRegion, AngleSet]


def _is_angle_component(symbol: str) -> bool:
    s = symbol.lower()
    return s.startswith(("phi", "omega", "theta")) or "angle" in s


@dataclass
class Bindings:
    values: dict
    found: bool = False
    extent: Optional[float] = None  # map side length for clamping waypoints
    policy_probs: Optional[np.ndarray] = None  # pi over PI_SET, for P(NeuralPolicy)(angle)

    def __contains__(self, name: str) -> bool:
        return name.lower() in self.values

    def __getitem__(self, name: str):
        try:
            return self.values[name.lower()]
        except KeyError:
            raise BindingError(f"unbound identifier {name!r}") from None

    def with_values(self, **extra) -> "Bindings":
        vals = dict(self.values)
        vals.update({k.replace("_", " ").lower(): v for k, v in extra.items()})
        return Bindings(vals, self.found, self.extent, self.policy_probs)


def _referenced_names(program: ast.Program) -> set:
    names = set()

    def expr(e):
        if isinstance(e, ast.Name):
            names.add(e.name.lower())
        elif isinstance(e, ast.Index):
            expr(e.base)
        elif isinstance(e, ast.Binary):
            expr(e.lhs)
            expr(e.rhs)
        elif isinstance(e, ast.Unary):
            if e.op != "#":
                expr(e.operand)
        elif isinstance(e, ast.Chain):
            for o in e.operands:
                expr(o)
        elif isinstance(e, ast.Member):
            expr(e.element)
            expr(e.collection)
        elif isinstance(e, ast.Call):
            for a in e.args:
                expr(a)
        elif isinstance(e, ast.PolicyProb):
            expr(e.arg)

    def body(stmts):
        for s in stmts:
            if isinstance(s, ast.If):
                expr(s.condition)
                body(s.then)
                body(s.orelse)
            elif isinstance(s, (ast.Assign, ast.Update)):
                expr(s.value)
            elif isinstance(s, ast.ExecuteOption):
                expr(s.init)
                expr(s.until)
            elif isinstance(s, ast.Return):
                expr(s.value)

    for d in program.declarations:
        if isinstance(d, (ast.PolicyDecl, ast.EffectDecl, ast.ActionRestrictionDecl)):
            body(d.body)
    return names


def bind(program: ast.Program, features: Mapping, *, found: bool = False,
         extent: float | None = None, policy_probs=None) -> Bindings:
    """Wire perception outputs and built-ins to the program's identifiers.

    ``features`` maps names (case-insensitive) to raw values; vectors for
    declared Features, scalars otherwise. ``None`` marks an unavailable value
    (for instance Last SNR on the first step) and is bound as such.
    """
    raw = {k.lower(): v for k, v in features.items()}
    values: dict = {"d": OFFSET_DISTANCE, "goal": GoalRegion(found)}
    referenced = _referenced_names(program)
    for decl in program.of_type(ast.FeatureDecl) + program.of_type(ast.FactorDecl):
        key = decl.name.lower()
        if key not in raw:
            if key in referenced or isinstance(decl, ast.FeatureDecl):
                raise BindingError(f"missing feature {decl.name!r}")
            continue
        v = raw.pop(key)
        if v is None:
            values[key] = None
            continue
        comps = tuple(v) if np.ndim(v) else (v,)
        if len(comps) != decl.arity:
            raise BindingError(f"feature {decl.name!r} expects {decl.arity} values, got {len(comps)}")
        items = tuple(Angle(c) if _is_angle_component(sym) else float(c)
                      for c, sym in zip(comps, decl.components))
        values[key] = items[0] if decl.arity == 1 else Vector(items)
    for key, v in raw.items():
        if key in ("movement angle", "angle") and v is not None:
            v = Angle(v)
        values[key] = v
    probs = None if policy_probs is None else np.asarray(policy_probs, dtype=float)
    return Bindings(values, found, extent, probs)


# -- expressions -------------------------------------------------------------

def _num(v, what="operand"):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise EvalError(f"{what} must be a number, got {type(v).__name__}")
    return float(v)


def _compare(op: str, a, b) -> bool:
    if isinstance(a, GoalRegion) or isinstance(b, GoalRegion):
        if op != "==":
            raise EvalError("goal supports only ==")
        return (a if isinstance(a, GoalRegion) else b).found
    if a is None or b is None:
        return False
    if isinstance(a, Vector) or isinstance(b, Vector):
        if op != "==":
            raise EvalError("vectors support only ==")
        return a == b
    a, b = _num(a), _num(b)
    if op == "==":
        return abs(a - b) <= TIE_TOLERANCE
    if op == "<=":
        return a <= b + TIE_TOLERANCE
    if op == ">=":
        return a >= b - TIE_TOLERANCE
    if op == "<":
        return a < b
    if op == ">":
        return a > b
    raise EvalError(f"unknown comparison {op}")


def _arith(op: str, a, b):
    if isinstance(a, Vector) and isinstance(b, Vector) and op in "+-":
        if len(a) != len(b):
            raise EvalError("vector arity mismatch")
        f = (lambda x, y: x + y) if op == "+" else (lambda x, y: x - y)
        return Vector(tuple(f(x, y) for x, y in zip(a.items, b.items)))
    a, b = _num(a), _num(b)
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        if b == 0:
            raise EvalError("division by zero")
        return a / b
    raise EvalError(f"unknown operator {op}")


def eval_expr(expr, bindings: Bindings, local: Mapping | None = None, program: ast.Program | None = None):
    """Evaluate an expression. Trigonometry is in degrees."""
    local = local or {}

    def ev(e):
        if isinstance(e, ast.Number):
            return float(e.value)
        if isinstance(e, ast.AngleLit):
            # literals are offsets (190deg must stay 190 inside arithmetic)
            return float(e.degrees)
        if isinstance(e, ast.Name):
            if e.name in ACTIONS:
                return ActionRef(e.name)
            key = e.name.lower()
            if key in local:
                return local[key]
            return bindings[key]
        if isinstance(e, ast.PiSet):
            return AngleSet(PI_SET)
        if isinstance(e, ast.Index):
            base = ev(e.base)
            if not isinstance(base, Vector):
                raise EvalError("indexing a non-vector")
            if not 1 <= e.index <= len(base):
                raise EvalError(f"index {e.index} out of range for arity {len(base)}")
            return base[e.index - 1]
        if isinstance(e, ast.Binary):
            if e.op == "and":
                return bool(ev(e.lhs)) and bool(ev(e.rhs))
            if e.op == "or":
                return bool(ev(e.lhs)) or bool(ev(e.rhs))
            lhs, rhs = ev(e.lhs), ev(e.rhs)
            if e.op in ast.COMPARISONS:
                return _compare(e.op, lhs, rhs)
            return _arith(e.op, lhs, rhs)
        if isinstance(e, ast.Unary):
            if e.op == "not":
                return not bool(ev(e.operand))
            if e.op == "-":
                v = ev(e.operand)
                return Angle(-v) if isinstance(v, Angle) else -_num(v)
            if e.op == "#":
                if program is None:
                    raise EvalError("# needs the program to resolve a restriction")
                decl = program.get(e.operand.name)
                return float(len(resolve_restriction(decl, bindings, program)))
        if isinstance(e, ast.Chain):
            return _eval_chain(e, [ev(o) for o in e.operands])
        if isinstance(e, ast.Member):
            el, coll = ev(e.element), ev(e.collection)
            if not isinstance(coll, AngleSet):
                raise EvalError("'in' needs an angle set")
            return any(abs(wrap(_num(el) - m)) <= TIE_TOLERANCE for m in coll.members)
        if isinstance(e, ast.Call):
            x = _num(ev(e.args[0]))
            if e.fn == "cos":
                return math.cos(math.radians(x))
            if e.fn == "sin":
                return math.sin(math.radians(x))
            if e.fn == "arctan":
                return Angle(math.degrees(math.atan(x)))
        if isinstance(e, ast.PolicyProb):
            if bindings.policy_probs is None:
                raise EvalError("no neural policy distribution bound")
            idx = int(round((wrap(_num(ev(e.arg))) + 170.0) / 10.0))
            return float(bindings.policy_probs[idx])
        if isinstance(e, ast.Executed):
            last = local.get("last action", bindings.values.get("last action"))
            return last == ev(e.action).name if isinstance(ev(e.action), ActionRef) else False
        raise EvalError(f"cannot evaluate {type(e).__name__}")

    return ev(expr)


def _eval_chain(e: ast.Chain, vals: list) -> bool:
    # lo <= angle <= hi with an angle in the middle is a wrap-around interval
    if (len(vals) == 3 and isinstance(vals[1], Angle) and e.ops[0] in ("<=", "<")
            and e.ops[1] in ("<=", "<") and None not in vals):
        lo, x, hi = (_num(v) for v in vals)
        width = hi - lo
        if width < 0:
            return False
        if width >= 360:
            return True
        offset = (x - lo) % 360.0
        if offset > 360.0 - TIE_TOLERANCE:
            offset -= 360.0
        lo_ok = offset >= -TIE_TOLERANCE if e.ops[0] == "<=" else offset > TIE_TOLERANCE
        hi_ok = offset <= width + TIE_TOLERANCE if e.ops[1] == "<=" else offset < width - TIE_TOLERANCE
        return lo_ok and hi_ok
    return all(_compare(op, a, b) for op, a, b in zip(e.ops, vals, vals[1:]))


# -- restrictions and effects ---------------------------------------------------

def _run_returns(body, bindings, local, program):
    """First Return reached, honoring if/else; None when none is reached."""
    for stmt in body:
        if isinstance(stmt, ast.If):
            branch = stmt.then if eval_expr(stmt.condition, bindings, local, program) else stmt.orelse
            hit = _run_returns(branch, bindings, local, program)
            if hit is not None:
                return hit
        elif isinstance(stmt, ast.Return):
            return stmt
    return None


def resolve_restriction(decl: ast.ActionRestrictionDecl, bindings: Bindings,
                        program: ast.Program | None = None) -> tuple:
    """Members of the angle set admitted by a restriction, in ascending order.

    Without a Last SNR (first step of an episode) every angle is admitted.
    """
    if decl is None:
        return PI_SET
    if bindings.values.get("last snr") is None:
        return PI_SET
    ret = _run_returns(decl.body, bindings, {}, program)
    if ret is None:
        return PI_SET
    keep = tuple(a for a in PI_SET
                 if eval_expr(ret.value, bindings, {"angle": Angle(a)}, program))
    return keep


@dataclass(frozen=True)
class CostCorrection:
    weight: float


@dataclass(frozen=True)
class LinkStateTermination:
    pass


EffectHook = Union[CostCorrection, LinkStateTermination]


def _contains(body, cls) -> bool:
    for s in body:
        if isinstance(s, cls):
            return True
        if isinstance(s, ast.If) and (_contains(s.then, cls) or _contains(s.orelse, cls)):
            return True
    return False


def effect_kind(decl: ast.EffectDecl) -> type | None:
    """Which hook an Effect declaration describes, judged from its body."""
    if _contains(decl.body, ast.Terminate):
        return LinkStateTermination
    for s in decl.body:
        if isinstance(s, ast.Return) and s.target is not None and s.target.lower() == "cost":
            return CostCorrection
    return None


def apply_effects(hooks, cost: float, ell, last_ell, no_signal: int | None = None) -> tuple[float, bool]:
    """Corrected cost and whether to terminate.

    A missing link state (no signal) ranks as ``no_signal`` when given, so
    walking out of coverage counts as a link-state increase; otherwise it
    never triggers termination.
    """
    if no_signal is not None:
        ell = no_signal if ell is None else ell
        last_ell = no_signal if last_ell is None else last_ell
    corrected, terminate = float(cost), False
    for hook in hooks:
        if isinstance(hook, CostCorrection):
            corrected *= hook.weight
        elif isinstance(hook, LinkStateTermination):
            if ell is not None and last_ell is not None and ell > last_ell:
                terminate = True
    return corrected, terminate


# -- directives --------------------------------------------------------------

@dataclass(frozen=True)
class Primitive:
    action: str


@dataclass(frozen=True)
class ExecuteOptionDirective:
    init: Waypoint
    until: Waypoint
    policy: str = ""


@dataclass(frozen=True)
class DelegateNeural:
    restriction: tuple
    effects: tuple  # hook classes, instantiated by the agent loop
    model: str | None = None


@dataclass(frozen=True)
class TerminateEpisode:
    reason: str


StepDirective = Union[Primitive, ExecuteOptionDirective, DelegateNeural, TerminateEpisode]


def _waypoint(v, extent) -> Waypoint:
    if isinstance(v, Waypoint):
        x, y = v.x, v.y
    elif isinstance(v, Vector) and len(v) >= 2:
        x, y = float(v[0]), float(v[1])
    else:
        raise EvalError("option endpoints must be positions")
    if extent is not None:
        eps = 1e-6
        x = min(max(x, eps), extent - eps)
        y = min(max(y, eps), extent - eps)
    return Waypoint(x, y)


def _assign(local, target: ast.Target, value):
    key = target.name.lower()
    if target.index is None:
        local[key] = value
        return
    cur = local.get(key)
    items = list(cur.items) if isinstance(cur, Vector) else []
    while len(items) < target.index:
        items.append(0.0)
    items[target.index - 1] = value
    local[key] = Vector(tuple(items))


def step(program: ast.Program, bindings: Bindings, rng: np.random.Generator | None = None,
         policy: str | None = None) -> StepDirective:
    """One decision of the meta-program (or of ``policy`` if given)."""
    if bindings.found:
        return TerminateEpisode("success")
    name = policy or program.meta or ast.META_NAME
    decl = program.get(name)
    if not isinstance(decl, ast.PolicyDecl):
        raise EvalError(f"no policy named {name!r}")
    out = _exec_policy(program, decl, bindings, rng, depth=0)
    if out is None:
        raise EvalError(f"policy {decl.name!r} produced no directive")
    return out


def _exec_policy(program, decl, bindings, rng, depth):
    if depth > 16:
        raise EvalError("policy nesting too deep")
    local: dict = {}

    def run(body):
        for stmt in body:
            if isinstance(stmt, ast.If):
                cond = eval_expr(stmt.condition, bindings, local, program)
                out = run(stmt.then if cond else stmt.orelse)
            elif isinstance(stmt, ast.Assign):
                _assign(local, stmt.target, eval_expr(stmt.value, bindings, local, program))
                out = None
            elif isinstance(stmt, ast.ExecuteAction):
                out = Primitive(stmt.action)
            elif isinstance(stmt, ast.ProbChoice):
                if rng is None:
                    raise EvalError("probabilistic choice needs an rng")
                p = np.array([c[1] for c in stmt.choices], dtype=float)
                k = int(rng.choice(len(p), p=p / p.sum()))
                out = Primitive(stmt.choices[k][0].action)
            elif isinstance(stmt, ast.ExecutePolicy):
                sub = program.get(stmt.policy)
                if not isinstance(sub, ast.PolicyDecl):
                    raise EvalError(f"no policy named {stmt.policy!r}")
                out = _exec_policy(program, sub, bindings, rng, depth + 1)
                if out is not None:
                    if isinstance(out, ExecuteOptionDirective) and not out.policy:
                        out = ExecuteOptionDirective(out.init, out.until, sub.name)
            elif isinstance(stmt, ast.ExecuteOption):
                out = ExecuteOptionDirective(
                    _waypoint(eval_expr(stmt.init, bindings, local, program), bindings.extent),
                    _waypoint(eval_expr(stmt.until, bindings, local, program), bindings.extent),
                    decl.name)
            elif isinstance(stmt, ast.ExecuteNeural):
                restriction = PI_SET
                if stmt.restriction is not None:
                    restriction = resolve_restriction(program.get(stmt.restriction), bindings, program)
                kinds = []
                for eff in stmt.effects:
                    kind = effect_kind(program.get(eff))
                    if kind is not None:
                        kinds.append(kind)
                out = DelegateNeural(restriction, tuple(kinds), stmt.model)
            else:
                out = None
            if out is not None:
                return out
        return None

    return run(decl.body)


# -- per-episode memory ------------------------------------------------------------

@dataclass
class EpisodeMemory:
    """Quantities carried between steps: last SNR, movement angle, last link state."""
    last_snr: Optional[float] = None
    last_link_state: Optional[int] = None
    movement_angle: Optional[float] = None
    last_position: Optional[tuple] = None

    def update_motion(self, pose) -> float:
        """Movement angle from the previous estimate to ``pose``.

        Zero displacement carries the previous angle forward; the first call
        uses the heading.
        """
        x, y, phi = pose
        if self.last_position is None:
            self.movement_angle = wrap(phi)
        else:
            dx, dy = x - self.last_position[0], y - self.last_position[1]
            if dx != 0.0 or dy != 0.0:
                self.movement_angle = wrap(math.degrees(math.atan2(dy, dx)))
        self.last_position = (x, y)
        return self.movement_angle

    def features(self, pose, path_row, snr: float, link_state) -> dict:
        """Feature dict for :func:`bind`; call :meth:`commit` after the step."""
        return {
            "pose estimate": tuple(pose),
            "path estimate": tuple(path_row),
            "link state estimate": link_state,
            "snr": snr,
            "last snr": self.last_snr,
            "movement angle": self.movement_angle,
            "last link state estimate": self.last_link_state,
        }

    def commit(self, snr: float, link_state) -> None:
        if link_state is None:
            return  # no signal, nothing measured
        self.last_snr = snr
        self.last_link_state = link_state
