"""Hypothesis strategies producing printable, parseable navigation-program ASTs."""
from hypothesis import strategies as st

from piprl.dsl import ast

NAMES = ("x", "pose estimate", "SNR", "Last SNR", "movement angle", "angle", "cost", "goal",
         "link state estimate", "intermediate", "D", "a_F")
DECL_NAMES = ("reverse AoA", "SNR prior", "Cost Correction", "meta-program", "random move",
              "pose", "path estimate", "Link State Prior", "Visual Control", "explore")

numbers = st.one_of(st.integers(0, 500).map(float),
                    st.floats(0, 1e4, allow_nan=False, allow_infinity=False))
names = st.sampled_from(NAMES)


def _leaf():
    return st.one_of(
        numbers.map(ast.Number),
        numbers.map(ast.AngleLit),
        names.map(ast.Name),
        st.just(ast.PiSet()),
    )


def _extend(child):
    cmp_op = st.sampled_from(ast.COMPARISONS)
    return st.one_of(
        st.builds(ast.Index, names.map(ast.Name), st.integers(1, 3)),
        st.builds(ast.Binary, st.sampled_from(("+", "-", "*", "/", "and", "or")), child, child),
        st.builds(ast.Binary, cmp_op, child, child),
        st.integers(2, 3).flatmap(lambda k: st.builds(
            lambda ops, xs: ast.Chain(tuple(xs), tuple(ops)),
            st.lists(cmp_op, min_size=k, max_size=k), st.lists(child, min_size=k + 1, max_size=k + 1))),
        st.builds(ast.Unary, st.sampled_from(("not", "-", "#")), child),
        st.builds(ast.Member, child, child),
        st.builds(lambda fn, a: ast.Call(fn, (a,)), st.sampled_from(ast.CALLS), child),
        st.builds(ast.PolicyProb, child),
        st.builds(ast.Executed, st.sampled_from(("a_F", "a_L", "a_R")).map(ast.Name)),
    )


exprs = st.recursive(_leaf(), _extend, max_leaves=8)
targets = st.builds(ast.Target, names, st.one_of(st.none(), st.integers(1, 3)))


def _block(stmt, max_size=3):
    return st.lists(stmt, min_size=1, max_size=max_size).map(tuple)


def _with_if(simple):
    return st.recursive(
        simple,
        lambda inner: st.builds(ast.If, exprs, _block(inner),
                                st.one_of(st.just(()), _block(inner))),
        max_leaves=4,
    )


actions = st.sampled_from(("a_F", "a_L", "a_R")).map(ast.ExecuteAction)
prob_choice = st.lists(st.tuples(actions, st.sampled_from((0.33, 0.5, 0.25, 0.1, 1.0))),
                       min_size=2, max_size=3).map(lambda cs: ast.ProbChoice(tuple(cs)))
policy_stmt = _with_if(st.one_of(
    st.builds(ast.Assign, targets, exprs),
    actions,
    prob_choice,
    st.sampled_from(DECL_NAMES).map(ast.ExecutePolicy),
    st.builds(ast.ExecuteOption, st.sampled_from(("Visual Control", "Planner")), exprs, exprs),
    st.builds(ast.ExecuteNeural, st.one_of(st.none(), st.just("PPO")),
              st.one_of(st.none(), st.sampled_from(DECL_NAMES)),
              st.lists(st.sampled_from(DECL_NAMES), max_size=2, unique=True).map(tuple)),
))
effect_stmt = _with_if(st.one_of(
    st.builds(ast.Update, targets, exprs),
    st.builds(ast.Return, exprs, st.one_of(st.none(), st.sampled_from(("cost", "pose")))),
    st.just(ast.Terminate()),
))
restriction_stmt = _with_if(st.builds(ast.Return, exprs))

components = st.lists(st.sampled_from(("x_hat", "y_hat", "phi_hat", "g", "Omega_rx", "v", "l_hat")),
                      min_size=1, max_size=3).map(tuple)


def _decl(name):
    return st.one_of(
        st.builds(ast.FactorDecl, st.just(name), components),
        st.builds(ast.FeatureDecl, st.just(name), components),
        st.builds(ast.PolicyDecl, st.just(name), _block(policy_stmt)),
        st.builds(ast.EffectDecl, st.just(name), _block(effect_stmt)),
        st.builds(ast.ActionRestrictionDecl, st.just(name), _block(restriction_stmt)),
        st.just(ast.OptionDecl(name)),
    )


@st.composite
def programs(draw):
    chosen = draw(st.lists(st.sampled_from(DECL_NAMES), min_size=1, max_size=4, unique=True))
    decls = tuple(draw(_decl(n)) for n in chosen)
    meta = next((d.name for d in decls if isinstance(d, ast.PolicyDecl) and d.name == ast.META_NAME), None)
    return ast.Program(decls, meta)
