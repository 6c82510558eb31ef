import hypothesis.strategies as st
import pytest
from hypothesis import given, settings

from jumpmu import formulas as F

from conftest import random_full_formula, random_guarded_formula


def test_parse_reach_formula():
    f = F.parse_mu_formula("mu X. (p | <> X)")
    assert f == F.Mu("X", F.Or(F.Prop("p"), F.Diamond(F.Var("X"))))


def test_parse_knowledge():
    f = F.parse_mu_formula("K a (p | q)")
    assert f == F.Know("a", F.Or(F.Prop("p"), F.Prop("q")))


def test_parse_rejects_negative_bound_variable():
    with pytest.raises(F.PositivityError) as err:
        F.parse_mu_formula("mu X. ~X")
    assert err.value.variable == "X"


def test_parse_error_carries_position():
    text = "mu X. (p | )"
    with pytest.raises(F.ParseError) as err:
        F.parse_mu_formula(text)
    assert err.value.position == text.index(")")


def test_alpha_renaming_makes_binders_distinct():
    f = F.parse_mu_formula("(mu X. <> X) & (mu X. [] X)")
    binders = [g.var for g in F.subformulas(f) if isinstance(g, (F.Mu, F.Nu))]
    assert len(binders) == len(set(binders))


def test_double_negation_is_positive():
    # ~~X is an even number of negations
    f = F.parse_mu_formula("mu X. <> ~~X")
    assert isinstance(f, F.Mu)


def test_nnf_modal_duality():
    f = F.to_negation_normal_form(F.Not(F.Diamond(F.Prop("p"))))
    assert f == F.Box(F.Not(F.Prop("p")))


def test_nnf_fixpoint_duality_flips_variable():
    g = F.parse_mu_formula("mu X. (p | <> X)")
    f = F.to_negation_normal_form(F.Not(g))
    assert f == F.Nu("X", F.And(F.Not(F.Prop("p")), F.Box(F.Var("X"))))


def test_nnf_epistemic_duality():
    f = F.to_negation_normal_form(F.Not(F.Know("a", F.Prop("p"))))
    assert f == F.Possible("a", F.Not(F.Prop("p")))


def test_nnf_leaves_only_negated_propositions(rng):
    for _ in range(100):
        f = random_full_formula(rng, 6, ("p", "q"), ("a",))
        g = F.to_negation_normal_form(f)
        for sub in F.subformulas(g):
            if isinstance(sub, F.Not):
                assert isinstance(sub.sub, F.Prop)


def test_assign_colors_single_mu():
    f = F.parse_mu_formula("mu X. (p | <> X)")
    assert F.assign_colors(f) == {"X": 1}


def test_assign_colors_single_nu():
    f = F.parse_mu_formula("nu Y. (p & [] Y)")
    assert F.assign_colors(f) == {"Y": 0}


def test_assign_colors_alternation():
    f = F.parse_mu_formula("nu Y. mu X. ((p & <> Y) | <> X)")
    assert F.assign_colors(f) == {"Y": 0, "X": 1}


def test_assign_colors_invariants(rng):
    for _ in range(150):
        f = random_guarded_formula(rng, 7, ("p",), ("a",))
        colors = F.assign_colors(f)

        def walk(g, outer):
            if isinstance(g, (F.Mu, F.Nu)):
                c = colors[g.var]
                assert c % 2 == (1 if isinstance(g, F.Mu) else 0)
                if outer is not None:
                    assert outer <= c
                walk(g.body, c)
            else:
                for sub in F.children(g):
                    walk(sub, outer)

        walk(f, None)
        if colors:
            values = sorted(set(colors.values()))
            assert values == list(range(values[0], values[-1] + 1))
            assert values[0] in (0, 1)


def test_assign_colors_alpha_stable():
    f = F.parse_mu_formula("nu Y. mu X. ((p & <> Y) | <> X)")
    g = F.parse_mu_formula("nu W. mu V. ((p & <> W) | <> V)")

    def binder_colors(h, colors):
        out = []

        def walk(x):
            if isinstance(x, (F.Mu, F.Nu)):
                out.append(colors[x.var])
                walk(x.body)
            else:
                for sub in F.children(x):
                    walk(sub)

        walk(h)
        return out

    assert binder_colors(f, F.assign_colors(f)) == binder_colors(g, F.assign_colors(g))


def test_check_guarded_examples():
    assert F.check_guarded(F.parse_mu_formula("mu X. (p | <> X)")) == []
    assert F.check_guarded(F.parse_mu_formula("mu X. (p | X)")) == ["X"]
    assert F.check_guarded(F.parse_mu_formula("mu X. (p | K a X)")) == []


@st.composite
def mu_formulas(draw):
    props = ("p", "q")
    agents = ("a", "b")

    def gen(depth, bound):
        options = ["prop", "true", "false", "not"]
        if bound:
            options.append("var")
        if depth > 0:
            options += ["or", "and", "dia", "box", "know", "mu", "nu"]
        kind = draw(st.sampled_from(options))
        if kind == "prop":
            return F.Prop(draw(st.sampled_from(props)))
        if kind == "true":
            return F.TrueF()
        if kind == "false":
            return F.FalseF()
        if kind == "var":
            return F.Var(draw(st.sampled_from(sorted(bound))))
        if kind == "not":
            # keep positivity: negate a closed subformula
            return F.Not(gen(depth - 1, frozenset()) if depth else F.Prop("p"))
        if kind in ("or", "and"):
            left, right = gen(depth - 1, bound), gen(depth - 1, bound)
            return F.Or(left, right) if kind == "or" else F.And(left, right)
        if kind == "dia":
            return F.Diamond(gen(depth - 1, bound))
        if kind == "box":
            return F.Box(gen(depth - 1, bound))
        if kind == "know":
            return F.Know(draw(st.sampled_from(agents)), gen(depth - 1, bound))
        var = f"V{draw(st.integers(min_value=0, max_value=20))}"
        body = gen(depth - 1, bound | {var})
        return F.Mu(var, body) if kind == "mu" else F.Nu(var, body)

    return gen(draw(st.integers(min_value=0, max_value=4)), frozenset())


@settings(derandomize=True, max_examples=200)
@given(mu_formulas())
def test_print_parse_round_trip(f):
    printed = F.format_mu(f)
    reparsed = F.parse_mu_formula(printed)
    assert F.alpha_eq(f, reparsed), printed


def test_atl_parse_coalition_forms():
    f = F.parse_atl_formula("<<a,b>> X (p | q)")
    assert f == F.CoalitionNext(("a", "b"), F.AtlOr(F.AtlProp("p"), F.AtlProp("q")))
    g = F.parse_atl_formula("<<a>> p U q")
    assert g == F.CoalitionUntil(("a",), F.AtlProp("p"), F.AtlProp("q"))


def test_atl_eventually_desugars_to_until():
    f = F.parse_atl_formula("<<a>> F p")
    assert isinstance(f, F.CoalitionUntil)
    assert f.right == F.AtlProp("p")
    # the left side is a tautology over p
    assert f.left == F.AtlOr(F.AtlProp("p"), F.AtlNot(F.AtlProp("p")))


def test_atl_empty_coalition_parses():
    f = F.parse_atl_formula("<<>> X p")
    assert f.coalition == ()


def test_atl_undeclared_agent_rejected():
    with pytest.raises(F.FormulaError):
        F.parse_atl_formula("<<c>> X p", declared_agents=("a", "b"))


def test_atl_round_trip():
    texts = ["<<a>> X p", "<<a,b>> (p | q) U ~p", "<<>> X (p | ~q)"]
    for text in texts:
        f = F.parse_atl_formula(text)
        assert F.parse_atl_formula(F.format_atl(f)) == f
    nested = F.AtlOr(F.CoalitionUntil(("a",), F.AtlProp("p"), F.AtlProp("q")), F.AtlProp("r"))
    assert F.parse_atl_formula(F.format_atl(nested)) == nested
