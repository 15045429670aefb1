import itertools

import pytest

from annocheck.lang import And, Eq, Field, Lit, Not, Var
from annocheck.pred import (
    AndP,
    Atom,
    CachedPred,
    DefRef,
    ExistsP,
    FalseP,
    ForallP,
    ImpP,
    NotP,
    OrP,
    PredDef,
    TrueP,
    Verdict,
    conjuncts,
    entails,
    eval_pred,
    normalize,
    pred_free_vars,
    pred_state_fields,
    semantically_equal,
    subst_pred,
)
from annocheck.values import (
    BoolDom,
    NatRange,
    State,
    StateSchema,
    enumerate_domain,
    enumerate_states,
)

SCHEMA = StateSchema((("flag", BoolDom()), ("n", NatRange(0, 2))))

FLAG = Atom(Field("flag"))
N_IS = lambda k: Atom(Eq(Field("n"), Lit(k)))

# A small but varied predicate family over the two fields; entails is
# compared against brute-force enumeration over all pairs.
FAMILY = (
    TrueP(),
    FalseP(),
    FLAG,
    NotP(FLAG),
    N_IS(0),
    N_IS(2),
    AndP((FLAG, N_IS(1))),
    OrP((FLAG, N_IS(0))),
    ImpP(FLAG, N_IS(0)),
    ForallP("k", NatRange(0, 1), OrP((Atom(Eq(Field("n"), Var("k"))), FLAG))),
    ExistsP("k", NatRange(0, 2), Atom(Eq(Field("n"), Var("k")))),
)


def naive_entails(P, Q, schema, defs=None, var_domains=None):
    names = sorted(var_domains or {})
    streams = [list(enumerate_domain(var_domains[n])) for n in names]
    for vals in itertools.product(*streams):
        env = dict(zip(names, vals))
        for s in enumerate_states(schema):
            if eval_pred(P, env, s, defs) and not eval_pred(Q, env, s, defs):
                return False
    return True


def test_entails_agrees_with_brute_force_on_all_pairs():
    for P, Q in itertools.product(FAMILY, repeat=2):
        got = entails(P, Q, SCHEMA).holds()
        want = naive_entails(P, Q, SCHEMA)
        assert got == want, f"{P} entails {Q}: got {got}, want {want}"


def test_entails_counterexample_is_a_real_state_and_deterministic():
    v1 = entails(FLAG, N_IS(0), SCHEMA)
    v2 = entails(FLAG, N_IS(0), SCHEMA)
    assert v1.kind == Verdict.VIOLATED
    assert v1.witness.state == v2.witness.state
    s = v1.witness.state
    assert eval_pred(FLAG, {}, s) and not eval_pred(N_IS(0), {}, s)


def test_entails_quantifies_free_variables_over_their_domains():
    P = Atom(Eq(Field("n"), Var("x")))
    assert entails(P, N_IS(1), SCHEMA, None, {"x": NatRange(1, 1)}).holds()
    v = entails(P, N_IS(1), SCHEMA, None, {"x": NatRange(0, 1)})
    assert v.kind == Verdict.VIOLATED
    assert dict(v.witness.env)["x"] == 0


def test_normalize_flattens_dedupes_and_sorts():
    p = AndP((FLAG, AndP((N_IS(0), FLAG)), TrueP()))
    n = normalize(p)
    assert isinstance(n, AndP)
    assert len(n.items) == 2
    assert normalize(n) == n
    assert normalize(AndP((FLAG, FalseP()))) == FalseP()
    assert normalize(AndP(())) == TrueP()
    assert conjuncts(p) == n.items


def test_normalize_is_meaning_preserving_on_the_family():
    for P in FAMILY:
        for s in enumerate_states(SCHEMA):
            assert eval_pred(P, {}, s) == eval_pred(normalize(P), {}, s)


def test_defref_unfolds_with_arguments():
    defs = {"is_n": PredDef(("k",), Atom(Eq(Field("n"), Var("k"))))}
    p = DefRef("is_n", (Lit(2),))
    assert eval_pred(p, {}, State((("flag", False), ("n", 2))), defs)
    assert not eval_pred(p, {}, State((("flag", False), ("n", 1))), defs)


def test_subst_avoids_capturing_quantified_binders():
    # Substituting x := k must not let the binder k capture it.
    p = ForallP("k", NatRange(0, 2), Atom(Eq(Var("k"), Var("x"))))
    q = subst_pred(p, {"x": Var("k")}, {})
    s = State((("flag", False), ("n", 0)))
    # The original is false for any fixed x; capture would make it true.
    assert not eval_pred(q, {"k": 0}, s)


def test_pred_state_fields_sees_through_definitions():
    defs = {"f": PredDef((), FLAG)}
    assert pred_state_fields(AndP((DefRef("f", ()), N_IS(0))), defs) == frozenset(
        {"flag", "n"}
    )


def test_pred_free_vars():
    p = ForallP("k", NatRange(0, 1), Atom(Eq(Var("k"), Var("x"))))
    assert pred_free_vars(p) == frozenset({"x"})


def test_cached_pred_matches_direct_evaluation():
    for P in FAMILY:
        c = CachedPred(P, None, SCHEMA)
        for s in enumerate_states(SCHEMA):
            assert c({}, s) == eval_pred(P, {}, s)


def test_semantically_equal():
    assert semantically_equal(ImpP(FLAG, N_IS(0)), OrP((NotP(FLAG), N_IS(0))), SCHEMA)
    assert not semantically_equal(FLAG, N_IS(0), SCHEMA)


def test_and_short_circuit_protects_guarded_conjuncts():
    # The second conjunct faults on n=0 states via an asserted lookup
    # pattern; the guard must keep evaluation total.
    from annocheck.lang import MapLookup
    from annocheck.values import IdDom, MapDom, VMap

    schema = StateSchema((("m", MapDom(IdDom(1), BoolDom())),))
    from annocheck.lang import DomOf, In

    guarded = AndP(
        (
            Atom(In(Lit(0), DomOf(Field("m")))),
            Atom(Eq(MapLookup(Field("m"), Lit(0), asserted=True), Lit(True))),
        )
    )
    empty = State((("m", VMap()),))
    assert eval_pred(guarded, {}, empty) is False
