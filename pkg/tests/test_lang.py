import pytest

from annocheck.lang import (
    And,
    Assert,
    Bind,
    Call,
    DomOf,
    Eq,
    ExecFault,
    Field,
    Gets,
    If,
    In,
    Lit,
    MapLookup,
    MapUpd,
    Not,
    Or,
    ProgDef,
    Put,
    Return,
    Select,
    SetLit,
    Var,
    call_graph_acyclic,
    comp_state_fields,
    eval_expr,
    is_atomic,
    run,
)
from annocheck.pred import Atom
from annocheck.values import (
    ABSENT,
    BoolDom,
    IdDom,
    MapDom,
    NatRange,
    SetDom,
    State,
    StateSchema,
    VMap,
    enumerate_states,
)

SCHEMA = StateSchema((("flag", BoolDom()), ("n", NatRange(0, 2))))


def st(flag, n):
    return State((("flag", flag), ("n", n)))


def rets(c, env, s, **kw):
    return tuple(o.ret for o in run(c, env, s, **kw))


def test_return_and_gets_leave_the_state_alone():
    s = st(True, 1)
    (o,) = run(Return(Lit(7)), {}, s)
    assert o.ret == 7 and o.state == s
    (o,) = run(Gets("n"), {}, s)
    assert o.ret == 1 and o.state == s


def test_put_updates_exactly_one_field():
    s = st(True, 1)
    (o,) = run(Put("n", Lit(2)), {}, s)
    assert o.ret is None
    assert o.state == st(True, 2)


def test_select_enumerates_the_set_and_empty_select_has_no_paths():
    s = st(False, 0)
    outs = run(Select(SetLit((Lit(0), Lit(1)))), {}, s)
    assert sorted(o.ret for o in outs) == [0, 1]
    assert run(Select(SetLit(())), {}, s) == ()


def test_outcomes_are_deduplicated_and_canonically_ordered():
    # Both branches of the choice produce the same outcome.
    c = Bind(Select(SetLit((Lit(0), Lit(1)))), "x", Return(Lit(True)))
    outs = run(c, {}, st(False, 0))
    assert len(outs) == 1
    c2 = Select(SetLit((Lit(2), Lit(0), Lit(1))))
    assert rets(c2, {}, st(False, 0)) == (0, 1, 2)


def test_bind_threads_state_and_binder():
    c = Bind(Gets("n"), "x", Put("n", Var("x")))
    (o,) = run(c, {}, st(True, 2))
    assert o.state == st(True, 2)


def test_if_picks_a_branch_on_the_evaluated_condition():
    c = If(Field("flag"), Return(Lit(1)), Return(Lit(0)))
    assert rets(c, {}, st(True, 0)) == (1,)
    assert rets(c, {}, st(False, 0)) == (0,)


def test_assert_faults_with_a_diagnostic():
    c = Assert(Atom(Field("flag")))
    (o,) = run(c, {}, st(True, 0))
    assert o.ret is None
    with pytest.raises(ExecFault):
        run(c, {}, st(False, 0))


def test_call_inlines_the_named_body_under_its_parameters():
    progs = {
        "bump": ProgDef(
            params=(("k", NatRange(0, 2)),),
            ret_domain=NatRange(0, 2),
            body=Bind(Gets("n"), "v", Put("n", Var("k"))),
        )
    }
    (o,) = run(Call("bump", (Lit(2),)), {}, st(False, 0), progs)
    assert o.state == st(False, 2)


MAP_SCHEMA = StateSchema((("m", MapDom(IdDom(2), BoolDom())),))


def test_map_lookup_defaults_to_absent_and_faults_when_asserted():
    s = State((("m", VMap()),))
    assert eval_expr(MapLookup(Field("m"), Lit(0)), {}, s) is ABSENT
    with pytest.raises(ExecFault):
        eval_expr(MapLookup(Field("m"), Lit(0), asserted=True), {}, s)


def test_and_or_short_circuit_guards_partial_lookups():
    s = State((("m", VMap()),))
    bad = Eq(MapLookup(Field("m"), Lit(0), asserted=True), Lit(True))
    guard = In(Lit(0), DomOf(Field("m")))
    assert eval_expr(And(guard, bad), {}, s) is False
    assert eval_expr(Or(Not(guard), bad), {}, s) is True


def test_map_update_feeds_dom():
    s = State((("m", VMap()),))
    e = DomOf(MapUpd(Field("m"), Lit(1), Lit(True)))
    assert eval_expr(e, {}, s) == frozenset({1})


def test_is_atomic():
    assert is_atomic(Return(Lit(1)))
    assert is_atomic(If(Field("flag"), Return(Lit(1)), Put("n", Lit(0))))
    assert not is_atomic(Bind(Gets("n"), "x", Return(Var("x"))))
    assert not is_atomic(If(Field("flag"), Bind(Gets("n"), "x", Return(Var("x"))), Return(Lit(0))))


def test_call_graph_cycle_detection():
    ok = {
        "a": ProgDef((), BoolDom(), Call("b", ())),
        "b": ProgDef((), BoolDom(), Return(Lit(True))),
    }
    bad = {
        "a": ProgDef((), BoolDom(), Call("b", ())),
        "b": ProgDef((), BoolDom(), Call("a", ())),
    }
    assert call_graph_acyclic(ok)
    assert not call_graph_acyclic(bad)


def test_comp_state_fields():
    c = Bind(Gets("n"), "x", Put("flag", Lit(True)))
    assert comp_state_fields(c, {}) == frozenset({"n", "flag"})


def test_run_is_deterministic_across_the_whole_universe():
    c = Bind(Select(SetLit((Lit(0), Lit(1)))), "x", Put("n", Var("x")))
    for s in enumerate_states(SCHEMA):
        assert run(c, {}, s) == run(c, {}, s)
