import pytest

from annocheck.corpus import (
    COMPONENT_TRIPLES,
    CorpusParams,
    ann_fixtures,
    corpus_schema,
    free_pool_annotation,
    merged_annotation,
    new_tcb_body,
    queues_annotation,
)
from annocheck.annot import annotations_of, dropA, merge, normalize_ann, same_skeleton
from annocheck.hoare import check_triple
from annocheck.lang import Call, Lit, call_graph_acyclic, run
from annocheck.pred import DefRef, eval_pred
from annocheck.values import State, VMap, VRec


def mkstate(ids=frozenset(), tcbs=(), queues=None, n_prios=2):
    qs = queues if queues is not None else {p: () for p in range(n_prios)}
    return State(
        (
            ("ids", frozenset(ids)),
            ("tcbs", VMap(tcbs)),
            ("queues", VMap(qs.items() if isinstance(qs, dict) else qs)),
        )
    )


def tcb(prio):
    return VRec((("priority", prio),))


def test_universe_sizes_scale_with_the_parameters():
    assert corpus_schema(CorpusParams(2, 1)).universe_size() == 112
    assert corpus_schema(CorpusParams(2, 2)).universe_size() == 1764
    assert corpus_schema(CorpusParams(3, 2)).universe_size() == 345600


def test_params_are_validated():
    with pytest.raises(Exception):
        CorpusParams(0, 1)


def test_program_table_is_acyclic(corpus22):
    assert call_graph_acyclic(corpus22.progs)


def test_alloc_picks_any_free_identifier(corpus22):
    s = mkstate(ids={0, 1})
    outs = run(Call("alloc", ()), {}, s, corpus22.progs, corpus22.defs)
    assert [(o.ret, o.state.get("ids")) for o in outs] == [
        (0, frozenset({1})),
        (1, frozenset({0})),
    ]


def test_alloc_from_an_empty_pool_has_no_paths(corpus22):
    s = mkstate(ids=set())
    assert run(Call("alloc", ()), {}, s, corpus22.progs, corpus22.defs) == ()


def test_create_tcb_builds_the_record_without_touching_state(corpus22):
    s = mkstate(ids={0, 1})
    (o,) = run(Call("create_tcb", (Lit(1),)), {}, s, corpus22.progs, corpus22.defs)
    assert o.ret == tcb(1)
    assert o.state == s


def test_init_tcb_installs_the_record(corpus22):
    s = mkstate()
    outs = run(
        Call("init_tcb", (Lit(tcb(0)), Lit(1))), {}, s, corpus22.progs, corpus22.defs
    )
    (o,) = outs
    assert o.state.get("tcbs") == VMap(((1, tcb(0)),))


def test_enqueue_tcb_prepends_to_the_priority_queue(corpus22):
    s = mkstate(queues={0: (), 1: (1,)})
    (o,) = run(
        Call("enqueue_tcb", (Lit(0), Lit(1))), {}, s, corpus22.progs, corpus22.defs
    )
    assert o.state.get("queues") == VMap(((0, ()), (1, (0, 1))))


def test_new_tcb_is_the_documented_five_step_chain(corpus22):
    body = new_tcb_body()
    s = mkstate(ids={0}, queues={0: (), 1: ()})
    (o,) = run(body, {"p": 1}, s, corpus22.progs, corpus22.defs)
    assert o.ret == 0
    assert o.state.get("tcbs") == VMap(((0, tcb(1)),))
    assert o.state.get("queues").get(1) == (0,)


# ---------------------------------------------------------------------------
# Predicate examples


def test_valid_free_holds_when_every_identifier_is_free(corpus22):
    s = mkstate(ids={0, 1}, tcbs=())
    assert eval_pred(DefRef("valid_free", ()), {}, s, corpus22.defs)


def test_valid_free_rejects_an_identifier_that_is_both_free_and_mapped(corpus22):
    s = mkstate(ids={0}, tcbs=((0, tcb(0)),))
    assert not eval_pred(DefRef("valid_free", ()), {}, s, corpus22.defs)


def test_valid_free_except_carves_out_one_identifier(corpus22):
    s = mkstate(ids={1}, tcbs=())
    assert eval_pred(DefRef("valid_free_except", (Lit(0),)), {}, s, corpus22.defs)
    # The carved-out identifier must not still be in the pool.
    s2 = mkstate(ids={0, 1}, tcbs=())
    assert not eval_pred(DefRef("valid_free_except", (Lit(0),)), {}, s2, corpus22.defs)


def test_valid_queues_requires_matching_priorities(corpus22):
    good = mkstate(tcbs=((0, tcb(1)),), queues={0: (), 1: (0,)})
    bad = mkstate(tcbs=((0, tcb(0)),), queues={0: (), 1: (0,)})
    missing = mkstate(tcbs=(), queues={0: (), 1: (0,)})
    assert eval_pred(DefRef("valid_queues", ()), {}, good, corpus22.defs)
    assert not eval_pred(DefRef("valid_queues", ()), {}, bad, corpus22.defs)
    assert not eval_pred(DefRef("valid_queues", ()), {}, missing, corpus22.defs)


def test_not_queued(corpus22):
    s = mkstate(queues={0: (), 1: (0,)})
    assert not eval_pred(DefRef("not_queued", (Lit(0),)), {}, s, corpus22.defs)
    assert eval_pred(DefRef("not_queued", (Lit(1),)), {}, s, corpus22.defs)


# ---------------------------------------------------------------------------
# Triples and fixtures


def test_named_triples_cover_the_component_collection(corpus22):
    assert set(COMPONENT_TRIPLES) <= set(corpus22.triples)


def test_component_triples_hold_at_desk_scale(corpus21):
    c = corpus21
    for name in COMPONENT_TRIPLES:
        t, vd = c.triples[name]
        v = check_triple(t, c.schema, c.defs, c.progs, vd)
        assert v.holds(), f"{name}: {v.kind}"


def test_top_level_triples_at_desk_scale(corpus21):
    c = corpus21
    for name in ("new_tcb:valid_free", "new_tcb:valid_queues"):
        t, vd = c.triples[name]
        assert check_triple(t, c.schema, c.defs, c.progs, vd).holds()


def test_fixtures_share_the_new_tcb_skeleton():
    fx = ann_fixtures()
    body = new_tcb_body()
    for ann in fx.values():
        assert dropA(ann) == body
    assert same_skeleton(fx["new_tcb:valid_free"], fx["new_tcb:valid_queues"])
    assert len(annotations_of(fx["new_tcb:valid_free"])) == 5


def test_merged_fixture_is_the_merge_of_the_other_two():
    assert normalize_ann(
        merge(free_pool_annotation(), queues_annotation())
    ) == normalize_ann(merged_annotation())
