"""The release gate: one test per acceptance criterion.

Each test prints a single PASS/FAIL line (visible with -s or -rA) and uses
exact checks only; the heavy criteria state their own time budgets.
"""

import contextlib
import dataclasses
import itertools
import time

import pytest

from annocheck.annot import (
    OrderingClaim,
    all_true_ann,
    annotations_of,
    apply_rule,
    by_enumeration,
    check_annotator,
    check_order,
    dropA,
    lift,
    merge,
    normalize_ann,
    run_ann,
    to_asserting_comp,
)
from annocheck.corpus import (
    COMPONENT_TRIPLES,
    VF,
    VQ,
    ann_fixtures,
    new_tcb_body,
    prio_dom,
)
from annocheck.hoare import Triple, check_triple, wp_atomic
from annocheck.lang import (
    Assert,
    Call,
    DomOf,
    Eq,
    ExecFault,
    Field,
    Gets,
    If,
    Lit,
    Put,
    Return,
    Select,
    SetLit,
    Var,
    run,
)
from annocheck.pred import (
    AndP,
    Atom,
    DefRef,
    FalseP,
    NotP,
    OrP,
    PostPred,
    TrueP,
    Verdict,
    entails,
    eval_pred,
)
from annocheck.soundness import Auditor
from annocheck.store import project_from_text, project_to_text
from annocheck.values import (
    BoolDom,
    NatRange,
    StateSchema,
    enumerate_domain,
    enumerate_states,
)
from annocheck.vcg import vcg_prove, vcg_strong
from annocheck import cli


@contextlib.contextmanager
def criterion(n, desc):
    try:
        yield
    except BaseException:
        print(f"ACCEPTANCE CRITERION {n}: FAIL - {desc}")
        raise
    print(f"ACCEPTANCE CRITERION {n}: PASS - {desc}")


def mentions_def(pred, name) -> bool:
    """Does the predicate reference the named definition anywhere?"""
    if isinstance(pred, DefRef) and pred.name == name:
        return True
    if dataclasses.is_dataclass(pred) and not isinstance(pred, type):
        return any(
            mentions_def(getattr(pred, f.name), name)
            for f in dataclasses.fields(pred)
        )
    if isinstance(pred, tuple):
        return any(mentions_def(x, name) for x in pred)
    return False


def test_criterion_01_valid_free_is_preserved_at_full_scale(corpus32):
    with criterion(1, "new_tcb preserves the free pool invariant, 345600 states, < 60 s"):
        c = corpus32
        t, vd = c.triples["new_tcb:valid_free"]
        assert sorted(enumerate_domain(vd["p"])) == [0, 1]
        start = time.monotonic()
        v = check_triple(t, c.schema, c.defs, c.progs, vd)
        elapsed = time.monotonic() - start
        assert c.schema.universe_size() == 345600
        assert v.holds()
        assert v.checked == 2 * 345600
        assert elapsed < 60, f"took {elapsed:.1f}s"


def test_criterion_02_component_triples_hold_at_full_scale(corpus32):
    with criterion(2, "the six per-step triples hold on 345600 states"):
        c = corpus32
        assert len(COMPONENT_TRIPLES) == 6
        for name in COMPONENT_TRIPLES:
            t, vd = c.triples[name]
            v = check_triple(t, c.schema, c.defs, c.progs, vd)
            assert v.holds(), f"{name}: {v.kind}"


def test_criterion_03_collected_annotation_matches_the_fixture(corpus32):
    with criterion(3, "collection reproduces the free-pool annotation and is confirmed by enumeration"):
        c = corpus32
        t, vd = c.triples["new_tcb:valid_free"]
        res = vcg_prove(t.pre, t.prog, t.post, c.schema, c.defs, c.progs, c.rules, vd)
        assert res.verdict.holds()
        assert normalize_ann(res.ann) == ann_fixtures()["new_tcb:valid_free"]
        v = check_annotator(
            t.pre, new_tcb_body(), t.post, res.ann, c.schema, c.defs, c.progs, vd
        )
        assert v.holds()


def test_criterion_04_reuse_discharges_not_queued_from_the_annotation(corpus32):
    with criterion(4, "the strong pass discharges not_queued at its step instead of propagating it"):
        c = corpus32
        fx = ann_fixtures()
        t, vd = c.triples["new_tcb:valid_queues"]
        res = vcg_strong(
            t.pre, fx["new_tcb:valid_free"], t.post, c.schema, c.defs, c.progs,
            c.rules, vd,
        )
        assert res.verdict.holds()
        assert normalize_ann(res.ann) == fx["new_tcb:valid_queues"]
        # init_tcb is step 2, create_tcb step 1: not_queued must be
        # eliminated at step 2 and never show up in anything propagated
        # past create_tcb (steps 0 and 1).
        eliminated = [o for o in res.obligations if o.kind == "eliminated"]
        assert any(
            o.step == 2 and mentions_def(o.pred, "not_queued") for o in eliminated
        )
        for o in res.obligations:
            if o.kind == "propagated" and o.step <= 1:
                assert not mentions_def(o.pred, "not_queued"), o


def test_criterion_05_merge_matches_and_the_merged_ordering_holds(corpus32, corpus22):
    with criterion(5, "the merged annotation matches the fixture and is adhered to"):
        fx = ann_fixtures()
        merged = normalize_ann(merge(fx["new_tcb:valid_free"], fx["new_tcb:valid_queues"]))
        assert merged == fx["new_tcb:merged"]

        c = corpus32
        pre = AndP((VF(), VQ()))
        vd = {"p": prio_dom(c.params)}
        v = check_order(pre, new_tcb_body(), merged, c.schema, c.defs, c.progs, vd)
        assert v.holds()

        # Derive the same ordering through the merge rule and audit it.
        s = corpus22
        vds = tuple(sorted({"p": prio_dom(s.params)}.items()))
        jf = by_enumeration(
            OrderingClaim(VF(), new_tcb_body(), fx["new_tcb:valid_free"], vds),
            s.schema, s.defs, s.progs,
        )
        jg = by_enumeration(
            OrderingClaim(
                AndP((VQ(), VF())), new_tcb_body(), fx["new_tcb:valid_queues"], vds
            ),
            s.schema, s.defs, s.progs,
        )
        jm = apply_rule("merge_adherence", (jf, jg), s.schema, s.defs, s.progs)
        assert normalize_ann(jm.claim.ann) == merged
        from annocheck.annot import recheck

        assert recheck(jm, s.schema, s.defs, s.progs).holds()


def test_criterion_06_valid_queues_alone_is_refuted_with_a_telling_witness(corpus22):
    with criterion(6, "valid_queues alone is violated; the witness breaks valid_free"):
        c = corpus22
        assert c.schema.universe_size() == 1764
        t = Triple(VQ(), Call("new_tcb", (Lit(0),)), PostPred("r", VQ()))
        v1 = check_triple(t, c.schema, c.defs, c.progs)
        v2 = check_triple(t, c.schema, c.defs, c.progs)
        assert v1.kind == Verdict.VIOLATED
        assert v1.witness.state == v2.witness.state  # deterministic
        w = v1.witness.state
        overlap = w.get("ids") & frozenset(w.get("tcbs").keys())
        assert overlap, "witness must have a free identifier that is already mapped"


def test_criterion_07_rule_soundness_audit_is_clean():
    with criterion(7, "no calculus rule derives a refutable conclusion; < 5 min"):
        start = time.monotonic()
        reports = Auditor().run_all()
        elapsed = time.monotonic() - start
        assert len(reports) == 7
        for r in reports:
            assert r.instances > 0, r.rule
            assert r.derived > 0, r.rule
            assert r.ok(), f"{r.rule}: {r.violations[:3]}"
        assert elapsed < 300, f"took {elapsed:.1f}s"


def test_criterion_08_semantic_laws_by_enumeration(corpus21):
    with criterion(8, "annotation semantics laws hold exactly over the 112-state universe"):
        c = corpus21
        body = new_tcb_body()
        fx = ann_fixtures()
        f3, f5 = fx["new_tcb:valid_free"], fx["new_tcb:valid_queues"]
        merged = merge(f3, f5)
        states = list(enumerate_states(c.schema))
        prios = list(enumerate_domain(prio_dom(c.params)))
        assert c.schema.universe_size() == len(states) == 112

        anns = (f3, f5, merged, all_true_ann(body))
        alloc = Call("alloc", ())
        preds = (TrueP(), VF(), VQ(), FalseP())
        for p in prios:
            env = {"p": p}
            for s in states:
                # Outcomes preservation.
                for F in anns:
                    r = run_ann(F, env, s, c.progs, c.defs)
                    assert r.outcomes == run(dropA(F), env, s, c.progs, c.defs)
                # Lift laws: fails iff the predicate is false, outcomes kept.
                for P in preds:
                    r = run_ann(lift(P, alloc), env, s, c.progs, c.defs)
                    assert r.fails == (not eval_pred(P, env, s, c.defs))
                    assert r.outcomes == run(alloc, env, s, c.progs, c.defs)
                # Merge failure flag is the pointwise disjunction.
                assert run_ann(merged, env, s, c.progs, c.defs).fails == (
                    run_ann(f3, env, s, c.progs, c.defs).fails
                    or run_ann(f5, env, s, c.progs, c.defs).fails
                )
                # Asserting-program equivalence under non-failure.
                if run_ann(f3, env, s, c.progs, c.defs).fails:
                    with pytest.raises(ExecFault):
                        run(to_asserting_comp(f3), env, s, c.progs, c.defs)
                else:
                    assert run(to_asserting_comp(f3), env, s, c.progs, c.defs) == run(
                        body, env, s, c.progs, c.defs
                    )

        # Ordering on lifted steps is exactly entailment.
        for P, R in itertools.product(preds, repeat=2):
            holds = check_order(
                P, alloc, lift(R, alloc), c.schema, c.defs, c.progs
            ).holds()
            assert holds == entails(P, R, c.schema, c.defs).holds()


def test_criterion_09_wp_atomic_is_exact_for_every_atomic_form():
    with criterion(9, "atomic weakest preconditions are sound and weakest, both directions"):
        schema = StateSchema((("b", BoolDom()), ("n", NatRange(0, 2))))
        B = Atom(Field("b"))
        N = lambda k: Atom(Eq(Field("n"), Lit(k)))
        atoms = (
            Return(Lit(True)),
            Return(Lit(None)),
            Return(Field("b")),
            Gets("b"),
            Gets("n"),
            Put("b", Lit(False)),
            Put("b", Eq(Field("n"), Lit(1))),
            Put("n", Lit(2)),
            Select(SetLit((Lit(0), Lit(2)))),
            Select(SetLit(())),
            Assert(B),
            Assert(N(0)),
            If(Field("b"), Put("n", Lit(0)), Return(Lit(False))),
        )
        ret_eq = lambda v: Atom(Eq(Var("r"), Lit(v)))
        posts = tuple(
            PostPred("r", body)
            for body in (
                TrueP(),
                FalseP(),
                B,
                NotP(B),
                N(0),
                OrP((B, N(2))),
                AndP((B, N(1))),
                ret_eq(True),
                ret_eq(0),
                OrP((ret_eq(None), N(2))),
            )
        )
        for c, post in itertools.product(atoms, posts):
            wp = wp_atomic(c, post, schema)
            for s in enumerate_states(schema):
                try:
                    semantic = all(
                        eval_pred(post.body, {post.ret: o.ret}, o.state)
                        for o in run(c, {}, s)
                    )
                except ExecFault:
                    semantic = False
                assert eval_pred(wp, {}, s) == semantic, (c, post, s)


def test_criterion_10_persistence_and_report_determinism(capsys):
    with criterion(10, "projects round-trip, self-diffs are empty, reports are byte-identical"):
        ws = cli.build_workspace("corpus", "2,1")
        p = cli.bundled_project(ws.params)
        text = project_to_text(p)
        p2 = project_from_text(text)
        assert p2 == p
        assert project_to_text(p2) == text

        report, code = cli.cmd_diff(
            ws, "fixture:new_tcb:merged", "fixture:new_tcb:merged", "full"
        )
        assert report == "identical" and code == cli.EXIT_HOLDS

        ws22 = cli.build_workspace("corpus", "2,2")
        r1, c1 = cli.cmd_check(ws22, "new_tcb:valid_queues_alone", 1, False, "full")
        r2, c2 = cli.cmd_check(ws22, "new_tcb:valid_queues_alone", 1, False, "full")
        assert (r1, c1) == (r2, c2)
        a1 = cli.cmd_annotate(ws, "new_tcb:valid_free", None, False, "full")
        a2 = cli.cmd_annotate(ws, "new_tcb:valid_free", None, False, "full")
        assert a1[:2] == a2[:2]


def test_criterion_11_out_of_scope_claims_are_declared():
    with criterion(11, "proof-script line-count reductions and the large case study are out of scope"):
        print(
            "not reproduced here: proof-effort line-count comparisons and the "
            "full kernel case study; criteria 3-5 stand in for the reuse claim "
            "at desk scale"
        )
        assert True
