import pytest

from annocheck.annot import (
    AnnStep,
    AnnTriple,
    AnnTripleClaim,
    AnnotError,
    BindA,
    ByEnumeration,
    ByRule,
    OrderingClaim,
    RuleError,
    Triple,
    TripleClaim,
    all_true_ann,
    annotations_of,
    apply_rule,
    by_enumeration,
    check_ann_triple,
    check_annotator,
    check_order,
    dropA,
    lift,
    map_annotations,
    merge,
    normalize_ann,
    recheck,
    run_ann,
    same_skeleton,
    to_asserting_comp,
)
from annocheck.lang import (
    Bind,
    Eq,
    ExecFault,
    Field,
    Gets,
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
    FalseP,
    NotP,
    PostPred,
    TrueP,
    Verdict,
    eval_pred,
    normalize,
)
from annocheck.values import BoolDom, NatRange, State, StateSchema, enumerate_states

SCHEMA = StateSchema((("flag", BoolDom()), ("n", NatRange(0, 2))))
FLAG = Atom(Field("flag"))
N_IS = lambda k: Atom(Eq(Field("n"), Lit(k)))

PROG = Bind(Gets("n"), "x", Put("n", Var("x")))
ANN = BindA(AnnStep(FLAG, Gets("n")), "x", AnnStep(TrueP(), Put("n", Var("x"))))


def test_dropA_recovers_the_underlying_program():
    assert dropA(ANN) == PROG
    assert dropA(lift(FLAG, Gets("n"))) == Gets("n")
    with pytest.raises(AnnotError):
        dropA(Gets("n"))


def test_run_ann_preserves_outcomes_and_flags_failure():
    for s in enumerate_states(SCHEMA):
        r = run_ann(ANN, {}, s)
        assert r.outcomes == run(PROG, {}, s)
        assert r.fails == (not s.get("flag"))


def test_lift_fails_exactly_where_the_annotation_is_false():
    F = lift(N_IS(0), Put("flag", Lit(True)))
    for s in enumerate_states(SCHEMA):
        r = run_ann(F, {}, s)
        assert r.fails == (s.get("n") != 0)
        assert r.outcomes == run(F.step, {}, s)


def test_bind_failure_is_a_full_disjunction_over_head_outcomes():
    # The continuation annotation fails from the outcome x=1 even though
    # x=0 succeeds; one bad path fails the whole composition.
    head = AnnStep(TrueP(), Select(SetLit((Lit(0), Lit(1)))))
    rest = AnnStep(Atom(Eq(Var("x"), Lit(0))), Return(Var("x")))
    F = BindA(head, "x", rest)
    s = next(iter(enumerate_states(SCHEMA)))
    assert run_ann(F, {}, s).fails


def test_same_skeleton_and_merge():
    G = map_annotations(ANN, lambda p: N_IS(0))
    assert same_skeleton(ANN, G)
    assert not same_skeleton(ANN, AnnStep(TrueP(), Gets("n")))
    m = merge(ANN, G)
    assert annotations_of(m) == (
        normalize(AndP((FLAG, N_IS(0)))),
        normalize(AndP((TrueP(), N_IS(0)))),
    )
    with pytest.raises(AnnotError):
        merge(ANN, AnnStep(TrueP(), Gets("n")))


def test_merge_failure_flag_is_the_disjunction():
    G = map_annotations(ANN, lambda p: N_IS(0))
    m = merge(ANN, G)
    for s in enumerate_states(SCHEMA):
        assert run_ann(m, {}, s).fails == (
            run_ann(ANN, {}, s).fails or run_ann(G, {}, s).fails
        )


def test_all_true_ann_never_fails():
    F = all_true_ann(PROG)
    assert dropA(F) == PROG
    assert all(not run_ann(F, {}, s).fails for s in enumerate_states(SCHEMA))


def test_to_asserting_comp_agrees_under_non_failure_and_faults_otherwise():
    for s in enumerate_states(SCHEMA):
        if run_ann(ANN, {}, s).fails:
            with pytest.raises(ExecFault):
                run(to_asserting_comp(ANN), {}, s)
        else:
            outs = run(to_asserting_comp(ANN), {}, s)
            assert outs == run(PROG, {}, s)


def test_check_order_characterizes_non_failure_from_the_precondition():
    assert check_order(FLAG, PROG, ANN, SCHEMA).holds()
    v = check_order(TrueP(), PROG, ANN, SCHEMA)
    assert v.kind == Verdict.VIOLATED
    assert not eval_pred(FLAG, {}, v.witness.state)
    with pytest.raises(AnnotError):
        check_order(TrueP(), Gets("n"), ANN, SCHEMA)


def test_check_ann_triple_assumes_annotation_non_failure():
    # Plainly false posts are fine on states the annotation rules out.
    t = AnnTriple(TrueP(), ANN, PostPred("r", FLAG))
    assert check_ann_triple(t, SCHEMA).holds()
    plain = Triple(TrueP(), PROG, PostPred("r", FLAG))
    from annocheck.hoare import check_triple

    assert check_triple(plain, SCHEMA).kind == Verdict.VIOLATED


def test_check_annotator_requires_both_parts():
    assert check_annotator(FLAG, PROG, PostPred("r", FLAG), ANN, SCHEMA).holds()
    assert not check_annotator(TrueP(), PROG, PostPred("r", TrueP()), ANN, SCHEMA).holds()


# ---------------------------------------------------------------------------
# Judgements


def test_by_enumeration_accepts_true_claims_and_rejects_false_ones():
    good = TripleClaim(Triple(FLAG, Return(Lit(0)), PostPred("r", FLAG)))
    j = by_enumeration(good, SCHEMA)
    assert isinstance(j.evidence, ByEnumeration)
    assert recheck(j, SCHEMA).holds()
    bad = TripleClaim(Triple(TrueP(), Return(Lit(0)), PostPred("r", FLAG)))
    with pytest.raises(RuleError):
        by_enumeration(bad, SCHEMA)


def test_split_rule_builds_the_composite_triple():
    head = TripleClaim(
        Triple(N_IS(1), Gets("n"), PostPred("r", Atom(Eq(Var("r"), Lit(1)))))
    )
    cont = TripleClaim(
        Triple(Atom(Eq(Var("x"), Lit(1))), Put("n", Var("x")), PostPred("r", N_IS(1)))
    )
    jh = by_enumeration(head, SCHEMA)
    jc = by_enumeration(
        TripleClaim(cont.triple, (("x", NatRange(0, 2)),)), SCHEMA
    )
    j = apply_rule("split", (jc, jh), SCHEMA, binder="x")
    assert isinstance(j.evidence, ByRule)
    assert j.claim.triple.prog == PROG
    assert recheck(j, SCHEMA).holds()


def test_split_rule_rejects_a_mismatched_midpoint():
    jh = by_enumeration(
        TripleClaim(Triple(TrueP(), Gets("n"), PostPred("r", TrueP()))), SCHEMA
    )
    jc = by_enumeration(
        TripleClaim(Triple(N_IS(0), Put("n", Lit(0)), PostPred("r", N_IS(0)))), SCHEMA
    )
    with pytest.raises(RuleError):
        apply_rule("split", (jc, jh), SCHEMA, binder="x")


def test_assume_and_use_annotation_round_trip():
    # {R and P} f {Q} -> ||R|| lift(P, f) ||Q||, then discharge the
    # ordering and recover the plain triple.
    R, P = N_IS(1), FLAG
    f = Return(Lit(0))
    Q = PostPred("r", AndP((FLAG, N_IS(1))))
    jt = by_enumeration(TripleClaim(Triple(AndP((R, P)), f, Q)), SCHEMA)
    ja = apply_rule("assume_annotation", (jt,), SCHEMA, given=R, ann=P)
    assert isinstance(ja.claim, AnnTripleClaim)
    assert recheck(ja, SCHEMA).holds()

    # The ordering {R and P} f below lift(P, f) holds by enumeration.
    F = ja.claim.ann_triple.ann
    jo = by_enumeration(OrderingClaim(AndP((R, P)), f, F), SCHEMA)
    # use_annotation needs matching preconditions, so restate the
    # annotated triple at the ordering's precondition first.
    ja2 = by_enumeration(
        AnnTripleClaim(AnnTriple(AndP((R, P)), F, Q)), SCHEMA
    )
    ju = apply_rule("use_annotation", (jo, ja2), SCHEMA)
    assert isinstance(ju.claim, TripleClaim)
    assert recheck(ju, SCHEMA).holds()


def test_weaken_annotation_rule():
    jo = by_enumeration(OrderingClaim(FLAG, PROG, ANN), SCHEMA)
    weaker = map_annotations(ANN, lambda p: TrueP())
    jw = apply_rule("weaken_annotation", (jo,), SCHEMA, weaker=weaker)
    assert recheck(jw, SCHEMA).holds()
    stronger = map_annotations(ANN, lambda p: FalseP())
    with pytest.raises(RuleError):
        apply_rule("weaken_annotation", (jo,), SCHEMA, weaker=stronger)


def test_merge_adherence_rule():
    G = map_annotations(ANN, lambda p: TrueP())
    jf = by_enumeration(OrderingClaim(FLAG, PROG, ANN), SCHEMA)
    jg = by_enumeration(OrderingClaim(TrueP(), PROG, G), SCHEMA)
    jm = apply_rule("merge_adherence", (jf, jg), SCHEMA)
    assert jm.claim.ann == merge(ANN, G)
    assert recheck(jm, SCHEMA).holds()


def test_unknown_rule_is_rejected():
    with pytest.raises(RuleError):
        apply_rule("modus_tollens", (), SCHEMA)


def test_normalize_ann_is_pointwise():
    F = map_annotations(ANN, lambda p: AndP((p, TrueP(), p)))
    assert annotations_of(normalize_ann(F)) == tuple(
        normalize(p) for p in annotations_of(ANN)
    )
