"""A small kernel-style corpus: a thread-control-block allocator.

The state has a free-identifier pool, a partial map from identifiers to
tcb records, and per-priority ready queues. new_tcb allocates an
identifier nondeterministically, builds a tcb at the requested priority,
installs it, and enqueues it.

Everything is parameterized by the number of identifiers and priorities,
so the same artifacts can be checked over universes of different sizes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Tuple

from .annot import AnnComp, AnnStep, BindA, normalize_ann
from .hoare import Triple
from .lang import (
    Bind,
    Call,
    Comp,
    DomOf,
    Eq,
    Field,
    FieldOf,
    Gets,
    In,
    Lit,
    MapApply,
    MapAssign,
    MapLookup,
    MapUpd,
    Not,
    NotIn,
    ProgDef,
    ProgDefs,
    Put,
    RecordUpd,
    Return,
    SeqCons,
    Select,
    SetLit,
    SetMinus,
    Var,
)
from .pred import (
    AndP,
    Atom,
    DefRef,
    ForallP,
    ImpP,
    PostPred,
    Pred,
    PredDef,
    PredDefs,
)
from .values import (
    Domain,
    IdDom,
    MapDom,
    NatRange,
    RecordDom,
    SeqDom,
    SetDom,
    StateSchema,
    UnitDom,
)


@dataclass(frozen=True)
class CorpusParams:
    n_ids: int = 3
    n_prios: int = 2

    def __post_init__(self):
        if self.n_ids < 1 or self.n_prios < 1:
            raise ValueError("corpus needs at least one identifier and priority")


def id_dom(p: CorpusParams) -> Domain:
    return IdDom(p.n_ids)


def prio_dom(p: CorpusParams) -> Domain:
    return NatRange(0, p.n_prios - 1)


def tcb_dom(p: CorpusParams) -> Domain:
    return RecordDom((("priority", prio_dom(p)),))


def corpus_schema(p: CorpusParams) -> StateSchema:
    return StateSchema(
        (
            ("ids", SetDom(id_dom(p))),
            ("tcbs", MapDom(id_dom(p), tcb_dom(p))),
            (
                "queues",
                MapDom(prio_dom(p), SeqDom(id_dom(p), p.n_ids), allow_absent=False),
            ),
        )
    )


# ---------------------------------------------------------------------------
# Programs


def corpus_programs(p: CorpusParams) -> ProgDefs:
    alloc = ProgDef(
        params=(),
        ret_domain=id_dom(p),
        body=Bind(
            Gets("ids"),
            "ids",
            Bind(
                Select(Var("ids")),
                "i",
                Bind(
                    Put("ids", SetMinus(Var("ids"), SetLit((Var("i"),)))),
                    "_",
                    Return(Var("i")),
                ),
            ),
        ),
    )
    create_tcb = ProgDef(
        params=(("p", prio_dom(p)),),
        ret_domain=tcb_dom(p),
        body=Bind(
            Return(Lit(_empty_tcb())),
            "tcb",
            Return(RecordUpd(Var("tcb"), "priority", Var("p"))),
        ),
    )
    init_tcb = ProgDef(
        params=(("tcb", tcb_dom(p)), ("i", id_dom(p))),
        ret_domain=UnitDom(),
        body=Bind(
            Gets("tcbs"),
            "tcbs",
            Put("tcbs", MapUpd(Var("tcbs"), Var("i"), Var("tcb"))),
        ),
    )
    enqueue_tcb = ProgDef(
        params=(("i", id_dom(p)), ("p", prio_dom(p))),
        ret_domain=UnitDom(),
        body=Bind(
            Gets("queues"),
            "qs",
            Bind(
                Return(MapApply(Var("qs"), Var("p"))),
                "q",
                Put("queues", MapAssign(Var("qs"), Var("p"), SeqCons(Var("i"), Var("q")))),
            ),
        ),
    )
    new_tcb = ProgDef(
        params=(("p", prio_dom(p)),),
        ret_domain=id_dom(p),
        body=new_tcb_body(),
    )
    return {
        "alloc": alloc,
        "create_tcb": create_tcb,
        "init_tcb": init_tcb,
        "enqueue_tcb": enqueue_tcb,
        "new_tcb": new_tcb,
    }


def _empty_tcb():
    from .values import VRec

    return VRec((("priority", 0),))


def new_tcb_body() -> Comp:
    return Bind(
        Call("alloc", ()),
        "i",
        Bind(
            Call("create_tcb", (Var("p"),)),
            "tcb",
            Bind(
                Call("init_tcb", (Var("tcb"), Var("i"))),
                "_",
                Bind(
                    Call("enqueue_tcb", (Var("i"), Var("p"))),
                    "_",
                    Return(Var("i")),
                ),
            ),
        ),
    )


# ---------------------------------------------------------------------------
# Predicates


def corpus_preds(p: CorpusParams) -> PredDefs:
    valid_id = PredDef(
        params=("i",),
        body=Atom(
            Eq(
                In(Var("i"), Field("ids")),
                NotIn(Var("i"), DomOf(Field("tcbs"))),
            )
        ),
    )
    valid_free = PredDef(
        params=(),
        body=ForallP("id", id_dom(p), DefRef("valid_id", (Var("id"),))),
    )
    valid_free_except = PredDef(
        params=("i",),
        body=AndP(
            (
                ForallP(
                    "id",
                    id_dom(p),
                    ImpP(
                        Atom(Not(Eq(Var("id"), Var("i")))),
                        DefRef("valid_id", (Var("id"),)),
                    ),
                ),
                Atom(NotIn(Var("i"), DomOf(Field("tcbs")))),
                Atom(NotIn(Var("i"), Field("ids"))),
            )
        ),
    )
    tcb_at_prio = PredDef(
        params=("i", "p"),
        body=AndP(
            (
                Atom(In(Var("i"), DomOf(Field("tcbs")))),
                Atom(
                    Eq(
                        FieldOf(
                            MapLookup(Field("tcbs"), Var("i"), asserted=True),
                            "priority",
                        ),
                        Var("p"),
                    )
                ),
            )
        ),
    )
    valid_queues = PredDef(
        params=(),
        body=ForallP(
            "p",
            prio_dom(p),
            ForallP(
                "i",
                id_dom(p),
                ImpP(
                    Atom(In(Var("i"), MapApply(Field("queues"), Var("p")))),
                    DefRef("tcb_at_prio", (Var("i"), Var("p"))),
                ),
            ),
        ),
    )
    not_queued = PredDef(
        params=("i",),
        body=ForallP(
            "p",
            prio_dom(p),
            Atom(NotIn(Var("i"), MapApply(Field("queues"), Var("p")))),
        ),
    )
    return {
        "valid_id": valid_id,
        "valid_free": valid_free,
        "valid_free_except": valid_free_except,
        "tcb_at_prio": tcb_at_prio,
        "valid_queues": valid_queues,
        "not_queued": not_queued,
    }


def VF() -> Pred:
    return DefRef("valid_free", ())


def VFE(i) -> Pred:
    return DefRef("valid_free_except", (i,))


def VQ() -> Pred:
    return DefRef("valid_queues", ())


def NQ(i) -> Pred:
    return DefRef("not_queued", (i,))


def TAP(i, p) -> Pred:
    return DefRef("tcb_at_prio", (i, p))


def prio_is(tcb, p) -> Pred:
    return Atom(Eq(FieldOf(tcb, "priority"), p))


# ---------------------------------------------------------------------------
# Per-program lemmas for the two properties, as verification rules


def corpus_rules(p: CorpusParams):
    """Register the per-program lemmas in a fresh rule database.

    Free-pool property: alloc removes exactly the returned identifier,
    create touches no state, installing at the removed identifier restores
    the invariant, and enqueueing never touches the pool or tcb map.

    Queue property: alloc and create preserve it; installing a tcb with
    the right priority at an unqueued identifier lets that identifier be
    enqueued at its priority.
    """
    from .vcg import ProgramRule, RuleDB

    db = RuleDB()
    # free-pool lemmas
    db.register(
        ProgramRule(
            prog="alloc",
            pre=VF(),
            post=PostPred("r", VFE(Var("r"))),
            extra_vars=(),
        )
    )
    db.register(
        ProgramRule(
            prog="create_tcb",
            pre=VFE(Var("i")),
            post=PostPred("r", VFE(Var("i"))),
            extra_vars=(("i", id_dom(p)),),
        )
    )
    db.register(
        ProgramRule(
            prog="init_tcb",
            pre=VFE(Var("i")),
            post=PostPred("r", VF()),
            extra_vars=(),
        )
    )
    db.register(
        ProgramRule(
            prog="enqueue_tcb",
            pre=VF(),
            post=PostPred("r", VF()),
            extra_vars=(),
        )
    )
    # ready-queue lemmas
    db.register(
        ProgramRule(
            prog="alloc",
            pre=VQ(),
            post=PostPred("r", VQ()),
            extra_vars=(),
        )
    )
    db.register(
        ProgramRule(
            prog="create_tcb",
            pre=VQ(),
            post=PostPred("r", AndP((VQ(), prio_is(Var("r"), Var("p"))))),
            extra_vars=(),
        )
    )
    db.register(
        ProgramRule(
            prog="init_tcb",
            pre=AndP((VQ(), NQ(Var("i")), prio_is(Var("tcb"), Var("p")))),
            post=PostPred("r", AndP((VQ(), TAP(Var("i"), Var("p"))))),
            extra_vars=(("p", prio_dom(p)),),
        )
    )
    db.register(
        ProgramRule(
            prog="enqueue_tcb",
            pre=AndP((VQ(), TAP(Var("i"), Var("p")))),
            post=PostPred("r", VQ()),
            extra_vars=(),
        )
    )
    return db


# ---------------------------------------------------------------------------
# Annotation fixtures over new_tcb's body


def _annotate(steps: Tuple[Pred, ...]) -> AnnComp:
    """Attach the five step predicates to new_tcb's body, in program order."""
    a1, a2, a3, a4, a5 = steps
    return BindA(
        AnnStep(a1, Call("alloc", ())),
        "i",
        BindA(
            AnnStep(a2, Call("create_tcb", (Var("p"),))),
            "tcb",
            BindA(
                AnnStep(a3, Call("init_tcb", (Var("tcb"), Var("i")))),
                "_",
                BindA(
                    AnnStep(a4, Call("enqueue_tcb", (Var("i"), Var("p")))),
                    "_",
                    AnnStep(a5, Return(Var("i"))),
                ),
            ),
        ),
    )


def free_pool_annotation() -> AnnComp:
    return _annotate(
        (
            VF(),
            VFE(Var("i")),
            VFE(Var("i")),
            VF(),
            VF(),
        )
    )


def queues_annotation() -> AnnComp:
    return _annotate(
        (
            VQ(),
            VQ(),
            AndP((VQ(), NQ(Var("i")), prio_is(Var("tcb"), Var("p")))),
            AndP((VQ(), TAP(Var("i"), Var("p")))),
            VQ(),
        )
    )


def merged_annotation() -> AnnComp:
    return _annotate(
        (
            AndP((VF(), VQ())),
            AndP((VFE(Var("i")), VQ())),
            AndP((VFE(Var("i")), VQ(), NQ(Var("i")), prio_is(Var("tcb"), Var("p")))),
            AndP((VF(), VQ(), TAP(Var("i"), Var("p")))),
            AndP((VF(), VQ())),
        )
    )


# ---------------------------------------------------------------------------
# Named triples


def corpus_triples(p: CorpusParams) -> Dict[str, Tuple[Triple, Dict[str, Domain]]]:
    """Named triples with the domains of their free parameters."""
    pd = prio_dom(p)
    idd = id_dom(p)
    td = tcb_dom(p)
    t: Dict[str, Tuple[Triple, Dict[str, Domain]]] = {}
    t["new_tcb:valid_free"] = (
        Triple(VF(), Call("new_tcb", (Var("p"),)), PostPred("r", VF())),
        {"p": pd},
    )
    t["new_tcb:valid_queues"] = (
        Triple(
            AndP((VQ(), VF())),
            Call("new_tcb", (Var("p"),)),
            PostPred("r", VQ()),
        ),
        {"p": pd},
    )
    t["new_tcb:valid_queues_alone"] = (
        Triple(VQ(), Call("new_tcb", (Var("p"),)), PostPred("r", VQ())),
        {"p": pd},
    )
    t["alloc:valid_free"] = (
        Triple(VF(), Call("alloc", ()), PostPred("r", VFE(Var("r")))),
        {},
    )
    t["create_tcb:valid_free"] = (
        Triple(
            VFE(Var("i")),
            Call("create_tcb", (Var("p"),)),
            PostPred("r", VFE(Var("i"))),
        ),
        {"i": idd, "p": pd},
    )
    t["init_tcb:valid_free"] = (
        Triple(
            VFE(Var("i")),
            Call("init_tcb", (Var("tcb"), Var("i"))),
            PostPred("r", VF()),
        ),
        {"i": idd, "tcb": td},
    )
    t["enqueue_tcb:valid_free"] = (
        Triple(
            VF(),
            Call("enqueue_tcb", (Var("i"), Var("p"))),
            PostPred("r", VF()),
        ),
        {"i": idd, "p": pd},
    )
    t["alloc:valid_queues"] = (
        Triple(VQ(), Call("alloc", ()), PostPred("r", VQ())),
        {},
    )
    t["create_tcb:valid_queues"] = (
        Triple(
            VQ(),
            Call("create_tcb", (Var("p"),)),
            PostPred("r", AndP((VQ(), prio_is(Var("r"), Var("p"))))),
        ),
        {"p": pd},
    )
    t["init_tcb:valid_queues"] = (
        Triple(
            AndP((VQ(), NQ(Var("i")), prio_is(Var("tcb"), Var("p")))),
            Call("init_tcb", (Var("tcb"), Var("i"))),
            PostPred("r", AndP((VQ(), TAP(Var("i"), Var("p"))))),
        ),
        {"i": idd, "p": pd, "tcb": td},
    )
    t["enqueue_tcb:valid_queues"] = (
        Triple(
            AndP((VQ(), TAP(Var("i"), Var("p")))),
            Call("enqueue_tcb", (Var("i"), Var("p"))),
            PostPred("r", VQ()),
        ),
        {"i": idd, "p": pd},
    )
    return t


COMPONENT_TRIPLES = (
    "alloc:valid_free",
    "create_tcb:valid_free",
    "init_tcb:valid_free",
    "enqueue_tcb:valid_free",
    "init_tcb:valid_queues",
    "enqueue_tcb:valid_queues",
)


def ann_fixtures() -> Dict[str, AnnComp]:
    return {
        "new_tcb:valid_free": normalize_ann(free_pool_annotation()),
        "new_tcb:valid_queues": normalize_ann(queues_annotation()),
        "new_tcb:merged": normalize_ann(merged_annotation()),
    }
