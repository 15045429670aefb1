"""Exact Hoare-triple checking for a nondeterministic state-monad language
over finite state universes, with function annotations: per-step predicates
collected during verification condition generation, merged across
properties, and reused to discharge obligations without reproving them."""

from .values import (
    ABSENT,
    BoolDom,
    Domain,
    DomainError,
    ExplicitDom,
    IdDom,
    MapDom,
    NatRange,
    RecordDom,
    SeqDom,
    SetDom,
    State,
    StateSchema,
    UnitDom,
    VMap,
    VRec,
    enumerate_domain,
    enumerate_states,
)
from .lang import (
    Assert,
    Bind,
    Call,
    Comp,
    ExecFault,
    Gets,
    If,
    LangError,
    Outcome,
    ProgDef,
    Put,
    Return,
    Select,
    run,
)
from .pred import (
    AndP,
    Atom,
    DefRef,
    ExistsP,
    FalseP,
    ForallP,
    ImpP,
    NotP,
    OrP,
    PostPred,
    Pred,
    PredDef,
    TrueP,
    Verdict,
    entails,
    eval_pred,
    normalize,
)
from .hoare import Triple, check_triple, wp_atomic
from .annot import (
    AnnStep,
    AnnTriple,
    BindA,
    Judgement,
    afails,
    apply_rule,
    check_ann_triple,
    check_annotator,
    check_order,
    dropA,
    lift,
    merge,
    recheck,
    run_ann,
)
from .vcg import ProgramRule, RuleDB, VcgResult, vcg_prove, vcg_strong, wp_comp
from .corpus import (
    COMPONENT_TRIPLES,
    CorpusParams,
    ann_fixtures,
    corpus_preds,
    corpus_programs,
    corpus_rules,
    corpus_schema,
    corpus_triples,
)
from .store import (
    Project,
    annotation_from_text,
    annotation_to_text,
    diff_annotations,
    load_annotation,
    load_project,
    save_annotation,
    save_project,
)

__version__ = "0.1.0"
