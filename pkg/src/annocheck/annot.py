"""Annotated computations and the calculus over them.

An annotated computation is the underlying program with a predicate
attached before every step. Running it produces the same outcomes as the
plain program plus a failure flag, set when any reachable step's predicate
is false along any nondeterministic branch. Failure never prunes
outcomes.

The derivation rules here (assume/use/weaken/merge/strong split) build
Judgement values carrying their provenance; every judgement can be
re-checked from scratch by enumeration (audit mode).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Optional, Tuple

from .hoare import Triple, check_triple
from .lang import (
    Assert,
    Bind,
    Call,
    Comp,
    Env,
    ExecFault,
    If,
    Outcome,
    ProgDefs,
    is_atomic,
    run,
)
from .pred import (
    AndP,
    CachedPred,
    Counterexample,
    PostPred,
    Pred,
    PredDefs,
    TrueP,
    Verdict,
    and_all,
    entails,
    normalize,
    subst_pred,
)
from .values import Domain, State, StateSchema, enumerate_domain, enumerate_states


class AnnotError(ValueError):
    """Skeleton mismatch or ill-formed annotated computation."""


@dataclass(frozen=True)
class AnnStep:
    """A single annotated step: the predicate must hold when control reaches
    the step, else the run's failure flag is set."""

    ann: Pred
    step: Comp

    def __post_init__(self):
        if not is_atomic(self.step):
            raise AnnotError("annotations attach to atomic steps and calls")


@dataclass(frozen=True)
class BindA:
    first: "AnnComp"
    binder: str
    rest: "AnnComp"


@dataclass(frozen=True)
class AnnIf:
    cond: object  # Expr
    then: "AnnComp"
    els: "AnnComp"


AnnComp = object  # AnnStep | BindA | AnnIf


@dataclass(frozen=True)
class AnnRun:
    outcomes: Tuple[Outcome, ...]
    fails: bool


@dataclass(frozen=True)
class AnnTriple:
    pre: Pred
    ann: AnnComp
    post: PostPred


def lift(P: Pred, c: Comp) -> AnnStep:
    """Annotate a single step: fails at s exactly when P does not hold."""
    return AnnStep(P, c)


def dropA(F: AnnComp) -> Comp:
    """Erase annotations, recovering the underlying program."""
    if isinstance(F, AnnStep):
        return F.step
    if isinstance(F, BindA):
        return Bind(dropA(F.first), F.binder, dropA(F.rest))
    if isinstance(F, AnnIf):
        return If(F.cond, dropA(F.then), dropA(F.els))
    raise AnnotError(f"not an annotated computation: {F!r}")


def run_ann(
    F: AnnComp,
    env: Env,
    s: State,
    progs: Optional[ProgDefs] = None,
    defs: Optional[PredDefs] = None,
) -> AnnRun:
    """Outcomes of the underlying program plus the failure flag.

    The flag on a composition is the head's flag or-ed with failure of the
    continuation from any head outcome; the disjunction is evaluated in
    full, mirroring the defining equations rather than short-circuiting.
    """
    from .lang import eval_expr
    from .pred import eval_pred

    if isinstance(F, AnnStep):
        fails = not eval_pred(F.ann, env, s, defs)
        return AnnRun(run(F.step, env, s, progs, defs), fails)
    if isinstance(F, BindA):
        head = run_ann(F.first, env, s, progs, defs)
        outs = []
        cont_fails = False
        for o in head.outcomes:
            inner = dict(env)
            inner[F.binder] = o.ret
            sub = run_ann(F.rest, inner, o.state, progs, defs)
            outs.extend(sub.outcomes)
            cont_fails = cont_fails or sub.fails
        merged = run(dropA(F), env, s, progs, defs)
        return AnnRun(merged, head.fails or cont_fails)
    if isinstance(F, AnnIf):
        branch = F.then if eval_expr(F.cond, env, s) else F.els
        return run_ann(branch, env, s, progs, defs)
    raise AnnotError(f"not an annotated computation: {F!r}")


def afails(
    F: AnnComp,
    env: Env,
    s: State,
    progs: Optional[ProgDefs] = None,
    defs: Optional[PredDefs] = None,
) -> bool:
    return run_ann(F, env, s, progs, defs).fails


def same_skeleton(F: AnnComp, G: AnnComp) -> bool:
    if isinstance(F, AnnStep) and isinstance(G, AnnStep):
        return F.step == G.step
    if isinstance(F, BindA) and isinstance(G, BindA):
        return (
            F.binder == G.binder
            and same_skeleton(F.first, G.first)
            and same_skeleton(F.rest, G.rest)
        )
    if isinstance(F, AnnIf) and isinstance(G, AnnIf):
        return (
            F.cond == G.cond
            and same_skeleton(F.then, G.then)
            and same_skeleton(F.els, G.els)
        )
    return False


def merge(F: AnnComp, G: AnnComp) -> AnnComp:
    """Combine two annotations of the same program; the result fails
    whenever either does (per-step conjunction)."""
    if isinstance(F, AnnStep) and isinstance(G, AnnStep) and F.step == G.step:
        return AnnStep(normalize(AndP((F.ann, G.ann))), F.step)
    if isinstance(F, BindA) and isinstance(G, BindA) and F.binder == G.binder:
        return BindA(merge(F.first, G.first), F.binder, merge(F.rest, G.rest))
    if isinstance(F, AnnIf) and isinstance(G, AnnIf) and F.cond == G.cond:
        return AnnIf(F.cond, merge(F.then, G.then), merge(F.els, G.els))
    raise AnnotError("cannot merge annotations over different skeletons")


def map_annotations(F: AnnComp, fn) -> AnnComp:
    if isinstance(F, AnnStep):
        return AnnStep(fn(F.ann), F.step)
    if isinstance(F, BindA):
        return BindA(map_annotations(F.first, fn), F.binder, map_annotations(F.rest, fn))
    if isinstance(F, AnnIf):
        return AnnIf(F.cond, map_annotations(F.then, fn), map_annotations(F.els, fn))
    raise AnnotError(f"not an annotated computation: {F!r}")


def annotations_of(F: AnnComp) -> Tuple[Pred, ...]:
    """Per-step predicates in program order."""
    if isinstance(F, AnnStep):
        return (F.ann,)
    if isinstance(F, BindA):
        return annotations_of(F.first) + annotations_of(F.rest)
    if isinstance(F, AnnIf):
        return annotations_of(F.then) + annotations_of(F.els)
    raise AnnotError(f"not an annotated computation: {F!r}")


def normalize_ann(F: AnnComp) -> AnnComp:
    return map_annotations(F, normalize)


def all_true_ann(c: Comp) -> AnnComp:
    """The weakest annotation of a program: nothing can ever fail."""
    if isinstance(c, Bind):
        return BindA(all_true_ann(c.first), c.binder, all_true_ann(c.rest))
    if isinstance(c, If) and not is_atomic(c):
        return AnnIf(c.cond, all_true_ann(c.then), all_true_ann(c.els))
    return AnnStep(TrueP(), c)


def to_asserting_comp(F: AnnComp) -> Comp:
    """Turn annotations into explicit assertions. Where F never fails the
    result behaves exactly like the underlying program; where it fails the
    result faults."""
    if isinstance(F, AnnStep):
        return Bind(Assert(F.ann), "_assert", F.step)
    if isinstance(F, BindA):
        return Bind(to_asserting_comp(F.first), F.binder, to_asserting_comp(F.rest))
    if isinstance(F, AnnIf):
        return If(F.cond, to_asserting_comp(F.then), to_asserting_comp(F.els))
    raise AnnotError(f"not an annotated computation: {F!r}")


# ---------------------------------------------------------------------------
# Checks


def _quantified(var_domains):
    import itertools

    names = sorted(var_domains or {})
    streams = [list(enumerate_domain((var_domains or {})[n])) for n in names]
    for assignment in itertools.product(*streams):
        yield dict(zip(names, assignment)), tuple(zip(names, assignment))


def check_order(
    P: Pred,
    f: Comp,
    F: AnnComp,
    schema: StateSchema,
    defs: Optional[PredDefs] = None,
    progs: Optional[ProgDefs] = None,
    var_domains: Optional[Dict[str, Domain]] = None,
) -> Verdict:
    """Does f, started under P, satisfy the annotation F?

    Checks the ordering "{P} f below F" in its characterizing form: from
    every P-state no annotation in F may fail. The counterexample is the
    first P-state where F fails."""
    if dropA(F) != f:
        raise AnnotError("annotation does not cover this program")
    pre_eval = CachedPred(P, defs, schema)
    checked = 0
    states = list(enumerate_states(schema))
    for env, env_items in _quantified(var_domains):
        for s in states:
            checked += 1
            try:
                if not pre_eval(env, s):
                    continue
                if run_ann(F, env, s, progs, defs).fails:
                    return Verdict(
                        Verdict.VIOLATED, Counterexample(s, env_items), checked
                    )
            except ExecFault as fault:
                return Verdict(
                    Verdict.FAULT,
                    Counterexample(s, env_items, diagnostic=fault.diagnostic),
                    checked,
                )
    return Verdict(Verdict.HOLDS, None, checked)


def check_ann_triple(
    t: AnnTriple,
    schema: StateSchema,
    defs: Optional[PredDefs] = None,
    progs: Optional[ProgDefs] = None,
    var_domains: Optional[Dict[str, Domain]] = None,
) -> Verdict:
    """A triple over the annotated program that may take non-failure of all
    annotations for granted."""
    pre_eval = CachedPred(t.pre, defs, schema)
    post_eval = CachedPred(t.post.body, defs, schema)
    checked = 0
    states = list(enumerate_states(schema))
    for env, env_items in _quantified(var_domains):
        for s in states:
            checked += 1
            try:
                r = run_ann(t.ann, env, s, progs, defs)
                if r.fails:
                    continue
                if not pre_eval(env, s):
                    continue
                for o in r.outcomes:
                    post_env = dict(env)
                    post_env[t.post.ret] = o.ret
                    if not post_eval(post_env, o.state):
                        return Verdict(
                            Verdict.VIOLATED,
                            Counterexample(s, env_items, o),
                            checked,
                        )
            except ExecFault as fault:
                return Verdict(
                    Verdict.FAULT,
                    Counterexample(s, env_items, diagnostic=fault.diagnostic),
                    checked,
                )
    return Verdict(Verdict.HOLDS, None, checked)


def check_annotator(
    P: Pred,
    f: Comp,
    Q: PostPred,
    F: AnnComp,
    schema: StateSchema,
    defs: Optional[PredDefs] = None,
    progs: Optional[ProgDefs] = None,
    var_domains: Optional[Dict[str, Domain]] = None,
) -> Verdict:
    """The plain triple plus adherence to the annotation."""
    v = check_triple(Triple(P, f, Q), schema, defs, progs, var_domains)
    if not v.holds():
        return v
    return check_order(P, f, F, schema, defs, progs, var_domains)


def check_strong_annotator(
    P: Pred,
    F_in: AnnComp,
    Q: PostPred,
    F_out: AnnComp,
    schema: StateSchema,
    defs: Optional[PredDefs] = None,
    progs: Optional[ProgDefs] = None,
    var_domains: Optional[Dict[str, Domain]] = None,
) -> Verdict:
    """Annotated triple over F_in plus adherence of the underlying program,
    assuming F_in's non-failure, to the produced annotation F_out."""
    v = check_ann_triple(AnnTriple(P, F_in, Q), schema, defs, progs, var_domains)
    if not v.holds():
        return v
    # Adherence under non-failure of the input annotation.
    pre_eval = CachedPred(P, defs, schema)
    states = list(enumerate_states(schema))
    for env, env_items in _quantified(var_domains):
        for s in states:
            try:
                if run_ann(F_in, env, s, progs, defs).fails:
                    continue
                if not pre_eval(env, s):
                    continue
                if run_ann(F_out, env, s, progs, defs).fails:
                    return Verdict(Verdict.VIOLATED, Counterexample(s, env_items))
            except ExecFault as fault:
                return Verdict(
                    Verdict.FAULT,
                    Counterexample(s, env_items, diagnostic=fault.diagnostic),
                )
    return Verdict(Verdict.HOLDS)


# ---------------------------------------------------------------------------
# Judgements


@dataclass(frozen=True)
class TripleClaim:
    triple: Triple
    var_domains: Tuple[Tuple[str, Domain], ...] = ()


@dataclass(frozen=True)
class AnnTripleClaim:
    ann_triple: AnnTriple
    var_domains: Tuple[Tuple[str, Domain], ...] = ()


@dataclass(frozen=True)
class OrderingClaim:
    """{pre} prog below ann."""

    pre: Pred
    prog: Comp
    ann: AnnComp
    var_domains: Tuple[Tuple[str, Domain], ...] = ()


@dataclass(frozen=True)
class AnnotatorClaim:
    pre: Pred
    prog: Comp
    post: PostPred
    ann: AnnComp
    var_domains: Tuple[Tuple[str, Domain], ...] = ()


@dataclass(frozen=True)
class StrongAnnotatorClaim:
    pre: Pred
    ann_in: AnnComp
    post: PostPred
    ann_out: AnnComp
    var_domains: Tuple[Tuple[str, Domain], ...] = ()


@dataclass(frozen=True)
class ByEnumeration:
    states: int = 0


@dataclass(frozen=True)
class ByRule:
    rule: str
    premises: Tuple["Judgement", ...]


@dataclass(frozen=True)
class Judgement:
    claim: object
    evidence: object


class RuleError(ValueError):
    """Premises do not fit the rule's shape, or a side condition failed."""


def recheck(
    j: Judgement,
    schema: StateSchema,
    defs: Optional[PredDefs] = None,
    progs: Optional[ProgDefs] = None,
) -> Verdict:
    """Re-verify any judgement from scratch by enumeration (audit mode)."""
    c = j.claim
    if isinstance(c, TripleClaim):
        return check_triple(c.triple, schema, defs, progs, dict(c.var_domains))
    if isinstance(c, AnnTripleClaim):
        return check_ann_triple(c.ann_triple, schema, defs, progs, dict(c.var_domains))
    if isinstance(c, OrderingClaim):
        return check_order(
            c.pre, c.prog, c.ann, schema, defs, progs, dict(c.var_domains)
        )
    if isinstance(c, AnnotatorClaim):
        return check_annotator(
            c.pre, c.prog, c.post, c.ann, schema, defs, progs, dict(c.var_domains)
        )
    if isinstance(c, StrongAnnotatorClaim):
        return check_strong_annotator(
            c.pre, c.ann_in, c.post, c.ann_out, schema, defs, progs,
            dict(c.var_domains),
        )
    raise RuleError(f"unknown claim {c!r}")


def by_enumeration(claim, schema, defs=None, progs=None) -> Judgement:
    """Check a claim by enumeration and wrap it as a judgement."""
    j = Judgement(claim, ByEnumeration())
    v = recheck(j, schema, defs, progs)
    if not v.holds():
        raise RuleError(f"claim refuted by enumeration: {v.kind}")
    return Judgement(claim, ByEnumeration(v.checked))


def apply_rule(
    rule: str,
    premises: Tuple[Judgement, ...],
    schema: StateSchema,
    defs: Optional[PredDefs] = None,
    progs: Optional[ProgDefs] = None,
    **kw,
) -> Judgement:
    """Derive a judgement from premises via a named calculus rule.

    Side conditions (entailments) are discharged by enumeration here and
    now; the resulting judgement can still be independently re-checked.
    """
    if rule == "assume_annotation":
        # {R and P} f {Q}  derives  ||R|| lift(P, f) ||Q||
        (jt,) = premises
        if not isinstance(jt.claim, TripleClaim):
            raise RuleError("assume_annotation wants a triple premise")
        R: Pred = kw["given"]
        P: Pred = kw["ann"]
        t = jt.claim.triple
        if normalize(t.pre) != normalize(AndP((R, P))):
            raise RuleError("premise precondition is not the given/annotation split")
        concl = AnnTripleClaim(
            AnnTriple(R, lift(P, t.prog), t.post), jt.claim.var_domains
        )
        return Judgement(concl, ByRule(rule, premises))

    if rule == "use_annotation":
        # {P} f ⊑ F  and  ||P|| F ||Q||  derive  {P} f {Q}
        jo, ja = premises
        if not isinstance(jo.claim, OrderingClaim) or not isinstance(
            ja.claim, AnnTripleClaim
        ):
            raise RuleError("use_annotation wants an ordering and an annotated triple")
        if ja.claim.ann_triple.ann != jo.claim.ann:
            raise RuleError("premises talk about different annotations")
        if normalize(ja.claim.ann_triple.pre) != normalize(jo.claim.pre):
            raise RuleError("premises talk about different preconditions")
        concl = TripleClaim(
            Triple(jo.claim.pre, jo.claim.prog, ja.claim.ann_triple.post),
            jo.claim.var_domains,
        )
        return Judgement(concl, ByRule(rule, premises))

    if rule == "weaken_annotation":
        # {P} f ⊑ F and pointwise per-step entailment F_i ⇒ G_i derive
        # {P} f ⊑ G (per-step generalization of the single-lift rule).
        (jo,) = premises
        if not isinstance(jo.claim, OrderingClaim):
            raise RuleError("weaken_annotation wants an ordering premise")
        G: AnnComp = kw["weaker"]
        F = jo.claim.ann
        if not same_skeleton(F, G):
            raise RuleError("annotations differ beyond per-step predicates")
        vd = dict(jo.claim.var_domains)
        step_domains = kw.get("step_var_domains", {})
        for i, (pf, pg) in enumerate(zip(annotations_of(F), annotations_of(G))):
            local = dict(vd)
            local.update(step_domains.get(i, {}))
            v = entails(pf, pg, schema, defs, local)
            if not v.holds():
                raise RuleError(f"step {i} predicate does not weaken: {v.kind}")
        concl = OrderingClaim(jo.claim.pre, jo.claim.prog, G, jo.claim.var_domains)
        return Judgement(concl, ByRule(rule, premises))

    if rule == "merge_adherence":
        # {P} f ⊑ F and {Q} f ⊑ F' derive {P and Q} f ⊑ F ⋈ F'
        jf, jg = premises
        if not isinstance(jf.claim, OrderingClaim) or not isinstance(
            jg.claim, OrderingClaim
        ):
            raise RuleError("merge_adherence wants two ordering premises")
        if jf.claim.prog != jg.claim.prog:
            raise RuleError("orderings cover different programs")
        merged = merge(jf.claim.ann, jg.claim.ann)
        concl = OrderingClaim(
            normalize(AndP((jf.claim.pre, jg.claim.pre))),
            jf.claim.prog,
            merged,
            jf.claim.var_domains,
        )
        return Judgement(concl, ByRule(rule, premises))

    if rule == "strong_split":
        # forall x. ||B x|| G ||C||  and  {A and P} f {B}  derive
        # ||A|| doA x <- {P} f; G odA ||C||
        jg, jf = premises
        if not isinstance(jg.claim, AnnTripleClaim) or not isinstance(
            jf.claim, TripleClaim
        ):
            raise RuleError("strong_split wants an annotated triple and a triple")
        A: Pred = kw["pre"]
        P: Pred = kw["head_ann"]
        binder: str = kw["binder"]
        tf = jf.claim.triple
        if normalize(tf.pre) != normalize(AndP((A, P))):
            raise RuleError("head premise precondition is not pre/annotation split")
        tg = jg.claim.ann_triple
        from .lang import Var

        expected_mid = normalize(
            subst_pred(tf.post.body, {tf.post.ret: Var(binder)}, {}, defs)
        )
        if normalize(tg.pre) != expected_mid:
            raise RuleError("continuation precondition does not match the midpoint")
        concl = AnnTripleClaim(
            AnnTriple(
                A,
                BindA(lift(P, tf.prog), binder, tg.ann),
                tg.post,
            ),
            jf.claim.var_domains,
        )
        return Judgement(concl, ByRule(rule, premises))

    if rule == "split":
        # forall x. {B x} g {C}  and  {A} f {B}  derive  {A} x <- f; g {C}
        jg, jf = premises
        if not isinstance(jg.claim, TripleClaim) or not isinstance(
            jf.claim, TripleClaim
        ):
            raise RuleError("split wants two triple premises")
        binder: str = kw["binder"]
        tf = jf.claim.triple
        tg = jg.claim.triple
        from .lang import Var

        expected_mid = normalize(
            subst_pred(tf.post.body, {tf.post.ret: Var(binder)}, {}, defs)
        )
        if normalize(tg.pre) != expected_mid:
            raise RuleError("continuation precondition does not match the midpoint")
        concl = TripleClaim(
            Triple(tf.pre, Bind(tf.prog, binder, tg.prog), tg.post),
            jf.claim.var_domains,
        )
        return Judgement(concl, ByRule(rule, premises))

    raise RuleError(f"unknown rule {rule}")
