"""Annotation-collecting verification condition generation.

vcg_prove walks a program backward from the postcondition. Atomic steps
use exact weakest preconditions by substitution; named sub-programs use
registered per-program rules, instantiated by structural matching against
the requested postcondition. The precondition computed at each step is
recorded as that step's annotation, so a successful run yields both a
verdict and an annotated computation describing the proof.

vcg_strong does the same walk over an already-annotated program. The full
computed precondition is still collected at each step, but before being
propagated further back, any conjunct already guaranteed by the step's
input annotation is dropped. This is how previously proved facts are
reused instead of reproved.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from .annot import (
    AnnComp,
    AnnIf,
    AnnStep,
    AnnTriple,
    AnnotatorClaim,
    BindA,
    ByRule,
    Judgement,
    StrongAnnotatorClaim,
    TripleClaim,
)
from .hoare import Triple, check_triple, ret_domain_of, wp_atomic
from .lang import (
    Bind,
    Call,
    Comp,
    Expr,
    If,
    LangError,
    ProgDefs,
    Return,
    Var,
    is_atomic,
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
    PredDefs,
    TrueP,
    Verdict,
    and_all,
    conjuncts,
    entails,
    normalize,
    subst_expr,
    subst_pred,
)
from .values import Domain, StateSchema, UnitDom


class VcgError(ValueError):
    pass


@dataclass(frozen=True)
class ProgramRule:
    """A proved per-program lemma, usable as a rewrite at call sites.

    Free variables of pre/post are the program's formal parameters (bound
    by the call's arguments), the post's return binder, and extra_vars
    (solved by matching the post against the requested postcondition).
    """

    prog: str
    pre: Pred
    post: PostPred
    extra_vars: Tuple[Tuple[str, Domain], ...] = ()


class RuleDB:
    def __init__(self):
        self._rules: List[ProgramRule] = []

    def register(self, rule: ProgramRule) -> None:
        self._rules.append(rule)

    def rules(self) -> Tuple[ProgramRule, ...]:
        return tuple(self._rules)

    def for_program(self, name: str) -> Tuple[ProgramRule, ...]:
        """Most recently registered first."""
        return tuple(r for r in reversed(self._rules) if r.prog == name)


@dataclass(frozen=True)
class Obligation:
    kind: str  # "rule" | "wp" | "eliminated" | "propagated" | "entailment"
    step: int  # step index in program order, -1 for the top-level obligation
    detail: str
    pred: Optional[Pred] = None
    verdict: Optional[Verdict] = None


@dataclass(frozen=True)
class VcgResult:
    verdict: Verdict
    pre: Pred  # computed precondition of the whole program
    ann: AnnComp  # collected annotation
    obligations: Tuple[Obligation, ...]
    judgement: Optional[Judgement] = None


# ---------------------------------------------------------------------------
# Matching rule postconditions against requested postconditions


def _match_expr(pat: Expr, tgt: Expr, extras: frozenset, binding: Dict[str, Expr]):
    if isinstance(pat, Var) and pat.name in extras:
        bound = binding.get(pat.name)
        if bound is None:
            out = dict(binding)
            out[pat.name] = tgt
            return out
        return binding if bound == tgt else None
    if type(pat) is not type(tgt):
        return None
    for f in pat.__dataclass_fields__:
        pv, tv = getattr(pat, f), getattr(tgt, f)
        if isinstance(pv, Expr):
            binding = _match_expr(pv, tv, extras, binding)
            if binding is None:
                return None
        elif isinstance(pv, tuple):
            if len(pv) != len(tv):
                return None
            for px, tx in zip(pv, tv):
                if isinstance(px, Expr):
                    binding = _match_expr(px, tx, extras, binding)
                    if binding is None:
                        return None
                elif px != tx:
                    return None
        elif pv != tv:
            return None
    return binding


def _match_pred(pat: Pred, tgt: Pred, extras: frozenset, binding: Dict[str, Expr]):
    if isinstance(pat, (TrueP, FalseP)):
        return binding if type(pat) is type(tgt) else None
    if isinstance(pat, Atom):
        if not isinstance(tgt, Atom):
            return None
        return _match_expr(pat.expr, tgt.expr, extras, binding)
    if isinstance(pat, DefRef):
        if not isinstance(tgt, DefRef) or pat.name != tgt.name:
            return None
        if len(pat.args) != len(tgt.args):
            return None
        for pa, ta in zip(pat.args, tgt.args):
            binding = _match_expr(pa, ta, extras, binding)
            if binding is None:
                return None
        return binding
    if isinstance(pat, AndP):
        # Conjunction sets match as multisets; try assignments with
        # backtracking, first consistent one wins.
        if not isinstance(tgt, AndP) or len(pat.items) != len(tgt.items):
            return None
        return _match_multiset(list(pat.items), list(tgt.items), extras, binding)
    if isinstance(pat, OrP):
        if not isinstance(tgt, OrP) or len(pat.items) != len(tgt.items):
            return None
        return _match_multiset(list(pat.items), list(tgt.items), extras, binding)
    if isinstance(pat, NotP):
        if not isinstance(tgt, NotP):
            return None
        return _match_pred(pat.arg, tgt.arg, extras, binding)
    if isinstance(pat, ImpP):
        if not isinstance(tgt, ImpP):
            return None
        binding = _match_pred(pat.hyp, tgt.hyp, extras, binding)
        if binding is None:
            return None
        return _match_pred(pat.concl, tgt.concl, extras, binding)
    if isinstance(pat, (ForallP, ExistsP)):
        if (
            type(pat) is not type(tgt)
            or pat.binder != tgt.binder
            or pat.domain != tgt.domain
        ):
            return None
        # The quantifier shadows any extra of the same name.
        return _match_pred(pat.body, tgt.body, extras - {pat.binder}, binding)
    return None


def _match_multiset(pats, tgts, extras, binding):
    if not pats:
        return binding
    head, rest = pats[0], pats[1:]
    for k, t in enumerate(tgts):
        b = _match_pred(head, t, extras, dict(binding))
        if b is None:
            continue
        b = _match_multiset(rest, tgts[:k] + tgts[k + 1:], extras, b)
        if b is not None:
            return b
    return None


def instantiate_rule(
    rule: ProgramRule,
    call: Call,
    post: PostPred,
    progs: ProgDefs,
    defs: Optional[PredDefs],
    schema: StateSchema,
    env_domains: Optional[Dict[str, Domain]] = None,
    allow_entailment: bool = True,
) -> Optional[Tuple[Pred, str]]:
    """Try to use a rule at a call site with the requested postcondition.

    Returns the instantiated precondition and a description, or None if
    the rule does not apply. Formals are bound by the call's arguments,
    the return binder is renamed, and extras are solved by matching. When
    a rule has no extras but the shapes differ, an exact entailment check
    of its postcondition against the requested one is tried instead.
    """
    d = progs[call.name]
    if len(call.args) != len(d.params):
        raise LangError(f"{call.name} arity mismatch at call site")
    formal_sub: Dict[str, Expr] = {
        name: arg for (name, _), arg in zip(d.params, call.args)
    }
    ret_sub = dict(formal_sub)
    ret_sub[rule.post.ret] = Var(post.ret)
    inst_post = subst_pred(rule.post.body, ret_sub, {}, defs)
    extras = frozenset(n for n, _ in rule.extra_vars)
    binding = _match_pred(
        normalize(inst_post), normalize(post.body), extras, {}
    )
    if binding is not None and set(binding) == set(extras):
        full_sub = dict(formal_sub)
        full_sub.update(binding)
        pre = subst_pred(rule.pre, full_sub, {}, defs)
        return pre, f"rule for {call.name} matched structurally"
    if allow_entailment and not extras:
        vd = dict(env_domains or {})
        vd[post.ret] = d.ret_domain
        v = entails(inst_post, post.body, schema, defs, vd)
        if v.holds():
            pre = subst_pred(rule.pre, formal_sub, {}, defs)
            return pre, f"rule for {call.name} applied via postcondition entailment"
    return None


# ---------------------------------------------------------------------------
# Step preconditions


def _inline_call(call: Call, progs: ProgDefs) -> Comp:
    """Expand a call into its body with arguments evaluated at the call
    state, preserving call-by-value semantics."""
    d = progs[call.name]
    body = d.body
    for (name, _), arg in reversed(list(zip(d.params, call.args))):
        body = Bind(Return(arg), name, body)
    return body


def step_pre(
    c: Comp,
    post: PostPred,
    schema: StateSchema,
    defs: Optional[PredDefs],
    progs: ProgDefs,
    db: Optional[RuleDB],
    env_domains: Dict[str, Domain],
    log: List[Obligation],
    step_index: int,
) -> Pred:
    """Precondition of a single step against the requested postcondition."""
    if isinstance(c, Call):
        if db is not None:
            for rule in db.for_program(c.name):
                got = instantiate_rule(
                    rule, c, post, progs, defs, schema, env_domains,
                    allow_entailment=False,
                )
                if got is not None:
                    pre, why = got
                    log.append(Obligation("rule", step_index, why, pre))
                    return pre
            for rule in db.for_program(c.name):
                got = instantiate_rule(
                    rule, c, post, progs, defs, schema, env_domains,
                    allow_entailment=True,
                )
                if got is not None:
                    pre, why = got
                    log.append(Obligation("rule", step_index, why, pre))
                    return pre
        pre = wp_comp(
            _inline_call(c, progs), post, schema, defs, progs, db, env_domains
        )
        log.append(
            Obligation("wp", step_index, f"{c.name} expanded inline", pre)
        )
        return pre
    pre = wp_atomic(c, post, schema, defs, env_domains)
    log.append(Obligation("wp", step_index, "weakest precondition", pre))
    return pre


def wp_comp(
    c: Comp,
    post: PostPred,
    schema: StateSchema,
    defs: Optional[PredDefs] = None,
    progs: Optional[ProgDefs] = None,
    db: Optional[RuleDB] = None,
    env_domains: Optional[Dict[str, Domain]] = None,
) -> Pred:
    """Backward precondition computation over arbitrary program structure."""
    progs = progs or {}
    env_domains = dict(env_domains or {})
    if isinstance(c, Bind):
        inner = dict(env_domains)
        inner[c.binder] = ret_domain_of(c.first, schema, progs, env_domains)
        post_rest = wp_comp(c.rest, post, schema, defs, progs, db, inner)
        return wp_comp(
            c.first, PostPred(c.binder, post_rest), schema, defs, progs, db,
            env_domains,
        )
    if isinstance(c, If) and not is_atomic(c):
        then_pre = wp_comp(c.then, post, schema, defs, progs, db, env_domains)
        els_pre = wp_comp(c.els, post, schema, defs, progs, db, env_domains)
        return and_all(
            ImpP(Atom(c.cond), then_pre),
            ImpP(NotP(Atom(c.cond)), els_pre),
        )
    scratch: List[Obligation] = []
    return step_pre(c, post, schema, defs, progs, db, env_domains, scratch, -1)


# ---------------------------------------------------------------------------
# Annotation-collecting passes


def vcg_prove(
    pre: Pred,
    prog: Comp,
    post: PostPred,
    schema: StateSchema,
    defs: Optional[PredDefs] = None,
    progs: Optional[ProgDefs] = None,
    db: Optional[RuleDB] = None,
    var_domains: Optional[Dict[str, Domain]] = None,
) -> VcgResult:
    """Prove {pre} prog {post}, collecting the computed preconditions as an
    annotation of the program. A top-level call is unfolded one level so
    its body's steps get annotated."""
    progs = progs or {}
    env_domains = dict(var_domains or {})
    body = prog
    if isinstance(prog, Call):
        body = _inline_call(prog, progs)
        body = _strip_identity_args(body)
    log: List[Obligation] = []
    top_pre, ann = _collect(
        body, post, schema, defs, progs, db, env_domains, log, 0
    )
    v = entails(pre, top_pre, schema, defs, env_domains)
    log.append(
        Obligation("entailment", -1, "declared precondition implies computed", top_pre, v)
    )
    j = None
    if v.holds():
        claim = AnnotatorClaim(
            pre, body, post, ann, tuple(sorted((var_domains or {}).items()))
        )
        j = Judgement(claim, ByRule("vcg", ()))
    kind = v.kind if not v.holds() else Verdict.HOLDS
    return VcgResult(Verdict(kind, v.witness, v.checked), top_pre, ann, tuple(log), j)


def _strip_identity_args(body: Comp) -> Comp:
    """Drop `x <- return x` wrappers produced by inlining a call whose
    arguments are the same variables as the formals."""
    while (
        isinstance(body, Bind)
        and isinstance(body.first, Return)
        and body.first.expr == Var(body.binder)
    ):
        body = body.rest
    return body


def count_steps(c) -> int:
    """Annotated positions of a computation: one per atomic step."""
    if isinstance(c, Bind):
        return count_steps(c.first) + count_steps(c.rest)
    if isinstance(c, If) and not is_atomic(c):
        return count_steps(c.then) + count_steps(c.els)
    return 1


def _collect(c, post, schema, defs, progs, db, env_domains, log, base):
    """Backward pass; `base` is the program-order index of c's first step."""
    if isinstance(c, Bind):
        inner = dict(env_domains)
        inner[c.binder] = ret_domain_of(c.first, schema, progs, env_domains)
        rest_pre, rest_ann = _collect(
            c.rest, post, schema, defs, progs, db, inner, log,
            base + count_steps(c.first),
        )
        pre, ann = _collect(
            c.first, PostPred(c.binder, rest_pre), schema, defs, progs, db,
            env_domains, log, base,
        )
        return pre, BindA(ann, c.binder, rest_ann)
    pre = step_pre(c, post, schema, defs, progs, db, env_domains, log, base)
    return pre, AnnStep(pre, c)


def vcg_strong(
    pre: Pred,
    ann_in: AnnComp,
    post: PostPred,
    schema: StateSchema,
    defs: Optional[PredDefs] = None,
    progs: Optional[ProgDefs] = None,
    db: Optional[RuleDB] = None,
    var_domains: Optional[Dict[str, Domain]] = None,
) -> VcgResult:
    """Prove the annotated triple ||pre|| ann_in ||post||, reusing the input
    annotation: at each step, conjuncts of the computed precondition that
    already follow from the step's annotation are discharged on the spot
    instead of being propagated backward."""
    progs = progs or {}
    env_domains = dict(var_domains or {})
    log: List[Obligation] = []
    top_pre, ann_out = _collect_strong(
        ann_in, post, schema, defs, progs, db, env_domains, log, 0
    )
    v = entails(pre, top_pre, schema, defs, env_domains)
    log.append(
        Obligation("entailment", -1, "declared precondition implies computed", top_pre, v)
    )
    j = None
    if v.holds():
        claim = StrongAnnotatorClaim(
            pre, ann_in, post, ann_out, tuple(sorted((var_domains or {}).items()))
        )
        j = Judgement(claim, ByRule("vcg_strong", ()))
    kind = v.kind if not v.holds() else Verdict.HOLDS
    return VcgResult(Verdict(kind, v.witness, v.checked), top_pre, ann_out, tuple(log), j)


def _collect_strong(F, post, schema, defs, progs, db, env_domains, log, base):
    from .annot import dropA

    if isinstance(F, BindA):
        inner = dict(env_domains)
        inner[F.binder] = ret_domain_of(
            dropA(F.first), schema, progs, env_domains
        )
        rest_pre, rest_ann = _collect_strong(
            F.rest, post, schema, defs, progs, db, inner, log,
            base + count_steps(dropA(F.first)),
        )
        pre, ann = _collect_strong(
            F.first, PostPred(F.binder, rest_pre), schema, defs, progs, db,
            env_domains, log, base,
        )
        return pre, BindA(ann, F.binder, rest_ann)
    return _strong_step(
        F, post, schema, defs, progs, db, env_domains, log, base
    )


def _strong_step(F, post, schema, defs, progs, db, env_domains, log, index):
    if not isinstance(F, AnnStep):
        raise VcgError("strong pass needs a fully annotated bind spine")
    full_pre = step_pre(
        F.step, post, schema, defs, progs, db, env_domains, log, index
    )
    kept = list(conjuncts(normalize(full_pre)))
    k = 0
    while k < len(kept):
        candidate = kept[k]
        others = kept[:k] + kept[k + 1:]
        hyp = and_all(*(others + [F.ann]))
        if entails(hyp, candidate, schema, defs, env_domains).holds():
            log.append(
                Obligation(
                    "eliminated",
                    index,
                    "conjunct discharged by the step annotation",
                    candidate,
                )
            )
            kept.pop(k)
        else:
            k += 1
    propagated = and_all(*kept)
    log.append(
        Obligation("propagated", index, "precondition propagated backward", propagated)
    )
    return propagated, AnnStep(full_pre, F.step)


# ---------------------------------------------------------------------------
# Rule validation


def discharge(
    db: RuleDB,
    schema: StateSchema,
    defs: Optional[PredDefs],
    progs: ProgDefs,
) -> Tuple[Tuple[ProgramRule, Verdict], ...]:
    """Check every registered rule by exhaustive enumeration."""
    out = []
    for rule in db.rules():
        d = progs[rule.prog]
        vd: Dict[str, Domain] = {name: dom for name, dom in d.params}
        vd.update({name: dom for name, dom in rule.extra_vars})
        call = Call(rule.prog, tuple(Var(name) for name, _ in d.params))
        t = Triple(rule.pre, call, rule.post)
        out.append((rule, check_triple(t, schema, defs, progs, vd)))
    return tuple(out)
