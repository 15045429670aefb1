"""Hoare triples over the nondeterministic state monad, checked exactly.

check_triple is the semantic oracle of the whole package: it decides
{P} f {Q} by enumerating every state of the schema (and every assignment
of declared free variables) and inspecting every outcome. Derivation
rules elsewhere are validated against it, never trusted.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Optional, Tuple

from .lang import (
    Assert,
    Bind,
    Call,
    Comp,
    Eq,
    ExecFault,
    Expr,
    Field,
    FieldOf,
    Gets,
    If,
    In,
    LangError,
    Lit,
    MapApply,
    MapAssign,
    MapLookup,
    MapUpd,
    Not,
    Outcome,
    ProgDefs,
    Put,
    RecordUpd,
    Return,
    Select,
    SeqCons,
    SetLit,
    SetMinus,
    Var,
    is_atomic,
    run,
)
from .pred import (
    AndP,
    Atom,
    CachedPred,
    Counterexample,
    ForallP,
    ImpP,
    PostPred,
    Pred,
    PredDefs,
    TrueP,
    Verdict,
    _expr_vars,
    entails,
    eval_pred,
    pred_free_vars,
    subst_pred,
    subst_ret,
)
from .values import (
    BoolDom,
    Domain,
    ExplicitDom,
    MapDom,
    RecordDom,
    SeqDom,
    SetDom,
    State,
    StateSchema,
    UnitDom,
    enumerate_domain,
    enumerate_states,
    value_key,
)


@dataclass(frozen=True)
class Triple:
    pre: Pred
    prog: Comp
    post: PostPred


def check_triple(
    t: Triple,
    schema: StateSchema,
    defs: Optional[PredDefs] = None,
    progs: Optional[ProgDefs] = None,
    var_domains: Optional[Dict[str, Domain]] = None,
    window: Optional[Tuple[int, int]] = None,
) -> Verdict:
    """Holds iff from every pre-state, every outcome satisfies the post.

    Free variables of the triple (program parameters, split binders) are
    quantified over their declared domains, assignments before states, so
    the first counterexample is deterministic.

    `window` restricts the run to a half-open slice of the flat
    (assignment, state) index space, letting callers split the work across
    processes; the verdict of the lowest-index failing slice equals the
    sequential verdict.
    """
    var_domains = var_domains or {}
    names = sorted(var_domains)
    pre_eval = CachedPred(t.pre, defs, schema)
    post_eval = CachedPred(t.post.body, defs, schema)
    checked = 0
    import itertools

    env_streams = [list(enumerate_domain(var_domains[n])) for n in names]
    states = list(enumerate_states(schema))
    n_states = len(states)
    for e_idx, assignment in enumerate(itertools.product(*env_streams)):
        todo = states
        if window is not None:
            base = e_idx * n_states
            s_lo = max(window[0] - base, 0)
            s_hi = min(window[1] - base, n_states)
            if s_hi <= s_lo:
                continue
            todo = states[s_lo:s_hi]
        env = dict(zip(names, assignment))
        env_items = tuple(zip(names, assignment))
        for s in todo:
            checked += 1
            try:
                if not pre_eval(env, s):
                    continue
                outcomes = run(t.prog, env, s, progs, defs)
            except ExecFault as fault:
                return Verdict(
                    Verdict.FAULT,
                    Counterexample(s, env_items, diagnostic=fault.diagnostic),
                    checked,
                )
            for o in outcomes:
                post_env = dict(env)
                post_env[t.post.ret] = o.ret
                try:
                    ok = post_eval(post_env, o.state)
                except ExecFault as fault:
                    return Verdict(
                        Verdict.FAULT,
                        Counterexample(s, env_items, o, fault.diagnostic),
                        checked,
                    )
                if not ok:
                    return Verdict(
                        Verdict.VIOLATED, Counterexample(s, env_items, o), checked
                    )
    return Verdict(Verdict.HOLDS, None, checked)


def naive_check_triple(
    t: Triple,
    schema: StateSchema,
    defs: Optional[PredDefs] = None,
    progs: Optional[ProgDefs] = None,
    var_domains: Optional[Dict[str, Domain]] = None,
) -> Verdict:
    """Redundant oracle: the same decision procedure written as a direct
    double loop with no caching. Kept deliberately independent of
    check_triple's short cuts."""
    var_domains = var_domains or {}
    names = sorted(var_domains)
    import itertools

    env_streams = [list(enumerate_domain(var_domains[n])) for n in names]
    for assignment in itertools.product(*env_streams):
        env = dict(zip(names, assignment))
        env_items = tuple(zip(names, assignment))
        for s in enumerate_states(schema):
            try:
                if not eval_pred(t.pre, env, s, defs):
                    continue
                for o in run(t.prog, env, s, progs, defs):
                    post_env = dict(env)
                    post_env[t.post.ret] = o.ret
                    if not eval_pred(t.post.body, post_env, o.state, defs):
                        return Verdict(
                            Verdict.VIOLATED, Counterexample(s, env_items, o)
                        )
            except ExecFault as fault:
                return Verdict(
                    Verdict.FAULT,
                    Counterexample(s, env_items, diagnostic=fault.diagnostic),
                )
    return Verdict(Verdict.HOLDS)


# ---------------------------------------------------------------------------
# Domain inference (needed to phrase Select's weakest precondition as a
# bounded quantifier and to give split binders their ranges)


def infer_domain(
    e: Expr,
    schema: StateSchema,
    env_domains: Optional[Dict[str, Domain]] = None,
    progs: Optional[ProgDefs] = None,
) -> Domain:
    env_domains = env_domains or {}
    if isinstance(e, Lit):
        v = e.value
        if isinstance(v, bool):
            return BoolDom()
        if v is None:
            return UnitDom()
        return ExplicitDom((v,))
    if isinstance(e, Var):
        if e.name not in env_domains:
            raise LangError(f"no domain known for variable {e.name}")
        return env_domains[e.name]
    if isinstance(e, Field):
        return schema.field_domain(e.name)
    if isinstance(e, FieldOf):
        rec = infer_domain(e.rec, schema, env_domains, progs)
        if isinstance(rec, RecordDom):
            return dict(rec.fields)[e.field]
        raise LangError(f"field projection on non-record domain {rec!r}")
    if isinstance(e, (RecordUpd, MapUpd, MapAssign, SetMinus)):
        first = e.rec if isinstance(e, RecordUpd) else (e.map if not isinstance(e, SetMinus) else e.left)
        return infer_domain(first, schema, env_domains, progs)
    if isinstance(e, (MapLookup, MapApply)):
        m = infer_domain(e.map, schema, env_domains, progs)
        if isinstance(m, MapDom):
            return m.val
        raise LangError(f"lookup on non-map domain {m!r}")
    if isinstance(e, SeqCons):
        return infer_domain(e.tail, schema, env_domains, progs)
    raise LangError(f"cannot infer a domain for {e!r}")


def elem_domain(
    set_expr: Expr,
    schema: StateSchema,
    env_domains: Optional[Dict[str, Domain]] = None,
) -> Optional[Domain]:
    """Element domain of a set-valued expression; None when the set is
    statically empty."""
    env_domains = env_domains or {}
    if isinstance(set_expr, Lit):
        v = set_expr.value
        if not isinstance(v, frozenset):
            raise LangError(f"select over non-set literal {v!r}")
        if not v:
            return None
        return ExplicitDom(tuple(sorted(v, key=value_key)))
    if isinstance(set_expr, SetLit):
        if not set_expr.items:
            return None
        if all(isinstance(x, Lit) for x in set_expr.items):
            vals = sorted({x.value for x in set_expr.items}, key=value_key)
            return ExplicitDom(tuple(vals))
        raise LangError("set literal with non-literal members")
    if isinstance(set_expr, SetMinus):
        return elem_domain(set_expr.left, schema, env_domains)
    if isinstance(set_expr, (Var, Field)):
        d = infer_domain(set_expr, schema, env_domains)
        if isinstance(d, SetDom):
            return d.base
        raise LangError(f"select over non-set domain {d!r}")
    from .lang import DomOf

    if isinstance(set_expr, DomOf):
        d = infer_domain(set_expr.map, schema, env_domains)
        if isinstance(d, MapDom):
            return d.key
        raise LangError(f"dom of non-map domain {d!r}")
    raise LangError(f"cannot infer element domain of {set_expr!r}")


def ret_domain_of(
    c: Comp,
    schema: StateSchema,
    progs: Optional[ProgDefs] = None,
    env_domains: Optional[Dict[str, Domain]] = None,
) -> Domain:
    progs = progs or {}
    env_domains = dict(env_domains or {})
    if isinstance(c, Return):
        return infer_domain(c.expr, schema, env_domains, progs)
    if isinstance(c, Gets):
        return schema.field_domain(c.field)
    if isinstance(c, (Put, Assert)):
        return UnitDom()
    if isinstance(c, Select):
        d = elem_domain(c.expr, schema, env_domains)
        return d if d is not None else UnitDom()
    if isinstance(c, Call):
        if c.name not in progs:
            raise LangError(f"call to undefined program {c.name}")
        return progs[c.name].ret_domain
    if isinstance(c, Bind):
        env_domains[c.binder] = ret_domain_of(c.first, schema, progs, env_domains)
        return ret_domain_of(c.rest, schema, progs, env_domains)
    if isinstance(c, If):
        return ret_domain_of(c.then, schema, progs, env_domains)
    raise LangError(f"unknown computation {c!r}")


# ---------------------------------------------------------------------------
# Atomic weakest preconditions


def wp_atomic(
    c: Comp,
    post: PostPred,
    schema: StateSchema,
    defs: Optional[PredDefs] = None,
    env_domains: Optional[Dict[str, Domain]] = None,
) -> Pred:
    """Weakest precondition of an atomic step, by substitution.

    Substitution into the postcondition unfolds definition references as
    needed, so the result may be larger than the input but is always exact:
    {wp} c {post} holds, and any valid precondition entails wp.
    """
    if not is_atomic(c) or isinstance(c, Call):
        raise LangError(f"wp_atomic needs an atomic non-call step, got {type(c).__name__}")
    if isinstance(c, Return):
        return subst_ret(post, c.expr, defs)
    if isinstance(c, Gets):
        return subst_ret(post, Field(c.field), defs)
    if isinstance(c, Put):
        dropped = subst_ret(post, Lit(None), defs)
        return subst_pred(dropped, {}, {c.field: c.expr}, defs)
    if isinstance(c, Select):
        dom = elem_domain(c.expr, schema, env_domains)
        if dom is None:
            return TrueP()
        from .pred import _fresh

        taken = (pred_free_vars(post.body, defs) - {post.ret}) | {
            v.name for v in _expr_vars(c.expr)
        }
        binder = post.ret if post.ret not in taken else _fresh(post.ret, taken)
        body = subst_ret(post, Var(binder), defs)
        return ForallP(binder, dom, ImpP(Atom(In(Var(binder), c.expr)), body))
    if isinstance(c, Assert):
        return AndP((c.pred, subst_ret(post, Lit(None), defs)))
    if isinstance(c, If):
        wp_t = wp_atomic(c.then, post, schema, defs, env_domains)
        wp_e = wp_atomic(c.els, post, schema, defs, env_domains)
        return AndP(
            (ImpP(Atom(c.cond), wp_t), ImpP(Atom(Not(c.cond)), wp_e))
        )
    raise LangError(f"unknown atomic step {c!r}")


# ---------------------------------------------------------------------------
# Rules of the plain logic


def split(t: Triple, midpoint: PostPred) -> Tuple[Triple, Triple]:
    """Decompose a goal over a bind at a chosen midpoint predicate.

    Returns (continuation premise, head premise). The continuation premise
    has the bind's binder free; quantify it over the head's return domain
    when checking. If both premises hold, so does the composite.
    """
    if not isinstance(t.prog, Bind):
        raise LangError("split needs a goal over a bind")
    b = t.prog
    cont_pre = subst_pred(midpoint.body, {midpoint.ret: Var(b.binder)}, {})
    premise_cont = Triple(cont_pre, b.rest, t.post)
    premise_head = Triple(t.pre, b.first, midpoint)
    return premise_cont, premise_head


def weaken(
    t: Triple,
    new_pre: Pred,
    schema: StateSchema,
    defs: Optional[PredDefs] = None,
    var_domains: Optional[Dict[str, Domain]] = None,
) -> Triple:
    """Strengthen the precondition (rule of consequence, precondition side).
    Rejected with the counterexample when the entailment fails."""
    v = entails(new_pre, t.pre, schema, defs, var_domains)
    if not v.holds():
        raise EntailmentError(v)
    return Triple(new_pre, t.prog, t.post)


class EntailmentError(ValueError):
    def __init__(self, verdict: Verdict):
        self.verdict = verdict
        w = verdict.witness
        super().__init__(
            f"entailment {verdict.kind}: counterexample {w.state!r}"
            + (f" under {dict(w.env)!r}" if w and w.env else "")
        )
