"""Symbolic predicates over states and bound variables.

Entailment is decided by enumeration, never syntactically: it quantifies
bound variables over their declared domains and states over the schema.
The enumeration only ranges over the fields a predicate actually reads
(its footprint), which keeps exhaustive checks fast; completing a failing
projection with first-values reconstructs the canonically first failing
full state.

normalize is cosmetic: it canonicalizes conjunctions so that collected
annotations can be compared against expected ones structurally.
"""

from __future__ import annotations

from dataclasses import dataclass, fields as dc_fields
from typing import Dict, Optional, Tuple

from .lang import Env, ExecFault, Expr, Field, LangError, Var, eval_expr
from .values import (
    Domain,
    State,
    StateSchema,
    complete_state,
    enumerate_domain,
    enumerate_projections,
)


class PredError(ValueError):
    """Ill-formed predicate (unresolved or cyclic definition reference)."""


@dataclass(frozen=True)
class Pred:
    pass


@dataclass(frozen=True)
class TrueP(Pred):
    pass


@dataclass(frozen=True)
class FalseP(Pred):
    pass


@dataclass(frozen=True)
class Atom(Pred):
    expr: Expr


@dataclass(frozen=True)
class AndP(Pred):
    items: Tuple[Pred, ...]


@dataclass(frozen=True)
class OrP(Pred):
    items: Tuple[Pred, ...]


@dataclass(frozen=True)
class NotP(Pred):
    arg: Pred


@dataclass(frozen=True)
class ImpP(Pred):
    hyp: Pred
    concl: Pred


@dataclass(frozen=True)
class ForallP(Pred):
    binder: str
    domain: Domain
    body: Pred


@dataclass(frozen=True)
class ExistsP(Pred):
    binder: str
    domain: Domain
    body: Pred


@dataclass(frozen=True)
class DefRef(Pred):
    name: str
    args: Tuple[Expr, ...] = ()


@dataclass(frozen=True)
class PostPred:
    """Postcondition: a predicate with one extra binder for the return value."""

    ret: str
    body: Pred


@dataclass(frozen=True)
class PredDef:
    params: Tuple[str, ...]
    body: Pred


PredDefs = Dict[str, PredDef]


def and_all(*preds: Pred) -> Pred:
    items = [p for p in preds if not isinstance(p, TrueP)]
    if not items:
        return TrueP()
    if len(items) == 1:
        return items[0]
    return AndP(tuple(items))


def check_defs_acyclic(defs: PredDefs) -> None:
    state: Dict[str, int] = {}

    def refs(p: Pred):
        if isinstance(p, DefRef):
            yield p.name
        for f in dc_fields(p):
            v = getattr(p, f.name)
            if isinstance(v, Pred):
                yield from refs(v)
            elif isinstance(v, tuple):
                for x in v:
                    if isinstance(x, Pred):
                        yield from refs(x)

    def visit(name: str):
        if state.get(name) == 2:
            return
        if state.get(name) == 1:
            raise PredError(f"cyclic predicate definition {name}")
        if name not in defs:
            raise PredError(f"undefined predicate {name}")
        state[name] = 1
        for r in refs(defs[name].body):
            visit(r)
        state[name] = 2

    for n in defs:
        visit(n)


def eval_pred(p: Pred, env: Env, s: State, defs: Optional[PredDefs] = None) -> bool:
    defs = defs or {}
    if isinstance(p, TrueP):
        return True
    if isinstance(p, FalseP):
        return False
    if isinstance(p, Atom):
        return bool(eval_expr(p.expr, env, s))
    if isinstance(p, AndP):
        return all(eval_pred(q, env, s, defs) for q in p.items)
    if isinstance(p, OrP):
        return any(eval_pred(q, env, s, defs) for q in p.items)
    if isinstance(p, NotP):
        return not eval_pred(p.arg, env, s, defs)
    if isinstance(p, ImpP):
        return (not eval_pred(p.hyp, env, s, defs)) or eval_pred(p.concl, env, s, defs)
    if isinstance(p, ForallP):
        inner = dict(env)
        for v in enumerate_domain(p.domain):
            inner[p.binder] = v
            if not eval_pred(p.body, inner, s, defs):
                return False
        return True
    if isinstance(p, ExistsP):
        inner = dict(env)
        for v in enumerate_domain(p.domain):
            inner[p.binder] = v
            if eval_pred(p.body, inner, s, defs):
                return True
        return False
    if isinstance(p, DefRef):
        if p.name not in defs:
            raise PredError(f"undefined predicate {p.name}")
        d = defs[p.name]
        if len(p.args) != len(d.params):
            raise PredError(
                f"{p.name} expects {len(d.params)} arguments, got {len(p.args)}"
            )
        inner = {
            param: eval_expr(arg, env, s) for param, arg in zip(d.params, p.args)
        }
        return eval_pred(d.body, inner, s, defs)
    raise PredError(f"unknown predicate {p!r}")


# ---------------------------------------------------------------------------
# Footprints and cached evaluation


def expr_state_fields(e: Expr) -> frozenset:
    out = set()

    def go(x):
        if isinstance(x, Field):
            out.add(x.name)
        for f in dc_fields(x):
            v = getattr(x, f.name)
            if isinstance(v, Expr):
                go(v)
            elif isinstance(v, tuple):
                for y in v:
                    if isinstance(y, Expr):
                        go(y)

    go(e)
    return frozenset(out)


def pred_state_fields(p: Pred, defs: Optional[PredDefs] = None) -> frozenset:
    defs = defs or {}
    out = set()

    def go(q):
        if isinstance(q, Atom):
            out.update(expr_state_fields(q.expr))
            return
        if isinstance(q, DefRef):
            for a in q.args:
                out.update(expr_state_fields(a))
            if q.name in defs:
                go(defs[q.name].body)
            return
        for f in dc_fields(q):
            v = getattr(q, f.name)
            if isinstance(v, Pred):
                go(v)
            elif isinstance(v, tuple):
                for x in v:
                    if isinstance(x, Pred):
                        go(x)

    go(p)
    return frozenset(out)


def pred_free_vars(p: Pred, defs: Optional[PredDefs] = None) -> frozenset:
    """Free (non-state) variables of p, looking through definition bodies."""
    defs = defs or {}

    def expr_vars(e, bound):
        out = set()

        def go(x):
            if isinstance(x, Var) and x.name not in bound:
                out.add(x.name)
            for f in dc_fields(x):
                v = getattr(x, f.name)
                if isinstance(v, Expr):
                    go(v)
                elif isinstance(v, tuple):
                    for y in v:
                        if isinstance(y, Expr):
                            go(y)

        go(e)
        return out

    def go(q, bound):
        if isinstance(q, Atom):
            return expr_vars(q.expr, bound)
        if isinstance(q, DefRef):
            out = set()
            for a in q.args:
                out |= expr_vars(a, bound)
            return out
        if isinstance(q, (ForallP, ExistsP)):
            return go(q.body, bound | {q.binder})
        out = set()
        for f in dc_fields(q):
            v = getattr(q, f.name)
            if isinstance(v, Pred):
                out |= go(v, bound)
            elif isinstance(v, tuple):
                for x in v:
                    if isinstance(x, Pred):
                        out |= go(x, bound)
        return out

    return frozenset(go(p, set()))


class CachedPred:
    """Memoized evaluator keyed by the predicate's state-field footprint and
    the ambient environment. Exact: predicates only read their footprint."""

    def __init__(self, p: Pred, defs: Optional[PredDefs], schema: StateSchema):
        self.pred = p
        self.defs = defs
        order = {n: i for i, n in enumerate(schema.field_names())}
        self.fields = tuple(
            sorted(pred_state_fields(p, defs) & set(order), key=order.get)
        )
        self.cache: dict = {}

    def __call__(self, env: Env, s: State) -> bool:
        key = (tuple(sorted(env.items(), key=lambda kv: kv[0])), s.project(self.fields))
        hit = self.cache.get(key)
        if hit is None:
            hit = eval_pred(self.pred, env, s, self.defs)
            self.cache[key] = hit
        return hit


# ---------------------------------------------------------------------------
# Entailment


@dataclass(frozen=True)
class Counterexample:
    state: State
    env: Tuple[Tuple[str, object], ...] = ()
    outcome: object = None
    diagnostic: str = ""


@dataclass(frozen=True)
class Verdict:
    HOLDS = "holds"
    VIOLATED = "violated"
    FAULT = "fault"

    kind: str
    witness: Optional[Counterexample] = None
    checked: int = 0

    def holds(self) -> bool:
        return self.kind == Verdict.HOLDS

    def __bool__(self):
        return self.holds()


def entails(
    P: Pred,
    Q: Pred,
    schema: StateSchema,
    defs: Optional[PredDefs] = None,
    var_domains: Optional[Dict[str, Domain]] = None,
) -> Verdict:
    """Holds iff for every assignment of the declared free variables and
    every state, P implies Q.

    Only the state fields the predicates actually read are enumerated;
    unread fields are fixed at their first values, which is exact because
    a predicate's truth depends only on its footprint. The hypothesis is
    split into conjuncts staged by footprint, so a failing conjunct prunes
    enumeration of fields it does not read. Deterministic; on failure
    carries a counterexample completed with first values."""
    import itertools

    var_domains = var_domains or {}
    free = pred_free_vars(P, defs) | pred_free_vars(Q, defs)
    missing = free - set(var_domains)
    if missing:
        raise PredError(f"no domain declared for free variables {sorted(missing)}")
    names = sorted(var_domains)
    order = {n: i for i, n in enumerate(schema.field_names())}

    hyp_info = []
    for c in conjuncts(normalize(P)):
        foot = sorted(pred_state_fields(c, defs) & set(order), key=order.get)
        hyp_info.append((c, foot))
    hyp_info.sort(key=lambda ci: (len(ci[1]), [order[f] for f in ci[1]], repr(ci[0])))

    # Each stage introduces the fields its conjunct reads beyond what
    # earlier stages already fixed; the final stage adds the conclusion's
    # remaining fields and checks it.
    stages = []
    fixed: set = set()
    for c, foot in hyp_info:
        new = tuple(f for f in foot if f not in fixed)
        fixed.update(new)
        stages.append((new, CachedPred(c, defs, schema)))
    q_foot = sorted(pred_state_fields(Q, defs) & set(order), key=order.get)
    q_new = tuple(f for f in q_foot if f not in fixed)
    stages.append((q_new, CachedPred(Q, defs, schema)))
    last = len(stages) - 1
    projections = {
        new: list(enumerate_projections(schema, new))
        for new, _ in stages
    }

    checked = 0

    def descend(k, flds, vals, env, env_items):
        nonlocal checked
        new, ev = stages[k]
        for sub in projections[new]:
            flds2 = flds + new
            vals2 = vals + sub
            proxy = _proxy(schema, flds2, vals2)
            checked += 1
            try:
                ok = ev(env, proxy)
            except ExecFault as fault:
                s = complete_state(schema, flds2, vals2)
                return Verdict(
                    Verdict.FAULT,
                    Counterexample(s, env_items, diagnostic=fault.diagnostic),
                    checked,
                )
            if k == last:
                if not ok:
                    s = complete_state(schema, flds2, vals2)
                    return Verdict(
                        Verdict.VIOLATED, Counterexample(s, env_items), checked
                    )
            else:
                if not ok:
                    continue
                bad = descend(k + 1, flds2, vals2, env, env_items)
                if bad is not None:
                    return bad
        return None

    env_streams = [list(enumerate_domain(var_domains[n])) for n in names]
    for assignment in itertools.product(*env_streams):
        env = dict(zip(names, assignment))
        env_items = tuple(zip(names, assignment))
        bad = descend(0, (), (), env, env_items)
        if bad is not None:
            return bad
    return Verdict(Verdict.HOLDS, None, checked)


_PROXY_CACHE: dict = {}


def _proxy(schema: StateSchema, foot, proj) -> State:
    """A full state agreeing with proj on foot; unread fields get their
    first values. Cached per (schema, footprint)."""
    key = schema
    firsts = _PROXY_CACHE.get(key)
    if firsts is None:
        firsts = complete_state(schema, (), ())
        _PROXY_CACHE[key] = firsts
    s = firsts
    for n, v in zip(foot, proj):
        s = s.set(n, v)
    return s


def semantically_equal(
    P: Pred,
    Q: Pred,
    schema: StateSchema,
    defs: Optional[PredDefs] = None,
    var_domains: Optional[Dict[str, Domain]] = None,
) -> bool:
    return bool(entails(P, Q, schema, defs, var_domains)) and bool(
        entails(Q, P, schema, defs, var_domains)
    )


# ---------------------------------------------------------------------------
# Normalization


def normalize(p: Pred) -> Pred:
    """Flatten conjunctions, drop True conjuncts, collapse False, dedupe,
    and order conjuncts canonically. Meaning-preserving."""
    if isinstance(p, AndP):
        flat = []
        for q in p.items:
            nq = normalize(q)
            if isinstance(nq, AndP):
                flat.extend(nq.items)
            elif isinstance(nq, TrueP):
                continue
            elif isinstance(nq, FalseP):
                return FalseP()
            else:
                flat.append(nq)
        unique = []
        seen = set()
        for q in flat:
            if q not in seen:
                seen.add(q)
                unique.append(q)
        unique.sort(key=repr)
        if not unique:
            return TrueP()
        if len(unique) == 1:
            return unique[0]
        return AndP(tuple(unique))
    if isinstance(p, OrP):
        return OrP(tuple(normalize(q) for q in p.items))
    if isinstance(p, NotP):
        return NotP(normalize(p.arg))
    if isinstance(p, ImpP):
        return ImpP(normalize(p.hyp), normalize(p.concl))
    if isinstance(p, ForallP):
        return ForallP(p.binder, p.domain, normalize(p.body))
    if isinstance(p, ExistsP):
        return ExistsP(p.binder, p.domain, normalize(p.body))
    return p


def conjuncts(p: Pred) -> Tuple[Pred, ...]:
    n = normalize(p)
    if isinstance(n, AndP):
        return n.items
    if isinstance(n, TrueP):
        return ()
    return (n,)


# ---------------------------------------------------------------------------
# Substitution (the engine behind atomic weakest preconditions)


def subst_expr(e: Expr, var_map: Dict[str, Expr], field_map: Dict[str, Expr]) -> Expr:
    if isinstance(e, Var):
        return var_map.get(e.name, e)
    if isinstance(e, Field):
        return field_map.get(e.name, e)
    updates = {}
    for f in dc_fields(e):
        v = getattr(e, f.name)
        if isinstance(v, Expr):
            updates[f.name] = subst_expr(v, var_map, field_map)
        elif isinstance(v, tuple) and any(isinstance(x, Expr) for x in v):
            updates[f.name] = tuple(
                subst_expr(x, var_map, field_map) if isinstance(x, Expr) else x
                for x in v
            )
    if not updates:
        return e
    kwargs = {f.name: updates.get(f.name, getattr(e, f.name)) for f in dc_fields(e)}
    return type(e)(**kwargs)


def _fresh(base: str, taken) -> str:
    if base not in taken:
        return base
    k = 1
    while f"{base}_{k}" in taken:
        k += 1
    return f"{base}_{k}"


def subst_pred(
    p: Pred,
    var_map: Dict[str, Expr],
    field_map: Dict[str, Expr],
    defs: Optional[PredDefs] = None,
) -> Pred:
    """Substitute expressions for variables and for state-field reads.

    Field substitution unfolds any definition reference whose body reads a
    substituted field; variable substitution is capture-avoiding.
    """
    defs = defs or {}
    if isinstance(p, (TrueP, FalseP)):
        return p
    if isinstance(p, Atom):
        return Atom(subst_expr(p.expr, var_map, field_map))
    if isinstance(p, AndP):
        return AndP(tuple(subst_pred(q, var_map, field_map, defs) for q in p.items))
    if isinstance(p, OrP):
        return OrP(tuple(subst_pred(q, var_map, field_map, defs) for q in p.items))
    if isinstance(p, NotP):
        return NotP(subst_pred(p.arg, var_map, field_map, defs))
    if isinstance(p, ImpP):
        return ImpP(
            subst_pred(p.hyp, var_map, field_map, defs),
            subst_pred(p.concl, var_map, field_map, defs),
        )
    if isinstance(p, (ForallP, ExistsP)):
        inner_vars = {k: v for k, v in var_map.items() if k != p.binder}
        introduced = set()
        for e in list(inner_vars.values()) + list(field_map.values()):
            introduced |= {
                v.name for v in _expr_vars(e)
            }
        binder = p.binder
        body = p.body
        if binder in introduced:
            binder = _fresh(binder, introduced | set(inner_vars))
            body = subst_pred(body, {p.binder: Var(binder)}, {}, defs)
        body = subst_pred(body, inner_vars, field_map, defs)
        return type(p)(binder, p.domain, body)
    if isinstance(p, DefRef):
        args = tuple(subst_expr(a, var_map, field_map) for a in p.args)
        if field_map and p.name in defs:
            touched = pred_state_fields(defs[p.name].body, defs) & set(field_map)
            if touched:
                d = defs[p.name]
                body = subst_pred(
                    d.body, dict(zip(d.params, args)), field_map, defs
                )
                return body
        return DefRef(p.name, args)
    raise PredError(f"unknown predicate {p!r}")


def _expr_vars(e: Expr):
    if isinstance(e, Var):
        yield e
    for f in dc_fields(e):
        v = getattr(e, f.name)
        if isinstance(v, Expr):
            yield from _expr_vars(v)
        elif isinstance(v, tuple):
            for x in v:
                if isinstance(x, Expr):
                    yield from _expr_vars(x)


def subst_ret(post: PostPred, e: Expr, defs: Optional[PredDefs] = None) -> Pred:
    """Instantiate a postcondition's return binder with an expression."""
    return subst_pred(post.body, {post.ret: e}, {}, defs)
