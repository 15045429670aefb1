"""Deep embedding of the nondeterministic state-monad language.

A computation denotes, at each state, a finite set of (return value,
updated state) outcomes. The interpreter is exact: it produces every
outcome, in canonical order, and is pure. Failed assertions and
asserted-present map lookups on a missing key raise ExecFault, which
checkers surface as a verdict class distinct from "triple violated".
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Optional, Tuple

from .values import (
    ABSENT,
    Domain,
    State,
    StateSchema,
    UnitDom,
    VMap,
    VRec,
    value_key,
)


class ExecFault(Exception):
    """Execution fault: failed assertion or `the` on a missing map key."""

    def __init__(self, diagnostic: str):
        super().__init__(diagnostic)
        self.diagnostic = diagnostic


class LangError(ValueError):
    """Ill-formed program or expression (unbound variable, bad call, ...)."""


# ---------------------------------------------------------------------------
# Expressions


@dataclass(frozen=True)
class Expr:
    pass


@dataclass(frozen=True)
class Lit(Expr):
    value: object


@dataclass(frozen=True)
class Var(Expr):
    name: str


@dataclass(frozen=True)
class Field(Expr):
    """Read a field of the current state."""

    name: str


@dataclass(frozen=True)
class FieldOf(Expr):
    rec: Expr
    field: str


@dataclass(frozen=True)
class RecordUpd(Expr):
    rec: Expr
    field: str
    value: Expr


@dataclass(frozen=True)
class MapUpd(Expr):
    """Partial-map update m(k |-> v)."""

    map: Expr
    key: Expr
    value: Expr


@dataclass(frozen=True)
class MapLookup(Expr):
    """Partial-map lookup; yields ABSENT on a miss unless asserted, in which
    case a miss is an execution fault (`the`)."""

    map: Expr
    key: Expr
    asserted: bool = False


@dataclass(frozen=True)
class MapApply(Expr):
    """Total-map application; a miss is always a fault."""

    map: Expr
    key: Expr


@dataclass(frozen=True)
class MapAssign(Expr):
    """Total-map update m(k := v)."""

    map: Expr
    key: Expr
    value: Expr


@dataclass(frozen=True)
class DomOf(Expr):
    map: Expr


@dataclass(frozen=True)
class SetMinus(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class SetLit(Expr):
    items: Tuple[Expr, ...]


@dataclass(frozen=True)
class SeqCons(Expr):
    head: Expr
    tail: Expr


@dataclass(frozen=True)
class In(Expr):
    item: Expr
    coll: Expr


@dataclass(frozen=True)
class NotIn(Expr):
    item: Expr
    coll: Expr


@dataclass(frozen=True)
class Eq(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Not(Expr):
    arg: Expr


@dataclass(frozen=True)
class And(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Or(Expr):
    left: Expr
    right: Expr


Env = Dict[str, object]


def eval_expr(e: Expr, env: Env, s: State):
    """Pure, deterministic evaluation. And/Or short-circuit, which keeps
    guarded partial-map projections (membership before lookup) fault-free."""
    if isinstance(e, Lit):
        return e.value
    if isinstance(e, Var):
        if e.name not in env:
            raise LangError(f"unbound variable {e.name}")
        return env[e.name]
    if isinstance(e, Field):
        return s.get(e.name)
    if isinstance(e, FieldOf):
        rec = eval_expr(e.rec, env, s)
        if not isinstance(rec, VRec):
            raise LangError(f"field projection on non-record {rec!r}")
        return rec.get(e.field)
    if isinstance(e, RecordUpd):
        rec = eval_expr(e.rec, env, s)
        return rec.set(e.field, eval_expr(e.value, env, s))
    if isinstance(e, MapUpd):
        m = eval_expr(e.map, env, s)
        return m.set(eval_expr(e.key, env, s), eval_expr(e.value, env, s))
    if isinstance(e, MapLookup):
        m = eval_expr(e.map, env, s)
        k = eval_expr(e.key, env, s)
        v = m.get(k)
        if v is ABSENT and e.asserted:
            raise ExecFault(f"asserted-present lookup missed key {k!r}")
        return v
    if isinstance(e, MapApply):
        m = eval_expr(e.map, env, s)
        k = eval_expr(e.key, env, s)
        v = m.get(k)
        if v is ABSENT:
            raise ExecFault(f"total-map application missed key {k!r}")
        return v
    if isinstance(e, MapAssign):
        m = eval_expr(e.map, env, s)
        return m.set(eval_expr(e.key, env, s), eval_expr(e.value, env, s))
    if isinstance(e, DomOf):
        m = eval_expr(e.map, env, s)
        return frozenset(m.keys())
    if isinstance(e, SetMinus):
        return eval_expr(e.left, env, s) - eval_expr(e.right, env, s)
    if isinstance(e, SetLit):
        return frozenset(eval_expr(x, env, s) for x in e.items)
    if isinstance(e, SeqCons):
        hd = eval_expr(e.head, env, s)
        tl = eval_expr(e.tail, env, s)
        return (hd,) + tl
    if isinstance(e, In):
        item = eval_expr(e.item, env, s)
        coll = eval_expr(e.coll, env, s)
        return item in coll
    if isinstance(e, NotIn):
        item = eval_expr(e.item, env, s)
        coll = eval_expr(e.coll, env, s)
        return item not in coll
    if isinstance(e, Eq):
        return eval_expr(e.left, env, s) == eval_expr(e.right, env, s)
    if isinstance(e, Not):
        return not eval_expr(e.arg, env, s)
    if isinstance(e, And):
        return bool(eval_expr(e.left, env, s)) and bool(eval_expr(e.right, env, s))
    if isinstance(e, Or):
        return bool(eval_expr(e.left, env, s)) or bool(eval_expr(e.right, env, s))
    raise LangError(f"unknown expression {e!r}")


# ---------------------------------------------------------------------------
# Computations


@dataclass(frozen=True)
class Comp:
    pass


@dataclass(frozen=True)
class Return(Comp):
    expr: Expr


@dataclass(frozen=True)
class Gets(Comp):
    field: str


@dataclass(frozen=True)
class Put(Comp):
    field: str
    expr: Expr


@dataclass(frozen=True)
class Select(Comp):
    """Nondeterministic choice of a member of a set expression. Choosing from
    the empty set has no computation paths at all."""

    expr: Expr


@dataclass(frozen=True)
class Bind(Comp):
    first: Comp
    binder: str
    rest: Comp


@dataclass(frozen=True)
class If(Comp):
    cond: Expr
    then: Comp
    els: Comp


@dataclass(frozen=True)
class Call(Comp):
    name: str
    args: Tuple[Expr, ...]


# Assert's predicate lives in the predicate language; imported lazily to keep
# the module split acyclic (pred builds atoms out of Expr).
@dataclass(frozen=True)
class Assert(Comp):
    pred: object  # pred.Pred


@dataclass(frozen=True)
class ProgDef:
    """A named sub-program: formal parameters with their domains, the return
    domain, and the body. Bodies are closed under their parameters."""

    params: Tuple[Tuple[str, Domain], ...]
    ret_domain: Domain
    body: Comp


ProgDefs = Dict[str, ProgDef]


@dataclass(frozen=True)
class Outcome:
    ret: object
    state: State


def is_atomic(c: Comp) -> bool:
    """Atomic steps are everything but Bind; If counts as atomic when both
    branches are."""
    if isinstance(c, (Return, Gets, Put, Select, Assert, Call)):
        return True
    if isinstance(c, If):
        return is_atomic(c.then) and is_atomic(c.els)
    return False


def run(
    c: Comp,
    env: Env,
    s: State,
    defs: Optional[ProgDefs] = None,
    pred_defs=None,
) -> Tuple[Outcome, ...]:
    """All outcomes of c from s, deduplicated, in canonical order.

    Calls are inlined by evaluating arguments and running the named body
    under its parameter environment. The call graph must be acyclic; that
    is checked at load time, not here.
    """
    outs = _run(c, env, s, defs or {}, pred_defs)
    seen = []
    keys = set()
    for o in outs:
        k = (o.ret, o.state)
        if k not in keys:
            keys.add(k)
            seen.append(o)
    seen.sort(key=lambda o: (value_key(o.ret), tuple(value_key(v) for _, v in o.state.fields())))
    return tuple(seen)


def _run(c, env, s, defs, pred_defs):
    if isinstance(c, Return):
        return [Outcome(eval_expr(c.expr, env, s), s)]
    if isinstance(c, Gets):
        return [Outcome(s.get(c.field), s)]
    if isinstance(c, Put):
        return [Outcome(None, s.set(c.field, eval_expr(c.expr, env, s)))]
    if isinstance(c, Select):
        chosen = eval_expr(c.expr, env, s)
        if not isinstance(chosen, frozenset):
            raise LangError(f"select over non-set {chosen!r}")
        return [Outcome(v, s) for v in sorted(chosen, key=value_key)]
    if isinstance(c, Bind):
        outs = []
        for o in _run(c.first, env, s, defs, pred_defs):
            inner = dict(env)
            inner[c.binder] = o.ret
            outs.extend(_run(c.rest, inner, o.state, defs, pred_defs))
        return outs
    if isinstance(c, If):
        branch = c.then if eval_expr(c.cond, env, s) else c.els
        return _run(branch, env, s, defs, pred_defs)
    if isinstance(c, Call):
        if c.name not in defs:
            raise LangError(f"call to undefined program {c.name}")
        d = defs[c.name]
        if len(c.args) != len(d.params):
            raise LangError(
                f"{c.name} expects {len(d.params)} arguments, got {len(c.args)}"
            )
        inner = {
            name: eval_expr(arg, env, s)
            for (name, _), arg in zip(d.params, c.args)
        }
        return _run(d.body, inner, s, defs, pred_defs)
    if isinstance(c, Assert):
        from .pred import eval_pred

        if not eval_pred(c.pred, env, s, pred_defs):
            raise ExecFault("assertion failed")
        return [Outcome(None, s)]
    raise LangError(f"unknown computation {c!r}")


def call_graph_acyclic(defs: ProgDefs) -> bool:
    """Check the program-definition table for recursion."""
    state: Dict[str, int] = {}

    def calls(c: Comp):
        if isinstance(c, Call):
            yield c.name
        elif isinstance(c, Bind):
            yield from calls(c.first)
            yield from calls(c.rest)
        elif isinstance(c, If):
            yield from calls(c.then)
            yield from calls(c.els)

    def visit(name: str) -> bool:
        if state.get(name) == 2:
            return True
        if state.get(name) == 1:
            return False
        state[name] = 1
        if name in defs:
            for callee in calls(defs[name].body):
                if not visit(callee):
                    return False
        state[name] = 2
        return True

    return all(visit(n) for n in defs)


def comp_state_fields(c: Comp, defs: ProgDefs) -> frozenset:
    """State fields read or written anywhere in c, through calls."""
    out = set()

    def go(node):
        if isinstance(node, (Gets, Put)):
            out.add(node.field)
            if isinstance(node, Put):
                go_expr(node.expr)
        elif isinstance(node, Return):
            go_expr(node.expr)
        elif isinstance(node, Select):
            go_expr(node.expr)
        elif isinstance(node, Bind):
            go(node.first)
            go(node.rest)
        elif isinstance(node, If):
            go_expr(node.cond)
            go(node.then)
            go(node.els)
        elif isinstance(node, Call):
            for a in node.args:
                go_expr(a)
            if node.name in defs:
                go(defs[node.name].body)
        elif isinstance(node, Assert):
            from .pred import pred_state_fields

            out.update(pred_state_fields(node.pred, None))

    def go_expr(e):
        if isinstance(e, Field):
            out.add(e.name)
        for sub in getattr(e, "__dataclass_fields__", {}):
            v = getattr(e, sub)
            if isinstance(v, Expr):
                go_expr(v)
            elif isinstance(v, tuple):
                for x in v:
                    if isinstance(x, Expr):
                        go_expr(x)

    go(c)
    return frozenset(out)


def unit_domain() -> Domain:
    return UnitDom()
