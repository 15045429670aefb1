"""Exhaustive soundness audit of the calculus rules on a tiny universe.

The universe is a single boolean state field. Atomic steps are the two
boolean returns, the read, the two writes, and a select over each subset
of the booleans; programs are all bind trees up to a step bound, and
predicates are all boolean functions of (return value is true, state bit).

Every rule is audited the same way: enumerate candidate premise
instances, keep those that hold, derive the conclusion, and check the
conclusion against ground truth. Ground truth is always the interpreter:
outcome and failure tables are computed once per program by run and
run_ann and only then reused, so a table lookup is an exact enumeration
result, never a reimplementation of the semantics. A deterministic slice
of the holding instances is additionally pushed through the derivation
layer (apply_rule plus recheck) to audit the code path itself.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .annot import (
    AnnStep,
    AnnTriple,
    AnnTripleClaim,
    BindA,
    OrderingClaim,
    TripleClaim,
    apply_rule,
    by_enumeration,
    dropA,
    lift,
    merge,
    recheck,
    run_ann,
)
from .hoare import Triple, check_triple
from .lang import Bind, Comp, Gets, Lit, Put, Return, Select, Var, run
from .pred import (
    AndP,
    Atom,
    FalseP,
    NotP,
    OrP,
    PostPred,
    Pred,
    TrueP,
    entails,
    normalize,
)
from .values import BoolDom, ExplicitDom, StateSchema, enumerate_states
from .lang import Field as StateField


def tiny_schema() -> StateSchema:
    return StateSchema((("flag", BoolDom()),))


def tiny_states():
    return tuple(enumerate_states(tiny_schema()))


def atoms() -> Tuple[Comp, ...]:
    subsets = (
        frozenset(),
        frozenset({False}),
        frozenset({True}),
        frozenset({False, True}),
    )
    return (
        Return(Lit(True)),
        Return(Lit(False)),
        Gets("flag"),
        Put("flag", Lit(True)),
        Put("flag", Lit(False)),
    ) + tuple(Select(Lit(s)) for s in subsets)


def programs_upto(max_steps: int) -> Tuple[Comp, ...]:
    """All bind trees with at most max_steps atomic steps. Atoms are closed,
    so a single binder name suffices."""
    by_size: Dict[int, List[Comp]] = {1: list(atoms())}
    for n in range(2, max_steps + 1):
        acc: List[Comp] = []
        for k in range(1, n):
            for f in by_size[k]:
                for g in by_size[n - k]:
                    acc.append(Bind(f, "x", g))
        by_size[n] = acc
    out: List[Comp] = []
    for n in range(1, max_steps + 1):
        out.extend(by_size[n])
    return tuple(out)


# ---------------------------------------------------------------------------
# Predicates: state predicates are masks over the 2 states; postcondition
# predicates are masks over (return truthy, state bit) rows.


def truthy(r) -> bool:
    return r is True


STATE_PRED_MASKS = (0b00, 0b01, 0b10, 0b11)  # bit k = holds at state flag=k


def state_pred(mask: int) -> Pred:
    return {
        0b00: FalseP(),
        0b01: NotP(Atom(StateField("flag"))),
        0b10: Atom(StateField("flag")),
        0b11: TrueP(),
    }[mask]


def post_pred(mask: int) -> PostPred:
    """Row r*1 + flag*... rows indexed as (truthy << 1) | flag; the mask
    selects the rows on which the predicate holds."""
    rows = []
    for row in range(4):
        if not mask & (1 << row):
            continue
        t, fl = bool(row >> 1), bool(row & 1)
        r_cond = Atom(Eq_true()) if t else NotP(Atom(Eq_true()))
        s_cond = Atom(StateField("flag")) if fl else NotP(Atom(StateField("flag")))
        rows.append(AndP((r_cond, s_cond)))
    if not rows:
        return PostPred("r", FalseP())
    if len(rows) == 4:
        return PostPred("r", TrueP())
    return PostPred("r", OrP(tuple(rows)))


def Eq_true():
    from .lang import Eq

    return Eq(Var("r"), Lit(True))


def post_holds(mask: int, r, flag: bool) -> bool:
    row = (1 << 1 if truthy(r) else 0) | (1 if flag else 0)
    return bool(mask & (1 << row))


def state_holds(mask: int, flag: bool) -> bool:
    return bool(mask & (1 << (1 if flag else 0)))


def fixed_ret_masks(post_mask: int) -> Tuple[int, int]:
    """The post predicate at a fixed non-true / true return value, as a
    state-predicate mask."""
    low = ((post_mask >> 0) & 1) | (((post_mask >> 1) & 1) << 1)
    high = ((post_mask >> 2) & 1) | (((post_mask >> 3) & 1) << 1)
    return low, high


# ---------------------------------------------------------------------------
# Ground-truth tables from the interpreter


class Tables:
    def __init__(self):
        self.states = tiny_states()
        self._runs: Dict[Comp, Tuple[frozenset, frozenset]] = {}
        self._ann: Dict[object, Tuple[Tuple[frozenset, frozenset], Tuple[bool, bool]]] = {}

    def outcomes(self, c: Comp) -> Tuple[frozenset, frozenset]:
        """Per start state, the exact set of (return, flag') pairs."""
        hit = self._runs.get(c)
        if hit is None:
            hit = tuple(
                frozenset((o.ret, o.state.get("flag")) for o in run(c, {}, s))
                for s in self.states
            )
            self._runs[c] = hit
        return hit

    def ann_semantics(self, F):
        """Per start state, outcomes and the failure flag, via run_ann."""
        hit = self._ann.get(F)
        if hit is None:
            rows = [run_ann(F, {}, s) for s in self.states]
            outs = tuple(
                frozenset((o.ret, o.state.get("flag")) for o in r.outcomes)
                for r in rows
            )
            fails = tuple(r.fails for r in rows)
            hit = (outs, fails)
            self._ann[F] = hit
        return hit

    def triple_holds(self, pre_mask: int, c: Comp, post_mask: int) -> bool:
        outs = self.outcomes(c)
        for k, per_state in enumerate(outs):
            if not state_holds(pre_mask, bool(k)):
                continue
            for r, fl in per_state:
                if not post_holds(post_mask, r, fl):
                    return False
        return True

    def ann_triple_holds(self, pre_mask: int, F, post_mask: int) -> bool:
        outs, fails = self.ann_semantics(F)
        for k in range(2):
            if fails[k] or not state_holds(pre_mask, bool(k)):
                continue
            for r, fl in outs[k]:
                if not post_holds(post_mask, r, fl):
                    return False
        return True

    def order_holds(self, pre_mask: int, F) -> bool:
        _, fails = self.ann_semantics(F)
        return all(
            not fails[k] for k in range(2) if state_holds(pre_mask, bool(k))
        )


# ---------------------------------------------------------------------------
# Annotated program spaces


def annotate_all(skeletons: Tuple[Comp, ...]) -> Tuple[object, ...]:
    """Every assignment of the 4 state predicates to each step."""
    out: List[object] = []
    for c in skeletons:
        out.extend(_annotate(c))
    return tuple(out)


def _annotate(c: Comp):
    if isinstance(c, Bind):
        return [
            BindA(f, c.binder, g)
            for f in _annotate(c.first)
            for g in _annotate(c.rest)
        ]
    return [AnnStep(state_pred(m), c) for m in STATE_PRED_MASKS]


def ann_masks(F) -> Tuple[int, ...]:
    if isinstance(F, BindA):
        return ann_masks(F.first) + ann_masks(F.rest)
    return (_PRED_TO_MASK[F.ann],)


_PRED_TO_MASK = {state_pred(m): m for m in STATE_PRED_MASKS}


def reannotate(F, masks: List[int]):
    """Same skeleton with the given step predicate masks."""

    def go(node):
        if isinstance(node, BindA):
            return BindA(go(node.first), node.binder, go(node.rest))
        return AnnStep(state_pred(masks.pop(0)), node.step)

    return go(F)


# ---------------------------------------------------------------------------
# Audits


@dataclass
class AuditReport:
    rule: str
    instances: int = 0
    derived: int = 0
    violations: List[str] = field(default_factory=list)

    def ok(self) -> bool:
        return not self.violations


_RET_DOM = ExplicitDom((None, False, True))


class Auditor:
    """Shared state for all rule audits; sample_stride picks which holding
    instances also exercise the derivation layer."""

    def __init__(self, sample_stride: int = 211):
        self.t = Tables()
        self.schema = tiny_schema()
        self.stride = sample_stride

    def _sampled(self, report: AuditReport) -> bool:
        return report.instances % self.stride == 0

    def _record(self, report: AuditReport, ok: bool, detail):
        # detail is only rendered on failure; audits pass tuples to keep
        # the common path cheap.
        report.instances += 1
        if not ok:
            report.violations.append(str(detail))

    # -- wp-split ----------------------------------------------------------

    def audit_split(self) -> AuditReport:
        rep = AuditReport("split")
        progs = {n: [c for c in programs_upto(2) if _steps(c) == n] for n in (1, 2)}
        for nf, ng in ((1, 1), (1, 2), (2, 1)):
            for f in progs[nf]:
                for g in progs[ng]:
                    self._audit_split_pair(rep, f, g)
        return rep

    def _audit_split_pair(self, rep, f, g):
        t = self.t
        for A in STATE_PRED_MASKS:
            for B in range(16):
                if not t.triple_holds(A, f, B):
                    continue
                low, high = fixed_ret_masks(B)
                for C in range(16):
                    # forall x. {B x} g {C}; atoms ignore x, so the two
                    # truthiness classes of x cover every value.
                    if not (
                        t.triple_holds(low, g, C) and t.triple_holds(high, g, C)
                    ):
                        continue
                    concl_ok = t.triple_holds(A, Bind(f, "x", g), C)
                    self._record(rep, concl_ok, ("split", f, g, A, B, C))
                    if self._sampled(rep):
                        self._derive_split(rep, f, g, A, B, C)

    def _derive_split(self, rep, f, g, A, B, C):
        post_b = post_pred(B)
        jf = by_enumeration(
            TripleClaim(Triple(state_pred(A), f, post_b)), self.schema
        )
        mid = normalize(_subst_ret_mask(B, "x"))
        jg = by_enumeration(
            TripleClaim(
                Triple(mid, g, post_pred(C)), (("x", _RET_DOM),)
            ),
            self.schema,
        )
        j = apply_rule("split", (jg, jf), self.schema, binder="x")
        v = recheck(j, self.schema)
        rep.derived += 1
        if not v.holds():
            rep.violations.append(f"split derivation refuted A={A} B={B} C={C}")

    # -- assume-annotation -------------------------------------------------

    def audit_assume(self) -> AuditReport:
        # lift attaches one predicate to one step, so this rule's program
        # space is the atoms.
        rep = AuditReport("assume_annotation")
        t = self.t
        for f in atoms():
            for R in STATE_PRED_MASKS:
                for P in STATE_PRED_MASKS:
                    for Q in range(16):
                        if not t.triple_holds(R & P, f, Q):
                            continue
                        F = lift(state_pred(P), f)
                        ok = t.ann_triple_holds(R, F, Q)
                        self._record(rep, ok, ("assume", f, R, P, Q))
                        if self._sampled(rep):
                            self._derive_assume(rep, f, R, P, Q)
        return rep

    def _derive_assume(self, rep, f, R, P, Q):
        pre = normalize(AndP((state_pred(R), state_pred(P))))
        jt = by_enumeration(
            TripleClaim(Triple(pre, f, post_pred(Q))), self.schema
        )
        j = apply_rule(
            "assume_annotation",
            (jt,),
            self.schema,
            given=state_pred(R),
            ann=state_pred(P),
        )
        v = recheck(j, self.schema)
        rep.derived += 1
        if not v.holds():
            rep.violations.append(f"assume derivation refuted R={R} P={P} Q={Q}")

    # -- use-annotation ----------------------------------------------------

    def _ann_space(self):
        space = list(annotate_all(programs_upto(2)))
        # Depth-3 skeletons with uniform step predicates keep the audit of
        # the deepest programs tractable.
        for c in programs_upto(3):
            if _steps(c) == 3:
                for m in STATE_PRED_MASKS:
                    space.append(_uniform_annotate(c, m))
        return tuple(space)

    def audit_use(self) -> AuditReport:
        rep = AuditReport("use_annotation")
        t = self.t
        for F in self._ann_space():
            f = dropA(F)
            for P in STATE_PRED_MASKS:
                if not t.order_holds(P, F):
                    continue
                for Q in range(16):
                    if not t.ann_triple_holds(P, F, Q):
                        continue
                    ok = t.triple_holds(P, f, Q)
                    self._record(rep, ok, ("use", F, P, Q))
                    if self._sampled(rep):
                        self._derive_use(rep, F, f, P, Q)
        return rep

    def _derive_use(self, rep, F, f, P, Q):
        jo = by_enumeration(
            OrderingClaim(state_pred(P), f, F), self.schema
        )
        ja = by_enumeration(
            AnnTripleClaim(AnnTriple(state_pred(P), F, post_pred(Q))),
            self.schema,
        )
        j = apply_rule("use_annotation", (jo, ja), self.schema)
        v = recheck(j, self.schema)
        rep.derived += 1
        if not v.holds():
            rep.violations.append(f"use derivation refuted P={P} Q={Q}")

    # -- weaken-annotation -------------------------------------------------

    def audit_weaken(self) -> AuditReport:
        rep = AuditReport("weaken_annotation")
        t = self.t
        weaker = {
            m: tuple(g for g in STATE_PRED_MASKS if _implies(m, g))
            for m in STATE_PRED_MASKS
        }
        for F in self._ann_space():
            f = dropA(F)
            masks = list(ann_masks(F))
            for P in STATE_PRED_MASKS:
                if not t.order_holds(P, F):
                    continue
                for combo in itertools.product(*(weaker[m] for m in masks)):
                    G = reannotate(F, list(combo))
                    ok = t.order_holds(P, G)
                    self._record(rep, ok, ("weaken", F, combo, P))
                    if self._sampled(rep):
                        self._derive_weaken(rep, F, G, f, P)
        return rep

    def _derive_weaken(self, rep, F, G, f, P):
        jo = by_enumeration(OrderingClaim(state_pred(P), f, F), self.schema)
        j = apply_rule("weaken_annotation", (jo,), self.schema, weaker=G)
        v = recheck(j, self.schema)
        rep.derived += 1
        if not v.holds():
            rep.violations.append(f"weaken derivation refuted P={P}")

    # -- merge adherence ---------------------------------------------------

    def audit_merge(self) -> AuditReport:
        rep = AuditReport("merge_adherence")
        t = self.t
        for c in programs_upto(2):
            n = _steps(c)
            all_masks = list(itertools.product(STATE_PRED_MASKS, repeat=n))
            base = _uniform_annotate_comp(c)
            for ma in all_masks:
                F = reannotate(base, list(ma))
                for mb in all_masks:
                    G = reannotate(base, list(mb))
                    for P in STATE_PRED_MASKS:
                        if not t.order_holds(P, F):
                            continue
                        for Q in STATE_PRED_MASKS:
                            if not t.order_holds(Q, G):
                                continue
                            M = merge(F, G)
                            ok = t.order_holds(P & Q, M)
                            self._record(
                                rep, ok, ("merge", c, ma, mb, P, Q)
                            )
                            if self._sampled(rep):
                                self._derive_merge(rep, c, F, G, P, Q)
        return rep

    def _derive_merge(self, rep, c, F, G, P, Q):
        jf = by_enumeration(OrderingClaim(state_pred(P), c, F), self.schema)
        jg = by_enumeration(OrderingClaim(state_pred(Q), c, G), self.schema)
        j = apply_rule("merge_adherence", (jf, jg), self.schema)
        v = recheck(j, self.schema)
        rep.derived += 1
        if not v.holds():
            rep.violations.append(f"merge derivation refuted P={P} Q={Q}")

    # -- strong split ------------------------------------------------------

    def audit_strong_split(self) -> AuditReport:
        rep = AuditReport("strong_split")
        t = self.t
        heads = programs_upto(1)
        # Continuations grouped by exact semantics (outcome and failure
        # tables); every premise and conclusion check depends on nothing
        # else, so one representative covers its whole class.
        classes: Dict[object, Tuple[object, int]] = {}
        for G in annotate_all(programs_upto(2)):
            key = t.ann_semantics(G)
            rep_g, count = classes.get(key, (G, 0))
            classes[key] = (rep_g, count + 1)
        # For each class, the set of (B, C) pairs passing the continuation
        # premise for both truthiness rows of the midpoint.
        cont_ok = []
        for (rep_g, count) in classes.values():
            ok_bc = set()
            for B in range(16):
                low, high = fixed_ret_masks(B)
                for C in range(16):
                    if t.ann_triple_holds(low, rep_g, C) and t.ann_triple_holds(
                        high, rep_g, C
                    ):
                        ok_bc.add((B, C))
            cont_ok.append((rep_g, count, ok_bc))
        for f in heads:
            for A in STATE_PRED_MASKS:
                for P in STATE_PRED_MASKS:
                    for B in range(16):
                        if not t.triple_holds(A & P, f, B):
                            continue
                        for rep_g, count, ok_bc in cont_ok:
                            F = BindA(lift(state_pred(P), f), "x", rep_g)
                            for C in range(16):
                                if (B, C) not in ok_bc:
                                    continue
                                ok = t.ann_triple_holds(A, F, C)
                                before = rep.instances
                                rep.instances += count
                                if not ok:
                                    rep.violations.append(
                                        str(("strong_split", f, A, P, B, C))
                                    )
                                # This audit has orders of magnitude more
                                # instances than the others; thin the
                                # derivation samples accordingly.
                                coarse = self.stride * 199
                                if before // coarse != rep.instances // coarse:
                                    self._derive_strong_split(
                                        rep, f, rep_g, A, P, B, C
                                    )
        return rep

    def _derive_strong_split(self, rep, f, G, A, P, B, C):
        pre = normalize(AndP((state_pred(A), state_pred(P))))
        jf = by_enumeration(
            TripleClaim(Triple(pre, f, post_pred(B))), self.schema
        )
        mid = normalize(_subst_ret_mask(B, "x"))
        jg = by_enumeration(
            AnnTripleClaim(
                AnnTriple(mid, G, post_pred(C)), (("x", _RET_DOM),)
            ),
            self.schema,
        )
        j = apply_rule(
            "strong_split",
            (jg, jf),
            self.schema,
            pre=state_pred(A),
            head_ann=state_pred(P),
            binder="x",
        )
        v = recheck(j, self.schema)
        rep.derived += 1
        if not v.holds():
            rep.violations.append(
                f"strong_split derivation refuted A={A} P={P} B={B} C={C}"
            )

    # -- annotating bind rule (the collecting pass) ------------------------

    def audit_annotating_bind(self) -> AuditReport:
        from .annot import check_annotator
        from .vcg import vcg_prove

        rep = AuditReport("annotating_bind")
        for f in programs_upto(3):
            for Q in range(16):
                res = vcg_prove(
                    TrueP(), f, post_pred(Q), self.schema, None, {}, None, {}
                )
                # The computed precondition with its collected annotation
                # must form a valid annotator, whether or not True entails
                # the computed precondition.
                v = check_annotator(
                    res.pre, f, post_pred(Q), res.ann, self.schema, None, {}, {}
                )
                self._record(rep, v.holds(), ("annotating_bind", f, Q))
                rep.derived += 1
        return rep

    def run_all(self) -> Tuple[AuditReport, ...]:
        return (
            self.audit_split(),
            self.audit_assume(),
            self.audit_use(),
            self.audit_weaken(),
            self.audit_merge(),
            self.audit_strong_split(),
            self.audit_annotating_bind(),
        )


def _steps(c: Comp) -> int:
    if isinstance(c, Bind):
        return _steps(c.first) + _steps(c.rest)
    return 1


def _implies(m: int, g: int) -> bool:
    return (m & ~g & 0b11) == 0


def _uniform_annotate(c: Comp, mask: int):
    if isinstance(c, Bind):
        return BindA(
            _uniform_annotate(c.first, mask), c.binder, _uniform_annotate(c.rest, mask)
        )
    return AnnStep(state_pred(mask), c)


def _uniform_annotate_comp(c: Comp):
    return _uniform_annotate(c, 0b11)


def _subst_ret_mask(post_mask: int, var: str) -> Pred:
    """The post predicate with its return bound to a free variable."""
    from .pred import subst_pred

    p = post_pred(post_mask)
    return subst_pred(p.body, {p.ret: Var(var)}, {}, None)
