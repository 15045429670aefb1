"""Command line front end.

Commands:
  check      verify a named triple by exhaustive enumeration
  annotate   prove a goal with the rule database, collecting an annotation
  reuse      prove a goal over an existing annotation (strong pass)
  merge      combine two annotations of the same program
  diff       compare two annotations step by step
  soundness  run the calculus rule-soundness audit
  corpus     emit or verify the bundled allocator example

Exit codes: 0 everything holds, 1 violated, 2 execution fault,
3 usage or parse error. Reports are deterministic for fixed inputs.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import urllib.request
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

from . import corpus as corpus_mod
from .annot import AnnotError, annotations_of, normalize_ann, recheck
from .hoare import Triple, check_triple, naive_check_triple
from .pred import PostPred, Verdict, normalize
from .soundness import Auditor
from .store import (
    Project,
    StoreError,
    annotation_from_text,
    annotation_to_text,
    diff_annotations,
    load_annotation,
    load_project,
    project_to_text,
    save_annotation,
    save_project,
    write_term,
    to_term,
)
from .values import ABSENT, VMap, VRec, value_key
from .vcg import vcg_prove, vcg_strong

EXIT_HOLDS = 0
EXIT_VIOLATED = 1
EXIT_FAULT = 2
EXIT_USAGE = 3

_EXIT_BY_KIND = {
    Verdict.HOLDS: EXIT_HOLDS,
    Verdict.VIOLATED: EXIT_VIOLATED,
    Verdict.FAULT: EXIT_FAULT,
}


class UsageError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Workspace: the artifacts a command operates on


@dataclass
class Workspace:
    params: corpus_mod.CorpusParams
    schema: object
    defs: dict
    progs: dict
    db: object
    triples: dict
    fixtures: dict
    stored: Dict[str, object]


def build_workspace(project: Optional[str], params_arg: Optional[str]) -> Workspace:
    params = _parse_params(params_arg)
    schema = corpus_mod.corpus_schema(params)
    defs = corpus_mod.corpus_preds(params)
    progs = corpus_mod.corpus_programs(params)
    db = corpus_mod.corpus_rules(params)
    stored: Dict[str, object] = {}
    if project not in (None, "corpus"):
        try:
            p = load_project(project)
        except FileNotFoundError:
            raise UsageError(f"no such project file: {project}")
        if p.schema != schema:
            raise UsageError(
                "project schema does not match the requested parameters"
            )
        defs = p.pred_defs()
        progs = p.prog_defs()
        db = p.rule_db()
        stored = dict(p.annotations)
    return Workspace(
        params=params,
        schema=schema,
        defs=defs,
        progs=progs,
        db=db,
        triples=corpus_mod.corpus_triples(params),
        fixtures=corpus_mod.ann_fixtures(),
        stored=stored,
    )


def _parse_params(arg: Optional[str]) -> corpus_mod.CorpusParams:
    if arg is None:
        return corpus_mod.CorpusParams()
    try:
        n_ids, n_prios = (int(x) for x in arg.split(","))
        return corpus_mod.CorpusParams(n_ids, n_prios)
    except ValueError:
        raise UsageError(f"bad --params value {arg!r}, expected e.g. 3,2")


def bundled_project(params: corpus_mod.CorpusParams) -> Project:
    return Project(
        schema=corpus_mod.corpus_schema(params),
        preds=tuple(sorted(corpus_mod.corpus_preds(params).items())),
        programs=tuple(sorted(corpus_mod.corpus_programs(params).items())),
        rules=corpus_mod.corpus_rules(params).rules(),
        annotations=tuple(sorted(corpus_mod.ann_fixtures().items())),
    )


def resolve_annotation(ref: str, ws: Workspace):
    if ref.startswith("fixture:"):
        key = ref[len("fixture:"):]
        if key not in ws.fixtures:
            raise UsageError(f"unknown fixture {key}")
        return ws.fixtures[key]
    if ref in ws.stored:
        return ws.stored[ref]
    if os.path.exists(ref):
        return load_annotation(ref)
    raise UsageError(f"cannot resolve annotation reference {ref!r}")


# ---------------------------------------------------------------------------
# Rendering


def render_value(v) -> str:
    if v is None:
        return "()"
    if v is True:
        return "true"
    if v is False:
        return "false"
    if v is ABSENT:
        return "absent"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, frozenset):
        inner = ", ".join(render_value(x) for x in sorted(v, key=value_key))
        return "{" + inner + "}"
    if isinstance(v, tuple):
        return "[" + ", ".join(render_value(x) for x in v) + "]"
    if isinstance(v, VMap):
        inner = ", ".join(
            f"{render_value(k)} -> {render_value(val)}" for k, val in v.items()
        )
        return "{" + inner + "}"
    if isinstance(v, VRec):
        inner = ", ".join(f"{n} = {render_value(val)}" for n, val in v.fields())
        return "(" + inner + ")"
    return repr(v)


def render_state(s) -> str:
    return "; ".join(f"{n} = {render_value(v)}" for n, v in s.fields())


def render_pred(p) -> str:
    return write_term(to_term(normalize(p)))


def render_verdict(v: Verdict, universe: int, name: str, fmt: str) -> str:
    if fmt == "compact":
        return f"{name} {v.kind} {universe}"
    lines = [f"{v.kind.capitalize()} ({universe} states)"]
    w = v.witness
    if w is not None:
        lines.append("counterexample:")
        if w.env:
            lines.append(
                "  env: " + "; ".join(f"{n} = {render_value(x)}" for n, x in w.env)
            )
        lines.append(f"  state: {render_state(w.state)}")
        if w.outcome is not None:
            lines.append(
                f"  outcome: ret = {render_value(w.outcome.ret)};"
                f" state: {render_state(w.outcome.state)}"
            )
        if w.diagnostic:
            lines.append(f"  fault: {w.diagnostic}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Parallel enumeration


def _check_window(args):
    t, schema, defs, progs, var_domains, lo, hi = args
    return lo, check_triple(t, schema, defs, progs, var_domains, (lo, hi))


def parallel_check_triple(
    t: Triple, ws: Workspace, var_domains, workers: int
) -> Verdict:
    """Split the flat (assignment, state) space across processes; the merge
    picks the lowest-index failing window, matching the sequential order."""
    import multiprocessing

    from .values import enumerate_domain, enumerate_states

    n_states = len(list(enumerate_states(ws.schema)))
    n_envs = 1
    for d in (var_domains or {}).values():
        n_envs *= len(list(enumerate_domain(d)))
    total = n_envs * n_states
    workers = max(1, min(workers, total))
    bounds = [total * k // workers for k in range(workers + 1)]
    jobs = [
        (t, ws.schema, ws.defs, ws.progs, var_domains, bounds[k], bounds[k + 1])
        for k in range(workers)
        if bounds[k] < bounds[k + 1]
    ]
    ctx = multiprocessing.get_context("fork")
    with ctx.Pool(len(jobs)) as pool:
        results = pool.map(_check_window, jobs)
    results.sort(key=lambda r: r[0])
    checked = sum(v.checked for _, v in results)
    for _, v in results:
        if not v.holds():
            return Verdict(v.kind, v.witness, checked)
    return Verdict(Verdict.HOLDS, None, checked)


# ---------------------------------------------------------------------------
# Commands (pure: workspace + flags to report + exit code)


def cmd_check(ws: Workspace, triple: str, workers: int, audit: bool, fmt: str):
    if triple not in ws.triples:
        raise UsageError(
            f"unknown triple {triple!r}; known: {', '.join(sorted(ws.triples))}"
        )
    t, var_domains = ws.triples[triple]
    if workers > 1:
        v = parallel_check_triple(t, ws, var_domains, workers)
    else:
        v = check_triple(t, ws.schema, ws.defs, ws.progs, var_domains)
    lines = [render_verdict(v, ws.schema.universe_size(), triple, fmt)]
    if audit:
        v2 = naive_check_triple(t, ws.schema, ws.defs, ws.progs, var_domains)
        agreed = v2.kind == v.kind
        lines.append(f"audit: independent re-check {'agreed' if agreed else 'DISAGREED'}")
        if not agreed:
            return "\n".join(lines), EXIT_FAULT
    return "\n".join(lines), _EXIT_BY_KIND[v.kind]


def cmd_annotate(
    ws: Workspace, goal: str, out: Optional[str], audit: bool, fmt: str
):
    if goal not in ws.triples:
        raise UsageError(f"unknown goal {goal!r}")
    t, var_domains = ws.triples[goal]
    res = vcg_prove(
        t.pre, t.prog, t.post, ws.schema, ws.defs, ws.progs, ws.db, var_domains
    )
    ann = normalize_ann(res.ann)
    lines = [render_verdict(res.verdict, ws.schema.universe_size(), goal, fmt)]
    if fmt != "compact":
        for i, p in enumerate(annotations_of(ann)):
            lines.append(f"step {i}: {render_pred(p)}")
    if audit and res.judgement is not None:
        va = recheck(res.judgement, ws.schema, ws.defs, ws.progs)
        lines.append(f"audit: judgement re-check {va.kind}")
        if not va.holds():
            return "\n".join(lines), _EXIT_BY_KIND[va.kind], ann
    if out and res.verdict.holds():
        save_annotation(ann, out)
        lines.append(f"annotation written to {out}")
    return "\n".join(lines), _EXIT_BY_KIND[res.verdict.kind], ann


def cmd_reuse(
    ws: Workspace,
    goal: str,
    with_ref: str,
    out: Optional[str],
    audit: bool,
    fmt: str,
):
    if goal not in ws.triples:
        raise UsageError(f"unknown goal {goal!r}")
    t, var_domains = ws.triples[goal]
    ann_in = resolve_annotation(with_ref, ws)
    res = vcg_strong(
        t.pre, ann_in, t.post, ws.schema, ws.defs, ws.progs, ws.db, var_domains
    )
    ann = normalize_ann(res.ann)
    lines = [render_verdict(res.verdict, ws.schema.universe_size(), goal, fmt)]
    if fmt != "compact":
        for i, p in enumerate(annotations_of(ann)):
            lines.append(f"step {i}: {render_pred(p)}")
        for ob in res.obligations:
            if ob.kind == "eliminated":
                lines.append(
                    f"step {ob.step}: discharged by annotation: {render_pred(ob.pred)}"
                )
            elif ob.kind == "propagated":
                lines.append(f"step {ob.step}: propagated: {render_pred(ob.pred)}")
    if audit and res.judgement is not None:
        va = recheck(res.judgement, ws.schema, ws.defs, ws.progs)
        lines.append(f"audit: judgement re-check {va.kind}")
        if not va.holds():
            return "\n".join(lines), _EXIT_BY_KIND[va.kind], ann
    if out and res.verdict.holds():
        save_annotation(ann, out)
        lines.append(f"annotation written to {out}")
    return "\n".join(lines), _EXIT_BY_KIND[res.verdict.kind], ann


def cmd_merge(ws: Workspace, left: str, right: str, out: Optional[str], fmt: str):
    from .annot import merge

    a = resolve_annotation(left, ws)
    b = resolve_annotation(right, ws)
    try:
        m = normalize_ann(merge(a, b))
    except AnnotError as e:
        raise UsageError(str(e))
    lines = []
    if fmt == "compact":
        lines.append(f"merged {len(annotations_of(m))} steps")
    else:
        for i, p in enumerate(annotations_of(m)):
            lines.append(f"step {i}: {render_pred(p)}")
    if out:
        save_annotation(m, out)
        lines.append(f"annotation written to {out}")
    return "\n".join(lines), EXIT_HOLDS


def cmd_diff(ws: Workspace, left: str, right: str, fmt: str):
    a = resolve_annotation(left, ws)
    b = resolve_annotation(right, ws)
    ds = diff_annotations(a, b)
    if not ds:
        return ("identical" if fmt != "compact" else "identical 0"), EXIT_HOLDS
    lines = []
    for d in ds:
        if d.step < 0:
            lines.append("different skeletons")
        elif fmt == "compact":
            lines.append(f"step {d.step} differs")
        else:
            lines.append(f"step {d.step}:")
            lines.append(f"  left:  {render_pred(d.left)}")
            lines.append(f"  right: {render_pred(d.right)}")
    return "\n".join(lines), EXIT_VIOLATED


def cmd_soundness(stride: int, fmt: str):
    reports = Auditor(sample_stride=stride).run_all()
    lines = []
    ok = True
    for r in reports:
        ok = ok and r.ok()
        if fmt == "compact":
            lines.append(f"{r.rule} {'holds' if r.ok() else 'violated'} {r.instances}")
        else:
            lines.append(
                f"{r.rule}: {r.instances} instances,"
                f" {r.derived} derivations, {len(r.violations)} violations"
            )
            for v in r.violations[:5]:
                lines.append(f"  {v}")
    return "\n".join(lines), EXIT_HOLDS if ok else EXIT_VIOLATED


def cmd_corpus(ws: Workspace, out: Optional[str], workers: int, fmt: str):
    if out:
        save_project(bundled_project(ws.params), out)
        return f"project written to {out}", EXIT_HOLDS
    names = corpus_mod.COMPONENT_TRIPLES + (
        "new_tcb:valid_free",
        "new_tcb:valid_queues",
    )
    lines = []
    worst = EXIT_HOLDS
    for name in names:
        t, var_domains = ws.triples[name]
        if workers > 1:
            v = parallel_check_triple(t, ws, var_domains, workers)
        else:
            v = check_triple(t, ws.schema, ws.defs, ws.progs, var_domains)
        if fmt == "compact":
            lines.append(f"{name} {v.kind} {ws.schema.universe_size()}")
        else:
            lines.append(f"{name}: {v.kind}")
        worst = max(worst, _EXIT_BY_KIND[v.kind])
    return "\n".join(lines), worst


# ---------------------------------------------------------------------------
# Thin-client mode


def run_remote(server: str, command: str, payload: dict) -> Tuple[str, int]:
    req = urllib.request.Request(
        server.rstrip("/") + "/" + command,
        data=json.dumps(payload).encode(),
        headers={"content-type": "application/json"},
        method="POST",
    )
    with urllib.request.urlopen(req) as resp:
        body = json.loads(resp.read().decode())
    return body["report"], body["exit_code"]


# ---------------------------------------------------------------------------
# Argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _common(sub):
    sub.add_argument("--project", default="corpus")
    sub.add_argument("--params", default=None)
    sub.add_argument("--format", default="full", choices=("full", "compact"))
    sub.add_argument("--server", default=None)


def build_parser() -> _Parser:
    p = _Parser(prog="annocheck")
    subs = p.add_subparsers(dest="command", required=True)

    c = subs.add_parser("check")
    _common(c)
    c.add_argument("--triple", required=True)
    c.add_argument("--workers", type=int, default=1)
    c.add_argument("--audit", action="store_true")

    a = subs.add_parser("annotate")
    _common(a)
    a.add_argument("--goal", required=True)
    a.add_argument("--out", default=None)
    a.add_argument("--audit", action="store_true")

    r = subs.add_parser("reuse")
    _common(r)
    r.add_argument("--goal", required=True)
    r.add_argument("--with", dest="with_ref", required=True)
    r.add_argument("--out", default=None)
    r.add_argument("--audit", action="store_true")

    m = subs.add_parser("merge")
    _common(m)
    m.add_argument("left")
    m.add_argument("right")
    m.add_argument("--out", default=None)

    d = subs.add_parser("diff")
    _common(d)
    d.add_argument("left")
    d.add_argument("right")

    s = subs.add_parser("soundness")
    s.add_argument("--stride", type=int, default=211)
    s.add_argument("--format", default="full", choices=("full", "compact"))

    k = subs.add_parser("corpus")
    _common(k)
    k.add_argument("--out", default=None)
    k.add_argument("--workers", type=int, default=1)

    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE
    try:
        if getattr(args, "server", None):
            payload = {
                k: v
                for k, v in vars(args).items()
                if k not in ("command", "server") and v is not None
            }
            report, code = run_remote(args.server, args.command, payload)
            print(report)
            return code
        if args.command == "soundness":
            report, code = cmd_soundness(args.stride, args.format)
            print(report)
            return code
        ws = build_workspace(args.project, args.params)
        if args.command == "check":
            report, code = cmd_check(
                ws, args.triple, args.workers, args.audit, args.format
            )
        elif args.command == "annotate":
            report, code, _ = cmd_annotate(
                ws, args.goal, args.out, args.audit, args.format
            )
        elif args.command == "reuse":
            report, code, _ = cmd_reuse(
                ws, args.goal, args.with_ref, args.out, args.audit, args.format
            )
        elif args.command == "merge":
            report, code = cmd_merge(ws, args.left, args.right, args.out, args.format)
        elif args.command == "diff":
            report, code = cmd_diff(ws, args.left, args.right, args.format)
        elif args.command == "corpus":
            report, code = cmd_corpus(ws, args.out, args.workers, args.format)
        else:
            raise UsageError(f"unknown command {args.command}")
        print(report)
        return code
    except (UsageError, StoreError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
