"""Persistence: a textual project format and annotation diffing.

Artifacts (schemas, predicates, programs, rules, annotations) are stored
as fully parenthesized prefix terms. Every constructor in the term
language is a frozen dataclass, so serialization is generic: a node is
written as (ClassName field ...) and read back by constructor lookup.
Writing is deterministic, so equal projects produce identical bytes.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from . import annot as _annot
from . import hoare as _hoare
from . import lang as _lang
from . import pred as _pred
from . import values as _values
from . import vcg as _vcg
from .annot import AnnComp, annotations_of, normalize_ann, same_skeleton
from .lang import ProgDef, ProgDefs
from .pred import Pred, PredDef, PredDefs, normalize
from .values import ABSENT, StateSchema, VMap, VRec, value_key
from .vcg import ProgramRule

FORMAT_VERSION = 1


class StoreError(ValueError):
    """Malformed project text; carries the line and column when known."""

    def __init__(self, message: str, line: int = 0, col: int = 0):
        if line:
            message = f"line {line}, column {col}: {message}"
        super().__init__(message)
        self.line = line
        self.col = col


# ---------------------------------------------------------------------------
# Terms: nested tuples of symbols, ints, and strings


def _registry():
    classes: Dict[str, type] = {}
    for mod in (_values, _lang, _pred, _hoare, _annot, _vcg):
        for name in dir(mod):
            obj = getattr(mod, name)
            if isinstance(obj, type) and dataclasses.is_dataclass(obj):
                classes.setdefault(obj.__name__, obj)
    return classes


_CLASSES = _registry()


def to_term(x):
    if x is None:
        return ("unit",)
    if x is True:
        return "#t"
    if x is False:
        return "#f"
    if isinstance(x, int):
        return str(x)
    if isinstance(x, str):
        return ("str", x)
    if x is ABSENT:
        return ("absent",)
    if isinstance(x, frozenset):
        return ("set",) + tuple(to_term(v) for v in sorted(x, key=value_key))
    if isinstance(x, VMap):
        return ("vmap",) + tuple(
            ("entry", to_term(k), to_term(v)) for k, v in x.items()
        )
    if isinstance(x, VRec):
        return ("vrec",) + tuple(
            ("fld", ("str", k), to_term(v)) for k, v in x.fields()
        )
    if isinstance(x, tuple):
        return ("tuple",) + tuple(to_term(v) for v in x)
    if dataclasses.is_dataclass(x):
        name = type(x).__name__
        if name not in _CLASSES:
            raise StoreError(f"unregistered constructor {name}")
        args = tuple(
            to_term(getattr(x, f.name)) for f in dataclasses.fields(x)
        )
        return (name,) + args
    raise StoreError(f"cannot serialize {x!r}")


def from_term(t):
    if isinstance(t, str):
        if t == "#t":
            return True
        if t == "#f":
            return False
        try:
            return int(t)
        except ValueError:
            raise StoreError(f"unknown atom {t}")
    head, args = t[0], t[1:]
    if head == "unit":
        return None
    if head == "absent":
        return ABSENT
    if head == "str":
        return args[0]
    if head == "set":
        return frozenset(from_term(a) for a in args)
    if head == "tuple":
        return tuple(from_term(a) for a in args)
    if head == "vmap":
        pairs = []
        for entry in args:
            if entry[0] != "entry":
                raise StoreError("malformed map entry")
            pairs.append((from_term(entry[1]), from_term(entry[2])))
        return VMap(pairs)
    if head == "vrec":
        pairs = []
        for entry in args:
            if entry[0] != "fld":
                raise StoreError("malformed record field")
            pairs.append((from_term(entry[1]), from_term(entry[2])))
        return VRec(pairs)
    cls = _CLASSES.get(head)
    if cls is None:
        raise StoreError(f"unknown constructor {head}")
    values = [from_term(a) for a in args]
    names = [f.name for f in dataclasses.fields(cls)]
    if len(values) != len(names):
        raise StoreError(f"{head} expects {len(names)} fields, got {len(values)}")
    return cls(**dict(zip(names, values)))


# ---------------------------------------------------------------------------
# Concrete syntax


_ESCAPES = {"\\": "\\\\", '"': '\\"', "\n": "\\n", "\t": "\\t"}


def write_term(t) -> str:
    if isinstance(t, str):
        return t
    if len(t) >= 1 and t[0] == "str":
        body = "".join(_ESCAPES.get(ch, ch) for ch in t[1])
        return f'"{body}"'
    return "(" + " ".join(write_term(a) for a in t) + ")"


def _tokenize(text: str):
    line, col = 1, 0
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 0
            i += 1
            continue
        col += 1
        if ch in " \t\r":
            i += 1
            continue
        if ch == ";":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if ch in "()":
            yield ch, line, col
            i += 1
            continue
        if ch == '"':
            start_line, start_col = line, col
            i += 1
            out = []
            while True:
                if i >= n:
                    raise StoreError("unterminated string", start_line, start_col)
                ch = text[i]
                col += 1
                if ch == "\n":
                    raise StoreError("unterminated string", start_line, start_col)
                if ch == "\\":
                    if i + 1 >= n:
                        raise StoreError("bad escape", line, col)
                    nxt = text[i + 1]
                    mapped = {"\\": "\\", '"': '"', "n": "\n", "t": "\t"}.get(nxt)
                    if mapped is None:
                        raise StoreError(f"bad escape \\{nxt}", line, col)
                    out.append(mapped)
                    i += 2
                    col += 1
                    continue
                if ch == '"':
                    i += 1
                    break
                out.append(ch)
                i += 1
            yield ("str", "".join(out)), start_line, start_col
            continue
        start_line, start_col = line, col
        j = i
        while j < n and text[j] not in ' \t\r\n();"':
            j += 1
        yield text[i:j], start_line, start_col
        col += j - i - 1
        i = j


def read_term(text: str):
    """Parse a single term; report position on malformed input."""
    tokens = list(_tokenize(text))
    pos = 0

    def parse():
        nonlocal pos
        if pos >= len(tokens):
            raise StoreError("unexpected end of input")
        tok, line, col = tokens[pos]
        pos += 1
        if tok == ")":
            raise StoreError("unexpected )", line, col)
        if tok == "(":
            items = []
            while True:
                if pos >= len(tokens):
                    raise StoreError("missing )", line, col)
                if tokens[pos][0] == ")":
                    pos += 1
                    return tuple(items)
                items.append(parse())
        if isinstance(tok, tuple):
            return tok
        return tok

    t = parse()
    if pos != len(tokens):
        _, line, col = tokens[pos]
        raise StoreError("trailing input after term", line, col)
    return t


# ---------------------------------------------------------------------------
# Projects


@dataclass(frozen=True)
class Project:
    schema: StateSchema
    preds: Tuple[Tuple[str, PredDef], ...] = ()
    programs: Tuple[Tuple[str, ProgDef], ...] = ()
    rules: Tuple[ProgramRule, ...] = ()
    annotations: Tuple[Tuple[str, AnnComp], ...] = ()

    def pred_defs(self) -> PredDefs:
        return dict(self.preds)

    def prog_defs(self) -> ProgDefs:
        return dict(self.programs)

    def annotation(self, key: str) -> Optional[AnnComp]:
        return dict(self.annotations).get(key)

    def rule_db(self):
        from .vcg import RuleDB

        db = RuleDB()
        for r in self.rules:
            db.register(r)
        return db


def project_to_text(p: Project) -> str:
    sections = [
        ("version", str(FORMAT_VERSION)),
        ("schema", to_term(p.schema)),
        ("preds",) + tuple(
            ("def", ("str", name), to_term(d)) for name, d in p.preds
        ),
        ("programs",) + tuple(
            ("prog", ("str", name), to_term(d)) for name, d in p.programs
        ),
        ("rules",) + tuple(to_term(r) for r in p.rules),
        ("annotations",) + tuple(
            ("annotation", ("str", key), to_term(a)) for key, a in p.annotations
        ),
    ]
    lines = ["; annocheck project"]
    lines.append("(project")
    for s in sections:
        lines.append("  " + write_term(s))
    lines.append(")")
    return "\n".join(lines) + "\n"


def project_from_text(text: str) -> Project:
    t = read_term(text)
    if not t or t[0] != "project":
        raise StoreError("expected a (project ...) term")
    by_name = {}
    for section in t[1:]:
        if not isinstance(section, tuple) or not section:
            raise StoreError("malformed section")
        by_name[section[0]] = section[1:]
    version = by_name.get("version")
    if version is None:
        raise StoreError("missing version section")
    if from_term(version[0]) != FORMAT_VERSION:
        raise StoreError(f"unsupported format version {version[0]}")
    if "schema" not in by_name:
        raise StoreError("missing schema section")
    schema = from_term(by_name["schema"][0])
    preds = []
    for entry in by_name.get("preds", ()):
        if entry[0] != "def":
            raise StoreError("malformed predicate definition")
        preds.append((from_term(entry[1]), from_term(entry[2])))
    programs = []
    for entry in by_name.get("programs", ()):
        if entry[0] != "prog":
            raise StoreError("malformed program definition")
        programs.append((from_term(entry[1]), from_term(entry[2])))
    rules = tuple(from_term(entry) for entry in by_name.get("rules", ()))
    annotations = []
    for entry in by_name.get("annotations", ()):
        if entry[0] != "annotation":
            raise StoreError("malformed annotation entry")
        annotations.append((from_term(entry[1]), from_term(entry[2])))
    return Project(
        schema=schema,
        preds=tuple(preds),
        programs=tuple(programs),
        rules=rules,
        annotations=tuple(annotations),
    )


def save_project(p: Project, path: str) -> None:
    with open(path, "w") as fh:
        fh.write(project_to_text(p))


def load_project(path: str) -> Project:
    with open(path) as fh:
        return project_from_text(fh.read())


def annotation_to_text(a: AnnComp) -> str:
    return "; annocheck annotation\n" + write_term(to_term(a)) + "\n"


def annotation_from_text(text: str) -> AnnComp:
    return from_term(read_term(text))


def save_annotation(a: AnnComp, path: str) -> None:
    with open(path, "w") as fh:
        fh.write(annotation_to_text(a))


def load_annotation(path: str) -> AnnComp:
    with open(path) as fh:
        return annotation_from_text(fh.read())


# ---------------------------------------------------------------------------
# Annotation diffing


@dataclass(frozen=True)
class AnnDiff:
    step: int
    left: Optional[Pred]
    right: Optional[Pred]


def diff_annotations(a: AnnComp, b: AnnComp) -> Tuple[AnnDiff, ...]:
    """Per-step differences after normalization; empty means the
    annotations agree. A skeleton mismatch is reported as a step -1 entry."""
    if not same_skeleton(a, b):
        return (AnnDiff(-1, None, None),)
    out: List[AnnDiff] = []
    for i, (pa, pb) in enumerate(zip(annotations_of(a), annotations_of(b))):
        na, nb = normalize(pa), normalize(pb)
        if na != nb:
            out.append(AnnDiff(i, na, nb))
    return tuple(out)
