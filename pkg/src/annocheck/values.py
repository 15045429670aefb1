"""Finite value domains, state schemas and exhaustive state enumeration.

Every verification in this package is relative to a declared StateSchema
whose fields range over finite domains. Enumeration order is total and
deterministic, so counterexamples are reproducible across runs.

Value representation:
    unit        -> None
    booleans    -> bool
    nats / ids  -> int
    sequences   -> tuple
    sets        -> frozenset
    partial/total maps -> VMap
    records     -> VRec
    map miss    -> ABSENT
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterator, Tuple


class DomainError(ValueError):
    """A domain descriptor is malformed (empty range, zero ids, ...)."""


class _Absent:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "ABSENT"


#: Marker returned by partial-map lookup on a missing key.
ABSENT = _Absent()


class VMap:
    """Immutable finite map. Keys are pairwise distinct; iteration is in
    canonical key order."""

    __slots__ = ("_pairs", "_dict", "_hash")

    def __init__(self, pairs=()):
        # An absent value means the key is unmapped, so drop it: lookups
        # already default to ABSENT and dom must not report the key.
        d = {k: v for k, v in dict(pairs).items() if v is not ABSENT}
        self._pairs = tuple(sorted(d.items(), key=lambda kv: value_key(kv[0])))
        self._dict = d
        self._hash = hash(self._pairs)

    def get(self, key, default=ABSENT):
        return self._dict.get(key, default)

    def set(self, key, val) -> "VMap":
        d = dict(self._dict)
        d[key] = val
        return VMap(d.items())

    def keys(self):
        return tuple(k for k, _ in self._pairs)

    def items(self):
        return self._pairs

    def __contains__(self, key):
        return key in self._dict

    def __len__(self):
        return len(self._pairs)

    def __eq__(self, other):
        return isinstance(other, VMap) and self._pairs == other._pairs

    def __hash__(self):
        return self._hash

    def __repr__(self):
        inner = ", ".join(f"{k!r}: {v!r}" for k, v in self._pairs)
        return "{%s}" % inner


class VRec:
    """Immutable record with a fixed field order."""

    __slots__ = ("_fields", "_dict", "_hash")

    def __init__(self, fields=()):
        self._fields = tuple(fields)
        self._dict = dict(self._fields)
        self._hash = hash(self._fields)

    def get(self, name):
        return self._dict[name]

    def set(self, name, val) -> "VRec":
        return VRec(tuple((f, val if f == name else v) for f, v in self._fields))

    def fields(self):
        return self._fields

    def __eq__(self, other):
        return isinstance(other, VRec) and self._fields == other._fields

    def __hash__(self):
        return self._hash

    def __repr__(self):
        inner = ", ".join(f"{f}={v!r}" for f, v in self._fields)
        return f"rec({inner})"


def value_key(v):
    """Total order key over all values; drives canonical enumeration and
    deterministic iteration of nondeterministic choices."""
    if v is None:
        return (0,)
    if v is ABSENT:
        return (1,)
    if isinstance(v, bool):
        return (2, v)
    if isinstance(v, int):
        return (3, v)
    if isinstance(v, tuple):
        return (4, len(v), tuple(value_key(x) for x in v))
    if isinstance(v, frozenset):
        return (5, len(v), tuple(sorted(value_key(x) for x in v)))
    if isinstance(v, VMap):
        return (6, tuple((value_key(k), value_key(x)) for k, x in v.items()))
    if isinstance(v, VRec):
        return (7, tuple((f, value_key(x)) for f, x in v.fields()))
    raise TypeError(f"not a value: {v!r}")


# ---------------------------------------------------------------------------
# Domains


@dataclass(frozen=True)
class Domain:
    pass


@dataclass(frozen=True)
class UnitDom(Domain):
    pass


@dataclass(frozen=True)
class BoolDom(Domain):
    pass


@dataclass(frozen=True)
class NatRange(Domain):
    lo: int
    hi: int


@dataclass(frozen=True)
class IdDom(Domain):
    count: int


@dataclass(frozen=True)
class SetDom(Domain):
    base: Domain


@dataclass(frozen=True)
class MapDom(Domain):
    key: Domain
    val: Domain
    allow_absent: bool = True


@dataclass(frozen=True)
class SeqDom(Domain):
    base: Domain
    max_len: int


@dataclass(frozen=True)
class RecordDom(Domain):
    fields: Tuple[Tuple[str, Domain], ...]


@dataclass(frozen=True)
class ExplicitDom(Domain):
    """A domain given by an explicit value list (used for literal sets and
    bound variables whose range is known only by example)."""

    values: Tuple


def check_domain(d: Domain) -> None:
    """Reject malformed domains with a diagnostic."""
    if isinstance(d, (UnitDom, BoolDom)):
        return
    if isinstance(d, NatRange):
        if d.hi < d.lo:
            raise DomainError(f"empty nat range [{d.lo}, {d.hi}]")
        return
    if isinstance(d, IdDom):
        if d.count <= 0:
            raise DomainError(f"id domain needs at least one element, got {d.count}")
        return
    if isinstance(d, SetDom):
        check_domain(d.base)
        return
    if isinstance(d, MapDom):
        check_domain(d.key)
        check_domain(d.val)
        return
    if isinstance(d, SeqDom):
        if d.max_len < 0:
            raise DomainError(f"negative seq max_len {d.max_len}")
        check_domain(d.base)
        return
    if isinstance(d, RecordDom):
        names = [f for f, _ in d.fields]
        if len(names) != len(set(names)):
            raise DomainError(f"duplicate record fields in {names}")
        for _, fd in d.fields:
            check_domain(fd)
        return
    if isinstance(d, ExplicitDom):
        if not d.values:
            raise DomainError("explicit domain is empty")
        return
    raise DomainError(f"unknown domain {d!r}")


def domain_size(d: Domain) -> int:
    if isinstance(d, UnitDom):
        return 1
    if isinstance(d, BoolDom):
        return 2
    if isinstance(d, NatRange):
        return d.hi - d.lo + 1
    if isinstance(d, IdDom):
        return d.count
    if isinstance(d, SetDom):
        return 2 ** domain_size(d.base)
    if isinstance(d, MapDom):
        per_key = domain_size(d.val) + (1 if d.allow_absent else 0)
        return per_key ** domain_size(d.key)
    if isinstance(d, SeqDom):
        n = domain_size(d.base)
        return sum(n ** k for k in range(d.max_len + 1))
    if isinstance(d, RecordDom):
        size = 1
        for _, fd in d.fields:
            size *= domain_size(fd)
        return size
    if isinstance(d, ExplicitDom):
        return len(d.values)
    raise DomainError(f"unknown domain {d!r}")


def enumerate_domain(d: Domain) -> Iterator:
    """Yield every member of d exactly once, in canonical order.

    Canonical order: Bool [False, True]; NatRange/Id ascending; Set by
    cardinality then element order; Map lexicographic over canonical key
    order; Seq by length then lexicographic; Record lexicographic in
    field order.
    """
    check_domain(d)
    yield from _enum(d)


def _enum(d: Domain) -> Iterator:
    if isinstance(d, UnitDom):
        yield None
    elif isinstance(d, BoolDom):
        yield False
        yield True
    elif isinstance(d, NatRange):
        yield from range(d.lo, d.hi + 1)
    elif isinstance(d, IdDom):
        yield from range(d.count)
    elif isinstance(d, SetDom):
        base = list(_enum(d.base))
        for k in range(len(base) + 1):
            for combo in itertools.combinations(base, k):
                yield frozenset(combo)
    elif isinstance(d, MapDom):
        keys = list(_enum(d.key))
        vals = list(_enum(d.val))
        choices = ([ABSENT] + vals) if d.allow_absent else vals
        for assignment in itertools.product(choices, repeat=len(keys)):
            yield VMap(
                (k, v) for k, v in zip(keys, assignment) if v is not ABSENT
            )
    elif isinstance(d, SeqDom):
        base = list(_enum(d.base))
        for k in range(d.max_len + 1):
            for combo in itertools.product(base, repeat=k):
                yield combo
    elif isinstance(d, RecordDom):
        names = [f for f, _ in d.fields]
        streams = [list(_enum(fd)) for _, fd in d.fields]
        for assignment in itertools.product(*streams):
            yield VRec(zip(names, assignment))
    elif isinstance(d, ExplicitDom):
        yield from d.values
    else:
        raise DomainError(f"unknown domain {d!r}")


def domain_contains(d: Domain, v) -> bool:
    if isinstance(d, UnitDom):
        return v is None
    if isinstance(d, BoolDom):
        return isinstance(v, bool)
    if isinstance(d, NatRange):
        return isinstance(v, int) and not isinstance(v, bool) and d.lo <= v <= d.hi
    if isinstance(d, IdDom):
        return isinstance(v, int) and not isinstance(v, bool) and 0 <= v < d.count
    if isinstance(d, SetDom):
        return isinstance(v, frozenset) and all(domain_contains(d.base, x) for x in v)
    if isinstance(d, MapDom):
        if not isinstance(v, VMap):
            return False
        keys = set(v.keys())
        all_keys = set(_enum(d.key))
        if not keys <= all_keys:
            return False
        if not d.allow_absent and keys != all_keys:
            return False
        return all(domain_contains(d.val, x) for _, x in v.items())
    if isinstance(d, SeqDom):
        return (
            isinstance(v, tuple)
            and len(v) <= d.max_len
            and all(domain_contains(d.base, x) for x in v)
        )
    if isinstance(d, RecordDom):
        if not isinstance(v, VRec):
            return False
        if tuple(f for f, _ in v.fields()) != tuple(f for f, _ in d.fields):
            return False
        return all(
            domain_contains(fd, v.get(f)) for f, fd in d.fields
        )
    if isinstance(d, ExplicitDom):
        return v in d.values
    raise DomainError(f"unknown domain {d!r}")


# ---------------------------------------------------------------------------
# States


@dataclass(frozen=True)
class StateSchema:
    fields: Tuple[Tuple[str, Domain], ...]

    def __post_init__(self):
        names = [f for f, _ in self.fields]
        if len(names) != len(set(names)):
            raise DomainError(f"duplicate schema fields in {names}")
        for _, d in self.fields:
            check_domain(d)

    def field_domain(self, name: str) -> Domain:
        for f, d in self.fields:
            if f == name:
                return d
        raise KeyError(name)

    def field_names(self) -> Tuple[str, ...]:
        return tuple(f for f, _ in self.fields)

    def universe_size(self) -> int:
        size = 1
        for _, d in self.fields:
            size *= domain_size(d)
        return size


class State:
    """Immutable total assignment of schema fields to values."""

    __slots__ = ("_fields", "_dict", "_hash")

    def __init__(self, fields):
        self._fields = tuple(fields)
        self._dict = dict(self._fields)
        self._hash = hash(self._fields)

    def get(self, name):
        return self._dict[name]

    def set(self, name, val) -> "State":
        return State((f, val if f == name else v) for f, v in self._fields)

    def fields(self):
        return self._fields

    def project(self, names) -> tuple:
        return tuple(self._dict[n] for n in names)

    def __eq__(self, other):
        return isinstance(other, State) and self._fields == other._fields

    def __hash__(self):
        return self._hash

    def __repr__(self):
        inner = ", ".join(f"{f}={v!r}" for f, v in self._fields)
        return f"state({inner})"


def enumerate_states(schema: StateSchema) -> Iterator[State]:
    """Yield the full cartesian product of field domains, lexicographic in
    schema field order."""
    names = schema.field_names()
    streams = [list(enumerate_domain(d)) for _, d in schema.fields]
    for assignment in itertools.product(*streams):
        yield State(zip(names, assignment))


def enumerate_projections(schema: StateSchema, names) -> Iterator[tuple]:
    """Enumerate the product of the named field domains only, in the induced
    lexicographic order. Completing a projection with `first_values` for the
    remaining fields yields the canonically first matching full state."""
    streams = [list(enumerate_domain(schema.field_domain(n))) for n in names]
    yield from itertools.product(*streams)


def first_values(schema: StateSchema) -> dict:
    return {
        f: next(iter(enumerate_domain(d))) for f, d in schema.fields
    }


def complete_state(schema: StateSchema, names, projection) -> State:
    """The canonically first full state agreeing with `projection` on `names`."""
    given = dict(zip(names, projection))
    firsts = first_values(schema)
    return State(
        (f, given[f] if f in given else firsts[f]) for f in schema.field_names()
    )
