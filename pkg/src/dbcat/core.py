"""Finite relational instances: relations, values, component tagging, disjoint union.

Instances are immutable values.  Every instance implicitly contains the empty
relation; it is stored explicitly only in the bottom instance returned by
:func:`bottom_instance`.  Relations carry a component id so that instances
built by :func:`disjoint_union` remember which side each relation came from;
an ordinary instance keeps everything in component 0.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence


class DbcatError(Exception):
    """Base class for all errors raised by this package."""


class ArityError(DbcatError):
    pass


class SentinelError(DbcatError):
    pass


@dataclass(frozen=True)
class Sentinel:
    """Reserved constant lying outside every user value domain."""

    tag: str

    def __repr__(self) -> str:
        return f"#{self.tag}"


SENTINEL_A = Sentinel("A")
SENTINEL_B = Sentinel("B")

#: A value is an integer, a string, or one of the two reserved sentinels.
Value = int | str | Sentinel

#: Name of the distinguished empty relation (arity 0, never any tuples).
BOT = "_bot"


def value_key(v: Value) -> tuple:
    """Total order on values: integers, then strings, then sentinels."""
    if isinstance(v, bool):  # bool is an int subclass; reject early
        raise TypeError("boolean values are not part of the value domain")
    if isinstance(v, int):
        return (0, v, "")
    if isinstance(v, str):
        return (1, 0, v)
    if isinstance(v, Sentinel):
        return (2, 0 if v.tag == "A" else 1, "")
    raise TypeError(f"not a value: {v!r}")


def tuple_key(t: Sequence[Value]) -> tuple:
    return tuple(value_key(v) for v in t)


def ext_key(ext: frozenset) -> tuple:
    """Canonical sort key for an extension (a set of equal-length tuples)."""
    return (len(next(iter(ext))) if ext else 0, tuple(sorted(tuple_key(t) for t in ext)))


def format_value(v: Value) -> str:
    if isinstance(v, Sentinel):
        return repr(v)
    if isinstance(v, str):
        return f"'{v}'"
    return str(v)


def format_tuple(t: Sequence[Value]) -> str:
    return "(" + ",".join(format_value(v) for v in t) + ")"


def format_extension(ext: frozenset) -> str:
    return "{" + " ".join(format_tuple(t) for t in sorted(ext, key=tuple_key)) + "}"


@dataclass(frozen=True)
class Relation:
    """A named finite set of equal-length tuples."""

    name: str
    arity: int
    tuples: frozenset = frozenset()
    attributes: tuple = ()

    def __post_init__(self):
        if self.arity < 0:
            raise ArityError(f"negative arity for {self.name}")
        for t in self.tuples:
            if not isinstance(t, tuple) or len(t) != self.arity:
                raise ArityError(f"tuple {t!r} does not match arity {self.arity} of {self.name}")
        if not self.attributes:
            object.__setattr__(self, "attributes", tuple(f"c{i}" for i in range(self.arity)))
        elif len(self.attributes) != self.arity:
            raise ArityError(f"attribute list of {self.name} does not match arity")

    @property
    def is_empty(self) -> bool:
        return not self.tuples


@dataclass(frozen=True)
class Instance:
    """A finite database: relations plus a relation-name -> component-id map."""

    relations: tuple
    partition: tuple

    def __post_init__(self):
        names = [r.name for r in self.relations]
        if len(set(names)) != len(names):
            raise DbcatError(f"duplicate relation names: {names}")
        part = dict(self.partition)
        if set(part) != set(names):
            raise DbcatError("partition must cover exactly the relation names")
        object.__setattr__(self, "relations", tuple(sorted(self.relations, key=lambda r: r.name)))
        object.__setattr__(self, "partition", tuple(sorted(part.items())))

    def relation(self, name: str) -> Relation:
        for r in self.relations:
            if r.name == name:
                return r
        raise DbcatError(f"unknown relation {name!r}")

    @property
    def names(self) -> tuple:
        return tuple(r.name for r in self.relations)

    def has(self, name: str) -> bool:
        return any(r.name == name for r in self.relations)

    def component_of(self, name: str) -> int:
        for n, c in self.partition:
            if n == name:
                return c
        raise DbcatError(f"unknown relation {name!r}")

    def components(self) -> dict:
        """Component id -> list of relations, in name order."""
        out: dict = {}
        part = dict(self.partition)
        for r in self.relations:
            out.setdefault(part[r.name], []).append(r)
        return out

    def max_arity(self) -> int:
        return max((r.arity for r in self.relations), default=0)


def make_instance(
    rels: Mapping[str, Iterable[Sequence[Value]]],
    *,
    arities: Mapping[str, int] | None = None,
    partition: Mapping[str, int] | None = None,
) -> Instance:
    """Build an instance from literal tuple data.

    Arities are inferred from the tuples; relations with no tuples need an
    entry in *arities*.
    """
    relations = []
    for name, tuples in rels.items():
        tuples = frozenset(tuple(t) for t in tuples)
        if tuples:
            arity = len(next(iter(tuples)))
        elif arities and name in arities:
            arity = arities[name]
        else:
            raise ArityError(f"empty relation {name!r} needs an explicit arity")
        relations.append(Relation(name, arity, tuples))
    part = {name: (partition or {}).get(name, 0) for name in rels}
    return Instance(tuple(relations), tuple(part.items()))


def bottom_instance() -> Instance:
    """The instance containing only the empty relation."""
    return Instance((Relation(BOT, 0),), ((BOT, 0),))


def is_empty_isomorphic(a: Instance) -> bool:
    """True iff every relation of *a* has zero tuples."""
    return all(r.is_empty for r in a.relations)


def active_domain(a: Instance) -> frozenset:
    """All values occurring in any tuple of *a*."""
    return frozenset(v for r in a.relations for t in r.tuples for v in t)


def active_domain_by_component(a: Instance) -> dict:
    out: dict = {}
    for comp, rels in a.components().items():
        out[comp] = frozenset(v for r in rels for t in r.tuples for v in t)
    return out


def _renumber(a: Instance, b: Instance):
    """Fresh component ids for both sides: a's components first, then b's."""
    comp_map_a, comp_map_b = {}, {}
    nxt = 1
    for c in sorted({c for _, c in a.partition}):
        comp_map_a[c] = nxt
        nxt += 1
    for c in sorted({c for _, c in b.partition}):
        comp_map_b[c] = nxt
        nxt += 1
    return comp_map_a, comp_map_b


def disjoint_union_with_maps(a: Instance, b: Instance):
    """Disjoint union keeping track of how names and components were relabeled.

    Returns ``(instance, name_map_a, name_map_b, comp_map_a, comp_map_b)``.
    Colliding relation names are qualified with their fresh component id; the
    distinguished empty relation is dropped from both sides (it is implicit)
    unless nothing else remains.
    """
    comp_map_a, comp_map_b = _renumber(a, b)
    sides = ((a, comp_map_a), (b, comp_map_b))
    taken = []
    for inst, _ in sides:
        taken.extend(r.name for r in inst.relations if r.name != BOT)
    collisions = {n for n in taken if taken.count(n) > 1}

    relations, partition = [], {}
    name_maps = ({}, {})
    for idx, (inst, comp_map) in enumerate(sides):
        for r in inst.relations:
            if r.name == BOT:
                continue
            comp = comp_map[inst.component_of(r.name)]
            new_name = f"{r.name}#{comp}" if r.name in collisions else r.name
            name_maps[idx][r.name] = new_name
            relations.append(Relation(new_name, r.arity, r.tuples))
            partition[new_name] = comp
    if not relations:
        return bottom_instance(), {}, {}, comp_map_a, comp_map_b
    inst = Instance(tuple(relations), tuple(partition.items()))
    return inst, name_maps[0], name_maps[1], comp_map_a, comp_map_b


def disjoint_union(a: Instance, b: Instance) -> Instance:
    """Coproduct of two instances: every relation tagged with a fresh component."""
    return disjoint_union_with_maps(a, b)[0]


def federate(a: Instance, b: Instance) -> Instance:
    """Single-component union of two instances (one shared query engine).

    Colliding names are qualified by side (``r#1``, ``r#2``); all relations
    land in component 0, so queries may span both inputs.
    """
    taken = [r.name for inst in (a, b) for r in inst.relations if r.name != BOT]
    collisions = {n for n in taken if taken.count(n) > 1}
    relations = []
    for idx, inst in enumerate((a, b)):
        for r in inst.relations:
            if r.name == BOT:
                continue
            new_name = f"{r.name}#{idx + 1}" if r.name in collisions else r.name
            relations.append(Relation(new_name, r.arity, r.tuples))
    if not relations:
        return bottom_instance()
    return Instance(tuple(relations), tuple((r.name, 0) for r in relations))
