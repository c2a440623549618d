"""Bounded closure of an instance under view formation.

The view database of an instance is enumerated level by level: level 0 holds
the instance's own relations (plus the empty view), and each further level
applies one more operator to everything accumulated so far.  Views are
identified purely by their extension (the set of tuples), so two queries with
the same answer contribute one view.  Enumeration is bounded by a level count
and a result-arity limit; when a level adds nothing new the closure is exact
and the result is flagged as a fixpoint.

Operator basis per level: selections with a single column/column or
column/constant condition (constants drawn from the component's active
domain), projections onto arbitrary index lists (repetition allowed, which
subsumes renaming), pairless joins (cartesian products; equijoins arise as
selections a level later), and same-arity unions.  Separated components never
mix: the closure of a partitioned instance is the tagged union of the
closures of its components.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .core import (
    BOT,
    DbcatError,
    Instance,
    Relation,
    ext_key,
    format_extension,
    value_key,
)
from .queries import BaseRel, ColEq, ConstEq, Join, Project, Select, Union

DEFAULT_DEPTH = 2
DEFAULT_MAX_ARITY = 4
DEFAULT_CAP = 100_000

EMPTY_EXT = frozenset()


class ViewBudgetExceeded(DbcatError):
    """The enumeration produced more views than the configured cap allows."""


@dataclass(frozen=True)
class ViewSet:
    """Extensions of a bounded view closure, grouped by source component.

    ``components`` maps component id -> frozenset of nonempty extensions; the
    empty view belongs to every view set and is kept implicit.  ``provenance``
    holds one witnessing term per extension and never takes part in equality.
    """

    components: tuple
    depth: int
    max_arity: int
    fixpoint: bool
    provenance: dict = field(default_factory=dict, compare=False, hash=False, repr=False)

    def extensions(self) -> frozenset:
        """All extensions, untagged, including the empty view."""
        out = {EMPTY_EXT}
        for _, exts in self.components:
            out.update(exts)
        return frozenset(out)

    def tagged(self) -> dict:
        return {comp: exts for comp, exts in self.components}

    def canonical(self) -> tuple:
        """Component structure up to renaming: the sorted multiset of nonempty
        per-component extension sets."""
        keys = []
        for _, exts in self.components:
            if exts:
                keys.append(tuple(sorted((ext_key(e) for e in exts))))
        return tuple(sorted(keys))

    def same_views(self, other: "ViewSet") -> bool:
        return self.canonical() == other.canonical()

    def __contains__(self, ext) -> bool:
        return frozenset(ext) in self.extensions()

    def __len__(self) -> int:
        return len(self.extensions())

    def witness(self, ext):
        return self.provenance.get(frozenset(ext))

    def serialize(self) -> list:
        """Deterministic nested-list form for reports and golden files."""
        out = []
        for comp, exts in sorted(self.components):
            views = sorted(exts | {EMPTY_EXT}, key=ext_key)
            out.append([comp, [format_extension(e) for e in views]])
        if not out:
            out.append([0, [format_extension(EMPTY_EXT)]])
        return out

    def as_instance(self) -> Instance:
        """Materialize the views as a fresh instance (one relation per view)."""
        relations = []
        partition = {}
        counter = 0
        for comp, exts in self.components:
            for e in sorted(exts, key=ext_key):
                name = f"v{counter}"
                counter += 1
                relations.append(Relation(name, len(next(iter(e))), e))
                partition[name] = comp
        if not relations:
            return Instance((Relation(BOT, 0),), ((BOT, 0),))
        return Instance(tuple(relations), tuple(partition.items()))


def _index_lists(arity: int, max_arity: int):
    for length in range(1, max_arity + 1):
        yield from itertools.product(range(arity), repeat=length)


def _close_component(seeds, adom, depth, max_arity, cap, budget):
    """Closure of one component.  *seeds* is iterable of (extension, term).

    Returns (dict extension -> term, reached_fixpoint).  *budget* is a
    single-element list shared across components for the global cap.
    """
    views: dict = {}
    for ext, term in seeds:
        if ext and ext not in views:
            views[ext] = term
    consts = sorted(adom, key=value_key)

    frontier = dict(views)
    level = 0
    while frontier:
        if depth is not None and level >= depth:
            return views, False
        level += 1
        new: dict = {}

        def emit(ext, term):
            if ext and ext not in views and ext not in new:
                new[ext] = term
                budget[0] += 1
                if budget[0] > cap:
                    raise ViewBudgetExceeded(
                        f"view enumeration exceeded cap of {cap}"
                    )

        for ext, term in frontier.items():
            arity = len(next(iter(ext)))
            for i in range(arity):
                for j in range(i + 1, arity):
                    emit(
                        frozenset(t for t in ext if t[i] == t[j]),
                        Select(term, (ColEq(i, j),)),
                    )
                for c in consts:
                    emit(
                        frozenset(t for t in ext if t[i] == c),
                        Select(term, (ConstEq(i, c),)),
                    )
            for cols in _index_lists(arity, max_arity):
                emit(
                    frozenset(tuple(t[k] for k in cols) for t in ext),
                    Project(term, cols),
                )
        # binary operators: at least one operand from the newest level
        all_items = list(views.items())
        new_items = list(frontier.items())
        for (e1, t1), (e2, t2) in itertools.chain(
            itertools.product(new_items, all_items),
            itertools.product(all_items, new_items),
        ):
            a1, a2 = len(next(iter(e1))), len(next(iter(e2)))
            if a1 + a2 <= max_arity:
                emit(frozenset(x + y for x in e1 for y in e2), Join(t1, t2, ()))
            if a1 == a2 and e1 is not e2:
                emit(e1 | e2, Union(t1, t2))
        views.update(new)
        frontier = new
    return views, True


def power_view(
    inst: Instance,
    depth: int | None = DEFAULT_DEPTH,
    max_arity: int = DEFAULT_MAX_ARITY,
    cap: int = DEFAULT_CAP,
) -> ViewSet:
    """All views of *inst* reachable within the given bounds.

    ``depth=None`` runs to a true fixpoint (the cap still applies).  The
    result records whether a fixpoint was reached, which makes equality
    comparisons exact rather than bounded.
    """
    if max_arity < inst.max_arity():
        raise DbcatError(
            f"max_arity {max_arity} below the instance's own arity {inst.max_arity()}"
        )
    budget = [0]
    components = []
    provenance = {}
    fixpoint = True
    for comp, rels in sorted(inst.components().items()):
        seeds = []
        adom = set()
        for r in rels:
            if r.name != BOT:
                seeds.append((r.tuples, BaseRel(r.name)))
                for t in r.tuples:
                    adom.update(t)
        views, fixed = _close_component(seeds, adom, depth, max_arity, cap, budget)
        fixpoint = fixpoint and fixed
        if views:
            components.append((comp, frozenset(views)))
            provenance.update(views)
    return ViewSet(
        components=tuple(components),
        depth=-1 if depth is None else depth,
        max_arity=max_arity,
        fixpoint=fixpoint,
        provenance=provenance,
    )


_PV_CACHE: dict = {}
_PV_CACHE_LIMIT = 4096


def power_view_cached(inst, depth, max_arity, cap=DEFAULT_CAP) -> ViewSet:
    key = (inst, depth, max_arity, cap)
    hit = _PV_CACHE.get(key)
    if hit is None:
        if len(_PV_CACHE) >= _PV_CACHE_LIMIT:
            _PV_CACHE.clear()
        hit = _PV_CACHE[key] = power_view(inst, depth, max_arity, cap)
    return hit


def instances_isomorphic(
    a: Instance,
    b: Instance,
    depth: int | None = DEFAULT_DEPTH,
    max_arity: int = DEFAULT_MAX_ARITY,
    cap: int = DEFAULT_CAP,
) -> bool:
    """Equality of the two view closures at a shared bound.

    Components are matched up to renaming.  The answer is exact when both
    closures report a fixpoint, otherwise it is a bounded semi-decision.
    """
    m = max(max_arity, a.max_arity(), b.max_arity())
    return power_view_cached(a, depth, m, cap).same_views(power_view_cached(b, depth, m, cap))


def matching(
    a: Instance,
    b: Instance,
    depth: int | None = DEFAULT_DEPTH,
    max_arity: int = DEFAULT_MAX_ARITY,
    cap: int = DEFAULT_CAP,
) -> ViewSet:
    """Shared information of two instances: the views they have in common."""
    va = power_view_cached(a, depth, max_arity, cap)
    vb = power_view_cached(b, depth, max_arity, cap)
    common = (va.extensions() & vb.extensions()) - {EMPTY_EXT}
    prov = {e: va.provenance.get(e) for e in common}
    return ViewSet(
        components=((0, frozenset(common)),) if common else (),
        depth=va.depth,
        max_arity=max_arity,
        fixpoint=va.fixpoint and vb.fixpoint,
        provenance=prov,
    )


def merging(
    a: Instance,
    b: Instance,
    depth: int | None = DEFAULT_DEPTH,
    max_arity: int = DEFAULT_MAX_ARITY,
    cap: int = DEFAULT_CAP,
) -> ViewSet:
    """Views of the federated union: both inputs under one query engine."""
    from .core import federate

    return power_view_cached(federate(a, b), depth, max_arity, cap)
