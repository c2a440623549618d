"""Morphisms between instances: view mappings, trees, composition, and flux.

A morphism is a finite set of trees.  Each tree node applies one view mapping
(a conjunctive query plus a target relation); leaves name source relations.
Composing morphisms grafts the earlier morphism's trees under the matching
leaves of the later one; leaves left unmatched become hidden elements and the
result is only a partial arrow.

The meaning of a morphism is its information flux: the closure of the view
extensions it actually carries across.  Fluxes are kept per channel, where a
channel is a pair (source component, target component); composition
intersects channels that meet in the shared middle object, and coproducts
take tagged unions of channels.  Two morphisms are equivalent when their
fluxes agree up to component renaming.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

from .core import (
    BOT,
    DbcatError,
    Instance,
    Relation,
    disjoint_union_with_maps,
    ext_key,
    format_extension,
)
from .powerview import (
    DEFAULT_CAP,
    DEFAULT_DEPTH,
    DEFAULT_MAX_ARITY,
    EMPTY_EXT,
    power_view_cached,
)
from .queries import QueryArityError, RelAtom, Rule, Var, eval_rule


class ModeViolation(DbcatError):
    """The view produced by a mapping is not supported by its target relation."""


# ---------------------------------------------------------------------------
# view maps and trees


@dataclass(frozen=True)
class ViewMap:
    """One component of a mapping: a query over the source feeding a target
    relation, under a soundness (`inclusion`) or exactness (`exact`) promise."""

    query: Rule
    target: str
    mode: str = "inclusion"

    def __post_init__(self):
        if self.mode not in ("inclusion", "exact"):
            raise DbcatError(f"unknown mode {self.mode!r}")

    @property
    def sources(self) -> frozenset:
        return self.query.relation_names()


@dataclass(frozen=True)
class Leaf:
    name: str


@dataclass(frozen=True)
class HiddenLeaf:
    """Input of a downstream query that no upstream tree supplies."""

    name: str
    owner: Instance


@dataclass(frozen=True)
class MapNode:
    viewmap: ViewMap
    children: tuple


def _tree_leaves(node) -> tuple:
    out = []
    for c in node.children:
        if isinstance(c, Leaf):
            out.append(c.name)
        elif isinstance(c, MapNode):
            out.extend(_tree_leaves(c))
    return tuple(out)


def _tree_has_hidden(node) -> bool:
    for c in node.children:
        if isinstance(c, HiddenLeaf):
            return True
        if isinstance(c, MapNode) and _tree_has_hidden(c):
            return True
    return False


# ---------------------------------------------------------------------------
# morphisms


@dataclass(frozen=True)
class Morphism:
    """An arrow between two instances.

    ``parts`` records how the morphism was put together, which drives the
    structural flux computation: ``("atomic",)``, ``("empty",)``,
    ``("compose", g, f)``, ``("sum", f, g, maps...)``,
    ``("mediate", f, g, maps...)`` or ``("pair", f, g, maps...)``.
    """

    source: Instance
    target: Instance
    trees: tuple
    parts: tuple = ("atomic",)

    @property
    def kind(self) -> str:
        return "p-arrow" if any(_tree_has_hidden(t) for t in self.trees) else "c-arrow"

    @property
    def is_atomic(self) -> bool:
        return all(
            all(isinstance(c, Leaf) for c in t.children) for t in self.trees
        )

    def d0(self) -> frozenset:
        names = {n for t in self.trees for n in _tree_leaves(t)}
        return frozenset(names) if names else frozenset({BOT})

    def d1(self) -> frozenset:
        names = {t.viewmap.target for t in self.trees}
        return frozenset(names) if names else frozenset({BOT})


def _projected_target(inst: Instance, name: str, width: int) -> frozenset:
    r = inst.relation(name)
    if r.arity < width:
        raise QueryArityError(
            f"target {name} has arity {r.arity}, narrower than the mapped view ({width})"
        )
    return frozenset(t[:width] for t in r.tuples)


def make_atomic(viewmaps, source: Instance, target: Instance) -> Morphism:
    """Build a complete arrow from view mappings, enforcing their modes.

    Each query is evaluated over *source*; the result must be contained in
    (mode ``inclusion``) or equal to (mode ``exact``) the matching-width
    prefix projection of its target relation.
    """
    trees = []
    for vm in viewmaps:
        ext = eval_rule(vm.query, source).tuples
        proj = _projected_target(target, vm.target, len(vm.query.head_vars))
        if vm.mode == "inclusion":
            if not ext <= proj:
                extra = sorted(ext - proj)[:3]
                raise ModeViolation(
                    f"view for {vm.target} not contained in target: extra tuples {extra}"
                )
        else:
            if ext != proj:
                raise ModeViolation(
                    f"view for {vm.target} differs from target projection "
                    f"({format_extension(ext)} vs {format_extension(proj)})"
                )
        trees.append(MapNode(vm, tuple(Leaf(n) for n in sorted(vm.sources))))
    return Morphism(source, target, tuple(trees), ("atomic",))


def empty_morphism(source: Instance, target: Instance) -> Morphism:
    """The banal arrow carrying nothing but the empty view."""
    return Morphism(source, target, (), ("empty",))


def identity(inst: Instance) -> Morphism:
    """One exact copy mapping per relation; carries every view of the instance."""
    vms = []
    for r in inst.relations:
        if r.name == BOT:
            continue
        hv = tuple(Var(f"X{i}") for i in range(r.arity))
        q = Rule(f"q_{r.name}", hv, (RelAtom(r.name, hv),))
        vms.append(ViewMap(q, r.name, "exact"))
    return make_atomic(vms, inst, inst)


def _graft(node: MapNode, supply: dict, intermediate: Instance) -> MapNode:
    children = []
    for c in node.children:
        if isinstance(c, Leaf):
            if c.name in supply:
                children.extend(supply[c.name])
            else:
                children.append(HiddenLeaf(c.name, intermediate))
        elif isinstance(c, MapNode):
            children.append(_graft(c, supply, intermediate))
        else:
            children.append(c)
    return MapNode(node.viewmap, tuple(children))


def compose(g: Morphism, f: Morphism) -> Morphism:
    """Sequential composition ``g after f``.

    Keeps the g-trees whose open inputs meet what f provides, grafting f's
    trees under the matching leaves; unmatched leaves become hidden elements.
    """
    if g.source != f.target:
        raise DbcatError("composition endpoint mismatch")
    supply: dict = {}
    for t in f.trees:
        supply.setdefault(t.viewmap.target, []).append(t)
    provided = frozenset(supply)
    kept = []
    for t in g.trees:
        if provided & frozenset(_tree_leaves(t)):
            kept.append(_graft(t, supply, f.target))
    return Morphism(f.source, g.target, tuple(kept), ("compose", g, f))


def _retree(node: MapNode, leaf_map: dict, target_map: dict, is_root: bool) -> MapNode:
    children = []
    renamed = {}
    for c in node.children:
        if isinstance(c, Leaf):
            new = leaf_map.get(c.name, c.name)
            if new != c.name:
                renamed[c.name] = new
            children.append(Leaf(new))
        elif isinstance(c, MapNode):
            children.append(_retree(c, leaf_map, target_map, False))
        else:
            children.append(c)
    vm = node.viewmap
    query = vm.query.rename_relations(renamed) if renamed else vm.query
    target = target_map.get(vm.target, vm.target) if is_root else vm.target
    return MapNode(ViewMap(query, target, vm.mode), tuple(children))


def _items(d: dict) -> tuple:
    return tuple(sorted(d.items()))


def coproduct_morphism(f: Morphism, g: Morphism) -> Morphism:
    """Component-tagged union of two arrows: ``f + g`` between the coproducts."""
    src, smap_f, smap_g, scomp_f, scomp_g = disjoint_union_with_maps(f.source, g.source)
    tgt, tmap_f, tmap_g, tcomp_f, tcomp_g = disjoint_union_with_maps(f.target, g.target)
    trees = tuple(
        itertools.chain(
            (_retree(t, smap_f, tmap_f, True) for t in f.trees),
            (_retree(t, smap_g, tmap_g, True) for t in g.trees),
        )
    )
    parts = ("sum", f, g, _items(scomp_f), _items(scomp_g), _items(tcomp_f), _items(tcomp_g))
    return Morphism(src, tgt, trees, parts)


def injection(a: Instance, b: Instance, side: str = "left") -> Morphism:
    """Monomorphism embedding one summand into the coproduct."""
    inst, map_a, map_b, _, _ = disjoint_union_with_maps(a, b)
    origin, names = (a, map_a) if side == "left" else (b, map_b)
    vms = []
    for r in origin.relations:
        if r.name == BOT:
            continue
        hv = tuple(Var(f"X{i}") for i in range(r.arity))
        q = Rule(f"q_{r.name}", hv, (RelAtom(r.name, hv),))
        vms.append(ViewMap(q, names[r.name], "exact"))
    return make_atomic(vms, origin, inst)


def projection(a: Instance, b: Instance, side: str = "left") -> Morphism:
    """Epimorphism collapsing the coproduct back onto one summand."""
    inst, map_a, map_b, _, _ = disjoint_union_with_maps(a, b)
    origin, names = (a, map_a) if side == "left" else (b, map_b)
    vms = []
    for r in origin.relations:
        if r.name == BOT:
            continue
        hv = tuple(Var(f"X{i}") for i in range(r.arity))
        q = Rule(f"q_{r.name}", hv, (RelAtom(names[r.name], hv),))
        vms.append(ViewMap(q, r.name, "exact"))
    return make_atomic(vms, inst, origin)


def mediating(f: Morphism, g: Morphism) -> Morphism:
    """The arrow out of the coproduct induced by two arrows into a common target."""
    if f.target != g.target:
        raise DbcatError("mediating arrows need a common target")
    src, smap_f, smap_g, scomp_f, scomp_g = disjoint_union_with_maps(f.source, g.source)
    trees = tuple(
        itertools.chain(
            (_retree(t, smap_f, {}, True) for t in f.trees),
            (_retree(t, smap_g, {}, True) for t in g.trees),
        )
    )
    parts = ("mediate", f, g, _items(scomp_f), _items(scomp_g))
    return Morphism(src, f.target, trees, parts)


def pairing(f: Morphism, g: Morphism) -> Morphism:
    """The arrow into the product induced by two arrows out of a common source."""
    if f.source != g.source:
        raise DbcatError("paired arrows need a common source")
    tgt, tmap_f, tmap_g, tcomp_f, tcomp_g = disjoint_union_with_maps(f.target, g.target)
    trees = tuple(
        itertools.chain(
            (_retree(t, {}, tmap_f, True) for t in f.trees),
            (_retree(t, {}, tmap_g, True) for t in g.trees),
        )
    )
    parts = ("pair", f, g, _items(tcomp_f), _items(tcomp_g))
    return Morphism(f.source, tgt, trees, parts)


# ---------------------------------------------------------------------------
# information flux


@dataclass(frozen=True)
class Flux:
    """What a morphism transmits: per-channel closed sets of view extensions.

    A channel pairs a source component with a target component.  The empty
    view flows through every morphism and stays implicit.
    """

    channels: tuple
    fixpoint: bool

    def extensions(self) -> frozenset:
        out = {EMPTY_EXT}
        for _, _, exts in self.channels:
            out.update(exts)
        return frozenset(out)

    def channel_keys(self) -> tuple:
        return tuple(
            sorted(
                tuple(sorted(ext_key(e) for e in exts))
                for _, _, exts in self.channels
                if exts
            )
        )

    def canonical(self) -> tuple:
        """Channel structure up to renaming components on either side."""
        chans = [
            (s, t, tuple(sorted(ext_key(e) for e in exts)))
            for s, t, exts in self.channels
            if exts
        ]
        if not chans:
            return ()
        srcs = sorted({s for s, _, _ in chans})
        tgts = sorted({t for _, t, _ in chans})
        if len(srcs) > 5 or len(tgts) > 5:  # degenerate; fall back to stable labels
            smap = {s: i for i, s in enumerate(srcs)}
            tmap = {t: i for i, t in enumerate(tgts)}
            return tuple(sorted((smap[s], tmap[t], k) for s, t, k in chans))
        best = None
        for sp in itertools.permutations(range(len(srcs))):
            smap = dict(zip(srcs, sp))
            for tp in itertools.permutations(range(len(tgts))):
                tmap = dict(zip(tgts, tp))
                cand = tuple(sorted((smap[s], tmap[t], k) for s, t, k in chans))
                if best is None or cand < best:
                    best = cand
        return best

    def same(self, other: "Flux") -> bool:
        return self.canonical() == other.canonical()

    def matches_view_set(self, vs) -> bool:
        return self.channel_keys() == vs.canonical()

    def serialize(self) -> list:
        out = []
        for s, t, exts in sorted(self.channels):
            views = sorted(exts | {EMPTY_EXT}, key=ext_key)
            out.append([s, t, [format_extension(e) for e in views]])
        if not out:
            out.append([0, 0, [format_extension(EMPTY_EXT)]])
        return out


def _closure_of(extensions, depth, max_arity, cap) -> tuple:
    """T-closure of a set of extensions; returns (nonempty extensions, fixpoint)."""
    exts = [e for e in extensions if e]
    if not exts:
        return frozenset(), True
    relations = tuple(
        Relation(f"t{i}", len(next(iter(e))), e)
        for i, e in enumerate(sorted(exts, key=ext_key))
    )
    inst = Instance(relations, tuple((r.name, 0) for r in relations))
    m = max(max_arity, inst.max_arity())
    vs = power_view_cached(inst, depth, m, cap)
    closed = frozenset(e for _, group in vs.components for e in group)
    return closed, vs.fixpoint


def _atomic_channels(m: Morphism, depth, max_arity, cap):
    groups: dict = {}
    for t in m.trees:
        vm = t.viewmap
        ext = eval_rule(vm.query, m.source).tuples
        src_names = vm.sources
        src_comps = {m.source.component_of(n) for n in src_names} or {0}
        if len(src_comps) > 1:
            raise DbcatError("atomic view map reads across separated components")
        key = (src_comps.pop(), m.target.component_of(vm.target))
        groups.setdefault(key, set()).add(ext)
    channels = []
    fix = True
    for (s, t), exts in sorted(groups.items()):
        closed, fixed = _closure_of(exts, depth, max_arity, cap)
        fix = fix and fixed
        if closed:
            channels.append((s, t, closed))
    return tuple(channels), fix


def _remap_channels(channels, smap=None, tmap=None):
    out = []
    for s, t, exts in channels:
        out.append((smap.get(s, s) if smap else s, tmap.get(t, t) if tmap else t, exts))
    return tuple(sorted(out))


_FLUX_CACHE: dict = {}
_FLUX_CACHE_LIMIT = 8192


def flux(
    m: Morphism,
    depth: int | None = DEFAULT_DEPTH,
    max_arity: int = DEFAULT_MAX_ARITY,
    cap: int = DEFAULT_CAP,
) -> Flux:
    """Information flux of a morphism at the given closure bound.

    Atomic arrows close the extensions their view maps produce, channel by
    channel.  Composites intersect the factor fluxes across the shared middle
    object; sums and (co)pairings re-tag the factor channels.
    """
    key = (m, depth, max_arity, cap)
    hit = _FLUX_CACHE.get(key)
    if hit is not None:
        return hit

    kind = m.parts[0]
    if kind == "empty":
        out = Flux((), True)
    elif kind == "atomic":
        channels, fix = _atomic_channels(m, depth, max_arity, cap)
        out = Flux(channels, fix)
    elif kind == "compose":
        g, f = m.parts[1], m.parts[2]
        out = flux_intersection(
            flux(f, depth, max_arity, cap), flux(g, depth, max_arity, cap)
        )
    elif kind in ("sum", "mediate", "pair"):
        f, g = m.parts[1], m.parts[2]
        ff, fg = flux(f, depth, max_arity, cap), flux(g, depth, max_arity, cap)
        if kind == "sum":
            _, _, _, sa, sb, ta, tb = m.parts
            chans = _remap_channels(ff.channels, dict(sa), dict(ta)) + _remap_channels(
                fg.channels, dict(sb), dict(tb)
            )
        elif kind == "mediate":
            _, _, _, sa, sb = m.parts
            chans = _remap_channels(ff.channels, dict(sa)) + _remap_channels(
                fg.channels, dict(sb)
            )
        else:
            _, _, _, ta, tb = m.parts
            chans = _remap_channels(ff.channels, None, dict(ta)) + _remap_channels(
                fg.channels, None, dict(tb)
            )
        out = Flux(tuple(sorted(chans)), ff.fixpoint and fg.fixpoint)
    else:
        raise DbcatError(f"unknown morphism structure {kind!r}")

    if len(_FLUX_CACHE) >= _FLUX_CACHE_LIMIT:
        _FLUX_CACHE.clear()
    _FLUX_CACHE[key] = out
    return out


def flux_intersection(a: Flux, b: Flux) -> Flux:
    """Channel-matched intersection, as used when composing morphisms."""
    merged: dict = {}
    for s1, t1, e1 in a.channels:
        for s2, t2, e2 in b.channels:
            if t1 == s2:
                shared = e1 & e2
                if shared:
                    cur = merged.get((s1, t2), frozenset())
                    merged[(s1, t2)] = cur | shared
    return Flux(
        tuple(sorted((s, t, e) for (s, t), e in merged.items())),
        a.fixpoint and b.fixpoint,
    )


def equivalent(
    f: Morphism,
    g: Morphism,
    depth: int | None = DEFAULT_DEPTH,
    max_arity: int = DEFAULT_MAX_ARITY,
    cap: int = DEFAULT_CAP,
) -> bool:
    """Flux equality at a shared bound (exact when both reach a fixpoint)."""
    return flux(f, depth, max_arity, cap).same(flux(g, depth, max_arity, cap))


# ---------------------------------------------------------------------------
# duality report


@dataclass(frozen=True)
class DualityReport:
    checks: tuple
    note: str

    @property
    def passed(self) -> bool:
        return all(ok for _, ok, _ in self.checks)


SET_COUNTEREXAMPLE_NOTE = (
    "In the category of plain sets this duality fails: two one-element sets "
    "have a one-element cartesian product but a two-element disjoint union, "
    "so product and coproduct cannot coincide there.  Here the disjoint union "
    "serves as both."
)


def verify_duality(
    a: Instance,
    b: Instance,
    f: Morphism | None = None,
    g: Morphism | None = None,
    depth: int | None = None,
    max_arity: int | None = None,
    cap: int = DEFAULT_CAP,
):
    """Check that the coproduct of *a* and *b* also behaves as their product.

    Optional *f*, *g* (arrows into *a* and *b* from a common source) feed the
    product triangle laws; by default the projections themselves are used.
    """
    from .core import disjoint_union
    from .powerview import power_view_cached as pv

    if max_arity is None:
        max_arity = max(2, a.max_arity(), b.max_arity())
    ab = disjoint_union(a, b)
    in_a, in_b = injection(a, b, "left"), injection(a, b, "right")
    p_a, p_b = projection(a, b, "left"), projection(a, b, "right")
    checks = []

    checks.append(
        (
            "projection-after-injection-left",
            equivalent(compose(p_a, in_a), identity(a), depth, max_arity, cap),
            "p_A . in_A ~ id_A",
        )
    )
    checks.append(
        (
            "projection-after-injection-right",
            equivalent(compose(p_b, in_b), identity(b), depth, max_arity, cap),
            "p_B . in_B ~ id_B",
        )
    )

    if f is None or g is None:
        f, g = p_a, p_b
    paired = pairing(f, g)
    checks.append(
        (
            "product-triangle-left",
            equivalent(compose(p_a, paired), f, depth, max_arity, cap),
            "p_A . <f,g> ~ f",
        )
    )
    checks.append(
        (
            "product-triangle-right",
            equivalent(compose(p_b, paired), g, depth, max_arity, cap),
            "p_B . <f,g> ~ g",
        )
    )

    va, vb, vab = (
        pv(a, depth, max_arity, cap),
        pv(b, depth, max_arity, cap),
        pv(ab, depth, max_arity, cap),
    )
    checks.append(
        (
            "views-of-coproduct",
            tuple(sorted(va.canonical() + vb.canonical())) == vab.canonical(),
            "views(A+B) = views(A) (+) views(B)",
        )
    )
    from .core import is_empty_isomorphic
    from .powerview import instances_isomorphic

    if not is_empty_isomorphic(a):
        checks.append(
            (
                "replication-not-isomorphic",
                not instances_isomorphic(a, disjoint_union(a, a), depth, max_arity, cap),
                "A+A is a genuine replication of nonempty A",
            )
        )
    return DualityReport(tuple(checks), SET_COUNTEREXAMPLE_NOTE)
