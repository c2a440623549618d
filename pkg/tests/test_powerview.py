import pytest

from dbcat.core import bottom_instance, disjoint_union, make_instance
from dbcat.powerview import (
    ViewBudgetExceeded,
    instances_isomorphic,
    matching,
    merging,
    power_view,
)

from oracles import enumerate_views

EMPTY = frozenset()


def test_bottom_closure():
    for depth in (0, 1, 3, None):
        vs = power_view(bottom_instance(), depth, 2)
        assert vs.extensions() == {EMPTY}
        assert vs.fixpoint


def test_source_relations_are_views():
    a = make_instance({"r": [(1, 2)], "s": [(3,)]})
    vs = power_view(a, 2, 4)
    assert {(1, 2)} <= set(map(tuple, [])) or frozenset({(1, 2)}) in vs
    assert frozenset({(3,)}) in vs
    assert EMPTY in vs


def test_tiny_closure_matches_term_enumeration_oracle():
    # single unary fact at depth 2, arity bound 1: just the empty view and {(1)}
    a = make_instance({"r": [(1,)]})
    vs = power_view(a, 2, 1)
    assert vs.extensions() == {EMPTY, frozenset({(1,)})}
    assert vs.extensions() == enumerate_views(a, 2, 1)


def test_closure_matches_oracle_on_small_instances():
    cases = [
        make_instance({"r": [(1,), (2,)]}),
        make_instance({"r": [(1, 2)]}),
        make_instance({"r": [(1, 2), (2, 1)]}),
        make_instance({"r": [(1,)], "s": [(1, 2)]}),
    ]
    for inst in cases:
        for depth, m in ((1, 2), (2, 2)):
            assert power_view(inst, depth, m).extensions() == enumerate_views(
                inst, depth, m
            ), inst


def test_fixpoint_idempotence():
    for tuples in ([(1,)], [(1,), (2,)], [(1, 2)], [(1, 2), (2, 1)]):
        a = make_instance({"r": tuples})
        ta = power_view(a, None, 2)
        assert ta.fixpoint
        tta = power_view(ta.as_instance(), None, 2)
        assert ta.canonical() == tta.canonical()


def test_monotone_in_bounds():
    a = make_instance({"r": [(1, 2), (2, 3)]})
    small = power_view(a, 1, 2).extensions()
    deeper = power_view(a, 2, 2).extensions()
    wider = power_view(a, 1, 4).extensions()
    assert small <= deeper
    assert small <= wider


def test_budget_cap():
    a = make_instance({"r": [(1, 2), (2, 3), (3, 1)]})
    with pytest.raises(ViewBudgetExceeded):
        power_view(a, None, 3, cap=500)


def test_isomorphism_reflexive_and_vs_bottom():
    a = make_instance({"r": [(1,)]})
    assert instances_isomorphic(a, a, 2, 2)
    assert not instances_isomorphic(a, bottom_instance(), 2, 2)


def test_instance_isomorphic_to_its_view_closure():
    a = make_instance({"r": [(1,)]})
    ta = power_view(a, None, 2)
    assert instances_isomorphic(a, ta.as_instance(), None, 2)


def test_name_erasure():
    a = make_instance({"r": [(1, 2)]})
    b = make_instance({"other_name": [(1, 2)]})
    assert instances_isomorphic(a, b, None, 2)


def test_coproduct_views_are_tagged_unions():
    a = make_instance({"r": [(1,)]})
    b = make_instance({"s": [(1, 2)]})
    ab = disjoint_union(a, b)
    va, vb, vab = (
        power_view(a, None, 2),
        power_view(b, None, 2),
        power_view(ab, None, 2),
    )
    assert vab.canonical() == tuple(sorted(va.canonical() + vb.canonical()))
    # no view mixes the components
    cross = frozenset({(1,), (1, 2)})
    assert cross not in vab


def test_matching_examples():
    a = make_instance({"r": [(1,)]})
    b = make_instance({"s": [(1,)]})
    assert matching(a, bottom_instance(), 2, 2).extensions() == {EMPTY}
    assert matching(a, a, None, 2).extensions() == power_view(a, None, 2).extensions()
    assert frozenset({(1,)}) in matching(a, b, 2, 2)


def test_merging_examples():
    a = make_instance({"r": [(1, 2)]})
    b = make_instance({"s": [(2, 3)]})
    assert (
        merging(a, bottom_instance(), 2, 4).extensions()
        == power_view(a, 2, 4).extensions()
    )
    mg = merging(a, b, 2, 4)
    assert power_view(a, 2, 4).extensions() <= mg.extensions()
    assert power_view(b, 2, 4).extensions() <= mg.extensions()
    # the equality-join of the two relations only exists under one engine
    joined = merging(a, b, 3, 4)
    assert frozenset({(1, 2, 3)}) in joined
    assert frozenset({(1, 2, 3)}) not in matching(a, b, 3, 4)


def test_separation_vs_federation_gap():
    a = make_instance({"r": [(1,)]})
    b = make_instance({"s": [(2,)]})
    separated = power_view(disjoint_union(a, b), 2, 2)
    federated = merging(a, b, 2, 2)
    assert separated.extensions() < federated.extensions()
    assert frozenset({(1,), (2,)}) in federated
    assert frozenset({(1,), (2,)}) not in separated


def test_max_arity_guard():
    a = make_instance({"r": [(1, 2, 3)]})
    with pytest.raises(Exception):
        power_view(a, 2, 2)


def test_serialization_is_deterministic():
    a = make_instance({"r": [(2, 1), (1, 2)]})
    s1 = power_view(a, 1, 2).serialize()
    s2 = power_view(a, 1, 2).serialize()
    assert s1 == s2


def test_serialization_golden():
    assert power_view(make_instance({"r": [(1,)]}), 2, 1).serialize() == [
        [0, ["{}", "{(1)}"]]
    ]
    assert power_view(bottom_instance(), 2, 1).serialize() == [[0, ["{}"]]]
    ab = disjoint_union(make_instance({"r": [(1,)]}), make_instance({"s": [(2,)]}))
    assert power_view(ab, 1, 1).serialize() == [
        [1, ["{}", "{(1)}"]],
        [2, ["{}", "{(2)}"]],
    ]


def test_provenance_witnesses_evaluate_back(tmp_path):
    from dbcat.queries import eval_spjru

    a = make_instance({"r": [(1, 2), (2, 3)]})
    vs = power_view(a, 2, 3)
    checked = 0
    for ext in sorted(vs.extensions(), key=lambda e: (len(e),))[:40]:
        term = vs.witness(ext)
        if term is not None:
            assert eval_spjru(term, a).tuples == ext
            checked += 1
    assert checked > 5
