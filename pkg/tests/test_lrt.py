import math

import pytest
from hypothesis import given, settings, strategies as st

from artsim.lrt import (
    SATURATED,
    CollectionRef,
    Fanout,
    InvalidCollection,
    InvalidFanout,
    LabelOutOfRange,
    TreeGeometry,
    collection_bounds,
    collection_index,
    geometry,
    level_of_label,
    level_population,
    level_start_label,
    lrt_height,
    max_nesting_depth,
    routing_overhead_estimate,
    t1_hop_bound,
    validate_fanout,
)


def enumerate_tree(b, n):
    """Independent oracle: grow the tree node by node from the degree rule.

    The root has b children; a node at level i >= 1 has as many children as
    its level holds nodes.  Children are labelled left to right, level by
    level.  Returns ``{label: (level, parent, collection_no)}``.
    """
    nodes = {1: (0, None, None)}
    level_nodes = [[1]]
    next_label = 2
    while next_label <= n:
        parents = level_nodes[-1]
        level = len(level_nodes)
        degree = b if level == 1 else len(parents)
        current = []
        for coll_no, parent in enumerate(parents, start=1):
            for _ in range(degree):
                if next_label > n:
                    break
                nodes[next_label] = (level, parent, coll_no)
                current.append(next_label)
                next_label += 1
        if next_label > n:
            break
        level_nodes.append(current)
    return nodes


def test_fanout_examples():
    assert validate_fanout(4) == Fanout(4)
    assert validate_fanout(2) == Fanout(2)
    with pytest.raises(InvalidFanout):
        validate_fanout(8)


def test_fanout_enumeration():
    allowed = {2 ** (2 ** j) for j in range(5)}
    for b in range(2, 70000):
        ok = b in allowed
        if ok:
            validate_fanout(b)
        elif b < 300 or b & (b - 1) == 0:
            with pytest.raises(InvalidFanout):
                validate_fanout(b)


def test_level_population_examples():
    g2 = geometry(2, 1000)
    assert level_population(g2, 0) == 1
    assert level_population(g2, 3) == 16
    assert level_population(geometry(4, 1000), 2) == 4 ** 2


def test_level_population_saturates():
    g = geometry(4, 100)
    assert level_population(g, 40) is SATURATED
    assert level_population(g, 40) > 10 ** 30


def test_level_start_label_examples():
    g = geometry(2, 10 ** 6)
    assert level_start_label(g, 3) == 8
    assert level_start_label(g, 4) == 24
    assert level_start_label(g, 0) == 1
    assert [level_start_label(g, i) for i in range(5)] == [1, 2, 4, 8, 24]


def test_level_of_label_examples():
    g = geometry(2, 1000)
    assert level_of_label(g, 1) == 0
    assert level_of_label(g, 24) == 4
    assert level_of_label(g, 5) == 2
    with pytest.raises(LabelOutOfRange):
        level_of_label(g, 1001)


def test_collection_examples():
    g = geometry(2, 1000)
    assert collection_index(g, 3, 9) == CollectionRef(3, 1)
    assert collection_index(g, 3, 8) == CollectionRef(3, 1)
    assert collection_index(g, 3, 23) == CollectionRef(3, 4)
    assert collection_bounds(g, CollectionRef(3, 1)) == (8, 11)
    assert collection_bounds(g, CollectionRef(1, 1)) == (2, 3)
    assert collection_bounds(g, CollectionRef(3, 4)) == (20, 23)
    with pytest.raises(LabelOutOfRange):
        collection_index(g, 2, 9)
    with pytest.raises(InvalidCollection):
        collection_bounds(g, CollectionRef(3, 5))


def test_height_examples():
    assert lrt_height(geometry(2, 1)) == 1
    assert lrt_height(geometry(2, 11)) == 4
    assert lrt_height(geometry(2, 24)) == 5


def test_nesting_examples():
    assert max_nesting_depth(geometry(2, 2)) == 1
    assert max_nesting_depth(geometry(2, 2 ** 16)) <= 5
    # 10**5 > 65813 spills into a partial level 5, which adds one nesting
    assert max_nesting_depth(geometry(4, 10 ** 5)) == 4
    assert max_nesting_depth(geometry(4, 65813)) == 3


def test_overhead_and_t1_examples():
    assert routing_overhead_estimate(10 ** 9, 1) == pytest.approx(5.95, abs=0.01)
    assert round(routing_overhead_estimate(10 ** 9, 1)) == 6
    assert routing_overhead_estimate(16, 1) == pytest.approx(0.5)
    assert routing_overhead_estimate(2, 1) == pytest.approx(2 ** 0.25)
    assert t1_hop_bound(2 ** 16, 2) == pytest.approx(16)
    assert t1_hop_bound(2 ** 16, Fanout(4)) == pytest.approx(4)
    assert t1_hop_bound(2, 2) == 0


@pytest.mark.parametrize("b", [2, 4, 16])
@pytest.mark.parametrize("n", [1, 2, 5, 11, 24, 100, 300, 1000])
def test_matches_enumerated_tree(b, n):
    oracle = enumerate_tree(b, n)
    g = geometry(b, n)
    assert lrt_height(g) == 1 + max(lvl for lvl, _, _ in oracle.values())
    for label, (level, _parent, coll) in oracle.items():
        assert level_of_label(g, label) == level
        assert g.level_of(label) == level
        if level >= 1:
            assert collection_index(g, level, label).index == coll


@given(b=st.sampled_from([2, 4, 16]), i=st.integers(2, 6))
def test_spine_recurrence(b, i):
    if b == 16 and i > 5:
        i = 5
    g = geometry(b, 10)
    diff = level_start_label(g, i) - level_start_label(g, i - 1)
    assert diff == b ** (2 ** (i - 2))
    assert level_population(g, i) == level_population(g, i - 1) ** 2


@settings(max_examples=200)
@given(b=st.sampled_from([2, 4, 16]), n=st.integers(1, 10 ** 7), data=st.data())
def test_label_lies_in_its_level(b, n, data):
    g = geometry(b, n)
    j = data.draw(st.integers(1, n))
    i = level_of_label(g, j)
    assert level_start_label(g, i) <= j < level_start_label(g, i + 1)


@pytest.mark.parametrize("b", [2, 4])
def test_collections_tile_each_level(b):
    g = geometry(b, 10 ** 6)
    for i in range(2, 5):
        covered = []
        for m in range(1, level_population(g, i - 1) + 1):
            lo, hi = collection_bounds(g, CollectionRef(i, m))
            covered.extend(range(lo, hi + 1))
            if hi <= g.node_count:
                for j in {lo, (lo + hi) // 2, hi}:
                    assert collection_index(g, i, j) == CollectionRef(i, m)
        assert covered == list(range(level_start_label(g, i), level_start_label(g, i + 1)))


@given(b=st.sampled_from([2, 4, 16]), n=st.integers(1, 10 ** 6))
def test_height_monotone_and_bounded(b, n):
    h = lrt_height(geometry(b, n))
    assert lrt_height(geometry(b, n + 1)) >= h
    if n >= b:
        assert h <= math.ceil(math.log2(max(math.log(n, b), 1.0))) + 2


@pytest.mark.parametrize("b", [2, 4, 16])
def test_height_exact_at_cumulative_boundaries(b):
    total = 0
    for h in range(1, 5):
        total += level_population(geometry(b, 1), h - 1)
        assert lrt_height(geometry(b, total)) == h
        assert lrt_height(geometry(b, total + 1)) == h + 1


def nesting_oracle(b, n):
    """Recurse on explicit collection sizes from the enumerated tree."""
    nodes = enumerate_tree(b, n)
    sizes = {}
    for level, parent, coll in nodes.values():
        if level >= 1:
            sizes[(level, coll)] = sizes.get((level, coll), 0) + 1
    biggest = max(sizes.values(), default=0)
    return 1 if biggest <= b else 1 + nesting_oracle(b, biggest)


@pytest.mark.parametrize("b,n", [(2, 2), (2, 24), (2, 300), (2, 2 ** 16), (4, 300), (4, 10 ** 5)])
def test_nesting_depth_matches_oracle(b, n):
    assert max_nesting_depth(geometry(b, n)) == nesting_oracle(b, n)
    if n > 2:
        assert max_nesting_depth(geometry(b, n)) <= math.ceil(math.log(math.log2(n), b)) + 1


def test_geometry_rejects_bad_input():
    with pytest.raises(InvalidFanout):
        TreeGeometry(8, 10)
    with pytest.raises(ValueError):
        TreeGeometry(Fanout(2), 0)
