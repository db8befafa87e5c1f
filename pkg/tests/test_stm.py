import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pixcoder.dsl import DslTree, node, node_count, parse
from pixcoder.stm import brute_force_stm, similarity, stm

from conftest import all_trees, random_label_tree


def test_worked_examples():
    assert stm(node("a", "b", "c"), node("a", "c")) == 2
    assert brute_force_stm(node("a", "b", "c"), node("a", "c")) == 2
    assert stm(node("a", "b"), node("x", "b")) == 0
    assert similarity(node("a", "b"), node("x", "b")) == 0.0


def test_two_thirds_example():
    t1 = node("a", node("b", "c"), "d")
    t2 = node("a", "d")
    assert (node_count(t1), node_count(t2), stm(t1, t2)) == (4, 2, 2)
    assert similarity(t1, t2) == pytest.approx(2 / 3, abs=0)


def test_no_cross_layer_matching():
    assert stm(node("a", "b"), DslTree("b")) == 0
    assert brute_force_stm(node("a", "b"), DslTree("b")) == 0
    # b sits at depth 1 on the left and depth 2 on the right
    assert stm(node("a", "b"), node("a", node("c", "b"))) == 1


def test_order_is_preserved():
    assert stm(node("a", "b", "c"), node("a", "c", "b")) == 2


def test_dsl_trees():
    t1 = parse("body { stack { row { label btn } } footer { btn-home btn-search } }")
    t2 = parse("body { stack { row { label switch } } footer { btn-home } }")
    assert stm(t1, t2) == 6
    assert similarity(t1, t2) == pytest.approx(6 / 7.5)


def _first_seen(*trees):
    seen = []
    for t in trees:
        for n in t:
            if n.label not in seen:
                seen.append(n.label)
    return tuple(seen)


def _canonical(order):
    return order == ("a", "b", "c")[:len(order)]


def test_canonical_pairs_cover_every_renaming_class():
    # relabeling any pair by a permutation of {a,b,c} reaches exactly one canonical pair
    trees = all_trees(3, "abc")
    perms = [dict(zip("abc", p)) for p in ("abc", "acb", "bac", "bca", "cab", "cba")]

    def rename(t, p):
        return DslTree(p[t.label], tuple(rename(c, p) for c in t.children))

    for t1 in trees:
        for t2 in trees:
            images = {(rename(t1, p), rename(t2, p)) for p in perms}
            assert sum(_canonical(_first_seen(*pair)) for pair in images) == 1
            assert len({stm(*pair) for pair in images}) == 1
            assert len({brute_force_stm(*pair) for pair in images}) == 1


def test_exhaustive_small_trees_match_brute_force():
    # every pair of trees with at most 5 nodes over {a,b,c}, one representative per renaming class
    trees = all_trees(5, "abc")
    assert len(trees) == 3 * (1 + 3 * (1 + 3 * (2 + 3 * (5 + 3 * 14))))
    groups = {}
    for t in trees:
        groups.setdefault(_first_seen(t), []).append(t)
    checked = mismatches = 0
    for o1, g1 in groups.items():
        for o2, g2 in groups.items():
            if not _canonical(o1 + tuple(x for x in o2 if x not in o1)):
                continue
            for t1 in g1:
                for t2 in g2:
                    checked += 1
                    if stm(t1, t2) != brute_force_stm(t1, t2):
                        mismatches += 1
    assert checked > len(trees) ** 2 // 6
    assert mismatches == 0


def test_random_pairs_up_to_eight_nodes(rng):
    for _ in range(1000):
        t1 = random_label_tree(rng, "abc", 8)
        t2 = random_label_tree(rng, "abc", 8)
        assert stm(t1, t2) == brute_force_stm(t1, t2)


def test_random_tree_stays_within_bound(rng):
    for _ in range(100):
        assert node_count(random_label_tree(rng, "ab", 8)) <= 8


_label = st.sampled_from("abc")
_trees = st.recursive(
    _label.map(DslTree),
    lambda kids: st.builds(DslTree, _label, st.lists(kids, max_size=3).map(tuple)),
    max_leaves=12,
)


@given(_trees, _trees)
@settings(max_examples=300, deadline=None)
def test_similarity_properties(t1, t2):
    s = similarity(t1, t2)
    assert s == similarity(t2, t1)
    assert 0.0 <= s <= 1.0
    assert stm(t1, t2) <= min(node_count(t1), node_count(t2))
    assert similarity(t1, t1) == 1.0
    assert stm(t1, t1) == node_count(t1)


def test_identities_on_random_pairs():
    rng = np.random.default_rng(4)
    for _ in range(10_000):
        t1 = random_label_tree(rng, "abc", 10)
        t2 = random_label_tree(rng, "abc", 10)
        assert similarity(t1, t1) == 1.0
        assert similarity(t1, t2) == similarity(t2, t1)
