"""Simple Tree Matching between ordered labeled trees."""
from __future__ import annotations

from itertools import combinations

from .dsl import DslTree, node_count


def stm(t1: DslTree, t2: DslTree) -> int:
    """Maximum number of matched nodes.

    Roots with different labels match nothing. Otherwise the children are
    aligned by an order-preserving matching that maximizes the summed
    subtree scores, so nodes only ever match nodes at the same depth.
    """
    memo: dict[tuple[int, int], int] = {}

    def match(a: DslTree, b: DslTree) -> int:
        if a.label != b.label:
            return 0
        key = (id(a), id(b))
        if key in memo:
            return memo[key]
        ca, cb = a.children, b.children
        m = [[0] * (len(cb) + 1) for _ in range(len(ca) + 1)]
        for i in range(1, len(ca) + 1):
            for j in range(1, len(cb) + 1):
                m[i][j] = max(m[i - 1][j], m[i][j - 1], m[i - 1][j - 1] + match(ca[i - 1], cb[j - 1]))
        memo[key] = result = 1 + m[-1][-1]
        return result

    return match(t1, t2)


def similarity(t1: DslTree, t2: DslTree) -> float:
    """Matched nodes over the mean tree size."""
    return stm(t1, t2) / ((node_count(t1) + node_count(t2)) / 2)


def brute_force_stm(t1: DslTree, t2: DslTree) -> int:
    """Exhaustive reference for ``stm``: tries every order-preserving child pairing.

    Exponential; meant for trees of at most eight nodes.
    """
    if t1.label != t2.label:
        return 0
    ca, cb = t1.children, t2.children
    best = 0
    for k in range(min(len(ca), len(cb)) + 1):
        for left in combinations(range(len(ca)), k):
            for right in combinations(range(len(cb)), k):
                best = max(best, sum(brute_force_stm(ca[i], cb[j]) for i, j in zip(left, right)))
    return 1 + best
