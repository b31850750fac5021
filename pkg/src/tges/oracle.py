"""Brute-force references for small problems.

Exhaustive DAG enumeration, exact score maximization and restricted-class
membership, used to validate the search and the closures on graphs small
enough to enumerate.
"""

from __future__ import annotations

from itertools import combinations, product

from .graphs import GraphError, Pdag, TieredKnowledge, _has_cycle, encodes, is_dag
from .scoring import NEG_INF, Scorer

MAX_NODES = 5


def enumerate_dags(d, labels=None):
    """Yield every labeled DAG on d nodes.

    Deterministic lexicographic order over the mark vector of unordered
    pairs: for each pair (a, b) with a < b the mark is 0 (none), 1 (a -> b)
    or 2 (b -> a). Counts: 1, 3, 25, 543, 29281 for d = 1..5.
    """
    if not 1 <= d <= MAX_NODES:
        raise GraphError("enumerate_dags supports 1 <= d <= %d" % MAX_NODES)
    pairs = list(combinations(range(d), 2))
    for marks in product(range(3), repeat=len(pairs)):
        directed = set()
        for (a, b), m in zip(pairs, marks):
            if m == 1:
                directed.add((a, b))
            elif m == 2:
                directed.add((b, a))
        if not _has_cycle(directed, d):
            yield Pdag(d, directed, (), labels)


def best_scoring_graph(scorer: Scorer, d: int | None = None,
                       rel_tol: float = 1e-9):
    """DAGs attaining the maximal total score under the scorer, as a set;
    graphs within rel_tol of the maximum count as tied."""
    if d is None:
        d = scorer.dataset.d
    scored = []
    best = NEG_INF
    for g in enumerate_dags(d, scorer.dataset.labels):
        s = scorer.total_score(g)
        if s == NEG_INF:
            continue
        scored.append((s, g))
        if s > best:
            best = s
    window = rel_tol * max(1.0, abs(best))
    return {g for s, g in scored if best - s <= window}


def restricted_class_of(g: Pdag, k: TieredKnowledge | None = None):
    """All DAGs Markov equivalent to the DAG g (same skeleton and
    v-structures) that encode k; plain equivalence class when k is None."""
    if not is_dag(g):
        raise GraphError("restricted_class_of requires a DAG")
    skel = sorted(g.skeleton())
    if len(skel) > 20:
        raise GraphError("too many edges to enumerate orientations")
    base_v = g.v_structures()
    out = set()
    for bits in product((0, 1), repeat=len(skel)):
        directed = {(a, b) if bit == 0 else (b, a)
                    for (a, b), bit in zip(skel, bits)}
        if _has_cycle(directed, g.d):
            continue
        h = Pdag(g.d, directed, (), g.labels)
        if h.v_structures() != base_v:
            continue
        if k is not None and not encodes(h, k):
            continue
        out.add(h)
    return out
