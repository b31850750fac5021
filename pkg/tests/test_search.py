import math

import numpy as np
import pytest

from conftest import random_dag
from tges.graphs import Pdag, TieredKnowledge, consistent_extension, \
    meek_closure, restrict, tiered_mpdag_of, topological_order
from tges.oracle import best_scoring_graph
from tges.scoring import Dataset, ScoreError, Scorer
from tges.search import (
    IMPROVEMENT_EPS,
    SearchState,
    _initial_state,
    backward_step,
    forward_step,
    ges,
    neighbors,
    stges,
    tges,
    turning_step,
)


def _sem_samples(rng, dag, n, lo=0.6, hi=1.0):
    """Draw n rows from a linear Gaussian model on dag with random weights."""
    d = dag.d
    X = rng.standard_normal((n, d))
    w = {}
    for a, b in dag.directed:
        w[(a, b)] = rng.uniform(lo, hi) * rng.choice([-1.0, 1.0])
    for v in topological_order(dag):
        for u in dag.parents(v):
            X[:, v] += w[(u, v)] * X[:, u]
    return X


def _state_for(data, k, graph):
    sc = Scorer(data, k)
    return SearchState(graph, sc.score_class(graph), k, sc)


# ------------------------------------------------------------------ neighbors

def test_insert_moves_on_empty_graph():
    data = Dataset.from_array(np.random.default_rng(0).standard_normal((50, 4)))
    state = _initial_state(Scorer(data), None)
    moves = neighbors(state, "insert")
    assert len(moves) == 12  # every ordered nonadjacent pair
    assert all(m.kind == "insert" and m.aux == () for m in moves)
    assert sorted((m.x, m.y) for m in moves) == \
        [(x, y) for x in range(4) for y in range(4) if x != y]


def test_no_insert_moves_on_complete_graph():
    data = Dataset.from_array(np.random.default_rng(1).standard_normal((50, 3)))
    full = Pdag(3, [], [(0, 1), (0, 2), (1, 2)])
    state = _state_for(data, None, full)
    assert neighbors(state, "insert") == []
    deletes = neighbors(state, "delete")
    assert len(deletes) == 6  # both orders of each adjacency
    assert all(m.kind == "delete" for m in deletes)


def test_reverse_moves_only_on_compelled_edges():
    data = Dataset.from_array(np.random.default_rng(2).standard_normal((50, 3)))
    collider = Pdag(3, [(0, 1), (2, 1)])
    state = _state_for(data, None, collider)
    rev = neighbors(state, "reverse")
    assert sorted((m.x, m.y) for m in rev) == [(0, 1), (2, 1)]
    chain_class = Pdag(3, [], [(0, 1), (1, 2)])
    assert neighbors(_state_for(data, None, chain_class), "reverse") == []


def test_neighbors_rejects_unknown_kind():
    data = Dataset.from_array(np.random.default_rng(3).standard_normal((20, 2)))
    with pytest.raises(ValueError):
        neighbors(_initial_state(Scorer(data), None), "swap")


# ---------------------------------------------------------------------- steps

def test_forward_step_picks_argmax_pair():
    rng = np.random.default_rng(7)
    n = 1000
    x0 = rng.standard_normal(n)
    x1 = 2.0 * x0 + rng.standard_normal(n)
    x2 = 0.3 * x1 + rng.standard_normal(n)
    data = Dataset.from_array(np.column_stack([x0, x1, x2]))
    state = _initial_state(Scorer(data), None)
    nxt = forward_step(state)
    assert nxt is not state
    mv = nxt.trace[-1]
    assert (mv.kind, mv.x, mv.y) == ("insert", 0, 1)
    assert nxt.graph == Pdag(3, [], [(0, 1)])
    assert math.isclose(nxt.score - state.score, mv.delta, rel_tol=1e-9)


def test_steps_return_same_object_when_stuck():
    data = Dataset.from_array(np.random.default_rng(8).standard_normal((500, 3)))
    state = _initial_state(Scorer(data), None)
    assert backward_step(state) is state
    assert turning_step(state) is state


def test_forward_scores_nondecreasing():
    rng = np.random.default_rng(9)
    dag = random_dag(rng, 5, 0.5)
    data = Dataset.from_array(_sem_samples(rng, dag, 800))
    k = TieredKnowledge([1, 1, 1, 2, 2])
    state = _initial_state(Scorer(data, k), k)
    scores = [state.score]
    while True:
        nxt = forward_step(state)
        if nxt is state:
            break
        state = nxt
        scores.append(state.score)
    assert len(scores) > 1
    assert all(b > a for a, b in zip(scores, scores[1:]))
    assert all(m.delta > IMPROVEMENT_EPS for m in state.trace)
    # every intermediate state is a closed tiered class graph
    assert state.graph == tiered_mpdag_of(
        consistent_extension(state.graph, k), k)


# ------------------------------------------------------------------ turning

def test_turning_recovers_collider_from_chain():
    rng = np.random.default_rng(11)
    n = 20000
    x0 = rng.standard_normal(n)
    x2 = rng.standard_normal(n)
    x1 = 0.8 * x0 + 0.8 * x2 + rng.standard_normal(n)
    data = Dataset.from_array(np.column_stack([x0, x1, x2]))
    k = TieredKnowledge([1, 2, 2])
    state = _state_for(data, k, Pdag(3, [(0, 1), (1, 2)]))
    nxt = turning_step(state)
    assert nxt is not state
    mv = nxt.trace[-1]
    assert (mv.kind, mv.x, mv.y) == ("reverse", 1, 2)
    assert nxt.graph == Pdag(3, [(0, 1), (2, 1)])
    assert nxt.score > state.score
    assert turning_step(nxt) is nxt


def test_turning_restricts_after_reversal():
    # reversing a cross-tier compelled edge may land in a class whose
    # restricted closure points the other way; the applied state must be
    # that closure, not the raw reversal
    rng = np.random.default_rng(12)
    n = 20000
    x0 = rng.standard_normal(n)
    x1 = 0.8 * x0 + rng.standard_normal(n)
    x2 = 0.8 * x1 + rng.standard_normal(n)
    data = Dataset.from_array(np.column_stack([x0, x1, x2]))
    k = TieredKnowledge([1, 2, 2])
    state = _state_for(data, k, Pdag(3, [(0, 1), (2, 1)]))
    nxt = turning_step(state)
    assert nxt is not state
    assert nxt.graph == Pdag(3, [(0, 1), (1, 2)])
    assert nxt.score > state.score


def test_moves_into_empty_restricted_class_are_skipped():
    # with tiers [1, 2, 1] every member of the chain class 0-1-2 would need
    # both cross-tier edges oriented into node 1, a collider the class does
    # not contain; its TBIC is -inf and the search must route around it
    rng = np.random.default_rng(20)
    n = 30000
    x0 = rng.standard_normal(n)
    x1 = 0.9 * x0 + rng.standard_normal(n)
    x2 = 0.9 * x1 + rng.standard_normal(n)
    data = Dataset.from_array(np.column_stack([x0, x1, x2]))
    k = TieredKnowledge([1, 2, 1])
    state = tges(data, k)
    assert state.graph == Pdag(3, [(0, 1), (2, 1)], [(0, 2)])
    assert math.isfinite(state.score)


def test_trace_deltas_add_up():
    rng = np.random.default_rng(21)
    for _ in range(5):
        dag = random_dag(rng, 6, 0.5)
        data = Dataset.from_array(_sem_samples(rng, dag, 1000))
        k = TieredKnowledge([1, 2, 2, 3, 3, 3])
        sc = Scorer(data, k)
        state = tges(data, k, scorer=sc)
        start = sc.score_class(Pdag.empty(6, data.labels))
        predicted = sum(m.delta for m in state.trace)
        assert math.isclose(state.score - start, predicted, rel_tol=1e-9,
                            abs_tol=1e-6)


# ----------------------------------------------------------------- front ends

def test_ges_rejects_tiered_scorer():
    data = Dataset.from_array(np.random.default_rng(13).standard_normal((40, 2)))
    sc = Scorer(data, TieredKnowledge([1, 2]))
    with pytest.raises(ScoreError):
        ges(data, scorer=sc)


def test_tges_rejects_mismatched_scorer():
    data = Dataset.from_array(np.random.default_rng(14).standard_normal((40, 2)))
    k = TieredKnowledge([1, 2])
    with pytest.raises(ScoreError):
        tges(data, k, scorer=Scorer(data, None))


def test_tges_deterministic():
    rng = np.random.default_rng(15)
    dag = random_dag(rng, 6, 0.4)
    data = Dataset.from_array(_sem_samples(rng, dag, 1500))
    k = TieredKnowledge([1, 1, 2, 2, 3, 3])
    a = tges(data, k)
    b = tges(data, k)
    assert a.graph == b.graph
    assert a.score == b.score
    assert a.trace == b.trace


def test_tges_output_is_closed_and_encoding():
    rng = np.random.default_rng(16)
    for _ in range(5):
        dag = random_dag(rng, 6, 0.5)
        data = Dataset.from_array(_sem_samples(rng, dag, 1200))
        k = TieredKnowledge([1, 2, 2, 3, 3, 3])
        g = tges(data, k).graph
        assert restrict(g, k) == g
        assert meek_closure(g, rules={1}) == g
        assert g == tiered_mpdag_of(consistent_extension(g, k), k)


def test_stges_drops_contradicting_edges():
    rng = np.random.default_rng(17)
    n = 50000
    x1 = rng.standard_normal(n)
    x2 = rng.standard_normal(n)
    x0 = 0.8 * x1 + 0.8 * x2 + rng.standard_normal(n)
    data = Dataset.from_array(np.column_stack([x0, x1, x2]))
    assert ges(data).graph == Pdag(3, [(1, 0), (2, 0)])
    k = TieredKnowledge([1, 2, 1])
    out = stges(data, k)
    assert out.graph == Pdag(3, [(2, 0)])
    assert out.score > float("-inf")


def test_stges_keeps_compatible_result():
    rng = np.random.default_rng(18)
    n = 30000
    x0 = rng.standard_normal(n)
    x1 = 0.9 * x0 + rng.standard_normal(n)
    x2 = rng.standard_normal(n)
    data = Dataset.from_array(np.column_stack([x0, x1, x2]))
    k = TieredKnowledge([1, 2, 2])
    out = stges(data, k)
    assert out.graph == Pdag(3, [(0, 1)])


def test_stats_reported():
    data = Dataset.from_array(np.random.default_rng(19).standard_normal((300, 4)))
    k = TieredKnowledge([1, 1, 2, 2])
    st = {}
    tges(data, k, stats=st)
    assert set(st) >= {"total_s", "stage_i_s"}
    assert 0.0 <= st["stage_i_s"] <= st["total_s"]
    st2 = {}
    ges(data, stats=st2)
    assert st2["total_s"] >= st2["stage_i_s"] >= 0.0


# ----------------------------------------------------------- search optimality

def test_tges_matches_exhaustive_optimum_small():
    hits = 0
    for seed in range(10):
        rng = np.random.default_rng(100 + seed)
        dag = random_dag(rng, 4, 0.5)
        order = topological_order(dag)
        tau = [0] * 4
        for pos, v in enumerate(order):
            tau[v] = 1 if pos < 2 else 2
        k = TieredKnowledge(tau)
        data = Dataset.from_array(_sem_samples(rng, dag, 20000))
        sc = Scorer(data, k)
        state = tges(data, k, scorer=sc)
        top = max(sc.total_score(g) for g in best_scoring_graph(sc))
        assert state.score <= top + 1e-9 * max(1.0, abs(top))
        if math.isclose(state.score, top, rel_tol=1e-9):
            hits += 1
    assert hits >= 8
