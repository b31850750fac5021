"""Greedy equivalence-class search: GES, STGES and TGES.

Moves between classes follow the Insert(X, Y, T) / Delete(X, Y, H) operator
characterization on the class CPDAG, so every single-edge neighbor class is
reachable no matter which member DAG would exhibit the edit. The tiered
search additionally restricts and re-closes the class graph after each move
and adds a turning phase that reverses individual compelled edges.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

from .graphs import GraphError, Pdag, TieredKnowledge, _norm, \
    consistent_extension, dag_to_cpdag, in_agreement, meek_closure, restrict
from .scoring import Dataset, NEG_INF, Scorer, ScoreError

IMPROVEMENT_EPS = 1e-10
MAX_CYCLES = 100


@dataclass(frozen=True)
class Move:
    """One candidate class transition.

    x, y are node indices: insert adds x -> y, delete removes the x ~ y
    adjacency (oriented bookkeeping on y's side), reverse turns x -> y into
    y -> x. aux carries the operator's T (insert) or H (delete) set.
    """

    kind: str
    x: int
    y: int
    delta: float
    aux: tuple = ()


@dataclass
class SearchState:
    graph: Pdag
    score: float
    knowledge: TieredKnowledge | None
    scorer: Scorer
    trace: list = field(default_factory=list)
    stats: dict | None = None
    _cpdag: Pdag | None = None


def _diff(new, old):
    if new == NEG_INF or old == NEG_INF:
        return NEG_INF
    return new - old


def _is_clique(g, nodes):
    nodes = list(nodes)
    for i in range(len(nodes)):
        for j in range(i + 1, len(nodes)):
            if not g.has_any_edge(nodes[i], nodes[j]):
                return False
    return True


def _semi_reachable(g, src, dst, blocked):
    """Whether a semi-directed path src -> ... -> dst avoids blocked nodes."""
    if src in blocked:
        return False
    seen = {src}
    stack = [src]
    while stack:
        v = stack.pop()
        if v == dst:
            return True
        for w in g.children(v) | g.neighbors(v):
            if w not in seen and w not in blocked:
                seen.add(w)
                stack.append(w)
    return False


def _insert_moves(C: Pdag, scorer: Scorer):
    """All valid Insert(x, y, T) operators on the class graph C, reduced to
    the best-delta variant per ordered pair."""
    best = {}
    for y in range(C.d):
        adj_y = C.adjacent(y)
        pa_y = C.parents(y)
        ne_y = C.neighbors(y)
        for x in range(C.d):
            if x == y or x in adj_y:
                continue
            na = ne_y & C.adjacent(x)
            if not _is_clique(C, na):
                continue
            t0 = sorted(ne_y - C.adjacent(x))
            any_path = _semi_reachable(C, y, x, frozenset())
            if any_path and _semi_reachable(C, y, x, na | set(t0)):
                continue

            def emit(T):
                blockers = na | set(T)
                if any_path and _semi_reachable(C, y, x, blockers):
                    return
                base_set = frozenset(pa_y | blockers)
                old = scorer.local(y, base_set)
                new = scorer.local(y, base_set | {x})
                delta = _diff(new, old)
                key = (x, y)
                cur = best.get(key)
                cand = (delta, tuple(sorted(T)))
                if cur is None or cand[0] > cur[0] or \
                        (cand[0] == cur[0] and cand[1] < cur[1]):
                    best[key] = cand

            def grow(T, start):
                emit(T)
                for idx in range(start, len(t0)):
                    t = t0[idx]
                    if all(C.has_any_edge(t, u) for u in na) and \
                            all(C.has_any_edge(t, u) for u in T):
                        grow(T + [t], idx + 1)

            grow([], 0)
    return [Move("insert", x, y, delta, aux)
            for (x, y), (delta, aux) in sorted(best.items())]


def _delete_moves(C: Pdag, scorer: Scorer):
    """All valid Delete(x, y, H) operators on the class graph C, reduced to
    the best-delta variant per ordered pair."""
    pairs = [(x, y) for x, y in C.directed]
    for a, b in C.undirected:
        pairs.append((a, b))
        pairs.append((b, a))
    best = {}
    for x, y in sorted(pairs):
        na = sorted(C.neighbors(y) & C.adjacent(x))
        pa_y = C.parents(y)

        def emit(keep):
            # keep = na \ H stays adjacent to y; the rest becomes colliders
            base_set = frozenset(pa_y | set(keep) | {x})
            old = scorer.local(y, base_set)
            new = scorer.local(y, base_set - {x})
            delta = _diff(new, old)
            aux = tuple(sorted(set(na) - set(keep)))
            key = (x, y)
            cur = best.get(key)
            cand = (delta, aux)
            if cur is None or cand[0] > cur[0] or \
                    (cand[0] == cur[0] and cand[1] < cur[1]):
                best[key] = cand

        def grow(keep, start):
            emit(keep)
            for idx in range(start, len(na)):
                t = na[idx]
                if all(C.has_any_edge(t, u) for u in keep):
                    grow(keep + [t], idx + 1)

        grow([], 0)
    return [Move("delete", x, y, delta, aux)
            for (x, y), (delta, aux) in sorted(best.items())]


def _reverse_moves(state: SearchState):
    """Reversals of the directed (compelled) edges of the current class
    graph, scored on the canonical consistent extension."""
    W = state.graph
    scorer = state.scorer
    M = consistent_extension(W, state.knowledge)
    moves = []
    for x, y in sorted(W.directed):
        rest = M.directed - {(x, y)}
        if _dir_reachable(rest, M.d, x, y):
            continue
        pa_x = M.parents(x)
        pa_y = M.parents(y)
        delta = _diff(scorer.local(x, pa_x | {y}), scorer.local(x, pa_x)) + \
            _diff(scorer.local(y, pa_y - {x}), scorer.local(y, pa_y))
        moves.append(Move("reverse", x, y, delta))
    return moves


def _dir_reachable(directed, d, src, dst):
    children = [[] for _ in range(d)]
    for a, b in directed:
        children[a].append(b)
    seen = {src}
    stack = [src]
    while stack:
        v = stack.pop()
        if v == dst:
            return True
        for c in children[v]:
            if c not in seen:
                seen.add(c)
                stack.append(c)
    return False


def _class_cpdag(state: SearchState) -> Pdag:
    if state._cpdag is None:
        state._cpdag = dag_to_cpdag(
            consistent_extension(state.graph, state.knowledge))
    return state._cpdag


def neighbors(state: SearchState, kind: str):
    """Candidate moves of one kind from the current state, deduplicated per
    (x, y) and sorted lexicographically."""
    if kind == "insert":
        return _insert_moves(_class_cpdag(state), state.scorer)
    if kind == "delete":
        return _delete_moves(_class_cpdag(state), state.scorer)
    if kind == "reverse":
        return _reverse_moves(state)
    raise ValueError("unknown move kind %r" % kind)


def _apply_insert(C: Pdag, mv: Move) -> Pdag:
    directed = set(C.directed) | {(mv.x, mv.y)}
    undirected = set(C.undirected)
    for t in mv.aux:
        undirected.discard(_norm(t, mv.y))
        directed.add((t, mv.y))
    return C.replace(directed=directed, undirected=undirected)


def _apply_delete(C: Pdag, mv: Move) -> Pdag:
    x, y = mv.x, mv.y
    directed = set(C.directed) - {(x, y), (y, x)}
    undirected = set(C.undirected) - {_norm(x, y)}
    for h in mv.aux:
        if _norm(y, h) in undirected:
            undirected.discard(_norm(y, h))
            directed.add((y, h))
        if _norm(x, h) in undirected:
            undirected.discard(_norm(x, h))
            directed.add((x, h))
    return C.replace(directed=directed, undirected=undirected)


def _try_move(state: SearchState, mv: Move) -> SearchState | None:
    if mv.kind == "insert":
        P = _apply_insert(_class_cpdag(state), mv)
    elif mv.kind == "delete":
        P = _apply_delete(_class_cpdag(state), mv)
    else:
        M = consistent_extension(state.graph, state.knowledge)
        P = M.replace(directed=(M.directed - {(mv.x, mv.y)}) | {(mv.y, mv.x)})
    try:
        graph = dag_to_cpdag(consistent_extension(P))
        if state.knowledge is not None:
            t0 = time.perf_counter()
            # a class whose every member contradicts the tiers has TBIC
            # -inf; restricting it anyway would silently move to the class
            # of the force-oriented graph instead
            if not in_agreement(graph, state.knowledge):
                return None
            graph = meek_closure(restrict(graph, state.knowledge), rules={1})
            if state.stats is not None:
                state.stats["stage23_s"] = state.stats.get("stage23_s", 0.0) \
                    + time.perf_counter() - t0
        score = state.scorer.score_class(graph)
    except (GraphError, ScoreError):
        return None
    return SearchState(graph, score, state.knowledge, state.scorer,
                       state.trace + [mv], state.stats)


def _step(state: SearchState, kind: str) -> SearchState:
    moves = [m for m in neighbors(state, kind) if m.delta > IMPROVEMENT_EPS]
    moves.sort(key=lambda m: (-m.delta, m.kind, m.x, m.y))
    for mv in moves:
        nxt = _try_move(state, mv)
        if nxt is not None:
            return nxt
    return state


def forward_step(state: SearchState) -> SearchState:
    """Apply the best score-improving insertion, or return state unchanged."""
    return _step(state, "insert")


def backward_step(state: SearchState) -> SearchState:
    """Apply the best score-improving deletion, or return state unchanged."""
    return _step(state, "delete")


def turning_step(state: SearchState) -> SearchState:
    """Apply the best score-improving edge reversal, or return state
    unchanged."""
    return _step(state, "reverse")


def _run_phase(state, step_fn):
    while True:
        nxt = step_fn(state)
        if nxt is state:
            return state
        state = nxt


def _initial_state(scorer: Scorer, knowledge) -> SearchState:
    data = scorer.dataset
    g0 = Pdag.empty(data.d, data.labels)
    return SearchState(g0, scorer.score_class(g0), knowledge, scorer, [])


def ges(dataset: Dataset, scorer: Scorer | None = None, lam: float = 1.0,
        stats: dict | None = None) -> SearchState:
    """Greedy equivalence search with the plain BIC: one forward phase of
    insertions to exhaustion, then one backward phase of deletions."""
    if scorer is None:
        scorer = Scorer(dataset, None, lam)
    if scorer.knowledge is not None:
        raise ScoreError("ges scores without knowledge; use tges")
    t0 = time.perf_counter()
    state = _initial_state(scorer, None)
    state = _run_phase(state, forward_step)
    state = _run_phase(state, backward_step)
    if stats is not None:
        el = time.perf_counter() - t0
        stats["stage_i_s"] = stats.get("stage_i_s", 0.0) + el
        stats["total_s"] = stats.get("total_s", 0.0) + el
    return state


def stges(dataset: Dataset, k: TieredKnowledge, scorer: Scorer | None = None,
          lam: float = 1.0) -> SearchState:
    """Simple tiered GES: run plain GES, drop directed edges that contradict
    the tiers, restrict, and close under Meek rules 1-4."""
    base = ges(dataset, scorer, lam)
    G = base.graph
    kept = {(a, b) for a, b in G.directed if not k.forbids(a, b)}
    P = meek_closure(restrict(G.replace(directed=kept), k), rules={1, 2, 3, 4})
    tiered = Scorer(dataset, k, base.scorer.lam)
    try:
        score = tiered.score_class(P)
    except (GraphError, ScoreError):
        score = NEG_INF
    return SearchState(P, score, k, tiered, list(base.trace))


def tges(dataset: Dataset, k: TieredKnowledge, scorer: Scorer | None = None,
         lam: float = 1.0, stats: dict | None = None) -> SearchState:
    """Tiered greedy equivalence search.

    From the empty graph, repeat forward, backward and turning phases to
    exhaustion; every applied move re-completes the class graph, restricts it
    by the tiers and closes under Meek rule 1, so each state is a tiered
    MPDAG. Stops when a full cycle changes nothing (cycle cap 100).
    """
    if scorer is None:
        scorer = Scorer(dataset, k, lam)
    if scorer.knowledge != k:
        raise ScoreError("scorer knowledge must match k")
    state = _initial_state(scorer, k)
    state.stats = {"stage23_s": 0.0}
    t_start = time.perf_counter()
    for _ in range(MAX_CYCLES):
        before = state
        state = _run_phase(state, forward_step)
        state = _run_phase(state, backward_step)
        state = _run_phase(state, turning_step)
        if state is before:
            break
    else:
        warnings.warn("tges did not converge within %d cycles" % MAX_CYCLES)
    if stats is not None:
        total = time.perf_counter() - t_start
        stats["total_s"] = stats.get("total_s", 0.0) + total
        stats["stage_i_s"] = stats.get("stage_i_s", 0.0) \
            + max(total - state.stats.get("stage23_s", 0.0), 0.0)
    return state
