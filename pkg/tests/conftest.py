"""Shared brute-force references and generators for the test suite.

These deliberately re-derive results through independent routes (path
enumeration, counting recurrences, exhaustive orientation) rather than
calling back into the implementation under test.
"""

from itertools import combinations
from math import comb

import numpy as np

from tges.graphs import Pdag


def dag_count(n):
    """Labeled-DAG count by the alternating-sum recurrence."""
    a = [1]
    for m in range(1, n + 1):
        total = 0
        for k in range(1, m + 1):
            total += (-1) ** (k + 1) * comb(m, k) * 2 ** (k * (m - k)) * a[m - k]
        a.append(total)
    return a[n]


def dsep_bruteforce(g, x, y, z):
    """d-separation by enumerating every simple path and checking blocking."""
    z = set(z)
    skel_adj = {v: sorted(g.parents(v) | g.children(v)) for v in range(g.d)}
    desc = {}
    for v in range(g.d):
        seen = {v}
        stack = [v]
        while stack:
            u = stack.pop()
            for c in g.children(u):
                if c not in seen:
                    seen.add(c)
                    stack.append(c)
        desc[v] = seen

    def blocked(path):
        for i in range(1, len(path) - 1):
            a, b, c = path[i - 1], path[i], path[i + 1]
            is_collider = (a, b) in g.directed and (c, b) in g.directed
            if is_collider:
                if not (desc[b] & z):
                    return True
            elif b in z:
                return True
        return False

    def paths(prefix):
        v = prefix[-1]
        if v == y:
            yield list(prefix)
            return
        for w in skel_adj[v]:
            if w not in prefix:
                prefix.append(w)
                yield from paths(prefix)
                prefix.pop()

    return all(blocked(p) for p in paths([x]))


def random_dag(rng, d, p):
    order = rng.permutation(d)
    edges = [(int(order[i]), int(order[j]))
             for i in range(d) for j in range(i + 1, d)
             if rng.random() < p]
    return Pdag(d, edges)


def random_pdag(rng, d, p_dir=0.2, p_und=0.2):
    directed, und = set(), set()
    for a, b in combinations(range(d), 2):
        r = rng.random()
        if r < p_dir:
            directed.add((a, b) if rng.random() < 0.5 else (b, a))
        elif r < p_dir + p_und:
            und.add((a, b))
    return Pdag(d, directed, und)


def markov_brute(g):
    """(skeleton, v-structures) signature used to compare classes."""
    return g.skeleton(), g.v_structures()
