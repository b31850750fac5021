"""Graph types and operations for tiered causal discovery.

Nodes are integer indices 0..d-1 with optional string labels. A Pdag stores a
partially directed graph as two edge sets; a DAG is a Pdag with no undirected
edges. All operations are pure and return new graphs.
"""

from __future__ import annotations

import csv
import io
from enum import IntEnum
from itertools import combinations


class GraphError(ValueError):
    pass


class FormatError(GraphError):
    """Malformed serialized input (bad syntax, bad cell values)."""


class MismatchError(GraphError):
    """Variable names disagree between two inputs (e.g. tier file vs data)."""


class EdgeMark(IntEnum):
    """Cell values of the adjacency-matrix serialization."""

    NONE = 0
    DIRECTED = 1
    UNDIRECTED = 2


def _norm(a, b):
    return (a, b) if a < b else (b, a)


def _auto_labels(d):
    return tuple("X%d" % (i + 1) for i in range(d))


class Pdag:
    """Partially directed graph over nodes 0..d-1.

    Parameters
    ----------
    d : int
        Number of nodes.
    directed : iterable of (int, int)
        Ordered pairs (a, b), one per edge a -> b.
    undirected : iterable of (int, int)
        Unordered pairs, one per edge a --- b; stored as (min, max).
    labels : sequence of str, optional
        Variable names used in serialization; None means X1..Xd.

    No self loops, no pair present in both edge sets, and no pair of opposite
    directed edges. Instances are immutable; equality and hashing ignore labels.
    """

    __slots__ = ("d", "directed", "undirected", "labels",
                 "_parents", "_children", "_und", "_adj")

    def __init__(self, d, directed=(), undirected=(), labels=None):
        directed = frozenset((int(a), int(b)) for a, b in directed)
        undirected = frozenset(_norm(int(a), int(b)) for a, b in undirected)
        if labels is not None:
            labels = tuple(str(x) for x in labels)
            if len(labels) != d:
                raise GraphError("expected %d labels, got %d" % (d, len(labels)))
            if len(set(labels)) != d:
                raise GraphError("duplicate labels")
        parents = [set() for _ in range(d)]
        children = [set() for _ in range(d)]
        und = [set() for _ in range(d)]
        for a, b in directed:
            if a == b:
                raise GraphError("self loop at node %d" % a)
            if not (0 <= a < d and 0 <= b < d):
                raise GraphError("edge (%d, %d) out of range" % (a, b))
            if (b, a) in directed:
                raise GraphError("opposite directed edges between %d and %d" % (a, b))
            if _norm(a, b) in undirected:
                raise GraphError("pair (%d, %d) both directed and undirected" % (a, b))
            parents[b].add(a)
            children[a].add(b)
        for a, b in undirected:
            if a == b:
                raise GraphError("self loop at node %d" % a)
            if not (0 <= a < d and 0 <= b < d):
                raise GraphError("edge (%d, %d) out of range" % (a, b))
            und[a].add(b)
            und[b].add(a)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "directed", directed)
        object.__setattr__(self, "undirected", undirected)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "_parents", tuple(frozenset(s) for s in parents))
        object.__setattr__(self, "_children", tuple(frozenset(s) for s in children))
        object.__setattr__(self, "_und", tuple(frozenset(s) for s in und))
        object.__setattr__(self, "_adj", tuple(
            frozenset(parents[i] | children[i] | und[i]) for i in range(d)))

    def __setattr__(self, name, value):
        raise AttributeError("Pdag is immutable")

    @classmethod
    def empty(cls, d, labels=None):
        return cls(d, (), (), labels)

    def parents(self, i):
        return self._parents[i]

    def children(self, i):
        return self._children[i]

    def neighbors(self, i):
        """Nodes joined to i by an undirected edge."""
        return self._und[i]

    def adjacent(self, i):
        return self._adj[i]

    def has_any_edge(self, a, b):
        return b in self._adj[a]

    @property
    def n_edges(self):
        return len(self.directed) + len(self.undirected)

    def skeleton(self):
        return frozenset(_norm(a, b) for a, b in self.directed) | self.undirected

    def v_structures(self):
        """Colliders a -> b <- c with a, c nonadjacent, as (a, b, c), a < c."""
        out = set()
        for b in range(self.d):
            for a, c in combinations(sorted(self._parents[b]), 2):
                if not self.has_any_edge(a, c):
                    out.add((a, b, c))
        return frozenset(out)

    def replace(self, directed=None, undirected=None):
        return Pdag(self.d,
                    self.directed if directed is None else directed,
                    self.undirected if undirected is None else undirected,
                    self.labels)

    def orient(self, a, b):
        """Turn the undirected edge {a, b} into a -> b."""
        pair = _norm(a, b)
        if pair not in self.undirected:
            raise GraphError("no undirected edge between %d and %d" % (a, b))
        return self.replace(directed=self.directed | {(a, b)},
                            undirected=self.undirected - {pair})

    def __eq__(self, other):
        return (isinstance(other, Pdag) and self.d == other.d
                and self.directed == other.directed
                and self.undirected == other.undirected)

    def __hash__(self):
        return hash((self.d, self.directed, self.undirected))

    def __repr__(self):
        lab = self.labels or _auto_labels(self.d)
        parts = ["%s->%s" % (lab[a], lab[b]) for a, b in sorted(self.directed)]
        parts += ["%s--%s" % (lab[a], lab[b]) for a, b in sorted(self.undirected)]
        return "Pdag(d=%d: %s)" % (self.d, ", ".join(parts) or "empty")

    # ---------------------------------------------------------------- io

    def to_edgelist(self):
        """Serialize as one edge per line: 'A --> B' or 'A --- B'."""
        lab = self.labels or _auto_labels(self.d)
        lines = ["%s --> %s" % (lab[a], lab[b]) for a, b in sorted(self.directed)]
        lines += ["%s --- %s" % (lab[a], lab[b]) for a, b in sorted(self.undirected)]
        return "\n".join(lines) + ("\n" if lines else "")

    @classmethod
    def from_edgelist(cls, text, labels=None):
        """Parse the edge-list format.

        With labels given, unknown names raise MismatchError; without, nodes
        are indexed in order of first appearance (isolated nodes are then not
        representable, so pass labels when the full variable set matters).
        """
        index = {}
        if labels is not None:
            index = {name: i for i, name in enumerate(labels)}
        names = list(labels) if labels is not None else []
        directed, undirected = set(), set()
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line:
                continue
            tokens = line.split()
            if len(tokens) != 3 or tokens[1] not in ("-->", "---"):
                col = 1 + len(raw) - len(raw.lstrip())
                raise FormatError(
                    "line %d, col %d: expected 'A --> B' or 'A --- B', got %r"
                    % (lineno, col, line))
            ends = []
            for name in (tokens[0], tokens[2]):
                if name not in index:
                    if labels is not None:
                        col = 1 + raw.find(name)
                        raise MismatchError(
                            "line %d, col %d: unknown variable %r"
                            % (lineno, col, name))
                    index[name] = len(names)
                    names.append(name)
                ends.append(index[name])
            a, b = ends
            if tokens[1] == "-->":
                directed.add((a, b))
            else:
                undirected.add(_norm(a, b))
        return cls(len(names), directed, undirected, names or None)

    def to_amat_csv(self):
        """Adjacency-matrix CSV: cell (i, j) is 1 for i -> j, 2 (mirrored) for
        an undirected edge, 0 otherwise. First row and column order = labels."""
        lab = self.labels or _auto_labels(self.d)
        m = [[0] * self.d for _ in range(self.d)]
        for a, b in self.directed:
            m[a][b] = int(EdgeMark.DIRECTED)
        for a, b in self.undirected:
            m[a][b] = m[b][a] = int(EdgeMark.UNDIRECTED)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(lab)
        for row in m:
            w.writerow(row)
        return buf.getvalue()

    @classmethod
    def from_amat_csv(cls, text):
        rows = list(csv.reader(io.StringIO(text)))
        if not rows:
            raise FormatError("line 1, col 1: empty adjacency matrix")
        labels = rows[0]
        d = len(labels)
        if len(rows) != d + 1:
            raise FormatError("line %d: expected %d matrix rows, got %d"
                              % (len(rows), d, len(rows) - 1))
        m = []
        for i, row in enumerate(rows[1:], start=2):
            if len(row) != d:
                raise FormatError("line %d: expected %d cells, got %d"
                                  % (i, d, len(row)))
            vals = []
            for j, cell in enumerate(row):
                try:
                    v = int(cell)
                except ValueError:
                    v = -1
                if v not in (0, 1, 2):
                    raise FormatError("line %d, col %d: bad mark %r"
                                      % (i, j + 1, cell))
                vals.append(v)
            m.append(vals)
        directed, undirected = set(), set()
        for i in range(d):
            for j in range(d):
                if m[i][j] == int(EdgeMark.UNDIRECTED):
                    if m[j][i] != int(EdgeMark.UNDIRECTED):
                        raise FormatError(
                            "line %d, col %d: undirected mark not mirrored"
                            % (i + 2, j + 1))
                    undirected.add(_norm(i, j))
                elif m[i][j] == int(EdgeMark.DIRECTED):
                    if m[j][i] != int(EdgeMark.NONE):
                        raise FormatError(
                            "line %d, col %d: directed mark conflicts with its mirror"
                            % (i + 2, j + 1))
                    directed.add((i, j))
        return cls(d, directed, undirected, labels)


class TieredKnowledge:
    """Tier assignment tau over nodes 0..d-1, tiers being positive integers.

    Edges from a later tier into a strictly earlier tier are forbidden; there
    are no required edges. tau may be a dict {node: tier} covering all nodes
    or a length-d sequence of tiers.
    """

    __slots__ = ("d", "tau")

    def __init__(self, tau, d=None):
        if isinstance(tau, dict):
            if d is None:
                d = len(tau)
            items = tau
        else:
            seq = list(tau)
            if d is None:
                d = len(seq)
            items = {i: t for i, t in enumerate(seq)}
        full = {}
        for i in range(d):
            if i not in items:
                raise GraphError("node %d has no tier" % i)
            t = int(items[i])
            if t < 1:
                raise GraphError("tier for node %d must be >= 1, got %d" % (i, t))
            full[i] = t
        if len(items) != d:
            raise GraphError("tier map has %d entries for %d nodes" % (len(items), d))
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "tau", full)

    def __setattr__(self, name, value):
        raise AttributeError("TieredKnowledge is immutable")

    @property
    def tier_count(self):
        return len(set(self.tau.values()))

    def forbids(self, a, b):
        """True when the edge a -> b crosses tiers backwards."""
        return self.tau[a] > self.tau[b]

    def __eq__(self, other):
        return (isinstance(other, TieredKnowledge) and self.d == other.d
                and self.tau == other.tau)

    def __hash__(self):
        return hash((self.d, tuple(sorted(self.tau.items()))))

    def __repr__(self):
        return "TieredKnowledge(%s)" % (self.tau,)

    def to_csv(self, labels=None):
        lab = labels or _auto_labels(self.d)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["variable", "tier"])
        for i in range(self.d):
            w.writerow([lab[i], self.tau[i]])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text, labels):
        """Parse 'variable,tier' rows; names must exactly match labels."""
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or [c.strip() for c in rows[0]] != ["variable", "tier"]:
            raise FormatError("line 1, col 1: expected header 'variable,tier'")
        index = {name: i for i, name in enumerate(labels)}
        tau = {}
        for lineno, row in enumerate(rows[1:], start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 2:
                raise FormatError("line %d: expected 2 columns, got %d"
                                  % (lineno, len(row)))
            name = row[0].strip()
            if name not in index:
                raise MismatchError("line %d, col 1: variable %r not in data"
                                    % (lineno, name))
            if index[name] in tau:
                raise FormatError("line %d: duplicate variable %r" % (lineno, name))
            try:
                t = int(row[1])
            except ValueError:
                raise FormatError("line %d, col 2: bad tier %r" % (lineno, row[1]))
            if t < 1:
                raise FormatError("line %d, col 2: tier must be >= 1" % lineno)
            tau[index[name]] = t
        missing = [name for name in labels if index[name] not in tau]
        if missing:
            raise MismatchError("variables missing from tier file: %s"
                                % ", ".join(missing))
        return cls(tau, d=len(labels))


# -------------------------------------------------------------- basic checks

def topological_order(g: Pdag):
    """Topological order of a DAG's nodes, smallest index first among sources."""
    if g.undirected:
        raise GraphError("graph has undirected edges")
    indeg = [len(g.parents(i)) for i in range(g.d)]
    avail = sorted(i for i in range(g.d) if indeg[i] == 0)
    order = []
    while avail:
        v = avail.pop(0)
        order.append(v)
        opened = []
        for c in g.children(v):
            indeg[c] -= 1
            if indeg[c] == 0:
                opened.append(c)
        if opened:
            avail = sorted(avail + opened)
    if len(order) != g.d:
        raise GraphError("graph has a directed cycle")
    return order


def is_dag(g: Pdag) -> bool:
    if g.undirected:
        return False
    try:
        topological_order(g)
    except GraphError:
        return False
    return True


def encodes(g: Pdag, k: TieredKnowledge) -> bool:
    """Whether the DAG g is consistent with k (no forbidden edge present)."""
    if not is_dag(g):
        raise GraphError("encodes requires a DAG")
    return all(not k.forbids(a, b) for a, b in g.directed)


def _ancestors_closure(g, nodes):
    seen = set(nodes)
    stack = list(nodes)
    while stack:
        v = stack.pop()
        for p in g.parents(v):
            if p not in seen:
                seen.add(p)
                stack.append(p)
    return seen


def d_separated(g: Pdag, x: int, y: int, z=()) -> bool:
    """d-separation of x and y given the set z in a DAG.

    Uses the moralized ancestral subgraph: x and y are d-separated by z iff
    they are disconnected after moralizing the subgraph on An({x, y} | z)
    and deleting z.
    """
    if not is_dag(g):
        raise GraphError("d_separated requires a DAG")
    z = set(z)
    if x == y:
        raise GraphError("x and y must differ")
    if x in z or y in z:
        raise GraphError("conditioning set contains an endpoint")
    keep = _ancestors_closure(g, {x, y} | z)
    nbr = {v: set() for v in keep}
    for a, b in g.directed:
        if a in keep and b in keep:
            nbr[a].add(b)
            nbr[b].add(a)
    for b in keep:
        ps = [p for p in g.parents(b) if p in keep]
        for p, q in combinations(ps, 2):
            nbr[p].add(q)
            nbr[q].add(p)
    seen = {x}
    stack = [x]
    while stack:
        v = stack.pop()
        if v == y:
            return False
        for w in nbr[v]:
            if w not in seen and w not in z:
                seen.add(w)
                stack.append(w)
    return True


# -------------------------------------------------------------- Meek closure

def _closure_state(g):
    parents = [set(s) for s in g._parents]
    children = [set(s) for s in g._children]
    und = [set(s) for s in g._und]
    return parents, children, und


def _r1(u, v, parents, children, und):
    # a -> u, u --- v, a and v nonadjacent: orient u -> v
    for a in parents[u]:
        if a != v and v not in parents[a] and v not in children[a] and v not in und[a]:
            return True
    return False


def _r2(u, v, parents, children, und):
    # u -> b -> v with u --- v: orient u -> v
    return bool(children[u] & parents[v])


def _r3(u, v, parents, children, und):
    # u --- b -> v, u --- c -> v, b and c nonadjacent: orient u -> v
    mids = sorted(und[u] & parents[v])
    for b, c in combinations(mids, 2):
        if c not in parents[b] and c not in children[b] and c not in und[b]:
            return True
    return False


def _r4(u, v, parents, children, und):
    # u --- a -> b -> v with u adjacent to b (any mark): orient u -> v
    for a in und[u]:
        if a == v:
            continue
        for b in children[a] & parents[v]:
            if b != u and (b in parents[u] or b in children[u] or b in und[u]):
                return True
    return False


_RULES = {1: _r1, 2: _r2, 3: _r3, 4: _r4}


def meek_closure(g: Pdag, rules=frozenset({1, 2, 3, 4})) -> Pdag:
    """Close g under the selected Meek orientation rules.

    Only undirected edges become directed; adjacencies never change. Rules are
    applied in ascending number and restart from the lowest after each
    orientation, so the result is deterministic and idempotent.
    """
    rules = sorted(set(rules))
    if any(r not in _RULES for r in rules):
        raise GraphError("rules must be a subset of {1, 2, 3, 4}")
    parents, children, und = _closure_state(g)
    und_pairs = set(g.undirected)
    changed = True
    while changed:
        changed = False
        for r in rules:
            match = None
            for a, b in sorted(und_pairs):
                if _RULES[r](a, b, parents, children, und):
                    match = (a, b)
                    break
                if _RULES[r](b, a, parents, children, und):
                    match = (b, a)
                    break
            if match is not None:
                u, v = match
                und_pairs.discard(_norm(u, v))
                und[u].discard(v)
                und[v].discard(u)
                parents[v].add(u)
                children[u].add(v)
                changed = True
                break
    directed = {(a, b) for a in range(g.d) for b in children[a]}
    return g.replace(directed=directed, undirected=und_pairs)


def restrict(g: Pdag, k: TieredKnowledge) -> Pdag:
    """Orient every undirected cross-tier edge from the earlier tier to the
    later one. Directed edges must already respect k."""
    for a, b in g.directed:
        if k.forbids(a, b):
            lab = g.labels or _auto_labels(g.d)
            raise GraphError("directed edge %s -> %s contradicts the tiers"
                             % (lab[a], lab[b]))
    directed = set(g.directed)
    undirected = set()
    for a, b in g.undirected:
        if k.tau[a] < k.tau[b]:
            directed.add((a, b))
        elif k.tau[a] > k.tau[b]:
            directed.add((b, a))
        else:
            undirected.add((a, b))
    return g.replace(directed=directed, undirected=undirected)


# ------------------------------------------------------------- DAG -> CPDAG

def _order_edges(g):
    rank = {v: r for r, v in enumerate(topological_order(g))}
    ordered = []
    for y in sorted(range(g.d), key=lambda v: rank[v]):
        for x in sorted(g.parents(y), key=lambda v: -rank[v]):
            ordered.append((x, y))
    return ordered


def dag_to_cpdag(g: Pdag) -> Pdag:
    """Completed PDAG of the Markov equivalence class of a DAG.

    Compelled-edge labeling over a topological edge ordering: walk the edges
    in order and classify each as compelled or reversible from the labels of
    earlier edges and the local parent sets.
    """
    if not is_dag(g):
        raise GraphError("dag_to_cpdag requires a DAG")
    order = _order_edges(g)
    pos = {e: i for i, e in enumerate(order)}
    label = {e: None for e in order}

    def into(y):
        return [(x, y) for x in g.parents(y)]

    for e in order:
        if label[e] is not None:
            continue
        x, y = e
        resolved = False
        for w in sorted(g.parents(x)):
            if label.get((w, x)) != "C":
                continue
            if w not in g.parents(y):
                for f in into(y):
                    if label[f] is None:
                        label[f] = "C"
                resolved = True
                break
            label[(w, y)] = "C"
        if resolved:
            continue
        if any(z != x and z not in g.parents(x) for z in g.parents(y)):
            mark = "C"
        else:
            mark = "R"
        for f in into(y):
            if label[f] is None:
                label[f] = mark

    directed = {e for e in order if label[e] == "C"}
    undirected = {_norm(*e) for e in order if label[e] == "R"}
    return g.replace(directed=directed, undirected=undirected)


# ------------------------------------------------------- consistent extension

def consistent_extension(g: Pdag, k: TieredKnowledge | None = None) -> Pdag:
    """A DAG with the same skeleton and v-structures as g that keeps all of
    g's directed edges, and encodes k when k is given.

    Deterministic: undirected edges are oriented depth-first in lexicographic
    order, trying (min -> max) before (max -> min), backtracking on cycles or
    new v-structures. Raises GraphError("no consistent extension") or
    GraphError("no k-encoding extension").
    """
    base_dir = set(g.directed)
    if _has_cycle(base_dir, g.d):
        raise GraphError("no consistent extension")
    if not g.undirected:
        if k is not None and any(k.forbids(a, b) for a, b in base_dir):
            raise GraphError("no k-encoding extension")
        return g
    base_v = g.v_structures()
    adj = [set(g.adjacent(i)) for i in range(g.d)]
    und_list = sorted(g.undirected)
    cands = []
    for i, j in und_list:
        opts = [(i, j), (j, i)]
        if k is not None:
            opts = [(a, b) for a, b in opts if not k.forbids(a, b)]
        cands.append(opts)

    parents = [set(g.parents(i)) for i in range(g.d)]
    children = [set(g.children(i)) for i in range(g.d)]

    def reaches(src, dst):
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

    def new_collider(a, b):
        for c in parents[b]:
            if c != a and c not in adj[a]:
                if (_norm(a, c)[0], b, _norm(a, c)[1]) not in base_v:
                    return True
        return False

    def dfs(idx):
        if idx == len(und_list):
            return True
        for a, b in cands[idx]:
            if reaches(b, a) or new_collider(a, b):
                continue
            parents[b].add(a)
            children[a].add(b)
            if dfs(idx + 1):
                return True
            parents[b].discard(a)
            children[a].discard(b)
        return False

    if dfs(0):
        directed = {(a, b) for a in range(g.d) for b in children[a]}
        return g.replace(directed=directed, undirected=frozenset())
    if k is not None:
        try:
            consistent_extension(g, None)
        except GraphError:
            raise GraphError("no consistent extension")
        raise GraphError("no k-encoding extension")
    raise GraphError("no consistent extension")


def _has_cycle(directed, d):
    children = [[] for _ in range(d)]
    indeg = [0] * d
    for a, b in directed:
        children[a].append(b)
        indeg[b] += 1
    queue = [i for i in range(d) if indeg[i] == 0]
    seen = 0
    while queue:
        v = queue.pop()
        seen += 1
        for c in children[v]:
            indeg[c] -= 1
            if indeg[c] == 0:
                queue.append(c)
    return seen != d


def in_agreement(g: Pdag, k: TieredKnowledge) -> bool:
    """Whether g admits a consistent extension that encodes k."""
    try:
        consistent_extension(g, k)
    except GraphError:
        return False
    return True


def tiered_mpdag_of(g: Pdag, k: TieredKnowledge) -> Pdag:
    """Tiered MPDAG of the restricted equivalence class of a DAG encoding k:
    completed PDAG, then tier restriction, then Meek rule 1 closure."""
    if not encodes(g, k):
        raise GraphError("tiered_mpdag_of requires a DAG that encodes k")
    return meek_closure(restrict(dag_to_cpdag(g), k), rules={1})
