"""Communication graphs, honest subgraphs and the spanning trees behind the t-vector.

For a spanning tree of the honest subgraph rooted at v1 the vector
t = (t_eta, t_delta) with t_eta = 1/n_H on every vertex and t_e equal to
(vertices below e)/n_H satisfies t_eta + K t_delta = e_{v1}, and the DP
analysis needs sum_e t_e^2.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components


class GraphError(ValueError):
    """Invalid graph parameters."""


class NoSpanningTree(GraphError):
    """The honest subgraph is disconnected."""


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def _csr(n: int, edges: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    if len(edges) == 0:
        return np.zeros(n + 1, dtype=np.int64), np.zeros(0, dtype=np.int64)
    src = np.concatenate([edges[:, 0], edges[:, 1]])
    dst = np.concatenate([edges[:, 1], edges[:, 0]])
    order = np.argsort(src * n + dst, kind="stable")
    src, dst = src[order], dst[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
    return indptr, dst.astype(np.int64)


def _canonical_edges(pairs: np.ndarray, n: int) -> np.ndarray:
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if len(pairs) == 0:
        return np.zeros((0, 2), dtype=np.int64)
    if np.any(pairs[:, 0] == pairs[:, 1]):
        raise GraphError("self-loops are not allowed")
    if pairs.min() < 0 or pairs.max() >= n:
        raise GraphError("edge endpoint outside 0..n-1")
    lo = np.minimum(pairs[:, 0], pairs[:, 1])
    hi = np.maximum(pairs[:, 0], pairs[:, 1])
    key = np.unique(lo * n + hi)
    return np.stack([key // n, key % n], axis=1)


@dataclass
class Topology:
    """Undirected simple graph on vertices 0..n-1, stored as sorted edges plus CSR."""

    n: int
    edges: np.ndarray
    indptr: np.ndarray = field(repr=False, default=None)
    indices: np.ndarray = field(repr=False, default=None)

    def __post_init__(self) -> None:
        self.edges = _canonical_edges(self.edges, self.n)
        self.indptr, self.indices = _csr(self.n, self.edges)

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[Tuple[int, int]]) -> "Topology":
        return cls(n, np.array(list(edges), dtype=np.int64).reshape(-1, 2))

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def neighbors(self, u: int) -> np.ndarray:
        return self.indices[self.indptr[u]:self.indptr[u + 1]]

    @property
    def adjacency(self) -> List[List[int]]:
        return [self.neighbors(u).tolist() for u in range(self.n)]

    def has_edge(self, u: int, v: int) -> bool:
        nb = self.neighbors(u)
        i = np.searchsorted(nb, v)
        return bool(i < len(nb) and nb[i] == v)

    def to_text(self) -> str:
        return "".join(f"{u}: {' '.join(map(str, nb))}\n" for u, nb in enumerate(self.adjacency))

    @classmethod
    def from_text(cls, text: str) -> "Topology":
        pairs, n = [], 0
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            head, _, tail = line.partition(":")
            u = int(head)
            n = max(n, u + 1)
            for tok in tail.split():
                v = int(tok)
                n = max(n, v + 1)
                pairs.append((u, v))
        return cls.from_edges(n, pairs)


def complete_graph(n: int) -> Topology:
    iu = np.triu_indices(n, 1)
    return Topology(n, np.stack(iu, axis=1))


def path_graph(n: int) -> Topology:
    a = np.arange(n - 1)
    return Topology(n, np.stack([a, a + 1], axis=1))


def star_graph(n: int) -> Topology:
    return Topology(n, np.stack([np.zeros(n - 1, dtype=np.int64), np.arange(1, n)], axis=1))


def _distinct_peers(n: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """k distinct peers per user, uniformly among the other n-1 users."""
    out = np.empty((n, k), dtype=np.int64)
    todo = np.arange(n)
    for _ in range(64):
        if len(todo) == 0:
            break
        draw = rng.integers(0, n - 1, size=(len(todo), k))
        draw += draw >= todo[:, None]
        s = np.sort(draw, axis=1)
        ok = np.all(s[:, 1:] != s[:, :-1], axis=1) if k > 1 else np.ones(len(todo), bool)
        out[todo[ok]] = draw[ok]
        todo = todo[~ok]
    for u in todo:
        others = np.delete(np.arange(n), u)
        out[u] = rng.choice(others, size=k, replace=False)
    return out


def generate_k_out(n: int, k: int, rng_seed=None) -> Topology:
    """Random k-out graph: {u,v} is an edge iff u picked v or v picked u."""
    if not 1 <= k < n:
        raise GraphError(f"need 1 <= k < n, got k={k}, n={n}")
    rng = _rng(rng_seed)
    peers = _distinct_peers(n, k, rng)
    src = np.repeat(np.arange(n), k)
    return Topology(n, np.stack([src, peers.ravel()], axis=1))


@dataclass
class HonestSubgraph:
    """Subgraph induced by the honest users, relabelled 0..n_H-1.

    honest[i] is the original id of local vertex i.
    """

    n: int
    honest: np.ndarray
    graph: Topology
    connected: bool

    @property
    def n_H(self) -> int:
        return len(self.honest)

    @property
    def rho(self) -> float:
        return self.n_H / self.n

    @property
    def edges(self) -> np.ndarray:
        return self.honest[self.graph.edges]


def _connected(g: Topology) -> bool:
    if g.n <= 1:
        return True
    m = len(g.edges)
    A = coo_matrix((np.ones(m), (g.edges[:, 0], g.edges[:, 1])), shape=(g.n, g.n))
    ncomp, _ = connected_components(A, directed=False)
    return ncomp == 1


def induce(g: Topology, honest: Sequence[int]) -> HonestSubgraph:
    """Subgraph induced by an explicit honest set."""
    honest = np.unique(np.asarray(honest, dtype=np.int64))
    if len(honest) == 0:
        raise GraphError("empty honest set")
    if len(honest) == g.n:
        return HonestSubgraph(g.n, honest, g, _connected(g))
    local = np.full(g.n, -1, dtype=np.int64)
    local[honest] = np.arange(len(honest))
    e = g.edges
    keep = (local[e[:, 0]] >= 0) & (local[e[:, 1]] >= 0) if len(e) else np.zeros(0, bool)
    sub = Topology(len(honest), local[e[keep]])
    return HonestSubgraph(g.n, honest, sub, _connected(sub))


def induce_honest(g: Topology, rho: float, rng_seed=None) -> HonestSubgraph:
    """Sample floor(rho n) honest users uniformly and induce their subgraph."""
    if not 0 < rho <= 1:
        raise GraphError("rho must lie in (0, 1]")
    n_h = int(np.floor(rho * g.n + 1e-9))
    if n_h < 1:
        raise GraphError("empty honest set")
    if n_h == g.n:
        return induce(g, np.arange(g.n))
    rng = _rng(rng_seed)
    return induce(g, rng.choice(g.n, size=n_h, replace=False))


# ---------------------------------------------------------------------------
# spanning trees and t-vectors

@dataclass
class SpanningTreeT:
    """Rooted spanning tree over 0..n_H-1 with its t-vector.

    parent[root] = -1.  size[u] counts the vertices in the subtree of u, so
    the edge (parent[u], u) carries t_e = size[u]/n_H.
    """

    root: int
    parent: np.ndarray
    size: np.ndarray

    @property
    def n_H(self) -> int:
        return len(self.parent)

    @property
    def t_eta(self) -> Fraction:
        return Fraction(1, self.n_H)

    @property
    def tree_edges(self) -> List[Tuple[int, int]]:
        return [(int(self.parent[u]), u) for u in range(self.n_H) if self.parent[u] >= 0]

    @property
    def t_delta(self) -> Dict[Tuple[int, int], Fraction]:
        n = self.n_H
        return {(p, u): Fraction(int(self.size[u]), n) for p, u in self.tree_edges}

    @property
    def norm_sq_exact(self) -> Fraction:
        s = self.size[self.parent >= 0].astype(object)
        return Fraction(int(sum(int(x) * int(x) for x in s)), self.n_H ** 2)

    @property
    def norm_sq_delta(self) -> float:
        s = self.size[self.parent >= 0].astype(np.float64)
        return float(np.dot(s, s)) / float(self.n_H) ** 2

    def flow_balance(self) -> Dict[int, Fraction]:
        """Exact (t_eta + K t_delta)_u for every vertex; should equal e_root."""
        n = self.n_H
        out = {u: Fraction(1, n) for u in range(n)}
        for (p, u), t in self.t_delta.items():
            # oriented root -> leaves: the edge sends t out of p and into u
            out[p] += t
            out[u] -= t
        return out

    def flow_balance_ok(self) -> bool:
        fb = self.flow_balance()
        return all(v == (1 if u == self.root else 0) for u, v in fb.items())

    def is_spanning_tree(self) -> bool:
        n = self.n_H
        if int(np.sum(self.parent < 0)) != 1 or self.parent[self.root] != -1:
            return False
        # every vertex reaches the root without cycles
        depth = np.full(n, -1)
        depth[self.root] = 0
        for u in range(n):
            path, v = [], u
            while depth[v] < 0:
                path.append(v)
                v = self.parent[v]
                if v < 0 or len(path) > n:
                    return False
            d = depth[v]
            for w in reversed(path):
                d += 1
                depth[w] = d
        return True


def _sizes(parent: np.ndarray, order: np.ndarray) -> np.ndarray:
    size = np.ones(len(parent), dtype=np.int64)
    for u in order[::-1]:
        p = parent[u]
        if p >= 0:
            size[p] += size[u]
    return size


def tree_from_parent(root: int, parent: Sequence[int]) -> SpanningTreeT:
    parent = np.asarray(parent, dtype=np.int64)
    n = len(parent)
    children: List[List[int]] = [[] for _ in range(n)]
    for u in range(n):
        if parent[u] >= 0:
            children[parent[u]].append(u)
    order, stack = [], [root]
    while stack:
        u = stack.pop()
        order.append(u)
        stack.extend(children[u])
    if len(order) != n:
        raise NoSpanningTree("parent map does not form a spanning tree")
    return SpanningTreeT(root, parent, _sizes(parent, np.array(order)))


def path_tree_t(n_H: int) -> SpanningTreeT:
    """Path v1 - v2 - ... rooted at v1: t on edge i is (n_H - i)/n_H."""
    if n_H < 2:
        raise GraphError("n_H must be at least 2")
    parent = np.arange(-1, n_H - 1, dtype=np.int64)
    return SpanningTreeT(0, parent, np.arange(n_H, 0, -1, dtype=np.int64))


def star_tree_t(n_H: int) -> SpanningTreeT:
    """Star centred on v1: every edge carries 1/n_H."""
    if n_H < 2:
        raise GraphError("n_H must be at least 2")
    parent = np.zeros(n_H, dtype=np.int64)
    parent[0] = -1
    size = np.ones(n_H, dtype=np.int64)
    size[0] = n_H
    return SpanningTreeT(0, parent, size)


def path_norm_sq(n_H: int) -> Fraction:
    return Fraction((n_H - 1) * (2 * n_H - 1), 6 * n_H)


def star_norm_sq(n_H: int) -> Fraction:
    return Fraction(n_H - 1, n_H * n_H)


def embed_spanning_tree(gh, root: int = 0) -> SpanningTreeT:
    """Greedy breadth-first spanning tree.

    Levels are built one at a time.  Within a level, frontier vertices with
    more unvisited neighbours expand first (ties: smaller id) and claim all
    their unvisited neighbours, which pushes branching towards the root.
    """
    g = gh.graph if isinstance(gh, HonestSubgraph) else gh
    n = g.n
    if not 0 <= root < n:
        raise GraphError("root outside the graph")
    indptr, indices = g.indptr, g.indices
    deg = np.diff(indptr)
    parent = np.full(n, -1, dtype=np.int64)
    visited = np.zeros(n, dtype=bool)
    visited[root] = True
    frontier = np.array([root], dtype=np.int64)
    order = [frontier]
    while len(frontier):
        starts, counts = indptr[frontier], deg[frontier]
        total = int(counts.sum())
        if total == 0:
            break
        owner = np.repeat(np.arange(len(frontier)), counts)
        offs = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
        nb = indices[np.repeat(starts, counts) + offs]
        fresh = ~visited[nb]
        resid = np.bincount(owner[fresh], minlength=len(frontier))
        rank = np.empty(len(frontier), dtype=np.int64)
        rank[np.lexsort((frontier, -resid))] = np.arange(len(frontier))
        cand_nb, cand_rank = nb[fresh], rank[owner[fresh]]
        if len(cand_nb) == 0:
            break
        o = np.lexsort((cand_nb, cand_rank))
        cand_nb, cand_rank = cand_nb[o], cand_rank[o]
        new, first = np.unique(cand_nb, return_index=True)
        by_rank = frontier[np.argsort(rank)]
        parent[new] = by_rank[cand_rank[first]]
        visited[new] = True
        frontier = new
        order.append(new)
    if not visited.all():
        raise NoSpanningTree("honest subgraph is disconnected")
    size = np.ones(n, dtype=np.int64)
    for lvl in reversed(order[1:]):
        np.add.at(size, parent[lvl], size[lvl])
    return SpanningTreeT(root, parent, size)


def all_spanning_tree_norms(n_H: int, root: int = 0) -> List[Fraction]:
    """Exact norms of every spanning tree of K_n rooted at `root` (Pruefer enumeration; n_H <= 7)."""
    if n_H > 8:
        raise GraphError("enumeration only for small n_H")
    norms = []
    for seq in itertools.product(range(n_H), repeat=max(0, n_H - 2)):
        edges = _pruefer_decode(list(seq), n_H)
        adj: List[List[int]] = [[] for _ in range(n_H)]
        for a, b in edges:
            adj[a].append(b)
            adj[b].append(a)
        parent = [-1] * n_H
        seen, stack = {root}, [root]
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    parent[v] = u
                    stack.append(v)
        norms.append(tree_from_parent(root, parent).norm_sq_exact)
    return norms


def _pruefer_decode(seq: List[int], n: int) -> List[Tuple[int, int]]:
    degree = [1] * n
    for x in seq:
        degree[x] += 1
    edges = []
    for x in seq:
        leaf = min(i for i in range(n) if degree[i] == 1)
        edges.append((leaf, x))
        degree[leaf] -= 1
        degree[x] -= 1
    u, v = [i for i in range(n) if degree[i] == 1]
    edges.append((u, v))
    return edges
