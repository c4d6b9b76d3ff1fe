"""Finite multigraphs and the structural diagnostics used throughout edgeforge.

Graphs may carry loops and parallel edges.  A loop ``(v, v)`` is listed once
in the adjacency list of ``v`` but contributes 2 to ``deg(v)``, so that the
configuration model produces honestly d-regular multigraphs.  The adjacency
matrix follows the same convention (a loop adds 2 to the diagonal), hence
its row sums equal the degrees.
"""

from __future__ import annotations

import hashlib
import io
import math
import os
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import InputError

__all__ = [
    "MultiGraph",
    "BfsBall",
    "from_edge_list",
    "empty_graph",
    "cycle_graph",
    "complete_graph",
    "path_graph",
    "girth",
    "bfs_ball",
    "ball_vertices",
    "is_tangle_free",
    "distance",
    "delete_vertices",
    "disjoint_union",
    "adjacency_matrix",
    "read_edge_list",
    "write_edge_list",
    "format_edge_list",
    "parse_edge_list",
]

INF = math.inf
HEADER = "d-regular-multigraph"


@dataclass(frozen=True, eq=False)
class MultiGraph:
    """Immutable multigraph on the vertex set ``{0, ..., n-1}``.

    Parameters
    ----------
    n : int
        Number of vertices.
    edges : ndarray of shape (m, 2)
        Undirected edges stored with ``u <= v``.  Row ``e`` is edge id ``e``;
        repeated rows are parallel edges and rows with ``u == v`` are loops.

    Notes
    -----
    Directed edge ``2e`` is ``(u, v)`` and ``2e + 1`` is ``(v, u)`` for edge
    ``e = (u, v)``.  Reversal is therefore ``x ^ 1``; a loop yields two
    distinct orientations which are reverses of each other.
    """

    n: int
    edges: np.ndarray

    def __post_init__(self):
        self.edges.setflags(write=False)

    # ------------------------------------------------------------------ sizes
    @property
    def vertex_count(self) -> int:
        return self.n

    @property
    def edge_count(self) -> int:
        return int(self.edges.shape[0])

    @cached_property
    def degrees(self) -> np.ndarray:
        """Degree vector; loops count twice."""
        deg = np.bincount(self.edges[:, 0], minlength=self.n)
        deg += np.bincount(self.edges[:, 1], minlength=self.n)
        deg.setflags(write=False)
        return deg

    @property
    def max_degree(self) -> int:
        return int(self.degrees.max()) if self.n else 0

    # -------------------------------------------------------------- adjacency
    @cached_property
    def csr(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Adjacency in compressed form ``(indptr, neighbors, edge_ids)``.

        Loops appear once per loop; parallel edges appear once per copy.
        """
        u, v = self.edges[:, 0], self.edges[:, 1]
        ids = np.arange(self.edge_count)
        nonloop = u != v
        src = np.concatenate([u, v[nonloop]])
        dst = np.concatenate([v, u[nonloop]])
        eid = np.concatenate([ids, ids[nonloop]])
        order = np.lexsort((eid, src))
        counts = np.bincount(src, minlength=self.n)
        indptr = np.zeros(self.n + 1, dtype=np.int64)
        np.cumsum(counts, out=indptr[1:])
        out = (indptr, dst[order].astype(np.int64), eid[order].astype(np.int64))
        for arr in out:
            arr.setflags(write=False)
        return out

    @cached_property
    def adjacency(self) -> list[list[int]]:
        """Per-vertex neighbor lists (Python lists, for traversal code)."""
        indptr, nbrs, _ = self.csr
        flat = nbrs.tolist()
        ptr = indptr.tolist()
        return [flat[ptr[i]:ptr[i + 1]] for i in range(self.n)]

    def neighbors(self, v: int) -> list[int]:
        return self.adjacency[v]

    @cached_property
    def directed(self) -> tuple[np.ndarray, np.ndarray]:
        """Tail and head arrays of the ``2m`` directed edges."""
        tail = np.empty(2 * self.edge_count, dtype=np.int64)
        head = np.empty(2 * self.edge_count, dtype=np.int64)
        tail[0::2], head[0::2] = self.edges[:, 0], self.edges[:, 1]
        tail[1::2], head[1::2] = self.edges[:, 1], self.edges[:, 0]
        tail.setflags(write=False)
        head.setflags(write=False)
        return tail, head

    # ------------------------------------------------------------ identities
    def sorted_edges(self) -> np.ndarray:
        """Edges sorted lexicographically; a canonical multiset encoding."""
        if self.edge_count == 0:
            return self.edges.copy()
        order = np.lexsort((self.edges[:, 1], self.edges[:, 0]))
        return self.edges[order]

    def same_as(self, other: "MultiGraph") -> bool:
        """Equality of vertex count and edge multiset."""
        return self.n == other.n and np.array_equal(self.sorted_edges(), other.sorted_edges())

    def fingerprint(self) -> str:
        """SHA-256 of the canonical edge-list text."""
        return hashlib.sha256(format_edge_list(self).encode()).hexdigest()

    def is_simple(self) -> bool:
        if self.edge_count == 0:
            return True
        if np.any(self.edges[:, 0] == self.edges[:, 1]):
            return False
        s = self.sorted_edges()
        return not np.any(np.all(s[1:] == s[:-1], axis=1))

    def is_regular(self, d: int) -> bool:
        return bool(np.all(self.degrees == d))

    def check_invariants(self) -> None:
        """Assert the degree-sum and adjacency-symmetry invariants."""
        assert int(self.degrees.sum()) == 2 * self.edge_count
        indptr, nbrs, _ = self.csr
        src = np.repeat(np.arange(self.n), np.diff(indptr))
        fwd = src.astype(np.int64) * max(self.n, 1) + nbrs
        bwd = nbrs * max(self.n, 1) + src
        assert np.array_equal(np.sort(fwd), np.sort(bwd))

    def __repr__(self) -> str:
        return f"MultiGraph(n={self.n}, m={self.edge_count})"


@dataclass(frozen=True)
class BfsBall:
    """Metric ball ``B_r(S, G)`` with its induced edge multiset."""

    center_set: frozenset
    radius: int
    vertices: frozenset
    edges: tuple
    distance_map: dict
    components: int

    @property
    def excess(self) -> int:
        """Number of independent cycles: ``|E| - |V| + components``."""
        return len(self.edges) - len(self.vertices) + self.components

    @property
    def is_tree(self) -> bool:
        return self.excess == 0 and self.components == 1


# ---------------------------------------------------------------- builders
def _as_edge_array(edges) -> np.ndarray:
    arr = np.asarray(edges, dtype=np.int64)
    if arr.size == 0:
        return np.zeros((0, 2), dtype=np.int64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise InputError("edges must be a sequence of (u, v) pairs")
    return arr


def from_edge_list(n: int, edges: Iterable[Sequence[int]] | np.ndarray) -> MultiGraph:
    """Build a :class:`MultiGraph` from ``n`` and a multiset of edges.

    Parameters
    ----------
    n : int
        Number of vertices.
    edges : array_like of shape (m, 2)
        Endpoint pairs; orientation is irrelevant.

    Raises
    ------
    InputError
        If an endpoint lies outside ``[0, n)``.
    """
    n = int(n)
    if n < 0:
        raise InputError("vertex count must be non-negative")
    arr = _as_edge_array(list(edges) if not isinstance(edges, np.ndarray) else edges)
    if arr.size and (arr.min() < 0 or arr.max() >= n):
        raise InputError(f"vertex id out of range for n={n}")
    arr = np.sort(arr, axis=1)
    return MultiGraph(n, np.ascontiguousarray(arr))


def empty_graph(n: int) -> MultiGraph:
    return from_edge_list(n, np.zeros((0, 2), dtype=np.int64))


def cycle_graph(n: int) -> MultiGraph:
    idx = np.arange(n)
    return from_edge_list(n, np.column_stack([idx, (idx + 1) % n]))


def path_graph(n: int) -> MultiGraph:
    idx = np.arange(max(n - 1, 0))
    return from_edge_list(n, np.column_stack([idx, idx + 1]))


def complete_graph(n: int) -> MultiGraph:
    iu = np.triu_indices(n, 1)
    return from_edge_list(n, np.column_stack(iu))


def disjoint_union(graphs: Sequence[MultiGraph]) -> tuple[MultiGraph, np.ndarray]:
    """Disjoint union; also returns the vertex offset of each part."""
    offsets = np.zeros(len(graphs) + 1, dtype=np.int64)
    for i, g in enumerate(graphs):
        offsets[i + 1] = offsets[i] + g.n
    parts = [g.edges + off for g, off in zip(graphs, offsets[:-1])]
    edges = np.concatenate(parts) if parts else np.zeros((0, 2), dtype=np.int64)
    return MultiGraph(int(offsets[-1]), np.ascontiguousarray(edges)), offsets[:-1]


def adjacency_matrix(g: MultiGraph, dtype=np.float64) -> sp.csr_matrix:
    """Sparse adjacency matrix; multiedges add up and a loop adds 2."""
    u, v = g.edges[:, 0], g.edges[:, 1]
    rows = np.concatenate([u, v])
    cols = np.concatenate([v, u])
    data = np.ones(rows.shape[0], dtype=dtype)
    a = sp.coo_matrix((data, (rows, cols)), shape=(g.n, g.n)).tocsr()
    a.sum_duplicates()
    return a


# --------------------------------------------------------------- traversal
def girth(g: MultiGraph, cutoff: float = INF) -> float:
    """Length of the shortest cycle, ``inf`` for forests.

    Loops have length 1 and a pair of parallel edges has length 2.  Longer
    cycles are found by a breadth-first search from every vertex, stopped
    as soon as the search depth can no longer improve the current best.
    With a finite ``cutoff`` only cycles shorter than ``cutoff`` are looked
    for, and ``cutoff`` is returned when there are none.
    """
    if g.edge_count == 0:
        return INF
    if np.any(g.edges[:, 0] == g.edges[:, 1]):
        return 1
    if not g.is_simple():
        return 2
    adj = g.adjacency
    best = cutoff
    dist = [-1] * g.n
    parent = [-1] * g.n
    for root in range(g.n):
        if len(adj[root]) < 2:
            continue
        touched = [root]
        dist[root] = 0
        queue = deque([root])
        while queue:
            x = queue.popleft()
            dx = dist[x]
            if 2 * dx + 1 >= best:
                break
            for y in adj[x]:
                if dist[y] < 0:
                    dist[y] = dx + 1
                    parent[y] = x
                    touched.append(y)
                    queue.append(y)
                elif y != parent[x]:
                    best = min(best, dx + dist[y] + 1)
        for x in touched:
            dist[x] = -1
            parent[x] = -1
        if best == 3:
            break
    return best


def _bfs_distances(g: MultiGraph, centers: Iterable[int], r: float) -> dict:
    adj = g.adjacency
    dist = {}
    queue = deque()
    for c in centers:
        c = int(c)
        if c not in dist:
            dist[c] = 0
            queue.append(c)
    while queue:
        x = queue.popleft()
        dx = dist[x]
        if dx >= r:
            continue
        for y in adj[x]:
            if y not in dist:
                dist[y] = dx + 1
                queue.append(y)
    return dist


def ball_vertices(g: MultiGraph, centers: Iterable[int], r: float) -> dict:
    """Distance map of the radius-``r`` ball around ``centers``."""
    return _bfs_distances(g, centers, r)


def _component_count(vertices: Iterable[int], pairs: Iterable[tuple[int, int]]) -> int:
    parent = {v: v for v in vertices}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    comps = len(parent)
    for a, b in pairs:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
            comps -= 1
    return comps


def bfs_ball(g: MultiGraph, centers: Iterable[int], r: int) -> BfsBall:
    """The ball ``B_r(S, G)``: vertices within distance ``r`` and induced edges.

    Parameters
    ----------
    g : MultiGraph
    centers : iterable of int
        Non-empty center set ``S``.
    r : int
        Radius, ``r >= 0``.
    """
    centers = frozenset(int(c) for c in centers)
    if not centers:
        raise InputError("bfs_ball needs at least one center")
    if r < 0:
        raise InputError("radius must be non-negative")
    dist = _bfs_distances(g, centers, r)
    indptr, nbrs, eids = g.csr
    edge_ids = set()
    for x in dist:
        for k in range(indptr[x], indptr[x + 1]):
            if int(nbrs[k]) in dist:
                edge_ids.add(int(eids[k]))
    edge_ids = tuple(sorted(edge_ids))
    pairs = [tuple(g.edges[e]) for e in edge_ids]
    comps = _component_count(dist.keys(), pairs)
    return BfsBall(centers, int(r), frozenset(dist), edge_ids, dist, comps)


def is_tangle_free(g: MultiGraph, r: int) -> tuple[bool, list[int]]:
    """Check that every radius-``r`` ball contains at most one cycle.

    Returns
    -------
    ok : bool
    offending : list of int
        Centers whose ball has excess at least 2.
    """
    bad = []
    for v in range(g.n):
        if bfs_ball(g, [v], r).excess > 1:
            bad.append(v)
    return not bad, bad


def distance(g: MultiGraph, a: Iterable[int], b: Iterable[int]) -> float:
    """Hop distance between two vertex sets (``inf`` if disconnected)."""
    a = {int(x) for x in a}
    b = {int(x) for x in b}
    if not a or not b:
        raise InputError("distance needs non-empty vertex sets")
    if a & b:
        return 0
    adj = g.adjacency
    seen = set(a)
    frontier = list(a)
    depth = 0
    while frontier:
        depth += 1
        nxt = []
        for x in frontier:
            for y in adj[x]:
                if y in b:
                    return depth
                if y not in seen:
                    seen.add(y)
                    nxt.append(y)
        frontier = nxt
    return INF


def delete_vertices(g: MultiGraph, S: Iterable[int]) -> tuple[MultiGraph, np.ndarray]:
    """Induced subgraph on the complement of ``S``.

    Returns
    -------
    h : MultiGraph
        Surviving vertices relabeled densely in increasing order.
    relabel : ndarray of int
        ``relabel[old]`` is the new id, or ``-1`` for deleted vertices.
    """
    keep = np.ones(g.n, dtype=bool)
    S = np.fromiter((int(s) for s in S), dtype=np.int64)
    if S.size and (S.min() < 0 or S.max() >= g.n):
        raise InputError("deleted vertex id out of range")
    keep[S] = False
    relabel = np.full(g.n, -1, dtype=np.int64)
    relabel[keep] = np.arange(int(keep.sum()))
    mask = keep[g.edges[:, 0]] & keep[g.edges[:, 1]]
    new_edges = relabel[g.edges[mask]]
    return MultiGraph(int(keep.sum()), np.ascontiguousarray(np.sort(new_edges, axis=1))), relabel


# ---------------------------------------------------------------- file I/O
def format_edge_list(g: MultiGraph) -> str:
    """Canonical text encoding: header, then sorted ``u v`` lines."""
    buf = io.StringIO()
    buf.write(f"{HEADER} {g.n} {g.edge_count}\n")
    s = g.sorted_edges()
    if s.shape[0]:
        np.savetxt(buf, s, fmt="%d")
    return buf.getvalue()


def parse_edge_list(text: str) -> MultiGraph:
    """Inverse of :func:`format_edge_list`; edge lines may be in any order."""
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise InputError("empty edge-list file")
    head = lines[0].split()
    if len(head) != 3 or head[0] != HEADER:
        raise InputError(f"bad header {lines[0]!r}; expected '{HEADER} <n> <m>'")
    try:
        n, m = int(head[1]), int(head[2])
    except ValueError as exc:
        raise InputError(f"bad header {lines[0]!r}") from exc
    body = lines[1:]
    if len(body) != m:
        raise InputError(f"header announces {m} edges but file has {len(body)}")
    if m == 0:
        return empty_graph(n)
    try:
        arr = np.loadtxt(io.StringIO("\n".join(body)), dtype=np.int64, ndmin=2)
    except ValueError as exc:
        raise InputError("edge lines must be two integers") from exc
    if arr.shape[1] != 2:
        raise InputError("edge lines must be two integers")
    return from_edge_list(n, arr)


def write_edge_list(g: MultiGraph, path: str | os.PathLike) -> None:
    with open(path, "w") as fh:
        fh.write(format_edge_list(g))


def read_edge_list(path: str | os.PathLike) -> MultiGraph:
    with open(path) as fh:
        return parse_edge_list(fh.read())
