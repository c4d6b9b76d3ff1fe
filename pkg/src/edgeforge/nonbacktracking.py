"""Nonbacktracking operator, its Perron value, traces, and cycle censuses.

Directed edge ``x`` of a :class:`~edgeforge.graph.MultiGraph` runs from
``tail[x]`` to ``head[x]`` and its reversal is ``x ^ 1``.  The operator is
stored in the successor orientation

    (B v)(e) = sum of v(f) over f with tail(f) = head(e), f != reverse(e),

so that ``S_theta psi`` (see :func:`s_theta_map`) is a right eigenvector.
This is the transpose of the predecessor convention; both have the same
spectrum and the same traces.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import NumericError, ParameterError, ResourceError
from .graph import MultiGraph

__all__ = [
    "NbOperator",
    "CycleCensus",
    "PerronResult",
    "build_nb_operator",
    "nb_spectral_radius",
    "nb_trace",
    "ihara_map",
    "ihara_unmap",
    "s_theta_map",
    "count_k_cycles",
    "edge_intersection_census",
    "DEFAULT_WORK_CAP",
]

DEFAULT_WORK_CAP = 200_000_000


@dataclass(frozen=True, eq=False)
class NbOperator:
    """Sparse nonbacktracking operator on (a subset of) the directed edges.

    Attributes
    ----------
    tail, head : ndarray
        Endpoints of the operator's directed edges.
    rev : ndarray
        Index of the reversed edge within this operator.
    edge_id : ndarray
        Underlying undirected edge id in the source graph.
    matrix : scipy.sparse.csr_matrix
        ``matrix[e, f] = 1`` when ``f`` follows ``e`` without backtracking.
    restricted : bool
        Whether only edges inside a vertex set were kept.
    """

    tail: np.ndarray
    head: np.ndarray
    rev: np.ndarray
    edge_id: np.ndarray
    matrix: sp.csr_matrix
    n_vertices: int
    restricted: bool = False

    @property
    def size(self) -> int:
        return int(self.tail.shape[0])

    def __matmul__(self, x):
        return self.matrix @ x

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()


def _successor_pairs(tail: np.ndarray, head: np.ndarray, rev: np.ndarray, n: int):
    """Row/column index arrays of all nonbacktracking transitions ``e -> f``."""
    order = np.argsort(tail, kind="stable")
    outdeg = np.bincount(tail, minlength=n)
    ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(outdeg, out=ptr[1:])
    counts = outdeg[head]
    rows = np.repeat(np.arange(tail.shape[0], dtype=np.int64), counts)
    starts = np.repeat(ptr[head] - np.concatenate([[0], np.cumsum(counts)[:-1]]), counts)
    cols = order[starts + np.arange(rows.shape[0], dtype=np.int64)]
    keep = cols != rev[rows]
    return rows[keep], cols[keep]


def build_nb_operator(g: MultiGraph, restrict_to=None) -> NbOperator:
    """Nonbacktracking operator of ``g``, optionally restricted to a vertex set.

    Parameters
    ----------
    g : MultiGraph
    restrict_to : iterable of int, optional
        Keep only directed edges with both endpoints in this set (this is
        ``B_0`` when the set is ``V_0``).
    """
    tail, head = g.directed
    idx = np.arange(tail.shape[0], dtype=np.int64)
    restricted = restrict_to is not None
    if restricted:
        inside = np.zeros(g.n, dtype=bool)
        members = np.fromiter((int(v) for v in restrict_to), dtype=np.int64)
        inside[members] = True
        idx = idx[inside[tail] & inside[head]]
    new_index = np.full(tail.shape[0], -1, dtype=np.int64)
    new_index[idx] = np.arange(idx.shape[0])
    t, h = tail[idx], head[idx]
    rev = new_index[idx ^ 1]
    rows, cols = _successor_pairs(t, h, rev, g.n)
    data = np.ones(rows.shape[0], dtype=np.float64)
    mat = sp.csr_matrix((data, (rows, cols)), shape=(idx.shape[0], idx.shape[0]))
    mat.sum_duplicates()
    return NbOperator(t, h, rev, idx >> 1, mat, g.n, restricted)


# ------------------------------------------------------------- Perron value
@dataclass
class PerronResult:
    """Outcome of :func:`nb_spectral_radius`."""

    rho: float
    iterations: int
    converged: bool
    core_size: int
    vector: np.ndarray | None = None


def _has_cycle(b: NbOperator) -> bool:
    eids = np.unique(b.edge_id)
    if eids.size == 0:
        return False
    verts = np.unique(np.concatenate([b.tail, b.head]))
    remap = np.searchsorted(verts, np.concatenate([b.tail, b.head]))
    m = b.size // 2
    t, h = remap[: b.size], remap[b.size:]
    adj = sp.coo_matrix((np.ones(b.size), (t, h)), shape=(verts.size, verts.size))
    ncomp, _ = connected_components(adj, directed=False)
    return m > verts.size - ncomp


def _prune_transient(mat: sp.csr_matrix) -> np.ndarray:
    """Indices surviving repeated removal of sources and sinks.

    Removing a directed edge that no walk can enter, or from which no walk
    can continue, leaves the nonzero spectrum unchanged.
    """
    alive = np.ones(mat.shape[0], dtype=bool)
    csc = mat.tocsc()
    while True:
        a = alive.astype(np.float64)
        out_deg = mat @ a
        in_deg = csc.T @ a
        new = alive & (out_deg > 0) & (in_deg > 0)
        if new.sum() == alive.sum():
            return np.flatnonzero(alive)
        alive = new


def nb_spectral_radius(b: NbOperator, tol: float = 1e-10, max_iter: int = 100_000,
                       seed: int = 0, shift: float = 1.0) -> PerronResult:
    """Perron value of a nonnegative nonbacktracking operator by power iteration.

    The iteration runs on ``B + shift*I`` restricted to the recurrent part of
    the directed-edge graph, which removes periodicity, and stops when two
    successive Rayleigh quotients differ by less than ``tol``.

    Raises
    ------
    NumericError
        If ``max_iter`` iterations do not converge; ``partial`` holds the
        last :class:`PerronResult`.
    """
    if b.size == 0 or not _has_cycle(b):
        return PerronResult(0.0, 0, True, 0)
    keep = _prune_transient(b.matrix)
    core = b.matrix[keep][:, keep].tocsr()
    rng = np.random.default_rng(seed)
    x = rng.random(keep.size) + 0.5
    x /= np.linalg.norm(x)
    prev = math.inf
    q = 0.0
    for it in range(1, max_iter + 1):
        y = core @ x + shift * x
        q = float(x @ y)
        nrm = np.linalg.norm(y)
        if nrm == 0.0:
            return PerronResult(0.0, it, True, keep.size)
        x = y / nrm
        if abs(q - prev) < tol:
            vec = np.zeros(b.size)
            vec[keep] = x
            return PerronResult(q - shift, it, True, keep.size, vec)
        prev = q
    raise NumericError(f"power iteration did not converge in {max_iter} steps",
                       partial=PerronResult(q - shift, max_iter, False, keep.size))


# ---------------------------------------------------------------- walks
def _walks(b: NbOperator, starts: np.ndarray, k: int, distinct: bool) -> np.ndarray:
    """All nonbacktracking walks ``(x_1, ..., x_k)`` starting at ``starts``.

    With ``distinct=True`` walks reusing an underlying edge are dropped as
    soon as they appear.
    """
    indptr, indices = b.matrix.indptr, b.matrix.indices
    walks = starts.reshape(-1, 1).astype(np.int64)
    for _ in range(k - 1):
        last = walks[:, -1]
        counts = indptr[last + 1] - indptr[last]
        rep = np.repeat(np.arange(walks.shape[0]), counts)
        offs = np.arange(rep.shape[0]) - np.repeat(np.cumsum(counts) - counts, counts)
        nxt = indices[indptr[last][rep] + offs]
        walks = np.column_stack([walks[rep], nxt])
        if distinct:
            eid = b.edge_id[walks]
            ok = np.all(eid[:, :-1] != eid[:, -1:], axis=1)
            walks = walks[ok]
    return walks


def _closes(b: NbOperator, walks: np.ndarray) -> np.ndarray:
    """Mask of walks whose last edge is followed by their first edge."""
    first, last = walks[:, 0], walks[:, -1]
    return (b.head[last] == b.tail[first]) & (b.rev[last] != first)


def _work(b: NbOperator, k: int) -> float:
    rows = np.diff(b.matrix.indptr)
    branching = float(rows.max()) if rows.size else 0.0
    return b.size * max(branching, 1.0) ** max(k - 1, 0)


def _chunks(b: NbOperator, k: int, budget: int = 2_000_000):
    rows = np.diff(b.matrix.indptr)
    branching = max(float(rows.max()) if rows.size else 1.0, 1.0)
    step = max(1, int(budget / branching ** max(k - 1, 0)))
    for s in range(0, b.size, step):
        yield np.arange(s, min(s + step, b.size), dtype=np.int64)


def nb_trace(b: NbOperator, k: int, method: str = "exact-walk", cap: float = DEFAULT_WORK_CAP):
    """``tr(B^k)``: the number of closed nonbacktracking walks of length ``k``.

    Parameters
    ----------
    b : NbOperator
    k : int
        Walk length, ``k >= 1``.
    method : {"exact-walk", "matrix-power"}
        Walk enumeration, or repeated sparse products with exact integer
        arithmetic (falls back to floating point when entries could
        overflow 64 bits).
    cap : float
        Work limit for the enumeration.
    """
    if k < 1:
        raise ParameterError("k must be at least 1")
    if method == "exact-walk":
        if _work(b, k) > cap:
            raise ResourceError(f"walk enumeration needs ~{_work(b, k):.2e} steps (cap {cap:.1e}); "
                                "use method='matrix-power'")
        total = 0
        for starts in _chunks(b, k):
            total += int(np.count_nonzero(_closes(b, _walks(b, starts, k, distinct=False))))
        return total
    if method == "matrix-power":
        rows = np.diff(b.matrix.indptr)
        branching = float(rows.max()) if rows.size else 0.0
        exact = branching <= 1 or k * math.log2(branching) < 62
        dtype = np.int64 if exact else np.float64
        m = b.matrix.astype(dtype)
        p = m.copy()
        for _ in range(k - 1):
            p = (p @ m).tocsr()
        diag = p.diagonal()
        return int(sum(int(v) for v in diag)) if exact else float(diag.sum())
    raise ParameterError(f"unknown method {method!r}")


# ----------------------------------------------------------- Ihara-Bass
def ihara_map(d: int, theta: float) -> float:
    """Adjacency eigenvalue ``theta + (d-1)/theta`` attached to a B-eigenvalue."""
    if theta == 0 or abs(abs(theta) - 1.0) < 1e-15:
        raise ParameterError("theta must differ from 0 and +-1")
    return theta + (d - 1) / theta


def ihara_unmap(d: int, mu: float) -> tuple[float, float]:
    """Both roots of ``theta^2 - mu*theta + (d-1) = 0``, larger modulus first."""
    edge = 2.0 * math.sqrt(d - 1)
    if abs(mu) <= edge:
        raise ParameterError(f"|mu|={abs(mu)} must exceed 2 sqrt(d-1)={edge:.12g}")
    disc = math.sqrt(mu * mu - 4.0 * (d - 1))
    big = 0.5 * (mu + math.copysign(disc, mu))
    return big, (d - 1) / big


def s_theta_map(g: MultiGraph, theta: float, psi) -> np.ndarray:
    """Directed-edge vector ``(S_theta psi)(u, v) = theta psi(v) - psi(u)``.

    Entries follow the directed-edge order of ``g.directed``, which is the
    order used by an unrestricted :func:`build_nb_operator`.
    """
    psi = np.asarray(psi)
    tail, head = g.directed
    return theta * psi[head] - psi[tail]


# ---------------------------------------------------------------- cycles
@dataclass
class CycleCensus:
    """Ordered count of ``k``-cycles.

    Each cycle is an ordered tuple of distinct edges traversed head to tail
    and closing up; rotations and both orientations count separately, so
    a simple ``k``-cycle contributes ``2k``.
    """

    k: int
    ordered_count: int
    expectation_reference: float

    def to_json(self) -> dict:
        return {"k": self.k, "ordered_count": self.ordered_count,
                "expectation_reference": self.expectation_reference,
                "convention": "ordered tuples; rotations and orientations distinct"}


def _cycle_walks(g: MultiGraph, k: int, cap: float):
    if k < 1:
        raise ParameterError("k must be at least 1")
    b = build_nb_operator(g)
    if _work(b, k) > cap:
        raise ResourceError(f"cycle enumeration needs ~{_work(b, k):.2e} steps (cap {cap:.1e})")
    for starts in _chunks(b, k):
        w = _walks(b, starts, k, distinct=True)
        yield b, w[_closes(b, w)]


def count_k_cycles(g: MultiGraph, k: int, cap: float = DEFAULT_WORK_CAP) -> CycleCensus:
    """Exact ordered count of ``k``-cycles by nonbacktracking walk enumeration."""
    total = sum(int(w.shape[0]) for _, w in _cycle_walks(g, k, cap))
    d = max(g.max_degree, 1)
    return CycleCensus(k, total, float((d - 1) ** k))


def edge_intersection_census(g: MultiGraph, k: int, cap: float = 5_000_000) -> dict:
    """Counts ``|U_i|`` of pairs of ``k``-cycles sharing exactly ``i`` edges.

    Pairs are ordered pairs of ordered cycles divided by two.  With this
    convention a single geometric ``k``-cycle gives ``|U_k| = k |U|``.

    Returns
    -------
    dict
        Maps ``i`` in ``1..k`` to the (possibly half-integer) pair count.
    """
    mult = defaultdict(int)
    for b, w in _cycle_walks(g, k, cap):
        for row in b.edge_id[w]:
            mult[frozenset(row.tolist())] += 1
    sets = list(mult.items())
    if len(sets) ** 2 > cap:
        raise ResourceError("too many cycles for a pairwise census")
    out = {i: 0 for i in range(1, k + 1)}
    for s1, m1 in sets:
        for s2, m2 in sets:
            i = len(s1 & s2)
            if i:
                out[i] += m1 * m2
    return {i: (v // 2 if v % 2 == 0 else v / 2) for i, v in out.items()}
