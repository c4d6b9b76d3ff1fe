"""Tree extensions, spectral targets, and eigenvector localization checks.

``T^L g`` attaches ``f(v) = d - deg(v)`` rooted (d-1)-ary trees of height
``L`` to every vertex of ``g``.  All tree vertices are materialized, so the
generic sparse eigensolvers run on the extension unchanged.  The infinite
extension ``T^inf g`` is never materialized; see :mod:`edgeforge.nonbacktracking`
and :mod:`edgeforge.greens` for the exact finite encodings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError, ParameterError, ResourceError
from .graph import MultiGraph, adjacency_matrix

__all__ = [
    "TreeExtendedGraph",
    "SpectralTarget",
    "DEFAULT_VERTEX_CAP",
    "augment",
    "tree_extend",
    "projected_size",
    "target_from_mu",
    "zeta_of_lambda",
    "LocalizationReport",
    "DecayReport",
    "localization_check",
    "decay_profile_check",
    "truncation_gap",
]

DEFAULT_VERTEX_CAP = 10**8


@dataclass(frozen=True, eq=False)
class TreeExtendedGraph:
    """A base graph with depth-``L`` regular trees attached.

    Attributes
    ----------
    base : MultiGraph
        The base graph on ``V_0 = {0, ..., base.n - 1}``.
    d : int
        Target degree.
    L : int
        Extension depth.
    full : MultiGraph
        ``T^L base``; base vertices keep their ids, tree vertices follow
        level by level.
    level_of : ndarray
        Distance of every vertex of ``full`` to ``V_0``.
    parent_of : ndarray
        Parent of each tree vertex; ``-1`` on ``V_0``.
    f : ndarray
        Deficiency ``d - deg_base(v)`` on ``V_0``.
    root_of : ndarray
        The ``V_0`` vertex each vertex hangs from (identity on ``V_0``).
    """

    base: MultiGraph
    d: int
    L: int
    full: MultiGraph
    level_of: np.ndarray
    parent_of: np.ndarray
    f: np.ndarray
    root_of: np.ndarray

    @property
    def base_size(self) -> int:
        return self.base.n

    def level_sizes(self) -> np.ndarray:
        return np.bincount(self.level_of, minlength=self.L + 1)

    def level(self, ell: int) -> np.ndarray:
        return np.flatnonzero(self.level_of == ell)

    def leaves(self) -> np.ndarray:
        """Degree-1 vertices at level ``L`` (empty when nothing is attached)."""
        if self.L == 0:
            return np.zeros(0, dtype=np.int64)
        return self.level(self.L)

    def sidecar(self) -> dict:
        """JSON sidecar accompanying the edge-list serialization of ``full``."""
        return {"levels": self.level_of.tolist(), "base_size": int(self.base.n)}


def projected_size(g: MultiGraph, d: int, L: int) -> int:
    """Vertex count of ``T^L g`` without building it."""
    stubs = int(d * g.n - g.degrees.sum())
    if L == 0 or stubs == 0:
        return g.n
    per_stub = L if d == 2 else ((d - 1) ** L - 1) // (d - 2)
    return g.n + stubs * per_stub


def tree_extend(g: MultiGraph, d: int, L: int, cap: int = DEFAULT_VERTEX_CAP) -> TreeExtendedGraph:
    """Depth-``L`` tree extension ``T^L g``.

    Parameters
    ----------
    g : MultiGraph
        Base graph with maximum degree at most ``d``.
    d : int
        Target degree.
    L : int
        Depth, ``L >= 0``.
    cap : int
        Maximum vertex count allowed for the materialized extension.

    Raises
    ------
    InputError
        If some vertex has degree above ``d``.
    ResourceError
        If the extension would exceed ``cap`` vertices.
    """
    if L < 0:
        raise ParameterError("depth L must be non-negative")
    f = d - np.asarray(g.degrees, dtype=np.int64)
    if g.n and f.min() < 0:
        raise InputError(f"vertex {int(np.argmin(f))} has degree above d={d}")
    total = projected_size(g, d, L)
    if total > cap:
        raise ResourceError(f"T^{L} would have {total} vertices, above the cap {cap}; use a smaller depth")
    parent = np.full(total, -1, dtype=np.int64)
    level = np.zeros(total, dtype=np.int64)
    root = np.empty(total, dtype=np.int64)
    root[: g.n] = np.arange(g.n)
    frontier = np.repeat(np.arange(g.n, dtype=np.int64), np.maximum(f, 0)) if L > 0 else np.zeros(0, np.int64)
    nxt = g.n
    for ell in range(1, L + 1):
        ids = np.arange(nxt, nxt + frontier.shape[0], dtype=np.int64)
        parent[ids] = frontier
        level[ids] = ell
        root[ids] = root[frontier]
        nxt += ids.shape[0]
        frontier = np.repeat(ids, d - 1)
    assert nxt == total
    child = np.arange(g.n, total, dtype=np.int64)
    tree_edges = np.column_stack([parent[g.n:], child])
    full = MultiGraph(total, np.ascontiguousarray(np.concatenate([g.edges, tree_edges])))
    for arr in (level, parent, f, root):
        arr.setflags(write=False)
    return TreeExtendedGraph(g, int(d), int(L), full, level, parent, f, root)


def augment(g: MultiGraph, d: int) -> TreeExtendedGraph:
    """The d-augmentation ``T g`` (depth-one extension)."""
    return tree_extend(g, d, 1)


# ------------------------------------------------------- spectral targets
@dataclass(frozen=True)
class SpectralTarget:
    """Eigenvalue target ``mu`` with its percolation parameters.

    ``theta`` is the root of ``theta^2 - mu*theta + (d-1) = 0`` lying in
    ``(sqrt(d-1), d-1)``, ``p = theta/(d-1)`` and ``zeta = theta/sqrt(d-1)``.
    """

    d: int
    mu: float
    theta: float
    p: float
    zeta: float

    def mu_from_p(self) -> float:
        """``p(d-1) + 1/p``, which equals ``mu``."""
        return self.p * (self.d - 1) + 1.0 / self.p


def target_from_mu(d: int, mu: float) -> SpectralTarget:
    """Percolation parameters placing the top eigenvalue of ``T^inf`` at ``mu``.

    Raises
    ------
    ParameterError
        Unless ``2 sqrt(d-1) < mu < d``.
    """
    lo = 2.0 * math.sqrt(d - 1)
    if not lo < mu < d:
        raise ParameterError(f"mu={mu} outside the admissible range ({lo:.12g}, {d}) for d={d}")
    disc = math.sqrt(mu * mu - 4.0 * (d - 1))
    theta = 0.5 * (mu + disc)
    return SpectralTarget(int(d), float(mu), theta, theta / (d - 1), theta / math.sqrt(d - 1))


def zeta_of_lambda(d: int, lam: float) -> float:
    """The root ``zeta > 1`` of ``zeta + 1/zeta = lam / sqrt(d-1)``."""
    x = lam / math.sqrt(d - 1)
    if x <= 2.0:
        raise ParameterError(f"lambda={lam} must exceed 2 sqrt(d-1)={2 * math.sqrt(d - 1):.12g}")
    return 0.5 * (x + math.sqrt(x * x - 4.0))


# ------------------------------------------------- localization and decay
@dataclass
class LocalizationReport:
    lam: float
    mass_V0: float
    bound: float
    passed: bool
    skipped: bool = False
    note: str = ""


@dataclass
class DecayReport:
    lam: float
    zeta: float
    masses: np.ndarray
    bounds: np.ndarray
    passed: bool


def _validated_vector(teg: TreeExtendedGraph, lam: float, psi, tol: float) -> np.ndarray:
    psi = np.asarray(psi, dtype=float)
    if psi.shape != (teg.full.n,):
        raise InputError(f"vector has shape {psi.shape}, expected ({teg.full.n},)")
    norm = np.linalg.norm(psi)
    if abs(norm - 1.0) > 1e-8:
        raise InputError(f"vector must be unit norm, got {norm}")
    res = np.linalg.norm(adjacency_matrix(teg.full) @ psi - lam * psi)
    if res >= tol:
        raise InputError(f"eigen-residual {res:.3e} exceeds {tol:.1e}; not an eigenpair")
    return psi


def localization_check(teg: TreeExtendedGraph, lam: float, psi, tol: float = 1e-6) -> LocalizationReport:
    """Compare ``||psi restricted to V_0||`` with ``(lam - 2 sqrt(d-1)) / (2d)``."""
    d = teg.d
    edge = 2.0 * math.sqrt(d - 1)
    psi = _validated_vector(teg, lam, psi, tol)
    mass = float(np.linalg.norm(psi[: teg.base.n]))
    if lam <= edge:
        return LocalizationReport(lam, mass, 0.0, True, True, "lambda <= 2 sqrt(d-1): bound is vacuous")
    bound = (lam - edge) / (2 * d)
    return LocalizationReport(lam, mass, bound, mass > bound)


def decay_profile_check(teg: TreeExtendedGraph, lam: float, psi, tol: float = 1e-6) -> DecayReport:
    """Per-level squared mass of ``psi`` against ``zeta^(-2l+2)`` for ``1 <= l <= L``."""
    psi = _validated_vector(teg, lam, psi, tol)
    zeta = zeta_of_lambda(teg.d, lam)
    masses = np.bincount(teg.level_of, weights=psi**2, minlength=teg.L + 1)
    ells = np.arange(teg.L + 1)
    bounds = zeta ** (-2.0 * ells + 2.0)
    bounds[0] = np.inf
    return DecayReport(lam, zeta, masses, bounds, bool(np.all(masses <= bounds)))


def truncation_gap(teg_L1: TreeExtendedGraph, teg_L2: TreeExtendedGraph, topk: int = 1,
                   tol: float = 1e-10) -> dict:
    """Top eigenvalues of two extensions of one base and their drift.

    Returns
    -------
    dict
        ``{"L1", "L2", "eig_L1", "eig_L2", "drift"}`` with
        ``drift = eig_L2 - eig_L1``.
    """
    from .spectral import lanczos_topk

    if not teg_L1.base.same_as(teg_L2.base) or teg_L1.d != teg_L2.d:
        raise InputError("truncation_gap needs two extensions of the same base")
    if teg_L1.L >= teg_L2.L:
        raise InputError("need L1 < L2")
    e1 = lanczos_topk(teg_L1.full, topk, tol=tol).eigenvalues
    e2 = lanczos_topk(teg_L2.full, topk, tol=tol).eigenvalues
    return {"L1": teg_L1.L, "L2": teg_L2.L, "eig_L1": e1, "eig_L2": e2, "drift": e2 - e1}
