"""Green's functions of tree-extended graphs and the objects of the local law.

Conventions
-----------
``H = A / sqrt(d-1)`` is the normalized adjacency matrix and
``G(z) = (H - z)^{-1}`` for ``Im z > 0``.  The infinite tree extension of a
base graph ``g0`` is encoded exactly on ``V_0`` by *finitization*: every
missing edge at ``v`` (there are ``f(v) = d - deg(v)`` of them) adds
``-m_sc(z)/(d-1)`` to the diagonal of ``H``.  The resulting matrix is
complex symmetric, so all inverses are plain (non-Hermitian) LU solves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import DomainError, InputError, NumericError, ParameterError
from .graph import MultiGraph, adjacency_matrix, ball_vertices, bfs_ball, from_edge_list
from .random_models import as_rng

__all__ = [
    "SpectralDomainPoint",
    "ParameterSet",
    "FinitizedOperator",
    "GreensEvaluation",
    "DeltaDiagnostics",
    "OmegaReport",
    "m_sc",
    "m_d",
    "rho_d",
    "y_ell",
    "x_ell",
    "tree_path_green",
    "regular_tree_ball",
    "ext_green",
    "finitize",
    "green_matrix",
    "green_columns",
    "ward_residual",
    "schur_identity_suite",
    "omega_residuals",
    "delta_diagnostics",
    "PIVOT_FLOOR",
]

PIVOT_FLOOR = 1e-12


def _check_z(z) -> None:
    if np.any(np.imag(z) <= 0):
        raise DomainError("the spectral parameter needs Im z > 0")


# ------------------------------------------------------------ closed forms
def m_sc(z):
    """Stieltjes transform of the semicircle law.

    The root of ``m^2 + z m + 1 = 0`` with ``Im m > 0``.  The two roots have
    product 1, so the small one is taken as the reciprocal of the large one
    to avoid cancellation at large ``|z|``.
    """
    _check_z(z)
    z = np.asarray(z, dtype=complex)
    s = np.sqrt(z * z - 4.0)
    r1, r2 = (-z + s) / 2.0, (-z - s) / 2.0
    big = np.where(np.abs(r1) >= np.abs(r2), r1, r2)
    small = 1.0 / big
    out = np.where(np.imag(small) > 0, small, big)
    return out[()] if out.ndim == 0 else out


def m_d(z, d: int):
    """Stieltjes transform of the Kesten-McKay law, ``1/(-z - d m_sc/(d-1))``."""
    return 1.0 / (-np.asarray(z, dtype=complex) - (d / (d - 1.0)) * m_sc(z))


def rho_d(x, d: int):
    """Kesten-McKay density on ``[-2, 2]`` in the normalized scale."""
    x = np.asarray(x, dtype=float)
    inside = np.abs(x) < 2.0
    xs = np.where(inside, x, 0.0)
    val = np.sqrt(4.0 - xs**2) / (2.0 * np.pi) / (1.0 + 1.0 / (d - 1.0) - xs**2 / d)
    out = np.where(inside, val, 0.0)
    return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class SpectralDomainPoint:
    """A point ``z = E + i eta`` of the upper half plane."""

    z: complex

    def __post_init__(self):
        _check_z(self.z)

    @property
    def E(self) -> float:
        return float(self.z.real)

    @property
    def eta(self) -> float:
        return float(self.z.imag)

    @property
    def kappa(self) -> float:
        return min(abs(self.E - 2.0), abs(self.E + 2.0))


# -------------------------------------------------------- tree recursions
def _recurse(delta, z, steps: int):
    r = complex(delta)
    for _ in range(steps):
        pivot = -z - r
        if abs(pivot) < PIVOT_FLOOR:
            raise NumericError(f"vanishing pivot {abs(pivot):.2e} in tree recursion")
        r = 1.0 / pivot
    return r


def y_ell(delta, z, d: int, ell: int) -> complex:
    """Root entry of the depth-``ell`` (d-1)-ary tree with boundary weight ``delta``.

    ``R_{ell+1} = delta``, ``R_k = 1/(-z - R_{k+1})`` and the value is ``R_0``.
    """
    _check_z(z)
    if ell < 0:
        raise ParameterError("ell must be non-negative")
    return _recurse(delta, complex(z), ell + 1)


def x_ell(delta, z, d: int, ell: int) -> complex:
    """Root entry of the depth-``ell`` d-regular tree with boundary weight ``delta``.

    The root has ``d`` children, each carrying ``R_1`` from the recursion
    of :func:`y_ell` (``R_1 = delta`` when ``ell = 0``).
    """
    _check_z(z)
    if ell < 0:
        raise ParameterError("ell must be non-negative")
    z = complex(z)
    r1 = _recurse(delta, z, ell)
    pivot = -z - (d / (d - 1.0)) * r1
    if abs(pivot) < PIVOT_FLOOR:
        raise NumericError("vanishing pivot at the root")
    return 1.0 / pivot


def tree_path_green(delta, z, d: int, ell: int) -> complex:
    """Entry ``P_{o l}`` between the root and a depth-``ell`` leaf of the (d-1)-ary tree.

    Uses ``P_{ol} = R_0 * prod_{k=1}^{ell} (-R_k / sqrt(d-1))`` with the
    recursion values of :func:`y_ell`.
    """
    _check_z(z)
    z = complex(z)
    rs = [complex(delta)]
    for _ in range(ell + 1):
        rs.append(1.0 / (-z - rs[-1]))
    # rs[j] = R_{ell + 1 - j}
    r = rs[::-1]  # r[k] = R_k for k = 0..ell+1
    out = r[0]
    for k in range(1, ell + 1):
        out *= -r[k] / math.sqrt(d - 1)
    return out


def regular_tree_ball(d: int, ell: int, root_degree: int | None = None) -> tuple[MultiGraph, np.ndarray]:
    """Truncated tree of depth ``ell`` and the ghost count of each vertex.

    The root has ``root_degree`` children (default ``d - 1``), every other
    vertex ``d - 1`` children; the ghost count is the number of edges cut
    by the truncation (``d - 1`` at leaves, ``root_degree`` at a lone root).
    """
    k0 = d - 1 if root_degree is None else root_degree
    edges = []
    frontier = [0]
    nxt = 1
    for depth in range(ell):
        new = []
        for v in frontier:
            for _ in range(k0 if depth == 0 else d - 1):
                edges.append((v, nxt))
                new.append(nxt)
                nxt += 1
        frontier = new
    g = from_edge_list(nxt, edges)
    full_deg = np.full(nxt, d, dtype=np.int64)
    full_deg[0] = k0
    return g, full_deg - g.degrees


# -------------------------------------------------------------- operators
def _h_dense(g: MultiGraph, d: int) -> np.ndarray:
    return adjacency_matrix(g).toarray() / math.sqrt(d - 1)


def _inverse(m: np.ndarray) -> np.ndarray:
    try:
        out = np.linalg.inv(m)
    except np.linalg.LinAlgError as exc:
        raise NumericError("singular resolvent matrix; check sign conventions") from exc
    if not np.all(np.isfinite(out)):
        raise NumericError("non-finite resolvent entries")
    return out


def ext_green(h: MultiGraph, ghost, delta, z, d: int, extra_diag=None) -> np.ndarray:
    """Dense ``(H|_h - z - (delta/(d-1)) diag(ghost) + diag(extra))^{-1}``.

    Parameters
    ----------
    h : MultiGraph
    ghost : array_like of int
        Cut-edge count ``g_h(v)`` per vertex.
    delta : complex
        Boundary weight.
    z : complex
        Spectral parameter, ``Im z > 0``.
    d : int
        Degree used in the normalization ``H = A/sqrt(d-1)``.
    extra_diag : array_like of complex, optional
        Additional diagonal terms (used for finitization loops).
    """
    _check_z(z)
    ghost = np.asarray(ghost, dtype=float)
    if ghost.shape != (h.n,) or np.any(ghost < 0):
        raise InputError("ghost must be a non-negative vector on the vertices")
    m = _h_dense(h, d).astype(complex)
    diag = -z - (delta / (d - 1.0)) * ghost
    if extra_diag is not None:
        diag = diag + np.asarray(extra_diag, dtype=complex)
    m[np.diag_indices(h.n)] += diag
    return _inverse(m)


@dataclass(frozen=True, eq=False)
class FinitizedOperator:
    """``H_f(z) = A/sqrt(d-1) - (m_sc(z)/(d-1)) diag(f)`` on ``V_0``.

    ``loop_sign`` is ``-1`` for the true finitization; other values exist
    only to build negative controls.
    """

    base: MultiGraph
    d: int
    f: np.ndarray
    z: complex | None = None
    loop_sign: float = -1.0

    @property
    def n(self) -> int:
        return self.base.n

    def loop_weights(self, z) -> np.ndarray:
        return self.loop_sign * m_sc(z) / (self.d - 1.0) * self.f

    def matrix(self, z) -> np.ndarray:
        """Dense ``H_f(z) - z``."""
        _check_z(z)
        m = _h_dense(self.base, self.d).astype(complex)
        m[np.diag_indices(self.n)] += self.loop_weights(z) - z
        return m

    def sparse_matrix(self, z) -> sp.csc_matrix:
        _check_z(z)
        a = adjacency_matrix(self.base).astype(complex) / math.sqrt(self.d - 1)
        return (a + sp.diags(self.loop_weights(z) - z)).tocsc()


def finitize(g0: MultiGraph, d: int, z=None) -> FinitizedOperator:
    """Finite encoding of the infinite tree extension of ``g0``."""
    f = d - np.asarray(g0.degrees, dtype=np.int64)
    if g0.n and f.min() < 0:
        raise InputError(f"maximum degree exceeds d={d}")
    if z is not None:
        _check_z(z)
    f.setflags(write=False)
    return FinitizedOperator(g0, int(d), f, z)


@dataclass
class GreensEvaluation:
    """Green's matrix on ``V_0`` and its scalar statistics."""

    z: complex
    G: np.ndarray = field(repr=False)
    mN: complex
    Q: complex
    msc: complex
    md: complex
    Q_ell: complex | None = None
    ell: int | None = None
    p: float | None = None


def _q_statistic(g0: MultiGraph, G: np.ndarray) -> complex:
    tail, head = g0.directed
    keep = tail != head
    o, i = tail[keep], head[keep]
    if o.size == 0:
        return complex("nan")
    vals = G[o, o] - G[o, i] * G[i, o] / G[i, i]
    return complex(vals.mean())


def green_matrix(op: FinitizedOperator, z=None, ell: int | None = None, p: float | None = None) -> GreensEvaluation:
    """Dense Green's matrix with ``m_N``, ``Q`` and optionally ``Q_ell``.

    ``Q`` averages ``G_oo - G_oi G_io / G_ii`` over both orientations of
    every non-loop edge of the base graph.
    """
    z = op.z if z is None else z
    if z is None:
        raise ParameterError("no spectral parameter given")
    _check_z(z)
    G = _inverse(op.matrix(z))
    mN = complex(np.trace(G) / op.n) if op.n else complex("nan")
    Q = _q_statistic(op.base, G)
    msc = complex(m_sc(z))
    ev = GreensEvaluation(complex(z), G, mN, Q, msc, complex(m_d(z, op.d)))
    if ell is not None and p is not None:
        w = p ** (ell + 1)
        ev.Q_ell, ev.ell, ev.p = w * Q + (1.0 - w) * msc, ell, p
    return ev


def green_columns(m: sp.spmatrix, cols) -> np.ndarray:
    """Selected columns of ``m^{-1}`` by one sparse LU factorization."""
    lu = splu(sp.csc_matrix(m))
    cols = np.asarray(cols, dtype=np.int64)
    rhs = np.zeros((m.shape[0], cols.size), dtype=complex)
    rhs[cols, np.arange(cols.size)] = 1.0
    return lu.solve(rhs)


# ------------------------------------------------------------- identities
def ward_residual(op: FinitizedOperator, z=None, G=None) -> np.ndarray:
    """Per-vertex residual of the Ward identity.

    ``r_i = Im G_ii - eta sum_j |G_ij|^2 - (Im m_sc/(d-1)) sum_j f(j) |G_ij|^2``.
    """
    z = op.z if z is None else z
    if G is None:
        G = _inverse(op.matrix(z))
    eta = float(np.imag(z))
    a2 = np.abs(G) ** 2
    weight = eta + float(np.imag(m_sc(z))) / (op.d - 1.0) * op.f
    return np.imag(np.diag(G)) - a2 @ weight


def schur_identity_suite(op: FinitizedOperator, z, samples: int, rng, G=None) -> dict:
    """Maximum deviations of the resolvent and Schur-complement identities.

    For ``samples`` random vertex sets ``V`` with complement ``W``:

    * resolvent: ``A^{-1} - B^{-1} = A^{-1}(B - A)B^{-1}`` for random
      symmetric perturbations ``B`` of ``A = H_f - z``;
    * ``G|_V = (H_V - z - X^T G^{(V)} X)^{-1}`` with ``X`` the ``W x V``
      block of ``H`` and ``G^{(V)}`` the Green's matrix with ``V`` removed;
    * ``G|_{VW} = -G|_V X^T G^{(V)}``;
    * ``G|_W = G^{(V)} + G^{(V)} X G|_V X^T G^{(V)}``
      ``= G^{(V)} + G|_{WV} (G|_V)^{-1} G|_{VW}``;
    * single removal ``G^{(k)}_{ij} = G_ij - G_ik G_kj / G_kk``.
    """
    gen = as_rng(rng)
    M = op.matrix(z)
    G = _inverse(M) if G is None else G
    n = op.n
    dev = {"resolvent": 0.0, "schur_block": 0.0, "schur_offdiag": 0.0,
           "schur_complement": 0.0, "schur_complement_alt": 0.0, "single_removal": 0.0}
    for _ in range(samples):
        pert = gen.standard_normal((n, n)) * 0.1
        B = M + (pert + pert.T)
        Binv = _inverse(B)
        dev["resolvent"] = max(dev["resolvent"], float(np.abs(G - Binv - G @ (B - M) @ Binv).max()))
        if n < 2:
            continue
        size = int(gen.integers(1, n))
        V = np.sort(gen.choice(n, size=size, replace=False))
        W = np.setdiff1d(np.arange(n), V)
        GV_removed = _inverse(M[np.ix_(W, W)])
        X = M[np.ix_(W, V)]
        GV = _inverse(M[np.ix_(V, V)] - X.T @ GV_removed @ X)
        dev["schur_block"] = max(dev["schur_block"], float(np.abs(GV - G[np.ix_(V, V)]).max()))
        off = -GV @ X.T @ GV_removed
        dev["schur_offdiag"] = max(dev["schur_offdiag"], float(np.abs(off - G[np.ix_(V, W)]).max()))
        comp = GV_removed + GV_removed @ X @ GV @ X.T @ GV_removed
        dev["schur_complement"] = max(dev["schur_complement"], float(np.abs(comp - G[np.ix_(W, W)]).max()))
        alt = GV_removed + G[np.ix_(W, V)] @ np.linalg.solve(G[np.ix_(V, V)], G[np.ix_(V, W)])
        dev["schur_complement_alt"] = max(dev["schur_complement_alt"], float(np.abs(alt - G[np.ix_(W, W)]).max()))
        k = int(gen.integers(n))
        rest = np.delete(np.arange(n), k)
        Gk = _inverse(M[np.ix_(rest, rest)])
        pred = G[np.ix_(rest, rest)] - np.outer(G[rest, k], G[k, rest]) / G[k, k]
        dev["single_removal"] = max(dev["single_removal"], float(np.abs(Gk - pred).max()))
    dev["max"] = max(dev.values())
    return dev


# --------------------------------------------------------------- params
@dataclass(frozen=True)
class ParameterSet:
    """Scale parameters tied to the graph size ``N``.

    Raw values follow the asymptotic formulas; ``R``, ``r_desk`` and
    ``ell`` are the floored or clamped values used at desk scale.
    """

    N: int
    d: int
    fc: float = 0.01
    ell_override: int | None = None

    @property
    def log_N(self) -> float:
        return math.log(self.N)

    @property
    def R_frak(self) -> float:
        return self.fc / 4.0 * math.log(self.N) / math.log(self.d - 1)

    @property
    def r(self) -> float:
        return self.fc / 32.0 * math.log(self.N) / math.log(self.d - 1)

    @property
    def R(self) -> float:
        """Separation scale with the desk floor ``R >= 4``."""
        return max(4.0, self.R_frak)

    @property
    def r_desk(self) -> int:
        return max(1, int(round(self.r)))

    @property
    def ell_range(self) -> tuple[float, float]:
        base = math.log(math.log(self.N)) / math.log(self.d - 1)
        return 12.0 * base, 24.0 * base

    @property
    def ell(self) -> int:
        if self.ell_override is not None:
            return int(self.ell_override)
        return int(min(6, max(1, round(self.ell_range[0]))))

    def eps0(self, z) -> float:
        _check_z(z)
        ln = self.log_N
        Neta = self.N * float(np.imag(z))
        return ln**96 * ((self.d - 1) ** (-self.r) + math.sqrt(float(np.imag(m_d(z, self.d))) / Neta)
                         + Neta ** (-2.0 / 3.0))

    def eps(self, z) -> float:
        pt = SpectralDomainPoint(complex(z))
        e0 = self.eps0(z)
        return e0 if e0 <= (pt.kappa + pt.eta) / self.log_N else self.log_N**4 * e0

    def eps_prime(self, z) -> float:
        return self.log_N**3 * self.eps(z)

    def phi(self, z) -> float:
        pt = SpectralDomainPoint(complex(z))
        e = self.eps(z)
        inner = float(np.imag(m_d(z, self.d))) + self.eps_prime(z) + e / math.sqrt(pt.kappa + pt.eta + e)
        return self.log_N**24 * math.sqrt(inner / (self.N * pt.eta))

    def q_bound(self, z) -> float:
        """``eps / sqrt(kappa + eta + eps)``."""
        pt = SpectralDomainPoint(complex(z))
        e = self.eps(z)
        return e / math.sqrt(pt.kappa + pt.eta + e)


# ---------------------------------------------------------- Omega event
@dataclass
class OmegaReport:
    z: complex
    r: int
    diag: np.ndarray
    off: np.ndarray
    Q: complex
    q_dev: float
    q_bound: float
    note: str = ""

    @property
    def max_diag(self) -> float:
        return float(self.diag.max()) if self.diag.size else 0.0

    @property
    def max_off(self) -> float:
        return float(self.off.max()) if self.off.size else 0.0


def local_ext_green(op: FinitizedOperator, centers, r: int, z, Q) -> tuple[np.ndarray, np.ndarray]:
    """Green's matrix of the radius-``r`` ball around ``centers`` with ghost weights.

    Tree stubs keep their ``-m_sc/(d-1)`` weight; every base edge cut by the
    ball boundary contributes ``-Q/(d-1)``.

    Returns
    -------
    G_loc : ndarray
    verts : ndarray
        Ball vertices (row order of ``G_loc``).
    """
    ball = bfs_ball(op.base, centers, r)
    verts = np.array(sorted(ball.vertices), dtype=np.int64)
    pos = {int(v): k for k, v in enumerate(verts)}
    sub_edges = [(pos[int(op.base.edges[e, 0])], pos[int(op.base.edges[e, 1])]) for e in ball.edges]
    h = from_edge_list(verts.size, sub_edges)
    cut = op.base.degrees[verts] - h.degrees
    G_loc = ext_green(h, cut, Q, z, op.d, extra_diag=op.loop_weights(z)[verts])
    return G_loc, verts


def omega_residuals(op: FinitizedOperator, z, params: ParameterSet | None = None, r: int | None = None,
                    samples: int = 50, rng=0, ev: GreensEvaluation | None = None,
                    vertices=None) -> OmegaReport:
    """Local approximation errors ``|G_ij - G_ij(Ext(B_r({i,j}), Q))|``.

    Diagonal entries use ``samples`` random vertices (or ``vertices``);
    off-diagonal pairs join each sampled ``i`` to a random vertex of its
    radius-``r`` ball.  ``|Q - m_sc|`` is reported with its bound
    ``eps/sqrt(kappa + eta + eps)`` (vacuous at desk scale).
    """
    _check_z(z)
    params = params or ParameterSet(max(op.n, 3), op.d)
    r = params.r_desk if r is None else int(r)
    ev = ev or green_matrix(op, z)
    msc = complex(m_sc(z))
    q_dev = abs(ev.Q - msc)
    bound = params.q_bound(z)
    if r < 1:
        return OmegaReport(complex(z), r, np.zeros(0), np.zeros(0), ev.Q, q_dev, bound, "ball too small")
    gen = as_rng(rng)
    if vertices is None:
        vertices = np.arange(op.n) if op.n <= samples else gen.choice(op.n, size=samples, replace=False)
    diag, off = [], []
    Q = ev.Q if np.isfinite(ev.Q) else msc
    for i in vertices:
        i = int(i)
        G_loc, verts = local_ext_green(op, [i], r, z, Q)
        k = int(np.searchsorted(verts, i))
        diag.append(abs(ev.G[i, i] - G_loc[k, k]))
        others = [int(v) for v in ball_vertices(op.base, [i], r) if v != i]
        if others:
            j = others[int(gen.integers(len(others)))]
            G2, v2 = local_ext_green(op, [i, j], r, z, Q)
            a, b = int(np.searchsorted(v2, i)), int(np.searchsorted(v2, j))
            off.append(abs(ev.G[i, j] - G2[a, b]))
    return OmegaReport(complex(z), r, np.asarray(diag), np.asarray(off), ev.Q, q_dev, bound)


# ------------------------------------------------------- delta diagnostics
@dataclass
class DeltaDiagnostics:
    D: np.ndarray
    DGD: complex
    DJD: int
    delta_Q: complex
    delta_m: complex
    pi: np.ndarray
    pi_counts: np.ndarray
    P_ol: complex
    Q_ell: complex


def _sphere_count(g: MultiGraph, o: int, i: int, ell: int) -> int:
    do = ball_vertices(g, [o], ell + 1)
    di = ball_vertices(g, [i], ell + 2)
    return sum(1 for v, dv in do.items() if dv == ell + 1 and di.get(v, ell + 3) == ell + 2)


def delta_diagnostics(op: FinitizedOperator, z, ell: int, p: float, samples: int = 100,
                      rng=0, ev: GreensEvaluation | None = None) -> DeltaDiagnostics:
    """Degree-vector quadratic forms, ``delta_Q``, ``delta_m`` and sampled ``pi_oi``.

    ``pi_oi = (P_ol^2/(d-1)) (#{v : dist(o,v) = ell+1, dist(i,v) = ell+2}
    - (p(d-1))^(ell+1))`` with ``P`` the depth-``ell`` tree extension entry
    at boundary weight ``Q_ell``.
    """
    if ell < 1:
        raise ParameterError("ell must be at least 1")
    g0, d = op.base, op.d
    if g0.edge_count == 0:
        raise InputError("delta diagnostics need at least one base edge")
    ev = ev or green_matrix(op, z, ell=ell, p=p)
    if ev.Q_ell is None:
        w = p ** (ell + 1)
        ev.Q_ell = w * ev.Q + (1 - w) * ev.msc
    msc, md = ev.msc, ev.md
    D = np.asarray(g0.degrees, dtype=float)
    DGD = complex(D @ ev.G @ D)
    DJD = int(round(D.sum())) ** 2
    s = p * (d - 1)
    frac = (s - s ** (-ell)) / (s - 1.0)
    common = (1 + msc / math.sqrt(d - 1)) ** 2 * (msc * p * math.sqrt(d - 1)) ** (2 * ell) * DGD / DJD
    delta_Q = msc**2 * p**2 * (d - 2) * frac * common
    delta_m = d / (d - 1.0) * md**2 * p**2 * ((d - 1.0) ** (-ell) + (d - 2) * frac) * common
    P_ol = tree_path_green(ev.Q_ell, z, d, ell)
    gen = as_rng(rng)
    tail, head = g0.directed
    cand = np.flatnonzero(tail != head)
    picks = cand if cand.size <= samples else gen.choice(cand, size=samples, replace=False)
    counts = np.array([_sphere_count(g0, int(tail[x]), int(head[x]), ell) for x in picks], dtype=float)
    pi = (P_ol**2 / (d - 1.0)) * (counts - s ** (ell + 1))
    return DeltaDiagnostics(D, DGD, DJD, delta_Q, delta_m, pi, counts, P_ol, ev.Q_ell)
