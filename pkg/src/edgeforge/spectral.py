"""Top adjacency eigenpairs, Rayleigh residuals, and the percolation test vector.

The eigensolver works with the unnormalized adjacency matrix ``A`` (loops
add 2 on the diagonal).  Small problems are solved densely; larger ones go
through ARPACK's implicitly restarted Lanczos method (``scipy.sparse.linalg.eigsh``),
and every returned pair is checked by an explicit residual.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from .errors import InputError, NumericError, ParameterError
from .graph import MultiGraph, adjacency_matrix
from .random_models import as_rng, sample_configuration_model
from .trees import TreeExtendedGraph, tree_extend

__all__ = [
    "SpectralReport",
    "lanczos_topk",
    "rayleigh_residual",
    "local_ball_profile",
    "TestVector",
    "build_test_vector",
    "psi_residual",
    "FriedmanReport",
    "friedman_check",
    "DENSE_LIMIT",
]

DENSE_LIMIT = 64


@dataclass
class SpectralReport:
    """Eigenvalues in descending order with verified residuals."""

    n: int
    m: int
    eigenvalues: np.ndarray
    residuals: np.ndarray
    iters: int
    restarts: int
    fingerprint: str
    vectors: np.ndarray | None = field(default=None, repr=False)

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "eigenvalues": [float(x) for x in self.eigenvalues],
            "residuals": [float(x) for x in self.residuals],
            "solver": {"iters": self.iters, "restarts": self.restarts},
            "fingerprint": self.fingerprint,
        }


def _graph_of(g) -> MultiGraph:
    return g.full if isinstance(g, TreeExtendedGraph) else g


def lanczos_topk(g, k: int, tol: float = 1e-10, seed: int = 0, which: str = "LA",
                 return_vectors: bool = False, ncv: int | None = None,
                 maxiter: int | None = None, max_restarts: int = 3,
                 fingerprint: bool = True) -> SpectralReport:
    """Extreme eigenpairs of the adjacency matrix.

    Parameters
    ----------
    g : MultiGraph or TreeExtendedGraph
    k : int
        Number of eigenpairs.
    tol : float
        Residual target; every pair must satisfy
        ``||A v - lam v|| <= 10 * tol * max(1, |lam_1|)``.
    seed : int
        Seed of the Lanczos start vector.
    which : {"LA", "SA"}
        Largest or smallest algebraic eigenvalues.
    return_vectors : bool
        Keep the eigenvectors in the report.
    ncv, maxiter : int, optional
        Lanczos basis size and restart budget passed to ARPACK.
    max_restarts : int
        Number of retries with an enlarged basis after non-convergence.

    Raises
    ------
    NumericError
        On non-convergence; ``partial`` carries whatever converged.
    """
    g = _graph_of(g)
    if k < 1:
        raise ParameterError("k must be at least 1")
    if k > g.n:
        raise ParameterError(f"k={k} exceeds the vertex count {g.n}")
    a = adjacency_matrix(g)
    fp = g.fingerprint() if fingerprint else ""
    if g.n <= DENSE_LIMIT or k >= g.n - 1:
        w, v = np.linalg.eigh(a.toarray())
        order = np.argsort(-w) if which == "LA" else np.argsort(w)
        w, v = w[order[:k]], v[:, order[:k]]
        iters, restarts = 1, 0
    else:
        count = [0]

        def matvec(x):
            count[0] += 1
            return a @ x

        op = LinearOperator(a.shape, matvec=matvec, dtype=np.float64)
        v0 = np.random.default_rng(seed).standard_normal(g.n)
        basis = ncv or min(g.n - 1, max(2 * k + 1, 40))
        restarts = 0
        while True:
            try:
                w, v = eigsh(op, k=k, which=which, tol=tol, v0=v0, ncv=basis,
                             maxiter=maxiter or max(1000, 20 * g.n // basis))
                break
            except ArpackNoConvergence as exc:
                restarts += 1
                if restarts > max_restarts:
                    raise NumericError("Lanczos did not converge", partial=(exc.eigenvalues, exc.eigenvectors))
                basis = min(g.n - 1, 2 * basis)
        order = np.argsort(-w) if which == "LA" else np.argsort(w)
        w, v = w[order], v[:, order]
        iters = count[0]
    res = np.linalg.norm(a @ v - v * w, axis=0)
    scale = max(1.0, float(np.max(np.abs(w))))
    if np.any(res > 10 * tol * scale) and tol >= 1e-13:
        raise NumericError(f"residuals {res} above tolerance {tol}", partial=(w, v))
    if which == "LA" and w[0] > g.max_degree + 1e-8:
        raise NumericError(f"top eigenvalue {w[0]} violates the Perron bound {g.max_degree}")
    return SpectralReport(g.n, g.edge_count, w, res, iters, restarts, fp, v if return_vectors else None)


def rayleigh_residual(g, lam: float, psi) -> float:
    """``||A psi - lam psi||^2 / ||psi||^2``."""
    g = _graph_of(g)
    psi = np.asarray(psi, dtype=float)
    nrm2 = float(psi @ psi)
    if nrm2 == 0.0:
        raise InputError("rayleigh_residual needs a nonzero vector")
    r = adjacency_matrix(g) @ psi - lam * psi
    return float(r @ r) / nrm2


# ----------------------------------------------------------- test vector
def local_ball_profile(g: MultiGraph, r: int) -> tuple[np.ndarray, np.ndarray]:
    """Sphere sizes and tree indicator of every radius-``r`` ball.

    Returns
    -------
    spheres : ndarray of shape (n, r + 1)
        ``spheres[v, j]`` is the number of vertices at distance exactly ``j``.
    is_tree : ndarray of bool
        Whether the induced ball ``B_r(v)`` is a tree.
    """
    a = adjacency_matrix(g)
    step = (a + sp.identity(g.n, format="csr")).astype(bool).astype(np.float64).tocsr()
    reach = sp.identity(g.n, format="csr", dtype=np.float64)
    sizes = [np.ones(g.n, dtype=np.int64)]
    for _ in range(r):
        reach = (reach @ step).tocsr()
        reach.data[:] = 1.0
        sizes.append(np.diff(reach.indptr).astype(np.int64))
    sizes = np.column_stack(sizes)
    spheres = np.diff(np.concatenate([np.zeros((g.n, 1), np.int64), sizes], axis=1), axis=1)
    inner = np.asarray((reach @ a).multiply(reach).sum(axis=1)).ravel()
    n_edges = np.rint(inner / 2).astype(np.int64)
    return spheres, n_edges == sizes[:, -1] - 1


@dataclass
class TestVector:
    """Percolation test vector on ``T^L g0``.

    ``values`` lives on the materialized extension ``teg.full``; on
    ``V_0`` it equals ``Z_t / (p(d-1))^t`` except on masked vertices whose
    ``(t+1)``-ball is not a tree, where it vanishes.
    """

    t: int
    d: int
    p: float
    values: np.ndarray
    Z_t: np.ndarray
    tangle_mask: np.ndarray
    teg: TreeExtendedGraph
    warning: str | None = None

    __test__ = False  # not a pytest test class

    @property
    def mu(self) -> float:
        return self.p * (self.d - 1) + 1.0 / self.p

    @property
    def base_values(self) -> np.ndarray:
        return self.values[: self.teg.base.n]


def default_t(n: int, d: int, c: float = 0.22) -> int:
    return max(1, int(round(c * math.log(max(n, 2)) / math.log(d - 1))))


def build_test_vector(g0: MultiGraph, d: int, p: float, L: int, t: int | None = None,
                      c: float = 0.22) -> TestVector:
    """Build ``psi_t`` on the depth-``L`` extension of ``g0``.

    Parameters
    ----------
    g0 : MultiGraph
        Percolated base graph on ``V_0``.
    d : int
    p : float
        Percolation probability.
    L : int
        Materialization depth, ``L >= 1``.
    t : int, optional
        Radius; defaults to ``round(c log_{d-1} N)`` clamped to at least 1.
    c : float
        Constant in the default radius.
    """
    if L < 1:
        raise ParameterError("L must be at least 1")
    if not 0 < p <= 1:
        raise ParameterError("p must lie in (0, 1]")
    t = default_t(g0.n, d, c) if t is None else int(t)
    spheres, tree = local_ball_profile(g0, t + 1)
    warn = None
    if g0.n and spheres[:, t + 1].max() == 0:
        warn = f"t+1={t + 1} exceeds the radius of every ball"
    z_t = spheres[:, t]
    scale = p * (d - 1)
    base = np.where(tree, z_t / scale**t, 0.0)
    teg = tree_extend(g0, d, L)
    values = base[teg.root_of] * scale ** (-teg.level_of.astype(float))
    return TestVector(t, d, float(p), values, z_t, ~tree, teg, warn)


def psi_residual(tv: TestVector) -> dict:
    """Rayleigh residual of ``psi_t`` at ``mu = p(d-1) + 1/p``.

    Returns
    -------
    dict
        ``infinite``: exact residual on the infinite extension (tree rows
        contribute nothing there); ``interior``: squared residual mass on
        ``V_0`` and levels ``< L`` of the materialized extension;
        ``frontier``: squared residual mass on level ``L``; ``materialized``:
        the full ratio on ``T^L``.
    """
    d, p, mu = tv.d, tv.p, tv.mu
    g0 = tv.teg.base
    psi0 = tv.base_values
    a0 = adjacency_matrix(g0)
    f = tv.teg.f
    r0 = a0 @ psi0 + f * psi0 / (p * (d - 1)) - mu * psi0
    q = 1.0 / (p * p * (d - 1))
    if q >= 1.0:
        infinite = math.inf
    else:
        norm2 = float(psi0 @ psi0) + float(np.sum(f * psi0**2)) * q / ((d - 1) * (1.0 - q))
        infinite = float(r0 @ r0) / norm2 if norm2 > 0 else math.nan
    full = tv.teg.full
    r = adjacency_matrix(full) @ tv.values - mu * tv.values
    front = tv.teg.level_of == tv.teg.L
    norm2_mat = float(tv.values @ tv.values)
    return {
        "infinite": infinite,
        "interior": float(r[~front] @ r[~front]),
        "frontier": float(r[front] @ r[front]),
        "materialized": float(r @ r) / norm2_mat if norm2_mat > 0 else math.nan,
        "norm2": norm2_mat,
    }


# -------------------------------------------------------------- Friedman
@dataclass
class FriedmanReport:
    """Per-trial ``max(lambda_2, -lambda_n)`` with its two ingredients."""

    n: int
    d: int
    values: np.ndarray
    bound: float
    lambda2: np.ndarray
    lambda_min: np.ndarray

    def quantiles(self, qs=(0.0, 0.5, 0.9, 1.0)) -> dict:
        return {float(q): float(np.quantile(self.values, q)) for q in qs}

    def to_json(self) -> dict:
        return {"n": self.n, "d": self.d, "values": self.values.tolist(),
                "lambda2": self.lambda2.tolist(), "lambda_min": self.lambda_min.tolist(),
                "bound": self.bound, "quantiles": self.quantiles()}


def friedman_check(n: int, d: int, trials: int, rng, simple: bool = False,
                   tol: float = 1e-8) -> FriedmanReport:
    """Per-trial ``max(lambda_2, -lambda_n)`` of configuration-model samples.

    With ``simple=True`` samples are conditioned on being simple graphs.
    """
    if trials < 1:
        raise ParameterError("trials must be at least 1")
    gen = as_rng(rng)
    second, lowest = [], []
    for _ in range(trials):
        while True:
            g = sample_configuration_model(n, d, gen)
            if not simple or g.is_simple():
                break
        if g.n <= DENSE_LIMIT:
            w = np.linalg.eigvalsh(adjacency_matrix(g).toarray())
            top2, low = w[-2], w[0]
        else:
            top2 = lanczos_topk(g, 2, tol=tol, fingerprint=False).eigenvalues[1]
            low = lanczos_topk(g, 1, tol=tol, which="SA", fingerprint=False).eigenvalues[0]
        second.append(top2)
        lowest.append(low)
    second, lowest = np.asarray(second, dtype=float), np.asarray(lowest, dtype=float)
    return FriedmanReport(n, d, np.maximum(second, -lowest), 2.0 * math.sqrt(d - 1), second, lowest)
