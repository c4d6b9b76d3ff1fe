"""Gadget construction, verification, R-patching and end-to-end synthesis.

A *gadget* for a target ``mu`` is a percolated configuration-model graph
``G_0 = perc(H, p(mu))`` whose infinite tree extension has top eigenvalue
close to ``mu``.  Gadgets are extended to depth ``L`` and glued into a large
random regular base graph by deleting a scattered vertex set ``U`` and
identifying the leaves of ``T(T^L F_i)`` with the freed degree slots.
"""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import ConstructionError, ForgeError, InputError, ParameterError
from .graph import MultiGraph, delete_vertices, disjoint_union, from_edge_list, girth
from .nonbacktracking import build_nb_operator, ihara_map, nb_spectral_radius
from .random_models import RngSpec, as_rng, percolate, sample_configuration_model, sample_simple_regular
from .spectral import lanczos_topk
from .trees import SpectralTarget, TreeExtendedGraph, projected_size, target_from_mu, tree_extend

__all__ = [
    "GadgetSpec",
    "Lambda1Estimate",
    "construct_gadget",
    "verify_gadget_lambda1",
    "verify_gadget_lambda2",
    "select_spread_set",
    "SpreadSet",
    "PatchPlan",
    "r_patch",
    "pad_gadgets",
    "SynthesisResult",
    "synthesize",
    "auto_gadget_size",
    "parse_targets",
    "ENDPOINT_MARGIN",
]

log = logging.getLogger(__name__)

ENDPOINT_MARGIN = 1e-6
DEGENERATE_TOL = 1e-9


# ----------------------------------------------------------------- gadgets
@dataclass(frozen=True)
class GadgetSpec:
    """Parameters of one gadget.

    Attributes
    ----------
    target : SpectralTarget
    N : int
        Vertex count of the configuration-model graph ``H``.
    R : int
        Girth goal for ``H``.
    L : int
        Extension depth used when the gadget is patched.
    max_girth_retries : int
    """

    target: SpectralTarget
    N: int
    R: int = 4
    L: int = 10
    max_girth_retries: int = 1000

    def __post_init__(self):
        if (self.N * self.target.d) % 2:
            raise ParameterError(f"N*d = {self.N * self.target.d} must be even")
        if self.L < 1:
            raise ParameterError("L must be at least 1")
        if self.R < 3:
            raise ParameterError("R must be at least 3")


def construct_gadget(spec: GadgetSpec, rng) -> tuple[MultiGraph, dict]:
    """Sample ``H`` with ``girth(H) >= R`` and percolate it at ``p(mu)``.

    Returns
    -------
    g0 : MultiGraph
    provenance : dict
        ``retries`` (rejected ``H`` samples), ``girth`` of the accepted
        ``H`` and the seed/stream when ``rng`` is an :class:`RngSpec`.

    Raises
    ------
    ConstructionError
        When the retry cap is exhausted; ``best`` is the largest girth seen.
    """
    gen = as_rng(rng)
    d = spec.target.d
    best = 0.0
    for attempt in range(spec.max_girth_retries + 1):
        h = sample_configuration_model(spec.N, d, gen)
        gh = girth(h, cutoff=spec.R)
        best = max(best, gh)
        if gh >= spec.R:
            g0 = percolate(h, spec.target.p, gen)
            prov = {"retries": attempt, "girth_at_least": spec.R, "n": spec.N, "p": spec.target.p}
            if isinstance(rng, RngSpec):
                prov.update(seed=rng.seed, stream=rng.stream)
            return g0, prov
    raise ConstructionError(f"no configuration-model sample with girth >= {spec.R} in "
                            f"{spec.max_girth_retries + 1} tries (best girth {best})",
                            stage="gadget", best=best)


class Lambda1Estimate(NamedTuple):
    """Top eigenvalue of ``T^inf G_0`` via the nonbacktracking Perron value."""

    lambda1: float | None
    theta: float
    supercritical: bool
    gap: float | None


def verify_gadget_lambda1(g0: MultiGraph, target: SpectralTarget | int, tol: float = 1e-10) -> Lambda1Estimate:
    """``theta = rho(B_0)`` and ``lambda_1 = theta + (d-1)/theta`` when ``theta > sqrt(d-1)``.

    ``target`` may be a :class:`SpectralTarget` (the gap to ``mu`` is then
    reported) or just the degree ``d``.
    """
    if g0.n == 0:
        raise InputError("empty gadget")
    d = target.d if isinstance(target, SpectralTarget) else int(target)
    theta = nb_spectral_radius(build_nb_operator(g0), tol=tol).rho
    if theta <= math.sqrt(d - 1) + 1e-12:
        return Lambda1Estimate(None, theta, False, None)
    lam = ihara_map(d, theta)
    gap = lam - target.mu if isinstance(target, SpectralTarget) else None
    return Lambda1Estimate(lam, theta, True, gap)


def verify_gadget_lambda2(g0: MultiGraph, d: int, L: int, tol: float = 1e-8, seed: int = 0) -> float:
    """Second adjacency eigenvalue of the materialized ``T^L G_0``."""
    teg = tree_extend(g0, d, L)
    if teg.full.n < 2:
        raise InputError("extension has fewer than two vertices")
    return float(lanczos_topk(teg.full, 2, tol=tol, seed=seed, fingerprint=False).eigenvalues[1])


# ---------------------------------------------------------------- patching
@dataclass
class SpreadSet:
    vertices: np.ndarray
    min_dist: float
    requested: float
    achieved: bool


def select_spread_set(f0: MultiGraph, M: int, min_dist: float, start: int = 0) -> SpreadSet:
    """Greedy scattered set of ``M`` vertices.

    Vertices are chosen by first-fit passes over the ids (starting at
    ``start``) with a decreasing distance threshold: a pass at threshold
    ``t`` takes every vertex whose distance to the chosen set exceeds
    ``t``.  The first pass uses ``t = min_dist``; later passes, needed only
    when the maximal scattered set at ``min_dist`` is too small, lower
    ``t`` one step at a time, so each pick stays as far from the chosen set
    as the remaining vertices allow.  The result is flagged as achieved
    when the pairwise minimum distance exceeds ``min_dist``.
    """
    n = f0.n
    if M > n:
        raise ParameterError(f"M={M} exceeds the vertex count {n}")
    if M <= 0:
        return SpreadSet(np.zeros(0, dtype=np.int64), math.inf, min_dist, True)
    adj = f0.adjacency
    big = n + 1
    dist = [big] * n
    chosen: list[int] = []
    worst = math.inf
    order = [(int(start) + k) % n for k in range(n)]
    threshold = int(min(math.floor(min_dist), n))
    while len(chosen) < M:
        for v in order:
            if dist[v] <= threshold:
                continue
            chosen.append(v)
            worst = min(worst, math.inf if dist[v] == big else dist[v])
            dist[v] = 0
            queue = deque([v])
            while queue:
                x = queue.popleft()
                nd = dist[x] + 1
                for y in adj[x]:
                    if nd < dist[y]:
                        dist[y] = nd
                        queue.append(y)
            if len(chosen) == M:
                break
        threshold -= 1
    vertices = np.array(sorted(chosen), dtype=np.int64)
    return SpreadSet(vertices, worst, min_dist, worst > min_dist)


def _leaf_count(teg: TreeExtendedGraph) -> int:
    return int(teg.level_sizes()[teg.L]) * (teg.d - 1) if teg.L >= 1 else int(teg.f.sum())


@dataclass
class PatchPlan:
    """Record of an R-patching.

    Attributes
    ----------
    U : ndarray
        Deleted base vertices.
    M : int
    min_dist_requested, min_dist_achieved : float
    offsets : ndarray
        Vertex offset of the base remainder (0) and every gadget in ``P``.
    leaf_parents : ndarray
        Level-``L`` gadget vertices (ids in ``P``), one entry per leaf of
        ``T(T^L F_i)``.
    base_slots : ndarray
        Base vertices (ids in ``P``) each leaf is identified with.
    relabel : ndarray
        Base vertex id map ``F_0 -> P`` (``-1`` for deleted).
    """

    U: np.ndarray
    M: int
    min_dist_requested: float
    min_dist_achieved: float
    offsets: np.ndarray
    leaf_parents: np.ndarray
    base_slots: np.ndarray
    relabel: np.ndarray
    attempts: int = 1

    def to_json(self) -> dict:
        return {"M": self.M, "U": self.U.tolist(), "min_dist_requested": self.min_dist_requested,
                "min_dist_achieved": self.min_dist_achieved, "attempts": self.attempts}


def r_patch(f0: MultiGraph, gadgets: list[TreeExtendedGraph], R: float, d: int | None = None,
            max_attempts: int = 3) -> tuple[MultiGraph, PatchPlan]:
    """R-patching of the gadget extensions to the d-regular base ``f0``.

    Every gadget ``T^L F_i`` is augmented once more; its leaves are
    identified, in order (gadget id, vertex id), with the degree slots freed
    by deleting a spread set ``U`` of ``M = leaves / d`` base vertices, in
    increasing base vertex order.

    Raises
    ------
    ParameterError
        If the total leaf count is not divisible by ``d``, or ``f0`` is not
        d-regular.
    ConstructionError
        If no tried spread set has disjoint closed neighborhoods.
    """
    d = d or (gadgets[0].d if gadgets else f0.max_degree)
    if not f0.is_regular(d):
        raise ParameterError(f"the base graph must be {d}-regular")
    if any(t.d != d or t.L < 1 for t in gadgets):
        raise ParameterError("gadgets must be depth >= 1 extensions with the same d")
    leaves = sum(_leaf_count(t) for t in gadgets)
    if leaves % d:
        raise ParameterError(f"total leaf count {leaves} is not divisible by d={d}; "
                             f"add padding gadgets (see pad_gadgets)")
    M = leaves // d
    if M == 0:
        plan = PatchPlan(np.zeros(0, np.int64), 0, 4 * R, math.inf, np.zeros(1, np.int64),
                         np.zeros(0, np.int64), np.zeros(0, np.int64), np.arange(f0.n))
        if gadgets:
            out, offs = disjoint_union([f0] + [t.full for t in gadgets])
            plan.offsets = offs
            return out, plan
        return f0, plan
    for attempt in range(max_attempts):
        spread = select_spread_set(f0, M, 4 * R, start=attempt * max(1, f0.n // max_attempts))
        h, relabel = delete_vertices(f0, spread.vertices)
        deficit = d - h.degrees
        if np.all((deficit == 0) | (deficit == 1)) and int(deficit.sum()) == M * d:
            break
        log.info("spread set %d has overlapping neighborhoods (min distance %s)", attempt, spread.min_dist)
    else:
        raise ConstructionError(f"no spread set of {M} vertices with disjoint neighborhoods after "
                                f"{max_attempts} attempts", stage="patch", best=spread.min_dist)
    slots = np.flatnonzero(deficit)
    graph_list = [h] + [t.full for t in gadgets]
    union, offsets = disjoint_union(graph_list)
    parents = []
    for t, off in zip(gadgets, offsets[1:]):
        parents.append(np.repeat(t.level(t.L) + off, d - 1))
    leaf_parents = np.concatenate(parents)
    patch_edges = np.column_stack([slots, leaf_parents])
    P = MultiGraph(union.n, np.ascontiguousarray(np.concatenate([union.edges, np.sort(patch_edges, axis=1)])))
    if not P.is_regular(d):
        raise ConstructionError("patched graph is not d-regular", stage="patch")
    plan = PatchPlan(spread.vertices, M, 4 * R, spread.min_dist, offsets, leaf_parents, slots, relabel,
                     attempts=attempt + 1)
    return P, plan


def pad_gadgets(leaves: int, d: int, L: int) -> list[TreeExtendedGraph]:
    """Extra ``T^L K_2`` trees making the total leaf count divisible by ``d``.

    Each copy adds ``2(d-1)^(L+1)`` leaves; at most ``d - 1`` copies are
    needed when ``d`` is odd, and the count is always even when ``d`` is even.
    """
    k2 = from_edge_list(2, [(0, 1)])
    step = 2 * (d - 1) ** (L + 1)
    pads = []
    while (leaves + len(pads) * step) % d:
        if len(pads) >= d:
            raise ParameterError(f"leaf count {leaves} cannot be padded to a multiple of d={d}")
        pads.append(tree_extend(k2, d, L))
    return pads


# --------------------------------------------------------------- synthesis
def parse_targets(targets, d: int) -> tuple[list[float], int, int]:
    """Split targets into regular ones, copies of ``d`` and ``2 sqrt(d-1)`` omissions.

    Returns
    -------
    regular : list of float
        Sorted in decreasing order.
    n_top : int
        Number of targets equal to ``d``.
    n_edge : int
        Number of targets equal to ``2 sqrt(d-1)``.
    """
    vals = [float(t) for t in targets]
    if not vals:
        raise ParameterError("empty target list")
    edge = 2.0 * math.sqrt(d - 1)
    regular, n_top, n_edge = [], 0, 0
    for mu in vals:
        if abs(mu - d) <= DEGENERATE_TOL:
            n_top += 1
        elif abs(mu - edge) <= DEGENERATE_TOL:
            n_edge += 1
        elif not edge + ENDPOINT_MARGIN < mu < d - ENDPOINT_MARGIN:
            raise ParameterError(f"target {mu} must lie in ({edge:.9g}, {d}) at least "
                                 f"{ENDPOINT_MARGIN:g} from both ends, or equal an endpoint")
        else:
            regular.append(mu)
    return sorted(regular, reverse=True), n_top, n_edge


@dataclass
class SynthesisResult:
    graph: MultiGraph
    report: dict
    plan: PatchPlan | None = field(default=None, repr=False)
    gadgets: list = field(default_factory=list, repr=False)


def _accepted_gadget(target: SpectralTarget, n: int, L: int, R: int, seed: int, index: int,
                     tol: float, attempts: int) -> tuple[MultiGraph, dict]:
    best = None
    for a in range(attempts):
        spec = RngSpec(seed, 1000 + 100 * index + a)
        g0, prov = construct_gadget(GadgetSpec(target, n, R, L), spec)
        est = verify_gadget_lambda1(g0, target)
        gap = abs(est.gap) if est.supercritical else math.inf
        prov.update(theta_hat=est.theta, lambda1_hat=est.lambda1, attempt=a)
        if best is None or gap < best[0]:
            best = (gap, g0, prov)
        if gap <= tol:
            break
    if not math.isfinite(best[0]):
        raise ConstructionError(f"no supercritical gadget for mu={target.mu}", stage="gadget")
    return best[1], best[2]


def auto_gadget_size(mus, d: int, base_size: int, depth: int, packing: float = 8.0,
                     lo: int = 20, hi: int = 2000) -> int:
    """Largest gadget size whose expected patch count ``M`` fits ``base_size / packing``.

    A gadget on ``n`` vertices percolated at ``p`` has about
    ``n d (1-p) (d-1)^L`` leaves after the extra augmentation, i.e.
    ``n (1-p) (d-1)^L`` deleted base vertices.  Distance-3 packings of
    random cubic graphs found by the greedy selection hold roughly
    ``base_size / 6`` vertices; ``packing = 8`` leaves a margin.
    """
    per_vertex = sum((1.0 - target_from_mu(d, mu).p) for mu in mus) * (d - 1) ** depth
    if per_vertex == 0:
        return hi
    n = int(base_size / packing / per_vertex)
    n -= n % 2 if d % 2 else 0
    return int(min(hi, max(lo, n)))


def synthesize(targets, d: int, base_size: int, depth: int = 10, seed: int = 0,
               gadget_size: int | None = None, R: int = 4, gadget_tol: float = 0.02,
               gadget_attempts: int = 50, friedman_slack: float = 0.1,
               top_copy_size: int = 100, tol: float = 1e-8) -> SynthesisResult:
    """Build a d-regular graph whose eigenvalues ``lambda_2, ...`` approximate ``targets``.

    Parameters
    ----------
    targets : sequence of float
        ``mu_2 >= ... >= mu_k``; ``mu_1 = d`` is implicit.  Values equal to
        ``d`` add disjoint random regular components; values equal to
        ``2 sqrt(d-1)`` need no gadget and are omitted.
    d : int
    base_size : int
        Vertex count of the base graph ``F_0``.
    depth : int
        Extension depth ``L``.
    seed : int
    gadget_size : int, optional
        Vertex count of each gadget's ``H``; see :func:`auto_gadget_size`
        for the default.
    R : int
        Gadget girth goal; the spread set aims for distance ``> 4R``.
    gadget_tol : float
        Gadgets are resampled until ``|lambda1_hat - mu| <= gadget_tol``
        (best of ``gadget_attempts`` otherwise).
    friedman_slack : float
        The base is resampled until ``max(lambda_2, -lambda_n) <= 2 sqrt(d-1) + slack``.
    top_copy_size : int
        Size of each extra component for targets equal to ``d``.
    """
    stage = "targets"
    try:
        regular, n_top, n_edge = parse_targets(targets, d)
        report: dict = {"targets": [float(t) for t in targets], "d": d, "seed": seed,
                        "depth": depth, "R": R, "omitted_edge_targets": n_edge}
        stage = "gadget"
        if gadget_size is None:
            gadget_size = auto_gadget_size(regular, d, base_size, depth)
        report["gadget_size"] = gadget_size
        gadget_graphs, gadget_reports, extensions = [], [], []
        for i, mu in enumerate(regular):
            tgt = target_from_mu(d, mu)
            g0, prov = _accepted_gadget(tgt, gadget_size, depth, R, seed, i, gadget_tol, gadget_attempts)
            est_size = projected_size(g0, d, depth)
            log.info("gadget %d: T^%d has %d vertices (~%.1f MB)", i, depth, est_size, est_size * 80 / 2**20)
            teg = tree_extend(g0, d, depth)
            lam2 = verify_gadget_lambda2(g0, d, min(depth, 6), tol=tol) if g0.n else float("nan")
            gadget_graphs.append(g0)
            extensions.append(teg)
            gadget_reports.append({"seed": prov["seed"], "stream": prov["stream"], "n": g0.n, "p": tgt.p,
                                   "target": mu, "theta_hat": prov["theta_hat"],
                                   "lambda1_hat": prov["lambda1_hat"], "lambda2_TL": lam2,
                                   "girth": float(girth(g0)), "girth_retries": prov["retries"],
                                   "attempt": prov["attempt"], "extension_size": teg.full.n})
        leaves = sum(_leaf_count(t) for t in extensions)
        pads = pad_gadgets(leaves, d, depth)
        report["gadgets"] = gadget_reports
        report["padding"] = len(pads)

        stage = "base"
        edge = 2.0 * math.sqrt(d - 1)
        for b in range(20):
            f0 = sample_simple_regular(base_size, d, RngSpec(seed, 1 + b))
            ev = lanczos_topk(f0, 2, tol=tol, fingerprint=False).eigenvalues
            low = lanczos_topk(f0, 1, tol=tol, which="SA", fingerprint=False).eigenvalues[0]
            base_lam2 = float(max(ev[1], -low))
            if base_lam2 <= edge + friedman_slack:
                break
        else:
            raise ConstructionError(f"no base graph with max(lambda_2, -lambda_n) <= {edge + friedman_slack}",
                                    stage="base", best=base_lam2)
        report["base"] = {"n": base_size, "lambda2": float(ev[1]), "lambda_min": float(low),
                          "seed": seed, "stream": 1 + b}

        stage = "patch"
        P, plan = r_patch(f0, extensions + pads, R, d)
        tops = [sample_simple_regular(top_copy_size, d, RngSpec(seed, 500 + j)) for j in range(n_top)]
        if tops:
            P, _ = disjoint_union([P] + tops)
        ext_total = sum(t.full.n for t in extensions + pads)
        report["patch"] = {"M": plan.M, "min_dist_requested": plan.min_dist_requested,
                           "min_dist_achieved": plan.min_dist_achieved, "attempts": plan.attempts,
                           "lemma_hypotheses": {
                               "base_girth_8R": False,
                               "spread_4R": plan.min_dist_achieved > plan.min_dist_requested,
                               "size_ratio": 2 * d**3 * ext_total / base_size,
                               "perturbation": math.sqrt(d - 1) / R}}

        stage = "final"
        k = 1 + n_top + len(regular) + 1
        fin = lanczos_topk(P, min(k, P.n), tol=tol)
        eig = fin.eigenvalues
        expected = [float(d)] * (1 + n_top) + regular
        report["final"] = {"n": P.n, "m": P.edge_count, "eigenvalues": eig.tolist(),
                           "residuals": fin.residuals.tolist(), "fingerprint": fin.fingerprint,
                           "regular": bool(P.is_regular(d)), "simple": bool(P.is_simple())}
        report["deviations"] = [float(eig[j] - mu) for j, mu in enumerate(expected)]
        if not P.is_regular(d):
            raise ConstructionError("output is not d-regular", stage="final")
        return SynthesisResult(P, report, plan, gadget_graphs)
    except ConstructionError:
        raise
    except ForgeError as exc:
        raise ConstructionError(str(exc), stage=stage) from exc
