"""Random graph models: configuration model, percolation, branching trees,
and the local resampling (switching) dynamics around a ball.

Every sampler takes an :class:`RngSpec`; the underlying bit generator is
Philox (counter based) keyed by a :class:`numpy.random.SeedSequence` built
from ``(seed, stream, *extra)``, so independent trials can be drawn in any
order and still reproduce exactly.
"""

from __future__ import annotations

import math
import warnings
from collections import Counter, deque
from dataclasses import dataclass, field

import numpy as np

from .errors import ConsistencyError, ParameterError, SamplingError
from .graph import MultiGraph, _component_count, bfs_ball

__all__ = [
    "RngSpec",
    "as_rng",
    "sample_configuration_model",
    "sample_simple_regular",
    "percolate",
    "sample_branching_tree",
    "sample_branching_generations",
    "BranchingStats",
    "kesten_stigum_stats",
    "TAIL_GRID",
    "ResamplingData",
    "build_resampling_data",
    "switch_indicator",
    "apply_local_resampling",
    "reverse_resampling_data",
]

TAIL_GRID = (1.0, 2.0, 4.0, 8.0)


@dataclass(frozen=True)
class RngSpec:
    """Reproducible random stream identifier.

    Parameters
    ----------
    seed : int
        Master seed (non-negative, up to 64 bits).
    stream : int
        Trial or purpose index.
    """

    seed: int
    stream: int = 0

    def __post_init__(self):
        if self.seed < 0 or self.stream < 0:
            raise ParameterError("seed and stream must be non-negative")

    def generator(self, *extra: int) -> np.random.Generator:
        """Fresh Philox generator keyed by ``(seed, stream, *extra)``."""
        ss = np.random.SeedSequence([int(self.seed), int(self.stream), *map(int, extra)])
        return np.random.Generator(np.random.Philox(ss))

    def child(self, stream: int) -> "RngSpec":
        """Same seed, different stream."""
        return RngSpec(self.seed, int(stream))


def as_rng(rng) -> np.random.Generator:
    """Accept an :class:`RngSpec`, a Generator, or an int seed."""
    if isinstance(rng, RngSpec):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    return RngSpec(int(rng)).generator()


# ------------------------------------------------------------ graph models
def sample_configuration_model(n: int, d: int, rng) -> MultiGraph:
    """Uniform perfect matching of the ``n*d`` half-edges.

    Parameters
    ----------
    n, d : int
        Vertex count and degree; ``n*d`` must be even.
    rng : RngSpec or numpy Generator

    Returns
    -------
    MultiGraph
        d-regular multigraph (loops count twice).
    """
    if d < 1 or n < 0:
        raise ParameterError("need d >= 1 and n >= 0")
    if (n * d) % 2:
        raise ParameterError(f"n*d = {n * d} is odd; no perfect matching exists")
    gen = as_rng(rng)
    stubs = np.repeat(np.arange(n, dtype=np.int64), d)
    pairs = stubs[gen.permutation(n * d)].reshape(-1, 2)
    return MultiGraph(n, np.ascontiguousarray(np.sort(pairs, axis=1)))


def sample_simple_regular(n: int, d: int, rng, max_tries: int = 10_000) -> MultiGraph:
    """Configuration model conditioned on simplicity, by rejection."""
    gen = as_rng(rng)
    for _ in range(max_tries):
        g = sample_configuration_model(n, d, gen)
        if g.is_simple():
            return g
    raise SamplingError(f"no simple {d}-regular graph on {n} vertices in {max_tries} tries")


def percolate(h: MultiGraph, p: float, rng) -> MultiGraph:
    """Keep every edge (each parallel copy and loop separately) with probability ``p``."""
    if not 0.0 <= p <= 1.0:
        raise ParameterError(f"percolation probability must lie in [0, 1], got {p}")
    gen = as_rng(rng)
    keep = gen.random(h.edge_count) < p
    return MultiGraph(h.n, np.ascontiguousarray(h.edges[keep]))


# --------------------------------------------------------- branching trees
def sample_branching_generations(d: int, p: float, depth: int, trials: int, rng) -> np.ndarray:
    """Generation sizes of ``trials`` independent percolated (d-1)-ary trees.

    Returns
    -------
    ndarray of shape (trials, depth + 1)
        Column ``l`` holds ``Z_l``; ``Z_0 = 1``.
    """
    if d < 3:
        raise ParameterError("branching trees need d >= 3")
    if not 0.0 <= p <= 1.0:
        raise ParameterError(f"p must lie in [0, 1], got {p}")
    if depth < 0:
        raise ParameterError("depth must be non-negative")
    gen = as_rng(rng)
    out = np.zeros((trials, depth + 1), dtype=np.int64)
    z = np.ones(trials, dtype=np.int64)
    out[:, 0] = z
    for ell in range(1, depth + 1):
        z = gen.binomial(z * (d - 1), p)
        out[:, ell] = z
    return out


def sample_branching_tree(d: int, p: float, depth: int, rng) -> np.ndarray:
    """Profile ``(Z_0, ..., Z_depth)`` of one percolated (d-1)-ary tree."""
    return sample_branching_generations(d, p, depth, 1, rng)[0]


@dataclass
class BranchingStats:
    """Summary of normalized generation sizes ``W_l = Z_l / (p(d-1))^l``."""

    d: int
    p: float
    depth: int
    trials: int
    normalized_sizes: np.ndarray
    mean: float
    variance: float
    tail_counts: list
    warning: str | None = None

    @property
    def std_error(self) -> float:
        return math.sqrt(self.variance / self.trials) if self.trials > 1 else math.inf

    def to_json(self) -> dict:
        out = {
            "d": self.d,
            "p": self.p,
            "depth": self.depth,
            "trials": self.trials,
            "mean": self.mean,
            "variance": self.variance,
            "tails": [{"x": x, "count": c} for x, c in self.tail_counts],
        }
        if self.warning:
            out["warning"] = self.warning
        return out


def kesten_stigum_stats(d: int, p: float, depth: int, trials: int, rng,
                        grid=TAIL_GRID) -> BranchingStats:
    """Monte-Carlo statistics of the normalized generation size at ``depth``.

    A subcritical ``p <= 1/sqrt(d-1)`` is allowed but flagged in
    ``BranchingStats.warning``.
    """
    warn = None
    if p <= 1.0 / math.sqrt(d - 1):
        warn = f"p={p} is not above 1/sqrt(d-1)={1 / math.sqrt(d - 1):.6f}"
        warnings.warn(warn, RuntimeWarning, stacklevel=2)
    if p == 0.0:
        raise ParameterError("p = 0 leaves nothing to normalize")
    z = sample_branching_generations(d, p, depth, trials, rng)[:, depth]
    w = z / (p * (d - 1)) ** depth
    tails = [(float(x), int(np.count_nonzero(w >= x))) for x in grid]
    var = float(w.var(ddof=1)) if trials > 1 else 0.0
    return BranchingStats(d, float(p), depth, trials, w, float(w.mean()), var, tails, warn)


# ------------------------------------------------------ local resampling
@dataclass
class ResamplingData:
    """Switching data around the ball ``T = B_ell(o)``.

    ``boundary[alpha] = (l, a, e)`` is the oriented boundary edge with
    ``l`` in the ball, ``a`` outside, stored as row ``e`` of the edge array.
    ``partners[alpha] = (b, c, e)`` is the oriented partner edge.  ``radius``
    is the separation radius ``R/4`` used by :func:`switch_indicator`.
    """

    center: int
    ell: int
    boundary: list
    partners: list
    T_vertices: frozenset
    radius: int
    W: frozenset = field(default_factory=frozenset)

    @property
    def mu(self) -> int:
        return len(self.boundary)

    def triple(self, alpha: int) -> tuple[int, int, int]:
        _, a, _ = self.boundary[alpha]
        b, c, _ = self.partners[alpha]
        return a, b, c


def _switch_radius(n: int, d: int) -> int:
    from .greens import ParameterSet

    return max(1, int(ParameterSet(max(n, 3), d).R // 4))


def _adjacency_without(g: MultiGraph, removed: frozenset) -> list[list[int]]:
    adj = g.adjacency
    return [[] if v in removed else [y for y in adj[v] if y not in removed] for v in range(g.n)]


def _ball(adj, sources, r) -> dict:
    dist = {}
    queue = deque()
    for s in sources:
        if s not in dist:
            dist[s] = 0
            queue.append(s)
    while queue:
        x = queue.popleft()
        if dist[x] >= r:
            continue
        for y in adj[x]:
            if y not in dist:
                dist[y] = dist[x] + 1
                queue.append(y)
    return dist


def build_resampling_data(g: MultiGraph, V0, o: int, ell: int, rng,
                          radius: int | None = None, d: int | None = None) -> ResamplingData:
    """Boundary edges of ``B_ell(o)`` plus uniformly drawn partner edges.

    Parameters
    ----------
    g : MultiGraph
        The percolated graph (all edges lie inside ``V0``).
    V0 : iterable of int or None
        Base vertex set; ``None`` means every vertex.
    o : int
        Ball center.
    ell : int
        Ball radius.
    rng : RngSpec or Generator
    radius : int, optional
        Separation radius ``R/4``; defaults to the parameter-set value with
        the floor ``R >= 4``.
    d : int, optional
        Degree used for the default radius; defaults to ``g.max_degree``.

    Raises
    ------
    SamplingError
        If the ball covers ``V0`` or no oriented edge has both endpoints
        outside the ball.
    """
    V0 = frozenset(range(g.n)) if V0 is None else frozenset(int(v) for v in V0)
    if o not in V0:
        raise ParameterError("center must lie in V0")
    if radius is None:
        radius = _switch_radius(len(V0), d or max(g.max_degree, 3))
    gen = as_rng(rng)
    T = frozenset(bfs_ball(g, [o], ell).vertices)
    if V0 <= T:
        raise SamplingError("the ball covers the whole base set; nothing to resample against")
    tail, head = g.directed
    in_T = np.zeros(g.n, dtype=bool)
    in_T[list(T)] = True
    in_V0 = np.zeros(g.n, dtype=bool)
    in_V0[list(V0)] = True
    out_t, out_h = ~in_T[tail] & in_V0[tail], ~in_T[head] & in_V0[head]
    bmask = in_T[tail] & out_h
    boundary = sorted((int(t), int(h), int(x >> 1))
                      for x, t, h in zip(np.flatnonzero(bmask), tail[bmask], head[bmask]))
    eligible = out_t & out_h
    if boundary and not eligible.any():
        raise SamplingError("no oriented edge lies outside the ball; cannot draw partners")
    partners = []
    total = tail.shape[0]
    for _ in boundary:
        while True:
            x = int(gen.integers(total))
            if eligible[x]:
                break
        partners.append((int(tail[x]), int(head[x]), x >> 1))
    data = ResamplingData(int(o), int(ell), boundary, partners, T, int(radius))
    data.W = _admissible_set(g, data)
    return data


def _admissible_set(g: MultiGraph, data: ResamplingData) -> frozenset:
    adj = _adjacency_without(g, data.T_vertices)
    return frozenset(a for a in range(data.mu) if _indicator(adj, data, a))


def _indicator(adj, data: ResamplingData, alpha: int) -> bool:
    a, b, c = data.triple(alpha)
    ball = _ball(adj, (a, b, c), data.radius)
    # condition (1): the ball plus the new edge {a, b} is a tree.  Each
    # non-loop edge is counted from its smaller endpoint; loops once.
    pairs = [(x, y) for x in ball for y in adj[x] if y in ball and x <= y]
    pairs.append((a, b))
    if len(pairs) != len(ball) - 1 or _component_count(ball.keys(), pairs) != 1:
        return False
    # condition (2): every other triple lies farther than the radius
    for beta in range(data.mu):
        if beta != alpha and any(v in ball for v in data.triple(beta)):
            return False
    return True


def switch_indicator(g: MultiGraph, data: ResamplingData, alpha: int) -> bool:
    """Admissibility ``I_alpha`` of the switch at index ``alpha``.

    True iff (1) the radius ``R/4`` ball around ``{a, b, c}`` in ``g`` with
    the ball ``T`` removed, together with the new edge ``{a, b}``, is a
    tree, and (2) that radius separates ``{a, b, c}`` from every other
    triple.
    """
    if not 0 <= alpha < data.mu:
        raise ParameterError("alpha out of range")
    return _indicator(_adjacency_without(g, data.T_vertices), data, alpha)


def _check_row(g: MultiGraph, row: int, x: int, y: int) -> None:
    if row >= g.edge_count or sorted((int(g.edges[row, 0]), int(g.edges[row, 1]))) != sorted((x, y)):
        raise ConsistencyError(f"edge {{{x},{y}}} is not stored at row {row}; data is stale")


def apply_local_resampling(g: MultiGraph, data: ResamplingData) -> MultiGraph:
    """Apply the switches ``{l,a},{b,c} -> {l,c},{a,b}`` for every ``alpha in W``.

    Edge rows keep their positions, so the output can be switched back with
    :func:`reverse_resampling_data`.
    """
    edges = g.edges.copy()
    for alpha in sorted(data.W):
        l, a, e1 = data.boundary[alpha]
        b, c, e2 = data.partners[alpha]
        _check_row(g, e1, l, a)
        _check_row(g, e2, b, c)
        edges[e1] = sorted((l, c))
        edges[e2] = sorted((a, b))
    out = MultiGraph(g.n, edges)
    before = bfs_ball(g, [data.center], data.ell)
    after = bfs_ball(out, [data.center], data.ell)
    pairs_before = Counter(tuple(g.edges[e]) for e in before.edges)
    pairs_after = Counter(tuple(out.edges[e]) for e in after.edges)
    if before.vertices != after.vertices or pairs_before != pairs_after:
        raise ConsistencyError("switching changed the ball around the center")
    return out


def reverse_resampling_data(g_switched: MultiGraph, data: ResamplingData) -> ResamplingData:
    """Data that undoes :func:`apply_local_resampling` on the switched graph.

    For ``alpha in W`` the boundary edge becomes ``(l, c)`` and the partner
    becomes ``(b, a)``; other indices are unchanged.  ``W`` is recomputed on
    the switched graph.
    """
    boundary, partners = list(data.boundary), list(data.partners)
    for alpha in data.W:
        l, a, e1 = data.boundary[alpha]
        b, c, e2 = data.partners[alpha]
        boundary[alpha] = (l, c, e1)
        partners[alpha] = (b, a, e2)
    rev = ResamplingData(data.center, data.ell, boundary, partners, data.T_vertices, data.radius)
    rev.W = _admissible_set(g_switched, rev)
    return rev
