import cmath
import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from edgeforge.errors import DomainError, InputError, NumericError, ParameterError
from edgeforge.graph import adjacency_matrix, complete_graph, empty_graph, from_edge_list
from edgeforge.greens import (
    FinitizedOperator,
    ParameterSet,
    SpectralDomainPoint,
    delta_diagnostics,
    ext_green,
    finitize,
    green_columns,
    green_matrix,
    local_ext_green,
    m_d,
    m_sc,
    omega_residuals,
    regular_tree_ball,
    rho_d,
    schur_identity_suite,
    tree_path_green,
    ward_residual,
    x_ell,
    y_ell,
)
from edgeforge.random_models import RngSpec, percolate, sample_configuration_model, sample_simple_regular
from edgeforge.trees import tree_extend

P = 0.8850781059358213
GOLDEN = (math.sqrt(5) - 1) / 2  # m_sc(i) / i


def _gadget(n=40, seed=3, p=0.885):
    return percolate(sample_configuration_model(n, 3, RngSpec(seed)), p, RngSpec(seed, 1))


def _z_grid(k=20, eta_min=0.1):
    gen = np.random.default_rng(0)
    return [complex(e, h) for e, h in zip(gen.uniform(-3, 3, k), gen.uniform(eta_min, 2, k))]


# ------------------------------------------------------------ closed forms
def test_msc_at_i():
    assert m_sc(1j) == pytest.approx(0.6180340j, abs=1e-7)
    assert m_sc(1j) == pytest.approx(GOLDEN * 1j, abs=1e-15)


def test_msc_large_z():
    z = 100j
    assert abs(m_sc(z) + 1 / z) < 1e-4


def test_msc_quadratic_and_branch_on_grid():
    gen = np.random.default_rng(1)
    z = gen.uniform(-5, 5, 1000) + 1j * np.exp(gen.uniform(-8, 2, 1000))
    m = m_sc(z)
    assert np.max(np.abs(m * m + z * m + 1)) < 1e-14 * 10
    assert np.all(m.imag > 0)
    assert np.all(np.abs(m) <= 1 + 1e-12)


def test_domain_errors():
    for fn in (m_sc, lambda z: m_d(z, 3)):
        with pytest.raises(DomainError):
            fn(1.0 + 0j)
        with pytest.raises(DomainError):
            fn(1.0 - 0.1j)
    with pytest.raises(DomainError):
        SpectralDomainPoint(0.5 + 0j)


def test_domain_point_kappa():
    pt = SpectralDomainPoint(2.2 + 0.05j)
    assert pt.E == 2.2 and pt.eta == 0.05 and pt.kappa == pytest.approx(0.2)


def test_md_at_i():
    # 1 / (1 + 1.5 * 0.6180340) = 0.5189276
    assert m_d(1j, 3) == pytest.approx(0.5189276j, abs=1e-7)
    assert m_d(1j, 3) == pytest.approx(1 / (-1j - 1.5 * GOLDEN * 1j), abs=1e-15)


def test_md_large_degree_limit():
    for z in (1j, 0.5 + 0.2j, -1.9 + 0.01j):
        assert abs(m_d(z, 10**6) - m_sc(z)) < 1e-5


@pytest.mark.parametrize("d", [3, 4, 7])
def test_rho_normalized_and_symmetric(d):
    total, err = integrate.quad(lambda x: rho_d(x, d), -2, 2, epsabs=1e-12, epsrel=1e-12)
    assert abs(total - 1) < 1e-8
    assert rho_d(2.0, d) == 0 and rho_d(-2.0, d) == 0 and rho_d(3.0, d) == 0
    xs = np.linspace(-2, 2, 101)
    assert np.allclose(rho_d(xs, d), rho_d(-xs, d), atol=1e-15)


@pytest.mark.parametrize("d", [3, 5])
def test_md_matches_quadrature(d):
    for z in _z_grid():
        re = integrate.quad(lambda x: (rho_d(x, d) / (x - z)).real, -2, 2, epsabs=1e-12, epsrel=1e-12, limit=200)[0]
        im = integrate.quad(lambda x: (rho_d(x, d) / (x - z)).imag, -2, 2, epsabs=1e-12, epsrel=1e-12, limit=200)[0]
        assert abs(complex(re, im) - m_d(z, d)) < 1e-6


# -------------------------------------------------------- tree recursions
def test_fixed_points():
    for z in _z_grid(10):
        ms, md = m_sc(z), m_d(z, 3)
        for ell in range(41):
            assert abs(y_ell(ms, z, 3, ell) - ms) < 1e-12
            assert abs(x_ell(ms, z, 3, ell) - md) < 1e-12


def test_recursion_matches_dense_tree():
    z, delta = 0.7 + 0.3j, 0.2 + 0.4j
    for d in (3, 4):
        h, ghost = regular_tree_ball(d, 5)
        assert abs(ext_green(h, ghost, delta, z, d)[0, 0] - y_ell(delta, z, d, 5)) < 1e-10
        h, ghost = regular_tree_ball(d, 5, root_degree=d)
        assert abs(ext_green(h, ghost, delta, z, d)[0, 0] - x_ell(delta, z, d, 5)) < 1e-10


def test_path_entry_matches_dense_tree():
    z, delta, d, ell = 1.1 + 0.4j, 0.3 + 0.5j, 3, 4
    h, ghost = regular_tree_ball(d, ell)
    G = ext_green(h, ghost, delta, z, d)
    leaf = h.n - 1
    assert abs(G[0, leaf] - tree_path_green(delta, z, d, ell)) < 1e-12


def test_recursion_errors():
    with pytest.raises(ParameterError):
        y_ell(0.1, 1j, 3, -1)
    with pytest.raises(ParameterError):
        x_ell(0.1, 1j, 3, -1)
    # delta = -z makes the first pivot vanish
    with pytest.raises(NumericError):
        y_ell(-(0.5 + 1e-3j), 0.5 + 1e-3j, 3, 2)


def test_taylor_expansion_constant_bounded():
    gen = np.random.default_rng(2)
    ratios = {}
    for z in (2.5 + 0.5j, 1 + 0.5j, 0.3 + 1j, -1.5 + 0.3j):
        m = m_sc(z)
        for ell in (1, 2, 4, 8):
            for eps in (1e-2, 1e-3):
                dl = eps * cmath.exp(2j * math.pi * gen.random())
                pred = m + m ** (2 * ell + 2) * dl + m ** (2 * ell + 3) * (1 - m ** (2 * ell + 2)) / (1 - m * m) * dl**2
                ratios[(z, ell, eps)] = abs(y_ell(m + dl, z, 3, ell) - pred) / (ell**2 * eps**3)
    assert max(ratios.values()) < 1.0
    for (z, ell, eps), c in ratios.items():
        if eps == 1e-3:
            assert c <= 2 * ratios[(z, ell, 1e-2)] + 1e-9


# -------------------------------------------------------------- ext_green
def test_ext_single_vertex():
    z = 0.4 + 0.6j
    one = empty_graph(1)
    assert ext_green(one, [3], m_sc(z), z, 3)[0, 0] == pytest.approx(m_d(z, 3), abs=1e-15)
    assert ext_green(one, [2], m_sc(z), z, 3)[0, 0] == pytest.approx(m_sc(z), abs=1e-15)
    with pytest.raises(InputError):
        ext_green(one, [-1], m_sc(z), z, 3)


# ----------------------------------------------------------- finitization
def test_finitize_single_vertex_is_md():
    z = 1.3 + 0.2j
    ev = green_matrix(finitize(empty_graph(1), 3), z)
    assert ev.G[0, 0] == pytest.approx(m_d(z, 3), abs=1e-15)
    assert ev.mN == pytest.approx(m_d(z, 3), abs=1e-15)


def test_finitize_regular_has_no_loops():
    op = finitize(complete_graph(4), 3)
    assert np.all(op.f == 0)
    z = 0.5j
    h = adjacency_matrix(complete_graph(4)).toarray() / math.sqrt(2)
    assert np.allclose(op.matrix(z), h - z * np.eye(4))


def test_finitize_rejects_high_degree():
    with pytest.raises(InputError):
        finitize(complete_graph(5), 3)


def test_finitization_matches_truncated_extension():
    g0 = _gadget()
    z = 2.5 + 0.5j
    G = green_matrix(finitize(g0, 3), z).G
    errs = []
    for L in (4, 8, 12, 14):
        full = tree_extend(g0, 3, L).full
        m = (adjacency_matrix(full).astype(complex) / math.sqrt(2) - z * sp.identity(full.n)).tocsc()
        errs.append(np.abs(green_columns(m, range(g0.n))[: g0.n] - G).max())
    assert all(a > b for a, b in zip(errs, errs[1:]))
    assert errs[-1] < 1e-6


def test_finitization_matches_extension_with_leaf_loops():
    """Closing the leaves with the fixed-point weight reproduces the finitized entries exactly."""
    g0 = _gadget(20, 5)
    z = 0.8 + 0.1j
    teg = tree_extend(g0, 3, 6)
    leaves = teg.leaves()
    diag = np.full(teg.full.n, -z, dtype=complex)
    diag[leaves] -= m_sc(z)  # (d-1) missing children, each -m_sc/(d-1)
    m = (adjacency_matrix(teg.full).astype(complex) / math.sqrt(2) + sp.diags(diag)).tocsc()
    G_tree = green_columns(m, range(g0.n))[: g0.n]
    assert np.abs(G_tree - green_matrix(finitize(g0, 3), z).G).max() < 1e-12


def test_green_matrix_k4_spectral_decomposition():
    z = 0.3 + 0.7j
    ev = green_matrix(finitize(complete_graph(4), 3), z)
    lams = np.array([3, -1, -1, -1]) / math.sqrt(2)
    assert ev.mN == pytest.approx(np.mean(1 / (lams - z)), abs=1e-14)
    assert np.allclose(ev.G, ev.G.T)


def test_q_statistic_and_q_ell():
    g0 = _gadget()
    z = 2.2 + 0.05j
    ev = green_matrix(finitize(g0, 3), z, ell=3, p=P)
    G = ev.G
    vals = [G[o, o] - G[o, i] * G[i, o] / G[i, i] for o, i in g0.edges.tolist() if o != i]
    vals += [G[i, i] - G[i, o] * G[o, i] / G[o, o] for o, i in g0.edges.tolist() if o != i]
    assert ev.Q == pytest.approx(np.mean(vals), abs=1e-13)
    # single-vertex removal: G_oo^{(i)} from the reduced matrix
    o, i = map(int, g0.edges[0])
    rest = np.delete(np.arange(g0.n), i)
    Gi = np.linalg.inv(finitize(g0, 3).matrix(z)[np.ix_(rest, rest)])
    k = int(np.searchsorted(rest, o))
    assert Gi[k, k] == pytest.approx(G[o, o] - G[o, i] ** 2 / G[i, i], abs=1e-12)
    w = P**4
    assert ev.Q_ell == w * ev.Q + (1 - w) * ev.msc


def test_im_mN_positive_at_safe_eta():
    graphs = [_gadget(60, s) for s in range(5)] + [complete_graph(4), empty_graph(3)]
    for g in graphs:
        op = finitize(g, 3)
        for z in _z_grid(10, eta_min=0.5):
            assert green_matrix(op, z).mN.imag > 0


# ------------------------------------------------------------------- Ward
def test_ward_identity_matrix():
    graphs = [_gadget(60, s) for s in range(4)] + [sample_simple_regular(30, 3, RngSpec(1)), empty_graph(2)]
    for g in graphs:
        op = finitize(g, 3)
        for z in [2.2 + 0.05j, 0.5 + 0.01j, -1.0 + 1.0j, 3.5 + 0.2j]:
            assert np.abs(ward_residual(op, z)).max() < 1e-9


def test_ward_negative_control():
    g0 = _gadget(60, 1)
    op = finitize(g0, 3)
    bad = FinitizedOperator(g0, 3, op.f, loop_sign=1.0)
    assert np.abs(ward_residual(bad, 0.5 + 0.05j)).max() > 1.0
    for z in (2.5 + 0.5j, 2.2 + 0.05j):
        assert np.abs(ward_residual(bad, z)).max() > 1e-2


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6), st.floats(-3, 3), st.floats(1e-3, 2))
def test_ward_property(seed, E, eta):
    op = finitize(_gadget(30, seed, 0.8), 3)
    assert np.abs(ward_residual(op, complex(E, eta))).max() < 1e-9 * max(1.0, 1 / eta)


# ------------------------------------------------------------------ Schur
def test_schur_suite():
    op = finitize(_gadget(50, 7), 3)
    rep = schur_identity_suite(op, 2.2 + 0.05j, 20, RngSpec(0))
    assert rep["max"] < 1e-9
    assert set(rep) == {"resolvent", "schur_block", "schur_offdiag", "schur_complement",
                        "schur_complement_alt", "single_removal", "max"}


def test_schur_suite_single_vertex_graph():
    rep = schur_identity_suite(finitize(empty_graph(1), 3), 1j, 3, RngSpec(0))
    assert rep["max"] < 1e-12


# ------------------------------------------------------------- parameters
def test_parameter_relations():
    ps = ParameterSet(2000, 3)
    assert ps.R_frak / 8 == pytest.approx(ps.r)
    assert ps.R == 4.0 and ps.r_desk == 1
    lo, hi = ps.ell_range
    assert hi == pytest.approx(2 * lo) and 1 <= ps.ell <= 6
    z = 2.2 + 0.05j
    assert ps.eps_prime(z) == pytest.approx(ps.log_N**3 * ps.eps(z))
    pt = SpectralDomainPoint(z)
    e0 = ps.eps0(z)
    expected = e0 if e0 <= (pt.kappa + pt.eta) / ps.log_N else ps.log_N**4 * e0
    assert ps.eps(z) == expected
    assert ps.q_bound(z) > 0 and ps.phi(z) > 0
    assert ParameterSet(2000, 3, ell_override=2).ell == 2


# ------------------------------------------------------------------ Omega
def test_omega_single_vertex_is_exact():
    op = finitize(empty_graph(1), 3)
    rep = omega_residuals(op, 0.5 + 0.1j, r=1)
    assert rep.max_diag < 1e-15


def test_omega_ball_is_whole_graph():
    op = finitize(complete_graph(4), 3)
    rep = omega_residuals(op, 0.5 + 0.1j, r=1)
    assert rep.max_diag < 1e-14 and rep.max_off < 1e-14


def test_omega_zero_radius_flagged():
    rep = omega_residuals(finitize(_gadget(), 3), 2.2 + 0.05j, r=0)
    assert rep.note == "ball too small" and rep.diag.size == 0


def test_local_ext_keeps_loops_and_cut_weights():
    g0 = _gadget(60, 2)
    op = finitize(g0, 3)
    z, Q = 1.0 + 0.2j, 0.1 + 0.3j
    G_loc, verts = local_ext_green(op, [0], 1, z, Q)
    sub = [e for e in g0.edges.tolist() if e[0] in set(verts.tolist()) and e[1] in set(verts.tolist())]
    pos = {int(v): k for k, v in enumerate(verts)}
    h = from_edge_list(verts.size, [(pos[a], pos[b]) for a, b in sub])
    M = adjacency_matrix(h).toarray() / math.sqrt(2) - z * np.eye(verts.size)
    M -= np.diag(m_sc(z) / 2 * op.f[verts])
    M -= np.diag(Q / 2 * (g0.degrees[verts] - h.degrees))
    assert np.abs(np.linalg.inv(M) - G_loc).max() < 1e-12


def test_omega_report_on_gadget():
    op = finitize(_gadget(200, 4), 3)
    rep = omega_residuals(op, 2.2 + 0.05j, samples=20, rng=RngSpec(1))
    assert rep.diag.size == 20 and rep.off.size > 0
    assert np.isfinite(rep.q_dev) and rep.q_bound > 0


# ------------------------------------------------------------------ delta
def test_delta_djd_identity():
    g0 = _gadget(100, 5)
    dd = delta_diagnostics(finitize(g0, 3), 2.2 + 0.05j, 2, P, samples=20)
    assert dd.DJD == (2 * g0.edge_count) ** 2 == int(dd.D.sum()) ** 2
    assert dd.DGD == pytest.approx(dd.D @ green_matrix(finitize(g0, 3), 2.2 + 0.05j).G @ dd.D)


def test_delta_pi_vanishes_on_tree_like_rrg():
    g = sample_simple_regular(400, 3, RngSpec(6))
    ell = 1
    dd = delta_diagnostics(finitize(g, 3), 2.2 + 0.05j, ell, 1.0, samples=200, rng=RngSpec(1))
    # pairs whose (ell+2)-neighbourhood is a tree hit the deterministic count (d-1)^(ell+1)
    assert np.sum(dd.pi_counts == 4) > 150
    assert np.all(np.abs(dd.pi[dd.pi_counts == 4]) < 1e-14)


def test_delta_pi_mean_zero():
    pis = []
    for s in range(10):
        g0 = percolate(sample_configuration_model(600, 3, RngSpec(s, 60)), P, RngSpec(s, 61))
        dd = delta_diagnostics(finitize(g0, 3), 2.5 + 0.5j, 1, P, samples=60, rng=RngSpec(s))
        pis.extend(dd.pi.real.tolist())
    pis = np.array(pis)
    assert abs(pis.mean()) < 3 * pis.std() / math.sqrt(pis.size)


def test_delta_formulas_reproduced():
    g0 = _gadget(80, 8)
    z, ell = 2.2 + 0.05j, 2
    dd = delta_diagnostics(finitize(g0, 3), z, ell, P, samples=10)
    ms, md, s = m_sc(z), m_d(z, 3), 2 * P
    frac = (s - s**-ell) / (s - 1)
    common = (1 + ms / math.sqrt(2)) ** 2 * (ms * P * math.sqrt(2)) ** (2 * ell) * dd.DGD / dd.DJD
    assert dd.delta_Q == pytest.approx(ms**2 * P**2 * frac * common, rel=1e-12)
    assert dd.delta_m == pytest.approx(1.5 * md**2 * P**2 * (2.0**-ell + frac) * common, rel=1e-12)
    assert dd.P_ol == pytest.approx(tree_path_green(dd.Q_ell, z, 3, ell))


def test_delta_errors():
    with pytest.raises(ParameterError):
        delta_diagnostics(finitize(_gadget(), 3), 1j, 0, P)
    with pytest.raises(InputError):
        delta_diagnostics(finitize(empty_graph(3), 3), 1j, 1, P)
