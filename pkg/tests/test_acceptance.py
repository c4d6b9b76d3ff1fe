"""Acceptance criteria A1-A11.

Each test prints one ``A<k> PASS|FAIL: ...`` line (visible under
``pytest -v``) and then asserts the verdict.  Budgets are wall-clock limits
on a single core.  Run ``python3 tests/test_acceptance.py`` to get the
summary lines without pytest.
"""

import math
import time
from collections import Counter

import numpy as np
import pytest
from scipy import integrate
from scipy.stats import chi2

from edgeforge.errors import SamplingError
from edgeforge.graph import adjacency_matrix, complete_graph
from edgeforge.greens import (
    ParameterSet,
    finitize,
    green_matrix,
    m_d,
    m_sc,
    omega_residuals,
    rho_d,
    schur_identity_suite,
    ward_residual,
    x_ell,
    y_ell,
)
from edgeforge.nonbacktracking import build_nb_operator, count_k_cycles, ihara_unmap, nb_spectral_radius
from edgeforge.pipeline import (
    GadgetSpec,
    construct_gadget,
    synthesize,
    verify_gadget_lambda1,
    verify_gadget_lambda2,
)
from edgeforge.random_models import (
    RngSpec,
    apply_local_resampling,
    build_resampling_data,
    kesten_stigum_stats,
    percolate,
    reverse_resampling_data,
    sample_configuration_model,
    sample_simple_regular,
)
from edgeforge.spectral import lanczos_topk
from edgeforge.trees import decay_profile_check, localization_check, target_from_mu, tree_extend

D = 3
MU = 2.9
P = 0.8850781
THETA = 1.7701562
EDGE = 2 * math.sqrt(D - 1)

pytestmark = pytest.mark.acceptance


@pytest.fixture
def say(request):
    capsys = request.getfixturevalue("capsys")

    def emit(tag, ok, detail, elapsed, budget):
        ok = bool(ok) and elapsed < budget
        line = f"{tag} {'PASS' if ok else 'FAIL'}: {detail} [{elapsed:.1f}s / {budget:.0f}s]"
        with capsys.disabled():
            print("\n" + line)
        assert ok, line

    return emit


def _percolated(n, seed, p=P, d=D):
    return percolate(sample_configuration_model(n, d, RngSpec(seed, n)), p, RngSpec(seed, n + 1))


# ------------------------------------------------------------------ A1
def test_a1_identities(say):
    t0 = time.time()
    gen = np.random.default_rng(101)
    zs = [complex(E, eta) for E, eta in zip(gen.uniform(-3, 3, 5), gen.uniform(0.05, 1.0, 5))]
    ward = schur = 0.0
    for s in range(50):
        n = 2 * int(gen.integers(10, 101))
        op = finitize(_percolated(n, s, float(gen.uniform(0.6, 1.0))), D)
        for z in zs:
            ev = green_matrix(op, z)
            ward = max(ward, float(np.abs(ward_residual(op, z, ev.G)).max()))
            schur = max(schur, schur_identity_suite(op, z, 1, RngSpec(s), G=ev.G)["max"])
    say("A1", ward < 1e-9 and schur < 1e-9, f"max Ward {ward:.2e}, max Schur {schur:.2e} (limit 1e-9)",
        time.time() - t0, 60)


# ------------------------------------------------------------------ A2
def test_a2_closed_forms(say):
    t0 = time.time()
    gen = np.random.default_rng(202)
    zs = [complex(E, eta) for E, eta in zip(gen.uniform(-3, 3, 20), gen.uniform(0.05, 2, 20))]
    fix = 0.0
    quad = 0.0
    for z in zs:
        ms, md = m_sc(z), m_d(z, D)
        for ell in range(41):
            fix = max(fix, abs(y_ell(ms, z, D, ell) - ms), abs(x_ell(ms, z, D, ell) - md))
        re = integrate.quad(lambda x: (rho_d(x, D) / (x - z)).real, -2, 2, epsabs=1e-12, epsrel=1e-12, limit=400)[0]
        im = integrate.quad(lambda x: (rho_d(x, D) / (x - z)).imag, -2, 2, epsabs=1e-12, epsrel=1e-12, limit=400)[0]
        quad = max(quad, abs(complex(re, im) - md))
    mass = integrate.quad(lambda x: rho_d(x, D), -2, 2, epsabs=1e-13, epsrel=1e-13)[0]
    ok = fix < 1e-12 and quad < 1e-6 and abs(mass - 1) < 1e-8
    say("A2", ok, f"fixed points {fix:.1e}, m_d vs quadrature {quad:.1e}, mass-1 {abs(mass - 1):.1e}",
        time.time() - t0, 60)


# ------------------------------------------------------------------ A3
def test_a3_ihara_bass(say):
    t0 = time.time()
    rho_k4 = nb_spectral_radius(build_nb_operator(complete_graph(4)), tol=1e-12).rho
    roots = ihara_unmap(D, 3.0)
    ok = abs(rho_k4 - 2) < 1e-8 and abs(roots[0] - 2) < 1e-12 and abs(roots[1] - 1) < 1e-12
    worst = 0.0
    checked = 0
    gen = np.random.default_rng(303)
    while checked < 20:
        d = int(gen.integers(3, 6))
        n = 2 * int(gen.integers(3, 200 // d // 2 + 1))
        if n <= d or n * d // 2 > 100:
            continue
        g = sample_simple_regular(n, d, gen)
        adj = np.linalg.eigvalsh(adjacency_matrix(g).toarray())
        nb = np.linalg.eigvals(build_nb_operator(g).toarray())
        for lam in adj[adj > 2 * math.sqrt(d - 1) + 1e-9]:
            for theta in ihara_unmap(d, lam):
                worst = max(worst, float(np.min(np.abs(nb - theta))))
        checked += 1
    ok = ok and worst < 1e-8
    say("A3", ok, f"K4 rho(B)={rho_k4:.10f}, unmap(3)={roots}, worst root match {worst:.1e} on 20 graphs",
        time.time() - t0, 60)


# ------------------------------------------------------------------ A4
def test_a4_cycle_census(say):
    t0 = time.time()
    counts = [count_k_cycles(sample_configuration_model(5000, D, RngSpec(s, 6)), 6).ordered_count
              for s in range(200)]
    mean = float(np.mean(counts))
    expected = (D - 1) ** 6
    say("A4", abs(mean - expected) <= 0.1 * expected, f"mean ordered 6-cycle count {mean:.2f} vs {expected}",
        time.time() - t0, 300)


# ------------------------------------------------------------------ A5
def test_a5_lambda1_placement(say):
    t0 = time.time()
    tgt = target_from_mu(D, MU)
    est = [verify_gadget_lambda1(_percolated(50_000, s, tgt.p), tgt) for s in range(5)]
    th = float(np.mean([e.theta for e in est]))
    lam = float(np.mean([e.lambda1 for e in est]))
    ok = abs(th - THETA) <= 0.03 and abs(lam - MU) <= 0.05
    say("A5", ok, f"mean theta {th:.5f} (target {THETA}), mean lambda1 {lam:.5f} (target {MU})",
        time.time() - t0, 600)


# ------------------------------------------------------------------ A6
def test_a6_lambda2_control(say):
    t0 = time.time()
    vals = []
    for s in range(3):
        rng = RngSpec(s, 7)
        g0 = percolate(sample_configuration_model(20_000, D, rng.generator(0)), P, rng.generator(1))
        vals.append(verify_gadget_lambda2(g0, D, 8))
    ok = all(v <= EDGE + 0.1 for v in vals)
    say("A6", ok, f"lambda2(T^8) per seed {[round(v, 5) for v in vals]} vs bound {EDGE + 0.1:.5f}",
        time.time() - t0, 900)


# ------------------------------------------------------------------ A7
def test_a7_end_to_end(say):
    t0 = time.time()
    res = synthesize([2.95, 2.88], D, 200_000, depth=10, seed=42)
    eig = res.report["final"]["eigenvalues"]
    g = res.graph
    ok = abs(eig[1] - 2.95) <= 0.1 and abs(eig[2] - 2.88) <= 0.1 and g.is_regular(D) and g.is_simple()
    say("A7", ok, f"n={g.n}, eigenvalues {[round(x, 5) for x in eig]}, regular={g.is_regular(D)}, "
                  f"simple={g.is_simple()}", time.time() - t0, 1800)


# ------------------------------------------------------------------ A8
def test_a8_branching(say):
    t0 = time.time()
    st = kesten_stigum_stats(D, P, 12, 10_000, RngSpec(8))
    z = abs(st.mean - 1) / st.std_error
    xs = [x for x, _ in st.tail_counts]
    logc = [math.log(c) if c > 0 else -math.inf for _, c in st.tail_counts]
    slope = (logc[1] - logc[0]) / (xs[1] - xs[0])
    linear = slope < 0 and all(logc[k] <= logc[0] + slope * (xs[k] - xs[0]) + 1e-12 for k in range(len(xs)))
    monotone = all(a >= b for a, b in zip(logc, logc[1:]))
    ok = z <= 3 and linear and monotone
    say("A8", ok, f"mean {st.mean:.4f} ({z:.2f} s.e. from 1), tail counts {[c for _, c in st.tail_counts]}",
        time.time() - t0, 60)


# ------------------------------------------------------------------ A9
def test_a9_local_law(say):
    t0 = time.time()
    z = 2.2 + 0.05j
    ms = complex(m_sc(z))
    diag, qdev = [], []
    for N in (500, 1000, 2000):
        worst, dev = 0.0, []
        for s in range(3):
            op = finitize(_percolated(N, s), D)
            ev = green_matrix(op, z)
            om = omega_residuals(op, z, ParameterSet(N, D), r=3, samples=200, rng=s, ev=ev)
            worst = max(worst, om.max_diag)
            dev.append(abs(ev.Q - ms))
        diag.append(worst)
        qdev.append(float(np.mean(dev)))
    ok = diag[0] > diag[1] > diag[2] and diag[2] <= 0.1 and qdev[0] > qdev[1] > qdev[2]
    say("A9", ok, f"max |G_ii - local| {[f'{x:.4f}' for x in diag]}, |Q - m_sc| {[f'{x:.5f}' for x in qdev]}",
        time.time() - t0, 1200)


# ------------------------------------------------------------------ A10
def _inside_edges(g):
    e = g.edges
    return int(np.count_nonzero((e[:, 0] < 4) & (e[:, 1] < 4)))


def _bowker(counts):
    stat, df = 0.0, 0
    keys = sorted({k for pair in counts for k in pair})
    for i in keys:
        for j in keys:
            if i < j and counts[i, j] + counts[j, i] > 0:
                stat += (counts[i, j] - counts[j, i]) ** 2 / (counts[i, j] + counts[j, i])
                df += 1
    return stat, df, (chi2.sf(stat, df) if df else 1.0)


def _exchange_pairs(draws, radius, seed):
    gen = RngSpec(seed).generator()
    counts = Counter()
    for _ in range(draws):
        g = percolate(sample_configuration_model(8, D, gen), P, gen)
        before = _inside_edges(g)
        try:
            data = build_resampling_data(g, None, 0, 1, gen, radius=radius)
        except SamplingError:
            counts[before, before] += 1
            continue
        counts[before, _inside_edges(apply_local_resampling(g, data))] += 1
    return counts


def test_a10_resampling(say):
    t0 = time.time()
    exact = 0
    for s in range(1000):
        g = sample_configuration_model(200, D, RngSpec(s, 99))
        data = build_resampling_data(g, None, s % 200, 2, RngSpec(s, 100))
        out = apply_local_resampling(g, data)
        back = apply_local_resampling(out, reverse_resampling_data(out, data))
        exact += back.same_as(g)
    pvals, moved = [], []
    for radius, seed in ((None, 2024), (0, 2025)):
        counts = _exchange_pairs(100_000, radius, seed)
        pvals.append(float(_bowker(counts)[2]))
        moved.append(sum(c for (a, b), c in counts.items() if a != b))
    ok = exact == 1000 and min(pvals) >= 1e-3
    say("A10", ok, f"involution exact {exact}/1000; Bowker p-values {[round(p, 4) for p in pvals]} "
                   f"(default radius, radius 0) with {moved} statistic-changing pairs", time.time() - t0, 300)


# ------------------------------------------------------------------ A11
def test_a11_localization(say):
    t0 = time.time()
    tgt = target_from_mu(D, 2.95)
    results = []
    seed = 0
    while len(results) < 10 and seed < 200:
        g0, _ = construct_gadget(GadgetSpec(tgt, 200, L=8), RngSpec(seed, 11))
        seed += 1
        est = verify_gadget_lambda1(g0, tgt)
        if not est.supercritical or est.lambda1 <= EDGE + 0.1:
            continue
        teg = tree_extend(g0, D, 8)
        rep = lanczos_topk(teg, 1, return_vectors=True)
        lam, psi = rep.eigenvalues[0], rep.vectors[:, 0]
        loc = localization_check(teg, lam, psi)
        dec = decay_profile_check(teg, lam, psi)
        results.append((loc.passed and not loc.skipped, dec.passed, loc.mass_V0, (lam - EDGE) / 6))
    ok = len(results) == 10 and all(a and b for a, b, _, _ in results)
    worst = min((m - b for _, _, m, b in results), default=float("nan"))
    say("A11", ok, f"{len(results)} gadgets, localization {sum(r[0] for r in results)}/10, "
                   f"decay {sum(r[1] for r in results)}/10, min margin |psi_0|-bound {worst:.3f}",
        time.time() - t0, 300)


if __name__ == "__main__":
    def _say(tag, ok, detail, elapsed, budget):
        ok = bool(ok) and elapsed < budget
        print(f"{tag} {'PASS' if ok else 'FAIL'}: {detail} [{elapsed:.1f}s / {budget:.0f}s]", flush=True)

    for name, fn in list(globals().items()):
        if name.startswith("test_a"):
            fn(_say)
