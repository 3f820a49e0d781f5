"""One test per acceptance criterion; each prints a PASS/FAIL line."""

import math
import time
from contextlib import contextmanager

import numpy as np
import pytest

from oracles import F_bruteforce_two_parameter, collective_ops, depolarize_qubits, expect, product_dicke_x, \
    product_squeezed, rho_moments
from spindepth.boundary import (
    CurveCache, compute_F_curve, compute_F_halfinteger, convexity_check, evaluate_exact, g_from_f,
    tangent_bound, tilde_G,
)
from spindepth.criteria import (
    CRITERIA, admissible_ks, detect_depth, duan_criterion, evaluate_criterion, qubit_tangent_criterion, xi2,
)
from spindepth.fluctuating import Bin, ShotEnsemble, fluctuating_linear_parameters, fluctuating_nonlinear, \
    fluctuating_sm, w_expectation
from spindepth.records import MeasurementRecord
from spindepth.spin import SpinLength, ground_state, squeezing_hamiltonian, x_basis_moments
from spindepth.states import (
    decohere_particles, dicke_moments, noisy_dicke_moments, random_producible_moments, squeezed_state_moments,
)
from spindepth.figures import fig3_data, fig3_mu_grid


@pytest.fixture
def criterion(capsys):
    @contextmanager
    def run(n, title):
        ok = False
        try:
            yield
            ok = True
        finally:
            with capsys.disabled():
                print(f"\nACCEPTANCE {n:>2} {'PASS' if ok else 'FAIL'}: {title}")

    return run


def p_star(N, j, k):
    return 3 * (N - k) * j / (2 * j * (j + 1) * (k * j + 1) * (N - k) - 2 * (j + 1) + 3 * (N * j + 1))


def test_01_closed_form_j1(criterion):
    with criterion(1, "G_1 matches 1/2(1-sqrt(1-X)) to 1e-8 on [0, 0.9999], fresh curve < 1 s"):
        t0 = time.perf_counter()
        G = g_from_f(compute_F_curve(SpinLength(2)))
        X = np.linspace(0.0, 0.9999, 2001)
        vals = evaluate_exact(G, X)
        elapsed = time.perf_counter() - t0
        err = np.max(np.abs(vals - 0.5 * (1 - np.sqrt(1 - X))))
        assert err <= 1e-8, err
        assert elapsed < 1.0, elapsed


def test_02_tangent_slope_and_perturbation(cache, criterion):
    with criterion(2, "G'_J(0) = 1/(2(J+1)) within 1%, J = 1..19; perturbative X and G within 2% at lambda 1e-3"):
        for J in range(1, 20):
            G = cache.G(J)
            slope = (G.value[1] - G.value[0]) / (G.X[1] - G.X[0])
            assert slope == pytest.approx(1 / (2 * (J + 1)), rel=0.01), J
            s = SpinLength.of(J)
            lam = 1e-3
            _, mz, mx2 = x_basis_moments(s, ground_state(squeezing_hamiltonian(s, lam)).vector)
            X_G, G_val = (mz / J) ** 2, mx2 / J
            assert X_G == pytest.approx(lam**2 * (J + 1) ** 2, rel=0.02), J
            assert G_val == pytest.approx(0.5 * lam**2 * (J + 1), rel=0.02), J


def test_03_sandwich(cache, criterion):
    with criterion(3, "tilde_G <= G_J >= X/(2(J+1)) at samples, tilde_G(1) = 1/2, slope ratio 2"):
        for J in (1, 5, 10, 19):
            G = cache.G(J)
            assert np.all(tilde_G(J, G.X) <= G.value + 1e-12)
            assert np.all(tangent_bound(J, G.X) <= G.value + 1e-12)
            assert abs(tilde_G(J, 1.0) - evaluate_exact(G, 1.0)) <= 1e-6
            x = 1e-9
            ratio = (1 / (2 * (J + 1))) / (tilde_G(J, x) / x)
            assert ratio == pytest.approx(2, rel=0.02)
            # the same ratio from the computed curve
            assert (G.value[1] / G.X[1]) / (tilde_G(J, G.X[1]) / G.X[1]) == pytest.approx(2, rel=0.02)


def test_04_dicke_depth(curve_dir, criterion):
    with criterion(4, "Dicke states certified N-entangled, N in {10, 100}, j in {1/2, 1}; < 10 s warm"):
        for N in (10, 100):
            for two_j in (1, 2):
                v = detect_depth(dicke_moments(N, SpinLength(two_j)), "nonlinear", CurveCache(curve_dir),
                                 allow_half_integer=True)
                assert v.certified_depth == N, (N, two_j, v.certified_depth)
        for two_j in (1, 2):
            warm = CurveCache(curve_dir)
            t0 = time.perf_counter()
            v = detect_depth(dicke_moments(100, SpinLength(two_j)), "nonlinear", warm, allow_half_integer=True)
            assert time.perf_counter() - t0 < 10
            assert v.certified_depth == 100 and warm.misses == 0


def test_05_noisy_dicke_threshold(criterion):
    with criterion(5, "xi2 on noisy Dicke flips at p = 1/28 +- 1e-9 and at the formula for 20 random triples"):
        rec = lambda N, tj, p: noisy_dicke_moments(N, SpinLength(tj), p)
        p = p_star(100, 0.5, 50)
        assert p == pytest.approx(1 / 28, abs=1e-15)
        assert xi2(rec(100, 1, p - 1e-9), 50).violated
        assert not xi2(rec(100, 1, p + 1e-9), 50).violated
        rng = np.random.default_rng(28)
        done = 0
        while done < 20:
            N = int(rng.integers(4, 400))
            tj = int(rng.choice([1, 2, 3, 4]))
            k = int(rng.integers(1, N))
            if (k * tj) % 2:
                continue
            p = p_star(N, tj / 2, k)
            if not 0 < p < 1:
                continue
            assert xi2(rec(N, tj, p - 1e-9), k).violated, (N, tj, k, p)
            assert not xi2(rec(N, tj, p + 1e-9), k).violated, (N, tj, k, p)
            done += 1


@pytest.mark.slow
def test_06_fig3(cache, criterion):
    with criterion(6, "N=1000 squeezed, 10 decohered: nonlinear depth grows toward small mu, SM peaks; < 5 min"):
        t0 = time.perf_counter()
        mus = fig3_mu_grid(40)
        rows = fig3_data(cache, 1000, 10, mus)
        elapsed = time.perf_counter() - t0
        assert len(rows) >= 30
        nl = [r["depth_nonlinear"] for r in rows]
        sm = [r["depth_sm"] for r in rows]
        # mus are ascending, so toward small mu means reading backwards
        assert all(a >= b for a, b in zip(nl, nl[1:])), nl
        top = int(np.argmax(sm))
        assert 0 < top < len(sm) - 1 and sm[0] < sm[top], sm
        assert all(a >= b for a, b in zip(sm[top:], sm[top + 1:])), sm
        # one admissible level apart at most (even k for qubits)
        assert abs(nl[-1] - sm[-1]) <= 2
        assert elapsed < 300, elapsed


def test_07_convexity(cache, criterion):
    with criterion(7, "G_J derivative non-decreasing for J in {1, 10, 19}; F(X^(1/alpha)) convex iff alpha <= 2"):
        for J in (1, 10, 19):
            rep = convexity_check(cache.G(J))
            assert rep.verdict and rep.max_derivative_decrease <= 1e-9
            probes = {p["alpha"]: p["convex"] for p in convexity_check(cache.F(J)).alpha_probe}
            assert probes[1.5] and probes[2.0]
            assert not (probes[2.5] or probes[3.0] or probes[4.0])


def _random_partition(rng, N, max_group):
    while True:
        sizes = []
        while sum(sizes) < N:
            sizes.append(int(rng.integers(1, min(max_group, N - sum(sizes)) + 1)))
        if max(sizes) < N:
            return sizes


def test_08_soundness(cache, criterion):
    with criterion(8, "1000 random k-producible records: no level-k violation, pure-state inequality holds; "
                      "Duan => qubit tangent on 1000 records"):
        rng = np.random.default_rng(8)
        checked = 0
        for _ in range(1000):
            two_j = int(rng.choice([1, 2]))
            j = SpinLength(two_j)
            N = int(rng.integers(2, 13))
            part = _random_partition(rng, N, 8 if two_j == 1 else 5)
            k = max(part)
            rec = random_producible_moments(N, j, part, rng)
            Nj = rec.Nj
            rad = (rec.second_moment_perp - Nj * (k * j.J + 1)) / (N * (N - k) * j.J**2)
            if rad >= 0:
                assert math.sqrt(rec.polarization_sq) / Nj >= math.sqrt(rad) - 1e-12
            for crit in CRITERIA:
                if crit in ("duan", "qubit_tangent") and two_j != 1:
                    continue
                for kk in admissible_ks(N, j, crit, allow_half_integer=True):
                    if kk < k:
                        continue
                    r = evaluate_criterion(rec, crit, kk, cache)
                    assert not r.violated, (crit, kk, part, rec)
                    checked += 1
        assert checked > 1000

        violations = 0
        for _ in range(1000):
            N = int(rng.integers(3, 2000))
            Nj = N / 2
            smp = rng.uniform(0, Nj * (Nj + 1))
            mz = rng.uniform(-1, 1) * math.sqrt(smp)
            var = math.exp(rng.uniform(math.log(1e-6), math.log(Nj * (Nj + 1))))
            rec = MeasurementRecord(N=N, j=SpinLength(1), var_Jx=var, mean_Jy=0.0, mean_Jz=mz,
                                    second_moment_perp=smp)
            k = 2 * int(rng.integers(1, max(2, (N + 1) // 2)))
            if k >= N:
                continue
            if duan_criterion(rec, k).violated:
                violations += 1
                assert qubit_tangent_criterion(rec, k).violated
        assert violations > 50


def test_09_oracles(criterion):
    with criterion(9, "decoherence and Dicke moments match product-space density matrices (N <= 6, 1e-10); "
                      "F_3/2(0.5) matches brute force to 1e-6"):
        for N in (2, 3, 4, 5, 6):
            for two_j in ((1, 2) if N <= 5 else (1,)):
                if (N * two_j) % 2:
                    continue
                j = two_j / 2
                psi = product_dicke_x(N, j)
                Jx, Jy, Jz = collective_ops(N, j)
                r = dicke_moments(N, SpinLength(two_j))
                assert abs(expect(psi, Jx @ Jx) - expect(psi, Jx) ** 2 - r.var_Jx) < 1e-10
                assert abs(expect(psi, Jy @ Jy + Jz @ Jz) - r.second_moment_perp) < 1e-10
                assert abs(expect(psi, Jz) - r.mean_Jz) < 1e-10
        for N in (2, 4, 6):
            for mu in (0.0, 0.5, 3.0):
                psi = product_squeezed(N, mu)
                rho = np.outer(psi, psi.conj())
                s = squeezed_state_moments(N, mu)
                for m in range(N + 1):
                    mean, sq = rho_moments(depolarize_qubits(rho, N, range(m)), N)
                    d = decohere_particles(s, m)
                    assert np.max(np.abs(d.mean - mean)) < 1e-10
                    assert np.max(np.abs(np.diag(d.second) - sq)) < 1e-10
        ref = F_bruteforce_two_parameter(1.5, 0.5)
        assert abs(compute_F_halfinteger(SpinLength(3), 0.5) - ref) < 1e-6


def test_10_fluctuating(cache, criterion):
    with criterion(10, "delta ensembles reproduce fixed-N verdicts bit-identically; two-bin Dicke argument = 1"):
        for two_j, N, p in ((1, 20, 0.01), (2, 14, 0.2), (3, 10, 0.0)):
            j = SpinLength(two_j)
            rec = noisy_dicke_moments(N, j, p)
            ens = ShotEnsemble.delta(rec)
            for k in admissible_ks(N, j, "xi2"):
                J = j.times(k)
                assert fluctuating_nonlinear(ens, k, cache.G(J)) == evaluate_criterion(rec, "nonlinear", k, cache)
                assert fluctuating_sm(ens, k, cache.F(J)) == evaluate_criterion(rec, "sorensen_molmer", k, cache)
                lin = fluctuating_linear_parameters(ens, k)
                assert lin["xi2_fluct"] == evaluate_criterion(rec, "xi2", k, cache)
                assert lin["xi2_sm_fluct"] == evaluate_criterion(rec, "xi2_sm", k, cache)
        j = SpinLength(1)
        bins = tuple(Bin(N, 0.5, 0.0, 0.0, N / 2 * (N / 2 + 1), 0.0) for N in (100, 140))
        ens = ShotEnsemble(j, bins)
        for k in (2, 50, 98):
            w = w_expectation(ens, k)
            assert abs(w.mean_W / (ens.mean_N * j.J) - 1) <= 1e-12
