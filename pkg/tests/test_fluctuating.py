import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spindepth.criteria import nonlinear_criterion, sm_criterion, xi2, xi2_sm
from spindepth.errors import BinUnderflow
from spindepth.fluctuating import (
    Bin, ShotEnsemble, fluctuating_linear_parameters, fluctuating_nonlinear, fluctuating_sm, w_expectation,
)
from spindepth.spin import SpinLength
from spindepth.states import coherent_state_moments, dicke_moments, extreme_producible_moments, noisy_dicke_moments


def bin_of(rec, Q):
    return Bin(rec.N, Q, rec.var_Jx, rec.mean_Jz, rec.second_moment_perp, rec.mean_Jx, rec.mean_Jy)


def test_delta_ensemble_is_bit_identical(cache):
    rec = noisy_dicke_moments(16, SpinLength(2), 0.02)
    ens = ShotEnsemble.delta(rec)
    for k in (2, 5, 9):
        J = SpinLength(2).times(k)
        assert fluctuating_nonlinear(ens, k, cache.G(J)) == nonlinear_criterion(rec, k, cache.G(J))
        assert fluctuating_sm(ens, k, cache.F(J)) == sm_criterion(rec, k, cache.F(J))
        lin = fluctuating_linear_parameters(ens, k)
        assert lin["xi2_fluct"] == xi2(rec, k) and lin["xi2_sm_fluct"] == xi2_sm(rec, k)


def test_two_bin_dicke_argument_is_one(cache):
    j = SpinLength(1)
    ens = ShotEnsemble(j, (bin_of(dicke_moments(100, j), 0.5), bin_of(dicke_moments(120, j), 0.5)))
    for k in (2, 40, 98):
        w = w_expectation(ens, k)
        assert abs(w.mean_W / (ens.mean_N * 0.5) - 1) < 1e-12
        r = fluctuating_nonlinear(ens, k, cache.G(j.times(k)))
        assert r.violated
    assert fluctuating_linear_parameters(ens, 10)["xi2_fluct"].lhs == 0


def test_w_is_affine_in_weights():
    j = SpinLength(2)
    a, b = bin_of(noisy_dicke_moments(20, j, 0.1), 1), bin_of(noisy_dicke_moments(30, j, 0.3), 1)
    vals = []
    for q in (0.2, 0.5, 0.8):
        ens = ShotEnsemble(j, (Bin(**{**a.__dict__, "Q": q}), Bin(**{**b.__dict__, "Q": 1 - q})))
        vals.append(w_expectation(ens, 4).mean_W)
    assert vals[1] == pytest.approx((vals[0] + vals[2]) / 2, rel=1e-13)


def test_underflow_and_negative_w(cache):
    j = SpinLength(1)
    ens = ShotEnsemble(j, (bin_of(dicke_moments(4, j), 0.5), bin_of(dicke_moments(10, j), 0.5)))
    with pytest.raises(BinUnderflow):
        w_expectation(ens, 4)
    low = ShotEnsemble(j, (Bin(10, 1, 1.0, 0.0, 1.0), Bin(12, 1, 1.0, 0.0, 1.0)))
    assert not fluctuating_nonlinear(low, 2, cache.G(1)).applicable
    assert not fluctuating_linear_parameters(low, 2)["xi2_fluct"].applicable


def test_normalisation():
    ens = ShotEnsemble(SpinLength(1), (Bin(10, 3, 1, 0, 30), Bin(12, 1, 1, 0, 40)))
    assert sum(b.Q for b in ens.bins) == pytest.approx(1, abs=1e-12)
    assert ens.mean_N == pytest.approx(10.5)


@settings(max_examples=40, deadline=None)
@given(data=st.data())
def test_jensen_consistency(cache, data):
    """Bins that individually pass at level k never fail once pooled."""
    j = SpinLength(2)
    k = data.draw(st.sampled_from([1, 2, 3]))
    nbins = data.draw(st.integers(2, 4))
    Ns = data.draw(st.lists(st.sampled_from([6, 9, 12, 15, 18]), min_size=nbins, max_size=nbins, unique=True))
    bins = []
    for N in Ns:
        lam = data.draw(st.floats(0.0, 5.0))
        rec = extreme_producible_moments(N - N % k, j, k, lam) if N % k else extreme_producible_moments(N, j, k, lam)
        bins.append(bin_of(rec, data.draw(st.floats(0.05, 1.0))))
    ens = ShotEnsemble(j, tuple(bins))
    J = j.times(k)
    for b in ens.bins:
        assert not nonlinear_criterion(b.to_record(j), k, cache.G(J)).violated
    assert not fluctuating_nonlinear(ens, k, cache.G(J)).violated
    assert not fluctuating_sm(ens, k, cache.F(J)).violated


def test_poisson_coherent_ensemble_not_violated(cache):
    from scipy.stats import poisson

    j = SpinLength(1)
    Ns = np.arange(30, 71)
    Q = poisson.pmf(Ns, 50)
    bins = tuple(bin_of(coherent_state_moments(int(N), j, "z").to_record(), float(q)) for N, q in zip(Ns, Q))
    ens = ShotEnsemble(j, bins)
    for k in (2, 10, 28):
        assert not fluctuating_sm(ens, k, cache.F(j.times(k))).violated
        assert not fluctuating_nonlinear(ens, k, cache.G(j.times(k))).violated


def test_mixed_noisy_dicke_threshold_between_bins():
    j, k = SpinLength(1), 10
    for p in (0.001, 0.01, 0.02, 0.05, 0.2):
        recs = [noisy_dicke_moments(N, j, p) for N in (60, 80, 100)]
        per_bin = [xi2(r, k).violated for r in recs]
        ens = ShotEnsemble(j, tuple(bin_of(r, q) for r, q in zip(recs, (0.3, 0.3, 0.4))))
        pooled = fluctuating_linear_parameters(ens, k)["xi2_fluct"].violated
        if all(per_bin):
            assert pooled
        if not any(per_bin):
            assert not pooled


def test_shot_aggregation_and_files(tmp_path):
    rng = np.random.default_rng(0)
    rows = []
    for s in range(400):
        N = int(rng.choice([10, 12]))
        rows.append((s, N, rng.normal(), rng.normal(), N / 2 + rng.normal()))
    path = tmp_path / "shots.csv"
    path.write_text("shot_id,N,Jx,Jy,Jz\n" + "".join(f"{a},{b},{c!r},{d!r},{e!r}\n" for a, b, c, d, e in rows))
    ens = ShotEnsemble.read(path, SpinLength(1))
    arr = np.array(rows)
    sel = arr[arr[:, 1] == 10]
    b10 = ens.bins[0]
    assert b10.N == 10 and b10.Q == pytest.approx(len(sel) / 400)
    assert b10.var_Jx == pytest.approx(sel[:, 2].var())
    assert b10.second_moment_perp == pytest.approx(np.mean(sel[:, 3] ** 2 + sel[:, 4] ** 2))

    binned = {"two_j": 1, "bins": [{"N": b.N, "Q": b.Q, "var_Jx": b.var_Jx, "mean_Jz": b.mean_Jz,
                                    "second_moment_perp": b.second_moment_perp} for b in ens.bins]}
    (tmp_path / "b.json").write_text(json.dumps(binned))
    back = ShotEnsemble.read(tmp_path / "b.json")
    assert [b.second_moment_perp for b in back.bins] == [b.second_moment_perp for b in ens.bins]
    # without per-bin means the pooled variance falls back to the weighted sum
    assert back.pooled_var_Jx()[1] is False and ens.pooled_var_Jx()[1] is True
