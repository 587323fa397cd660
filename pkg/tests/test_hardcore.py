import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dilutedrs import hardcore as hc
from dilutedrs.errors import DigestMismatchError, UnsupportedError
from dilutedrs.finite import HypergraphInstance, sample_instances
from dilutedrs.models import hardcore_soft_model

SOFT = hardcore_soft_model(alpha=0.4)


def _graph(N, edges):
    e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    return HypergraphInstance(SOFT, N, e, np.zeros((e.shape[0], 0)))


def test_no_inputs_gives_fugacity_density():
    d = hc.hc_apply(1.0, [], 64)
    assert np.allclose(d.density, 1.0)
    d = hc.hc_apply(2.0, [], 65)
    ref = np.power(2.0, hc.hc_grid(65)) / hc.upsilon0(2.0)
    assert np.max(np.abs(d.density - ref)) < 1e-4


def test_one_uniform_input():
    u = hc.DensityField(np.ones(257))
    d = hc.hc_apply(1.0, [u])
    assert np.allclose(d.density, 2 * (1 - hc.hc_grid(257)), atol=1e-12)


def _random_density(rng, n):
    return hc.DensityField(rng.random(n) + 0.05)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**31), k=st.integers(0, 6), eta=st.floats(0.2, 5.0))
def test_density_sup_bound(seed, k, eta):
    rng = np.random.default_rng(seed)
    # inputs must themselves be operator outputs for the bound to apply
    inputs = [hc.hc_apply(eta, [_random_density(rng, 64) for _ in range(rng.integers(0, 3))])
              for _ in range(k)]
    out = hc.hc_apply(eta, inputs, 64)
    assert out.density.max() <= hc.density_bound(eta, k)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**31), k=st.integers(0, 5), eta=st.floats(0.05, 1.0))
def test_output_density_nonincreasing_for_small_fugacity(seed, k, eta):
    rng = np.random.default_rng(seed)
    out = hc.hc_apply(eta, [_random_density(rng, 64) for _ in range(k)])
    assert np.all(np.diff(out.density) <= 1e-12)


def test_alpha_zero_pool_is_deterministic():
    r = hc.hc_solve(1.5, 0.0, M=500, seed=1)
    ref = hc.DensityField.fugacity(1.5, 64).density
    assert r.converged and r.iterations_used == 1
    assert np.allclose(r.pool.densities, ref, atol=1e-14)


def test_half_cdf_bound_on_converged_pool():
    for eta in (1.0, 3.0):
        r = hc.hc_solve(eta, 0.5, M=5000, seed=2, max_iter=60)
        assert r.in_regime
        assert np.all(r.pool.half_values() >= hc.half_bound(eta) - 1e-12)


def test_hc_functional_values():
    r0 = hc.hc_solve(1.0, 0.0, M=500, seed=1)
    assert hc.hc_eval_P(r0.pool, 1.0, 0.0, 1000).value == 0.0
    r = hc.hc_solve(1.0, 0.5, M=5000, seed=3, max_iter=60)
    v = hc.hc_eval_P(r.pool, 1.0, 0.5, 50_000, seed=4).value
    assert -0.30 < v < -0.10


def test_grid_refinement_gaps_shrink():
    vals = []
    for n in (64, 128, 256):
        r = hc.hc_solve(1.0, 0.5, M=20_000, seed=5, grid=n, max_iter=60)
        vals.append(hc.hc_eval_P(r.pool, 1.0, 0.5, 50_000, seed=6).value)
    gaps = np.abs(np.diff(vals))
    assert gaps[1] < gaps[0] < 1e-3


def test_volume_examples():
    half = math.log(0.5) / 2
    assert hc.hc_volume_mc(_graph(2, []), 1.0).value == 0.0
    assert hc.hc_tree_dp(_graph(2, []), 1.0) == pytest.approx(0.0, abs=1e-12)
    assert hc.hc_tree_dp(_graph(2, [(0, 1)]), 1.0) == pytest.approx(half, abs=1e-9)
    mc = hc.hc_volume_mc(_graph(2, [(0, 1)]), 1.0, 400_000, seed=1)
    assert abs(mc.value - half) <= 4 * mc.std_error
    assert hc.hc_tree_dp(_graph(3, [(0, 1), (1, 2)]), 1.0) == pytest.approx(
        math.log(1 / 3) / 3, abs=1e-6)
    star = hc.hc_tree_dp(_graph(4, [(0, 1), (0, 2), (0, 3)]), 1.0)
    assert star == pytest.approx(math.log(0.25) / 4, abs=1e-6)
    assert math.log(0.25) / 4 == pytest.approx(-0.346574, abs=1e-6)


def test_duplicate_edges_ignored():
    assert hc.hc_tree_dp(_graph(2, [(0, 1), (1, 0)]), 1.0) == pytest.approx(
        math.log(0.5) / 2, abs=1e-9)


def test_tree_dp_matches_mc_with_fugacity():
    g = _graph(6, [(0, 1), (1, 2), (1, 3), (3, 4)])
    dp = hc.hc_tree_dp(g, 2.5)
    mc = hc.hc_volume_mc(g, 2.5, 1_000_000, seed=7)
    assert abs(dp - mc.value) <= 4 * mc.std_error


def test_tree_dp_rejects_cycles():
    with pytest.raises(UnsupportedError):
        hc.hc_tree_dp(_graph(3, [(0, 1), (1, 2), (2, 0)]), 1.0)


def test_mc_zero_hits_reports_bound():
    edges = [(i, j) for i in range(14) for j in range(i + 1, 14)]
    r = hc.hc_volume_mc(_graph(14, edges), 1.0, n_shots=20, seed=3)
    if r.std_error == math.inf:
        assert r.value == pytest.approx(math.log(3 / 20) / 14)


def test_finite_instances_near_pool_value():
    r = hc.hc_solve(1.0, 0.4, M=20_000, seed=8, max_iter=60)
    est = hc.hc_eval_P(r.pool, 1.0, 0.4, 100_000, seed=9)
    vals = []
    for inst in sample_instances(SOFT, 12, 40, seed=10):
        try:
            vals.append(hc.hc_tree_dp(inst, 1.0))
        except UnsupportedError:
            vals.append(hc.hc_volume_mc(inst, 1.0, 100_000, seed=11).value)
    assert abs(np.mean(vals) - est.value) < 0.03


def test_step_worker_bit_exact():
    pool = hc.hc_initial(1.0, 9000, 64, seed=4)
    a = hc.hc_step(pool, 0.5, workers=1).densities
    b = hc.hc_step(pool, 0.5, workers=3).densities
    assert np.array_equal(a, b)


def test_checkpoint_roundtrip(tmp_path):
    r = hc.hc_solve(1.0, 0.4, M=300, seed=1, max_iter=3)
    d = hc.hc_digest(1.0, 0.4, 64)
    p = tmp_path / "hc.json"
    hc.save_hc_checkpoint(p, r.pool, d)
    back = hc.load_hc_checkpoint(p, d)
    assert np.allclose(back.densities, r.pool.densities, atol=1e-14)
    with pytest.raises(DigestMismatchError):
        hc.load_hc_checkpoint(p, hc.hc_digest(1.0, 0.5, 64))


def test_soft_fields_map_to_densities():
    vals = np.zeros((3, 64))
    pool = hc.pool_from_fields(vals, 8.0, 1.0)
    assert np.allclose(pool.densities, 1.0)
