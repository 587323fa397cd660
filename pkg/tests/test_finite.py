import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import logsumexp

from dilutedrs.errors import ArgumentError, ResourceError, UnsupportedError
from dilutedrs.finite import (
    HypergraphInstance,
    count_approx_solutions,
    exact_gse,
    exact_log_partition,
    exact_log_partition_curve,
    gibbs_marginal,
    gibbs_marginals,
    mcmc_log_partition,
    sample_hypergraph,
    sample_instances,
)
from dilutedrs.models import (
    ScalarLaw,
    ksat_model,
    nae_ksat_model,
    potts_model,
    pspin_model,
)


def brute_force(inst, beta):
    """Energies of all configurations by direct evaluation of every clause."""
    space = inst.model.space
    tabs = inst.tables()
    psi = inst.psi
    lw = inst.model.measure.log_weights
    H, W = [], []
    for s in itertools.product(range(space.size), repeat=inst.N):
        h = sum(tabs[k][tuple(s[i] for i in inst.sites[k])] for k in range(inst.K))
        h += sum(psi[x] for x in s)
        H.append(h)
        W.append(sum(lw[x] for x in s))
    H, W = np.array(H), np.array(W)
    return logsumexp(beta * H + W) / inst.N, H.max() / inst.N


def _inst(model, N, sites, params):
    return HypergraphInstance(model, N, np.asarray(sites, dtype=np.int64),
                              np.asarray(params, dtype=float))


MODELS = [ksat_model(2, 0.6, 1.0, h=0.3), ksat_model(3, 0.4, 1.0),
          pspin_model(2, 0.8, 1.0, J=ScalarLaw.gaussian(0, 1, 3), h=-0.2),
          potts_model(3, 0.7, 1.0, J=ScalarLaw.rademacher(), h=0.4)]


@settings(max_examples=40, deadline=None)
@given(k=st.integers(0, len(MODELS) - 1), N=st.integers(3, 7), seed=st.integers(0, 2**31),
       beta=st.floats(0.1, 3.0))
def test_enumeration_matches_brute_force(k, N, seed, beta):
    model = MODELS[k]
    if model.space.size ** N > 3000:
        N = 5
    inst = sample_hypergraph(model, N, np.random.default_rng(seed))
    F, G = brute_force(inst, beta)
    assert exact_log_partition(inst, beta).value == pytest.approx(F, abs=1e-12)
    assert exact_gse(inst).value == pytest.approx(G, abs=1e-12)


def test_alpha_zero_has_no_clauses():
    for inst in sample_instances(ksat_model(2, 0.0, 1.0), 10, 5, seed=1):
        assert inst.K == 0


def test_zero_clause_instance():
    inst = _inst(nae_ksat_model(3, 0.0, 1.0), 6, np.zeros((0, 3)), np.zeros((0, 3)))
    assert exact_log_partition(inst, 1.0).value == 0.0
    assert exact_gse(inst).value == 0.0
    assert np.allclose(gibbs_marginals(inst, 1.0), 0.5)
    assert mcmc_log_partition(inst, 1.0).value == 0.0


def test_single_pair_gse():
    inst = _inst(pspin_model(2, 0.5, 1.0), 2, [[0, 1]], [[1.0]])
    assert exact_gse(inst).value == 0.5


def test_symmetric_model_marginals_are_uniform():
    inst = sample_instances(nae_ksat_model(3, 0.5, 1.0), 10, 1, seed=3)[0]
    assert np.allclose(gibbs_marginals(inst, 1.3), 0.5, atol=1e-12)
    assert gibbs_marginal(inst, 1.3, 4) == pytest.approx([0.5, 0.5], abs=1e-12)
    with pytest.raises(ArgumentError):
        gibbs_marginal(inst, 1.3, 10)


def test_marginals_match_brute_force():
    m = ksat_model(2, 0.5, 1.0, h=0.3)
    inst = sample_instances(m, 6, 1, seed=5)[0]
    tabs = inst.tables()
    acc = np.zeros((6, 2))
    for s in itertools.product(range(2), repeat=6):
        h = sum(tabs[k][tuple(s[i] for i in inst.sites[k])] for k in range(inst.K))
        h += sum(m.psi[x] for x in s)
        for i in range(6):
            acc[i, s[i]] += math.exp(h)
    acc /= acc.sum(axis=1, keepdims=True)
    assert np.allclose(gibbs_marginals(inst, 1.0), acc, atol=1e-12)


def test_not_equal_pair_counts():
    # clause vector (1, 1): violated exactly when the two spins agree
    inst = _inst(nae_ksat_model(2, 0.5, 1.0), 2, [[0, 1]], [[1.0, 1.0]])
    assert count_approx_solutions(inst, 1.0, 0.1) == 2
    assert count_approx_solutions(inst, 0.0, 0.1) == 2
    assert count_approx_solutions(inst, 1.0, 1.0) == 4
    assert count_approx_solutions(inst, 0.5, 0.3) == 0


def test_counting_needs_indicator():
    inst = sample_instances(pspin_model(2, 0.5, 1.0), 6, 1, seed=1)[0]
    with pytest.raises(UnsupportedError):
        count_approx_solutions(inst, 0.5, 0.1)


def test_state_cap():
    inst = sample_instances(ksat_model(2, 0.1, 1.0), 25, 1, seed=1)[0]
    with pytest.raises(ResourceError):
        exact_log_partition(inst, 1.0)


def test_worker_count_bit_exact():
    inst = sample_instances(ksat_model(3, 0.4, 1.0, h=0.2), 18, 1, seed=2)[0]
    a = exact_log_partition(inst, 0.9, workers=1).value
    b = exact_log_partition(inst, 0.9, workers=4).value
    assert a == b
    assert np.array_equal(gibbs_marginals(inst, 0.9, 1), gibbs_marginals(inst, 0.9, 3))


def test_partition_curve_consistent():
    inst = sample_instances(ksat_model(2, 0.5, 1.0, h=0.3), 10, 1, seed=4)[0]
    betas = [0.5, 1.0, 2.0]
    curve = exact_log_partition_curve(inst, betas)
    for b, v in zip(betas, curve):
        assert v == pytest.approx(exact_log_partition(inst, b).value, abs=1e-13)


def test_mcmc_agrees_with_enumeration():
    m = ksat_model(2, 0.5, 1.0, h=0.3)
    inst = sample_instances(m, 12, 1, seed=7)[0]
    exact = exact_log_partition(inst, 1.0).value
    r = mcmc_log_partition(inst, 1.0, sweeps=400, chains=32, seed=3)
    assert r.method == "mcmc" and r.error_bar > 0
    assert abs(r.value - exact) <= 3 * r.error_bar


def test_instance_json_roundtrip(tmp_path):
    m = ksat_model(3, 0.5, 1.0)
    inst = sample_instances(m, 9, 1, seed=8)[0]
    p = tmp_path / "inst.json"
    inst.save(p)
    back = HypergraphInstance.load(p, m)
    assert np.array_equal(back.sites, inst.sites)
    assert np.array_equal(back.params, inst.params)
    with pytest.raises(ArgumentError):
        HypergraphInstance.load(p, ksat_model(2, 0.5, 1.0))


def test_instances_are_seeded():
    m = ksat_model(2, 0.5, 1.0)
    a = sample_instances(m, 10, 3, seed=1)
    b = sample_instances(m, 10, 3, seed=1)
    for x, y in zip(a, b):
        assert np.array_equal(x.sites, y.sites) and np.array_equal(x.params, y.params)
    for inst in a:
        assert np.all(np.sort(inst.sites, axis=1)[:, 1:] != np.sort(inst.sites, axis=1)[:, :-1])
