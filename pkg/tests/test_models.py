import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dilutedrs.errors import ArgumentError, ConfigError, UnsupportedError
from dilutedrs.models import (
    ScalarLaw,
    ThetaRealization,
    check_symmetry,
    franz_leone_params,
    hardcore_soft_model,
    ksat_model,
    load_custom_table,
    nae_ksat_model,
    perceptron_model,
    potts_model,
    pspin_model,
    sample_theta,
    theta_eval,
    xy_model,
)
from dilutedrs.spin import ising_space

ISING_PTS = (-1.0, 1.0)


def test_pspin_constant_J_is_product_table():
    m = pspin_model(3, J=ScalarLaw.constant(1.0))
    t = sample_theta(m, np.random.default_rng(0))
    for x in itertools.product(ISING_PTS, repeat=3):
        assert t(*x) == x[0] * x[1] * x[2]


def test_xy_at_equal_angles():
    m = xy_model(J=ScalarLaw.constant(1.0))
    t = sample_theta(m, np.random.default_rng(0))
    assert t(0.3, 0.3) == pytest.approx(1.0)
    assert t(0.0, 0.5) == pytest.approx(-1.0)


def test_theta_arity_checked():
    t = sample_theta(pspin_model(2), np.random.default_rng(0))
    with pytest.raises(ArgumentError):
        theta_eval(t, (1.0,))


@pytest.mark.parametrize("model,expected", [
    (nae_ksat_model(3), True),
    (ksat_model(2), False),
    (ksat_model(3), False),
    (pspin_model(2, J=ScalarLaw.rademacher()), True),
    (pspin_model(4), True),
    (pspin_model(3), False),
    (perceptron_model(2, symmetric=True), True),
])
def test_symmetry_flags(model, expected):
    assert check_symmetry(model) is expected
    assert model.is_symmetric is expected


def test_symmetry_check_needs_ising():
    with pytest.raises(UnsupportedError):
        check_symmetry(potts_model(3))


def test_franz_leone_pspin_values():
    fl = franz_leone_params(pspin_model(2), beta=1.0)
    assert fl.a == pytest.approx(1.543081, abs=1e-6)
    assert fl.b == pytest.approx(0.761594, abs=1e-6)


def test_franz_leone_ksat_values():
    assert franz_leone_params(ksat_model(2), beta=0.0).b == 0.0
    fl = franz_leone_params(ksat_model(2), beta=1.0)
    assert math.expm1(-1.0) == pytest.approx(-0.632121, abs=1e-6)
    assert fl.b == pytest.approx(math.expm1(-1.0) / 4, abs=1e-15)


def test_franz_leone_absent_for_potts():
    assert franz_leone_params(potts_model(3)) is None


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), beta=st.floats(0.01, 5.0), p=st.integers(2, 4),
       fam=st.sampled_from(["pspin", "ksat"]))
def test_franz_leone_identity(seed, beta, p, fam):
    if fam == "pspin":
        m = pspin_model(p, J=ScalarLaw.gaussian(0.0, 1.0, 3.0))
    else:
        m = ksat_model(p)
    theta = sample_theta(m, np.random.default_rng(seed))
    fl = franz_leone_params(m, beta, theta)
    for x in itertools.product(ISING_PTS, repeat=p):
        prod = np.prod([fl.xi[i] + fl.zeta[i] * x[i] for i in range(p)])
        assert math.exp(beta * theta(*x)) == pytest.approx(fl.a * (1 + fl.b * prod), rel=1e-12)


def test_ksat_clause_law_validated():
    with pytest.raises(ConfigError):
        ksat_model(2, clause_law=[0.5, 0.5])
    m = ksat_model(2, clause_law=[1.0, 0.0, 0.0, 0.0])
    bank, idx = m.sample_tables(np.random.default_rng(0), 10)
    tab = bank[idx[0]]
    assert tab[0, 0] == -1.0 and tab.sum() == -1.0


def test_xy_lipschitz_on_random_pairs():
    m = xy_model(J=ScalarLaw.constant(1.5))
    fam = m.family
    L = fam.lipschitz_of(1.5)
    t = ThetaRealization(fam, np.array([1.5]))
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(2000):
        x, y = rng.random(2), rng.random(2)
        worst = max(worst, abs(t(*x) - t(*y)) / np.linalg.norm(x - y))
    assert worst <= L
    # the constant is attained along (1, -1)
    assert worst > 0.9 * L


def test_hardcore_soft_lipschitz():
    m = hardcore_soft_model(alpha=0.4)
    t = ThetaRealization(m.family, np.zeros(0))
    rng = np.random.default_rng(4)
    for _ in range(500):
        x, y = rng.random(2), rng.random(2)
        assert abs(t(*x) - t(*y)) <= m.family.lipschitz * np.linalg.norm(x - y) + 1e-15
    assert t(0.2, 0.3) == 0.0
    assert t(0.9, 0.6) == pytest.approx(-0.5)


def test_scalar_laws():
    rng = np.random.default_rng(5)
    g = ScalarLaw.gaussian(0.0, 1.0, 2.0).sample(rng, 10_000)
    assert np.all(np.abs(g) <= 2.0)
    r = ScalarLaw.rademacher().sample(rng, 1000)
    assert set(np.unique(r)) == {-1.0, 1.0}
    f = ScalarLaw.finite([0.0, 2.0], [0.25, 0.75])
    assert f.expect(lambda x: x) == pytest.approx(1.5)
    with pytest.raises((ConfigError, ArgumentError)):
        ScalarLaw.finite([0.0, 1.0], [0.2, 0.2])


def test_regime_flags():
    f = ksat_model(2, 0.25, 0.1).regime_flags()
    assert f["subcritical"] and f["high_temperature"] and f["replica_symmetric_regime"]
    f = ksat_model(3, 0.5, 5.0).regime_flags()
    assert not f["subcritical"] and not f["high_temperature"]
    assert not f["replica_symmetric_regime"]


def test_digest_tracks_parameters():
    a, b = ksat_model(2, 0.25, 1.0), ksat_model(2, 0.3, 1.0)
    assert a.digest() != b.digest()
    assert a.digest(include_beta=False) == a.with_beta(3.0).digest(include_beta=False)


def test_custom_table_roundtrip(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("i,j,value\n0,0,1\n0,1,-1\n1,0,-1\n1,1,1\n")
    tab = load_custom_table(str(p), ising_space())
    assert np.array_equal(tab.table, [[1.0, -1.0], [-1.0, 1.0]])
    bad = tmp_path / "bad.csv"
    bad.write_text("0,0,1\n0,1,-1\n1,0,-1\n")
    with pytest.raises(ConfigError):
        load_custom_table(str(bad), ising_space())


def test_potts_external_field_on_state_one():
    m = potts_model(3, h=0.7)
    assert list(m.psi) == [0.7, 0.0, 0.0]
