import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dilutedrs import functionals as fx
from dilutedrs.errors import ArgumentError, NoClosedFormError
from dilutedrs.models import (
    ScalarLaw,
    ksat_model,
    nae_ksat_model,
    potts_model,
    pspin_model,
    xy_model,
)
from dilutedrs.rde import initial_population, solve_magnetization, solve_population

mp.mp.dps = 40
RAD = ScalarLaw.rademacher()


def test_estimate_from_samples():
    e = fx.FunctionalEstimate.from_samples([1.0, 2.0, 3.0, 4.0])
    assert e.value == 2.5 and e.n_samples == 4
    assert e.std_error == pytest.approx(np.std([1, 2, 3, 4], ddof=1) / 2)


@pytest.mark.parametrize("x", [0.0, 0.5, 1.0, 3.7, 12.0, 29.0])
def test_bessel_i0_against_mpmath(x):
    assert fx.bessel_i0(x) == pytest.approx(float(mp.besseli(0, x)), rel=1e-14)


def test_closed_forms_against_mpmath():
    e = mp.e
    assert fx.closed_form(potts_model(3, 0.5, 1.0)) == pytest.approx(
        float(mp.mpf(1) / 2 * mp.log((e + 2) / 3)), abs=1e-12)
    assert fx.closed_form(xy_model(0.5, 1.0)) == pytest.approx(
        float(mp.log(mp.besseli(0, 1)) / 2), abs=1e-12)
    assert fx.closed_form(nae_ksat_model(3, 1 / 6, 1.0)) == pytest.approx(
        float(mp.log(1 + (mp.exp(-1) - 1) / 4) / 6), abs=1e-12)
    assert fx.closed_form(pspin_model(2, 0.5, 1.0, J=RAD)) == pytest.approx(
        float(mp.log(mp.cosh(1)) / 2), abs=1e-12)


def test_closed_form_printed_values():
    # printed six-digit values; the Potts and XY ones differ in the sixth digit
    assert fx.closed_form(nae_ksat_model(3, 1 / 6, 1.0)) == pytest.approx(-0.028668, abs=1e-6)
    assert fx.closed_form(pspin_model(2, 0.5, 1.0, J=RAD)) == pytest.approx(0.216890, abs=1e-6)
    assert fx.closed_form(potts_model(3, 0.5, 1.0)) == pytest.approx(0.226416, abs=1e-6)
    assert fx.closed_form(xy_model(0.5, 1.0)) == pytest.approx(0.117957, abs=1e-6)


def test_closed_form_gse_catalog():
    assert fx.closed_form(pspin_model(2, 0.5, math.inf, J=RAD), "gse") == 0.5
    assert fx.closed_form(potts_model(3, 0.5, math.inf, J=RAD), "gse") == 0.25
    assert fx.closed_form(xy_model(0.5, math.inf), "gse") == 0.5
    assert fx.closed_form(nae_ksat_model(3, 1 / 6, math.inf), "gse") == 0.0
    assert fx.closed_form(ksat_model(3, 0.2, math.inf), "gse") == 0.0


def test_closed_form_refuses_unknown():
    with pytest.raises(NoClosedFormError):
        fx.closed_form(ksat_model(2, 0.25, 1.0, h=0.3))
    with pytest.raises(NoClosedFormError):
        fx.closed_form(pspin_model(2, 0.5, 1.0, h=0.1))
    with pytest.raises(ArgumentError):
        fx.closed_form(pspin_model(2, 0.5, math.inf), "F")


def test_pspin_odd_p_zero_field():
    m = pspin_model(3, 0.2, 0.8, J=RAD)
    assert fx.closed_form(m) == pytest.approx(0.2 * math.log(math.cosh(0.8)), abs=1e-15)


def test_zero_pool_reproduces_symmetric_formula():
    for m in (pspin_model(2, 0.5, 1.0, J=RAD), nae_ksat_model(3, 1 / 6, 1.0),
              potts_model(3, 0.5, 1.0)):
        pop = initial_population(m, 5000, "zero")
        est = fx.eval_P_finite(pop, m, 200_000, seed=3)
        assert abs(est.value - fx.closed_form(m)) <= 3 * est.std_error + 1e-12


def test_alpha_zero_functional_is_zero():
    m = ksat_model(2, 0.0, 1.0)
    pop = solve_population(m, M=500).population
    assert fx.eval_P_finite(pop, m, 1000).value == 0.0
    mz = m.with_beta(math.inf)
    assert fx.eval_P_infty(solve_population(mz, M=500).population, mz, 1000).value == 0.0


def test_zero_temperature_zero_pool():
    for m, ref in ((xy_model(0.5, math.inf), 0.5), (potts_model(3, 0.5, math.inf, J=RAD), 0.25),
                   (pspin_model(2, 0.5, math.inf, J=RAD), 0.5)):
        est = fx.eval_P_infty(initial_population(m, 5000, "zero"), m, 200_000, seed=1)
        assert abs(est.value - ref) <= max(3 * est.std_error, 5e-3)


def test_magnetization_functional_trivial_cases():
    m = ksat_model(2, 0.25, 1e-300)
    assert fx.eval_P_magnetization(np.zeros(100), m, 1000).value == pytest.approx(0.0, abs=1e-12)
    m = pspin_model(2, 0.5, 1.0, J=RAD)
    est = fx.eval_P_magnetization(np.zeros(100), m, 100_000, seed=2)
    assert abs(est.value - 0.5 * math.log(math.cosh(1.0))) <= 3 * est.std_error + 1e-12


def test_magnetization_functional_matches_field_functional():
    m = ksat_model(2, 0.25, 1.0, h=0.3)
    pool, _, _ = solve_magnetization(m, M=50_000, max_iter=60, seed=1)
    em = fx.eval_P_magnetization(pool, m, 200_000, seed=2)
    pop = solve_population(m, M=50_000, max_iter=60, seed=3).population
    ef = fx.eval_P_finite(pop, m, 200_000, seed=4)
    assert abs(em.value - ef.value) <= 3 * math.hypot(em.std_error, ef.std_error)


def test_F_prime_examples():
    m = nae_ksat_model(3, 1 / 6, 1.0)
    d = fx.estimate_F_prime(m, 1.0, 1e-4, lambda mm: fx.csp_free_energy(mm))
    assert d == pytest.approx(-0.018205, abs=1e-6)
    assert fx.csp_free_energy_prime(m, 1.0) == pytest.approx(d, abs=1e-8)
    rho = fx.csp_satisfied_fraction(m)
    assert rho == 0.75
    assert fx.csp_free_energy_prime(m, 0.0) == pytest.approx(-(1 / 6) * (1 - rho), abs=1e-15)
    assert not fx.kink_flag(m, 1.0, 1e-4, lambda mm: fx.csp_free_energy(mm))


def test_csp_free_energy_matches_closed_form():
    m = nae_ksat_model(3, 1 / 6, 1.3)
    assert fx.csp_free_energy(m) == pytest.approx(fx.closed_form(m), abs=1e-14)


def test_counting_exponent_examples():
    assert fx.csp_log_count(0.7, 0.5, 0.5) == pytest.approx(math.log(2), abs=1e-15)
    ref = math.log(2) + 0.375 * math.log(2 / 3) + 0.125 * math.log(2)
    assert ref == pytest.approx(0.627741, abs=1e-6)
    assert fx.csp_log_count(0.5, 0.5, 0.25) == pytest.approx(ref, abs=1e-14)
    with pytest.raises(ArgumentError):
        fx.csp_log_count(0.5, 0.5, 1.0)


@settings(max_examples=60, deadline=None)
@given(t=st.floats(0.02, 0.98), alpha=st.floats(0.1, 1.0), p=st.sampled_from([2, 3]))
def test_legendre_route_matches_closed_count(t, alpha, p):
    m = nae_ksat_model(p, alpha, 1.0)
    rho = fx.csp_satisfied_fraction(m)
    try:
        via = fx.legendre_count_closed_form(m, t)
    except ArgumentError:
        return  # fraction outside the beta window
    assert via == pytest.approx(fx.csp_log_count(alpha, rho, t), abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(b1=st.floats(-5, 15), b2=st.floats(-5, 15), alpha=st.floats(0.05, 2.0))
def test_free_energy_convexity(b1, b2, alpha):
    m = nae_ksat_model(3, alpha, 1.0)
    lo, hi = min(b1, b2), max(b1, b2)
    assert fx.csp_free_energy_prime(m, lo) <= fx.csp_free_energy_prime(m, hi) + 1e-12
    if lo >= 0:
        L = lambda b: fx.csp_free_energy(m, b) - b * fx.csp_free_energy_prime(m, b)
        assert L(hi) <= L(lo) + 1e-12


def test_atomic_root_sweep():
    for alpha in np.linspace(0.05, 1.0, 20):
        for p in (2, 3, 4):
            c = fx.atomic_mass_root(alpha, p)
            lam = alpha * p * (p - 1)
            if lam <= 1:
                assert c == 1.0 and not fx.has_atomic_root(alpha, p)
            else:
                assert 0 < c < 1
                assert c == pytest.approx(math.exp(alpha * p * (c ** (p - 1) - 1)), abs=1e-12)


def test_atomic_root_bad_args():
    with pytest.raises(ArgumentError):
        fx.atomic_mass_root(-0.1, 2)
