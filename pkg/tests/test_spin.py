import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dilutedrs.errors import ArgumentError, InvalidFieldError
from dilutedrs.spin import (
    CavityField,
    Measure,
    Population,
    circle_grid,
    interval_grid,
    ising_space,
    normalize_finite_beta,
    normalize_rows_finite,
    normalize_zero_temp,
    population_distance,
    potts_space,
    quadrature_weights,
    w1_quantile,
    w1_scalar,
)

ISING = ising_space()
NU = Measure.uniform(ISING)

finite_rows = arrays(np.float64, st.integers(2, 6),
                     elements=st.floats(-30, 30, allow_nan=False))
betas = st.floats(0.05, 20.0)


def test_spaces_basic():
    assert ISING.size == 2 and ISING.is_ising
    assert list(ISING.points) == [-1.0, 1.0]
    assert potts_space(4).size == 4
    g = circle_grid(64)
    assert g.periodic and g.size == 64 and g.radius <= 1.0
    assert interval_grid(5).points[-1] == 1.0


def test_quadrature_weights():
    # counting weights on discrete spaces, trapezoid on grids
    assert list(quadrature_weights(potts_space(3))) == [1.0, 1.0, 1.0]
    for s in (interval_grid(33), circle_grid(16)):
        assert quadrature_weights(s).sum() == pytest.approx(1.0, abs=1e-14)


def test_measure_rejects_bad_weights():
    with pytest.raises(ArgumentError):
        Measure(ISING, [0.7, 0.7])
    with pytest.raises(ArgumentError):
        Measure(ISING, [1.5, -0.5])


def test_normalize_zero_raw_is_zero():
    for beta in (0.3, 1.0, 7.0):
        f = normalize_finite_beta([0.0, 0.0], beta, NU)
        assert np.all(f.values == 0.0)


def test_normalize_constant_raw_cancels():
    f = normalize_finite_beta([2.5, 2.5], 1.0, NU)
    assert np.allclose(f.values, 0.0, atol=1e-15)


def test_normalize_hand_example():
    f = normalize_finite_beta([0.5, -0.5], 1.0, NU)
    c = math.log((math.exp(0.5) + math.exp(-0.5)) / 2)
    assert c == pytest.approx(0.120114, abs=1e-6)
    assert f.values == pytest.approx([0.379886, -0.620114], abs=1e-6)
    assert float(f.marginal(NU).sum()) == pytest.approx(1.0, abs=1e-14)


def test_normalize_zero_temp_examples():
    assert list(normalize_zero_temp([0.0, 0.0]).values) == [0.0, 0.0]
    assert list(normalize_zero_temp([3.0, 1.0]).values) == [0.0, -2.0]
    assert list(normalize_zero_temp([-1.0, -1.0]).values) == [0.0, 0.0]


def test_nonfinite_raw_rejected():
    with pytest.raises(InvalidFieldError):
        normalize_finite_beta([np.inf, 0.0], 1.0, NU)
    with pytest.raises(InvalidFieldError):
        normalize_zero_temp([np.nan, 0.0])
    with pytest.raises(ArgumentError):
        normalize_finite_beta([0.0, 0.0], 0.0, NU)


@settings(max_examples=200, deadline=None)
@given(raw=finite_rows, beta=betas, shift=st.floats(-50, 50))
def test_finite_normalization_idempotent_and_shift_invariant(raw, beta, shift):
    nu = Measure.uniform(potts_space(raw.size))
    lw = nu.log_weights
    a = normalize_rows_finite(raw, beta, lw)
    assert np.allclose(normalize_rows_finite(a, beta, lw), a, atol=1e-10)
    assert np.allclose(normalize_rows_finite(raw + shift, beta, lw), a, atol=1e-9)
    assert np.sum(np.exp(beta * a + lw)) == pytest.approx(1.0, abs=1e-11)


@settings(max_examples=200, deadline=None)
@given(raw=finite_rows, shift=st.floats(-50, 50))
def test_zero_temp_normalization_idempotent_and_shift_invariant(raw, shift):
    a = normalize_zero_temp(raw).values
    assert a.max() == 0.0
    assert np.array_equal(normalize_zero_temp(a).values, a)
    assert np.allclose(normalize_zero_temp(raw + shift).values, a, atol=1e-12)


def test_w1_scalar_examples():
    a = np.array([0.3, -1.2, 4.0])
    assert w1_scalar(a, a) == 0.0
    assert w1_scalar(a, a + 0.7) == pytest.approx(0.7)
    assert w1_scalar([0, 1], [0, 0]) == 0.5
    with pytest.raises(ArgumentError):
        w1_scalar([1.0], [1.0, 2.0])


def test_w1_unequal_sizes_exact():
    assert w1_quantile([0.0, 1.0], [0.0, 0.0, 0.0]) == pytest.approx(0.5)
    assert w1_quantile([0.0], [1.0, 2.0]) == pytest.approx(1.5)
    a = np.random.default_rng(2).normal(size=500)
    assert w1_quantile(a, np.repeat(a, 3)) == pytest.approx(0.0, abs=1e-12)


def test_w1_quantile_agrees_for_large_samples():
    rng = np.random.default_rng(0)
    a, b = rng.normal(size=40_000), rng.normal(0.5, 1.0, size=30_000)
    assert w1_quantile(a, b) == pytest.approx(0.5, abs=0.02)


@settings(max_examples=100, deadline=None)
@given(a=arrays(np.float64, 20, elements=st.floats(-5, 5)),
       b=arrays(np.float64, 20, elements=st.floats(-5, 5)),
       c=arrays(np.float64, 20, elements=st.floats(-5, 5)))
def test_w1_is_a_metric(a, b, c):
    assert w1_scalar(a, b) == pytest.approx(w1_scalar(b, a))
    assert w1_scalar(a, c) <= w1_scalar(a, b) + w1_scalar(b, c) + 1e-12


def _pop(values, beta=1.0):
    return Population(ISING, beta, np.asarray(values, dtype=float))


def test_population_distance_examples():
    rng = np.random.default_rng(1)
    raw = rng.normal(size=(100, 2))
    p = _pop(normalize_rows_finite(raw, 1.0, NU.log_weights))
    assert population_distance(p, p) == 0.0
    shifted = _pop(normalize_rows_finite(raw + 3.0, 1.0, NU.log_weights))
    assert population_distance(p, shifted) == pytest.approx(0.0, abs=1e-12)
    zero = Population(ISING, math.inf, np.zeros((10, 2)))
    off = np.zeros((10, 2))
    off[:, 0] = -0.3
    assert population_distance(zero, Population(ISING, math.inf, off)) == pytest.approx(0.3)


def test_population_distance_rejects_mismatch():
    with pytest.raises(ArgumentError):
        population_distance(_pop(np.zeros((3, 2))), _pop(np.zeros((3, 2)), beta=2.0))


def test_population_checks_normalization():
    _pop(np.zeros((4, 2))).check(NU)
    with pytest.raises(InvalidFieldError):
        _pop(np.ones((4, 2))).check(NU)
    with pytest.raises(ArgumentError):
        Population(ISING, 1.0, np.zeros((4, 3)))


def test_cavity_field_marginal():
    f = CavityField(np.array([0.0, 0.0]), 2.0)
    assert f.marginal(NU) == pytest.approx([0.5, 0.5])
    with pytest.raises(ArgumentError):
        CavityField(np.zeros(2), math.inf).marginal(NU)
