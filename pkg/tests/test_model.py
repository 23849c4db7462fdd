import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tunnelkit.model import (
    BarrierSpec,
    ModelParams,
    PhasePoint,
    ScaledCharges,
    asymptotic_charges,
    total_energy,
)


def test_barrier_top_is_unit_height():
    b = BarrierSpec()
    assert b.value(0.0) == 1.0


def test_barrier_even_symmetry():
    b = BarrierSpec()
    assert b.value(-1.7) == pytest.approx(b.value(1.7), rel=0, abs=0)


def test_barrier_complex_argument_matches_high_precision():
    # independent arbitrary-precision evaluation of exp(-(1+2i)^2/2)
    import mpmath

    mpmath.mp.dps = 40
    z = mpmath.mpc(1, 2)
    ref = mpmath.e ** (-(z**2) / 2)
    ref = complex(ref)
    # frozen from the oracle above
    assert ref == pytest.approx(-1.8650407290090891 - 4.075188339491184j, rel=1e-15)
    got = BarrierSpec().value(1 + 2j)
    assert got == pytest.approx(ref, rel=1e-14)


def test_barrier_large_imaginary_part_not_clamped():
    # |U| is huge for large |Im x| and must be returned faithfully
    val = BarrierSpec().value(0 + 20j)
    assert np.real(val) > 1e80


@settings(max_examples=60, deadline=None)
@given(
    st.complex_numbers(
        min_magnitude=0, max_magnitude=8, allow_nan=False, allow_infinity=False
    )
)
def test_barrier_evenness_complex(x):
    b = BarrierSpec()
    assert b.value(-x) == pytest.approx(b.value(x), rel=1e-12, abs=1e-300)


@settings(max_examples=40, deadline=None)
@given(
    st.complex_numbers(
        min_magnitude=0, max_magnitude=5, allow_nan=False, allow_infinity=False
    )
)
def test_barrier_derivative_matches_finite_difference(x):
    b = BarrierSpec()
    h = 1e-5
    fd1 = (b.value(x + h) - b.value(x - h)) / (2 * h)
    scale = max(abs(b.d1(x)), abs(b.value(x)))
    assert abs(b.d1(x) - fd1) / scale < 1e-8
    fd2 = (b.d1(x + h) - b.d1(x - h)) / (2 * h)
    scale2 = max(abs(b.d2(x)), abs(b.value(x)))
    assert abs(b.d2(x) - fd2) / scale2 < 1e-6


def test_total_energy_free_center_of_mass():
    p = PhasePoint(X=-100.0, y=0.0, pX=0.8, pY=0.0)
    params = ModelParams()
    assert total_energy(p, params) == pytest.approx(0.5 * 0.8**2, abs=1e-300)


def test_total_energy_barrier_top():
    p = PhasePoint(X=0.0, y=0.0, pX=0.0, pY=0.0)
    assert total_energy(p, ModelParams()) == pytest.approx(1.0)


def test_total_energy_hand_value():
    # 0.5*0.09 + 0.5*0.25*0.16 = 0.065; U(-29.6) below cutoff scale
    p = PhasePoint(X=-30.0, y=0.4, pX=0.3, pY=0.0)
    params = ModelParams(omega=0.5)
    assert total_energy(p, params) == pytest.approx(0.065, abs=1e-12)


def test_asymptotic_charges_harmonic_tail():
    params = ModelParams(omega=0.5)
    w = params.omega
    A = 1.3
    t = np.linspace(0, 40, 400)
    y = A * np.cos(w * t)
    pY = -A * w * np.sin(w * t)
    X = -40.0 - 0.7 * t
    pX = np.full_like(t, -0.7)
    ch = asymptotic_charges(X, y, pX, pY, params)
    assert ch.epsilon_osc == pytest.approx(0.5 * w**2 * A**2, rel=1e-12)
    assert ch.nu == pytest.approx(0.5 * w * A**2, rel=1e-12)
    assert ch.epsilon == pytest.approx(0.5 * 0.7**2 + 0.5 * w**2 * A**2, rel=1e-12)


def test_asymptotic_charges_ground_tail():
    params = ModelParams(omega=0.5)
    n = 50
    X = np.linspace(-60, -50, n)
    z = np.zeros(n)
    pX = np.full(n, 1.0)
    ch = asymptotic_charges(X, z, pX, z, params)
    assert ch.nu == 0.0
    assert ch.epsilon == pytest.approx(0.5)


def test_asymptotic_charges_rejects_interacting_region():
    params = ModelParams(omega=0.5)
    n = 50
    X = np.linspace(-5, 5, n)
    z = np.zeros(n)
    with pytest.raises(ValueError, match="cutoff"):
        asymptotic_charges(X, z, z + 1.0, z, params)


def test_asymptotic_charges_rejects_drifting_oscillator_energy():
    params = ModelParams(omega=0.5)
    t = np.linspace(0, 40, 300)
    y = (1.0 + 0.05 * t / 40) * np.cos(params.omega * t)  # growing amplitude
    pY = -(1.0 + 0.05 * t / 40) * params.omega * np.sin(params.omega * t)
    X = -40.0 - t
    pX = np.full_like(t, -1.0)
    with pytest.raises(ValueError, match="asymptotic"):
        asymptotic_charges(X, y, pX, pY, params)


def test_params_validation():
    with pytest.raises(ValueError):
        ModelParams(omega=-1.0)
    with pytest.raises(ValueError):
        ModelParams(coupling_g=0.0)
    with pytest.raises(ValueError):
        BarrierSpec(family="lorentzian")
    with pytest.raises(ValueError):
        ScaledCharges(epsilon=1.0, nu=-0.5, epsilon_osc=-0.25)
