import numpy as np
import pytest

from tunnelkit.classical import (
    _classify_batch,
    find_epsilon_crit,
    find_nu0,
    integrate,
)
from tunnelkit.model import BarrierSpec, ModelParams, PhasePoint


@pytest.fixture(scope="module")
def params():
    return ModelParams(omega=0.5)


def test_free_motion_is_exact(params):
    free = ModelParams(omega=0.5, barrier=BarrierSpec(family="none"))
    traj = integrate(PhasePoint(0.0, 0.0, 1.0, 0.0), free, dt=1e-3, t_end=5.0)
    # X(t) = t exactly for free center of mass (drift steps are exact)
    assert np.allclose(traj.X, traj.t, atol=1e-12)


def test_barrier_top_is_stationary(params):
    traj = integrate(PhasePoint(0.0, 0.0, 0.0, 0.0), params, dt=1e-3, t_end=10.0)
    assert np.max(np.abs(traj.X)) == 0.0
    assert np.max(np.abs(traj.y)) == 0.0


def test_energy_drift_bounded(params):
    # energetic trajectory bouncing against the barrier repeatedly
    traj = integrate(
        PhasePoint(-3.0, 0.8, 1.2, 0.3), params, dt=1e-3, t_end=200.0, record_every=50
    )
    drift = np.max(np.abs(traj.energy - traj.energy[0]))
    assert drift < 1e-8


def test_energy_drift_halving_dt(params):
    # fourth-order scheme: halving dt shrinks the drift by ~16
    def drift(dt):
        traj = integrate(
            PhasePoint(-3.0, 0.8, 1.2, 0.3), params, dt=dt, t_end=20.0, record_every=20
        )
        return np.max(np.abs(traj.energy - traj.energy[0]))

    d1, d2 = drift(4e-3), drift(2e-3)
    assert d2 < d1 / 8


def test_time_reversal(params):
    start = PhasePoint(-2.0, 0.5, 1.0, -0.2)
    fwd = integrate(start, params, dt=1e-3, t_end=10.0)
    back = integrate(
        PhasePoint(fwd.X[-1], fwd.y[-1], -fwd.pX[-1], -fwd.pY[-1]),
        params,
        dt=1e-3,
        t_end=10.0,
    )
    assert back.X[-1] == pytest.approx(start.X, abs=1e-8)
    assert back.y[-1] == pytest.approx(start.y, abs=1e-8)
    assert back.pX[-1] == pytest.approx(-start.pX, abs=1e-8)
    assert back.pY[-1] == pytest.approx(-start.pY, abs=1e-8)


def test_nonfinite_state_raises(params):
    with np.errstate(all="ignore"), pytest.raises(FloatingPointError):
        integrate(PhasePoint(0.0, 1e8, 1e8, 0.0), params, dt=100.0, t_end=1e4)


def test_ground_state_transmitted_well_above_threshold(params):
    eps = 3.0
    starts = (
        np.array([-50.0]),
        np.array([0.0]),
        np.array([np.sqrt(2 * eps)]),
        np.array([0.0]),
    )
    out = _classify_batch(starts, params, dt=1e-3, X_far=50.0, t_max=500.0)
    assert out[0] == 1


def test_ground_state_reflected_below_barrier_top(params):
    eps = 0.5
    starts = (
        np.array([-50.0]),
        np.array([0.0]),
        np.array([np.sqrt(2 * eps)]),
        np.array([0.0]),
    )
    out = _classify_batch(starts, params, dt=1e-3, X_far=50.0, t_max=500.0)
    assert out[0] == -1


@pytest.fixture(scope="module")
def eps_crit_result(params):
    return find_epsilon_crit(params, dt=2e-3)


def test_epsilon_crit_value(eps_crit_result):
    assert eps_crit_result.value == pytest.approx(1.8, abs=0.05)
    assert eps_crit_result.bracket_hi - eps_crit_result.bracket_lo <= 1e-4


def test_epsilon_crit_outcome_monotone_across_bracket(params, eps_crit_result):
    # 10-point scan around the bracket: reflected below, transmitted above
    lo, hi = eps_crit_result.bracket_lo, eps_crit_result.bracket_hi
    eps = np.concatenate([np.linspace(lo - 0.05, lo, 5), np.linspace(hi, hi + 0.05, 5)])
    starts = (
        np.full(10, -50.0),
        np.zeros(10),
        np.sqrt(2 * eps),
        np.zeros(10),
    )
    out = _classify_batch(starts, params, dt=2e-3, X_far=50.0, t_max=2000.0)
    assert np.all(out[:5] == -1)
    assert np.all(out[5:] == 1)


@pytest.fixture(scope="module")
def nu0_result(params):
    return find_nu0(params, dt=2e-3)


def test_nu0_value(nu0_result):
    assert nu0_result.value == pytest.approx(0.9, abs=0.05)


def test_nu0_energy_consistency(params):
    # the emitted state carries the sphaleron energy epsilon = 1 as delta -> 0
    from tunnelkit.classical import _sphaleron_emission

    delta = 1e-3
    ch = _sphaleron_emission(delta, params, dt=2e-3, X_far=35.0)
    # launch energy is 1 + delta^2/2; conservation must hold to integrator error
    assert ch.epsilon == pytest.approx(1.0 + 0.5 * delta**2, abs=1e-9)


def test_nu0_delta_halving_self_consistency(params):
    r1 = find_nu0(params, deltas=(8e-3, 4e-3, 2e-3), dt=2e-3)
    r2 = find_nu0(params, deltas=(4e-3, 2e-3, 1e-3), dt=2e-3)
    err = (r1.bracket_hi - r1.bracket_lo) + (r2.bracket_hi - r2.bracket_lo)
    assert abs(r1.value - r2.value) <= max(err, 1e-4)
