"""Real-time classical dynamics and the two classical thresholds.

The equations of motion are

    X'' = -U'(X + y),        y'' = -omega^2 y - U'(X + y).

Integration uses a fourth-order symmetric symplectic composition of
leapfrog steps (Yoshida triple jump), so trajectories are time
reversible to round-off and the energy drift stays far below the
thresholds resolved here.  All drivers are vectorized over batches of
initial conditions; bisection-style searches are done by repeated grid
refinement on a batch.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ModelParams, PhasePoint, ScaledCharges, asymptotic_charges

__all__ = [
    "RealTrajectory",
    "ThresholdResult",
    "integrate",
    "find_nu0",
    "find_epsilon_crit",
]

# Yoshida composition weights: three leapfrog substeps w1, w0, w1
_W1 = 1.0 / (2.0 - 2.0 ** (1.0 / 3.0))
_W0 = 1.0 - 2.0 * _W1


@dataclass
class RealTrajectory:
    """Uniformly sampled trajectory with per-sample conserved energy."""

    t: np.ndarray
    X: np.ndarray
    y: np.ndarray
    pX: np.ndarray
    pY: np.ndarray
    energy: np.ndarray

    @property
    def final(self) -> PhasePoint:
        return PhasePoint(self.X[-1], self.y[-1], self.pX[-1], self.pY[-1])


@dataclass(frozen=True)
class ThresholdResult:
    quantity: str
    value: float
    bracket_lo: float
    bracket_hi: float
    n_iter: int
    dt: float
    X_far: float


def _accel(X, y, omega, barrier):
    """(aX, aY) for the coupled equations; shared force term -U'(X+y)."""
    f = -barrier.d1(X + y)
    return f, f - omega**2 * y


def _leapfrog(state, h, omega, barrier):
    X, y, pX, pY = state
    aX, aY = _accel(X, y, omega, barrier)
    pX = pX + 0.5 * h * aX
    pY = pY + 0.5 * h * aY
    X = X + h * pX
    y = y + h * pY
    aX, aY = _accel(X, y, omega, barrier)
    pX = pX + 0.5 * h * aX
    pY = pY + 0.5 * h * aY
    return X, y, pX, pY


def _step(state, dt, omega, barrier):
    """One fourth-order symmetric step."""
    state = _leapfrog(state, _W1 * dt, omega, barrier)
    state = _leapfrog(state, _W0 * dt, omega, barrier)
    state = _leapfrog(state, _W1 * dt, omega, barrier)
    return state


def _energy(state, omega, barrier):
    X, y, pX, pY = state
    return 0.5 * pX**2 + 0.5 * pY**2 + 0.5 * omega**2 * y**2 + barrier.value(X + y)


def integrate(
    start: PhasePoint,
    params: ModelParams,
    dt: float = 1e-3,
    t_end: float = 100.0,
    record_every: int = 1,
    stop_at_cutoff: bool = False,
    X_far: float | None = None,
) -> RealTrajectory:
    """Integrate a single trajectory on a fixed grid.

    With ``stop_at_cutoff`` the run terminates early once |X| exceeds
    ``X_far`` (default: barrier cutoff) with outgoing momentum.  Raises
    on non-finite state, which signals a too-large dt.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    omega, barrier = params.omega, params.barrier
    if X_far is None:
        X_far = barrier.cutoff
    n_steps = int(round(t_end / dt))
    state = (
        np.asarray(float(start.X)),
        np.asarray(float(start.y)),
        np.asarray(float(start.pX)),
        np.asarray(float(start.pY)),
    )
    ts = [0.0]
    rows = [state]
    for i in range(1, n_steps + 1):
        state = _step(state, dt, omega, barrier)
        if i % record_every == 0 or i == n_steps:
            ts.append(i * dt)
            rows.append(state)
            if not np.isfinite(state[0]):
                raise FloatingPointError("non-finite state; reduce dt")
            if stop_at_cutoff and abs(state[0]) > X_far and state[0] * state[2] > 0:
                break
    arr = np.array([[float(c) for c in row] for row in rows])
    t = np.array(ts)
    X, y, pX, pY = arr.T
    energy = 0.5 * pX**2 + 0.5 * pY**2 + 0.5 * omega**2 * y**2 + barrier.value(X + y)
    return RealTrajectory(t, X, y, pX, pY, energy)


def _classify_batch(states, params, dt, X_far, t_max, check_every=100):
    """Advance a batch until each trajectory leaves |X| > X_far.

    Returns +1 (transmitted, right side with pX > 0), -1 (reflected,
    left side with pX < 0) or 0 (undecided within t_max) per column.
    """
    omega, barrier = params.omega, params.barrier
    X, y, pX, pY = (np.array(a, dtype=float) for a in states)
    n = X.size
    outcome = np.zeros(n, dtype=int)
    active = np.arange(n)
    n_steps = int(round(t_max / dt))
    done_steps = 0
    while active.size and done_steps < n_steps:
        state = (X[active], y[active], pX[active], pY[active])
        for _ in range(check_every):
            state = _step(state, dt, omega, barrier)
        done_steps += check_every
        X[active], y[active], pX[active], pY[active] = state
        right = (X[active] > X_far) & (pX[active] > 0)
        left = (X[active] < -X_far) & (pX[active] < 0)
        outcome[active[right]] = 1
        outcome[active[left]] = -1
        active = active[~(right | left)]
    return outcome


def find_epsilon_crit(
    params: ModelParams,
    eps_lo: float = 1.0,
    eps_hi: float = 3.0,
    X_far: float = 50.0,
    dt: float = 1e-3,
    bracket_width: float = 1e-4,
    t_max: float = 1e4,
    n_grid: int = 33,
) -> ThresholdResult:
    """Critical energy for classical transmission from the oscillator
    ground state (y = pY = 0 at launch).

    Repeated grid refinement over a batch of energies; a trajectory is
    transmitted when it reaches +X_far with positive momentum.  The
    undecided outcome (time cap hit, only possible within a vanishing
    sliver around threshold) counts as not transmitted.
    """
    lo, hi = eps_lo, eps_hi
    n_iter = 0
    while hi - lo > bracket_width:
        eps = np.linspace(lo, hi, n_grid)
        starts = (
            np.full(n_grid, -X_far),
            np.zeros(n_grid),
            np.sqrt(2.0 * eps),
            np.zeros(n_grid),
        )
        outcome = _classify_batch(starts, params, dt, X_far, t_max)
        n_iter += n_grid
        transmitted = outcome == 1
        if not transmitted.any() or transmitted.all():
            raise RuntimeError(
                f"no transmission bracket in [{lo}, {hi}]; widen the range"
            )
        first = int(np.argmax(transmitted))
        lo, hi = eps[first - 1], eps[first]
    return ThresholdResult(
        quantity="epsilon_crit",
        value=0.5 * (lo + hi),
        bracket_lo=lo,
        bracket_hi=hi,
        n_iter=n_iter,
        dt=dt,
        X_far=X_far,
    )


def _sphaleron_emission(delta, params, dt, X_far, tail_periods=3.0):
    """Evolve the reversed sphaleron perturbation and measure its tail.

    Starting at the barrier top with a small common velocity reversed
    (X = y = 0, X' = -delta, y' = 0), the system escapes to X = -infinity;
    the tail carries the emitted oscillator excitation.
    """
    omega, barrier = params.omega, params.barrier
    state = (np.asarray(0.0), np.asarray(0.0), np.asarray(-delta), np.asarray(0.0))
    t_max = 2000.0
    n_chunk = 200
    steps = 0
    while abs(float(state[0])) < X_far + 2.0:
        for _ in range(n_chunk):
            state = _step(state, dt, omega, barrier)
        steps += n_chunk
        if steps * dt > t_max:
            raise RuntimeError("sphaleron emission did not reach the asymptotic region")
    # record a tail window of a few oscillator periods
    n_tail = int(round(tail_periods * 2 * np.pi / omega / dt))
    rows = np.empty((n_tail, 4))
    for i in range(n_tail):
        state = _step(state, dt, omega, barrier)
        rows[i] = [float(c) for c in state]
    return asymptotic_charges(
        rows[:, 0], rows[:, 1], rows[:, 2], rows[:, 3], params, rtol=1e-5
    )


def find_nu0(
    params: ModelParams,
    deltas=(8e-3, 4e-3, 2e-3, 1e-3),
    X_far: float = 35.0,
    dt: float = 1e-3,
    rtol: float = 2e-3,
) -> ThresholdResult:
    """Occupation nu0 of the state emitted by the perturbed barrier-top
    solution, extrapolated over a decreasing sequence of perturbations.

    The extrapolation order is estimated from successive differences; the
    result must be stable under halving delta to within ``rtol`` times
    the value, otherwise the run is rejected.
    """
    deltas = np.asarray(sorted(deltas, reverse=True), dtype=float)
    if deltas.size < 3:
        raise ValueError("need at least three perturbation sizes")
    nus = np.array(
        [_sphaleron_emission(d, params, dt, X_far).nu for d in deltas]
    )
    diffs = np.abs(np.diff(nus))
    if diffs[-1] > rtol * max(nus[-1], 1e-12):
        raise RuntimeError(
            f"nu(delta) not converged: last change {diffs[-1]:.2e} vs nu {nus[-1]:.4f}"
        )
    # Richardson step assuming geometric delta sequence
    ratio = deltas[-2] / deltas[-1]
    if diffs[-2] > 0 and diffs[-1] > 0:
        order = np.log(diffs[-2] / diffs[-1]) / np.log(ratio)
        order = min(max(order, 0.5), 4.0)
        extrap = nus[-1] + (nus[-1] - nus[-2]) / (ratio**order - 1.0)
    else:
        extrap = nus[-1]
    err = abs(extrap - nus[-1]) + diffs[-1]
    return ThresholdResult(
        quantity="nu0",
        value=float(extrap),
        bracket_lo=float(extrap - err),
        bracket_hi=float(extrap + err),
        n_iter=len(deltas),
        dt=dt,
        X_far=X_far,
    )
