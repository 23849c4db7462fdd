"""Seeding, branch continuation and exponent extraction for the
complex-trajectory solver.

The first converged solution is grown from the one-dimensional skeleton
(frozen oscillator): a real incoming bounce on the elevated segment, a
half-period crossing of the inverted barrier along the descent, and a
real roll-out on the real axis.  The oscillator fields start at zero and
the Newton iteration dresses them in.  From the seed, branches are
walked in T (moving the energy) and theta (moving the occupation),
each step predicted from the previous solutions; the exponent at fixed
energy is extrapolated to vanishing occupation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .bvp import (
    BvpSolution,
    ExponentRecord,
    NewtonError,
    exponent_record,
    pack_state,
    solve_bvp,
)
from .contour import ContourGrid, ContourSpec, discretize_contour
from .model import ModelParams

__all__ = [
    "ContourPolicy",
    "F0Result",
    "seed_solution",
    "euclidean_half_period",
    "continue_in_theta",
    "continue_in_T",
    "solve_at_epsilon",
    "extrapolate_F0",
    "f0_curve",
]


@dataclass(frozen=True)
class ContourPolicy:
    """Grid-building rules for contours along a branch."""

    t_left: float = -40.0
    t_right: float = 40.0
    t_c: float = 0.0
    h_target: float = 0.0125
    n_c_min: int = 160

    def build(self, T: float) -> ContourGrid:
        n_b = int(round((self.t_c - self.t_left) / self.h_target)) + 1
        n_d = int(round((self.t_right - self.t_c) / self.h_target)) + 1
        n_c = max(self.n_c_min, int(round((T / 2.0) / self.h_target)) + 1)
        spec = ContourSpec(
            T=T,
            t_left=self.t_left,
            t_right=self.t_right,
            t_c=self.t_c,
            n_b=n_b,
            n_c=n_c,
            n_d=n_d,
        )
        return discretize_contour(spec)


@dataclass
class F0Result:
    epsilon: float
    F0: float
    F0_err: float
    nu_min: float
    theta_max: float
    records: list = field(default_factory=list)


def euclidean_half_period(epsilon: float, params: ModelParams) -> float:
    """Imaginary-time transit of the inverted barrier at energy epsilon.

    The crossing runs between the turning points +-x_t with
    U(x_t) = epsilon; the square-root endpoint singularities are removed
    by the substitution x = x_t sin(phi).
    """
    if not (0.0 < epsilon < 1.0):
        raise ValueError("the real crossing exists only for 0 < epsilon < 1")
    x_t = math.sqrt(-2.0 * math.log(epsilon))

    def integrand(phi):
        x = x_t * math.sin(phi)
        du = params.barrier.value(x) - epsilon
        den = math.sqrt(max(2.0 * du, 0.0))
        if den == 0.0:
            # endpoint limit: du ~ x_t^2 eps cos^2(phi); finite ratio
            return 1.0 / math.sqrt(epsilon)
        return x_t * math.cos(phi) / den

    val, _ = quad(integrand, -math.pi / 2, math.pi / 2, limit=200)
    return val


def _rk4_second_order(x0, v0, n_steps, h, accel, substeps=8):
    """Integrate x'' = accel(x) on a uniform grid, returning x at nodes."""
    xs = np.empty(n_steps)
    x, v = x0, v0
    hh = h / substeps
    for i in range(n_steps):
        xs[i] = x
        for _ in range(substeps):
            k1x, k1v = v, accel(x)
            k2x, k2v = v + 0.5 * hh * k1v, accel(x + 0.5 * hh * k1x)
            k3x, k3v = v + 0.5 * hh * k2v, accel(x + 0.5 * hh * k2x)
            k4x, k4v = v + hh * k3v, accel(x + hh * k3x)
            x += hh * (k1x + 2 * k2x + 2 * k3x + k4x) / 6.0
            v += hh * (k1v + 2 * k2v + 2 * k3v + k4v) / 6.0
    return xs


def skeleton_state(grid: ContourGrid, epsilon: float, params: ModelParams):
    """Frozen-oscillator trajectory on the contour, oscillator fields zero.

    The incoming branch reflects at the left turning point exactly at the
    elevated segment's end; the descent carries the inverted-barrier
    crossing; the outgoing branch starts at rest at the right turning
    point (so the translation pin Re X'(t_c) = 0 holds by construction).
    """
    spec = grid.spec
    x_t = math.sqrt(-2.0 * math.log(epsilon))
    b = params.barrier

    def accel_real(x):
        return -float(b.d1(x))

    def accel_euclid(x):
        return +float(b.d1(x))

    # elevated segment, integrated backward from the turning point
    n_b = spec.n_b
    xs_back = _rk4_second_order(-x_t, 0.0, n_b, spec.h_b, accel_real)
    X_b = xs_back[::-1]
    # descent: half-period crossing
    n_c = spec.n_c
    X_c = _rk4_second_order(-x_t, 0.0, n_c, spec.h_c, accel_euclid)
    # outgoing segment from rest at +x_t
    n_d = spec.n_d
    X_d = _rk4_second_order(x_t, 0.0, n_d, spec.h_d, accel_real)

    X = np.concatenate([X_b, X_c[1:], X_d[1:]]).astype(complex)
    y = np.zeros_like(X)
    # incoming-ray constants from the first two elevated nodes
    tp0 = (grid.t[0] - 0.5j * spec.T).real
    tp1 = (grid.t[1] - 0.5j * spec.T).real
    p = (X_b[1] - X_b[0]).real / (tp1 - tp0)
    X0 = X_b[0].real - p * tp0
    return pack_state(X, y, complex(X0), complex(p), 0j, 0j)


def seed_solution(
    epsilon: float,
    params: ModelParams,
    policy: ContourPolicy | None = None,
    theta: float = 0.0,
    tol: float = 1e-10,
) -> BvpSolution:
    """Converge the first branch point from the frozen-oscillator skeleton."""
    policy = policy or ContourPolicy()
    T = 2.0 * euclidean_half_period(epsilon, params)
    grid = policy.build(T)
    z = skeleton_state(grid, epsilon, params)
    return solve_bvp(grid, theta, params, z, tol=tol)


def _predict(prev: BvpSolution, prev2: BvpSolution | None, frac: float):
    """Linear extrapolation of the packed state along the branch."""
    z1 = pack_state(prev.X, prev.y, prev.X0, prev.p, prev.u, prev.v)
    if prev2 is None or prev2.grid.n_nodes != prev.grid.n_nodes:
        return z1
    z2 = pack_state(prev2.X, prev2.y, prev2.X0, prev2.p, prev2.u, prev2.v)
    return z1 + frac * (z1 - z2)


def _resample(sol: BvpSolution, grid: ContourGrid) -> np.ndarray:
    """Interpolate a solution onto a new contour grid segment by segment.

    Used when T changes (the descent length changes), so fields are
    mapped by relative position within each segment.
    """
    X = np.empty(grid.n_nodes, dtype=complex)
    y = np.empty(grid.n_nodes, dtype=complex)
    for s in range(3):
        sl_new = grid.segment_slice(s)
        sl_old = sol.grid.segment_slice(s)
        n_new = sl_new.stop - sl_new.start
        n_old = sl_old.stop - sl_old.start
        xi_new = np.linspace(0.0, 1.0, n_new)
        xi_old = np.linspace(0.0, 1.0, n_old)
        for src, dst in ((sol.X, X), (sol.y, y)):
            seg = src[sl_old]
            dst[sl_new] = np.interp(xi_new, xi_old, seg.real) + 1j * np.interp(
                xi_new, xi_old, seg.imag
            )
    return pack_state(X, y, sol.X0, sol.p, sol.u, sol.v)


def continue_in_theta(
    start: BvpSolution,
    params: ModelParams,
    theta_target: float,
    step: float = 0.5,
    min_step: float = 1e-3,
    tol: float = 1e-10,
) -> list[BvpSolution]:
    """Walk theta at fixed T, halving the step on Newton failures."""
    sols = [start]
    prev2 = None
    theta = start.theta
    dtheta = math.copysign(step, theta_target - theta)
    while abs(theta - theta_target) > 1e-12:
        dtheta = math.copysign(min(abs(dtheta), abs(theta_target - theta)), dtheta)
        guess = _predict(sols[-1], prev2, abs(dtheta) / max(abs(step), 1e-12))
        try:
            sol = solve_bvp(sols[-1].grid, theta + dtheta, params, guess, tol=tol)
        except NewtonError:
            dtheta *= 0.5
            if abs(dtheta) < min_step:
                raise
            continue
        prev2 = sols[-1]
        sols.append(sol)
        theta += dtheta
        dtheta = math.copysign(step, theta_target - theta) if theta != theta_target else dtheta
    return sols


def continue_in_T(
    start: BvpSolution,
    params: ModelParams,
    T_target: float,
    policy: ContourPolicy,
    step: float = 0.2,
    min_step: float = 1e-4,
    tol: float = 1e-10,
) -> list[BvpSolution]:
    """Walk the contour height T at fixed theta (moves the energy)."""
    sols = [start]
    T = start.grid.spec.T
    dT = math.copysign(step, T_target - T)
    while abs(T - T_target) > 1e-12:
        dT = math.copysign(min(abs(dT), abs(T_target - T)), dT)
        grid = policy.build(T + dT)
        guess = _resample(sols[-1], grid)
        try:
            sol = solve_bvp(grid, sols[-1].theta, params, guess, tol=tol)
        except NewtonError:
            dT *= 0.5
            if abs(dT) < min_step:
                raise
            continue
        sols.append(sol)
        T += dT
        dT = math.copysign(step, T_target - T) if T != T_target else dT
    return sols


def solve_at_epsilon(
    start: BvpSolution,
    params: ModelParams,
    epsilon_target: float,
    policy: ContourPolicy,
    eps_tol: float = 1e-9,
    max_iter: int = 30,
    tol: float = 1e-10,
) -> BvpSolution:
    """Secant iteration in T (at fixed theta) until epsilon hits target.

    Energy decreases with T along the branch, so the secant converges
    quickly from any nearby starting point.
    """
    sol = start
    T = sol.grid.spec.T
    # initial second point from a small T nudge
    dT = 0.05 if sol.epsilon < epsilon_target else -0.05
    sol_prev, T_prev = sol, T
    sol = continue_in_T(sol, params, T - dT, policy, step=abs(dT), tol=tol)[-1]
    T = T - dT
    for _ in range(max_iter):
        if abs(sol.epsilon - epsilon_target) < eps_tol:
            return sol
        de = sol.epsilon - sol_prev.epsilon
        if de == 0.0:
            raise NewtonError("secant in T stalled: energy not responding")
        T_new = T + (epsilon_target - sol.epsilon) * (T - T_prev) / de
        sol_prev, T_prev = sol, T
        sol = continue_in_T(sol, params, T_new, policy, step=max(abs(T_new - T), 0.05), tol=tol)[-1]
        T = T_new
    raise NewtonError(
        f"epsilon target {epsilon_target} not reached; at {sol.epsilon:.8f}"
    )


def extrapolate_F0(records: list[ExponentRecord], epsilon_tol: float = 1e-6):
    """Vanishing-occupation limit of F at fixed energy.

    Fits F against nu with first- and second-order polynomials; the
    reported error is their intercept difference.  Requires at least
    four records at a common epsilon with monotone F(nu).
    """
    if len(records) < 4:
        raise ValueError("need at least four records for the extrapolation")
    eps = np.array([r.epsilon for r in records])
    if eps.max() - eps.min() > epsilon_tol:
        raise ValueError("records do not share a common epsilon")
    order = np.argsort([r.nu for r in records])
    nu = np.array([records[i].nu for i in order])
    F = np.array([records[i].F for i in order])
    dF = np.diff(F)
    if not (np.all(dF <= 1e-10) or np.all(dF >= -1e-10)):
        raise ValueError("F(nu) is not monotone; solver trouble at large theta")
    lin = np.polynomial.Polynomial.fit(nu, F, 1).convert().coef[0]
    quad_c = np.polynomial.Polynomial.fit(nu, F, 2).convert().coef[0]
    record = ExponentRecord(
        epsilon=float(eps.mean()),
        nu=0.0,
        T=records[order[0]].T,
        theta=records[order[-1]].theta,
        F=float(quad_c),
        two_im_S0=math.nan,
        residual_norm=max(r.residual_norm for r in records),
        provenance="semiclassical-extrapolated",
    )
    return record, float(abs(quad_c - lin))


def f0_curve(
    epsilon_grid,
    params: ModelParams,
    policy: ContourPolicy | None = None,
    theta_ladder=(0.0, 0.75, 1.5, 2.25, 3.0, 4.0),
    seed_epsilon: float = 0.9,
    tol: float = 1e-10,
) -> list[F0Result]:
    """F0(epsilon) over a grid: theta ladder at each epsilon, then the
    vanishing-occupation extrapolation.

    One seed is converged at ``seed_epsilon`` and carried across the grid
    by continuation; the theta ladder restarts from each epsilon's
    theta = ladder[0] branch point.
    """
    policy = policy or ContourPolicy()
    base = seed_solution(seed_epsilon, params, policy, theta=theta_ladder[0], tol=tol)
    results = []
    carrier = base
    for eps_target in epsilon_grid:
        carrier = solve_at_epsilon(carrier, params, eps_target, policy, tol=tol)
        records = [exponent_record(carrier)]
        walker = carrier
        for th in theta_ladder[1:]:
            walker = continue_in_theta(walker, params, th, tol=tol)[-1]
            walker = solve_at_epsilon(walker, params, eps_target, policy, tol=tol)
            records.append(exponent_record(walker))
        rec0, err = extrapolate_F0(records)
        results.append(
            F0Result(
                epsilon=eps_target,
                F0=rec0.F,
                F0_err=err,
                nu_min=min(r.nu for r in records),
                theta_max=max(r.theta for r in records),
                records=records,
            )
        )
    return results
