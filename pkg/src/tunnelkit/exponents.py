"""Tunneling-exponent extraction from transmission scans.

At fixed rescaled energy epsilon = g^2 E the ground-channel transmission
behaves as T0 = C exp(-F0 / g^2), so F0 is the negative slope of
ln T0 against 1/g^2.  This module runs the scattering solver over a
list of couplings with auto-scaled lattice and basis, fits the line,
and assembles the comparison table against the semiclassical route.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .channels import ChannelBasis, LatticeSpec, solve_scattering
from .model import ModelParams

__all__ = [
    "ScanPolicy",
    "ScanPoint",
    "ScanSeries",
    "FitResult",
    "ComparisonRow",
    "scan_g",
    "fit_exponent",
    "compare_exponents",
]


@dataclass(frozen=True)
class ScanPolicy:
    """Resolution policy for transmission scans.

    Lattice spacing keeps the largest open momentum at p*a <= pa_max;
    the basis retains a closed-channel margin above the open block; the
    domain covers the barrier support of every retained channel.  The
    Richardson pass is skipped for deep points, where its cost buys
    nothing against the solver's noise floor.  Basis convergence is
    monitored on the scale of ln T0 (a relative-T0 criterion is not
    resolvable under deep exponential suppression).
    """

    pa_max: float = 0.35
    margin_add: int = 30
    margin_frac: float = 0.30
    x_tail: float = 9.5
    richardson_depth: float = 40.0
    check_convergence: bool = True
    convergence_rtol: float = 0.005
    convergence_atol: float = 0.05
    min_points: int = 4
    min_span: float = 2.0  # required factor in 1/g^2
    noise_floor: float = 0.0  # smallest usable T0; 0 disables the filter

    def basis_for(self, E: float, omega: float) -> ChannelBasis:
        n_open = max(int(math.ceil(E / omega - 0.5)), 1)
        n_max = max(n_open + self.margin_add, int(math.ceil((1 + self.margin_frac) * n_open)))
        return ChannelBasis(n_max=n_max, omega=omega)

    def lattice_for(self, E: float, g: float, basis: ChannelBasis) -> LatticeSpec:
        p_max = math.sqrt(2.0 * (E - basis.omega / 2.0))
        a = self.pa_max / p_max
        x_half = self.x_tail / g + math.sqrt((2 * basis.n_max + 1) / basis.omega)
        return LatticeSpec(a=a, n_half=int(math.ceil(x_half / a)))


@dataclass
class ScanPoint:
    g: float
    inv_g2: float
    E: float
    T0: float
    ln_T0: float
    unitarity_defect: float
    lattice: LatticeSpec
    basis: ChannelBasis
    excluded: bool = False
    reason: str = ""
    ln_T0_check: float | None = None


@dataclass
class ScanSeries:
    epsilon: float
    points: list[ScanPoint] = field(default_factory=list)

    def usable(self) -> list[ScanPoint]:
        return [p for p in self.points if not p.excluded]


@dataclass
class FitResult:
    epsilon: float
    F0: float
    F0_err: float
    intercept: float
    intercept_err: float
    r_squared: float
    runs_p: float
    inv_g2_min: float
    inv_g2_max: float
    n_points: int
    non_exponential: bool


@dataclass
class ComparisonRow:
    epsilon: float
    F0_semiclassical: float
    F0_semiclassical_err: float
    F0_quantum: float
    F0_quantum_err: float
    abs_diff: float
    rel_diff: float


def scan_g(
    epsilon: float,
    g_values,
    params: ModelParams,
    policy: ScanPolicy | None = None,
    depth_hint: float | None = None,
) -> ScanSeries:
    """Ground-channel transmission at fixed epsilon over couplings g.

    Each point runs the scattering solver at E = epsilon / g^2 with
    lattice and basis scaled per the policy.  Points failing the basis
    convergence check are kept but marked excluded, with the reason.
    ``depth_hint`` (expected F0) only tunes the Richardson decision.
    """
    policy = policy or ScanPolicy()
    g_values = sorted(float(g) for g in g_values)
    if len(g_values) < policy.min_points:
        raise ValueError(f"need at least {policy.min_points} couplings, got {len(g_values)}")
    span = (g_values[0]) ** -2 / (g_values[-1]) ** -2
    if span < policy.min_span:
        raise ValueError(f"1/g^2 range must span a factor >= {policy.min_span}")

    series = ScanSeries(epsilon=epsilon)
    omega = params.omega
    for g in g_values:
        E = epsilon / g**2
        run_params = ModelParams(omega=omega, coupling_g=g, barrier=params.barrier)
        basis = policy.basis_for(E, omega)
        lat = policy.lattice_for(E, g, basis)
        depth = (depth_hint or 1.0) / g**2
        rich = depth <= policy.richardson_depth
        res = solve_scattering(E, 0, lat, basis, run_params, richardson=rich)
        point = ScanPoint(
            g=g,
            inv_g2=g**-2,
            E=E,
            T0=res.T_total,
            ln_T0=res.ln_T_total,
            unitarity_defect=res.unitarity_defect,
            lattice=lat,
            basis=basis,
        )
        if policy.check_convergence:
            basis2 = ChannelBasis(n_max=int(math.ceil(1.25 * basis.n_max)), omega=omega)
            lat2 = policy.lattice_for(E, g, basis2)
            res2 = solve_scattering(E, 0, lat2, basis2, run_params, richardson=rich)
            point.ln_T0_check = res2.ln_T_total
            drift = abs(res2.ln_T_total - res.ln_T_total)
            tol = policy.convergence_rtol * abs(res.ln_T_total) + policy.convergence_atol
            if drift > tol:
                point.excluded = True
                point.reason = f"basis drift {drift:.3g} beyond {tol:.3g}"
        if policy.noise_floor > 0 and point.T0 < policy.noise_floor and not point.excluded:
            point.excluded = True
            point.reason = f"T0 below noise floor {policy.noise_floor:g}"
        series.points.append(point)
    return series


def _runs_test_p(residuals) -> float:
    """Wald-Wolfowitz runs test on residual signs (trend indicator)."""
    signs = np.sign(residuals)
    signs = signs[signs != 0]
    n_pos = int((signs > 0).sum())
    n_neg = int((signs < 0).sum())
    n = n_pos + n_neg
    if n_pos == 0 or n_neg == 0 or n < 3:
        return 1.0
    runs = 1 + int((signs[1:] != signs[:-1]).sum())
    mu = 2.0 * n_pos * n_neg / n + 1.0
    var = 2.0 * n_pos * n_neg * (2.0 * n_pos * n_neg - n) / (n**2 * (n - 1.0))
    if var <= 0:
        return 1.0
    z = (runs - mu) / math.sqrt(var)
    return float(2.0 * stats.norm.sf(abs(z)))


def fit_exponent(series: ScanSeries, r2_flag: float = 0.995) -> FitResult:
    """Ordinary least squares of ln T0 against 1/g^2; F0 = -slope."""
    pts = series.usable()
    if len(pts) < 2:
        raise ValueError("fewer than two usable scan points")
    x = np.array([p.inv_g2 for p in pts])
    y = np.array([p.ln_T0 for p in pts])
    n = len(x)
    xm, ym = x.mean(), y.mean()
    sxx = np.sum((x - xm) ** 2)
    slope = float(np.sum((x - xm) * (y - ym)) / sxx)
    intercept = float(ym - slope * xm)
    resid = y - (slope * x + intercept)
    ss_res = float(np.sum(resid**2))
    ss_tot = float(np.sum((y - ym) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    dof = max(n - 2, 1)
    s2 = ss_res / dof
    slope_err = math.sqrt(s2 / sxx)
    intercept_err = math.sqrt(s2 * (1.0 / n + xm**2 / sxx))
    return FitResult(
        epsilon=series.epsilon,
        F0=-slope,
        F0_err=slope_err,
        intercept=intercept,
        intercept_err=intercept_err,
        r_squared=r2,
        runs_p=_runs_test_p(resid),
        inv_g2_min=float(x.min()),
        inv_g2_max=float(x.max()),
        n_points=n,
        non_exponential=r2 < r2_flag,
    )


def compare_exponents(semiclassical, quantum) -> list[ComparisonRow]:
    """Tabulate both routes to F0 on overlapping epsilons.

    ``semiclassical`` yields (epsilon, F0, err) triples; ``quantum`` is a
    list of FitResult.  Quantum values are linearly interpolated onto
    semiclassical grid points inside the quantum range; points outside
    the overlap are dropped.
    """
    semi = sorted((float(e), float(f), float(d)) for e, f, d in semiclassical)
    fits = sorted(quantum, key=lambda r: r.epsilon)
    if not semi or not fits:
        return []
    qe = np.array([r.epsilon for r in fits])
    qf = np.array([r.F0 for r in fits])
    qerr = np.array([r.F0_err for r in fits])
    rows = []
    for e, f_semi, err_semi in semi:
        if e < qe.min() - 1e-12 or e > qe.max() + 1e-12:
            continue
        f_q = float(np.interp(e, qe, qf))
        err_q = float(np.interp(e, qe, qerr))
        diff = f_semi - f_q
        rel = abs(diff) / abs(f_q) if f_q != 0 else math.inf
        rows.append(
            ComparisonRow(
                epsilon=e,
                F0_semiclassical=f_semi,
                F0_semiclassical_err=err_semi,
                F0_quantum=f_q,
                F0_quantum_err=err_q,
                abs_diff=abs(diff),
                rel_diff=rel,
            )
        )
    return rows
