import numpy as np
import pytest

from tunnelkit.channels import (
    ChannelBasis,
    LatticeSpec,
    lattice_wavenumbers,
    numerov_site_maps,
    oscillator_gaussian_matrix,
    oscillator_gaussian_matrix_quadrature,
    potential_matrix,
    solve_scattering,
    solve_scattering_dense,
)
from tunnelkit.channels import _free_f_factors, _site_f_factors, _site_w_matrices, _solve_single
from tunnelkit.model import BarrierSpec, ModelParams


OMEGA = 0.5


def domain_lattice(g, n_max, a, x_tail=9.0):
    x_half = x_tail / g + np.sqrt((2 * n_max + 1) / OMEGA)
    return LatticeSpec(a=a, n_half=int(np.ceil(x_half / a)))


# ----------------------------------------------------------------- potential

def test_gaussian_matrix_symmetric():
    A = oscillator_gaussian_matrix(0.7, 20, OMEGA)
    assert np.max(np.abs(A - A.T)) < 1e-14


@pytest.mark.parametrize("x", [0.0, 1.0, 3.0])
def test_gaussian_matrix_agrees_with_quadrature(x):
    A = oscillator_gaussian_matrix(x, 20, OMEGA)
    Q = oscillator_gaussian_matrix_quadrature(x, 20, OMEGA, n_nodes=200)
    assert np.max(np.abs(A - Q)) < 1e-10


def test_gaussian_matrix_decays_beyond_cutoff():
    A = oscillator_gaussian_matrix(40.0, 20, OMEGA)
    assert np.max(np.abs(A)) < 1e-12


def test_gaussian_matrix_width_scaling():
    # width g enters only through g*(x+y); V is the unit-height overlap / g^2
    params = ModelParams(omega=OMEGA, coupling_g=0.3)
    basis = ChannelBasis(n_max=5, omega=OMEGA)
    V = potential_matrix(0.0, basis, params)
    lim = 1.0 / params.coupling_g**2
    assert V[0, 0] < lim  # smeared below the bare barrier top
    assert V[0, 0] > 0.9 * lim  # but close at small g


def test_gaussian_matrix_rejects_bad_omega():
    with pytest.raises(ValueError):
        oscillator_gaussian_matrix(0.0, 4, omega=-1.0)


# ------------------------------------------------------------------ stencil

def test_free_stencil_lattice_dispersion():
    # lattice plane wave with the dispersion wavenumber solves the free
    # three-point relation to round-off
    E, a = 2.2, 0.1
    basis = ChannelBasis(n_max=0, omega=OMEGA)
    params = ModelParams(omega=OMEGA, coupling_g=1.0, barrier=BarrierSpec(family="none"))
    w = basis.thresholds() - E
    _, q, _ = lattice_wavenumbers(w, a)
    L, R = numerov_site_maps(0.0, basis, params, E, a)
    k = np.arange(3)
    psi = np.exp(1j * q[0] * a * k)
    resid = psi[1] - L[0, 0] * psi[0] - R[0, 0] * psi[2]
    assert abs(resid) < 1e-9


def test_free_stencil_continuum_dispersion_error():
    # substituting the continuum plane wave leaves the analytic
    # truncation residual (p a)^6 / 240
    E, a = 2.2, 0.05
    p = np.sqrt(2 * (E - OMEGA / 2))
    basis = ChannelBasis(n_max=0, omega=OMEGA)
    params = ModelParams(omega=OMEGA, coupling_g=1.0, barrier=BarrierSpec(family="none"))
    F = _site_f_factors(_site_w_matrices(np.zeros(1), basis, params, E), a)[0, 0, 0]
    B = 12 - 10 * F
    resid = abs(2 * np.cos(p * a) * F - B)
    expect = (p * a) ** 6 / 240.0
    assert resid == pytest.approx(expect, rel=1e-3)


def test_single_channel_reduces_to_textbook_numerov():
    params = ModelParams(omega=OMEGA, coupling_g=0.5)
    basis = ChannelBasis(n_max=0, omega=OMEGA)
    E, a, X = 2.0, 0.1, 0.8
    L, R = numerov_site_maps(X, basis, params, E, a)
    assert L.shape == (1, 1)

    # independent scalar implementation; the one retained channel sees the
    # zero-point-smeared barrier <0|U|0>, known in closed form
    def w_of(x):
        g = params.coupling_g
        alpha = OMEGA + 0.5 * g**2
        V = np.sqrt(OMEGA / alpha) * np.exp(
            -OMEGA * g**2 * x**2 / (2 * alpha)
        ) / g**2
        return 0.5 * OMEGA + V - E

    f = [1 - a**2 / 6 * w_of(x) for x in (X - a, X, X + a)]
    b = 12 - 10 * f[1]
    assert L[0, 0] == pytest.approx(f[0] / b, rel=1e-14)
    assert R[0, 0] == pytest.approx(f[2] / b, rel=1e-14)


def test_site_maps_mirror_symmetry():
    # V_{nn'}(-X) = P V_{nn'}(X) P with P = diag((-1)^n), so
    # L at site -k equals P R_k P evaluated at site k
    params = ModelParams(omega=OMEGA, coupling_g=0.5)
    basis = ChannelBasis(n_max=6, omega=OMEGA)
    E, a, X = 2.3, 0.1, 1.3
    L1, R1 = numerov_site_maps(X, basis, params, E, a)
    L2, R2 = numerov_site_maps(-X, basis, params, E, a)
    P = np.diag((-1.0) ** np.arange(basis.size))
    assert np.max(np.abs(L2 - P @ R1 @ P)) < 1e-12
    assert np.max(np.abs(R2 - P @ L1 @ P)) < 1e-12


# -------------------------------------------------------------- elimination

def test_toy_dense_oracle_two_channels():
    params = ModelParams(omega=OMEGA, coupling_g=0.8)
    basis = ChannelBasis(n_max=1, omega=OMEGA)
    lat = LatticeSpec(a=0.3, n_half=2)  # five sites
    E = 1.4
    res = _solve_single(E, 0, lat, basis, params)
    refl_d, trans_d = solve_scattering_dense(E, 0, lat, basis, params)
    w = basis.thresholds() - E
    om, q, _ = lattice_wavenumbers(w, lat.a)
    flux = np.sin(q * lat.a) * _free_f_factors(w, lat.a) ** 2
    T_dense = float((flux[om] * np.abs(trans_d[om]) ** 2 / flux[0]).sum())
    R_dense = float((flux[om] * np.abs(refl_d[om]) ** 2 / flux[0]).sum())
    assert res.T_total == pytest.approx(T_dense, abs=1e-12)
    assert res.R_total == pytest.approx(R_dense, abs=1e-12)


def test_dense_oracle_production_block():
    # the spec-scale equivalence check: (n_half, n_max) = (64, 8)
    params = ModelParams(omega=OMEGA, coupling_g=0.6)
    basis = ChannelBasis(n_max=8, omega=OMEGA)
    lat = LatticeSpec(a=0.15, n_half=64)
    E = 2.3
    res = _solve_single(E, 0, lat, basis, params)
    refl_d, trans_d = solve_scattering_dense(E, 0, lat, basis, params)
    w = basis.thresholds() - E
    om, q, _ = lattice_wavenumbers(w, lat.a)
    flux = np.sin(q * lat.a) * _free_f_factors(w, lat.a) ** 2
    T_dense = flux[om] * np.abs(trans_d[om]) ** 2 / flux[0]
    R_dense = flux[om] * np.abs(refl_d[om]) ** 2 / flux[0]
    assert np.max(np.abs(res.T - T_dense)) < 1e-10
    assert np.max(np.abs(res.R - R_dense)) < 1e-10


def test_free_propagation_is_exact():
    params = ModelParams(omega=OMEGA, coupling_g=0.5, barrier=BarrierSpec(family="none"))
    lat = LatticeSpec(a=0.1, n_half=100)
    basis = ChannelBasis(n_max=6, omega=OMEGA)
    res = _solve_single(2.3, 0, lat, basis, params)
    assert res.T_total == pytest.approx(1.0, abs=1e-12)
    assert res.R_total == pytest.approx(0.0, abs=1e-12)
    assert res.T[0] == pytest.approx(1.0, abs=1e-12)


def test_unitarity_with_barrier():
    params = ModelParams(omega=OMEGA, coupling_g=0.6)
    basis = ChannelBasis(n_max=12, omega=OMEGA)
    lat = domain_lattice(0.6, 12, a=0.12)
    res = solve_scattering(2.3, 0, lat, basis, params)
    assert res.unitarity_defect < 1e-10


def test_domain_enlargement_leaves_probabilities():
    # barrier is local: extending the free region must not change T_n
    params = ModelParams(omega=OMEGA, coupling_g=0.7)
    basis = ChannelBasis(n_max=10, omega=OMEGA)
    lat1 = domain_lattice(0.7, 10, a=0.1)
    lat2 = LatticeSpec(a=lat1.a, n_half=2 * lat1.n_half)
    r1 = _solve_single(2.3, 0, lat1, basis, params)
    r2 = _solve_single(2.3, 0, lat2, basis, params)
    assert np.max(np.abs(r1.T - r2.T)) < 1e-10
    assert np.max(np.abs(r1.R - r2.R)) < 1e-10


def test_reciprocity_total_transmission():
    params = ModelParams(omega=OMEGA, coupling_g=0.6)
    basis = ChannelBasis(n_max=12, omega=OMEGA)
    lat = domain_lattice(0.6, 12, a=0.12)
    left = solve_scattering(2.3, 0, lat, basis, params, incoming_side="left")
    right = solve_scattering(2.3, 0, lat, basis, params, incoming_side="right")
    assert left.T_total == pytest.approx(right.T_total, abs=1e-8)


def test_richardson_combination_conserves_flux():
    params = ModelParams(omega=OMEGA, coupling_g=0.6)
    basis = ChannelBasis(n_max=10, omega=OMEGA)
    lat = domain_lattice(0.6, 10, a=0.16)
    res = solve_scattering(2.1, 0, lat, basis, params, richardson=True)
    assert res.unitarity_defect < 1e-10
    assert "richardson_shift" in res.flags


def test_closed_incoming_channel_rejected():
    params = ModelParams(omega=OMEGA, coupling_g=0.6)
    basis = ChannelBasis(n_max=4, omega=OMEGA)
    lat = LatticeSpec(a=0.1, n_half=50)
    with pytest.raises(ValueError, match="closed"):
        solve_scattering(1.0, 3, lat, basis, params)


def test_coarse_lattice_rejected():
    # open-channel momentum too large for the spacing
    w = np.array([-200.0])
    with pytest.raises(ValueError, match="coarse"):
        lattice_wavenumbers(w, a=0.5)


def test_deep_tunneling_amplitudes_underflow_safe():
    # ln T stays finite and consistent when T underflows linear floats
    params = ModelParams(omega=OMEGA, coupling_g=0.2)
    eps = 0.35
    E = eps / params.coupling_g**2
    n_open = int(np.ceil(E / OMEGA - 0.5))
    basis = ChannelBasis(n_max=n_open + 30, omega=OMEGA)
    p = np.sqrt(2 * (E - OMEGA / 2))
    lat = domain_lattice(0.2, basis.n_max, a=0.35 / p)
    res = _solve_single(E, 0, lat, basis, params)
    assert np.isfinite(res.ln_T_total)
    assert res.ln_T_total < -30
    assert res.unitarity_defect < 1e-10
    # linear T agrees with exp(ln T) when representable
    assert res.T_total == pytest.approx(np.exp(res.ln_T_total), rel=1e-10)
