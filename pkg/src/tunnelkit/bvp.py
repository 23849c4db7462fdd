"""Complex-trajectory boundary value problem on the time contour.

The complexified equations of motion

    X'' = -U'(X + y),      y'' = -omega^2 y - U'(X + y)

are discretized with a Numerov three-point relation along each straight
contour segment (corner nodes matched in value and one-sided first
derivative) and closed with the boundary data of the tunneling problem:
an incoming free form X = X0 + p t', y = u e^{-i w t'} + v e^{i w t'}
at the start of the elevated segment, real X0 and p, the frequency-pair
relation v = conj(u) e^theta, and reality of the outgoing fields on the
real axis.  Time translations along the real axis are fixed by placing
the outgoing turning point at the contour descent: Re X'(t_c) = 0.

The resulting square nonlinear system is solved by a damped Newton
iteration with an analytic sparse Jacobian.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson
from scipy.sparse import coo_matrix
from scipy.sparse.linalg import splu

from .contour import ContourGrid
from .model import ModelParams

__all__ = [
    "BvpSolution",
    "ExponentRecord",
    "NewtonError",
    "free_oscillator_tail",
    "solve_bvp",
    "residual_vector",
    "action_integral",
    "exponent_record",
]

# one-sided five-point first-derivative stencils, O(h^4)
_D_BACK = np.array([3.0, -16.0, 36.0, -48.0, 25.0]) / 12.0   # nodes [c-4 .. c]
_D_FWD = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / 12.0   # nodes [c .. c+4]
_D_CENT = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0       # nodes [j-2 .. j+2]


class NewtonError(RuntimeError):
    """Newton iteration failed to converge (leaving the solution branch)."""


@dataclass
class BvpSolution:
    grid: ContourGrid
    theta: float
    X: np.ndarray
    y: np.ndarray
    X0: complex
    p: complex
    u: complex
    v: complex
    residual_norm: float
    newton_iters: int
    epsilon: float
    epsilon_im: float
    nu: float
    S0: complex
    F: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def T(self) -> float:
        return self.grid.spec.T


@dataclass(frozen=True)
class ExponentRecord:
    """One point of the suppression-exponent landscape."""

    epsilon: float
    nu: float
    T: float
    theta: float
    F: float
    two_im_S0: float
    residual_norm: float
    provenance: str = "semiclassical"
    nodes_b: int = 0
    nodes_c: int = 0
    nodes_d: int = 0


def free_oscillator_tail(t_prime, X0, p, u, v, omega):
    """Asymptotic incoming form on the elevated segment."""
    X = X0 + p * t_prime
    y = u * np.exp(-1j * omega * t_prime) + v * np.exp(1j * omega * t_prime)
    return X, y


# ---------------------------------------------------------------------------
# unknown-vector packing
# ---------------------------------------------------------------------------

def _unpack(z, m):
    zc = z[: 4 * m].reshape(m, 4)
    X = zc[:, 0] + 1j * zc[:, 1]
    y = zc[:, 2] + 1j * zc[:, 3]
    tail = z[4 * m :]
    X0 = tail[0] + 1j * tail[1]
    p = tail[2] + 1j * tail[3]
    u = tail[4] + 1j * tail[5]
    v = tail[6] + 1j * tail[7]
    return X, y, X0, p, u, v


def pack_state(X, y, X0, p, u, v):
    m = X.size
    z = np.empty(4 * m + 8)
    z[: 4 * m : 4] = X.real
    z[1 : 4 * m : 4] = X.imag
    z[2 : 4 * m : 4] = y.real
    z[3 : 4 * m : 4] = y.imag
    z[4 * m :] = [X0.real, X0.imag, p.real, p.imag, u.real, u.imag, v.real, v.imag]
    return z


# complex-unknown indices: X_j -> 2j, y_j -> 2j+1, then X0, p, u, v
def _iX(j):
    return 2 * j


def _iy(j):
    return 2 * j + 1


# ---------------------------------------------------------------------------
# residual
# ---------------------------------------------------------------------------

def _forces(X, y, params):
    """F_X, F_y and the shared curvature U''(x) along the trajectory."""
    x = X + y
    w = -(x**2) / 2.0
    if np.any(w.real > 400.0):
        raise NewtonError("trajectory ran into the barrier's complex singularity")
    if params.barrier.family == "none":
        U1 = np.zeros_like(x)
        U2 = np.zeros_like(x)
    else:
        U = np.exp(w)
        U1 = -x * U
        U2 = (x**2 - 1.0) * U
    fX = -U1
    fy = -params.omega**2 * y - U1
    return fX, fy, U2


def _segments(grid):
    for s in range(3):
        sl = grid.segment_slice(s)
        yield sl, grid.step[s], grid.direction[s]


def residual_vector(z, grid, theta, params):
    """Full real residual; layout matches the Jacobian assembly."""
    m = grid.n_nodes
    X, y, X0, p, u, v = _unpack(z, m)
    omega = params.omega
    fX, fy, _ = _forces(X, y, params)

    res_cplx = []

    tp = grid.t[:2] - 0.5j * grid.spec.T  # t' at the first two nodes (real)
    Xa, ya = free_oscillator_tail(tp.real, X0, p, u, v, omega)

    for f, fv in ((0, fX), (1, fy)):
        Z = X if f == 0 else y
        rows = [Z[:2] - (Xa if f == 0 else ya)]
        for sl, h, d in _segments(grid):
            zz = Z[sl]
            ff = d * d * fv[sl]
            interior = (
                (zz[2:] - 2.0 * zz[1:-1] + zz[:-2]) / h**2
                - (ff[2:] + 10.0 * ff[1:-1] + ff[:-2]) / 12.0
            )
            rows.append(interior)
        # corner derivative matching
        for corner, (s_left, s_right) in ((grid.corner_bc, (0, 1)), (grid.corner_cd, (1, 2))):
            hl, dl = grid.step[s_left], grid.direction[s_left]
            hr, dr = grid.step[s_right], grid.direction[s_right]
            dleft = np.dot(_D_BACK, Z[corner - 4 : corner + 1]) / (hl * dl)
            dright = np.dot(_D_FWD, Z[corner : corner + 5]) / (hr * dr)
            rows.append(np.array([dleft - dright]))
        res_cplx.append(np.concatenate(rows))

    rc = np.concatenate(res_cplx)

    # scalar closure rows
    e_half = np.exp(0.5 * theta)
    pair = v / e_half - np.conj(u) * e_half
    hd = grid.step[2]
    dy_end = np.dot(_D_BACK, y[m - 5 :]) / hd
    dX_pin = np.dot(_D_FWD, X[grid.corner_cd : grid.corner_cd + 5]) / hd
    scalars = np.array(
        [
            p.imag,
            X0.imag,
            pair.real,
            pair.imag,
            X[m - 1].imag,
            y[m - 1].imag,
            dy_end.imag,
            dX_pin.real,
        ]
    )
    out = np.empty(4 * m + 8)
    out[: 4 * m : 2] = rc.real
    out[1 : 4 * m : 2] = rc.imag
    out[4 * m :] = scalars
    return out


# ---------------------------------------------------------------------------
# Jacobian
# ---------------------------------------------------------------------------

class _BlockCollector:
    """COO triplets for a real system built from complex equations."""

    def __init__(self):
        self.rows = []
        self.cols = []
        self.vals = []

    def add(self, eq, un, coeff):
        """Analytic complex coefficient: d(eq)/d(un) = coeff."""
        eq = np.atleast_1d(np.asarray(eq))
        un = np.atleast_1d(np.asarray(un))
        coeff = np.broadcast_to(np.atleast_1d(coeff), eq.shape)
        r, i = coeff.real, coeff.imag
        self.rows += [2 * eq, 2 * eq, 2 * eq + 1, 2 * eq + 1]
        self.cols += [2 * un, 2 * un + 1, 2 * un, 2 * un + 1]
        self.vals += [r, -i, i, r]

    def add_conj(self, eq, un, coeff):
        """Conjugate-linear term coeff * conj(un)."""
        eq = np.atleast_1d(np.asarray(eq))
        un = np.atleast_1d(np.asarray(un))
        coeff = np.broadcast_to(np.atleast_1d(coeff), eq.shape)
        r, i = coeff.real, coeff.imag
        self.rows += [2 * eq, 2 * eq, 2 * eq + 1, 2 * eq + 1]
        self.cols += [2 * un, 2 * un + 1, 2 * un, 2 * un + 1]
        self.vals += [r, i, i, -r]

    def add_real_row(self, row, col, val):
        self.rows.append(np.atleast_1d(row))
        self.cols.append(np.atleast_1d(col))
        self.vals.append(np.atleast_1d(np.asarray(val, dtype=float)))

    def matrix(self, n):
        rows = np.concatenate([np.ravel(a) for a in self.rows])
        cols = np.concatenate([np.ravel(a) for a in self.cols])
        vals = np.concatenate([np.ravel(a) for a in self.vals])
        return coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsc()


def _jacobian(z, grid, theta, params):
    m = grid.n_nodes
    X, y, X0, p, u, v = _unpack(z, m)
    omega = params.omega
    _, _, U2 = _forces(X, y, params)

    # complex-equation index bookkeeping mirrors residual_vector
    col = _BlockCollector()
    iX0, ip, iu, iv = 2 * m, 2 * m + 1, 2 * m + 2, 2 * m + 3

    eq = 0
    tp = (grid.t[:2] - 0.5j * grid.spec.T).real
    for f in (0, 1):
        field_idx = _iX if f == 0 else _iy
        # asymptotic matching rows at nodes 0, 1
        for jn in (0, 1):
            col.add(eq, field_idx(jn), 1.0 + 0j)
            if f == 0:
                col.add(eq, iX0, -1.0 + 0j)
                col.add(eq, ip, -tp[jn] + 0j)
            else:
                col.add(eq, iu, -np.exp(-1j * omega * tp[jn]))
                col.add(eq, iv, -np.exp(1j * omega * tp[jn]))
            eq += 1
        # interior Numerov rows per segment
        other_idx = _iy if f == 0 else _iX
        for sl, h, d in _segments(grid):
            j0 = sl.start
            n_seg = sl.stop - sl.start
            jj = j0 + 1 + np.arange(n_seg - 2)  # interior nodes
            eqs = eq + np.arange(n_seg - 2)
            d2 = d * d
            if f == 0:
                dF_own = -U2            # dF_X/dX
                dF_other = -U2          # dF_X/dy
            else:
                dF_own = -U2 - omega**2  # dF_y/dy
                dF_other = -U2           # dF_y/dX
            for off, w_lap, w_f in ((-1, 1.0, 1.0), (0, -2.0, 10.0), (1, 1.0, 1.0)):
                jn = jj + off
                col.add(eqs, field_idx(jn), w_lap / h**2 - w_f / 12.0 * d2 * dF_own[jn])
                col.add(eqs, other_idx(jn), -w_f / 12.0 * d2 * dF_other[jn])
            eq += n_seg - 2
        # corner derivative matching
        for corner, (s_left, s_right) in ((grid.corner_bc, (0, 1)), (grid.corner_cd, (1, 2))):
            hl, dl = grid.step[s_left], grid.direction[s_left]
            hr, dr = grid.step[s_right], grid.direction[s_right]
            jl = corner - 4 + np.arange(5)
            jr = corner + np.arange(5)
            col.add(np.full(5, eq), field_idx(jl), _D_BACK / (hl * dl))
            col.add(np.full(5, eq), field_idx(jr), -_D_FWD / (hr * dr))
            eq += 1

    n_cplx = eq
    base = 2 * n_cplx

    # scalar rows
    e_half = np.exp(0.5 * theta)
    col.add_real_row(base + 0, 2 * ip + 1, 1.0)      # Im p
    col.add_real_row(base + 1, 2 * iX0 + 1, 1.0)     # Im X0
    # pair condition v/e - conj(u) e: complex equation split by hand
    col.add_real_row(base + 2, 2 * iv, 1.0 / e_half)
    col.add_real_row(base + 2, 2 * iu, -e_half)
    col.add_real_row(base + 3, 2 * iv + 1, 1.0 / e_half)
    col.add_real_row(base + 3, 2 * iu + 1, e_half)
    # reality at the outgoing end
    col.add_real_row(base + 4, 2 * _iX(m - 1) + 1, 1.0)
    col.add_real_row(base + 5, 2 * _iy(m - 1) + 1, 1.0)
    hd = grid.step[2]
    jt = m - 5 + np.arange(5)
    col.add_real_row(np.full(5, base + 6), 2 * _iy(jt) + 1, _D_BACK / hd)
    jpin = grid.corner_cd + np.arange(5)
    col.add_real_row(np.full(5, base + 7), 2 * _iX(jpin), _D_FWD / hd)

    return col.matrix(4 * m + 8)


# ---------------------------------------------------------------------------
# Newton driver
# ---------------------------------------------------------------------------

def solve_bvp(
    grid: ContourGrid,
    theta: float,
    params: ModelParams,
    guess,
    tol: float = 1e-10,
    max_iter: int = 40,
) -> BvpSolution:
    """Damped Newton iteration from ``guess`` (a BvpSolution or a packed
    state vector).  Raises NewtonError on divergence or stagnation."""
    if isinstance(guess, BvpSolution):
        z = pack_state(guess.X, guess.y, guess.X0, guess.p, guess.u, guess.v)
    else:
        z = np.asarray(guess, dtype=float).copy()
    m = grid.n_nodes
    if z.size != 4 * m + 8:
        raise ValueError("guess does not match the contour grid")

    r = residual_vector(z, grid, theta, params)
    norm = np.max(np.abs(r))
    for it in range(1, max_iter + 1):
        if norm < tol:
            return _finalize(z, grid, theta, params, norm, it - 1)
        J = _jacobian(z, grid, theta, params)
        try:
            dz = splu(J).solve(-r)
        except RuntimeError as exc:  # singular factorization
            raise NewtonError(f"Jacobian factorization failed: {exc}") from exc
        lam = 1.0
        for _ in range(12):
            z_try = z + lam * dz
            try:
                r_try = residual_vector(z_try, grid, theta, params)
            except NewtonError:
                lam *= 0.5
                continue
            norm_try = np.max(np.abs(r_try))
            if norm_try < (1.0 - 0.25 * lam) * norm or norm_try < tol:
                break
            lam *= 0.5
        else:
            raise NewtonError(f"line search stalled at residual {norm:.3e}")
        z, r, norm = z_try, r_try, norm_try
    raise NewtonError(f"no convergence in {max_iter} iterations; residual {norm:.3e}")


def _tail_derivative(Z, idx, h, direction, stencil):
    return np.dot(stencil, Z[idx]) / (h * direction)


def measure_charges(X, y, grid, params):
    """epsilon from the conserved energy at the outgoing end (real there)."""
    m = grid.n_nodes
    hd = grid.step[2]
    j = m - 3
    idx = j - 2 + np.arange(5)
    dX = np.dot(_D_CENT, X[idx]) / hd
    dy = np.dot(_D_CENT, y[idx]) / hd
    E = 0.5 * dX**2 + 0.5 * dy**2 + 0.5 * params.omega**2 * y[j] ** 2
    E = E + params.barrier.value(X[j] + y[j])
    return E


def action_integral(X, y, grid, params) -> complex:
    """On-shell contour action.

    After substituting the equations of motion, the action density
    collapses to U(x) - x U'(x)/2 with x = X + y, which vanishes in the
    asymptotic regions; each straight segment is integrated by Simpson's
    rule with its complex time step.
    """
    x = X + y
    dens = params.barrier.value(x) - 0.5 * x * params.barrier.d1(x)
    S = 0.0 + 0.0j
    for sl, h, d in _segments(grid):
        if sl.stop - sl.start < 2:
            continue
        S += d * simpson(dens[sl], dx=h)
    return -S


def _finalize(z, grid, theta, params, norm, iters):
    m = grid.n_nodes
    X, y, X0, p, u, v = _unpack(z, m)
    omega = params.omega
    E = measure_charges(X, y, grid, params)
    nu = 2.0 * omega * (u * v)
    S0 = action_integral(X, y, grid, params)
    T = grid.spec.T
    F = 2.0 * S0.imag - E.real * T - nu.real * theta
    sl_d = grid.segment_slice(2)
    diag = {
        "im_X_de": float(np.max(np.abs(X[sl_d].imag))),
        "im_y_de": float(np.max(np.abs(y[sl_d].imag))),
        "im_nu": float(abs(nu.imag)),
    }
    return BvpSolution(
        grid=grid,
        theta=theta,
        X=X,
        y=y,
        X0=complex(X0),
        p=complex(p),
        u=complex(u),
        v=complex(v),
        residual_norm=float(norm),
        newton_iters=iters,
        epsilon=float(E.real),
        epsilon_im=float(E.imag),
        nu=float(nu.real),
        S0=complex(S0),
        F=float(F),
        diagnostics=diag,
    )


def exponent_record(sol: BvpSolution) -> ExponentRecord:
    spec = sol.grid.spec
    return ExponentRecord(
        epsilon=sol.epsilon,
        nu=sol.nu,
        T=spec.T,
        theta=sol.theta,
        F=sol.F,
        two_im_S0=2.0 * sol.S0.imag,
        residual_norm=sol.residual_norm,
        provenance="semiclassical",
        nodes_b=spec.n_b,
        nodes_c=spec.n_c,
        nodes_d=spec.n_d,
    )


def energy_along_contour(sol: BvpSolution, params: ModelParams) -> np.ndarray:
    """Conserved complex energy at every node (five-point derivatives
    within each segment; used as a convergence diagnostic)."""
    grid = sol.grid
    out = np.empty(grid.n_nodes, dtype=complex)
    for sl, h, d in _segments(grid):
        X = sol.X[sl]
        y = sol.y[sl]
        n = X.size
        dX = np.empty(n, dtype=complex)
        dy = np.empty(n, dtype=complex)
        for arr, darr in ((X, dX), (y, dy)):
            core = np.convolve(arr, _D_CENT[::-1], mode="valid") / h
            darr[2:-2] = core
            darr[0] = np.dot(_D_FWD, arr[:5]) / h
            darr[1] = np.dot(_D_FWD, arr[1:6]) / h
            darr[-1] = np.dot(_D_BACK, arr[-5:]) / h
            darr[-2] = np.dot(_D_BACK, arr[-6:-1]) / h
        dX /= d
        dy /= d
        out[sl] = (
            0.5 * dX**2
            + 0.5 * dy**2
            + 0.5 * params.omega**2 * y**2
            + params.barrier.value(X + y)
        )
    return out


def readback_uv(sol: BvpSolution, params: ModelParams, n_window: int = 200):
    """Project u, v from the elevated-segment tail by the frequency split
    u = e^{i w t'} (y + i y'/w) / 2,  v = e^{-i w t'} (y - i y'/w) / 2."""
    grid = sol.grid
    omega = params.omega
    h = grid.step[0]
    n0 = 2
    idx = n0 + np.arange(n_window)
    tp = (grid.t[idx] - 0.5j * grid.spec.T).real
    y = sol.y
    dy = np.empty(n_window, dtype=complex)
    for k, j in enumerate(idx):
        dy[k] = np.dot(_D_CENT, y[j - 2 : j + 3]) / h
    u_est = np.exp(1j * omega * tp) * (y[idx] + 1j * dy / omega) / 2.0
    v_est = np.exp(-1j * omega * tp) * (y[idx] - 1j * dy / omega) / 2.0
    return u_est.mean(), v_est.mean()
