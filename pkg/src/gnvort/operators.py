"""Spatial operators of the model hierarchy on uniform periodic grids.

Everything is built from one primitive: the 2nd-order centered periodic
first difference.  Nested derivatives are composed exactly as the formulas
are parenthesized (inner product first on the grid, then the outer
derivative), which keeps the discrete flux identities at a single
consistent truncation order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sparse
import scipy.sparse.linalg as spla

from .core import Grid, ScaleParams
from .errors import GridMismatch, NonConvergence

# ---------------------------------------------------------------------------
# difference primitives (broadcast over any leading axes)


def dx(grid: Grid, f: np.ndarray) -> np.ndarray:
    ax = -1 if grid.dim == 1 else -2
    return (np.roll(f, -1, axis=ax) - np.roll(f, 1, axis=ax)) / (2.0 * grid.dx)


def dy(grid: Grid, f: np.ndarray) -> np.ndarray:
    if grid.dim != 2:
        raise GridMismatch("dy on a 1D grid")
    return (np.roll(f, -1, axis=-1) - np.roll(f, 1, axis=-1)) / (2.0 * grid.dy)


def grad(grid: Grid, f: np.ndarray) -> np.ndarray:
    if grid.dim == 1:
        return dx(grid, f)
    return np.stack([dx(grid, f), dy(grid, f)])


def div(grid: Grid, V: np.ndarray) -> np.ndarray:
    if grid.dim == 1:
        return dx(grid, V)
    return dx(grid, V[..., 0, :, :]) + dy(grid, V[..., 1, :, :])


def grad_perp(grid: Grid, f: np.ndarray) -> np.ndarray:
    """(-d/dy, d/dx) of a scalar; 2D only."""
    return np.stack([-dy(grid, f), dx(grid, f)])


def div_perp(grid: Grid, V: np.ndarray) -> np.ndarray:
    """perp-divergence -d(Vx)/dy + d(Vy)/dx (the vertical vorticity); 2D only."""
    return -dy(grid, V[..., 0, :, :]) + dx(grid, V[..., 1, :, :])


def advect(grid: Grid, V: np.ndarray, f: np.ndarray) -> np.ndarray:
    """(V . grad) f for scalar f (1D: V df/dx)."""
    if grid.dim == 1:
        return V * dx(grid, f)
    return V[0] * dx(grid, f) + V[1] * dy(grid, f)


def advect_vector(grid: Grid, V: np.ndarray, W: np.ndarray) -> np.ndarray:
    """(V . grad) W componentwise."""
    if grid.dim == 1:
        return V * dx(grid, W)
    return np.stack([advect(grid, V, W[0]), advect(grid, V, W[1])])


# ---------------------------------------------------------------------------
# model operators


def apply_T(grid: Grid, h, b, V, scales: ScaleParams) -> np.ndarray:
    """Dispersive operator; (1 + mu*T) is the left operator of the momentum equations."""
    grid.check_scalar(h, "h")
    grid.check_scalar(b, "b")
    grid.check_vector(V, "V")
    beta = scales.beta
    if grid.dim == 1:
        bx = dx(grid, b)
        out = -1.0 / (3.0 * h) * dx(grid, h**3 * dx(grid, V))
        if beta != 0.0:
            out = out + beta / (2.0 * h) * (dx(grid, h**2 * bx * V) - h**2 * bx * dx(grid, V))
            out = out + beta**2 * bx**2 * V
        return out
    gb = grad(grid, b)
    dV = div(grid, V)
    out = -1.0 / (3.0 * h) * grad(grid, h**3 * dV)
    if beta != 0.0:
        gbV = gb[0] * V[0] + gb[1] * V[1]
        out = out + beta / (2.0 * h) * (grad(grid, h**2 * gbV) - h**2 * gb * dV)
        out = out + beta**2 * gb * gbV
    return out


def apply_Q1(grid: Grid, h, b, V, scales: ScaleParams) -> np.ndarray:
    """Quadratic non-hydrostatic source of the momentum equations."""
    grid.check_scalar(h, "h")
    grid.check_scalar(b, "b")
    grid.check_vector(V, "V")
    beta = scales.beta
    if grid.dim == 1:
        vx = dx(grid, V)
        out = 2.0 / (3.0 * h) * dx(grid, h**3 * vx**2)
        if beta != 0.0:
            bx = dx(grid, b)
            bxx = dx(grid, bx)
            out = out + beta * h * vx**2 * bx
            out = out + beta / (2.0 * h) * dx(grid, h**2 * V**2 * bxx)
            out = out + beta**2 * V**2 * bx * bxx
        return out
    # w1 = d1V . d2(Vperp) + (div V)^2 ; Vperp = (-V2, V1)
    d1V = np.stack([dx(grid, V[0]), dx(grid, V[1])])
    d2Vp = np.stack([-dy(grid, V[1]), dy(grid, V[0])])
    w1 = d1V[0] * d2Vp[0] + d1V[1] * d2Vp[1] + div(grid, V) ** 2
    out = -2.0 * _R1(grid, h, b, w1, beta)
    if beta != 0.0:
        gb = grad(grid, b)
        # V . (V.grad) grad b
        w2 = V[0] * advect(grid, V, gb[0]) + V[1] * advect(grid, V, gb[1])
        out = out + _R2(grid, h, b, beta * w2, beta)
    return out


def _R1(grid, h, b, w, beta):
    out = -1.0 / (3.0 * h) * grad(grid, h**3 * w)
    if beta != 0.0:
        out = out - beta * 0.5 * h * w * grad(grid, b)
    return out


def _R2(grid, h, b, w, beta):
    out = 1.0 / (2.0 * h) * grad(grid, h**2 * w)
    if beta != 0.0:
        out = out + beta * w * grad(grid, b)
    return out


def apply_C(grid: Grid, h, vsharp, vbar) -> np.ndarray:
    """Shear/dispersion interaction operator (order mu^(3/2) momentum coupling)."""
    grid.check_scalar(h, "h")
    grid.check_vector(vsharp, "vsharp")
    grid.check_vector(vbar, "vbar")
    if grid.dim == 1:
        g = h**3 * vsharp
        return -1.0 / (6.0 * h) * dx(grid, 2.0 * g * dx(grid, dx(grid, vbar))
                                     + dx(grid, g) * dx(grid, vbar))
    W = grad(grid, div(grid, vbar))           # grad div
    s = h**3 * vsharp
    # div of the symmetric tensor s x W + W x s
    A11 = 2.0 * s[0] * W[0]
    A12 = s[0] * W[1] + s[1] * W[0]
    A22 = 2.0 * s[1] * W[1]
    divA = np.stack([dx(grid, A11) + dy(grid, A12), dx(grid, A12) + dy(grid, A22)])
    scal = (s[0] * W[0] + s[1] * W[1]
            + (1.0 / 3.0) * div(grid, vbar) * div(grid, s)
            + (1.0 / 3.0) * _tr_gradgrad(grid, vbar, s))
    return -divA / (24.0 * h) - grad(grid, scal) / (4.0 * h)


def _tr_gradgrad(grid, V, S):
    """Tr(grad V grad S) = d_i V_j d_j S_i for two vector fields."""
    return (dx(grid, V[0]) * dx(grid, S[0]) + dx(grid, V[1]) * dy(grid, S[0])
            + dy(grid, V[0]) * dx(grid, S[1]) + dy(grid, V[1]) * dy(grid, S[1]))


def apply_Cb(grid: Grid, h, b, vsharp, vbar) -> np.ndarray:
    """Bottom counterpart of apply_C (1D only).

    Uses the raw profile b; the single power of beta lives in the
    eps*beta*mu^(3/2) prefactor of the constant-vorticity momentum equation.
    """
    if grid.dim != 1:
        raise GridMismatch("apply_Cb is 1D only")
    grid.check_scalar(h, "h")
    grid.check_scalar(b, "b")
    bxx = dx(grid, dx(grid, b))
    return 1.0 / (3.0 * h) * (dx(grid, h**2 * vsharp * bxx * vbar)
                              + h**2 * vsharp * bxx * dx(grid, vbar))


def apply_D(grid: Grid, h, vsharp, vbar) -> np.ndarray:
    """Vertical/horizontal vorticity interaction source of the E equation (2D).

    Returns symmetric storage (D11, D12, D22).
    """
    if grid.dim != 2:
        raise GridMismatch("apply_D is 2D only")
    grid.check_scalar(h, "h")
    grid.check_vector(vsharp, "vsharp")
    grid.check_vector(vbar, "vbar")
    curl = div_perp(grid, vbar)
    Wp = grad_perp(grid, div(grid, vbar))
    pref = h**3 / 24.0 * curl
    return np.stack([
        pref * 2.0 * Wp[0] * vsharp[0],
        pref * (Wp[0] * vsharp[1] + Wp[1] * vsharp[0]),
        pref * 2.0 * Wp[1] * vsharp[1],
    ])


def trace_D(D_storage: np.ndarray) -> np.ndarray:
    return D_storage[0] + D_storage[2]


def level_dispersive_correction(grid: Grid, h, b, vbar, theta: float,
                                scales: ScaleParams) -> np.ndarray:
    """T*_theta applied to vbar: the dispersive correction on the level line theta."""
    if not 0.0 <= theta <= 1.0:
        raise ValueError(f"theta must lie in [0, 1], got {theta}")
    return _level_correction(grid, h, b, vbar, scales,
                             -0.5 * (theta**2 - 1.0 / 3.0), scales.beta * (theta - 0.5))


def level_correction_theta_integral(grid: Grid, h, b, vbar, theta: float,
                                    scales: ScaleParams) -> np.ndarray:
    """Closed-form integral of T*_theta' vbar over theta' in [0, theta]."""
    if not 0.0 <= theta <= 1.0:
        raise ValueError(f"theta must lie in [0, 1], got {theta}")
    return _level_correction(grid, h, b, vbar, scales,
                             -(theta**3 - theta) / 6.0,
                             scales.beta * (theta**2 - theta) / 2.0)


def _level_correction(grid, h, b, vbar, scales, c_disp, c_bott):
    grid.check_scalar(h, "h")
    grid.check_vector(vbar, "vbar")
    out = c_disp * h**2 * grad(grid, div(grid, vbar))
    if c_bott != 0.0:
        gb = grad(grid, b)
        if grid.dim == 1:
            bterm = gb * dx(grid, vbar) + dx(grid, gb * vbar)
        else:
            gbV = gb[0] * vbar[0] + gb[1] * vbar[1]
            bterm = np.stack([advect(grid, gb, vbar[0]), advect(grid, gb, vbar[1])])
            bterm = bterm + grad(grid, gbV)
        out = out + c_bott * h * bterm
    return out


# ---------------------------------------------------------------------------
# energy fluxes tied to apply_C / apply_Cb (local conservation identities)


def flux_C(grid: Grid, h, vsharp, vbar) -> np.ndarray:
    """Flux with h*C(vsharp,vbar).vbar = d/dx flux (1D) or
    = div flux + Tr(D)/2 (2D)."""
    grid.check_scalar(h, "h")
    if grid.dim == 1:
        g = h**3 * vsharp
        return (h**3 / 6.0 * (dx(grid, vbar) ** 2 - vbar * dx(grid, dx(grid, vbar))) * vsharp
                - dx(grid, g * dx(grid, vbar)) * vbar / 6.0)
    s = h**3 * vsharp
    a = div(grid, vbar)
    W = grad(grid, a)
    d = div(grid, s)
    T = _tr_gradgrad(grid, vbar, s)
    sV = s[0] * vbar[0] + s[1] * vbar[1]
    VW = vbar[0] * W[0] + vbar[1] * W[1]
    sW = s[0] * W[0] + s[1] * W[1]
    s_adv_V = np.stack([advect(grid, s, vbar[0]), advect(grid, s, vbar[1])])
    return (-VW * s / 24.0 - sV * W / 24.0 - sW * vbar / 4.0
            - a * d * vbar / 12.0 - T * vbar / 12.0
            + a**2 * s / 12.0 + a * s_adv_V / 12.0)


def flux_Cb(grid: Grid, h, b, vsharp, vbar) -> np.ndarray:
    """Flux with h*Cb(vsharp,vbar).vbar = d/dx flux (1D)."""
    if grid.dim != 1:
        raise GridMismatch("flux_Cb is 1D only")
    bxx = dx(grid, dx(grid, b))
    return h**2 * vsharp * bxx * vbar**2 / 3.0


# ---------------------------------------------------------------------------
# inversion of (1 + mu*T)


@dataclass(frozen=True)
class DispersiveSolveSettings:
    """Tolerances for inverting (1 + mu*T); 1D is a direct banded solve."""

    rel_tolerance: float = 1e-10
    max_iterations: int | None = None   # default 10 * number of unknowns

    def __post_init__(self):
        if not self.rel_tolerance > 0:
            raise ValueError("rel_tolerance must be positive")


_DIFF_CACHE: dict = {}


def _diff_matrix(n: int, dx_: float) -> sparse.csr_matrix:
    key = (n, dx_)
    if key not in _DIFF_CACHE:
        e = np.ones(n - 1)
        D = sparse.diags([e, -e], [1, -1], shape=(n, n)).tolil()
        D[0, n - 1] = -1.0
        D[n - 1, 0] = 1.0
        _DIFF_CACHE[key] = (D.tocsr() / (2.0 * dx_)).tocsr()
    return _DIFF_CACHE[key]


def _assemble_1d(grid: Grid, h, b, scales: ScaleParams) -> sparse.csc_matrix:
    n = grid.shape[0]
    D = _diff_matrix(n, grid.dx)
    beta = scales.beta
    M = sparse.diags(-1.0 / (3.0 * h)) @ (D @ (sparse.diags(h**3) @ D))
    if beta != 0.0:
        hbx = h**2 * dx(grid, b)
        M = M + sparse.diags(beta / (2.0 * h)) @ (D @ sparse.diags(hbx)
                                                  - sparse.diags(hbx) @ D)
        M = M + sparse.diags(beta**2 * dx(grid, b) ** 2)
    A = sparse.eye(n) + scales.mu * M
    return A.tocsc()


def invert_dispersive(grid: Grid, h, b, rhs, scales: ScaleParams,
                      settings: DispersiveSolveSettings | None = None) -> np.ndarray:
    """Solve (1 + mu*T) V = rhs to the requested relative max-norm residual."""
    settings = settings or DispersiveSolveSettings()
    grid.check_vector(rhs, "rhs")
    if scales.mu == 0.0:
        return np.array(rhs, copy=True)
    rnorm = float(np.max(np.abs(rhs)))
    if rnorm == 0.0:
        return np.zeros_like(rhs)
    tol = settings.rel_tolerance * rnorm

    if grid.dim == 1:
        A = _assemble_1d(grid, h, b, scales)
        V = spla.spsolve(A, rhs)
        res = float(np.max(np.abs(apply_dispersive(grid, h, b, V, scales) - rhs)))
        if not np.isfinite(res) or res > tol:
            raise NonConvergence(f"direct solve residual {res:.3e} > {tol:.3e}")
        return V

    nunk = 2 * grid.shape[0] * grid.shape[1]
    budget = settings.max_iterations or 10 * nunk
    shape = (2,) + grid.shape

    def matvec(flat):
        V = flat.reshape(shape)
        return apply_dispersive(grid, h, b, V, scales).ravel()

    A = spla.LinearOperator((nunk, nunk), matvec=matvec)
    x = np.array(rhs, copy=True).ravel()
    bvec = np.asarray(rhs).ravel()
    # run in chunks, judging convergence ourselves in the max norm; the
    # gmres rtol is set unreachably small so maxiter alone bounds a chunk
    restart, cycles = 40, 3
    used = 0
    prev = np.inf
    while True:
        V = x.reshape(shape)
        res = float(np.max(np.abs(apply_dispersive(grid, h, b, V, scales) - rhs)))
        if np.isfinite(res) and res <= tol:
            return V
        stalled = res >= 0.9 * prev
        if used >= budget or stalled or not np.isfinite(res):
            raise NonConvergence(
                f"iterative solve at residual {res:.3e} > {tol:.3e} "
                f"after {used} iterations" + (" (stalled)" if stalled else ""))
        prev = res
        x, _ = spla.gmres(A, bvec, x0=x, rtol=1e-30, atol=0.0,
                          restart=restart, maxiter=cycles)
        used += restart * cycles


def apply_dispersive(grid: Grid, h, b, V, scales: ScaleParams) -> np.ndarray:
    """(1 + mu*T) V, the forward operator of invert_dispersive."""
    return V + scales.mu * apply_T(grid, h, b, V, scales)
