"""Level-line shear evolution and reconstruction of the 2+1D velocity field.

The flow is sampled on level lines z = -1 + beta*b + theta*h for theta in
[0, 1] (theta = 0 bottom, theta = 1 surface).  The shear data
(V*_theta, q_theta, Q_theta) evolves by 2D transport equations decoupled
from the main solve, consuming stored (zeta, vbar, E) snapshots.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .core import Bathymetry, ModelState, ScaleParams, Tier, depth_field
from .errors import GridMismatch, MeanNotZero
from .models import _div_E
from .operators import (advect, advect_vector, apply_C, div, div_perp, dx, dy,
                        grad, grad_perp, level_correction_theta_integral,
                        level_dispersive_correction)

FIRST = "first"
SECOND = "second"


def uniform_levels(n_theta: int = 9) -> np.ndarray:
    if n_theta < 2:
        raise ValueError("need at least the two endpoint levels")
    return np.linspace(0.0, 1.0, n_theta)


@dataclass(frozen=True)
class ShearLevels:
    """theta-discretized shear data: V*_theta, q_theta = d_theta V*_theta,
    Q_theta = integral of V* from 0 to theta."""

    thetas: np.ndarray
    vstar: np.ndarray
    q: np.ndarray
    Q: np.ndarray
    order: str = FIRST

    def __post_init__(self):
        thetas = np.asarray(self.thetas, dtype=float)
        object.__setattr__(self, "thetas", thetas)
        if abs(thetas[0]) > 1e-12 or abs(thetas[-1] - 1.0) > 1e-12:
            raise ValueError("theta levels must include the endpoints 0 and 1")
        if self.order not in (FIRST, SECOND):
            raise ValueError(f"order must be '{FIRST}' or '{SECOND}'")
        for name in ("vstar", "q", "Q"):
            arr = np.asarray(getattr(self, name), dtype=float)
            object.__setattr__(self, name, arr)
            if arr.shape[0] != thetas.size or arr.shape != self.vstar.shape:
                raise GridMismatch(f"{name} shape {arr.shape} inconsistent with levels")

    @classmethod
    def from_profile(cls, thetas, profile, order: str = FIRST,
                     mean_tol: float = 1e-10) -> "ShearLevels":
        """Initialize from V*_theta values; q by centered theta-differences,
        Q by cumulative trapezoid (so Q at theta=1 is the zero theta-mean)."""
        thetas = np.asarray(thetas, dtype=float)
        profile = np.asarray(profile, dtype=float)
        q = np.gradient(profile, thetas, axis=0)
        Q = cumulative_trapezoid(profile, thetas, axis=0, initial=0.0)
        top = float(np.max(np.abs(Q[-1])))
        if top > mean_tol * max(1.0, float(np.max(np.abs(profile)))):
            raise MeanNotZero(
                f"Q at theta=1 is {top:.3e}: shear profile is not starred")
        return cls(thetas, profile, q, Q, order)

    def replace_data(self, vstar, q, Q) -> "ShearLevels":
        return replace(self, vstar=vstar, q=q, Q=Q)


@dataclass(frozen=True)
class ReconstructedVelocity:
    """Horizontal velocity V and vertical velocity w on every level line."""

    thetas: np.ndarray
    V: np.ndarray
    w: np.ndarray
    order: str


def _theta_coeff(levels: ShearLevels, grid, values) -> np.ndarray:
    """Reshape per-level scalars for broadcasting against level fields."""
    extra = 1 + grid.dim if grid.dim == 2 else grid.dim
    return np.asarray(values).reshape((-1,) + (1,) * extra)


def rhs_shear_levels(levels: ShearLevels, state: ModelState, bathy: Bathymetry,
                     scales: ScaleParams, order: str | None = None):
    """Tendencies of (V*_theta, q_theta, Q_theta).

    First order is pure linear transport; second order adds the quadratic
    shear term and the sources S1 (horizontal-vorticity feedback) and
    S2 (shear creation from vertical vorticity, 2D only).
    """
    order = order or levels.order
    grid = state.grid
    eps = scales.epsilon
    vbar = state.vbar

    def transport(field):
        if grid.dim == 1:
            return -eps * vbar * dx(grid, field) - eps * field * dx(grid, vbar)
        adv = np.stack([advect(grid, vbar, field[:, 0]),
                        advect(grid, vbar, field[:, 1])], axis=1)
        stretch = np.stack([
            field[:, 0] * dx(grid, vbar[0]) + field[:, 1] * dy(grid, vbar[0]),
            field[:, 0] * dx(grid, vbar[1]) + field[:, 1] * dy(grid, vbar[1]),
        ], axis=1)
        return -eps * adv - eps * stretch

    d_vstar = transport(levels.vstar)
    d_q = transport(levels.q)
    d_Q = transport(levels.Q)
    if order == FIRST:
        return d_vstar, d_q, d_Q

    smu = np.sqrt(scales.mu)
    h = depth_field(state.zeta, bathy.b, scales)
    vs = levels.vstar
    if grid.dim == 1:
        quad = vs * dx(grid, vs)
        if state.E is None:
            raise ValueError("second-order level evolution needs E on the state")
        s1 = dx(grid, state.E) / h + levels.q * dx(grid, h * levels.Q) / h
        src = s1
    else:
        quad = np.stack([vs[:, 0] * dx(grid, vs[:, 0]) + vs[:, 1] * dy(grid, vs[:, 0]),
                         vs[:, 0] * dx(grid, vs[:, 1]) + vs[:, 1] * dy(grid, vs[:, 1])],
                        axis=1)
        if state.E is None:
            raise ValueError("second-order level evolution needs E on the state")
        divE_h = _div_E(grid, state.E) / h
        divhQ = np.stack([div(grid, np.stack([h * levels.Q[:, 0][i], h * levels.Q[:, 1][i]]))
                          for i in range(levels.thetas.size)])
        s1 = divE_h[None, :, :, :] + levels.q * (divhQ[:, None, :, :] / h)
        curl = div_perp(grid, vbar)
        wp = grad_perp(grid, div(grid, vbar))
        coeff = _theta_coeff(levels, grid, 1.0 - 3.0 * levels.thetas**2)
        s2 = -coeff * (h**2 / 6.0) * curl * wp[None, :, :, :]
        src = s1 + s2
    d_vstar = d_vstar - eps * smu * quad + eps * smu * src
    return d_vstar, d_q, d_Q


def reconstruct_velocity(levels: ShearLevels, state: ModelState, bathy: Bathymetry,
                         scales: ScaleParams, order: str | None = None
                         ) -> ReconstructedVelocity:
    """Velocity field on the level lines from averaged state plus shear data."""
    order = order or levels.order
    grid = state.grid
    smu = np.sqrt(scales.mu)
    mu = scales.mu
    h = depth_field(state.zeta, bathy.b, scales)
    vbar = state.vbar
    n_theta = levels.thetas.size

    V_out, w_out = [], []
    for i, theta in enumerate(levels.thetas):
        vst = levels.vstar[i]
        V = vbar + smu * vst
        grad_z = grad(grid, scales.beta * bathy.b + theta * h)
        if grid.dim == 1:
            flux = h * (theta * vbar + smu * levels.Q[i])
            w = -div(grid, flux) + grad_z * V
        else:
            flux = np.stack([h * (theta * vbar[0] + smu * levels.Q[i][0]),
                             h * (theta * vbar[1] + smu * levels.Q[i][1])])
            w = -div(grid, flux) + grad_z[0] * V[0] + grad_z[1] * V[1]
        if order == SECOND:
            Tst = level_dispersive_correction(grid, h, bathy.b, vbar, theta, scales)
            Tint = level_correction_theta_integral(grid, h, bathy.b, vbar, theta, scales)
            V = V + mu * Tst
            if grid.dim == 1:
                w = w - mu * div(grid, h * Tint) + mu * grad_z * Tst
            else:
                w = (w - mu * div(grid, np.stack([h * Tint[0], h * Tint[1]]))
                     + mu * (grad_z[0] * Tst[0] + grad_z[1] * Tst[1]))
        V_out.append(V)
        w_out.append(mu * w)
    return ReconstructedVelocity(levels.thetas, np.stack(V_out), np.stack(w_out), order)


def vertical_vorticity_split(state: ModelState, levels: ShearLevels,
                             bathy: Bathymetry, scales: ScaleParams):
    """(omega0, omega1, omega0 + sqrt(mu)*omega1): the averaged vertical
    vorticity split into its mean-flow and shear contributions (2D)."""
    grid = state.grid
    if grid.dim != 2:
        raise GridMismatch("vertical vorticity split is 2D only")
    h = depth_field(state.zeta, bathy.b, scales)
    vbar = state.vbar
    gph = grad_perp(grid, h)
    omega0 = div_perp(grid, vbar) + scales.mu * (h / 3.0) * (
        gph[0] * dx(grid, div(grid, vbar)) + gph[1] * dy(grid, div(grid, vbar)))
    gpz = grad_perp(grid, state.zeta)
    gpb = grad_perp(grid, bathy.b)
    vs_bottom, vs_surface = levels.vstar[0], levels.vstar[-1]
    omega1 = -(scales.epsilon * (gpz[0] * vs_surface[0] + gpz[1] * vs_surface[1])
               - scales.beta * (gpb[0] * vs_bottom[0] + gpb[1] * vs_bottom[1])) / h
    return omega0, omega1, omega0 + np.sqrt(scales.mu) * omega1


def rhs_omega_bar0(omega0: np.ndarray, state: ModelState, bathy: Bathymetry,
                   scales: ScaleParams) -> np.ndarray:
    """Tendency of omega0: advection plus transfer from horizontal vorticity."""
    grid = state.grid
    if state.tier is not Tier.GN_GENERAL_2D:
        raise GridMismatch("omega0 evolution is defined on the 2D general tier")
    eps, mu = scales.epsilon, scales.mu
    h = depth_field(state.zeta, bathy.b, scales)
    out = -div(grid, np.stack([omega0 * state.vbar[0], omega0 * state.vbar[1]]))
    src = _div_E(grid, state.E) / h
    out = out - eps * mu * div_perp(grid, src)
    out = out - eps * mu**1.5 * div_perp(grid, apply_C(grid, h, state.vsharp, state.vbar))
    return out


# ---------------------------------------------------------------------------
# decoupled evolution through stored snapshots


def _blend(s0: ModelState, s1: ModelState, w: float) -> ModelState:
    if w <= 0.0:
        return s0
    if w >= 1.0:
        return s1
    fields = {name: (1.0 - w) * getattr(s0, name) + w * getattr(s1, name)
              for name in s0.evolved_names()}
    return s0.with_fields(t=(1.0 - w) * s0.t + w * s1.t, **fields)


def _levels_axpy(levels: ShearLevels, k, coef: float) -> ShearLevels:
    return levels.replace_data(levels.vstar + coef * k[0], levels.q + coef * k[1],
                               levels.Q + coef * k[2])


def rk4_levels_step(levels: ShearLevels, states, bathy: Bathymetry,
                    scales: ScaleParams, dt: float, order: str | None = None
                    ) -> ShearLevels:
    """One RK4 step of the level system; `states` supplies the background at
    the start, middle and end of the step (middle may be interpolated)."""
    s0, sm, s1 = states
    k1 = rhs_shear_levels(levels, s0, bathy, scales, order)
    k2 = rhs_shear_levels(_levels_axpy(levels, k1, dt / 2.0), sm, bathy, scales, order)
    k3 = rhs_shear_levels(_levels_axpy(levels, k2, dt / 2.0), sm, bathy, scales, order)
    k4 = rhs_shear_levels(_levels_axpy(levels, k3, dt), s1, bathy, scales, order)
    comb = tuple(dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) for i in range(3))
    return _levels_axpy(levels, comb, 1.0)


def evolve_levels(levels: ShearLevels, snapshots, bathy: Bathymetry,
                  scales: ScaleParams, order: str | None = None,
                  sample_times=(), on_sample=None) -> ShearLevels:
    """March the level system across a stored sequence of states.

    Backgrounds at RK stage midpoints are linear time-interpolations of the
    neighboring snapshots.  `on_sample(t, levels)` fires whenever a time in
    `sample_times` is reached (snapshot times; t=0 included if requested).
    """
    pending = sorted(sample_times)
    tol = 1e-9

    def fire(t):
        nonlocal pending
        while pending and pending[0] <= t + tol:
            if on_sample is not None:
                on_sample(pending[0], levels)
            pending = pending[1:]

    fire(snapshots[0].t)
    for s0, s1 in zip(snapshots[:-1], snapshots[1:]):
        dt = s1.t - s0.t
        if dt <= 0:
            continue
        levels = rk4_levels_step(levels, (s0, _blend(s0, s1, 0.5), s1), bathy,
                                 scales, dt, order)
        fire(s1.t)
    return levels
