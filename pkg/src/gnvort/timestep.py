"""Explicit RK4 time integration with CFL-based step control."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Bathymetry, ModelState, ScaleParams, Tier, depth_field
from .models import Tendency, tendency


@dataclass(frozen=True)
class StepSettings:
    """Step-size control; fixed_dt overrides the CFL rule when given."""

    t_end: float
    cfl: float = 0.4
    fixed_dt: float | None = None
    max_steps: int = 10_000_000
    filter_delta: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.cfl <= 1.0:
            raise ValueError(f"cfl must lie in (0, 1], got {self.cfl}")
        if self.fixed_dt is not None and not self.fixed_dt > 0:
            raise ValueError("fixed_dt must be positive")


def _shear_speed(state: ModelState, h: np.ndarray) -> np.ndarray:
    """Largest local shear speed scale max(sqrt(E/h), |vsharp|)."""
    if state.tier is Tier.GN_CONST_VORT_1D:
        return abs(state.omega) * h
    s = np.zeros_like(h)
    if state.E is not None:
        trE = state.E if state.grid.dim == 1 else state.E[0] + state.E[2]
        s = np.sqrt(np.maximum(trE, 0.0) / h)
    if state.vsharp is not None:
        mag = (np.abs(state.vsharp) if state.grid.dim == 1
               else np.hypot(state.vsharp[0], state.vsharp[1]))
        s = np.maximum(s, mag)
    return s


def stable_dt(state: ModelState, bathy: Bathymetry, scales: ScaleParams,
              settings: StepSettings) -> float:
    """CFL step from the gravity-wave, advective and shear speed scales,
    capped so the run lands exactly on t_end."""
    h = depth_field(state.zeta, bathy.b, scales)
    vmag = (np.abs(state.vbar) if state.grid.dim == 1
            else np.hypot(state.vbar[0], state.vbar[1]))
    speed = np.sqrt(h) + scales.epsilon * vmag
    speed = speed + scales.epsilon * np.sqrt(scales.mu) * _shear_speed(state, h)
    dt = settings.cfl * state.grid.min_spacing / float(np.max(speed))
    if settings.fixed_dt is not None:
        dt = settings.fixed_dt
    remaining = settings.t_end - state.t
    return min(dt, remaining) if remaining > 0 else dt


def _axpy(state: ModelState, tend: Tendency, coef: float, t: float) -> ModelState:
    new = {name: getattr(state, name) + coef * arr for name, arr in tend.arrays().items()}
    return state.with_fields(t=t, **new)


def rk4_step(state: ModelState, bathy: Bathymetry, scales: ScaleParams, dt: float,
              rhs_fn=tendency) -> ModelState:
    """Classical 4-stage Runge-Kutta update of all prognostic fields."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    t = state.t
    k1 = rhs_fn(state, bathy, scales)
    k2 = rhs_fn(_axpy(state, k1, dt / 2.0, t + dt / 2.0), bathy, scales)
    k3 = rhs_fn(_axpy(state, k2, dt / 2.0, t + dt / 2.0), bathy, scales)
    k4 = rhs_fn(_axpy(state, k3, dt, t + dt), bathy, scales)
    a1, a2, a3, a4 = k1.arrays(), k2.arrays(), k3.arrays(), k4.arrays()
    new = {name: getattr(state, name)
           + dt / 6.0 * (a1[name] + 2.0 * a2[name] + 2.0 * a3[name] + a4[name])
           for name in a1}
    return state.with_fields(t=t + dt, **new)


def _fourth_difference(grid, f):
    """Undivided 4th difference (the dx^4 * d^4/dx^4 stencil), summed over directions."""
    ax = -1 if grid.dim == 1 else -2
    out = (np.roll(f, -2, ax) - 4.0 * np.roll(f, -1, ax) + 6.0 * f
           - 4.0 * np.roll(f, 1, ax) + np.roll(f, 2, ax))
    if grid.dim == 2:
        out = out + (np.roll(f, -2, -1) - 4.0 * np.roll(f, -1, -1) + 6.0 * f
                     - 4.0 * np.roll(f, 1, -1) + np.roll(f, 2, -1))
    return out


def filtered_rhs(delta: float, base_rhs=tendency):
    """Wrap a tendency function with 4th-order dissipation on zeta and vbar.

    delta = 0 returns the base function unchanged (the pure model).
    """
    if delta == 0.0:
        return base_rhs

    def rhs(state, bathy, scales):
        tend = base_rhs(state, bathy, scales)
        grid = state.grid
        d_zeta = tend.d_zeta - delta * _fourth_difference(grid, state.zeta)
        d_vbar = tend.d_vbar - delta * _fourth_difference(grid, state.vbar)
        return Tendency(d_zeta, d_vbar, tend.d_vsharp, tend.d_E, tend.d_F)

    return rhs
