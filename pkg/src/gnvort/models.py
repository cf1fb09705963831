"""Tendency (right-hand-side) assembly for every model tier.

The momentum equations are advanced for vbar itself: the advective part
stays outside the dispersive inversion,

    d_vbar = -eps (vbar . grad) vbar - (1 + mu*T)^{-1} [ bracket ],

which is an exact rearrangement of the systems (they apply (1 + mu*T) to
the material derivative of vbar).  Tiers differ only by the extra terms
added to the bracket and by their cascade transport equations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .core import Bathymetry, Grid, ModelState, ScaleParams, Tier, depth_field
from .errors import GridMismatch, MeanNotZero
from .operators import (DispersiveSolveSettings, advect, advect_vector, apply_C,
                        apply_Cb, apply_D, apply_Q1, div, dx, dy, grad,
                        invert_dispersive)


@dataclass(frozen=True)
class Tendency:
    """Time derivatives of the prognostic fields of one tier."""

    d_zeta: np.ndarray
    d_vbar: np.ndarray
    d_vsharp: np.ndarray | None = None
    d_E: np.ndarray | None = None
    d_F: np.ndarray | None = None

    def arrays(self) -> dict:
        out = {"zeta": self.d_zeta, "vbar": self.d_vbar}
        if self.d_vsharp is not None:
            out["vsharp"] = self.d_vsharp
        if self.d_E is not None:
            out["E"] = self.d_E
        if self.d_F is not None:
            out["F"] = self.d_F
        return out


def _d_zeta(grid, h, vbar):
    return -div(grid, h * vbar if grid.dim == 1 else np.stack([h * vbar[0], h * vbar[1]]))


def _bracket_base(grid, h, b, state, scales):
    return grad(grid, state.zeta) + scales.epsilon * scales.mu * apply_Q1(
        grid, h, b, state.vbar, scales)


def _momentum(grid, h, b, state, scales, settings, bracket):
    adv = advect_vector(grid, state.vbar, state.vbar)
    return -scales.epsilon * adv - invert_dispersive(grid, h, b, bracket, scales, settings)


def rhs_sv(state: ModelState, bathy: Bathymetry, scales: ScaleParams,
           settings: DispersiveSolveSettings | None = None) -> Tendency:
    """Saint-Venant: hydrostatic, no dispersion."""
    grid = state.grid
    h = depth_field(state.zeta, bathy.b, scales)
    adv = advect_vector(grid, state.vbar, state.vbar)
    return Tendency(_d_zeta(grid, h, state.vbar),
                    -grad(grid, state.zeta) - scales.epsilon * adv)


def rhs_gn_irrot(state: ModelState, bathy: Bathymetry, scales: ScaleParams,
                 settings: DispersiveSolveSettings | None = None) -> Tendency:
    """Irrotational Green-Naghdi (1D or 2D by grid)."""
    grid = state.grid
    h = depth_field(state.zeta, bathy.b, scales)
    bracket = _bracket_base(grid, h, bathy.b, state, scales)
    return Tendency(_d_zeta(grid, h, state.vbar),
                    _momentum(grid, h, bathy.b, state, scales, settings, bracket))


def rhs_gn1d_const(state: ModelState, bathy: Bathymetry, scales: ScaleParams,
                   settings: DispersiveSolveSettings | None = None) -> Tendency:
    """1D Green-Naghdi with constant vorticity omega."""
    grid = state.grid
    eps, mu = scales.epsilon, scales.mu
    mu32 = mu ** 1.5
    h = depth_field(state.zeta, bathy.b, scales)
    om = state.omega
    bracket = _bracket_base(grid, h, bathy.b, state, scales)
    bracket = bracket + eps * mu / h * dx(grid, h**3 * om**2 / 12.0)
    bracket = bracket + eps * mu32 * apply_C(grid, h, om * h, state.vbar)
    if scales.beta != 0.0:
        bracket = bracket + eps * scales.beta * mu32 * apply_Cb(
            grid, h, bathy.b, om * h, state.vbar)
    return Tendency(_d_zeta(grid, h, state.vbar),
                    _momentum(grid, h, bathy.b, state, scales, settings, bracket))


def _cascade_1d(grid, state, scales):
    eps = scales.epsilon
    vbx = dx(grid, state.vbar)
    d_vsharp = -eps * state.vbar * dx(grid, state.vsharp) - eps * state.vsharp * vbx
    d_E = (-eps * state.vbar * dx(grid, state.E) - 3.0 * eps * state.E * vbx
           - eps * np.sqrt(scales.mu) * dx(grid, state.F))
    d_F = -eps * state.vbar * dx(grid, state.F) - 4.0 * eps * state.F * vbx
    return d_vsharp, d_E, d_F


def rhs_gn1d_general(state: ModelState, bathy: Bathymetry, scales: ScaleParams,
                     settings: DispersiveSolveSettings | None = None) -> Tendency:
    """1D Green-Naghdi with general vorticity: momentum + (vsharp, E, F) cascade."""
    grid = state.grid
    eps, mu = scales.epsilon, scales.mu
    h = depth_field(state.zeta, bathy.b, scales)
    bracket = _bracket_base(grid, h, bathy.b, state, scales)
    bracket = bracket + eps * mu / h * dx(grid, state.E)
    bracket = bracket + eps * mu**1.5 * apply_C(grid, h, state.vsharp, state.vbar)
    d_vsharp, d_E, d_F = _cascade_1d(grid, state, scales)
    return Tendency(_d_zeta(grid, h, state.vbar),
                    _momentum(grid, h, bathy.b, state, scales, settings, bracket),
                    d_vsharp, d_E, d_F)


def rhs_gn1d_medium(state: ModelState, bathy: Bathymetry, scales: ScaleParams,
                    settings: DispersiveSolveSettings | None = None) -> Tendency:
    """Medium-amplitude 1D variant: E only, and d/dx E enters without the 1/h."""
    grid = state.grid
    eps, mu = scales.epsilon, scales.mu
    h = depth_field(state.zeta, bathy.b, scales)
    bracket = _bracket_base(grid, h, bathy.b, state, scales)
    bracket = bracket + eps * mu * dx(grid, state.E)
    vbx = dx(grid, state.vbar)
    d_E = -eps * state.vbar * dx(grid, state.E) - 3.0 * eps * state.E * vbx
    return Tendency(_d_zeta(grid, h, state.vbar),
                    _momentum(grid, h, bathy.b, state, scales, settings, bracket),
                    d_E=d_E)


# symmetric storage index maps
_E_IDX = {(0, 0): 0, (0, 1): 1, (1, 0): 1, (1, 1): 2}
_F_IDX = {(0, 0, 0): 0, (0, 0, 1): 1, (0, 1, 1): 2, (1, 1, 1): 3}
_F_COMPONENTS = ((0, 0, 0), (0, 0, 1), (0, 1, 1), (1, 1, 1))


def _F_get(F, i, j, k):
    return F[_F_IDX[tuple(sorted((i, j, k)))]]


def _div_E(grid, E):
    return np.stack([dx(grid, E[0]) + dy(grid, E[1]),
                     dx(grid, E[1]) + dy(grid, E[2])])


def rhs_gn2d(state: ModelState, bathy: Bathymetry, scales: ScaleParams,
             settings: DispersiveSolveSettings | None = None) -> Tendency:
    """2D Green-Naghdi with general vorticity: full tensor cascade."""
    grid = state.grid
    eps, mu = scales.epsilon, scales.mu
    smu = np.sqrt(mu)
    h = depth_field(state.zeta, bathy.b, scales)
    vbar, E, F = state.vbar, state.E, state.F

    bracket = _bracket_base(grid, h, bathy.b, state, scales)
    bracket = bracket + eps * mu / h * _div_E(grid, E)
    bracket = bracket + eps * mu**1.5 * apply_C(grid, h, state.vsharp, vbar)
    d_vbar = _momentum(grid, h, bathy.b, state, scales, settings, bracket)

    d_vsharp = (-eps * advect_vector(grid, vbar, state.vsharp)
                - eps * advect_vector(grid, state.vsharp, vbar))

    # gradient G[i][j] = d_i vbar_j
    G = [[dx(grid, vbar[0]), dx(grid, vbar[1])],
         [dy(grid, vbar[0]), dy(grid, vbar[1])]]
    a = G[0][0] + G[1][1]

    # (G^T E + E G) in symmetric storage; E full lookup via _E_IDX
    Efull = lambda i, j: E[_E_IDX[(i, j)]]
    M = []
    for (i, j) in ((0, 0), (0, 1), (1, 1)):
        M.append(sum(G[k][i] * Efull(k, j) + Efull(i, k) * G[k][j] for k in range(2)))

    divF = np.stack([dx(grid, F[0]) + dy(grid, F[1]),
                     dx(grid, F[1]) + dy(grid, F[2]),
                     dx(grid, F[2]) + dy(grid, F[3])])
    D = apply_D(grid, h, state.vsharp, vbar)
    d_E = np.stack([
        -eps * advect(grid, vbar, E[c]) - eps * a * E[c] - eps * M[c]
        - eps * smu * divF[c] + eps * smu * D[c]
        for c in range(3)
    ])

    # F stretching: the index pattern is symmetric for symmetric F, so
    # evolving the 4 independent components is the re-symmetrized evolution
    d_F = []
    for (i, j, k) in _F_COMPONENTS:
        stretch = sum(_F_get(F, l, j, k) * G[l][i] + _F_get(F, i, l, k) * G[l][j]
                      + _F_get(F, i, j, l) * G[l][k] for l in range(2))
        d_F.append(-eps * advect(grid, vbar, _F_get(F, i, j, k))
                   - eps * a * _F_get(F, i, j, k) - eps * stretch)
    return Tendency(_d_zeta(grid, h, vbar), d_vbar, d_vsharp, d_E, np.stack(d_F))


_RHS = {
    Tier.SV: rhs_sv,
    Tier.GN_IRROT: rhs_gn_irrot,
    Tier.GN_CONST_VORT_1D: rhs_gn1d_const,
    Tier.GN_GENERAL_1D: rhs_gn1d_general,
    Tier.GN_MEDIUM_1D: rhs_gn1d_medium,
    Tier.GN_GENERAL_2D: rhs_gn2d,
}


def tendency(state: ModelState, bathy: Bathymetry, scales: ScaleParams,
             settings: DispersiveSolveSettings | None = None) -> Tendency:
    """Tier-dispatched tendency of a state."""
    return _RHS[state.tier](state, bathy, scales, settings)


# ---------------------------------------------------------------------------
# cascade initial data from a prescribed shear profile


def init_cascade_from_shear(thetas: np.ndarray, profile: np.ndarray, h: np.ndarray,
                            mean_tol: float = 1e-10):
    """Build (vsharp, E, F) from the level-line shear profile V*_theta.

    profile has shape (n_theta,) + field shape in 1D and
    (n_theta, 2) + field shape in 2D; it must have zero theta-mean
    (trapezoid) at every grid point.  Integrals in the vertical reduce to
    theta integrals through z = -1 + beta*b + theta*h.
    """
    thetas = np.asarray(thetas, dtype=float)
    profile = np.asarray(profile, dtype=float)
    if thetas.ndim != 1 or thetas.size < 2:
        raise ValueError("need at least two theta levels")
    mean = np.trapezoid(profile, thetas, axis=0)
    tol = mean_tol * max(1.0, float(np.max(np.abs(profile))) if profile.size else 1.0)
    worst = float(np.max(np.abs(mean))) if mean.size else 0.0
    if worst > tol:
        raise MeanNotZero(f"profile theta-mean reaches {worst:.3e} (tol {tol:.1e})")

    two_d = profile.ndim >= 2 and profile.shape[1] == 2 and profile.ndim == np.ndim(h) + 2

    def tmean(q):
        return np.trapezoid(q, thetas, axis=0)

    def triple(q):
        inner = cumulative_trapezoid(q, thetas, axis=0, initial=0.0)
        upper = cumulative_trapezoid(inner, thetas, axis=0, initial=0.0)
        mid = upper[-1] - upper
        return -24.0 * tmean(mid)

    if not two_d:
        E = h * tmean(profile**2)
        F = h * tmean(profile**3)
        vsharp = triple(profile)
        return vsharp, E, F

    p0, p1 = profile[:, 0], profile[:, 1]
    E = np.stack([h * tmean(p0 * p0), h * tmean(p0 * p1), h * tmean(p1 * p1)])
    F = np.stack([h * tmean(p0**3), h * tmean(p0**2 * p1),
                  h * tmean(p0 * p1**2), h * tmean(p1**3)])
    vsharp = np.stack([triple(p0), triple(p1)])
    return vsharp, E, F


def constant_vorticity_cascade(grid: Grid, h: np.ndarray, omega: float):
    """Closed-form cascade data of a linear shear: (omega*h, h^3*omega^2/12, 0)."""
    if grid.dim == 1:
        return omega * h, h**3 * omega**2 / 12.0, np.zeros_like(h)
    vsharp = np.stack([omega * h, np.zeros_like(h)])
    E = np.stack([h**3 * omega**2 / 12.0, np.zeros_like(h), np.zeros_like(h)])
    F = np.zeros((4,) + grid.shape)
    return vsharp, E, F
