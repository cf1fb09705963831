"""Energy densities, fluxes, and conservation monitoring.

Solver state is dimensionless, so the energy densities carry the powers of
eps, beta, mu induced by the scaling of the variables (energy unit
rho*g*(eps*H0)^2, flux unit that times sqrt(g*H0)/eps):

    e_p   = zeta^2 / 2
    e_k   = h|V|^2/2 + mu/6 h (h div V - 3/2 beta grad b . V)^2
            + mu beta^2 / 8 h (grad b . V)^2
    e_rot = mu/2 * { omega^2 h^3 / 12 | E | Tr E }   (by tier)

With physical scales supplied, totals are converted so the dimensional
closed forms of the rotational remarks are reproduced.  Time derivatives
inside the flux term q use the model tendencies, never finite differences
in time.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (Bathymetry, EnergyReport, ModelState, ScaleParams, Tier,
                   depth_field)
from .errors import GridMismatch, NonMonotoneTime
from .models import Tendency, tendency
from .operators import advect, div, dx, flux_C, flux_Cb, grad

DRIFT_FLOOR = 1e-14


def _kinetic_density(grid, h, vbar, b, scales, hydrostatic=False):
    mu, beta = scales.mu, scales.beta
    if grid.dim == 1:
        vmag2 = vbar**2
    else:
        vmag2 = vbar[0] ** 2 + vbar[1] ** 2
    ek = 0.5 * h * vmag2
    if hydrostatic:
        # Saint-Venant carries no dispersive kinetic terms
        return ek
    if grid.dim == 1:
        hdiv = h * dx(grid, vbar)
        gbv = dx(grid, b) * vbar
    else:
        hdiv = h * div(grid, vbar)
        gb = grad(grid, b)
        gbv = gb[0] * vbar[0] + gb[1] * vbar[1]
    ek = ek + mu / 6.0 * h * (hdiv - 1.5 * beta * gbv) ** 2
    if beta != 0.0:
        ek = ek + mu * beta**2 / 8.0 * h * gbv**2
    return ek


def _rotational_density(state, h, scales):
    mu = scales.mu
    if state.tier is Tier.GN_CONST_VORT_1D:
        return mu * state.omega**2 * h**3 / 24.0
    if state.E is None:
        return np.zeros_like(h)
    trE = state.E if state.grid.dim == 1 else state.E[0] + state.E[2]
    return mu * trE / 2.0


def energy_report(state: ModelState, bathy: Bathymetry, scales: ScaleParams,
                  with_flux: bool = False, model_tendency: Tendency | None = None
                  ) -> EnergyReport:
    """Mass and energy totals of a state; flux fields on demand."""
    if bathy.grid != state.grid:
        raise GridMismatch("state and bathymetry grids differ")
    grid = state.grid
    h = depth_field(state.zeta, bathy.b, scales)
    vol = grid.cell_volume

    ep_d = 0.5 * state.zeta**2
    ek_d = _kinetic_density(grid, h, state.vbar, bathy.b, scales,
                            hydrostatic=state.tier is Tier.SV)
    er_d = _rotational_density(state, h, scales)

    mass = float(np.sum(state.zeta)) * vol
    e_p = float(np.sum(ep_d)) * vol
    e_k = float(np.sum(ek_d)) * vol
    e_rot = float(np.sum(er_d)) * vol

    flux_base = flux_rot = None
    if with_flux:
        tend = model_tendency or tendency(state, bathy, scales)
        flux_base = _base_flux(grid, h, state, bathy.b, scales, ek_d, tend)
        flux_rot = _rotational_flux(grid, h, state, bathy.b, scales)

    units = "dimensionless"
    if scales.has_physical:
        units = "dimensional"
        area = scales.l_scale ** grid.dim
        amp = scales.epsilon * scales.h0
        mass *= amp * area
        e_fac = scales.g * amp**2 * area
        e_p *= e_fac
        e_k *= e_fac
        e_rot *= e_fac
        if with_flux:
            # flux unit: g a^2 sqrt(g H0) per unit density
            f_fac = scales.g * amp**2 * np.sqrt(scales.g * scales.h0) / scales.epsilon
            flux_base = flux_base * f_fac
            flux_rot = flux_rot * f_fac
    return EnergyReport(mass, e_p + e_k + e_rot, e_p, e_k, e_rot, units,
                        flux_base, flux_rot)


def _base_flux(grid, h, state, b, scales, ek_d, tend):
    """(h zeta + eps e_k + eps q) vbar with q from the model tendencies."""
    eps, mu, beta = scales.epsilon, scales.mu, scales.beta
    vbar = state.vbar
    if state.tier is Tier.SV:
        scal = h * state.zeta + eps * ek_d
        return scal * vbar if grid.dim == 1 else np.stack([scal * vbar[0],
                                                           scal * vbar[1]])
    d_h = eps * tend.d_zeta
    if grid.dim == 1:
        hdiv = h * dx(grid, vbar)
        dt_hdiv = d_h * dx(grid, vbar) + h * dx(grid, tend.d_vbar)
        gb = dx(grid, b)
        gbv = gb * vbar
        dt_gbv = gb * tend.d_vbar
    else:
        dvb = div(grid, vbar)
        hdiv = h * dvb
        dt_hdiv = d_h * dvb + h * div(grid, tend.d_vbar)
        gb = grad(grid, b)
        gbv = gb[0] * vbar[0] + gb[1] * vbar[1]
        dt_gbv = gb[0] * tend.d_vbar[0] + gb[1] * tend.d_vbar[1]
    q = -mu / 3.0 * h**2 * (dt_hdiv + eps * advect(grid, vbar, hdiv))
    if beta != 0.0:
        q = q + mu * beta / 2.0 * h**2 * (dt_gbv + eps * advect(grid, vbar, gbv))
    scal = h * state.zeta + eps * ek_d + q
    return scal * vbar if grid.dim == 1 else np.stack([scal * vbar[0], scal * vbar[1]])


def _rotational_flux(grid, h, state, b, scales):
    eps, mu = scales.epsilon, scales.mu
    mu32 = mu**1.5
    vbar = state.vbar
    if state.tier is Tier.GN_CONST_VORT_1D:
        om = state.omega
        out = eps * mu * om**2 / 8.0 * h**3 * vbar
        out = out + eps * mu32 * flux_C(grid, h, om * h, vbar)
        if scales.beta != 0.0:
            out = out + eps * scales.beta * mu32 * flux_Cb(grid, h, b, om * h, vbar)
        return out
    if state.tier is Tier.GN_GENERAL_1D:
        return (1.5 * eps * mu * state.E * vbar + 0.5 * eps * mu32 * state.F
                + eps * mu32 * flux_C(grid, h, state.vsharp, vbar))
    if state.tier is Tier.GN_MEDIUM_1D:
        # medium tier drops the O(mu^{3/2}) flux pieces with its equations
        return 1.5 * eps * mu * state.E * vbar
    if state.tier is Tier.GN_GENERAL_2D:
        E, F = state.E, state.F
        trE = E[0] + E[2]
        out = np.stack([
            eps * mu * (0.5 * trE * vbar[0] + E[0] * vbar[0] + E[1] * vbar[1]),
            eps * mu * (0.5 * trE * vbar[1] + E[1] * vbar[0] + E[2] * vbar[1]),
        ])
        out = out + 0.5 * eps * mu32 * np.stack([F[0] + F[2], F[1] + F[3]])
        return out + eps * mu32 * flux_C(grid, h, state.vsharp, vbar)
    zero = np.zeros_like(state.zeta)
    return zero if grid.dim == 1 else np.stack([zero, zero])


@dataclass
class ConservationTrace:
    """Time series of conserved quantities with drifts relative to t=0."""

    t: list = field(default_factory=list)
    mass: list = field(default_factory=list)
    energy_total: list = field(default_factory=list)
    e_p: list = field(default_factory=list)
    e_k: list = field(default_factory=list)
    e_rot: list = field(default_factory=list)
    max_abs_zeta: list = field(default_factory=list)
    mass_drift: list = field(default_factory=list)
    energy_drift: list = field(default_factory=list)


def _drift(value, ref):
    return abs(value - ref) / max(abs(ref), DRIFT_FLOOR)


def conservation_monitor(trace: ConservationTrace, t: float, report: EnergyReport,
                         max_abs_zeta: float = np.nan) -> ConservationTrace:
    """Append one sample and refresh the drift columns."""
    if trace.t and t <= trace.t[-1]:
        raise NonMonotoneTime(f"sample at t={t} after t={trace.t[-1]}")
    trace.t.append(t)
    trace.mass.append(report.mass)
    trace.energy_total.append(report.energy_total)
    trace.e_p.append(report.e_p)
    trace.e_k.append(report.e_k)
    trace.e_rot.append(report.e_rot)
    trace.max_abs_zeta.append(max_abs_zeta)
    trace.mass_drift.append(_drift(report.mass, trace.mass[0]))
    trace.energy_drift.append(_drift(report.energy_total, trace.energy_total[0]))
    return trace
