"""Dimensionless parameters, periodic grids, bathymetry and prognostic state.

All solver state is dimensionless: the free surface is z = eps*zeta, the
bottom sits at z = -1 + beta*b, and the water column height is
h = 1 + eps*zeta - beta*b.  Physical scales, when supplied, are used only
to convert diagnostics back to dimensional units.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, fields, replace
from enum import Enum

import numpy as np

from .errors import GridMismatch, PositivityError

H_MIN_DEFAULT = 1e-8


class Tier(Enum):
    """Member of the model hierarchy, from hydrostatic to full 2D cascade."""

    SV = "sv"
    GN_IRROT = "gn_irrot"
    GN_CONST_VORT_1D = "gn_const_vort_1d"
    GN_GENERAL_1D = "gn_general_1d"
    GN_MEDIUM_1D = "gn_medium_1d"
    GN_GENERAL_2D = "gn_general_2d"

    @property
    def has_vsharp(self) -> bool:
        return self in (Tier.GN_GENERAL_1D, Tier.GN_GENERAL_2D)

    @property
    def has_E(self) -> bool:
        return self in (Tier.GN_GENERAL_1D, Tier.GN_MEDIUM_1D, Tier.GN_GENERAL_2D)

    @property
    def has_F(self) -> bool:
        return self in (Tier.GN_GENERAL_1D, Tier.GN_GENERAL_2D)

    @property
    def one_dimensional_only(self) -> bool:
        return self in (Tier.GN_CONST_VORT_1D, Tier.GN_GENERAL_1D, Tier.GN_MEDIUM_1D)


@dataclass(frozen=True)
class ScaleParams:
    """The dimensionless triple (epsilon, beta, mu) plus optional physical scales.

    epsilon = a_surf/H0, beta = a_bott/H0, mu = (H0/L)^2.  The optional
    (g, h0, l_scale) enable dimensional diagnostics output.
    """

    epsilon: float
    beta: float
    mu: float
    g: float | None = None
    h0: float | None = None
    l_scale: float | None = None

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if self.epsilon < 0:
            raise ValueError(f"epsilon must be nonnegative, got {self.epsilon}")
        if self.beta < 0:
            raise ValueError(f"beta must be nonnegative, got {self.beta}")
        if self.beta > 2.0 * math.sqrt(self.mu):
            warnings.warn(
                "beta exceeds 2*sqrt(mu): the general-vorticity tiers assume "
                "medium-amplitude bottom variations",
                stacklevel=2,
            )

    @property
    def has_physical(self) -> bool:
        return self.g is not None and self.h0 is not None and self.l_scale is not None


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid, 1D line or 2D box.

    2D fields are indexed [i, j] for (x_i, y_j); vector/tensor fields carry
    a leading component axis.
    """

    dim: int
    shape: tuple[int, ...]
    lengths: tuple[float, ...]

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if len(self.shape) != self.dim or len(self.lengths) != self.dim:
            raise ValueError("shape/lengths do not match dim")
        for n in self.shape:
            if n < 8:
                raise ValueError(f"grids need at least 8 points per direction, got {n}")
        for L in self.lengths:
            if not L > 0:
                raise ValueError(f"domain lengths must be positive, got {L}")

    @classmethod
    def line(cls, n: int, length: float) -> "Grid":
        return cls(1, (int(n),), (float(length),))

    @classmethod
    def box(cls, nx: int, ny: int, lx: float, ly: float) -> "Grid":
        return cls(2, (int(nx), int(ny)), (float(lx), float(ly)))

    @property
    def dx(self) -> float:
        return self.lengths[0] / self.shape[0]

    @property
    def dy(self) -> float:
        if self.dim != 2:
            raise GridMismatch("dy requested on a 1D grid")
        return self.lengths[1] / self.shape[1]

    @property
    def min_spacing(self) -> float:
        return min(self.lengths[d] / self.shape[d] for d in range(self.dim))

    @property
    def cell_volume(self) -> float:
        vol = 1.0
        for d in range(self.dim):
            vol *= self.lengths[d] / self.shape[d]
        return vol

    @property
    def x(self) -> np.ndarray:
        """Node x-coordinates; in 2D broadcast to the field shape."""
        x = np.arange(self.shape[0]) * self.dx
        if self.dim == 1:
            return x
        return np.broadcast_to(x[:, None], self.shape).copy()

    @property
    def y(self) -> np.ndarray:
        if self.dim != 2:
            raise GridMismatch("y requested on a 1D grid")
        y = np.arange(self.shape[1]) * self.dy
        return np.broadcast_to(y[None, :], self.shape).copy()

    def check_scalar(self, f: np.ndarray, name: str = "field"):
        if tuple(np.shape(f))[-self.dim:] != self.shape or np.ndim(f) != self.dim:
            raise GridMismatch(f"{name} has shape {np.shape(f)}, expected {self.shape}")

    def check_vector(self, f: np.ndarray, name: str = "field"):
        expect = self.shape if self.dim == 1 else (2,) + self.shape
        if tuple(np.shape(f)) != expect:
            raise GridMismatch(f"{name} has shape {np.shape(f)}, expected {expect}")


def _frozen(a) -> np.ndarray:
    out = np.array(a, dtype=float, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Bathymetry:
    """Dimensionless bottom profile b on a grid (bottom at z = -1 + beta*b)."""

    grid: Grid
    b: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "b", _frozen(self.b))
        self.grid.check_scalar(self.b, "b")

    @classmethod
    def flat(cls, grid: Grid) -> "Bathymetry":
        return cls(grid, np.zeros(grid.shape))

    @classmethod
    def sinusoidal(cls, grid: Grid, amplitude: float, wavenumber: float) -> "Bathymetry":
        b = amplitude * np.sin(2.0 * np.pi * wavenumber * grid.x / grid.lengths[0])
        return cls(grid, b)


# expected trailing shape of each prognostic field, per dimension
_VEC_COMPONENTS = {1: None, 2: 2}
_E_COMPONENTS = {1: None, 2: 3}   # 2D symmetric storage (E11, E12, E22)
_F_COMPONENTS = {1: None, 2: 4}   # 2D symmetric storage (F111, F112, F122, F222)


@dataclass(frozen=True)
class ModelState:
    """Prognostic fields of one tier at one instant; immutable after construction."""

    tier: Tier
    grid: Grid
    t: float
    zeta: np.ndarray
    vbar: np.ndarray
    vsharp: np.ndarray | None = None
    E: np.ndarray | None = None
    F: np.ndarray | None = None
    omega: float | None = None

    def __post_init__(self):
        if self.tier.one_dimensional_only and self.grid.dim != 1:
            raise ValueError(f"tier {self.tier.value} requires a 1D grid")
        if self.tier is Tier.GN_GENERAL_2D and self.grid.dim != 2:
            raise ValueError("tier gn_general_2d requires a 2D grid")

        object.__setattr__(self, "zeta", _frozen(self.zeta))
        object.__setattr__(self, "vbar", _frozen(self.vbar))
        self.grid.check_scalar(self.zeta, "zeta")
        self.grid.check_vector(self.vbar, "vbar")

        if self.tier is Tier.GN_CONST_VORT_1D:
            if self.omega is None:
                raise ValueError("constant-vorticity tier needs omega")
        for name, present, comps in (
            ("vsharp", self.tier.has_vsharp, _VEC_COMPONENTS[self.grid.dim]),
            ("E", self.tier.has_E, _E_COMPONENTS[self.grid.dim]),
            ("F", self.tier.has_F, _F_COMPONENTS[self.grid.dim]),
        ):
            val = getattr(self, name)
            if not present:
                if val is not None:
                    raise ValueError(f"tier {self.tier.value} does not carry {name}")
                continue
            if val is None:
                raise ValueError(f"tier {self.tier.value} needs field {name}")
            val = _frozen(val)
            object.__setattr__(self, name, val)
            expect = self.grid.shape if comps is None else (comps,) + self.grid.shape
            if val.shape != expect:
                raise GridMismatch(f"{name} has shape {val.shape}, expected {expect}")

    @classmethod
    def rest(cls, tier: Tier, grid: Grid, omega: float | None = None) -> "ModelState":
        """Still water with zero shear data (omega only for the constant tier)."""
        zeros = lambda comps=None: (
            np.zeros(grid.shape) if comps is None else np.zeros((comps,) + grid.shape)
        )
        vec = None if grid.dim == 1 else 2
        kw = {}
        if tier.has_vsharp:
            kw["vsharp"] = zeros(vec)
        if tier.has_E:
            kw["E"] = zeros(_E_COMPONENTS[grid.dim])
        if tier.has_F:
            kw["F"] = zeros(_F_COMPONENTS[grid.dim])
        if tier is Tier.GN_CONST_VORT_1D:
            kw["omega"] = 0.0 if omega is None else float(omega)
        return cls(tier, grid, 0.0, zeros(), zeros(vec), **kw)

    def evolved_names(self) -> tuple[str, ...]:
        """Names of the prognostic arrays this tier advances in time."""
        names = ["zeta", "vbar"]
        if self.tier.has_vsharp:
            names.append("vsharp")
        if self.tier.has_E:
            names.append("E")
        if self.tier.has_F:
            names.append("F")
        return tuple(names)

    def with_fields(self, t: float | None = None, **arrays) -> "ModelState":
        if t is not None:
            arrays["t"] = t
        return replace(self, **arrays)


def depth_field(zeta, b, scales: ScaleParams, h_min: float = H_MIN_DEFAULT) -> np.ndarray:
    """h = 1 + eps*zeta - beta*b, guarded against dry states."""
    h = 1.0 + scales.epsilon * zeta - scales.beta * b
    hmin = float(np.min(h))
    if hmin <= h_min:
        raise PositivityError(f"min depth {hmin:.3e} <= guard {h_min:.1e} (dry state)")
    return h


def derive_depth(state: ModelState, bathy: Bathymetry, scales: ScaleParams,
                 h_min: float = H_MIN_DEFAULT) -> np.ndarray:
    if bathy.grid != state.grid:
        raise GridMismatch("state and bathymetry grids differ")
    return depth_field(state.zeta, bathy.b, scales, h_min)


@dataclass
class EnergyReport:
    """Mass, total energy and its breakdown; fluxes only when requested."""

    mass: float
    energy_total: float
    e_p: float
    e_k: float
    e_rot: float
    units: str = "dimensionless"
    flux_base: np.ndarray | None = None
    flux_rot: np.ndarray | None = None

    @property
    def breakdown(self) -> dict:
        return {"e_p": self.e_p, "e_k": self.e_k, "e_rot": self.e_rot}
