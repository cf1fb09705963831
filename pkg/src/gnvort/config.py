"""Scenario configuration: plain-text parsing, validation, and assembly.

Format: INI-style sections in square brackets, one `key = value` per line,
`#` starts a comment.  Unknown sections or keys are errors.  See README
for the exhaustive key list.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace

import numpy as np

from .core import Bathymetry, Grid, ModelState, ScaleParams, Tier
from .errors import ParseError, ValidationError
from .models import constant_vorticity_cascade, init_cascade_from_shear
from .reconstruct import FIRST, SECOND, ShearLevels, uniform_levels

_FLOAT_KEYS = {
    ("grid", "length"), ("grid", "lx"), ("grid", "ly"),
    ("scales", "epsilon"), ("scales", "beta"), ("scales", "mu"),
    ("scales", "g"), ("scales", "h0"), ("scales", "l_scale"),
    ("bathymetry", "amplitude"), ("bathymetry", "wavenumber"),
    ("initial", "amplitude"), ("initial", "x0"), ("initial", "y0"),
    ("initial", "sigma"),
    ("shear", "omega"),
    ("time", "t_end"), ("time", "cfl"), ("time", "fixed_dt"),
    ("time", "filter_delta"),
    ("output", "sample_every"),
}
_INT_KEYS = {("grid", "dim"), ("grid", "n"), ("grid", "nx"), ("grid", "ny"),
             ("output", "n_theta")}
_STR_KEYS = {("model", "tier"), ("bathymetry", "kind"), ("bathymetry", "file"),
             ("initial", "kind"), ("initial", "file"), ("shear", "kind"),
             ("shear", "file"), ("output", "fields"), ("output", "order")}
_BOOL_KEYS = {("output", "reconstruction")}
_LIST_KEYS = {("shear", "coeffs")}
_ALL_KEYS = _FLOAT_KEYS | _INT_KEYS | _STR_KEYS | _BOOL_KEYS | _LIST_KEYS
_SECTIONS = {s for s, _ in _ALL_KEYS}


@dataclass(frozen=True)
class ScenarioConfig:
    """Validated scenario description with all defaults filled."""

    tier: Tier
    dim: int
    shape: tuple
    lengths: tuple
    epsilon: float = 1.0
    beta: float = 0.0
    mu: float = 0.04
    g: float | None = None
    h0: float | None = None
    l_scale: float | None = None
    bathy_kind: str = "flat"
    bathy_amplitude: float | None = None
    bathy_wavenumber: float | None = None
    bathy_file: str | None = None
    init_kind: str = "rest"
    init_amplitude: float | None = None
    init_x0: float | None = None
    init_y0: float | None = None
    init_sigma: float | None = None
    init_file: str | None = None
    shear_kind: str = "none"
    shear_omega: float | None = None
    shear_coeffs: tuple | None = None
    shear_file: str | None = None
    t_end: float = 1.0
    cfl: float = 0.4
    fixed_dt: float | None = None
    filter_delta: float = 0.0
    sample_every: float | None = None
    out_fields: str = "all"
    reconstruction: bool = False
    n_theta: int = 9
    rec_order: str = FIRST
    unconstrained_cascade: bool = False

    # ---- assembly -------------------------------------------------------

    def build_grid(self) -> Grid:
        if self.dim == 1:
            return Grid.line(self.shape[0], self.lengths[0])
        return Grid.box(self.shape[0], self.shape[1], self.lengths[0], self.lengths[1])

    def build_scales(self) -> ScaleParams:
        return ScaleParams(self.epsilon, self.beta, self.mu, self.g, self.h0,
                           self.l_scale)

    def build_bathymetry(self, grid: Grid) -> Bathymetry:
        if self.bathy_kind == "flat":
            return Bathymetry.flat(grid)
        if self.bathy_kind == "sinusoidal":
            return Bathymetry.sinusoidal(grid, self.bathy_amplitude,
                                         self.bathy_wavenumber)
        table = read_table(self.bathy_file, grid, trailing=["b"])
        return Bathymetry(grid, table["b"])

    def _surface_and_velocity(self, grid: Grid):
        zeros = np.zeros(grid.shape)
        vzero = zeros if grid.dim == 1 else np.zeros((2,) + grid.shape)
        if self.init_kind == "rest":
            return zeros, vzero, {}
        if self.init_kind == "gaussian_hump":
            a, sig = self.init_amplitude, self.init_sigma
            x0 = self.init_x0 if self.init_x0 is not None else self.lengths[0] / 2.0
            zeta = _periodic_gaussian(grid.x, x0, sig, self.lengths[0])
            if grid.dim == 2:
                y0 = self.init_y0 if self.init_y0 is not None else self.lengths[1] / 2.0
                zeta = zeta * _periodic_gaussian(grid.y, y0, sig, self.lengths[1])
            return a * zeta, vzero, {}
        names = ["zeta", "vbar_x"] + (["vbar_y"] if grid.dim == 2 else [])
        table = read_table(self.init_file, grid, trailing=names, optional=True)
        zeta = table.get("zeta", zeros)
        if grid.dim == 1:
            vbar = table.get("vbar_x", zeros)
        else:
            vbar = np.stack([table.get("vbar_x", zeros), table.get("vbar_y", zeros)])
        extra = {k: v for k, v in table.items() if k not in names}
        return zeta, vbar, extra

    def shear_profile(self, thetas: np.ndarray, grid: Grid, h0: np.ndarray):
        """V*_theta values on the level grid (starred), or None for no shear."""
        if self.shear_kind == "none":
            return None
        if self.shear_kind == "linear":
            prof = self.shear_omega * h0 * (thetas - 0.5).reshape(
                (-1,) + (1,) * grid.dim)
        elif self.shear_kind == "polynomial":
            vals = np.polynomial.polynomial.polyval(thetas, np.asarray(self.shear_coeffs))
            vals = vals - np.trapezoid(vals, thetas)     # star: drop the theta-mean
            prof = np.broadcast_to(vals.reshape((-1,) + (1,) * grid.dim),
                                   (thetas.size,) + grid.shape).copy()
        else:
            prof = read_shear_table(self.shear_file, grid, thetas)
        if grid.dim == 2 and prof.ndim == 1 + grid.dim:
            prof = np.stack([prof, np.zeros_like(prof)], axis=1)
        return prof

    def build_state(self, grid: Grid, bathy: Bathymetry, scales: ScaleParams
                    ) -> ModelState:
        zeta, vbar, extra = self._surface_and_velocity(grid)
        kw = {}
        if self.tier is Tier.GN_CONST_VORT_1D:
            kw["omega"] = self.shear_omega
        if self.tier.has_E:
            h = 1.0 + scales.epsilon * zeta - scales.beta * bathy.b
            vs, E, F = self._cascade(grid, h, extra)
            if self.tier.has_vsharp:
                kw.update(vsharp=vs, E=E, F=F)
            else:
                kw.update(E=E)
        return ModelState(self.tier, grid, 0.0, zeta, vbar, **kw)

    def _cascade(self, grid: Grid, h, extra):
        names_1d = {"vsharp": "vsharp_x", "E": "E_11", "F": "F_111"}
        if extra:   # tabulated initial data carried cascade columns
            if grid.dim == 1:
                z = np.zeros(grid.shape)
                return (extra.get(names_1d["vsharp"], z), extra.get("E_11", z),
                        extra.get("F_111", z))
            z = np.zeros(grid.shape)
            vs = np.stack([extra.get("vsharp_x", z), extra.get("vsharp_y", z)])
            E = np.stack([extra.get("E_11", z), extra.get("E_12", z),
                          extra.get("E_22", z)])
            F = np.stack([extra.get(k, z) for k in ("F_111", "F_112", "F_122", "F_222")])
            return vs, E, F
        if self.shear_kind == "linear":
            return constant_vorticity_cascade(grid, h, self.shear_omega)
        thetas = uniform_levels(self.n_theta)
        prof = self.shear_profile(thetas, grid, h)
        if prof is None:
            z = np.zeros(grid.shape)
            if grid.dim == 1:
                return z, z.copy(), z.copy()
            return (np.zeros((2,) + grid.shape), np.zeros((3,) + grid.shape),
                    np.zeros((4,) + grid.shape))
        return init_cascade_from_shear(thetas, prof, h)

    def build_levels(self, grid: Grid, bathy: Bathymetry, scales: ScaleParams,
                     state: ModelState) -> ShearLevels:
        thetas = uniform_levels(self.n_theta)
        h = 1.0 + scales.epsilon * state.zeta - scales.beta * bathy.b
        prof = self.shear_profile(thetas, grid, h)
        if prof is None:
            shape = ((thetas.size,) + grid.shape if grid.dim == 1
                     else (thetas.size, 2) + grid.shape)
            prof = np.zeros(shape)
        return ShearLevels.from_profile(thetas, prof, self.rec_order)


def _periodic_gaussian(x, x0, sigma, length):
    out = np.zeros_like(x)
    for k in (-1, 0, 1):
        out = out + np.exp(-((x - x0 + k * length) ** 2) / (2.0 * sigma**2))
    return out


# ---------------------------------------------------------------------------
# parsing


def _convert(section, key, raw, lineno):
    sk = (section, key)
    try:
        if sk in _FLOAT_KEYS:
            return float(raw)
        if sk in _INT_KEYS:
            return int(raw)
        if sk in _BOOL_KEYS:
            low = raw.lower()
            if low in ("on", "true", "yes", "1"):
                return True
            if low in ("off", "false", "no", "0"):
                return False
            raise ValueError(f"not a boolean: {raw}")
        if sk in _LIST_KEYS:
            parts = raw.replace(",", " ").split()
            return tuple(float(p) for p in parts)
        return raw.strip()
    except ValueError as exc:
        raise ParseError(lineno, f"bad value for {section}.{key}: {exc}") from None


def parse_config(text: str, base_dir: str = ".") -> ScenarioConfig:
    """Parse and validate a scenario config; unknown keys are errors."""
    section = None
    values = {}
    for lineno, rawline in enumerate(text.splitlines(), start=1):
        line = rawline.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in _SECTIONS:
                raise ParseError(lineno, f"unknown section [{section}]")
            continue
        if "=" not in line:
            raise ParseError(lineno, f"expected key = value, got {line!r}")
        if section is None:
            raise ParseError(lineno, "key outside of any section")
        key, raw = (p.strip() for p in line.split("=", 1))
        if (section, key) not in _ALL_KEYS:
            raise ParseError(lineno, f"unknown key {section}.{key}")
        values[(section, key)] = _convert(section, key, raw, lineno)
    return _validate(values, base_dir)


def _get(values, section, key, default=None):
    return values.get((section, key), default)


def _validate(v, base_dir) -> ScenarioConfig:
    tier_raw = _get(v, "model", "tier")
    if tier_raw is None:
        raise ValidationError("model.tier", "required")
    try:
        tier = Tier(tier_raw)
    except ValueError:
        raise ValidationError("model.tier", f"unknown tier {tier_raw!r}") from None

    default_dim = 2 if tier is Tier.GN_GENERAL_2D else 1
    dim = _get(v, "grid", "dim", default_dim)
    if dim not in (1, 2):
        raise ValidationError("grid.dim", f"must be 1 or 2, got {dim}")
    if tier.one_dimensional_only and dim != 1:
        raise ValidationError("grid.dim", f"tier {tier.value} is 1D only")
    if tier is Tier.GN_GENERAL_2D and dim != 2:
        raise ValidationError("grid.dim", "tier gn_general_2d needs dim = 2")

    if dim == 1:
        n, length = _get(v, "grid", "n"), _get(v, "grid", "length")
        if n is None or length is None:
            raise ValidationError("grid", "1D grids need n and length")
        shape, lengths = (n,), (length,)
    else:
        vals = [_get(v, "grid", k) for k in ("nx", "ny", "lx", "ly")]
        if any(x is None for x in vals):
            raise ValidationError("grid", "2D grids need nx, ny, lx, ly")
        shape, lengths = (vals[0], vals[1]), (vals[2], vals[3])
    for n in shape:
        if n < 8:
            raise ValidationError("grid", f"point counts must be >= 8, got {n}")
    for L in lengths:
        if not L > 0:
            raise ValidationError("grid", f"lengths must be positive, got {L}")

    mu = _get(v, "scales", "mu")
    if mu is None:
        raise ValidationError("scales.mu", "required")
    if not mu > 0:
        raise ValidationError("scales.mu", f"must be positive, got {mu}")
    epsilon = _get(v, "scales", "epsilon", 1.0)
    beta = _get(v, "scales", "beta", 0.0)
    if epsilon < 0:
        raise ValidationError("scales.epsilon", "must be nonnegative")
    if beta < 0:
        raise ValidationError("scales.beta", "must be nonnegative")
    phys = [_get(v, "scales", k) for k in ("g", "h0", "l_scale")]
    if any(p is not None for p in phys) and not all(p is not None for p in phys):
        raise ValidationError("scales", "give all of g, h0, l_scale or none")

    bathy_kind = _get(v, "bathymetry", "kind", "flat")
    if bathy_kind not in ("flat", "sinusoidal", "tabulated"):
        raise ValidationError("bathymetry.kind", f"unknown kind {bathy_kind!r}")
    if bathy_kind == "sinusoidal":
        if _get(v, "bathymetry", "amplitude") is None or \
           _get(v, "bathymetry", "wavenumber") is None:
            raise ValidationError("bathymetry", "sinusoidal needs amplitude and wavenumber")

    init_kind = _get(v, "initial", "kind", "rest")
    if init_kind not in ("rest", "gaussian_hump", "tabulated"):
        raise ValidationError("initial.kind", f"unknown kind {init_kind!r}")
    if init_kind == "gaussian_hump":
        if _get(v, "initial", "amplitude") is None or _get(v, "initial", "sigma") is None:
            raise ValidationError("initial", "gaussian_hump needs amplitude and sigma")

    shear_kind = _get(v, "shear", "kind", "none")
    if shear_kind not in ("none", "linear", "polynomial", "tabulated"):
        raise ValidationError("shear.kind", f"unknown kind {shear_kind!r}")
    if tier is Tier.GN_CONST_VORT_1D and shear_kind != "linear":
        raise ValidationError("shear.kind",
                              "constant-vorticity tier requires a linear shear spec")
    if shear_kind == "linear" and _get(v, "shear", "omega") is None:
        raise ValidationError("shear.omega", "linear shear needs omega")
    if shear_kind == "polynomial" and not _get(v, "shear", "coeffs"):
        raise ValidationError("shear.coeffs", "polynomial shear needs coeffs")

    files = {}
    for section, kind in (("bathymetry", bathy_kind), ("initial", init_kind),
                          ("shear", shear_kind)):
        path = _get(v, section, "file")
        if kind == "tabulated":
            if path is None:
                raise ValidationError(f"{section}.file", "tabulated kind needs a file")
            full = path if os.path.isabs(path) else os.path.join(base_dir, path)
            if not os.path.exists(full):
                raise ValidationError(f"{section}.file", f"file not found: {full}")
            files[section] = full

    t_end = _get(v, "time", "t_end", 1.0)
    if not t_end > 0:
        raise ValidationError("time.t_end", "must be positive")
    cfl = _get(v, "time", "cfl", 0.4)
    if not 0 < cfl <= 1:
        raise ValidationError("time.cfl", f"must lie in (0, 1], got {cfl}")
    fixed_dt = _get(v, "time", "fixed_dt")
    if fixed_dt is not None and not fixed_dt > 0:
        raise ValidationError("time.fixed_dt", "must be positive")
    filter_delta = _get(v, "time", "filter_delta", 0.0)
    if filter_delta < 0:
        raise ValidationError("time.filter_delta", "must be nonnegative")

    sample_every = _get(v, "output", "sample_every")
    if sample_every is not None and not sample_every > 0:
        raise ValidationError("output.sample_every", "must be positive")
    out_fields = _get(v, "output", "fields", "all")
    if out_fields not in ("all", "none"):
        raise ValidationError("output.fields", "must be 'all' or 'none'")
    n_theta = _get(v, "output", "n_theta", 9)
    if n_theta < 2:
        raise ValidationError("output.n_theta", "need at least 2 levels")
    rec_order = _get(v, "output", "order", FIRST)
    if rec_order not in (FIRST, SECOND):
        raise ValidationError("output.order", f"must be '{FIRST}' or '{SECOND}'")

    return ScenarioConfig(
        tier=tier, dim=dim, shape=shape, lengths=lengths,
        epsilon=epsilon, beta=beta, mu=mu,
        g=phys[0], h0=phys[1], l_scale=phys[2],
        bathy_kind=bathy_kind, bathy_amplitude=_get(v, "bathymetry", "amplitude"),
        bathy_wavenumber=_get(v, "bathymetry", "wavenumber"),
        bathy_file=files.get("bathymetry"),
        init_kind=init_kind, init_amplitude=_get(v, "initial", "amplitude"),
        init_x0=_get(v, "initial", "x0"), init_y0=_get(v, "initial", "y0"),
        init_sigma=_get(v, "initial", "sigma"), init_file=files.get("initial"),
        shear_kind=shear_kind, shear_omega=_get(v, "shear", "omega"),
        shear_coeffs=_get(v, "shear", "coeffs"), shear_file=files.get("shear"),
        t_end=t_end, cfl=cfl, fixed_dt=fixed_dt, filter_delta=filter_delta,
        sample_every=sample_every, out_fields=out_fields,
        reconstruction=_get(v, "output", "reconstruction", False),
        n_theta=n_theta, rec_order=rec_order,
    )


def parse_config_file(path: str) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), base_dir=os.path.dirname(os.path.abspath(path)))


def serialize_config(cfg: ScenarioConfig) -> str:
    """Canonical text form; parse(serialize(parse(t))) == parse(t)."""
    fmt = lambda x: format(x, ".17g") if isinstance(x, float) else str(x)
    lines = ["[model]", f"tier = {cfg.tier.value}", "", "[grid]", f"dim = {cfg.dim}"]
    if cfg.dim == 1:
        lines += [f"n = {cfg.shape[0]}", f"length = {fmt(cfg.lengths[0])}"]
    else:
        lines += [f"nx = {cfg.shape[0]}", f"ny = {cfg.shape[1]}",
                  f"lx = {fmt(cfg.lengths[0])}", f"ly = {fmt(cfg.lengths[1])}"]
    lines += ["", "[scales]", f"epsilon = {fmt(cfg.epsilon)}",
              f"beta = {fmt(cfg.beta)}", f"mu = {fmt(cfg.mu)}"]
    for name in ("g", "h0", "l_scale"):
        val = getattr(cfg, name)
        if val is not None:
            lines.append(f"{name} = {fmt(val)}")
    lines += ["", "[bathymetry]", f"kind = {cfg.bathy_kind}"]
    for name, key in (("bathy_amplitude", "amplitude"), ("bathy_wavenumber", "wavenumber"),
                      ("bathy_file", "file")):
        val = getattr(cfg, name)
        if val is not None:
            lines.append(f"{key} = {fmt(val)}")
    lines += ["", "[initial]", f"kind = {cfg.init_kind}"]
    for name, key in (("init_amplitude", "amplitude"), ("init_x0", "x0"),
                      ("init_y0", "y0"), ("init_sigma", "sigma"), ("init_file", "file")):
        val = getattr(cfg, name)
        if val is not None:
            lines.append(f"{key} = {fmt(val)}")
    lines += ["", "[shear]", f"kind = {cfg.shear_kind}"]
    if cfg.shear_omega is not None:
        lines.append(f"omega = {fmt(cfg.shear_omega)}")
    if cfg.shear_coeffs:
        lines.append("coeffs = " + " ".join(fmt(c) for c in cfg.shear_coeffs))
    if cfg.shear_file is not None:
        lines.append(f"file = {cfg.shear_file}")
    lines += ["", "[time]", f"t_end = {fmt(cfg.t_end)}", f"cfl = {fmt(cfg.cfl)}"]
    if cfg.fixed_dt is not None:
        lines.append(f"fixed_dt = {fmt(cfg.fixed_dt)}")
    lines.append(f"filter_delta = {fmt(cfg.filter_delta)}")
    lines += ["", "[output]"]
    if cfg.sample_every is not None:
        lines.append(f"sample_every = {fmt(cfg.sample_every)}")
    lines += [f"fields = {cfg.out_fields}",
              f"reconstruction = {'on' if cfg.reconstruction else 'off'}",
              f"n_theta = {cfg.n_theta}", f"order = {cfg.rec_order}"]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# tabulated inputs (CSV, same column conventions as the field outputs)


def _read_csv(path):
    with open(path, encoding="utf-8") as fh:
        rows = [line.strip() for line in fh if line.strip()]
    header = rows[0].split(",")
    data = np.array([[float(c) for c in row.split(",")] for row in rows[1:]])
    return [c.strip() for c in header], data


def read_table(path, grid: Grid, trailing, optional=False) -> dict:
    """Read a field table x[,y],<columns...>; returns {name: grid array}."""
    header, data = _read_csv(path)
    coords = ["x", "y"][: grid.dim]
    if header[: grid.dim] != coords:
        raise ValidationError(path, f"expected leading columns {coords}, got {header}")
    names = header[grid.dim:]
    if not optional and names[: len(trailing)] != list(trailing):
        raise ValidationError(path, f"expected columns {trailing}, got {names}")
    npoints = int(np.prod(grid.shape))
    if data.shape[0] != npoints:
        raise ValidationError(path, f"expected {npoints} rows, got {data.shape[0]}")
    out = {}
    for j, name in enumerate(names):
        out[name] = data[:, grid.dim + j].reshape(grid.shape)
    return out


def read_shear_table(path, grid: Grid, thetas) -> np.ndarray:
    """Theta-blocked shear table x[,y],theta,vstar_x[,vstar_y]."""
    header, data = _read_csv(path)
    coords = ["x", "y"][: grid.dim]
    want = coords + ["theta", "vstar_x"] + (["vstar_y"] if grid.dim == 2 else [])
    if header != want:
        raise ValidationError(path, f"expected columns {want}, got {header}")
    npoints = int(np.prod(grid.shape))
    if data.shape[0] != npoints * thetas.size:
        raise ValidationError(
            path, f"expected {npoints * thetas.size} rows, got {data.shape[0]}")
    tcol = data[:, grid.dim].reshape(thetas.size, npoints)
    if not np.allclose(tcol, np.asarray(thetas)[:, None], atol=1e-9):
        raise ValidationError(path, "theta blocks do not match the level grid")
    ncomp = 1 if grid.dim == 1 else 2
    comps = [data[:, grid.dim + 1 + c].reshape((thetas.size,) + grid.shape)
             for c in range(ncomp)]
    return comps[0] if grid.dim == 1 else np.stack(comps, axis=1)
