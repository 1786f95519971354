"""Scenario description: bathymetries, initial conditions and INI configuration."""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .boundary import SpongeLayer
from .mesh import load_mesh
from .meshgen import delaunay_rectangle_mesh, rectangle_mesh
from .solver import Simulation, SolverOptions
from .space import DGSpace
from .swe import G, make_bathymetry
from .waves import MonochromaticWave, SolitaryWave, soliton_parameters, soliton_state


class ConfigError(ValueError):
    """Invalid or inconsistent scenario configuration."""


# ---------------------------------------------------------------------------
# bathymetries b(x, y), measured upwards
# ---------------------------------------------------------------------------

def bump_hollow(x, y, d=0.45, L=0.15, x1=(-1 / 3, -1 / 3), x2=(1 / 3, 1 / 3), base=1.0):
    """base + d exp(-(r1/L)^2) - d exp(-(r2/L)^2): bump at x1, hollow at x2."""
    r1 = (x - x1[0]) ** 2 + (y - x1[1]) ** 2
    r2 = (x - x2[0]) ** 2 + (y - x2[1]) ** 2
    return base + d * np.exp(-r1 / L ** 2) - d * np.exp(-r2 / L ** 2)


def plane_beach(x, y, slope=1 / 19.85, x_toe=20.15):
    """Flat bottom b = 0 up to x_toe, then rising with the given slope."""
    return np.maximum(0.0, (x - x_toe) * slope)


def trapezoidal_bar(x, y, x_front=6.0, front_slope=1 / 20, crest=0.3, crest_length=2.0, back_slope=1 / 10):
    """Submerged bar: rise with front_slope to height crest, plateau, fall with back_slope."""
    x_top = x_front + crest / front_slope
    x_back = x_top + crest_length
    x_end = x_back + crest / back_slope
    return np.select([x < x_front, x < x_top, x < x_back, x < x_end],
                     [0.0 * x, (x - x_front) * front_slope, 0.0 * x + crest, crest - (x - x_back) * back_slope],
                     0.0 * x)


def elliptic_shoal(x, y, angle_deg=20.0, depth=0.45):
    """Rotated plane slope plus elliptic shoal, returned as height above the deepest bed."""
    a = np.deg2rad(angle_deg)
    xr = x * np.cos(a) - y * np.sin(a)
    yr = x * np.sin(a) + y * np.cos(a)
    zb = np.where(xr >= -5.82, (5.82 + xr) / 50.0, 0.0)
    inside = (xr / 4.0) ** 2 + (yr / 3.0) ** 2 <= 1.0
    arg = np.maximum(1.0 - (xr / 3.75) ** 2 - (yr / 5.0) ** 2, 0.0)
    zs = np.where(inside, -0.3 + 0.5 * np.sqrt(arg), 0.0)
    return zb + zs


def gridded_bathymetry(path):
    """Bilinear interpolant of a gridded file with rows 'x y b' on a tensor grid."""
    data = np.loadtxt(path, comments="#")
    if data.ndim != 2 or data.shape[1] != 3:
        raise ConfigError(f"{path}: expected three columns x y b")
    xs = np.unique(data[:, 0])
    ys = np.unique(data[:, 1])
    if len(xs) * len(ys) != len(data):
        raise ConfigError(f"{path}: points do not form a tensor grid")
    grid = np.full((len(xs), len(ys)), np.nan)
    grid[np.searchsorted(xs, data[:, 0]), np.searchsorted(ys, data[:, 1])] = data[:, 2]
    interp = RegularGridInterpolator((xs, ys), grid, method="linear", bounds_error=False, fill_value=None)

    def b(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float) * np.ones_like(x)
        return interp(np.column_stack([x.ravel(), y.ravel()])).reshape(x.shape)
    return b


def make_bathymetry_function(kind, params):
    p = dict(params)
    if kind == "flat":
        level = float(p.get("level", 0.0))
        return lambda x, y: np.zeros_like(x) + level
    if kind == "bump_hollow":
        return lambda x, y: bump_hollow(x, y, d=float(p.get("d", 0.45)), L=float(p.get("length", 0.15)),
                                        base=float(p.get("base", 1.0)))
    if kind == "plane_beach":
        return lambda x, y: plane_beach(x, y, slope=float(p.get("slope", 1 / 19.85)),
                                        x_toe=float(p.get("x_toe", 20.15)))
    if kind == "trapezoidal_bar":
        return lambda x, y: trapezoidal_bar(x, y, x_front=float(p.get("x_front", 6.0)),
                                            front_slope=float(p.get("front_slope", 0.05)),
                                            crest=float(p.get("crest", 0.3)),
                                            crest_length=float(p.get("crest_length", 2.0)),
                                            back_slope=float(p.get("back_slope", 0.1)))
    if kind == "elliptic_shoal":
        return lambda x, y: elliptic_shoal(x, y, angle_deg=float(p.get("angle", 20.0)))
    if kind == "file":
        if "path" not in p:
            raise ConfigError("gridded bathymetry needs 'path'")
        return gridded_bathymetry(p["path"])
    raise ConfigError(f"unknown bathymetry {kind!r}")


# ---------------------------------------------------------------------------
# initial conditions
# ---------------------------------------------------------------------------

def initial_state(kind, space, bathy, params, g=G):
    """Nodal (eta, qx, qy) for the configured initial condition.

    Depths are clipped at zero (eta >= b) so dry land stays dry.
    """
    if kind not in ("rest", "gaussian", "soliton"):
        raise ConfigError(f"unknown initial condition {kind!r}")
    p = dict(params)
    b = bathy.b
    eta_rest = float(p.get("eta_rest", bathy.h0))
    x, y = space.x, space.y
    if kind == "rest":
        eta = np.full_like(x, eta_rest)
        qx = qy = np.zeros_like(x)
    elif kind == "gaussian":
        a = float(p.get("a", 0.075 * bathy.h0))
        L = float(p.get("length", 0.15))
        xc, yc = float(p.get("xc", 0.0)), float(p.get("yc", 0.0))
        zeta = lambda X, Y: a * np.exp(-((X - xc) ** 2 + (Y - yc) ** 2) / L ** 2)
        eta = space.project(lambda X, Y: eta_rest + zeta(X, Y))
        qx = qy = np.zeros_like(x)
        return np.array([np.maximum(eta, b), qx, qy])
    elif kind == "soliton":
        eps = float(p.get("eps", 0.2))
        h0 = float(p.get("h0", bathy.h0))
        x0 = float(p.get("x0", 0.0))
        S = lambda X, Y: soliton_state(eps, h0, x0, 0.0, X, Y, g)
        eta = space.project(lambda X, Y: S(X, Y)[0] - h0 + eta_rest)
        qx = space.project(lambda X, Y: S(X, Y)[1])
        qy = np.zeros_like(x)
        wet = eta > b
        eta = np.maximum(eta, b)
        return np.array([eta, np.where(wet, qx, 0.0), qy])
    return np.array([np.maximum(eta, b), qx, qy])


def synolakis_layout(eps=0.28, h0=1.0, slope=1 / 19.85, shoreline=40.0):
    """Beach toe and soliton centre for the run-up experiment (wave travelling in +x).

    The soliton starts half a wavelength seaward of the toe, the usual
    convention for this benchmark.
    """
    x_toe = shoreline - h0 / slope
    gamma = np.sqrt(3.0 * eps / 4.0)
    half = np.arccosh(np.sqrt(20.0)) / gamma * h0
    return x_toe, x_toe - half


# ---------------------------------------------------------------------------
# INI configuration
# ---------------------------------------------------------------------------

_BOOL = {"1": True, "yes": True, "true": True, "on": True, "0": False, "no": False, "false": False, "off": False}


def _bool(v):
    try:
        return _BOOL[str(v).strip().lower()]
    except KeyError:
        raise ConfigError(f"not a boolean: {v!r}") from None


def _floats(text):
    return [float(t) for t in text.replace(",", " ").split()]


@dataclass
class Scenario:
    name: str
    mesh: dict
    bathymetry: str
    bathymetry_params: dict
    initial: str
    initial_params: dict
    h0: float = 1.0
    g: float = G
    alpha: float = 1.159
    eps0: float = 0.1
    k: int = 2
    t_max: float = 1.0
    output_interval: float = 0.0
    snapshot_interval: float = 0.0
    gauges: list = field(default_factory=list)
    sponges: list = field(default_factory=list)
    options: dict = field(default_factory=dict)
    output_dir: str = "output"
    source: str = ""

    # ------------------------------------------------------------------
    def build_mesh(self):
        m = self.mesh
        kind = m.get("type", "rectangle")
        sides = {s: m[s] for s in ("left", "right", "bottom", "top") if s in m}
        tags, periodic = {}, set()
        for side, kind_name in sides.items():
            if kind_name == "periodic":
                periodic.add("x" if side in ("left", "right") else "y")
            else:
                tags[side] = kind_name
        for axis, pair in (("x", ("left", "right")), ("y", ("bottom", "top"))):
            if axis in periodic and any(sides.get(s) != "periodic" for s in pair):
                raise ConfigError(f"periodic {axis}: both {pair[0]} and {pair[1]} must be periodic")
        try:
            if kind == "file":
                return load_mesh(m["path"], periodic=sorted(periodic))
            box = [float(m[key]) for key in ("x0", "x1", "y0", "y1")]
            if kind == "rectangle":
                return rectangle_mesh(*box, int(m["nx"]), int(m["ny"]), diagonal=m.get("diagonal", "alternate"),
                                      tags=tags, periodic=sorted(periodic))
            if kind == "delaunay":
                return delaunay_rectangle_mesh(*box, float(m["h"]), jitter=float(m.get("jitter", 0.3)),
                                               seed=int(m.get("seed", 0)), tags=tags, periodic=sorted(periodic))
        except KeyError as exc:
            raise ConfigError(f"mesh section misses key {exc}") from None
        raise ConfigError(f"unknown mesh type {kind!r}")

    def build_layers(self):
        layers = []
        for sp in self.sponges:
            mode = sp.get("mode", "absorb")
            axis = {"x": 0, "y": 1}[sp.get("axis", "x")]
            inner, outer = float(sp["inner"]), float(sp["outer"])
            target = None
            eta_rest = float(sp.get("eta_rest", self.initial_params.get("eta_rest", self.h0)))
            if mode == "generate":
                wave = sp.get("wave", "monochromatic")
                if wave == "monochromatic":
                    target = MonochromaticWave(amplitude=float(sp["a"]), period=float(sp["T"]),
                                               h0=float(sp.get("h0", self.h0)), eta_rest=eta_rest,
                                               x_ref=inner, direction=1.0 if outer < inner else -1.0,
                                               t_ramp=float(sp.get("ramp", 0.0)), alpha=self.alpha, g=self.g)
                elif wave == "solitary":
                    target = SolitaryWave(eps=float(sp["eps"]), h0=float(sp.get("h0", self.h0)),
                                          x0=float(sp["x0"]), g=self.g)
                else:
                    raise ConfigError(f"unknown generated wave {wave!r}")
            layers.append(SpongeLayer(axis=axis, inner=inner, outer=outer, mode=mode, target=target,
                                      eta_rest=eta_rest, name=sp.get("name", "")))
        return layers

    def solver_options(self):
        o = self.options
        return SolverOptions(
            g=self.g, alpha=self.alpha,
            dispersive=_bool(o.get("dispersive", "on")),
            slope_limiter=_bool(o.get("slope", "on")),
            breaking=_bool(o.get("breaking", "on")),
            positivity=_bool(o.get("positivity", "on")),
            cfl_safety=float(o.get("cfl", 0.9)),
            dry_tol=float(o.get("dry_tol", 1e-6)),
            vel_guard=float(o["vel_guard"]) if "vel_guard" in o else None,
            detector_min_depth=float(o.get("detector_min_depth", 0.0)),
            rk_order=int(o["rk_order"]) if "rk_order" in o else None,
            fixed_dt=float(o["dt"]) if "dt" in o else None,
        )

    def build(self, mesh=None):
        """Mesh, space, bathymetry and a ready-to-run Simulation."""
        mesh = mesh or self.build_mesh()
        space = DGSpace(mesh, self.k)
        bfun = make_bathymetry_function(self.bathymetry, self.bathymetry_params)
        bathy = make_bathymetry(space, bfun, h0=self.h0, eps0=self.eps0)
        W0 = initial_state(self.initial, space, bathy, {"eta_rest": self.h0, **self.initial_params}, g=self.g)
        return Simulation(space, bathy, W0, options=self.solver_options(), layers=self.build_layers(),
                          gauges=self.gauges)


def parse_overrides(items):
    """'section.key=value' strings into a nested dict."""
    out = {}
    for item in items or ():
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override must look like section.key=value, got {item!r}")
        lhs, value = item.split("=", 1)
        section, key = lhs.rsplit(".", 1)
        out.setdefault(section.strip(), {})[key.strip()] = value.strip()
    return out


def load_scenario(path, overrides=None):
    """Read an INI scenario file; ``overrides`` = list of 'section.key=value'."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        cp.read(path)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    for section, kv in parse_overrides(overrides).items():
        if not cp.has_section(section):
            cp.add_section(section)
        for k_, v in kv.items():
            cp.set(section, k_, v)
    return scenario_from_config(cp, source=str(path))


def scenario_from_config(cp, source=""):
    def sec(name):
        return dict(cp.items(name)) if cp.has_section(name) else {}

    s = sec("scenario")
    phys = sec("physics")
    disc = sec("discretization")
    tm = sec("time")
    try:
        gauges = []
        text = sec("gauges").get("points", "")
        for chunk in filter(None, (c.strip() for c in text.split(";"))):
            xy = _floats(chunk)
            if len(xy) != 2:
                raise ConfigError(f"gauge needs two coordinates: {chunk!r}")
            gauges.append(tuple(xy))
        sponges = []
        for name in cp.sections():
            if name.startswith("sponge"):
                d = sec(name)
                d.setdefault("name", name)
                for key in ("inner", "outer"):
                    if key not in d:
                        raise ConfigError(f"[{name}] misses {key!r}")
                sponges.append(d)
        sc = Scenario(
            name=s.get("name", Path(source).stem or "scenario"),
            mesh=sec("mesh"),
            bathymetry=s.get("bathymetry", "flat"),
            bathymetry_params=sec("bathymetry"),
            initial=s.get("initial", "rest"),
            initial_params=sec("initial"),
            h0=float(phys.get("h0", 1.0)),
            g=float(phys.get("g", G)),
            alpha=float(phys.get("alpha", 1.159)),
            eps0=float(phys.get("eps0", 0.1 * float(phys.get("h0", 1.0)))),
            k=int(disc.get("k", 2)),
            t_max=float(tm.get("t_max", 1.0)),
            output_interval=float(tm.get("output_interval", 0.0)),
            snapshot_interval=float(tm.get("snapshot_interval", 0.0)),
            gauges=gauges,
            sponges=sponges,
            options={**sec("limiters"), **{k_: v for k_, v in disc.items() if k_ in ("cfl", "rk_order", "dt")},
                     **{k_: v for k_, v in phys.items() if k_ in ("dispersive", "dry_tol", "vel_guard")}},
            output_dir=sec("output").get("dir", "output"),
            source=source,
        )
    except (ValueError, KeyError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid configuration value: {exc}") from None
    # relative file paths are taken relative to the configuration file
    base = Path(source).parent if source else None
    for d in (sc.mesh, sc.bathymetry_params):
        if base is not None and "path" in d and not Path(d["path"]).is_absolute():
            d["path"] = str(base / d["path"])
    if not 1 <= sc.k <= 4:
        raise ConfigError(f"polynomial degree k={sc.k} outside 1..4")
    if sc.t_max <= 0:
        raise ConfigError("t_max must be positive")
    if sc.h0 <= 0 or sc.eps0 <= 0:
        raise ConfigError("h0 and eps0 must be positive")
    return sc


__all__ = ["Scenario", "ConfigError", "load_scenario", "initial_state", "make_bathymetry_function",
           "bump_hollow", "plane_beach", "trapezoidal_bar", "elliptic_shoal", "gridded_bathymetry",
           "synolakis_layout", "soliton_parameters"]
