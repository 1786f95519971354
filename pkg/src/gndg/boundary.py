"""Boundary ghost traces and sponge layers for wave generation and absorption."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mesh import OPEN, PERIODIC, WALL
from .swe import ghost_wall
from .waves import RestState

KINDS = {"wall": WALL, "periodic": PERIODIC, "open": OPEN}


class UnpairedPeriodicFace(ValueError):
    pass


def ghost_trace(Wm, bm, nx, ny, kind, partner=None):
    """Exterior state (W+, b+) at a boundary face node.

    kind : "wall" (mirror normal discharge), "periodic" (``partner`` = (W, b)
    from the paired face) or "open" (copy).
    """
    kind = KINDS.get(kind, kind)
    Wm = np.asarray(Wm, dtype=float)
    if kind == WALL:
        return ghost_wall(Wm, nx, ny), np.array(bm, dtype=float, copy=True)
    if kind == PERIODIC:
        if partner is None:
            raise UnpairedPeriodicFace("periodic face without a partner trace")
        Wp, bp = partner
        return np.array(Wp, dtype=float, copy=True), np.array(bp, dtype=float, copy=True)
    if kind == OPEN:
        return Wm.copy(), np.array(bm, dtype=float, copy=True)
    raise ValueError(f"unknown boundary kind {kind!r}")


def relaxation_profile(s):
    """Blend weight at relative depth s in [0, 1] (0 at the inner edge, 1 at the outer boundary)."""
    s = np.clip(s, 0.0, 1.0)
    return (np.exp(s ** 3.5) - 1.0) / (np.e - 1.0)


@dataclass(eq=False)
class SpongeLayer:
    """Axis-aligned relaxation band from ``inner`` to ``outer`` along ``axis``.

    mode : "absorb" relaxes to ``target`` (default the rest state at
    ``eta_rest``); "generate" relaxes to the analytic incident wave ``target``.
    """

    axis: int
    inner: float
    outer: float
    mode: str = "absorb"
    target: object = None
    eta_rest: float = 0.0
    name: str = ""
    coeff: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.axis not in (0, 1):
            raise ValueError("axis must be 0 (x) or 1 (y)")
        if self.width <= 0.0:
            raise ValueError("sponge width must be positive")
        if self.mode not in ("absorb", "generate"):
            raise ValueError(f"unknown sponge mode {self.mode!r}")
        if self.target is None:
            if self.mode == "generate":
                raise ValueError("a generating layer needs a target wave")
            self.target = RestState(self.eta_rest)

    @property
    def width(self):
        return abs(self.outer - self.inner)

    def relative_depth(self, x, y):
        """0 at the inner edge, 1 at the outer edge, negative outside the band (interior side)."""
        coord = x if self.axis == 0 else y
        return (coord - self.inner) / (self.outer - self.inner)

    def coefficient(self, x, y):
        s = self.relative_depth(x, y)
        return np.where(s > 0.0, relaxation_profile(s), 0.0)

    def bind(self, space):
        """Precompute nodal blend weights on a DG space."""
        self.coeff = self.coefficient(space.x, space.y)
        self._nodes = (space.x, space.y)
        self._active = np.flatnonzero(np.any(self.coeff > 0.0, axis=1))
        return self


def apply_sponge(W, layers, t, bathy=None):
    """Nodal relaxation W <- (1 - c) W + c W_target in each bound layer.

    Elements outside every layer are untouched. Target depths below the bed
    are raised to the bed when ``bathy`` is given.
    """
    if not layers:
        return W
    W = np.array(W, dtype=float, copy=True)
    for layer in layers:
        if layer.coeff is None:
            raise RuntimeError("sponge layer not bound to a discretization")
        e = layer._active
        if e.size == 0:
            continue
        x, y = layer._nodes
        tgt = layer.target(x[e], y[e], t)
        if bathy is not None:
            tgt[0] = np.maximum(tgt[0], bathy.b[e])
        c = layer.coeff[e]
        W[:, e] = (1.0 - c) * W[:, e] + c * tgt
    return W
