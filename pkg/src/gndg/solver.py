"""Time loop of the dispersive solver: residual, limiters, sponges and gauges."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .boundary import apply_sponge
from .dispersive import bathymetry_derivatives, compute_dispersive_correction
from .elliptic import assemble_diff_matrices, assemble_elliptic_operator
from .limiters import maxmod_slope_limiter, positivity_limiter, troubled_cell_indicator
from .swe import G, NumericalAbort, max_wave_speed, swe_residual
from .timestepping import TimeControls, compute_dt, ssp_rk_step

log = logging.getLogger("gndg")


@dataclass
class SolverOptions:
    g: float = G
    alpha: float = 1.159
    dispersive: bool = True
    slope_limiter: bool = True
    breaking: bool = True
    positivity: bool = True
    cfl_safety: float = 0.9
    dry_tol: float = 1e-6
    vel_guard: float | None = None
    detector_min_depth: float = 0.0
    rk_order: int | None = None
    fixed_dt: float | None = None


@dataclass
class GaugeSeries:
    """Samples of (eta, qx, qy) at one fixed point."""

    position: tuple
    t: list = field(default_factory=list)
    eta: list = field(default_factory=list)
    qx: list = field(default_factory=list)
    qy: list = field(default_factory=list)

    def arrays(self):
        return (np.asarray(self.t), np.asarray(self.eta), np.asarray(self.qx), np.asarray(self.qy))


@dataclass
class StepRecord:
    t: float
    dt: float
    min_hbar: float
    n_troubled: int
    a: float


class Simulation:
    """Semi-discrete GN/NSW model on a DGSpace with explicit SSP-RK stepping.

    Parameters
    ----------
    space : DGSpace
    bathy : Bathymetry
    W0 : (3, K, Np) initial state (limited before the first step)
    options : SolverOptions
    layers : list of SpongeLayer (bound to ``space`` here)
    gauges : sequence of (x, y) points
    """

    def __init__(self, space, bathy, W0, options=None, layers=(), gauges=(), t0=0.0):
        self.space = space
        self.bathy = bathy
        self.opt = options or SolverOptions()
        self.k = space.k
        self.order = self.opt.rk_order or TimeControls.default_order(space.k)
        self.layers = [ly.bind(space) for ly in layers]
        # depth guard of velocity divisions and of the post-limiting velocity cut-off
        self.h_guard = bathy.eps0 if self.opt.vel_guard is None else self.opt.vel_guard
        self.t = float(t0)
        self.n_steps = 0
        self.history: list[StepRecord] = []
        self.first_breaking_time = None
        self.timings = dict(residual=0.0, dispersive=0.0, limiter=0.0, setup=0.0)
        t_setup = time.perf_counter()
        self.diff = None
        self.system = None
        if self.opt.dispersive:
            self.diff = assemble_diff_matrices(space)
            self.system = assemble_elliptic_operator(space, bathy.Hb, bathy.gradHb, self.opt.alpha, diff=self.diff)
            self.bd = bathymetry_derivatives(bathy, self.diff)
        self.timings["setup"] = time.perf_counter() - t_setup
        self.mask = np.zeros(space.K, dtype=bool)
        self.last_Dc = np.zeros((2, space.K, space.Np))
        self._a = None
        self.gauges = [GaugeSeries(position=tuple(map(float, p))) for p in gauges]
        if self.gauges:
            self._gauge_el, self._gauge_rows = space.point_evaluator(np.array([g.position for g in self.gauges]))
        self.W = self.limit(np.array(W0, dtype=float))
        self.sample_gauges()

    # ---------------------------------------------------------------- stages
    def limit(self, W):
        """Troubled-cell detection, maxmod on troubled cells, then positivity scaling."""
        t0 = time.perf_counter()
        if self.opt.slope_limiter or self.opt.breaking:
            ind = troubled_cell_indicator(W, self.bathy, self.space, min_depth=self.opt.detector_min_depth)
            troubled = ind >= 1.0
        else:
            troubled = np.zeros(self.space.K, dtype=bool)
        if self.opt.slope_limiter and np.any(troubled):
            W = maxmod_slope_limiter(W, self.bathy, self.space, troubled)
        if self.opt.positivity:
            W, rep = positivity_limiter(W, self.bathy, self.space,
                                        dry_tol=max(self.opt.dry_tol, self.h_guard))
        self.mask = troubled if self.opt.breaking else np.zeros_like(troubled)
        self.timings["limiter"] += time.perf_counter() - t0
        return W

    def dispersive_correction(self, W):
        if not self.opt.dispersive:
            return None
        t0 = time.perf_counter()
        Dc = compute_dispersive_correction(W, self.bathy, self.system, self.diff, self.bd,
                                           mask=self.mask, g=self.opt.g)
        self.last_Dc = Dc
        self.timings["dispersive"] += time.perf_counter() - t0
        return Dc

    def rhs(self, W):
        Dc = self.dispersive_correction(W)
        t0 = time.perf_counter()
        r = swe_residual(W, self.bathy, self.space, self._a, Dc=Dc, g=self.opt.g, h_guard=self.h_guard)
        self.timings["residual"] += time.perf_counter() - t0
        return r

    # ------------------------------------------------------------------ step
    def stable_dt(self, cap=np.inf):
        ctx = max_wave_speed(self.W, self.bathy, self.space, g=self.opt.g, dry_tol=self.opt.dry_tol,
                             h_guard=self.h_guard)
        self._a = ctx.a
        if self.opt.fixed_dt is not None:
            return min(self.opt.fixed_dt, cap)
        return compute_dt(ctx, self.space.mesh, self.k, safety=self.opt.cfl_safety, cap=cap)

    def step(self, cap=np.inf):
        dt = self.stable_dt(cap)
        if not np.isfinite(dt) or dt <= 0.0:
            raise NumericalAbort(f"invalid time step {dt} at t={self.t}")
        W = ssp_rk_step(self.W, self.rhs, dt, self.order, limiter=self.limit)
        if self.layers:
            W = apply_sponge(W, self.layers, self.t + dt, self.bathy)
            W = self.limit(W)
        self.W = W
        self.t += dt
        self.n_steps += 1
        hbar = self.space.cell_mean(W[0] - self.bathy.b)
        n_tr = int(self.mask.sum())
        if n_tr and self.first_breaking_time is None:
            self.first_breaking_time = self.t
        self.history.append(StepRecord(t=self.t, dt=dt, min_hbar=float(hbar.min()), n_troubled=n_tr, a=self._a))
        log.debug("t=%.6f dt=%.3e min_hbar=%.3e troubled=%d a=%.4f", self.t, dt, hbar.min(), n_tr, self._a)
        self.sample_gauges()
        return dt

    def run(self, t_end, callback=None, event_times=(), wall_budget=None):
        """Advance to t_end, landing exactly on t_end and on every event time.

        ``callback(sim)`` runs after each step. Returns False when the wall
        clock budget (seconds) ran out first.
        """
        events = sorted(t for t in event_times if self.t < t < t_end) + [t_end]
        t_start = time.perf_counter()
        for te in events:
            while self.t < te - 1e-12 * max(1.0, abs(te)):
                self.step(cap=te - self.t)
                if callback is not None:
                    callback(self)
                if wall_budget is not None and time.perf_counter() - t_start > wall_budget:
                    return False
        return True

    # --------------------------------------------------------------- outputs
    def sample_gauges(self):
        if not self.gauges:
            return
        vals = np.einsum("gi,cgi->cg", self._gauge_rows, self.W[:, self._gauge_el, :])
        for i, gs in enumerate(self.gauges):
            gs.t.append(self.t)
            gs.eta.append(vals[0, i])
            gs.qx.append(vals[1, i])
            gs.qy.append(vals[2, i])

    def mass(self):
        return self.space.integrate(self.W[0] - self.bathy.b)

    def depth(self):
        return self.W[0] - self.bathy.b
