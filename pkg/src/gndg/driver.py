"""Scenario runs and convergence studies with on-disk artifacts."""
from __future__ import annotations

import logging
import time
from pathlib import Path

import numpy as np

from .analysis import convergence_rate, transfer_error
from .output import format_summary, save_restart, write_gauges, write_history, write_vtk
from .swe import NumericalAbort
from .waves import soliton_state

log = logging.getLogger("gndg")


def run_scenario(scenario, out_dir=None, write_snapshots=True, wall_budget=None):
    """Run a Scenario to t_max and write gauges, snapshots, history and summary.

    Returns (simulation, summary dict). On NumericalAbort the last state is
    dumped to ``abort_state.npz`` and the exception is re-raised.
    """
    out = Path(out_dir or scenario.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    sim = scenario.build()
    mass0 = sim.mass()
    events = []
    if write_snapshots and scenario.snapshot_interval > 0:
        events = list(np.arange(scenario.snapshot_interval, scenario.t_max, scenario.snapshot_interval))
    snap_index = [0]

    def snapshot(s):
        write_vtk(out / f"snapshot_{snap_index[0]:04d}.vtk", s)
        snap_index[0] += 1

    if write_snapshots:
        snapshot(sim)
    pending = list(events)

    def callback(s):
        while pending and s.t >= pending[0] - 1e-12:
            pending.pop(0)
            snapshot(s)
        if s.n_steps % 100 == 0:
            r = s.history[-1]
            log.info("step %d t=%.5f dt=%.3e min_hbar=%.3e troubled=%d a=%.4f",
                     s.n_steps, r.t, r.dt, r.min_hbar, r.n_troubled, r.a)

    completed = True
    try:
        completed = sim.run(scenario.t_max, callback=callback, event_times=events, wall_budget=wall_budget)
    except NumericalAbort:
        np.savez_compressed(out / "abort_state.npz", W=sim.W, t=sim.t)
        write_history(out / "history.csv", sim.history)
        raise
    if write_snapshots:
        snapshot(sim)
    every = 1
    if scenario.output_interval > 0 and sim.history:
        mean_dt = np.mean([r.dt for r in sim.history])
        every = max(1, int(round(scenario.output_interval / mean_dt)))
    write_gauges(out / "gauges", sim.gauges, every=every)
    write_history(out / "history.csv", sim.history)
    save_restart(out / "restart.npz", sim)
    mass1 = sim.mass()
    h = sim.depth()
    summary = {
        "scenario": scenario.name,
        "completed": completed,
        "k": sim.k,
        "elements": sim.space.K,
        "t_final": sim.t,
        "steps": sim.n_steps,
        "mass_initial": mass0,
        "mass_final": mass1,
        "mass_drift_relative": abs(mass1 - mass0) / max(abs(mass0), 1e-300),
        "min_cell_mean_depth": min((r.min_hbar for r in sim.history), default=float(np.nan)),
        "min_nodal_depth_final": float(h.min()),
        "max_troubled": max((r.n_troubled for r in sim.history), default=0),
        "first_breaking_time": sim.first_breaking_time,
        "eta_l2_deviation_from_rest": sim.space.broken_l2(sim.W[0] - scenario.h0),
        "qx_l2": sim.space.broken_l2(sim.W[1]),
        "qy_l2": sim.space.broken_l2(sim.W[2]),
        "max_abs_Dc": float(np.abs(sim.last_Dc).max()),
        "wall_seconds": time.perf_counter() - t0,
        **{f"time_{k_}": v for k_, v in sim.timings.items()},
    }
    (out / "summary.txt").write_text(format_summary(summary))
    return sim, summary


def soliton_errors(sim, eps, h0, x0):
    """Broken L2 errors of (eta, q) against the exact solitary wave at sim.t."""
    ref = lambda x, y: soliton_state(eps, h0, x0, sim.t, x, y, sim.opt.g)
    e_eta = sim.space.broken_l2(sim.W[0], lambda x, y: ref(x, y)[0])
    e_qx = sim.space.broken_l2(sim.W[1], lambda x, y: ref(x, y)[1])
    e_qy = sim.space.broken_l2(sim.W[2])
    return e_eta, float(np.hypot(e_qx, e_qy))


def convergence_study(make_scenario, levels, degrees, reference, t_end, callback=None):
    """Errors and regression slopes against a fine reference solution.

    make_scenario(n, k) -> Scenario on the level-n mesh; ``levels`` are mesh
    parameters with mesh size dx = levels[i][1]; ``reference`` = (n, k).
    Returns (table, rates): table[(k)] = dict(dx, eta, q); rates[(var, k)] = RateFit.
    """
    ref_sc = make_scenario(*reference)
    ref_sim = ref_sc.build()
    ref_sim.run(t_end)
    if callback:
        callback("reference", reference, ref_sim)
    table, rates = {}, {}
    for k in degrees:
        rows = dict(dx=[], eta=[], q=[])
        for n, dx in levels:
            sim = make_scenario(n, k).build()
            sim.run(t_end)
            e_eta = transfer_error(sim.W[0], sim.space, ref_sim.W[0], ref_sim.space)
            e_qx = transfer_error(sim.W[1], sim.space, ref_sim.W[1], ref_sim.space)
            e_qy = transfer_error(sim.W[2], sim.space, ref_sim.W[2], ref_sim.space)
            rows["dx"].append(dx)
            rows["eta"].append(e_eta)
            rows["q"].append(float(np.hypot(e_qx, e_qy)))
            if callback:
                callback("level", (n, k), sim)
        table[k] = rows
        rates[("eta", k)] = convergence_rate(rows["dx"], rows["eta"])
        rates[("q", k)] = convergence_rate(rows["dx"], rows["q"])
    return table, rates
