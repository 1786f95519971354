"""Writers for snapshots (VTK legacy), gauge CSVs, run summaries and restarts."""
from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np

from .basis import reference_element

_VERTEX_RS = np.array([[-1.0, -1.0], [1.0, -1.0], [-1.0, 1.0]])


def _vertex_values(u, k):
    """Values of nodal fields at the three element vertices, shape (..., K, 3)."""
    return u @ reference_element(k).basis_at(_VERTEX_RS).T


def write_vtk(path, sim, extra=None):
    """VTK legacy ASCII unstructured grid with discontinuous linear cells.

    Point data: eta, h, qx, qy, Dc (vector); cell data: troubled flag.
    """
    space = sim.space
    mesh = space.mesh
    K, k = space.K, space.k
    pts = mesh.vertices[mesh.elements].reshape(-1, 2)
    W = sim.W
    fields = {
        "eta": _vertex_values(W[0], k),
        "h": _vertex_values(W[0] - sim.bathy.b, k),
        "qx": _vertex_values(W[1], k),
        "qy": _vertex_values(W[2], k),
        "b": _vertex_values(sim.bathy.b, k),
    }
    for name, val in (extra or {}).items():
        fields[name] = _vertex_values(val, k)
    Dc = _vertex_values(sim.last_Dc, k)
    lines = ["# vtk DataFile Version 3.0", f"gndg t={sim.t:.9g}", "ASCII", "DATASET UNSTRUCTURED_GRID",
             f"POINTS {3 * K} double"]
    lines += [f"{x:.12g} {y:.12g} 0" for x, y in pts]
    lines.append(f"CELLS {K} {4 * K}")
    lines += [f"3 {3 * e} {3 * e + 1} {3 * e + 2}" for e in range(K)]
    lines.append(f"CELL_TYPES {K}")
    lines += ["5"] * K
    lines.append(f"POINT_DATA {3 * K}")
    for name, val in fields.items():
        lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
        lines += [f"{v:.12g}" for v in val.ravel()]
    lines.append("VECTORS Dc double")
    lines += [f"{a:.12g} {b:.12g} 0" for a, b in zip(Dc[0].ravel(), Dc[1].ravel())]
    lines += [f"CELL_DATA {K}", "SCALARS troubled int 1", "LOOKUP_TABLE default"]
    lines += [str(int(v)) for v in sim.mask]
    Path(path).write_text("\n".join(lines) + "\n")


def write_gauges(directory, gauges, every=1):
    """One CSV per gauge with columns t, eta, qx, qy (every ``every``-th sample)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, gs in enumerate(gauges):
        t, eta, qx, qy = gs.arrays()
        sel = slice(None, None, max(1, int(every)))
        data = np.column_stack([t[sel], eta[sel], qx[sel], qy[sel]])
        p = directory / f"gauge_{i:02d}.csv"
        header = f"# x={gs.position[0]:.9g} y={gs.position[1]:.9g}\nt,eta,qx,qy"
        np.savetxt(p, data, delimiter=",", header=header, comments="", fmt="%.12g")
        paths.append(p)
    return paths


def read_gauge(path):
    data = np.loadtxt(path, delimiter=",", skiprows=2, ndmin=2)
    return data[:, 0], data[:, 1], data[:, 2], data[:, 3]


def write_history(path, history):
    data = np.array([[r.t, r.dt, r.min_hbar, r.n_troubled, r.a] for r in history]).reshape(-1, 5)
    np.savetxt(path, data, delimiter=",", header="t,dt,min_hbar,troubled,a", comments="", fmt="%.12g")


def format_summary(items):
    """Plain-text key: value summary (one JSON-like object)."""
    out = ["{"]
    keys = list(items)
    for i, key in enumerate(keys):
        v = items[key]
        if isinstance(v, float):
            s = f"{v:.9g}"
        elif isinstance(v, (bool, np.bool_)):
            s = "true" if v else "false"
        elif isinstance(v, (int, np.integer)):
            s = str(int(v))
        elif v is None:
            s = "null"
        else:
            s = '"' + str(v).replace('"', "'") + '"'
        out.append(f'  "{key}": {s}' + ("," if i < len(keys) - 1 else ""))
    out.append("}")
    return "\n".join(out) + "\n"


def mesh_fingerprint(mesh):
    h = hashlib.sha1()
    h.update(np.ascontiguousarray(mesh.vertices).tobytes())
    h.update(np.ascontiguousarray(mesh.elements).tobytes())
    return h.hexdigest()


def save_restart(path, sim):
    """State, time, step count and a mesh fingerprint in a compressed npz."""
    np.savez_compressed(path, W=sim.W, t=sim.t, n_steps=sim.n_steps, k=sim.k,
                        fingerprint=mesh_fingerprint(sim.space.mesh))


def load_restart(path, sim):
    """Restore a state saved by ``save_restart`` into a compatible simulation."""
    d = np.load(path, allow_pickle=False)
    if int(d["k"]) != sim.k or str(d["fingerprint"]) != mesh_fingerprint(sim.space.mesh):
        raise ValueError("restart file does not match this mesh / polynomial degree")
    sim.W = np.array(d["W"])
    sim.t = float(d["t"])
    sim.n_steps = int(d["n_steps"])
    for gs in sim.gauges:
        gs.t.clear(), gs.eta.clear(), gs.qx.clear(), gs.qy.clear()
    sim.sample_gauges()
    return sim
