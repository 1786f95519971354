"""Simple rectangle mesh generators used for scenarios and tests."""
from __future__ import annotations

import numpy as np
from scipy.spatial import Delaunay

from .mesh import build_mesh


def _side_tags(vertices, elements, tags, x0, x1, y0, y1, tol=1e-9):
    """Map boundary edges on rectangle sides to group names.

    ``tags`` maps side names (left, right, bottom, top) to group names.
    """
    if not tags:
        return {}
    edges = np.stack([elements, np.roll(elements, -1, axis=1)], axis=-1).reshape(-1, 2)
    key = np.sort(edges, axis=1)
    uniq, counts = np.unique(key, axis=0, return_counts=True)
    out = {}
    for a, b in uniq[counts == 1]:
        pa, pb = vertices[a], vertices[b]
        for side, name in tags.items():
            if side == "left":
                hit = abs(pa[0] - x0) < tol and abs(pb[0] - x0) < tol
            elif side == "right":
                hit = abs(pa[0] - x1) < tol and abs(pb[0] - x1) < tol
            elif side == "bottom":
                hit = abs(pa[1] - y0) < tol and abs(pb[1] - y0) < tol
            elif side == "top":
                hit = abs(pa[1] - y1) < tol and abs(pb[1] - y1) < tol
            else:
                raise ValueError(f"unknown side {side!r}")
            if hit:
                out[(int(a), int(b))] = name
    return out


def rectangle_mesh(x0, x1, y0, y1, nx, ny, diagonal="alternate", tags=None, periodic=None):
    """Regular triangulation of a rectangle from nx x ny cells, two triangles each.

    diagonal : "right" (all cells split along the same diagonal) or "alternate".
    """
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    verts = np.column_stack([X.ravel(), Y.ravel()])
    i, j = np.meshgrid(np.arange(nx), np.arange(ny), indexing="xy")
    i, j = i.ravel(), j.ravel()
    v00 = j * (nx + 1) + i
    v10 = v00 + 1
    v01 = v00 + nx + 1
    v11 = v01 + 1
    if diagonal == "right":
        flip = np.zeros_like(i, dtype=bool)
    elif diagonal == "alternate":
        flip = (i + j) % 2 == 1
    else:
        raise ValueError(f"unknown diagonal pattern {diagonal!r}")
    t1 = np.where(flip[:, None], np.column_stack([v00, v10, v11]), np.column_stack([v00, v10, v01]))
    t2 = np.where(flip[:, None], np.column_stack([v00, v11, v01]), np.column_stack([v10, v11, v01]))
    elems = np.empty((2 * len(i), 3), dtype=np.int64)
    elems[0::2] = t1
    elems[1::2] = t2
    btags = _side_tags(verts, elems, tags, x0, x1, y0, y1)
    return build_mesh(verts, elems, btags, periodic=periodic)


def delaunay_rectangle_mesh(x0, x1, y0, y1, h, jitter=0.3, seed=0, tags=None, periodic=None):
    """Unstructured Delaunay mesh of a rectangle with target edge length h.

    Interior points are a jittered triangular lattice; boundary points are
    evenly spaced so opposite sides match (periodic pairing works).
    """
    rng = np.random.default_rng(seed)
    nx = max(1, int(round((x1 - x0) / h)))
    ny = max(1, int(round((y1 - y0) / (h * np.sqrt(3) / 2))))
    bx = np.linspace(x0, x1, nx + 1)
    by = np.linspace(y0, y1, ny + 1)
    pts = [np.column_stack([bx, np.full_like(bx, y0)]),
           np.column_stack([bx, np.full_like(bx, y1)]),
           np.column_stack([np.full(ny - 1, x0), by[1:-1]]),
           np.column_stack([np.full(ny - 1, x1), by[1:-1]])]
    dx = (x1 - x0) / nx
    dy = (y1 - y0) / ny
    interior = []
    for j in range(1, ny):
        shift = 0.5 * dx if j % 2 else 0.0
        xs = x0 + shift + dx * np.arange(nx + 1)
        xs = xs[(xs > x0 + 0.25 * dx) & (xs < x1 - 0.25 * dx)]
        if shift and len(xs):
            # half-offset rows: keep the end points 0.75 dx from the sides to avoid short faces
            xs[0], xs[-1] = max(xs[0], x0 + 0.75 * dx), min(xs[-1], x1 - 0.75 * dx)
        interior.append(np.column_stack([xs, np.full_like(xs, y0 + j * dy)]))
    inner = np.concatenate(interior) if interior else np.zeros((0, 2))
    inner = inner + jitter * min(dx, dy) * rng.uniform(-0.5, 0.5, size=inner.shape)
    verts = np.concatenate(pts + [inner])
    tri = Delaunay(verts)
    elems = tri.simplices.astype(np.int64)
    v = verts[elems]
    area = 0.5 * ((v[:, 1, 0] - v[:, 0, 0]) * (v[:, 2, 1] - v[:, 0, 1])
                  - (v[:, 2, 0] - v[:, 0, 0]) * (v[:, 1, 1] - v[:, 0, 1]))
    elems[area < 0] = elems[area < 0][:, [0, 2, 1]]
    keep = np.abs(area) > 1e-12 * h * h
    elems = elems[keep]
    used = np.unique(elems)
    remap = -np.ones(len(verts), dtype=np.int64)
    remap[used] = np.arange(len(used))
    verts = verts[used]
    elems = remap[elems]
    btags = _side_tags(verts, elems, tags, x0, x1, y0, y1)
    return build_mesh(verts, elems, btags, periodic=periodic)
