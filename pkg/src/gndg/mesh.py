"""Conforming triangular meshes: loading, connectivity, geometry and validation."""
from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

# boundary condition codes stored per (element, local face)
INTERIOR, WALL, PERIODIC, OPEN = 0, 1, 2, 3

BOUNDARY_KINDS = {
    "wall": WALL,
    "periodic-x": PERIODIC,
    "periodic-y": PERIODIC,
    "generation": OPEN,
    "absorption": OPEN,
    "open": OPEN,
}

PERIODIC_MATCH_TOL = 1e-9


class MeshError(ValueError):
    """Raised for unreadable or invalid mesh input."""


@dataclass(eq=False)
class Mesh:
    """Immutable conforming triangulation with DG connectivity.

    ``neighbor[e, f]`` is the element across local face f (the periodic partner
    for periodic faces) or -1 on a physical boundary; ``neighbor_face`` is the
    matching local face index.  ``bc[e, f]`` holds INTERIOR/WALL/PERIODIC/OPEN.
    """

    vertices: np.ndarray
    elements: np.ndarray
    neighbor: np.ndarray
    neighbor_face: np.ndarray
    bc: np.ndarray
    boundary_tag: dict = field(repr=False)
    periodic_offset: np.ndarray = field(repr=False)  # partner position minus own, per (e, f)
    area: np.ndarray = field(repr=False)
    perimeter: np.ndarray = field(repr=False)
    diameter: np.ndarray = field(repr=False)
    face_length: np.ndarray = field(repr=False)
    normals: np.ndarray = field(repr=False)
    faces: np.ndarray = field(repr=False)          # (Nf, 2) vertex pairs
    face_elements: np.ndarray = field(repr=False)  # (Nf, 2, 2): (elem, local face) left/right, -1 if none

    @property
    def n_elements(self):
        return self.elements.shape[0]

    @property
    def n_faces(self):
        return self.faces.shape[0]

    @property
    def interior_faces(self):
        return np.flatnonzero(self.face_elements[:, 1, 0] >= 0)

    @property
    def boundary_faces(self):
        return np.flatnonzero(self.face_elements[:, 1, 0] < 0)

    @property
    def centroids(self):
        return self.vertices[self.elements].mean(axis=1)

    @property
    def h(self):
        """Mesh size: largest element diameter."""
        return float(self.diameter.max())

    def element_vertices(self, e=None):
        if e is None:
            return self.vertices[self.elements]
        return self.vertices[self.elements[e]]

    def face_midpoints(self):
        v = self.vertices[self.elements]
        return 0.5 * (v + np.roll(v, -1, axis=1))

    def bounding_box(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)


# ---------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------

def _geometry(vertices, elements):
    v = vertices[elements]                      # (K, 3, 2)
    d = np.roll(v, -1, axis=1) - v              # edge f: v[f] -> v[f+1]
    length = np.hypot(d[..., 0], d[..., 1])
    area = 0.5 * ((v[:, 1, 0] - v[:, 0, 0]) * (v[:, 2, 1] - v[:, 0, 1])
                  - (v[:, 2, 0] - v[:, 0, 0]) * (v[:, 1, 1] - v[:, 0, 1]))
    with np.errstate(invalid="ignore", divide="ignore"):
        normals = np.stack([d[..., 1], -d[..., 0]], axis=-1) / length[..., None]
    return area, length, normals


def build_mesh(vertices, elements, boundary_tags=None, periodic=None, check=True):
    """Create a Mesh from vertex coordinates and CCW vertex triples.

    Parameters
    ----------
    boundary_tags : dict mapping sorted vertex pair -> group name, optional
        Untagged boundary faces default to ``wall``.
    periodic : iterable of {"x", "y"}, optional
        Pair boundary faces on opposite sides of the bounding box. Faces tagged
        ``periodic-x``/``periodic-y`` are paired regardless.
    check : bool
        Reject non-positive areas and non-conforming input.
    """
    vertices = np.ascontiguousarray(vertices, dtype=float)
    elements = np.ascontiguousarray(elements, dtype=np.int64)
    if vertices.ndim != 2 or vertices.shape[1] != 2:
        raise MeshError("vertices must have shape (Nv, 2)")
    if elements.ndim != 2 or elements.shape[1] != 3:
        raise MeshError("elements must have shape (K, 3)")
    if elements.size and (elements.min() < 0 or elements.max() >= len(vertices)):
        raise MeshError("element vertex index out of range")
    K = elements.shape[0]
    area, length, normals = _geometry(vertices, elements)
    if check:
        bad = np.flatnonzero(~(area > 0))
        if bad.size:
            raise MeshError(f"zero/negative area element {int(bad[0])} (area={area[bad[0]]:.3e})")

    edges = np.stack([elements, np.roll(elements, -1, axis=1)], axis=-1).reshape(-1, 2)
    key = np.sort(edges, axis=1)
    uniq, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    inv = inv.ravel()
    if check and np.any(counts > 2):
        f = int(np.flatnonzero(counts > 2)[0])
        raise MeshError(f"non-conforming mesh: face {tuple(uniq[f])} shared by {counts[f]} elements")
    nf = uniq.shape[0]
    face_elements = -np.ones((nf, 2, 2), dtype=np.int64)
    slot = np.zeros(nf, dtype=np.int64)
    order = np.argsort(inv, kind="stable")
    for idx in order:
        fid = inv[idx]
        s = slot[fid]
        if s < 2:
            face_elements[fid, s] = (idx // 3, idx % 3)
        slot[fid] += 1

    neighbor = -np.ones((K, 3), dtype=np.int64)
    neighbor_face = -np.ones((K, 3), dtype=np.int64)
    bc = np.zeros((K, 3), dtype=np.int8)
    interior = face_elements[:, 1, 0] >= 0
    l, r = face_elements[interior, 0], face_elements[interior, 1]
    neighbor[l[:, 0], l[:, 1]] = r[:, 0]
    neighbor_face[l[:, 0], l[:, 1]] = r[:, 1]
    neighbor[r[:, 0], r[:, 1]] = l[:, 0]
    neighbor_face[r[:, 0], r[:, 1]] = l[:, 1]

    tags = {}
    btags = {tuple(sorted(k)): v for k, v in (boundary_tags or {}).items()}
    bfaces = np.flatnonzero(~interior)
    for fid in bfaces:
        e, lf = face_elements[fid, 0]
        name = btags.get(tuple(uniq[fid]), "wall")
        if name not in BOUNDARY_KINDS:
            raise MeshError(f"unknown boundary group {name!r}")
        tags[(int(e), int(lf))] = name
        bc[e, lf] = BOUNDARY_KINDS[name]

    if check:
        _check_hanging_nodes(vertices, uniq[bfaces])

    offset = np.zeros((K, 3, 2))
    axes = set(periodic or ())
    for name in ("periodic-x", "periodic-y"):
        if name in tags.values():
            axes.add(name[-1])
    for axis in sorted(axes):
        _pair_periodic(vertices, elements, tags, neighbor, neighbor_face, bc, offset, axis)

    diameter = length.max(axis=1)
    perimeter = length.sum(axis=1)
    for arr in (vertices, elements, neighbor, neighbor_face, bc, offset, area, perimeter,
                diameter, length, normals, uniq, face_elements):
        arr.setflags(write=False)
    return Mesh(vertices=vertices, elements=elements, neighbor=neighbor,
                neighbor_face=neighbor_face, bc=bc, boundary_tag=tags,
                periodic_offset=offset, area=area, perimeter=perimeter,
                diameter=diameter, face_length=length, normals=normals,
                faces=uniq, face_elements=face_elements)


def _check_hanging_nodes(vertices, bedges):
    if len(bedges) == 0:
        return
    tree = cKDTree(vertices)
    a, b = vertices[bedges[:, 0]], vertices[bedges[:, 1]]
    mid = 0.5 * (a + b)
    rad = 0.5 * np.hypot(*(b - a).T)
    for i, cands in enumerate(tree.query_ball_point(mid, rad * (1 + 1e-9))):
        for c in cands:
            if c in bedges[i]:
                continue
            p = vertices[c]
            d = b[i] - a[i]
            L2 = d @ d
            t = (p - a[i]) @ d / L2
            dist = abs(d[0] * (p[1] - a[i][1]) - d[1] * (p[0] - a[i][0])) / np.sqrt(L2)
            if 1e-12 < t < 1 - 1e-12 and dist < 1e-10 * np.sqrt(L2):
                raise MeshError(f"non-conforming mesh: hanging node {c} on face {tuple(bedges[i])}")


def _pair_periodic(vertices, elements, tags, neighbor, neighbor_face, bc, offset, axis):
    ax = {"x": 0, "y": 1}[axis]
    lo = vertices[:, ax].min()
    hi = vertices[:, ax].max()
    span = hi - lo
    tol = PERIODIC_MATCH_TOL
    low, high = [], []
    for (e, f), name in list(tags.items()):
        if name.startswith("periodic-") and name != f"periodic-{axis}":
            continue
        a = vertices[elements[e, f]]
        b = vertices[elements[e, (f + 1) % 3]]
        if abs(a[ax] - lo) < tol and abs(b[ax] - lo) < tol:
            low.append((e, f))
        elif abs(a[ax] - hi) < tol and abs(b[ax] - hi) < tol:
            high.append((e, f))
        elif name == f"periodic-{axis}":
            raise MeshError(f"unmatched periodic face on element {e}, face {f}")
    shift = np.zeros(2)
    shift[ax] = span
    mids_hi = np.array([0.5 * (vertices[elements[e, f]] + vertices[elements[e, (f + 1) % 3]])
                        for e, f in high]).reshape(-1, 2)
    tree = cKDTree(mids_hi) if len(high) else None
    used = set()
    for e, f in low:
        m = 0.5 * (vertices[elements[e, f]] + vertices[elements[e, (f + 1) % 3]]) + shift
        if tree is None:
            raise MeshError(f"unmatched periodic face on element {e}, face {f}")
        dist, j = tree.query(m)
        if dist > tol * max(1.0, span) or j in used:
            raise MeshError(f"unmatched periodic face on element {e}, face {f}")
        used.add(j)
        e2, f2 = high[j]
        neighbor[e, f], neighbor_face[e, f] = e2, f2
        neighbor[e2, f2], neighbor_face[e2, f2] = e, f
        bc[e, f] = bc[e2, f2] = PERIODIC
        offset[e, f] = shift
        offset[e2, f2] = -shift
        tags[(e, f)] = tags[(e2, f2)] = f"periodic-{axis}"
    if len(used) != len(high):
        e, f = high[next(i for i in range(len(high)) if i not in used)]
        raise MeshError(f"unmatched periodic face on element {e}, face {f}")


# ---------------------------------------------------------------------------
# file formats
# ---------------------------------------------------------------------------

def load_mesh(path, periodic=None):
    """Load a mesh from Gmsh MSH 2.2 ASCII or the plain-text ``.tri`` format."""
    path = os.fspath(path)
    if not os.path.exists(path):
        raise MeshError(f"mesh file not found: {path}")
    with open(path) as fh:
        text = fh.read()
    try:
        if "$MeshFormat" in text:
            verts, elems, tags = _parse_gmsh(text)
        else:
            verts, elems, tags = _parse_tri(text)
    except MeshError:
        raise
    except (ValueError, IndexError, KeyError) as exc:
        raise MeshError(f"cannot parse mesh file {path}: {exc}") from exc
    return build_mesh(verts, elems, tags, periodic=periodic)


def _parse_tri(text):
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    verts, elems, tags = [], [], {}
    i = 0
    while i < len(lines):
        head = lines[i].split()
        if len(head) != 2:
            raise MeshError(f"expected section header, got {lines[i]!r}")
        kind, n = head[0].lower(), int(head[1])
        body = lines[i + 1:i + 1 + n]
        if len(body) != n:
            raise MeshError(f"section {kind!r} truncated")
        if kind == "vertices":
            verts = [tuple(float(t) for t in ln.split()[:2]) for ln in body]
        elif kind == "triangles":
            elems = [tuple(int(t) for t in ln.split()[:3]) for ln in body]
        elif kind == "boundary":
            for ln in body:
                a, b, name = ln.split()[:3]
                tags[(int(a), int(b))] = name
        else:
            raise MeshError(f"unknown section {kind!r}")
        i += 1 + n
    if not verts or not elems:
        raise MeshError("mesh needs 'vertices' and 'triangles' sections")
    return np.array(verts), np.array(elems), tags


def _parse_gmsh(text):
    sections = {}
    lines = text.splitlines()
    i = 0
    while i < len(lines):
        ln = lines[i].strip()
        if ln.startswith("$") and not ln.startswith("$End"):
            name = ln[1:]
            j = i + 1
            while not lines[j].strip().startswith("$End" + name):
                j += 1
            sections[name] = [s.strip() for s in lines[i + 1:j]]
            i = j
        i += 1
    version = sections["MeshFormat"][0].split()
    if not version[0].startswith("2"):
        raise MeshError(f"unsupported MSH version {version[0]} (need 2.2 ASCII)")
    if version[1] != "0":
        raise MeshError("binary MSH files are not supported")
    names = {}
    for ln in sections.get("PhysicalNames", [])[1:]:
        dim, tag, nm = ln.split(maxsplit=2)
        names[int(tag)] = nm.strip('"')
    node_lines = sections["Nodes"][1:]
    ids = {}
    verts = []
    for ln in node_lines:
        parts = ln.split()
        ids[int(parts[0])] = len(verts)
        verts.append((float(parts[1]), float(parts[2])))
    elems, tags = [], {}
    for ln in sections["Elements"][1:]:
        parts = [int(t) for t in ln.split()]
        etype, ntags = parts[1], parts[2]
        phys = parts[3] if ntags > 0 else 0
        nodes = [ids[n] for n in parts[3 + ntags:]]
        if etype == 2:
            elems.append(nodes)
        elif etype == 1:
            tags[(nodes[0], nodes[1])] = names.get(phys, "wall")
    verts = np.array(verts)
    elems = np.array(elems, dtype=np.int64)
    # gmsh does not guarantee orientation; make triangles counter-clockwise
    area, _, _ = _geometry(verts, elems)
    flip = area < 0
    elems[flip] = elems[flip][:, [0, 2, 1]]
    return verts, elems, tags


def save_mesh(mesh, path):
    """Write the plain-text format; reloading reproduces the stored fields exactly."""
    with open(path, "w") as fh:
        fh.write("# gndg triangle mesh\n")
        fh.write(f"vertices {len(mesh.vertices)}\n")
        for x, y in mesh.vertices:
            fh.write(f"{float(x)!r} {float(y)!r}\n")
        fh.write(f"triangles {mesh.n_elements}\n")
        for a, b, c in mesh.elements:
            fh.write(f"{a} {b} {c}\n")
        items = sorted(mesh.boundary_tag.items())
        fh.write(f"boundary {len(items)}\n")
        for (e, f), name in items:
            a = mesh.elements[e, f]
            b = mesh.elements[e, (f + 1) % 3]
            fh.write(f"{a} {b} {name}\n")


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

@dataclass
class CheckResult:
    name: str
    passed: bool
    worst_value: float
    worst_element: int | None = None

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        where = "" if self.worst_element is None else f" (element {self.worst_element})"
        return f"{status}  {self.name:<28s} worst={self.worst_value:.3e}{where}"


def boundary_polygon_area(mesh):
    """Signed area enclosed by the physical boundary faces (shoelace per face)."""
    v = mesh.vertices
    total = 0.0
    for (e, f) in mesh.boundary_tag:
        a = v[mesh.elements[e, f]]
        b = v[mesh.elements[e, (f + 1) % 3]]
        total += 0.5 * (a[0] * b[1] - b[0] * a[1])
    return total


def validate_mesh(mesh):
    """Check the mesh invariants; returns a list of CheckResult (never mutates)."""
    results = []
    K = mesh.n_elements
    area = mesh.area
    worst = int(np.argmin(area)) if K else None
    results.append(CheckResult("positive area / CCW", bool(np.all(area > 0)),
                               float(area.min()) if K else 0.0, worst))

    fe = mesh.face_elements
    counts = (fe[:, :, 0] >= 0).sum(axis=1)
    results.append(CheckResult("face adjacency", bool(np.all((counts == 1) | (counts == 2))),
                               float(counts.max()) if len(counts) else 0.0))

    poly = boundary_polygon_area(mesh)
    rel = abs(area.sum() - poly) / max(abs(poly), 1e-300)
    results.append(CheckResult("area sum vs boundary", bool(rel <= 1e-10), float(rel)))

    s = (mesh.face_length[..., None] * mesh.normals).sum(axis=1)
    ns = np.hypot(s[:, 0], s[:, 1])
    results.append(CheckResult("normal closure", bool(np.all(ns <= 1e-12)), float(ns.max()),
                               int(np.argmax(ns))))

    v = mesh.vertices[mesh.elements]
    fmid = 0.5 * (v + np.roll(v, -1, axis=1))
    outward = np.einsum("kfd,kfd->kf", fmid - v.mean(axis=1)[:, None, :], mesh.normals)
    results.append(CheckResult("outward normals", bool(np.all(outward > 0)),
                               float(outward.min()), int(np.argmin(outward.min(axis=1)))))

    nb = mesh.neighbor
    mask = nb >= 0
    e, f = np.nonzero(mask)
    opp = mesh.normals[nb[e, f], mesh.neighbor_face[e, f]]
    dev = np.abs(mesh.normals[e, f] + opp).max(axis=1) if len(e) else np.zeros(1)
    results.append(CheckResult("opposite interface normals", bool(np.all(dev <= 1e-12)),
                               float(dev.max())))
    return results


def report(mesh):
    lines = [f"elements={mesh.n_elements} faces={mesh.n_faces} "
             f"interior={len(mesh.interior_faces)} boundary={len(mesh.boundary_faces)} "
             f"h={mesh.h:.4g}"]
    results = validate_mesh(mesh)
    lines += [r.line() for r in results]
    return "\n".join(lines), all(r.passed for r in results)
