"""Periodic-in-x quadrilateral meshes of the unit cell (0,L) x (0,H).

Bilinear quads only.  Meshes come from :func:`build_structured` (tensor grid
with centroid-classified region labels) or from a plain text file via
:func:`read_mesh`.  Validation enforces positive Jacobians at the 2x2 Gauss
points, a matching left/right vertex layer for periodic identification, and
exact tiling of the bottom/top boundaries.

Mesh file format (whitespace separated)::

    quadmesh 1 <n_vertices> <n_elements> <L> <H>
    v <x> <z>          (n_vertices lines)
    e <i0> <i1> <i2> <i3> <region_label>    (counterclockwise, 0-based)
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

__all__ = [
    "QuadMesh",
    "DofMap",
    "BoundaryEdge",
    "build_structured",
    "build_dofmap",
    "read_mesh",
    "write_mesh",
    "read_mesh_file",
    "write_mesh_file",
    "boundary_edges",
    "element_areas",
    "locate_point",
    "interpolate_at",
    "InvalidDims",
    "ParseError",
    "NonMatchingPeriodicBoundary",
    "TangledElement",
    "GapInBoundary",
]

PAIR_TOL = 1e-9      # relative to L, for periodic vertex matching
COVER_TOL = 1e-12    # relative to L, for boundary tiling checks

# reference square: corner order and 2x2 Gauss abscissa
_XI = np.array([-1.0, 1.0, 1.0, -1.0])
_ETA = np.array([-1.0, -1.0, 1.0, 1.0])
_GAUSS = 1.0 / np.sqrt(3.0)
_GPTS = [(-_GAUSS, -_GAUSS), (_GAUSS, -_GAUSS), (_GAUSS, _GAUSS), (-_GAUSS, _GAUSS)]

_LOCAL_EDGES = ((0, 1), (1, 2), (2, 3), (3, 0))


class InvalidDims(ValueError):
    """Structured mesh dimensions out of range."""


class ParseError(ValueError):
    """Malformed mesh file; carries the offending line number."""

    def __init__(self, lineno, message):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class NonMatchingPeriodicBoundary(ValueError):
    """A left-boundary vertex has no z partner on the right boundary."""


class TangledElement(ValueError):
    """An element has a non-positive Jacobian (tangled or clockwise)."""


class GapInBoundary(ValueError):
    """Bottom or top boundary edges do not tile [0, L]."""


class BoundaryEdge(NamedTuple):
    element: int
    local_edge: int
    x_start: float
    x_end: float
    v_start: int   # vertex index at x_start
    v_end: int     # vertex index at x_end


def shape_values(xi, eta):
    return 0.25 * (1.0 + _XI * xi) * (1.0 + _ETA * eta)


def shape_gradients(xi, eta):
    """d/d(xi), d/d(eta) of the four bilinear shape functions, shape (4, 2)."""
    dxi = 0.25 * _XI * (1.0 + _ETA * eta)
    deta = 0.25 * _ETA * (1.0 + _XI * xi)
    return np.stack([dxi, deta], axis=1)


@dataclass
class QuadMesh:
    vertices: np.ndarray          # (n, 2) float
    elements: np.ndarray          # (m, 4) int, counterclockwise
    region_labels: np.ndarray     # (m,) int
    L: float
    H: float
    periodic_pairs: np.ndarray = field(default=None)   # (k, 2) int: (left, right)
    sigma0_edges: list = field(default=None)
    sigmaH_edges: list = field(default=None)

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_elements(self):
        return len(self.elements)

    def element_coords(self, e):
        return self.vertices[self.elements[e]]

    def validate(self):
        """Check all invariants; raises on the first violation."""
        if self.periodic_pairs is None:
            self.periodic_pairs = _match_periodic(self.vertices, self.L)
        _check_jacobians(self)
        _check_pairs(self)
        self.sigma0_edges = boundary_edges(self, "bottom")
        self.sigmaH_edges = boundary_edges(self, "top")
        return self


def _check_jacobians(mesh):
    coords = mesh.vertices[mesh.elements]            # (m, 4, 2)
    for xi, eta in _GPTS:
        G = shape_gradients(xi, eta)                 # (4, 2)
        J = np.einsum("eai,aj->eij", coords, G)      # (m, 2, 2): dx_i/dxi_j
        det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
        bad = np.nonzero(det <= 0.0)[0]
        if bad.size:
            raise TangledElement(
                f"element {bad[0]} has non-positive Jacobian {det[bad[0]]:.3e}"
            )


def _match_periodic(vertices, L):
    tol = PAIR_TOL * L
    left = np.nonzero(np.abs(vertices[:, 0]) < tol)[0]
    right = np.nonzero(np.abs(vertices[:, 0] - L) < tol)[0]
    if len(left) != len(right):
        raise NonMatchingPeriodicBoundary(
            f"{len(left)} left vs {len(right)} right boundary vertices"
        )
    right_by_z = sorted(right, key=lambda i: vertices[i, 1])
    left_by_z = sorted(left, key=lambda i: vertices[i, 1])
    pairs = []
    for li, ri in zip(left_by_z, right_by_z):
        if abs(vertices[li, 1] - vertices[ri, 1]) > tol:
            raise NonMatchingPeriodicBoundary(
                f"left vertex {li} (z={vertices[li,1]!r}) has no right partner"
            )
        pairs.append((li, ri))
    return np.array(pairs, dtype=int).reshape(-1, 2)


def _check_pairs(mesh):
    tol = PAIR_TOL * mesh.L
    v = mesh.vertices
    for li, ri in mesh.periodic_pairs:
        if abs(v[li, 0]) > tol or abs(v[ri, 0] - mesh.L) > tol or abs(v[li, 1] - v[ri, 1]) > tol:
            raise NonMatchingPeriodicBoundary(f"bad periodic pair ({li}, {ri})")


def build_structured(L, H, nx, nz, region_fn=None):
    """Tensor-product mesh with nx*nz elements, labels from centroids."""
    if nx < 2 or nz < 1:
        raise InvalidDims(f"need nx >= 2 and nz >= 1, got nx={nx}, nz={nz}")
    x = np.linspace(0.0, L, nx + 1)
    z = np.linspace(0.0, H, nz + 1)
    xx, zz = np.meshgrid(x, z, indexing="xy")        # row j: z = z_j
    vertices = np.column_stack([xx.ravel(), zz.ravel()])

    def vid(i, j):
        return j * (nx + 1) + i

    elements = []
    labels = []
    for j in range(nz):
        for i in range(nx):
            elements.append([vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)])
            cx = 0.5 * (x[i] + x[i + 1])
            cz = 0.5 * (z[j] + z[j + 1])
            labels.append(int(region_fn(cx, cz)) if region_fn is not None else 1)
    pairs = np.array([[vid(0, j), vid(nx, j)] for j in range(nz + 1)], dtype=int)
    mesh = QuadMesh(
        vertices=vertices,
        elements=np.array(elements, dtype=int),
        region_labels=np.array(labels, dtype=int),
        L=float(L),
        H=float(H),
        periodic_pairs=pairs,
    )
    return mesh.validate()


@dataclass(frozen=True)
class DofMap:
    """Vertex -> DOF with paired left/right vertices sharing one index."""

    n_dofs: int
    vertex_to_dof: np.ndarray

    def expand(self, dof_values):
        """Nodal values at every vertex from a DOF vector (axis -1)."""
        return np.asarray(dof_values)[..., self.vertex_to_dof]


def build_dofmap(mesh):
    n = mesh.n_vertices
    owner = np.arange(n)
    for li, ri in mesh.periodic_pairs:
        owner[ri] = li
    dof = -np.ones(n, dtype=int)
    next_dof = 0
    for v in range(n):
        if owner[v] == v:
            dof[v] = next_dof
            next_dof += 1
    for v in range(n):
        if dof[v] < 0:
            dof[v] = dof[owner[v]]
    return DofMap(n_dofs=next_dof, vertex_to_dof=dof)


def boundary_edges(mesh, which):
    """Edges on z=0 ('bottom') or z=H ('top'), sorted by x_start; checks tiling."""
    if which not in ("bottom", "top"):
        raise ValueError("which must be 'bottom' or 'top'")
    z0 = 0.0 if which == "bottom" else mesh.H
    ztol = PAIR_TOL * max(mesh.L, mesh.H)
    v = mesh.vertices
    edges = []
    on_line = np.abs(v[:, 1] - z0) < ztol
    for e, quad in enumerate(mesh.elements):
        for le, (a, b) in enumerate(_LOCAL_EDGES):
            va, vb = quad[a], quad[b]
            if on_line[va] and on_line[vb]:
                xa, xb = v[va, 0], v[vb, 0]
                if xa <= xb:
                    edges.append(BoundaryEdge(e, le, xa, xb, va, vb))
                else:
                    edges.append(BoundaryEdge(e, le, xb, xa, vb, va))
    edges.sort(key=lambda ed: ed.x_start)
    tol = COVER_TOL * mesh.L
    cursor = 0.0
    for ed in edges:
        if abs(ed.x_start - cursor) > max(tol, 1e-14 * mesh.L):
            raise GapInBoundary(
                f"{which} boundary: expected edge start {cursor!r}, got {ed.x_start!r}"
            )
        cursor = ed.x_end
    if abs(cursor - mesh.L) > max(tol, 1e-14 * mesh.L):
        raise GapInBoundary(f"{which} boundary ends at {cursor!r}, not L={mesh.L!r}")
    return edges


def element_areas(mesh):
    coords = mesh.vertices[mesh.elements]
    areas = np.zeros(mesh.n_elements)
    for xi, eta in _GPTS:
        G = shape_gradients(xi, eta)
        J = np.einsum("eai,aj->eij", coords, G)
        areas += J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
    return areas


# ----------------------------------------------------------------- file I/O

def write_mesh(mesh):
    lines = [f"quadmesh 1 {mesh.n_vertices} {mesh.n_elements} {mesh.L!r} {mesh.H!r}"]
    for x, z in mesh.vertices:
        lines.append(f"v {x!r} {z!r}")
    for quad, lab in zip(mesh.elements, mesh.region_labels):
        lines.append(f"e {quad[0]} {quad[1]} {quad[2]} {quad[3]} {lab}")
    return "\n".join(lines) + "\n"


def read_mesh(text):
    tokens_by_line = [
        (i + 1, ln.split()) for i, ln in enumerate(text.splitlines()) if ln.strip()
    ]
    if not tokens_by_line:
        raise ParseError(1, "empty mesh file")
    lineno, head = tokens_by_line[0]
    if len(head) != 6 or head[0] != "quadmesh" or head[1] != "1":
        raise ParseError(lineno, "expected header 'quadmesh 1 <nv> <ne> <L> <H>'")
    try:
        nv, ne = int(head[2]), int(head[3])
        L, H = float(head[4]), float(head[5])
    except ValueError as exc:
        raise ParseError(lineno, f"bad header numbers: {exc}") from None
    if len(tokens_by_line) != 1 + nv + ne:
        raise ParseError(lineno, f"expected {nv} vertex and {ne} element lines")

    vertices = np.zeros((nv, 2))
    for k in range(nv):
        lineno, tok = tokens_by_line[1 + k]
        if len(tok) != 3 or tok[0] != "v":
            raise ParseError(lineno, "expected 'v <x> <z>'")
        try:
            vertices[k] = (float(tok[1]), float(tok[2]))
        except ValueError as exc:
            raise ParseError(lineno, f"bad vertex coordinates: {exc}") from None

    elements = np.zeros((ne, 4), dtype=int)
    labels = np.zeros(ne, dtype=int)
    for k in range(ne):
        lineno, tok = tokens_by_line[1 + nv + k]
        if len(tok) != 6 or tok[0] != "e":
            raise ParseError(lineno, "expected 'e <i0> <i1> <i2> <i3> <label>'")
        try:
            ids = [int(t) for t in tok[1:5]]
            labels[k] = int(tok[5])
        except ValueError as exc:
            raise ParseError(lineno, f"bad element line: {exc}") from None
        if any(i < 0 or i >= nv for i in ids):
            raise ParseError(lineno, f"vertex index out of range in {ids}")
        elements[k] = ids

    mesh = QuadMesh(
        vertices=vertices,
        elements=elements,
        region_labels=labels,
        L=L,
        H=H,
    )
    return mesh.validate()


def read_mesh_file(path):
    with open(path, "r", encoding="utf-8") as fh:
        return read_mesh(fh.read())


def write_mesh_file(mesh, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(write_mesh(mesh))


# ------------------------------------------------------- point interpolation

def _invert_bilinear(coords, x, z, tol=1e-12, max_iter=30):
    """Reference coordinates (xi, eta) of physical point, Newton iteration."""
    xi = eta = 0.0
    target = np.array([x, z])
    for _ in range(max_iter):
        N = shape_values(xi, eta)
        pos = N @ coords
        r = pos - target
        if np.hypot(r[0], r[1]) < tol * (1.0 + np.hypot(x, z)):
            break
        G = shape_gradients(xi, eta)
        J = coords.T @ G
        dxi = np.linalg.solve(J, -r)
        xi += dxi[0]
        eta += dxi[1]
    return xi, eta


def locate_point(mesh, x, z, slack=1e-9):
    """(element, xi, eta) containing physical point; ValueError if outside."""
    coords_all = mesh.vertices[mesh.elements]
    xmin = coords_all[:, :, 0].min(axis=1) - slack * mesh.L
    xmax = coords_all[:, :, 0].max(axis=1) + slack * mesh.L
    zmin = coords_all[:, :, 1].min(axis=1) - slack * mesh.H
    zmax = coords_all[:, :, 1].max(axis=1) + slack * mesh.H
    candidates = np.nonzero((x >= xmin) & (x <= xmax) & (z >= zmin) & (z <= zmax))[0]
    for e in candidates:
        xi, eta = _invert_bilinear(coords_all[e], x, z)
        if abs(xi) <= 1.0 + 1e-8 and abs(eta) <= 1.0 + 1e-8:
            return int(e), float(np.clip(xi, -1, 1)), float(np.clip(eta, -1, 1))
    raise ValueError(f"point ({x}, {z}) lies outside the mesh")


def interpolate_at(mesh, dofmap, dof_values, points):
    """Bilinear interpolation of DOF data at (x, z) points; values axis last.

    ``dof_values`` may be (n_dofs,) or (n_steps, n_dofs); returns a matching
    array with a trailing point axis.
    """
    locs = [locate_point(mesh, px, pz) for px, pz in points]
    nodal = dofmap.expand(dof_values)
    cols = []
    for (e, xi, eta) in locs:
        N = shape_values(xi, eta)
        cols.append(nodal[..., mesh.elements[e]] @ N)
    return np.stack(cols, axis=-1)
