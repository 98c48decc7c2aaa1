"""Complex FEM assembly on the unit cell for one Laplace parameter.

The sesquilinear form is

    B(w, v) = int_cell grad w . grad conj(v)
            + 2 (s/c) d1 int_cell dw/dx conj(v)
            + (s^2/c^2) int_cell (eps(s) - d1^2) w conj(v)
            + (s/c) eta int_{top + bottom} w conj(v)

with bilinear quads, 2x2 Gauss quadrature for the volume terms and exact edge
integration for the boundary terms.  The material coefficient is piecewise
constant per region label, so the system matrix is an s-dependent linear
combination of geometry-only matrices; :class:`CellOperators` precomputes
those once per mesh and every :func:`assemble` call is a cheap recombination
with a shared sparsity pattern.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import mesh as meshmod
from . import spectral
from .materials import eval_permittivity

__all__ = [
    "CellOperators",
    "AssembledCell",
    "assemble",
    "load_from_modes",
    "solve_cell",
    "element_matrices",
    "SingularSystem",
    "TruncationMismatch",
]

RESIDUAL_TOL = 1e-10


class SingularSystem(RuntimeError):
    """Factorization broke down or produced non-finite values."""


class TruncationMismatch(ValueError):
    """Mode vector truncation differs from the assembled trace matrices."""


def element_matrices(coords):
    """Stiffness, x-convection and mass matrices of one bilinear quad.

    ``coords`` is (4, 2) in counterclockwise order.  Convection is
    C[i, j] = integral of (d phi_j / dx) phi_i.
    """
    Ke = np.zeros((4, 4))
    Ce = np.zeros((4, 4))
    Me = np.zeros((4, 4))
    g = 1.0 / np.sqrt(3.0)
    for xi, eta in ((-g, -g), (g, -g), (g, g), (-g, g)):
        N = meshmod.shape_values(xi, eta)
        G = meshmod.shape_gradients(xi, eta)      # (4, 2) wrt (xi, eta)
        J = coords.T @ G                          # (2, 2)
        det = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
        Gx = G @ np.linalg.inv(J)                 # (4, 2) wrt (x, z)
        Ke += det * (Gx @ Gx.T)
        Ce += det * np.outer(N, Gx[:, 0])
        Me += det * np.outer(N, N)
    return Ke, Ce, Me


def _edge_mass_entries(edges, dofmap):
    rows, cols, vals = [], [], []
    for ed in edges:
        h = ed.x_end - ed.x_start
        d = (dofmap.vertex_to_dof[ed.v_start], dofmap.vertex_to_dof[ed.v_end])
        local = h / 6.0 * np.array([[2.0, 1.0], [1.0, 2.0]])
        for a in range(2):
            for b in range(2):
                rows.append(d[a])
                cols.append(d[b])
                vals.append(local[a, b])
    return np.array(rows, int), np.array(cols, int), np.array(vals, float)


class CellOperators:
    """Geometry-only matrices for one (mesh, dofmap, mode truncation)."""

    def __init__(self, mesh, dofmap, n_modes):
        self.mesh = mesh
        self.dofmap = dofmap
        self.n_modes = n_modes
        n = dofmap.n_dofs

        coords = mesh.vertices[mesh.elements]
        m = mesh.n_elements
        Ke = np.zeros((m, 4, 4))
        Ce = np.zeros((m, 4, 4))
        Me = np.zeros((m, 4, 4))
        g = 1.0 / np.sqrt(3.0)
        for xi, eta in ((-g, -g), (g, -g), (g, g), (-g, g)):
            N = meshmod.shape_values(xi, eta)
            G = meshmod.shape_gradients(xi, eta)
            J = np.einsum("eai,aj->eij", coords, G)
            det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
            Jinv = np.linalg.inv(J)
            Gx = np.einsum("aj,eji->eai", G, Jinv)
            Ke += det[:, None, None] * np.einsum("eai,ebi->eab", Gx, Gx)
            Ce += det[:, None, None] * np.einsum("a,eb->eab", N, Gx[:, :, 0])
            Me += det[:, None, None] * np.einsum("a,b->ab", N, N)[None, :, :]

        edof = dofmap.vertex_to_dof[mesh.elements]            # (m, 4)
        vol_rows = np.repeat(edof, 4, axis=1).ravel()
        vol_cols = np.tile(edof, (1, 4)).ravel()

        if mesh.sigma0_edges is None or mesh.sigmaH_edges is None:
            mesh.validate()
        b0r, b0c, b0v = _edge_mass_entries(mesh.sigma0_edges, dofmap)
        bhr, bhc, bhv = _edge_mass_entries(mesh.sigmaH_edges, dofmap)

        # one shared COO index list for every component matrix, so the
        # canonicalized CSC structures coincide and assemble() can combine
        # raw data arrays (scipy's sparse addition prunes exact zeros, which
        # would desynchronize patterns)
        all_rows = np.concatenate([vol_rows, b0r, bhr])
        all_cols = np.concatenate([vol_cols, b0c, bhc])
        nb = len(b0v) + len(bhv)

        def to_csc(vol_vals, bnd_vals=None):
            data = np.concatenate([
                vol_vals.reshape(-1),
                np.zeros(nb) if bnd_vals is None else bnd_vals,
            ])
            out = sp.coo_matrix((data, (all_rows, all_cols)), shape=(n, n)).tocsc()
            out.sort_indices()
            return out

        zero_vol = np.zeros(m * 16)
        self.stiffness = to_csc(Ke)
        self.convection = to_csc(Ce)
        self.labels = sorted(set(int(r) for r in mesh.region_labels))
        self.mass_by_region = {
            lab: to_csc(Me * (mesh.region_labels == lab).astype(float)[:, None, None])
            for lab in self.labels
        }
        self.boundary_mass_bottom = to_csc(zero_vol, np.concatenate([b0v, np.zeros(len(bhv))]))
        self.boundary_mass_top = to_csc(zero_vol, np.concatenate([np.zeros(len(b0v)), bhv]))
        self.boundary_mass = to_csc(zero_vol, np.concatenate([b0v, bhv]))
        self.mass = to_csc(sum(
            Me * (mesh.region_labels == lab).astype(float)[:, None, None]
            for lab in self.labels
        ))

        self._pattern = self.stiffness
        for mat in [self.convection, self.boundary_mass, *self.mass_by_region.values()]:
            if not (
                np.array_equal(mat.indptr, self._pattern.indptr)
                and np.array_equal(mat.indices, self._pattern.indices)
            ):
                raise AssertionError("sparsity alignment failed")

        self.trace_bottom, self.mode_gram = spectral.mode_inner_products(
            mesh, dofmap, mesh.sigma0_edges, n_modes
        )
        self.trace_top, _ = spectral.mode_inner_products(
            mesh, dofmap, mesh.sigmaH_edges, n_modes
        )

    def assemble(self, materials, s, geom, eta=1.0):
        s = complex(s)
        if not s.real > 0:
            raise ValueError(f"need Re(s) > 0, got {s}")
        materials.check_covers(self.labels)
        d1, c = geom.d1, geom.c
        data = self.stiffness.data.astype(complex)
        data += (2.0 * s / c * d1) * self.convection.data
        s2c2 = (s / c) ** 2
        for lab in self.labels:
            bhat = eval_permittivity(materials.model_for(lab), s)
            data += s2c2 * (bhat - d1 * d1) * self.mass_by_region[lab].data
        data += (s / c * eta) * self.boundary_mass.data
        A = sp.csc_matrix(
            (data, self._pattern.indices.copy(), self._pattern.indptr.copy()),
            shape=self._pattern.shape,
        )
        return AssembledCell(
            s=s, A=A, ops=self,
            trace_bottom=self.trace_bottom, trace_top=self.trace_top,
        )


@dataclass
class AssembledCell:
    """System matrix at one s plus the trace coupling matrices."""

    s: complex
    A: sp.csc_matrix
    ops: CellOperators
    trace_bottom: np.ndarray
    trace_top: np.ndarray
    _lu: object = field(default=None, repr=False)
    _norm_fro: float = field(default=None, repr=False)

    @property
    def n_modes(self):
        return self.ops.n_modes

    def factorization(self):
        if self._lu is None:
            try:
                self._lu = spla.splu(self.A)
            except RuntimeError as exc:
                raise SingularSystem(f"factorization failed at s={self.s}: {exc}") from exc
            self._norm_fro = np.linalg.norm(self.A.data)
        return self._lu


def assemble(mesh, dofmap, materials, s, geom, eta=1.0, n_modes=10, ops=None):
    """Assemble the cell system at Laplace parameter s.

    Passing a prebuilt :class:`CellOperators` skips the geometry work; the
    operators must match (mesh, dofmap, n_modes).
    """
    if ops is None:
        ops = CellOperators(mesh, dofmap, n_modes)
    return ops.assemble(materials, s, geom, eta)


def load_from_modes(cell, lam0_minus, lamH_minus):
    """Right-hand side vector for incoming impedance data on both boundaries."""
    N = cell.n_modes
    if lam0_minus.n_modes != N or lamH_minus.n_modes != N:
        raise TruncationMismatch(
            f"mode vectors truncated at {lam0_minus.n_modes}/{lamH_minus.n_modes}, "
            f"cell expects {N}"
        )
    return (
        cell.trace_bottom.conj().T @ lam0_minus.coeffs
        + cell.trace_top.conj().T @ lamH_minus.coeffs
    )


def solve_cell(cell, rhs):
    """Solve the assembled system; the factorization is cached on the cell."""
    rhs = np.asarray(rhs, dtype=complex)
    lu = cell.factorization()
    w = lu.solve(rhs)
    if not np.all(np.isfinite(w)):
        raise SingularSystem(f"non-finite solution at s={cell.s}")
    resid = np.linalg.norm(cell.A @ w - rhs)
    bound = RESIDUAL_TOL * (cell._norm_fro * np.linalg.norm(w) + np.linalg.norm(rhs))
    if resid > bound:
        raise SingularSystem(
            f"solve residual {resid:.3e} exceeds {bound:.3e} at s={cell.s}"
        )
    return w
