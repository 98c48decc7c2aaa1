"""Fourier-mode radiation closure for the top and bottom cell boundaries.

Outside the cell the field separates into x modes exp(i 2 pi n x / L) with
vertical propagation constants kappa_n chosen on the Re > 0 branch, so mode
expansions decay away from the cell.  The closure exchanges impedance traces
(+/- d/dz + (s/c) eta) with the interior FEM problem: outgoing trace data maps
to incoming data through diagonal reflection multipliers
(kappa_n - (s/c) eta) / (kappa_n + (s/c) eta).

Trace/mode coupling integrals (piecewise-linear FEM trace against a mode) are
evaluated in closed form, so the mode Gram matrix is exactly L times the
identity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "BranchAmbiguity",
    "ModeVector",
    "KappaTable",
    "kappa_bottom",
    "kappa_top",
    "build_kappa_table",
    "reflection_multipliers",
    "apply_reflection_bottom",
    "apply_reflection_top",
    "incident_impedance_data",
    "mode_inner_products",
]

BRANCH_TOL = 1e-14


class BranchAmbiguity(ValueError):
    """kappa^2 lies (numerically) on the branch cut: Re(root) ~ 0."""


def _positive_real_root(val2):
    """Square root with Re > 0; raises when the root hugs the imaginary axis."""
    val2 = np.asarray(val2, dtype=complex)
    root = np.sqrt(val2)
    root = np.where(root.real < 0.0, -root, root)
    bad = np.abs(root.real) < BRANCH_TOL * np.abs(root)
    if np.any(bad):
        raise BranchAmbiguity(
            f"propagation constant on imaginary axis for kappa^2={val2[bad].ravel()[0]}"
        )
    return root if root.ndim else complex(root)


def kappa_bottom(s, c, d1, L, n):
    """Mode-n propagation constant below the cell (background coefficient 1)."""
    if not s.real > 0:
        raise ValueError(f"need Re(s) > 0, got {s}")
    n = np.asarray(n)
    w = 2.0 * n * np.pi * c / (L * s) + 1j * d1
    return _positive_real_root((s / c) ** 2 * (1.0 + w * w))


def kappa_top(s, c, d1, L, n, bhat1):
    """Mode-n propagation constant above the cell (coefficient bhat1)."""
    if not s.real > 0:
        raise ValueError(f"need Re(s) > 0, got {s}")
    n = np.asarray(n)
    w = 2.0 * n * np.pi * c / (L * s) + 1j * d1
    return _positive_real_root((s / c) ** 2 * (bhat1 + w * w))


@dataclass(frozen=True)
class ModeVector:
    """Truncated mode coefficients, index n = -N..N stored at n + N."""

    n_modes: int                  # truncation N
    coeffs: np.ndarray            # (2N+1,) complex
    side: str = "bottom"          # {'bottom', 'top'}
    kind: str = "minus"           # {'minus', 'plus'}

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape != (2 * self.n_modes + 1,):
            raise ValueError(f"expected {2 * self.n_modes + 1} coefficients, got {c.shape}")
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zero(cls, n_modes, side="bottom", kind="minus"):
        return cls(n_modes, np.zeros(2 * n_modes + 1, complex), side, kind)

    @classmethod
    def unit(cls, n_modes, n, side="bottom", kind="minus"):
        c = np.zeros(2 * n_modes + 1, complex)
        c[n + n_modes] = 1.0
        return cls(n_modes, c, side, kind)

    def __getitem__(self, n):
        return self.coeffs[n + self.n_modes]


@dataclass(frozen=True)
class KappaTable:
    """Per-frequency propagation constants for modes -N..N, both sides."""

    s: complex
    c: float
    d1: float
    L: float
    bhat1: complex
    n_modes: int
    kappa_s: np.ndarray
    kappa_t: np.ndarray


def build_kappa_table(s, c, d1, L, n_modes, bhat1):
    n = np.arange(-n_modes, n_modes + 1)
    return KappaTable(
        s=complex(s), c=c, d1=d1, L=L, bhat1=complex(bhat1), n_modes=n_modes,
        kappa_s=kappa_bottom(complex(s), c, d1, L, n),
        kappa_t=kappa_top(complex(s), c, d1, L, n, complex(bhat1)),
    )


def reflection_multipliers(table, eta, side):
    """Diagonal factors (kappa_n - (s/c) eta) / (kappa_n + (s/c) eta)."""
    kap = table.kappa_s if side == "bottom" else table.kappa_t
    w = table.s / table.c * eta
    return (kap - w) / (kap + w)


def apply_reflection_bottom(lam_plus, table, eta):
    """Outgoing-to-incoming map below the cell (diagonal in mode space)."""
    if lam_plus.kind != "plus" or lam_plus.side != "bottom":
        raise ValueError("expected a bottom-side outgoing mode vector")
    mult = reflection_multipliers(table, eta, "bottom")
    return ModeVector(lam_plus.n_modes, mult * lam_plus.coeffs, "bottom", "minus")


def apply_reflection_top(lam_plus, table, eta):
    """Outgoing-to-incoming map above the cell (diagonal in mode space)."""
    if lam_plus.kind != "plus" or lam_plus.side != "top":
        raise ValueError("expected a top-side outgoing mode vector")
    mult = reflection_multipliers(table, eta, "top")
    return ModeVector(lam_plus.n_modes, mult * lam_plus.coeffs, "top", "minus")


def incident_impedance_data(s, fhat_sample, geom, eta, n_modes):
    """Impedance traces of the incident wave at z = 0.

    The moving-frame incident wave is x independent, so only mode 0 is
    populated: with W = fhat exp(-s L d1 / c),

        f_minus_0 = (s d2 / c + s eta / c) W
        f_plus_0  = (s d2 / c - s eta / c) W
    """
    if not s.real > 0:
        raise ValueError(f"need Re(s) > 0, got {s}")
    W = fhat_sample * np.exp(-s * geom.L * geom.d1 / geom.c)
    f_minus = ModeVector.zero(n_modes, "bottom", "minus")
    f_plus = ModeVector.zero(n_modes, "bottom", "plus")
    f_minus.coeffs[n_modes] = (s * geom.d2 / geom.c + s * eta / geom.c) * W
    f_plus.coeffs[n_modes] = (s * geom.d2 / geom.c - s * eta / geom.c) * W
    return f_minus, f_plus


def _edge_mode_integrals(x0, x1, k):
    """Closed-form integrals of the two linear edge shapes against e^{-ikx}.

    Returns (I_start, I_end) for the shape rising toward x0 and toward x1
    respectively.  k = 2 pi n / L; k = 0 reduces to h/2 each.
    """
    h = x1 - x0
    if k == 0.0:
        return 0.5 * h, 0.5 * h
    ik = 1j * k
    e0 = np.exp(-ik * x0)
    e1 = np.exp(-ik * x1)
    total = (e0 - e1) / ik                       # integral of e^{-ikx}
    # integral of (x - x0) e^{-ikx}: by parts
    ramp = -h * e1 / ik - (e0 - e1) / (k * k)
    i_end = ramp / h
    return total - i_end, i_end


def mode_inner_products(mesh, dofmap, edges, n_modes):
    """Trace coupling matrix T and the (diagonal) mode Gram scale.

    T[n + N, j] = integral over the boundary of (FEM trace of DOF j) times
    conj(psi_n), psi_n = exp(i 2 pi n x / L).  The mode Gram matrix is exactly
    L * identity and is returned as the scalar L.
    """
    T = np.zeros((2 * n_modes + 1, dofmap.n_dofs), dtype=complex)
    for n in range(-n_modes, n_modes + 1):
        k = 2.0 * np.pi * n / mesh.L
        row = T[n + n_modes]
        for ed in edges:
            i_start, i_end = _edge_mode_integrals(ed.x_start, ed.x_end, k)
            row[dofmap.vertex_to_dof[ed.v_start]] += i_start
            row[dofmap.vertex_to_dof[ed.v_end]] += i_end
    return T, mesh.L
