"""Coupled solve at one Laplace parameter: interior FEM + mode closures.

Unknowns are the interior field w and four boundary mode vectors: outgoing
and incoming impedance traces at the top and bottom.  Incoming traces are
eliminated diagonally (they are reflections of the outgoing ones, plus
incident data at the bottom), and the reduced system in the 2(2N+1) outgoing
coefficients is solved through a Schur complement that reuses the cached cell
factorization -- one solve per trace column plus one for the incident load,
2(2N+1)+1 in total.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import spectral
from .assembly import solve_cell
from .materials import coercivity_margin, eval_permittivity
from .spectral import ModeVector

__all__ = [
    "FrequencySolution",
    "solve_frequency",
    "transmission_residuals",
    "AssumptionViolated",
]

RESIDUAL_GATE = 1e-8


class AssumptionViolated(RuntimeError):
    """Material positivity margin fell below the required bound at this s."""


@dataclass
class FrequencySolution:
    s: complex
    w_hat: np.ndarray              # interior DOF values
    lambda_h_minus: ModeVector
    lambda_h_plus: ModeVector
    lambda_0_minus: ModeVector
    lambda_0_plus: ModeVector
    w_s_modes: np.ndarray          # outgoing expansion below, n = -N..N
    w_t_modes: np.ndarray          # outgoing expansion above
    residuals: tuple               # relative residuals of the 4 trace equations


def check_margins(materials, s, d1, gamma0=None):
    if gamma0 is None:
        gamma0 = materials.required_margin(d1)
    slack = 1e-9 * max(1.0, abs(gamma0))
    for model in materials.all_models():
        m = coercivity_margin(model, s, d1)
        if m < gamma0 - slack:
            raise AssumptionViolated(
                f"margin {m:.6g} < required {gamma0:.6g} at s={s} for {model}"
            )


def solve_frequency(ops, materials, geom, eta, s, fhat_sample, gamma0=None):
    """Solve the coupled cell/mode system at one s.

    ``ops`` is a :class:`assembly.CellOperators`; its mode truncation sets N.
    ``fhat_sample`` is the transform sample of the incident pulse at this s.
    """
    s = complex(s)
    check_margins(materials, s, geom.d1, gamma0)

    cell = ops.assemble(materials, s, geom, eta)
    N = ops.n_modes
    L = ops.mode_gram
    w_imp = s / geom.c * eta

    bhat1 = eval_permittivity(materials.above, s)
    table = spectral.build_kappa_table(s, geom.c, geom.d1, geom.L, N, bhat1)
    mult_b = spectral.reflection_multipliers(table, eta, "bottom")
    mult_t = spectral.reflection_multipliers(table, eta, "top")
    f_minus, f_plus = spectral.incident_impedance_data(s, fhat_sample, geom, eta, N)

    T0 = cell.trace_bottom
    TH = cell.trace_top

    # cell solves against every trace column and the incident load
    b0 = solve_cell(cell, T0.conj().T @ f_minus.coeffs)
    XH = solve_cell(cell, TH.conj().T)
    X0 = solve_cell(cell, T0.conj().T)

    TH_XH = TH @ XH
    TH_X0 = TH @ X0
    T0_XH = T0 @ XH
    T0_X0 = T0 @ X0

    m = 2 * N + 1
    S = np.zeros((2 * m, 2 * m), dtype=complex)
    S[:m, :m] = L * np.diag(mult_t - 1.0) - 2.0 * w_imp * TH_XH * mult_t[None, :]
    S[:m, m:] = -2.0 * w_imp * TH_X0 * mult_b[None, :]
    S[m:, :m] = -2.0 * w_imp * T0_XH * mult_t[None, :]
    S[m:, m:] = L * np.diag(mult_b - 1.0) - 2.0 * w_imp * T0_X0 * mult_b[None, :]

    rhs = np.concatenate([
        2.0 * w_imp * (TH @ b0),
        L * (f_plus.coeffs - f_minus.coeffs) + 2.0 * w_imp * (T0 @ b0),
    ])
    lam = np.linalg.solve(S, rhs)
    lam_h_plus = lam[:m]
    lam_0_plus = lam[m:]

    w_hat = b0 + XH @ (mult_t * lam_h_plus) + X0 @ (mult_b * lam_0_plus)
    lam_h_minus = mult_t * lam_h_plus
    lam_0_minus = mult_b * lam_0_plus + f_minus.coeffs

    sol = FrequencySolution(
        s=s,
        w_hat=w_hat,
        lambda_h_minus=ModeVector(N, lam_h_minus, "top", "minus"),
        lambda_h_plus=ModeVector(N, lam_h_plus, "top", "plus"),
        lambda_0_minus=ModeVector(N, lam_0_minus, "bottom", "minus"),
        lambda_0_plus=ModeVector(N, lam_0_plus, "bottom", "plus"),
        w_s_modes=-lam_0_plus / (table.kappa_s + w_imp),
        w_t_modes=-lam_h_plus / (table.kappa_t + w_imp),
        residuals=(),
    )
    res = transmission_residuals(sol, ops, table, eta, f_minus, f_plus, geom)
    sol.residuals = res
    if max(res) > RESIDUAL_GATE:
        raise AssumptionViolated(
            f"transmission residuals {res} exceed {RESIDUAL_GATE} at s={s}"
        )
    return sol


def transmission_residuals(sol, ops, table, eta, f_minus, f_plus, geom):
    """Relative residuals of the four boundary equations, evaluated a posteriori.

    All four are normalized by the incident data norm, so a zero solution
    against nonzero data reads as residual 1, and equations whose terms have
    decayed to roundoff (high |s| contour points) do not report noise ratios.
    """
    L = ops.mode_gram
    w_imp = sol.s / geom.c * eta
    mult_b = spectral.reflection_multipliers(table, eta, "bottom")
    mult_t = spectral.reflection_multipliers(table, eta, "top")
    tr_top = ops.trace_top @ sol.w_hat
    tr_bot = ops.trace_bottom @ sol.w_hat

    scale = max(
        L * np.linalg.norm(f_minus.coeffs),
        L * np.linalg.norm(f_plus.coeffs),
        1e-300,
    )

    def rel(lhs_terms, rhs):
        total = sum(lhs_terms) - rhs
        return float(np.linalg.norm(total) / scale)

    lam_hm = sol.lambda_h_minus.coeffs
    lam_hp = sol.lambda_h_plus.coeffs
    lam_0m = sol.lambda_0_minus.coeffs
    lam_0p = sol.lambda_0_plus.coeffs

    r_top_jump = rel([L * lam_hm, -2.0 * w_imp * tr_top, -L * lam_hp],
                     np.zeros_like(lam_hm))
    r_top_refl = rel([L * lam_hm], L * (mult_t * lam_hp))
    r_bot_refl = rel([L * lam_0m, -L * (mult_b * lam_0p)], L * f_minus.coeffs)
    r_bot_jump = rel([L * lam_0m, -2.0 * w_imp * tr_bot, -L * lam_0p],
                     L * f_plus.coeffs)
    return (r_top_jump, r_top_refl, r_bot_refl, r_bot_jump)
