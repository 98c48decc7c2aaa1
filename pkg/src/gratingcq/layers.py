"""Analytic reference solutions for flat layered media.

Two tools used to verify the solver:

* the time-domain two-layer solution at normal incidence, with reflection
  coefficient r = (sqrt(ep) - sqrt(em)) / (sqrt(ep) + sqrt(em)) and
  transmission t = 1 + r.  Conventions follow the classic traveling-wave
  derivation where the incident pulse runs at speed c/sqrt(eps_plus) below
  the interface and the transmitted one at c/sqrt(eps_minus) above it;
  eps_plus is the incidence-side permittivity.

* a Laplace-domain 1-D layered solver (interface matching with decay
  conditions at +/- infinity), usable with complex per-layer coefficients as
  a manufactured-solution oracle for the FEM and coupled-system paths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .pulses import eval_pulse, eval_pulse_derivative

__all__ = [
    "TwoLayerConfig",
    "reflection_transmission_coeffs",
    "exact_field",
    "exact_field_dz",
    "frame_delay",
    "LayeredSolution",
    "layered_frequency_oracle",
    "DegenerateLayer",
]


class DegenerateLayer(ValueError):
    """Interior layer with non-positive thickness."""


@dataclass(frozen=True)
class TwoLayerConfig:
    """Two half spaces separated by an interface at height h_i.

    eps_plus is the incidence-side (below interface) permittivity, eps_minus
    the far-side one; c is the reference speed entering the traveling-wave
    arguments.
    """

    eps_minus: float
    eps_plus: float
    h_i: float
    c: float = 1.0

    def __post_init__(self):
        if not (self.eps_minus > 0 and self.eps_plus > 0):
            raise ValueError("permittivities must be positive")
        if not self.c > 0:
            raise ValueError("reference speed must be positive")


def reflection_transmission_coeffs(cfg):
    """(r, t) with r = (sp - sm)/(sp + sm), t = 2 sp/(sp + sm); t = 1 + r."""
    sp_ = math.sqrt(cfg.eps_plus)
    sm = math.sqrt(cfg.eps_minus)
    r = (sp_ - sm) / (sp_ + sm)
    t = 2.0 * sp_ / (sp_ + sm)
    return r, t


def exact_field(cfg, pulse, x, z, t):
    """Total field of the two-layer problem at normal incidence.

    Independent of x.  Below the interface: incident plus reflected pulse;
    above: transmitted pulse.  Time is measured so the incident pulse crosses
    the interface at the pulse's own support times.
    """
    r, tc = reflection_transmission_coeffs(cfg)
    z = np.asarray(z, dtype=float)
    t = np.asarray(t, dtype=float)
    sp_ = math.sqrt(cfg.eps_plus)
    sm = math.sqrt(cfg.eps_minus)
    dz = z - cfg.h_i
    below = eval_pulse(pulse, -sp_ / cfg.c * dz + t) + r * eval_pulse(
        pulse, sp_ / cfg.c * dz + t
    )
    above = tc * eval_pulse(pulse, -sm / cfg.c * dz + t)
    out = np.where(dz < 0.0, below, above)
    return out if out.ndim else float(out)


def exact_field_dz(cfg, pulse, x, z, t):
    """z derivative of :func:`exact_field` (analytic pulse derivative)."""
    r, tc = reflection_transmission_coeffs(cfg)
    z = np.asarray(z, dtype=float)
    t = np.asarray(t, dtype=float)
    sp_ = math.sqrt(cfg.eps_plus)
    sm = math.sqrt(cfg.eps_minus)
    dz = z - cfg.h_i
    below = (-sp_ / cfg.c) * eval_pulse_derivative(pulse, -sp_ / cfg.c * dz + t) + (
        sp_ / cfg.c
    ) * r * eval_pulse_derivative(pulse, sp_ / cfg.c * dz + t)
    above = (-sm / cfg.c) * tc * eval_pulse_derivative(pulse, -sm / cfg.c * dz + t)
    out = np.where(dz < 0.0, below, above)
    return out if out.ndim else float(out)


def frame_delay(cfg):
    """Offset between solver time (pulse trace f(t) at z=0) and oracle time.

    The oracle references the pulse to the interface; a solver whose incident
    trace at z = 0 is f(t) sees the oracle field delayed by
    sqrt(eps_plus) h_i / c.
    """
    return math.sqrt(cfg.eps_plus) * cfg.h_i / cfg.c


@dataclass
class LayeredSolution:
    """Laplace-domain field of a 1-D layered stack, incidence from below."""

    s: complex
    c: float
    interfaces: np.ndarray        # increasing z positions, len = n_layers - 1
    eps: list                     # per-layer coefficients, bottom to top
    kappas: np.ndarray            # per-layer vertical constants, Re > 0
    amplitudes: np.ndarray        # (n_layers, 2): decaying-up / decaying-down
    reflection: complex           # scattered amplitude at the first interface
    transmission: complex         # transmitted amplitude at the last interface
    incident_amplitude: complex

    def field(self, z):
        """Total field at heights z (scalar or array)."""
        z = np.atleast_1d(np.asarray(z, dtype=float))
        out = np.zeros(z.shape, dtype=complex)
        edges = self.interfaces
        nlay = len(self.eps)
        layer = np.searchsorted(edges, z, side="right")
        for j in range(nlay):
            sel = layer == j
            if not np.any(sel):
                continue
            zj = z[sel]
            kap = self.kappas[j]
            a_up, a_dn = self.amplitudes[j]
            if j == 0:
                zref = edges[0]
                out[sel] = (
                    self.incident_amplitude * np.exp(-kap * (zj - zref))
                    + a_dn * np.exp(kap * (zj - zref))
                )
            elif j == nlay - 1:
                zref = edges[-1]
                out[sel] = a_up * np.exp(-kap * (zj - zref))
            else:
                zlo, zhi = edges[j - 1], edges[j]
                out[sel] = a_up * np.exp(-kap * (zj - zlo)) + a_dn * np.exp(
                    -kap * (zhi - zj)
                )
        return out if out.shape != (1,) else complex(out[0])


def layered_frequency_oracle(layers, s, c, first_interface_z=0.0, incident_amplitude=1.0):
    """Solve the 1-D Laplace-domain layered problem at normal incidence.

    ``layers`` is a bottom-to-top list of (eps, thickness); the first and last
    thickness values are ignored (half spaces).  The incident wave
    exp(-kappa_0 (z - z_1)) carries ``incident_amplitude`` at the first
    interface; the scattered part decays downward and the transmitted part
    decays upward, as required for Re(s) > 0.
    """
    s = complex(s)
    if not s.real > 0:
        raise ValueError(f"need Re(s) > 0, got {s}")
    eps = [complex(e) for e, _ in layers]
    thick = [th for _, th in layers]
    nlay = len(layers)
    if nlay < 2:
        raise ValueError("need at least two layers (two half spaces)")
    for th in thick[1:-1]:
        if th is None or not th > 0:
            raise DegenerateLayer(f"interior layer with thickness {th!r}")

    kappas = np.array([np.sqrt((s / c) ** 2 * e) for e in eps])
    kappas = np.where(kappas.real < 0, -kappas, kappas)

    interfaces = np.concatenate([[first_interface_z],
                                 first_interface_z + np.cumsum(thick[1:-1])])

    # unknowns: R (down-going in layer 0), then (a_up, a_dn) per interior
    # layer, then T (up-going in last layer)
    nunk = 2 + 2 * (nlay - 2)
    A = np.zeros((nunk, nunk), dtype=complex)
    b = np.zeros(nunk, dtype=complex)

    def unknowns_of(j):
        """Column indices of (decaying-up, decaying-down) amplitudes in layer j."""
        if j == 0:
            return None, 0
        if j == nlay - 1:
            return nunk - 1, None
        return 1 + 2 * (j - 1), 2 + 2 * (j - 1)

    def value_and_slope(j, z, col_scale=1.0):
        """Rows of (value, d/dz) contributions of layer j's unknowns at z."""
        kap = kappas[j]
        cols = {}
        inc_val = inc_slope = 0.0
        up, dn = unknowns_of(j)
        if j == 0:
            zref = interfaces[0]
            inc_val = incident_amplitude * np.exp(-kap * (z - zref))
            inc_slope = -kap * inc_val
            cols[dn] = (np.exp(kap * (z - zref)), kap * np.exp(kap * (z - zref)))
        elif j == nlay - 1:
            zref = interfaces[-1]
            cols[up] = (np.exp(-kap * (z - zref)), -kap * np.exp(-kap * (z - zref)))
        else:
            zlo, zhi = interfaces[j - 1], interfaces[j]
            eu = np.exp(-kap * (z - zlo))
            ed = np.exp(-kap * (zhi - z))
            cols[up] = (eu, -kap * eu)
            cols[dn] = (ed, kap * ed)
        return cols, inc_val, inc_slope

    row = 0
    for i in range(nlay - 1):
        zi = interfaces[i]
        lo_cols, lo_iv, lo_is = value_and_slope(i, zi)
        hi_cols, hi_iv, hi_is = value_and_slope(i + 1, zi)
        for col, (v, _) in lo_cols.items():
            A[row, col] += v
        for col, (v, _) in hi_cols.items():
            A[row, col] -= v
        b[row] = hi_iv - lo_iv
        row += 1
        for col, (_, g) in lo_cols.items():
            A[row, col] += g
        for col, (_, g) in hi_cols.items():
            A[row, col] -= g
        b[row] = hi_is - lo_is
        row += 1

    sol = np.linalg.solve(A, b)
    amplitudes = np.zeros((nlay, 2), dtype=complex)
    amplitudes[0] = (0.0, sol[0])
    for j in range(1, nlay - 1):
        up, dn = unknowns_of(j)
        amplitudes[j] = (sol[up], sol[dn])
    amplitudes[-1] = (sol[-1], 0.0)

    return LayeredSolution(
        s=s, c=c, interfaces=interfaces, eps=eps, kappas=kappas,
        amplitudes=amplitudes,
        reflection=complex(sol[0]),
        transmission=complex(sol[-1]),
        incident_amplitude=complex(incident_amplitude),
    )
