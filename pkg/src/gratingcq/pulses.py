"""Incident pulse profiles and plane-wave geometry.

The incident field in the moving frame is ``w_i(x, z, t) = f(t - L d1/c - d2 z/c)``
for a causal profile ``f``; it is independent of x.  Two profiles are
provided: a compactly supported ``sin^m`` window (smoothness order m) and a
Gaussian-modulated sine, which is only numerically causal (its value at t=0
is ~e^-18 for the stock parameters) -- :func:`causality_check` accepts tails
below 1e-7.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "SinMPulse",
    "GaussSinePulse",
    "IncidentGeometry",
    "eval_pulse",
    "eval_pulse_derivative",
    "incident_trace_at_z",
    "causality_check",
]

CAUSALITY_TOL = 1e-7


@dataclass(frozen=True)
class SinMPulse:
    """sin^m(alpha (t - beta)) on beta < t < beta + pi/alpha, zero outside."""

    m: int = 4
    alpha: float = 4.0
    beta: float = 0.5

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("pulse order m must be >= 1")
        if not self.alpha > 0:
            raise ValueError("pulse rate alpha must be positive")

    @property
    def support(self):
        return (self.beta, self.beta + math.pi / self.alpha)

    def value(self, t):
        t = np.asarray(t, dtype=float)
        lo, hi = self.support
        inside = (t > lo) & (t < hi)
        out = np.zeros_like(t)
        out[inside] = np.sin(self.alpha * (t[inside] - self.beta)) ** self.m
        return out if out.ndim else float(out)

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        lo, hi = self.support
        inside = (t > lo) & (t < hi)
        out = np.zeros_like(t)
        arg = self.alpha * (t[inside] - self.beta)
        out[inside] = self.m * self.alpha * np.sin(arg) ** (self.m - 1) * np.cos(arg)
        return out if out.ndim else float(out)


@dataclass(frozen=True)
class GaussSinePulse:
    """sin(omega0 t) * exp(-spread (t - center)^2)."""

    omega0: float = 2.899
    spread: float = 2.0
    center: float = 3.0

    def value(self, t):
        t = np.asarray(t, dtype=float)
        out = np.sin(self.omega0 * t) * np.exp(-self.spread * (t - self.center) ** 2)
        return out if out.ndim else float(out)

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        env = np.exp(-self.spread * (t - self.center) ** 2)
        out = (
            self.omega0 * np.cos(self.omega0 * t)
            - 2.0 * self.spread * (t - self.center) * np.sin(self.omega0 * t)
        ) * env
        return out if out.ndim else float(out)


def eval_pulse(pulse, t):
    return pulse.value(t)


def eval_pulse_derivative(pulse, t):
    return pulse.derivative(t)


@dataclass(frozen=True)
class IncidentGeometry:
    """Propagation direction (d1, d2), period L and wave speed below the cell.

    d = (d1, d2) is a unit vector with d2 > 0 (wave travels upward into the
    cell).  Two angle conventions are used in practice: an elevation angle
    measured from the horizontal x axis (normal incidence at 90 degrees), and
    a deviation angle from the vertical (normal incidence at 0, d1 = sin
    theta).  Both constructors are provided; presets use the deviation form.
    """

    d1: float
    d2: float
    L: float = 1.0
    c: float = 1.0

    def __post_init__(self):
        if abs(self.d1**2 + self.d2**2 - 1.0) > 1e-12:
            raise ValueError("direction (d1, d2) must be a unit vector")
        if not self.d2 > 0:
            raise ValueError("d2 must be positive (upward propagation)")
        if not (self.L > 0 and self.c > 0):
            raise ValueError("L and c must be positive")

    @classmethod
    def from_elevation_deg(cls, alpha_deg, L=1.0, c=1.0):
        a = math.radians(alpha_deg)
        if not 0.0 < a < math.pi:
            raise ValueError("elevation angle must lie in (0, 180) degrees")
        return cls(d1=math.cos(a), d2=math.sin(a), L=L, c=c)

    @classmethod
    def from_normal_deviation_deg(cls, theta_deg, L=1.0, c=1.0):
        th = math.radians(theta_deg)
        if not -math.pi / 2 < th < math.pi / 2:
            raise ValueError("deviation angle must lie in (-90, 90) degrees")
        return cls(d1=math.sin(th), d2=math.cos(th), L=L, c=c)

    @property
    def trace_delay(self):
        """Time offset L d1 / c of the incident trace at z = 0."""
        return self.L * self.d1 / self.c


def incident_trace_at_z(pulse, geom, z, t_samples):
    """Moving-frame incident trace f(t_n - L d1/c - d2 z/c); x independent."""
    t = np.asarray(t_samples, dtype=float)
    return eval_pulse(pulse, t - geom.trace_delay - geom.d2 * z / geom.c)


def causality_check(pulse, geom, H, n_samples=4001):
    """True when the pulse is (numerically) silent in the cell for t < 0.

    Requires d1 >= 0 and d2 > 0, and |f| below ``CAUSALITY_TOL`` on a fine
    grid of negative times long enough to cover the transit across height H.
    """
    if geom.d1 < 0 or not geom.d2 > 0:
        return False
    horizon = (geom.L * abs(geom.d1) + geom.d2 * H) / geom.c + 10.0
    t = np.linspace(-horizon, 0.0, n_samples)
    return bool(np.max(np.abs(eval_pulse(pulse, t))) <= CAUSALITY_TOL)
