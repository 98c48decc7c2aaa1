"""Convolution-quadrature time stepping via Laplace-contour solves.

A-stable multistep rules (backward Euler, BDF2) define a symbol gamma(zeta);
time stepping the wave problem is equivalent to solving the Laplace-domain
problem at the contour frequencies s_l = gamma(r exp(-2 pi i l / (M+1))) / dt
and mapping between time samples and contour values with radius-scaled DFTs.
The contour radius r = eps_cq^(1/(2(M+1))) balances aliasing (r^(M+1))
against roundoff amplification (r^-M).

The frequency solves are independent and may run on a thread pool; results
are keyed by contour index so the reduction is deterministic regardless of
completion order.  For real time-domain data the solution at conjugate
frequencies is the conjugate (with mode index flipped for boundary
expansions), so only half the contour is solved unless ``half_contour`` is
disabled.

Scaled DFTs of 1-D sample sequences run in extended precision (direct
transform, exact integer phase reduction, pairwise-tree summation) because
the r^-M amplification at the default eps_cq is ~1e7 and plain double FFT
roundoff would dominate small tails; multidimensional field arrays use the
standard FFT, whose error after amplification sits far below the solver
tolerances for smooth transforms.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import mesh as meshmod
from .assembly import CellOperators
from .freqsolve import check_margins, solve_frequency
from .pulses import eval_pulse

__all__ = [
    "MultistepRule",
    "BACKWARD_EULER",
    "BDF2",
    "rule_from_name",
    "multistep_symbol",
    "CqPlan",
    "make_plan",
    "scaled_forward_dft",
    "scaled_inverse_dft",
    "FieldMovie",
    "run_cq",
    "multistep_derivative",
    "discrete_time_derivative",
    "lab_frame_trace",
    "ContourTouchesAxis",
    "PartialContourFailure",
]

DEFAULT_EPS_CQ = 1e-14
# direct extended-precision transform cutoff (O(N^2) work and memory)
_DIRECT_MAX = 2100


class ContourTouchesAxis(RuntimeError):
    """A contour frequency landed on or left of the imaginary axis."""


class PartialContourFailure(RuntimeError):
    """Some frequency solves failed; carries the failing contour indices."""

    def __init__(self, failures):
        self.failures = failures
        lines = ", ".join(f"l={l}: {e}" for l, e in failures[:5])
        more = "" if len(failures) <= 5 else f" (+{len(failures) - 5} more)"
        super().__init__(f"{len(failures)} contour solves failed: {lines}{more}")


@dataclass(frozen=True)
class MultistepRule:
    kind: str      # 'be' | 'bdf2'
    order: int

    def __post_init__(self):
        if self.kind not in ("be", "bdf2"):
            raise ValueError(f"unknown multistep rule {self.kind!r}")


BACKWARD_EULER = MultistepRule("be", 1)
BDF2 = MultistepRule("bdf2", 2)


def rule_from_name(name):
    name = name.strip().lower()
    if name in ("be", "backward_euler", "euler"):
        return BACKWARD_EULER
    if name == "bdf2":
        return BDF2
    raise ValueError(f"unknown time stepping rule {name!r}")


def multistep_symbol(rule, zeta):
    """gamma(zeta): 1 - zeta for BE, 3/2 - 2 zeta + zeta^2/2 for BDF2."""
    zeta = np.asarray(zeta, dtype=complex)
    if rule.kind == "be":
        out = 1.0 - zeta
    else:
        out = 1.5 - 2.0 * zeta + 0.5 * zeta * zeta
    return out if out.ndim else complex(out)


@dataclass(frozen=True)
class CqPlan:
    rule: MultistepRule
    dt: float
    n_steps: int                  # M; time points t_n = n dt, n = 0..M
    eps_cq: float
    radius: float
    zetas: np.ndarray             # (M+1,) contour points in the zeta plane
    frequencies: np.ndarray       # (M+1,) s_l = gamma(zeta_l) / dt

    @property
    def n_points(self):
        return self.n_steps + 1

    @property
    def times(self):
        return np.arange(self.n_points) * self.dt

    def half_indices(self):
        """Indices to solve when exploiting conjugate symmetry (l <= N/2)."""
        return range(self.n_points // 2 + 1)

    def conjugate_of(self, l):
        return (self.n_points - l) % self.n_points


def make_plan(rule, dt, n_steps, eps_cq=DEFAULT_EPS_CQ, materials=None, d1=0.0,
              gamma0=None):
    """Contour plan for M = n_steps: radius, frequencies, sanity checks.

    When ``materials`` is given, the coercivity margin is asserted at every
    contour frequency (raising :class:`freqsolve.AssumptionViolated`).
    """
    if not dt > 0 or n_steps < 0:
        raise ValueError("need dt > 0 and n_steps >= 0")
    n_pts = n_steps + 1
    radius = eps_cq ** (1.0 / (2.0 * n_pts))
    ell = np.arange(n_pts)
    zetas = radius * np.exp(-2j * np.pi * ell / n_pts)
    freqs = multistep_symbol(rule, zetas) / dt
    if np.any(freqs.real <= 0.0):
        bad = int(np.argmin(freqs.real))
        raise ContourTouchesAxis(
            f"Re(s_{bad}) = {freqs.real[bad]:.3e} <= 0 on the contour"
        )
    if materials is not None:
        for s in freqs:
            check_margins(materials, complex(s), d1, gamma0)
    return CqPlan(
        rule=rule, dt=float(dt), n_steps=int(n_steps), eps_cq=float(eps_cq),
        radius=float(radius), zetas=zetas, frequencies=freqs,
    )


# ------------------------------------------------------------- scaled DFTs

def _fold_sum(a, axis):
    """Pairwise-tree reduction (error grows with log N, not N)."""
    a = np.moveaxis(a, axis, 0)
    m = a.shape[0]
    p = 1
    while p < m:
        p *= 2
    if p != m:
        a = np.concatenate(
            [a, np.zeros((p - m,) + a.shape[1:], dtype=a.dtype)], axis=0
        )
    while a.shape[0] > 1:
        a = a[0::2] + a[1::2]
    return a[0]


def _direct_dft_matrix(n_pts, sign):
    """exp(sign * 2 pi i (l n mod N) / N) in extended precision."""
    idx = np.outer(np.arange(n_pts), np.arange(n_pts)) % n_pts
    two_pi = 2.0 * np.arccos(np.longdouble(-1.0))
    theta = two_pi * idx.astype(np.longdouble) / np.longdouble(n_pts)
    return np.exp(np.clongdouble(sign * 1j) * theta)


def _radius_powers_ld(radius, n_pts, sign):
    ln_r = np.log(np.longdouble(radius))
    return np.exp(sign * np.arange(n_pts, dtype=np.longdouble) * ln_r)


def scaled_forward_dft(samples, radius):
    """ghat_l = sum_n g_n radius^n exp(-2 pi i n l / N) over N = len(samples).

    1-D inputs use the extended-precision direct transform; larger or
    multidimensional inputs use the FFT along axis 0.
    """
    g = np.asarray(samples)
    n_pts = g.shape[0]
    if g.ndim == 1 and n_pts <= _DIRECT_MAX:
        gl = g.astype(np.clongdouble) * _radius_powers_ld(radius, n_pts, +1)
        out = _fold_sum(_direct_dft_matrix(n_pts, -1) * gl[None, :], axis=1)
        return out.astype(complex)
    scale = radius ** np.arange(n_pts, dtype=float)
    shape = (n_pts,) + (1,) * (g.ndim - 1)
    return np.fft.fft(g * scale.reshape(shape), axis=0)


def scaled_inverse_dft(values, radius):
    """v_n = radius^-n / N sum_l V_l exp(+2 pi i n l / N); inverse of forward."""
    V = np.asarray(values, dtype=complex)
    n_pts = V.shape[0]
    if V.ndim == 1 and n_pts <= _DIRECT_MAX:
        acc = _fold_sum(_direct_dft_matrix(n_pts, +1) * V.astype(np.clongdouble)[None, :],
                        axis=1)
        acc *= _radius_powers_ld(radius, n_pts, -1) / np.longdouble(n_pts)
        return acc.astype(complex)
    scale = radius ** (-np.arange(n_pts, dtype=float))
    shape = (n_pts,) + (1,) * (V.ndim - 1)
    return np.fft.ifft(V, axis=0) * scale.reshape(shape)


# ---------------------------------------------------------------- the run

@dataclass
class FieldMovie:
    """Time-indexed solution: nodal fields, mode histories, probe traces."""

    times: np.ndarray
    fields: np.ndarray             # (M+1, n_dofs) real
    modes_bottom: np.ndarray       # (M+1, 2N+1) complex outgoing expansion
    modes_top: np.ndarray
    probe_traces: np.ndarray       # (M+1, n_probes) real
    probes: tuple
    rule: MultistepRule
    dt: float
    plan: CqPlan
    mesh: object
    dofmap: object
    geom: object
    max_imag_residual: float = 0.0
    residual_max: float = 0.0      # worst frequency-solve trace residual

    @property
    def n_steps(self):
        return len(self.times) - 1

    def peak(self):
        return float(np.max(np.abs(self.fields))) if self.fields.size else 0.0


def _flip_modes(arr):
    """Mode index n -> -n along the last axis."""
    return arr[..., ::-1]


def run_cq(mesh, materials, geom, pulse, rule, dt, n_steps, *, n_modes=10,
           eta=1.0, probes=(), eps_cq=DEFAULT_EPS_CQ, half_contour=True,
           workers=1, dofmap=None, ops=None):
    """March the scattering problem to T = n_steps * dt.

    Returns a :class:`FieldMovie`.  ``probes`` is a sequence of (x, z) points
    sampled by bilinear interpolation at every step.
    """
    if dofmap is None:
        dofmap = meshmod.build_dofmap(mesh)
    if ops is None:
        ops = CellOperators(mesh, dofmap, n_modes)
    plan = make_plan(rule, dt, n_steps, eps_cq, materials=materials, d1=geom.d1)
    n_pts = plan.n_points

    samples = eval_pulse(pulse, plan.times)
    data_real = bool(np.isrealobj(samples))
    fhat = scaled_forward_dft(samples, plan.radius)

    real_coefficients = data_real and _materials_real(materials)
    use_half = half_contour and real_coefficients
    solve_set = list(plan.half_indices()) if use_half else list(range(n_pts))

    n_dofs = dofmap.n_dofs
    m = 2 * n_modes + 1
    V_field = np.zeros((n_pts, n_dofs), dtype=complex)
    V_bot = np.zeros((n_pts, m), dtype=complex)
    V_top = np.zeros((n_pts, m), dtype=complex)
    residual_max = 0.0

    gamma0 = materials.required_margin(geom.d1)

    def solve_one(l):
        s = complex(plan.frequencies[l])
        sol = solve_frequency(ops, materials, geom, eta, s, complex(fhat[l]),
                              gamma0=gamma0)
        return l, sol.w_hat, sol.w_s_modes, sol.w_t_modes, max(sol.residuals)

    failures = []
    results = []
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for fut in [pool.submit(solve_one, l) for l in solve_set]:
                try:
                    results.append(fut.result())
                except Exception as exc:   # noqa: BLE001 - reported collectively
                    failures.append((None, exc))
    else:
        for l in solve_set:
            try:
                results.append(solve_one(l))
            except Exception as exc:       # noqa: BLE001
                failures.append((l, exc))
    if failures:
        raise PartialContourFailure(failures)

    for l, w_hat, w_s, w_t, res in results:
        V_field[l] = w_hat
        V_bot[l] = w_s
        V_top[l] = w_t
        residual_max = max(residual_max, res)

    if use_half:
        for l in solve_set:
            lc = plan.conjugate_of(l)
            if lc == l:
                continue
            V_field[lc] = np.conj(V_field[l])
            V_bot[lc] = _flip_modes(np.conj(V_bot[l]))
            V_top[lc] = _flip_modes(np.conj(V_top[l]))

    w_steps = scaled_inverse_dft(V_field, plan.radius)
    peak = float(np.max(np.abs(w_steps.real))) if w_steps.size else 0.0
    imag_residual = float(np.max(np.abs(w_steps.imag))) if w_steps.size else 0.0
    fields = np.ascontiguousarray(w_steps.real)

    modes_bottom = scaled_inverse_dft(V_bot, plan.radius)
    modes_top = scaled_inverse_dft(V_top, plan.radius)

    probes = tuple(tuple(map(float, p)) for p in probes)
    if probes:
        probe_traces = meshmod.interpolate_at(mesh, dofmap, fields, probes)
    else:
        probe_traces = np.zeros((n_pts, 0))

    return FieldMovie(
        times=plan.times, fields=fields,
        modes_bottom=modes_bottom, modes_top=modes_top,
        probe_traces=probe_traces, probes=probes,
        rule=rule, dt=plan.dt, plan=plan,
        mesh=mesh, dofmap=dofmap, geom=geom,
        max_imag_residual=imag_residual if peak == 0.0 else imag_residual / peak,
        residual_max=residual_max,
    )


def _materials_real(materials):
    from .materials import Constant

    for model in materials.all_models():
        if isinstance(model, Constant) and model.value.imag != 0.0:
            return False
    return True


# ----------------------------------------------------- discrete derivative

def multistep_derivative(series, dt, rule):
    """Causal finite-difference derivative of a step-indexed array (axis 0).

    Backward Euler: (w_n - w_{n-1}) / dt.  BDF2:
    (3/2 w_n - 2 w_{n-1} + 1/2 w_{n-2}) / dt.  History before step 0 is zero.
    """
    w = np.asarray(series)
    out = np.zeros_like(w, dtype=np.result_type(w, float))
    if rule.kind == "be":
        out[0] = w[0] / dt
        out[1:] = (w[1:] - w[:-1]) / dt
    else:
        out[0] = 1.5 * w[0] / dt
        if len(w) > 1:
            out[1] = (1.5 * w[1] - 2.0 * w[0]) / dt
        if len(w) > 2:
            out[2:] = (1.5 * w[2:] - 2.0 * w[1:-1] + 0.5 * w[:-2]) / dt
    return out


def discrete_time_derivative(movie, rule=None):
    """FieldMovie of the rule's causal time-difference of all stored series."""
    rule = rule or movie.rule
    return FieldMovie(
        times=movie.times,
        fields=multistep_derivative(movie.fields, movie.dt, rule),
        modes_bottom=multistep_derivative(movie.modes_bottom, movie.dt, rule),
        modes_top=multistep_derivative(movie.modes_top, movie.dt, rule),
        probe_traces=multistep_derivative(movie.probe_traces, movie.dt, rule),
        probes=movie.probes, rule=rule, dt=movie.dt, plan=movie.plan,
        mesh=movie.mesh, dofmap=movie.dofmap, geom=movie.geom,
        max_imag_residual=movie.max_imag_residual,
        residual_max=movie.residual_max,
    )


def lab_frame_trace(movie, probe_index, clamp=True):
    """Probe trace in the lab frame: u(x,z,t) = w(x,z,t - (x-L) d1/c).

    Post-processing by linear interpolation in time.  For x < L the shift
    looks into the future of w; samples beyond the final time are clamped to
    the last value (or zero when ``clamp`` is false).
    """
    geom = movie.geom
    x = movie.probes[probe_index][0]
    shift = -(x - geom.L) * geom.d1 / geom.c
    w = movie.probe_traces[:, probe_index]
    t_needed = movie.times + shift
    right = w[-1] if clamp else 0.0
    return np.interp(t_needed, movie.times, w, left=0.0, right=right)
