"""Batch run orchestration: config -> solver objects -> artifacts on disk.

A run directory receives ``manifest.cfg`` (the full input echo plus
``result.*`` keys; feeding a manifest back to ``solve`` reproduces the run),
probe and mode-history CSVs, optional per-step field dumps with rendered
density figures, and, for convergence studies, error tables with observed
rates and a log-log figure.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from . import cq, mesh as meshmod, reports
from .assembly import CellOperators
from .config import Config, ConfigError
from .layers import TwoLayerConfig, exact_field, frame_delay
from .materials import Constant, Drude, MaterialMap, Sellmeier, sf11_glass
from .pulses import GaussSinePulse, IncidentGeometry, SinMPulse, causality_check
from .spectral import build_kappa_table

__all__ = [
    "build_geometry",
    "build_pulse",
    "build_materials",
    "build_mesh",
    "build_probes",
    "validate_run",
    "compute_errors",
    "ErrorTable",
    "solve_run",
    "study_run",
    "run",
]


# ------------------------------------------------------------ construction

def build_geometry(cfg):
    L = cfg.get_float("geometry.L", 1.0)
    c = cfg.get_float("solver.c", 1.0)
    angle = cfg.get_float("incidence.angle_deg", 0.0)
    if cfg.get_bool("incidence.from_horizontal", False):
        return IncidentGeometry.from_elevation_deg(angle, L=L, c=c)
    return IncidentGeometry.from_normal_deviation_deg(angle, L=L, c=c)


def build_pulse(cfg):
    kind = cfg.get_str("pulse.kind", "sin_m")
    if kind == "sin_m":
        return SinMPulse(
            m=cfg.get_int("pulse.m", 4),
            alpha=cfg.get_float("pulse.alpha", 4.0),
            beta=cfg.get_float("pulse.beta", 0.5),
        )
    if kind == "gauss_sine":
        return GaussSinePulse(
            omega0=cfg.get_float("pulse.omega0", 2.899),
            spread=cfg.get_float("pulse.spread", 2.0),
            center=cfg.get_float("pulse.center", 3.0),
        )
    raise ConfigError(f"unknown pulse.kind {kind!r}")


def _material_from(cfg, prefix):
    kind = cfg.get_str(prefix + ".kind")
    if kind is None:
        raise ConfigError(f"missing {prefix}.kind")
    if kind == "constant":
        value = cfg.require(prefix + ".value")
        if isinstance(value, list):
            raise ConfigError(f"{prefix}.value must be a single number")
        return Constant(complex(value))
    if kind == "drude":
        return Drude(
            alpha=cfg.get_float(prefix + ".alpha"),
            beta=cfg.get_float(prefix + ".beta"),
            gamma=cfg.get_float(prefix + ".gamma", 0.0),
        )
    if kind == "sellmeier":
        name = cfg.get_str(prefix + ".name", "")
        if name:
            if name != "sf11":
                raise ConfigError(f"unknown sellmeier table {name!r}")
            return sf11_glass()
        units = cfg.get_str(prefix + ".units", "time2")
        flat = cfg.get_floats(prefix + ".terms")
        if len(flat) % 2:
            raise ConfigError(f"{prefix}.terms must hold (a, b) pairs")
        terms = list(zip(flat[0::2], flat[1::2]))
        if units == "wavelength_um":
            return Sellmeier.from_wavelength_um(terms)
        if units == "time2":
            return Sellmeier(terms)
        raise ConfigError(f"{prefix}.units must be wavelength_um or time2")
    raise ConfigError(f"unknown material kind {kind!r} at {prefix}")


def build_materials(cfg):
    regions = {}
    seen = set()
    for key in cfg.section_keys("region"):
        label = key.split(".")[1]
        if label in seen:
            continue
        seen.add(label)
        try:
            lab = int(label)
        except ValueError:
            raise ConfigError(f"region label must be an integer, got {label!r}") from None
        regions[lab] = _material_from(cfg, f"region.{label}")
    if not regions:
        raise ConfigError("no region.<label>.* material entries")
    above = _material_from(cfg, "above") if "above.kind" in cfg else Constant(1.0)
    return MaterialMap(regions, above=above)


def _region_fn_from_layout(cfg):
    base = cfg.get_int("layout.default", 1)
    interfaces = cfg.get_floats("layout.layers.interfaces")
    layer_labels = [int(x) for x in cfg.get_list("layout.layers.labels")]
    if interfaces and len(layer_labels) != len(interfaces) + 1:
        raise ConfigError("layout.layers.labels must have one more entry than interfaces")
    boxes = [[float(x) for x in v] for v in cfg.numbered("layout.box")]
    disks = [[float(x) for x in v] for v in cfg.numbered("layout.disk")]
    for b in boxes:
        if len(b) != 5:
            raise ConfigError("layout.box entries are 'x0 x1 z0 z1 label'")
    for d in disks:
        if len(d) != 4:
            raise ConfigError("layout.disk entries are 'cx cz r label'")

    def region_fn(x, z):
        if interfaces:
            label = layer_labels[int(np.searchsorted(interfaces, z, side="right"))]
        else:
            label = base
        for x0, x1, z0, z1, lab in boxes:
            if x0 <= x <= x1 and z0 <= z <= z1:
                label = int(lab)
        for cx, cz, r, lab in disks:
            if (x - cx) ** 2 + (z - cz) ** 2 <= r * r:
                label = int(lab)
        return label

    return region_fn


def build_mesh(cfg):
    kind = cfg.get_str("mesh.kind", "structured")
    if kind == "structured":
        return meshmod.build_structured(
            cfg.get_float("geometry.L", 1.0),
            cfg.get_float("geometry.H", 1.0),
            cfg.get_int("mesh.nx", 32),
            cfg.get_int("mesh.nz", 32),
            _region_fn_from_layout(cfg),
        )
    if kind == "file":
        path = cfg.get_str("mesh.path")
        if not path:
            raise ConfigError("mesh.kind=file needs mesh.path")
        if not os.path.exists(path):
            raise ConfigError(f"mesh file not found: {path}")
        msh = meshmod.read_mesh_file(path)
        L = cfg.get_float("geometry.L", msh.L)
        H = cfg.get_float("geometry.H", msh.H)
        if abs(L - msh.L) > 1e-12 * msh.L or abs(H - msh.H) > 1e-12 * msh.H:
            raise ConfigError(
                f"mesh file cell ({msh.L}, {msh.H}) disagrees with geometry ({L}, {H})"
            )
        return msh
    raise ConfigError(f"unknown mesh.kind {kind!r}")


def build_probes(cfg):
    probes = []
    for val in cfg.numbered("probe"):
        if not isinstance(val, list) or len(val) != 2:
            raise ConfigError("probe entries are 'x z' pairs")
        probes.append((float(val[0]), float(val[1])))
    return probes


def _time_settings(cfg):
    rule = cq.rule_from_name(cfg.get_str("time.rule", "bdf2"))
    T = cfg.get_float("time.T")
    n_steps = cfg.get_int("time.n_steps")
    if T is None or n_steps is None or not T > 0 or n_steps < 1:
        raise ConfigError("need positive time.T and time.n_steps")
    return rule, T, n_steps


# -------------------------------------------------------------- validation

def validate_run(cfg):
    """Dry-run checks; returns [(name, ok, detail)] without solving."""
    results = []

    def check(name, fn):
        try:
            detail = fn()
            results.append((name, True, detail or "ok"))
        except Exception as exc:  # noqa: BLE001 - report, caller decides
            results.append((name, False, f"{type(exc).__name__}: {exc}"))

    state = {}

    def _mesh():
        state["mesh"] = build_mesh(cfg)
        m = state["mesh"]
        areas = meshmod.element_areas(m)
        total = float(np.sum(areas))
        if abs(total - m.L * m.H) > 1e-12 * m.L * m.H:
            raise ValueError(f"element areas sum to {total}, cell is {m.L * m.H}")
        return f"{m.n_elements} elements, {m.n_vertices} vertices"

    def _materials():
        state["materials"] = build_materials(cfg)
        if "mesh" in state:
            state["materials"].check_covers(state["mesh"].region_labels)
        return f"{len(state['materials'].regions)} region models"

    def _geometry():
        state["geom"] = build_geometry(cfg)
        g = state["geom"]
        return f"d1={g.d1:.6g}, d2={g.d2:.6g}"

    def _pulse():
        state["pulse"] = build_pulse(cfg)
        H = cfg.get_float("geometry.H", 1.0)
        if not causality_check(state["pulse"], state["geom"], H):
            raise ValueError("pulse is not causal for this geometry")
        return type(state["pulse"]).__name__

    def _contour():
        rule, T, n_steps = _time_settings(cfg)
        eps_cq = cfg.get_float("cq.epsilon", cq.DEFAULT_EPS_CQ)
        materials = state["materials"]
        geom = state["geom"]
        plan = cq.make_plan(rule, T / n_steps, n_steps, eps_cq,
                            materials=materials, d1=geom.d1)
        sigma_min = cfg.get_str("solver.sigma_min", "auto")
        smin = 0.1 / T if sigma_min == "auto" else float(sigma_min)
        re_min = float(np.min(plan.frequencies.real))
        if re_min < smin:
            raise ValueError(f"contour reaches Re(s)={re_min:.4g} < sigma_min={smin:.4g}")
        # propagation constants must sit clear of the branch cut everywhere
        from .materials import eval_permittivity

        n_modes = cfg.get_int("boundary.n_modes", 10)
        for s in plan.frequencies:
            bhat1 = eval_permittivity(materials.above, complex(s))
            build_kappa_table(complex(s), geom.c, geom.d1, geom.L, n_modes, bhat1)
        return (f"radius {plan.radius:.6f}, {plan.n_points} frequencies, "
                f"min Re(s) {re_min:.4g}")

    def _probes():
        probes = build_probes(cfg)
        for (x, z) in probes:
            meshmod.locate_point(state["mesh"], x, z)
        return f"{len(probes)} probes"

    check("mesh", _mesh)
    check("materials", _materials)
    check("geometry", _geometry)
    check("pulse", _pulse)
    check("contour", _contour)
    check("probes", _probes)
    return results


# ------------------------------------------------------------- error tables

@dataclass
class ErrorTable:
    """Per-dt errors at the fit time, with observed halving rates."""

    rows: list          # (dt, l2, h1)

    def with_rates(self):
        out = []
        for i, (dt, l2, h1) in enumerate(self.rows):
            if i == 0:
                out.append((dt, l2, h1, float("nan"), float("nan")))
            else:
                _, l2p, h1p = self.rows[i - 1]
                out.append((dt, l2, h1, math.log2(l2p / l2), math.log2(h1p / h1)))
        return out

    def fitted_slopes(self):
        arr = np.asarray(self.rows)
        s_l2 = float(np.polyfit(np.log(arr[:, 0]), np.log(arr[:, 1]), 1)[0])
        s_h1 = float(np.polyfit(np.log(arr[:, 0]), np.log(arr[:, 2]), 1)[0])
        return s_l2, s_h1


def compute_errors(movie, oracle, pulse, mesh, dofmap, ops, times):
    """L2/H1 errors of the movie against the two-layer solution.

    The exact field is sampled at mesh nodes (so a movie holding the exact
    nodal values reports zero) and compared in the discrete mass/stiffness
    norms.  The oracle clock is shifted by :func:`layers.frame_delay`: the
    solver launches the pulse trace f(t) at z=0 while the oracle references
    it to the interface.
    """
    delay = frame_delay(oracle)
    zv = mesh.vertices[:, 1]
    out = []
    for t in times:
        n = int(round(t / movie.dt))
        if n < 0 or n >= len(movie.times) or abs(movie.times[n] - t) > movie.dt / 2:
            raise ValueError(f"time {t} not on the step grid")
        u = exact_field(oracle, pulse, 0.0, zv, movie.times[n] - delay)
        u_dof = np.zeros(dofmap.n_dofs)
        u_dof[dofmap.vertex_to_dof] = u
        e = movie.fields[n] - u_dof
        l2sq = float(e @ (ops.mass @ e))
        h1sq = l2sq + float(e @ (ops.stiffness @ e))
        out.append((float(movie.times[n]), math.sqrt(max(l2sq, 0.0)),
                    math.sqrt(max(h1sq, 0.0))))
    return out


def _oracle_from(cfg):
    if "oracle.eps_plus" not in cfg:
        return None
    return TwoLayerConfig(
        eps_minus=cfg.get_float("oracle.eps_minus", 1.0),
        eps_plus=cfg.get_float("oracle.eps_plus"),
        h_i=cfg.get_float("oracle.h_i", 0.5),
        c=cfg.get_float("oracle.c", 1.0),
    )


# ------------------------------------------------------------------- runs

def _write_manifest(cfg, outdir, status, extra=None):
    manifest = Config(dict(cfg.data))
    for key in list(manifest.data):
        if key.startswith("result."):
            del manifest.data[key]
    manifest.set("result.status", status)
    for k, v in (extra or {}).items():
        manifest.set(f"result.{k}", v)
    manifest.save(os.path.join(outdir, "manifest.cfg"))


def _dump_steps(cfg, movie):
    steps = set()
    stride = cfg.get_int("output.dump_stride", 0) or 0
    if stride > 0:
        steps.update(range(0, movie.n_steps + 1, stride))
    for t in cfg.get_floats("output.dump_times"):
        n = int(round(t / movie.dt))
        if 0 <= n <= movie.n_steps:
            steps.add(n)
    return sorted(steps)


def _movie_outputs(cfg, movie, outdir, tag=""):
    figures = cfg.get_bool("output.figures", True)
    files = []
    times = movie.times
    prefix = f"{tag}_" if tag else ""

    if movie.probes:
        labels = [f"p{i}_x{x:g}_z{z:g}" for i, (x, z) in enumerate(movie.probes)]
        traces = movie.probe_traces
        if abs(movie.geom.d1) > 0:
            lab_cols = np.column_stack([
                cq.lab_frame_trace(movie, i) for i in range(len(movie.probes))
            ])
            traces = np.column_stack([traces, lab_cols])
            labels = labels + [f"u_{l}" for l in labels]
        path = os.path.join(outdir, f"{prefix}probes.csv")
        reports.write_probe_csv(path, times, traces, labels)
        files.append(path)
        if figures:
            fig = os.path.join(outdir, f"{prefix}probes.png")
            reports.probe_figure(fig, times, movie.probe_traces,
                                 [f"({x:g}, {z:g})" for x, z in movie.probes])
            files.append(fig)

    N = (movie.modes_bottom.shape[1] - 1) // 2
    for side, modes in (("bottom", movie.modes_bottom), ("top", movie.modes_top)):
        path = os.path.join(outdir, f"{prefix}modes_{side}.csv")
        reports.write_mode_csv(path, times, modes, N)
        files.append(path)

    for n in _dump_steps(cfg, movie):
        nodal = movie.dofmap.expand(movie.fields[n])
        path = os.path.join(outdir, f"{prefix}field_{n:05d}.vtk")
        reports.write_field_dump(path, movie.mesh, nodal, title=f"t={times[n]:.6g}")
        pts, cells, vals = reports.read_field_dump(path)   # self check
        if len(pts) != movie.mesh.n_vertices or not np.allclose(vals, nodal):
            raise RuntimeError(f"field dump self-check failed for {path}")
        files.append(path)
        if figures:
            fig = os.path.join(outdir, f"{prefix}field_{n:05d}.png")
            reports.field_figure(fig, movie.mesh, nodal, title=f"|w| at t={times[n]:.6g}")
            files.append(fig)
    return files


def solve_run(cfg, outdir):
    """Single time-domain run; writes artifacts, returns the FieldMovie."""
    os.makedirs(outdir, exist_ok=True)
    _write_manifest(cfg, outdir, "incomplete")
    try:
        checks = validate_run(cfg)
        failed = [(n, d) for n, ok, d in checks if not ok]
        if failed:
            raise ConfigError("; ".join(f"{n}: {d}" for n, d in failed))

        msh = build_mesh(cfg)
        dofmap = meshmod.build_dofmap(msh)
        materials = build_materials(cfg)
        geom = build_geometry(cfg)
        pulse = build_pulse(cfg)
        rule, T, n_steps = _time_settings(cfg)
        n_modes = cfg.get_int("boundary.n_modes", 10)
        ops = CellOperators(msh, dofmap, n_modes)

        movie = cq.run_cq(
            msh, materials, geom, pulse, rule, T / n_steps, n_steps,
            n_modes=n_modes,
            eta=cfg.get_float("boundary.eta", 1.0),
            probes=build_probes(cfg),
            eps_cq=cfg.get_float("cq.epsilon", cq.DEFAULT_EPS_CQ),
            half_contour=cfg.get_bool("cq.half_contour", True),
            workers=cfg.get_int("solver.workers", 1),
            dofmap=dofmap, ops=ops,
        )
        files = _movie_outputs(cfg, movie, outdir)
        _write_manifest(cfg, outdir, "complete", {
            "peak": movie.peak(),
            "imag_residual": movie.max_imag_residual,
            "trace_residual_max": movie.residual_max,
            "contour_radius": movie.plan.radius,
            "n_frequencies": movie.plan.n_points,
            "files": [os.path.basename(f) for f in files],
        })
        return movie
    except Exception as exc:
        _write_manifest(cfg, outdir, "failed", {"error": f"{type(exc).__name__}: {exc}"})
        raise


def study_run(cfg, outdir):
    """Time-step refinement study against the two-layer oracle."""
    os.makedirs(outdir, exist_ok=True)
    _write_manifest(cfg, outdir, "incomplete")
    try:
        oracle = _oracle_from(cfg)
        if oracle is None:
            raise ConfigError("a study needs oracle.* keys (two-layer reference)")
        msh = build_mesh(cfg)
        dofmap = meshmod.build_dofmap(msh)
        materials = build_materials(cfg)
        geom = build_geometry(cfg)
        pulse = build_pulse(cfg)
        T = cfg.get_float("time.T")
        n_modes = cfg.get_int("boundary.n_modes", 2)
        eta = cfg.get_float("boundary.eta", 1.0)
        workers = cfg.get_int("solver.workers", 1)
        eps_cq = cfg.get_float("cq.epsilon", cq.DEFAULT_EPS_CQ)
        error_times = cfg.get_floats("study.error_times", [1.5])
        fit_time = cfg.get_float("study.fit_time", error_times[0])
        ops = CellOperators(msh, dofmap, n_modes)

        rule_names = [str(r) for r in cfg.get_list("study.rules", ["bdf2"])]
        tables = {}
        fits = {}
        finest_movie = None
        files = []
        for rname in rule_names:
            rule = cq.rule_from_name(rname)
            steps = [int(x) for x in cfg.get_list(f"study.steps.{rname}")]
            if not steps:
                raise ConfigError(f"missing study.steps.{rname}")
            rows_fit = []
            rows_all = []
            for n_steps in steps:
                movie = cq.run_cq(
                    msh, materials, geom, pulse, rule, T / n_steps, n_steps,
                    n_modes=n_modes, eta=eta, probes=build_probes(cfg),
                    eps_cq=eps_cq, workers=workers, dofmap=dofmap, ops=ops,
                )
                errs = compute_errors(movie, oracle, pulse, msh, dofmap, ops,
                                      error_times)
                for (t, l2, h1) in errs:
                    rows_all.append((T / n_steps, t, l2, h1))
                t_fit = [r for r in errs if abs(r[0] - fit_time) < 1e-9]
                if not t_fit:
                    raise ConfigError(f"fit time {fit_time} not in study.error_times")
                rows_fit.append((T / n_steps, t_fit[0][1], t_fit[0][2]))
                if rname == rule_names[0] and n_steps == max(steps):
                    finest_movie = movie
            table = ErrorTable(rows_fit)
            tables[rname] = rows_fit
            s_l2, s_h1 = table.fitted_slopes()
            fits[rname] = (s_l2, s_h1)

            path = os.path.join(outdir, f"errors_{rname}.csv")
            with_rates = table.with_rates()
            reports.write_csv(
                path,
                ["dt", "l2_error", "h1_error", "l2_rate", "h1_rate"],
                with_rates,
            )
            files.append(path)
            path = os.path.join(outdir, f"errors_times_{rname}.csv")
            reports.write_csv(path, ["dt", "time", "l2_error", "h1_error"], rows_all)
            files.append(path)

        if cfg.get_bool("output.figures", True):
            fig = os.path.join(outdir, "convergence.png")
            reports.convergence_figure(fig, tables, fit_time)
            files.append(fig)
        if finest_movie is not None and finest_movie.probes:
            files.extend(_movie_outputs(cfg, finest_movie, outdir))

        extra = {"files": [os.path.basename(f) for f in files]}
        for rname, (s_l2, s_h1) in fits.items():
            extra[f"fit.{rname}.l2"] = s_l2
            extra[f"fit.{rname}.h1"] = s_h1
        _write_manifest(cfg, outdir, "complete", extra)
        return tables, fits
    except Exception as exc:
        _write_manifest(cfg, outdir, "failed", {"error": f"{type(exc).__name__}: {exc}"})
        raise


def run(cfg, outdir):
    """Dispatch on config shape: study.* present -> study, else single solve."""
    if cfg.section_keys("study"):
        return study_run(cfg, outdir)
    return solve_run(cfg, outdir)
