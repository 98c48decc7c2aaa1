"""Run outputs: delimited tables, legacy grid dumps, and rendered figures.

CSV files are RFC-4180 style with a header row and `time` as the first
column.  Field dumps use the legacy ASCII unstructured-grid format (points,
quad cells, one scalar per point) in files named ``field_<step:05d>.vtk``;
:func:`read_field_dump` re-parses them for the self-check pass.  Figures are
rendered with the Agg backend so runs work headless.
"""

from __future__ import annotations

import csv

import numpy as np

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
from matplotlib.collections import PolyCollection  # noqa: E402

__all__ = [
    "write_csv",
    "write_probe_csv",
    "write_mode_csv",
    "write_field_dump",
    "read_field_dump",
    "field_figure",
    "probe_figure",
    "convergence_figure",
]


def _fmt(x):
    return repr(float(x))


def write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\r\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(x) for x in row])


def write_probe_csv(path, times, traces, labels):
    header = ["time"] + list(labels)
    rows = np.column_stack([times, traces])
    write_csv(path, header, rows)


def write_mode_csv(path, times, modes, n_modes):
    """Complex mode histories as re/im column pairs, n = -N..N."""
    header = ["time"]
    for n in range(-n_modes, n_modes + 1):
        header += [f"n={n}_re", f"n={n}_im"]
    cols = [times]
    for idx in range(2 * n_modes + 1):
        cols += [modes[:, idx].real, modes[:, idx].imag]
    write_csv(path, header, np.column_stack(cols))


def write_field_dump(path, mesh, nodal_values, title="field"):
    v = np.asarray(nodal_values, dtype=float)
    if v.shape != (mesh.n_vertices,):
        raise ValueError(f"expected {mesh.n_vertices} nodal values, got {v.shape}")
    lines = [
        "# vtk DataFile Version 3.0",
        title,
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {mesh.n_vertices} double",
    ]
    for x, z in mesh.vertices:
        lines.append(f"{x!r} {z!r} 0.0")
    lines.append(f"CELLS {mesh.n_elements} {5 * mesh.n_elements}")
    for quad in mesh.elements:
        lines.append(f"4 {quad[0]} {quad[1]} {quad[2]} {quad[3]}")
    lines.append(f"CELL_TYPES {mesh.n_elements}")
    lines.extend(["9"] * mesh.n_elements)
    lines.append(f"POINT_DATA {mesh.n_vertices}")
    lines.append("SCALARS w double 1")
    lines.append("LOOKUP_TABLE default")
    lines.extend(repr(float(x)) for x in v)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_field_dump(path):
    """Parse a dump back into (points, cells, values); used for self checks."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if len(lines) < 5 or lines[3] != "DATASET UNSTRUCTURED_GRID":
        raise ValueError(f"{path}: not a legacy unstructured-grid dump")
    i = 4
    tag, n_pts, _ = lines[i].split()
    if tag != "POINTS":
        raise ValueError(f"{path}: expected POINTS, got {lines[i]!r}")
    n_pts = int(n_pts)
    i += 1
    points = np.array([[float(t) for t in lines[i + k].split()] for k in range(n_pts)])
    i += n_pts
    tag, n_cells, _ = lines[i].split()
    if tag != "CELLS":
        raise ValueError(f"{path}: expected CELLS, got {lines[i]!r}")
    n_cells = int(n_cells)
    i += 1
    cells = []
    for k in range(n_cells):
        tok = lines[i + k].split()
        if tok[0] != "4":
            raise ValueError(f"{path}: non-quad cell {lines[i + k]!r}")
        cells.append([int(t) for t in tok[1:]])
    i += n_cells
    if lines[i].split()[0] != "CELL_TYPES":
        raise ValueError(f"{path}: expected CELL_TYPES")
    i += 1 + n_cells
    if lines[i].split()[0] != "POINT_DATA":
        raise ValueError(f"{path}: expected POINT_DATA")
    i += 3  # POINT_DATA, SCALARS, LOOKUP_TABLE
    values = np.array([float(lines[i + k]) for k in range(n_pts)])
    return points[:, :2], np.array(cells, dtype=int), values


def field_figure(path, mesh, nodal_values, title=""):
    """Density plot of |values| on the quad mesh, rendered to file."""
    verts = mesh.vertices[mesh.elements]
    face = np.abs(np.asarray(nodal_values))[mesh.elements].mean(axis=1)
    fig, ax = plt.subplots(figsize=(5.0, 5.0 * mesh.H / mesh.L))
    coll = PolyCollection(verts, array=face, edgecolors="none", cmap="inferno")
    ax.add_collection(coll)
    ax.set_xlim(0, mesh.L)
    ax.set_ylim(0, mesh.H)
    ax.set_aspect("equal")
    ax.set_xlabel("x")
    ax.set_ylabel("z")
    if title:
        ax.set_title(title)
    fig.colorbar(coll, ax=ax, shrink=0.85)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def probe_figure(path, times, traces, labels):
    fig, ax = plt.subplots(figsize=(6.4, 3.6))
    for j, lab in enumerate(labels):
        ax.plot(times, traces[:, j], label=lab, lw=1.2)
    ax.set_xlabel("t")
    ax.set_ylabel("w")
    ax.grid(alpha=0.3)
    if labels:
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def convergence_figure(path, tables, fit_time):
    """Log-log error vs dt for each rule, with reference slope lines.

    ``tables`` maps rule name -> array of rows (dt, L2, H1).
    """
    fig, axes = plt.subplots(1, 2, figsize=(9.0, 3.8))
    for norm_idx, (ax, norm) in enumerate(zip(axes, ("L2", "H1")), start=1):
        for name, rows in tables.items():
            rows = np.asarray(rows)
            ax.loglog(rows[:, 0], rows[:, norm_idx], "o-", label=name)
            # reference line with the rule's nominal order through last point
            p = 1 if name.lower().startswith("be") else 2
            ref = rows[-1, norm_idx] * (rows[:, 0] / rows[-1, 0]) ** p
            ax.loglog(rows[:, 0], ref, "k--", lw=0.8, alpha=0.6)
        ax.set_xlabel("dt")
        ax.set_ylabel(f"{norm} error at t={fit_time:g}")
        ax.grid(which="both", alpha=0.3)
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
