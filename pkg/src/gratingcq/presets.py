"""Built-in experiment configurations.

* ``convergence41`` -- two-layer time-step refinement study at normal
  incidence.  The incidence-side medium has permittivity 4 and the far side
  1; in solver-normalized coefficients (reference medium below the cell) that
  is 1 below the interface, 0.25 above and in the upper half space, with
  wave speed 0.5.  BDF2 runs the dt = T/64..T/512 ladder; backward Euler runs
  T/256..T/2048, where its first-order asymptotics are observable.

* ``drude421`` -- metal bar grating in air, Drude model (alpha 4, beta 10,
  gamma 0.5), 6 degree incidence, sin^4 pulse with window start 0, 512 steps
  to T=4.  Field dumps at six snapshot times.

* ``sellmeier422`` -- dielectric cylinder above an SF11 glass layer, lengths
  in um and times in fs (c = 0.3 um/fs), Gaussian-modulated sine pulse at 6
  degrees, 512 steps to T=8 fs.  The 20 nm gap between cylinder and glass
  surface is kept.
"""

from __future__ import annotations

from .config import Config

__all__ = ["preset_names", "preset_config"]


def _convergence41():
    return {
        "geometry.L": 1.0,
        "geometry.H": 1.0,
        "incidence.angle_deg": 0.0,
        "solver.c": 0.5,
        "mesh.kind": "structured",
        "mesh.nx": 128,
        "mesh.nz": 128,
        "layout.layers.interfaces": [0.5],
        "layout.layers.labels": [1, 2],
        "region.1.kind": "constant",
        "region.1.value": 1.0,
        "region.2.kind": "constant",
        "region.2.value": 0.25,
        "above.kind": "constant",
        "above.value": 0.25,
        "pulse.kind": "sin_m",
        "pulse.m": 4,
        "pulse.alpha": 4.0,
        "pulse.beta": 0.5,
        "time.T": 4.0,
        "time.n_steps": 512,
        "time.rule": "bdf2",
        "boundary.n_modes": 2,
        "boundary.eta": 1.0,
        "probe.1": [0.5, 0.1],
        "probe.2": [0.5, 0.9],
        "oracle.eps_minus": 1.0,
        "oracle.eps_plus": 4.0,
        "oracle.h_i": 0.5,
        "oracle.c": 1.0,
        "study.rules": ["bdf2", "be"],
        "study.steps.bdf2": [64, 128, 256, 512],
        "study.steps.be": [256, 512, 1024, 2048],
        "study.error_times": [1.5, 2.5],
        "study.fit_time": 1.5,
    }


def _drude421():
    return {
        "geometry.L": 1.0,
        "geometry.H": 1.0,
        "incidence.angle_deg": 6.0,
        "solver.c": 1.0,
        "mesh.kind": "structured",
        "mesh.nx": 64,
        "mesh.nz": 64,
        "layout.default": 1,
        # metal layer 0.1 thick across the cell, with a 0.05 air slit
        "layout.box.1": [0.0, 1.0, 0.45, 0.55, 2],
        "layout.box.2": [0.475, 0.525, 0.45, 0.55, 1],
        "region.1.kind": "constant",
        "region.1.value": 1.0,
        "region.2.kind": "drude",
        "region.2.alpha": 4.0,
        "region.2.beta": 10.0,
        "region.2.gamma": 0.5,
        "above.kind": "constant",
        "above.value": 1.0,
        "pulse.kind": "sin_m",
        "pulse.m": 4,
        "pulse.alpha": 4.0,
        "pulse.beta": 0.0,
        "time.T": 4.0,
        "time.n_steps": 512,
        "time.rule": "bdf2",
        "boundary.n_modes": 10,
        "boundary.eta": 1.0,
        "probe.1": [0.5, 0.05],
        "probe.2": [0.5, 0.95],
        "output.dump_times": [1.27, 1.72, 2.17, 2.62, 3.07, 3.52],
    }


def _sellmeier422():
    # lengths in um, times in fs; cylinder radius 0.168, 0.02 gap above the
    # glass surface at z = 0.46
    return {
        "geometry.L": 0.56,
        "geometry.H": 0.56,
        "incidence.angle_deg": 6.0,
        "solver.c": 0.3,
        "mesh.kind": "structured",
        "mesh.nx": 56,
        "mesh.nz": 56,
        "layout.default": 1,
        "layout.box.1": [0.0, 0.56, 0.46, 0.56, 3],
        "layout.disk.1": [0.28, 0.272, 0.168, 2],
        "region.1.kind": "constant",
        "region.1.value": 1.0,
        "region.2.kind": "constant",
        "region.2.value": 3.24,          # n1 = 1.8
        "region.3.kind": "sellmeier",
        "region.3.name": "sf11",
        "above.kind": "sellmeier",
        "above.name": "sf11",
        "pulse.kind": "gauss_sine",
        "pulse.omega0": 2.899,
        "pulse.spread": 2.0,
        "pulse.center": 3.0,
        "time.T": 8.0,
        "time.n_steps": 512,
        "time.rule": "bdf2",
        "boundary.n_modes": 10,
        "boundary.eta": 1.0,
        "probe.1": [0.28, 0.05],
        "probe.2": [0.28, 0.53],
        "output.dump_times": [3.59, 4.44, 5.29, 6.14, 6.99, 7.84],
    }


_PRESETS = {
    "convergence41": _convergence41,
    "drude421": _drude421,
    "sellmeier422": _sellmeier422,
}


def preset_names():
    return sorted(_PRESETS)


def preset_config(name):
    try:
        build = _PRESETS[name]
    except KeyError:
        raise KeyError(
            f"unknown preset {name!r}; available: {', '.join(preset_names())}"
        ) from None
    return Config(build())
