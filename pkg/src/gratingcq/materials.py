"""Laplace-domain material models.

The solver works with a relative permittivity coefficient evaluated at a
complex Laplace parameter ``s`` (with ``Re s > 0``), normalized so that the
medium below the cell has coefficient 1.  Three models are supported:

* :class:`Constant` -- frequency independent value.
* :class:`Drude` -- metal model ``alpha + beta / (s (1 + gamma s))``.  With
  ``gamma = 0`` this degenerates to the usual conductivity model
  ``alpha + beta / s``.
* :class:`Sellmeier` -- lossless dispersive dielectric
  ``1 + sum_j a_j / (1 + b_j s^2)`` with ``b_j`` in units of time squared.
  Tables quoted in wavelength form (coefficients in um^2) are converted once
  at construction via ``b_time2 = b_lambda / (4 pi^2 c0^2)``.

Well-posedness of the time-domain problem requires the margin
``Re(s (eps(s) - d1^2)) / Re(s)`` to stay uniformly positive over the
Laplace contour; :func:`coercivity_margin` evaluates it and
:func:`margin_lower_bound` reports the analytic per-model bound used to gate
solves.  Neither the Drude nor the Sellmeier model satisfies Kramers-Kronig;
no such check is attempted here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

__all__ = [
    "Constant",
    "Drude",
    "Sellmeier",
    "MaterialMap",
    "NonAnalyticPoint",
    "MaterialMissing",
    "eval_permittivity",
    "coercivity_margin",
    "margin_lower_bound",
    "sf11_glass",
    "C0_UM_PER_FS",
]

# speed of light used for wavelength->time^2 Sellmeier conversion (um/fs)
C0_UM_PER_FS = 0.3


class NonAnalyticPoint(ValueError):
    """A Sellmeier denominator vanished: s sits on (or too near) a pole."""


class MaterialMissing(KeyError):
    """A mesh region label has no entry in the material map."""


@dataclass(frozen=True)
class Constant:
    """Frequency independent coefficient (complex values allowed)."""

    value: complex

    def __post_init__(self):
        object.__setattr__(self, "value", complex(self.value))


@dataclass(frozen=True)
class Drude:
    """Drude metal: eps(s) = alpha + beta / (s (1 + gamma s))."""

    alpha: float
    beta: float
    gamma: float = 0.0

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"Drude alpha must be positive, got {self.alpha}")
        if not self.beta > 0:
            raise ValueError(f"Drude beta must be positive, got {self.beta}")
        if self.gamma < 0:
            raise ValueError(f"Drude gamma must be nonnegative, got {self.gamma}")


@dataclass(frozen=True)
class Sellmeier:
    """Sellmeier dielectric: eps(s) = 1 + sum_j a_j / (1 + b_j s^2).

    ``terms`` holds (a_j, b_j) pairs with b_j in time^2 units.  Use
    :meth:`from_wavelength_um` for tables quoted against wavelength in um.
    """

    terms: tuple = field(default=())

    def __post_init__(self):
        terms = tuple((float(a), float(b)) for a, b in self.terms)
        if len(terms) > 3:
            raise ValueError("at most 3 Sellmeier terms supported")
        for a, b in terms:
            if not (a > 0 and b > 0):
                raise ValueError(f"Sellmeier coefficients must be positive, got ({a}, {b})")
        object.__setattr__(self, "terms", terms)

    @classmethod
    def from_wavelength_um(cls, terms, c0=C0_UM_PER_FS):
        """Build from (a_j, b_j[um^2]) pairs; times then carry fs units."""
        scale = 4.0 * math.pi**2 * c0**2
        return cls(tuple((a, b / scale) for a, b in terms))


def sf11_glass():
    """Three-term Sellmeier model for SF11 glass (um/fs unit system)."""
    return Sellmeier.from_wavelength_um(
        (
            (1.73759695, 0.013188707),
            (0.313747346, 0.0623068142),
            (1.89878101, 155.23629),
        )
    )


def eval_permittivity(model, s):
    """Evaluate a material model at Laplace parameter s (Re s > 0)."""
    if isinstance(model, Constant):
        return model.value
    if isinstance(model, Drude):
        return model.alpha + model.beta / (s * (1.0 + model.gamma * s))
    if isinstance(model, Sellmeier):
        out = 1.0 + 0.0j
        s2 = s * s
        for a, b in model.terms:
            den = 1.0 + b * s2
            if abs(den) < 1e-14 * (1.0 + abs(b * s2)):
                raise NonAnalyticPoint(
                    f"Sellmeier denominator ~0 at s={s} (term beta={b})"
                )
            out += a / den
        return out
    raise TypeError(f"not a material model: {model!r}")


def coercivity_margin(model, s, d1):
    """Re(s (eps(s) - d1^2)) / Re(s), the uniform positivity margin.

    The caller compares the result against a required positive bound; see
    :func:`margin_lower_bound` for the analytic per-model value.
    """
    sigma = s.real
    if not sigma > 0:
        raise ValueError(f"Laplace parameter needs Re(s) > 0, got {s}")
    val = s * (eval_permittivity(model, s) - d1 * d1)
    return val.real / sigma


def margin_lower_bound(model, d1):
    """Analytic lower bound for the coercivity margin, or None if unknown.

    Drude: alpha - d1^2.  Sellmeier: 1 - d1^2.  Real constants: value - d1^2.
    Complex constants have no analytic bound and return None.
    """
    if isinstance(model, Drude):
        return model.alpha - d1 * d1
    if isinstance(model, Sellmeier):
        return 1.0 - d1 * d1
    if isinstance(model, Constant):
        if model.value.imag == 0.0:
            return model.value.real - d1 * d1
        return None
    raise TypeError(f"not a material model: {model!r}")


@dataclass(frozen=True)
class MaterialMap:
    """Region label -> model, plus the spatially constant model above the cell.

    The medium below the cell is fixed to coefficient 1 (it sets the reference
    wave speed), so only the cell interior and the upper half space are
    configurable.
    """

    regions: dict
    above: object = Constant(1.0)

    def model_for(self, label):
        try:
            return self.regions[label]
        except KeyError:
            raise MaterialMissing(f"no material for region label {label}") from None

    def check_covers(self, labels):
        missing = sorted(set(int(r) for r in labels) - set(self.regions))
        if missing:
            raise MaterialMissing(f"no material for region labels {missing}")

    def all_models(self):
        """Every distinct model taking part in a solve, including above/below."""
        models = list(self.regions.values()) + [self.above, Constant(1.0)]
        return models

    def required_margin(self, d1, floor=1e-6):
        """Coercivity bound to gate solves: min analytic bound, floored."""
        bounds = [margin_lower_bound(m, d1) for m in self.all_models()]
        known = [b for b in bounds if b is not None]
        return max(min(known), floor) if known else floor
