"""Free-energy potentials, mobility/viscosity models, and assumption checks.

The double-well density is F(s) = (1 - s^2)^2 / 4 with the closed-form
derivatives F'(s) = s^3 - s, F''(s) = 3 s^2 - 1, F'''(s) = 6 s.

The logarithmic density is

    F(s) = theta * [(1+s) log(1+s) + (1-s) log(1-s)] - (theta_c/2) s^2 + C0,

singular at s = +-1; evaluations clamp s to [-1+delta_min, 1-delta_min]
and the clamp events are countable by the caller.  C0 shifts the minimum
to zero on the admitted range.  The convex part has F1''(s) = 2 theta /
(1 - s^2), so the convexity floor is alpha0 = 2 theta at s = 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import brentq

DOUBLE_WELL = "double-well"
LOGARITHMIC = "logarithmic"
CUSTOM_POLYNOMIAL = "custom-polynomial"


@dataclass(frozen=True)
class PotentialModel:
    kind: str
    theta: float = 1.0
    theta_c: float = 0.0
    delta_min: float = 1e-4
    coefficients: tuple = ()
    growth_exponent: float = 2.0
    _offset: float = field(default=0.0, compare=False)

    @classmethod
    def double_well(cls) -> "PotentialModel":
        return cls(kind=DOUBLE_WELL, growth_exponent=2.0)

    @classmethod
    def logarithmic(cls, theta: float = 1.0, theta_c: float = 0.0,
                    delta_min: float = 1e-4) -> "PotentialModel":
        if not theta > 0:
            raise ValueError(f"logarithmic potential needs theta > 0, got {theta}")
        if not 0.0 < delta_min < 0.1:
            raise ValueError(f"delta_min must lie in (0, 0.1), got {delta_min}")
        offset = _log_potential_offset(theta, theta_c, delta_min)
        return cls(kind=LOGARITHMIC, theta=theta, theta_c=theta_c,
                   delta_min=delta_min, growth_exponent=0.0, _offset=offset)

    @classmethod
    def polynomial(cls, coefficients) -> "PotentialModel":
        coeffs = tuple(float(c) for c in coefficients)
        if len(coeffs) < 3:
            raise ValueError("polynomial potential needs degree >= 2")
        r = max(0.0, len(coeffs) - 1 - 2)
        return cls(kind=CUSTOM_POLYNOMIAL, coefficients=coeffs, growth_exponent=r)

    @property
    def clamp_bound(self) -> float:
        return 1.0 - self.delta_min

    def clamp(self, s):
        if self.kind == LOGARITHMIC:
            return np.clip(s, -self.clamp_bound, self.clamp_bound)
        return s

    def clamp_count(self, s) -> int:
        """Number of entries of s outside the admitted logarithmic range."""
        if self.kind != LOGARITHMIC:
            return 0
        return int(np.count_nonzero(np.abs(np.asarray(s)) > self.clamp_bound))


def _log_potential_offset(theta, theta_c, delta_min):
    """Additive constant making the clamped logarithmic density nonnegative."""
    def raw(s):
        return theta * ((1 + s) * np.log1p(s) + (1 - s) * np.log1p(-s)) - 0.5 * theta_c * s**2

    if theta_c <= 2.0 * theta:
        return 0.0  # convex on the whole range, min at 0 with raw(0) = 0
    b = 1.0 - delta_min

    def fprime(s):
        return theta * (np.log1p(s) - np.log1p(-s)) - theta_c * s

    # the well bottom sits where F' = 0 on (0, b]; fall back to the clamp edge
    if fprime(b) <= 0:
        smin = b
    else:
        smin = brentq(fprime, 1e-14, b, xtol=1e-15)
    return -min(raw(smin), raw(b), 0.0)


def potential_eval(model: PotentialModel, s, order: int = 0):
    """Evaluate F or one of its first three derivatives, elementwise.

    Logarithmic inputs are clamped first; use ``model.clamp_count`` to
    observe clamp events.
    """
    if order not in (0, 1, 2, 3):
        raise ValueError(f"order must be 0..3, got {order}")
    arr = np.asarray(s, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("potential_eval: non-finite input")
    scalar = arr.ndim == 0

    if model.kind == DOUBLE_WELL:
        if order == 0:
            out = 0.25 * (1.0 - arr**2) ** 2
        elif order == 1:
            out = arr**3 - arr
        elif order == 2:
            out = 3.0 * arr**2 - 1.0
        else:
            out = 6.0 * arr
    elif model.kind == LOGARITHMIC:
        t = model.clamp(arr)
        th, tc = model.theta, model.theta_c
        if order == 0:
            out = th * ((1 + t) * np.log1p(t) + (1 - t) * np.log1p(-t)) \
                - 0.5 * tc * t**2 + model._offset
        elif order == 1:
            out = th * (np.log1p(t) - np.log1p(-t)) - tc * t
        elif order == 2:
            out = 2.0 * th / (1.0 - t**2) - tc
        else:
            out = 4.0 * th * t / (1.0 - t**2) ** 2
    elif model.kind == CUSTOM_POLYNOMIAL:
        poly = np.polynomial.Polynomial(model.coefficients)
        out = poly.deriv(order)(arr) if order > 0 else poly(arr)
    else:
        raise ValueError(f"unknown potential kind {model.kind!r}")

    return float(out) if scalar else out


@dataclass(frozen=True)
class MaterialModel:
    """Mobility m(s) and viscosity eta(s) with declared positive bounds."""

    mobility: Callable
    mobility_deriv: Callable
    viscosity: Callable
    viscosity_deriv: Callable
    m0: float
    m1: float
    eta0: float
    eta1: float
    constant_mobility: bool = True
    mobility_value: float = 1.0

    def __post_init__(self):
        if not (self.m0 > 0 and self.eta0 > 0):
            raise ValueError("lower bounds m0, eta0 must be positive")
        if self.m0 > self.m1 or self.eta0 > self.eta1:
            raise ValueError("declared bounds must satisfy m0 <= m1, eta0 <= eta1")

    @classmethod
    def constant(cls, m: float = 1.0, eta: float = 1.0) -> "MaterialModel":
        if not (m > 0 and eta > 0):
            raise ValueError(f"constant mobility/viscosity must be positive, got {m}, {eta}")
        return cls(
            mobility=lambda s: np.full_like(np.asarray(s, dtype=float), m),
            mobility_deriv=lambda s: np.zeros_like(np.asarray(s, dtype=float)),
            viscosity=lambda s: np.full_like(np.asarray(s, dtype=float), eta),
            viscosity_deriv=lambda s: np.zeros_like(np.asarray(s, dtype=float)),
            m0=m, m1=m, eta0=eta, eta1=eta,
            constant_mobility=True, mobility_value=m,
        )

    @classmethod
    def from_polynomials(cls, mobility_coeffs=None, viscosity_coeffs=None,
                         s_range=(-1.2, 1.2)) -> "MaterialModel":
        """Polynomial m(s), eta(s); bounds taken as sampled extrema over s_range."""
        mob = np.polynomial.Polynomial(mobility_coeffs if mobility_coeffs else [1.0])
        vis = np.polynomial.Polynomial(viscosity_coeffs if viscosity_coeffs else [1.0])
        s = np.linspace(s_range[0], s_range[1], 2001)
        m_vals, e_vals = mob(s), vis(s)
        if m_vals.min() <= 0 or e_vals.min() <= 0:
            raise ValueError("mobility/viscosity must stay positive on the sampled range")
        const_m = mob.degree() == 0
        return cls(
            mobility=mob, mobility_deriv=mob.deriv(),
            viscosity=vis, viscosity_deriv=vis.deriv(),
            m0=float(m_vals.min()), m1=float(m_vals.max()),
            eta0=float(e_vals.min()), eta1=float(e_vals.max()),
            constant_mobility=const_m,
            mobility_value=float(mob.coef[0]) if const_m else float(m_vals.mean()),
        )

    @property
    def eta_bar(self) -> float:
        """Reference viscosity for the implicit split."""
        return 0.5 * (self.eta0 + self.eta1)

    @property
    def m_bar(self) -> float:
        """Reference mobility for the implicit operator (exact when constant)."""
        if self.constant_mobility:
            return self.mobility_value
        return 0.5 * (self.m0 + self.m1)


def stabilization_constant(potential: PotentialModel, s_range=(-1.2, 1.2)) -> float:
    """Smallest S with S >= max |F''| / 2 over the range (semi-implicit stability).

    Uses closed forms for the double-well and logarithmic kinds; samples
    with a 1.1 safety factor otherwise.
    """
    a, b = float(s_range[0]), float(s_range[1])
    if a > b:
        raise ValueError(f"empty range ({a}, {b})")
    if potential.kind == DOUBLE_WELL:
        candidates = [abs(3 * a**2 - 1), abs(3 * b**2 - 1)]
        if a <= 0.0 <= b:
            candidates.append(1.0)
        return 0.5 * max(candidates)
    if potential.kind == LOGARITHMIC:
        bound = potential.clamp_bound
        aa, bb = np.clip([a, b], -bound, bound)
        vals = [abs(potential_eval(potential, s, 2)) for s in (aa, bb)]
        if aa <= 0.0 <= bb:
            vals.append(abs(potential_eval(potential, 0.0, 2)))
        return 0.5 * max(vals)
    s = np.linspace(a, b, 4001)
    return 0.55 * float(np.max(np.abs(potential_eval(potential, s, 2))))


@dataclass
class AssumptionCheck:
    name: str
    value: float
    passed: bool
    note: str = ""


@dataclass
class ValidationReport:
    checks: list
    m_min: float
    m_max: float
    eta_min: float
    eta_max: float
    fpp_min: float
    fpp_max: float
    fitted_growth: float
    alpha0: float | None = None

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)


def validate_assumptions(material: MaterialModel, potential: PotentialModel,
                         s_range=(-1.2, 1.2), samples: int = 1000) -> ValidationReport:
    """Sample-based structural checks on m, eta, F (report-only, never raises).

    Checks the declared mobility/viscosity bounds, nonnegativity of F, the
    polynomial growth of F'' and F''' against the declared exponent, and
    (logarithmic kind) the convexity floor of the convex part.
    """
    if samples < 100:
        raise ValueError(f"need at least 100 samples, got {samples}")
    s = np.linspace(s_range[0], s_range[1], samples)
    m_vals = np.asarray(material.mobility(s), dtype=float)
    e_vals = np.asarray(material.viscosity(s), dtype=float)
    f0 = potential_eval(potential, s, 0)
    fpp = potential_eval(potential, s, 2)
    fppp = potential_eval(potential, s, 3)

    checks = []
    bounds_ok = (
        m_vals.min() >= material.m0 - 1e-12 and m_vals.max() <= material.m1 + 1e-12
        and e_vals.min() >= material.eta0 - 1e-12 and e_vals.max() <= material.eta1 + 1e-12
        and m_vals.min() > 0 and e_vals.min() > 0
    )
    checks.append(AssumptionCheck(
        "bounded-coefficients", float(m_vals.min()), bool(bounds_ok),
        f"m in [{m_vals.min():.4g}, {m_vals.max():.4g}], "
        f"eta in [{e_vals.min():.4g}, {e_vals.max():.4g}]"))

    checks.append(AssumptionCheck(
        "potential-nonnegative", float(np.min(f0)), bool(np.min(f0) >= -1e-12)))

    fitted = _fit_growth_exponent(s, fpp)
    excess = _growth_ratio_excess(s, fpp, potential.growth_exponent)
    checks.append(AssumptionCheck(
        "second-derivative-growth", excess, bool(excess <= 3.0),
        f"normalized-ratio spread {excess:.3g} (fitted slope {fitted:.3g}, "
        f"declared r = {potential.growth_exponent:.3g})"))

    decl3 = max(0.0, potential.growth_exponent - 1.0)
    excess3 = _growth_ratio_excess(s, fppp, decl3)
    checks.append(AssumptionCheck(
        "third-derivative-growth", excess3, bool(excess3 <= 3.0),
        f"normalized-ratio spread {excess3:.3g} against exponent {decl3:.3g}"))

    alpha0 = None
    if potential.kind == LOGARITHMIC:
        f1pp = fpp + potential.theta_c
        alpha0 = float(np.min(f1pp))
        checks.append(AssumptionCheck(
            "convexity-floor", alpha0, bool(alpha0 > 0),
            f"alpha0 estimate {alpha0:.4g} (closed form 2*theta = {2*potential.theta:.4g})"))
        with np.errstate(over="ignore"):
            fp = np.abs(potential_eval(potential, s, 1))
            ratio = np.log(np.maximum(f1pp, 1e-300)) / (1.0 + fp)
        checks.append(AssumptionCheck(
            "exponential-domination", float(np.max(ratio)), True,
            "log F1'' / (1+|F'|) bounded on the admitted range"))

    return ValidationReport(
        checks=checks,
        m_min=float(m_vals.min()), m_max=float(m_vals.max()),
        eta_min=float(e_vals.min()), eta_max=float(e_vals.max()),
        fpp_min=float(np.min(fpp)), fpp_max=float(np.max(fpp)),
        fitted_growth=fitted, alpha0=alpha0,
    )


def _fit_growth_exponent(s, vals):
    """Least-squares slope of log|vals| vs log|s| over the outer half of the range."""
    mask = np.abs(s) > 0.5 * np.max(np.abs(s))
    v = np.abs(vals[mask])
    ss = np.abs(s[mask])
    good = (v > 1e-12) & (ss > 1e-12)
    if np.count_nonzero(good) < 10:
        return 0.0
    slope = np.polyfit(np.log(ss[good]), np.log(v[good]), 1)[0]
    return float(max(slope, 0.0))


def _growth_ratio_excess(s, vals, r):
    """Spread of |vals| / (1 + |s|^r): near 1 when the declared exponent fits,
    blowing up toward the range ends when it does not."""
    ratio = np.abs(vals) / (1.0 + np.abs(s) ** r)
    med = max(float(np.median(ratio)), 1e-12)
    return float(np.max(ratio) / med)
