"""Reference fields: limit solution, exact solutions, compatibility checks.

The limit problem -du/dy = f with zero data on the inflow boundary has the
explicit solution u0(x, y) = integral of f(x, s) ds from y up to the
inflow ordinate.  Where no closed-form solution of the full problem
exists, the asymptotic field u0 + corrector (decay amplitude -u0 at the
trace point) serves as the reference; its bias is O(sqrt(eps)).

Closed-form references: a separable solution for the channel with
f = sin(2*pi*x), a polynomial/secondary-root solution for the
time-dependent disk problem, and a two-term exponential profile whose
forcing is obtained by applying the operator symbolically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad

from .correctors import CutoffFn, cutoff_eval, guarded_exp, layer_exponential
from .domains import CHANNEL, CIRCLE, DomainSpec, lower_half_mask
from .errors import NotApplicableError, OutOfDomainError

QUAD_OPTS = dict(epsabs=1e-12, epsrel=1e-12, limit=50)


# ---------------------------------------------------------------------------
# limit solution and asymptotic reference
# ---------------------------------------------------------------------------

def limit_solution(domain, f, x, y):
    """u0(x, y) = int_y^{C_u(x)} f(x, s) ds by adaptive quadrature."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    ext = domain.x_extent
    if np.any(np.abs(x) > ext * (1 + 1e-12)):
        raise OutOfDomainError("abscissa outside the domain extent")
    top = domain.upper_boundary_y(x)
    out = np.empty_like(x)
    for i, (xi, yi, ti) in enumerate(zip(x, y, top)):
        if ti - yi == 0.0:
            out[i] = 0.0
        else:
            out[i], _ = quad(lambda s: float(f(xi, s)), yi, ti, **QUAD_OPTS)
    return out


def asymptotic_reference(problem, pts):
    """u0 + boundary-layer corrector, the reference where no exact solution
    exists (documented O(sqrt(eps)) bias)."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    dom = problem.domain
    f = problem.forcing
    eps = problem.eps
    if dom.kind == CHANNEL:
        x, y = pts[:, 0], pts[:, 1]
        u0 = limit_solution(dom, f, x, y)
        trace = limit_solution(dom, f, x, np.zeros_like(y))
        return u0 - trace * guarded_exp(-y / eps)
    eta, tau = pts[:, -2], pts[:, -1]
    from .domains import to_cartesian
    xy = to_cartesian(dom, pts[:, -2:])
    u0 = limit_solution(dom, f, xy[:, 0], xy[:, 1])
    bdry = to_cartesian(dom, np.column_stack([np.zeros_like(eta), tau]))
    trace = limit_solution(dom, f, bdry[:, 0], bdry[:, 1])
    E = layer_exponential(dom, eps, eta, tau)
    d0 = cutoff_eval(CutoffFn(dom.layer_limit), eta)[0]
    return u0 - trace * E * d0


# ---------------------------------------------------------------------------
# channel closed form for f = sin(2 pi x)
# ---------------------------------------------------------------------------

def channel_profile(eps, y):
    """g, g', g'' of the separable factor solving
    -eps (g'' - 4 pi^2 g) - g' = 1,  g(0) = g(1) = 0.

    Written via expm1 so the huge particular constant cancels without
    precision loss and the boundary zeros are exact in floating point.
    """
    y = np.asarray(y, dtype=float)
    w2 = 4.0 * math.pi**2
    q = math.sqrt(1.0 + 4.0 * w2 * eps * eps)
    lam_p = 2.0 * w2 * eps / (q + 1.0)            # = (-1+q)/(2 eps), no cancellation
    lam_m = -(1.0 + q) / (2.0 * eps)
    gp = 1.0 / (w2 * eps)
    Em = guarded_exp(lam_m)
    denom = math.expm1(lam_p) - np.expm1(lam_m)   # = e^{lam_p} - e^{lam_m}
    ep_y = np.exp(lam_p * y)
    em_y = guarded_exp(lam_m * y)
    t1 = ep_y * np.expm1(lam_p * (1.0 - y)) + Em * np.expm1(lam_p * y)
    t3 = math.expm1(lam_p) * em_y
    g = gp * (t1 - t3) / denom
    Ep = math.exp(lam_p)
    d_t1 = lam_p * (ep_y * np.expm1(lam_p * (1.0 - y)) - Ep) + Em * lam_p * ep_y
    d_t3 = math.expm1(lam_p) * lam_m * em_y
    g1 = gp * (d_t1 - d_t3) / denom
    dd_t1 = lam_p**2 * (ep_y * np.expm1(lam_p * (1.0 - y)) - Ep) + Em * lam_p**2 * ep_y
    dd_t3 = math.expm1(lam_p) * lam_m**2 * em_y
    g2 = gp * (dd_t1 - dd_t3) / denom
    return g, g1, g2


def channel_exact(eps, x, y):
    """Solution of the channel problem with f = sin(2 pi x)."""
    x = np.asarray(x, dtype=float)
    g, _, _ = channel_profile(eps, y)
    return np.sin(2.0 * math.pi * x) * g


# ---------------------------------------------------------------------------
# time-dependent disk: designed solution and its induced forcing
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _time_symbols():
    import sympy as sp

    t, x, y, eps = sp.symbols("t x y epsilon", real=True)
    S = sp.sqrt(1 - x**2)
    u = t * (1 - x**2) ** 2 * (-y + S + eps * (y + S) / (1 - x**2) ** sp.Rational(3, 2))
    f = sp.diff(u, t) - eps * (sp.diff(u, x, 2) + sp.diff(u, y, 2)) - sp.diff(u, y)
    mods = [{"sqrt": lambda z: np.sqrt(np.maximum(z, 0.0))}, "numpy"]
    return (sp.lambdify((t, x, y, eps), u, modules=mods),
            sp.lambdify((t, x, y, eps), f, modules=mods))


def time_circle_exact(eps, t, x, y):
    """Designed solution of the time-dependent disk problem (0 on the rim)."""
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    r2 = x * x + y * y
    on_rim = np.isclose(r2, 1.0, atol=1e-12)
    if np.any((np.abs(x) >= 1.0) & ~on_rim):
        raise OutOfDomainError("time-dependent solution needs |x| < 1 inside the disk")
    ufun, _ = _time_symbols()
    xs = np.where(on_rim, 0.0, x)
    vals = ufun(t, xs, np.where(on_rim, 0.0, y), eps)
    return np.where(on_rim, 0.0, vals)


def time_circle_forcing(eps):
    """Forcing induced by the designed solution (exact, not truncated)."""
    _, ffun = _time_symbols()

    def f(t, x, y):
        return ffun(np.asarray(t, dtype=float), np.asarray(x, dtype=float),
                    np.asarray(y, dtype=float), eps)

    return f


# ---------------------------------------------------------------------------
# oscillatory exact profile and its induced forcing
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _oscillation_symbols():
    import sympy as sp

    x, y, eps = sp.symbols("x y epsilon", real=True)
    S = sp.sqrt(1 - x**2)
    A = S  # pluggable amplitude; the default ties it to the geometry
    u = (-A * (y + S) * (1 - sp.exp(-2 * A * S / eps))
         + 2 * A * S * (1 - sp.exp(-A * (y + S) / eps)))
    f = -eps * (sp.diff(u, x, 2) + sp.diff(u, y, 2)) - sp.diff(u, y)
    mods = [{"exp": guarded_exp, "sqrt": lambda z: np.sqrt(np.maximum(z, 0.0))}, "numpy"]
    return (sp.lambdify((x, y, eps), u, modules=mods),
            sp.lambdify((x, y, eps), f, modules=mods))


def oscillation_exact(eps, x, y, amplitude=None):
    """Two-term exponential profile with several humps along the layer."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(np.abs(x) > 1.0):
        raise OutOfDomainError("oscillation profile needs |x| <= 1")
    if amplitude is None:
        ufun, _ = _oscillation_symbols()
        return ufun(x, y, eps)
    S = np.sqrt(np.maximum(1.0 - x * x, 0.0))
    A = amplitude(x)
    return (-A * (y + S) * (1.0 - guarded_exp(-2.0 * A * S / eps))
            + 2.0 * A * S * (1.0 - guarded_exp(-A * (y + S) / eps)))


def oscillation_forcing(eps):
    _, ffun = _oscillation_symbols()

    def f(x, y):
        return ffun(np.asarray(x, dtype=float), np.asarray(y, dtype=float), eps)

    return f


# ---------------------------------------------------------------------------
# incompatible-forcing asymptotic field (also seeds the cubic problem)
# ---------------------------------------------------------------------------

def incompatible_disk_reference(eps, x, y):
    """u0 + corrector for f = 1 on the disk, in Cartesian variables.

    u0 = sqrt(1-x^2) - y and the corrector amplitude at the rim is
    2 sin(tau) on the outflow half.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    r = np.sqrt(x * x + y * y)
    if np.any(r > 1.0 + 1e-12):
        raise OutOfDomainError("point outside the unit disk")
    u0 = np.sqrt(np.maximum(1.0 - x * x, 0.0)) - y
    eta = 1.0 - r
    s = np.where(r > 0, y / np.maximum(r, 1e-300), 0.0)
    low = s <= 0
    E = guarded_exp(np.where(low, s * eta / eps, -np.inf))
    d0 = cutoff_eval(CutoffFn(1.0), np.clip(eta, 0.0, 1.0))[0]
    return u0 + 2.0 * s * E * d0


# ---------------------------------------------------------------------------
# forcing registry
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Forcing:
    name: str
    fn: Callable
    time_dependent: bool = False


def make_forcing(name, domain=None, eps=None):
    """Named forcings used throughout the experiments.

    `expr:<formula>` entries are parsed by the restricted arithmetic
    grammar in `expressions`.
    """
    if name.startswith("expr:"):
        from .expressions import parse_expression
        fn, uses_time = parse_expression(name[5:])
        return Forcing(name, fn, time_dependent=uses_time)
    if name == "sin2pix":
        return Forcing(name, lambda x, y: np.sin(2.0 * math.pi * np.asarray(x)) * np.ones_like(np.asarray(y, dtype=float)))
    if name == "compatible_quartic":
        return Forcing(name, lambda x, y: (1.0 - np.asarray(x) ** 2) ** 2 * np.ones_like(np.asarray(y, dtype=float)))
    if name == "one":
        return Forcing(name, lambda x, y: np.ones_like(np.asarray(x, dtype=float) + np.asarray(y, dtype=float)))
    if name == "zero":
        return Forcing(name, lambda x, y: np.zeros_like(np.asarray(x, dtype=float) + np.asarray(y, dtype=float)))
    if name == "ellipse_quartic":
        if domain is None or not domain.is_ellipse:
            raise ValueError("ellipse_quartic needs an ellipse domain")
        A, B = domain.A, domain.B
        return Forcing(name, lambda x, y: (1.0 - (np.asarray(x) / A) ** 2) ** 2 / B * np.ones_like(np.asarray(y, dtype=float)))
    if name == "oscillation":
        if eps is None:
            raise ValueError("oscillation forcing depends on eps")
        return Forcing(name, oscillation_forcing(eps))
    if name == "time_polynomial":
        if eps is None:
            raise ValueError("time forcing depends on eps")
        return Forcing(name, time_circle_forcing(eps), time_dependent=True)
    if name == "nonlinear_bump":
        if eps is None:
            raise ValueError("the cubic problem's forcing depends on eps")

        def f(x, y):
            return 1.0 + incompatible_disk_reference(eps, x, y) ** 3

        return Forcing(name, f)
    raise ValueError(f"unknown forcing {name!r}")


# ---------------------------------------------------------------------------
# compatibility of the forcing at the characteristic points
# ---------------------------------------------------------------------------

@dataclass
class CompatibilityReport:
    points: list
    values: dict        # (point index, label) -> value
    compatible: bool
    threshold: float


_D1_STENCIL = (np.array([-2, -1, 1, 2]), np.array([1.0, -8.0, 8.0, -1.0]) / 12.0)
_D2_STENCIL = (np.array([-2, -1, 0, 1, 2]),
               np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0)
_D1_ONESIDED = (np.array([0, 1, 2, 3, 4]),
                np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / 12.0)
_D2_ONESIDED = (np.array([0, 1, 2, 3, 4, 5]),
                np.array([45.0, -154.0, 214.0, -156.0, 61.0, -10.0]) / 12.0)


def _fd(f, x0, y0, h, axis, order, inward):
    """4th-order finite difference along one axis, falling back to a
    one-sided stencil (oriented into the domain) when the centred one
    leaves the forcing's domain of definition."""

    def sample(offsets):
        pts = [(x0 + h * o, y0) if axis == 0 else (x0, y0 + h * o) for o in offsets]
        vals = np.array([float(f(px, py)) for px, py in pts])
        return vals

    offs, coef = (_D1_STENCIL if order == 1 else _D2_STENCIL)
    with np.errstate(invalid="ignore"):
        try:
            vals = sample(offs)
        except (ValueError, FloatingPointError):
            vals = np.full(len(offs), np.nan)
    if np.all(np.isfinite(vals)):
        return float(coef @ vals) / h**order
    offs, coef = (_D1_ONESIDED if order == 1 else _D2_ONESIDED)
    offs = offs * inward
    vals = sample(offs)
    return float(coef @ vals) / (inward * h) ** order


def compatibility_check(f, domain, threshold=1e-8):
    """Check f = f_x = f_y = f_yy = 0 at the characteristic points.

    These are the conditions 0 <= 2*p1 + p2 <= 2 on the mixed partials;
    violating them produces unbounded derivatives of the limit solution
    at the points where the characteristics graze the boundary.
    """
    if domain.kind == CHANNEL:
        raise NotApplicableError("characteristic points belong to curved domains")
    xc = domain.x_extent
    h = 1e-4 * xc
    pts = [(xc, 0.0), (-xc, 0.0)]
    values = {}
    ok = True
    for i, (x0, y0) in enumerate(pts):
        inward = -1 if x0 > 0 else 1
        values[(i, "f")] = float(f(x0, y0))
        values[(i, "f_x")] = _fd(f, x0, y0, h, 0, 1, inward)
        values[(i, "f_y")] = _fd(f, x0, y0, h, 1, 1, inward)
        values[(i, "f_yy")] = _fd(f, x0, y0, h, 1, 2, inward)
        for label in ("f", "f_x", "f_y", "f_yy"):
            if abs(values[(i, label)]) > threshold:
                ok = False
    return CompatibilityReport(pts, values, ok, threshold)
