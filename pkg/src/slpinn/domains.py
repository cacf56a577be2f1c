"""Domain families, boundary-fitted coordinates and collocation grids.

Supported domains:

* channel  (0,1)^2 with the outflow boundary at y = 0,
* unit circle, with boundary-fitted coordinates
      x = (1 - eta) cos(tau),   y = (1 - eta) sin(tau),
* ellipses x^2/A^2 + y^2/B^2 < 1 in elliptic coordinates; for A > B
      x = a cosh(R - eta) cos(tau),  y = a sinh(R - eta) sin(tau),
  and with sinh/cosh swapped when B > A.  Here a*cosh(R), a*sinh(R) equal
  the larger/smaller semi-axes so that eta = 0 is the physical boundary.

eta is the inward layer coordinate (0 on the boundary), tau the tangential
angle.  The layer forms on the outflow half tau in [pi, 2*pi].
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (DegenerateDomainError, NotApplicableError, OutOfDomainError,
                     SingularPointError)

CHANNEL = "channel"
CIRCLE = "circle"
ELLIPSE_X = "ellipse_x"
ELLIPSE_Y = "ellipse_y"

_RADIAL_GUARD = 1e-6     # smallest admissible 1 - eta on the circle
_METRIC_GUARD = 1e-12    # smallest admissible H on ellipses


def elliptic_parameters(A, B, orientation):
    """Focal scale `a` and radial extent `R` of the elliptic coordinates.

    Solves a*cosh(R) = major semi-axis, a*sinh(R) = minor semi-axis.
    `orientation` is "x" (major axis along x, A > B) or "y" (B > A).
    """
    if A <= 0 or B <= 0:
        raise ValueError("semi-axes must be positive")
    if A == B:
        raise DegenerateDomainError(
            "A == B describes a circle; use the circle domain instead")
    if orientation == "x":
        if A < B:
            raise ValueError("x-major orientation requires A > B")
        major, minor = A, B
    elif orientation == "y":
        if B < A:
            raise ValueError("y-major orientation requires B > A")
        major, minor = B, A
    else:
        raise ValueError(f"unknown orientation {orientation!r}")
    a = math.sqrt(A * A - B * B) if A > B else math.sqrt(B * B - A * A)
    R = math.atanh(minor / major)
    return a, R


@dataclass(frozen=True)
class DomainSpec:
    """One of the supported domain families with derived coordinate data."""

    kind: str
    A: float = 0.0          # semi-axis along x (ellipses)
    B: float = 0.0          # semi-axis along y (ellipses)
    a: float = 0.0          # focal scale (ellipses)
    R: float = 0.0          # radial extent of the elliptic coordinates

    @classmethod
    def channel(cls):
        return cls(CHANNEL)

    @classmethod
    def circle(cls):
        return cls(CIRCLE)

    @classmethod
    def ellipse(cls, A, B):
        if A == B:
            raise DegenerateDomainError(
                "A == B describes a circle; use DomainSpec.circle()")
        orientation = "x" if A > B else "y"
        a, R = elliptic_parameters(A, B, orientation)
        kind = ELLIPSE_X if A > B else ELLIPSE_Y
        return cls(kind, A=float(A), B=float(B), a=a, R=R)

    @property
    def is_ellipse(self):
        return self.kind in (ELLIPSE_X, ELLIPSE_Y)

    @property
    def is_curved(self):
        return self.kind != CHANNEL

    @property
    def layer_limit(self):
        """Upper end of the layer coordinate (degenerate center/focal line)."""
        if self.kind == CIRCLE:
            return 1.0
        if self.is_ellipse:
            return self.R
        raise NotApplicableError("channel has no layer coordinate")

    @property
    def decay_coefficient(self):
        """Coefficient k in the corrector exponent exp(k sin(tau) eta / eps).

        Equal to the x-semi-axis: 1 for the circle, A for both ellipse
        orientations (A = a*cosh R for x-major, a*sinh R for y-major).
        """
        if self.kind == CIRCLE:
            return 1.0
        if self.is_ellipse:
            return self.A
        raise NotApplicableError("channel corrector decays as exp(-y/eps)")

    def radial_factors(self, eta):
        """(h, g): radial parts of the eta/tau convection coefficients."""
        if self.kind == ELLIPSE_X:
            return self.a * np.cosh(self.R - eta), self.a * np.sinh(self.R - eta)
        if self.kind == ELLIPSE_Y:
            return self.a * np.sinh(self.R - eta), self.a * np.cosh(self.R - eta)
        raise NotApplicableError("radial factors are an ellipse concept")

    def upper_boundary_y(self, x):
        """Ordinate of the inflow boundary above abscissa x."""
        if self.kind == CHANNEL:
            return np.ones_like(np.asarray(x, dtype=float))
        if self.kind == CIRCLE:
            return np.sqrt(np.clip(1.0 - np.asarray(x) ** 2, 0.0, None))
        return self.B * np.sqrt(np.clip(1.0 - (np.asarray(x) / self.A) ** 2, 0.0, None))

    @property
    def x_extent(self):
        return 1.0 if self.kind == CIRCLE else (self.A if self.is_ellipse else 1.0)


def to_cartesian(domain, pts):
    """Map computational points to (x, y).  Identity on the channel."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    if domain.kind == CHANNEL:
        return pts[:, :2].copy()
    eta, tau = pts[:, 0], pts[:, 1]
    lim = domain.layer_limit
    if np.any(eta < 0) or np.any(eta > lim):
        raise OutOfDomainError("eta out of [0, layer_limit]")
    if domain.kind == CIRCLE:
        r = 1.0 - eta
        return np.column_stack([r * np.cos(tau), r * np.sin(tau)])
    if domain.kind == ELLIPSE_X:
        return np.column_stack([domain.a * np.cosh(domain.R - eta) * np.cos(tau),
                                domain.a * np.sinh(domain.R - eta) * np.sin(tau)])
    return np.column_stack([domain.a * np.sinh(domain.R - eta) * np.cos(tau),
                            domain.a * np.cosh(domain.R - eta) * np.sin(tau)])


def map_jets(domain, eta, tau):
    """First and second derivatives of the coordinate map.

    Returns a dict with x, y and their partials w.r.t. eta and tau
    (mixed eta-tau derivatives are never needed by the operators).
    At eta = 0 the tau-entries describe the boundary curve.
    """
    eta = np.asarray(eta, dtype=float)
    tau = np.asarray(tau, dtype=float)
    ct, st = np.cos(tau), np.sin(tau)
    if domain.kind == CIRCLE:
        r = 1.0 - eta
        return {"x": r * ct, "y": r * st,
                "x_e": -ct, "y_e": -st,
                "x_ee": np.zeros_like(ct), "y_ee": np.zeros_like(ct),
                "x_t": -r * st, "y_t": r * ct,
                "x_tt": -r * ct, "y_tt": -r * st}
    if domain.is_ellipse:
        u = domain.R - eta
        ch, sh = domain.a * np.cosh(u), domain.a * np.sinh(u)
        if domain.kind == ELLIPSE_X:
            fx, gx, fy, gy = ch, sh, sh, ch      # x = f cos, y = g sin-style
        else:
            fx, gx, fy, gy = sh, ch, ch, sh
        return {"x": fx * ct, "y": fy * st,
                "x_e": -gx * ct, "y_e": -gy * st,
                "x_ee": fx * ct, "y_ee": fy * st,
                "x_t": -fx * st, "y_t": fy * ct,
                "x_tt": -fx * ct, "y_tt": -fy * st}
    raise NotApplicableError("channel coordinates are Cartesian already")


def metric_H(domain, pts):
    """Metric factor of the transformed operator: (1-eta)^2 on the circle,
    (a sinh(R-eta) cos tau)^2 + (a cosh(R-eta) sin tau)^2 on ellipses
    (with the hyperbolic roles swapped for the y-major orientation)."""
    if domain.kind == CHANNEL:
        raise NotApplicableError("no metric factor on the channel")
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    eta, tau = pts[:, 0], pts[:, 1]
    if domain.kind == CIRCLE:
        return (1.0 - eta) ** 2
    h, g = domain.radial_factors(eta)
    return (g * np.cos(tau)) ** 2 + (h * np.sin(tau)) ** 2


@dataclass(frozen=True)
class SampleGrid:
    """Tensor-product collocation grid in computational coordinates."""

    domain: DomainSpec
    axes: tuple
    counts: tuple
    ranges: tuple
    points: np.ndarray   # (N, len(axes))

    def __len__(self):
        return self.points.shape[0]

    @property
    def spatial(self):
        """(eta, tau) or (x, y) columns, regardless of a leading time axis."""
        return self.points[:, -2:]

    @property
    def times(self):
        return self.points[:, 0] if "t" in self.axes else None

    def cartesian(self):
        return to_cartesian(self.domain, self.spatial)

    def write_csv(self, path):
        xy = self.cartesian()
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(list(self.axes) + ["x", "y"])
            for row, cart in zip(self.points, xy):
                writer.writerow([f"{v:.17g}" for v in row] + [f"{v:.17g}" for v in cart])


def uniform_grid(domain, n_eta, n_tau, n_t=None, T=None):
    """Uniform cell-centred tensor grid.

    All spatial axes use nodes at cell centres ((i + 1/2) * spacing), so
    samples stay clear of the mask zeros on the channel, of the degenerate
    center (the last eta node sits one half-spacing inside), and of the
    characteristic lines tau in {0, pi} where several designed forcings
    are singular.  tau covers [0, 2*pi) without duplicating the seam.
    An optional time axis spans [0, T] inclusive.
    """
    if n_eta < 2 or n_tau < 2:
        raise ValueError("need at least two nodes per axis")
    if domain.kind == CHANNEL:
        x = (np.arange(n_eta) + 0.5) / n_eta
        y = (np.arange(n_tau) + 0.5) / n_tau
        axes, cols, ranges = ("x", "y"), (x, y), ((0.0, 1.0), (0.0, 1.0))
    else:
        lim = domain.layer_limit
        eta = (np.arange(n_eta) + 0.5) * (lim / n_eta)
        tau = (np.arange(n_tau) + 0.5) * (2.0 * np.pi / n_tau)
        axes, cols, ranges = ("eta", "tau"), (eta, tau), ((0.0, lim), (0.0, 2.0 * np.pi))
    if n_t is not None:
        if T is None:
            raise ValueError("a time grid needs a final time T")
        t = np.linspace(0.0, T, n_t)
        axes = ("t",) + axes
        cols = (t,) + cols
        ranges = ((0.0, float(T)),) + ranges
    mesh = np.meshgrid(*cols, indexing="ij")
    points = np.column_stack([m.ravel() for m in mesh])
    grid = SampleGrid(domain, axes, tuple(len(c) for c in cols), ranges, points)
    _reject_near_singular(grid)
    return grid


def _reject_near_singular(grid):
    d = grid.domain
    if d.kind == CIRCLE:
        if np.any(1.0 - grid.spatial[:, 0] < _RADIAL_GUARD):
            raise SingularPointError("grid reaches the circle center")
    elif d.is_ellipse:
        if np.any(metric_H(d, grid.spatial) < _METRIC_GUARD):
            raise SingularPointError("grid reaches the focal degeneracy")


def split_layer_region(grid):
    """Index arrays (upper, lower) splitting tau in (0, pi) vs [pi, 2*pi].

    The seam tau = 0 counts as 2*pi and therefore lands on the layer side,
    matching the closed lower interval of the residual split.
    """
    if grid.domain.kind == CHANNEL:
        raise NotApplicableError("channel grids are not split by angle")
    tau = grid.spatial[:, 1]
    upper = np.nonzero((tau > 0.0) & (tau < np.pi))[0]
    lower = np.nonzero(~((tau > 0.0) & (tau < np.pi)))[0]
    return upper, lower


def lower_half_mask(domain, tau):
    """True where the boundary-layer corrector is active (tau in [pi, 2pi])."""
    tau = np.asarray(tau, dtype=float)
    if domain.kind == CHANNEL:
        return np.ones_like(tau, dtype=bool)
    return ~((tau > 0.0) & (tau < np.pi))
