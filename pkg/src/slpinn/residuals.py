"""Residual evaluation: direct operator path, expanded closed forms, psi.

Two independent routes produce the strong-form residual:

* the *direct* path assembles the ansatz derivative bundle by exact
  product/chain rules and applies the transformed operator term by term
  (this is what training differentiates), and
* the *expanded* path evaluates hand-derived closed-form coefficient
  functions multiplying the raw network partials - the per-domain,
  per-half formulas one gets by expanding the operator over the masked,
  corrector-enriched ansatz on paper.

The two must agree to near machine precision; the expanded route is used
as a cross-check oracle only, never for training.

`psi_dominant` is the O(1/eps) part of the layer-half residual: the terms
where the corrector exponential's derivatives bring down 1/eps factors.
Subtracting it (the "psi split") keeps the trained objective bounded as
eps -> 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import correctors as corr
from .correctors import (AnsatzSpec, CutoffFn, cutoff_eval, guarded_exp,
                         pullback_trace, pullback_vhat)
from .domains import CHANNEL, CIRCLE, DomainSpec, lower_half_mask, map_jets, to_cartesian
from .errors import NotApplicableError, SingularPointError

STEADY, TIME, NONLINEAR = "steady", "time", "nonlinear"

MAIN_KEYS = ((), (0,), (1,), (0, 0), (0, 1), (1, 1))
TIME_KEY = (2,)


@dataclass(frozen=True)
class ProblemSpec:
    """Equation variant, domain, perturbation parameter and forcing."""

    domain: DomainSpec
    variant: str                      # "steady" | "time" | "nonlinear"
    eps: float
    forcing: Callable                 # f(x, y) or f(t, x, y)
    rhs_convention: str = "Hf"        # ellipses: train against H*f or plain f
    T: float = 1.0
    name: str = ""

    def __post_init__(self):
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if self.variant not in (STEADY, TIME, NONLINEAR):
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.variant != STEADY and self.domain.kind != CIRCLE:
            raise NotApplicableError("time/nonlinear variants are circle problems")

    @property
    def time_dependent(self):
        return self.variant == TIME

    def ansatz(self, use_corrector=True):
        return AnsatzSpec(self.domain, self.variant, use_corrector)


# ---------------------------------------------------------------------------
# rhs and operator
# ---------------------------------------------------------------------------

def rhs_values(problem, pts):
    """Forcing sampled at computational points, with the elliptic H factor
    folded in when the problem trains against the transformed right side."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    dom = problem.domain
    spat = pts[:, -2:]
    xy = to_cartesian(dom, spat)
    if problem.time_dependent:
        f = problem.forcing(pts[:, 0], xy[:, 0], xy[:, 1])
    else:
        f = problem.forcing(xy[:, 0], xy[:, 1])
    f = np.asarray(f, dtype=float) * np.ones(len(pts))
    if dom.is_ellipse and problem.rhs_convention == "Hf":
        from .domains import metric_H
        f = metric_H(dom, spat) * f
    return f


def operator_linear(problem, bundle, eta, tau):
    """Apply the (linearized) transformed operator to an ansatz bundle."""
    dom = problem.domain
    eps = problem.eps
    if dom.kind == CHANNEL:
        return -eps * (bundle["xx"] + bundle["yy"]) - bundle["y"]
    s, c = np.sin(tau), np.cos(tau)
    if dom.kind == CIRCLE:
        r = 1.0 - eta
        if np.any(r < 1e-9):
            raise SingularPointError("operator evaluated at the circle center")
        out = (-eps * (bundle["tt"] - r * bundle["e"] + r * r * bundle["ee"])
               + r * r * s * bundle["e"] - r * c * bundle["t"]) / (r * r)
    else:
        if np.any(eta >= dom.R):
            raise SingularPointError("operator evaluated on the focal line")
        h, g = dom.radial_factors(eta)
        out = (-eps * (bundle["ee"] + bundle["tt"])
               + h * s * bundle["e"] - g * c * bundle["t"])
    if problem.time_dependent:
        out = out + bundle["dt"]
    return out


def apply_operator(problem, params, spec, point):
    """Direct-path residual P(v~) - rhs (+ v~^3 for the cubic variant)."""
    point = np.asarray(point, dtype=float)
    bundle = corr.assemble_ansatz(spec, params, problem.eps, point)
    pts = point[None, :]
    if problem.domain.kind == CHANNEL:
        res = operator_linear(problem, bundle, None, None)
    else:
        eta, tau = pts[0, -2], pts[0, -1]
        res = operator_linear(problem, bundle, np.atleast_1d(eta), np.atleast_1d(tau))
    if problem.variant == NONLINEAR:
        res = res + bundle["v"] ** 3
    return float(res[0] - rhs_values(problem, pts)[0])


# ---------------------------------------------------------------------------
# expanded closed forms
# ---------------------------------------------------------------------------

def _curved_coefficients(problem, eta, tau):
    """Closed-form coefficient arrays of the expanded residual.

    Returns (K, M, E) where K maps v^-partials and M trace-partials to
    their multipliers; the trace block is additionally scaled by the layer
    exponential E (zero on the inflow half).  Derived by expanding the
    operator over the masked ansatz; the per-half branching is carried by
    the masked regularizer and the characteristic function inside E.
    """
    dom = problem.domain
    eps = problem.eps
    s, c = np.sin(tau), np.cos(tau)
    C, C_e, C_ee, C_t, C_tt = corr.regularizer_C(dom, eta, tau)
    cut = CutoffFn(dom.layer_limit)
    d0, d1, d2 = cutoff_eval(cut, eta)
    k = dom.decay_coefficient
    E = corr.layer_exponential(dom, eps, eta, tau)
    if dom.kind == CIRCLE:
        r = 1.0 - eta
        K = {
            "tt": -eps * C / r**2,
            "t": -2.0 * eps * C_t / r**2 - c * C / r,
            "ee": -eps * C,
            "e": eps * C / r - 2.0 * eps * C_e + s * C,
            "v": eps * C_e / r - eps * C_ee - eps * C_tt / r**2 + s * C_e - c * C_t / r,
        }
        ray = d1 * C + d0 * C_e
        M = {
            "tt": eps * d0 * C / r**2,
            "t": (d0 / r**2) * ((1.0 + eta) * c * C + 2.0 * eps * C_t),
            "v": ((d0 / r**2) * (-s * C + (1.0 + eta) * c * C_t + eps * C_tt)
                  + eps * (d2 * C + 2.0 * d1 * C_e + d0 * C_ee)
                  + s * ray - (eps / r) * ray
                  + (d0 * C / r**2) * (eta * c * c / eps)),
        }
    else:
        h, g = dom.radial_factors(eta)
        A = dom.decay_coefficient
        K = {
            "tt": -eps * C,
            "t": -2.0 * eps * C_t - g * c * C,
            "ee": -eps * C,
            "e": -2.0 * eps * C_e + h * s * C,
            "v": -eps * (C_ee + C_tt) + h * s * C_e - g * c * C_t,
        }
        ray = d1 * C + d0 * C_e
        psi_bracket = (A * s) ** 2 - h * s * s * A + (A * eta * c) ** 2 + g * c * c * A * eta
        M = {
            "tt": eps * d0 * C,
            "t": 2.0 * eps * d0 * C_t + 2.0 * A * eta * c * d0 * C + g * c * d0 * C,
            "v": (eps * (d2 * C + 2.0 * d1 * C_e + d0 * C_ee + d0 * C_tt)
                  + (2.0 * A - h) * s * ray
                  + 2.0 * A * eta * c * d0 * C_t - A * eta * s * d0 * C + g * c * d0 * C_t
                  + (d0 * C / eps) * psi_bracket),
        }
    return K, M, E


def _curved_net_parts(problem, params, pts):
    """Raw network partials pulled back to (eta, tau) at the points and at
    their boundary traces."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    timed = problem.time_dependent
    if timed:
        t, eta, tau = pts[:, 0], pts[:, 1], pts[:, 2]
    else:
        eta, tau = pts[:, 0], pts[:, 1]
        t = None
    jets = map_jets(problem.domain, eta, tau)
    jets0 = map_jets(problem.domain, np.zeros_like(eta), tau)
    cart = np.column_stack([jets["x"], jets["y"]])
    cart0 = np.column_stack([jets0["x"], jets0["y"]])
    if timed:
        cart = np.column_stack([cart, t])
        cart0 = np.column_stack([cart0, t])
    net = params.network()
    keys = MAIN_KEYS + ((TIME_KEY,) if timed else ())
    U = net.quantities(params.theta, cart, keys)
    Wq = net.quantities(params.theta, cart0, keys)
    V = pullback_vhat(U, jets, time=timed)
    W = pullback_trace(Wq, jets0, time=timed)
    return V, W, eta, tau, t


def expanded_residual(problem, params, point):
    """Hand-expanded residual formula for one point (cross-check oracle)."""
    return float(expanded_residual_many(problem, params,
                                        np.asarray(point, dtype=float)[None, :])[0])


def expanded_residual_many(problem, params, pts):
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    eps = problem.eps
    if problem.domain.kind == CHANNEL:
        x, y = pts[:, 0], pts[:, 1]
        net = params.network()
        U = net.quantities(params.theta, pts, MAIN_KEYS)
        Wq = net.quantities(params.theta, np.column_stack([x, np.zeros_like(y)]),
                            ((), (0,), (0, 0)))
        m = x * x - x
        E = guarded_exp(-y / eps)
        res = (-2.0 * eps * ((y - 1.0) * U[()] + Wq[()] * E)
               - eps * m * Wq[(0, 0)] * E
               - 2.0 * eps * ((2.0 * x - 1.0) * (y - 1.0) * U[(0,)] + m * U[(1,)])
               - 2.0 * eps * (2.0 * x - 1.0) * Wq[(0,)] * E
               - eps * m * (y - 1.0) * (U[(0, 0)] + U[(1, 1)])
               - m * (U[()] + (y - 1.0) * U[(1,)]))
        return res - rhs_values(problem, pts)
    V, W, eta, tau, t = _curved_net_parts(problem, params, pts)
    K, M, E = _curved_coefficients(problem, eta, tau)
    lin = (K["tt"] * V["tt"] + K["t"] * V["t"] + K["ee"] * V["ee"]
           + K["e"] * V["e"] + K["v"] * V["v"]
           + E * (M["tt"] * W["tt"] + M["t"] * W["t"] + M["v"] * W["v"]))
    if problem.time_dependent:
        gate = np.exp(t) - 1.0
        C = corr.regularizer_C(problem.domain, eta, tau)[0]
        d0 = cutoff_eval(CutoffFn(problem.domain.layer_limit), eta)[0]
        res = ((np.exp(t) * V["v"] + gate * V["dt"]) * C
               - (np.exp(t) * W["v"] + gate * W["dt"]) * E * d0 * C
               + gate * lin)
    else:
        res = lin
    if problem.variant == NONLINEAR:
        C = corr.regularizer_C(problem.domain, eta, tau)[0]
        d0 = cutoff_eval(CutoffFn(problem.domain.layer_limit), eta)[0]
        value = (V["v"] - W["v"] * E * d0) * C
        res = res + value**3
    return res - rhs_values(problem, pts)


def psi_dominant(problem, params, point):
    """The O(1/eps) dominant term of the layer-half residual at one point."""
    return float(psi_dominant_many(problem, params,
                                   np.asarray(point, dtype=float)[None, :])[0])


def psi_dominant_many(problem, params, pts):
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    if problem.domain.kind == CHANNEL:
        raise NotApplicableError("no dominant-term split on the channel")
    V, W, eta, tau, t = _curved_net_parts(problem, params, pts)
    coeff = psi_coefficient(problem, eta, tau, t)
    return coeff * W["v"]


def psi_coefficient(problem, eta, tau, t=None):
    """psi divided by the boundary-trace network value (theta-independent)."""
    dom = problem.domain
    if dom.kind == CHANNEL:
        raise NotApplicableError("no dominant-term split on the channel")
    eps = problem.eps
    s, c = np.sin(tau), np.cos(tau)
    C = corr.regularizer_C(dom, eta, tau)[0]
    d0 = cutoff_eval(CutoffFn(dom.layer_limit), eta)[0]
    k = dom.decay_coefficient
    E = corr.layer_exponential(dom, eps, eta, tau)
    if dom.kind == CIRCLE:
        r = 1.0 - eta
        coeff = C * (d0 / r**2) * (eta * c * c / eps) * E
    else:
        h, g = dom.radial_factors(eta)
        A = dom.decay_coefficient
        bracket = (A * s) ** 2 - h * s * s * A + (A * eta * c) ** 2 + g * c * c * A * eta
        coeff = (d0 * C / eps) * bracket * E
    if problem.time_dependent:
        coeff = coeff * (np.exp(t) - 1.0)
    return coeff


# ---------------------------------------------------------------------------
# compiled linear program over a grid (the training fast path)
# ---------------------------------------------------------------------------

def _dedup_rows(rows):
    # rows come from tensor-grid broadcasts, so duplicates are bit-identical
    uniq, inverse = np.unique(rows, axis=0, return_inverse=True)
    return uniq, inverse.ravel()


@dataclass
class ResidualProgram:
    """Residual of the assembled ansatz over a fixed grid, written as an
    exact linear form in the raw network partials.

    The coefficient arrays are extracted by probing the direct pipeline
    (pullback -> assembly -> operator) with basis quantity fields, so the
    program *is* the direct path, precompiled for repeated evaluation.
    The cubic term of the nonlinear variant is handled separately.
    """

    problem: ProblemSpec
    spec: AnsatzSpec
    grid: object
    main_pts: np.ndarray = field(init=False)
    trace_unique: np.ndarray = field(init=False)
    trace_inverse: np.ndarray = field(init=False)
    B_main: dict = field(init=False)
    B_trace: dict = field(init=False)
    Bv_main: dict = field(init=False)
    Bv_trace: dict = field(init=False)
    rhs: np.ndarray = field(init=False)
    psi_coeff: Optional[np.ndarray] = field(init=False)
    keys: tuple = field(init=False)

    def __post_init__(self):
        problem, spec, grid = self.problem, self.spec, self.grid
        pts = grid.points
        timed = problem.time_dependent
        self.keys = MAIN_KEYS + ((TIME_KEY,) if timed else ())
        dom = problem.domain
        if dom.kind == CHANNEL:
            x, y = pts[:, 0], pts[:, 1]
            self._eta = self._tau = None
            self.main_pts = pts.copy()
            trace_full = np.column_stack([x, np.zeros_like(y)])
        else:
            if timed:
                t, eta, tau = pts[:, 0], pts[:, 1], pts[:, 2]
            else:
                eta, tau = pts[:, 0], pts[:, 1]
                t = None
            self._eta, self._tau, self._t = eta, tau, t
            self._jets = map_jets(dom, eta, tau)
            self._jets0 = map_jets(dom, np.zeros_like(eta), tau)
            self.main_pts = np.column_stack([self._jets["x"], self._jets["y"]])
            trace_full = np.column_stack([self._jets0["x"], self._jets0["y"]])
            if timed:
                self.main_pts = np.column_stack([self.main_pts, t])
                trace_full = np.column_stack([trace_full, t])
        self.trace_unique, self.trace_inverse = _dedup_rows(trace_full)
        zero = np.zeros(len(pts))
        basis = {k: zero for k in self.keys}
        self.B_main, self.Bv_main = {}, {}
        self.B_trace, self.Bv_trace = {}, {}
        for key in self.keys:
            U = dict(basis)
            U[key] = np.ones(len(pts))
            lin, val = self._pipeline(U, dict(basis))
            if np.any(lin):
                self.B_main[key] = lin
            if np.any(val):
                self.Bv_main[key] = val
            W = dict(basis)
            W[key] = np.ones(len(pts))
            lin, val = self._pipeline(dict(basis), W)
            if np.any(lin):
                self.B_trace[key] = lin
            if np.any(val):
                self.Bv_trace[key] = val
        self.rhs = rhs_values(problem, pts)
        if dom.kind != CHANNEL and spec.use_corrector:
            self.psi_coeff = psi_coefficient(problem, self._eta, self._tau, self._t)
        else:
            self.psi_coeff = None

    # the direct pipeline on raw quantity fields ---------------------------
    def _pipeline(self, U, W):
        problem, spec = self.problem, self.spec
        timed = problem.time_dependent
        if problem.domain.kind == CHANNEL:
            x, y = self.grid.points[:, 0], self.grid.points[:, 1]
            Wtr = {(): W[()], (0,): W[(0,)], (0, 0): W[(0, 0)]}
            bundle = corr.channel_ansatz_bundle(spec, problem.eps, U, Wtr, x, y)
            return operator_linear(problem, bundle, None, None), bundle["v"]
        V = pullback_vhat(U, self._jets, time=timed)
        Wb = pullback_trace(W, self._jets0, time=timed)
        if not spec.use_corrector:
            Wb = {k: np.zeros_like(v) for k, v in Wb.items()}
        bundle = corr.curved_ansatz_bundle(spec, problem.eps, V, Wb,
                                           self._eta, self._tau, t=self._t)
        return operator_linear(problem, bundle, self._eta, self._tau), bundle["v"]

    # evaluation -----------------------------------------------------------
    def _needs_trace(self):
        return bool(self.B_trace) or bool(self.Bv_trace) or self.psi_coeff is not None

    def _contexts(self, params):
        """Per-theta network state shared between fields() and backprop()."""
        tag = params.theta.tobytes()
        cached = getattr(self, "_ctx_cache", None)
        if cached is not None and cached[0] == tag:
            return cached[1], cached[2]
        net = params.network()
        ctx_main = net.context(params.theta, self.main_pts)
        ctx_trace = (net.context(params.theta, self.trace_unique)
                     if self._needs_trace() else None)
        self._ctx_cache = (tag, ctx_main, ctx_trace)
        return ctx_main, ctx_trace

    def fields(self, params):
        """Residual, ansatz value, psi and the raw quantities at theta."""
        net = params.network()
        ctx_main, ctx_trace = self._contexts(params)
        U = net.quantities_ctx(ctx_main, self.keys)
        if ctx_trace is not None:
            Wu = net.quantities_ctx(ctx_trace, self.keys)
            W = {k: v[self.trace_inverse] for k, v in Wu.items()}
        else:
            W = {}
        lin = -self.rhs.copy()
        for k, B in self.B_main.items():
            lin += B * U[k]
        for k, B in self.B_trace.items():
            lin += B * W[k]
        value = np.zeros(len(lin))
        for k, B in self.Bv_main.items():
            value += B * U[k]
        for k, B in self.Bv_trace.items():
            value += B * W[k]
        residual = lin
        if self.problem.variant == NONLINEAR:
            residual = residual + value**3
        psi = None
        if self.psi_coeff is not None:
            psi = self.psi_coeff * W[()]
        return {"residual": residual, "value": value, "psi": psi, "U": U, "W": W}

    def values(self, params):
        return self.fields(params)["value"]

    def backprop(self, params, fields, dldr, psi_split=False):
        """Gradient of sum_i dldr[i] * r_i(theta) w.r.t. the parameters."""
        net = params.network()
        alphas_main = {k: dldr * B for k, B in self.B_main.items()}
        alphas_trace = {k: dldr * B for k, B in self.B_trace.items()}
        if self.problem.variant == NONLINEAR:
            w3 = 3.0 * dldr * fields["value"] ** 2
            for k, B in self.Bv_main.items():
                alphas_main[k] = alphas_main.get(k, 0.0) + w3 * B
            for k, B in self.Bv_trace.items():
                alphas_trace[k] = alphas_trace.get(k, 0.0) + w3 * B
        if psi_split and self.psi_coeff is not None:
            key = ()
            alphas_trace[key] = alphas_trace.get(key, 0.0) - dldr * self.psi_coeff
        ctx_main, ctx_trace = self._contexts(params)
        grad = np.zeros(params.theta.size)
        if alphas_main:
            grad += net.accumulate_ctx(ctx_main, alphas_main)
        if alphas_trace:
            nuniq = len(self.trace_unique)
            folded = {k: np.bincount(self.trace_inverse, weights=a, minlength=nuniq)
                      for k, a in alphas_trace.items()}
            grad += net.accumulate_ctx(ctx_trace, folded)
        return grad
