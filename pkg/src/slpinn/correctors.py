"""Boundary-layer correctors, cut-off and mask functions, ansatz assembly.

The corrector-enriched ansatz for the curved domains is

    v~(eta, tau) = (v^(eta, tau) - v^(0, tau) * phi(eta, tau)) * C(eta, tau)

with phi = exp(k sin(tau) eta / eps) * delta(eta) * 1_{tau in [pi, 2pi]},
k the domain's decay coefficient, delta a C^2 cut-off and C a cubic
boundary mask carrying an extra sin^3 term on the layer half.  Time
problems multiply by (e^t - 1); the channel uses

    u~(x, y) = x(x-1) * ((y-1) u^(x, y) + u^(x, 0) exp(-y/eps)).

Scalar fields are handled as "bundles": dicts of numpy arrays keyed by
derivative component ("v" value, "e"/"ee" eta-partials, "t"/"tt"
tau-partials, "dt" the time partial; the channel uses "x"/"xx"/"y"/"yy").
All assembly is exact product/chain-rule algebra on these components, so
the resulting ansatz derivatives are exact, never finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domains import CHANNEL, lower_half_mask, map_jets
from .errors import NotApplicableError, OutOfDomainError

EXP_FLOOR = -700.0   # exponents below this evaluate to an exact zero

CURVED_KEYS = ("v", "e", "t", "ee", "tt")
CHANNEL_KEYS = ("v", "x", "y", "xx", "yy")


# ---------------------------------------------------------------------------
# cut-off function
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CutoffFn:
    """C^2 cut-off: 1 on [0, R/2], 0 on [3R/4, R], quintic blend between."""

    R: float

    @property
    def plateau_end(self):
        return 0.5 * self.R

    @property
    def support_end(self):
        return 0.75 * self.R


def cutoff_eval(cut, eta):
    """delta, delta', delta'' of the cut-off at eta (vectorized).

    The transition uses the quintic smoothstep 1 - (10u^3 - 15u^4 + 6u^5)
    on the rescaled interval, which keeps delta'' continuous.
    """
    eta = np.asarray(eta, dtype=float)
    if np.any(eta < 0) or np.any(eta > cut.R + 1e-15):
        raise OutOfDomainError("cut-off evaluated outside [0, R]")
    width = cut.support_end - cut.plateau_end
    u = np.clip((eta - cut.plateau_end) / width, 0.0, 1.0)
    d0 = 1.0 - u**3 * (10.0 - 15.0 * u + 6.0 * u * u)
    d1 = -(30.0 * u**2 - 60.0 * u**3 + 30.0 * u**4) / width
    d2 = -(60.0 * u - 180.0 * u**2 + 120.0 * u**3) / width**2
    return d0, d1, d2


# ---------------------------------------------------------------------------
# corrector exponential and boundary mask
# ---------------------------------------------------------------------------

def guarded_exp(z):
    """exp with hard underflow to an exact zero below EXP_FLOOR.

    Avoids 0*inf artifacts when the exponential multiplies 1/eps factors;
    mathematically those products vanish with the exponential.
    """
    z = np.asarray(z, dtype=float)
    small = z < EXP_FLOOR
    return np.where(small, 0.0, np.exp(np.where(small, 0.0, z)))


def layer_exponential(domain, eps, eta, tau):
    """exp(k sin(tau) eta / eps) restricted to the layer half.

    The mask enters before exponentiation: on the inflow half the exponent
    is positive and huge, and exp(...)*0 would produce nan, not 0.
    """
    eta = np.asarray(eta, dtype=float)
    tau = np.asarray(tau, dtype=float)
    k = domain.decay_coefficient
    z = k * np.sin(tau) * eta / eps
    mask = lower_half_mask(domain, tau)
    return guarded_exp(np.where(mask, z, -np.inf))


def corrector_factor(domain, eps, eta, tau):
    """Bundle of phi = exp(k s eta / eps) * delta(eta) * chi_[pi,2pi](tau).

    Returns value and eta/tau partials through second order.  Identically
    zero on the inflow half (the characteristic-function mask).
    """
    if domain.kind == CHANNEL:
        raise NotApplicableError("channel corrector is exp(-y/eps); see channel_layer")
    eta = np.asarray(eta, dtype=float)
    tau = np.asarray(tau, dtype=float)
    k = domain.decay_coefficient
    s, c = np.sin(tau), np.cos(tau)
    E = layer_exponential(domain, eps, eta, tau)
    d0, d1, d2 = cutoff_eval(CutoffFn(domain.layer_limit), eta)
    ke, kt = k * s / eps, k * eta * c / eps
    return {
        "v": E * d0,
        "e": E * (ke * d0 + d1),
        "ee": E * (ke * ke * d0 + 2.0 * ke * d1 + d2),
        "t": E * kt * d0,
        "tt": E * (kt * kt - k * eta * s / eps) * d0,
    }


def channel_layer(eps, y):
    """Bundle (in x/y components) of the channel corrector exp(-y/eps).

    The second derivative chains through the first so the corrector ODE
    -eps f'' - f' = 0 cancels at ulp level when the operator is applied.
    """
    y = np.asarray(y, dtype=float)
    E = guarded_exp(-y / eps)
    zero = np.zeros_like(E)
    Ey = -E / eps
    return {"v": E, "x": zero, "xx": zero, "y": Ey, "yy": -Ey / eps}


def regularizer_C(domain, eta, tau):
    """Cubic boundary mask C and its partials (C, C_e, C_ee, C_t, C_tt).

    On the inflow half C = 1 - rho^3 with rho the scaled distance from the
    degenerate center; on the layer half an extra (rho sin tau)^3 is
    subtracted.  rho = 1 - eta on the circle, (R - eta)/R on ellipses.
    """
    if domain.kind == CHANNEL:
        raise NotApplicableError("the channel uses x(x-1)/(y-1) masks instead")
    eta = np.asarray(eta, dtype=float)
    tau = np.asarray(tau, dtype=float)
    lim = domain.layer_limit
    rho = (lim - eta) / lim
    drho = -1.0 / lim
    s, c = np.sin(tau), np.cos(tau)
    low = lower_half_mask(domain, tau).astype(float)
    s3 = low * s**3
    C = 1.0 - rho**3 * (1.0 + s3)
    C_e = -3.0 * rho**2 * drho * (1.0 + s3)
    C_ee = -6.0 * rho * drho * drho * (1.0 + s3)
    C_t = -3.0 * rho**3 * low * s * s * c
    C_tt = -3.0 * rho**3 * low * (2.0 * s * c * c - s**3)
    return C, C_e, C_ee, C_t, C_tt


def regularizer_bundle(domain, eta, tau):
    C, C_e, C_ee, C_t, C_tt = regularizer_C(domain, eta, tau)
    return {"v": C, "e": C_e, "ee": C_ee, "t": C_t, "tt": C_tt}


# ---------------------------------------------------------------------------
# bundle algebra
# ---------------------------------------------------------------------------

_AXES = {"e": "ee", "t": "tt", "x": "xx", "y": "yy"}


def bundle_product(f, g):
    """Exact product rule on derivative bundles (no mixed second partials)."""
    out = {"v": f["v"] * g["v"]}
    for a, aa in _AXES.items():
        if a in f:
            out[a] = f[a] * g["v"] + f["v"] * g[a]
            out[aa] = f[aa] * g["v"] + 2.0 * f[a] * g[a] + f["v"] * g[aa]
    if "dt" in f:
        out["dt"] = f["dt"] * g["v"] + f["v"] * g.get("dt", np.zeros_like(f["dt"]))
    return out


def bundle_linear(f, g, cf=1.0, cg=-1.0):
    return {k: cf * f[k] + cg * g[k] for k in f}


# ---------------------------------------------------------------------------
# network pullback
# ---------------------------------------------------------------------------

def pullback_vhat(U, jets, time=False):
    """Compose Cartesian network derivatives with the coordinate map.

    U maps index tuples (x=0, y=1, t=2) to arrays; the result is a curved
    bundle v^ with exact eta/tau partials via the chain rule.
    """
    ux, uy = U[(0,)], U[(1,)]
    uxx, uxy, uyy = U[(0, 0)], U[(0, 1)], U[(1, 1)]
    out = {
        "v": U[()],
        "e": ux * jets["x_e"] + uy * jets["y_e"],
        "t": ux * jets["x_t"] + uy * jets["y_t"],
        "ee": (uxx * jets["x_e"] ** 2 + 2.0 * uxy * jets["x_e"] * jets["y_e"]
               + uyy * jets["y_e"] ** 2 + ux * jets["x_ee"] + uy * jets["y_ee"]),
        "tt": (uxx * jets["x_t"] ** 2 + 2.0 * uxy * jets["x_t"] * jets["y_t"]
               + uyy * jets["y_t"] ** 2 + ux * jets["x_tt"] + uy * jets["y_tt"]),
    }
    if time:
        out["dt"] = U[(2,)]
    return out


def pullback_trace(W, jets0, time=False):
    """Boundary-trace bundle w(tau) = v^(0, tau); eta-partials are zero."""
    full = pullback_vhat(W, jets0, time=time)
    zero = np.zeros_like(full["v"])
    full["e"] = zero
    full["ee"] = zero
    return full


# ---------------------------------------------------------------------------
# ansatz assembly
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AnsatzSpec:
    """What multiplies the raw network: masks, corrector, time gate."""

    domain: object
    variant: str = "steady"          # "steady" | "time" | "nonlinear"
    use_corrector: bool = True       # False gives the plain hard-constraint baseline

    @property
    def time_dependent(self):
        return self.variant == "time"


def curved_ansatz_bundle(spec, eps, V, W, eta, tau, t=None):
    """Assemble v~ from the network bundle V and trace bundle W.

    V, W are curved bundles (W with vanishing eta-components).  For the
    baseline (use_corrector False) the trace never enters.
    """
    C = regularizer_bundle(spec.domain, eta, tau)
    if spec.use_corrector:
        phi = corrector_factor(spec.domain, eps, eta, tau)
        if spec.time_dependent:
            phi["dt"] = np.zeros_like(phi["v"])
        core = bundle_linear(V, bundle_product(W, phi))
    else:
        core = V
    if spec.time_dependent:
        C["dt"] = np.zeros_like(C["v"])
    out = bundle_product(core, C)
    if spec.time_dependent:
        # multiply by the initial-condition gate (e^t - 1)
        gate = np.exp(t)
        inner = out
        out = {k: (gate - 1.0) * val for k, val in inner.items()}
        out["dt"] = (gate - 1.0) * inner["dt"] + gate * inner["v"]
    return out


def channel_ansatz_bundle(spec, eps, U, Wtr, x, y):
    """Channel ansatz x(x-1)((y-1) u^ + u^(x,0) exp(-y/eps)) as a bundle.

    The baseline replaces the corrector sum by the full mask
    x(x-1) y(1-y) u^.
    """
    zero = np.zeros_like(x)
    one = np.ones_like(x)
    ubnd = {"v": U[()], "x": U[(0,)], "y": U[(1,)],
            "xx": U[(0, 0)], "yy": U[(1, 1)]}
    mask_x = {"v": x * (x - 1.0), "x": 2.0 * x - 1.0, "xx": 2.0 * one,
              "y": zero, "yy": zero}
    if not spec.use_corrector:
        mask_y = {"v": y * (1.0 - y), "y": 1.0 - 2.0 * y, "yy": -2.0 * one,
                  "x": zero, "xx": zero}
        return bundle_product(bundle_product(mask_x, mask_y), ubnd)
    ymask = {"v": y - 1.0, "y": one, "yy": zero, "x": zero, "xx": zero}
    trace = {"v": Wtr[()], "x": Wtr[(0,)], "xx": Wtr[(0, 0)], "y": zero, "yy": zero}
    layer = channel_layer(eps, y)
    core = bundle_linear(bundle_product(ymask, ubnd),
                         bundle_product(trace, layer), 1.0, 1.0)
    return bundle_product(mask_x, core)


def _net_quantities(params, pts, time=False):
    net = params.network()
    keys = [(), (0,), (1,), (0, 0), (0, 1), (1, 1)]
    if time:
        keys.append((2,))
    return net.quantities(params.theta, pts, keys)


def assemble_ansatz(spec, params, eps, point):
    """Evaluate the full ansatz bundle at one computational point.

    `point` is (x, y) for the channel, (eta, tau) for curved domains and
    (t, eta, tau) for time problems.  Returns a derivative bundle dict.
    """
    point = np.asarray(point, dtype=float)
    if spec.domain.kind == CHANNEL:
        x, y = np.atleast_1d(point[0]), np.atleast_1d(point[1])
        U = _net_quantities(params, np.column_stack([x, y]))
        Wtr = _net_quantities(params, np.column_stack([x, np.zeros_like(x)]))
        return channel_ansatz_bundle(spec, eps, U, Wtr, x, y)
    if spec.time_dependent:
        t, eta, tau = (np.atleast_1d(point[i]) for i in range(3))
    else:
        eta, tau = np.atleast_1d(point[0]), np.atleast_1d(point[1])
        t = None
    jets = map_jets(spec.domain, eta, tau)
    jets0 = map_jets(spec.domain, np.zeros_like(eta), tau)
    cart = np.column_stack([jets["x"], jets["y"]])
    cart0 = np.column_stack([jets0["x"], jets0["y"]])
    if spec.time_dependent:
        cart = np.column_stack([cart, t])
        cart0 = np.column_stack([cart0, t])
    U = _net_quantities(params, cart, time=spec.time_dependent)
    V = pullback_vhat(U, jets, time=spec.time_dependent)
    if spec.use_corrector:
        Wq = _net_quantities(params, cart0, time=spec.time_dependent)
        W = pullback_trace(Wq, jets0, time=spec.time_dependent)
    else:
        W = {k: np.zeros_like(V[k]) for k in V}
    return curved_ansatz_bundle(spec, eps, V, W, eta, tau, t=t)
