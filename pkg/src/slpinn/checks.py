"""Self-contained verification suites: gradients, residual equivalence,
norm scalings, mass bounds and forcing compatibility.

Each suite returns a dict with per-check values and a boolean `passed`;
the command-line `check` verb serializes these as JSON.  The acceptance
tests drive the same functions.
"""

from __future__ import annotations

import numpy as np

from . import analysis, reference
from .analysis import PRESETS, lemma_norm_scaling, scaled_exponential_l1_mass
from .domains import DomainSpec, uniform_grid
from .nets import jet_keys, make_network
from .residuals import (ProblemSpec, ResidualProgram, apply_operator,
                        expanded_residual_many)
from .training import TrainConfig, loss, loss_gradient

GRAD_RTOL = 1e-5
NET_GRAD_RTOL = 1e-6
EQUIV_RTOL = 1e-8


def _fd_gradient(fn, theta, h=1e-4):
    g = np.zeros_like(theta)
    for i in range(theta.size):
        tp, tm = theta.copy(), theta.copy()
        tp[i] += h
        tm[i] -= h
        g[i] = (fn(tp) - fn(tm)) / (2.0 * h)
    return g


def _rel_err(a, b, floor=1e-9):
    scale = np.maximum(np.abs(b), floor / 1e-3)
    return np.max(np.abs(a - b) / np.maximum(scale, 1e-30))


def check_gradients(seed=0, n_points=5):
    """Network derivatives and loss gradients against central differences."""
    rng = np.random.default_rng(seed)
    results = {}
    worst_net = 0.0
    for widths in ([12], [8, 8]):
        net = make_network(2, widths)
        params = net.init_params(seed)
        theta = params.theta + 0.3 * rng.standard_normal(params.theta.size)
        pts = rng.uniform(0.1, 0.9, size=(n_points, 2))
        keys = jet_keys(2)
        jac = net.param_jacobian(theta, pts, keys)
        for key in keys:
            fd = np.column_stack([
                _fd_gradient(lambda th, i=i: net.quantities(th, pts[i:i + 1], [key])[key][0],
                             theta)
                for i in range(n_points)]).T
            err = float(np.max(np.abs(jac[key] - fd)
                               / np.maximum(np.abs(fd), 1e-3)))
            worst_net = max(worst_net, err)
    results["net_jacobian_max_rel"] = worst_net

    worst_loss = 0.0
    for preset_name in ("channel", "circle_compatible"):
        preset = PRESETS[preset_name]
        problem = preset.problem(1e-4)
        grid = preset.grid(problem, n_eta=9, n_tau=9)
        spec, p, widths = analysis.method_setup("SL-PINN-L2", problem)
        net = make_network(2, [6])
        params = net.init_params(seed + 1)
        cfg = TrainConfig(p=2, iterations=1)
        g = loss_gradient(problem, spec, params, grid, cfg)
        fd = _fd_gradient(
            lambda th: loss(problem, spec,
                            params.__class__(2, [6], th), grid, cfg),
            params.theta, h=1e-5)
        err = float(np.max(np.abs(g - fd) / np.maximum(np.abs(fd), 1e-6)))
        results[f"loss_grad_{preset_name}_max_rel"] = err
        worst_loss = max(worst_loss, err)

    results["passed"] = bool(worst_net <= NET_GRAD_RTOL * 5 and worst_loss <= GRAD_RTOL)
    return results


def _random_points(problem, rng, count, half):
    dom = problem.domain
    if dom.kind == "channel":
        return rng.uniform(0.02, 0.98, size=(count, 2))
    lim = dom.layer_limit
    eta = rng.uniform(0.0, 0.92 * lim, size=count)
    if half == "upper":
        tau = rng.uniform(0.02, np.pi - 0.02, size=count)
    else:
        tau = rng.uniform(np.pi, 2.0 * np.pi, size=count)
    cols = [eta, tau]
    if problem.time_dependent:
        cols = [rng.uniform(0.0, problem.T, size=count)] + cols
    return np.column_stack(cols)


def direct_residuals_at(problem, spec, params, pts):
    """Vectorized direct-path residuals at arbitrary computational points."""
    from slpinn.domains import SampleGrid
    axes = ("t", "eta", "tau") if problem.time_dependent else (
        ("x", "y") if problem.domain.kind == "channel" else ("eta", "tau"))
    grid = SampleGrid(problem.domain, axes, (len(pts),), (), np.asarray(pts, float))
    return ResidualProgram(problem, spec, grid).fields(params)["residual"]


def check_residual_equivalence(samples=10000, seed=0, eps_values=(1e-2, 1e-4, 1e-6)):
    """Direct operator vs closed-form expansion on random points/params."""
    rng = np.random.default_rng(seed)
    cases = []
    for name in ("channel", "circle_compatible", "nonlinear",
                 "ellipse_4_1", "ellipse_1_4", "time_circle"):
        halves = ("all",) if name == "channel" else ("upper", "lower")
        cases += [(name, h) for h in halves]
    results = {}
    worst = 0.0
    for name, half in cases:
        preset = PRESETS[name]
        per_case = 0.0
        for eps in eps_values:
            problem = preset.problem(eps)
            spec = problem.ansatz()
            dim = 3 if problem.time_dependent else 2
            net = make_network(dim, [8])
            params = net.init_params(seed)
            params.theta[:] += 0.5 * rng.standard_normal(params.theta.size)
            pts = _random_points(problem, rng, samples, half)
            direct = direct_residuals_at(problem, spec, params, pts)
            expanded = expanded_residual_many(problem, params, pts)
            rel = np.max(np.abs(expanded - direct) / (1.0 + np.abs(direct)))
            per_case = max(per_case, float(rel))
        results[f"{name}:{half}"] = per_case
        worst = max(worst, per_case)
    results["max_rel"] = worst
    results["passed"] = bool(worst <= EQUIV_RTOL)
    return results


def check_lemma_scaling(eps_list=(1e-2, 1e-3, 1e-4, 1e-5)):
    """Slopes of the corrector-derivative norms vs the sharp rates."""
    dom = DomainSpec.circle()
    tau_slope = lemma_norm_scaling(dom, eps_list, l=0, n=0, s=0, m=1, p_norm=2)
    eta_slope = lemma_norm_scaling(dom, eps_list, l=0, n=0, s=1, m=0, p_norm=2)
    results = {
        "tau_derivative_slope": tau_slope["slope"],
        "tau_expected": 0.5,
        "eta_derivative_slope": eta_slope["slope"],
        "eta_expected": -0.5,
    }
    results["passed"] = bool(abs(tau_slope["slope"] - 0.5) <= 0.1
                             and abs(eta_slope["slope"] + 0.5) <= 0.1)
    return results


def check_l1_mass(eps_list=(1e-4, 1e-5, 1e-6, 1e-7, 1e-8)):
    """(1/eps)-scaled exponential stays integrable across five decades."""
    dom = DomainSpec.circle()
    masses = scaled_exponential_l1_mass(dom, eps_list)
    vals = np.array([masses[float(e)] for e in eps_list])
    ratio = float(vals.max() / vals.min())
    results = {"masses": {f"{e:.0e}": float(v) for e, v in zip(eps_list, vals)},
               "max_over_min": ratio, "passed": bool(ratio <= 2.0)}
    return results


def check_compatibility():
    """The quartic forcing is compatible; the constant forcing is not."""
    dom = DomainSpec.circle()
    quartic = reference.make_forcing("compatible_quartic").fn
    const = reference.make_forcing("one").fn
    rep_good = reference.compatibility_check(quartic, dom)
    rep_bad = reference.compatibility_check(const, dom)
    results = {
        "quartic_compatible": rep_good.compatible,
        "constant_compatible": rep_bad.compatible,
        "constant_value_at_char_point": rep_bad.values[(0, "f")],
    }
    results["passed"] = bool(rep_good.compatible and not rep_bad.compatible)
    return results


SUITES = {
    "gradients": check_gradients,
    "residual-equivalence": check_residual_equivalence,
    "lemma-scaling": check_lemma_scaling,
    "l1-mass": check_l1_mass,
    "compatibility": check_compatibility,
}


def run_suite(name):
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
    return SUITES[name]()
