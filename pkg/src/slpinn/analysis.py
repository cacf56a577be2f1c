"""Error metrics, benchmark problems, eps sweeps and norm-scaling checks.

The benchmark set covers seven steady problems (channel, compatible and
incompatible disk, both ellipse orientations, the oscillatory profile and
the cubic nonlinearity) plus the time-dependent disk.  Each problem has a
designated reference field: a closed form where one exists, otherwise the
asymptotic field u0 + corrector whose O(sqrt(eps)) bias is negligible
against the benchmark tolerances.

`lemma_norm_scaling` measures discrete L^p norms of weighted corrector
derivatives on layer-adapted grids and fits their log-log slope in eps;
the sharp rates are eps^(1/p - s) for s eta-derivatives.
"""

from __future__ import annotations

import csv
import math
import os
import time
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np

from . import reference as ref
from .correctors import guarded_exp
from .domains import CIRCLE, DomainSpec, lower_half_mask, uniform_grid
from .errors import NotApplicableError
from .nets import make_network
from .residuals import ProblemSpec, ResidualProgram
from .training import TrainConfig, train

PROBLEM_NAMES = ("channel", "circle_incompatible", "circle_compatible",
                 "ellipse_4_1", "ellipse_1_4", "oscillation", "nonlinear")
METHODS = ("PINN-L2", "SL-PINN-L2", "SL-PINN-L1")

BASELINE_WIDTHS = [30] * 5   # "five-layer" reference network
SLPINN_NEURONS = 20


# ---------------------------------------------------------------------------
# error metric
# ---------------------------------------------------------------------------

def relative_l2_error(predicted, reference):
    """||pred - ref||_2 / ||ref||_2 over the sample points (unweighted)."""
    predicted = np.asarray(predicted, dtype=float)
    reference = np.asarray(reference, dtype=float)
    denom = np.sqrt(np.sum(reference**2))
    if denom == 0.0:
        raise ValueError("reference field is identically zero")
    return float(np.sqrt(np.sum((predicted - reference) ** 2)) / denom)


# ---------------------------------------------------------------------------
# benchmark problems
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProblemPreset:
    name: str
    domain_kind: str
    variant: str
    forcing_name: str
    A: float = 0.0
    B: float = 0.0
    T: float = 1.0

    def domain(self):
        if self.domain_kind == "channel":
            return DomainSpec.channel()
        if self.domain_kind == "circle":
            return DomainSpec.circle()
        return DomainSpec.ellipse(self.A, self.B)

    def problem(self, eps):
        dom = self.domain()
        forcing = ref.make_forcing(self.forcing_name, domain=dom, eps=eps)
        return ProblemSpec(dom, self.variant, eps, forcing.fn, T=self.T, name=self.name)

    def grid(self, problem, n_eta=50, n_tau=50, n_t=50):
        if self.variant == "time":
            return uniform_grid(problem.domain, n_eta, n_tau, n_t=n_t, T=self.T)
        return uniform_grid(problem.domain, n_eta, n_tau)

    def reference_values(self, problem, grid):
        """Designated reference field sampled on the grid."""
        eps = problem.eps
        xy = grid.cartesian()
        if self.name == "channel":
            return ref.channel_exact(eps, xy[:, 0], xy[:, 1])
        if self.name == "oscillation":
            return ref.oscillation_exact(eps, xy[:, 0], xy[:, 1])
        if self.name == "nonlinear":
            return ref.incompatible_disk_reference(eps, xy[:, 0], xy[:, 1])
        if self.name == "time_circle":
            return ref.time_circle_exact(eps, grid.times, xy[:, 0], xy[:, 1])
        return ref.asymptotic_reference(problem, grid.points)


PRESETS = {
    "channel": ProblemPreset("channel", "channel", "steady", "sin2pix"),
    "circle_compatible": ProblemPreset("circle_compatible", "circle", "steady",
                                       "compatible_quartic"),
    "circle_incompatible": ProblemPreset("circle_incompatible", "circle", "steady", "one"),
    "ellipse_4_1": ProblemPreset("ellipse_4_1", "ellipse", "steady", "ellipse_quartic",
                                 A=4.0, B=1.0),
    "ellipse_1_4": ProblemPreset("ellipse_1_4", "ellipse", "steady", "ellipse_quartic",
                                 A=1.0, B=4.0),
    "oscillation": ProblemPreset("oscillation", "circle", "steady", "oscillation"),
    "nonlinear": ProblemPreset("nonlinear", "circle", "nonlinear", "nonlinear_bump"),
    "time_circle": ProblemPreset("time_circle", "circle", "time", "time_polynomial"),
}


def method_setup(method, problem):
    """(ansatz spec, norm exponent, layer widths) for a benchmark method."""
    if method == "PINN-L2":
        return problem.ansatz(use_corrector=False), 2, list(BASELINE_WIDTHS)
    if method == "SL-PINN-L2":
        return problem.ansatz(use_corrector=True), 2, [SLPINN_NEURONS]
    if method == "SL-PINN-L1":
        return problem.ansatz(use_corrector=True), 1, [SLPINN_NEURONS]
    raise ValueError(f"unknown method {method!r}")


def input_scales(problem):
    """Half-ranges of the network inputs (x, y[, t]); initialization divides
    the first-layer weights by these so elongated domains start active."""
    dom = problem.domain
    if dom.is_ellipse:
        scales = [dom.A, dom.B]
    else:
        scales = [1.0, 1.0]
    if problem.time_dependent:
        scales.append(max(problem.T, 1.0))
    return scales


# ---------------------------------------------------------------------------
# single runs and eps sweeps
# ---------------------------------------------------------------------------

@dataclass
class ErrorRow:
    problem: str
    epsilon: float
    method: str
    rel_l2: float
    runtime_s: float
    seed: int
    error: str = ""


@dataclass
class ErrorReport:
    rows: list = field(default_factory=list)

    def sorted_rows(self):
        order = {n: i for i, n in enumerate(PROBLEM_NAMES + ("time_circle",))}
        return sorted(self.rows, key=lambda r: (order.get(r.problem, 99),
                                                -math.log10(r.epsilon), r.method))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["problem", "epsilon", "method", "rel_l2", "runtime_s", "seed"])
            for r in self.sorted_rows():
                writer.writerow([r.problem, f"{r.epsilon:.0e}", r.method,
                                 "nan" if not np.isfinite(r.rel_l2) else f"{r.rel_l2:.6e}",
                                 f"{r.runtime_s:.2f}", r.seed])

    def lookup(self, problem, epsilon, method):
        for r in self.rows:
            if (r.problem == problem and r.method == method
                    and np.isclose(r.epsilon, epsilon, rtol=1e-9)):
                return r
        return None


def run_benchmark(preset_name, eps, method, cfg=None, grid_sizes=None):
    """Train one (problem, eps, method) cell and measure the relative error."""
    preset = PRESETS[preset_name]
    problem = preset.problem(eps)
    sizes = dict(n_eta=50, n_tau=50, n_t=50)
    sizes.update(grid_sizes or {})
    grid = preset.grid(problem, **sizes)
    spec, p, widths = method_setup(method, problem)
    cfg = cfg or TrainConfig()
    cfg = TrainConfig(**{**cfg.__dict__, "p": p})
    dim = 3 if problem.time_dependent else 2
    net = make_network(dim, widths)
    params0 = net.init_params(cfg.seed, input_scales(problem))
    start = time.perf_counter()
    program = ResidualProgram(problem, spec, grid)
    report = train(problem, spec, params0, cfg, grid, program=program)
    runtime = time.perf_counter() - start
    predicted = program.values(report.params)
    reference = preset.reference_values(problem, grid)
    err = relative_l2_error(predicted, reference)
    row = ErrorRow(preset_name, eps, method, err, runtime, cfg.seed)
    return row, report, program, reference


def epsilon_sweep(problems, eps_list, methods, cfg=None, grid_sizes=None,
                  max_workers=None):
    """Train every (problem, eps, method) cell; failures become marked rows."""
    tasks = [(p, e, m) for p in problems for e in eps_list for m in methods]
    report = ErrorReport()

    def one(task):
        p, e, m = task
        try:
            row, _, _, _ = run_benchmark(p, e, m, cfg=cfg, grid_sizes=grid_sizes)
            return row
        except Exception as exc:  # recorded, not raised: sweeps must finish
            return ErrorRow(p, e, m, float("nan"), 0.0,
                            (cfg.seed if cfg else 0), error=str(exc))

    workers = max_workers or int(os.environ.get("SLPINN_THREADS", "1"))
    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=workers) as pool:
            report.rows = list(pool.map(one, tasks))
    else:
        report.rows = [one(t) for t in tasks]
    return report


def render_error_table(report, eps_list=(1e-4, 1e-6, 1e-8)):
    """Three text sub-tables (one per method), problems across the top."""
    lines = []
    headers = {"PINN-L2": "Relative L2 error, L2 training (PINN)",
               "SL-PINN-L2": "Relative L2 error, L2 training (SL-PINN)",
               "SL-PINN-L1": "Relative L2 error, L1 training (SL-PINN)"}
    width = 22
    for method in METHODS:
        lines.append(headers[method])
        lines.append("-" * (12 + width * len(PROBLEM_NAMES)))
        lines.append("eps".ljust(12) + "".join(p.ljust(width) for p in PROBLEM_NAMES))
        for eps in eps_list:
            cells = []
            for p in PROBLEM_NAMES:
                row = report.lookup(p, eps, method)
                if row is None:
                    cells.append("-".ljust(width))
                elif row.error:
                    cells.append("failed".ljust(width))
                else:
                    cells.append(f"{row.rel_l2:.2e}".ljust(width))
            lines.append(f"{eps:.0e}".ljust(12) + "".join(cells))
        lines.append("")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# corrector norm scalings
# ---------------------------------------------------------------------------

def _layer_adapted_eta(limit, eps, points_per_cell=8, floor_ratio=0.1, max_cells=400):
    """Geometrically refined eta quadrature: cells halve toward eta = 0
    until the first cell is below eps * floor_ratio; Gauss-Legendre nodes
    within each cell."""
    edges = [limit]
    while edges[-1] > eps * floor_ratio and len(edges) < max_cells:
        edges.append(edges[-1] / 2.0)
    if edges[-1] > eps * floor_ratio:
        raise ValueError("layer too thin for the subdivision cap; raise max_cells")
    edges.append(0.0)
    edges = np.array(edges[::-1])
    gx, gw = np.polynomial.legendre.leggauss(points_per_cell)
    nodes, weights = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        half = 0.5 * (b - a)
        nodes.append(a + half * (gx + 1.0))
        weights.append(half * gw)
    return np.concatenate(nodes), np.concatenate(weights)


@lru_cache(maxsize=None)
def _lemma_integrand(l, n, s, m, decay, amp_key):
    """sympy-built integrand |(sin t)^-l (eta/eps)^n d^{s+m} phi| lambdified."""
    import sympy as sp

    eta, tau, eps = sp.symbols("eta tau epsilon", positive=True)
    amp = {"quintic_sine": 2 * sp.sin(tau) ** 5}[amp_key]
    phi = amp * sp.exp(decay * sp.sin(tau) * eta / eps)
    expr = sp.sin(tau) ** (-l) * (eta / eps) ** n * sp.diff(phi, eta, s, tau, m)
    return sp.lambdify((eta, tau, eps), expr,
                       modules=[{"exp": guarded_exp}, "numpy"])


def lemma_norm_scaling(domain, eps_list, l=0, n=0, s=0, m=1, p_norm=2,
                       n_tau=800, points_per_cell=8):
    """Fit the log-log slope of the weighted corrector-derivative norm.

    Computes | (sin tau)^-l (eta/eps)^n  d^{s+m} phi / d eta^s d tau^m |
    in L^p over the layer half on layer-adapted grids, one value per eps,
    and least-squares fits log(norm) against log(eps).  The trace
    amplitude is the one induced by the compatible quartic forcing.
    """
    eps_list = sorted(float(e) for e in eps_list)
    if len(eps_list) < 3 or eps_list[-1] / eps_list[0] < 0.999e3:
        raise ValueError("need >= 3 eps values spanning >= 3 decades")
    if s + m > 2:
        raise ValueError("derivatives beyond second order are not produced")
    fn = _lemma_integrand(l, n, s, m, domain.decay_coefficient, "quintic_sine")
    tau = np.pi + (np.arange(n_tau) + 0.5) * (np.pi / n_tau)
    wt = np.pi / n_tau
    norms = []
    for eps in eps_list:
        eta, we = _layer_adapted_eta(domain.layer_limit, eps,
                                     points_per_cell=points_per_cell)
        vals = np.abs(fn(eta[:, None], tau[None, :], eps)) ** p_norm
        total = float(np.sum(vals * we[:, None]) * wt)
        norms.append(total ** (1.0 / p_norm))
    norms = np.array(norms)
    if np.all(norms == 0.0):
        return {"slope": None, "norms": dict(zip(eps_list, norms)), "residual": 0.0}
    logs = np.log(norms)
    le = np.log(np.array(eps_list))
    slope, intercept = np.polyfit(le, logs, 1)
    fitres = float(np.sqrt(np.mean((slope * le + intercept - logs) ** 2)))
    return {"slope": float(slope), "norms": dict(zip(eps_list, norms)),
            "residual": fitres}


def _layer_adapted_tau(eps, points_per_cell=8, floor_ratio=0.1, max_cells=400):
    """Tangential quadrature refined toward the characteristic angles
    tau = pi and tau = 2*pi, where sin(tau) degenerates."""
    half, w_half = _layer_adapted_eta(0.5 * np.pi, eps,
                                      points_per_cell=points_per_cell,
                                      floor_ratio=floor_ratio, max_cells=max_cells)
    # distances from pi (ascending) and from 2*pi (descending), same weights
    tau = np.concatenate([np.pi + half, 2.0 * np.pi - half])
    w = np.concatenate([w_half, w_half])
    return tau, w


def scaled_exponential_l1_mass(domain, eps_list, coefficient=None):
    """Layer-adapted integral of (1/eps) exp(k sin(tau) eta / eps) over the
    layer half, one value per eps.

    Both directions are refined on the eps scale: eta toward the wall and
    tau toward the characteristic angles, so the logarithmic growth of the
    exact integral is resolved rather than truncated.
    """
    if domain.kind == "channel":
        raise NotApplicableError("the mass bound concerns curved layers")
    k = coefficient if coefficient is not None else domain.decay_coefficient
    out = {}
    for eps in eps_list:
        eta, we = _layer_adapted_eta(domain.layer_limit, eps)
        tau, wt = _layer_adapted_tau(eps)
        vals = guarded_exp(k * np.sin(tau)[None, :] * eta[:, None] / eps) / eps
        out[float(eps)] = float(np.sum((vals * we[:, None]) @ wt))
    return out
