"""Residual-norm losses and the full-grid optimization loop.

The trained objective is ((1/N) sum_i |r_i|^p)^(1/p) with p = 1 or 2 over
a fixed collocation grid.  On layer-half points of the curved domains the
optional "psi split" replaces r_i by r_i - psi_i, removing the O(1/eps)
dominant term so the objective stays bounded as eps -> 0.

Optimization is plain full-batch Adam (or gradient descent), seeded and
deterministic; there is no resampling, batching or schedule.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, asdict
from typing import Optional

import numpy as np

from .errors import NonFiniteResidualError, NumericalAbort
from .nets import NetworkParams
from .residuals import ResidualProgram

SUBGRADIENT_TOL = 1e-12


@dataclass
class TrainConfig:
    p: int = 2
    learning_rate: float = 1e-3
    iterations: int = 20000
    optimizer: str = "adam"          # "adam" | "gd"
    beta1: float = 0.9
    beta2: float = 0.999
    eps_opt: float = 1e-8
    seed: int = 0
    psi_split: Optional[bool] = None  # None: on wherever the split is defined
    log_every: int = 100

    def __post_init__(self):
        if self.p not in (1, 2):
            raise ValueError("p must be 1 or 2")
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if self.optimizer not in ("adam", "gd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


@dataclass
class TrainReport:
    params: NetworkParams
    history: list                    # (iteration, loss)
    wall_time: float
    seed: int

    @property
    def final_loss(self):
        return self.history[-1][1]

    def to_json(self, path):
        payload = {
            "seed": self.seed,
            "wall_time": self.wall_time,
            "history": [[int(i), float(l)] for i, l in self.history],
            "input_dim": self.params.input_dim,
            "layer_widths": list(self.params.layer_widths),
            "theta": self.params.theta.tolist(),
        }
        with open(path, "w") as fh:
            json.dump(payload, fh)

    def history_csv(self, path):
        with open(path, "w") as fh:
            fh.write("iteration,loss\n")
            for i, l in self.history:
                fh.write(f"{int(i)},{l:.17g}\n")


def _split_active(program, cfg):
    if cfg.psi_split is None:
        return program.psi_coeff is not None and program.problem.variant != "nonlinear"
    if cfg.psi_split and program.psi_coeff is None:
        raise ValueError("psi split requested but no dominant term is defined here")
    return cfg.psi_split


def _training_residual(program, fields, split):
    r = fields["residual"]
    if split:
        r = r - fields["psi"]
    bad = ~np.isfinite(r)
    if np.any(bad):
        i = int(np.nonzero(bad)[0][0])
        raise NonFiniteResidualError(i, program.grid.points[i])
    return r


def _pnorm(r, p):
    if p == 2:
        return float(np.sqrt(np.mean(r * r)))
    return float(np.mean(np.abs(r)))


def _dloss_dr(r, p, value):
    n = r.size
    if p == 2:
        if value == 0.0:
            return np.zeros_like(r)
        return r / (n * value)
    g = np.sign(r) / n
    g[np.abs(r) < SUBGRADIENT_TOL] = 0.0
    return g


def loss(problem, spec, params, grid, cfg, program=None):
    """((1/N) sum |r_i|^p)^(1/p), optionally with the dominant-term split."""
    program = program or ResidualProgram(problem, spec, grid)
    fields = program.fields(params)
    r = _training_residual(program, fields, _split_active(program, cfg))
    return _pnorm(r, cfg.p)


def loss_gradient(problem, spec, params, grid, cfg, program=None):
    """Exact gradient of `loss` w.r.t. the flat parameter vector."""
    program = program or ResidualProgram(problem, spec, grid)
    fields = program.fields(params)
    split = _split_active(program, cfg)
    r = _training_residual(program, fields, split)
    dldr = _dloss_dr(r, cfg.p, _pnorm(r, cfg.p))
    return program.backprop(params, fields, dldr, psi_split=split)


def train(problem, spec, params0, cfg, grid, program=None):
    """Run the configured optimizer over the full grid; deterministic.

    A non-finite loss aborts with the last finite iterate attached to the
    raised NumericalAbort.
    """
    program = program or ResidualProgram(problem, spec, grid)
    split = _split_active(program, cfg)
    theta = params0.theta.copy()
    arch = (params0.input_dim, list(params0.layer_widths))
    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    history = []
    start = time.perf_counter()
    last_good = theta.copy()

    def as_params(vec):
        return NetworkParams(arch[0], arch[1], vec)

    def evaluate(vec, it):
        try:
            fields = program.fields(as_params(vec))
            r = _training_residual(program, fields, split)
        except NonFiniteResidualError as exc:
            raise NumericalAbort(f"non-finite residual at iteration {it}: {exc}",
                                 as_params(last_good), history) from exc
        return fields, r

    fields, r = evaluate(theta, 0)
    lval = _pnorm(r, cfg.p)
    history.append((0, lval))
    if not np.isfinite(lval):
        raise NumericalAbort("non-finite initial loss", as_params(last_good), history)
    for it in range(1, cfg.iterations + 1):
        dldr = _dloss_dr(r, cfg.p, lval)
        grad = program.backprop(as_params(theta), fields, dldr, psi_split=split)
        if cfg.optimizer == "adam":
            m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad
            v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad * grad
            mhat = m / (1.0 - cfg.beta1**it)
            vhat = v / (1.0 - cfg.beta2**it)
            theta = theta - cfg.learning_rate * mhat / (np.sqrt(vhat) + cfg.eps_opt)
        else:
            theta = theta - cfg.learning_rate * grad
        if not np.all(np.isfinite(theta)):
            raise NumericalAbort(f"non-finite parameters at iteration {it}",
                                 as_params(last_good), history)
        fields, r = evaluate(theta, it)
        lval = _pnorm(r, cfg.p)
        if not np.isfinite(lval):
            history.append((it, lval))
            raise NumericalAbort(f"non-finite loss at iteration {it}",
                                 as_params(last_good), history)
        last_good = theta.copy()
        if it % cfg.log_every == 0 or it == cfg.iterations:
            history.append((it, lval))
    wall = time.perf_counter() - start
    return TrainReport(as_params(theta), history, wall, cfg.seed)
