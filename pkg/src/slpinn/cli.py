"""Config-driven experiment runner.

Verbs:
    slpinn run <cfg> [--dry-run]     train one experiment, export artifacts
    slpinn sweep <cfg>               eps sweep over problems x methods
    slpinn table1 [--out DIR]        the full benchmark matrix (7 x 3 x 3)
    slpinn check <suite>             verification suites, JSON verdicts
    slpinn config dump               print the default configuration

Configs are INI files; every key has an explicit default (see `config
dump`) and unknown sections or keys are rejected.  Exit codes: 0 success,
2 configuration error, 3 numerical abort, 4 failed check.
"""

from __future__ import annotations

import argparse
import configparser
import json
import os
import sys
import tempfile
import time

import numpy as np

from . import analysis, checks, reference
from .analysis import PRESETS, ErrorReport, epsilon_sweep, relative_l2_error, render_error_table
from .domains import DomainSpec, uniform_grid
from .errors import ConfigError, NumericalAbort
from .nets import make_network
from .residuals import ProblemSpec, ResidualProgram
from .training import TrainConfig, train

DEFAULTS = {
    "problem": {
        "preset": "channel",        # named benchmark; blank for a custom problem
        "domain": "circle",         # custom: channel | circle | ellipse
        "variant": "steady",        # custom: steady | time | nonlinear
        "forcing": "one",           # registry name or expr:<formula>
        "epsilon": "1e-6",
        "A": "4.0",
        "B": "1.0",
        "T": "1.0",
        "rhs_convention": "Hf",     # ellipses: train against H*f or plain f
    },
    "method": {
        "kind": "slpinn",           # slpinn | pinn
        "norm": "2",                # 1 | 2
        "psi_split": "auto",        # auto | true | false
    },
    "network": {
        "neurons": "20",            # hidden width of the two-layer network
        "hidden_layers": "5",       # baseline depth
        "hidden_width": "30",       # baseline width
    },
    "training": {
        "learning_rate": "1e-3",
        "iterations": "20000",
        "optimizer": "adam",
        "beta1": "0.9",
        "beta2": "0.999",
        "eps_opt": "1e-8",
        "seed": "0",
        "log_every": "100",
    },
    "grid": {
        "n_eta": "50",
        "n_tau": "50",
        "n_t": "50",
    },
    "sweep": {
        "problems": "channel",
        "epsilons": "1e-4,1e-6,1e-8",
        "methods": "SL-PINN-L2",
    },
    "output": {
        "directory": "runs/latest",
        "export_fine_grid": "false",
    },
}


def _atomic_write(path, payload):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".slpinn-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def default_config():
    cp = configparser.ConfigParser()
    for section, entries in DEFAULTS.items():
        cp[section] = dict(entries)
    return cp


def dump_config(cp):
    lines = []
    for section in cp.sections():
        lines.append(f"[{section}]")
        for key, value in cp[section].items():
            lines.append(f"{key} = {value}")
        lines.append("")
    return "\n".join(lines)


def load_config(path):
    cp = default_config()
    user = configparser.ConfigParser()
    read = user.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path!r}")
    for section in user.sections():
        if section not in DEFAULTS:
            raise ConfigError(f"unknown config section [{section}]")
        for key, value in user[section].items():
            if key not in DEFAULTS[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            cp[section][key] = value
    return cp


def _boolean(text, allow_auto=False):
    t = text.strip().lower()
    if allow_auto and t == "auto":
        return None
    if t in ("true", "1", "yes", "on"):
        return True
    if t in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


class Experiment:
    """Everything needed to run one configured experiment."""

    def __init__(self, cp):
        prob = cp["problem"]
        eps = float(prob["epsilon"])
        preset_name = prob["preset"].strip()
        self.preset = None
        if preset_name:
            if preset_name not in PRESETS:
                raise ConfigError(f"unknown preset {preset_name!r}; "
                                  f"choose from {sorted(PRESETS)}")
            self.preset = PRESETS[preset_name]
            self.problem = self.preset.problem(eps)
        else:
            if not prob["forcing"].strip():
                raise ConfigError("custom problems need a 'forcing' entry")
            kind = prob["domain"].strip()
            if kind == "channel":
                dom = DomainSpec.channel()
            elif kind == "circle":
                dom = DomainSpec.circle()
            elif kind == "ellipse":
                dom = DomainSpec.ellipse(float(prob["A"]), float(prob["B"]))
            else:
                raise ConfigError(f"unknown domain {kind!r}")
            forcing = reference.make_forcing(prob["forcing"].strip(), domain=dom, eps=eps)
            self.problem = ProblemSpec(dom, prob["variant"].strip(), eps, forcing.fn,
                                       rhs_convention=prob["rhs_convention"].strip(),
                                       T=float(prob["T"]), name="custom")

        meth = cp["method"]
        kind = meth["kind"].strip()
        if kind not in ("slpinn", "pinn"):
            raise ConfigError(f"unknown method kind {kind!r}")
        self.use_corrector = kind == "slpinn"
        p = int(meth["norm"])
        net = cp["network"]
        widths = ([int(net["neurons"])] if self.use_corrector
                  else [int(net["hidden_width"])] * int(net["hidden_layers"]))
        self.widths = widths
        tr = cp["training"]
        self.cfg = TrainConfig(
            p=p,
            learning_rate=float(tr["learning_rate"]),
            iterations=int(tr["iterations"]),
            optimizer=tr["optimizer"].strip(),
            beta1=float(tr["beta1"]),
            beta2=float(tr["beta2"]),
            eps_opt=float(tr["eps_opt"]),
            seed=int(tr["seed"]),
            psi_split=_boolean(meth["psi_split"], allow_auto=True),
            log_every=int(tr["log_every"]),
        )
        g = cp["grid"]
        self.grid_sizes = dict(n_eta=int(g["n_eta"]), n_tau=int(g["n_tau"]),
                               n_t=int(g["n_t"]))
        self.out_dir = cp["output"]["directory"]
        self.export_fine = _boolean(cp["output"]["export_fine_grid"])
        self.config_echo = {s: dict(cp[s]) for s in cp.sections()}

    def make_grid(self, n_eta=None, n_tau=None, n_t=None):
        sz = dict(self.grid_sizes)
        if n_eta:
            sz["n_eta"] = n_eta
        if n_tau:
            sz["n_tau"] = n_tau
        if n_t:
            sz["n_t"] = n_t
        problem = self.problem
        if problem.time_dependent:
            return uniform_grid(problem.domain, sz["n_eta"], sz["n_tau"],
                                n_t=sz["n_t"], T=problem.T)
        return uniform_grid(problem.domain, sz["n_eta"], sz["n_tau"])

    def reference_values(self, grid):
        if self.preset is not None:
            return self.preset.reference_values(self.problem, grid)
        if self.problem.variant == "steady":
            return reference.asymptotic_reference(self.problem, grid.points)
        return None


def _write_field_csv(path, grid, predicted, reference_vals):
    xy = grid.cartesian()
    header = list(grid.axes) + ["x", "y", "predicted", "reference", "abs_error"]
    rows = [",".join(header)]
    ref_col = (reference_vals if reference_vals is not None
               else np.full(len(grid), np.nan))
    for i in range(len(grid)):
        comp = [f"{v:.17g}" for v in grid.points[i]]
        extra = [f"{xy[i, 0]:.17g}", f"{xy[i, 1]:.17g}", f"{predicted[i]:.17g}",
                 f"{ref_col[i]:.17g}", f"{abs(predicted[i] - ref_col[i]):.17g}"]
        rows.append(",".join(comp + extra))
    _atomic_write(path, "\n".join(rows) + "\n")


def cmd_run(args):
    cp = load_config(args.config)
    exp = Experiment(cp)
    if args.dry_run:
        print(dump_config(cp), end="")
        return 0
    problem, cfg = exp.problem, exp.cfg
    spec = problem.ansatz(use_corrector=exp.use_corrector)
    grid = exp.make_grid()
    dim = 3 if problem.time_dependent else 2
    params0 = make_network(dim, exp.widths).init_params(
        cfg.seed, analysis.input_scales(problem))
    start = time.perf_counter()
    program = ResidualProgram(problem, spec, grid)
    report = train(problem, spec, params0, cfg, grid, program=program)
    runtime = time.perf_counter() - start
    predicted = program.values(report.params)
    ref_vals = exp.reference_values(grid)
    rel = (relative_l2_error(predicted, ref_vals)
           if ref_vals is not None else float("nan"))
    out = exp.out_dir
    os.makedirs(out, exist_ok=True)
    report.to_json(os.path.join(out, "train_report.json"))
    report.history_csv(os.path.join(out, "loss_history.csv"))
    _write_field_csv(os.path.join(out, "field.csv"), grid, predicted, ref_vals)
    if exp.export_fine and not problem.time_dependent:
        fine = exp.make_grid(n_eta=200, n_tau=200)
        fine_prog = ResidualProgram(problem, spec, fine)
        _write_field_csv(os.path.join(out, "field_fine.csv"), fine,
                         fine_prog.values(report.params),
                         exp.reference_values(fine))
    summary = {
        "rel_l2": rel,
        "runtime_s": runtime,
        "seed": cfg.seed,
        "final_loss": report.final_loss,
        "config": exp.config_echo,
    }
    _atomic_write(os.path.join(out, "summary.json"), json.dumps(summary, indent=2))
    print(f"rel_l2={rel:.6e}  final_loss={report.final_loss:.6e}  "
          f"runtime={runtime:.1f}s  ->  {out}")
    return 0


def cmd_sweep(args):
    cp = load_config(args.config)
    sw = cp["sweep"]
    problems = [p.strip() for p in sw["problems"].split(",") if p.strip()]
    eps_list = [float(e) for e in sw["epsilons"].split(",") if e.strip()]
    methods = [m.strip() for m in sw["methods"].split(",") if m.strip()]
    for p in problems:
        if p not in PRESETS:
            raise ConfigError(f"unknown problem {p!r} in sweep")
    exp = Experiment(cp)
    report = epsilon_sweep(problems, eps_list, methods, cfg=exp.cfg,
                           grid_sizes=exp.grid_sizes)
    out = exp.out_dir
    os.makedirs(out, exist_ok=True)
    report.to_csv(os.path.join(out, "sweep.csv"))
    print(render_error_table(report, eps_list=tuple(eps_list)))
    failures = [r for r in report.rows if r.error]
    for r in failures:
        print(f"failed: {r.problem} eps={r.epsilon:.0e} {r.method}: {r.error}",
              file=sys.stderr)
    return 0


def cmd_table1(args):
    cfg = TrainConfig(iterations=args.iterations, seed=args.seed)
    report = epsilon_sweep(list(analysis.PROBLEM_NAMES), [1e-4, 1e-6, 1e-8],
                           list(analysis.METHODS), cfg=cfg)
    os.makedirs(args.out, exist_ok=True)
    report.to_csv(os.path.join(args.out, "table1.csv"))
    rendering = render_error_table(report)
    _atomic_write(os.path.join(args.out, "table1.txt"), rendering)
    print(rendering)
    return 0


def cmd_check(args):
    result = checks.run_suite(args.suite)
    print(json.dumps(result, indent=2, default=float))
    return 0 if result.get("passed") else 4


def cmd_config(args):
    if args.action != "dump":
        raise ConfigError(f"unknown config action {args.action!r}")
    print(dump_config(default_config()), end="")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="slpinn", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="train one configured experiment")
    run.add_argument("config")
    run.add_argument("--dry-run", action="store_true",
                     help="print the resolved configuration and write nothing")
    run.set_defaults(fn=cmd_run)

    sweep = sub.add_parser("sweep", help="eps sweep over problems and methods")
    sweep.add_argument("config")
    sweep.set_defaults(fn=cmd_sweep)

    table = sub.add_parser("table1", help="run the full benchmark matrix")
    table.add_argument("--out", default="runs/table1")
    table.add_argument("--iterations", type=int, default=20000)
    table.add_argument("--seed", type=int, default=0)
    table.set_defaults(fn=cmd_table1)

    chk = sub.add_parser("check", help="run a verification suite")
    chk.add_argument("suite", choices=sorted(checks.SUITES))
    chk.set_defaults(fn=cmd_check)

    cfgp = sub.add_parser("config", help="configuration utilities")
    cfgp.add_argument("action", choices=["dump"])
    cfgp.set_defaults(fn=cmd_config)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except NumericalAbort as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
