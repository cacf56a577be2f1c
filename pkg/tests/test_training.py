import numpy as np
import pytest

from slpinn.analysis import PRESETS
from slpinn.domains import DomainSpec, uniform_grid
from slpinn.errors import NonFiniteResidualError, NumericalAbort
from slpinn.nets import NetworkParams, init_params, make_network
from slpinn.reference import make_forcing
from slpinn.residuals import ProblemSpec, ResidualProgram
from slpinn.training import TrainConfig, loss, loss_gradient, train

from conftest import fd_gradient


def tiny_channel(eps=1e-3):
    problem = ProblemSpec(DomainSpec.channel(), "steady", eps, make_forcing("one").fn)
    grid = uniform_grid(problem.domain, 8, 8)
    return problem, problem.ansatz(), grid


def test_unit_forcing_unit_loss():
    problem, spec, grid = tiny_channel()
    params = NetworkParams(2, [5], np.zeros(20))
    for p in (1, 2):
        cfg = TrainConfig(p=p, iterations=1)
        assert loss(problem, spec, params, grid, cfg) == pytest.approx(1.0, abs=1e-14)


def test_psi_split_noop_at_zero_params():
    preset = PRESETS["circle_compatible"]
    problem = preset.problem(1e-3)
    grid = preset.grid(problem, n_eta=8, n_tau=8)
    spec = problem.ansatz()
    params = NetworkParams(2, [5], np.zeros(20))
    base = loss(problem, spec, params, grid, TrainConfig(psi_split=False, iterations=1))
    split = loss(problem, spec, params, grid, TrainConfig(psi_split=True, iterations=1))
    assert split == pytest.approx(base, rel=1e-15)


@pytest.mark.parametrize("preset_name,p,split", [
    ("channel", 2, False), ("channel", 1, False),
    ("circle_compatible", 2, True), ("circle_compatible", 1, True),
    ("ellipse_4_1", 2, True), ("nonlinear", 2, False),
    ("time_circle", 2, True),
])
def test_loss_gradient_matches_fd(rng, preset_name, p, split):
    preset = PRESETS[preset_name]
    problem = preset.problem(1e-4)
    grid = preset.grid(problem, n_eta=6, n_tau=7, n_t=3)
    spec = problem.ansatz()
    dim = 3 if problem.time_dependent else 2
    params = init_params(3, dim, [5])
    params.theta[:] += 0.4 * rng.standard_normal(params.theta.size)
    cfg = TrainConfig(p=p, psi_split=split, iterations=1)
    prog = ResidualProgram(problem, spec, grid)
    g = loss_gradient(problem, spec, params, grid, cfg, program=prog)
    fd = fd_gradient(
        lambda th: loss(problem, spec, NetworkParams(dim, [5], th), grid, cfg,
                        program=prog),
        params.theta, h=1e-4)
    floor = 1e-3 * np.abs(g).max() + 1e-12
    rel = np.max(np.abs(g - fd) / np.maximum(np.abs(fd), floor))
    tol = 1e-5 if p == 2 else 1e-4
    assert rel <= tol, rel


def test_gradient_draws_many(rng):
    """Gradient correctness across parameter draws (p = 2)."""
    preset = PRESETS["circle_compatible"]
    problem = preset.problem(1e-3)
    grid = preset.grid(problem, n_eta=5, n_tau=6)
    spec = problem.ansatz()
    cfg = TrainConfig(p=2, iterations=1)
    prog = ResidualProgram(problem, spec, grid)
    for draw in range(20):
        params = init_params(draw, 2, [4])
        g = loss_gradient(problem, spec, params, grid, cfg, program=prog)
        fd = fd_gradient(
            lambda th: loss(problem, spec, NetworkParams(2, [4], th), grid, cfg,
                            program=prog),
            params.theta, h=1e-4)
        floor = 1e-3 * np.abs(g).max() + 1e-12
        assert np.max(np.abs(g - fd) / np.maximum(np.abs(fd), floor)) <= 1e-5


def test_p1_subgradient_zero_at_tiny_residual():
    problem, spec, grid = tiny_channel()
    # forcing chosen so squashing residuals below tolerance zeroes them out
    params = NetworkParams(2, [4], np.zeros(16))
    cfg = TrainConfig(p=1, iterations=1)
    zero_problem = ProblemSpec(problem.domain, "steady", problem.eps,
                               make_forcing("zero").fn)
    g = loss_gradient(zero_problem, spec, params, grid, cfg)
    assert np.all(g == 0.0)


def test_train_zero_iterations_logs_initial():
    problem, spec, grid = tiny_channel()
    params0 = init_params(0, 2, [4])
    cfg = TrainConfig(iterations=0)
    rep = train(problem, spec, params0, cfg, grid)
    assert rep.history == [(0, pytest.approx(rep.final_loss))]


def test_train_deterministic():
    problem, spec, grid = tiny_channel()
    cfg = TrainConfig(iterations=40, learning_rate=1e-2, log_every=10, seed=7)
    reps = []
    for _ in range(2):
        params0 = init_params(cfg.seed, 2, [6])
        reps.append(train(problem, spec, params0, cfg, grid))
    assert reps[0].history == reps[1].history
    assert np.array_equal(reps[0].params.theta, reps[1].params.theta)


def test_train_loss_decreases():
    problem, spec, grid = tiny_channel()
    params0 = init_params(0, 2, [8])
    cfg = TrainConfig(iterations=300, learning_rate=1e-2, log_every=10)
    rep = train(problem, spec, params0, cfg, grid)
    losses = [l for _, l in rep.history]
    k = max(1, len(losses) // 10)
    assert np.median(losses[-k:]) < np.median(losses[:k])


def test_gd_optimizer_runs():
    problem, spec, grid = tiny_channel()
    params0 = init_params(0, 2, [4])
    cfg = TrainConfig(iterations=50, optimizer="gd", learning_rate=1e-2, log_every=25)
    rep = train(problem, spec, params0, cfg, grid)
    assert rep.final_loss <= rep.history[0][1]


def test_nonfinite_residual_names_point():
    problem, spec, grid = tiny_channel()
    params = NetworkParams(2, [4], np.zeros(16))
    params.theta[-1] = 1.0
    bad = ProblemSpec(problem.domain, "steady", problem.eps,
                      lambda x, y: np.where(np.asarray(x) > 0.9, np.nan, 1.0))
    with pytest.raises(NonFiniteResidualError) as err:
        loss(bad, spec, params, grid, TrainConfig(iterations=1))
    assert err.value.index >= 0
    assert err.value.point is not None


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_numerical_abort_carries_last_good():
    problem, spec, grid = tiny_channel()
    params0 = init_params(0, 2, [4])
    cfg = TrainConfig(iterations=30, learning_rate=1e150, log_every=5)
    with pytest.raises(NumericalAbort) as err:
        train(problem, spec, params0, cfg, grid)
    assert np.all(np.isfinite(err.value.last_good_params.theta))
    assert len(err.value.history) >= 1


def test_psi_split_stable_at_tiny_eps():
    """No non-finite loss with the split enabled at eps = 1e-8."""
    for name in ("circle_compatible", "ellipse_4_1"):
        preset = PRESETS[name]
        problem = preset.problem(1e-8)
        grid = preset.grid(problem, n_eta=20, n_tau=20)
        spec = problem.ansatz()
        params = init_params(1, 2, [6])
        cfg = TrainConfig(psi_split=True, iterations=3, learning_rate=1e-3,
                          log_every=1)
        rep = train(problem, spec, params, cfg, grid)
        assert all(np.isfinite(l) for _, l in rep.history)


def test_report_serialization(tmp_path):
    problem, spec, grid = tiny_channel()
    params0 = init_params(5, 2, [4])
    rep = train(problem, spec, params0, TrainConfig(iterations=10, log_every=5), grid)
    rep.to_json(tmp_path / "report.json")
    rep.history_csv(tmp_path / "history.csv")
    import json
    payload = json.loads((tmp_path / "report.json").read_text())
    assert payload["seed"] == 0
    assert len(payload["theta"]) == params0.theta.size
    lines = (tmp_path / "history.csv").read_text().strip().split("\n")
    assert lines[0] == "iteration,loss"
    assert len(lines) == len(rep.history) + 1


def test_psi_split_requires_defined_split():
    problem, spec, grid = tiny_channel()
    params = init_params(0, 2, [4])
    with pytest.raises(ValueError):
        loss(problem, spec, params, grid, TrainConfig(psi_split=True, iterations=1))
