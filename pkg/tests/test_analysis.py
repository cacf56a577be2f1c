import numpy as np
import pytest

from slpinn.analysis import (ErrorReport, ErrorRow, PRESETS, epsilon_sweep,
                             lemma_norm_scaling, relative_l2_error,
                             render_error_table, run_benchmark,
                             scaled_exponential_l1_mass)
from slpinn.correctors import guarded_exp
from slpinn.domains import DomainSpec
from slpinn.training import TrainConfig


def test_relative_error_basics(rng):
    ref = rng.standard_normal(100) + 2.0
    assert relative_l2_error(ref, ref) == 0.0
    assert relative_l2_error(np.zeros_like(ref), ref) == pytest.approx(1.0)
    assert relative_l2_error(1.01 * ref, ref) == pytest.approx(0.01, rel=1e-12)
    with pytest.raises(ValueError):
        relative_l2_error(ref, np.zeros_like(ref))


def test_lemma_slope_tau_derivative():
    dom = DomainSpec.circle()
    out = lemma_norm_scaling(dom, [1e-2, 1e-3, 1e-4, 1e-5], l=0, n=0, s=0, m=1,
                             p_norm=2)
    assert abs(out["slope"] - 0.5) <= 0.1


def test_lemma_slope_eta_derivative():
    dom = DomainSpec.circle()
    out = lemma_norm_scaling(dom, [1e-2, 1e-3, 1e-4, 1e-5], l=0, n=0, s=1, m=0,
                             p_norm=2)
    assert abs(out["slope"] + 0.5) <= 0.1


def test_lemma_slope_general_weights():
    # an (eta/eps) weight adds nothing to the eps rate; an L1 norm shifts
    # the exponent to 1/p - s = 1
    dom = DomainSpec.circle()
    out = lemma_norm_scaling(dom, [1e-2, 1e-3, 1e-4, 1e-5], l=1, n=1, s=0, m=0,
                             p_norm=2)
    assert abs(out["slope"] - 0.5) <= 0.1
    out = lemma_norm_scaling(dom, [1e-2, 1e-3, 1e-4, 1e-5], l=0, n=0, s=0, m=0,
                             p_norm=1)
    assert abs(out["slope"] - 1.0) <= 0.1


def test_lemma_slope_grid_stability():
    dom = DomainSpec.circle()
    eps = [1e-2, 1e-3, 1e-4, 1e-5]
    a = lemma_norm_scaling(dom, eps, s=1, m=0, n_tau=400, points_per_cell=6)
    b = lemma_norm_scaling(dom, eps, s=1, m=0, n_tau=800, points_per_cell=12)
    assert abs(a["slope"] - b["slope"]) <= 0.02


def test_lemma_requires_enough_decades():
    with pytest.raises(ValueError):
        lemma_norm_scaling(DomainSpec.circle(), [1e-2, 2e-2, 4e-2])


def test_l1_mass_bounded_and_halving():
    dom = DomainSpec.circle()
    eps_list = (1e-4, 1e-5, 1e-6, 1e-7, 1e-8)
    masses = scaled_exponential_l1_mass(dom, eps_list)
    vals = [masses[float(e)] for e in eps_list]
    assert max(vals) / min(vals) <= 2.0
    # consecutive-decade ratios for the wider range are also below 2
    wide = scaled_exponential_l1_mass(dom, (1e-3, 1e-5, 1e-8))
    ws = [wide[e] for e in (1e-3, 1e-5, 1e-8)]
    assert ws[1] / ws[0] <= 2.0 and ws[2] / ws[1] <= 2.0
    # doubling the decay coefficient roughly halves the mass
    single = scaled_exponential_l1_mass(dom, [1e-5], coefficient=1.0)[1e-5]
    double = scaled_exponential_l1_mass(dom, [1e-5], coefficient=2.0)[1e-5]
    assert double / single == pytest.approx(0.5, abs=0.1)


def test_l1_mass_matches_analytic_eta_integral():
    """Layer-adapted eta quadrature against the closed-form eta integral,
    on the same tangential nodes (the tau part is log-singular and shared)."""
    from slpinn.analysis import _layer_adapted_tau
    dom = DomainSpec.circle()
    eps = 1e-5
    got = scaled_exponential_l1_mass(dom, [eps])[eps]
    tau, wt = _layer_adapted_tau(eps)
    s = np.abs(np.sin(tau))
    exact_eta = (1.0 - guarded_exp(-s / eps)) / np.maximum(s, 1e-300)
    want = float(exact_eta @ wt)
    assert got == pytest.approx(want, rel=1e-6)
    # and the value tracks the known asymptote 2 ln(1/eps) + O(1)
    assert got == pytest.approx(2 * np.log(1 / eps), abs=4.0)


def test_run_benchmark_quick():
    row, report, program, reference = run_benchmark(
        "channel", 1e-4, "SL-PINN-L2",
        cfg=TrainConfig(iterations=2000, learning_rate=1e-2, log_every=500),
        grid_sizes=dict(n_eta=30, n_tau=30))
    assert row.rel_l2 < 0.1
    assert row.problem == "channel"
    assert row.runtime_s > 0


def test_epsilon_sweep_records_failures(monkeypatch):
    import slpinn.analysis as analysis_mod

    def boom(*a, **k):
        raise RuntimeError("synthetic failure")

    monkeypatch.setattr(analysis_mod, "run_benchmark", boom)
    report = analysis_mod.epsilon_sweep(["channel"], [1e-4], ["SL-PINN-L2"])
    assert len(report.rows) == 1
    assert report.rows[0].error == "synthetic failure"
    assert np.isnan(report.rows[0].rel_l2)


def test_error_report_csv_and_rendering(tmp_path):
    report = ErrorReport([
        ErrorRow("channel", 1e-6, "SL-PINN-L2", 2.1e-3, 10.0, 0),
        ErrorRow("channel", 1e-4, "SL-PINN-L2", 2.4e-3, 10.0, 0),
        ErrorRow("nonlinear", 1e-6, "PINN-L2", float("nan"), 0.0, 0, error="x"),
    ])
    path = tmp_path / "report.csv"
    report.to_csv(path)
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "problem,epsilon,method,rel_l2,runtime_s,seed"
    assert len(lines) == 4
    text = render_error_table(report, eps_list=(1e-4, 1e-6))
    assert "channel" in text and "2.10e-03" in text and "failed" in text
