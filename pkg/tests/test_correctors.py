import numpy as np
import pytest
import sympy as sp

from slpinn.correctors import (AnsatzSpec, CutoffFn, assemble_ansatz, channel_layer,
                               corrector_factor, cutoff_eval, layer_exponential,
                               regularizer_C)
from slpinn.domains import DomainSpec
from slpinn.errors import NotApplicableError, OutOfDomainError
from slpinn.nets import init_params


def quintic_reference(R):
    """Independent symbolic construction of the cut-off on [R/2, 3R/4]."""
    eta = sp.Symbol("eta")
    u = (eta - R / 2) / (R / 4)
    d = 1 - (10 * u**3 - 15 * u**4 + 6 * u**5)
    return [sp.lambdify(eta, sp.diff(d, eta, k)) for k in range(3)]


def test_cutoff_plateau_and_support():
    for R in (1.0, np.arctanh(0.25)):
        cut = CutoffFn(R)
        d0, d1, d2 = cutoff_eval(cut, np.array([0.0, 0.3 * R, 7 * R / 8, R]))
        np.testing.assert_allclose(d0, [1.0, 1.0, 0.0, 0.0])
        np.testing.assert_allclose(d1, 0.0)
        np.testing.assert_allclose(d2, 0.0)


def test_cutoff_transition_matches_symbolic():
    for R in (1.0, 0.2554128118829953):
        fns = quintic_reference(R)
        cut = CutoffFn(R)
        eta = np.linspace(R / 2, 3 * R / 4, 33)
        d0, d1, d2 = cutoff_eval(cut, eta)
        np.testing.assert_allclose(d0, [fns[0](e) for e in eta], atol=1e-13)
        np.testing.assert_allclose(d1, [fns[1](e) for e in eta], atol=1e-11 / R)
        np.testing.assert_allclose(d2, [fns[2](e) for e in eta], atol=1e-9 / R**2)
        # midpoint value is exactly one half
        mid = cutoff_eval(cut, 5 * R / 8)
        assert mid[0] == pytest.approx(0.5, abs=1e-15)


def test_cutoff_c2_continuity():
    # the jump across each joint shrinks linearly with the probe distance
    cut = CutoffFn(1.0)
    for joint in (0.5, 0.75):
        for h in (1e-5, 1e-7):
            left = cutoff_eval(cut, joint - h)
            right = cutoff_eval(cut, joint + h)
            for a, b in zip(left, right):
                assert abs(a - b) <= 4000.0 * 2 * h  # bounded by h * max|delta'''|


def test_cutoff_range_check():
    with pytest.raises(OutOfDomainError):
        cutoff_eval(CutoffFn(1.0), 1.5)


def test_corrector_factor_values():
    circ = DomainSpec.circle()
    b = corrector_factor(circ, 0.1, np.array([0.0]), np.array([1.5 * np.pi]))
    assert b["v"][0] == pytest.approx(1.0, abs=0)
    # masked on the inflow half
    b = corrector_factor(circ, 0.1, np.array([0.3]), np.array([0.5 * np.pi]))
    for comp in b.values():
        assert comp[0] == 0.0
    # underflow guard: huge negative exponent gives exact zeros
    b = corrector_factor(circ, 1e-6, np.array([0.5]), np.array([1.5 * np.pi]))
    for comp in b.values():
        assert comp[0] == 0.0


def test_corrector_factor_derivatives_fd():
    circ = DomainSpec.circle()
    eps = 0.05
    eta = np.array([0.12])
    tau = np.array([4.2])
    h = 1e-6
    b = corrector_factor(circ, eps, eta, tau)
    fe = (corrector_factor(circ, eps, eta + h, tau)["v"]
          - corrector_factor(circ, eps, eta - h, tau)["v"]) / (2 * h)
    ft = (corrector_factor(circ, eps, eta, tau + h)["v"]
          - corrector_factor(circ, eps, eta, tau - h)["v"]) / (2 * h)
    np.testing.assert_allclose(b["e"], fe, rtol=1e-7)
    np.testing.assert_allclose(b["t"], ft, rtol=1e-7)


def test_regularizer_values():
    circ = DomainSpec.circle()
    C, *_ = regularizer_C(circ, np.array([0.0]), np.array([1.5 * np.pi]))
    assert C[0] == pytest.approx(1.0, abs=1e-15)          # 1 - 1 - (-1)^3
    C, *_ = regularizer_C(circ, np.array([0.0]), np.array([0.5 * np.pi]))
    assert C[0] == pytest.approx(0.0, abs=1e-15)
    ell = DomainSpec.ellipse(4.0, 1.0)
    C, *_ = regularizer_C(ell, np.array([ell.R]), np.array([1.0]))
    assert C[0] == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(NotApplicableError):
        regularizer_C(DomainSpec.channel(), np.array([0.1]), np.array([0.1]))


def test_regularizer_derivatives_fd(rng):
    h = 1e-6
    for dom in (DomainSpec.circle(), DomainSpec.ellipse(4.0, 1.0)):
        eta = rng.uniform(0.01, 0.9 * dom.layer_limit, 30)
        tau = rng.uniform(np.pi + 0.01, 2 * np.pi - 0.01, 30)
        C, Ce, Cee, Ct, Ctt = regularizer_C(dom, eta, tau)
        num = lambda f, a, b: (f(a, b)[0] for _ in (0,))
        Cp = regularizer_C(dom, eta + h, tau)[0]
        Cm = regularizer_C(dom, eta - h, tau)[0]
        np.testing.assert_allclose(Ce, (Cp - Cm) / (2 * h), rtol=1e-6, atol=1e-8)
        np.testing.assert_allclose(Cee, (Cp - 2 * C + Cm) / h**2, rtol=1e-3, atol=1e-3)
        Cp = regularizer_C(dom, eta, tau + h)[0]
        Cm = regularizer_C(dom, eta, tau - h)[0]
        np.testing.assert_allclose(Ct, (Cp - Cm) / (2 * h), rtol=1e-6, atol=1e-8)
        np.testing.assert_allclose(Ctt, (Cp - 2 * C + Cm) / h**2, rtol=1e-3, atol=1e-3)


def test_boundary_exactness_curved(rng):
    """The assembled field vanishes identically on the physical boundary."""
    for dom in (DomainSpec.circle(), DomainSpec.ellipse(4.0, 1.0),
                DomainSpec.ellipse(1.0, 4.0)):
        spec = AnsatzSpec(dom, "steady")
        for draw in range(25):
            params = init_params(draw, 2, [8])
            params.theta[:] += rng.standard_normal(params.theta.size)
            for tau in rng.uniform(0, 2 * np.pi, 40):
                b = assemble_ansatz(spec, params, 1e-4, [0.0, tau])
                vhat = params.network().quantities(
                    params.theta, np.array([[np.cos(tau), np.sin(tau)]]), [()])[()][0]
                assert abs(b["v"][0]) <= 1e-14 * (1.0 + abs(vhat))


def test_boundary_exactness_channel(rng):
    dom = DomainSpec.channel()
    spec = AnsatzSpec(dom, "steady")
    eps = 1e-3
    for draw in range(25):
        params = init_params(draw, 2, [8])
        params.theta[:] += rng.standard_normal(params.theta.size)
        for x in rng.uniform(0.0, 1.0, 40):
            b0 = assemble_ansatz(spec, params, eps, [x, 0.0])
            assert abs(b0["v"][0]) <= 1e-14
            b1 = assemble_ansatz(spec, params, eps, [x, 1.0])
            trace = params.network().quantities(
                params.theta, np.array([[x, 0.0]]), [()])[()][0]
            bound = np.exp(-1.0 / eps) * abs(x * (x - 1) * trace) * (1 + 1e-12)
            assert abs(b1["v"][0]) <= bound + 1e-300


def test_time_ansatz_initial_condition(rng):
    dom = DomainSpec.circle()
    spec = AnsatzSpec(dom, "time")
    params = init_params(0, 3, [6])
    for _ in range(20):
        pt = [0.0, rng.uniform(0, 0.9), rng.uniform(0, 2 * np.pi)]
        b = assemble_ansatz(spec, params, 1e-3, pt)
        assert b["v"][0] == 0.0


def test_channel_corrector_ode_identity(rng):
    """-eps f'' - f' vanishes at ulp level for f = exp(-y/eps)."""
    for eps in (1e-2, 1e-4, 1e-6):
        y = rng.uniform(0.0, 1.0, 500)
        b = channel_layer(eps, y)
        resid = -eps * b["yy"] - b["y"]
        scale = np.max(np.abs(b["y"])) + 1e-300
        assert np.max(np.abs(resid)) <= 4e-16 * scale


def test_ansatz_partials_match_fd(rng):
    """Assembled derivative bundle vs finite differences in (eta, tau)."""
    dom = DomainSpec.circle()
    spec = AnsatzSpec(dom, "steady")
    eps = 0.05
    params = init_params(2, 2, [7])
    h = 1e-5

    def value(eta, tau):
        return assemble_ansatz(spec, params, eps, [eta, tau])["v"][0]

    for _ in range(30):
        eta = rng.uniform(0.05, 0.7)
        tau = rng.uniform(np.pi + 0.1, 2 * np.pi - 0.1)
        if np.exp(np.sin(tau) * eta / eps) < 1e-8:
            continue
        b = assemble_ansatz(spec, params, eps, [eta, tau])
        fe = (value(eta + h, tau) - value(eta - h, tau)) / (2 * h)
        ft = (value(eta, tau + h) - value(eta, tau - h)) / (2 * h)
        fee = (value(eta + h, tau) - 2 * value(eta, tau) + value(eta - h, tau)) / h**2
        ftt = (value(eta, tau + h) - 2 * value(eta, tau) + value(eta, tau - h)) / h**2
        assert abs(b["e"][0] - fe) <= 1e-5 * max(1.0, abs(fe))
        assert abs(b["t"][0] - ft) <= 1e-5 * max(1.0, abs(ft))
        assert abs(b["ee"][0] - fee) <= 2e-4 * max(1.0, abs(fee))
        assert abs(b["tt"][0] - ftt) <= 2e-4 * max(1.0, abs(ftt))


def test_mask_kills_corrector_on_inflow_half(rng):
    dom = DomainSpec.circle()
    enriched = AnsatzSpec(dom, "steady", use_corrector=True)
    params = init_params(4, 2, [6])
    eps = 1e-3
    for _ in range(50):
        pt = [rng.uniform(0, 0.9), rng.uniform(0.05, np.pi - 0.05)]
        full = assemble_ansatz(enriched, params, eps, pt)
        C, Ce, Cee, Ct, Ctt = regularizer_C(dom, np.array([pt[0]]), np.array([pt[1]]))
        vhat = params.network().quantities(
            params.theta,
            np.array([[(1 - pt[0]) * np.cos(pt[1]), (1 - pt[0]) * np.sin(pt[1])]]),
            [()])[()][0]
        assert full["v"][0] == pytest.approx(vhat * C[0], rel=1e-14, abs=1e-15)


def test_layer_exponential_masks_without_nan():
    dom = DomainSpec.circle()
    eta = np.array([0.5, 0.5])
    tau = np.array([0.5 * np.pi, 1.5 * np.pi])
    E = layer_exponential(dom, 1e-8, eta, tau)
    assert E[0] == 0.0
    assert E[1] == 0.0
    assert np.all(np.isfinite(E))
