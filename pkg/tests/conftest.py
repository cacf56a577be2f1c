import numpy as np
import pytest


def fd_gradient(fn, theta, h=1e-4):
    """Central finite differences of a scalar function of theta."""
    g = np.zeros_like(theta)
    for i in range(theta.size):
        tp, tm = theta.copy(), theta.copy()
        tp[i] += h
        tm[i] -= h
        g[i] = (fn(tp) - fn(tm)) / (2.0 * h)
    return g


def assert_close_mixed(actual, expected, rtol=1e-6, abs_floor=1e-9, small=1e-3):
    """Relative comparison, switching to absolute below the `small` scale."""
    actual = np.asarray(actual, dtype=float)
    expected = np.asarray(expected, dtype=float)
    big = np.abs(expected) >= small
    if np.any(big):
        rel = np.abs(actual[big] - expected[big]) / np.abs(expected[big])
        assert rel.max() <= rtol, f"relative error {rel.max():.3e} > {rtol}"
    if np.any(~big):
        ab = np.abs(actual[~big] - expected[~big])
        assert ab.max() <= abs_floor, f"absolute error {ab.max():.3e} > {abs_floor}"


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
