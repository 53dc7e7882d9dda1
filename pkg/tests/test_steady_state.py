import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from conftest import regime
from ndopo_steer import SystemParams, quintic_coefficients, solve_steady_state, steady_state_oracle
from ndopo_steer.errors import InvalidConfiguration
from ndopo_steer.steady_state import (SolverSettings, relax_trajectory, select_physical,
                                      semiclassical_drift)


def test_drift_at_origin():
    p = SystemParams((1, 1, 1), 0.01, 100, 20)
    np.testing.assert_array_equal(semiclassical_drift(p, np.zeros(6)), [100, 100, 20, 20, 0, 0])


def test_drift_vanishes_below_threshold_fixed_point():
    p = SystemParams((1, 1, 1), 0.01, 50, 0)
    np.testing.assert_array_equal(semiclassical_drift(p, [50, 50, 0, 0, 0, 0]), np.zeros(6))


def test_solver_residual_equal_gamma():
    p = regime("equal", 50)
    ss = solve_steady_state(p)
    assert np.abs(semiclassical_drift(p, ss.six)).max() < 1e-10
    assert ss.residual <= 1e-12
    assert ss.stable


def test_below_threshold_no_injection():
    ss = solve_steady_state(SystemParams((1, 1, 1), 0.01, 50, 0))
    np.testing.assert_allclose(ss.alpha, [50, 0, 0], atol=1e-12)
    assert ss.stable


def test_at_threshold_no_injection_is_marginal():
    ss = solve_steady_state(regime("equal", 0))
    assert abs(ss.alpha[1]) < 1e-12 and abs(ss.alpha[2]) < 1e-12
    assert ss.marginal and not ss.stable


def test_slow_signal_bright_and_real():
    ss = solve_steady_state(regime("slow_signal", 50))
    a = np.array(ss.alpha)
    assert np.all(a.real > 0) and np.all(np.abs(a.imag) < 1e-10)
    oracle = select_physical(regime("slow_signal", 50), steady_state_oracle(regime("slow_signal", 50)))
    np.testing.assert_allclose(a, oracle.alpha, rtol=1e-8)


# symbolic expansion of g0 x q^2 + k^2 g2 e1^2 x - e0 q^2, q = g1 g2 - k^2 x^2
def _sympy_coefficients(p):
    x = sp.Symbol("x")
    g0, g1, g2 = (sp.nsimplify(g) for g in p.gamma)
    k, e0, e1 = (sp.nsimplify(v) for v in (p.kappa, p.eps0, p.eps1))
    q = g1 * g2 - k**2 * x**2
    poly = sp.Poly(sp.expand(g0 * x * q**2 + k**2 * g2 * e1**2 * x - e0 * q**2), x)
    return [float(c) for c in reversed(poly.all_coeffs())]


@pytest.mark.parametrize("gamma", [(1, 1, 1), (1, 2, 2), (1, 0.5, 1)])
def test_quintic_matches_symbolic_expansion(gamma):
    p = SystemParams(gamma, 0.01, 100, 50)
    np.testing.assert_allclose(quintic_coefficients(p), _sympy_coefficients(p), rtol=1e-14)


def test_quintic_frozen_equal_gamma():
    # frozen from the symbolic expansion above
    expected = [-100.0, 1.25, 0.02, -2e-4, -1e-6, 1e-8]
    np.testing.assert_allclose(quintic_coefficients(regime("equal", 50)), expected, rtol=1e-14)


def test_quintic_degree_five():
    c = quintic_coefficients(regime("equal", 50))
    assert c[5] == pytest.approx(1e-8) and c[5] != 0


def test_quintic_factorises_without_injection():
    p = SystemParams((1, 0.5, 1), 0.01, 100, 0)
    x = np.linspace(-300, 300, 13)
    q = 0.5 - 1e-4 * x**2
    np.testing.assert_allclose(np.polynomial.Polynomial(quintic_coefficients(p))(x),
                               (x - 100) * q**2, rtol=1e-12, atol=1e-9)


def test_oracle_below_threshold_root():
    states = steady_state_oracle(SystemParams((1, 1, 1), 0.01, 50, 0))
    assert any(np.allclose(s.alpha, [50, 0, 0]) for s in states)


@pytest.mark.parametrize("name", ["equal", "fast_pair", "slow_signal"])
@pytest.mark.parametrize("ratio", [0.01, 0.3, 0.78, 1.0, 1.5, 2.0])
def test_solver_agrees_with_oracle(name, ratio):
    p = regime(name, 100 * ratio)
    ss = solve_steady_state(p)
    states = steady_state_oracle(p)
    assert all(s.residual < 1e-8 for s in states)
    best = select_physical(p, states, previous=ss.alpha)
    np.testing.assert_allclose(ss.alpha, best.alpha, rtol=1e-8)
    assert all(abs(a.imag) < 1e-10 for a in ss.alpha)


@given(st.floats(0.2, 3), st.floats(0.2, 3), st.floats(0.2, 3), st.floats(0, 300))
@settings(max_examples=25, deadline=None)
def test_oracle_root_count_is_odd(g0, g1, g2, e1):
    p = SystemParams((g0, g1, g2), 0.01, 100, e1)
    roots = np.polynomial.Polynomial(quintic_coefficients(p)).roots()
    real = np.sum(np.abs(roots.imag) <= 1e-7 * np.maximum(1, np.abs(roots)))
    assert real % 2 == 1


@given(st.floats(0.3, 3), st.floats(0.3, 3), st.floats(0.3, 3), st.floats(1, 300))
@settings(max_examples=20, deadline=None)
def test_solver_residual_property(g0, g1, g2, e1):
    p = SystemParams((g0, g1, g2), 0.01, 100, e1)
    ss = solve_steady_state(p)
    assert ss.residual <= 1e-12 * max(1.0, max(abs(a) for a in ss.alpha))
    assert max(abs(a.imag) for a in ss.alpha) < 1e-10


def test_continuation_amplitudes_continuous():
    # halving the ratio step roughly halves the largest jump between neighbours
    def max_jump(step):
        prev, jumps = None, []
        for r in np.arange(0.5, 1.0 + 1e-12, step):
            ss = solve_steady_state(regime("slow_signal", 100 * r), seed=prev)
            if prev is not None:
                jumps.append(np.abs(np.subtract(ss.alpha, prev)).max())
            prev = ss.alpha
        return max(jumps)

    coarse, fine = max_jump(0.02), max_jump(0.01)
    assert fine < 0.6 * coarse


def test_seeded_newton_uses_seed():
    p = regime("equal", 60)
    ss = solve_steady_state(p)
    again = solve_steady_state(p, seed=ss.alpha)
    np.testing.assert_allclose(again.alpha, ss.alpha, rtol=1e-12)
    six = solve_steady_state(p, seed=ss.six)
    np.testing.assert_allclose(six.alpha, ss.alpha, rtol=1e-12)


def test_relaxation_trajectory_approaches_state():
    p = regime("equal", 50)
    t, y = relax_trajectory(p, 200.0, 0.01, sample_every=1000)
    ss = solve_steady_state(p)
    np.testing.assert_allclose(y[-1][0::2], ss.alpha, rtol=1e-6)


@pytest.mark.parametrize("kwargs", [dict(ode_dt=0), dict(newton_tol=1e-5),
                                    dict(newton_max_iter=0), dict(ode_max_time=-1)])
def test_solver_settings_validated(kwargs):
    with pytest.raises(InvalidConfiguration):
        SolverSettings(**kwargs)
