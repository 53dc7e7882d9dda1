import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import regime
from ndopo_steer import (SdeSettings, SystemParams, drift_diffusion, estimate_output_spectrum,
                         simulate_linearized_ou, simulate_positive_p, solve_lyapunov,
                         solve_steady_state, spectrum_at)
from ndopo_steer.errors import (ExcessiveDivergence, InvalidConfiguration, NoUniqueSolution,
                                UnstableDynamics)
from ndopo_steer.pp_oracle import (ORACLE_COLUMNS, OracleRow, WienerIncrements, cross_periodogram,
                                   noise_matrix, positive_p_paths, trajectory_generators,
                                   write_oracle_csv, _ou_run)
from ndopo_steer.steady_state import relax_trajectory


@pytest.fixture(scope="module")
def equal50():
    p = regime("equal", 50)
    ss = solve_steady_state(p)
    return p, ss, drift_diffusion(p, ss)


def test_lyapunov_trivial_cases():
    np.testing.assert_allclose(solve_lyapunov(np.eye(6), np.eye(6)), np.eye(6) / 2)
    assert not solve_lyapunov(np.eye(6), np.zeros((6, 6))).any()


def test_lyapunov_residual(equal50):
    _, _, dd = equal50
    s = solve_lyapunov(dd.A, dd.D)
    np.testing.assert_allclose(dd.A @ s + s @ dd.A.T, dd.D, atol=1e-12)


def test_lyapunov_no_unique_solution():
    with pytest.raises(NoUniqueSolution):
        solve_lyapunov(np.diag([1.0, -1.0]), np.eye(2))


@given(st.complex_numbers(max_magnitude=200, allow_nan=False, allow_infinity=False),
       st.floats(1e-4, 0.1))
def test_noise_factor_reproduces_diffusion(a0, k):
    p = SystemParams((1, 1, 1), k, 1.0)
    from ndopo_steer import SteadyState, build_diffusion_matrix
    D = build_diffusion_matrix(p, SteadyState((a0, 0, 0), 0, True))
    B = noise_matrix(D)
    assert B.shape == (6, 4)
    np.testing.assert_allclose(B @ B.T, D, atol=1e-12)


def test_noise_factor_fallback_for_perturbed_diffusion():
    rng = np.random.default_rng(3)
    M = rng.normal(size=(6, 6))
    D = M @ M.T
    B = noise_matrix(D)
    np.testing.assert_allclose(B @ B.T, D, atol=1e-12)


@pytest.mark.parametrize("substeps", [1, 3])
def test_wiener_increment_variance(substeps):
    dt = 0.01
    w = WienerIncrements(trajectory_generators(5, 50), 4, dt, substeps).block(2000)
    n = w.size
    assert abs(w.var() / dt - 1) < 4 / np.sqrt(n)
    assert abs(w.mean()) < 4 * np.sqrt(dt / n)


def test_substeps_share_the_brownian_path():
    fine = WienerIncrements(trajectory_generators(9, 3), 2, 0.005).block(10)
    coarse = WienerIncrements(trajectory_generators(9, 3), 2, 0.01, substeps=2).block(5)
    np.testing.assert_allclose(coarse, fine[0::2] + fine[1::2], rtol=1e-14)


def test_streams_do_not_depend_on_batching():
    whole = trajectory_generators(7, 6)
    part = trajectory_generators(7, 3, offset=3)
    for g, h in zip(whole[3:], part):
        assert g.standard_normal() == h.standard_normal()


def test_ou_zero_diffusion(equal50):
    _, _, dd = equal50
    est = simulate_linearized_ou(dd.A, np.zeros((6, 6)), SdeSettings(0.005, 20, 16))
    assert not est.cov.any()


def test_ou_matches_lyapunov_small_ensemble(equal50):
    _, _, dd = equal50
    est = simulate_linearized_ou(dd.A, dd.D, SdeSettings(0.005, 20, 2000, rng_seed=11))
    sigma = solve_lyapunov(dd.A, dd.D)
    z_re = np.abs(est.cov.real - sigma.real) / np.where(est.stderr_re > 0, est.stderr_re, np.inf)
    z_im = np.abs(est.cov.imag - sigma.imag) / np.where(est.stderr_im > 0, est.stderr_im, np.inf)
    assert z_re.max() < 4 and z_im.max() < 4


def test_ou_step_halving_within_one_standard_error(equal50):
    _, _, dd = equal50
    coarse = simulate_linearized_ou(dd.A, dd.D, SdeSettings(0.01, 20, 1000, 2), substeps=2)
    fine = simulate_linearized_ou(dd.A, dd.D, SdeSettings(0.005, 20, 1000, 2))
    assert np.all(np.abs(coarse.cov.real - fine.cov.real) <= fine.stderr_re + 1e-15)
    assert np.all(np.abs(coarse.cov.imag - fine.cov.imag) <= fine.stderr_im + 1e-15)


def test_ou_reproducible(equal50):
    _, _, dd = equal50
    s = SdeSettings(0.005, 5, 64, rng_seed=123)
    a = simulate_linearized_ou(dd.A, dd.D, s)
    b = simulate_linearized_ou(dd.A, dd.D, s)
    assert np.array_equal(a.cov, b.cov) and np.array_equal(a.stderr_re, b.stderr_re)


def test_ou_unstable_rejected():
    with pytest.raises(UnstableDynamics):
        simulate_linearized_ou(-np.eye(6), np.eye(6), SdeSettings(0.001, 1, 2))


def test_step_size_bound_enforced(equal50):
    _, _, dd = equal50
    with pytest.raises(InvalidConfiguration, match="dt"):
        simulate_linearized_ou(dd.A, dd.D, SdeSettings(0.05, 1, 2))


@pytest.mark.parametrize("kwargs", [dict(dt=0, t_end=1, n_traj=1), dict(dt=0.1, t_end=1, n_traj=0),
                                    dict(dt=0.1, t_end=1, n_traj=1, burn_in=1),
                                    dict(dt=0.1, t_end=1, n_traj=1, rng_seed=-1)])
def test_sde_settings_validated(kwargs):
    with pytest.raises(InvalidConfiguration):
        SdeSettings(**kwargs)


def test_zero_diffusion_spectrum_is_shot_noise(equal50):
    p, _, dd = equal50
    est = estimate_output_spectrum(dd.A, np.zeros((6, 6)), p,
                                   SdeSettings(0.01, 10 + 64 * np.pi, 4, 0, 10), pair=(1, 1))
    np.testing.assert_array_equal(est.value, 1.0)


def test_parseval_for_periodogram(equal50):
    _, _, dd = equal50
    s = SdeSettings(0.01, 200, 4, rng_seed=1)
    traj = []
    _ou_run(dd.A, noise_matrix(dd.D), s, lambda step0, xs: traj.append(xs))
    x = np.concatenate(traj)[:, 0, 2] + np.concatenate(traj)[:, 0, 3]  # X quadrature of mode 1
    x = x - x.mean()
    omegas, P = cross_periodogram(x, x, s.dt)
    dw = 2 * np.pi / (len(x) * s.dt)
    integrated = P.sum().real * dw / (2 * np.pi)
    assert integrated == pytest.approx(np.mean(x * x).real, rel=1e-2)


def test_spectrum_estimate_matches_analytic(equal50):
    p, _, dd = equal50
    s = SdeSettings(0.01, 10 + 2 * 64 * np.pi, 64, rng_seed=4, burn_in=10)
    est = estimate_output_spectrum(dd.A, dd.D, p, s, pair=(1, 2), quadrature="X")
    ref = np.array([spectrum_at(p, dd.A, dd.D, w).VX[1, 2] for w in est.omegas])
    assert np.all(np.abs(est.value - ref) < 4 * est.stderr)


def test_spectrum_estimate_independent_of_batch(equal50):
    p, _, dd = equal50
    s = SdeSettings(0.01, 64 * np.pi, 6, rng_seed=8)
    a = estimate_output_spectrum(dd.A, dd.D, p, s, batch=6)
    b = estimate_output_spectrum(dd.A, dd.D, p, s, batch=4)
    np.testing.assert_array_equal(a.value, b.value)


def test_positive_p_decoupled_limit():
    p = SystemParams((1, 1, 1), 1e-8, 100, 50)
    est = simulate_positive_p(p, SdeSettings(0.005, 40, 20, rng_seed=0, burn_in=20))
    np.testing.assert_allclose(est.mean, [100, 50, 0], atol=1e-3)


def test_positive_p_matches_steady_state():
    p = regime("equal", 50)
    ss = solve_steady_state(p)
    est = simulate_positive_p(p, SdeSettings(0.002, 40, 200, rng_seed=3, burn_in=20))
    assert est.discard_fraction == 0
    z = np.abs(est.mean.real - np.real(ss.alpha)) / est.stderr_re
    assert z.max() < 4
    assert np.all(np.abs(est.mean.imag) < 4 * est.stderr_im)


def test_positive_p_standard_error_shrinks_as_inverse_sqrt():
    p = regime("equal", 50)
    ss = solve_steady_state(p)
    small = simulate_positive_p(p, SdeSettings(0.005, 30, 50, rng_seed=1, burn_in=15))
    large = simulate_positive_p(p, SdeSettings(0.005, 30, 200, rng_seed=2, burn_in=15))
    ratio = small.stderr_re / large.stderr_re
    np.testing.assert_allclose(ratio, 2.0, rtol=0.35)
    for est in (small, large):
        assert np.all(np.abs(est.mean.real - np.real(ss.alpha)) < 4 * est.stderr_re)


@pytest.mark.parametrize("dt", [0.002, 0.001])
def test_noise_free_run_tracks_relaxation(dt):
    p = regime("equal", 50)
    t, states = positive_p_paths(p, SdeSettings(dt, 10.0, 1), noise=False,
                                 sample_every=int(round(1 / dt)))
    tr, yr = relax_trajectory(p, 10.0, 0.001, sample_every=1000)
    np.testing.assert_allclose(t, tr)
    err = np.abs(states[:, :, 0] - yr).max() / np.abs(yr).max()
    # Euler is first order: the gap is about 0.23 * dt here
    assert err < 0.5 * dt


def test_positive_p_reproducible():
    p = regime("slow_signal", 50)
    s = SdeSettings(0.005, 2, 8, rng_seed=99)
    a, b = simulate_positive_p(p, s), simulate_positive_p(p, s)
    assert np.array_equal(a.mean, b.mean)


def test_excessive_divergence_reported():
    p = regime("equal", 50)
    huge = [1e5, -1e5] * 3
    with pytest.raises(ExcessiveDivergence) as exc:
        simulate_positive_p(p, SdeSettings(0.001, 1.0, 20), start=huge)
    assert exc.value.estimate.discard_fraction > 0.01


def test_oracle_csv(tmp_path):
    path = write_oracle_csv([OracleRow("x", 1.5, 0.25, 10, 0.0)], tmp_path / "o.csv")
    lines = path.read_bytes().decode("utf-8").split("\n")
    assert lines[0] == ",".join(ORACLE_COLUMNS)
    assert lines[1] == "x,1.5,0.25,10,0"
