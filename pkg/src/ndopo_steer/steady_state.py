"""Noise-free steady states of the injected NDOPO.

Two independent routes are provided:

* :func:`solve_steady_state` relaxes the six semiclassical equations with a
  fixed-step RK4 integrator and polishes with Newton's method, or starts
  Newton from a supplied seed when continuing along a sweep;
* :func:`steady_state_oracle` eliminates alpha_1 and alpha_2 for real drives
  and finds every real root of the resulting quintic in alpha_0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidConfiguration, NoConvergence, NonphysicalState, NoRealRoot
from .model import N_VARS, SteadyState, SystemParams, expand, validate_params
from .ou_engine import STABILITY_MARGIN, check_stability, linearized_drift


@dataclass(frozen=True)
class SolverSettings:
    ode_dt: float | None = None  # None -> 0.01 / max(gamma)
    ode_max_time: float = 5000.0
    relax_tol: float = 1e-9
    newton_tol: float = 1e-12
    newton_max_iter: int = 50

    def __post_init__(self):
        for name in ("ode_max_time", "relax_tol", "newton_tol"):
            if not getattr(self, name) > 0:
                raise InvalidConfiguration("must be positive", key=name)
        if self.ode_dt is not None and not self.ode_dt > 0:
            raise InvalidConfiguration("must be positive", key="ode_dt")
        if self.newton_max_iter < 1:
            raise InvalidConfiguration("must be at least 1", key="newton_max_iter")
        if not self.newton_tol < 1e-6:
            raise InvalidConfiguration("must be below 1e-6", key="newton_tol")

    def dt_for(self, p: SystemParams) -> float:
        return self.ode_dt if self.ode_dt is not None else 0.01 / max(p.gamma)


def semiclassical_drift(p: SystemParams, a) -> np.ndarray:
    """Right-hand side of the noise-free equations in the six-variable ordering."""
    a0, a0p, a1, a1p, a2, a2p = np.asarray(a, dtype=complex)
    g0, g1, g2 = p.gamma
    k, e0, e1 = p.kappa, p.eps0, p.eps1
    return np.array([
        e0 - g0 * a0 - k * a1 * a2,
        np.conj(e0) - g0 * a0p - k * a1p * a2p,
        e1 - g1 * a1 + k * a0 * a2p,
        np.conj(e1) - g1 * a1p + k * a0p * a2,
        -g2 * a2 + k * a0 * a1p,
        -g2 * a2p + k * a0p * a1,
    ])


def _drift_tuple(g0, g1, g2, k, e0, e1, a0, a0p, a1, a1p, a2, a2p):
    # Scalar version for the RK4 loop; numpy overhead dominates for 6 entries.
    return (e0 - g0 * a0 - k * a1 * a2,
            e0 - g0 * a0p - k * a1p * a2p,
            e1 - g1 * a1 + k * a0 * a2p,
            e1 - g1 * a1p + k * a0p * a2,
            -g2 * a2 + k * a0 * a1p,
            -g2 * a2p + k * a0p * a1)


def _rk4_steps(p, y, dt, n):
    g0, g1, g2 = p.gamma
    args = (g0, g1, g2, p.kappa, p.eps0, p.eps1)
    h2, h6 = dt / 2, dt / 6
    for _ in range(n):
        k1 = _drift_tuple(*args, *y)
        k2 = _drift_tuple(*args, *(yi + h2 * ki for yi, ki in zip(y, k1)))
        k3 = _drift_tuple(*args, *(yi + h2 * ki for yi, ki in zip(y, k2)))
        k4 = _drift_tuple(*args, *(yi + dt * ki for yi, ki in zip(y, k3)))
        y = tuple(yi + h6 * (a + 2 * b + 2 * c + d)
                  for yi, a, b, c, d in zip(y, k1, k2, k3, k4))
    return y


def relax_trajectory(p: SystemParams, t_end: float, dt: float, start=None,
                     sample_every: int = 1):
    """Integrate the noise-free equations with RK4 and return (times, states).

    ``states`` has shape (n_samples, 6).  Starts from the origin unless
    ``start`` (six complex numbers) is given.
    """
    y = tuple(complex(v) for v in (np.zeros(N_VARS) if start is None else start))
    n_steps = int(round(t_end / dt))
    times, states = [0.0], [y]
    done = 0
    while done < n_steps:
        m = min(sample_every, n_steps - done)
        y = _rk4_steps(p, y, dt, m)
        done += m
        times.append(done * dt)
        states.append(y)
    return np.array(times), np.array(states, dtype=complex)


def relax(p: SystemParams, settings: SolverSettings, start=None) -> np.ndarray:
    """RK4 relaxation until the drift norm drops below ``relax_tol`` or time runs out."""
    dt = settings.dt_for(p)
    y = tuple(complex(v) for v in (np.zeros(N_VARS) if start is None else start))
    chunk = max(1, int(round(1.0 / dt)))
    t = 0.0
    g0, g1, g2 = p.gamma
    args = (g0, g1, g2, p.kappa, p.eps0, p.eps1)
    while t < settings.ode_max_time:
        y = _rk4_steps(p, y, dt, chunk)
        t += chunk * dt
        if not all(math.isfinite(abs(v)) for v in y):
            raise NonphysicalState("relaxation produced non-finite amplitudes")
        if max(abs(v) for v in _drift_tuple(*args, *y)) < settings.relax_tol:
            break
    return np.array(y, dtype=complex)


def newton(p: SystemParams, start, settings: SolverSettings) -> np.ndarray:
    """Newton iteration on the six-variable drift with the analytic Jacobian -A."""
    a = np.array(start, dtype=complex)
    f = semiclassical_drift(p, a)
    r = np.abs(f).max()
    for _ in range(settings.newton_max_iter):
        if r <= settings.newton_tol:
            return a
        try:
            step = np.linalg.solve(linearized_drift(p, a), f)  # J = -A, so -J^-1 f = A^-1 f
        except np.linalg.LinAlgError as exc:
            raise NoConvergence(f"singular Jacobian during Newton: {exc}") from exc
        lam = 1.0
        while True:
            trial = a + lam * step
            ft = semiclassical_drift(p, trial)
            rt = np.abs(ft).max()
            if np.isfinite(rt) and (rt < r or lam < 1e-3):
                break
            lam /= 2
        if not np.isfinite(rt):
            raise NoConvergence("Newton iterate became non-finite")
        if rt >= r and r <= 10 * settings.newton_tol:
            # roundoff floor reached just above the target
            break
        a, f, r = trial, ft, rt
    if r <= settings.newton_tol:
        return a
    raise NoConvergence(f"Newton stalled at residual {r:.3g} "
                        f"(target {settings.newton_tol:.1e})")


def _finish(p, a, margin=STABILITY_MARGIN) -> SteadyState:
    if not np.all(np.isfinite(a)):
        raise NonphysicalState("steady state has non-finite amplitudes")
    res = float(np.abs(semiclassical_drift(p, a)).max())
    alpha = a[0::2]
    st = check_stability(linearized_drift(p, expand(alpha)), margin)
    return SteadyState(tuple(alpha), res, st.stable, st.marginal, tuple(st.eigenvalues))


def solve_steady_state(p: SystemParams, settings: SolverSettings | None = None,
                       seed=None) -> SteadyState:
    """Steady state reached from the origin, or from ``seed`` during continuation.

    ``seed`` may be three mean amplitudes or the full six-vector.  A seeded
    Newton run that diverges, or lands on an unstable root, falls back to
    relaxation from the origin.
    """
    validate_params(p)
    s = settings or SolverSettings()
    seeded = None
    if seed is not None:
        seed = np.asarray(seed, dtype=complex)
        seed6 = expand(seed) if seed.shape == (3,) else seed
        try:
            seeded = _finish(p, newton(p, seed6, s))
        except (NoConvergence, NonphysicalState):
            seeded = None
        if seeded is not None and seeded.stable:
            return seeded
    try:
        relaxed = _finish(p, newton(p, relax(p, s), s))
    except (NoConvergence, NonphysicalState):
        if seeded is not None:
            return seeded
        raise
    if seeded is not None and not relaxed.stable:
        return seeded
    return relaxed


def quintic_coefficients(p: SystemParams) -> np.ndarray:
    """Coefficients c0..c5 (ascending powers of alpha_0) of the steady-state quintic.

    With q = g1 g2 - k^2 x^2 the polynomial is

        g0 x q^2 + k^2 g2 e1^2 x - e0 q^2 = 0.
    """
    g0, g1, g2 = p.gamma
    k, e0, e1 = p.kappa, p.eps0, p.eps1
    G = g1 * g2
    k2 = k * k
    return np.array([
        -e0 * G * G,
        g0 * G * G + k2 * g2 * e1 * e1,
        2 * e0 * G * k2,
        -2 * g0 * G * k2,
        -e0 * k2 * k2,
        g0 * k2 * k2,
    ])


def real_quintic_roots(p: SystemParams, imag_tol: float = 1e-7) -> np.ndarray:
    """Real roots of the quintic, sorted and polished, repeated per multiplicity."""
    c = quintic_coefficients(p)
    poly = np.polynomial.Polynomial(c)
    dpoly = poly.deriv()
    roots = poly.roots()
    scale = np.maximum(1.0, np.abs(roots))
    real = np.sort(roots[np.abs(roots.imag) <= imag_tol * scale].real)
    out = []
    for x in real:
        for _ in range(8):
            d = dpoly(x)
            if d == 0:
                break
            nx = x - poly(x) / d
            if not np.isfinite(nx) or abs(poly(nx)) > abs(poly(x)):
                break
            x = nx
        out.append(x)
    return np.array(out)


def steady_state_oracle(p: SystemParams, margin: float = STABILITY_MARGIN,
                        residual_tol: float = 1e-8) -> list[SteadyState]:
    """All real-amplitude steady states obtained from the quintic.

    Back-substitution uses alpha_1 = e1 g2 / (g1 g2 - k^2 alpha_0^2) and
    alpha_2 = k alpha_0 alpha_1 / g2.  Without injection the roots with
    g1 g2 = k^2 alpha_0^2 leave alpha_1 free; the real oscillating solution is
    reported there when it exists.
    """
    validate_params(p)
    g0, g1, g2 = p.gamma
    k, e0, e1 = p.kappa, p.eps0, p.eps1
    G = g1 * g2
    if e1 == 0:
        # (g0 x - e0) q^2 = 0: the double roots are ill-conditioned numerically,
        # so take them from the factorised form.
        x_osc = math.sqrt(G) / k
        roots = np.array(sorted([e0 / g0, x_osc, x_osc, -x_osc, -x_osc]))
    else:
        roots = real_quintic_roots(p)
    if roots.size == 0:
        raise NoRealRoot(f"quintic has no real root for {p}")
    states: list[SteadyState] = []
    seen: list[np.ndarray] = []
    for x in roots:
        q = G - k * k * x * x
        if e1 == 0:
            if x == e0 / g0:
                a1 = 0.0
            else:
                sq = g2 * (e0 - g0 * x) / (k * k * x)
                if sq < 0:
                    continue
                a1 = math.sqrt(sq)
        else:
            a1 = e1 * g2 / q
        alpha = np.array([x, a1, k * x * a1 / g2])
        if any(np.allclose(alpha, s, rtol=1e-9, atol=1e-9) for s in seen):
            continue
        seen.append(alpha)
        ss = _finish(p, expand(alpha), margin)
        if ss.residual > residual_tol:
            raise NoConvergence(
                f"oracle root alpha0={x!r} has drift residual {ss.residual:.3g}")
        states.append(ss)
    return states


def select_physical(p: SystemParams, states, previous=None) -> SteadyState:
    """Pick the physical branch among candidate steady states.

    Only stable states qualify.  With a ``previous`` amplitude triple the
    nearest stable state wins; otherwise the one with alpha_0 closest to the
    non-interacting value eps0/gamma0.
    """
    stable = [s for s in states if s.stable]
    if not stable:
        raise NoConvergence("no stable steady state among the candidates")
    if previous is not None:
        prev = np.asarray(previous, dtype=complex)
        return min(stable, key=lambda s: np.abs(np.asarray(s.alpha) - prev).max())
    target = p.eps0 / p.gamma[0]
    return min(stable, key=lambda s: abs(s.alpha[0] - target))
