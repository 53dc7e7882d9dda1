"""Stochastic cross-checks for the analytic spectral engine.

* :func:`solve_lyapunov` gives the stationary covariance of the linearised
  OU process, A sigma + sigma A^T = D.
* :func:`simulate_linearized_ou` estimates the same covariance from an
  Euler-Maruyama ensemble.
* :func:`estimate_output_spectrum` estimates output spectral (co)variances
  from windowed periodograms of long linearised trajectories.
* :func:`simulate_positive_p` integrates the full nonlinear positive-P
  equations and returns time-averaged mean amplitudes.

Every trajectory draws from its own counter-based (Philox) stream keyed by
``(rng_seed, trajectory index)``, so results do not depend on how
trajectories are batched.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import linalg

from .errors import (ExcessiveDivergence, InvalidConfiguration, NoUniqueSolution,
                     UnstableDynamics)
from .model import N_VARS, SystemParams, row, validate_params
from .ou_engine import Q, check_stability

DIVERGENCE_NORM = 1e6
MAX_DISCARD_FRACTION = 0.01
# Upper bound on normal variates held in memory per noise block.
_BLOCK_BUDGET = 2_000_000


@dataclass(frozen=True)
class SdeSettings:
    dt: float
    t_end: float
    n_traj: int
    rng_seed: int = 0
    burn_in: float = 0.0

    def __post_init__(self):
        if not self.dt > 0:
            raise InvalidConfiguration("must be positive", key="dt")
        if not self.t_end > 0:
            raise InvalidConfiguration("must be positive", key="t_end")
        if self.n_traj < 1:
            raise InvalidConfiguration("must be at least 1", key="n_traj")
        if not 0 <= self.burn_in < self.t_end:
            raise InvalidConfiguration("must satisfy 0 <= burn_in < t_end", key="burn_in")
        if not 0 <= int(self.rng_seed) < 2**64:
            raise InvalidConfiguration("must fit in an unsigned 64-bit integer", key="rng_seed")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))

    @property
    def burn_steps(self) -> int:
        return int(round(self.burn_in / self.dt))

    def check_step(self, rate: float) -> None:
        """Require dt <= 0.01 / rate for the fastest relevant rate."""
        if self.dt > 0.01 / rate * (1 + 1e-12):
            raise InvalidConfiguration(
                f"dt={self.dt:g} exceeds 0.01/{rate:g} = {0.01 / rate:g}", key="dt")


def trajectory_generators(rng_seed: int, n_traj: int, offset: int = 0):
    """One Philox generator per trajectory, keyed by (rng_seed, index)."""
    return [np.random.Generator(np.random.Philox(
        np.random.SeedSequence(int(rng_seed), spawn_key=(offset + i,))))
        for i in range(n_traj)]


class WienerIncrements:
    """Blocks of Wiener increments, shape (steps, n_traj, m), variance dt each.

    With ``substeps=r`` each increment is the sum of r increments over dt/r,
    so a run at dt with r=2 sees exactly the Brownian path of a run at dt/2.
    """

    def __init__(self, generators, m: int, dt: float, substeps: int = 1):
        self.generators = generators
        self.m = m
        self.substeps = int(substeps)
        self.scale = math.sqrt(dt / self.substeps)

    def block(self, steps: int) -> np.ndarray:
        r = self.substeps
        draws = [g.standard_normal((steps * r, self.m)) for g in self.generators]
        out = np.stack(draws, axis=1)
        if r > 1:
            out = out.reshape(steps, r, len(self.generators), self.m).sum(axis=1)
        return out * self.scale

    def block_size(self) -> int:
        return max(1, _BLOCK_BUDGET // (len(self.generators) * self.m))


def noise_matrix(D, atol: float = 1e-14) -> np.ndarray:
    """A B with B B^T = D.

    When D has the NDOPO structure (only the (3,5) and (4,6) pairs nonzero) B
    is the explicit 6x4 matrix of the positive-P noise terms,
    sqrt(d/2) (eta_1 +- i eta_2) on modes 1 and 2 and the conjugate-variable
    analogue with eta_3, eta_4.  Any other symmetric D falls back to the
    principal matrix square root, which is itself symmetric.
    """
    D = np.asarray(D, dtype=complex)
    a, b = row(1), row(2)
    ap, bp = row(1, True), row(2, True)
    mask = np.zeros(D.shape, dtype=bool)
    mask[[a, b, ap, bp], [b, a, bp, ap]] = True
    if (D.shape == (N_VARS, N_VARS) and np.all(np.abs(D[~mask]) <= atol)
            and abs(D[a, b] - D[b, a]) <= atol and abs(D[ap, bp] - D[bp, ap]) <= atol):
        B = np.zeros((N_VARS, 4), dtype=complex)
        s = np.sqrt(D[a, b] / 2)
        sp = np.sqrt(D[ap, bp] / 2)
        B[a, :2] = s * np.array([1, 1j])
        B[b, :2] = s * np.array([1, -1j])
        B[ap, 2:] = sp * np.array([1, 1j])
        B[bp, 2:] = sp * np.array([1, -1j])
        return B
    if not np.allclose(D, D.T, atol=atol):
        raise ValueError("diffusion matrix must be symmetric")
    B = linalg.sqrtm(D)
    return np.asarray(B, dtype=complex)


def solve_lyapunov(A, D) -> np.ndarray:
    """Stationary covariance sigma with A sigma + sigma A^T = D."""
    A = np.asarray(A, dtype=complex)
    D = np.asarray(D, dtype=complex)
    ev = np.linalg.eigvals(A)
    gap = np.abs(ev[:, None] + ev[None, :]).min()
    if gap <= 1e-12 * max(1.0, np.abs(ev).max()):
        raise NoUniqueSolution("A and -A^T share an eigenvalue")
    return linalg.solve_sylvester(A, A.T, D)


@dataclass(frozen=True, eq=False)
class CovarianceEstimate:
    cov: np.ndarray
    stderr_re: np.ndarray
    stderr_im: np.ndarray
    n_traj: int


def _ou_run(A, B, settings, on_block, batch_offset=0, n_traj=None, substeps=1):
    """Euler-Maruyama for d x = -A x dt + B dW from x = 0.

    ``on_block(step0, xs)`` receives the states after each step of a block,
    ``xs`` of shape (steps, n_traj, 6).
    """
    n_traj = settings.n_traj if n_traj is None else n_traj
    gens = trajectory_generators(settings.rng_seed, n_traj, batch_offset)
    noise = WienerIncrements(gens, B.shape[1], settings.dt, substeps)
    # x_{n+1} = x_n (I - A dt)^T + dW B^T  with row-vector states
    M = (np.eye(N_VARS) - A * settings.dt).T
    Bt = B.T
    x = np.zeros((n_traj, N_VARS), dtype=complex)
    done, n_steps = 0, settings.n_steps
    bs = noise.block_size()
    while done < n_steps:
        steps = min(bs, n_steps - done)
        dW = noise.block(steps) @ Bt
        xs = np.empty((steps, n_traj, N_VARS), dtype=complex)
        for s in range(steps):
            x = x @ M + dW[s]
            xs[s] = x
        if not np.all(np.isfinite(x)) or np.abs(x).max() > DIVERGENCE_NORM:
            raise UnstableDynamics("linearised trajectories diverged")
        on_block(done, xs)
        done += steps
    return x


def simulate_linearized_ou(A, D, settings: SdeSettings, B=None,
                           substeps: int = 1) -> CovarianceEstimate:
    """Ensemble estimate of the stationary covariance <dx_i dx_j> at t_end.

    Each trajectory contributes one snapshot at ``t_end``, so the samples are
    independent and the standard errors are plain ensemble ones.  ``substeps``
    couples runs at different dt to one Brownian path (see WienerIncrements).
    """
    A = np.asarray(A, dtype=complex)
    if not check_stability(A).stable:
        raise UnstableDynamics("drift matrix has eigenvalues with nonpositive real part")
    settings.check_step(np.abs(A).max())
    B = noise_matrix(D) if B is None else np.asarray(B, dtype=complex)
    x = _ou_run(A, B, settings, lambda step0, xs: None, substeps=substeps)
    prod = x[:, :, None] * x[:, None, :]
    n = x.shape[0]
    cov = prod.mean(axis=0)
    if n > 1:
        se_re = prod.real.std(axis=0, ddof=1) / math.sqrt(n)
        se_im = prod.imag.std(axis=0, ddof=1) / math.sqrt(n)
    else:
        se_re = se_im = np.full(cov.shape, np.inf)
    return CovarianceEstimate(cov, se_re, se_im, n)


def quadrature_row(mode: int, quadrature: str) -> int:
    if quadrature not in ("X", "Y"):
        raise ValueError("quadrature must be 'X' or 'Y'")
    return row(mode, quadrature == "Y")


def cross_periodogram(x, y, dt: float, window=None):
    """Two-sided cross periodogram P(omega) = dt F_x(omega) F_y(-omega) / sum(w^2).

    No complex conjugation is applied: for positive-P variables the spectrum
    pairs omega with -omega.  Returns (omegas, P) in FFT order.
    """
    x = np.asarray(x)
    y = np.asarray(y)
    n = x.shape[-1]
    w = np.ones(n) if window is None else np.asarray(window)
    Fx = np.fft.fft(w * x, axis=-1)
    Fy = np.fft.fft(w * y, axis=-1)
    Fy_neg = np.roll(Fy[..., ::-1], 1, axis=-1)  # F_y(-omega_k) = F_y[-k mod n]
    P = dt * Fx * Fy_neg / np.sum(w * w)
    omegas = 2 * np.pi * np.fft.fftfreq(n, d=dt)
    return omegas, P


@dataclass(frozen=True, eq=False)
class SpectrumEstimate:
    omegas: np.ndarray
    value: np.ndarray
    stderr: np.ndarray
    n_traj: int
    pair: tuple[int, int]
    quadrature: str


def estimate_output_spectrum(A, D, p: SystemParams, settings: SdeSettings,
                             pair=(1, 2), quadrature: str = "X",
                             omegas=(0.0, 0.5, 1.0, 2.0),
                             segment_time: float = 64 * np.pi,
                             batch: int = 64) -> SpectrumEstimate:
    """Output spectral (co)variance V(Q_i, Q_j)(omega) from simulated trajectories.

    After ``burn_in`` every trajectory is cut into consecutive Hann-windowed
    segments of length ``segment_time``.  Requested frequencies snap to the
    nearest periodogram bin; the bins actually used are returned.  The
    estimate applies the same output scaling as the analytic path:
    delta_ij + sqrt(g_i g_j) (P_ij(omega) + P_ij(-omega)).
    """
    A = np.asarray(A, dtype=complex)
    if not check_stability(A).stable:
        raise UnstableDynamics("drift matrix has eigenvalues with nonpositive real part")
    settings.check_step(np.abs(A).max())
    i, j = pair
    ri, rj = quadrature_row(i, quadrature), quadrature_row(j, quadrature)
    dt = settings.dt
    n_seg_pts = int(round(segment_time / dt))
    n_segments = (settings.n_steps - settings.burn_steps) // n_seg_pts
    if n_segments < 1:
        raise InvalidConfiguration("t_end - burn_in is shorter than one segment", key="t_end")
    T = n_seg_pts * dt
    dw = 2 * np.pi / T
    k = np.rint(np.asarray(omegas, dtype=float) / dw).astype(int)
    used = k * dw
    window = np.sin(np.pi * np.arange(n_seg_pts) / n_seg_pts) ** 2
    norm = 1.0 / (dt * np.sum(window ** 2))
    phase = np.exp(-1j * np.outer(np.concatenate([used, -used]), np.arange(n_seg_pts) * dt))
    qi, qj = Q[ri], Q[rj]
    scale = math.sqrt(p.gamma[i] * p.gamma[j])
    delta = 1.0 if i == j else 0.0
    B = noise_matrix(D)
    per_traj = []
    burn = settings.burn_steps
    for start in range(0, settings.n_traj, batch):
        nb = min(batch, settings.n_traj - start)
        xi = np.zeros((nb, n_segments * n_seg_pts), dtype=complex)
        xj = np.zeros_like(xi)

        def keep(step0, xs, xi=xi, xj=xj):
            lo = max(step0, burn)
            hi = min(step0 + xs.shape[0], burn + n_segments * n_seg_pts)
            if hi <= lo:
                return
            chunk = xs[lo - step0: hi - step0]
            xi[:, lo - burn: hi - burn] = (chunk @ qi).T
            xj[:, lo - burn: hi - burn] = (chunk @ qj).T

        _ou_run(A, B, settings, keep, batch_offset=start, n_traj=nb)
        xi = (xi.reshape(nb, n_segments, n_seg_pts) * window)
        xj = (xj.reshape(nb, n_segments, n_seg_pts) * window)
        Fi = xi @ phase.T * dt  # (nb, n_segments, 2*n_omega)
        Fj = xj @ phase.T * dt
        m = len(used)
        # P_ij(w) + P_ij(-w) = [F_i(w) F_j(-w) + F_i(-w) F_j(w)] / (dt sum w^2)
        sym = (Fi[..., :m] * Fj[..., m:] + Fi[..., m:] * Fj[..., :m]) * norm
        per_traj.append(delta + scale * sym.real.mean(axis=1))
    samples = np.concatenate(per_traj, axis=0)
    n = samples.shape[0]
    se = samples.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.full(len(used), np.inf)
    return SpectrumEstimate(used, samples.mean(axis=0), se, n, (i, j), quadrature)


@dataclass(frozen=True, eq=False)
class PositivePEstimate:
    mean: np.ndarray        # time-averaged <alpha_j>, j = 0, 1, 2
    stderr_re: np.ndarray
    stderr_im: np.ndarray
    n_traj: int
    n_kept: int
    discard_fraction: float


def _pp_drift(p, a):
    g0, g1, g2 = p.gamma
    k, e0, e1 = p.kappa, p.eps0, p.eps1
    a0, a0p, a1, a1p, a2, a2p = a
    return np.stack([
        e0 - g0 * a0 - k * a1 * a2,
        e0 - g0 * a0p - k * a1p * a2p,
        e1 - g1 * a1 + k * a0 * a2p,
        e1 - g1 * a1p + k * a0p * a2,
        -g2 * a2 + k * a0 * a1p,
        -g2 * a2p + k * a0p * a1,
    ])


def _pp_run(p, settings, noise, start, on_step, check_every=10):
    """Euler-Maruyama (Ito) for the six positive-P equations.

    States are held as (6, n_traj).  Trajectories whose norm exceeds
    DIVERGENCE_NORM are frozen at zero and flagged; returns the flag array.
    """
    n = settings.n_traj
    dt = settings.dt
    a = np.zeros((N_VARS, n), dtype=complex)
    if start is not None:
        a[:] = np.asarray(start, dtype=complex)[:, None]
    alive = np.ones(n, dtype=bool)
    if noise:
        src = WienerIncrements(trajectory_generators(settings.rng_seed, n), 4, dt)
        bs = src.block_size()
    else:
        bs = 1 << 12
    k = p.kappa
    done = 0
    with np.errstate(all="ignore"):
        while done < settings.n_steps:
            steps = min(bs, settings.n_steps - done)
            eta = src.block(steps) if noise else None
            for s in range(steps):
                da = _pp_drift(p, a) * dt
                if noise:
                    e = eta[s].T
                    n0 = np.sqrt(k * a[0] / 2)
                    n0p = np.sqrt(k * a[1] / 2)
                    da[2] += n0 * (e[0] + 1j * e[1])
                    da[4] += n0 * (e[0] - 1j * e[1])
                    da[3] += n0p * (e[2] + 1j * e[3])
                    da[5] += n0p * (e[2] - 1j * e[3])
                a = a + da
                step = done + s + 1
                if step % check_every == 0 or step == settings.n_steps:
                    bad = ~np.isfinite(a).all(axis=0) | (np.abs(a).max(axis=0) > DIVERGENCE_NORM)
                    bad &= alive
                    if bad.any():
                        alive &= ~bad
                        a[:, bad] = 0
                on_step(step, a, alive)
            done += steps
    return alive


def simulate_positive_p(p: SystemParams, settings: SdeSettings, noise: bool = True,
                        start=None) -> PositivePEstimate:
    """Time-averaged post-burn-in means of alpha_0, alpha_1, alpha_2.

    Trajectories start from the vacuum (origin) unless ``start`` is given.
    Standard errors come from the spread of per-trajectory time averages.
    Raises ExcessiveDivergence (with the estimate attached) when more than
    1% of trajectories had to be discarded.
    """
    validate_params(p)
    settings.check_step(max(max(p.gamma), p.kappa * p.eps0 / p.gamma[0]))
    burn = settings.burn_steps
    acc = np.zeros((3, settings.n_traj), dtype=complex)
    count = [0]

    def on_step(step, a, alive):
        if step > burn:
            acc[:] += a[0::2]
            count[0] += 1

    alive = _pp_run(p, settings, noise, start, on_step)
    kept = acc[:, alive] / max(count[0], 1)
    n_kept = int(alive.sum())
    frac = 1.0 - n_kept / settings.n_traj
    if n_kept:
        mean = kept.mean(axis=1)
        if n_kept > 1:
            se_re = kept.real.std(axis=1, ddof=1) / math.sqrt(n_kept)
            se_im = kept.imag.std(axis=1, ddof=1) / math.sqrt(n_kept)
        else:
            se_re = se_im = np.full(3, np.inf)
    else:
        mean = np.full(3, np.nan, dtype=complex)
        se_re = se_im = np.full(3, np.inf)
    est = PositivePEstimate(mean, se_re, se_im, settings.n_traj, n_kept, frac)
    if frac > MAX_DISCARD_FRACTION:
        raise ExcessiveDivergence(
            f"{frac:.1%} of positive-P trajectories diverged", estimate=est)
    return est


def positive_p_paths(p: SystemParams, settings: SdeSettings, noise: bool = True,
                     start=None, sample_every: int = 1):
    """Sampled positive-P trajectories: (times, states) with states (n, 6, n_traj)."""
    validate_params(p)
    times, states = [0.0], []
    a0 = np.zeros((N_VARS, settings.n_traj), dtype=complex)
    if start is not None:
        a0[:] = np.asarray(start, dtype=complex)[:, None]
    states.append(a0)

    def on_step(step, a, alive):
        if step % sample_every == 0:
            times.append(step * settings.dt)
            states.append(a.copy())

    _pp_run(p, settings, noise, start, on_step)
    return np.array(times), np.array(states)


ORACLE_COLUMNS = ("quantity", "estimate", "std_error", "n_traj", "discard_fraction")


@dataclass(frozen=True)
class OracleRow:
    quantity: str
    estimate: float
    std_error: float
    n_traj: int
    discard_fraction: float = 0.0


def positive_p_rows(est: PositivePEstimate) -> list[OracleRow]:
    rows = []
    for m in range(3):
        rows.append(OracleRow(f"pp_alpha{m}_re", float(est.mean[m].real),
                              float(est.stderr_re[m]), est.n_traj, est.discard_fraction))
        rows.append(OracleRow(f"pp_alpha{m}_im", float(est.mean[m].imag),
                              float(est.stderr_im[m]), est.n_traj, est.discard_fraction))
    return rows


def covariance_rows(est: CovarianceEstimate) -> list[OracleRow]:
    rows = []
    for a in range(N_VARS):
        for b in range(a, N_VARS):
            name = f"ou_sigma_{a + 1}{b + 1}"
            rows.append(OracleRow(name + "_re", float(est.cov[a, b].real),
                                  float(est.stderr_re[a, b]), est.n_traj))
            rows.append(OracleRow(name + "_im", float(est.cov[a, b].imag),
                                  float(est.stderr_im[a, b]), est.n_traj))
    return rows


def spectrum_rows(est: SpectrumEstimate) -> list[OracleRow]:
    i, j = est.pair
    q = est.quadrature
    return [OracleRow(f"V_{q}{i}{q}{j}_w{w:.6g}", float(v), float(s), est.n_traj)
            for w, v, s in zip(est.omegas, est.value, est.stderr)]


def write_oracle_csv(rows, path) -> Path:
    path = Path(path)
    try:
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(ORACLE_COLUMNS)
            for r in rows:
                w.writerow([r.quantity, f"{r.estimate:.12g}", f"{r.std_error:.12g}",
                            r.n_traj, f"{r.discard_fraction:.12g}"])
    except OSError as exc:
        raise OSError(f"cannot write oracle report {path}: {exc}") from exc
    return path
