"""Linearised fluctuation dynamics and output quadrature spectra.

Around a steady state the fluctuations obey the Ornstein-Uhlenbeck equation

    d(delta alpha) = -A delta alpha dt + B dW,    B B^T = D,

and the intracavity spectrum is

    S(omega) = (A + i omega)^-1 D (A^T - i omega)^-1.

Quadrature spectra follow from S^q = Q S Q^T with Q block-diagonal in
q = [[1, 1], [-i, i]], i.e. X = a + a^+ and Y = -i (a - a^+).  Output
variances add the vacuum unit and scale by sqrt(gamma_i gamma_j).

Matrix entries are documented with the 1-based (row, column) numbering of
:func:`ndopo_steer.model.phase_space_index`.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import integrate

from .errors import ImaginaryResidue, SingularMatrix
from .model import N_MODES, N_VARS, SteadyState, SystemParams, row

STABILITY_MARGIN = 1e-9
IMAG_TOL = 1e-9
# Relative tolerance on the imaginary residue; absolute floor is IMAG_TOL.
_IMAG_RTOL = 1e-12

_q = np.array([[1, 1], [-1j, 1j]])
Q = np.kron(np.eye(N_MODES), _q)
Q_INV = np.linalg.inv(Q)


def linearized_drift(p: SystemParams, a) -> np.ndarray:
    """Drift matrix at a point ``a`` of the six-variable phase space.

    The slots printed with a complex conjugate take the alpha^+ variable, so
    this is exactly minus the Jacobian of the semiclassical drift at ``a``.
    """
    a0, a0p, a1, a1p, a2, a2p = np.asarray(a, dtype=complex)
    g0, g1, g2 = p.gamma
    k = p.kappa
    return np.array([
        [g0, 0, k * a2, 0, k * a1, 0],
        [0, g0, 0, k * a2p, 0, k * a1p],
        [-k * a2p, 0, g1, 0, 0, -k * a0],
        [0, -k * a2, 0, g1, -k * a0p, 0],
        [-k * a1p, 0, 0, -k * a0, g2, 0],
        [0, -k * a1, -k * a0p, 0, 0, g2],
    ], dtype=complex)


def build_drift_matrix(p: SystemParams, ss: SteadyState) -> np.ndarray:
    return linearized_drift(p, ss.six)


def build_diffusion_matrix(p: SystemParams, ss: SteadyState) -> np.ndarray:
    """D(3,5) = D(5,3) = kappa alpha_0 and D(4,6) = D(6,4) = kappa conj(alpha_0); zero elsewhere."""
    D = np.zeros((N_VARS, N_VARS), dtype=complex)
    a0 = ss.alpha[0]
    i, j = row(1), row(2)
    D[i, j] = D[j, i] = p.kappa * a0
    i, j = row(1, True), row(2, True)
    D[i, j] = D[j, i] = p.kappa * np.conj(a0)
    return D


class Stability(NamedTuple):
    stable: bool
    eigenvalues: np.ndarray
    marginal: bool


def check_stability(A, margin: float = STABILITY_MARGIN) -> Stability:
    """Linearisation is valid only if every eigenvalue of A has positive real part.

    A slowest real part within ``margin`` of zero is reported as unstable and
    ``marginal``.
    """
    ev = np.linalg.eigvals(np.asarray(A, dtype=complex))
    slowest = ev.real.min()
    return Stability(bool(slowest > margin), ev, bool(abs(slowest) <= margin))


@dataclass(frozen=True, eq=False)
class DriftDiffusion:
    A: np.ndarray
    D: np.ndarray
    eigenvalues_A: np.ndarray
    stable: bool
    marginal: bool = False


def drift_diffusion(p: SystemParams, ss: SteadyState,
                    margin: float = STABILITY_MARGIN) -> DriftDiffusion:
    A = build_drift_matrix(p, ss)
    D = build_diffusion_matrix(p, ss)
    st = check_stability(A, margin)
    return DriftDiffusion(A, D, st.eigenvalues, st.stable, st.marginal)


def intracavity_spectra(A, D, omegas) -> np.ndarray:
    """S(omega) for every omega in ``omegas``; shape (n, 6, 6)."""
    A = np.asarray(A, dtype=complex)
    D = np.asarray(D, dtype=complex)
    w = np.atleast_1d(np.asarray(omegas, dtype=float))
    eye = np.eye(A.shape[0])
    left = A[None] + 1j * w[:, None, None] * eye
    right = A.T[None] - 1j * w[:, None, None] * eye
    # cond() of a 6x6 is cheap next to the solves and catches near-singular cases
    # that LAPACK would happily push through.
    if np.any(np.linalg.cond(left) > 1e13):
        raise SingularMatrix("A + i*omega is singular; is the steady state stable?")
    try:
        X = np.linalg.solve(left, np.broadcast_to(D, left.shape))
        # S = X right^-1  <=>  S^T = right^-T X^T
        S = np.linalg.solve(np.swapaxes(right, 1, 2), np.swapaxes(X, 1, 2))
    except np.linalg.LinAlgError as exc:
        raise SingularMatrix(str(exc)) from exc
    return np.swapaxes(S, 1, 2)


def intracavity_spectrum(A, D, omega: float) -> np.ndarray:
    return intracavity_spectra(A, D, [omega])[0]


def quadrature_spectrum(S) -> np.ndarray:
    """Q S Q^T; works on a single 6x6 matrix or a stack of them."""
    return Q @ np.asarray(S) @ Q.T


def inverse_quadrature_spectrum(Sq) -> np.ndarray:
    return Q_INV @ np.asarray(Sq) @ Q_INV.T


def output_covariances(p: SystemParams, Sq):
    """Output X and Y (co)variances from a quadrature spectrum.

    VX(i,j) = delta_ij + sqrt(g_i g_j) (Sq[X_i, X_j] + Sq[X_j, X_i]), and the
    same with Y rows for VY.  Accepts a single 6x6 ``Sq`` or a stack; the
    returned arrays have the matching leading shape.
    """
    Sq = np.asarray(Sq)
    xs = [row(m) for m in range(N_MODES)]
    ys = [row(m, True) for m in range(N_MODES)]
    scale = np.sqrt(np.outer(p.gamma, p.gamma))
    out = []
    for idx in (xs, ys):
        block = Sq[..., idx, :][..., :, idx]
        V = np.eye(N_MODES) + scale * (block + np.swapaxes(block, -1, -2))
        resid = np.abs(V.imag).max() if V.size else 0.0
        if resid > max(IMAG_TOL, _IMAG_RTOL * np.abs(V.real).max()):
            raise ImaginaryResidue(f"output covariance has imaginary part {resid:.3g}")
        out.append(np.ascontiguousarray(V.real))
    return out[0], out[1]


@dataclass(frozen=True, eq=False)
class QuadratureSpectrum:
    omega: float
    Sq: np.ndarray
    VX: np.ndarray
    VY: np.ndarray


def quadrature_spectra(p: SystemParams, A, D, omegas):
    """Output covariance stacks (VX, VY), each of shape (n, 3, 3)."""
    Sq = quadrature_spectrum(intracavity_spectra(A, D, omegas))
    return output_covariances(p, Sq)


def spectrum_at(p: SystemParams, A, D, omega: float) -> QuadratureSpectrum:
    Sq = quadrature_spectrum(intracavity_spectrum(A, D, omega))
    VX, VY = output_covariances(p, Sq)
    return QuadratureSpectrum(float(omega), Sq, VX, VY)


def integrate_spectrum(A, D, omega_max: float | None = None,
                       epsabs: float = 1e-12, epsrel: float = 1e-8) -> np.ndarray:
    """(1/2pi) * integral of S(omega) over [-omega_max, omega_max].

    With ``omega_max=None`` the integral runs over the whole real line, which
    equals the stationary covariance of the OU process.
    """
    lim = np.inf if omega_max is None else float(omega_max)
    n = np.asarray(A).shape[0]

    def f(w):
        S = intracavity_spectrum(A, D, w)
        return np.concatenate([S.real.ravel(), S.imag.ravel()])

    val, _ = integrate.quad_vec(f, -lim, lim, epsabs=epsabs, epsrel=epsrel)
    return (val[: n * n] + 1j * val[n * n:]).reshape(n, n) / (2 * np.pi)
