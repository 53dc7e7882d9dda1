"""Parameter and state types, and the phase-space variable ordering.

All rates, amplitudes and frequencies are dimensionless, measured in units of
the signal-mode loss rate gamma_1.

The six phase-space variables are always ordered

    (alpha_0, alpha_0^+, alpha_1, alpha_1^+, alpha_2, alpha_2^+)

and documented with 1-based row numbers 1..6, matching the printed layout of
the drift and diffusion matrices.  Code that needs a 0-based array index goes
through :func:`row`.
"""
from __future__ import annotations

import math
import numbers
from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidConfiguration

N_MODES = 3
N_VARS = 6


@dataclass(frozen=True)
class SystemParams:
    """Injected non-degenerate OPO parameters.

    gamma : cavity loss rates (gamma_0, gamma_1, gamma_2)
    kappa : effective chi-2 coupling
    eps0  : pump drive amplitude at omega_0
    eps1  : injected signal amplitude at omega_1
    """

    gamma: tuple[float, float, float]
    kappa: float
    eps0: float
    eps1: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "gamma", tuple(self.gamma))

    @property
    def threshold(self) -> float:
        """Pump amplitude at which the non-injected oscillator starts to oscillate."""
        g0, g1, g2 = self.gamma
        return g0 * math.sqrt(g1 * g2) / self.kappa

    @property
    def ratio(self) -> float:
        return self.eps1 / self.eps0 if self.eps0 else math.inf

    def with_eps1(self, eps1: float) -> SystemParams:
        return replace(self, eps1=eps1)

    def with_ratio(self, ratio: float) -> SystemParams:
        return replace(self, eps1=ratio * self.eps0)


def _real_scalar(value, name):
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        if isinstance(value, numbers.Complex) or np.iscomplexobj(value):
            raise InvalidConfiguration(
                "complex drive phases and amplitudes are not supported", key=name)
        raise InvalidConfiguration(f"expected a real number, got {value!r}", key=name)
    value = float(value)
    if not math.isfinite(value):
        raise InvalidConfiguration(f"must be finite, got {value}", key=name)
    return value


def validate_params(p: SystemParams) -> SystemParams:
    """Return ``p`` unchanged if every invariant holds, else raise InvalidConfiguration."""
    if len(p.gamma) != N_MODES:
        raise InvalidConfiguration(f"need exactly 3 loss rates, got {len(p.gamma)}", key="gamma")
    for i, g in enumerate(p.gamma):
        if _real_scalar(g, f"gamma[{i}]") <= 0:
            raise InvalidConfiguration(f"must be positive, got {g}", key=f"gamma[{i}]")
    if _real_scalar(p.kappa, "kappa") <= 0:
        raise InvalidConfiguration(f"must be positive, got {p.kappa}", key="kappa")
    for name in ("eps0", "eps1"):
        if _real_scalar(getattr(p, name), name) < 0:
            raise InvalidConfiguration(
                f"must be nonnegative, got {getattr(p, name)}", key=name)
    return p


def phase_space_index(mode: int, conjugate: bool) -> int:
    """1-based row of ``alpha_mode`` (or ``alpha_mode^+`` when ``conjugate``)."""
    if isinstance(mode, bool) or not isinstance(mode, numbers.Integral) \
            or not 0 <= mode < N_MODES:
        raise ValueError(f"mode must be 0, 1 or 2, got {mode!r}")
    return 2 * int(mode) + 1 + (1 if conjugate else 0)


def row(mode: int, conjugate: bool = False) -> int:
    """0-based array index for the same variable as :func:`phase_space_index`."""
    return phase_space_index(mode, conjugate) - 1


@dataclass(frozen=True)
class SteadyState:
    """Mean intracavity amplitudes of the three modes.

    ``residual`` is the infinity norm of the semiclassical drift at ``alpha``.
    ``stable`` is filled in by the solver from the drift-matrix eigenvalues;
    ``marginal`` marks states whose slowest eigenvalue sits within the
    stability margin of zero.
    """

    alpha: tuple[complex, complex, complex]
    residual: float
    stable: bool
    marginal: bool = False
    eigenvalues: tuple[complex, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "alpha", tuple(complex(a) for a in self.alpha))

    @property
    def six(self) -> np.ndarray:
        """The state as a six-vector with alpha^+ set to conj(alpha)."""
        return expand(self.alpha)


def expand(alpha) -> np.ndarray:
    """Map three mean amplitudes onto the six-variable ordering."""
    a = np.asarray(alpha, dtype=complex)
    out = np.empty(N_VARS, dtype=complex)
    out[0::2] = a
    out[1::2] = a.conj()
    return out
