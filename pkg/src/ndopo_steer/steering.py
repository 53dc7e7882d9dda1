"""Reid inferred variances, directed EPR products and steering classes.

EPR_jk is the product of the X and Y variances of mode j inferred from
measurements on mode k.  EPR_jk < 1 means mode j is steered by mode k.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateConditioning, InconsistentCovariance
from .model import N_MODES, SteadyState, SystemParams
from .ou_engine import build_diffusion_matrix, build_drift_matrix, quadrature_spectra

DEGENERATE_FLOOR = 1e-12
STEERING_THRESHOLD = 1.0
MARGINAL_BAND = 1e-9
GOLDEN_XTOL = 1e-6

ALL_PAIRS = ((0, 1), (1, 0), (1, 2), (2, 1), (0, 2), (2, 0))
UNORDERED_PAIRS = ((0, 1), (1, 2), (0, 2))


def inferred_variance(V_self, V_other, C, floor: float = DEGENERATE_FLOOR):
    """V_self - C**2 / V_other, elementwise for arrays.

    Raises DegenerateConditioning when the conditioning variance is at or
    below ``floor``, and InconsistentCovariance when the result is negative.
    """
    V_self = np.asarray(V_self, dtype=float)
    V_other = np.asarray(V_other, dtype=float)
    C = np.asarray(C, dtype=float)
    if np.any(V_other <= floor):
        raise DegenerateConditioning(
            f"conditioning variance {np.min(V_other):.3g} at or below {floor:g}")
    out = V_self - C * C / V_other
    # Cauchy-Schwarz guarantees out >= 0 for a valid covariance; allow roundoff only.
    if np.any(out < -1e-12 * np.maximum(1.0, np.abs(V_self))):
        raise InconsistentCovariance(f"negative inferred variance {np.min(out):.3g}")
    out = np.where(out < 0, 0.0, out)
    return out if out.ndim else float(out)


def epr_product(VX, VY, j: int, k: int):
    """EPR_jk from output covariance matrices (single 3x3 or stacks of them)."""
    if j == k:
        raise ValueError("a mode cannot steer itself")
    VX = np.asarray(VX)
    VY = np.asarray(VY)
    vx = inferred_variance(VX[..., j, j], VX[..., k, k], VX[..., j, k])
    vy = inferred_variance(VY[..., j, j], VY[..., k, k], VY[..., j, k])
    return vx * vy


@dataclass(frozen=True)
class FrequencyGrid:
    omega_max: float = 20.0
    points: int = 2001

    def __post_init__(self):
        if not self.omega_max > 0:
            raise ValueError("omega_max must be positive")
        if self.points < 2:
            raise ValueError("need at least two grid points")

    @property
    def omegas(self) -> np.ndarray:
        return np.linspace(0.0, self.omega_max, self.points)


@dataclass(frozen=True, eq=False)
class EPRRecord:
    steered: int
    steerer: int
    omega_grid: np.ndarray
    product: np.ndarray
    min_value: float
    omega_at_min: float

    @property
    def steers(self) -> bool:
        """True when the steerer demonstrably steers the steered mode."""
        return self.min_value < STEERING_THRESHOLD - MARGINAL_BAND


class SteeringKind(enum.Enum):
    SYMMETRIC = "symmetric"
    J_STEERED_BY_K = "asymmetric_j_steered_by_k"
    K_STEERED_BY_J = "asymmetric_k_steered_by_j"
    NONE = "none"


@dataclass(frozen=True)
class SteeringClass:
    pair: tuple[int, int]
    kind: SteeringKind
    marginal: bool = False
    entangled: bool = field(init=False)

    def __post_init__(self):
        # any steering direction certifies entanglement; no steering says nothing
        object.__setattr__(self, "entangled", self.kind is not SteeringKind.NONE)

    @property
    def asymmetric(self) -> bool:
        return self.kind in (SteeringKind.J_STEERED_BY_K, SteeringKind.K_STEERED_BY_J)

    @property
    def label(self) -> str:
        j, k = self.pair
        if self.kind is SteeringKind.J_STEERED_BY_K:
            return f"asymmetric_{j}_steered_by_{k}"
        if self.kind is SteeringKind.K_STEERED_BY_J:
            return f"asymmetric_{k}_steered_by_{j}"
        return self.kind.value


def classify_minima(pair, min_jk: float, min_kj: float) -> SteeringClass:
    """Class of the unordered pair {j, k} from the two directed EPR minima."""
    def below(v):
        return v < STEERING_THRESHOLD - MARGINAL_BAND

    marginal = any(abs(v - STEERING_THRESHOLD) <= MARGINAL_BAND for v in (min_jk, min_kj))
    jk, kj = below(min_jk), below(min_kj)
    if jk and kj:
        kind = SteeringKind.SYMMETRIC
    elif jk:
        kind = SteeringKind.J_STEERED_BY_K
    elif kj:
        kind = SteeringKind.K_STEERED_BY_J
    else:
        kind = SteeringKind.NONE
    return SteeringClass(tuple(pair), kind, marginal)


def classify_pair(rec_jk: EPRRecord, rec_kj: EPRRecord) -> SteeringClass:
    if (rec_jk.steered, rec_jk.steerer) != (rec_kj.steerer, rec_kj.steered):
        raise ValueError("records do not describe the same pair in opposite directions")
    return classify_minima((rec_jk.steered, rec_jk.steerer),
                           rec_jk.min_value, rec_kj.min_value)


def golden_section(f, a: float, b: float, xtol: float = GOLDEN_XTOL):
    """Minimise a unimodal ``f`` on [a, b]; returns (x, f(x))."""
    invphi = (math.sqrt(5) - 1) / 2
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while abs(b - a) > xtol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    x = (a + b) / 2
    return x, f(x)


def _refine(p, A, D, j, k, omegas, values):
    i = int(np.argmin(values))
    best_w, best_v = float(omegas[i]), float(values[i])
    if 0 < i < len(omegas) - 1:
        def f(w):
            VX, VY = quadrature_spectra(p, A, D, [w])
            return float(epr_product(VX[0], VY[0], j, k))
        w, v = golden_section(f, float(omegas[i - 1]), float(omegas[i + 1]))
        if v < best_v:
            best_w, best_v = w, v
    # i == 0 is a stationary point by reflection symmetry; the far edge is kept as is.
    return best_w, best_v


def epr_records(p: SystemParams, ss: SteadyState, pairs=ALL_PAIRS,
                grid: FrequencyGrid | None = None, A=None, D=None) -> dict:
    """EPRRecord for each directed pair, all from one set of output spectra."""
    grid = grid or FrequencyGrid()
    A = build_drift_matrix(p, ss) if A is None else A
    D = build_diffusion_matrix(p, ss) if D is None else D
    omegas = grid.omegas
    VX, VY = quadrature_spectra(p, A, D, omegas)
    out = {}
    for j, k in pairs:
        values = np.asarray(epr_product(VX, VY, j, k))
        w, v = _refine(p, A, D, j, k, omegas, values)
        out[(j, k)] = EPRRecord(j, k, omegas, values, v, w)
    return out


def minimize_over_frequency(p: SystemParams, ss: SteadyState, j: int, k: int,
                            grid: FrequencyGrid | None = None) -> EPRRecord:
    """Minimum of EPR_jk(omega) over [0, omega_max]: coarse grid then golden section."""
    return epr_records(p, ss, [(j, k)], grid)[(j, k)]


def classify_all(records: dict) -> dict:
    """Classes for every unordered pair whose two directions are both present."""
    out = {}
    for j, k in UNORDERED_PAIRS:
        if (j, k) in records and (k, j) in records:
            out[(j, k)] = classify_pair(records[(j, k)], records[(k, j)])
    return out


def pair_modes_valid(j: int, k: int) -> bool:
    return j != k and 0 <= j < N_MODES and 0 <= k < N_MODES
