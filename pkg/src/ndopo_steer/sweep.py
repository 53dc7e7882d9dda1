"""Sweeps over the injection ratio eps1/eps0, CSV output and plot scripts.

Configuration files are flat ``key = value`` documents::

    # equal damping run
    gamma      = 1, 1, 1
    kappa      = 0.01
    eps0       = 100
    ratio_grid = 0.01, 2.0, 0.01     # start, stop, step
    omega_grid = 20, 2001            # omega_max, points
    pairs      = 01, 10, 12, 21, 02, 20
    oracle     = false

Lines starting with ``#`` and trailing ``# ...`` are comments; arrays are
comma separated.
"""
from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import InvalidConfiguration, NdopoError
from .model import SteadyState, SystemParams, validate_params
from .ou_engine import drift_diffusion
from .steady_state import SolverSettings, solve_steady_state
from .steering import (ALL_PAIRS, UNORDERED_PAIRS, FrequencyGrid, classify_minima,
                       epr_records, pair_modes_valid)

CSV_HEADER = ("ratio,alpha0_re,alpha0_im,alpha1_re,alpha1_im,alpha2_re,alpha2_im,stable,"
              "epr01,epr10,epr12,epr21,epr02,epr20,w01,w10,w12,w21,w02,w20,"
              "class01,class12,class02").split(",")
NA = "NA"


@dataclass(frozen=True)
class OracleOptions:
    ratio: float = 0.5
    dt: float = 0.005
    t_end: float = 40.0
    burn_in: float = 20.0
    n_traj: int = 1000


@dataclass(frozen=True)
class SweepConfig:
    params: SystemParams
    ratio_grid: tuple[float, float, float] = (0.01, 2.0, 0.01)
    omega_grid: tuple[float, int] = (20.0, 2001)
    pairs: tuple[tuple[int, int], ...] = ALL_PAIRS
    oracle: bool = False
    rng_seed: int = 0
    output_dir: Path | None = None
    oracle_options: OracleOptions = field(default_factory=OracleOptions)

    @property
    def ratios(self) -> np.ndarray:
        start, stop, step = self.ratio_grid
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        # 12 significant digits strips the float noise of start + i*step
        return np.array([float(f"{start + i * step:.12g}") for i in range(n)])

    @property
    def grid(self) -> FrequencyGrid:
        return FrequencyGrid(float(self.omega_grid[0]), int(self.omega_grid[1]))


_KEYS = {"gamma", "kappa", "eps0", "eps1", "ratio_grid", "omega_grid", "pairs",
         "oracle", "rng_seed", "output_dir", "oracle_ratio", "oracle_dt",
         "oracle_t_end", "oracle_burn_in", "oracle_n_traj"}


def _floats(key, value, line, n=None):
    try:
        out = [float(v) for v in value.split(",")]
    except ValueError:
        raise InvalidConfiguration(f"expected numbers, got {value!r}", key=key, line=line)
    if n is not None and len(out) != n:
        raise InvalidConfiguration(f"expected {n} values, got {len(out)}", key=key, line=line)
    return out


def _bool(key, value, line):
    v = value.lower()
    if v in ("true", "yes", "on", "1"):
        return True
    if v in ("false", "no", "off", "0"):
        return False
    raise InvalidConfiguration(f"expected true or false, got {value!r}", key=key, line=line)


def _pairs(key, value, line):
    out = []
    for tok in value.split(","):
        tok = tok.strip()
        if len(tok) != 2 or not tok.isdigit() or not pair_modes_valid(int(tok[0]), int(tok[1])):
            raise InvalidConfiguration(f"bad mode pair {tok!r}", key=key, line=line)
        out.append((int(tok[0]), int(tok[1])))
    return tuple(out)


def parse_config(text: str) -> SweepConfig:
    raw: dict[str, tuple[str, int]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise InvalidConfiguration(f"expected 'key = value', got {body!r}", line=lineno)
        key, value = (s.strip() for s in body.split("=", 1))
        if key not in _KEYS:
            raise InvalidConfiguration("unknown key", key=key, line=lineno)
        if key in raw:
            raise InvalidConfiguration(f"duplicate key (first on line {raw[key][1]})",
                                       key=key, line=lineno)
        if not value:
            raise InvalidConfiguration("missing value", key=key, line=lineno)
        raw[key] = (value, lineno)

    for key in ("gamma", "kappa", "eps0"):
        if key not in raw:
            raise InvalidConfiguration("required key is missing", key=key)

    def get(key, conv, *extra):
        value, line = raw[key]
        return conv(key, value, line, *extra)

    def scalar(key, value, line):
        return _floats(key, value, line, 1)[0]

    params = SystemParams(tuple(get("gamma", _floats, 3)), get("kappa", scalar),
                          get("eps0", scalar), 0.0)
    try:
        validate_params(params)
    except InvalidConfiguration as exc:
        name = exc.key.split("[")[0] if exc.key else None
        line = raw[name][1] if name in raw else None
        raise InvalidConfiguration(str(exc).split(": ", 1)[-1], key=exc.key, line=line) from None
    if params.eps0 <= 0:
        raise InvalidConfiguration("must be positive for a ratio sweep", key="eps0",
                                   line=raw["eps0"][1])

    cfg = SweepConfig(params)
    if "ratio_grid" in raw:
        start, stop, step = get("ratio_grid", _floats, 3)
        line = raw["ratio_grid"][1]
        if not step > 0:
            raise InvalidConfiguration(f"must be positive, got {step}", key="ratio_grid.step",
                                       line=line)
        if not start > 0:
            raise InvalidConfiguration(f"must be positive, got {start}",
                                       key="ratio_grid.start", line=line)
        if not stop >= start:
            raise InvalidConfiguration(f"must be >= start, got {stop}", key="ratio_grid.stop",
                                       line=line)
        cfg = replace(cfg, ratio_grid=(start, stop, step))
    if "omega_grid" in raw:
        wmax, pts = get("omega_grid", _floats, 2)
        line = raw["omega_grid"][1]
        if not wmax > 0:
            raise InvalidConfiguration(f"must be positive, got {wmax}", key="omega_grid.max",
                                       line=line)
        if pts != int(pts) or pts < 2:
            raise InvalidConfiguration(f"must be an integer >= 2, got {pts}",
                                       key="omega_grid.points", line=line)
        cfg = replace(cfg, omega_grid=(wmax, int(pts)))
    if "pairs" in raw:
        cfg = replace(cfg, pairs=get("pairs", _pairs))
    if "oracle" in raw:
        cfg = replace(cfg, oracle=get("oracle", _bool))
    if "rng_seed" in raw:
        value, line = raw["rng_seed"]
        try:
            seed = int(value)
        except ValueError:
            raise InvalidConfiguration(f"expected an integer, got {value!r}", key="rng_seed",
                                       line=line) from None
        if not 0 <= seed < 2**64:
            raise InvalidConfiguration("must fit in an unsigned 64-bit integer",
                                       key="rng_seed", line=line)
        cfg = replace(cfg, rng_seed=seed)
    if "output_dir" in raw:
        cfg = replace(cfg, output_dir=Path(raw["output_dir"][0]))
    opts = {}
    for key, conv in (("oracle_ratio", float), ("oracle_dt", float), ("oracle_t_end", float),
                      ("oracle_burn_in", float), ("oracle_n_traj", int)):
        if key in raw:
            value, line = raw[key]
            try:
                v = conv(value)
            except ValueError:
                raise InvalidConfiguration(f"bad value {value!r}", key=key, line=line) from None
            if not v > 0 and key != "oracle_burn_in":
                raise InvalidConfiguration("must be positive", key=key, line=line)
            opts[key[len("oracle_"):]] = v
    if opts:
        cfg = replace(cfg, oracle_options=replace(cfg.oracle_options, **opts))
    return cfg


def load_config(path) -> SweepConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))


@dataclass(frozen=True, eq=False)
class SweepRow:
    ratio: float
    alpha: tuple[complex, complex, complex] | None
    stable: bool
    epr_min: dict = field(default_factory=dict)
    omega_at_min: dict = field(default_factory=dict)
    classes: dict = field(default_factory=dict)
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None or not self.stable


def _steady_prepass(cfg, ratios, settings):
    states, seed = [], None
    for r in ratios:
        p = cfg.params.with_ratio(float(r))
        try:
            ss = solve_steady_state(p, settings, seed=seed)
        except NdopoError as exc:
            states.append(exc)
            continue
        states.append(ss)
        if ss.stable:
            seed = ss.alpha
    return states


def _evaluate(params: SystemParams, ratio: float, ss: SteadyState, pairs, grid) -> SweepRow:
    p = params.with_ratio(ratio)
    if not ss.stable:
        why = "marginally stable steady state" if ss.marginal else "unstable steady state"
        return SweepRow(ratio, ss.alpha, False, error=why)
    try:
        dd = drift_diffusion(p, ss)
        recs = epr_records(p, ss, pairs, grid, A=dd.A, D=dd.D)
    except NdopoError as exc:
        return SweepRow(ratio, ss.alpha, True, error=f"{type(exc).__name__}: {exc}")
    mins = {pair: r.min_value for pair, r in recs.items()}
    ws = {pair: r.omega_at_min for pair, r in recs.items()}
    classes = {(j, k): classify_minima((j, k), mins[(j, k)], mins[(k, j)])
               for j, k in UNORDERED_PAIRS if (j, k) in mins and (k, j) in mins}
    return SweepRow(ratio, ss.alpha, True, mins, ws, classes)


def _evaluate_star(args):
    return _evaluate(*args)


def run_sweep(cfg: SweepConfig, jobs: int = 1, descending: bool = False,
              settings: SolverSettings | None = None) -> list[SweepRow]:
    """One row per ratio, always returned in ascending ratio order.

    Steady states come from a serial continuation pass (in descending order
    when requested); EPR minimisation may then run on ``jobs`` processes.
    Per-row failures are recorded in the row and never abort the sweep.
    """
    ratios = cfg.ratios
    order = ratios[::-1] if descending else ratios
    states = _steady_prepass(cfg, order, settings)
    rows: dict[float, SweepRow] = {}
    tasks = []
    for r, ss in zip(order, states):
        if isinstance(ss, Exception):
            rows[float(r)] = SweepRow(float(r), None, False,
                                      error=f"{type(ss).__name__}: {ss}")
        else:
            tasks.append((cfg.params, float(r), ss, cfg.pairs, cfg.grid))
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_evaluate_star, tasks, chunksize=8))
    else:
        results = [_evaluate(*t) for t in tasks]
    for res in results:
        rows[res.ratio] = res
    return [rows[float(r)] for r in ratios]


def _num(x) -> str:
    return NA if x is None else format(float(x), ".12g")


def row_to_record(row: SweepRow) -> list[str]:
    out = [_num(row.ratio)]
    if row.alpha is None:
        out += [NA] * 6
    else:
        for a in row.alpha:
            out += [_num(a.real), _num(a.imag)]
    out.append("true" if row.stable else "false")
    out += [_num(row.epr_min.get(p)) for p in ALL_PAIRS]
    out += [_num(row.omega_at_min.get(p)) for p in ALL_PAIRS]
    for pair in UNORDERED_PAIRS:
        c = row.classes.get(pair)
        out.append(NA if c is None else c.label)
    return out


def write_csv(rows, path) -> Path:
    path = Path(path)
    try:
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_HEADER)
            for r in rows:
                w.writerow(row_to_record(r))
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def read_csv(path) -> list[dict]:
    """Rows of a sweep CSV as dicts; numbers become floats and NA becomes None."""
    out = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            conv = {}
            for k, v in rec.items():
                if v == NA:
                    conv[k] = None
                elif k == "stable":
                    conv[k] = v == "true"
                elif k.startswith("class"):
                    conv[k] = v
                else:
                    conv[k] = float(v)
            out.append(conv)
    return out


@dataclass(frozen=True, eq=False)
class SpectraResult:
    params: SystemParams
    steady: SteadyState
    omegas: np.ndarray
    epr: dict  # (j, k) -> EPR_jk(omega) array


def compute_spectra(cfg: SweepConfig, ratio: float,
                    settings: SolverSettings | None = None) -> SpectraResult:
    p = cfg.params.with_ratio(ratio)
    ss = solve_steady_state(p, settings)
    recs = epr_records(p, ss, cfg.pairs, cfg.grid)
    grid = cfg.grid
    return SpectraResult(p, ss, grid.omegas, {k: r.product for k, r in recs.items()})


def write_spectra_csv(result: SpectraResult, path) -> Path:
    path = Path(path)
    pairs = list(result.epr)
    try:
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["omega"] + [f"epr{j}{k}" for j, k in pairs])
            for i, om in enumerate(result.omegas):
                w.writerow([_num(om)] + [_num(result.epr[pq][i]) for pq in pairs])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


_SCRIPT_HEAD = '''"""{title}

Generated by ndopo_steer; run with ``python {name}``.  Writes {png} next to
this script.
"""
import json
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

DATA = json.loads({data!r})
'''

_EPR_MINIMA_BODY = '''
fig, ax = plt.subplots(figsize=(6, 4))
for label, values in DATA["epr"].items():
    xs = [r for r, v in zip(DATA["ratio"], values) if v is not None]
    ys = [v for v in values if v is not None]
    ax.plot(xs, ys, label="EPR$_{{%s}}$" % label)
ax.axhline(1.0, color="k", lw=0.8, ls="--")
ax.set_xlabel(r"$\\epsilon_1/\\epsilon_0$")
ax.set_ylabel("minimum of spectral EPR")
ax.set_title(DATA["title"])
ax.legend()
fig.tight_layout()
fig.savefig(Path(__file__).with_suffix(".png"), dpi=150)
'''

_SPECTRA_BODY = '''
fig, ax = plt.subplots(figsize=(6, 4))
for label, values in DATA["epr"].items():
    ax.plot(DATA["omega"], values, label="EPR$_{{%s}}$" % label)
ax.axhline(1.0, color="k", lw=0.8, ls="--")
ax.set_xlabel(r"$\\omega/\\gamma_1$")
ax.set_ylabel("spectral EPR")
ax.set_title(DATA["title"])
ax.legend()
fig.tight_layout()
fig.savefig(Path(__file__).with_suffix(".png"), dpi=150)
'''

_AMPLITUDE_BODY = '''
fig, ax = plt.subplots(figsize=(6, 4))
for m in range(3):
    xs = [r for r, a in zip(DATA["ratio"], DATA["alpha"][m]) if a is not None]
    ys = [a for a in DATA["alpha"][m] if a is not None]
    ax.plot(xs, ys, label=r"$\\alpha_%d$" % m)
ax.set_xlabel(r"$\\epsilon_1/\\epsilon_0$")
ax.set_ylabel("steady-state amplitude")
ax.set_title(DATA["title"])
ax.legend()
fig.tight_layout()
fig.savefig(Path(__file__).with_suffix(".png"), dpi=150)
'''


def _title(p: SystemParams) -> str:
    g = ", ".join(f"{x:g}" for x in p.gamma)
    return f"gamma=({g}), kappa={p.kappa:g}, eps0={p.eps0:g}"


def _write_script(path: Path, title: str, data: dict, body: str) -> Path:
    text = _SCRIPT_HEAD.format(title=title, name=path.name, png=path.with_suffix(".png").name,
                               data=json.dumps(data)) + body
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def emit_figure_scripts(rows, output_dir, params: SystemParams | None = None,
                        spectra: SpectraResult | None = None) -> list[Path]:
    """Write self-contained matplotlib scripts with the data embedded.

    Sweep rows give ``plot_epr_minima.py`` and ``plot_amplitudes.py``; a
    :class:`SpectraResult` adds ``plot_spectra.py``.  Every EPR plot carries a
    reference line at 1.
    """
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    title = _title(params) if params is not None else ""
    written = []
    if rows:
        ratios = [r.ratio for r in rows]
        epr = {}
        for pair in ALL_PAIRS:
            if any(pair in r.epr_min for r in rows):
                epr[f"{pair[0]}{pair[1]}"] = [r.epr_min.get(pair) for r in rows]
        written.append(_write_script(out / "plot_epr_minima.py",
                                     "Minima of the spectral EPR products vs injection ratio.",
                                     {"title": title, "ratio": ratios, "epr": epr},
                                     _EPR_MINIMA_BODY))
        alpha = [[None if r.alpha is None else r.alpha[m].real for r in rows] for m in range(3)]
        written.append(_write_script(out / "plot_amplitudes.py",
                                     "Steady-state mode amplitudes vs injection ratio.",
                                     {"title": title, "ratio": ratios, "alpha": alpha},
                                     _AMPLITUDE_BODY))
    if spectra is not None:
        data = {"title": _title(spectra.params) + f", eps1={spectra.params.eps1:g}",
                "omega": spectra.omegas.tolist(),
                "epr": {f"{j}{k}": v.tolist() for (j, k), v in spectra.epr.items()}}
        written.append(_write_script(out / "plot_spectra.py",
                                     "Positive-frequency spectral EPR products.",
                                     data, _SPECTRA_BODY))
    return written


def run_oracle(cfg: SweepConfig, settings: SolverSettings | None = None) -> list:
    """Stochastic cross-checks at ``cfg.oracle_options.ratio``.

    Rows with ``n_traj == 0`` are the analytic references (Lyapunov
    covariance, deterministic amplitudes, analytic output variance) that the
    estimates beside them should match within a few standard errors.
    """
    from . import pp_oracle as po
    from .ou_engine import spectrum_at

    o = cfg.oracle_options
    p = cfg.params.with_ratio(o.ratio)
    ss = solve_steady_state(p, settings)
    if not ss.stable:
        raise NdopoError(f"steady state at ratio {o.ratio:g} is not stable")
    dd = drift_diffusion(p, ss)
    seed = cfg.rng_seed
    rows = []

    sigma = po.solve_lyapunov(dd.A, dd.D)
    for a in range(6):
        for b in range(a, 6):
            rows.append(po.OracleRow(f"ref_sigma_{a + 1}{b + 1}_re", float(sigma[a, b].real), 0.0, 0))
    rows += po.covariance_rows(po.simulate_linearized_ou(
        dd.A, dd.D, po.SdeSettings(o.dt, max(o.t_end - o.burn_in, 20.0), o.n_traj, seed)))

    for m in range(3):
        rows.append(po.OracleRow(f"ref_alpha{m}_re", float(ss.alpha[m].real), 0.0, 0))
    try:
        est = po.simulate_positive_p(p, po.SdeSettings(o.dt, o.t_end, max(o.n_traj // 4, 2),
                                                       seed + 1, o.burn_in))
    except po.ExcessiveDivergence as exc:
        est = exc.estimate
    rows += po.positive_p_rows(est)

    seg = 64 * np.pi
    sde = po.SdeSettings(o.dt, o.burn_in + 2 * seg, max(o.n_traj // 16, 2), seed + 2, o.burn_in)
    spec = po.estimate_output_spectrum(dd.A, dd.D, p, sde, pair=(1, 2), quadrature="X",
                                       segment_time=seg)
    for w in spec.omegas:
        rows.append(po.OracleRow(f"ref_V_X1X2_w{w:.6g}",
                                 float(spectrum_at(p, dd.A, dd.D, w).VX[1, 2]), 0.0, 0))
    rows += po.spectrum_rows(spec)
    return rows
