"""Command line entry point ``ndopo-steer``.

Exit codes: 0 success, 2 a sweep row was unstable or failed to converge,
3 configuration error, 4 I/O error.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .errors import InvalidConfiguration, NdopoError
from .ou_engine import drift_diffusion
from .pp_oracle import write_oracle_csv
from .steady_state import solve_steady_state
from .sweep import (compute_spectra, emit_figure_scripts, load_config, run_oracle, run_sweep,
                    write_csv, write_spectra_csv)

EXIT_OK, EXIT_ROW_FAILED, EXIT_CONFIG, EXIT_IO = 0, 2, 3, 4


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ndopo-steer",
                                 description="EPR steering in an injected NDOPO.")
    sub = ap.add_subparsers(dest="command", required=True)

    sw = sub.add_parser("sweep", help="sweep the injection ratio eps1/eps0")
    sw.add_argument("--config", required=True, type=Path)
    sw.add_argument("--out", type=Path, help="output directory (overrides output_dir)")
    sw.add_argument("--oracle", action="store_true", help="also run the stochastic oracle")
    sw.add_argument("--seed", type=int, help="RNG seed for the oracle (unsigned 64-bit)")
    sw.add_argument("--jobs", type=int, default=1)

    sp = sub.add_parser("spectra", help="spectral EPR products at one ratio")
    sp.add_argument("--config", required=True, type=Path)
    sp.add_argument("--ratio", required=True, type=float)
    sp.add_argument("--out", type=Path)

    st = sub.add_parser("steady", help="steady state and drift eigenvalues at one ratio")
    st.add_argument("--config", required=True, type=Path)
    st.add_argument("--ratio", required=True, type=float)
    return ap


def _out_dir(args, cfg) -> Path:
    out = args.out if args.out is not None else cfg.output_dir
    if out is None:
        raise InvalidConfiguration("no output directory: pass --out or set output_dir",
                                   key="output_dir")
    return out


def _cmd_sweep(args, cfg) -> int:
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise InvalidConfiguration("must fit in an unsigned 64-bit integer", key="--seed")
        cfg = replace(cfg, rng_seed=args.seed)
    if args.oracle:
        cfg = replace(cfg, oracle=True)
    if args.jobs < 1:
        raise InvalidConfiguration("must be at least 1", key="--jobs")
    out = _out_dir(args, cfg)
    rows = run_sweep(cfg, jobs=args.jobs)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(rows, out / "sweep.csv")
    emit_figure_scripts(rows, out, params=cfg.params)
    if cfg.oracle:
        write_oracle_csv(run_oracle(cfg), out / "oracle.csv")
    failed = [r for r in rows if r.failed]
    for r in failed:
        print(f"ratio {r.ratio:g}: {r.error}", file=sys.stderr)
    print(f"wrote {len(rows)} rows to {out / 'sweep.csv'}")
    return EXIT_ROW_FAILED if failed else EXIT_OK


def _cmd_spectra(args, cfg) -> int:
    out = _out_dir(args, cfg)
    res = compute_spectra(cfg, args.ratio)
    if not res.steady.stable:
        print(f"ratio {args.ratio:g}: steady state is not stable", file=sys.stderr)
        return EXIT_ROW_FAILED
    out.mkdir(parents=True, exist_ok=True)
    write_spectra_csv(res, out / "spectra.csv")
    emit_figure_scripts([], out, spectra=res)
    print(f"wrote {out / 'spectra.csv'}")
    return EXIT_OK


def _cmd_steady(args, cfg) -> int:
    p = cfg.params.with_ratio(args.ratio)
    ss = solve_steady_state(p)
    dd = drift_diffusion(p, ss)
    for m, a in enumerate(ss.alpha):
        print(f"alpha{m} = {a.real:.12g} {a.imag:+.12g}j")
    print(f"residual = {ss.residual:.3g}")
    print("eigenvalues of A:")
    for ev in np.sort_complex(dd.eigenvalues_A):
        print(f"  {ev.real:.12g} {ev.imag:+.12g}j")
    print("stable" if ss.stable else ("marginal" if ss.marginal else "unstable"))
    return EXIT_OK if ss.stable else EXIT_ROW_FAILED


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if getattr(args, "ratio", None) is not None and not args.ratio >= 0:
            raise InvalidConfiguration("must be nonnegative", key="--ratio")
        return {"sweep": _cmd_sweep, "spectra": _cmd_spectra,
                "steady": _cmd_steady}[args.command](args, cfg)
    except InvalidConfiguration as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except NdopoError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ROW_FAILED


if __name__ == "__main__":
    sys.exit(main())
