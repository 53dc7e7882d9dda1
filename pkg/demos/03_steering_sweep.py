"""Sweep the injection ratio for three loss-rate regimes and summarise who steers whom.

Pass an output directory to also write sweep CSVs and matplotlib scripts:

    python demos/03_steering_sweep.py out/
"""
import sys
from pathlib import Path

from ndopo_steer import parse_config, run_sweep, write_csv
from ndopo_steer.sweep import emit_figure_scripts

REGIMES = {"equal": "1, 1, 1", "fast_pair": "1, 2, 2", "slow_signal": "1, 0.5, 1"}
out = Path(sys.argv[1]) if len(sys.argv) > 1 else None

for name, gamma in REGIMES.items():
    cfg = parse_config(f"gamma = {gamma}\nkappa = 0.01\neps0 = 100\n"
                       "ratio_grid = 0.01, 2.0, 0.01\n")
    rows = run_sweep(cfg)
    print(f"\n{name}: gamma = ({gamma})")
    # report each stretch of ratios with an unchanged classification
    for pair in ((0, 1), (1, 2), (0, 2)):
        runs, start = [], rows[0]
        for a, b in zip(rows, rows[1:]):
            if a.classes[pair].label != b.classes[pair].label:
                runs.append((start.ratio, a.ratio, a.classes[pair].label))
                start = b
        runs.append((start.ratio, rows[-1].ratio, rows[-1].classes[pair].label))
        for lo, hi, label in runs:
            print(f"  pair {pair}: {lo:4.2f}-{hi:4.2f}  {label}")
    if out is not None:
        d = out / name
        d.mkdir(parents=True, exist_ok=True)
        write_csv(rows, d / "sweep.csv")
        emit_figure_scripts(rows, d, params=cfg.params)
        print(f"  wrote {d}")
