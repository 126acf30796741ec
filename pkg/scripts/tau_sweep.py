"""Echo spacing versus the Hahn delay τ ∈ {15, 30, 45, 60} µs at desk scale."""

import argparse
from pathlib import Path

from echotrain.cli import write_meta, _run_meta
from echotrain.config import load_config
from echotrain.runner import SweepSpec, run_sweep

ROOT = Path(__file__).resolve().parents[1]

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--out", default="out")
ap.add_argument("--workers", type=int, default=4)
args = ap.parse_args()

spec = SweepSpec.from_config(load_config(ROOT / "configs" / "tau_sweep.json"))
res = run_sweep(spec, args.out, workers=args.workers,
                write_meta=lambda p, cfg, run: write_meta(p, "sweep-cell", cfg, _run_meta(cfg, run)))
for row in sorted(res.rows, key=lambda r: r["tau"]):
    sp = [round((b - a) * 1e6, 2) for a, b in zip(row["t_peak"], row["t_peak"][1:])]
    print(f"tau = {row['tau'] * 1e6:4.0f} us: {row['n_echoes']} echoes, spacings {sp} us")
