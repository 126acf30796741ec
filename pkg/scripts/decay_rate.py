"""Echo-train decay rate at full scale (N_k >= 2e4, 45 realizations); takes a while.

    python scripts/decay_rate.py --nk 20000 --realizations 45 --workers 8 --out out/decay_rate
"""

import argparse
import math
from pathlib import Path

from echotrain.cli import plot_echoes, plot_timeseries, write_meta
from echotrain.config import load_config
from echotrain.runner import analyze_run, run_averaged

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=ROOT / "configs" / "echo_train.json")
    ap.add_argument("--nk", type=int, default=20000)
    ap.add_argument("--realizations", type=int, default=45)
    ap.add_argument("--workers", type=int, default=4)
    ap.add_argument("--out", default="out/decay_rate")
    args = ap.parse_args()

    config = load_config(args.config).replace(**{
        "ensemble.N_k": args.nk, "averaging.realizations": args.realizations, "averaging.workers": args.workers,
    })
    run = run_averaged(config)
    rep = analyze_run(config, run.mean, run.horizon)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    run.mean.to_csv(out / "trajectory.csv")
    rep.save_json(out / "echoes.json")
    write_meta(out / "meta.json", "decay_rate", config, {"seeds": run.seeds, "revival_horizon": run.horizon})
    plot_timeseries(run.mean, config.sequence, title=f"N_k={args.nk}, R={args.realizations}").save(out / "photons.svg")
    if rep.n_echoes:
        plot_echoes(rep).save(out / "echoes.svg")

    for e in rep.echoes:
        print(f"echo {e.order}: t = {e.t_peak * 1e6:.2f} us, A_echo = {e.A_echo:.4g}")
    if rep.fit is None:
        print("fewer than two echoes; no decay rate")
        return
    b = rep.fit.b
    target = 2 * math.pi * 6.29e3
    print(f"b = 2pi x {b / 2 / math.pi / 1e3:.3f} kHz (reference 2pi x 6.29 kHz, ratio {b / target:.2f})")


if __name__ == "__main__":
    main()
