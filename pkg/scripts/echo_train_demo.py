"""Desk-scale echo train (N_k = 2000, 8 realizations) with plots of |α|² and A_echo."""

import argparse
from pathlib import Path

from echotrain.cli import main

ROOT = Path(__file__).resolve().parents[1]

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--out", default="out/echo_train")
args = ap.parse_args()

code = main(["simulate", "--config", str(ROOT / "configs" / "echo_train.json"), "--out", args.out, "--plot"])
if code == 0:
    main(["plot", "--in", args.out, "--kind", "echoes", "--out", str(Path(args.out) / "echoes.svg")])
raise SystemExit(code)
