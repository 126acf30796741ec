"""Peak photon number of the first echo versus N from the closed form, with a power-law fit."""

import argparse
import json
from pathlib import Path

import numpy as np

from echotrain import two_pi_hz
from echotrain.analysis import fit_power_law
from echotrain.analytic import AnalyticEchoParams, eval_echo_closed_form, physical_scale
from echotrain.cli import plot_scaling

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--gamma-l-mhz", type=float, default=4.0, help="Lorentzian FWHM / 2π in MHz")
ap.add_argument("--out", default="out/n_scaling")
args = ap.parse_args()

N = np.logspace(8, 10, 10)
peaks = []
for n in N:
    p = AnalyticEchoParams(beta=1.0, N_spins=n, g_eff=two_pi_hz(8), kappa=two_pi_hz(150e3), tau=45e-6,
                           Gamma_L=two_pi_hz(args.gamma_l_mhz * 1e6))
    t = np.linspace(0.0, 2 * p.tau, 20001)
    peaks.append(float(np.max(np.abs(eval_echo_closed_form(p, t) * physical_scale(p)) ** 2)))

fit = fit_power_law(N, peaks)
out = Path(args.out)
out.mkdir(parents=True, exist_ok=True)
(out / "scaling.json").write_text(json.dumps(fit.to_dict(), indent=2) + "\n")
plot_scaling(N, peaks).save(out / "scaling.svg")
print(f"b = {fit.b:.4f}, a = {fit.a:.4g}; written to {out}")
