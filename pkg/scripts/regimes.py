"""First-echo shapes of the linear theory for several Lorentzian widths, plus the regime of each."""

import argparse
from pathlib import Path

import numpy as np

from echotrain import two_pi_hz
from echotrain.analytic import AnalyticEchoParams, classify_regime, eval_echo_closed_form, physical_scale
from echotrain.svg import Figure

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--out", default="out/regimes")
args = ap.parse_args()

cases = {
    "GL=2pi*0.1 MHz": dict(Gamma_L=two_pi_hz(0.1e6)),
    "GL=2pi*0.5 MHz": dict(Gamma_L=two_pi_hz(0.5e6)),
    "GL=2pi*1 MHz": dict(Gamma_L=two_pi_hz(1e6)),
    "bad cavity (N=1e8, kappa=2pi*20 MHz)": dict(Gamma_L=two_pi_hz(0.1e6), N_spins=1e8, kappa=two_pi_hz(20e6)),
    "cavity dominated (N=1e8, GL=2pi*10 MHz)": dict(Gamma_L=two_pi_hz(10e6), N_spins=1e8),
}
out = Path(args.out)
out.mkdir(parents=True, exist_ok=True)
fig = Figure(xlabel="t (µs)", ylabel="|α|² / max", title="First echo, linear theory", logy=True)
for label, kw in cases.items():
    base = dict(beta=1.0, N_spins=1e10, g_eff=two_pi_hz(8), kappa=two_pi_hz(150e3), tau=45e-6)
    p = AnalyticEchoParams(**{**base, **kw})
    t = np.linspace(30e-6, 60e-6, 6001)
    y = np.abs(eval_echo_closed_form(p, t) * physical_scale(p)) ** 2
    fig.add(t * 1e6, np.where(y > y.max() * 1e-8, y / y.max(), np.nan), label)
    r = classify_regime(p)
    print(f"{label:42s} {r.regime.value:20s} zeta^2 = {r.zeta_sq:.3e}, slowest decay {r.slowest_decay:.4g} 1/s")
fig.save(out / "regimes.svg")
