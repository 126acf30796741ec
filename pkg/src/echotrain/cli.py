"""Command-line entry point: ``echotrain <command> ...``.

Exit codes: 0 success, 1 unreadable inputs, 2 configuration error,
3 numerical instability, 4 closed-form branch point (ζ = 0).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import AnalysisSettings, EchoReport, detect_echoes, fit_power_law
from .analytic import (
    AnalyticEchoParams,
    BranchPointError,
    classify_regime,
    eval_echo_closed_form,
    physical_scale,
    simulate_linear_hp,
    spectrum_inversion,
)
from .config import ConfigError, RunConfig, load_config
from .meanfield import NumericalInstabilityError, Trajectory
from .model import Distribution, PulseSequence
from .runner import SweepSpec, analyze_run, build_ensemble, run_averaged, run_sweep
from .svg import Figure

log = logging.getLogger("echotrain")

OUT_ENV = "ECHOTRAIN_OUT"
EXIT_IO, EXIT_CONFIG, EXIT_UNSTABLE, EXIT_BRANCH = 1, 2, 3, 4


def default_out() -> Path:
    return Path(os.environ.get(OUT_ENV, "out"))


def _dump(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def write_meta(path: Path, command: str, config: RunConfig, extra: dict | None = None) -> None:
    meta = {"version": __version__, "command": command, "config": config.to_dict()}
    if extra:
        meta["resolved"] = extra
    _dump(Path(path), meta)


def _run_meta(config: RunConfig, run) -> dict:
    return {
        "sequence": config.sequence.to_dict(),
        "tau": config.tau,
        "dt": run.mean.meta["integrator"]["dt"],
        "seeds": run.seeds,
        "guard": config.analysis.resolved_guard(config.params.kappa),
        "revival_horizon": run.horizon,
    }


def analytic_params(config: RunConfig) -> AnalyticEchoParams:
    p = config.params
    if p.inhomogeneous_fwhm <= 0:
        raise ConfigError("the linear theory needs physical.inhomogeneous_fwhm > 0")
    widths = (
        {"Gamma_L": p.inhomogeneous_fwhm}
        if p.distribution is Distribution.LORENTZIAN
        else {"Gamma_G": p.sigma}
    )
    return AnalyticEchoParams(
        beta=config.data["analytic"]["beta"],
        N_spins=p.N_spins,
        g_eff=p.g_single,
        kappa=p.kappa,
        tau=config.tau,
        gamma_hp=p.gamma,
        delta_c=p.delta_c,
        **widths,
    )


def _apply_overrides(config: RunConfig, args) -> RunConfig:
    changes = {}
    if getattr(args, "nk", None) is not None:
        changes["ensemble.N_k"] = args.nk
    if getattr(args, "seed", None) is not None:
        changes["averaging.base_seed"] = args.seed
    if getattr(args, "dt", None) is not None:
        changes["integrator.dt"] = args.dt
    if getattr(args, "realizations", None) is not None:
        changes["averaging.realizations"] = args.realizations
    return config.replace(**changes) if changes else config


# ---------------------------------------------------------------- commands


def cmd_simulate(args) -> int:
    config = _apply_overrides(load_config(args.config), args)
    out = Path(args.out) if args.out else default_out()
    out.mkdir(parents=True, exist_ok=True)
    run = run_averaged(config)
    run.mean.to_csv(out / "trajectory.csv")
    if run.realizations:
        rdir = out / "realizations"
        rdir.mkdir(exist_ok=True)
        for seed, tr in zip(run.seeds, run.realizations):
            tr.to_csv(rdir / f"trajectory_seed{seed}.csv")
    run.mean.bloch_to_csv(out)
    report = analyze_run(config, run.mean, run.horizon)
    report.save_json(out / "echoes.json")
    report.to_csv(out / "echoes.csv")
    write_meta(out / "meta.json", "simulate", config, _run_meta(config, run))
    if args.plot:
        plot_timeseries(run.mean, config.sequence).save(out / "photons.svg")
        for idx, (sx, sy, sz) in sorted(run.mean.bloch.items()):
            fig = Figure(xlabel="t (µs)", ylabel="Bloch component", title=f"class {idx}")
            t_us = run.mean.times * 1e6
            fig.add(t_us, sx, "sx").add(t_us, sy, "sy").add(t_us, sz, "sz")
            fig.save(out / f"bloch_{idx}.svg")
    print(f"{report.n_echoes} echo(es) detected; output in {out}")
    return 0


def cmd_linear(args) -> int:
    config = _apply_overrides(load_config(args.config), args)
    out = Path(args.out) if args.out else default_out()
    out.mkdir(parents=True, exist_ok=True)
    p = analytic_params(config)
    ens = build_ensemble(config.params, config.ensemble, config.averaging["base_seed"])
    t_end = config.data["analytic"]["t_end"] or 2.0 * p.tau
    traj = simulate_linear_hp(p, ens, dt=config.integrator.dt, t_end=t_end, record_stride=config.record.stride)
    traj.to_csv(out / "trajectory.csv")
    write_meta(out / "meta.json", "linear", config, {"dt": traj.meta["dt"], "analytic": p.to_dict()})
    if args.plot:
        plot_timeseries(traj, None).save(out / "photons.svg")
    print(f"peak |α|² = {traj.photon_number.max():.6g} at t = {traj.times[traj.photon_number.argmax()]:.6g} s")
    return 0


def cmd_analytic(args) -> int:
    config = load_config(args.config)
    p = analytic_params(config)
    report = classify_regime(p)
    if args.regime:
        print(report.regime.value)
    out = Path(args.out) if args.out else default_out()
    out.mkdir(parents=True, exist_ok=True)
    a_cfg = config.data["analytic"]
    t_end = a_cfg["t_end"] or 2.0 * p.tau
    t = np.linspace(0.0, t_end, a_cfg["n_points"])
    # the field in dynamical units; |a| of the closed form times g sqrt(2π)
    a = eval_echo_closed_form(p, t) * physical_scale(p)
    Trajectory(t, a).to_csv(out / "closed_form.csv")
    if args.spectrum:
        ts, asp = spectrum_inversion(p, t_end)
        Trajectory(ts, asp).to_csv(out / "spectrum_inversion.csv")
    _dump(out / "regime.json", report.to_dict())
    write_meta(out / "meta.json", "analytic", config, {"analytic": p.to_dict()})
    if args.plot:
        plot_timeseries(Trajectory(t, a), None, title=report.regime.value).save(out / "closed_form.svg")
    if not args.regime:
        print(f"{report.regime.value}; output in {out}")
    return 0


def cmd_sweep(args) -> int:
    config = load_config(args.config)
    spec = SweepSpec.from_config(config)
    out = Path(args.out) if args.out else default_out()
    result = run_sweep(
        spec,
        out,
        workers=args.workers,
        write_meta=lambda path, cfg, run: write_meta(path, "sweep-cell", cfg, _run_meta(cfg, run)),
    )
    for row in result.rows:
        msg = f"{row['cell']}: {row['status']}"
        if row["status"] == "ok":
            msg += f", {row['n_echoes']} echo(es)"
        else:
            msg += f" ({row['error']})"
        print(msg)
    print(f"results in {out / spec.name}")
    return 0


def _run_dirs(root: Path) -> list[Path]:
    found = sorted({p.parent for p in root.rglob("trajectory.csv")})
    return [d for d in found if (d / "meta.json").exists()]


def cmd_analyze(args) -> int:
    root = Path(args.input)
    if not root.is_dir():
        print(f"error: {root} is not a directory", file=sys.stderr)
        return EXIT_IO
    dirs = _run_dirs(root)
    if not dirs:
        print(f"error: no run directories (trajectory.csv + meta.json) under {root}", file=sys.stderr)
        return EXIT_IO
    failed = 0
    for d in dirs:
        try:
            meta = json.loads((d / "meta.json").read_text())
            config = RunConfig.from_dict(meta["config"])
            changes = {
                f"analysis.{k}": getattr(args, k)
                for k in ("window_frac", "noise_floor", "max_order", "guard")
                if getattr(args, k) is not None
            }
            if changes:
                config = config.replace(**changes)
            traj = Trajectory.from_csv(d / "trajectory.csv")
            resolved = meta.get("resolved", {})
            seq = PulseSequence.from_dict(resolved["sequence"]) if "sequence" in resolved else config.sequence
            report = detect_echoes(traj, seq, config.tau, config.params.kappa, config.analysis,
                                   t_valid=resolved.get("revival_horizon"))
            report.save_json(d / "echoes.json")
            report.to_csv(d / "echoes.csv")
            print(f"{d}: {report.n_echoes} echo(es)")
        except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
            failed += 1
            print(f"error: {d}: {exc}", file=sys.stderr)
    return EXIT_IO if failed else 0


# -------------------------------------------------------------------- plots


def plot_timeseries(traj: Trajectory, seq: PulseSequence | None, title: str = "", logy: bool = True) -> Figure:
    fig = Figure(xlabel="t (µs)", ylabel="|α|²", title=title, logy=logy)
    y = traj.photon_number
    if logy and seq is not None:
        # keep the drive pulses from setting the scale
        inside = np.zeros(len(traj), bool)
        for p in seq.pulses:
            inside |= (traj.times >= p.t_start) & (traj.times < p.t_end)
        y = np.where(inside, np.nan, y)
    if logy:
        pos = y[np.isfinite(y) & (y > 0)]
        if pos.size:
            y = np.where(y >= pos.max() * 1e-12, y, np.nan)
    fig.add(traj.times * 1e6, y, "|α|²")
    return fig


def plot_echoes(report: EchoReport) -> Figure:
    fig = Figure(xlabel="echo order", ylabel="A_echo (photons)", title="Emitted photons per echo", logy=True)
    k = np.array([e.order for e in report.echoes], float)
    A = np.array([e.A_echo for e in report.echoes])
    fig.add(k, A, "A_echo", markers=True)
    if report.fit is not None:
        kk = np.linspace(k.min(), k.max(), 50)
        fig.add(kk, report.fit.a * np.exp(-report.fit.b * (report.t_ref + (kk + 1) * report.tau)),
                "a exp(-b t_k)", dashed=True)
        fig.notes.append(f"b = 2π × {report.fit.b / (2 * np.pi) / 1e3:.4g} kHz")
    return fig


def plot_scaling(N, y) -> Figure:
    fit = fit_power_law(N, y)
    fig = Figure(xlabel="N", ylabel="peak |α|²", title="Peak photon number vs N", logx=True, logy=True)
    fig.add(N, y, "peak", markers=True)
    NN = np.geomspace(min(N), max(N), 50)
    fig.add(NN, fit.a * NN**fit.b, "a N^b", dashed=True)
    fig.notes.append(f"b = {fit.b:.4f}")
    return fig


def _scaling_data(d: Path):
    if (d / "scaling.json").exists():
        data = json.loads((d / "scaling.json").read_text())
        return data["N"], data["y"]
    if (d / "results.json").exists():
        rows = [r for r in json.loads((d / "results.json").read_text()) if r.get("status") == "ok" and r.get("peak")]
        if rows and all("N_spins" in r for r in rows):
            return [r["N_spins"] for r in rows], [r["peak"][0] for r in rows]
    return None


def cmd_plot(args) -> int:
    d = Path(args.input)
    kind = args.kind
    try:
        if kind == "auto":
            if _scaling_data(d) is not None:
                kind = "scaling"
            elif (d / "trajectory.csv").exists():
                kind = "timeseries"
            elif (d / "echoes.json").exists():
                kind = "echoes"
            else:
                print(f"error: nothing to plot in {d}", file=sys.stderr)
                return EXIT_IO
        if kind == "timeseries":
            traj = Trajectory.from_csv(d / "trajectory.csv")
            seq = None
            if (d / "meta.json").exists():
                resolved = json.loads((d / "meta.json").read_text()).get("resolved", {})
                if "sequence" in resolved:
                    seq = PulseSequence.from_dict(resolved["sequence"])
            fig = plot_timeseries(traj, seq, logy=not args.linear)
        elif kind == "echoes":
            fig = plot_echoes(EchoReport.load_json(d / "echoes.json"))
        else:
            data = _scaling_data(d)
            if data is None:
                print(f"error: no scaling data (scaling.json or an N_spins sweep) in {d}", file=sys.stderr)
                return EXIT_IO
            fig = plot_scaling(*data)
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {d}: {exc}", file=sys.stderr)
        return EXIT_IO
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    fig.save(args.out)
    print(f"wrote {args.out}")
    return 0


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="echotrain", description="Spin-echo train simulations and analysis.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="nonlinear mean-field run (averaged over realizations)")
    s.add_argument("--config", required=True)
    s.add_argument("--out")
    s.add_argument("--nk", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--dt", type=float)
    s.add_argument("--realizations", type=int)
    s.add_argument("--plot", action="store_true")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("linear", help="time-domain oscillator (linear) model")
    s.add_argument("--config", required=True)
    s.add_argument("--out")
    s.add_argument("--nk", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--dt", type=float)
    s.add_argument("--plot", action="store_true")
    s.set_defaults(func=cmd_linear)

    s = sub.add_parser("analytic", help="closed-form first echo and regime classification")
    s.add_argument("--config", required=True)
    s.add_argument("--out")
    s.add_argument("--regime", action="store_true", help="print the regime name")
    s.add_argument("--spectrum", action="store_true", help="also invert the frequency-domain solution")
    s.add_argument("--plot", action="store_true")
    s.set_defaults(func=cmd_analytic)

    s = sub.add_parser("sweep", help="cartesian parameter sweep")
    s.add_argument("--config", required=True)
    s.add_argument("--out")
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("analyze", help="re-run echo analysis on stored trajectories")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--window-frac", dest="window_frac", type=float)
    s.add_argument("--noise-floor", dest="noise_floor", type=float)
    s.add_argument("--max-order", dest="max_order", type=int)
    s.add_argument("--guard", type=float)
    s.set_defaults(func=cmd_analyze)

    s = sub.add_parser("plot", help="render an SVG line plot")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--kind", choices=("auto", "timeseries", "echoes", "scaling"), default="auto")
    s.add_argument("--linear", action="store_true", help="linear ordinate for time series")
    s.set_defaults(func=cmd_plot)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BranchPointError as exc:
        print(f"branch point: {exc}", file=sys.stderr)
        return EXIT_BRANCH
    except NumericalInstabilityError as exc:
        print(f"numerical instability: {exc}", file=sys.stderr)
        return EXIT_UNSTABLE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        # invalid values that only surface once the run is assembled
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
