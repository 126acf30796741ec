"""Realization averaging and parameter sweeps."""

from __future__ import annotations

import copy
import csv
import itertools
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .analysis import EchoReport, detect_echoes
from .config import ConfigError, RunConfig, set_path
from .meanfield import NumericalInstabilityError, Trajectory, simulate
from .model import (
    PhysicalParams,
    SpinEnsemble,
    grid_ensemble,
    lattice_ensemble,
    quantile_ensemble,
    revival_time,
    sample_ensemble,
)

log = logging.getLogger(__name__)


class RealizationError(NumericalInstabilityError):
    """A realization aborted; ``seed`` identifies it."""

    def __init__(self, seed: int, cause: NumericalInstabilityError):
        super().__init__(f"realization with seed {seed} failed: {cause}", cause.step, cause.t)
        self.seed = seed


def build_ensemble(params: PhysicalParams, ensemble: dict, seed: int) -> SpinEnsemble:
    """Ensemble for one realization from the ``ensemble`` config section."""
    N_k, kind = ensemble["N_k"], ensemble["sampling"]
    if kind == "iid":
        return sample_ensemble(params, N_k, seed)
    if kind == "lattice":
        return lattice_ensemble(params, N_k, seed)
    if kind == "quantile":
        return quantile_ensemble(params, N_k)
    if kind == "grid":
        span = ensemble["span_fwhm"] * params.inhomogeneous_fwhm
        return grid_ensemble(params, N_k, span if span > 0 else 1.0, seed=seed)
    raise ConfigError(f"unknown sampling {kind!r}")


def valid_horizon(config: RunConfig, ensembles) -> float | None:
    """Latest time free of discretization revivals (uniform grids only)."""
    if config.ensemble["sampling"] != "grid" or config.params.inhomogeneous_fwhm == 0:
        return None
    return min(revival_time(e) for e in ensembles)


@dataclass
class AveragedRun:
    mean: Trajectory
    seeds: list[int]
    realizations: list[Trajectory] | None = None
    horizon: float | None = None

    @property
    def spread(self) -> np.ndarray | None:
        """Per-sample standard deviation of |α|² across retained realizations."""
        if not self.realizations or len(self.realizations) < 2:
            return None
        return np.std(np.stack([r.photon_number for r in self.realizations]), axis=0)


def _one(config: RunConfig, seed: int, ens: SpinEnsemble) -> Trajectory:
    try:
        return simulate(ens, config.params, config.sequence, config.integrator, config.record)
    except NumericalInstabilityError as exc:
        raise RealizationError(seed, exc) from exc


def run_averaged(
    config: RunConfig,
    R: int | None = None,
    base_seed: int | None = None,
    keep: bool | None = None,
    workers: int | None = None,
) -> AveragedRun:
    """Run realizations with seeds base_seed + i and average |α|² pointwise.

    The mean trajectory carries ``alpha`` = <α> (complex mean) and
    ``n_photons`` = <|α|²>; with ``averaging.observable = "complex_mean"`` the
    photon column is |<α>|² instead. Realizations are independent, so running
    them on several threads does not change the result.
    """
    avg = config.averaging
    R = avg["realizations"] if R is None else int(R)
    base_seed = avg["base_seed"] if base_seed is None else int(base_seed)
    keep = avg["keep_realizations"] if keep is None else keep
    workers = avg["workers"] if workers is None else int(workers)
    if R < 1:
        raise ValueError("R must be >= 1")
    seeds = [base_seed + i for i in range(R)]
    ensembles = [build_ensemble(config.params, config.ensemble, s) for s in seeds]
    if workers > 1 and R > 1:
        with ThreadPoolExecutor(max_workers=min(workers, R)) as pool:
            runs = list(pool.map(lambda se: _one(config, *se), zip(seeds, ensembles)))
    else:
        runs = [_one(config, s, e) for s, e in zip(seeds, ensembles)]

    first = runs[0]
    if R == 1:
        # |<α>|² and <|α|²> coincide for a single run
        mean = Trajectory(first.times, first.alpha.copy(), dict(first.bloch), copy.deepcopy(first.meta),
                          first.final_state)
    else:
        alphas = np.stack([r.alpha for r in runs])
        alpha_mean = alphas.mean(axis=0)
        if avg["observable"] == "photons":
            n = (alphas.real**2 + alphas.imag**2).mean(axis=0)
        else:
            n = alpha_mean.real**2 + alpha_mean.imag**2
        mean = Trajectory(first.times, alpha_mean, dict(first.bloch), copy.deepcopy(first.meta), None, n)
    mean.meta["seeds"] = seeds
    mean.meta["realizations"] = R
    mean.meta["observable"] = avg["observable"]
    horizon = valid_horizon(config, ensembles)
    mean.meta["revival_horizon"] = horizon
    return AveragedRun(mean, seeds, runs if keep else None, horizon)


def analyze_run(config: RunConfig, traj: Trajectory, horizon: float | None = None) -> EchoReport:
    return detect_echoes(traj, config.sequence, config.tau, config.params.kappa, config.analysis, t_valid=horizon)


# ------------------------------------------------------------------ sweeps


@dataclass(frozen=True)
class SweepSpec:
    base: RunConfig
    axes: tuple[tuple[str, tuple], ...] = ()
    name: str = "sweep"
    budget: int = 1000

    def __post_init__(self):
        object.__setattr__(self, "axes", tuple((p, tuple(v)) for p, v in self.axes))
        for path, values in self.axes:
            if not values:
                raise ValueError(f"axis {path!r} has no values")
            for v in values:
                if isinstance(v, float) and not math.isfinite(v):
                    raise ValueError(f"axis {path!r} has a non-finite value")
        if self.n_cells > self.budget:
            raise ValueError(f"sweep has {self.n_cells} cells, above the budget of {self.budget}")
        if not self.name or "/" in self.name:
            raise ValueError("sweep name must be a non-empty path component")
        # every cell must validate before anything runs
        for cell in self.cells():
            self.cell_config(cell)

    @classmethod
    def from_config(cls, config: RunConfig) -> "SweepSpec":
        sw = config.data["sweep"]
        return cls(config, tuple((a["path"], tuple(a["values"])) for a in sw["axes"]), sw["name"], sw["budget"])

    @property
    def n_cells(self) -> int:
        return math.prod(len(v) for _, v in self.axes) if self.axes else 1

    def cells(self) -> list[dict[str, object]]:
        paths = [p for p, _ in self.axes]
        return [dict(zip(paths, combo)) for combo in itertools.product(*(v for _, v in self.axes))]

    def cell_config(self, cell: dict) -> RunConfig:
        data = self.base.to_dict()
        for path, value in cell.items():
            set_path(data, path, value)
        return RunConfig.from_dict(data)


def cell_key(cell: dict) -> str:
    if not cell:
        return "base"
    parts = []
    for path, value in cell.items():
        leaf = path.split(".")[-1]
        text = json.dumps(value, sort_keys=True) if isinstance(value, dict) else repr(value)
        text = "".join(ch if ch.isalnum() or ch in "+-.e" else "_" for ch in text).strip("_")
        parts.append(f"{leaf}={text}")
    return "__".join(parts)


@dataclass
class SweepResult:
    name: str
    rows: list[dict] = field(default_factory=list)
    reports: dict[str, EchoReport] = field(default_factory=dict)
    trajectories: dict[str, Trajectory] = field(default_factory=dict)

    @property
    def failures(self) -> list[dict]:
        return [r for r in self.rows if r["status"] != "ok"]

    def write(self, directory: str | Path) -> Path:
        root = Path(directory)
        root.mkdir(parents=True, exist_ok=True)
        (root / "results.json").write_text(json.dumps(self.rows, indent=2, sort_keys=True) + "\n")
        keys = sorted({k for r in self.rows for k in r})
        with open(root / "results.csv", "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=keys, lineterminator="\n")
            w.writeheader()
            for r in self.rows:
                w.writerow({k: _csv_value(r.get(k)) for k in keys})
        return root


def _csv_value(v):
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, dict)):
        return json.dumps(v, sort_keys=True)
    return "" if v is None else v


def _summary(report: EchoReport) -> dict:
    e = report.echoes
    sp = report.spacings()
    return {
        "n_echoes": len(e),
        "t_peak": [x.t_peak for x in e],
        "peak": [x.peak for x in e],
        "A_echo": [x.A_echo for x in e],
        "mean_spacing": float(sp.mean()) if sp.size else None,
        "max_spacing_error": float(np.max(np.abs(sp - report.tau))) if sp.size else None,
        "echo1_peak_over_area": (e[0].peak / e[0].A_echo) if e and e[0].A_echo > 0 else None,
        "fit_b": report.fit.b if report.fit else None,
        "fit_a": report.fit.a if report.fit else None,
    }


def run_sweep(
    spec: SweepSpec,
    out_dir: str | Path | None = None,
    workers: int = 1,
    keep_trajectories: bool = False,
    write_meta=None,
) -> SweepResult:
    """Run every cell (run_averaged + echo detection) and collect a flat table.

    A failing cell is recorded with its error and the remaining cells still
    run. With ``out_dir`` the layout is
    ``<out_dir>/<name>/<cell-key>/{trajectory.csv, echoes.json, meta.json}``
    plus ``results.csv`` / ``results.json`` in ``<out_dir>/<name>``.
    ``write_meta(path, config, run)`` lets the caller control meta.json.
    """
    cells = spec.cells()

    def work(cell):
        key = cell_key(cell)
        row = {"cell": key, **{p.split(".")[-1]: v for p, v in cell.items()}}
        try:
            cfg = spec.cell_config(cell)
            run = run_averaged(cfg, workers=1)
            report = analyze_run(cfg, run.mean, run.horizon)
            row.update(_summary(report), status="ok", error=None)
            return key, row, cfg, run, report
        except (NumericalInstabilityError, ValueError) as exc:
            log.warning("sweep cell %s failed: %s", key, exc)
            row.update(status="failed", error=str(exc))
            return key, row, None, None, None

    if workers > 1 and len(cells) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(work, cells))
    else:
        outcomes = [work(c) for c in cells]

    result = SweepResult(spec.name)
    root = None if out_dir is None else Path(out_dir) / spec.name
    for key, row, cfg, run, report in outcomes:
        result.rows.append(row)
        if report is None:
            continue
        result.reports[key] = report
        if keep_trajectories:
            result.trajectories[key] = run.mean
        if root is not None:
            cell_dir = root / key
            cell_dir.mkdir(parents=True, exist_ok=True)
            run.mean.to_csv(cell_dir / "trajectory.csv")
            report.save_json(cell_dir / "echoes.json")
            if write_meta is not None:
                write_meta(cell_dir / "meta.json", cfg, run)
    if root is not None:
        result.write(root)
    return result
