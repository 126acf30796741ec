"""Echo detection, per-echo photon counts and decay/scaling fits."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .meanfield import Trajectory
from .model import PulseSequence


@dataclass(frozen=True)
class AnalysisSettings:
    """Echo-window construction.

    ``guard`` is the ring-down time excluded after each pulse; ``None`` means
    5/κ. ``noise_floor`` is relative to the largest |α|² outside pulses and
    their guards.
    """

    window_frac: float = 0.45
    max_order: int = 10
    noise_floor: float = 1e-6
    guard: float | None = None

    def __post_init__(self):
        if not 0 < self.window_frac <= 0.5:
            raise ValueError("window_frac must lie in (0, 0.5] so windows stay disjoint")
        if self.max_order < 1:
            raise ValueError("max_order must be >= 1")
        if not self.noise_floor >= 0:
            raise ValueError("noise_floor must be >= 0")
        if self.guard is not None and not self.guard >= 0:
            raise ValueError("guard must be >= 0")

    def resolved_guard(self, kappa: float | None) -> float:
        if self.guard is not None:
            return self.guard
        return 5.0 / kappa if kappa else 0.0


@dataclass(frozen=True)
class Echo:
    order: int
    t_lo: float
    t_hi: float
    t_peak: float
    peak: float
    A_echo: float


@dataclass(frozen=True)
class ExponentialFit:
    a: float
    b: float
    residual: float


@dataclass(frozen=True)
class ScalingFit:
    a: float
    b: float
    N: tuple[float, ...] = ()
    y: tuple[float, ...] = ()

    def to_dict(self) -> dict:
        return {"a": self.a, "b": self.b, "N": list(self.N), "y": list(self.y)}


@dataclass
class EchoReport:
    echoes: list[Echo]
    tau: float
    t_ref: float
    kappa: float
    settings: AnalysisSettings
    guard: float
    floor: float
    fit: ExponentialFit | None = None
    fit_order: ExponentialFit | None = None
    extra: dict = field(default_factory=dict)

    @property
    def n_echoes(self) -> int:
        return len(self.echoes)

    def spacings(self) -> np.ndarray:
        return np.diff([e.t_peak for e in self.echoes])

    def to_dict(self) -> dict:
        return {
            "echoes": [asdict(e) for e in self.echoes],
            "tau": self.tau,
            "t_ref": self.t_ref,
            "kappa": self.kappa,
            "settings": asdict(self.settings),
            "guard": self.guard,
            "floor": self.floor,
            "fit": None if self.fit is None else asdict(self.fit),
            "fit_order": None if self.fit_order is None else asdict(self.fit_order),
            "extra": self.extra,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EchoReport":
        return cls(
            echoes=[Echo(**e) for e in d["echoes"]],
            tau=d["tau"],
            t_ref=d["t_ref"],
            kappa=d["kappa"],
            settings=AnalysisSettings(**d["settings"]),
            guard=d["guard"],
            floor=d["floor"],
            fit=None if d.get("fit") is None else ExponentialFit(**d["fit"]),
            fit_order=None if d.get("fit_order") is None else ExponentialFit(**d["fit_order"]),
            extra=d.get("extra", {}),
        )

    def save_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load_json(cls, path: str | Path) -> "EchoReport":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["k", "t_peak", "A_echo"])
            for e in self.echoes:
                w.writerow([e.order, repr(e.t_peak), repr(e.A_echo)])


def _excluded_intervals(seq: PulseSequence, guard: float) -> list[tuple[float, float]]:
    return [(p.t_start, p.t_end + guard) for p in seq.pulses]


def _outside_mask(times: np.ndarray, excluded) -> np.ndarray:
    mask = np.ones(times.shape, dtype=bool)
    for lo, hi in excluded:
        mask &= ~((times >= lo) & (times < hi))
    return mask


def echo_window(center: float, half: float, excluded) -> tuple[float, float]:
    """[center - half, center + half] with pulse intervals clipped off its edges."""
    lo, hi = center - half, center + half
    for a, b in excluded:
        if b <= lo or a >= hi:
            continue
        if a <= lo and b >= hi:
            raise ValueError(f"echo window around t={center:.6g} s lies entirely inside a pulse or its guard")
        if a > lo and b < hi:
            raise ValueError(f"a pulse at [{a:.6g}, {b:.6g}) s splits the echo window around t={center:.6g} s")
        if a <= lo:
            lo = b
        else:
            hi = a
    if not hi > lo:
        raise ValueError(f"echo window around t={center:.6g} s is empty after clipping")
    return lo, hi


def integrate_echo(traj: Trajectory, window: tuple[float, float], kappa: float) -> float:
    """κ ∫ |α|² dt over ``window`` by the trapezoidal rule on the recorded samples.

    The integrand is linearly interpolated at the window edges, so the result
    is additive over splits of a window.
    """
    t = traj.times
    lo, hi = window
    if len(t) < 2:
        raise ValueError("trajectory has fewer than two samples")
    if lo < t[0] - 1e-15 or hi > t[-1] + 1e-15 or not hi >= lo:
        raise ValueError(f"window [{lo}, {hi}] lies outside the data range [{t[0]}, {t[-1]}]")
    y = traj.photon_number
    inside = (t > lo) & (t < hi)
    tt = np.concatenate([[lo], t[inside], [hi]])
    yy = np.concatenate([[np.interp(lo, t, y)], y[inside], [np.interp(hi, t, y)]])
    return float(kappa * np.trapezoid(yy, tt))


def detect_echoes(
    traj: Trajectory,
    seq: PulseSequence,
    tau: float,
    kappa: float,
    settings: AnalysisSettings = AnalysisSettings(),
    fit: bool = True,
    t_valid: float | None = None,
) -> EchoReport:
    """Find the echoes at t_ref + (k+1)τ, k = 1..max_order, t_ref the start of the first pulse.

    Detection stops at the first window that runs past the data (or past
    ``t_valid``, e.g. a discretization revival), whose peak is below the
    noise floor, or whose maximum sits on the window edge.
    """
    if len(traj) == 0:
        raise ValueError("empty trajectory")
    if not tau > 0:
        raise ValueError("tau must be > 0")
    if len(seq.pulses) < 2:
        raise ValueError("echo detection needs a sequence of at least two pulses")
    t = traj.times
    y = traj.photon_number
    guard = settings.resolved_guard(kappa)
    excluded = _excluded_intervals(seq, guard)
    t_ref = seq.pulses[0].t_start
    outside = _outside_mask(t, excluded)
    gmax = float(y[outside].max()) if outside.any() else 0.0
    floor = settings.noise_floor * gmax
    half = settings.window_frac * tau

    echoes: list[Echo] = []
    for k in range(1, settings.max_order + 1):
        center = t_ref + (k + 1) * tau
        if center + half > t[-1] or (t_valid is not None and center + half > t_valid):
            break
        lo, hi = echo_window(center, half, excluded)
        if echoes:
            # touching windows (window_frac = 0.5) may overlap by rounding
            lo = max(lo, echoes[-1].t_hi)
        sel = (t >= lo) & (t <= hi)
        if not sel.any():
            break
        idx = np.flatnonzero(sel)
        i = idx[np.argmax(y[idx])]
        peak = float(y[i])
        if not peak > floor or peak == 0.0:
            break
        if i == idx[0] or i == idx[-1]:
            # a maximum on the window edge is a tail (ring-down), not a refocused echo
            break
        echoes.append(Echo(k, lo, hi, float(t[i]), peak, integrate_echo(traj, (lo, hi), kappa)))

    report = EchoReport(echoes, tau, t_ref, kappa, settings, guard, floor)
    if t_valid is not None:
        report.extra["t_valid"] = t_valid
    if fit and len(echoes) >= 2 and all(e.A_echo > 0 for e in echoes):
        orders = np.array([e.order for e in echoes], dtype=float)
        A = np.array([e.A_echo for e in echoes])
        report.fit = fit_exponential(t_ref + (orders + 1) * tau, A)
        report.fit_order = fit_exponential(orders, A)
    return report


def _loglinear(x, y) -> tuple[float, float, float]:
    X = np.column_stack([np.ones_like(x), x])
    ly = np.log(y)
    coef, *_ = np.linalg.lstsq(X, ly, rcond=None)
    rms = float(np.sqrt(np.mean((X @ coef - ly) ** 2)))
    return float(coef[0]), float(coef[1]), rms


def fit_exponential(x, A) -> ExponentialFit:
    """Fit A = a exp(-b x) by least squares on (x, ln A).

    With x the echo times, b is a rate in rad/s; with x the echo order it is
    the per-echo log decrement.
    """
    x = np.asarray(x, dtype=float)
    A = np.asarray(A, dtype=float)
    if x.shape != A.shape or x.ndim != 1:
        raise ValueError("x and A must be 1-d arrays of equal length")
    if len(x) < 2:
        raise ValueError("an exponential fit needs at least two points")
    if not np.all(A > 0) or not np.all(np.isfinite(A)):
        raise ValueError("all amplitudes must be finite and > 0")
    # centring the abscissa keeps the normal equations well conditioned
    x0 = float(x.mean())
    c0, c1, rms = _loglinear(x - x0, A)
    return ExponentialFit(a=math.exp(c0 - c1 * x0), b=-c1, residual=rms)


def fit_power_law(N, y) -> ScalingFit:
    """Fit y = a N^b by least squares on (ln N, ln y)."""
    N = np.asarray(N, dtype=float)
    y = np.asarray(y, dtype=float)
    if N.shape != y.shape or N.ndim != 1:
        raise ValueError("N and y must be 1-d arrays of equal length")
    if len(N) < 3:
        raise ValueError("a power-law fit needs at least three points")
    if not (np.all(N > 0) and np.all(y > 0)):
        raise ValueError("all N and y must be > 0")
    lN = np.log(N)
    m = float(lN.mean())
    c0, c1, _ = _loglinear(lN - m, y)
    return ScalingFit(a=math.exp(c0 - c1 * m), b=c1, N=tuple(N.tolist()), y=tuple(y.tolist()))
