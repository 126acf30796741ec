"""Domain types shared by the simulators: physical parameters, spin ensembles
and drive-pulse sequences.

Every rate, coupling, detuning and drive amplitude is an angular frequency in
rad/s. Use :func:`two_pi_hz` to convert values quoted as ``2*pi x f``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

FWHM_PER_SIGMA = math.sqrt(8.0 * math.log(2.0))


def two_pi_hz(f_hz: float) -> float:
    """Convert a frequency in Hz to an angular frequency in rad/s."""
    return 2.0 * math.pi * f_hz


class Distribution(str, Enum):
    GAUSSIAN = "gaussian"
    LORENTZIAN = "lorentzian"


@dataclass(frozen=True)
class PhysicalParams:
    """Rates and couplings of the driven spin-cavity model (rad/s)."""

    kappa: float
    gamma: float = 0.0
    Gamma_deph: float = 0.0
    g_single: float = 0.0
    N_spins: float = 1.0
    delta_c: float = 0.0
    inhomogeneous_fwhm: float = 0.0
    distribution: Distribution = Distribution.GAUSSIAN

    def __post_init__(self):
        object.__setattr__(self, "distribution", Distribution(self.distribution))
        for name in ("kappa", "gamma", "Gamma_deph", "inhomogeneous_fwhm"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {value!r}")
        if not math.isfinite(self.g_single) or not math.isfinite(self.delta_c):
            raise ValueError("g_single and delta_c must be finite")
        if not self.N_spins >= 1:
            raise ValueError(f"N_spins must be >= 1, got {self.N_spins!r}")

    @property
    def sigma(self) -> float:
        """Gaussian standard deviation of the detuning distribution."""
        return self.inhomogeneous_fwhm / FWHM_PER_SIGMA

    def density(self, delta):
        """Normalized detuning probability density f(delta)."""
        delta = np.asarray(delta, dtype=float)
        if self.distribution is Distribution.GAUSSIAN:
            s = self.sigma
            return np.exp(-0.5 * (delta / s) ** 2) / (math.sqrt(2 * math.pi) * s)
        hw = 0.5 * self.inhomogeneous_fwhm
        return (hw / math.pi) / (delta**2 + hw**2)

    def log_density_shape(self, delta):
        """ln f(delta) up to an additive constant; finite for any width > 0."""
        x = np.asarray(delta, dtype=float) / self.inhomogeneous_fwhm
        if self.distribution is Distribution.GAUSSIAN:
            return -4.0 * math.log(2.0) * x**2
        return -np.log1p(4.0 * x**2)

    def replace(self, **changes) -> "PhysicalParams":
        data = self.to_dict()
        data.update(changes)
        return PhysicalParams(**data)

    def to_dict(self) -> dict:
        data = asdict(self)
        data["distribution"] = self.distribution.value
        return data


@dataclass(frozen=True, eq=False)
class SpinEnsemble:
    """Discretized frequency classes: detuning, coupling and spin count per class."""

    detunings: np.ndarray
    couplings: np.ndarray
    weights: np.ndarray
    seed: int = 0
    params: PhysicalParams | None = None

    def __post_init__(self):
        arrays = []
        for name in ("detunings", "couplings", "weights"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
            arrays.append(arr)
        n = arrays[0].shape
        if len(n) != 1 or n[0] < 1:
            raise ValueError("an ensemble needs at least one frequency class")
        if any(a.shape != n for a in arrays):
            raise ValueError("detunings, couplings and weights must have equal length")
        if not all(np.all(np.isfinite(a)) for a in arrays):
            raise ValueError("ensemble arrays must be finite")
        if np.any(self.weights < 0):
            raise ValueError("class weights must be non-negative")

    def __len__(self) -> int:
        return self.detunings.shape[0]

    @property
    def n_classes(self) -> int:
        return len(self)

    @property
    def total_spins(self) -> float:
        return float(math.fsum(self.weights))

    @property
    def g_eff(self) -> float:
        """RMS single-spin coupling, sqrt(sum_k w_k g_k^2 / N)."""
        return math.sqrt(math.fsum(self.weights * self.couplings**2) / self.total_spins)

    @property
    def max_abs_detuning(self) -> float:
        return float(np.max(np.abs(self.detunings)))

    def to_dict(self) -> dict:
        return {
            "detunings": self.detunings.tolist(),
            "weights": self.weights.tolist(),
            "couplings": self.couplings.tolist(),
            "seed": self.seed,
            "params": None if self.params is None else self.params.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SpinEnsemble":
        params = data.get("params")
        return cls(
            detunings=np.asarray(data["detunings"], dtype=float),
            couplings=np.asarray(data["couplings"], dtype=float),
            weights=np.asarray(data["weights"], dtype=float),
            seed=int(data.get("seed", 0)),
            params=None if params is None else PhysicalParams(**params),
        )

    def save_json(self, path: str | Path) -> None:
        # repr-precision floats so the archive round-trips bit-exactly
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load_json(cls, path: str | Path) -> "SpinEnsemble":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _check_count(N_k: int) -> int:
    if int(N_k) != N_k or N_k < 1:
        raise ValueError(f"N_k must be a positive integer, got {N_k!r}")
    return int(N_k)


def sample_ensemble(params: PhysicalParams, N_k: int, seed: int) -> SpinEnsemble:
    """Draw N_k detunings i.i.d. from the inhomogeneous distribution.

    Uses numpy's PCG64 generator, so the sample is reproducible from
    ``(params, N_k, seed)`` on every platform. Weights are uniform (N/N_k).
    """
    N_k = _check_count(N_k)
    rng = np.random.default_rng(seed)
    if params.inhomogeneous_fwhm == 0:
        detunings = np.zeros(N_k)
    elif params.distribution is Distribution.GAUSSIAN:
        detunings = rng.normal(0.0, params.sigma, size=N_k)
    else:
        detunings = 0.5 * params.inhomogeneous_fwhm * rng.standard_cauchy(size=N_k)
    return SpinEnsemble(
        detunings=detunings,
        couplings=np.full(N_k, params.g_single),
        weights=np.full(N_k, params.N_spins / N_k),
        seed=int(seed),
        params=params,
    )


def grid_ensemble(params: PhysicalParams, N_k: int, span: float, seed: int | None = None) -> SpinEnsemble:
    """Uniform grid of N_k cells over [-span, span], weighted by the density.

    Classes sit at the cell centres, or at a random offset u ~ U(0, 1) within
    every cell when ``seed`` is given. Uniform spacing δ = 2 span / N_k puts the
    first discretization revival at 2π/δ for every class at once, so the
    signal is free of sampling background before that time.
    """
    N_k = _check_count(N_k)
    if not span > 0:
        raise ValueError(f"span must be > 0, got {span!r}")
    if params.inhomogeneous_fwhm == 0:
        detunings = np.zeros(N_k)
        weights = np.full(N_k, params.N_spins / N_k)
    else:
        u = 0.5 if seed is None else float(np.random.default_rng(seed).random())
        step = 2.0 * span / N_k
        detunings = -span + (np.arange(N_k) + u) * step
        # log-space keeps very narrow or very wide grids finite
        logd = params.log_density_shape(detunings)
        dens = np.exp(logd - logd.max())
        weights = params.N_spins * dens / math.fsum(dens)
    return SpinEnsemble(
        detunings=detunings,
        couplings=np.full(N_k, params.g_single),
        weights=weights,
        seed=0 if seed is None else int(seed),
        params=params,
    )


def revival_time(ensemble: SpinEnsemble) -> float:
    """2π / (largest class spacing): a conservative bound on the first discretization revival.

    Exact for :func:`grid_ensemble`; for non-uniform ensembles the bound is
    set by the sparse tails.
    """
    d = np.diff(np.sort(ensemble.detunings))
    d = d[d > 0]
    return math.inf if d.size == 0 else 2.0 * math.pi / float(d.max())


def _inverse_cdf(params: PhysicalParams, q: np.ndarray) -> np.ndarray:
    from scipy import special

    if params.inhomogeneous_fwhm == 0:
        return np.zeros_like(q)
    if params.distribution is Distribution.GAUSSIAN:
        return params.sigma * math.sqrt(2.0) * special.erfinv(2.0 * q - 1.0)
    return 0.5 * params.inhomogeneous_fwhm * np.tan(np.pi * (q - 0.5))


def lattice_ensemble(params: PhysicalParams, N_k: int, seed: int) -> SpinEnsemble:
    """Randomly shifted quantile lattice: classes at F^-1((k + u)/N_k), u ~ U(0, 1) from ``seed``.

    Each draw is an unbiased sample of the distribution (every class is
    marginally distributed as f), but the stratification suppresses the
    1/sqrt(N_k) speckle of i.i.d. draws. Different seeds give different
    ensembles, so seed averaging still has meaning.
    """
    N_k = _check_count(N_k)
    u = np.random.default_rng(seed).random()
    u = min(max(u, 1e-12), 1.0 - 1e-12)
    detunings = _inverse_cdf(params, (np.arange(N_k) + u) / N_k)
    return SpinEnsemble(
        detunings=detunings,
        couplings=np.full(N_k, params.g_single),
        weights=np.full(N_k, params.N_spins / N_k),
        seed=int(seed),
        params=params,
    )


def quantile_ensemble(params: PhysicalParams, N_k: int) -> SpinEnsemble:
    """Deterministic equal-weight ensemble at the mid-point quantiles of the distribution.

    Classes sit at F^-1((k + 1/2)/N_k). This has no periodic revivals (unlike a
    uniform grid) and far smaller sampling noise than i.i.d. draws.
    """
    N_k = _check_count(N_k)
    q = (np.arange(N_k) + 0.5) / N_k
    detunings = _inverse_cdf(params, q)
    # enforce exact symmetry about zero
    detunings = 0.5 * (detunings - detunings[::-1])
    return SpinEnsemble(
        detunings=detunings,
        couplings=np.full(N_k, params.g_single),
        weights=np.full(N_k, params.N_spins / N_k),
        seed=0,
        params=params,
    )


@dataclass(frozen=True)
class Pulse:
    """Square drive pulse; the field equation sees F*exp(i*phase) inside [t_start, t_end)."""

    t_start: float
    duration: float
    amplitude: float
    phase: float = 0.0

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError(f"pulse duration must be > 0, got {self.duration!r}")
        if not all(math.isfinite(v) for v in (self.t_start, self.amplitude, self.phase)):
            raise ValueError("pulse fields must be finite")

    @property
    def t_end(self) -> float:
        return self.t_start + self.duration

    @property
    def complex_amplitude(self) -> complex:
        return self.amplitude * complex(math.cos(self.phase), math.sin(self.phase))


@dataclass(frozen=True)
class PulseSequence:
    pulses: tuple[Pulse, ...]
    t_end: float

    def __post_init__(self):
        pulses = tuple(self.pulses)
        object.__setattr__(self, "pulses", pulses)
        for a, b in zip(pulses, pulses[1:]):
            if b.t_start < a.t_end:
                raise ValueError(
                    f"pulses overlap or are out of order: [{a.t_start}, {a.t_end}) "
                    f"and [{b.t_start}, {b.t_end})"
                )
        last = pulses[-1].t_end if pulses else 0.0
        if not self.t_end > last:
            raise ValueError(f"t_end={self.t_end} must exceed the last pulse end {last}")

    def drive(self, t: float) -> complex:
        for p in self.pulses:
            if p.t_start <= t < p.t_end:
                return p.complex_amplitude
        return 0j

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(starts, ends, complex amplitudes) for the integration kernels."""
        starts = np.array([p.t_start for p in self.pulses], dtype=float)
        ends = np.array([p.t_end for p in self.pulses], dtype=float)
        amps = np.array([p.complex_amplitude for p in self.pulses], dtype=complex)
        return starts, ends, amps

    def shifted(self, dt: float) -> "PulseSequence":
        return PulseSequence(
            tuple(Pulse(p.t_start + dt, p.duration, p.amplitude, p.phase) for p in self.pulses),
            self.t_end + dt,
        )

    def to_dict(self) -> dict:
        return {"pulses": [asdict(p) for p in self.pulses], "t_end": self.t_end}

    @classmethod
    def from_dict(cls, data: dict) -> "PulseSequence":
        return cls(tuple(Pulse(**p) for p in data["pulses"]), data["t_end"])


def hahn_sequence(
    tau: float,
    t1: float,
    d1: float,
    d2: float,
    F: float,
    phase1: float = 0.0,
    phase2: float = 0.0,
    t_end: float | None = None,
) -> PulseSequence:
    """Two-pulse Hahn sequence; tau runs from the end of pulse 1 to the start of pulse 2."""
    if tau < 0:
        raise ValueError(f"tau must be >= 0, got {tau!r}")
    p1 = Pulse(t1, d1, F, phase1)
    p2 = Pulse(p1.t_end + tau, d2, F, phase2)
    if t_end is None:
        t_end = p2.t_end + 5.0 * max(tau, d2)
    return PulseSequence((p1, p2), t_end)


def cooperativity(g_eff: float, kappa: float, Gamma_width: float) -> float:
    """Collective cooperativity 4 g_eff^2 / (kappa * Gamma_width)."""
    if kappa <= 0 or Gamma_width <= 0:
        raise ValueError("kappa and Gamma_width must be > 0")
    return 4.0 * g_eff**2 / (kappa * Gamma_width)


def linewidth_from_T2(T2: float) -> float:
    """Homogeneous linewidth 1/T2 in rad/s."""
    if not T2 > 0:
        raise ValueError(f"T2 must be > 0, got {T2!r}")
    return 1.0 / T2


def ensemble_from_arrays(
    detunings: Sequence[float], weights: Sequence[float], couplings: Sequence[float] | float
) -> SpinEnsemble:
    detunings = np.asarray(detunings, dtype=float)
    couplings = np.broadcast_to(np.asarray(couplings, dtype=float), detunings.shape)
    return SpinEnsemble(detunings, couplings, np.asarray(weights, dtype=float))
