"""Mean-field (Maxwell-Bloch) dynamics of a driven cavity coupled to frequency classes.

Equations of motion in the frame rotating at the drive frequency::

    dα/dt   = -(i δ_c + κ/2) α - i Σ_k w_k g_k s_k - i F e^{iφ}(t)
    ds_k/dt = -(i Δ_k + γ/2 + 2Γ) s_k + i g_k α z_k
    dz_k/dt = -γ (1 + z_k) + 2i g_k (α* s_k - α s_k*)

with s_k = <σ_-> and z_k = <σ_z> of class k. The 2Γ coherence decay follows
from a σ_z dephasing dissipator of rate Γ; the factor 2 is exposed as
``IntegratorSettings.dephasing_factor``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import _kernels
from .model import PhysicalParams, PulseSequence, SpinEnsemble

log = logging.getLogger(__name__)

MAX_BLOCH_RECORDS = 64


class NumericalInstabilityError(RuntimeError):
    """Raised when the integrator leaves the physical domain or produces NaN/inf."""

    def __init__(self, message: str, step: int, t: float):
        super().__init__(message)
        self.step = step
        self.t = t


@dataclass(frozen=True, eq=False)
class SystemState:
    alpha: complex
    s_minus: np.ndarray
    s_z: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "alpha", complex(self.alpha))
        object.__setattr__(self, "s_minus", np.array(self.s_minus, dtype=complex))
        object.__setattr__(self, "s_z", np.array(self.s_z, dtype=float))
        if self.s_minus.shape != self.s_z.shape or self.s_minus.ndim != 1:
            raise ValueError("s_minus and s_z must be 1-d arrays of equal length")

    @classmethod
    def ground(cls, n_classes: int) -> "SystemState":
        return cls(0j, np.zeros(n_classes, complex), -np.ones(n_classes), 0.0)

    def bloch_norm(self) -> np.ndarray:
        """4|s_-|^2 + s_z^2 per class (1 for a pure state)."""
        return 4.0 * np.abs(self.s_minus) ** 2 + self.s_z**2

    def excitation(self, ensemble: SpinEnsemble) -> float:
        """|α|^2 + Σ_k w_k (1 + z_k)/2, conserved without loss or drive."""
        return abs(self.alpha) ** 2 + float(
            math.fsum(ensemble.weights * (1.0 + self.s_z) / 2.0)
        )


@dataclass(frozen=True)
class IntegratorSettings:
    """Fixed-step integration controls.

    ``dt=None`` picks ``c_stab / fastest_rate`` and snaps it so the record
    interval is an integer number of steps. ``scheme="split"`` propagates the
    free precession and decay of each class exactly and applies RK4 to the
    rest (integrating-factor RK4).
    """

    dt: float | None = None
    c_stab: float = 0.3
    scheme: str = "rk4"
    eps_int: float = 1e-4
    dephasing_factor: float = 2.0

    def __post_init__(self):
        if self.scheme not in ("rk4", "split"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.dt is not None and not self.dt > 0:
            raise ValueError("dt must be > 0")
        if not self.c_stab > 0:
            raise ValueError("c_stab must be > 0")


@dataclass(frozen=True)
class RecordSettings:
    stride: float = 10e-9
    bloch_classes: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "bloch_classes", tuple(int(i) for i in self.bloch_classes))
        if not self.stride > 0:
            raise ValueError("record stride must be > 0")
        if len(self.bloch_classes) > MAX_BLOCH_RECORDS:
            raise ValueError(f"at most {MAX_BLOCH_RECORDS} classes can be recorded")


@dataclass(eq=False)
class Trajectory:
    times: np.ndarray
    alpha: np.ndarray
    bloch: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)
    final_state: SystemState | None = None
    # set for realization averages, where <|α|²> differs from |<α>|²
    n_photons: np.ndarray | None = None

    @property
    def photon_number(self) -> np.ndarray:
        if self.n_photons is not None:
            return self.n_photons
        return self.alpha.real**2 + self.alpha.imag**2

    @property
    def alpha_re(self) -> np.ndarray:
        return self.alpha.real

    @property
    def alpha_im(self) -> np.ndarray:
        return self.alpha.imag

    def __len__(self) -> int:
        return self.times.shape[0]

    def to_csv(self, path: str | Path) -> None:
        write_trajectory_csv(path, self.times, self.alpha, self.photon_number)

    def bloch_to_csv(self, directory: str | Path) -> list[Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        paths = []
        for idx, (sx, sy, sz) in sorted(self.bloch.items()):
            p = directory / f"bloch_{idx}.csv"
            np.savetxt(p, np.column_stack([self.times, sx, sy, sz]), delimiter=",",
                       header="t,sx,sy,sz", comments="", fmt="%.17g")
            paths.append(p)
        return paths

    def save_npz(self, path: str | Path) -> None:
        arrays = {"times": self.times, "alpha": self.alpha}
        if self.n_photons is not None:
            arrays["n_photons"] = self.n_photons
        for idx, (sx, sy, sz) in self.bloch.items():
            arrays[f"bloch_{idx}"] = np.stack([sx, sy, sz])
        np.savez(path, **arrays)

    @classmethod
    def load_npz(cls, path: str | Path) -> "Trajectory":
        with np.load(path) as data:
            bloch = {
                int(k.split("_")[1]): tuple(data[k]) for k in data.files if k.startswith("bloch_")
            }
            n = data["n_photons"] if "n_photons" in data.files else None
            return cls(times=data["times"], alpha=data["alpha"], bloch=bloch, n_photons=n)

    @classmethod
    def from_csv(cls, path: str | Path) -> "Trajectory":
        with open(path) as fh:
            header = fh.readline().strip()
        if header != "t,re_alpha,im_alpha,n_photons":
            raise ValueError(f"{path}: unexpected trajectory header {header!r}")
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        alpha = data[:, 1] + 1j * data[:, 2]
        n = data[:, 3]
        # keep the stored column only where it is not simply |α|²
        same = np.array_equal(n, alpha.real**2 + alpha.imag**2)
        return cls(times=data[:, 0], alpha=alpha, n_photons=None if same else n)


def write_trajectory_csv(path, times, alpha, n_photons) -> None:
    np.savetxt(
        path,
        np.column_stack([times, np.real(alpha), np.imag(alpha), n_photons]),
        delimiter=",",
        header="t,re_alpha,im_alpha,n_photons",
        comments="",
        fmt="%.17g",
    )


def derivative(
    state: SystemState,
    ensemble: SpinEnsemble,
    params: PhysicalParams,
    drive: complex = 0j,
    dephasing_factor: float = 2.0,
) -> SystemState:
    """Right-hand side of the mean-field equations, returned as a state-shaped object."""
    a, s, z = state.alpha, state.s_minus, state.s_z
    if not (np.isfinite(a) and np.all(np.isfinite(s)) and np.all(np.isfinite(z))):
        raise ValueError("state contains non-finite values")
    if not np.isfinite(drive):
        raise ValueError("drive must be finite")
    if s.shape[0] != len(ensemble):
        raise ValueError("state and ensemble have different numbers of classes")
    g, w, D = ensemble.couplings, ensemble.weights, ensemble.detunings
    da = -(1j * params.delta_c + 0.5 * params.kappa) * a - 1j * np.sum(w * g * s) - 1j * drive
    decay = 0.5 * params.gamma + dephasing_factor * params.Gamma_deph
    ds = -(1j * D + decay) * s + 1j * g * a * z
    dz = -params.gamma * (1.0 + z) - 4.0 * g * (np.conj(a) * s).imag
    return SystemState(da, ds, dz, state.t)


def fastest_rate(ensemble: SpinEnsemble, params: PhysicalParams, seq: PulseSequence | None) -> float:
    """Largest frequency scale the integrator has to resolve (rad/s)."""
    collective = math.sqrt(math.fsum(ensemble.weights * ensemble.couplings**2))
    rates = [
        ensemble.max_abs_detuning,
        collective,
        0.5 * params.kappa,
        abs(params.delta_c),
        params.gamma + 4.0 * params.Gamma_deph,
    ]
    if seq is not None and seq.pulses:
        # Rabi frequency reached by a field growing linearly over the longest pulse
        peak_alpha = max(abs(p.amplitude) * p.duration for p in seq.pulses)
        rates.append(2.0 * float(np.max(np.abs(ensemble.couplings))) * peak_alpha)
    return max(rates) or 1.0


def _step_plan(t_end: float, dt_req: float, stride_t: float) -> tuple[float, int, int]:
    """Return (dt, steps per record, total steps) with stride_t an exact multiple of dt."""
    per_record = max(1, math.ceil(stride_t / dt_req - 1e-9))
    dt = stride_t / per_record
    n_rec = math.ceil(t_end / stride_t - 1e-9)
    return dt, per_record, n_rec * per_record


def drive_per_step(seq: PulseSequence, dt: float, nsteps: int) -> np.ndarray:
    """Step-averaged complex drive; exact for pulse edges that fall on the grid."""
    edges = np.arange(nsteps + 1) * dt
    out = np.zeros(nsteps, dtype=complex)
    for p in seq.pulses:
        lo = np.clip(edges[:-1], p.t_start, p.t_end)
        hi = np.clip(edges[1:], p.t_start, p.t_end)
        out += (hi - lo) / dt * p.complex_amplitude
    return out


def _resolve_dt(integrator, ensemble, params, seq, stride_t):
    if integrator.dt is None:
        if integrator.scheme == "split":
            return integrator.c_stab / fastest_rate_without_detuning(ensemble, params, seq)
        return integrator.c_stab / fastest_rate(ensemble, params, seq)
    if integrator.scheme == "rk4" and ensemble.max_abs_detuning > 0:
        limit = integrator.c_stab / ensemble.max_abs_detuning
        if integrator.dt > limit * (1 + 1e-12):
            raise ValueError(
                f"dt={integrator.dt:.3g} s does not resolve the largest detuning; "
                f"need dt <= {limit:.3g} s (c_stab={integrator.c_stab}) or scheme='split'"
            )
    return integrator.dt


def fastest_rate_without_detuning(ensemble, params, seq):
    zero = SpinEnsemble(np.zeros(len(ensemble)), ensemble.couplings, ensemble.weights)
    return fastest_rate(zero, params, seq)


def simulate(
    ensemble: SpinEnsemble,
    params: PhysicalParams,
    seq: PulseSequence,
    integrator: IntegratorSettings = IntegratorSettings(),
    record: RecordSettings = RecordSettings(),
    initial_state: SystemState | None = None,
) -> Trajectory:
    """Integrate the mean-field equations over [0, seq.t_end].

    The spins start in the ground state (z=-1, s=0) with an empty cavity unless
    ``initial_state`` is given. Raises :class:`NumericalInstabilityError` if
    any |z_k| exceeds 1 + 10*eps_int or a value becomes non-finite.
    """
    nk = len(ensemble)
    for idx in record.bloch_classes:
        if not 0 <= idx < nk:
            raise ValueError(f"bloch class index {idx} out of range for {nk} classes")
    state = initial_state if initial_state is not None else SystemState.ground(nk)
    if state.s_minus.shape[0] != nk:
        raise ValueError("initial state does not match the ensemble size")
    t0 = state.t

    dt_req = _resolve_dt(integrator, ensemble, params, seq, record.stride)
    dt, per_record, nsteps = _step_plan(seq.t_end - t0, dt_req, record.stride)
    drive = drive_per_step(seq.shifted(-t0), dt, nsteps) if seq.pulses else np.zeros(nsteps, complex)

    decay = 0.5 * params.gamma + integrator.dephasing_factor * params.Gamma_deph
    L = -(1j * ensemble.detunings + decay)
    if integrator.scheme == "split":
        lin = np.zeros(nk, complex)
        E, E2 = np.exp(L * dt), np.exp(L * dt / 2)
    else:
        lin = L.astype(complex)
        E = E2 = np.ones(nk, complex)
    g = np.ascontiguousarray(ensemble.couplings, dtype=float)
    wg = np.ascontiguousarray(ensemble.weights * ensemble.couplings, dtype=float)
    rec_idx = np.array(record.bloch_classes, dtype=np.int64)
    z_limit = 1.0 + 10.0 * integrator.eps_int

    log.debug("mean-field run: N_k=%d dt=%.3g s steps=%d scheme=%s", nk, dt, nsteps, integrator.scheme)
    a_rec, s_rec, z_rec, status, nfail, a, s, z = _kernels.integrate_meanfield(
        lin, E, E2, g, wg, complex(-(1j * params.delta_c + 0.5 * params.kappa)), float(params.gamma),
        state.alpha, state.s_minus, state.s_z, dt, nsteps, drive, per_record, rec_idx, z_limit,
    )
    if status != _kernels.STATUS_OK:
        t_fail = t0 + nfail * dt
        raise NumericalInstabilityError(
            f"integration left the Bloch ball or diverged at step {nfail} (t={t_fail:.6g} s, "
            f"dt={dt:.3g} s); reduce dt or c_stab",
            nfail,
            t_fail,
        )
    times = t0 + np.arange(a_rec.shape[0]) * per_record * dt
    bloch = {
        idx: (2.0 * s_rec[:, j].real, -2.0 * s_rec[:, j].imag, z_rec[:, j].copy())
        for j, idx in enumerate(record.bloch_classes)
    }
    meta = {
        "params": params.to_dict(),
        "ensemble_seed": ensemble.seed,
        "n_classes": nk,
        "sequence": seq.to_dict(),
        "integrator": {
            "dt": dt,
            "scheme": integrator.scheme,
            "c_stab": integrator.c_stab,
            "eps_int": integrator.eps_int,
            "dephasing_factor": integrator.dephasing_factor,
        },
        "record_stride": record.stride,
    }
    final = SystemState(a, s, z, t0 + nsteps * dt)
    return Trajectory(times=times, alpha=a_rec, bloch=bloch, meta=meta, final_state=final)


def ideal_initial_state(ensemble: SpinEnsemble, tau: float, beta: float) -> SystemState:
    """Spins tipped by polar amplitude beta with phases that refocus at t = tau."""
    if not 0 < beta <= 1:
        raise ValueError(f"beta must lie in (0, 1], got {beta!r}")
    s = 0.5 * beta * np.exp(1j * ensemble.detunings * tau)
    z = np.full(len(ensemble), -math.sqrt(max(0.0, 1.0 - beta**2)))
    return SystemState(0j, s, z, 0.0)


def simulate_ideal_init(
    ensemble: SpinEnsemble,
    params: PhysicalParams,
    tau: float,
    beta: float,
    integrator: IntegratorSettings = IntegratorSettings(),
    record: RecordSettings = RecordSettings(),
    t_end: float | None = None,
) -> Trajectory:
    """Free evolution from the ideally refocusing state; no drive pulses."""
    t_end = 2.0 * tau if t_end is None else t_end
    if t_end < 2.0 * tau:
        raise ValueError("t_end must be >= 2*tau")
    seq = PulseSequence((), t_end)
    traj = simulate(ensemble, params, seq, integrator, record, ideal_initial_state(ensemble, tau, beta))
    traj.meta.update({"tau": tau, "beta": beta, "mode": "ideal_init"})
    return traj


def convergence_check(
    ensemble: SpinEnsemble,
    params: PhysicalParams,
    seq: PulseSequence,
    integrator: IntegratorSettings = IntegratorSettings(),
    record: RecordSettings = RecordSettings(),
    initial_state: SystemState | None = None,
) -> float:
    """Max |Δ n_photons| / max n_photons between runs at dt and dt/2."""
    first = simulate(ensemble, params, seq, integrator, record, initial_state)
    dt = first.meta["integrator"]["dt"]
    second = simulate(ensemble, params, seq, replace(integrator, dt=dt / 2), record, initial_state)
    n1, n2 = first.photon_number, second.photon_number
    scale = float(np.max(n2))
    if scale == 0.0:
        return float(np.max(np.abs(n1 - n2)))
    return float(np.max(np.abs(n1 - n2)) / scale)
