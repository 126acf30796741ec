"""Linear (Holstein-Primakoff) theory of the first echo.

Spins are replaced by oscillators prepared with amplitude beta*exp(i Δ τ) at
t = 0, so that they rephase at t = τ. Three independent routes to the cavity
field are provided:

* :func:`eval_echo_closed_form` -- the two-branch closed form for a Lorentzian
  line with γ = 0,
* :func:`spectrum_inversion` -- the frequency-domain solution with the spin sum
  replaced by a quadrature over the detuning density, transformed back to time,
* :func:`simulate_linear_hp` -- direct time stepping of a discretized ensemble.

The closed form is kept in its published normalization: it lacks the factor
g_eff of the frequency-domain solution and carries an extra 1/sqrt(2π), and its
two branches differ by an overall sign at t = τ. :func:`physical_scale` gives
the factor that maps |a| of the closed form onto the other two routes.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import asdict, dataclass
from enum import Enum

import numpy as np
from scipy import integrate, signal, special

from . import _kernels
from .meanfield import NumericalInstabilityError, Trajectory
from .model import FWHM_PER_SIGMA, SpinEnsemble

SQRT_2PI = math.sqrt(2.0 * math.pi)


class BranchPointError(ValueError):
    """ζ = 0: the closed form degenerates; perturb Γ_L, κ or N slightly."""


class Regime(str, Enum):
    CAVITY_DOMINATED = "CavityDominated"
    OSCILLATORY = "Oscillatory"
    SYMMETRIC_BAD_CAVITY = "SymmetricBadCavity"


@dataclass(frozen=True)
class AnalyticEchoParams:
    beta: float
    N_spins: float
    g_eff: float
    kappa: float
    tau: float
    gamma_hp: float = 0.0
    Gamma_L: float | None = None
    Gamma_G: float | None = None
    delta_c: float = 0.0

    def __post_init__(self):
        if (self.Gamma_L is None) == (self.Gamma_G is None):
            raise ValueError("set exactly one of Gamma_L (Lorentzian) or Gamma_G (Gaussian)")
        for name in ("kappa", "gamma_hp", "g_eff", "tau"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {v!r}")
        width = self.Gamma_L if self.Gamma_L is not None else self.Gamma_G
        if not math.isfinite(width) or width <= 0:
            raise ValueError("the inhomogeneous width must be > 0")
        if not self.N_spins >= 1:
            raise ValueError("N_spins must be >= 1")

    @property
    def lorentzian(self) -> bool:
        return self.Gamma_L is not None

    @property
    def fwhm(self) -> float:
        return self.Gamma_L if self.lorentzian else self.Gamma_G * FWHM_PER_SIGMA

    def density(self, delta):
        delta = np.asarray(delta, dtype=float)
        if self.lorentzian:
            return (self.Gamma_L / (2 * math.pi)) / (delta**2 + 0.25 * self.Gamma_L**2)
        return np.exp(-0.5 * (delta / self.Gamma_G) ** 2) / (SQRT_2PI * self.Gamma_G)

    def cdf(self, delta):
        delta = np.asarray(delta, dtype=float)
        if self.lorentzian:
            return 0.5 + np.arctan(2.0 * delta / self.Gamma_L) / math.pi
        return 0.5 * (1.0 + special.erf(delta / (math.sqrt(2.0) * self.Gamma_G)))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class RegimeReport:
    zeta_sq: float
    Sigma_plus: complex
    Sigma_minus: complex
    Theta_plus: complex
    Theta_minus: complex
    regime: Regime

    @property
    def slowest_decay(self) -> float:
        """Smallest real part of Σ±: the late-time decay exponent of <a(t > τ)>."""
        return min(self.Sigma_plus.real, self.Sigma_minus.real)

    def to_dict(self) -> dict:
        def c(z):
            return {"re": z.real, "im": z.imag}

        return {
            "zeta_sq": self.zeta_sq,
            "Sigma_plus": c(self.Sigma_plus),
            "Sigma_minus": c(self.Sigma_minus),
            "Theta_plus": c(self.Theta_plus),
            "Theta_minus": c(self.Theta_minus),
            "regime": self.regime.value,
        }


def _require_lorentzian(p: AnalyticEchoParams) -> float:
    if not p.lorentzian:
        raise ValueError("the closed form needs a Lorentzian line (Gamma_L)")
    return p.Gamma_L


def _zeta(p: AnalyticEchoParams) -> tuple[float, complex]:
    GL = _require_lorentzian(p)
    zeta_sq = 16.0 * p.g_eff**2 * p.N_spins - (GL - p.kappa) ** 2
    # ζ = +sqrt(ζ²) or +i sqrt(-ζ²); |a|² is invariant under ζ -> -ζ
    zeta = complex(math.sqrt(zeta_sq)) if zeta_sq > 0 else 1j * math.sqrt(-zeta_sq)
    return zeta_sq, zeta


def _rates(p: AnalyticEchoParams, zeta: complex):
    GL, k = p.Gamma_L, p.kappa
    Sp = (GL + k + 1j * zeta) / 4.0
    Sm = (GL + k - 1j * zeta) / 4.0
    Tp = zeta * (3j * GL + 1j * k + zeta)
    Tm = zeta * (3j * GL + 1j * k - zeta)
    return Sp, Sm, Tp, Tm


def classify_regime(p: AnalyticEchoParams) -> RegimeReport:
    zeta_sq, zeta = _zeta(p)
    Sp, Sm, Tp, Tm = _rates(p, zeta)
    if zeta_sq > 0:
        regime = Regime.OSCILLATORY
    elif p.Gamma_L > p.kappa:
        regime = Regime.CAVITY_DOMINATED
    else:
        regime = Regime.SYMMETRIC_BAD_CAVITY
    return RegimeReport(zeta_sq, Sp, Sm, Tp, Tm, regime)


def eval_echo_closed_form(p: AnalyticEchoParams, t, zeta_sign: int = 1):
    """Closed-form <a(t)> for a Lorentzian line and γ = 0, in its published normalization.

    The t = τ point belongs to the t < τ branch. ``zeta_sign=-1`` evaluates with
    the opposite root of ζ² (used to check that |a|² does not depend on it).
    """
    if p.gamma_hp != 0:
        raise ValueError("the closed form assumes gamma_hp = 0")
    GL, k = _require_lorentzian(p), p.kappa
    zeta_sq, zeta = _zeta(p)
    if zeta_sq == 0:
        raise BranchPointError(
            "ζ² = 16 g² N - (Γ_L - κ)² vanishes: the closed form is degenerate at this "
            "branch point; perturb Γ_L, κ or N slightly"
        )
    zeta = zeta * zeta_sign
    Sp, Sm, Tp, Tm = _rates(p, zeta)
    t = np.asarray(t, dtype=float)
    pre = 2j * p.beta * p.N_spins * GL / SQRT_2PI
    dt = p.tau - t
    before = t <= p.tau
    out = np.empty(t.shape, dtype=complex)
    denom = -(GL**2) - k * GL - 2.0 * p.g_eff**2 * p.N_spins
    out[before] = pre * np.exp(-0.5 * GL * dt[before]) / denom
    da = dt[~before]
    out[~before] = pre * (4.0 * np.exp(Sm * da) / Tp - 4.0 * np.exp(Sp * da) / Tm)
    return out


def closed_form_peak_at_tau(p: AnalyticEchoParams) -> float:
    """|<a(τ)>| of the closed form, 2βNΓ_L / (sqrt(2π)(Γ_L² + κΓ_L + 2 g² N))."""
    GL = _require_lorentzian(p)
    return 2 * p.beta * p.N_spins * GL / (SQRT_2PI * (GL**2 + p.kappa * GL + 2 * p.g_eff**2 * p.N_spins))


def physical_scale(p: AnalyticEchoParams) -> float:
    """Factor g_eff*sqrt(2π) mapping |a| of the closed form onto the dynamical field."""
    return p.g_eff * SQRT_2PI


# ---------------------------------------------------------------- spectrum


def _denominator(p: AnalyticEchoParams, omega, sum0):
    return 0.5 * p.kappa + 1j * p.delta_c - 1j * omega + p.g_eff**2 * p.N_spins * sum0


def eval_spectrum(
    p: AnalyticEchoParams,
    omega,
    ensemble: SpinEnsemble | None = None,
    rtol: float = 1e-8,
    window: float = 40.0,
):
    """Frequency-domain field <ã(ω)> (unitary 1/sqrt(2π) transform convention).

    With ``ensemble`` the spin sum is evaluated class by class; otherwise it is
    replaced by N ∫ f(Δ) dΔ and integrated adaptively over ±``window`` FWHM.
    ``omega`` may be complex (Im ω > 0 moves onto a shifted Bromwich contour).
    For γ = 0 and real ω the resonant pole is handled as principal value plus
    π f(ω).
    """
    omega = np.atleast_1d(np.asarray(omega, dtype=complex))
    if ensemble is not None:
        w, g, D = ensemble.weights, ensemble.couplings, ensemble.detunings
        num = np.empty(omega.shape, complex)
        den = np.empty(omega.shape, complex)
        for i, om in enumerate(omega):
            kern = 1.0 / (p.gamma_hp + 1j * D - 1j * om)
            num[i] = -1j / SQRT_2PI * np.sum(w * p.beta * g * np.exp(1j * D * p.tau) * kern)
            den[i] = 0.5 * p.kappa + 1j * p.delta_c - 1j * om + np.sum(w * g**2 * kern)
        return num / den

    lim = window * p.fwhm
    out = np.empty(omega.shape, complex)
    for i, om in enumerate(omega):
        s1, s0 = _density_integrals(p, om, lim, rtol)
        num = -1j / SQRT_2PI * p.N_spins * p.beta * p.g_eff * s1
        out[i] = num / _denominator(p, om, s0)
    return out


def _density_integrals(p, om: complex, lim: float, rtol: float):
    """∫ f e^{iΔτ} / (γ + i(Δ - ω)) dΔ and ∫ f / (γ + i(Δ - ω)) dΔ over [-lim, lim]."""
    damp = p.gamma_hp + om.imag
    wr = om.real
    tau = p.tau
    if damp < 0:
        raise ValueError("ω must lie on or above the real axis (Im ω >= -gamma_hp)")
    pts = (wr,) if -lim < wr < lim else None

    if damp > 0:
        def fun(d):
            k = p.density(d) / complex(damp, d - wr)
            v = k * cmath.exp(1j * d * tau)
            return np.array([v.real, v.imag, k.real, k.imag])

        r = _quad_vec(fun, lim, rtol, pts)
        return complex(r[0], r[1]), complex(r[2], r[3])

    # γ + 0⁺: 1/(i x) -> -i PV(1/x) + π δ(x); the principal value is taken
    # after subtracting the pole, PV ∫ u/(Δ-ω) = ∫ (u - u(ω))/(Δ-ω) + u(ω) ln((lim-ω)/(lim+ω))
    f0 = float(p.density(wr))
    u1_0 = f0 * cmath.exp(1j * wr * tau)

    def fun0(d):
        x = d - wr
        if x == 0.0:
            return np.zeros(4)
        u1 = p.density(d) * cmath.exp(1j * d * tau)
        v1 = (u1 - u1_0) / x
        v0 = (p.density(d) - f0) / x
        return np.array([v1.real, v1.imag, float(v0), 0.0])

    r = _quad_vec(fun0, lim, rtol, pts)
    log_term = math.log((lim - wr) / (lim + wr)) if abs(wr) < lim else 0.0
    pv1 = complex(r[0], r[1]) + u1_0 * log_term
    pv0 = r[2] + f0 * log_term
    return -1j * pv1 + math.pi * u1_0, -1j * pv0 + math.pi * f0


def _quad_vec(fun, lim, rtol, pts):
    # split at the resonance and into pieces that each hold a few oscillations
    val, _ = integrate.quad_vec(fun, -lim, lim, epsrel=rtol, epsabs=0.0, limit=20000, points=pts)
    return val


def spectrum_inversion(
    p: AnalyticEchoParams,
    t_max: float,
    span: float | None = None,
    oversample: float = 4.0,
    shift_cells: float = 3.0,
):
    """<a(t)> on [0, t_max] from the frequency-domain solution.

    The Bromwich integral is taken along Re p = c (ω -> ω + i c) on a uniform
    frequency grid of spacing h = 2π / (oversample * t_max); c = shift_cells*h.
    The detuning integrals are composite trapezoid sums on the same grid,
    evaluated for every ω at once as FFT convolutions; the grid spans
    ±``span`` (default 300 times the largest of FWHM, κ and 2 g sqrt(N)) and tail probability beyond it is lumped onto
    the edge cells. Returns (t, a(t)) with the field in the normalization of
    :func:`simulate_linear_hp`.
    """
    if span is None:
        span = 300.0 * max(p.fwhm, p.kappa, 2.0 * p.g_eff * math.sqrt(p.N_spins))
    h = 2.0 * math.pi / (oversample * t_max)
    c = shift_cells * h
    M = int(math.ceil(span / h))
    j = np.arange(-M, M + 1)
    delta = j * h
    # cell probabilities; lumped tails keep the total at exactly one
    edges = np.concatenate([[-np.inf], (j[:-1] + 0.5) * h, [np.inf]])
    prob = np.diff(p.cdf(edges))
    damp = p.gamma_hp + c
    # kernel K(x) = 1 / (damp + i x) sampled on x = n h, n in [-2M, 2M]
    n = np.arange(-2 * M, 2 * M + 1)
    kern = 1.0 / (damp + 1j * n * h)
    # I(ω_m) = Σ_j prob_j K(Δ_j - ω_m) = Σ_j prob_j Kr(ω_m - Δ_j), Kr(x) = K(-x)
    kern_r = kern[::-1]
    s0 = signal.fftconvolve(prob.astype(complex), kern_r)[2 * M : 4 * M + 1]
    s1 = signal.fftconvolve(prob * np.exp(1j * delta * p.tau), kern_r)[2 * M : 4 * M + 1]
    omega = delta
    pvar = c - 1j * omega
    num = -1j * p.N_spins * p.beta * p.g_eff * s1
    den = pvar + 0.5 * p.kappa + 1j * p.delta_c + p.g_eff**2 * p.N_spins * s0
    A = num / den  # Laplace transform on Re p = c
    # a(t) = (1/2π) ∫ A(c - iω) e^{(c - iω) t} dω, as a DFT over the ω grid
    nfft = A.shape[0]
    dt_out = 2.0 * math.pi / (nfft * h)
    n_t = int(math.floor(t_max / dt_out)) + 1
    t = np.arange(n_t) * dt_out
    # Σ_m A_m e^{-i ω_m t_k} with ω_m = (m - M) h, t_k = k dt_out
    spec = np.fft.fft(A)  # Σ_m A_m e^{-2πi m k / nfft}
    phase = np.exp(1j * M * h * t)
    a = (h / (2.0 * math.pi)) * spec[:n_t] * phase * np.exp(c * t)
    return t, a


# ------------------------------------------------------------- time domain


def simulate_linear_hp(
    p: AnalyticEchoParams,
    ensemble: SpinEnsemble,
    dt: float | None = None,
    t_end: float | None = None,
    record_stride: float = 10e-9,
    c_stab: float = 0.1,
) -> Trajectory:
    """Time-step the oscillator model of a discretized ensemble.

    dα/dt = -(κ/2 + iδ_c) α - i Σ_k w_k g_k s_k,   ds_k/dt = -(γ + iΔ_k) s_k - i g_k α,
    from s_k(0) = β e^{iΔ_k τ}, α(0) = 0. The free rotation of every class is
    propagated exactly (integrating-factor RK4), so arbitrarily large detunings
    in Lorentzian samples do not limit the step.
    """
    t_end = 2.0 * p.tau if t_end is None else t_end
    w = np.ascontiguousarray(ensemble.weights, dtype=float)
    g = np.ascontiguousarray(ensemble.couplings, dtype=float)
    D = ensemble.detunings
    if dt is None:
        collective = math.sqrt(math.fsum(w * g**2))
        dt = c_stab / max(collective, 0.5 * p.kappa, abs(p.delta_c), p.gamma_hp, 1.0 / t_end)
    per_record = max(1, math.ceil(record_stride / dt - 1e-9))
    h = record_stride / per_record
    nsteps = math.ceil(t_end / record_stride - 1e-9) * per_record
    L = -(p.gamma_hp + 1j * D)
    E, E2 = np.exp(L * h), np.exp(L * h / 2)
    s0 = p.beta * np.exp(1j * D * p.tau)
    c_alpha = complex(-(0.5 * p.kappa + 1j * p.delta_c))
    a_rec, status, nfail, a, s = _kernels.integrate_linear(
        np.zeros(len(D), complex), E, E2, g, w * g, c_alpha, 0j, s0.astype(complex), h,
        nsteps, per_record, np.inf,
    )
    if status != _kernels.STATUS_OK:
        raise NumericalInstabilityError(
            f"linear model diverged at step {nfail} (t={nfail * h:.6g} s); reduce dt", nfail, nfail * h
        )
    times = np.arange(a_rec.shape[0]) * per_record * h
    meta = {"analytic_params": p.to_dict(), "dt": h, "n_classes": len(D), "ensemble_seed": ensemble.seed,
            "mode": "linear_hp"}
    return Trajectory(times=times, alpha=a_rec, meta=meta)


def peak_normalized_deviation(y_test, y_ref) -> float:
    """max |y_test/max(y_test) - y_ref/max(y_ref)|."""
    y_test = np.asarray(y_test, dtype=float)
    y_ref = np.asarray(y_ref, dtype=float)
    return float(np.max(np.abs(y_test / y_test.max() - y_ref / y_ref.max())))
