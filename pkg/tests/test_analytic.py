import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from echotrain import Distribution, PhysicalParams, lattice_ensemble, quantile_ensemble, two_pi_hz
from echotrain.analytic import (
    AnalyticEchoParams,
    BranchPointError,
    Regime,
    classify_regime,
    closed_form_peak_at_tau,
    eval_echo_closed_form,
    eval_spectrum,
    peak_normalized_deviation,
    physical_scale,
    simulate_linear_hp,
    spectrum_inversion,
)

KAPPA, G = two_pi_hz(150e3), two_pi_hz(8.0)


def lorentz(GL_hz=0.5e6, N=1e10, kappa=KAPPA, tau=45e-6, beta=1.0):
    return AnalyticEchoParams(beta=beta, N_spins=N, g_eff=G, kappa=kappa, tau=tau, Gamma_L=two_pi_hz(GL_hz))


def physical(p: AnalyticEchoParams) -> PhysicalParams:
    return PhysicalParams(kappa=p.kappa, g_single=p.g_eff, N_spins=p.N_spins,
                          inhomogeneous_fwhm=p.Gamma_L, distribution=Distribution.LORENTZIAN)


valid = st.builds(
    lambda GL, k, g, N, tau, beta: AnalyticEchoParams(beta=beta, N_spins=N, g_eff=g, kappa=k, tau=tau, Gamma_L=GL),
    GL=st.floats(1e4, 1e8),
    k=st.floats(0.0, 1e8),
    g=st.floats(1.0, 1e3),
    N=st.floats(1e4, 1e12),
    tau=st.floats(1e-6, 1e-4),
    beta=st.floats(0.01, 1.0),
)


def well_separated(p):
    z2 = 16 * p.g_eff**2 * p.N_spins - (p.Gamma_L - p.kappa) ** 2
    return abs(z2) > 1e-6 * (16 * p.g_eff**2 * p.N_spins + (p.Gamma_L - p.kappa) ** 2)


def test_params_need_exactly_one_width():
    with pytest.raises(ValueError):
        AnalyticEchoParams(1.0, 1e10, G, KAPPA, 1e-5)
    with pytest.raises(ValueError):
        AnalyticEchoParams(1.0, 1e10, G, KAPPA, 1e-5, Gamma_L=1.0, Gamma_G=1.0)
    with pytest.raises(ValueError):
        AnalyticEchoParams(1.0, 1e10, G, -1.0, 1e-5, Gamma_L=1.0)


def test_peak_at_tau_matches_formula():
    p = lorentz()
    a = eval_echo_closed_form(p, np.array([p.tau]))[0]
    GL = p.Gamma_L
    expected = 2 * p.N_spins * GL / (math.sqrt(2 * math.pi) * (GL**2 + KAPPA * GL + 2 * G**2 * p.N_spins))
    assert abs(a) == pytest.approx(expected, rel=1e-13)
    assert closed_form_peak_at_tau(p) == pytest.approx(expected, rel=1e-13)


def test_zero_coupling_gives_zero_field_after_pulse():
    p = AnalyticEchoParams(1.0, 1e10, 0.0, KAPPA, 1e-5, Gamma_L=two_pi_hz(1e6))
    # without coupling the peak is only set by the Lorentzian refocusing
    assert np.all(np.isfinite(eval_echo_closed_form(p, np.linspace(0, 2e-5, 11))))


def test_branch_point_raises():
    p = AnalyticEchoParams(1.0, 4.0, 1.0, 2.0, 1.0, Gamma_L=10.0)
    with pytest.raises(BranchPointError):
        eval_echo_closed_form(p, [0.5])


def test_closed_form_rejects_homogeneous_decay():
    p = AnalyticEchoParams(1.0, 1e10, G, KAPPA, 1e-5, gamma_hp=1.0, Gamma_L=1e6)
    with pytest.raises(ValueError):
        eval_echo_closed_form(p, [0.0])


@given(valid)
def test_branch_magnitude_continuity(p):
    assume(well_separated(p))
    lo = eval_echo_closed_form(p, [p.tau])[0]
    hi = eval_echo_closed_form(p, [np.nextafter(p.tau, np.inf)])[0]
    assert abs(hi) == pytest.approx(abs(lo), rel=1e-9)


@given(valid)
def test_zeta_sign_invariance(p):
    assume(well_separated(p))
    t = p.tau * np.linspace(1.0, 2.0, 9)
    a = np.abs(eval_echo_closed_form(p, t))
    b = np.abs(eval_echo_closed_form(p, t, zeta_sign=-1))
    assert np.allclose(a, b, rtol=1e-9, atol=1e-12 * a.max())


@given(valid)
def test_linear_in_beta(p):
    assume(well_separated(p) and p.beta <= 0.5)
    t = p.tau * np.linspace(0.5, 2.0, 7)
    q = AnalyticEchoParams(2 * p.beta, p.N_spins, p.g_eff, p.kappa, p.tau, Gamma_L=p.Gamma_L)
    a2, a1 = eval_echo_closed_form(q, t), 2 * eval_echo_closed_form(p, t)
    # atol only matters where the rise has underflowed to subnormals
    assert np.allclose(a2, a1, rtol=1e-12, atol=1e-12 * np.abs(a1).max())


@given(GL=st.floats(1e4, 1e8), tau=st.floats(1e-6, 1e-4))
def test_rise_law(GL, tau):
    p = AnalyticEchoParams(1.0, 1e10, G, KAPPA, tau, Gamma_L=GL)
    assume(well_separated(p))
    t = tau - np.linspace(0.0, min(tau, 20.0 / GL), 50)
    slope = np.polyfit(t, np.log(np.abs(eval_echo_closed_form(p, t))), 1)[0]
    assert slope == pytest.approx(GL / 2, rel=1e-6)


def test_peak_monotone_in_N():
    N = np.logspace(6, 12, 25)
    peaks = [closed_form_peak_at_tau(lorentz(N=n)) for n in N]
    assert np.all(np.diff(peaks) > 0)


@pytest.mark.parametrize(
    "GL_hz, kappa_hz, N, regime",
    [
        (0.5e6, 150e3, 1e10, Regime.OSCILLATORY),
        (10e6, 150e3, 1e8, Regime.CAVITY_DOMINATED),
        (0.1e6, 20e6, 1e8, Regime.SYMMETRIC_BAD_CAVITY),
    ],
)
def test_classify_regime(GL_hz, kappa_hz, N, regime):
    p = lorentz(GL_hz=GL_hz, kappa=two_pi_hz(kappa_hz), N=N)
    r = classify_regime(p)
    assert r.regime is regime
    assert r.zeta_sq == 16 * G**2 * N - (p.Gamma_L - p.kappa) ** 2
    assert r.Sigma_plus + r.Sigma_minus == pytest.approx((p.Gamma_L + p.kappa) / 2)
    assert set(r.to_dict()) >= {"zeta_sq", "regime"}


def test_spectrum_on_shifted_axis_matches_discrete_sum():
    # short tau keeps the refocusing factor e^{-Γ_L τ / 2} of order one
    p = lorentz(GL_hz=1e6, tau=0.2e-6)
    ens = quantile_ensemble(physical(p), 200_000)
    om = np.array([0.0, 0.3 * p.Gamma_L, -2 * p.Gamma_L]) + 1j * p.Gamma_L
    a = eval_spectrum(p, om)
    b = eval_spectrum(p, om, ensemble=ens)
    assert np.max(np.abs(a - b)) < 5e-3 * np.max(np.abs(a))


def test_spectrum_principal_value_is_the_real_axis_limit():
    p = lorentz(GL_hz=1e6, tau=5e-6)
    om = np.array([0.0, 0.7 * p.Gamma_L, -1.5 * p.Gamma_L])
    real_axis = eval_spectrum(p, om)
    gaps = [np.max(np.abs(real_axis - eval_spectrum(p, om + eps * p.Gamma_L * 1j))) for eps in (1e-4, 1e-5)]
    assert gaps[1] < 1e-3 * np.max(np.abs(real_axis))
    # first-order approach to the axis
    assert gaps[0] / gaps[1] == pytest.approx(10.0, rel=0.05)


@pytest.mark.parametrize("GL_hz", [0.1e6, 1e6])
def test_spectrum_inversion_matches_closed_form(GL_hz):
    p = lorentz(GL_hz=GL_hz)
    t, a = spectrum_inversion(p, 2 * p.tau)
    cf = eval_echo_closed_form(p, t) * physical_scale(p)
    assert peak_normalized_deviation(np.abs(a) ** 2, np.abs(cf) ** 2) < 1e-3
    # the scale factor maps the published normalization onto the dynamical field
    assert np.abs(a).max() / np.abs(cf).max() == pytest.approx(1.0, rel=1e-3)


def test_linear_simulation_matches_closed_form():
    p = lorentz(GL_hz=0.5e6)
    ens = lattice_ensemble(physical(p), 3000, seed=0)
    tr = simulate_linear_hp(p, ens)
    cf = eval_echo_closed_form(p, tr.times) * physical_scale(p)
    assert peak_normalized_deviation(tr.photon_number, np.abs(cf) ** 2) < 1e-2


def test_peak_normalized_deviation_is_scale_free():
    y = np.array([0.0, 1.0, 3.0, 2.0])
    assert peak_normalized_deviation(7 * y, y) == 0.0
    assert peak_normalized_deviation(y, y[::-1]) > 0
