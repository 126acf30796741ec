import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from echotrain import (
    Distribution,
    PhysicalParams,
    Pulse,
    PulseSequence,
    SpinEnsemble,
    cooperativity,
    grid_ensemble,
    hahn_sequence,
    lattice_ensemble,
    linewidth_from_T2,
    quantile_ensemble,
    revival_time,
    sample_ensemble,
    two_pi_hz,
)

FWHM = two_pi_hz(4e6)


def gaussian(N=1e10, fwhm=FWHM):
    return PhysicalParams(kappa=1.0, g_single=2.0, N_spins=N, inhomogeneous_fwhm=fwhm)


# ---------------------------------------------------------------- params


def test_sigma_from_fwhm():
    assert gaussian().sigma == pytest.approx(FWHM / math.sqrt(8 * math.log(2)), rel=1e-15)


@pytest.mark.parametrize(
    "bad",
    [dict(kappa=-1.0), dict(kappa=1.0, gamma=-1e-3), dict(kappa=1.0, Gamma_deph=-1.0),
     dict(kappa=1.0, N_spins=0.5), dict(kappa=1.0, inhomogeneous_fwhm=-2.0)],
)
def test_params_reject_invalid(bad):
    with pytest.raises(ValueError):
        PhysicalParams(**bad)


def test_params_dict_roundtrip():
    p = PhysicalParams(kappa=3.0, gamma=0.1, N_spins=7.0, inhomogeneous_fwhm=2.0,
                       distribution=Distribution.LORENTZIAN)
    assert PhysicalParams(**p.to_dict()) == p


# ---------------------------------------------------------------- sampling


def test_zero_width_sample_is_degenerate():
    e = sample_ensemble(gaussian(N=10.0, fwhm=0.0), 5, seed=99)
    assert np.all(e.detunings == 0.0)
    assert np.all(e.weights == 2.0)


def test_sample_std_matches_sigma():
    p = gaussian()
    stds = [np.std(sample_ensemble(p, 100_000, s).detunings) for s in range(5)]
    assert np.mean(stds) == pytest.approx(FWHM / 2.3548, rel=0.01)


def test_sample_is_deterministic():
    a, b = sample_ensemble(gaussian(), 500, 7), sample_ensemble(gaussian(), 500, 7)
    assert a.detunings.tobytes() == b.detunings.tobytes()
    assert not np.array_equal(a.detunings, sample_ensemble(gaussian(), 500, 8).detunings)


def test_sample_rejects_zero_classes():
    with pytest.raises(ValueError):
        sample_ensemble(gaussian(), 0, 1)


def test_grid_single_class():
    e = grid_ensemble(gaussian(N=42.0), 1, span=FWHM)
    assert e.detunings.tolist() == [0.0]
    assert e.weights.tolist() == [42.0]


def test_grid_normalization_and_density_ratio():
    p = gaussian()
    e = grid_ensemble(p, 10001, span=4 * p.sigma)
    assert math.fsum(e.weights) == pytest.approx(p.N_spins, rel=1e-9)
    # cell centres do not land on sigma exactly; compare the density at the nodes
    k0 = np.argmin(np.abs(e.detunings))
    k1 = np.argmin(np.abs(e.detunings - p.sigma))
    expected = math.exp(-0.5 * (e.detunings[k1] ** 2 - e.detunings[k0] ** 2) / p.sigma**2)
    assert e.weights[k1] / e.weights[k0] == pytest.approx(expected, abs=1e-6)
    assert expected == pytest.approx(math.exp(-0.5), abs=2e-3)


def test_grid_half_maximum_brackets_fwhm():
    p = gaussian()
    e = grid_ensemble(p, 2001, span=2 * FWHM)
    step = e.detunings[1] - e.detunings[0]
    above = e.detunings[e.weights >= 0.5 * e.weights.max()]
    assert abs((above.max() - above.min()) - FWHM) <= 2 * step


def test_grid_rejects_nonpositive_span():
    with pytest.raises(ValueError):
        grid_ensemble(gaussian(), 10, span=0.0)


def test_grid_revival_time_is_exact():
    e = grid_ensemble(gaussian(), 2000, span=FWHM, seed=3)
    step = 2 * FWHM / 2000
    assert revival_time(e) == pytest.approx(2 * math.pi / step, rel=1e-9)


def test_lattice_is_stratified_and_seeded():
    p = gaussian()
    e = lattice_ensemble(p, 1000, seed=5)
    q = 0.5 * (1 + np.vectorize(math.erf)(e.detunings / (p.sigma * math.sqrt(2))))
    # one class per 1/N_k stratum
    assert np.array_equal(np.floor(q * 1000).astype(int), np.arange(1000))
    assert not np.array_equal(e.detunings, lattice_ensemble(p, 1000, seed=6).detunings)


def test_quantile_is_symmetric():
    e = quantile_ensemble(gaussian(), 1000)
    assert np.allclose(e.detunings, -e.detunings[::-1], rtol=0, atol=1e-6)


@given(
    N=st.floats(1.0, 1e12),
    N_k=st.integers(1, 300),
    seed=st.integers(0, 2**32 - 1),
    fwhm=st.floats(0.0, 1e8),
    lorentz=st.booleans(),
    kind=st.sampled_from(["iid", "lattice", "quantile", "grid"]),
)
def test_weights_sum_to_N(N, N_k, seed, fwhm, lorentz, kind):
    p = PhysicalParams(kappa=1.0, N_spins=N, inhomogeneous_fwhm=fwhm,
                       distribution=Distribution.LORENTZIAN if lorentz else Distribution.GAUSSIAN)
    e = {
        "iid": lambda: sample_ensemble(p, N_k, seed),
        "lattice": lambda: lattice_ensemble(p, N_k, seed),
        "quantile": lambda: quantile_ensemble(p, N_k),
        "grid": lambda: grid_ensemble(p, N_k, span=max(fwhm, 1.0), seed=seed),
    }[kind]()
    assert len(e) == N_k
    assert math.fsum(e.weights) == pytest.approx(N, rel=1e-9)
    assert np.all(np.isfinite(e.detunings))


def test_ensemble_json_roundtrip(tmp_path):
    e = sample_ensemble(gaussian(), 64, seed=11)
    e.save_json(tmp_path / "e.json")
    back = SpinEnsemble.load_json(tmp_path / "e.json")
    assert back.detunings.tobytes() == e.detunings.tobytes()
    assert back.weights.tobytes() == e.weights.tobytes()
    assert back.seed == 11


# ---------------------------------------------------------------- pulses


def test_reference_hahn_sequence():
    seq = hahn_sequence(30e-6, 0.20e-6, 0.22e-6, 0.43e-6, 5e10, t_end=250e-6)
    p1, p2 = seq.pulses
    assert p1.t_start == 0.20e-6 and p1.t_end == pytest.approx(0.42e-6, rel=1e-12)
    assert p2.t_start - p1.t_end == pytest.approx(30e-6, rel=1e-12)
    assert p2.t_end == pytest.approx(30.85e-6, rel=1e-12)


@given(tau=st.floats(0.0, 1e-3), t1=st.floats(0.0, 1e-5), d1=st.floats(1e-9, 1e-6), d2=st.floats(1e-9, 1e-6))
def test_hahn_tau_is_end_to_start(tau, t1, d1, d2):
    p1, p2 = hahn_sequence(tau, t1, d1, d2, 1.0).pulses
    assert p2.t_start - p1.t_end == pytest.approx(tau, abs=1e-15)


def test_phase2_rotates_second_pulse():
    seq = hahn_sequence(1e-6, 0.0, 1e-7, 1e-7, 2.0, phase2=math.pi / 2)
    assert seq.pulses[1].complex_amplitude == pytest.approx(2j)
    assert seq.drive(1.15e-6) == pytest.approx(2j)
    assert seq.drive(0.5e-6) == 0


def test_back_to_back_pulses_allowed_at_tau_zero():
    p1, p2 = hahn_sequence(0.0, 0.0, 1e-7, 1e-7, 1.0).pulses
    assert p2.t_start == p1.t_end


def test_overlapping_pulses_rejected():
    with pytest.raises(ValueError):
        PulseSequence((Pulse(0.0, 2e-7, 1.0), Pulse(1e-7, 1e-7, 1.0)), 1e-6)
    with pytest.raises(ValueError):
        PulseSequence((Pulse(0.0, 1e-7, 1.0),), 0.5e-7)
    with pytest.raises(ValueError):
        Pulse(0.0, 0.0, 1.0)


# ---------------------------------------------------------------- scalars


def test_cooperativity_examples():
    C = cooperativity(two_pi_hz(5.933e6), two_pi_hz(153.8e3), two_pi_hz(5.98e6))
    assert C == pytest.approx(153, abs=1)
    assert cooperativity(0.0, 1.0, 1.0) == 0.0
    assert cooperativity(2.0, 3.0, 5.0) / cooperativity(1.0, 3.0, 5.0) == 4.0
    with pytest.raises(ValueError):
        cooperativity(1.0, 0.0, 1.0)


def test_linewidth_from_T2_examples():
    assert linewidth_from_T2(409e-6) == pytest.approx(two_pi_hz(389), abs=two_pi_hz(2))
    assert linewidth_from_T2(1 / (2 * math.pi)) == pytest.approx(two_pi_hz(1.0))
    assert linewidth_from_T2(2.0) == linewidth_from_T2(1.0) / 2
    with pytest.raises(ValueError):
        linewidth_from_T2(0.0)
