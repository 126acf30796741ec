import copy
import math

import numpy as np
import pytest

from echotrain.config import ConfigError, RunConfig
from echotrain.meanfield import simulate
from echotrain.runner import (
    RealizationError,
    SweepSpec,
    build_ensemble,
    cell_key,
    run_averaged,
    run_sweep,
)

SMALL = {
    "physical": {"kappa": {"two_pi_hz": 150e3}, "Gamma_deph": {"two_pi_hz": 2.5e3}, "g_single": {"two_pi_hz": 8},
                 "N_spins": 1e10, "inhomogeneous_fwhm": {"two_pi_hz": 4e6}},
    "ensemble": {"N_k": 150, "sampling": "iid"},
    "sequence": {"hahn": {"tau": 10e-6, "F": 5e10, "t_end": 36e-6}},
    "analysis": {"noise_floor": 1e-8},
}


def small(**changes) -> RunConfig:
    c = RunConfig.from_dict(copy.deepcopy(SMALL))
    return c.replace(**changes) if changes else c


def test_single_realization_equals_simulate():
    c = small()
    run = run_averaged(c, R=1, base_seed=5)
    direct = simulate(build_ensemble(c.params, c.ensemble, 5), c.params, c.sequence, c.integrator, c.record)
    assert run.mean.alpha.tobytes() == direct.alpha.tobytes()
    assert run.seeds == [5]
    assert run.mean.meta["realizations"] == 1


def test_homogeneous_line_has_no_spread():
    run = run_averaged(small(**{"physical.inhomogeneous_fwhm": 0.0}), R=3, keep=True)
    first = run.realizations[0].alpha.tobytes()
    assert all(r.alpha.tobytes() == first for r in run.realizations)
    assert np.max(run.spread) <= 1e-12 * run.mean.photon_number.max()


def test_average_is_smoother_than_typical_realization():
    c = small(**{"ensemble.N_k": 40})
    run = run_averaged(c, R=16, keep=True)

    def roughness(y):
        return np.sum(np.abs(np.diff(y))) / y.max()

    tvs = sorted(roughness(r.photon_number) for r in run.realizations)
    assert roughness(run.mean.photon_number) < tvs[len(tvs) // 2]


def test_threads_do_not_change_results():
    c = small()
    a = run_averaged(c, R=4, workers=1)
    b = run_averaged(c, R=4, workers=4)
    assert a.mean.photon_number.tobytes() == b.mean.photon_number.tobytes()
    assert a.mean.alpha.tobytes() == b.mean.alpha.tobytes()


def test_observables():
    c = small()
    run = run_averaged(c, R=3, keep=True)
    alphas = np.stack([r.alpha for r in run.realizations])
    assert np.allclose(run.mean.photon_number, np.mean(np.abs(alphas) ** 2, axis=0), rtol=1e-12)
    cm = run_averaged(small(**{"averaging.observable": "complex_mean"}), R=3)
    assert np.allclose(cm.mean.photon_number, np.abs(alphas.mean(axis=0)) ** 2, rtol=1e-12)


def test_failed_realization_reports_seed():
    c = small(**{"physical.inhomogeneous_fwhm": 0.0, "ensemble.N_k": 1, "integrator.dt": 1e-6,
                 "record.stride": 1e-6, "averaging.base_seed": 41})
    with pytest.raises(RealizationError) as info:
        run_averaged(c, R=1)
    assert info.value.seed == 41


def test_grid_horizon_recorded():
    run = run_averaged(small(**{"ensemble.sampling": "grid", "ensemble.N_k": 300}), R=2)
    step = 2 * 2 * math.pi * 4e6 / 300
    assert run.horizon == pytest.approx(2 * math.pi / step, rel=1e-9)
    assert run.mean.meta["revival_horizon"] == run.horizon


# ---------------------------------------------------------------- sweeps


def test_empty_axes_is_the_base_run():
    c = small()
    res = run_sweep(SweepSpec(c), keep_trajectories=True)
    assert [r["cell"] for r in res.rows] == ["base"]
    direct = run_averaged(c)
    assert res.trajectories["base"].photon_number.tobytes() == direct.mean.photon_number.tobytes()


def test_sweep_is_deterministic_and_order_free(tmp_path):
    c = small()
    taus = (8e-6, 10e-6)
    a = run_sweep(SweepSpec(c, (("sequence.hahn.tau", taus),), name="s"), tmp_path / "a")
    b = run_sweep(SweepSpec(c, (("sequence.hahn.tau", taus[::-1]),), name="s"), tmp_path / "b", workers=2)
    c2 = run_sweep(SweepSpec(c, (("sequence.hahn.tau", taus),), name="s"), tmp_path / "c", workers=2)
    assert (tmp_path / "a/s/results.json").read_bytes() == (tmp_path / "c/s/results.json").read_bytes()
    assert {r["cell"]: r for r in a.rows} == {r["cell"]: r for r in b.rows}
    for row in a.rows:
        cell = tmp_path / "a/s" / row["cell"]
        assert (cell / "trajectory.csv").exists() and (cell / "echoes.json").exists()


def test_failing_cell_is_recorded():
    base = small(**{"physical.inhomogeneous_fwhm": 0.0, "ensemble.N_k": 1, "record.stride": 1e-6})
    spec = SweepSpec(base, (("integrator.dt", (1e-9, 1e-6)),))
    res = run_sweep(spec)
    status = {r["dt"]: r["status"] for r in res.rows}
    assert status == {1e-9: "ok", 1e-6: "failed"}
    assert res.failures[0]["error"]


def test_spec_validation():
    c = small()
    with pytest.raises(ValueError, match="budget"):
        SweepSpec(c, (("ensemble.N_k", tuple(range(1, 12))),), budget=10)
    with pytest.raises(ConfigError):
        SweepSpec(c, (("ensemble.N_k", (10, 0)),))
    with pytest.raises(ValueError):
        SweepSpec(c, (("physical.kappa", (float("inf"),)),))
    with pytest.raises(ValueError):
        SweepSpec(c, (("ensemble.N_k", ()),))


def test_cell_keys_are_path_safe():
    key = cell_key({"sequence.hahn.tau": 1.5e-05, "physical.distribution": "lorentzian"})
    assert key == "tau=1.5e-05__distribution=lorentzian"
    assert "/" not in cell_key({"physical.kappa": {"two_pi_hz": 1e5}})


@pytest.fixture(scope="module")
def dephasing_rows():
    c = small(**{"ensemble.sampling": "grid", "ensemble.N_k": 1000})
    gammas = tuple(2 * math.pi * f for f in (0.0, 2.5e3, 20e3, 80e3))
    res = run_sweep(SweepSpec(c, (("physical.Gamma_deph", gammas),)))
    return sorted(res.rows, key=lambda r: r["Gamma_deph"])


def test_dephasing_suppresses_echoes(dephasing_rows):
    peak = [r["peak"][0] if r["n_echoes"] else 0.0 for r in dephasing_rows]
    area = [r["A_echo"][0] if r["n_echoes"] else 0.0 for r in dephasing_rows]
    assert all(b < a for a, b in zip(peak, peak[1:]) if a > 0)
    assert all(b < a for a, b in zip(area, area[1:]) if a > 0)
    second = [r["A_echo"][1] if r["n_echoes"] > 1 else 0.0 for r in dephasing_rows]
    assert all(b <= a for a, b in zip(second, second[1:]))
    counts = [r["n_echoes"] for r in dephasing_rows]
    assert all(b <= a for a, b in zip(counts, counts[1:]))


@pytest.mark.xfail(strict=True, reason="echo 1 loses height with Γ but its peak/area ratio grows slightly "
                   "(1.164 -> 1.179 over Γ = 0..2π·20 kHz) in the mean-field model")
def test_dephasing_lowers_peak_over_area(dephasing_rows):
    ratio = [r["echo1_peak_over_area"] for r in dephasing_rows if r["n_echoes"]]
    assert len(ratio) >= 3
    assert all(b < a for a, b in zip(ratio, ratio[1:]))
