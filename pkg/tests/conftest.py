import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from echotrain import PhysicalParams, two_pi_hz

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.register_profile("ci", max_examples=200, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def pytest_addoption(parser):
    parser.addoption("--full", action="store_true", default=False, help="run full-scale checks (about 10 min per core)")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--full"):
        return
    skip = pytest.mark.skip(reason="full-scale run; pass --full to enable")
    for item in items:
        if "full" in item.keywords:
            item.add_marker(skip)


_CRITERIA: dict[int, str] = {}


@pytest.fixture
def criterion():
    """Record one summary line per acceptance criterion; printed at the end of the run."""

    def record(number: int, ok: bool, detail: str, status: str | None = None) -> bool:
        line = f"criterion {number}: {status or ('PASS' if ok else 'FAIL')}  {detail}"
        _CRITERIA[number] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in range(1, max(9, *_CRITERIA) + 1):
        terminalreporter.write_line(_CRITERIA.get(number, f"criterion {number}: NOT RUN  (skipped; see -rs)"))


@pytest.fixture
def desk_params():
    """Echo-train parameters at desk scale (g_eff sqrt(N) as in the full model)."""
    return PhysicalParams(
        kappa=two_pi_hz(150e3),
        Gamma_deph=two_pi_hz(2.5e3),
        g_single=two_pi_hz(8.0),
        N_spins=1e10,
        inhomogeneous_fwhm=two_pi_hz(4e6),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
