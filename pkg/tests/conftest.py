"""Shared, session-scoped computations reused across the test modules."""

import pytest

from rydgauge import adiabatic as ad
from rydgauge import boundstates as bs
from rydgauge import dynamics as dy
from rydgauge.model import ModelParams


@pytest.fixture(scope="session")
def params():
    return ModelParams(3.0, 2.8e-6)


@pytest.fixture(scope="session")
def params113():
    return ModelParams(1.13, 2.8e-6)


@pytest.fixture(scope="session")
def radial3(params):
    return ad.prepare_radial_scan(params)


@pytest.fixture(scope="session")
def radial113(params113):
    return ad.prepare_radial_scan(params113)


@pytest.fixture(scope="session")
def states113(radial113):
    scan, well = radial113
    return dy.identify_states(scan, well)


@pytest.fixture(scope="session")
def well_data3(params, radial3):
    scan, well = radial3
    return bs.well_data(params, reference=scan, well=well)


@pytest.fixture(scope="session")
def fig6_trajectory():
    return dy.run_fig6()


ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
