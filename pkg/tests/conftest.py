"""Shared fixtures plus a pass/fail summary for the acceptance module."""

import pytest

from swellrom.fem_core import generate_disk_mesh
from swellrom.fom_solver import FomSolver, parameter_grid
from swellrom.reduction_offline import build_model, run_campaign


@pytest.fixture(scope="session")
def coarse_mesh():
    return generate_disk_mesh(0.25)


@pytest.fixture(scope="session")
def coarse_solver(coarse_mesh):
    return FomSolver(coarse_mesh)


@pytest.fixture(scope="session")
def coarse_campaign(coarse_solver):
    """Small shape-only training campaign shared by reduction tests."""
    return run_campaign(coarse_solver, parameter_grid("2x2"),
                        n_steps=20, dt=0.01)


@pytest.fixture(scope="session")
def coarse_master(coarse_solver, coarse_campaign):
    return build_model(coarse_solver, coarse_campaign,
                       eps_rb=1e-6, eps_ei=1e-8)


_acceptance_results = {}


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance.py" in report.nodeid:
        _acceptance_results[report.nodeid.split("::")[-1]] = report.outcome


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _acceptance_results:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name in sorted(_acceptance_results):
        status = "PASS" if _acceptance_results[name] == "passed" else "FAIL"
        terminalreporter.write_line(f"[acceptance] {name}: {status}")
