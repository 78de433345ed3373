import numpy as np
import pytest

from symbiotic.model import NominalGains, PlantModel, SymbioticConfig, Variant

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def plant():
    return PlantModel.double_integrator()


@pytest.fixture(scope="session")
def gains():
    return NominalGains(K1=[[0.16, 0.57]], K2=[[0.16]])


@pytest.fixture(scope="session")
def nfg():
    return SymbioticConfig(alpha=10.0, eps1=3.0, eps2=10.0, variant=Variant.NEW)


@pytest.fixture(scope="session")
def sfg():
    return SymbioticConfig(alpha=10.0, variant=Variant.STANDARD)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
