from pathlib import Path

import pytest

from dynrms import data, engine, network

TESTS_DIR = Path(__file__).parent


@pytest.fixture(scope="session")
def kundur_sys():
    return data.load_model(data.fixture_path("kundur_two_area"))


@pytest.fixture(scope="session")
def kundur_pf(kundur_sys):
    return network.solve_power_flow(kundur_sys)


@pytest.fixture()
def kundur(kundur_sys, kundur_pf):
    """Freshly built (mutable) OdeSystem plus its equilibrium."""
    sysm = engine.build(kundur_sys, kundur_pf)
    return sysm, sysm.initialize()


@pytest.fixture(scope="session")
def ieee39_sys():
    return data.load_model(data.fixture_path("ieee39"))


@pytest.fixture(scope="session")
def ieee39_pf(ieee39_sys):
    return network.solve_power_flow(ieee39_sys)


@pytest.fixture()
def ieee39(ieee39_sys, ieee39_pf):
    sysm = engine.build(ieee39_sys, ieee39_pf)
    return sysm, sysm.initialize()


@pytest.fixture(scope="session")
def smib_sys():
    return data.load_model(TESTS_DIR / "data" / "smib.grid")
