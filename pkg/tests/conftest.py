import pytest

from ratekit.casestudy import (HYPER_PERIOD_S, PEAK_POWER_MW, case_study_levels,
                               case_study_rates, dc_servo_plant)
from ratekit.tables import build_cost_table, build_power_table, design_all


@pytest.fixture(scope="session")
def plant():
    return dc_servo_plant()


@pytest.fixture(scope="session")
def rates():
    return case_study_rates()


@pytest.fixture(scope="session")
def levels():
    return case_study_levels()


@pytest.fixture(scope="session")
def controllers(plant, rates):
    return design_all(plant, rates)


@pytest.fixture(scope="session")
def cost_table(plant, rates, levels, controllers):
    return build_cost_table(plant, rates, levels, controllers=controllers)


@pytest.fixture(scope="session")
def power_table(rates):
    return build_power_table(rates, PEAK_POWER_MW)


@pytest.fixture(scope="session")
def hyper_period():
    return HYPER_PERIOD_S
