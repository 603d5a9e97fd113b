from __future__ import annotations

import pytest

from twincell.agents import BackendDescriptor
from twincell.plant import AgvUnit, ConveyorStation, PlantState, build_plant
from twincell.scenarios import load_packaged_scenario, read_data_text
from twincell.services import default_registry


def make_conveyor_plant(belt_speed: float = 0.2, next_agent: str = "op_next") -> PlantState:
    return build_plant(
        stations=[ConveyorStation(id="conveyor1", belt_speed=belt_speed,
                                  next_agent=next_agent)],
    )


def make_agv_plant() -> PlantState:
    return build_plant(
        stations=[ConveyorStation(id="conveyor1"), ConveyorStation(id="processing1")],
        agvs=[AgvUnit(id="agv1", location="conveyor1")],
    )


@pytest.fixture
def registry():
    return default_registry()


@pytest.fixture
def golden_lines() -> list[str]:
    return read_data_text("golden/appendix_a_input.txt").splitlines()


@pytest.fixture
def appendix_a_scenario():
    return load_packaged_scenario("appendix_a")


@pytest.fixture
def oracle_backend() -> BackendDescriptor:
    return BackendDescriptor(kind="rule_oracle")


@pytest.fixture
def fallback_backend() -> BackendDescriptor:
    return BackendDescriptor(kind="rule_oracle", profile="sop_fallback")
