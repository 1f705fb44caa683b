"""
Shared fixtures: default settings, the standard world and scenario loading
"""

import os
import sys

import pytest

ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
sys.path.insert(0, ROOT)

from src.domain.clock import SimClock
from src.domain.ids import IdSource
from src.domain.model import ParticipantRole
from src.domain.settings import SimulationSettings
from src.engine.scenario import Scenario
from src.engine.world import WorldConfig
from src.ledger.core_ledger import CoreLedger
from src.participants.ecosystem import Ecosystem

STANDARD_WORLD = 'config/worlds/standard.yaml'


@pytest.fixture(autouse=True)
def repo_root(monkeypatch):
    """World and scenario paths are relative to the repository root"""
    monkeypatch.chdir(ROOT)
    monkeypatch.delenv('DPOUND_SANDBOX_OUT', raising=False)


@pytest.fixture
def settings() -> SimulationSettings:
    return SimulationSettings()


@pytest.fixture
def world(settings) -> WorldConfig:
    return WorldConfig.load(STANDARD_WORLD, settings)


@pytest.fixture
def eco(world) -> Ecosystem:
    return Ecosystem(world)


@pytest.fixture
def load_scenario():
    def load(name: str) -> Scenario:
        return Scenario.load(f"config/scenarios/{name}.yaml")
    return load


ROLES = {
    'cb': ParticipantRole.CENTRAL_BANK_CBDC_SYSTEM,
    'pip': ParticipantRole.PIP,
    'other_pip': ParticipantRole.PIP,
    'fmi': ParticipantRole.FMI,
    'alice': ParticipantRole.USER,
    'bob': ParticipantRole.USER,
    'bank': ParticipantRole.COMMERCIAL_BANK,
}


@pytest.fixture
def core() -> CoreLedger:
    return CoreLedger(ROLES, SimClock(), IdSource())
