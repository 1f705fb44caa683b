"""
Simulation Settings
Defaults read from config/settings.yaml and overridable per world
"""

import logging
from dataclasses import dataclass, replace
from typing import Dict, Optional

import yaml

from src.domain.errors import ConfigInvalid

logger = logging.getLogger(__name__)

WATERFALL_MODES = ('waterfall', 'reject')
FMI_DATA_PATHS = ('embedded', 'pull')


@dataclass(frozen=True)
class SimulationSettings:
    """Engine, rail, ledger and privacy defaults"""

    seed: int = 7
    tick_budget: int = 1000
    pending_credit_timeout: int = 100
    batch_window: int = 50
    rtgs_open: bool = True
    waterfall_mode: str = 'waterfall'
    reverse_waterfall: bool = True
    cbdc_sealing: bool = True
    fmi_confidential_data: str = 'embedded'
    pip_lite_enabled: bool = False
    dcr_validity_ticks: int = 500
    out_dir: str = 'artifacts'

    @classmethod
    def from_yaml(cls, config_path: str = 'config/settings.yaml') -> 'SimulationSettings':
        """Load settings, falling back to defaults for missing keys"""
        with open(config_path, 'r') as f:
            config = yaml.safe_load(f) or {}

        engine = config.get('engine', {})
        rail = config.get('rail', {})
        ledger = config.get('ledger', {})
        privacy = config.get('privacy', {})
        participants = config.get('participants', {})
        reports = config.get('reports', {})

        settings = cls(
            seed=engine.get('seed', 7),
            tick_budget=engine.get('tick_budget', 1000),
            pending_credit_timeout=engine.get('pending_credit_timeout', 100),
            batch_window=rail.get('batch_window', 50),
            rtgs_open=rail.get('rtgs_open', True),
            waterfall_mode=ledger.get('waterfall_mode', 'waterfall'),
            reverse_waterfall=ledger.get('reverse_waterfall', True),
            cbdc_sealing=privacy.get('cbdc_sealing', True),
            fmi_confidential_data=privacy.get('fmi_confidential_data', 'embedded'),
            pip_lite_enabled=participants.get('pip_lite_enabled', False),
            dcr_validity_ticks=participants.get('dcr_validity_ticks', 500),
            out_dir=reports.get('out_dir', 'artifacts'),
        )
        settings.validate()
        logger.debug("[CONFIG] Loaded settings from %s", config_path)
        return settings

    def with_toggles(self, toggles: Optional[Dict]) -> 'SimulationSettings':
        """Return a copy with world-level toggles applied"""
        if not toggles:
            return self
        unknown = sorted(set(toggles) - set(self.__dataclass_fields__))
        if unknown:
            raise ConfigInvalid(f"Unknown toggles: {', '.join(unknown)}")
        updated = replace(self, **toggles)
        updated.validate()
        return updated

    def validate(self):
        if self.waterfall_mode not in WATERFALL_MODES:
            raise ConfigInvalid(f"waterfall_mode must be one of {WATERFALL_MODES}")
        if self.fmi_confidential_data not in FMI_DATA_PATHS:
            raise ConfigInvalid(f"fmi_confidential_data must be one of {FMI_DATA_PATHS}")
        for name in ('tick_budget', 'pending_credit_timeout', 'batch_window', 'dcr_validity_ticks'):
            value = getattr(self, name)
            if not isinstance(value, int) or value <= 0:
                raise ConfigInvalid(f"{name} must be a positive integer, got {value!r}")
