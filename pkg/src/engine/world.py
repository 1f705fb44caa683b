"""
World Configuration
Loads and validates the participants, accounts, wallets and option bindings of a world file
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Tuple

import yaml

from src.domain.errors import ConfigInvalid
from src.domain.model import WALLET_MANAGER_ROLES, Alias, ParticipantRole
from src.domain.settings import SimulationSettings

logger = logging.getLogger(__name__)

# Design options available per capability slot
SLOT_OPTIONS: Dict[str, Tuple[str, ...]] = {
    'U1.S1': ('D1', 'D2', 'D3', 'D4'),
    'U1.S2': ('D1', 'D2', 'D3', 'D4', 'D5', 'D6'),
    'U2.S1': ('D1', 'D2', 'D3'),
    'U2.S2': ('D1', 'D2', 'D3', 'D4', 'D5'),
    'U3.S1': ('D1', 'D2', 'D3'),
    'U3.S2': ('D1', 'D2', 'D3', 'D4', 'D5'),
    'U3.S3': ('D1', 'D2', 'D3'),
}

# Slots each use case exercises
USE_CASE_SLOTS: Dict[str, Tuple[str, ...]] = {
    'U1': ('U1.S1', 'U1.S2'),
    'U2': ('U2.S1', 'U2.S2'),
    'U3': ('U3.S1', 'U3.S2', 'U3.S3', 'U2.S2'),
}

SERVICES = ('cbdc', 'rtgs', 'fps', 'alias', 'tsp', 'network', 'fmi', 'eps')


@dataclass(frozen=True)
class ParticipantSpec:
    id: str
    role: ParticipantRole
    institution: Optional[str] = None
    display_name: Optional[str] = None
    wiring: Dict[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class SettlementAccountSpec:
    name: str
    holder: str
    sort_code: str
    number: str
    balance: int = 0
    fps_reachable: bool = True


@dataclass(frozen=True)
class CustomerAccountSpec:
    name: str
    bank: str
    owner: str
    sort_code: str
    number: str
    balance: int = 0


@dataclass(frozen=True)
class WalletSpec:
    name: str
    owner: str
    pip: str
    balance: int = 0
    holding_limit: Optional[int] = None
    technical: bool = False
    linked_account: Optional[str] = None


@dataclass(frozen=True)
class FpsSpec:
    participant: str
    kind: str
    sort_code: str
    sponsor: Optional[str] = None


@dataclass(frozen=True)
class DcrSpec:
    registrant: str
    provider: str
    validity: Optional[int] = None


@dataclass
class WorldConfig:
    """A parsed world file"""

    path: str
    settings: SimulationSettings
    bindings: Dict[str, str]
    participants: List[ParticipantSpec]
    services: Dict[str, str]
    backing_account: str
    settlement_accounts: List[SettlementAccountSpec] = field(default_factory=list)
    customer_accounts: List[CustomerAccountSpec] = field(default_factory=list)
    fps: List[FpsSpec] = field(default_factory=list)
    wallets: List[WalletSpec] = field(default_factory=list)
    aliases: Dict[str, str] = field(default_factory=dict)
    dcr: List[DcrSpec] = field(default_factory=list)
    onboarding: Dict[str, List[str]] = field(default_factory=dict)
    compliance: Dict[str, bool] = field(default_factory=dict)

    @property
    def seed(self) -> int:
        return self.settings.seed

    def participant(self, pid: str) -> ParticipantSpec:
        for spec in self.participants:
            if spec.id == pid:
                return spec
        raise ConfigInvalid(f"Unknown participant {pid}")

    @property
    def participant_ids(self) -> List[str]:
        return [spec.id for spec in self.participants]

    def with_bindings(self, bindings: Dict[str, str]) -> 'WorldConfig':
        """Copy of the world with some slots re-bound"""
        merged = dict(self.bindings)
        merged.update(bindings)
        copy = WorldConfig(**{**self.__dict__, 'bindings': merged})
        copy.validate()
        return copy

    def with_settings(self, **toggles) -> 'WorldConfig':
        copy = WorldConfig(**{**self.__dict__, 'settings': self.settings.with_toggles(toggles)})
        copy.validate()
        return copy

    def with_wallet_balances(self, balances: Dict[str, int]) -> 'WorldConfig':
        wallets = [
            WalletSpec(**{**w.__dict__, 'balance': balances.get(w.name, w.balance)}) for w in self.wallets
        ]
        return WorldConfig(**{**self.__dict__, 'wallets': wallets})

    def with_account_balances(self, balances: Dict[str, int]) -> 'WorldConfig':
        """Copy with some settlement or customer account balances replaced, by account name"""
        settlement = [
            SettlementAccountSpec(**{**a.__dict__, 'balance': balances.get(a.name, a.balance)})
            for a in self.settlement_accounts
        ]
        customer = [
            CustomerAccountSpec(**{**a.__dict__, 'balance': balances.get(a.name, a.balance)})
            for a in self.customer_accounts
        ]
        return WorldConfig(**{**self.__dict__, 'settlement_accounts': settlement, 'customer_accounts': customer})

    def require_bindings(self, slots: Iterable[str]):
        """
        Check every slot a scenario needs is bound

        Raises:
            ConfigInvalid: naming the first empty slot
        """
        for slot in slots:
            if slot not in self.bindings:
                raise ConfigInvalid(f"World {self.path} has no binding for slot {slot}")

    def validate(self):
        """Check references between sections; raises ConfigInvalid naming the culprit"""
        ids = set()
        for spec in self.participants:
            if spec.id in ids:
                raise ConfigInvalid(f"Duplicate participant {spec.id}")
            ids.add(spec.id)
            if spec.role is ParticipantRole.PIP_LITE and not self.settings.pip_lite_enabled:
                raise ConfigInvalid(f"{spec.id} is a PipLite but participants.pip_lite_enabled is off")

        for slot, option in self.bindings.items():
            if slot not in SLOT_OPTIONS:
                raise ConfigInvalid(f"Unknown capability slot {slot}")
            if option not in SLOT_OPTIONS[slot]:
                raise ConfigInvalid(f"Slot {slot} has no option {option}")

        for name in SERVICES:
            service = self.services.get(name)
            if service is not None and service not in ids:
                raise ConfigInvalid(f"Service {name} names unknown participant {service}")

        accounts = {a.name for a in self.settlement_accounts} | {a.name for a in self.customer_accounts}
        wallets = {w.name for w in self.wallets}
        for account in self.settlement_accounts:
            self._known(account.holder, ids, f"settlement account {account.name}")
        for account in self.customer_accounts:
            self._known(account.bank, ids, f"customer account {account.name}")
            self._known(account.owner, ids, f"customer account {account.name}")
        if self.backing_account not in accounts:
            raise ConfigInvalid(f"Backing account {self.backing_account} is not declared")

        roles = {spec.id: spec.role for spec in self.participants}
        for wallet in self.wallets:
            self._known(wallet.owner, ids, f"wallet {wallet.name}")
            if roles.get(wallet.pip) not in WALLET_MANAGER_ROLES:
                raise ConfigInvalid(f"Wallet {wallet.name} is managed by {wallet.pip}, which cannot manage wallets")
            if wallet.linked_account and wallet.linked_account not in accounts:
                raise ConfigInvalid(f"Wallet {wallet.name} links unknown account {wallet.linked_account}")

        for alias, wallet in self.aliases.items():
            try:
                Alias.parse(alias)
            except ValueError as e:
                raise ConfigInvalid(str(e)) from e
            if wallet not in wallets:
                raise ConfigInvalid(f"Alias {alias} points at unknown wallet {wallet}")

        for fps in self.fps:
            self._known(fps.participant, ids, "fps registration")
            if fps.kind not in ('DCSP', 'DCNSP'):
                raise ConfigInvalid(f"FPS participation {fps.kind} of {fps.participant} is not DCSP/DCNSP")
        for dcr in self.dcr:
            self._known(dcr.registrant, ids, "dcr registration")
            self._known(dcr.provider, ids, "dcr registration")
        for members in self.onboarding.values():
            for member in members:
                self._known(member, ids, "onboarding list")

        refs = ids | accounts | wallets
        for spec in self.participants:
            for key, value in spec.wiring.items():
                if value not in refs:
                    raise ConfigInvalid(f"{spec.id} wiring {key} names unknown {value}")

    @staticmethod
    def _known(pid: str, ids: set, where: str):
        if pid not in ids:
            raise ConfigInvalid(f"Unknown participant {pid} in {where}")

    @classmethod
    def load(cls, path: str, settings: Optional[SimulationSettings] = None) -> 'WorldConfig':
        """
        Parse and validate a world file

        Args:
            path: World YAML file
            settings: Base settings the file's toggles override

        Returns:
            Validated WorldConfig
        """
        try:
            with open(path, 'r') as f:
                doc = yaml.safe_load(f) or {}
        except OSError as e:
            raise ConfigInvalid(f"Cannot read world file {path}: {e}") from e
        except yaml.YAMLError as e:
            raise ConfigInvalid(f"World file {path} is not valid YAML: {e}") from e
        world = cls.from_dict(doc, path, settings)
        logger.info("[CONFIG] Loaded world %s (%d participants)", path, len(world.participants))
        return world

    @classmethod
    def from_dict(cls, doc: Dict[str, Any], path: str = '<memory>',
                  settings: Optional[SimulationSettings] = None) -> 'WorldConfig':
        if not isinstance(doc, dict):
            raise ConfigInvalid(f"World {path} must be a mapping")
        base = settings or SimulationSettings()
        toggles = dict(doc.get('toggles') or {})
        if 'seed' in doc:
            toggles['seed'] = doc['seed']

        try:
            participants = [
                ParticipantSpec(
                    id=pid,
                    role=ParticipantRole.parse(body['role']),
                    institution=body.get('institution'),
                    display_name=body.get('name'),
                    wiring=dict(body.get('wiring') or {}),
                )
                for pid, body in (doc.get('participants') or {}).items()
            ]
            world = cls(
                path=path,
                settings=base.with_toggles(toggles),
                bindings={str(k): str(v) for k, v in (doc.get('bindings') or {}).items()},
                participants=participants,
                services=dict(doc.get('services') or {}),
                backing_account=doc.get('backing_account', ''),
                settlement_accounts=[SettlementAccountSpec(name=n, **b)
                                     for n, b in (doc.get('settlement_accounts') or {}).items()],
                customer_accounts=[CustomerAccountSpec(name=n, **b)
                                   for n, b in (doc.get('customer_accounts') or {}).items()],
                fps=[FpsSpec(participant=p, **b) for p, b in (doc.get('fps') or {}).items()],
                wallets=[WalletSpec(name=n, **b) for n, b in (doc.get('wallets') or {}).items()],
                aliases={str(k): v for k, v in (doc.get('aliases') or {}).items()},
                dcr=[DcrSpec(**b) for b in (doc.get('dcr') or [])],
                onboarding={k: list(v or []) for k, v in (doc.get('onboarding') or {}).items()},
                compliance={k: v in (True, 'pass') for k, v in (doc.get('compliance') or {}).items()},
            )
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigInvalid(f"World {path} is malformed: {e}") from e
        world.validate()
        return world
