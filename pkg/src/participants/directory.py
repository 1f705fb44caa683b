"""
Alias Directory and Registrations
Alias/PIP lookup, dynamic client registration and network onboarding records
"""

import hashlib
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Set, Tuple

from src.domain.errors import NotRegistered, UnknownAlias
from src.domain.model import Alias, PersonalDatum

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CopPayload:
    """Owner name and target account published with an alias"""

    owner_name: PersonalDatum
    target: str


@dataclass(frozen=True)
class AliasDirectoryEntry:
    alias: Alias
    wallet: str
    pip: str
    pip_endpoints: Tuple[str, ...] = ('cop', 'request-to-pay', 'request-to-lock')
    cop_payload: Optional[CopPayload] = None


class AliasDirectory:
    """Alias and PIP lookup service"""

    def __init__(self):
        self._entries: Dict[Alias, AliasDirectoryEntry] = {}

    def register(self, alias: Alias, wallet: str, pip: str,
                 cop_payload: Optional[CopPayload] = None) -> AliasDirectoryEntry:
        if alias in self._entries:
            raise ValueError(f"Alias {alias} is already registered")
        entry = AliasDirectoryEntry(alias, wallet, pip, cop_payload=cop_payload)
        self._entries[alias] = entry
        return entry

    def alias_lookup(self, alias: Alias) -> AliasDirectoryEntry:
        """
        Resolve an alias to its wallet and servicing PIP

        Raises:
            UnknownAlias: alias not in the directory
        """
        entry = self._entries.get(alias)
        if entry is None:
            raise UnknownAlias(f"No wallet registered for alias {alias}")
        return entry

    def alias_for(self, wallet: str) -> Alias:
        for alias, entry in sorted(self._entries.items(), key=lambda item: item[0].value):
            if entry.wallet == wallet:
                return alias
        raise UnknownAlias(f"No alias registered for wallet {wallet}")

    def publish_cop(self, alias: Alias, payload: CopPayload):
        """Attach confirmation-of-payee data, used when the directory answers CoP itself"""
        entry = self.alias_lookup(alias)
        self._entries[alias] = AliasDirectoryEntry(entry.alias, entry.wallet, entry.pip,
                                                   entry.pip_endpoints, payload)

    def withdraw_cop(self):
        for alias, entry in list(self._entries.items()):
            if entry.cop_payload is not None:
                self._entries[alias] = AliasDirectoryEntry(entry.alias, entry.wallet, entry.pip,
                                                           entry.pip_endpoints)

    def __len__(self) -> int:
        return len(self._entries)


@dataclass(frozen=True)
class DcrRegistration:
    """Software statement granted by a PIP to a registrant"""

    registrant: str
    provider: str
    credential: str
    granted_endpoints: Tuple[str, ...]
    granted_tick: int
    expiry: int

    def valid_at(self, tick: int) -> bool:
        return self.granted_tick <= tick <= self.expiry


class DcrRegistry:
    """Dynamic client registrations plus TSP and network membership"""

    def __init__(self, validity_ticks: int = 500, seed: int = 7):
        self.validity_ticks = validity_ticks
        self.seed = seed
        self._registrations: Dict[Tuple[str, str], DcrRegistration] = {}
        self.aggregator_members: Set[str] = set()
        self.network_members: Set[str] = set()

    def register(self, registrant: str, provider: str, tick: int,
                 endpoints: Tuple[str, ...] = ('cop', 'request-to-pay', 'request-to-lock', 'lock-confirmation'),
                 validity: Optional[int] = None) -> DcrRegistration:
        """Grant a registration in the same tick it is requested"""
        credential = hashlib.sha256(f"{self.seed}:{registrant}:{provider}:{tick}".encode()).hexdigest()[:12]
        registration = DcrRegistration(
            registrant=registrant,
            provider=provider,
            credential=credential,
            granted_endpoints=tuple(endpoints),
            granted_tick=tick,
            expiry=tick + (self.validity_ticks if validity is None else validity),
        )
        self._registrations[(registrant, provider)] = registration
        logger.debug("[OK] DCR %s -> %s until tick %d", registrant, provider, registration.expiry)
        return registration

    def require(self, registrant: str, provider: str, tick: int, endpoint: str) -> DcrRegistration:
        """
        Check a peer-to-peer call is covered by a live registration

        Raises:
            NotRegistered: missing, expired or not granted for the endpoint
        """
        registration = self._registrations.get((registrant, provider))
        if registration is None:
            raise NotRegistered(f"{registrant} has no registration with {provider}", registrant)
        if not registration.valid_at(tick):
            raise NotRegistered(f"Registration of {registrant} with {provider} expired at "
                                f"tick {registration.expiry}", registrant)
        if endpoint not in registration.granted_endpoints:
            raise NotRegistered(f"{registrant} not granted {endpoint} at {provider}", registrant)
        return registration

    def join_aggregator(self, participant: str):
        self.aggregator_members.add(participant)

    def join_network(self, participant: str):
        self.network_members.add(participant)

    def require_aggregator(self, *participants: str):
        for participant in participants:
            if participant not in self.aggregator_members:
                raise NotRegistered(f"{participant} is not onboarded to the TSP aggregator", participant)

    def require_network(self, *participants: str):
        for participant in participants:
            if participant not in self.network_members:
                raise NotRegistered(f"{participant} is not a member of the common network", participant)

    def registrations(self) -> List[DcrRegistration]:
        return [self._registrations[key] for key in sorted(self._registrations)]
