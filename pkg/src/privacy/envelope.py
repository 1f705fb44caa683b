"""
Message Envelopes
Plaintext routing fields plus sealed sections readable only by the key owner
"""

import hashlib
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Iterator, List, Mapping, Optional, Tuple

from src.domain.errors import NotRecipient, UnknownRecipientKey, UnknownSection
from src.domain.model import PersonalDatum

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SealedSection:
    """Fields addressed to one recipient's key"""

    recipient: str
    capability: str
    _fields: Tuple[Tuple[str, Any], ...] = field(repr=False, default=())

    def __repr__(self) -> str:
        return f"SealedSection(recipient={self.recipient!r}, fields=<sealed>)"


@dataclass
class Envelope:
    """One message on the bus"""

    id: str
    sender: str
    receiver: str
    kind: str
    plaintext: Dict[str, Any] = field(default_factory=dict)
    sealed: List[SealedSection] = field(default_factory=list)
    slot: Optional[str] = None
    in_reply_to: Optional[str] = None

    @property
    def sealed_count(self) -> int:
        return len(self.sealed)

    def get(self, name: str, default: Any = None) -> Any:
        return self.plaintext.get(name, default)


@dataclass(frozen=True)
class OpenedSection:
    """Record of a successful open, kept on the trace"""

    message: str
    section_index: int
    opener: str
    data: Tuple[PersonalDatum, ...]


def iter_personal_data(value: Any) -> Iterator[PersonalDatum]:
    """Walk nested field values yielding every PersonalDatum"""
    if isinstance(value, PersonalDatum):
        yield value
    elif isinstance(value, Mapping):
        for key in sorted(value, key=str):
            yield from iter_personal_data(value[key])
    elif isinstance(value, (list, tuple, set, frozenset)):
        for item in value:
            yield from iter_personal_data(item)


class KeyDirectory:
    """Key material modeled as unforgeable capability tokens"""

    def __init__(self, seed: int = 7):
        self.seed = seed
        self._capabilities: Dict[str, str] = {}
        self.exchange_log: List[Tuple[str, str]] = []
        self.openings: List[OpenedSection] = []
        self.seal_count = 0
        self.open_count = 0

    def register(self, participant: str) -> str:
        token = hashlib.sha256(f"{self.seed}:{participant}".encode()).hexdigest()[:16]
        self._capabilities[participant] = token
        return token

    def revoke(self, participant: str):
        self._capabilities.pop(participant, None)

    def exchange(self, a: str, b: str):
        """Two participants exchange keys during onboarding"""
        for participant in (a, b):
            if participant not in self._capabilities:
                self.register(participant)
        self.exchange_log.append((a, b))

    def is_registered(self, participant: str) -> bool:
        return participant in self._capabilities

    @property
    def registered(self) -> List[str]:
        return sorted(self._capabilities)

    def seal(self, fields: Mapping[str, Any], recipient: str) -> SealedSection:
        """
        Seal fields for a recipient

        Raises:
            UnknownRecipientKey: recipient has no key in the directory
        """
        capability = self._capabilities.get(recipient)
        if capability is None:
            raise UnknownRecipientKey(f"No key registered for {recipient}", recipient)
        self.seal_count += 1
        return SealedSection(recipient, capability, tuple(sorted(fields.items())))

    def open_section(self, env: Envelope, section_index: int, opener: str) -> Dict[str, Any]:
        """
        Open one sealed section of an envelope

        Raises:
            NotRecipient: opener does not hold the section's capability
            UnknownSection: the envelope has no section at that index
        """
        if not 0 <= section_index < len(env.sealed):
            raise UnknownSection(f"{env.id} has no sealed section {section_index}", opener)
        section = env.sealed[section_index]
        if self._capabilities.get(opener) != section.capability:
            raise NotRecipient(f"{opener} cannot open section {section_index} of {env.id}", opener)
        self.open_count += 1
        fields = dict(section._fields)
        data = tuple(iter_personal_data(fields))
        opened = OpenedSection(env.id, section_index, opener, data)
        if opened not in self.openings:
            self.openings.append(opened)
        return fields

    def open_all(self, env: Envelope, opener: str) -> Dict[str, Any]:
        """Open every section addressed to the opener"""
        merged: Dict[str, Any] = {}
        for index, section in enumerate(env.sealed):
            if section.recipient == opener:
                merged.update(self.open_section(env, index, opener))
        return merged

    def key_metric(self) -> Dict[str, int]:
        return {
            'seals': self.seal_count,
            'opens': self.open_count,
            'directory_entries': len(self._capabilities),
        }
