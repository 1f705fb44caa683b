"""
Exposure Analysis
Taint tracking of personal data across a run's messages
"""

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, List, Mapping, Optional, Set, Tuple

from src.domain.model import DatumKind, ParticipantRole, PersonalDatum
from src.privacy.envelope import iter_personal_data

CENTRAL_BANK_ROLES = frozenset({
    ParticipantRole.CENTRAL_BANK_CBDC_SYSTEM,
    ParticipantRole.CENTRAL_BANK_RTGS,
})


class ExposureChannel(Enum):
    PLAINTEXT = 'PlaintextField'
    OPENED = 'OpenedSection'


@dataclass(frozen=True)
class ExposureRow:
    component: str
    role: ParticipantRole
    datum: PersonalDatum
    message: str
    channel: ExposureChannel
    slot: Optional[str] = None

    def line(self) -> str:
        return f"{self.role.value}|{self.datum.kind.value}|{self.message}|{self.channel.value}"


class ExposureReport:
    """Which component could read which personal datum, and through which message"""

    def __init__(self):
        self.rows: List[ExposureRow] = []
        self._seen: Set[ExposureRow] = set()

    def add(self, row: ExposureRow):
        if row not in self._seen:
            self._seen.add(row)
            self.rows.append(row)

    def exposed(self, role: ParticipantRole, kind: Optional[DatumKind] = None,
                slot: Optional[str] = None) -> bool:
        """Role-level predicate: did any component of this role read data of this kind"""
        return any(
            row.role is role
            and (kind is None or row.datum.kind is kind)
            and (slot is None or row.slot == slot)
            for row in self.rows
        )

    def exposed_participant(self, participant: str, kind: Optional[DatumKind] = None,
                            slot: Optional[str] = None) -> bool:
        return any(
            row.component == participant
            and (kind is None or row.datum.kind is kind)
            and (slot is None or row.slot == slot)
            for row in self.rows
        )

    def central_bank_exposed(self, slot: Optional[str] = None) -> bool:
        return any(self.exposed(role, slot=slot) for role in CENTRAL_BANK_ROLES)

    def exposure_set(self) -> Set[Tuple[str, PersonalDatum]]:
        return {(row.component, row.datum) for row in self.rows}

    def lines(self) -> List[str]:
        return [row.line() for row in self.rows]

    def __len__(self) -> int:
        return len(self.rows)


def taint_scan(records: Iterable, roles: Mapping[str, ParticipantRole]) -> ExposureReport:
    """
    Rebuild the exposure report from a completed trace

    Args:
        records: Trace records exposing .envelope and .opened
        roles: Participant id -> role

    Returns:
        ExposureReport with every plaintext handling and successful open
    """
    report = ExposureReport()
    for record in records:
        envelope = record.envelope
        if envelope is None:
            continue
        for datum in iter_personal_data(envelope.plaintext):
            for component in (envelope.sender, envelope.receiver):
                report.add(ExposureRow(component, roles[component], datum, envelope.id,
                                       ExposureChannel.PLAINTEXT, envelope.slot))
        for opened in record.opened:
            for datum in opened.data:
                report.add(ExposureRow(opened.opener, roles[opened.opener], datum, envelope.id,
                                       ExposureChannel.OPENED, envelope.slot))
    return report
