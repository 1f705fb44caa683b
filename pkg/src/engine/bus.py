"""
Message Bus
Deterministic delivery of envelopes between participants, recording the trace
"""

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Callable, Deque, Dict, List, Mapping, Optional, Set

from src.domain.clock import SimClock
from src.domain.errors import DigitalPoundError, RoutingError, ScenarioDeadlock
from src.domain.ids import IdKind, IdSource
from src.domain.model import ParticipantRole
from src.ledger.journal import Journal, JournalEntry
from src.privacy.envelope import Envelope, KeyDirectory, OpenedSection, SealedSection, iter_personal_data
from src.privacy.taint import ExposureChannel, ExposureReport, ExposureRow

logger = logging.getLogger(__name__)


@dataclass
class TraceRecord:
    """One delivery (or engine step) and the ledger deltas it caused"""

    tick: int
    envelope: Optional[Envelope]
    handler: str
    deltas: List[JournalEntry] = field(default_factory=list)
    opened: List[OpenedSection] = field(default_factory=list)
    error: Optional[str] = None

    def lines(self, roles: Mapping[str, ParticipantRole]) -> List[str]:
        lines = []
        if self.envelope is not None:
            env = self.envelope
            lines.append(
                f"{self.tick}|msg|{roles[env.sender].value}|{roles[env.receiver].value}"
                f"|{env.kind}|{env.sealed_count}"
            )
        lines.extend(delta.line() for delta in self.deltas)
        return lines


@dataclass
class Delivery:
    envelope: Envelope
    result: Any = None


class MessageBus:
    """FIFO per sender, round-robin across senders, one round per tick"""

    def __init__(self, clock: SimClock, ids: IdSource, journal: Journal, keys: KeyDirectory,
                 roles: Mapping[str, ParticipantRole], tick_budget: int = 1000):
        self.clock = clock
        self.ids = ids
        self.journal = journal
        self.keys = keys
        self.roles = roles
        self.tick_budget = tick_budget

        self.participants: Dict[str, Any] = {}
        self.records: List[TraceRecord] = []
        self.exposures = ExposureReport()
        self.tick_hooks: List[Callable[[int], None]] = []
        self._queues: Dict[str, Deque[Envelope]] = {}
        self._by_message: Dict[str, TraceRecord] = {}
        self._results: Dict[str, Any] = {}
        self._failures: Dict[str, DigitalPoundError] = {}
        self._claimed: Set[int] = set()

    def register(self, participant):
        self.participants[participant.id] = participant

    # Sending

    def envelope(self, sender: str, receiver: str, kind: str, plaintext: Optional[Dict] = None,
                 sealed: Optional[List[SealedSection]] = None, slot: Optional[str] = None,
                 in_reply_to: Optional[str] = None) -> Envelope:
        return Envelope(
            id=self.ids.next_id(IdKind.MESSAGE),
            sender=sender,
            receiver=receiver,
            kind=kind,
            plaintext=dict(plaintext or {}),
            sealed=list(sealed or []),
            slot=slot,
            in_reply_to=in_reply_to,
        )

    def post(self, env: Envelope) -> Envelope:
        """Queue an envelope without waiting for it"""
        self._queues.setdefault(env.sender, deque()).append(env)
        return env

    def send(self, sender: str, receiver: str, kind: str, plaintext: Optional[Dict] = None,
             sealed: Optional[List[SealedSection]] = None, slot: Optional[str] = None,
             in_reply_to: Optional[str] = None) -> Delivery:
        """
        Post an envelope and run the bus until it has been handled

        Returns:
            Delivery with the receiver's handler result

        Raises:
            The domain error the receiver's handler raised, if any
        """
        env = self.post(self.envelope(sender, receiver, kind, plaintext, sealed, slot, in_reply_to))
        self.pump()
        if env.id in self._failures:
            raise self._failures.pop(env.id)
        if env.id not in self._by_message:
            raise ScenarioDeadlock(f"{kind} from {sender} to {receiver} was never delivered")
        return Delivery(env, self._results.pop(env.id, None))

    def pump(self):
        """Deliver queued envelopes until every queue is empty"""
        while any(self._queues.values()):
            self.advance()
            for sender in sorted(s for s, q in self._queues.items() if q):
                self._deliver(self._queues[sender].popleft())

    def advance(self, ticks: int = 1):
        """Move the clock forward, running engine hooks on each tick"""
        for _ in range(ticks):
            now = self.clock.advance()
            if now > self.tick_budget:
                raise ScenarioDeadlock(f"Tick budget of {self.tick_budget} exhausted")
            cursor = self.journal.cursor
            for hook in self.tick_hooks:
                hook(now)
            deltas = self._claim(cursor)
            if deltas:
                self.records.append(TraceRecord(now, None, 'engine.tick', deltas))

    # Privacy

    def open_sections(self, env: Envelope, opener: str) -> Dict[str, Any]:
        """Open every section addressed to opener and attribute the exposure to env"""
        before = len(self.keys.openings)
        fields = self.keys.open_all(env, opener)
        record = self._by_message.get(env.id)
        for opened in self.keys.openings[before:]:
            if record is not None and opened not in record.opened:
                record.opened.append(opened)
            for datum in opened.data:
                self.exposures.add(ExposureRow(opener, self.roles[opener], datum, env.id,
                                               ExposureChannel.OPENED, env.slot))
        return fields

    # Engine steps outside message delivery

    def record_step(self, handler: str, action: Callable[[], Any]) -> Any:
        """Run an engine-side action and keep its deltas on the trace"""
        cursor = self.journal.cursor
        try:
            return action()
        finally:
            deltas = self._claim(cursor)
            if deltas:
                self.records.append(TraceRecord(self.clock.now, None, handler, deltas))

    # Delivery

    def _deliver(self, env: Envelope):
        record = TraceRecord(self.clock.now, env, f"{env.receiver}.{env.kind}")
        self.records.append(record)
        self._by_message[env.id] = record
        cursor = self.journal.cursor

        receiver = self.participants.get(env.receiver)
        try:
            if receiver is None:
                raise RoutingError(f"No participant {env.receiver} for {env.kind}", env.receiver)
            if not receiver.admits(env.kind):
                raise RoutingError(
                    f"{receiver.role.value} {env.receiver} does not admit {env.kind}", env.receiver)
            for datum in iter_personal_data(env.plaintext):
                for component in (env.sender, env.receiver):
                    self.exposures.add(ExposureRow(component, self.roles[component], datum, env.id,
                                                   ExposureChannel.PLAINTEXT, env.slot))
            self._results[env.id] = receiver.handle(env)
        except DigitalPoundError as e:
            record.error = e.kind
            self._failures[env.id] = e
            logger.debug("[ERROR] %s failed at %s: %s", env.kind, env.receiver, e)
        finally:
            record.deltas = self._claim(cursor)

    def _claim(self, cursor: int) -> List[JournalEntry]:
        # nested deliveries claim their own entries first
        deltas = []
        for index, entry in enumerate(self.journal.since(cursor), start=cursor):
            if index not in self._claimed:
                self._claimed.add(index)
                deltas.append(entry)
        return deltas
