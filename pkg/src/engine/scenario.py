"""
Scenario Scripts
Use case, actors, scripted user events and expected postconditions
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import yaml

from src.domain.errors import ConfigInvalid

logger = logging.getLogger(__name__)

USE_CASES = ('U1', 'U2', 'U3')

# Events a script may carry; the value is the acting participant (or a parameter)
EVENT_KINDS = (
    'initiate', 'authorise', 'reject', 'consumer_reject', 'deliver', 'delivery_failed',
    'scheme_failure', 'invalid_alias', 'pip_timeout', 'pip_reject', 'compliance_fail', 'advance',
)

FAILURE_EVENTS = (
    'reject', 'consumer_reject', 'delivery_failed', 'scheme_failure', 'invalid_alias',
    'pip_timeout', 'pip_reject', 'compliance_fail',
)

ACTORS = {
    'U1': ('payer', 'payee'),
    'U2': ('consumer', 'merchant', 'acquirer'),
    'U3': ('consumer', 'merchant', 'acquirer', 'delivery_agent'),
}

SUCCESS_CLAUSES = {
    'U1': ('payer_debited', 'payee_credited', 'cross_ledger_settled', 'payer_notified', 'payee_notified'),
    'U2': ('consumer_debited', 'merchant_credited', 'cross_ledger_settled', 'merchant_notified',
           'product_delivered'),
    'U3': ('funds_locked', 'consumer_debited', 'merchant_credited', 'lock_released', 'merchant_notified',
           'delivery_agent_notified'),
}

FAILURE_CLAUSES = {
    'U1': ('no_funds_moved', 'payer_notified'),
    'U2': ('no_funds_moved', 'merchant_notified'),
    'U3': ('no_funds_moved', 'funds_unlocked'),
}


@dataclass(frozen=True)
class ScenarioEvent:
    action: str
    value: Any = None


@dataclass
class Scenario:
    """A scripted run of one use case"""

    path: str
    use_case: str
    name: str
    amount: int
    actors: Dict[str, str]
    events: List[ScenarioEvent] = field(default_factory=list)
    expect: Dict[str, Any] = field(default_factory=dict)
    alias: Optional[str] = None
    lock_ticks: int = 200

    @property
    def expected_outcome(self) -> str:
        return self.expect.get('outcome', 'success')

    @property
    def clauses(self) -> List[str]:
        """Postcondition clauses to decide; defaults follow the expected outcome"""
        if 'clauses' in self.expect:
            return list(self.expect['clauses'])
        table = SUCCESS_CLAUSES if self.expected_outcome == 'success' else FAILURE_CLAUSES
        return list(table[self.use_case])

    def event(self, action: str) -> Optional[ScenarioEvent]:
        for event in self.events:
            if event.action == action:
                return event
        return None

    def has(self, action: str) -> bool:
        return self.event(action) is not None

    def actor(self, name: str) -> str:
        return self.actors[name]

    def validate(self, world=None):
        """
        Check the script is well formed and, given a world, that its actors exist

        Raises:
            ConfigInvalid
        """
        if self.use_case not in USE_CASES:
            raise ConfigInvalid(f"Scenario {self.path}: unknown use case {self.use_case}")
        if not isinstance(self.amount, int) or isinstance(self.amount, bool) or self.amount <= 0:
            raise ConfigInvalid(f"Scenario {self.path}: amount must be a positive number of pence")
        for role in ACTORS[self.use_case]:
            if role not in self.actors:
                raise ConfigInvalid(f"Scenario {self.path}: missing actor {role}")
        for event in self.events:
            if event.action not in EVENT_KINDS:
                raise ConfigInvalid(f"Scenario {self.path}: unknown event {event.action}")
        if self.expected_outcome not in ('success', 'failure'):
            raise ConfigInvalid(f"Scenario {self.path}: outcome must be success or failure")

        if world is not None:
            known = set(world.participant_ids)
            for role, pid in sorted(self.actors.items()):
                if pid not in known:
                    raise ConfigInvalid(f"Scenario {self.path}: actor {role}={pid} is not in world {world.path}")
            for event in self.events:
                if event.action in ('initiate', 'authorise', 'reject', 'pip_reject', 'pip_timeout',
                                    'compliance_fail') and isinstance(event.value, str) and event.value not in known:
                    raise ConfigInvalid(f"Scenario {self.path}: event {event.action} names unknown {event.value}")

    @classmethod
    def load(cls, path: str) -> 'Scenario':
        try:
            with open(path, 'r') as f:
                doc = yaml.safe_load(f) or {}
        except OSError as e:
            raise ConfigInvalid(f"Cannot read scenario file {path}: {e}") from e
        except yaml.YAMLError as e:
            raise ConfigInvalid(f"Scenario file {path} is not valid YAML: {e}") from e
        scenario = cls.from_dict(doc, path)
        logger.info("[CONFIG] Loaded scenario %s (%s)", scenario.name, scenario.use_case)
        return scenario

    @classmethod
    def from_dict(cls, doc: Dict[str, Any], path: str = '<memory>') -> 'Scenario':
        if not isinstance(doc, dict):
            raise ConfigInvalid(f"Scenario {path} must be a mapping")
        events = []
        for item in doc.get('events') or []:
            if isinstance(item, str):
                events.append(ScenarioEvent(item))
            elif isinstance(item, dict) and len(item) == 1:
                action, value = next(iter(item.items()))
                events.append(ScenarioEvent(str(action), value))
            else:
                raise ConfigInvalid(f"Scenario {path}: event {item!r} must be a name or a one-key mapping")
        try:
            scenario = cls(
                path=path,
                use_case=str(doc['use_case']),
                name=str(doc.get('name', path)),
                amount=doc['amount'],
                actors={str(k): str(v) for k, v in (doc.get('actors') or {}).items()},
                events=events,
                expect=dict(doc.get('expect') or {}),
                alias=str(doc['alias']) if doc.get('alias') is not None else None,
                lock_ticks=int(doc.get('lock_ticks', 200)),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigInvalid(f"Scenario {path} is malformed: {e}") from e
        scenario.validate()
        return scenario
