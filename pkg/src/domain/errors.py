"""
Simulator Errors
One exception hierarchy for every failure the ecosystem can signal
"""

from typing import Optional


class DigitalPoundError(Exception):
    """Base class for all simulator errors"""

    def __init__(self, message: str = '', participant: Optional[str] = None):
        super().__init__(message or self.__class__.__name__)
        self.participant = participant

    @property
    def kind(self) -> str:
        return self.__class__.__name__


# Money

class InvalidAmount(DigitalPoundError):
    """Amount is not a non-negative whole number of pence"""


class MoneyOverflow(DigitalPoundError):
    """Sum exceeds the representable range"""


class MoneyUnderflow(DigitalPoundError):
    """Subtraction would go below zero"""


# Core ledger

class LedgerError(DigitalPoundError):
    """Base for CBDC core ledger errors"""


class UnknownParticipant(LedgerError):
    pass


class UnknownWallet(LedgerError):
    pass


class TechnicalWithLimit(LedgerError):
    pass


class WrongPip(LedgerError):
    pass


class AlreadyDecided(LedgerError):
    pass


class NoLinkedAccount(LedgerError):
    pass


class InsufficientAvailable(LedgerError):
    """Debit would breach locks or the minimum available balance"""

    def __init__(self, message: str = '', participant: Optional[str] = None,
                 needed: int = 0, available: int = 0):
        super().__init__(message, participant)
        self.needed = needed
        self.available = available


class Unauthorised(LedgerError):
    pass


class UnknownPendingCredit(LedgerError):
    pass


class LockNotActive(LedgerError):
    pass


class HoldingLimitExceeded(LedgerError):
    """Credit rejected because it would breach the holding limit"""


# Settlement rail

class RailError(DigitalPoundError):
    """Base for RTGS / FPS / enhanced payment system errors"""


class InsufficientFunds(RailError):
    pass


class UnknownDestination(RailError):
    pass


class UnknownAccount(RailError):
    pass


class DuplicateInstruction(RailError):
    pass


class SponsorNotDcsp(RailError):
    pass


class NotOnboarded(RailError):
    pass


class CoreDebitFailed(RailError):
    pass


class InsufficientSettlementFunds(RailError):
    pass


class RtgsClosed(RailError):
    pass


class SchemeFailure(RailError):
    """Payment scheme rejected the instruction"""


# Privacy

class PrivacyError(DigitalPoundError):
    pass


class UnknownRecipientKey(PrivacyError):
    pass


class NotRecipient(PrivacyError):
    pass


class UnknownSection(PrivacyError):
    pass


# Participants

class ParticipantError(DigitalPoundError):
    pass


class UnknownAlias(ParticipantError):
    pass


class NotRegistered(ParticipantError):
    pass


class NoPartnerPip(ParticipantError):
    pass


class ConsumerRejected(ParticipantError):
    pass


class PipRejected(ParticipantError):
    pass


class ComplianceFailed(ParticipantError):
    pass


class LiquidityShortfall(ParticipantError):
    """An intermediary lacks the funds an option needs it to front"""


class RoutingError(ParticipantError):
    """A message reached a role that does not admit its kind"""


# Engine

class EngineError(DigitalPoundError):
    pass


class ConfigInvalid(EngineError):
    pass


class ScenarioDeadlock(EngineError):
    pass


class TraceMismatch(EngineError):
    pass


class InvariantViolation(EngineError):
    pass
