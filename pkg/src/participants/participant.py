"""
Ecosystem Participants
Per-role state machines: what each component admits, stores and answers
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, FrozenSet, List, Optional

from src.domain.errors import InsufficientAvailable, LockNotActive
from src.domain.ids import IdKind
from src.domain.model import Alias, DatumKind, ParticipantRole, PersonalDatum
from src.domain.money import Money, money_sum
from src.ledger.core_ledger import FundingSource, LockState
from src.participants.directory import CopPayload
from src.privacy.envelope import Envelope
from src.rail.enhanced_payments import EpsDirection

logger = logging.getLogger(__name__)

_NOTIFY = {'Notification', 'PaymentNotification'}
_REQUESTS = {'RequestToPay', 'RequestToLock', 'RequestToPayResponse', 'RequestToLockResponse'}

# Message kinds each role may process; anything else is a routing error
ROLE_ADMITS: Dict[ParticipantRole, FrozenSet[str]] = {
    ParticipantRole.CENTRAL_BANK_CBDC_SYSTEM: frozenset({
        'CopRequest', 'CopResponse', 'FpsCreditNotification', 'CreditApproval',
        'TransferInstruction', 'PaymentInstruction', 'ReleaseAndPayInstruction',
        'CancelLockInstruction', 'LockFundsInstruction', 'DebitInstruction',
        'CreditInstruction', 'LockConfirmation', *_REQUESTS,
    }),
    ParticipantRole.CENTRAL_BANK_RTGS: frozenset(),
    ParticipantRole.PIP: frozenset({
        'AliasResult', 'CopRequest', 'CopResponse', 'CreditApprovalRequest', 'CreditNotification',
        'FpsCreditNotification', 'PayerDetailsRequest', 'PayerDetailsResponse',
        'FundsTransferRequest', 'ConfidentialDataRequest', 'ConfidentialDataResponse',
        'AuthorisationDecision', 'PaymentDetailsRequest', 'PaymentDetailsResponse',
        'LockConfirmation', 'ReleaseAuthorisation', *_REQUESTS, *_NOTIFY,
    }),
    ParticipantRole.PIP_LITE: frozenset({
        'CreditNotification', 'PayerDetailsRequest', 'FundsTransferRequest', *_NOTIFY,
    }),
    ParticipantRole.COMMERCIAL_BANK: frozenset({
        'PaymentInitiation', 'PaymentAuthorisation', 'AliasResult', 'CopResponse',
        'FpsCreditNotification', 'FundsOutRequest', 'AccountCreditInstruction',
        'SweepRequest', *_NOTIFY,
    }),
    ParticipantRole.ACQUIRER: frozenset({
        'PaymentRequestInitiation', 'LockRequestInitiation', 'AliasResult',
        'RequestToPayResponse', 'RequestToLockResponse', 'LockConfirmation', *_NOTIFY,
    }),
    ParticipantRole.TSP: frozenset({
        'CopRequest', 'CopResponse', 'CopLookup', 'CopDataSync', 'LockConfirmation', *_REQUESTS,
    }),
    ParticipantRole.FMI: frozenset({
        'FpsCreditNotification', 'CreditNotification', 'ConfidentialDataRequest',
        'ConfidentialDataResponse', 'EscrowRequest', 'ReleaseInstruction',
        'EscrowRefundRequest', *_NOTIFY,
    }),
    ParticipantRole.ALIAS_SERVICE: frozenset({'AliasLookup'}),
    ParticipantRole.ENHANCED_PAYMENT_SYSTEM: frozenset({'EpsPaymentRequest'}),
    ParticipantRole.USER: frozenset({
        'CopResult', 'AuthorisationPrompt', 'Checkout', 'PaymentConfirmation',
        'DeliveryAttempt', 'DeliveryFailed', 'ProductDelivery', *_NOTIFY,
    }),
    ParticipantRole.DELIVERY_AGENT: frozenset({'DispatchOrder', *_NOTIFY}),
    ParticipantRole.FPS_SCHEME: frozenset({'FpsPayment', 'FpsReturn'}),
}


class Participant:
    """Base state machine: admits, opens what is addressed to it, dispatches to a handler"""

    def __init__(self, pid: str, role: ParticipantRole, eco, institution: Optional[str] = None,
                 wiring: Optional[Dict[str, str]] = None, display_name: Optional[str] = None):
        self.id = pid
        self.role = role
        self.eco = eco
        self.institution = institution or pid
        self.wiring: Dict[str, str] = dict(wiring or {})
        self.display_name = display_name or pid
        self.handlers: Dict[str, Callable[[Envelope, Dict[str, Any]], Any]] = {}
        self.inbox: List[Envelope] = []
        self.records: Dict[str, Dict[str, Any]] = {}
        self.compliance_pass = True

    def admits(self, kind: str) -> bool:
        return kind in ROLE_ADMITS[self.role]

    def handle(self, env: Envelope) -> Any:
        self.inbox.append(env)
        fields = dict(env.plaintext)
        if any(section.recipient == self.id for section in env.sealed):
            fields.update(self.eco.bus.open_sections(env, self.id))
        handler = self.handlers.get(env.kind)
        if handler is None:
            logger.debug("[OK] %s accepted %s from %s", self.id, env.kind, env.sender)
            return fields
        return handler(env, fields)

    def wired(self, name: str) -> Optional[str]:
        return self.wiring.get(name)

    # Local store keyed by payment reference

    def remember(self, env: Envelope, fields: Dict[str, Any]) -> Dict[str, Any]:
        reference = fields.get('reference') or env.id
        self.records.setdefault(reference, {}).update(fields)
        return fields

    def recall(self, env: Envelope, fields: Dict[str, Any]) -> Dict[str, Any]:
        return dict(self.records.get(fields.get('reference'), {}))

    def datum(self, kind: DatumKind = DatumKind.NAME, value: Optional[str] = None) -> PersonalDatum:
        """Personal datum about this participant"""
        return PersonalDatum(self.id, kind, value if value is not None else self.display_name)

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}({self.id!r}, {self.role.value})"


class CentralBankSystem(Participant):
    """Digital pound core ledger operator; also the DCSP holding the backing account"""

    def __init__(self, pid, role, eco, **kwargs):
        super().__init__(pid, role, eco, **kwargs)
        self.handlers.update({
            'FpsCreditNotification': self._on_fps_credit,
            'CreditApproval': self._on_credit_approval,
            'TransferInstruction': self._on_transfer,
            'PaymentInstruction': self._on_payment,
            'ReleaseAndPayInstruction': self._on_release_and_pay,
            'CancelLockInstruction': self._on_cancel_lock,
            'LockFundsInstruction': self._on_lock_funds,
            'DebitInstruction': self._on_debit,
            'CreditInstruction': self._on_credit,
        })

    def _on_fps_credit(self, env, fields):
        funding = FundingSource('rail', self.eco.backing_account, fields.get('return_to'))
        return self.eco.core.mint_to(fields['wallet'], fields['amount'], funding, env.id)

    def _on_credit_approval(self, env, fields):
        return self.eco.core.confirm_credit(fields['pending'], env.sender, fields.get('approve', True),
                                            fields.get('reason', ''))

    def _on_transfer(self, env, fields):
        return self.eco.core.transfer(
            fields['from_wallet'], fields['to_wallet'], fields['amount'],
            by_pip=fields.get('authorised_by', env.sender),
            min_available_balance=fields.get('min_available', Money(0)),
            envelope_ref=env.id,
            return_to=fields.get('return_to'),
        )

    def _on_payment(self, env, fields):
        return self.eco.core.burn_from(fields['wallet'], fields['amount'], self.eco.backing_account,
                                       env.sender, fields.get('min_available', Money(0)))

    def _on_release_and_pay(self, env, fields):
        return self.eco.core.release_and_pay(fields['lock'], env.sender, fields.get('via_wallet'))

    def _on_cancel_lock(self, env, fields):
        return self.eco.core.cancel_lock(fields['lock'], env.sender)

    def _on_lock_funds(self, env, fields):
        return self.eco.core.lock_funds(fields['wallet'], fields['amount'], fields['beneficiary'],
                                        fields['expiry'], env.sender, fields.get('min_available', Money(0)))

    def _on_debit(self, env, fields):
        return self.eco.core.burn_from(fields['wallet'], fields['amount'], fields['target_account'],
                                       fields['authorised_by'], fields.get('min_available', Money(0)))

    def _on_credit(self, env, fields):
        return self.eco.core.mint_to(fields['wallet'], fields['amount'], fields['funding'], env.id)


class PaymentSchemeOperator(Participant):
    """FPS: clears instant payments gross across RTGS"""

    def __init__(self, pid, role, eco, **kwargs):
        super().__init__(pid, role, eco, **kwargs)
        self.handlers.update({'FpsPayment': self._on_payment, 'FpsReturn': self._on_payment})

    def _on_payment(self, env, fields):
        return self.eco.rail.fps_pay(fields['instruction'])


class AliasLookupService(Participant):
    def __init__(self, pid, role, eco, **kwargs):
        super().__init__(pid, role, eco, **kwargs)
        self.handlers['AliasLookup'] = self._on_lookup

    def _on_lookup(self, env, fields):
        return self.eco.directory.alias_lookup(Alias.parse(fields['alias'].value))


class TechnicalServiceProvider(Participant):
    """Aggregator, common network operator or alias-directory host"""

    def __init__(self, pid, role, eco, **kwargs):
        super().__init__(pid, role, eco, **kwargs)
        self.handlers.update({'CopLookup': self._on_cop_lookup, 'CopDataSync': self._on_cop_sync})

    def _on_cop_sync(self, env, fields):
        alias = Alias.parse(fields['alias'].value)
        self.eco.directory.publish_cop(alias, CopPayload(fields['payee_name'], fields['target']))
        return fields

    def _on_cop_lookup(self, env, fields):
        entry = self.eco.directory.alias_lookup(Alias.parse(fields['alias'].value))
        if entry.cop_payload is None:
            return None
        return {'payee_name': entry.cop_payload.owner_name, 'target': entry.cop_payload.target,
                'wallet': entry.wallet, 'pip': entry.pip}


@dataclass
class PipLock:
    """PIP-side record of locked funds; the core ledger never sees it"""

    id: str
    wallet: str
    amount: Money
    beneficiary: str
    expiry: int
    state: LockState = LockState.ACTIVE


class PaymentInterfaceProvider(Participant):
    """PIP (or PIP lite): onboards users, manages wallets, confirms credits"""

    def __init__(self, pid, role, eco, **kwargs):
        super().__init__(pid, role, eco, **kwargs)
        self.pip_locks: Dict[str, PipLock] = {}
        self.credit_policy = 'approve'
        self.honours_locks = True
        self.handlers.update({
            'CopRequest': self._on_cop_request,
            'CreditApprovalRequest': self._on_credit_approval_request,
            'AuthorisationDecision': lambda env, fields: bool(fields.get('approve')),
            'RequestToPay': self.remember,
            'RequestToLock': self.remember,
            'FundsTransferRequest': self.remember,
            'FpsCreditNotification': self.remember,
            'PaymentDetailsRequest': self.recall,
            'PayerDetailsRequest': self.recall,
            'ConfidentialDataRequest': self.recall,
        })

    def _on_cop_request(self, env, fields):
        wallet_id = fields.get('wallet')
        if wallet_id is None or self.eco.core.wallet(wallet_id).managing_pip != self.id:
            return fields
        owner = self.eco.participant(self.eco.core.wallet(wallet_id).owner)
        return {'payee_name': owner.datum(), 'target': self.eco.receiving_target(self.id)}

    def _on_credit_approval_request(self, env, fields) -> Optional[bool]:
        self.remember(env, fields)
        if self.credit_policy == 'timeout':
            logger.warning("[WARN] %s does not answer credit %s", self.id, fields.get('pending'))
            return None
        if self.credit_policy == 'reject' or not self.compliance_pass:
            logger.info("[REJECTED] %s declines credit %s", self.id, fields.get('pending'))
            return False
        return True

    # PIP-side funds locks

    def pip_lock_sum(self, wallet: str) -> Money:
        return money_sum(lock.amount for lock in self.pip_locks.values()
                         if lock.wallet == wallet and lock.state is LockState.ACTIVE)

    def min_available_for(self, wallet: str) -> Money:
        """Floor sent as min_available_balance on every core-ledger debit of the wallet"""
        return self.pip_lock_sum(wallet) if self.honours_locks else Money(0)

    def place_pip_lock(self, wallet: str, amount: Money, beneficiary: str, expiry: int) -> PipLock:
        core = self.eco.core
        amount = Money.of(amount)
        free = core.available(wallet).minor_units - self.pip_lock_sum(wallet).minor_units
        if free < amount.minor_units:
            raise InsufficientAvailable(f"PIP lock of {amount} exceeds available on {wallet}", self.id,
                                        needed=amount.minor_units, available=max(free, 0))
        lock = PipLock(self.eco.ids.next_id(IdKind.LOCK), wallet, amount, beneficiary, expiry)
        self.pip_locks[lock.id] = lock
        self._journal('LockPlaced', lock)
        return lock

    def release_pip_lock(self, lock_id: str) -> PipLock:
        lock = self._active_pip_lock(lock_id)
        lock.state = LockState.RELEASED
        self._journal('LockReleased', lock)
        return lock

    def cancel_pip_lock(self, lock_id: str) -> PipLock:
        lock = self._active_pip_lock(lock_id)
        lock.state = LockState.CANCELLED
        self._journal('LockCancelled', lock)
        return lock

    def expire_pip_locks(self, now: int) -> List[str]:
        expired = []
        for lock in self.pip_locks.values():
            if lock.state is LockState.ACTIVE and lock.expiry < now:
                lock.state = LockState.EXPIRED
                self._journal('LockExpired', lock)
                expired.append(lock.id)
        return expired

    def _active_pip_lock(self, lock_id: str) -> PipLock:
        lock = self.pip_locks.get(lock_id)
        if lock is None:
            raise LockNotActive(f"{self.id} holds no lock {lock_id}", self.id)
        if lock.state is LockState.ACTIVE and lock.expiry < self.eco.clock.now:
            lock.state = LockState.EXPIRED
            self._journal('LockExpired', lock)
        if lock.state is not LockState.ACTIVE:
            raise LockNotActive(f"PIP lock {lock_id} is {lock.state.value}", self.id)
        return lock

    def _journal(self, kind: str, lock: PipLock):
        self.eco.journal.record(self.eco.clock.now, kind, lock.wallet, lock.amount, lock.id, 'PIP')


class CommercialBank(Participant):
    """Holds customer deposits and a settlement account"""

    def __init__(self, pid, role, eco, **kwargs):
        super().__init__(pid, role, eco, **kwargs)
        self.handlers.update({
            'AccountCreditInstruction': self._on_account_credit,
            'FpsCreditNotification': self.remember,
            'FundsOutRequest': self.remember,
        })

    def _on_account_credit(self, env, fields):
        self.eco.rail.credit_customer(fields['account'], fields['amount'], fields['ref'])
        return fields


class Acquirer(Participant):
    """Merchant's payment service provider; not a PIP"""


@dataclass
class EscrowRecord:
    id: str
    source_wallet: str
    amount: Money
    beneficiary: str
    consumer_pip: str
    state: str = 'Active'
    details: Dict[str, Any] = field(default_factory=dict)


class FinancialMarketInfrastructure(Participant):
    """Clearing and settlement with technical positions on both ledgers, plus escrow"""

    def __init__(self, pid, role, eco, **kwargs):
        super().__init__(pid, role, eco, **kwargs)
        self.escrows: Dict[str, EscrowRecord] = {}
        self.handlers.update({
            'CreditNotification': self.remember,
            'FpsCreditNotification': self.remember,
            'EscrowRequest': self.remember,
            'ConfidentialDataRequest': self.recall,
            'ReleaseInstruction': lambda env, fields: self._settle_escrow(fields['escrow'], 'Released'),
            'EscrowRefundRequest': lambda env, fields: self._settle_escrow(fields['escrow'], 'Refunded'),
        })

    def open_escrow(self, source_wallet: str, amount: Money, beneficiary: str, consumer_pip: str,
                    details: Dict[str, Any]) -> EscrowRecord:
        escrow = EscrowRecord(self.eco.ids.next_id(IdKind.ESCROW), source_wallet, Money.of(amount),
                              beneficiary, consumer_pip, details=dict(details))
        self.escrows[escrow.id] = escrow
        logger.info("[OK] %s escrows %s from %s", self.id, escrow.amount, source_wallet)
        return escrow

    def active_escrow(self, escrow_id: str) -> EscrowRecord:
        escrow = self.escrows.get(escrow_id)
        if escrow is None or escrow.state != 'Active':
            raise LockNotActive(f"Escrow {escrow_id} is not active", self.id)
        return escrow

    def _settle_escrow(self, escrow_id: str, state: str) -> EscrowRecord:
        escrow = self.active_escrow(escrow_id)
        escrow.state = state
        logger.info("[OK] Escrow %s %s", escrow_id, state.lower())
        return escrow

    def escrowed(self) -> Money:
        return money_sum(e.amount for e in self.escrows.values() if e.state == 'Active')


class EnhancedPaymentOperator(Participant):
    """Front end of the enhanced payment system"""

    def __init__(self, pid, role, eco, **kwargs):
        super().__init__(pid, role, eco, **kwargs)
        self.handlers['EpsPaymentRequest'] = self._on_request

    def _on_request(self, env, fields):
        self.remember(env, fields)
        gateway = self.eco.eps_gateway
        gateway.slot = env.slot
        gateway.forward = [s for s in env.sealed if s.recipient != self.id]
        return self.eco.eps.eps_transfer(
            EpsDirection(fields['direction']), fields['payer'], fields['payee'], fields['amount'],
            envelope_ref=env.id,
            by_pip=fields.get('authorised_by'),
            min_available_balance=fields.get('min_available', Money(0)),
        )


class EndUser(Participant):
    """Parent, child, consumer or merchant; decisions come from the scenario script"""

    def __init__(self, pid, role, eco, **kwargs):
        super().__init__(pid, role, eco, **kwargs)
        self.decisions: Dict[str, bool] = {}
        self.handlers.update({
            'CopResult': lambda env, fields: self.decisions.get('confirm_payee', True),
            'AuthorisationPrompt': lambda env, fields: self.decisions.get('authorise', True),
            'DeliveryAttempt': lambda env, fields: self.decisions.get('accept_delivery', True),
        })

    @property
    def notifications(self) -> List[Envelope]:
        return [env for env in self.inbox if env.kind in _NOTIFY | {'PaymentConfirmation', 'ProductDelivery'}]


class DeliveryAgent(Participant):
    pass


PARTICIPANT_CLASSES = {
    ParticipantRole.CENTRAL_BANK_CBDC_SYSTEM: CentralBankSystem,
    ParticipantRole.CENTRAL_BANK_RTGS: Participant,
    ParticipantRole.PIP: PaymentInterfaceProvider,
    ParticipantRole.PIP_LITE: PaymentInterfaceProvider,
    ParticipantRole.COMMERCIAL_BANK: CommercialBank,
    ParticipantRole.ACQUIRER: Acquirer,
    ParticipantRole.TSP: TechnicalServiceProvider,
    ParticipantRole.FMI: FinancialMarketInfrastructure,
    ParticipantRole.ALIAS_SERVICE: AliasLookupService,
    ParticipantRole.ENHANCED_PAYMENT_SYSTEM: EnhancedPaymentOperator,
    ParticipantRole.USER: EndUser,
    ParticipantRole.DELIVERY_AGENT: DeliveryAgent,
    ParticipantRole.FPS_SCHEME: PaymentSchemeOperator,
}


def build_participant(pid: str, role: ParticipantRole, eco, **kwargs) -> Participant:
    return PARTICIPANT_CLASSES[role](pid, role, eco, **kwargs)
