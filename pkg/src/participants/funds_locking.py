"""
Funds Locking
Lock placement, cancellation and release-and-settle for pay-on-delivery purchases
"""

import logging
from dataclasses import dataclass
from typing import Optional

from src.domain.errors import ScenarioDeadlock
from src.domain.money import Money
from src.participants.interop_settlement import DebitLeg, confirm_pending_credit, settle_cbdc_to_cbm
from src.participants.payment_requests import PaymentRequest

logger = logging.getLogger(__name__)

LOCK_OPTIONS = ('D1', 'D2', 'D3', 'D4', 'D5')
RELEASE_OPTIONS = ('D1', 'D2', 'D3')

# Settlement options able to pick up funds released each way
RELEASE_SETTLEMENT = {
    'D1': ('D1',),
    'D2': ('D2', 'D3', 'D4', 'D5'),
    'D3': ('D4',),
}

# Lock options each release option can act on
RELEASE_LOCKS = {
    'D1': ('D1',),
    'D2': ('D2', 'D3', 'D4'),
    'D3': ('D5',),
}


@dataclass
class FundsLock:
    """A placed lock; reference is a ledger lock, PIP lock or escrow id depending on option"""

    option: str
    reference: str
    request: PaymentRequest
    beneficiary: str
    state: str = 'Active'

    @property
    def wallet(self) -> str:
        return self.request.consumer_wallet

    @property
    def pip(self) -> str:
        return self.request.consumer_pip

    @property
    def amount(self) -> Money:
        return self.request.amount


def place_lock(eco, option: str, request: PaymentRequest, merchant_account: str,
               slot: str = 'U3.S2') -> FundsLock:
    """
    Lock the requested amount for the merchant and confirm it to the acquirer

    Args:
        option: D1 core ledger lock, D2 PIP lock confirmed via the CBDC system,
            D3 PIP lock confirmed directly, D4 PIP lock confirmed over a network, D5 FMI escrow
        request: Approved request-to-lock
        merchant_account: Beneficiary bank account

    Returns:
        FundsLock the acquirer can rely on

    Raises:
        InsufficientAvailable, NotRegistered, NoPartnerPip
    """
    if option not in LOCK_OPTIONS:
        raise ValueError(f"Unknown lock option {option}")
    details = {
        'payer_name': eco.participant(eco.core.wallet(request.consumer_wallet).owner).datum(),
        'merchant_ref': request.merchant_ref,
    }
    lock = {
        'D1': _ledger_lock,
        'D2': _pip_lock_via_cbdc,
        'D3': _pip_lock_direct,
        'D4': _pip_lock_via_network,
        'D5': _escrow,
    }[option](eco, request, merchant_account, details, slot)
    logger.info("[OK] Lock %s (%s) of %s on %s", lock.reference, option, request.amount, request.consumer_wallet)
    return lock


def _confirm_via_partner(eco, request, reference, details, slot, sender):
    """sender -> CBDC system -> acquirer's partner PIP -> acquirer"""
    cbdc = eco.service('cbdc')
    partner = eco.wired(request.acquirer, 'partner_pip')
    plain = {'lock': reference, 'request': request.id, 'amount': request.amount}
    hidden, sealed = eco.protect(details, partner)
    if sender != cbdc:
        eco.send(sender, cbdc, 'LockConfirmation', slot, {**plain, **hidden}, sealed)
    eco.send(cbdc, partner, 'LockConfirmation', slot, {**plain, **hidden}, sealed)
    eco.send(partner, request.acquirer, 'LockConfirmation', slot, plain)


def _ledger_lock(eco, request, merchant_account, details, slot) -> FundsLock:
    lock_id = eco.send(request.consumer_pip, eco.service('cbdc'), 'LockFundsInstruction', slot, {
        'wallet': request.consumer_wallet, 'amount': request.amount,
        'beneficiary': merchant_account, 'expiry': request.expiry,
        'min_available': eco.pip(request.consumer_pip).min_available_for(request.consumer_wallet),
    }).result
    _confirm_via_partner(eco, request, lock_id, details, slot, eco.service('cbdc'))
    return FundsLock('D1', lock_id, request, merchant_account)


def _place_pip_lock(eco, request, merchant_account) -> str:
    pip = eco.pip(request.consumer_pip)
    lock = eco.bus.record_step(f"{pip.id}.place_lock", lambda: pip.place_pip_lock(
        request.consumer_wallet, request.amount, merchant_account, request.expiry))
    return lock.id


def _pip_lock_via_cbdc(eco, request, merchant_account, details, slot) -> FundsLock:
    lock_id = _place_pip_lock(eco, request, merchant_account)
    _confirm_via_partner(eco, request, lock_id, details, slot, request.consumer_pip)
    return FundsLock('D2', lock_id, request, merchant_account)


def _pip_lock_direct(eco, request, merchant_account, details, slot) -> FundsLock:
    eco.registry.require(request.consumer_pip, request.acquirer, eco.clock.now, 'lock-confirmation')
    lock_id = _place_pip_lock(eco, request, merchant_account)
    eco.send(request.consumer_pip, request.acquirer, 'LockConfirmation', slot,
             {'lock': lock_id, 'request': request.id, 'amount': request.amount, **details})
    return FundsLock('D3', lock_id, request, merchant_account)


def _pip_lock_via_network(eco, request, merchant_account, details, slot) -> FundsLock:
    network = eco.service('network')
    eco.registry.require_network(request.consumer_pip, request.acquirer)
    lock_id = _place_pip_lock(eco, request, merchant_account)
    # the network operator reads the order reference and merchant to route
    plain = {'lock': lock_id, 'request': request.id, 'amount': request.amount,
             'merchant_name': eco.participant(request.merchant).datum(), **details}
    eco.send(request.consumer_pip, network, 'LockConfirmation', slot, plain)
    eco.send(network, request.acquirer, 'LockConfirmation', slot, plain)
    return FundsLock('D4', lock_id, request, merchant_account)


def _escrow(eco, request, merchant_account, details, slot) -> FundsLock:
    fmi_id = eco.service('fmi')
    fmi = eco.fmi()
    fmi_wallet = eco.wired_wallet(fmi_id)
    sealed = eco.seal(details, fmi_id)

    eco.send(request.consumer_pip, fmi_id, 'EscrowRequest', slot,
             {'reference': request.id, 'amount': request.amount, 'wallet': request.consumer_wallet}, sealed)
    outcome = eco.send(fmi_id, eco.service('cbdc'), 'TransferInstruction', slot, {
        'from_wallet': request.consumer_wallet, 'to_wallet': fmi_wallet, 'amount': request.amount,
        'authorised_by': request.consumer_pip, 'reference': request.id,
        'min_available': eco.pip(request.consumer_pip).min_available_for(request.consumer_wallet),
    }).result
    eco.send(eco.service('cbdc'), fmi_id, 'CreditNotification', slot,
             {'wallet': fmi_wallet, 'amount': outcome.credited, 'reference': request.id})
    escrow = fmi.open_escrow(request.consumer_wallet, request.amount, merchant_account,
                             request.consumer_pip, details)
    eco.send(fmi_id, request.acquirer, 'LockConfirmation', slot,
             {'escrow': escrow.id, 'request': request.id, 'amount': request.amount})
    return FundsLock('D5', escrow.id, request, merchant_account)


def cancel_lock(eco, lock: FundsLock, slot: str = 'U3.S3'):
    """Give the consumer back the use of locked funds after a failed delivery"""
    if lock.option == 'D1':
        eco.send(lock.pip, eco.service('cbdc'), 'CancelLockInstruction', slot, {'lock': lock.reference})
    elif lock.option == 'D5':
        fmi_id = eco.service('fmi')
        eco.send(lock.pip, fmi_id, 'EscrowRefundRequest', slot, {'escrow': lock.reference})
        outcome = eco.send(fmi_id, eco.service('cbdc'), 'TransferInstruction', slot, {
            'from_wallet': eco.wired_wallet(fmi_id), 'to_wallet': lock.wallet, 'amount': lock.amount,
            'reference': lock.reference,
        }).result
        confirm_pending_credit(eco, outcome, slot)
    else:
        pip = eco.pip(lock.pip)
        eco.bus.record_step(f"{pip.id}.cancel_lock", lambda: pip.cancel_pip_lock(lock.reference))
    lock.state = 'Cancelled'
    logger.info("[OK] Lock %s cancelled", lock.reference)


def release_and_settle(eco, option: str, lock: FundsLock, settlement_option: str,
                       slot: str = 'U3.S3') -> str:
    """
    Release a lock on successful delivery and pay the merchant

    Args:
        option: D1 CBDC system releases a ledger lock, D2 PIP releases its own lock,
            D3 FMI releases escrow
        lock: Lock placed for the order
        settlement_option: Bound U2.S2 option that carries the released funds

    Returns:
        Settlement reference

    Raises:
        ScenarioDeadlock: lock holder and settlement route do not meet
    """
    if option not in RELEASE_OPTIONS:
        raise ValueError(f"Unknown release option {option}")
    if lock.option not in RELEASE_LOCKS[option]:
        raise ScenarioDeadlock(f"Release {option} cannot act on a {lock.option} lock held by "
                               f"{'the FMI' if lock.option == 'D5' else 'another component'}")
    if settlement_option not in RELEASE_SETTLEMENT[option]:
        raise ScenarioDeadlock(f"Funds released by {option} never reach settlement option {settlement_option}")

    request = lock.request
    if option == 'D1':
        leg = DebitLeg(lock_id=lock.reference, release_slot=slot)
    elif option == 'D2':
        pip = eco.pip(lock.pip)
        eco.bus.record_step(f"{pip.id}.release_lock", lambda: pip.release_pip_lock(lock.reference))
        leg = DebitLeg()
    else:
        escrow = eco.send(lock.pip, eco.service('fmi'), 'ReleaseInstruction', slot,
                          {'escrow': lock.reference}).result
        leg = DebitLeg(escrow=escrow)

    # pay whoever the lock holder bound at placement, never the acquirer's copy
    reference = settle_cbdc_to_cbm(eco, settlement_option, lock.wallet, bound_beneficiary(eco, lock),
                                   request.amount, acquirer=request.acquirer, leg=leg)
    lock.state = 'Released'
    return reference


def lock_state(eco, lock: FundsLock) -> Optional[str]:
    """Authoritative state as held by whichever component holds the lock"""
    if lock.option == 'D1':
        return eco.core.locks[lock.reference].state.value
    if lock.option == 'D5':
        return eco.fmi().escrows[lock.reference].state
    return eco.pip(lock.pip).pip_locks[lock.reference].state.value


def bound_beneficiary(eco, lock: FundsLock) -> str:
    """Beneficiary recorded by the component holding the lock"""
    if lock.option == 'D1':
        return eco.core.locks[lock.reference].beneficiary
    if lock.option == 'D5':
        return eco.fmi().escrows[lock.reference].beneficiary
    return eco.pip(lock.pip).pip_locks[lock.reference].beneficiary
