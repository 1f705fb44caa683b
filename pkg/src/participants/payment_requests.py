"""
Payment Requests
Request-to-pay and request-to-lock from an acquirer to the consumer's PIP
"""

import logging
from dataclasses import dataclass
from typing import Optional

from src.domain.errors import ConsumerRejected, InsufficientAvailable, NoLinkedAccount, NoPartnerPip
from src.domain.ids import IdKind
from src.domain.model import Alias
from src.domain.money import Money
from src.participants.interop_settlement import confirm_pending_credit, fps_return

logger = logging.getLogger(__name__)

REQUEST_OPTIONS = ('D1', 'D2', 'D3')

_ENDPOINTS = {'RequestToPay': 'request-to-pay', 'RequestToLock': 'request-to-lock'}


@dataclass
class PaymentRequest:
    """An approved request, as both sides now know it"""

    id: str
    kind: str
    option: str
    acquirer: str
    merchant: str
    consumer_wallet: str
    consumer_pip: str
    amount: Money
    merchant_ref: str
    expiry: Optional[int] = None


def request_to_pay(eco, option: str, acquirer: str, merchant: str, consumer_alias: Alias,
                   amount: Money, merchant_ref: str, slot: str = 'U2.S1') -> PaymentRequest:
    """
    Ask the consumer, through their PIP, to approve a payment

    Args:
        option: D1 via the CBDC system, D2 direct after registration, D3 common network

    Raises:
        ConsumerRejected, NotRegistered, NoPartnerPip, UnknownAlias
    """
    return _request(eco, 'RequestToPay', option, acquirer, merchant, consumer_alias, amount, merchant_ref,
                    None, slot)


def request_to_lock(eco, option: str, acquirer: str, merchant: str, consumer_alias: Alias,
                    amount: Money, merchant_ref: str, expiry: int, slot: str = 'U3.S1') -> PaymentRequest:
    """Same topologies as request_to_pay; the request carries the lock expiry tick"""
    return _request(eco, 'RequestToLock', option, acquirer, merchant, consumer_alias, amount, merchant_ref,
                    expiry, slot)


def _request(eco, kind, option, acquirer, merchant, consumer_alias, amount, merchant_ref, expiry, slot):
    if option not in REQUEST_OPTIONS:
        raise ValueError(f"Unknown request option {option}")
    amount = Money.of(amount)
    alias_datum = eco.alias_datum(consumer_alias)

    alias_svc = eco.service('alias')
    entry = eco.send(acquirer, alias_svc, 'AliasLookup', slot, {'alias': alias_datum}).result
    eco.send(alias_svc, acquirer, 'AliasResult', slot, {'wallet': entry.wallet, 'pip': entry.pip})

    request = PaymentRequest(eco.ids.next_id(IdKind.INSTRUCTION), kind, option, acquirer, merchant,
                             entry.wallet, entry.pip, amount, merchant_ref, expiry)
    plain = {'reference': request.id, 'amount': amount, 'wallet': entry.wallet}
    if expiry is not None:
        plain['expiry'] = expiry
    details = {'merchant_name': eco.participant(merchant).datum(), 'merchant_ref': merchant_ref}

    route = _Route(eco, option, acquirer, entry.pip, slot, _ENDPOINTS[kind])
    route.deliver(kind, plain, details)

    consumer = eco.core.wallet(entry.wallet).owner
    decision = eco.send(entry.pip, consumer, 'AuthorisationPrompt', slot,
                        {'reference': request.id, 'amount': amount, **details}).result
    approved = eco.send(consumer, entry.pip, 'AuthorisationDecision', slot,
                        {'reference': request.id, 'approve': bool(decision)}).result

    if approved:
        ensure_available(eco, entry.wallet, amount)
    route.respond(f"{kind}Response", {'reference': request.id, 'approved': bool(approved)})

    if not approved:
        logger.info("[REJECTED] Consumer declined %s %s", kind, request.id)
        raise ConsumerRejected(f"Consumer declined {kind} {request.id}", consumer)
    logger.info("[OK] %s %s approved via %s", kind, request.id, option)
    return request


@dataclass
class _Route:
    """Outbound and return topology between acquirer and consumer PIP"""

    eco: object
    option: str
    acquirer: str
    pip: str
    slot: str
    endpoint: str

    def deliver(self, kind, plain, details):
        eco = self.eco
        if self.option == 'D1':
            partner = eco.wired(self.acquirer, 'partner_pip', NoPartnerPip)
            cbdc = eco.service('cbdc')
            eco.send(self.acquirer, partner, kind, self.slot, {**plain, **details})
            hidden, sealed = eco.protect(details, self.pip)
            eco.send(partner, cbdc, kind, self.slot, {**plain, **hidden, 'pip': self.pip}, sealed)
            eco.send(cbdc, self.pip, kind, self.slot, {**plain, **hidden, 'pip': self.pip}, sealed)
        elif self.option == 'D2':
            eco.registry.require(self.acquirer, self.pip, eco.clock.now, self.endpoint)
            eco.send(self.acquirer, self.pip, kind, self.slot, {**plain, **details})
        else:
            network = eco.service('network')
            eco.registry.require_network(self.acquirer, self.pip)
            sealed = eco.seal(details, self.pip)
            eco.send(self.acquirer, network, kind, self.slot, {**plain, 'pip': self.pip}, sealed)
            eco.send(network, self.pip, kind, self.slot, {**plain, 'pip': self.pip}, sealed)

    def respond(self, kind, answer):
        eco = self.eco
        if self.option == 'D1':
            partner = eco.wired(self.acquirer, 'partner_pip', NoPartnerPip)
            cbdc = eco.service('cbdc')
            eco.send(self.pip, cbdc, kind, self.slot, answer)
            eco.send(cbdc, partner, kind, self.slot, answer)
            eco.send(partner, self.acquirer, kind, self.slot, answer)
        elif self.option == 'D2':
            eco.send(self.pip, self.acquirer, kind, self.slot, answer)
        else:
            network = eco.service('network')
            eco.send(self.pip, network, kind, self.slot, answer)
            eco.send(network, self.acquirer, kind, self.slot, answer)


def ensure_available(eco, wallet_id: str, amount: Money):
    """
    Make sure a wallet can cover amount, topping up from its linked account

    Raises:
        InsufficientAvailable: when short and no top-up is possible
    """
    pip = eco.core.wallet(wallet_id).managing_pip
    # PIP-side locks are invisible to the core ledger
    held = eco.pip(pip).pip_lock_sum(wallet_id).minor_units
    free = Money(max(eco.core.available(wallet_id).minor_units - held, 0))
    if free >= amount:
        return
    shortfall = amount - free
    if not eco.settings.reverse_waterfall:
        raise InsufficientAvailable(f"{wallet_id} is {shortfall} short", pip,
                                    needed=amount.minor_units, available=free.minor_units)
    top_up_from_linked_account(eco, wallet_id, shortfall)


def top_up_from_linked_account(eco, wallet_id: str, amount: Money, slot: Optional[str] = None):
    """Reverse waterfall: pull commercial bank money from the linked account into the wallet"""
    wallet = eco.core.wallet(wallet_id)
    if wallet.linked_bank_account is None:
        raise NoLinkedAccount(f"Wallet {wallet_id} has no linked account to top up from", wallet.managing_pip)
    pip = wallet.managing_pip
    linked = wallet.linked_bank_account
    bank = eco.rail.account(linked).bank
    cbdc, fps = eco.service('cbdc'), eco.service('fps')

    eco.send(pip, bank, 'SweepRequest', slot, {'account': linked, 'amount': amount, 'wallet': wallet_id})
    instruction = eco.rail.new_instruction(linked, eco.backing_account, amount, remittance=wallet_id)
    eco.send(bank, fps, 'FpsPayment', slot, {'instruction': instruction})
    outcome = eco.send(fps, cbdc, 'FpsCreditNotification', slot, {
        'reference': instruction.id, 'wallet': wallet_id, 'amount': amount, 'return_to': linked,
    }).result
    outcome = confirm_pending_credit(eco, outcome, slot)
    if not outcome.completed:
        fps_return(eco, cbdc, eco.backing_account, linked, amount, slot)
        raise InsufficientAvailable(f"Top-up of {wallet_id} was not credited", pip)
    logger.info("[OK] Topped up %s by %s from %s", wallet_id, amount, linked)
    return outcome
