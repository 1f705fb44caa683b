"""
Interoperability Settlement
Design options for moving value between commercial bank money and digital pounds
"""

import logging
from dataclasses import dataclass, replace
from typing import Callable, Dict, List, Optional

from src.domain.errors import (
    CoreDebitFailed,
    HoldingLimitExceeded,
    InsufficientAvailable,
    InsufficientFunds,
    LiquidityShortfall,
    PipRejected,
    ScenarioDeadlock,
    SchemeFailure,
    UnknownDestination,
)
from src.domain.ids import IdKind
from src.domain.money import Money
from src.ledger.core_ledger import CreditOutcome, CreditState, FundingSource, ReturnInstruction
from src.privacy.envelope import SealedSection

logger = logging.getLogger(__name__)

CBM_TO_CBDC_OPTIONS = ('D1', 'D2', 'D3', 'D4', 'D5', 'D6')
CBDC_TO_CBM_OPTIONS = ('D1', 'D2', 'D3', 'D4', 'D5')


@dataclass
class DebitLeg:
    """How funds leave the consumer wallet when settlement starts"""

    min_available: Money = Money(0)  # set from the consumer PIP at settlement
    lock_id: Optional[str] = None       # ledger lock the CBDC system releases
    release_slot: Optional[str] = None  # slot tag of the releasing hop
    escrow: Optional[object] = None     # funds already held by the FMI


# Shared steps

def confirm_pending_credit(eco, outcome: CreditOutcome, slot: Optional[str],
                           sealed: Optional[List[SealedSection]] = None) -> CreditOutcome:
    """
    Ask the payee's PIP to decide on a pending credit

    Intermediary wallets were already credited; their PIP is only notified.
    A PIP that never answers leaves the credit to time out.
    """
    cbdc = eco.service('cbdc')
    if outcome.completed:
        wallet = eco.core.wallet(outcome.wallet)
        eco.send(cbdc, wallet.managing_pip, 'CreditNotification', slot,
                 {'wallet': outcome.wallet, 'amount': outcome.amount})
        return outcome

    pending = eco.core.pending[outcome.pending_id]
    pip = eco.core.wallet(pending.target_wallet).managing_pip
    decision = eco.send(cbdc, pip, 'CreditApprovalRequest', slot, {
        'pending': pending.id, 'wallet': pending.target_wallet, 'amount': pending.amount,
    }, sealed).result

    if decision is None:
        while pending.state is CreditState.AWAITING:
            eco.bus.advance()
        return CreditOutcome(pending.target_wallet, pending.amount, pending.state, pending.id,
                             compensation=ReturnInstruction(pending.source, pending.amount, pending.reason))

    outcome = eco.send(pip, cbdc, 'CreditApproval', slot, {
        'pending': pending.id, 'approve': decision, 'reason': '' if decision else 'payee PIP compliance',
    }).result
    if outcome.completed:
        eco.send(cbdc, pip, 'CreditNotification', slot, {'wallet': outcome.wallet, 'amount': outcome.amount})
    return outcome


def fps_return(eco, sender: str, from_account: str, to_account: str, amount: Money, slot: Optional[str]):
    """Compensating instant payment back to the payer"""
    fps = eco.service('fps')
    instruction = eco.rail.new_instruction(from_account, to_account, amount, remittance='return')
    result = eco.send(sender, fps, 'FpsReturn', slot, {'instruction': instruction}).result
    eco.send(fps, result.notify, 'FpsCreditNotification', slot,
             {'reference': instruction.id, 'amount': amount, 'returned': True})
    logger.info("[OK] Returned %s from %s to %s", amount, from_account, to_account)


def refund_to_wallet(eco, pip: str, from_wallet: str, to_wallet: str, amount: Money,
                     slot: Optional[str]) -> CreditOutcome:
    """Send digital pounds back from an intermediary wallet to the consumer"""
    outcome = eco.send(pip, eco.service('cbdc'), 'TransferInstruction', slot, {
        'from_wallet': from_wallet, 'to_wallet': to_wallet, 'amount': amount,
    }).result
    return confirm_pending_credit(eco, outcome, slot)


def _rejected(outcome: CreditOutcome):
    reason = outcome.compensation.reason if outcome.compensation else 'rejected'
    if reason == 'holding limit':
        return HoldingLimitExceeded(f"Credit to {outcome.wallet} breaches its holding limit")
    return PipRejected(f"Credit to {outcome.wallet} rejected: {reason}")


# Commercial bank money -> digital pounds

def settle_cbm_to_cbdc(eco, option: str, payer_account: str, payee_wallet: str, amount: Money,
                       slot: str = 'U1.S2') -> CreditOutcome:
    """
    Pay from a bank account into a wallet with the chosen design option

    Args:
        eco: Built ecosystem
        option: D1 central bank, D2 payer bank is a PIP, D3 payee PIP's partner bank,
            D4 payee PIP as DCNSP, D5 FMI technical accounts, D6 enhanced payment system
        payer_account: Payer's commercial bank account
        payee_wallet: Payee's wallet
        amount: Amount in pence
        slot: Capability slot tag

    Returns:
        Completed credit outcome

    Raises:
        PipRejected, LiquidityShortfall, SchemeFailure, InsufficientFunds
    """
    if option not in CBM_TO_CBDC_OPTIONS:
        raise ValueError(f"Unknown settlement option {option}")
    amount = Money.of(amount)
    account = eco.rail.account(payer_account)
    wallet = eco.core.wallet(payee_wallet)
    ctx = _Payment(
        eco=eco, slot=slot, amount=amount,
        payer_account=payer_account, payer_bank=account.bank,
        payee_wallet=payee_wallet, payee_pip=wallet.managing_pip,
        names={
            'payer_name': eco.participant(account.owner).datum(),
            'payee_name': eco.participant(wallet.owner).datum(),
        },
    )
    outcome = {
        'D1': _cbm_via_central_bank,
        'D2': _cbm_via_payer_bank_pip,
        'D3': _cbm_via_partner_bank,
        'D4': _cbm_via_dcnsp,
        'D5': _cbm_via_fmi,
        'D6': _cbm_via_eps,
    }[option](ctx)
    logger.info("[OK] U1 settlement %s: %s credited to %s", option, outcome.credited, payee_wallet)
    return outcome


@dataclass
class _Payment:
    eco: object
    slot: str
    amount: Money
    payer_account: str
    payer_bank: str
    payee_wallet: str
    payee_pip: str
    names: Dict
    fps_notified: Optional[str] = None


def _fps_in(ctx: _Payment, target_account: str) -> str:
    """Payer's bank pays target_account over FPS; the receiver is notified"""
    eco = ctx.eco
    fps = eco.service('fps')
    instruction = eco.rail.new_instruction(ctx.payer_account, target_account, ctx.amount,
                                           remittance=ctx.payee_wallet)
    result = eco.send(ctx.payer_bank, fps, 'FpsPayment', ctx.slot,
                      {'instruction': instruction, **ctx.names}).result
    ctx.fps_notified = result.notify
    return instruction.id


def _cbm_via_central_bank(ctx: _Payment) -> CreditOutcome:
    eco = ctx.eco
    cbdc, fps = eco.service('cbdc'), eco.service('fps')
    reference = _fps_in(ctx, eco.backing_account)
    outcome = eco.send(fps, cbdc, 'FpsCreditNotification', ctx.slot, {
        'reference': reference, 'wallet': ctx.payee_wallet, 'amount': ctx.amount,
        'return_to': ctx.payer_account, **ctx.names,
    }).result
    outcome = confirm_pending_credit(eco, outcome, ctx.slot)
    if not outcome.completed:
        fps_return(eco, cbdc, eco.backing_account, ctx.payer_account, ctx.amount, ctx.slot)
        raise _rejected(outcome)
    return outcome


def _cbm_via_payer_bank_pip(ctx: _Payment) -> CreditOutcome:
    eco = ctx.eco
    cbdc = eco.service('cbdc')
    arm = eco.wired(ctx.payer_bank, 'pip_arm')
    arm_wallet = eco.wired_wallet(arm)
    reference = eco.ids.next_id(IdKind.INSTRUCTION)

    eco.bus.record_step(f"{ctx.payer_bank}.book_transfer",
                        lambda: eco.rail.debit_customer(ctx.payer_account, ctx.amount, reference))
    eco.send(ctx.payer_bank, arm, 'FundsTransferRequest', ctx.slot, {
        'reference': reference, 'wallet': ctx.payee_wallet, 'amount': ctx.amount,
        'payer_name': ctx.names['payer_name'],
    })

    def reverse_book_entry():
        eco.bus.record_step(f"{ctx.payer_bank}.book_reversal",
                            lambda: eco.rail.credit_customer(ctx.payer_account, ctx.amount, f"return:{reference}"))

    try:
        outcome = eco.send(arm, cbdc, 'TransferInstruction', ctx.slot, {
            'from_wallet': arm_wallet, 'to_wallet': ctx.payee_wallet, 'amount': ctx.amount,
            'reference': reference,
        }).result
    except InsufficientAvailable as e:
        reverse_book_entry()
        logger.warning("[LIQUIDITY] %s cannot front %s: %s", arm, ctx.amount, e)
        raise LiquidityShortfall(f"{arm} wallet cannot front {ctx.amount}", arm) from e

    if ctx.payee_pip != arm:
        # payee PIP fetches the payer's details straight from the payer's PIP
        eco.send(ctx.payee_pip, arm, 'PayerDetailsRequest', ctx.slot, {'reference': reference})
        eco.send(arm, ctx.payee_pip, 'PayerDetailsResponse', ctx.slot,
                 {'reference': reference, 'payer_name': ctx.names['payer_name']})

    outcome = confirm_pending_credit(eco, outcome, ctx.slot)
    if not outcome.completed:
        reverse_book_entry()
        raise _rejected(outcome)
    return outcome


def _cbm_via_partner_bank(ctx: _Payment) -> CreditOutcome:
    eco = ctx.eco
    cbdc, fps = eco.service('cbdc'), eco.service('fps')
    partner_bank = eco.wired(ctx.payee_pip, 'partner_bank')
    partner_arm = eco.wired(partner_bank, 'pip_arm')
    partner_wallet = eco.wired_wallet(partner_arm)
    target = eco.rail.settlement_account_of(partner_bank).id

    reference = _fps_in(ctx, target)
    eco.send(fps, partner_bank, 'FpsCreditNotification', ctx.slot, {
        'reference': reference, 'wallet': ctx.payee_wallet, 'amount': ctx.amount, **ctx.names,
    })
    eco.send(partner_bank, partner_arm, 'FundsTransferRequest', ctx.slot,
             {'reference': reference, 'wallet': ctx.payee_wallet, 'amount': ctx.amount})

    plain, sealed = eco.protect({'payer_name': ctx.names['payer_name']}, ctx.payee_pip)
    try:
        outcome = eco.send(partner_arm, cbdc, 'TransferInstruction', ctx.slot, {
            'from_wallet': partner_wallet, 'to_wallet': ctx.payee_wallet, 'amount': ctx.amount,
            'reference': reference, **plain,
        }, sealed).result
    except InsufficientAvailable as e:
        fps_return(eco, partner_bank, target, ctx.payer_account, ctx.amount, ctx.slot)
        logger.warning("[LIQUIDITY] %s cannot front %s", partner_arm, ctx.amount)
        raise LiquidityShortfall(f"{partner_arm} wallet cannot front {ctx.amount}", partner_arm) from e

    outcome = confirm_pending_credit(eco, outcome, ctx.slot, sealed)
    if not outcome.completed:
        fps_return(eco, partner_bank, target, ctx.payer_account, ctx.amount, ctx.slot)
        raise _rejected(outcome)
    return outcome


def _cbm_via_dcnsp(ctx: _Payment) -> CreditOutcome:
    eco = ctx.eco
    cbdc, fps = eco.service('cbdc'), eco.service('fps')
    pip_account = eco.wired_account(ctx.payee_pip, 'fps_account')
    pip_wallet = eco.wired_wallet(ctx.payee_pip)

    reference = _fps_in(ctx, pip_account)
    eco.send(fps, ctx.fps_notified, 'FpsCreditNotification', ctx.slot, {
        'reference': reference, 'wallet': ctx.payee_wallet, 'amount': ctx.amount, **ctx.names,
    })
    try:
        outcome = eco.send(ctx.payee_pip, cbdc, 'TransferInstruction', ctx.slot, {
            'from_wallet': pip_wallet, 'to_wallet': ctx.payee_wallet, 'amount': ctx.amount,
            'reference': reference,
        }).result
    except InsufficientAvailable as e:
        fps_return(eco, ctx.payee_pip, pip_account, ctx.payer_account, ctx.amount, ctx.slot)
        logger.warning("[LIQUIDITY] %s cannot front %s", ctx.payee_pip, ctx.amount)
        raise LiquidityShortfall(f"{ctx.payee_pip} wallet cannot front {ctx.amount}", ctx.payee_pip) from e

    outcome = confirm_pending_credit(eco, outcome, ctx.slot)
    if not outcome.completed:
        fps_return(eco, ctx.payee_pip, pip_account, ctx.payer_account, ctx.amount, ctx.slot)
        raise _rejected(outcome)
    return outcome


def _cbm_via_fmi(ctx: _Payment) -> CreditOutcome:
    eco = ctx.eco
    cbdc, fps, fmi = eco.service('cbdc'), eco.service('fps'), eco.service('fmi')
    fmi_account = eco.wired_account(fmi)
    fmi_wallet = eco.wired_wallet(fmi)
    embedded = eco.settings.fmi_confidential_data == 'embedded'

    reference = _fps_in(ctx, fmi_account)
    eco.send(fps, fmi, 'FpsCreditNotification', ctx.slot, {
        'reference': reference, 'wallet': ctx.payee_wallet, 'amount': ctx.amount, **ctx.names,
    })
    sealed = eco.seal({'payer_name': ctx.names['payer_name']}, ctx.payee_pip) if embedded else []
    try:
        outcome = eco.send(fmi, cbdc, 'TransferInstruction', ctx.slot, {
            'from_wallet': fmi_wallet, 'to_wallet': ctx.payee_wallet, 'amount': ctx.amount,
            'reference': reference,
        }, sealed).result
    except InsufficientAvailable as e:
        fps_return(eco, fmi, fmi_account, ctx.payer_account, ctx.amount, ctx.slot)
        logger.warning("[LIQUIDITY] FMI technical wallet cannot front %s", ctx.amount)
        raise LiquidityShortfall(f"{fmi} technical wallet cannot front {ctx.amount}", fmi) from e

    if not embedded:
        eco.send(ctx.payee_pip, fmi, 'ConfidentialDataRequest', ctx.slot, {'reference': reference})
        eco.send(fmi, ctx.payee_pip, 'ConfidentialDataResponse', ctx.slot,
                 {'reference': reference, 'payer_name': ctx.names['payer_name']})

    outcome = confirm_pending_credit(eco, outcome, ctx.slot, sealed)
    if not outcome.completed:
        fps_return(eco, fmi, fmi_account, ctx.payer_account, ctx.amount, ctx.slot)
        raise _rejected(outcome)
    return outcome


def _cbm_via_eps(ctx: _Payment) -> CreditOutcome:
    eco = ctx.eco
    eps = eco.service('eps')
    sealed = eco.seal({'payer_name': ctx.names['payer_name']}, ctx.payee_pip)
    record = eco.send(ctx.payer_bank, eps, 'EpsPaymentRequest', ctx.slot, {
        'direction': 'CbmToCbdc', 'payer': ctx.payer_account, 'payee': ctx.payee_wallet,
        'amount': ctx.amount, 'reference': ctx.payee_wallet,
    }, sealed).result

    outcome = confirm_pending_credit(eco, record.credit, ctx.slot, sealed)
    if not outcome.completed:
        reason = outcome.compensation.reason if outcome.compensation else 'rejected'
        eco.bus.record_step(f"{eps}.reverse", lambda: eco.eps.reverse(record, reason))
        raise _rejected(outcome)
    return outcome


# Digital pounds -> commercial bank money

def settle_cbdc_to_cbm(eco, option: str, payer_wallet: str, payee_account: str, amount: Money,
                       acquirer: Optional[str] = None, leg: Optional[DebitLeg] = None,
                       slot: str = 'U2.S2') -> str:
    """
    Pay from a consumer wallet into a merchant's bank account

    Args:
        option: D1 CBDC system, D2 acquirer's partner bank PIP, D3 consumer PIP is also a bank,
            D4 FMI, D5 enhanced payment system
        acquirer: Merchant's acquirer, needed by D2
        leg: Lock release or escrow details when settling a locked purchase

    Returns:
        Reference of the settled payment

    Raises:
        InsufficientAvailable, CoreDebitFailed: the wallet cannot cover the amount above its locks
        LiquidityShortfall, SchemeFailure, UnknownDestination: payout refused, consumer refunded
        ScenarioDeadlock: the debit leg and the option do not meet
    """
    if option not in CBDC_TO_CBM_OPTIONS:
        raise ValueError(f"Unknown settlement option {option}")
    eco_wallet = eco.core.wallet(payer_wallet)
    pip = eco_wallet.managing_pip
    leg = replace(leg or DebitLeg(), min_available=eco.pip(pip).min_available_for(payer_wallet))
    if leg.lock_id and option != 'D1':
        raise ScenarioDeadlock(f"Ledger lock {leg.lock_id} can only be released by the CBDC system, "
                               f"not settled with {option}")
    if leg.escrow is not None and option != 'D4':
        raise ScenarioDeadlock(f"Escrowed funds sit with the FMI; settlement {option} never receives them")

    consumer = eco.participant(eco_wallet.owner)
    details = {'payer_name': consumer.datum(), 'payee_account': eco.account_datum(payee_account)}
    reference = eco.ids.next_id(IdKind.INSTRUCTION)
    eco.pip(pip).records[reference] = dict(details)

    ctx = _Redemption(eco, slot, Money.of(amount), payer_wallet, pip, payee_account, details, reference, leg)
    handler = {
        'D1': _cbdc_via_central_bank,
        'D2': _cbdc_via_partner_bank_pip,
        'D3': _cbdc_via_consumer_pip_bank,
        'D4': _cbdc_via_fmi,
        'D5': _cbdc_via_eps,
    }[option]
    if option == 'D2':
        handler(ctx, acquirer)
    else:
        handler(ctx)
    logger.info("[OK] U2 settlement %s: %s paid to %s", option, ctx.amount, payee_account)
    return reference


@dataclass
class _Redemption:
    eco: object
    slot: str
    amount: Money
    wallet: str
    pip: str
    payee_account: str
    details: Dict
    reference: str
    leg: DebitLeg


def _to_intermediary(ctx: _Redemption, to_wallet: str, sealed: Optional[List[SealedSection]] = None):
    """Consumer PIP moves the amount into an intermediary's wallet"""
    eco = ctx.eco
    outcome = eco.send(ctx.pip, eco.service('cbdc'), 'TransferInstruction', ctx.slot, {
        'from_wallet': ctx.wallet, 'to_wallet': to_wallet, 'amount': ctx.amount,
        'min_available': ctx.leg.min_available, 'reference': ctx.reference,
    }, sealed).result
    return outcome


def _fps_out(ctx: _Redemption, sender: str, from_account: str, refund: Callable[[], CreditOutcome]):
    """Intermediary pays the merchant's account; a payment the rail refuses is refunded to the consumer"""
    eco = ctx.eco
    fps = eco.service('fps')
    instruction = eco.rail.new_instruction(from_account, ctx.payee_account, ctx.amount,
                                           remittance=ctx.reference)
    try:
        result = eco.send(sender, fps, 'FpsPayment', ctx.slot, {'instruction': instruction, **ctx.details}).result
    except (InsufficientFunds, SchemeFailure, UnknownDestination) as e:
        outcome = refund()
        if not outcome.completed:
            logger.error("[ERROR] Refund of %s to %s was not credited", ctx.amount, ctx.wallet)
        if isinstance(e, InsufficientFunds):
            logger.warning("[LIQUIDITY] %s cannot pay out %s", sender, ctx.amount)
            raise LiquidityShortfall(f"{sender} settlement funds cannot cover {ctx.amount}", sender) from e
        logger.warning("[REJECTED] %s could not pay %s to %s: %s", sender, ctx.amount, ctx.payee_account, e.kind)
        raise
    eco.send(fps, result.notify, 'FpsCreditNotification', ctx.slot,
             {'reference': ctx.reference, 'amount': ctx.amount, **ctx.details})


def _refund_from(ctx: _Redemption, pip: str, wallet: str) -> Callable[[], CreditOutcome]:
    return lambda: refund_to_wallet(ctx.eco, pip, wallet, ctx.wallet, ctx.amount, ctx.slot)


def _reissue(ctx: _Redemption) -> CreditOutcome:
    """CBDC system issues redeemed funds back when the rail would not pay them out"""
    eco = ctx.eco
    funding = FundingSource('rail', eco.backing_account)
    outcome = eco.bus.record_step(f"{eco.service('cbdc')}.reissue",
                                  lambda: eco.core.mint_to(ctx.wallet, ctx.amount, funding))
    return confirm_pending_credit(eco, outcome, ctx.slot)


def _cbdc_via_central_bank(ctx: _Redemption):
    eco = ctx.eco
    cbdc = eco.service('cbdc')
    if ctx.leg.lock_id:
        eco.send(ctx.pip, cbdc, 'ReleaseAndPayInstruction', ctx.leg.release_slot or ctx.slot,
                 {'lock': ctx.leg.lock_id, 'reference': ctx.reference, **ctx.details})
    else:
        eco.send(ctx.pip, cbdc, 'PaymentInstruction', ctx.slot, {
            'wallet': ctx.wallet, 'amount': ctx.amount, 'min_available': ctx.leg.min_available,
            'reference': ctx.reference, **ctx.details,
        })
    _fps_out(ctx, cbdc, eco.backing_account, lambda: _reissue(ctx))


def _cbdc_via_partner_bank_pip(ctx: _Redemption, acquirer: Optional[str]):
    eco = ctx.eco
    if acquirer is None:
        raise ScenarioDeadlock("Settlement through the acquirer's partner needs an acquirer")
    partner_pip = eco.wired(acquirer, 'partner_bank_pip')
    partner_bank = eco.wired(partner_pip, 'bank_arm')
    partner_wallet = eco.wired_wallet(partner_pip)

    _to_intermediary(ctx, partner_wallet)
    eco.send(eco.service('cbdc'), partner_pip, 'CreditNotification', ctx.slot,
             {'wallet': partner_wallet, 'amount': ctx.amount, 'reference': ctx.reference, 'from_pip': ctx.pip})
    # details travel outside the core instruction
    eco.send(partner_pip, ctx.pip, 'PaymentDetailsRequest', ctx.slot, {'reference': ctx.reference})
    eco.send(ctx.pip, partner_pip, 'PaymentDetailsResponse', ctx.slot, {'reference': ctx.reference, **ctx.details})
    eco.send(partner_pip, partner_bank, 'FundsOutRequest', ctx.slot, {'reference': ctx.reference, **ctx.details})
    _fps_out(ctx, partner_bank, eco.rail.settlement_account_of(partner_bank).id,
             _refund_from(ctx, partner_pip, partner_wallet))


def _cbdc_via_consumer_pip_bank(ctx: _Redemption):
    eco = ctx.eco
    bank_arm = eco.wired(ctx.pip, 'bank_arm')
    pip_wallet = eco.wired_wallet(ctx.pip)

    _to_intermediary(ctx, pip_wallet)
    eco.send(eco.service('cbdc'), ctx.pip, 'CreditNotification', ctx.slot,
             {'wallet': pip_wallet, 'amount': ctx.amount, 'reference': ctx.reference})
    eco.send(ctx.pip, bank_arm, 'FundsOutRequest', ctx.slot, {'reference': ctx.reference, **ctx.details})
    _fps_out(ctx, bank_arm, eco.rail.settlement_account_of(bank_arm).id, _refund_from(ctx, ctx.pip, pip_wallet))


def _cbdc_via_fmi(ctx: _Redemption):
    eco = ctx.eco
    fmi = eco.service('fmi')
    fmi_wallet = eco.wired_wallet(fmi)
    embedded = eco.settings.fmi_confidential_data == 'embedded'

    if ctx.leg.escrow is None:
        sealed = eco.seal(ctx.details, fmi) if embedded else []
        _to_intermediary(ctx, fmi_wallet, sealed)
        eco.send(eco.service('cbdc'), fmi, 'CreditNotification', ctx.slot,
                 {'wallet': fmi_wallet, 'amount': ctx.amount, 'reference': ctx.reference}, sealed)
        if not embedded:
            eco.send(fmi, ctx.pip, 'ConfidentialDataRequest', ctx.slot, {'reference': ctx.reference})
            eco.send(ctx.pip, fmi, 'ConfidentialDataResponse', ctx.slot, {'reference': ctx.reference, **ctx.details})

    _fps_out(ctx, fmi, eco.wired_account(fmi), _refund_from(ctx, fmi, fmi_wallet))


def _cbdc_via_eps(ctx: _Redemption):
    eco = ctx.eco
    account = eco.rail.account(ctx.payee_account)
    sealed = eco.seal(ctx.details, account.bank)
    try:
        eco.send(ctx.pip, eco.service('eps'), 'EpsPaymentRequest', ctx.slot, {
            'direction': 'CbdcToCbm', 'payer': ctx.wallet, 'payee': ctx.payee_account,
            'amount': ctx.amount, 'authorised_by': ctx.pip, 'min_available': ctx.leg.min_available,
            'reference': ctx.reference,
        }, sealed)
    except CoreDebitFailed:
        logger.warning("[REJECTED] EPS could not debit %s", ctx.wallet)
        raise
