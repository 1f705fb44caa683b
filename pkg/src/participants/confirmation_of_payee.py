"""
Confirmation of Payee
Name check of the destination wallet holder before a payment is authorised
"""

import logging
from dataclasses import dataclass

from src.domain.errors import NoPartnerPip, UnknownAlias
from src.domain.model import Alias, ParticipantRole, PersonalDatum

logger = logging.getLogger(__name__)

COP_OPTIONS = ('D1', 'D2', 'D3', 'D4')


@dataclass(frozen=True)
class CopResult:
    """What the payer's bank shows the payer before authorisation"""

    payee_name: PersonalDatum
    target: str
    wallet: str
    pip: str


def confirm_payee(eco, option: str, requester: str, alias: Alias, slot: str = 'U1.S1') -> CopResult:
    """
    Run a confirmation-of-payee check with the chosen design option

    Args:
        eco: Built ecosystem
        option: D1 direct peer call, D2 TSP aggregator, D3 alias provider, D4 via the CBDC system
        requester: Payer's bank (or PIP) asking for the check
        alias: Payee alias typed by the payer
        slot: Capability slot tag carried by every hop

    Returns:
        CopResult with the payee's display name and receiving target

    Raises:
        UnknownAlias, NotRegistered, NoPartnerPip
    """
    alias_datum = eco.alias_datum(alias)
    if option == 'D1':
        result = _direct(eco, requester, alias_datum, slot)
    elif option == 'D2':
        result = _via_aggregator(eco, requester, alias_datum, slot)
    elif option == 'D3':
        result = _via_alias_provider(eco, requester, alias, alias_datum, slot)
    elif option == 'D4':
        result = _via_cbdc_system(eco, requester, alias_datum, slot)
    else:
        raise ValueError(f"Unknown confirmation-of-payee option {option}")
    logger.info("[OK] CoP %s for %s: %s", option, requester, result.payee_name.value)
    return result


def _lookup(eco, requester: str, alias_datum: PersonalDatum, slot: str):
    alias_svc = eco.service('alias')
    entry = eco.send(requester, alias_svc, 'AliasLookup', slot, {'alias': alias_datum}).result
    eco.send(alias_svc, requester, 'AliasResult', slot, {'wallet': entry.wallet, 'pip': entry.pip})
    return entry


def _direct(eco, requester, alias_datum, slot) -> CopResult:
    entry = _lookup(eco, requester, alias_datum, slot)
    eco.registry.require(requester, entry.pip, eco.clock.now, 'cop')
    answer = eco.send(requester, entry.pip, 'CopRequest', slot,
                      {'alias': alias_datum, 'wallet': entry.wallet}).result
    eco.send(entry.pip, requester, 'CopResponse', slot, answer)
    return CopResult(answer['payee_name'], answer['target'], entry.wallet, entry.pip)


def _via_aggregator(eco, requester, alias_datum, slot) -> CopResult:
    tsp = eco.service('tsp')
    entry = _lookup(eco, requester, alias_datum, slot)
    eco.registry.require_aggregator(requester, entry.pip)

    # end-to-end sealed; the aggregator only routes
    sealed = eco.seal({'alias': alias_datum, 'wallet': entry.wallet}, entry.pip)
    eco.send(requester, tsp, 'CopRequest', slot, {'pip': entry.pip}, sealed)
    answer = eco.send(tsp, entry.pip, 'CopRequest', slot, {'pip': entry.pip}, sealed).result
    sealed = eco.seal(answer, requester)
    eco.send(entry.pip, tsp, 'CopResponse', slot, {'requester': requester}, sealed)
    seen = eco.send(tsp, requester, 'CopResponse', slot, {'requester': requester}, sealed).result
    return CopResult(seen['payee_name'], seen['target'], entry.wallet, entry.pip)


def _via_alias_provider(eco, requester, alias, alias_datum, slot) -> CopResult:
    tsp = eco.service('tsp')
    entry = eco.directory.alias_lookup(alias)
    if entry.cop_payload is None:
        # payee PIP publishes its customer's name alongside the alias
        owner = eco.participant(eco.core.wallet(entry.wallet).owner)
        eco.send(entry.pip, tsp, 'CopDataSync', slot, {
            'alias': alias_datum, 'payee_name': owner.datum(), 'target': eco.receiving_target(entry.pip),
        })
    answer = eco.send(requester, tsp, 'CopLookup', slot, {'alias': alias_datum}).result
    if answer is None:
        raise UnknownAlias(f"No confirmation data published for {alias}")
    eco.send(tsp, requester, 'CopResponse', slot, answer)
    return CopResult(answer['payee_name'], answer['target'], answer['wallet'], answer['pip'])


def _via_cbdc_system(eco, requester, alias_datum, slot) -> CopResult:
    cbdc = eco.service('cbdc')
    if eco.roles[requester] is ParticipantRole.PIP:
        asking_pip = requester
    else:
        asking_pip = eco.wired(requester, 'partner_pip', NoPartnerPip)
        eco.send(requester, asking_pip, 'CopRequest', slot, {'alias': alias_datum})

    entry = _lookup(eco, asking_pip, alias_datum, slot)
    plain, sealed = eco.protect({'alias': alias_datum, 'wallet': entry.wallet}, entry.pip)
    plain['pip'] = entry.pip
    eco.send(asking_pip, cbdc, 'CopRequest', slot, plain, sealed)
    answer = eco.send(cbdc, entry.pip, 'CopRequest', slot, plain, sealed).result

    reply = {'payee_name': answer['payee_name'], 'target': answer['target']}
    plain, sealed = eco.protect(reply, asking_pip)
    plain['pip'] = asking_pip
    eco.send(entry.pip, cbdc, 'CopResponse', slot, plain, sealed)
    seen = eco.send(cbdc, asking_pip, 'CopResponse', slot, plain, sealed).result

    if asking_pip != requester:
        eco.send(asking_pip, requester, 'CopResponse', slot, reply)
    return CopResult(seen['payee_name'], seen['target'], entry.wallet, entry.pip)
