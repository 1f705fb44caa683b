"""
Ecosystem
Builds a world's ledgers, rail, directory and participants and wires them to the bus
"""

import logging
from typing import Any, Dict, List, Mapping, Optional, Tuple

from src.domain.clock import SimClock
from src.domain.errors import DigitalPoundError, ScenarioDeadlock, UnknownParticipant
from src.domain.ids import IdSource
from src.domain.model import Alias, DatumKind, ParticipantRole, PersonalDatum
from src.domain.money import Money
from src.engine.bus import Delivery, MessageBus
from src.engine.world import WorldConfig
from src.ledger.core_ledger import CoreLedger, FundingSource
from src.ledger.journal import Journal
from src.participants.directory import AliasDirectory, DcrRegistry
from src.participants.participant import (
    FinancialMarketInfrastructure,
    Participant,
    PaymentInterfaceProvider,
    build_participant,
)
from src.privacy.envelope import KeyDirectory, SealedSection
from src.rail.enhanced_payments import EnhancedPaymentSystem
from src.rail.settlement_rail import BackingAccountBridge, BankCustomerAccount, FpsParticipation, SettlementRail

logger = logging.getLogger(__name__)


class MessagingGateway:
    """EPS gateway that instructs the CBDC system and payee banks over the bus"""

    def __init__(self, eco: 'Ecosystem', eps_id: str):
        self.eco = eco
        self.eps_id = eps_id
        self.slot: Optional[str] = None
        self.forward: List[SealedSection] = []

    def burn(self, wallet, amount, target_account, by_pip, min_available_balance):
        return self.eco.send(self.eps_id, self.eco.service('cbdc'), 'DebitInstruction', self.slot, {
            'wallet': wallet, 'amount': amount, 'target_account': target_account,
            'authorised_by': by_pip, 'min_available': min_available_balance,
        }).result

    def mint(self, wallet, amount, funding: FundingSource, envelope_ref):
        return self.eco.send(self.eps_id, self.eco.service('cbdc'), 'CreditInstruction', self.slot, {
            'wallet': wallet, 'amount': amount, 'funding': funding,
        }, sealed=self.forward).result

    def credit_account(self, account, amount, ref):
        bank = self.eco.rail.account(account).bank
        self.eco.send(self.eps_id, bank, 'AccountCreditInstruction', self.slot, {
            'account': account, 'amount': amount, 'ref': ref,
        }, sealed=self.forward)


class Ecosystem:
    """One built world: the single mutator every participant reaches through"""

    def __init__(self, world: WorldConfig):
        self.world = world
        self.settings = world.settings
        self.bindings: Dict[str, str] = dict(world.bindings)

        self.clock = SimClock()
        self.ids = IdSource()
        self.journal = Journal()
        self.roles: Dict[str, ParticipantRole] = {spec.id: spec.role for spec in world.participants}
        self.keys = KeyDirectory(self.settings.seed)
        self.rail = SettlementRail(self.clock, self.ids, self.journal, rtgs_open=self.settings.rtgs_open)
        self.core = CoreLedger(self.roles, self.clock, self.ids, self.journal,
                               pending_credit_timeout=self.settings.pending_credit_timeout,
                               waterfall_mode=self.settings.waterfall_mode)
        self.bus = MessageBus(self.clock, self.ids, self.journal, self.keys, self.roles,
                              tick_budget=self.settings.tick_budget)
        self.directory = AliasDirectory()
        self.registry = DcrRegistry(self.settings.dcr_validity_ticks, self.settings.seed)

        self.participants: Dict[str, Participant] = {}
        self.accounts: Dict[str, str] = {}
        self.wallets: Dict[str, str] = {}
        self.eps: Optional[EnhancedPaymentSystem] = None
        self.eps_gateway: Optional[MessagingGateway] = None
        self.backing_account = ''
        self._build()

    # Construction

    def _build(self):
        world = self.world
        for spec in world.participants:
            participant = build_participant(spec.id, spec.role, self, institution=spec.institution,
                                            wiring=spec.wiring, display_name=spec.display_name)
            participant.compliance_pass = world.compliance.get(spec.id, True)
            self.participants[spec.id] = participant
            self.bus.register(participant)
            self.keys.register(spec.id)

        for account in world.settlement_accounts:
            self.accounts[account.name] = self.rail.open_settlement_account(
                account.holder, account.sort_code, account.number, Money(account.balance), account.fps_reachable)
        for fps in sorted(world.fps, key=lambda f: f.kind != 'DCSP'):
            self.rail.register_fps_participant(fps.participant, FpsParticipation(fps.kind), fps.sort_code,
                                               fps.sponsor)
        for account in world.customer_accounts:
            self.accounts[account.name] = self.rail.open_customer_account(
                account.bank, account.owner, account.sort_code, account.number, Money(account.balance))

        self.backing_account = self.accounts[world.backing_account]
        self.core.bridge = BackingAccountBridge(self.rail, self.backing_account)

        for wallet in world.wallets:
            wallet_id = self.core.open_wallet(
                wallet.owner, wallet.pip,
                holding_limit=Money(wallet.holding_limit) if wallet.holding_limit is not None else None,
                technical=wallet.technical,
                linked_bank_account=self.accounts.get(wallet.linked_account) if wallet.linked_account else None,
            )
            self.wallets[wallet.name] = wallet_id
            if wallet.balance:
                # genesis issuance is backed like any other mint
                self.core.bridge.mirror_mint(Money(wallet.balance), wallet_id)
                self.core.genesis_credit(wallet_id, Money(wallet.balance))

        for alias, wallet in sorted(world.aliases.items()):
            wallet_id = self.wallets[wallet]
            self.directory.register(Alias.parse(alias), wallet_id, self.core.wallet(wallet_id).managing_pip)

        for dcr in world.dcr:
            self.registry.register(dcr.registrant, dcr.provider, self.clock.now, validity=dcr.validity)
            self.keys.exchange(dcr.registrant, dcr.provider)
        for member in world.onboarding.get('aggregator', []):
            self.registry.join_aggregator(member)
        for member in world.onboarding.get('network', []):
            self.registry.join_network(member)

        eps_id = world.services.get('eps')
        if eps_id is not None:
            self.eps_gateway = MessagingGateway(self, eps_id)
            self.eps = EnhancedPaymentSystem(self.rail, self.core, self.ids, self.clock,
                                             central_bank=world.services['cbdc'],
                                             backing_account=self.backing_account,
                                             batch_window=self.settings.batch_window,
                                             gateway=self.eps_gateway)
            for member in world.onboarding.get('eps', []):
                self.eps.onboard(member)
                self.keys.exchange(member, eps_id)

        self.bus.tick_hooks.extend([self.core.expire_pending, self.core.expire_locks, self._expire_pip_locks])
        if self.eps is not None:
            self.bus.tick_hooks.append(self.eps.close_due)
        logger.info("[OK] Built world %s: %d participants, %d wallets, %d accounts",
                    world.path, len(self.participants), len(self.wallets), len(self.accounts))

    def _expire_pip_locks(self, now: int):
        for participant in self.participants.values():
            if isinstance(participant, PaymentInterfaceProvider):
                participant.expire_pip_locks(now)

    # Lookups

    def participant(self, pid: str) -> Participant:
        participant = self.participants.get(pid)
        if participant is None:
            raise UnknownParticipant(f"Unknown participant {pid}", pid)
        return participant

    def pip(self, pid: str) -> PaymentInterfaceProvider:
        participant = self.participant(pid)
        if not isinstance(participant, PaymentInterfaceProvider):
            raise ScenarioDeadlock(f"{pid} is a {participant.role.value}, not a PIP", pid)
        return participant

    def fmi(self) -> FinancialMarketInfrastructure:
        return self.participant(self.service('fmi'))

    def service(self, name: str) -> str:
        """Participant providing a shared service; missing wiring can never answer"""
        pid = self.world.services.get(name)
        if pid is None:
            raise ScenarioDeadlock(f"No {name} service is wired in {self.world.path}")
        return pid

    def wired(self, pid: str, name: str, error=ScenarioDeadlock) -> str:
        value = self.participant(pid).wired(name)
        if value is None:
            raise error(f"{pid} has no {name} wired", pid)
        return value

    def wired_wallet(self, pid: str) -> str:
        return self.wallets[self.wired(pid, 'wallet')]

    def wired_account(self, pid: str, name: str = 'settlement_account') -> str:
        return self.accounts[self.wired(pid, name)]

    def wallet_of(self, owner: str) -> str:
        for wallet_id, wallet in sorted(self.core.wallets.items()):
            if wallet.owner == owner:
                return wallet_id
        raise ScenarioDeadlock(f"{owner} holds no wallet", owner)

    def account_of(self, owner: str) -> str:
        for account_id, account in sorted(self.rail.customer_accounts.items()):
            if account.owner == owner:
                return account_id
        raise ScenarioDeadlock(f"{owner} holds no bank account", owner)

    def alias_datum(self, alias: Alias) -> PersonalDatum:
        """Tag an alias with the person it identifies (unknown aliases identify nobody we know)"""
        try:
            subject = self.core.wallet(self.directory.alias_lookup(alias).wallet).owner
        except DigitalPoundError:
            subject = 'unknown'
        return PersonalDatum(subject, DatumKind.PHONE_ALIAS, alias.value)

    def account_datum(self, account_id: str) -> PersonalDatum:
        account = self.rail.account(account_id)
        owner = account.owner if isinstance(account, BankCustomerAccount) else account.holder
        return PersonalDatum(owner, DatumKind.ACCOUNT_DETAILS, account.address)

    def receiving_target(self, payee_pip: str) -> str:
        """Where a payer's bank sends commercial bank money for this payee PIP's wallets"""
        option = self.bindings.get('U1.S2', 'D1')
        if option == 'D1':
            return self.rail.address_of(self.backing_account)
        if option == 'D3':
            return self.rail.settlement_account_of(self.wired(payee_pip, 'partner_bank')).address
        if option == 'D4':
            return self.rail.address_of(self.wired_account(payee_pip, 'fps_account'))
        if option == 'D5':
            return self.rail.address_of(self.wired_account(self.service('fmi')))
        return f"wallet@{payee_pip}"

    # Messaging

    def send(self, sender: str, receiver: str, kind: str, slot: Optional[str],
             plaintext: Optional[Dict[str, Any]] = None,
             sealed: Optional[List[SealedSection]] = None) -> Delivery:
        return self.bus.send(sender, receiver, kind, plaintext, sealed, slot)

    def notify(self, sender: str, receiver: str, kind: str, slot: Optional[str],
               plaintext: Optional[Dict[str, Any]] = None):
        """Fire-and-forget message delivered on the next pump"""
        self.bus.post(self.bus.envelope(sender, receiver, kind, plaintext, None, slot))

    def seal(self, fields: Mapping[str, Any], recipient: str) -> List[SealedSection]:
        return [self.keys.seal(fields, recipient)]

    def protect(self, fields: Mapping[str, Any], recipient: str) -> Tuple[Dict[str, Any], List[SealedSection]]:
        """Seal personal data routed through the CBDC system unless sealing is switched off"""
        if self.settings.cbdc_sealing:
            return {}, self.seal(fields, recipient)
        return dict(fields), []

    # Audit helpers

    def institution_of(self, pid: str) -> str:
        return self.participants[pid].institution

    def central_bank_money(self) -> int:
        return self.rail.total_settlement().minor_units + self.core.total_balance().minor_units
