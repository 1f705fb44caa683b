"""
Domain Model
Participant roles, personal-data tagging and payment aliases
"""

import re
from dataclasses import dataclass
from enum import Enum


class ParticipantRole(Enum):
    CENTRAL_BANK_CBDC_SYSTEM = 'CentralBankCbdcSystem'
    CENTRAL_BANK_RTGS = 'CentralBankRtgs'
    PIP = 'Pip'
    PIP_LITE = 'PipLite'
    COMMERCIAL_BANK = 'CommercialBank'
    ACQUIRER = 'Acquirer'
    TSP = 'Tsp'
    FMI = 'Fmi'
    ALIAS_SERVICE = 'AliasService'
    ENHANCED_PAYMENT_SYSTEM = 'EnhancedPaymentSystem'
    USER = 'User'
    DELIVERY_AGENT = 'DeliveryAgent'
    FPS_SCHEME = 'FpsScheme'

    @classmethod
    def parse(cls, text: str) -> 'ParticipantRole':
        for role in cls:
            if role.value == text or role.name == text:
                return role
        raise ValueError(f"Unknown participant role: {text}")


# Roles allowed to manage a wallet on the core ledger
WALLET_MANAGER_ROLES = frozenset({
    ParticipantRole.PIP,
    ParticipantRole.PIP_LITE,
    ParticipantRole.FMI,
})


class DatumKind(Enum):
    NAME = 'Name'
    PHONE_ALIAS = 'PhoneAlias'
    ACCOUNT_DETAILS = 'AccountDetails'
    TRANSACTION_PURPOSE = 'TransactionPurpose'


@dataclass(frozen=True)
class PersonalDatum:
    """A value relating to an identified person, tagged with its subject"""

    subject: str
    kind: DatumKind
    value: str

    def __str__(self) -> str:
        return f"{self.kind.value}({self.subject})"


class AliasKind(Enum):
    MOBILE_NUMBER = 'MobileNumber'
    SORT_CODE_ACCOUNT_NUMBER = 'SortCodeAccountNumber'


_MOBILE = re.compile(r'^07\d{9}$')
_SORT_CODE_ACCOUNT = re.compile(r'^(\d{6})-?(\d{8})$')


@dataclass(frozen=True)
class Alias:
    """Payment alias: UK mobile number or sort code + account number"""

    kind: AliasKind
    value: str

    def __post_init__(self):
        if self.kind is AliasKind.MOBILE_NUMBER:
            if not _MOBILE.match(self.value):
                raise ValueError(f"Mobile alias must look like 07xxxxxxxxx: {self.value}")
        else:
            match = _SORT_CODE_ACCOUNT.match(self.value)
            if not match:
                raise ValueError(f"Sort code alias must be 6+8 digits: {self.value}")
            # Normalised form keeps directory keys unique
            object.__setattr__(self, 'value', f"{match.group(1)}-{match.group(2)}")

    @classmethod
    def parse(cls, text: str) -> 'Alias':
        if _MOBILE.match(text):
            return cls(AliasKind.MOBILE_NUMBER, text)
        return cls(AliasKind.SORT_CODE_ACCOUNT_NUMBER, text)

    def __str__(self) -> str:
        return self.value
