"""
Money
Checked integer pence arithmetic shared by both ledgers
"""

from dataclasses import dataclass
from typing import Iterable, Union

from src.domain.errors import InvalidAmount, MoneyOverflow, MoneyUnderflow


MAX_MINOR_UNITS = 2 ** 63 - 1


@dataclass(frozen=True, order=True)
class Money:
    """Non-negative amount of pence"""

    minor_units: int = 0

    def __post_init__(self):
        if isinstance(self.minor_units, bool) or not isinstance(self.minor_units, int):
            raise InvalidAmount(f"Money needs whole pence, got {self.minor_units!r}")
        if self.minor_units < 0:
            raise InvalidAmount(f"Money cannot be negative: {self.minor_units}")
        if self.minor_units > MAX_MINOR_UNITS:
            raise MoneyOverflow(f"{self.minor_units} exceeds {MAX_MINOR_UNITS}")

    @classmethod
    def of(cls, value: Union['Money', int]) -> 'Money':
        if isinstance(value, Money):
            return value
        return cls(value)

    @classmethod
    def zero(cls) -> 'Money':
        return cls(0)

    def __add__(self, other: 'Money') -> 'Money':
        return money_add(self, other)

    def __sub__(self, other: 'Money') -> 'Money':
        return money_sub(self, other)

    def __bool__(self) -> bool:
        return self.minor_units != 0

    def __int__(self) -> int:
        return self.minor_units

    def __str__(self) -> str:
        pounds, pence = divmod(self.minor_units, 100)
        return f"£{pounds:,}.{pence:02d}"


def money_add(a: Money, b: Money) -> Money:
    """
    Add two amounts

    Raises:
        MoneyOverflow: if the sum exceeds MAX_MINOR_UNITS
    """
    total = a.minor_units + b.minor_units
    if total > MAX_MINOR_UNITS:
        raise MoneyOverflow(f"{a.minor_units} + {b.minor_units} overflows")
    return Money(total)


def money_sub(a: Money, b: Money) -> Money:
    """
    Subtract b from a

    Raises:
        MoneyUnderflow: if b > a (callers treat this as insufficient funds)
    """
    if b.minor_units > a.minor_units:
        raise MoneyUnderflow(f"{a.minor_units} - {b.minor_units} underflows")
    return Money(a.minor_units - b.minor_units)


def money_sum(amounts: Iterable[Money]) -> Money:
    total = Money.zero()
    for amount in amounts:
        total = total + amount
    return total
