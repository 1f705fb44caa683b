"""
Ledger Journal
Append-only record of balance and lock deltas, shared line format for both ledgers
"""

from dataclasses import dataclass
from typing import Iterator, List, Optional

from src.domain.money import Money


@dataclass(frozen=True)
class JournalEntry:
    """One ledger delta"""

    tick: int
    kind: str
    ref: str
    amount: Money
    counterparty: str = '-'
    ledger: str = 'CBDC'

    def line(self) -> str:
        """Render as tick|entry_kind|ref|amount|counterparty"""
        kind = self.kind if self.ledger == 'CBDC' else f"{self.ledger}:{self.kind}"
        return f"{self.tick}|{kind}|{self.ref}|{self.amount.minor_units}|{self.counterparty}"


class Journal:
    """Ordered journal with a cursor so callers can collect the deltas of one step"""

    def __init__(self, ledger: str = 'CBDC'):
        self.ledger = ledger
        self._entries: List[JournalEntry] = []

    def record(self, tick: int, kind: str, ref: str, amount: Money,
               counterparty: Optional[str] = None, ledger: Optional[str] = None) -> JournalEntry:
        entry = JournalEntry(
            tick=tick,
            kind=kind,
            ref=ref,
            amount=amount,
            counterparty=counterparty or '-',
            ledger=ledger or self.ledger,
        )
        self._entries.append(entry)
        return entry

    @property
    def cursor(self) -> int:
        return len(self._entries)

    def since(self, cursor: int) -> List[JournalEntry]:
        return list(self._entries[cursor:])

    def entries(self, kind: Optional[str] = None) -> List[JournalEntry]:
        if kind is None:
            return list(self._entries)
        return [e for e in self._entries if e.kind == kind]

    def total(self, kind: str) -> Money:
        total = Money.zero()
        for entry in self._entries:
            if entry.kind == kind:
                total = total + entry.amount
        return total

    def __iter__(self) -> Iterator[JournalEntry]:
        return iter(self._entries)

    def __len__(self) -> int:
        return len(self._entries)
