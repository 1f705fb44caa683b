"""
Deterministic ID Source
Per-kind counters so every run under a seed issues the same identifiers
"""

from enum import Enum
from typing import Dict


class IdKind(Enum):
    PARTICIPANT = 'P'
    WALLET = 'W'
    ACCOUNT = 'A'
    MESSAGE = 'M'
    LOCK = 'L'
    PENDING_CREDIT = 'PC'
    BATCH = 'B'
    OBLIGATION = 'O'
    INSTRUCTION = 'I'
    ESCROW = 'E'


class IdSource:
    """Issue opaque, ordered identifiers"""

    def __init__(self):
        self._counters: Dict[IdKind, int] = {kind: 0 for kind in IdKind}

    def next_id(self, kind: IdKind) -> str:
        """
        Issue the next identifier of a kind

        Args:
            kind: Identifier family

        Returns:
            Token such as 'W-0001'
        """
        self._counters[kind] += 1
        return f"{kind.value}-{self._counters[kind]:04d}"

    def issued(self, kind: IdKind) -> int:
        return self._counters[kind]
