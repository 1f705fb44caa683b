"""
Deferred Net Settlement
Batches interbank obligations per window and settles netted positions on RTGS
"""

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

from src.domain.errors import DigitalPoundError, InsufficientSettlementFunds, RtgsClosed
from src.domain.money import Money

logger = logging.getLogger(__name__)


class BatchState(Enum):
    OPEN = 'Open'
    NETTED = 'Netted'
    SETTLED = 'Settled'


@dataclass(frozen=True)
class Obligation:
    id: str
    debtor: str
    creditor: str
    amount: Money


@dataclass
class NetSettlementBatch:
    """Obligations accumulated over one settlement window"""

    id: str
    window: Tuple[int, int]
    obligations: List[Obligation] = field(default_factory=list)
    state: BatchState = BatchState.OPEN
    failure: Optional[str] = None

    def append(self, obligation: Obligation):
        if self.state is not BatchState.OPEN:
            raise DigitalPoundError(f"Batch {self.id} is {self.state.value}")
        self.obligations.append(obligation)

    def pairwise_net(self) -> Dict[Tuple[str, str], Money]:
        """Bilateral netting: one residual obligation per participant pair"""
        flows: Dict[Tuple[str, str], int] = defaultdict(int)
        for obligation in self.obligations:
            a, b = sorted((obligation.debtor, obligation.creditor))
            sign = 1 if obligation.debtor == a else -1
            flows[(a, b)] += sign * obligation.amount.minor_units
        net = {}
        for (a, b), value in sorted(flows.items()):
            if value > 0:
                net[(a, b)] = Money(value)
            elif value < 0:
                net[(b, a)] = Money(-value)
        return net

    def net_positions(self) -> Dict[str, int]:
        """Multilateral net position per participant in signed pence (sums to zero)"""
        positions: Dict[str, int] = defaultdict(int)
        for obligation in self.obligations:
            positions[obligation.debtor] -= obligation.amount.minor_units
            positions[obligation.creditor] += obligation.amount.minor_units
        return dict(sorted(positions.items()))

    @property
    def unsettled(self) -> bool:
        return self.state is not BatchState.SETTLED and bool(self.obligations)


def settle_batch(batch: NetSettlementBatch, rail) -> NetSettlementBatch:
    """
    Net a closed batch and apply the positions to RTGS settlement accounts

    A short net debtor or a closed RTGS leaves the batch Netted and flagged
    as realised settlement risk; nothing is applied in that case.
    """
    if batch.state is BatchState.SETTLED:
        return batch
    batch.state = BatchState.NETTED
    positions = {p: net for p, net in batch.net_positions().items() if net}
    if not positions:
        batch.state = BatchState.SETTLED
        return batch
    try:
        rail.apply_net_positions(positions, batch.id)
    except (InsufficientSettlementFunds, RtgsClosed) as e:
        batch.failure = str(e)
        logger.warning("[WARN] Batch %s not settled: %s", batch.id, e)
        raise
    batch.state = BatchState.SETTLED
    logger.info("[SETTLED] Batch %s: %d obligations, %d net positions",
                batch.id, len(batch.obligations), len(positions))
    return batch
