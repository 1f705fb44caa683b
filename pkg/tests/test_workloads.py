"""
Seeded randomized workloads: lock oracle over participant flows and netting against gross settlement
"""

from src.engine.invariants import check_locks
from src.engine.workloads import check_pip_lock_oracle, gross_oracle, run_all, run_pip_lock_workload, settle_netted


class TestPipLockOracle:

    def test_payments_respect_pip_locks(self):
        verdict = check_pip_lock_oracle(seed=3, workloads=10, steps=150)
        assert verdict.passed, verdict.detail
        assert verdict.cases == 10

    def test_pip_forgetting_its_locks_is_caught(self):
        results = [check_locks(*run_pip_lock_workload(seed, steps=200, honour_locks=False)) for seed in range(10)]
        assert any(not verdict.passed for verdict in results)

    def test_moves_run_through_the_participants(self):
        eco, _ = run_pip_lock_workload(4, steps=200)
        kinds = {record.envelope.kind for record in eco.bus.records if record.envelope is not None}
        assert {'RequestToLock', 'LockConfirmation', 'TransferInstruction', 'FpsPayment'} <= kinds
        assert 'EpsPaymentRequest' in kinds or 'PaymentInstruction' in kinds
        journal_kinds = {entry.kind for entry in eco.journal}
        assert 'LockPlaced' in journal_kinds
        assert journal_kinds & {'LockReleased', 'LockCancelled', 'LockExpired'}

    def test_workload_is_reproducible(self):
        first, _ = run_pip_lock_workload(5, steps=100)
        second, _ = run_pip_lock_workload(5, steps=100)
        assert [e.line() for e in first.journal] == [e.line() for e in second.journal]


class TestNettingOracle:

    def test_short_participant_stops_the_whole_batch(self):
        balances = {'a': 100, 'b': 0}
        obligations = [('a', 'b', 150), ('b', 'a', 20)]
        assert gross_oracle(balances, obligations) == balances
        assert settle_netted(balances, obligations) == balances

    def test_netting_only_needs_the_net_amount(self):
        balances = {'a': 50, 'b': 0}
        obligations = [('a', 'b', 100), ('b', 'a', 60)]
        assert settle_netted(balances, obligations) == {'a': 10, 'b': 40}


def test_run_all_passes_for_the_default_seed(settings):
    assert all(verdict.passed for verdict in run_all(settings.seed))
