"""
Digital Pound Ecosystem Demo
Walks the three use cases through the standard world and shows what each design option exposes
"""

import os
import sys

from dotenv import load_dotenv

sys.path.insert(0, os.path.abspath(os.path.dirname(__file__)))

from src.domain.settings import SimulationSettings
from src.engine.matrix import cli_matrix_render, evaluate_matrix, load_suitability
from src.engine.scenario import Scenario
from src.engine.scenario_engine import ScenarioEngine
from src.engine.world import WorldConfig

WORLD = 'config/worlds/standard.yaml'


def demo_use_case(world: WorldConfig, path: str):
    """Run one scenario and print its postcondition verdicts"""
    scenario = Scenario.load(path)
    result = ScenarioEngine(world, scenario).run()
    report = result.report

    print("\n" + "=" * 60)
    print(f"DEMO: {scenario.name} ({scenario.use_case})")
    print("=" * 60)
    print(f"  Bindings: {', '.join(f'{k}={v}' for k, v in sorted(report.bindings.items()))}")
    print(f"  Outcome:  {report.outcome}")
    for clause in report.clauses:
        print(f"  [{'OK' if clause.passed else 'FAIL'}] {clause.clause}")
    print(f"  Messages delivered: {len(result.eco.bus.records)}")
    print(f"  Keys: {report.keys}")


def demo_failure(world: WorldConfig):
    """A rejected payment must leave every balance where it was"""
    scenario = Scenario.load('config/scenarios/u2_consumer_reject.yaml')
    report = ScenarioEngine(world, scenario).run().report

    print("\n" + "=" * 60)
    print("DEMO: CONSUMER REJECTS A REQUEST TO PAY")
    print("=" * 60)
    print(f"  Failure mode: {report.failure_mode}")
    for verdict in report.invariants:
        print(f"  [{'OK' if verdict.passed else 'FAIL'}] {verdict.name} {verdict.detail}")


def demo_matrix(world: WorldConfig):
    """Exposure and liquidity for each way of paying into a wallet"""
    scenarios = {'U1': Scenario.load('config/scenarios/u1_standard.yaml')}
    result = evaluate_matrix(world, scenarios, load_suitability(), ('standard',), slots=['U1.S2'])

    print("\n" + "=" * 60)
    print("DEMO: COMMERCIAL BANK MONEY TO DIGITAL POUND OPTIONS")
    print("=" * 60)
    print(cli_matrix_render(result))
    print(f"  Flagged for central bank exposure: {', '.join(result.flagged()) or 'none'}")


def main():
    """Run complete demo"""
    load_dotenv()

    print("\n" + "=" * 60)
    print("DIGITAL POUND ECOSYSTEM - COMPLETE DEMO")
    print("=" * 60)

    try:
        settings = SimulationSettings.from_yaml()
        world = WorldConfig.load(WORLD, settings)

        for path in ('config/scenarios/u1_standard.yaml',
                     'config/scenarios/u2_standard.yaml',
                     'config/scenarios/u3_standard.yaml'):
            demo_use_case(world, path)

        demo_failure(world)
        demo_matrix(world)

        print("\n[NEXT STEPS]")
        print("  1. Run 'python src/main.py matrix --suite all' for the full evaluation")
        print("  2. Run 'python src/main.py run --scenario <file>' to write a trace")
        print("  3. Run 'python src/main.py replay <trace>' to re-verify it")

    except Exception as e:
        print(f"\n[ERROR] Demo failed: {e}")
        import traceback
        traceback.print_exc()

    print("\n" + "=" * 60 + "\n")


if __name__ == "__main__":
    main()
