"""
Rank-2 Family Tests
Genus-0 data, the dispersionless recursion, the Miura maps and the full verification with fault injection
"""

import json
import time
from fractions import Fraction

from testing_support import main_for

from core.calculus import EvolutionaryOp, EvolutionarySystem, pairwise_commute
from core.check_executor import CheckExecutor
from core.family import (
    composite_miura_mismatches, dispersionless_closed_form, dispersionless_flow, dispersionless_system,
    displayed_structure_constants, genus0_potentials, primary_flows, structure_constants,
    theorem_target_flows,
)
from core.ring import DiffPoly, TruncationContext, dx
from core.verifier import TheoremPipeline, VerificationReport, run_pipeline_checks, verify_theorem

CTX = TruncationContext(2, 6)


def test_genus0_potentials():
    print("🧪 Testing the genus-0 potentials...")
    data = genus0_potentials(CTX)
    assert data.F1 == data.F1_tree_sum
    u2 = DiffPoly.variable(2, data.context, 2)
    assert data.F2 == (u2 ** 2).scale(Fraction(1, 2))
    assert data.context.deg_max == CTX.deg_max + 2
    print("✅ Stable tree sum equals the closed form, F^2 = (u^2)^2/2")


def test_structure_constants():
    print("🧪 Testing the structure constants...")
    C1, C2 = structure_constants(CTX)
    D1, D2 = displayed_structure_constants(CTX)
    for a in range(2):
        for b in range(2):
            assert C1[a][b] == D1[a][b]
            assert C2[a][b] == D2[a][b]
        # second derivatives are symmetric in the lower indices
        assert C1[a][1] == C2[a][0]
    print("✅ C_1 and C_2 agree with the displayed matrices")


def test_dispersionless_closed_form():
    print("🧪 Testing the dispersionless recursion for d <= 4...")
    ctx = TruncationContext(0, 8)
    for d in range(5):
        P = dispersionless_flow(d, ctx)
        closed = dispersionless_closed_form(d, ctx)
        for a in range(2):
            for b in range(2):
                assert P[a][b] == closed[a][b], f"P_{d}[{a + 1}][{b + 1}]"
        print(f"✅ d = {d}")
    try:
        dispersionless_flow(-1, ctx)
        assert False, "negative index must fail"
    except ValueError:
        pass


def test_dispersionless_flows_commute():
    print("🧪 Testing commutativity of the dispersionless flows...")
    system = dispersionless_system(2, TruncationContext(0, 6))
    assert len(system) == 6
    assert pairwise_commute(system) == {}
    print("✅ Hydrodynamic flows commute")


def test_miura_maps_are_consistent():
    print("🧪 Testing the three Miura maps...")
    assert composite_miura_mismatches(CTX) == []
    print("✅ composite after tilde equals the main Miura map")


def test_primary_flows_shape():
    print("🧪 Testing the known primary flows...")
    S = primary_flows(2, CTX)
    assert S.labels() == [(1, 0), (1, 1), (1, 2), (2, 0), (2, 1), (2, 2)]
    assert S[(1, 0)].is_complete() and S[(2, 0)].is_complete()
    for d in (1, 2):
        assert S[(1, d)].components[0] is None
        assert S[(2, d)].components[0] is None
        assert S[(1, d)].components[1].is_zero()
    targets = theorem_target_flows(1, CTX)
    assert targets.var_name == 'v'
    assert targets[(1, 0)].component(1) == DiffPoly.variable(2, CTX, 1, 1, 'v')
    print("✅ d = 0 flows complete, higher flows known in the second component")


def test_pipeline_artifacts():
    print("🧪 Testing the intermediate artifacts of the verification...")
    pipeline = TheoremPipeline(1, CTX)
    assert pipeline.check_d0_targets() == []
    S_0, T_0 = pipeline.generated[0]
    assert S_0 == DiffPoly.variable(1, CTX, 1, 1, 'v')
    assert set(pipeline.assembled.labels()) == {(1, 0), (1, 1), (2, 0), (2, 1)}
    print("✅ S_0 = v_y and the assembled hierarchy has every flow")


def test_verify_theorem_small():
    print("🧪 Testing the full verification at d_max = 1...")
    report = verify_theorem(1, CTX)
    for line in report.summary_lines():
        print(f"   {line}")
    assert report.all_passed, [c.name for c in report.failed()]
    names = [c.name for c in report.checks]
    assert 'commutativity' in names and 'xi0/commutativity' in names
    data = json.loads(json.dumps(report.to_dict()))
    assert data['status'] == 'PASS'
    assert data['d_max'] == 1
    print("✅ Every check passed, with and without xi")


def test_verify_theorem_xi_zero():
    print("🧪 Testing the verification with xi = 0...")
    report = verify_theorem(1, CTX, xi_zero=True)
    assert report.all_passed, [c.name for c in report.failed()]
    assert report.xi_zero
    assert not any(c.name.startswith('xi0/') for c in report.checks)
    print("✅ Trivial family reduces to two KdV hierarchies")


def test_verify_theorem_full_depth():
    print("🧪 Testing the full verification at d_max = 2, eps^4, degree 8...")
    report = verify_theorem(2, TruncationContext(4, 8))
    assert report.all_passed, [(c.name, c.error) for c in report.failed()]
    assert len(report.checks) == 16
    print(f"✅ {len(report.checks)} checks passed")


def test_v2_independence_covers_assembled_flows():
    print("🧪 Testing the v^2 independence check on the assembled hierarchy...")
    pipeline = TheoremPipeline(0, CTX)
    assert pipeline.check_v2_independence() == []
    v1 = DiffPoly.variable(2, CTX, 1, 0, 'v')
    v2 = DiffPoly.variable(2, CTX, 2, 0, 'v')
    pipeline.__dict__['assembled'] = EvolutionarySystem(
        {(1, 0): EvolutionaryOp([dx(v1 * v2), dx(v2)])}, 'v')
    found = [where for where, _ in pipeline.check_v2_independence()]
    assert found == ["assembled d v^1/d t1_0 depends on v^2"], found
    print("✅ A v^2 term in an assembled v^1 equation is reported")


class _SlowChecks:
    def checks(self):
        return [
            ('slow', "outlives the timeout", lambda: time.sleep(1.0) or []),
            ('after', "must not run on a half-built pipeline", lambda: []),
        ]


def test_timeout_skips_remaining_checks():
    print("🧪 Testing that a timed out check stops its pipeline...")
    report = VerificationReport(0, CTX)
    run_pipeline_checks(_SlowChecks(), report, CheckExecutor(timeout=0.1))
    assert [c.name for c in report.checks] == ['slow']
    assert 'timeout' in report.checks[0].error
    assert report.skipped == ['after']
    assert not report.all_passed
    print("✅ Remaining checks reported as skipped")


def _flip_eps2(S: EvolutionarySystem) -> EvolutionarySystem:
    """Change the sign of the eps^2 part of the first component of t2_0"""
    flows = dict(S.flows)
    first, second = flows[(2, 0)].components
    flows[(2, 0)] = EvolutionaryOp([first - first.eps_component(2).scale(2), second])
    return EvolutionarySystem(flows, S.var_name)


def test_fault_injection():
    print("🧪 Testing that a corrupted primary flow is caught...")
    report = verify_theorem(0, CTX, include_xi0=False, mutate=_flip_eps2)
    assert not report.all_passed
    failed = {c.name: c for c in report.failed()}
    assert 'd0-targets' in failed
    assert any(not diff.is_zero() for _, diff in failed['d0-targets'].differences)
    assert report.to_dict()['status'] == 'FAIL'
    print(f"✅ Failing checks: {', '.join(failed)}")


def test_check_executor():
    print("🧪 Testing the check executor...")
    executor = CheckExecutor(timeout=5)
    ok = executor.execute_check('ok', lambda: 42)
    assert ok['success'] and ok['result'] == 42 and ok['error'] is None
    assert ok['timed_out'] is False
    boom = executor.execute_check('boom', lambda: 1 / 0)
    assert not boom['success']
    assert 'ZeroDivisionError' in boom['error']
    slow = CheckExecutor(timeout=0.1).execute_check('slow', lambda: time.sleep(0.5))
    assert not slow['success'] and slow['timed_out']
    assert 'cpu_count' in executor.get_system_resources()
    print("✅ Results, errors and resources reported")


if __name__ == "__main__":
    main_for("🧮 Rank-2 Family Tests", [
        ("Genus-0 Potentials", test_genus0_potentials),
        ("Structure Constants", test_structure_constants),
        ("Dispersionless Closed Form", test_dispersionless_closed_form),
        ("Dispersionless Commutativity", test_dispersionless_flows_commute),
        ("Miura Consistency", test_miura_maps_are_consistent),
        ("Primary Flows", test_primary_flows_shape),
        ("Pipeline Artifacts", test_pipeline_artifacts),
        ("Verification", test_verify_theorem_small),
        ("Verification at xi = 0", test_verify_theorem_xi_zero),
        ("Verification at Full Depth", test_verify_theorem_full_depth),
        ("v2 Independence", test_v2_independence_covers_assembled_flows),
        ("Timeouts", test_timeout_skips_remaining_checks),
        ("Fault Injection", test_fault_injection),
        ("Check Executor", test_check_executor),
    ])
