"""
Theorem Verifier
Runs the Miura plus reciprocal pipeline on the family's DR flows and checks every claimed flow
"""
import logging
from dataclasses import dataclass, field
from functools import cached_property
from math import factorial
from typing import Any, Callable, Dict, List, Optional, Tuple

from core.calculus import (
    EvolutionaryOp, EvolutionarySystem, FlowLabel, extend_commuting_flow, format_label,
    pairwise_commute,
)
from core.check_executor import CheckExecutor
from core.config import get_config
from core.family import (
    composite_miura, composite_miura_mismatches, dispersionless_flow, dispersionless_system,
    genus0_potentials, intermediate_hat_flows, kdv_component, main_miura, primary_flows,
    proposition_flows, specialize_system, structure_constants, theorem_target_flows, tilde_miura,
)
from core.ring import (
    G1, XI, DiffPoly, TruncationContext, dx, power_series, rational, relabel,
)
from core.transforms import (
    MiuraTransform, ReciprocalTransform, miura_push_system, reciprocal_push_system,
)

logger = logging.getLogger(__name__)

Mismatch = Tuple[str, DiffPoly]
SystemMutation = Callable[[EvolutionarySystem], EvolutionarySystem]


@dataclass
class CheckResult:
    name: str
    description: str
    passed: bool
    differences: List[Mismatch] = field(default_factory=list)
    error: Optional[str] = None
    execution_time: float = 0.0
    memory_used: float = 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            'name': self.name,
            'description': self.description,
            'status': 'PASS' if self.passed else 'FAIL',
            'error': self.error,
            'execution_time': round(self.execution_time, 3),
            'memory_used_mb': round(self.memory_used, 1),
            'differences': [
                {'where': where, 'eps_orders': diff.eps_exponents(), 'difference': str(diff)}
                for where, diff in self.differences
            ],
        }


@dataclass
class VerificationReport:
    d_max: int
    context: TruncationContext
    xi_zero: bool = False
    checks: List[CheckResult] = field(default_factory=list)
    skipped: List[str] = field(default_factory=list)
    resources: Dict[str, Any] = field(default_factory=dict)

    @property
    def all_passed(self) -> bool:
        return bool(self.checks) and not self.skipped and all(c.passed for c in self.checks)

    def failed(self) -> List[CheckResult]:
        return [c for c in self.checks if not c.passed]

    def check(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'status': 'PASS' if self.all_passed else 'FAIL',
            'd_max': self.d_max,
            'eps_max': self.context.eps_max,
            'deg_max': self.context.deg_max,
            'xi_zero': self.xi_zero,
            'checks': [c.to_dict() for c in self.checks],
            'skipped': list(self.skipped),
            'resources': self.resources,
        }

    def summary_lines(self) -> List[str]:
        lines = [f"verify-theorem d_max={self.d_max} eps_max={self.context.eps_max} "
                 f"deg_max={self.context.deg_max}{' xi=0' if self.xi_zero else ''}"]
        for c in self.checks:
            status = "PASS" if c.passed else "FAIL"
            lines.append(f"{status:<8} {c.name:<24} {c.execution_time:8.2f}s  {c.description}")
            if c.error:
                lines.append(f"         error: {c.error}")
            for where, diff in c.differences:
                lines.append(f"         {where}: {diff}")
        for name in self.skipped:
            lines.append(f"{'SKIP':<8} {name}")
        passed = sum(1 for c in self.checks if c.passed)
        lines.append(f"Overall: {passed}/{len(self.checks) + len(self.skipped)} checks passed")
        return lines


def _compare(out: List[Mismatch], where: str, got: Optional[DiffPoly], expected: DiffPoly) -> None:
    if got is None:
        out.append((f"{where} (not computed)", expected))
        return
    diff = got - expected
    if not diff.is_zero():
        out.append((where, diff))


def _single(p: DiffPoly) -> DiffPoly:
    """A two-variable polynomial free of the second variable, as a one-variable one"""
    if 2 in p.variables():
        raise ValueError(f"{p} depends on the second variable")
    return relabel(p, 1, {1: 1})


def _double(p: DiffPoly) -> DiffPoly:
    return relabel(p, 2, {1: 1})


class TheoremPipeline:
    """Artifacts of the verification, computed on first use"""

    def __init__(self, d_max: int, context: TruncationContext, xi_zero: bool = False,
                 mutate: Optional[SystemMutation] = None):
        if d_max < 0:
            raise ValueError(f"d_max must be non-negative, got {d_max}")
        if context.deg_max < 2:
            raise ValueError(f"deg_max must be at least 2, got {context.deg_max}")
        self.d_max = d_max
        self.context = context
        self.xi_zero = xi_zero
        self.mutate = mutate
        self.context0 = TruncationContext(0, context.deg_max)

    def _specialized(self, p: DiffPoly) -> DiffPoly:
        return p.specialize(xi=0) if self.xi_zero else p

    def _specialized_system(self, S: EvolutionarySystem) -> EvolutionarySystem:
        return specialize_system(S, xi=0) if self.xi_zero else S

    def _specialized_miura(self, M: MiuraTransform) -> MiuraTransform:
        return MiuraTransform([p.specialize(xi=0) for p in M.images]) if self.xi_zero else M

    def _conservation_law(self, context: TruncationContext) -> ReciprocalTransform:
        f = DiffPoly.variable(2, context, 2).scale(XI)
        return ReciprocalTransform(self._specialized(f))

    @cached_property
    def primary(self) -> EvolutionarySystem:
        S = self._specialized_system(primary_flows(self.d_max, self.context))
        if self.mutate is not None:
            S = self.mutate(S)
            logger.warning("Primary flows were mutated before verification")
        return S

    @cached_property
    def hat_system(self) -> EvolutionarySystem:
        return miura_push_system(self._specialized_miura(composite_miura(self.context)), self.primary)

    @cached_property
    def transformed(self) -> EvolutionarySystem:
        S = reciprocal_push_system(self._conservation_law(self.context), self.hat_system)
        logger.info(f"Pipeline produced {len(S)} flows in v")
        return S

    @cached_property
    def targets(self) -> EvolutionarySystem:
        return self._specialized_system(theorem_target_flows(self.d_max, self.context))

    @cached_property
    def seed(self) -> DiffPoly:
        """The flow v v_y + O(eps) from which the v^1 sector is generated"""
        if self.xi_zero:
            return dx(kdv_component(1, self.context, 1, G1, 'v', n_vars=1))
        T0 = self.transformed[(2, 0)].component(1)
        T0 = _single(T0)
        try:
            return T0.map_coefficients(lambda c: c.exquo(-XI))
        except Exception as e:
            raise ValueError(f"T_0 is not divisible by xi: {e}")

    def _generate(self, n: int, basis_key=None) -> DiffPoly:
        f = power_series(1, self.context, 1, [0] * n + [rational(1, factorial(n))], 'v')
        return extend_commuting_flow(self.seed, f, basis_key)

    @cached_property
    def generated(self) -> Dict[int, Tuple[DiffPoly, DiffPoly]]:
        """S_d and T_d in the single variable v = v^1"""
        flows = {}
        for d in range(self.d_max + 1):
            S_d = self._generate(d)
            if self.xi_zero:
                T_d = DiffPoly.zero(1, self.context, 'v')
            else:
                T_d = self._generate(d + 1).scale(-XI)
            flows[d] = (S_d, T_d)
            logger.info(f"Generated S_{d} ({len(S_d)} terms) and T_{d} ({len(T_d)} terms)")
        return flows

    @cached_property
    def assembled(self) -> EvolutionarySystem:
        """The full transformed hierarchy: generated v^1 sector, pipeline v^2 sector"""
        flows = {}
        for d, (S_d, T_d) in self.generated.items():
            flows[(1, d)] = EvolutionaryOp([_double(S_d), self.transformed[(1, d)].components[1]])
            flows[(2, d)] = EvolutionaryOp([_double(T_d), self.transformed[(2, d)].components[1]])
        return EvolutionarySystem(flows, 'v')

    @cached_property
    def dispersionless_v(self) -> EvolutionarySystem:
        """eps = 0 flows pushed through the main Miura map and the reciprocal transformation"""
        disp = self._specialized_system(dispersionless_system(self.d_max, self.context0))
        hat = miura_push_system(self._specialized_miura(main_miura(self.context0)), disp)
        return reciprocal_push_system(self._conservation_law(self.context0), hat)

    # Checks, each returning the mismatches found

    def check_pipeline(self) -> List[Mismatch]:
        out = list(composite_miura_mismatches(self.context))
        for label, op in self.transformed.items():
            if op.components[1] is None:
                out.append((f"{format_label(label)} v^2 component", DiffPoly.zero(2, self.context, 'v')))
        return out

    def check_d0_targets(self) -> List[Mismatch]:
        ctx = self.context
        v1 = DiffPoly.variable(2, ctx, 1, 0, 'v')
        v2 = DiffPoly.variable(2, ctx, 2, 0, 'v')
        v1_yy = DiffPoly.variable(2, ctx, 1, 2, 'v')
        T0 = dx((v1 ** 2).scale(rational(1, 2)) + v1_yy.shift_eps(2).scale(G1 * rational(1, 12))).scale(-XI)
        expected = {
            (1, 0): (dx(v1), DiffPoly.zero(2, ctx, 'v')),
            (2, 0): (self._specialized(T0), dx(v2)),
        }
        out: List[Mismatch] = []
        for label, comps in expected.items():
            for alpha, want in enumerate(comps, start=1):
                _compare(out, f"d v^{alpha}/d {format_label(label)}",
                         self.transformed[label].components[alpha - 1], want)
        return out

    def check_v2_sector(self) -> List[Mismatch]:
        out: List[Mismatch] = []
        for d in range(self.d_max + 1):
            for beta in (1, 2):
                label = (beta, d)
                _compare(out, f"d v^2/d {format_label(label)}",
                         self.transformed[label].components[1], self.targets[label].component(2))
        return out

    def check_generation(self) -> List[Mismatch]:
        out: List[Mismatch] = []
        S_0, T_0 = self.generated[0]
        _compare(out, "generated S_0 vs pipeline", _double(S_0), self.transformed[(1, 0)].component(1))
        _compare(out, "generated T_0 vs pipeline", _double(T_0), self.transformed[(2, 0)].component(1))
        if self.d_max >= 1:
            # a different basis order must give the same flow
            reordered = self._generate(1, basis_key=lambda jets: tuple(-x for jet in jets for x in jet))
            _compare(out, "S_1 with reordered basis", reordered, self.generated[1][0])
        return out

    def check_kdv_comparison(self) -> List[Mismatch]:
        out: List[Mismatch] = []
        plain = specialize_system(self.targets, xi=0)
        for d, (S_d, T_d) in self.generated.items():
            _compare(out, f"S_{d} vs KdV", S_d, _single(self.targets[(1, d)].component(1)))
            _compare(out, f"T_{d} vs -xi KdV", T_d, _single(self.targets[(2, d)].component(1)))
            if not self.xi_zero:
                kdv = _single(plain[(1, d)].component(1))
                _compare(out, f"S_{d} at xi = 0", S_d.specialize(xi=0), kdv)
                _compare(out, f"T_{d} at xi = 0", T_d.specialize(xi=0), DiffPoly.zero(1, self.context, 'v'))
        return out

    def check_v2_independence(self) -> List[Mismatch]:
        out: List[Mismatch] = []
        for label in ((1, 0), (2, 0)):
            comp = self.transformed[label].component(1)
            if 2 in comp.variables():
                out.append((f"d v^1/d {format_label(label)} depends on v^2",
                            comp.filter_terms(lambda m: any(a == 2 for a, _, _ in m.jets))))
        for label, op in self.dispersionless_v.items():
            comp = op.component(1)
            if 2 in comp.variables():
                out.append((f"eps^0 of d v^1/d {format_label(label)} depends on v^2",
                            comp.filter_terms(lambda m: any(a == 2 for a, _, _ in m.jets))))
        for label, op in self.assembled.items():
            comp = op.components[0]
            if comp is not None and 2 in comp.variables():
                out.append((f"assembled d v^1/d {format_label(label)} depends on v^2",
                            comp.filter_terms(lambda m: any(a == 2 for a, _, _ in m.jets))))
        return out

    def check_dispersionless(self) -> List[Mismatch]:
        out: List[Mismatch] = []
        ctx0 = self.context0
        genus0_potentials(ctx0)
        structure_constants(ctx0)
        for d in range(self.d_max + 1):
            dispersionless_flow(d, ctx0)

        disp = self._specialized_system(dispersionless_system(self.d_max, ctx0))
        hat = miura_push_system(self._specialized_miura(main_miura(ctx0)), disp)
        expected_hat = self._specialized_system(intermediate_hat_flows(self.d_max, ctx0))
        for label, op in hat.items():
            for alpha in (1, 2):
                _compare(out, f"u-hat^{alpha} along {format_label(label)}",
                         op.components[alpha - 1], expected_hat[label].component(alpha))

        expected_v = self._specialized_system(proposition_flows(self.d_max, ctx0))
        for label, op in self.dispersionless_v.items():
            for alpha in (1, 2):
                _compare(out, f"eps^0 v^{alpha} along {format_label(label)}",
                         op.components[alpha - 1], expected_v[label].component(alpha))

        for label, op in self.transformed.items():
            for alpha in (1, 2):
                comp = op.components[alpha - 1]
                if comp is not None:
                    _compare(out, f"eps^0 of pipeline v^{alpha} along {format_label(label)}",
                             comp.with_context(ctx0), self.dispersionless_v[label].component(alpha))

        for d, (S_d, T_d) in self.generated.items():
            _compare(out, f"eps^0 of S_{d}", S_d.with_context(ctx0),
                     _single(self.dispersionless_v[(1, d)].component(1)))
            _compare(out, f"eps^0 of T_{d}", T_d.with_context(ctx0),
                     _single(self.dispersionless_v[(2, d)].component(1)))

        tilde0 = miura_push_system(self._specialized_miura(tilde_miura(ctx0)), disp)
        for label, op in self.primary.items():
            for alpha in (1, 2):
                comp = op.components[alpha - 1]
                if comp is not None:
                    _compare(out, f"eps^0 of primary u-tilde^{alpha} along {format_label(label)}",
                             comp.with_context(ctx0), tilde0[label].component(alpha))
        return out

    def check_commutativity(self) -> List[Mismatch]:
        out: List[Mismatch] = []
        for (a, b), comm in pairwise_commute(self.assembled).items():
            for alpha, comp in enumerate(comm.components, start=1):
                if comp is not None and not comp.is_zero():
                    out.append((f"[{format_label(a)}, {format_label(b)}] component {alpha}", comp))
        return out

    def checks(self) -> List[Tuple[str, str, Callable[[], List[Mismatch]]]]:
        return [
            ('pipeline', "Miura maps agree and every flow is transformed", self.check_pipeline),
            ('d0-targets', "d = 0 flows are S_0 = v1_y and T_0", self.check_d0_targets),
            ('v2-sector', "v^2 equations are the xi-KdV flows at G2", self.check_v2_sector),
            ('generation', "v^1 flows reconstructed from the d = 0 data", self.check_generation),
            ('kdv-comparison', "S_d and T_d are KdV and -xi KdV at G1", self.check_kdv_comparison),
            ('v2-independence', "v^1 equations do not involve v^2", self.check_v2_independence),
            ('dispersionless', "eps^0 parts match the genus-0 recursion", self.check_dispersionless),
            ('commutativity', "all produced flows commute", self.check_commutativity),
        ]


def run_pipeline_checks(pipeline: TheoremPipeline, report: VerificationReport,
                        executor: CheckExecutor, fail_fast: bool = False, prefix: str = '') -> None:
    checks = pipeline.checks()
    for idx, (name, description, fn) in enumerate(checks):
        outcome = executor.execute_check(prefix + name, fn)
        differences = outcome['result'] if outcome['success'] else []
        result = CheckResult(
            name=prefix + name,
            description=description,
            passed=outcome['success'] and not differences,
            differences=differences or [],
            error=outcome['error'],
            execution_time=outcome['execution_time'],
            memory_used=outcome['memory_used'],
        )
        report.checks.append(result)
        if result.passed:
            logger.info(f"✅ {result.name}")
            continue
        logger.warning(f"❌ {result.name}: {result.error or f'{len(result.differences)} differences'}")
        if outcome.get('timed_out'):
            # the abandoned thread may still be filling the pipeline's cached stages
            logger.error(f"Skipping the remaining {prefix or 'main '}checks after the timeout of {result.name}")
            report.skipped.extend(prefix + later for later, _, _ in checks[idx + 1:])
            return
        if fail_fast:
            report.skipped.extend(prefix + later for later, _, _ in checks[idx + 1:])
            return


def verify_theorem(d_max: Optional[int] = None, context: Optional[TruncationContext] = None,
                   xi_zero: bool = False, include_xi0: Optional[bool] = None,
                   mutate: Optional[SystemMutation] = None) -> VerificationReport:
    """Run every check and collect a report; a failing check never stops the run unless fail_fast"""
    config = get_config()
    if d_max is None:
        d_max = config.truncation['d_max']
    if context is None:
        context = config.truncation_context()
    if include_xi0 is None:
        include_xi0 = config.verification['include_xi0_branch'] and not xi_zero
    fail_fast = config.verification['fail_fast']

    executor = CheckExecutor(timeout=config.verification['check_timeout'],
                             monitor_memory=config.verification['monitor_memory'])
    report = VerificationReport(d_max, context, xi_zero)
    report.resources = executor.get_system_resources()
    logger.info(f"Verifying d_max={d_max} at eps^{context.eps_max}, degree {context.deg_max}"
                f"{' with xi = 0' if xi_zero else ''}")

    run_pipeline_checks(TheoremPipeline(d_max, context, xi_zero, mutate), report, executor, fail_fast)
    if include_xi0 and not (fail_fast and report.failed()):
        run_pipeline_checks(TheoremPipeline(d_max, context, True, mutate), report, executor,
                            fail_fast, prefix='xi0/')

    if report.all_passed:
        logger.info(f"All {len(report.checks)} checks passed")
    else:
        logger.warning(f"{len(report.failed())} of {len(report.checks)} checks failed")
    return report
