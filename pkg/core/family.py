"""
Rank-2 Family
Genus-0 data, dispersionless recursion, primary flows and Miura maps of the xi, G1, G2 family
"""
import logging
from dataclasses import dataclass
from functools import lru_cache
from math import factorial
from typing import List, Optional, Tuple

from core.calculus import EvolutionaryOp, EvolutionarySystem, integrate_in_jet
from core.config import get_config
from core.errors import ClosednessViolation
from core.lax import kdv_flow, xi_kdv_flow
from core.ring import (
    G1, G2, XI, DiffPoly, TruncationContext, drop_jets, dx, invert_unit, partial, rational,
    relabel, rescale_epsilon,
)
from core.transforms import MiuraTransform, miura_compose

logger = logging.getLogger(__name__)

Matrix2 = Tuple[Tuple[DiffPoly, DiffPoly], Tuple[DiffPoly, DiffPoly]]
Mismatch = Tuple[str, DiffPoly]


def default_context() -> TruncationContext:
    return get_config().truncation_context()


def _resolve(context: Optional[TruncationContext]) -> TruncationContext:
    return context if context is not None else default_context()


def _vars(context: TruncationContext, var_name: str = 'u') -> Tuple[DiffPoly, DiffPoly]:
    return (DiffPoly.variable(2, context, 1, 0, var_name),
            DiffPoly.variable(2, context, 2, 0, var_name))


def _unit(u2: DiffPoly) -> DiffPoly:
    """inv(1 + xi*u2)"""
    return invert_unit(u2.scale(XI) + 1)


def bar_variables(context: TruncationContext) -> Tuple[DiffPoly, DiffPoly]:
    """u-bar^1 = (u^1 + xi (u^2)^2/2)/(1 + xi u^2), u-bar^2 = u^2"""
    u1, u2 = _vars(context)
    return (u1 + (u2 ** 2).scale(XI * rational(1, 2))) * _unit(u2), u2


@dataclass
class Genus0Data:
    """Genus-0 potentials with the two expressions for F^1 that must agree"""
    F1: DiffPoly
    F2: DiffPoly
    F1_tree_sum: DiffPoly
    context: TruncationContext

    @property
    def potentials(self) -> Tuple[DiffPoly, DiffPoly]:
        return self.F1, self.F2


@lru_cache(maxsize=16)
def genus0_potentials(context: Optional[TruncationContext] = None) -> Genus0Data:
    context = _resolve(context)
    # two extra degrees survive the second derivatives
    work = TruncationContext(0, context.deg_max + 2)
    u1, u2 = _vars(work)
    inv = _unit(u2)
    numerator = ((u1 ** 2).scale(rational(1, 2))
                 + (u1 * u2 ** 2).scale(XI * rational(1, 2))
                 - (u2 ** 3 * (u2.scale(XI) + 4)).scale(XI * rational(1, 24)))
    closed_form = numerator * inv
    tree_sum = ((u1 ** 2).scale(rational(1, 2)) * inv
                + (u1 * u2 ** 2).scale(XI * rational(1, 2)) * inv
                + (u2 ** 4).scale(XI ** 2 * rational(1, 8)) * inv
                - (u2 ** 3).scale(XI * rational(1, 6)))
    if closed_form != tree_sum:
        raise ValueError(f"Stable tree sum differs from the closed form of F^1: {closed_form - tree_sum}")
    F2 = (u2 ** 2).scale(rational(1, 2))
    logger.debug(f"Genus-0 potentials to degree {work.deg_max}: {len(closed_form)} terms in F^1")
    return Genus0Data(closed_form, F2, tree_sum, work)


def displayed_structure_constants(context: TruncationContext) -> Tuple[Matrix2, Matrix2]:
    """C_1 and C_2 written through u-bar"""
    b1, b2 = bar_variables(context)
    inv = _unit(b2)
    zero = DiffPoly.zero(2, context)
    one = DiffPoly.constant(2, context, 1)
    off = (b2 - b1).scale(XI) * inv
    C1 = ((inv, off), (zero, zero))
    C2 = ((off, (b1 - b2).scale(XI) * (b1.scale(XI) + 1) * inv), (zero, one))
    return C1, C2


@lru_cache(maxsize=16)
def structure_constants(context: Optional[TruncationContext] = None) -> Tuple[Matrix2, Matrix2]:
    """(C_gamma)^alpha_beta = d^2 F^alpha / du^beta du^gamma"""
    context = _resolve(context)
    F = genus0_potentials(TruncationContext(0, context.deg_max)).potentials
    computed = []
    for gamma in (1, 2):
        rows = []
        for alpha in (0, 1):
            rows.append(tuple(partial(partial(F[alpha], beta, 0), gamma, 0).with_context(context)
                              for beta in (1, 2)))
        computed.append(tuple(rows))
    displayed = displayed_structure_constants(context)
    for gamma, (mine, shown) in enumerate(zip(computed, displayed), start=1):
        for a in range(2):
            for b in range(2):
                if mine[a][b] != shown[a][b]:
                    raise ValueError(f"C_{gamma}[{a + 1}][{b + 1}] differs from the displayed matrix: "
                                     f"{mine[a][b] - shown[a][b]}")
    return computed[0], computed[1]


def dispersionless_closed_form(d: int, context: TruncationContext) -> Matrix2:
    b1, b2 = bar_variables(context)
    zero = DiffPoly.zero(2, context)
    diag = rational(1, factorial(d + 1))
    M_d = (b1 ** (d + 2) - (b1 * b2 ** (d + 1)).scale(d + 2) + (b2 ** (d + 2)).scale(d + 1))
    M_d = M_d.scale(-XI * rational(1, factorial(d + 2)))
    return ((b1 ** (d + 1)).scale(diag), M_d), (zero, (b2 ** (d + 1)).scale(diag))


def _mat_entry(C: Matrix2, P: Matrix2, a: int, b: int) -> DiffPoly:
    return C[a][0] * P[0][b] + C[a][1] * P[1][b]


@lru_cache(maxsize=64)
def dispersionless_flow(d: int, context: Optional[TruncationContext] = None) -> Matrix2:
    """P_d with dP_d/du^gamma = C_gamma P_(d-1), P_d(0) = 0 and P_(-1) = Id"""
    if d < 0:
        raise ValueError(f"Dispersionless flows are indexed by d >= 0, got {d}")
    context = _resolve(context)
    context = TruncationContext(0, context.deg_max)
    C1, C2 = structure_constants(context)
    if d == 0:
        one = DiffPoly.constant(2, context, 1)
        zero = DiffPoly.zero(2, context)
        prev = ((one, zero), (zero, one))
    else:
        prev = dispersionless_flow(d - 1, context)

    lower = TruncationContext(0, max(context.deg_max - 1, 0))
    rows = []
    for a in range(2):
        row = []
        for b in range(2):
            A = _mat_entry(C1, prev, a, b)
            B = _mat_entry(C2, prev, a, b)
            curl = (partial(A, 2, 0) - partial(B, 1, 0)).with_context(lower)
            if not curl.is_zero():
                raise ClosednessViolation(f"P_{d}[{a + 1}][{b + 1}]: d2 A - d1 B = {curl}")
            # du^1 first, then the u^2 dependence on the line u^1 = 0
            row.append(integrate_in_jet(A, 1, 0) + integrate_in_jet(drop_jets(B, 1), 2, 0))
        rows.append(tuple(row))
    P = (rows[0], rows[1])

    closed = dispersionless_closed_form(d, context)
    for a in range(2):
        for b in range(2):
            if P[a][b] != closed[a][b]:
                raise ValueError(f"P_{d}[{a + 1}][{b + 1}] differs from the closed form: "
                                 f"{P[a][b] - closed[a][b]}")
    logger.debug(f"Dispersionless flow {d} matches the closed form to degree {context.deg_max}")
    return P


def dispersionless_system(d_max: int, context: Optional[TruncationContext] = None) -> EvolutionarySystem:
    """du^alpha/dt^beta_d = d_x P_d[alpha][beta] in the original variables"""
    flows = {}
    for d in range(d_max + 1):
        P = dispersionless_flow(d, context)
        for b in range(2):
            flows[(b + 1, d)] = EvolutionaryOp([dx(P[0][b]), dx(P[1][b])])
    return EvolutionarySystem(flows)


def kdv_component(d: int, context: TruncationContext, alpha: int, charge,
                  var_name: str = 'u', n_vars: int = 2) -> DiffPoly:
    """P_d^KdV in the variable alpha with eps^2 replaced by charge*eps^2"""
    P = relabel(kdv_flow(d, context), n_vars, {1: alpha}, var_name)
    return rescale_epsilon(P, charge)


def xi_kdv_component(d: int, context: TruncationContext, alpha: int, charge,
                     var_name: str = 'v', n_vars: int = 2) -> DiffPoly:
    P = relabel(xi_kdv_flow(d, context), n_vars, {1: alpha}, var_name)
    return rescale_epsilon(P, charge)


def _miura_numerator(context: TruncationContext) -> DiffPoly:
    """u^1 + xi (u^2)^2/2 + eps^2/24 d_x^2 (xi G2 u^2 + G1/(1 + xi u^2))"""
    u1, u2 = _vars(context)
    inner = u2.scale(XI * G2) + _unit(u2).scale(G1)
    correction = dx(dx(inner)).shift_eps(2).scale(rational(1, 24))
    return u1 + (u2 ** 2).scale(XI * rational(1, 2)) + correction


def tilde_miura(context: Optional[TruncationContext] = None) -> MiuraTransform:
    """u -> u-tilde, in which the primary flows are written"""
    context = _resolve(context)
    _, u2 = _vars(context)
    return MiuraTransform([_miura_numerator(context), u2])


def main_miura(context: Optional[TruncationContext] = None) -> MiuraTransform:
    """u -> u-hat"""
    context = _resolve(context)
    _, u2 = _vars(context)
    return MiuraTransform([_unit(u2) * _miura_numerator(context), u2])


def composite_miura(context: Optional[TruncationContext] = None) -> MiuraTransform:
    """u-tilde -> u-hat: u-hat^1 = u-tilde^1/(1 + xi u-tilde^2), u-hat^2 = u-tilde^2"""
    context = _resolve(context)
    t1, t2 = _vars(context)
    return MiuraTransform([t1 * _unit(t2), t2])


def composite_miura_mismatches(context: Optional[TruncationContext] = None) -> List[Mismatch]:
    """Differences between the three Miura maps; empty when they are consistent"""
    context = _resolve(context)
    tilde = tilde_miura(context)
    main = main_miura(context)
    _, u2 = _vars(context)
    mismatches = []
    product = main.images[0] * (u2.scale(XI) + 1) - tilde.images[0]
    if not product.is_zero():
        mismatches.append(("main u-hat^1 * (1 + xi u^2) - u-tilde^1", product))
    composed = miura_compose(tilde, composite_miura(context))
    for alpha in (1, 2):
        diff = composed.images[alpha - 1] - main.images[alpha - 1]
        if not diff.is_zero():
            mismatches.append((f"composite after tilde vs main, component {alpha}", diff))
    return mismatches


def primary_flows(d_max: int, context: Optional[TruncationContext] = None) -> EvolutionarySystem:
    """Known DR flows in u-tilde: the four d = 0 equations and the u-tilde^2 equations for all d"""
    context = _resolve(context)
    t1, t2 = _vars(context)
    inv = _unit(t2)
    zero = DiffPoly.zero(2, context)
    w = t1 * inv
    flows = {
        (1, 0): EvolutionaryOp([dx(w), zero]),
    }
    dispersive = dx(dx(w) * inv) * inv
    density = (t1 * t2 * inv
               - (t1 ** 2 * inv ** 2).scale(rational(1, 2))
               - dispersive.shift_eps(2).scale(G1 * rational(1, 12)))
    flows[(2, 0)] = EvolutionaryOp([dx(density).scale(XI), dx(t2)])
    for d in range(1, d_max + 1):
        flows[(1, d)] = EvolutionaryOp([None, zero])
        flows[(2, d)] = EvolutionaryOp([None, dx(kdv_component(d, context, 2, G2))])
    logger.debug(f"Primary flows up to d = {d_max}")
    return EvolutionarySystem(flows)


def intermediate_hat_flows(d_max: int, context: Optional[TruncationContext] = None) -> EvolutionarySystem:
    """eps^0 parts of the flows in u-hat"""
    context = TruncationContext(0, _resolve(context).deg_max)
    h1, h2 = _vars(context)
    inv = _unit(h2)
    zero = DiffPoly.zero(2, context)
    flows = {}
    for d in range(d_max + 1):
        c = rational(1, factorial(d + 1))
        flows[(1, d)] = EvolutionaryOp([inv * dx((h1 ** (d + 1)).scale(c)), zero])
        first = (dx(h1) * (h1 ** (d + 1) - h2 ** (d + 1)) * inv).scale(-XI * c)
        flows[(2, d)] = EvolutionaryOp([first, dx(kdv_component(d, context, 2, G2))])
    return EvolutionarySystem(flows)


def proposition_flows(d_max: int, context: Optional[TruncationContext] = None) -> EvolutionarySystem:
    """The transformed hierarchy with v^1 components known to eps^0 and exact v^2 components"""
    context = TruncationContext(0, _resolve(context).deg_max)
    v1, _ = _vars(context, 'v')
    zero = DiffPoly.zero(2, context, 'v')
    flows = {}
    for d in range(d_max + 1):
        flows[(1, d)] = EvolutionaryOp([dx((v1 ** (d + 1)).scale(rational(1, factorial(d + 1)))), zero])
        flows[(2, d)] = EvolutionaryOp([
            dx((v1 ** (d + 2)).scale(-XI * rational(1, factorial(d + 2)))),
            dx(xi_kdv_component(d, context, 2, G2)),
        ])
    return EvolutionarySystem(flows, 'v')


def theorem_target_flows(d_max: int, context: Optional[TruncationContext] = None) -> EvolutionarySystem:
    """Both sectors in KdV form: the hierarchy the pipeline must produce"""
    context = _resolve(context)
    zero = DiffPoly.zero(2, context, 'v')
    flows = {}
    for d in range(d_max + 1):
        flows[(1, d)] = EvolutionaryOp([dx(kdv_component(d, context, 1, G1, 'v')), zero])
        flows[(2, d)] = EvolutionaryOp([
            dx(kdv_component(d + 1, context, 1, G1, 'v')).scale(-XI),
            dx(xi_kdv_component(d, context, 2, G2)),
        ])
    return EvolutionarySystem(flows, 'v')


def specialize_system(S: EvolutionarySystem, **values: int) -> EvolutionarySystem:
    return S.map(lambda p: p.specialize(**values))
