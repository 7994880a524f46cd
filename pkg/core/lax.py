"""
Lax Operators
Pseudodifferential operators and the KdV flows they generate
"""
import logging
from functools import lru_cache
from math import comb
from typing import Dict, Optional

from core.calculus import EvolutionaryOp, EvolutionarySystem, antiderivative
from core.errors import TruncationError
from core.ring import (
    XI, DiffPoly, Monomial, TruncationContext, dx, rational, to_scalar,
)
from core.transforms import ReciprocalTransform, reciprocal_push_system

logger = logging.getLogger(__name__)


def generalized_binomial(n: int, k: int) -> int:
    if k < 0:
        return 0
    if n >= 0:
        return comb(n, k)
    # (-1)^k C(k - n - 1, k) for negative n
    return (-1) ** k * comb(k - n - 1, k)


def double_factorial(n: int) -> int:
    result = 1
    while n > 1:
        result *= n
        n -= 2
    return result


class PseudoDiffOp:
    """Finite Laurent sum of a_k d_x^k truncated below ord_min"""

    __slots__ = ('coeffs', 'ord_min', 'context')

    def __init__(self, coeffs: Dict[int, DiffPoly], ord_min: int, context: TruncationContext):
        self.ord_min = ord_min
        self.context = context
        self.coeffs = {k: a for k, a in coeffs.items() if k >= ord_min and not a.is_zero()}

    @property
    def ord_max(self) -> Optional[int]:
        return max(self.coeffs) if self.coeffs else None

    def coefficient(self, k: int) -> DiffPoly:
        return self.coeffs.get(k) or DiffPoly(1, self.context, {}, 'u', laurent=True)

    def is_zero(self) -> bool:
        return not self.coeffs

    def plus_part(self) -> 'PseudoDiffOp':
        return PseudoDiffOp({k: a for k, a in self.coeffs.items() if k >= 0}, self.ord_min, self.context)

    def minus_part(self) -> 'PseudoDiffOp':
        return PseudoDiffOp({k: a for k, a in self.coeffs.items() if k < 0}, self.ord_min, self.context)

    def truncated(self, ord_min: int) -> 'PseudoDiffOp':
        return PseudoDiffOp(self.coeffs, ord_min, self.context)

    def __add__(self, other: 'PseudoDiffOp') -> 'PseudoDiffOp':
        coeffs = dict(self.coeffs)
        for k, a in other.coeffs.items():
            coeffs[k] = coeffs[k] + a if k in coeffs else a
        return PseudoDiffOp(coeffs, max(self.ord_min, other.ord_min), self.context)

    def __neg__(self) -> 'PseudoDiffOp':
        return PseudoDiffOp({k: -a for k, a in self.coeffs.items()}, self.ord_min, self.context)

    def __sub__(self, other: 'PseudoDiffOp') -> 'PseudoDiffOp':
        return self + (-other)

    def compose(self, other: 'PseudoDiffOp', ord_min: Optional[int] = None) -> 'PseudoDiffOp':
        """self o other with d_x^i o b = sum_l C(i, l) b^(l) d_x^(i-l)"""
        floor = max(self.ord_min, other.ord_min) if ord_min is None else ord_min
        derivatives: Dict[int, Dict[int, DiffPoly]] = {}

        def nth_derivative(j: int, l: int) -> DiffPoly:
            cache = derivatives.setdefault(j, {0: other.coeffs[j]})
            while l not in cache:
                top = max(cache)
                cache[top + 1] = dx(cache[top])
            return cache[l]

        result: Dict[int, DiffPoly] = {}
        for i, a in self.coeffs.items():
            for j in other.coeffs:
                top_l = i + j - floor
                if i >= 0:
                    top_l = min(top_l, i)
                for l in range(0, top_l + 1):
                    c = generalized_binomial(i, l)
                    if not c:
                        continue
                    term = (a * nth_derivative(j, l)).scale(c)
                    order = i + j - l
                    result[order] = result[order] + term if order in result else term
        return PseudoDiffOp(result, floor, self.context)

    def __mul__(self, other: 'PseudoDiffOp') -> 'PseudoDiffOp':
        return self.compose(other)

    def commutator(self, other: 'PseudoDiffOp', ord_min: Optional[int] = None) -> 'PseudoDiffOp':
        return self.compose(other, ord_min) - other.compose(self, ord_min)

    def __repr__(self) -> str:
        parts = [f"({a})*D^{k}" for k, a in sorted(self.coeffs.items(), reverse=True)]
        return "PseudoDiffOp(" + " + ".join(parts) + ")"


def pdo_arith(a: PseudoDiffOp, b: PseudoDiffOp, which: str) -> PseudoDiffOp:
    if which == 'add':
        return a + b
    if which == 'mul':
        return a * b
    if which == 'commutator':
        return a.commutator(b)
    raise ValueError(f"Unknown operator operation: {which}")


def _laurent(terms: Dict[Monomial, object], context: TruncationContext) -> DiffPoly:
    return DiffPoly(1, context, terms, 'u', laurent=True)


def lax_operator(context: TruncationContext, ord_min: int) -> PseudoDiffOp:
    """L = d_x^2 + 2 eps^-2 u"""
    one = _laurent({Monomial(0, ()): to_scalar(1)}, context)
    potential = _laurent({Monomial(-2, ((1, 0, 1),)): to_scalar(2)}, context)
    return PseudoDiffOp({2: one, 0: potential}, ord_min, context)


def sqrt_L(L: PseudoDiffOp, depth: int) -> PseudoDiffOp:
    """M = d_x + sum_{k<=0} a_k d_x^k with M^2 = L down to order depth + 1"""
    if L.ord_max != 2 or L.coefficient(2) != 1:
        raise ValueError("sqrt_L expects a monic second order operator")
    ctx = L.context
    one = _laurent({Monomial(0, ()): to_scalar(1)}, ctx)
    M = PseudoDiffOp({1: one}, depth, ctx)
    for j in range(0, depth - 1, -1):
        square = M.compose(M, ord_min=j + 1)
        residual = L.coefficient(j + 1) - square.coefficient(j + 1)
        a_j = residual.scale(rational(1, 2))
        if not a_j.is_zero():
            coeffs = dict(M.coeffs)
            coeffs[j] = a_j
            M = PseudoDiffOp(coeffs, depth, ctx)
    return M


def fractional_power(M: PseudoDiffOp, n: int, ord_min: int) -> PseudoDiffOp:
    """M^n kept down to order ord_min"""
    result = M.truncated(ord_min - (n - 1))
    for j in range(2, n + 1):
        result = result.compose(M, ord_min=ord_min - (n - j))
    return result


def _work_context(d: int) -> TruncationContext:
    # eps exponents are never positive before the final rescaling
    return TruncationContext(0, d + 2)


@lru_cache(maxsize=64)
def kdv_flow(d: int, context: TruncationContext) -> DiffPoly:
    """P_d^KdV normalized to vanish at the origin"""
    if d < 0:
        raise ValueError(f"KdV flows are indexed by d >= 0, got {d}")
    work = _work_context(d)
    n = 2 * d + 1
    ord_min = -(2 * d + 3)
    L = lax_operator(work, ord_min)
    M = sqrt_L(L, ord_min - (n - 1))
    A = fractional_power(M, n, ord_min)
    bracket = A.plus_part().commutator(L, ord_min=0)
    for k, coeff in bracket.coeffs.items():
        if k != 0:
            raise TruncationError(f"[A_+, L] has a nonzero coefficient at order {k}")
    residue_check = bracket.coefficient(0) + A.minus_part().commutator(L, ord_min=0).coefficient(0)
    if not residue_check.is_zero():
        raise TruncationError(f"[A_+, L] and -[A_-, L] differ at order 0: {residue_check}")

    factor = rational(1, 2 * double_factorial(n))
    shift = 2 * d + 2
    terms = {}
    for mono, coeff in bracket.coefficient(0).terms.items():
        e = mono.eps_exp + shift
        if e < 0 or e % 2:
            raise TruncationError(f"KdV flow {d} keeps an eps^{e} term")
        terms[Monomial(e, mono.jets)] = coeff * factor
    flux = DiffPoly(1, TruncationContext(max(context.eps_max, 2 * d), max(context.deg_max, d + 1)), terms)
    P = antiderivative(flux)
    logger.debug(f"KdV flow {d}: {len(P)} terms")
    return P.with_context(context)


@lru_cache(maxsize=64)
def xi_kdv_flow(d: int, context: TruncationContext) -> DiffPoly:
    """P_d of the reciprocal transform of KdV by the conservation law xi*u"""
    flow = EvolutionaryOp.single(dx(kdv_flow(d, context)))
    f = DiffPoly.variable(1, context, 1).scale(XI)
    pushed = reciprocal_push_system(ReciprocalTransform(f), EvolutionarySystem({(1, d): flow}))
    Q = pushed[(1, d)].component(1)
    P = antiderivative(Q)
    logger.debug(f"xi-KdV flow {d}: {len(P)} terms")
    return P
