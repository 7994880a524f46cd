"""
Differential Polynomial Ring
Exact truncated arithmetic with jet variables, epsilon and formal parameters
"""
import logging
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Dict, Iterable, Iterator, List, NamedTuple, Optional, Sequence, Tuple, Union

from sympy.polys.domains import QQ
from sympy.polys.rings import PolyElement, ring

from core.errors import NonzeroConstantTerm, TruncationError

logger = logging.getLogger(__name__)

# Coefficients are polynomials in xi, G1, G2 over the rationals.
PARAM_RING, XI, G1, G2 = ring("xi,G1,G2", QQ)
PARAM_NAMES = ('xi', 'G1', 'G2')
PARAM_GENS = {'xi': XI, 'G1': G1, 'G2': G2}

ParamScalar = PolyElement
ScalarLike = Union[int, Fraction, PolyElement]

# (alpha, k, multiplicity), sorted by (alpha, k)
Jet = Tuple[int, int, int]
Jets = Tuple[Jet, ...]


def to_scalar(value: ScalarLike) -> ParamScalar:
    """Convert an int, Fraction or parameter polynomial to a ParamScalar"""
    if isinstance(value, PolyElement):
        if value.ring != PARAM_RING:
            raise ValueError(f"Scalar from a foreign ring: {value.ring}")
        return value
    if isinstance(value, Fraction):
        return PARAM_RING(QQ(value.numerator, value.denominator))
    if isinstance(value, bool):
        raise ValueError("Booleans are not scalars")
    return PARAM_RING(value)


def rational(p: int, q: int = 1) -> ParamScalar:
    return PARAM_RING(QQ(p, q))


def scalar_rational(c: ParamScalar):
    """Return the ground value of a scalar that has no parameter dependence"""
    if not c.is_ground:
        raise ValueError(f"Scalar {c.as_expr()} depends on parameters")
    return c.LC if c else QQ.zero


def specialize_scalar(c: ParamScalar, **values: int) -> ParamScalar:
    result = c
    for name, value in values.items():
        result = result.subs(PARAM_GENS[name], value)
    return result


@dataclass(frozen=True)
class TruncationContext:
    eps_max: int
    deg_max: int

    def __post_init__(self):
        if self.eps_max < 0 or self.deg_max < 0:
            raise ValueError(f"Truncation bounds must be non-negative: {self}")

    def combine(self, other: 'TruncationContext') -> 'TruncationContext':
        if self == other:
            return self
        return TruncationContext(min(self.eps_max, other.eps_max), min(self.deg_max, other.deg_max))

    def widen(self, eps: int = 0, deg: int = 0) -> 'TruncationContext':
        return TruncationContext(self.eps_max + eps, self.deg_max + deg)

    def admits(self, eps_exp: int, u_deg: int) -> bool:
        return eps_exp <= self.eps_max and u_deg <= self.deg_max


class Monomial(NamedTuple):
    eps_exp: int
    jets: Jets

    @property
    def diff_degree(self) -> int:
        return jets_order(self.jets) - self.eps_exp

    def sort_key(self):
        """Canonical order: epsilon power first, then u-degree, then the jets

        Grouping by epsilon power before u-degree prints 1/2*u1^2 + 1/12*eps^2*u1[2] in that order.
        """
        return (self.eps_exp, jets_degree(self.jets), self.jets)


ONE_MONOMIAL = Monomial(0, ())


@lru_cache(maxsize=None)
def jets_degree(jets: Jets) -> int:
    return sum(mult for _, _, mult in jets)


@lru_cache(maxsize=None)
def jets_order(jets: Jets) -> int:
    return sum(k * mult for _, k, mult in jets)


@lru_cache(maxsize=200000)
def merge_jets(a: Jets, b: Jets) -> Jets:
    if not a:
        return b
    if not b:
        return a
    counts: Dict[Tuple[int, int], int] = {}
    for alpha, k, mult in a:
        counts[(alpha, k)] = mult
    for alpha, k, mult in b:
        counts[(alpha, k)] = counts.get((alpha, k), 0) + mult
    return tuple((alpha, k, mult) for (alpha, k), mult in sorted(counts.items()))


@lru_cache(maxsize=200000)
def lower_jet(jets: Jets, alpha: int, k: int) -> Tuple[Optional[Jets], int]:
    """Divide by one factor u^alpha_k; returns (jets, old multiplicity) or (None, 0)"""
    for idx, (a, order, mult) in enumerate(jets):
        if a == alpha and order == k:
            if mult == 1:
                return jets[:idx] + jets[idx + 1:], 1
            return jets[:idx] + ((a, order, mult - 1),) + jets[idx + 1:], mult
    return None, 0


@lru_cache(maxsize=200000)
def derive_jets(jets: Jets) -> Tuple[Tuple[Jets, int], ...]:
    """Terms of d/dx applied to a jet monomial, as (jets, multiplier) pairs"""
    out = []
    for alpha, k, mult in jets:
        lowered, _ = lower_jet(jets, alpha, k)
        out.append((merge_jets(lowered, ((alpha, k + 1, 1),)), mult))
    return tuple(out)


class DiffPoly:
    """Element of a truncated algebra of differential polynomials"""

    __slots__ = ('n_vars', 'context', 'terms', 'var_name', 'laurent')

    def __init__(self, n_vars: int, context: TruncationContext,
                 terms: Optional[Dict[Monomial, ParamScalar]] = None,
                 var_name: str = 'u', laurent: bool = False):
        if n_vars < 1:
            raise ValueError(f"Number of variables must be positive: {n_vars}")
        self.n_vars = n_vars
        self.context = context
        self.var_name = var_name
        self.laurent = laurent
        clean: Dict[Monomial, ParamScalar] = {}
        for mono, coeff in (terms or {}).items():
            if not coeff:
                continue
            if mono.eps_exp < 0 and not laurent:
                raise ValueError(f"Negative epsilon power {mono.eps_exp} outside a Laurent context")
            if not context.admits(mono.eps_exp, jets_degree(mono.jets)):
                continue
            for alpha, _, _ in mono.jets:
                if not 1 <= alpha <= n_vars:
                    raise ValueError(f"Variable index {alpha} out of range 1..{n_vars}")
            clean[mono] = coeff
        self.terms = clean

    # Construction helpers

    @classmethod
    def _raw(cls, n_vars, context, terms, var_name='u', laurent=False) -> 'DiffPoly':
        obj = cls.__new__(cls)
        obj.n_vars = n_vars
        obj.context = context
        obj.var_name = var_name
        obj.laurent = laurent
        obj.terms = terms
        return obj

    @classmethod
    def zero(cls, n_vars: int, context: TruncationContext, var_name: str = 'u') -> 'DiffPoly':
        return cls._raw(n_vars, context, {}, var_name)

    @classmethod
    def constant(cls, n_vars: int, context: TruncationContext, value: ScalarLike,
                 var_name: str = 'u') -> 'DiffPoly':
        c = to_scalar(value)
        return cls._raw(n_vars, context, {ONE_MONOMIAL: c} if c else {}, var_name)

    @classmethod
    def variable(cls, n_vars: int, context: TruncationContext, alpha: int, k: int = 0,
                 var_name: str = 'u') -> 'DiffPoly':
        return cls(n_vars, context, {Monomial(0, ((alpha, k, 1),)): PARAM_RING.one}, var_name)

    @classmethod
    def epsilon(cls, n_vars: int, context: TruncationContext, power: int = 1,
                var_name: str = 'u') -> 'DiffPoly':
        return cls(n_vars, context, {Monomial(power, ()): PARAM_RING.one}, var_name,
                   laurent=power < 0)

    def like(self, terms: Dict[Monomial, ParamScalar], context: Optional[TruncationContext] = None,
             var_name: Optional[str] = None) -> 'DiffPoly':
        """Build a polynomial in the same ring as self"""
        return DiffPoly(self.n_vars, context or self.context, terms,
                        var_name or self.var_name, self.laurent)

    def constant_like(self, value: ScalarLike) -> 'DiffPoly':
        return DiffPoly.constant(self.n_vars, self.context, value, self.var_name)

    # Queries

    def is_zero(self) -> bool:
        return not self.terms

    def __bool__(self) -> bool:
        return bool(self.terms)

    def __len__(self) -> int:
        return len(self.terms)

    def is_constant(self) -> bool:
        return all(not mono.jets for mono in self.terms)

    def constant_term(self) -> ParamScalar:
        return self.terms.get(ONE_MONOMIAL, PARAM_RING.zero)

    def vanishes_at_origin(self) -> bool:
        return all(mono.jets for mono in self.terms)

    def variables(self) -> set:
        return {alpha for mono in self.terms for alpha, _, _ in mono.jets}

    def max_order(self, alpha: Optional[int] = None) -> int:
        orders = [k for mono in self.terms for a, k, _ in mono.jets if alpha is None or a == alpha]
        return max(orders) if orders else -1

    def eps_exponents(self) -> List[int]:
        return sorted({mono.eps_exp for mono in self.terms})

    def sorted_terms(self) -> List[Tuple[Monomial, ParamScalar]]:
        return sorted(self.terms.items(), key=lambda item: item[0].sort_key())

    def __eq__(self, other) -> bool:
        if isinstance(other, DiffPoly):
            if self.n_vars != other.n_vars:
                return False
            return self.terms == other.terms
        if isinstance(other, (int, Fraction, PolyElement)):
            c = to_scalar(other)
            return self.terms == ({ONE_MONOMIAL: c} if c else {})
        return NotImplemented

    __hash__ = None

    def __repr__(self) -> str:
        from core.expressions import render_expr
        return f"DiffPoly({render_expr(self)})"

    def __str__(self) -> str:
        from core.expressions import render_expr
        return render_expr(self)

    # Arithmetic

    def _coerce(self, other) -> 'DiffPoly':
        if isinstance(other, DiffPoly):
            if other.n_vars != self.n_vars:
                raise ValueError(f"Mismatched number of variables: {self.n_vars} vs {other.n_vars}")
            return other
        return self.constant_like(other)

    def _joint(self, other: 'DiffPoly') -> Tuple[TruncationContext, str, bool]:
        names = {p.var_name for p in (self, other) if not p.is_constant()}
        if len(names) > 1:
            raise ValueError(f"Cannot combine polynomials in different variables: {sorted(names)}")
        name = names.pop() if names else self.var_name
        return self.context.combine(other.context), name, self.laurent or other.laurent

    def __add__(self, other) -> 'DiffPoly':
        other = self._coerce(other)
        ctx, name, laurent = self._joint(other)
        terms = dict(self.terms)
        for mono, coeff in other.terms.items():
            acc = terms.get(mono)
            total = coeff if acc is None else acc + coeff
            if total:
                terms[mono] = total
            else:
                terms.pop(mono, None)
        if ctx != self.context or ctx != other.context:
            return DiffPoly(self.n_vars, ctx, terms, name, laurent)
        return DiffPoly._raw(self.n_vars, ctx, terms, name, laurent)

    __radd__ = __add__

    def __neg__(self) -> 'DiffPoly':
        return DiffPoly._raw(self.n_vars, self.context, {m: -c for m, c in self.terms.items()},
                             self.var_name, self.laurent)

    def __sub__(self, other) -> 'DiffPoly':
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> 'DiffPoly':
        return self._coerce(other) - self

    def scale(self, value: ScalarLike) -> 'DiffPoly':
        c = to_scalar(value)
        if not c:
            return DiffPoly._raw(self.n_vars, self.context, {}, self.var_name, self.laurent)
        terms = {}
        for mono, coeff in self.terms.items():
            prod = coeff * c
            if prod:
                terms[mono] = prod
        return DiffPoly._raw(self.n_vars, self.context, terms, self.var_name, self.laurent)

    def __mul__(self, other) -> 'DiffPoly':
        if not isinstance(other, DiffPoly):
            return self.scale(other)
        other = self._coerce(other)
        ctx, name, laurent = self._joint(other)
        return DiffPoly._raw(self.n_vars, ctx, _multiply(self.terms, other.terms, ctx),
                             name, laurent)

    __rmul__ = __mul__

    def __pow__(self, n: int) -> 'DiffPoly':
        if n < 0:
            raise ValueError("Negative powers need invert_unit")
        result = self.constant_like(1)
        base = self
        while n:
            if n & 1:
                result = result * base
            n >>= 1
            if n:
                base = base * base
        return result

    # Structural maps

    def with_context(self, context: TruncationContext) -> 'DiffPoly':
        return DiffPoly(self.n_vars, context, self.terms, self.var_name, self.laurent)

    def renamed(self, var_name: str) -> 'DiffPoly':
        return DiffPoly._raw(self.n_vars, self.context, self.terms, var_name, self.laurent)

    def map_coefficients(self, fn) -> 'DiffPoly':
        return self.like({mono: fn(coeff) for mono, coeff in self.terms.items()})

    def specialize(self, **values: int) -> 'DiffPoly':
        """Substitute numeric values for xi, G1 or G2"""
        return self.map_coefficients(lambda c: specialize_scalar(c, **values))

    def filter_terms(self, predicate) -> 'DiffPoly':
        return DiffPoly._raw(self.n_vars, self.context,
                             {m: c for m, c in self.terms.items() if predicate(m)},
                             self.var_name, self.laurent)

    def eps_component(self, k: int) -> 'DiffPoly':
        return self.filter_terms(lambda m: m.eps_exp == k)

    def eps_coefficient(self, k: int) -> 'DiffPoly':
        """Coefficient of eps^k as an eps-free polynomial"""
        return DiffPoly._raw(self.n_vars, self.context,
                             {Monomial(0, m.jets): c for m, c in self.terms.items() if m.eps_exp == k},
                             self.var_name, self.laurent)

    def shift_eps(self, k: int) -> 'DiffPoly':
        return DiffPoly(self.n_vars, self.context,
                        {Monomial(m.eps_exp + k, m.jets): c for m, c in self.terms.items()},
                        self.var_name, self.laurent)

    def max_u_degree(self) -> int:
        return max((jets_degree(m.jets) for m in self.terms), default=-1)


def _multiply(a: Dict[Monomial, ParamScalar], b: Dict[Monomial, ParamScalar],
              ctx: TruncationContext) -> Dict[Monomial, ParamScalar]:
    if not a or not b:
        return {}
    eps_max, deg_max = ctx.eps_max, ctx.deg_max
    right = sorted(((jets_degree(m.jets), m, c) for m, c in b.items()), key=lambda t: t[0])
    result: Dict[Monomial, ParamScalar] = {}
    for m1, c1 in a.items():
        d1 = jets_degree(m1.jets)
        for d2, m2, c2 in right:
            if d1 + d2 > deg_max:
                break
            e = m1.eps_exp + m2.eps_exp
            if e > eps_max:
                continue
            mono = Monomial(e, merge_jets(m1.jets, m2.jets))
            prod = c1 * c2
            acc = result.get(mono)
            result[mono] = prod if acc is None else acc + prod
    return {m: c for m, c in result.items() if c}


def _check_same_ring(p: DiffPoly, q: DiffPoly) -> None:
    if p.n_vars != q.n_vars:
        raise ValueError(f"Mismatched number of variables: {p.n_vars} vs {q.n_vars}")


def arith(p: DiffPoly, q, which: str) -> DiffPoly:
    """Ring operation by name: add, sub, mul or scalar_mul"""
    if which == 'add':
        _check_same_ring(p, q)
        return p + q
    if which == 'sub':
        _check_same_ring(p, q)
        return p - q
    if which == 'mul':
        _check_same_ring(p, q)
        return p * q
    if which == 'scalar_mul':
        return p.scale(q)
    raise ValueError(f"Unknown ring operation: {which}")


def dx(p: DiffPoly) -> DiffPoly:
    """Total spatial derivative"""
    result: Dict[Monomial, ParamScalar] = {}
    for mono, coeff in p.terms.items():
        for jets, mult in derive_jets(mono.jets):
            key = Monomial(mono.eps_exp, jets)
            term = coeff * mult
            acc = result.get(key)
            result[key] = term if acc is None else acc + term
    return DiffPoly._raw(p.n_vars, p.context, {m: c for m, c in result.items() if c},
                         p.var_name, p.laurent)


def partial(p: DiffPoly, alpha: int, k: int) -> DiffPoly:
    """Partial derivative with respect to the jet variable u^alpha_k"""
    result: Dict[Monomial, ParamScalar] = {}
    for mono, coeff in p.terms.items():
        lowered, mult = lower_jet(mono.jets, alpha, k)
        if lowered is None:
            continue
        key = Monomial(mono.eps_exp, lowered)
        term = coeff * mult
        acc = result.get(key)
        result[key] = term if acc is None else acc + term
    return DiffPoly._raw(p.n_vars, p.context, {m: c for m, c in result.items() if c},
                         p.var_name, p.laurent)


def degree_component(p: DiffPoly, d: int) -> DiffPoly:
    """Homogeneous component of differential degree d"""
    return p.filter_terms(lambda m: m.diff_degree == d)


class Prolongation:
    """Cache of x-derivatives and their powers for a list of substitution images"""

    def __init__(self, images: Sequence[DiffPoly]):
        if not images:
            raise ValueError("Substitution needs at least one image")
        self.images = list(images)
        self._derivatives: Dict[Tuple[int, int], DiffPoly] = {}
        self._powers: Dict[Tuple[int, int, int], DiffPoly] = {}
        first = self.images[0]
        for image in self.images[1:]:
            _check_same_ring(first, image)
        self.target = first

    def derivative(self, alpha: int, k: int) -> DiffPoly:
        key = (alpha, k)
        cached = self._derivatives.get(key)
        if cached is None:
            if k == 0:
                cached = self.images[alpha - 1]
            else:
                cached = dx(self.derivative(alpha, k - 1))
            self._derivatives[key] = cached
        return cached

    def power(self, alpha: int, k: int, mult: int) -> DiffPoly:
        key = (alpha, k, mult)
        cached = self._powers.get(key)
        if cached is None:
            if mult == 1:
                cached = self.derivative(alpha, k)
            else:
                cached = self.power(alpha, k, mult - 1) * self.derivative(alpha, k)
            self._powers[key] = cached
        return cached


def substitute(p: DiffPoly, images: Union[Sequence[DiffPoly], Prolongation]) -> DiffPoly:
    """Replace each jet v^alpha_k of p by the k-th x-derivative of images[alpha]"""
    prolong = images if isinstance(images, Prolongation) else Prolongation(images)
    if len(prolong.images) != p.n_vars:
        raise ValueError(f"Expected {p.n_vars} images, got {len(prolong.images)}")
    target = prolong.target
    ctx = target.context
    if ctx.eps_max < p.context.eps_max or ctx.deg_max < p.context.deg_max:
        raise TruncationError(f"Substitution images in context {ctx} are too small for a polynomial in {p.context}")
    result: Dict[Monomial, ParamScalar] = {}
    for mono, coeff in p.terms.items():
        if mono.eps_exp > ctx.eps_max:
            continue
        factor: Optional[DiffPoly] = None
        for alpha, k, mult in mono.jets:
            piece = prolong.power(alpha, k, mult)
            factor = piece if factor is None else factor * piece
            if factor.is_zero():
                break
        if factor is None:
            product_terms = {ONE_MONOMIAL: PARAM_RING.one}
        else:
            product_terms = factor.terms
        for m, c in product_terms.items():
            e = m.eps_exp + mono.eps_exp
            if e > ctx.eps_max:
                continue
            key = Monomial(e, m.jets)
            term = c * coeff
            acc = result.get(key)
            result[key] = term if acc is None else acc + term
    return DiffPoly._raw(target.n_vars, ctx, {m: c for m, c in result.items() if c},
                         target.var_name, target.laurent or p.laurent)


def invert_unit(p: DiffPoly) -> DiffPoly:
    """Inverse of an element whose constant term is a nonzero rational"""
    c0 = p.constant_term()
    if not c0 or not c0.is_ground:
        raise NonzeroConstantTerm(f"Cannot invert {p}: constant term is not a nonzero rational")
    inv0 = QQ.one / c0.LC
    rest = (p - p.constant_like(c0)).scale(PARAM_RING(inv0))
    # p = c0 (1 + rest), every term of rest raises u-degree or eps
    result = p.constant_like(1)
    power = p.constant_like(1)
    steps = p.context.deg_max + p.context.eps_max + 1
    for n in range(1, steps + 1):
        power = power * rest
        if power.is_zero():
            break
        result = result + (power if n % 2 == 0 else -power)
    return result.scale(PARAM_RING(inv0))


def rescale_epsilon(p: DiffPoly, factor: ScalarLike) -> DiffPoly:
    """Map eps^(2k) to factor^k eps^(2k); odd powers are rejected"""
    g = to_scalar(factor)
    terms = {}
    for mono, coeff in p.terms.items():
        if mono.eps_exp % 2:
            raise TruncationError(f"Odd epsilon power {mono.eps_exp} cannot be rescaled")
        terms[mono] = coeff * g ** (mono.eps_exp // 2) if mono.eps_exp >= 0 else coeff
    return p.like(terms)


def relabel(p: DiffPoly, n_vars: int, mapping: Dict[int, int], var_name: Optional[str] = None) -> DiffPoly:
    """Move variables to new indices in a ring with n_vars variables"""
    terms: Dict[Monomial, ParamScalar] = {}
    for mono, coeff in p.terms.items():
        jets = tuple(sorted((mapping[a], k, mult) for a, k, mult in mono.jets))
        key = Monomial(mono.eps_exp, jets)
        terms[key] = terms.get(key, PARAM_RING.zero) + coeff
    return DiffPoly(n_vars, p.context, terms, var_name or p.var_name, p.laurent)


def drop_jets(p: DiffPoly, alpha: int) -> DiffPoly:
    """Terms of p that do not involve the variable alpha"""
    return p.filter_terms(lambda m: all(a != alpha for a, _, _ in m.jets))


def power_series(n_vars: int, context: TruncationContext, alpha: int,
                 coefficients: Iterable[ScalarLike], var_name: str = 'u') -> DiffPoly:
    """Sum of coefficients[n] * (u^alpha)^n"""
    terms = {}
    for n, value in enumerate(coefficients):
        c = to_scalar(value)
        if c:
            terms[Monomial(0, ((alpha, 0, n),) if n else ())] = c
    return DiffPoly(n_vars, context, terms, var_name)


def iter_jet_monomials(n_vars: int, order_sum: int, max_degree: int,
                       min_degree: int = 1) -> Iterator[Jets]:
    """Enumerate jet monomials with a fixed sum of orders and bounded degree"""
    variables = [(alpha, k) for alpha in range(1, n_vars + 1) for k in range(order_sum + 1)]

    def rec(idx: int, remaining_order: int, remaining_deg: int, acc: List[Jet]):
        if idx == len(variables):
            if remaining_order == 0 and max_degree - remaining_deg >= min_degree:
                yield tuple(acc)
            return
        alpha, k = variables[idx]
        max_mult = remaining_deg if k == 0 else min(remaining_deg, remaining_order // k)
        for mult in range(max_mult + 1):
            if mult:
                acc.append((alpha, k, mult))
            yield from rec(idx + 1, remaining_order - k * mult, remaining_deg - mult, acc)
            if mult:
                acc.pop()

    yield from rec(0, order_sum, max_degree, [])
