"""
Formal Solutions
Truncated power series solutions of evolutionary systems and their reciprocal transport
"""
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

from sympy.polys.domains import QQ
from sympy.polys.rings import PolyElement, ring as poly_ring

from core.calculus import EvolutionaryOp, EvolutionarySystem, FlowLabel, format_label
from core.errors import ClosednessViolation, NonzeroConstantTerm, TruncationError
from core.ring import PARAM_NAMES, DiffPoly, ParamScalar
from core.transforms import ReciprocalTransform, reciprocal_push_system

logger = logging.getLogger(__name__)

Series = PolyElement


class SeriesRing:
    """Polynomials in the parameters, eps, x, y and the chosen times, cut at total weight `degree`

    The weight of a monomial is the sum of its exponents in eps, x, y and the
    times; the parameters xi, G1, G2 carry no weight.
    """

    def __init__(self, times: Sequence[FlowLabel], degree: int):
        if degree < 1:
            raise ValueError(f"Series degree must be positive, got {degree}")
        self.times = tuple(times)
        self.degree = degree
        self.time_names = tuple(format_label(label) for label in self.times)
        self.names = PARAM_NAMES + ('eps', 'x', 'y') + self.time_names
        self.ring, *gens = poly_ring(",".join(self.names), QQ)
        self.gens = dict(zip(self.names, gens))
        self.index = {name: i for i, name in enumerate(self.names)}
        self._weighted = len(PARAM_NAMES)

    def weight(self, monom: Tuple[int, ...]) -> int:
        return sum(monom[self._weighted:])

    @property
    def zero(self) -> Series:
        return self.ring.zero

    @property
    def one(self) -> Series:
        return self.ring.one

    def gen(self, name: str) -> Series:
        try:
            return self.gens[name]
        except KeyError:
            raise ValueError(f"Unknown series variable: {name}")

    def truncate(self, p: Series, degree: Optional[int] = None) -> Series:
        cap = self.degree if degree is None else degree
        return self.ring.from_dict({m: c for m, c in p.items() if self.weight(m) <= cap})

    def mul(self, a: Series, b: Series) -> Series:
        return self.truncate(a * b)

    def power(self, a: Series, n: int) -> Series:
        result = self.one
        for _ in range(n):
            result = self.mul(result, a)
        return result

    def lowest_weight(self, p: Series) -> Optional[int]:
        return min((self.weight(m) for m in p.keys()), default=None)

    def lift(self, c: ParamScalar, eps_exp: int = 0) -> Series:
        """A parameter polynomial times eps^eps_exp as a series"""
        if eps_exp > self.degree:
            return self.zero
        pad = (0,) * (self.ring.ngens - len(PARAM_NAMES) - 1)
        return self.ring.from_dict({tuple(m) + (eps_exp,) + pad: q for m, q in c.items()})

    def diff(self, p: Series, name: str) -> Series:
        return p.diff(self.gen(name))

    def integrate(self, p: Series, name: str) -> Series:
        """Antiderivative in one variable vanishing where that variable is zero"""
        i = self.index[name]
        terms = {}
        for monom, coeff in p.items():
            exps = list(monom)
            exps[i] += 1
            terms[tuple(exps)] = coeff / exps[i]
        return self.truncate(self.ring.from_dict(terms))

    def restrict(self, p: Series, *names: str) -> Series:
        """Set the listed variables to zero"""
        for name in names:
            p = p.subs(self.gen(name), 0)
        return p

    def compose(self, p: Series, name: str, image: Series) -> Series:
        """Substitute image for the variable name in p"""
        i = self.index[name]
        by_power: Dict[int, Dict[Tuple[int, ...], object]] = {}
        for monom, coeff in p.items():
            exps = list(monom)
            k = exps[i]
            exps[i] = 0
            by_power.setdefault(k, {})[tuple(exps)] = coeff
        result = self.zero
        power = self.one
        for k in range(max(by_power, default=-1) + 1):
            if k in by_power:
                result += self.mul(self.ring.from_dict(by_power[k]), power)
            power = self.mul(power, image)
        return self.truncate(result)

    def invert_unit(self, p: Series) -> Series:
        """Inverse of a series whose weight-zero part is exactly 1"""
        head = self.ring.from_dict({m: c for m, c in p.items() if self.weight(m) == 0})
        if head != self.one:
            raise NonzeroConstantTerm(f"inv() needs weight-zero part 1, got {head.as_expr()}")
        rest = p - self.one
        result = self.one
        term = self.one
        for n in range(1, self.degree + 1):
            term = self.mul(term, -rest)
            if not term:
                break
            result += term
        return result

    def evaluate(self, p: DiffPoly, components: Sequence[Series], space: str = 'x') -> Series:
        """p with u^alpha_k replaced by the k-th space derivative of components[alpha]"""
        if len(components) != p.n_vars:
            raise ValueError(f"Expected {p.n_vars} series, got {len(components)}")
        space_gen = self.gen(space)
        jets: Dict[Tuple[int, int], Series] = {}

        def jet(alpha: int, k: int) -> Series:
            key = (alpha, k)
            if key not in jets:
                jets[key] = components[alpha - 1] if k == 0 else jet(alpha, k - 1).diff(space_gen)
            return jets[key]

        total = self.zero
        for mono, coeff in p.terms.items():
            term = self.lift(coeff, mono.eps_exp)
            for alpha, k, mult in mono.jets:
                if not term:
                    break
                for _ in range(mult):
                    term = self.mul(term, jet(alpha, k))
            total += term
        return total

    def render(self, p: Series) -> str:
        from core.expressions import render_series
        return render_series(p, self)


@dataclass
class FormalSolution:
    """Truncated series u^alpha(space, times, eps) with zero constant term"""
    series_ring: SeriesRing
    components: Tuple[Series, ...]
    space: str = 'x'
    var_name: str = 'u'
    coordinate: Optional[Series] = None

    def __post_init__(self):
        self.components = tuple(self.components)
        for alpha, comp in enumerate(self.components, start=1):
            if self.series_ring.lowest_weight(comp) == 0:
                raise NonzeroConstantTerm(f"Component {alpha} of the solution has a constant term")

    @property
    def degree(self) -> int:
        return self.series_ring.degree

    @property
    def n_vars(self) -> int:
        return len(self.components)

    def component(self, alpha: int) -> Series:
        return self.components[alpha - 1]

    def to_dict(self) -> Dict:
        result = {
            'space': self.space,
            'degree': self.degree,
            'times': list(self.series_ring.time_names),
            'components': {f"{self.var_name}{alpha}": self.series_ring.render(comp)
                           for alpha, comp in enumerate(self.components, start=1)},
        }
        if self.coordinate is not None:
            result['coordinate'] = self.series_ring.render(self.coordinate)
        return result


def _check_flow_context(op: EvolutionaryOp, degree: int, label: FlowLabel) -> None:
    ctx = op.context
    if ctx.deg_max < degree or ctx.eps_max < degree - 1:
        raise TruncationError(
            f"Flow {format_label(label)} is known to eps^{ctx.eps_max}, degree {ctx.deg_max}; "
            f"series of degree {degree} need eps^{degree - 1} and degree {degree}")


def solution_residuals(S: EvolutionarySystem, sol: FormalSolution) -> Dict[FlowLabel, List[Series]]:
    """Nonzero parts of d u/d t - P(u) below the accuracy bound, per flow"""
    sr = sol.series_ring
    failures = {}
    for label in sr.times:
        H = S[label]
        t_name = format_label(label)
        residuals = []
        for alpha, P in enumerate(H.components, start=1):
            if P is None:
                continue
            lhs = sr.diff(sol.component(alpha), t_name)
            rhs = sr.evaluate(P, sol.components, sol.space)
            residual = sr.truncate(lhs - rhs, sr.degree - 1)
            if residual:
                residuals.append(residual)
        if residuals:
            failures[label] = residuals
    return failures


def evolve_formal_solution(S: EvolutionarySystem, initial: Sequence[Series],
                           series_ring: SeriesRing) -> FormalSolution:
    """Picard iteration along each chosen time in turn, starting from series in x"""
    sr = series_ring
    if len(initial) != S.n_vars:
        raise ValueError(f"System has {S.n_vars} variables, got {len(initial)} initial series")
    current = [sr.truncate(c) for c in initial]
    for alpha, c in enumerate(current, start=1):
        if sr.lowest_weight(c) == 0:
            raise NonzeroConstantTerm(f"Initial series {alpha} has a constant term")
        extra = set(sr.names[i] for m in c.keys() for i, e in enumerate(m) if e) - set(PARAM_NAMES) - {'x', 'eps'}
        if extra:
            raise ValueError(f"Initial series {alpha} depends on {sorted(extra)}")

    for label in sr.times:
        H = S[label]
        if not H.is_complete():
            raise ValueError(f"Flow {format_label(label)} has unknown components")
        if not H.vanishes_at_origin():
            raise NonzeroConstantTerm(f"Flow {format_label(label)} does not vanish at the origin")
        _check_flow_context(H, sr.degree, label)
        t_name = format_label(label)
        base = list(current)
        # every pass raises the t-degree of the error by one
        for iteration in range(sr.degree + 2):
            rates = [sr.evaluate(P, current) for P in H.components]
            updated = [sr.truncate(b + sr.integrate(r, t_name)) for b, r in zip(base, rates)]
            if updated == current:
                break
            current = updated
        logger.debug(f"Picard iteration along {t_name} stable after {iteration + 1} passes")

    sol = FormalSolution(sr, tuple(current), 'x', S.var_name)
    failures = solution_residuals(S, sol)
    if failures:
        labels = ", ".join(format_label(l) for l in failures)
        raise TruncationError(f"Series solution leaves a residual along {labels}; do the flows commute?")
    logger.info(f"Formal solution to degree {sr.degree} along {len(sr.times)} times")
    return sol


def solution_transport(S: EvolutionarySystem, f, sol: FormalSolution,
                       target_name: str = 'v') -> FormalSolution:
    """Move a series solution of S to a solution of the reciprocally transformed system"""
    sr = sol.series_ring
    T = f if isinstance(f, ReciprocalTransform) else ReciprocalTransform(f, target_name)
    chosen = EvolutionarySystem({label: S[label] for label in sr.times}, S.var_name)
    for label, H in chosen.items():
        _check_flow_context(H, sr.degree, label)
    witnesses: Dict[FlowLabel, DiffPoly] = {}
    transformed = reciprocal_push_system(T, chosen, witnesses)

    u = sol.components
    density = sr.one + sr.evaluate(T.f, u)
    y = sr.integrate(density, 'x')
    for i, label in enumerate(sr.times):
        later = sr.time_names[i + 1:]
        flux = sr.restrict(sr.evaluate(witnesses[label], u), 'x', *later)
        y = y + sr.integrate(flux, format_label(label))
    y = sr.truncate(y)

    for label in sr.times:
        t_name = format_label(label)
        flux = sr.evaluate(witnesses[label], u)
        gap = sr.truncate(sr.diff(y, t_name) - flux, sr.degree - 1)
        if gap:
            raise ClosednessViolation(f"dy is not closed along {t_name}: {sr.render(gap)}")

    # revert y = x + h(x, t) into x = X(y, t)
    x_gen, y_gen = sr.gen('x'), sr.gen('y')
    h = y - x_gen
    X = y_gen
    for iteration in range(sr.degree + 1):
        updated = sr.truncate(y_gen - sr.compose(h, 'x', X))
        if updated == X:
            break
        X = updated
    logger.debug(f"Series reversion stable after {iteration + 1} passes")

    v = tuple(sr.compose(comp, 'x', X) for comp in u)
    moved = FormalSolution(sr, v, 'y', T.target_name, coordinate=y)
    failures = solution_residuals(transformed, moved)
    if failures:
        labels = ", ".join(format_label(l) for l in failures)
        raise TruncationError(f"Transported series does not solve the new system along {labels}")
    logger.info(f"Transported a degree {sr.degree} solution by f = {T.f}")
    return moved
