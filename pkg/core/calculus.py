"""
Evolutionary Calculus
Evolutionary operators, conservation laws and commuting flows
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

from core.errors import NoSolution, NonzeroConstantTerm, NotATotalDerivative
from core.linear import solve_exact
from core.ring import (
    PARAM_RING, DiffPoly, Monomial, ParamScalar, TruncationContext, dx, iter_jet_monomials,
    jets_degree, lower_jet, merge_jets, partial, rational,
)

logger = logging.getLogger(__name__)

FlowLabel = Tuple[int, int]


def format_label(label: FlowLabel) -> str:
    beta, d = label
    return f"t{beta}_{d}"


class EvolutionaryOp:
    """The derivation sum_n (d_x^n P^alpha) d/du^alpha_n; unknown components are None"""

    __slots__ = ('components', 'n_vars', '_derivatives')

    def __init__(self, components: Sequence[Optional[DiffPoly]]):
        comps = tuple(components)
        if not comps:
            raise ValueError("An evolutionary operator needs at least one component")
        known = [c for c in comps if c is not None]
        for c in known:
            if c.n_vars != len(comps):
                raise ValueError(f"Component over {c.n_vars} variables in a {len(comps)}-component operator")
        self.components = comps
        self.n_vars = len(comps)
        self._derivatives: Dict[Tuple[int, int], DiffPoly] = {}

    @classmethod
    def single(cls, p: DiffPoly) -> 'EvolutionaryOp':
        return cls((p,))

    @property
    def context(self) -> TruncationContext:
        ctx = None
        for c in self.components:
            if c is not None:
                ctx = c.context if ctx is None else ctx.combine(c.context)
        if ctx is None:
            raise ValueError("Operator has no known components")
        return ctx

    @property
    def var_name(self) -> str:
        for c in self.components:
            if c is not None and not c.is_constant():
                return c.var_name
        return 'u'

    def is_complete(self) -> bool:
        return all(c is not None for c in self.components)

    def component(self, alpha: int) -> DiffPoly:
        comp = self.components[alpha - 1]
        if comp is None:
            raise ValueError(f"Component {alpha} of the flow is not known")
        return comp

    def derivative(self, alpha: int, k: int) -> DiffPoly:
        key = (alpha, k)
        cached = self._derivatives.get(key)
        if cached is None:
            cached = self.component(alpha) if k == 0 else dx(self.derivative(alpha, k - 1))
            self._derivatives[key] = cached
        return cached

    def vanishes_at_origin(self) -> bool:
        return all(c.vanishes_at_origin() for c in self.components if c is not None)

    def map(self, fn: Callable[[DiffPoly], DiffPoly]) -> 'EvolutionaryOp':
        return EvolutionaryOp([None if c is None else fn(c) for c in self.components])

    def is_zero(self) -> bool:
        return all(c is not None and c.is_zero() for c in self.components)

    def __eq__(self, other) -> bool:
        if not isinstance(other, EvolutionaryOp):
            return NotImplemented
        return self.components == other.components

    __hash__ = None

    def __repr__(self) -> str:
        return f"EvolutionaryOp({', '.join('?' if c is None else str(c) for c in self.components)})"


@dataclass
class EvolutionarySystem:
    """Labelled family of evolutionary operators, one per time t^beta_d"""
    flows: Dict[FlowLabel, EvolutionaryOp] = field(default_factory=dict)
    var_name: str = 'u'

    @property
    def n_vars(self) -> int:
        for op in self.flows.values():
            return op.n_vars
        raise ValueError("Empty system")

    def labels(self) -> List[FlowLabel]:
        return sorted(self.flows)

    def items(self) -> Iterator[Tuple[FlowLabel, EvolutionaryOp]]:
        for label in self.labels():
            yield label, self.flows[label]

    def __getitem__(self, label: FlowLabel) -> EvolutionaryOp:
        return self.flows[label]

    def __contains__(self, label: FlowLabel) -> bool:
        return label in self.flows

    def __len__(self) -> int:
        return len(self.flows)

    def add(self, label: FlowLabel, op: EvolutionaryOp) -> None:
        if self.flows and op.n_vars != self.n_vars:
            raise ValueError(f"Flow {format_label(label)} has {op.n_vars} components, system has {self.n_vars}")
        self.flows[label] = op

    def map(self, fn: Callable[[DiffPoly], DiffPoly], var_name: Optional[str] = None) -> 'EvolutionarySystem':
        return EvolutionarySystem({label: op.map(fn) for label, op in self.flows.items()},
                                  var_name or self.var_name)


def apply(H: EvolutionaryOp, f: DiffPoly) -> DiffPoly:
    """Apply the evolutionary operator H to f"""
    if f.n_vars != H.n_vars:
        raise ValueError(f"Operator on {H.n_vars} variables applied to a polynomial in {f.n_vars}")
    result = DiffPoly.zero(f.n_vars, f.context, H.var_name)
    for alpha in sorted(f.variables()):
        for k in range(f.max_order(alpha) + 1):
            df = partial(f, alpha, k)
            if df.is_zero():
                continue
            result = result + H.derivative(alpha, k) * df
    return result


def commutator(H1: EvolutionaryOp, H2: EvolutionaryOp) -> EvolutionaryOp:
    """[H1, H2] with components H1(Q^alpha) - H2(P^alpha)"""
    if H1.n_vars != H2.n_vars:
        raise ValueError(f"Mismatched operators: {H1.n_vars} vs {H2.n_vars} components")
    components = []
    for alpha in range(1, H1.n_vars + 1):
        P = H1.components[alpha - 1]
        Q = H2.components[alpha - 1]
        if P is None or Q is None:
            components.append(None)
            continue
        components.append(apply(H1, Q) - apply(H2, P))
    return EvolutionaryOp(components)


def variational_derivative(f: DiffPoly, alpha: int) -> DiffPoly:
    """Euler operator sum_n (-d_x)^n df/du^alpha_n"""
    result = DiffPoly.zero(f.n_vars, f.context, f.var_name)
    for n in range(f.max_order(alpha), -1, -1):
        # Horner scheme: result = df/du_n - d_x(result)
        result = partial(f, alpha, n) - dx(result)
    return result


def is_total_derivative(f: DiffPoly) -> bool:
    if not f.vanishes_at_origin():
        return False
    return all(variational_derivative(f, alpha).is_zero() for alpha in range(1, f.n_vars + 1))


def integrate_in_jet(a: DiffPoly, alpha: int, k: int) -> DiffPoly:
    """G with dG/du^alpha_k = a, for a not depending on u^alpha_k beyond polynomially"""
    terms: Dict[Monomial, ParamScalar] = {}
    widened = a.context.widen(deg=1)
    for mono, coeff in a.terms.items():
        jets = merge_jets(mono.jets, ((alpha, k, 1),))
        _, mult = lower_jet(jets, alpha, k)
        key = Monomial(mono.eps_exp, jets)
        terms[key] = terms.get(key, PARAM_RING.zero) + coeff * rational(1, mult)
    return DiffPoly(a.n_vars, widened, terms, a.var_name).with_context(a.context)


def antiderivative(f: DiffPoly) -> DiffPoly:
    """R with d_x R = f and R vanishing at the origin"""
    if not f.vanishes_at_origin():
        raise NonzeroConstantTerm(f"{f} has a nonzero constant term")
    for alpha in range(1, f.n_vars + 1):
        delta = variational_derivative(f, alpha)
        if not delta.is_zero():
            raise NotATotalDerivative(f"variational derivative in variable {alpha} is {delta}")

    remainder = f
    primitive = DiffPoly.zero(f.n_vars, f.context, f.var_name)
    cap = (f.max_order() + 2) * f.n_vars * 4 + 16
    for _ in range(cap):
        if remainder.is_zero():
            return primitive
        top = remainder.max_order()
        if top == 0:
            break
        alpha = min(a for mono in remainder.terms for a, k, _ in mono.jets if k == top)
        coeff = partial(remainder, alpha, top)
        if coeff.max_order() >= top:
            break
        step = integrate_in_jet(coeff, alpha, top - 1)
        primitive = primitive + step
        remainder = remainder - dx(step)
    if remainder.is_zero():
        return primitive
    raise NotATotalDerivative(f"integration by parts stalled with remainder {remainder}")


def conservation_law_witness(f: DiffPoly, H: EvolutionaryOp) -> Optional[DiffPoly]:
    """The flux R with H(f) = d_x R, or None when f is not a conservation law of H"""
    try:
        return antiderivative(apply(H, f))
    except (NotATotalDerivative, NonzeroConstantTerm) as e:
        logger.debug(f"{f} is not a conservation law: {e}")
        return None


def _linearized_column(P0: EvolutionaryOp, basis_poly: DiffPoly, P0_comp: DiffPoly) -> DiffPoly:
    """[H_{P0}, H_b] for a single basis polynomial b"""
    return apply(P0, basis_poly) - apply(EvolutionaryOp.single(basis_poly), P0_comp)


def extend_commuting_flow(P: DiffPoly, f: DiffPoly,
                          basis_key: Optional[Callable] = None) -> DiffPoly:
    """The unique Q = f(u) u_x + O(eps) whose flow commutes with the flow of P = u u_x + O(eps)"""
    if P.n_vars != 1 or f.n_vars != 1:
        raise ValueError("Commuting flows are reconstructed for a single dependent variable")
    ctx = P.context
    u = DiffPoly.variable(1, ctx, 1, 0, P.var_name)
    u_x = DiffPoly.variable(1, ctx, 1, 1, P.var_name)
    if P.eps_coefficient(0) != u * u_x:
        raise ValueError(f"Leading term of {P} is not u u_x")
    if any(m.jets and m.jets[-1][1] > 0 for m in f.terms) or any(m.eps_exp for m in f.terms):
        raise ValueError(f"{f} is not a power series in u")

    work = TruncationContext(ctx.eps_max, ctx.deg_max + ctx.eps_max + 1)
    P_w = P.with_context(work)
    P0 = P_w.eps_coefficient(0)
    Q = f.with_context(work) * DiffPoly.variable(1, work, 1, 1, P.var_name)

    for k in range(1, ctx.eps_max + 1):
        eq_deg = work.deg_max - k
        step_ctx = TruncationContext(k, eq_deg)
        H_P = EvolutionaryOp.single(P_w.with_context(step_ctx))
        H_Q = EvolutionaryOp.single(Q.with_context(step_ctx))
        rhs_poly = -commutator(H_P, H_Q).components[0].eps_coefficient(k)

        basis = list(iter_jet_monomials(1, k + 1, eq_deg - 1))
        if basis_key is not None:
            basis.sort(key=basis_key)
        if not basis:
            if not rhs_poly.is_zero():
                raise NoSolution(f"eps^{k}: no candidate monomials but residual {rhs_poly}")
            continue

        lin_ctx = TruncationContext(0, eq_deg)
        H_P0 = EvolutionaryOp.single(P0.with_context(lin_ctx))
        columns = []
        for jets in basis:
            b = DiffPoly(1, lin_ctx, {Monomial(0, jets): PARAM_RING.one}, P.var_name)
            columns.append(_linearized_column(H_P0, b, P0.with_context(lin_ctx)))

        equations: Dict[Monomial, int] = {}
        for col in columns:
            for mono in col.terms:
                equations.setdefault(mono, len(equations))
        for mono in rhs_poly.terms:
            equations.setdefault(mono, len(equations))
        rows: List[Dict[int, ParamScalar]] = [dict() for _ in equations]
        for j, col in enumerate(columns):
            for mono, coeff in col.terms.items():
                rows[equations[mono]][j] = coeff
        rhs = [PARAM_RING.zero] * len(equations)
        for mono, coeff in rhs_poly.terms.items():
            rhs[equations[mono]] = coeff

        solution = solve_exact(rows, rhs, len(basis), label=f"commuting flow at eps^{k}")
        Q_k = DiffPoly(1, work, {Monomial(k, jets): c for jets, c in zip(basis, solution)}, P.var_name)
        Q = Q + Q_k
        logger.debug(f"eps^{k}: {len(Q_k)} terms from {len(basis)} candidates")

    return Q.with_context(ctx)


def pairwise_commute(system: EvolutionarySystem,
                     labels: Optional[Iterable[FlowLabel]] = None) -> Dict[Tuple[FlowLabel, FlowLabel], EvolutionaryOp]:
    """Nonzero commutators among the complete flows of a system"""
    chosen = [l for l in (labels or system.labels()) if system[l].is_complete()]
    failures = {}
    for i, a in enumerate(chosen):
        for b in chosen[i + 1:]:
            comm = commutator(system[a], system[b])
            if not comm.is_zero():
                failures[(a, b)] = comm
    return failures
