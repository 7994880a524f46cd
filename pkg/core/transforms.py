"""
Transformations
Miura transformations and nonlinear reciprocal transformations
"""
import logging
from typing import Dict, List, Optional, Sequence, Tuple

from sympy import Matrix
from sympy.polys.domains import QQ

from core.calculus import (
    EvolutionaryOp, EvolutionarySystem, apply, conservation_law_witness, format_label,
)
from core.errors import DegenerateJacobian, NonzeroConstantTerm, NotAConservationLaw
from core.ring import (
    PARAM_RING, DiffPoly, Monomial, Prolongation, TruncationContext, dx, invert_unit,
    scalar_rational, substitute,
)

logger = logging.getLogger(__name__)


class MiuraTransform:
    """Change of dependent variables u -> u~(u, eps)"""

    def __init__(self, images: Sequence[DiffPoly], validate: bool = True):
        self.images = tuple(images)
        if not self.images:
            raise ValueError("A Miura transformation needs at least one image")
        self.n_vars = len(self.images)
        for image in self.images:
            if image.n_vars != self.n_vars:
                raise ValueError(f"Image over {image.n_vars} variables in a rank {self.n_vars} map")
        if validate:
            self.validate()

    @property
    def context(self) -> TruncationContext:
        ctx = self.images[0].context
        for image in self.images[1:]:
            ctx = ctx.combine(image.context)
        return ctx

    def jacobian(self) -> Matrix:
        """Leading Jacobian at the origin as a rational matrix"""
        rows = []
        for image in self.images:
            row = []
            for beta in range(1, self.n_vars + 1):
                coeff = image.terms.get(Monomial(0, ((beta, 0, 1),)), PARAM_RING.zero)
                try:
                    row.append(QQ.to_sympy(scalar_rational(coeff)))
                except ValueError:
                    raise DegenerateJacobian(f"Jacobian entry {coeff.as_expr()} is not a rational number")
            rows.append(row)
        return Matrix(rows)

    def validate(self) -> None:
        for alpha, image in enumerate(self.images, start=1):
            if not image.vanishes_at_origin():
                raise NonzeroConstantTerm(f"Image {alpha} of the Miura map does not vanish at the origin")
            bad = [m for m in image.terms if m.diff_degree != 0]
            if bad:
                raise ValueError(f"Image {alpha} has terms of nonzero differential degree")
        if self.jacobian().det() == 0:
            raise DegenerateJacobian("Leading Jacobian of the Miura map is singular")

    def identity_like(self) -> bool:
        return all(image == DiffPoly.variable(self.n_vars, image.context, alpha)
                   for alpha, image in enumerate(self.images, start=1))

    def __eq__(self, other) -> bool:
        if not isinstance(other, MiuraTransform):
            return NotImplemented
        return self.images == other.images

    __hash__ = None

    def __repr__(self) -> str:
        return "MiuraTransform(" + ", ".join(str(i) for i in self.images) + ")"


def identity_miura(n_vars: int, context: TruncationContext) -> MiuraTransform:
    return MiuraTransform([DiffPoly.variable(n_vars, context, alpha) for alpha in range(1, n_vars + 1)])


def miura_compose(first: MiuraTransform, second: MiuraTransform) -> MiuraTransform:
    """Apply first, then second: images of second written in the original variables"""
    prolong = Prolongation(first.images)
    return MiuraTransform([substitute(image, prolong) for image in second.images])


def miura_invert(M: MiuraTransform) -> MiuraTransform:
    """Inverse change of variables, by fixed-point iteration on the nonlinear part"""
    ctx = M.context
    n = M.n_vars
    J_inv = M.jacobian().inv()
    linear: List[DiffPoly] = []
    nonlinear: List[DiffPoly] = []
    for image in M.images:
        lin_terms = {m: c for m, c in image.terms.items()
                     if m.eps_exp == 0 and len(m.jets) == 1 and m.jets[0][1] == 0 and m.jets[0][2] == 1}
        linear.append(image.like(lin_terms))
        nonlinear.append(image - image.like(lin_terms))

    def apply_j_inv(vec: Sequence[DiffPoly]) -> List[DiffPoly]:
        out = []
        for alpha in range(n):
            acc = DiffPoly.zero(n, ctx)
            for beta in range(n):
                entry = J_inv[alpha, beta]
                if entry != 0:
                    acc = acc + vec[beta].scale(PARAM_RING(QQ.from_sympy(entry)))
            out.append(acc)
        return out

    targets = [DiffPoly.variable(n, ctx, alpha) for alpha in range(1, n + 1)]
    current = apply_j_inv(targets)
    for iteration in range(ctx.deg_max + ctx.eps_max + 2):
        prolong = Prolongation(current)
        corrected = [t - substitute(nl, prolong) for t, nl in zip(targets, nonlinear)]
        updated = apply_j_inv(corrected)
        if updated == current:
            logger.debug(f"Miura inverse converged after {iteration + 1} iterations")
            break
        current = updated
    return MiuraTransform(current)


def miura_push_system(M: MiuraTransform, S: EvolutionarySystem) -> EvolutionarySystem:
    """Rewrite every flow of S in the variables u~ of M"""
    inverse = Prolongation(miura_invert(M).images)
    flows = {}
    for label, H in S.items():
        components: List[Optional[DiffPoly]] = []
        for image in M.images:
            needed = image.variables()
            if any(H.components[alpha - 1] is None for alpha in needed):
                components.append(None)
                continue
            components.append(substitute(apply(H, image), inverse))
        flows[label] = EvolutionaryOp(components)
        logger.debug(f"Miura pushed flow {format_label(label)}")
    return EvolutionarySystem(flows, S.var_name)


class StepProlongation(Prolongation):
    """Prolongation along the operator step_factor * d/dx instead of d/dx"""

    def __init__(self, images: Sequence[DiffPoly], step_factor: DiffPoly):
        super().__init__(images)
        self.step_factor = step_factor

    def derivative(self, alpha: int, k: int) -> DiffPoly:
        key = (alpha, k)
        cached = self._derivatives.get(key)
        if cached is None:
            if k == 0:
                cached = self.images[alpha - 1]
            else:
                cached = self.step_factor * dx(self.derivative(alpha, k - 1))
            self._derivatives[key] = cached
        return cached


class ReciprocalTransform:
    """The isomorphism Phi_f identifying d/dy with (1+f)^-1 d/dx"""

    def __init__(self, f: DiffPoly, target_name: str = 'v'):
        if not f.vanishes_at_origin():
            raise NonzeroConstantTerm(f"Reciprocal transformation needs f(0) = 0, got {f}")
        if any(m.diff_degree != 0 for m in f.terms):
            raise ValueError(f"Reciprocal transformation needs f of differential degree 0, got {f}")
        self.f = f
        self.n_vars = f.n_vars
        self.context = f.context
        self.source_name = f.var_name
        self.target_name = target_name
        self._forward: Optional[StepProlongation] = None
        self._inverse: Optional[StepProlongation] = None

    def _source_variables(self) -> List[DiffPoly]:
        return [DiffPoly.variable(self.n_vars, self.context, a, 0, self.source_name)
                for a in range(1, self.n_vars + 1)]

    def _target_variables(self) -> List[DiffPoly]:
        return [DiffPoly.variable(self.n_vars, self.context, a, 0, self.target_name)
                for a in range(1, self.n_vars + 1)]

    @property
    def forward_prolongation(self) -> StepProlongation:
        if self._forward is None:
            step = invert_unit(self.f + 1)
            self._forward = StepProlongation(self._source_variables(), step)
        return self._forward

    @property
    def inverse_prolongation(self) -> StepProlongation:
        if self._inverse is None:
            targets = self._target_variables()
            F = DiffPoly.zero(self.n_vars, self.context, self.target_name)
            prolong = StepProlongation(targets, F + 1)
            # each pass fixes at least one more order of eps in F
            for iteration in range(self.context.eps_max + 2):
                updated = substitute(self.f, prolong)
                prolong = StepProlongation(targets, updated + 1)
                if updated == F:
                    break
                F = updated
            logger.debug(f"Inverse reciprocal substitution stable after {iteration + 1} passes")
            self._inverse = prolong
        return self._inverse

    def forward(self, p: DiffPoly) -> DiffPoly:
        return substitute(p, self.forward_prolongation).renamed(self.source_name)

    def inverse(self, p: DiffPoly) -> DiffPoly:
        return substitute(p, self.inverse_prolongation).renamed(self.target_name)

    def __repr__(self) -> str:
        return f"ReciprocalTransform(f={self.f})"


def _as_transform(f) -> ReciprocalTransform:
    return f if isinstance(f, ReciprocalTransform) else ReciprocalTransform(f)


def phi_forward(f, p: DiffPoly) -> DiffPoly:
    """Phi_f(p): v^alpha_k -> ((1+f)^-1 d/dx)^k u^alpha"""
    return _as_transform(f).forward(p)


def phi_inverse(f, p: DiffPoly) -> DiffPoly:
    """Phi_f^-1(p): u^alpha_k -> ((1+F) d/dy)^k v^alpha"""
    return _as_transform(f).inverse(p)


def dy(p: DiffPoly) -> DiffPoly:
    """The spatial derivation of the target algebra (same formula as d/dx)"""
    return dx(p)


def reciprocal_push_system(f, S: EvolutionarySystem,
                           witnesses: Optional[Dict] = None) -> EvolutionarySystem:
    """The system obtained from S by the reciprocal transformation given by f"""
    T = _as_transform(f)
    flows = {}
    v_y = [dx(v) for v in T._target_variables()]
    for label, H in S.items():
        if not H.vanishes_at_origin():
            raise NonzeroConstantTerm(f"Flow {format_label(label)} does not vanish at the origin")
        R = conservation_law_witness(T.f, H)
        if R is None:
            raise NotAConservationLaw(label)
        if witnesses is not None:
            witnesses[label] = R
        R_v = T.inverse(R)
        components: List[Optional[DiffPoly]] = []
        for alpha, P in enumerate(H.components):
            if P is None:
                components.append(None)
            else:
                components.append(T.inverse(P) - R_v * v_y[alpha])
        flows[label] = EvolutionaryOp(components)
        logger.debug(f"Reciprocal transform of flow {format_label(label)} done")
    return EvolutionarySystem(flows, T.target_name)


def transport_conservation_law(f, g: DiffPoly, R_g: DiffPoly,
                               H: EvolutionaryOp) -> Tuple[DiffPoly, DiffPoly]:
    """(g/(1+f), R_g - g R/(1+f)) in the new variables, R being the flux of f under H"""
    T = _as_transform(f)
    R = conservation_law_witness(T.f, H)
    if R is None:
        raise NotAConservationLaw('H')
    unit_inv = invert_unit(T.f + 1)
    g_new = g * unit_inv
    flux_new = R_g - g * R * unit_inv
    return T.inverse(g_new), T.inverse(flux_new)


def conservation_law_pullback(f, g_new: DiffPoly, R_new: DiffPoly,
                              H: EvolutionaryOp) -> Tuple[DiffPoly, DiffPoly]:
    """Converse transport: ((1+f) Phi(g~), Phi(R~) + Phi(g~) R) in the original variables"""
    T = _as_transform(f)
    R = conservation_law_witness(T.f, H)
    if R is None:
        raise NotAConservationLaw('H')
    g_old = T.forward(g_new)
    return (T.f + 1) * g_old, T.forward(R_new) + g_old * R


def compose_reciprocal(f, g: DiffPoly) -> ReciprocalTransform:
    """The group law on conservation laws is addition"""
    T = _as_transform(f)
    if not g.vanishes_at_origin():
        raise NonzeroConstantTerm(f"{g} does not vanish at the origin")
    return ReciprocalTransform(T.f + g, T.target_name)


def reciprocal_action_compose(f: DiffPoly, g: DiffPoly,
                              S: EvolutionarySystem) -> Tuple[EvolutionarySystem, EvolutionarySystem]:
    """Act by f then by g/(1+f), and act once by f+g; both results for comparison"""
    first = ReciprocalTransform(f, 'v')
    intermediate = reciprocal_push_system(first, S)
    g_tilde = first.inverse(g * invert_unit(f + 1))
    twice = reciprocal_push_system(ReciprocalTransform(g_tilde, 'w'), intermediate)
    once = reciprocal_push_system(compose_reciprocal(ReciprocalTransform(f, 'w'), g), S)
    return twice, once
