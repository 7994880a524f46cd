"""
Evolutionary Calculus Tests
Variational derivatives, conservation laws, commutators and commuting flow reconstruction
"""

from fractions import Fraction
from math import factorial

from hypothesis import given, settings

from testing_support import diff_polys, main_for

from core.calculus import (
    EvolutionaryOp, EvolutionarySystem, antiderivative, apply, commutator, conservation_law_witness,
    extend_commuting_flow, is_total_derivative, pairwise_commute, variational_derivative,
)
from core.errors import NonzeroConstantTerm, NotATotalDerivative
from core.lax import kdv_flow
from core.ring import DiffPoly, TruncationContext, dx, power_series

CTX = TruncationContext(4, 6)


def u(k=0, ctx=CTX):
    return DiffPoly.variable(1, ctx, 1, k)


def eps(power=1, ctx=CTX):
    return DiffPoly.epsilon(1, ctx, power)


def kdv_op(d, ctx=CTX):
    return EvolutionaryOp.single(dx(kdv_flow(d, ctx)))


def test_variational_derivative():
    print("🧪 Testing the Euler operator...")
    assert variational_derivative((u(1) ** 2).scale(Fraction(1, 2)), 1) == -u(2)
    assert variational_derivative(u() ** 3, 1) == (u() ** 2).scale(3)
    assert variational_derivative(u() * u(2), 1) == u(2).scale(2)
    assert is_total_derivative(u() * u(1))
    assert not is_total_derivative(u(1) ** 2)
    print("✅ delta/delta u matches hand computation")


def test_antiderivative():
    print("🧪 Testing antiderivatives...")
    assert antiderivative(u() ** 2 * u(1)) == (u() ** 3).scale(Fraction(1, 3))
    assert antiderivative(u(1) * u(2) + u() * u(3)) == u() * u(2)
    try:
        antiderivative(u(1) ** 2)
        assert False, "u_x^2 is not a total derivative"
    except NotATotalDerivative:
        pass
    try:
        antiderivative(u(1) + 1)
        assert False, "constants are not total derivatives"
    except NonzeroConstantTerm:
        pass
    print("✅ Primitives found, non-derivatives rejected")


def test_conservation_laws_of_kdv():
    print("🧪 Testing conservation laws of the KdV flow...")
    H = kdv_op(1)
    assert conservation_law_witness(u(), H) == kdv_flow(1, CTX)
    R = conservation_law_witness((u() ** 2).scale(Fraction(1, 2)), H)
    assert R is not None
    assert dx(R) == apply(H, (u() ** 2).scale(Fraction(1, 2)))
    # the third density needs its eps^2 correction
    third = (u() ** 3).scale(Fraction(1, 6)) - (eps(2) * u(1) ** 2).scale(Fraction(1, 24))
    assert conservation_law_witness(third, H) is not None
    assert conservation_law_witness(u() ** 3, H) is None
    assert conservation_law_witness(u(1) ** 2, H) is None
    print("✅ u, u^2/2 and the corrected u^3/6 are conserved")


@settings(max_examples=10, deadline=None)
@given(diff_polys(n_vars=1, context=TruncationContext(2, 4), vanishing=True, max_terms=2, with_params=False),
       diff_polys(n_vars=1, context=TruncationContext(2, 4), vanishing=True, max_terms=2, with_params=False),
       diff_polys(n_vars=1, context=TruncationContext(2, 4), vanishing=True, max_terms=2, with_params=False))
def test_jacobi_identity(p, q, r):
    A, B, C = (EvolutionaryOp.single(x) for x in (p, q, r))
    total = (commutator(A, commutator(B, C)).component(1)
             + commutator(B, commutator(C, A)).component(1)
             + commutator(C, commutator(A, B)).component(1))
    assert total.is_zero()
    assert commutator(A, B).component(1) == -commutator(B, A).component(1)


def test_unknown_components():
    print("🧪 Testing partially known flows...")
    ctx = TruncationContext(2, 4)
    u1 = DiffPoly.variable(2, ctx, 1)
    u2 = DiffPoly.variable(2, ctx, 2)
    known = EvolutionaryOp([dx(u1), dx(u2)])
    partial_flow = EvolutionaryOp([None, dx(u2 ** 2)])
    comm = commutator(known, partial_flow)
    assert comm.components[0] is None
    assert comm.components[1] is not None
    assert not partial_flow.is_complete()
    assert apply(partial_flow, u2) == dx(u2 ** 2)
    try:
        apply(partial_flow, u1)
        assert False, "the unknown component cannot be applied"
    except ValueError:
        pass
    system = EvolutionarySystem({(1, 0): known, (2, 0): partial_flow})
    assert pairwise_commute(system) == {}
    print("✅ Unknown components propagate as None")


def test_kdv_flows_commute():
    print("🧪 Testing commutativity of the KdV flows for d <= 3...")
    system = EvolutionarySystem({(1, d): kdv_op(d) for d in range(4)})
    failures = pairwise_commute(system)
    assert failures == {}, f"non-commuting pairs: {list(failures)}"
    print("✅ All KdV flows commute")


def test_kdv_flows_commute_at_full_depth():
    print("🧪 Testing commutativity of the KdV flows for d <= 4 at eps^8, degree 10...")
    deep = TruncationContext(8, 10)
    system = EvolutionarySystem({(1, d): kdv_op(d, deep) for d in range(5)})
    failures = pairwise_commute(system)
    assert failures == {}, f"non-commuting pairs: {list(failures)}"
    print("✅ Every commutator vanishes exactly")


def test_extend_commuting_flow_matches_lax():
    print("🧪 Testing reconstruction of KdV flows from their leading terms...")
    seed = dx(kdv_flow(1, CTX))
    for d in (2, 3):
        f = power_series(1, CTX, 1, [0] * d + [Fraction(1, factorial(d))])
        Q = extend_commuting_flow(seed, f)
        assert Q == dx(kdv_flow(d, CTX)), f"d = {d}: {Q - dx(kdv_flow(d, CTX))}"
        print(f"✅ d = {d} agrees with the Lax computation")


def test_extend_commuting_flow_rejects_bad_input():
    print("🧪 Testing input checks of the reconstruction...")
    try:
        extend_commuting_flow(u(3), u())
        assert False, "leading term must be u u_x"
    except ValueError:
        pass
    try:
        extend_commuting_flow(dx(kdv_flow(1, CTX)), u(1))
        assert False, "f must be a series in u"
    except ValueError:
        pass
    print("✅ Malformed seeds rejected")


if __name__ == "__main__":
    main_for("🧮 Evolutionary Calculus Tests", [
        ("Variational Derivative", test_variational_derivative),
        ("Antiderivative", test_antiderivative),
        ("Conservation Laws", test_conservation_laws_of_kdv),
        ("Jacobi Identity", test_jacobi_identity),
        ("Unknown Components", test_unknown_components),
        ("KdV Commutativity", test_kdv_flows_commute),
        ("KdV Commutativity at Depth", test_kdv_flows_commute_at_full_depth),
        ("Commuting Flow Reconstruction", test_extend_commuting_flow_matches_lax),
        ("Reconstruction Input Checks", test_extend_commuting_flow_rejects_bad_input),
    ])
