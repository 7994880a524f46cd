"""
Differential Polynomial Ring Tests
Checks truncated arithmetic, total derivatives, inversion and epsilon rescaling
"""

from fractions import Fraction

from hypothesis import given, settings

from testing_support import diff_polys, main_for

from core.calculus import antiderivative, variational_derivative
from core.errors import NonzeroConstantTerm, TruncationError
from core.ring import (
    G1, XI, DiffPoly, TruncationContext, arith, degree_component, dx, invert_unit, partial, power_series, relabel,
    rescale_epsilon, substitute,
)

CTX = TruncationContext(4, 6)


def u(alpha=1, k=0, n_vars=1, ctx=CTX):
    return DiffPoly.variable(n_vars, ctx, alpha, k)


@settings(max_examples=30, deadline=None)
@given(diff_polys(), diff_polys(), diff_polys())
def test_ring_axioms(p, q, r):
    assert (p + q) + r == p + (q + r)
    assert p + q == q + p
    assert p * q == q * p
    assert (p * q) * r == p * (q * r)
    assert p * (q + r) == p * q + p * r
    assert p - p == 0
    assert arith(p, q, 'add') == p + q
    assert arith(p, q, 'mul') == p * q


@settings(max_examples=30, deadline=None)
@given(diff_polys(), diff_polys())
def test_leibniz_rule(p, q):
    assert dx(p * q) == dx(p) * q + p * dx(q)
    assert dx(p + q) == dx(p) + dx(q)


@settings(max_examples=25, deadline=None)
@given(diff_polys(vanishing=True))
def test_invert_unit(q):
    unit = q + 1
    assert unit * invert_unit(unit) == 1
    # a non-unit rational constant term is also fine
    doubled = q + 2
    assert doubled * invert_unit(doubled) == 1


@settings(max_examples=25, deadline=None)
@given(diff_polys())
def test_total_derivatives_are_in_the_kernel(p):
    image = dx(p)
    for alpha in (1, 2):
        assert variational_derivative(image, alpha).is_zero()
    # d/dx kills every jet-free term, eps^k included
    assert antiderivative(image) == p.filter_terms(lambda m: bool(m.jets))


@settings(max_examples=20, deadline=None)
@given(diff_polys(n_vars=1, max_terms=3), diff_polys(n_vars=1, max_terms=2, vanishing=True))
def test_substitute_commutes_with_dx(p, image):
    assert substitute(dx(p), [image]) == dx(substitute(p, [image]))


def test_truncation():
    print("🧪 Testing truncation by degree and epsilon...")
    small = TruncationContext(2, 3)
    v = DiffPoly.variable(1, small, 1)
    eps = DiffPoly.epsilon(1, small)
    assert (v ** 4).is_zero()
    assert not (v ** 3).is_zero()
    assert (eps ** 3).is_zero()
    assert (eps ** 2 * v ** 3).eps_exponents() == [2]
    assert (eps ** 2 * v ** 3).max_u_degree() == 3
    print("✅ u^4 and eps^3 vanish in the (2, 3) context")


def test_partial_and_dx():
    print("🧪 Testing partial derivatives and d/dx...")
    p = u() ** 2 * u(1, 1)
    assert partial(p, 1, 0) == (u() * u(1, 1)).scale(2)
    assert partial(p, 1, 1) == u() ** 2
    assert dx(u(1, 2)) == u(1, 3)
    assert dx(u() ** 3) == (u() ** 2 * u(1, 1)).scale(3)
    print("✅ Partial derivatives and d/dx agree with the chain rule")


def test_degree_components():
    print("🧪 Testing homogeneous components by differential degree...")
    eps = DiffPoly.epsilon(1, CTX)
    p = u() ** 2 + u(1, 1) + eps * u(1, 2) + eps ** 2 * u(1, 1) ** 2
    assert degree_component(p, 0) == u() ** 2 + eps ** 2 * u(1, 1) ** 2
    assert degree_component(p, 1) == u(1, 1) + eps * u(1, 2)
    assert degree_component(p, 2).is_zero()
    total = sum((degree_component(p, d) for d in range(-2, 5)), DiffPoly.zero(1, CTX))
    assert total == p
    print("✅ Components of degree 0 and 1 split p")


def test_invert_unit_examples():
    print("🧪 Testing inverse of 1 + xi u...")
    geometric = invert_unit(u().scale(XI) + 1)
    expected = power_series(1, CTX, 1, [(-XI) ** n for n in range(CTX.deg_max + 1)])
    assert geometric == expected
    try:
        invert_unit(u())
        assert False, "inverting u should fail"
    except NonzeroConstantTerm:
        pass
    try:
        invert_unit(u().scale(XI) + XI)
        assert False, "constant term xi is not invertible over the rationals"
    except NonzeroConstantTerm:
        pass
    print("✅ Geometric series and non-unit rejection")


def test_rescale_epsilon():
    print("🧪 Testing eps^2 -> G1 eps^2...")
    eps = DiffPoly.epsilon(1, CTX)
    p = u() ** 2 + eps ** 2 * u(1, 2) + eps ** 4 * u(1, 4)
    expected = u() ** 2 + (eps ** 2 * u(1, 2)).scale(G1) + (eps ** 4 * u(1, 4)).scale(G1 ** 2)
    assert rescale_epsilon(p, G1) == expected
    try:
        rescale_epsilon(eps * u(), G1)
        assert False, "odd eps powers must be rejected"
    except TruncationError:
        pass
    print("✅ Even powers rescaled, odd powers rejected")


def test_substitute_and_relabel():
    print("🧪 Testing substitution and relabelling...")
    p = u() * u(1, 1)
    image = u() + u() ** 2
    # (u + u^2)(u_x + 2 u u_x)
    expected = u() * u(1, 1) + (u() ** 2 * u(1, 1)).scale(3) + (u() ** 3 * u(1, 1)).scale(2)
    assert substitute(p, [image]) == expected
    coarse = DiffPoly.variable(1, TruncationContext(2, 6), 1)
    try:
        substitute(p, [coarse])
        assert False, "images known only to eps^2 cannot carry a polynomial known to eps^4"
    except TruncationError:
        pass
    moved = relabel(p, 2, {1: 2})
    assert moved == DiffPoly.variable(2, CTX, 2) * DiffPoly.variable(2, CTX, 2, 1)
    assert moved.variables() == {2}
    print("✅ Substitution follows the prolongation, relabel moves variables")


def test_scalar_coefficients():
    print("🧪 Testing rational and parameter coefficients...")
    p = u().scale(Fraction(1, 3)) + u().scale(XI)
    assert p.specialize(xi=0) == u().scale(Fraction(1, 3))
    assert p.specialize(xi=2) == u().scale(Fraction(7, 3))
    print("✅ Parameters specialise to numbers")


if __name__ == "__main__":
    main_for("🧮 Differential Polynomial Ring Tests", [
        ("Ring Axioms", test_ring_axioms),
        ("Leibniz Rule", test_leibniz_rule),
        ("Inverse of Units", test_invert_unit),
        ("Total Derivatives", test_total_derivatives_are_in_the_kernel),
        ("Substitution and d/dx", test_substitute_commutes_with_dx),
        ("Truncation", test_truncation),
        ("Partial Derivatives", test_partial_and_dx),
        ("Degree Components", test_degree_components),
        ("Geometric Series", test_invert_unit_examples),
        ("Epsilon Rescaling", test_rescale_epsilon),
        ("Substitution", test_substitute_and_relabel),
        ("Scalar Coefficients", test_scalar_coefficients),
    ])
