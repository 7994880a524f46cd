"""
Test Support
Summary runner shared by the test scripts and hypothesis strategies for small differential polynomials
"""

import sys
import time
import traceback
from fractions import Fraction
from pathlib import Path
from typing import Callable, List, Tuple

from hypothesis import strategies as st

project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

from core.ring import G1, XI, DiffPoly, TruncationContext

SMALL = TruncationContext(3, 4)


@st.composite
def diff_polys(draw, n_vars: int = 2, context: TruncationContext = SMALL, var_name: str = 'u',
               max_order: int = 2, max_terms: int = 4, with_params: bool = True,
               vanishing: bool = False) -> DiffPoly:
    """A sum of a few monomials eps^e * u^a1_k1 * ... with small rational or xi/G1 coefficients"""
    p = DiffPoly.zero(n_vars, context, var_name)
    for _ in range(draw(st.integers(0, max_terms))):
        coeff = draw(st.fractions(min_value=-3, max_value=3, max_denominator=4))
        if coeff == 0:
            continue
        term = DiffPoly.constant(n_vars, context, Fraction(coeff), var_name)
        if with_params:
            term = term.scale(draw(st.sampled_from([1, XI, G1, XI * G1])))
        eps = draw(st.integers(0, context.eps_max))
        if eps:
            term = term * DiffPoly.epsilon(n_vars, context, eps, var_name)
        factors = draw(st.lists(st.tuples(st.integers(1, n_vars), st.integers(0, max_order)),
                                min_size=1 if vanishing else 0, max_size=3))
        for alpha, k in factors:
            term = term * DiffPoly.variable(n_vars, context, alpha, k, var_name)
        p = p + term
    return p


def run_tests(title: str, tests: List[Tuple[str, Callable[[], None]]]) -> bool:
    """Run (name, func) pairs, print the summary table, return True when all passed"""
    print(title)
    print("=" * 50)

    results = {}

    for test_name, test_func in tests:
        try:
            test_func()
            results[test_name] = True
        except AssertionError as e:
            print(f"❌ {test_name} failed: {e}")
            traceback.print_exc()
            results[test_name] = False
        except Exception as e:
            print(f"❌ {test_name} test crashed: {e}")
            traceback.print_exc()
            results[test_name] = False

    # Summary
    print("\n" + "=" * 50)
    print("📊 Test Results Summary")
    print("=" * 50)

    passed = sum(1 for result in results.values() if result)
    total = len(results)

    for test_name, result in results.items():
        status = "✅ PASS" if result else "❌ FAIL"
        print(f"{status:<8} {test_name}")

    print(f"\nOverall: {passed}/{total} tests passed ({passed/total*100:.1f}%)")

    if passed == total:
        print("\n🎉 All tests passed!")
    else:
        failed_tests = [name for name, result in results.items() if not result]
        print(f"\n⚠️  Some tests failed: {', '.join(failed_tests)}")

    return passed == total


def main_for(title: str, tests: List[Tuple[str, Callable[[], None]]]) -> None:
    try:
        start = time.time()
        success = run_tests(title, tests)
        print(f"Finished in {time.time() - start:.1f}s")
        sys.exit(0 if success else 1)
    except KeyboardInterrupt:
        print("\n\nTest interrupted by user")
        sys.exit(1)
