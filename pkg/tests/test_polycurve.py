from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from polyavg.polycurve import (
    CurvePoly,
    Polynomial,
    ROOT_TOL,
    ZeroPolynomial,
    derivative,
    evaluate,
    jacobian_det,
    jacobian_det_array,
    jacobian_reduced_array,
    leading_minors,
    poly,
    real_roots,
    refine_root,
    squarefree_decomposition,
    torsion_det,
)

small_ints = st.integers(-6, 6)
rationals = st.fractions(min_value=-5, max_value=5, max_denominator=7)


def polys(max_degree=6):
    return st.lists(small_ints, min_size=1, max_size=max_degree + 1).map(lambda cs: Polynomial(tuple(cs)))


class TestPolynomial:
    def test_normalisation(self):
        assert Polynomial((1, 2, 0, 0)).coeffs == (1, 2)
        assert Polynomial((0, 0)).is_zero()
        assert Polynomial(()).degree == -1 or Polynomial(()).is_zero()
        assert poly(0, 0, 3).degree == 2

    def test_exact_coefficients(self):
        p = Polynomial(("1/3", 0.5))
        assert p.coeffs == (Fraction(1, 3), Fraction(1, 2))

    def test_division(self):
        a = poly(-1, 0, 1)
        q, r = divmod(a, poly(-1, 1))
        assert q == poly(1, 1) and r.is_zero()


class TestDerivative:
    def test_power_rule(self):
        assert derivative(poly(0, 0, 1)) == poly(0, 2)
        assert derivative(poly(0, 0, 0, 1), 2) == poly(0, 6)

    def test_order_zero_and_overflow(self):
        p = poly(1, 2, 3)
        assert derivative(p, 0) == p
        assert derivative(p, 3).is_zero()

    @given(polys(), polys(), rationals, rationals, st.integers(0, 4))
    def test_linear(self, p, q, a, b, n):
        assert derivative(p * a + q * b, n) == derivative(p, n) * a + derivative(q, n) * b


class TestEvaluate:
    def test_examples(self):
        assert evaluate(Polynomial(()), 3.7) == 0
        assert evaluate(poly(-1, 0, 1), 2) == 3
        assert evaluate(poly(2, 6), Fraction(-1, 3), exact=True) == 0

    def test_arrays(self):
        t = np.linspace(-1, 1, 5)
        np.testing.assert_allclose(evaluate(poly(1, 0, 1), t), 1 + t**2)


class TestTorsion:
    def test_model_constants(self):
        assert torsion_det(CurvePoly.model(2)) == Polynomial((2,))
        assert torsion_det(CurvePoly.model(3)) == Polynomial((12,))

    def test_t_t3(self):
        assert torsion_det(CurvePoly.from_coeffs([[0, 1], [0, 0, 0, 1]])) == poly(0, 6)

    def test_minors(self):
        P = CurvePoly.from_coeffs([[0, 0, 1], [0, 1, 0, 1], [1, 0, 0, 0, 1]])
        D1, D2 = leading_minors(P)
        p1, p2 = P.components[:2]
        assert D1 == derivative(p1)
        assert D2 == derivative(p1) * derivative(p2, 2) - derivative(p2) * derivative(p1, 2)

    @given(
        st.lists(st.lists(small_ints, min_size=1, max_size=5), min_size=3, max_size=3),
        st.lists(st.lists(small_ints, min_size=3, max_size=3), min_size=3, max_size=3),
    )
    def test_linear_equivariance(self, comps, M):
        assume(any(any(c) for c in (cs[1:] for cs in comps)))
        P = CurvePoly.from_coeffs(comps)
        Mf = [[Fraction(v) for v in row] for row in M]
        detM = (
            Mf[0][0] * (Mf[1][1] * Mf[2][2] - Mf[1][2] * Mf[2][1])
            - Mf[0][1] * (Mf[1][0] * Mf[2][2] - Mf[1][2] * Mf[2][0])
            + Mf[0][2] * (Mf[1][0] * Mf[2][1] - Mf[1][1] * Mf[2][0])
        )
        assume(detM != 0)
        assert torsion_det(P.transform(Mf)) == torsion_det(P) * detM


class TestJacobian:
    def test_model_values(self, model2, model3):
        assert abs(jacobian_det(model3, (0, 1, 2))) == 12
        assert abs(jacobian_det(model2, (0, 1))) == 2

    def test_repeated_point(self, model3):
        assert jacobian_det(model3, (Fraction(1, 3), Fraction(1, 3), 2)) == 0

    @given(st.lists(rationals, min_size=3, max_size=3), st.integers(0, 2), st.integers(0, 2))
    def test_antisymmetric(self, pts, i, j):
        P = CurvePoly.from_coeffs([[0, 1, 1], [0, 0, 1, 2], [1, 0, 0, 0, 1]])
        swapped = list(pts)
        swapped[i], swapped[j] = swapped[j], swapped[i]
        sign = 1 if i == j else -1
        assert jacobian_det(P, swapped) == sign * jacobian_det(P, pts)

    def test_reduced_matches_raw(self, model3):
        rng = np.random.default_rng(3)
        P = CurvePoly.from_coeffs([[0, 1, 2], [1, 0, -1, 1], [0, 2, 0, 0, 1]])
        pts = rng.uniform(-1, 1, (50, 3))
        vand = np.prod([pts[:, j] - pts[:, i] for i in range(3) for j in range(i + 1, 3)], axis=0)
        np.testing.assert_allclose(vand * jacobian_reduced_array(P, pts), jacobian_det_array(P, pts), rtol=1e-9, atol=1e-12)

    def test_reduced_model_constant(self, model3):
        # det M is the constant 2 * 3 * ... near the diagonal too
        pts = np.array([[0.1, 0.1 + 1e-9, 0.1 + 2e-9], [-0.5, 0.2, 0.7]])
        np.testing.assert_allclose(np.abs(jacobian_reduced_array(model3, pts)), 6.0, rtol=1e-9)


class TestRoots:
    def test_examples(self):
        r = real_roots(poly(0, 6))
        assert r.values == [0.0] and r.multiplicities == [1]
        r = real_roots(poly(-1, 0, 1))
        assert r.values == pytest.approx([-1.0, 1.0], abs=1e-12) and r.multiplicities == [1, 1]
        r = real_roots(poly(1, -2, 1))
        assert r.values == pytest.approx([1.0], abs=1e-12) and r.multiplicities == [2]

    def test_zero_polynomial(self):
        with pytest.raises(ZeroPolynomial):
            real_roots(Polynomial(()))

    def test_squarefree(self):
        p = poly(-1, 1) * poly(-1, 1) * poly(2, 1)
        parts = dict((m, q) for q, m in squarefree_decomposition(p))
        assert parts[2] == poly(-1, 1) and parts[1] == poly(2, 1)

    def test_refine_root_correctly_rounded(self):
        p = poly(-2, 0, 1)
        (neg, pos) = real_roots(p)
        assert float(refine_root(p, pos)) == 2**0.5

    @given(st.lists(small_ints, min_size=2, max_size=9))
    def test_roots_and_sign_pattern(self, cs):
        p = Polynomial(tuple(cs))
        if p.degree < 1:
            return
        roots = real_roots(p)
        assert sum(roots.multiplicities) <= p.degree
        vals = roots.values
        assert vals == sorted(set(vals))
        for root in roots:
            assert root.lo <= root.value <= root.hi
            assert root.hi - root.lo <= ROOT_TOL
            assert evaluate(p, root.lo, exact=True) * evaluate(p, root.hi, exact=True) <= 0 or root.multiplicity % 2 == 0
        # single sign strictly between consecutive roots
        edges = [min(vals, default=0) - 2] + vals + [max(vals, default=0) + 2]
        for a, b in zip(edges, edges[1:]):
            if b - a < 1e-9:
                continue
            ts = np.linspace(a, b, 9)[1:-1]
            signs = {np.sign(float(evaluate(p, Fraction(t), exact=True))) for t in ts}
            assert len(signs - {0.0}) <= 1
