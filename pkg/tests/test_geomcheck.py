import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from polyavg.decomp import decompose
from polyavg.geomcheck import (
    DegeneratePoint,
    PreconditionViolation,
    d2_jacobian_identity_check,
    geom_constant_estimate,
    geom_ratio,
    grid_minimum,
    injectivity_probe,
    phi_map,
)
from polyavg.polycurve import CurvePoly

t_t3 = CurvePoly.from_coeffs([[0, 1], [0, 0, 0, 1]])


class TestRatio:
    def test_models(self, model2, model3):
        assert geom_ratio(model2, (0.2, 0.7)) == pytest.approx(1.0, abs=1e-14)
        assert geom_ratio(model3, (-0.3, 0.1, 0.8)) == pytest.approx(0.5, abs=1e-14)

    def test_t_t3(self):
        assert geom_ratio(t_t3, (1, 2)) == pytest.approx(9 / math.sqrt(72), rel=1e-13)

    def test_degenerate(self, model2):
        with pytest.raises(DegeneratePoint):
            geom_ratio(model2, (0.3, 0.3))
        with pytest.raises(DegeneratePoint):
            geom_ratio(t_t3, (0.0, 1.0))
        with pytest.raises(ValueError):
            geom_ratio(model2, (0.1, 0.2, 0.3))

    @settings(max_examples=40)
    @given(st.lists(st.integers(-3, 3), min_size=9, max_size=9), st.lists(st.floats(-1, 1), min_size=3, max_size=3, unique=True))
    def test_affine_invariance(self, m, pts):
        M = [m[0:3], m[3:6], m[6:9]]
        assume(abs(np.linalg.det(np.array(M, dtype=float))) > 0.5)
        assume(min(abs(a - b) for i, a in enumerate(pts) for b in pts[i + 1:]) > 1e-3)
        P = CurvePoly.from_coeffs([[0, 1, 1], [0, 0, 1, 0, 1], [0, 0, 0, 1, 2]])
        assume(all(abs(float(P.torsion(Fraction(t)))) > 1e-3 for t in pts))
        assert geom_ratio(P.transform(M), pts) == pytest.approx(geom_ratio(P, pts), rel=1e-9)


class TestEstimate:
    def test_model_constants(self, model2, model3):
        for P, c in ((model2, 1.0), (model3, 0.5)):
            rep = geom_constant_estimate(P, (-1, 1), budget=5000)
            assert abs(rep.C_hat - c) <= 1e-9 and rep.passed

    def test_matches_grid(self):
        P = CurvePoly.from_coeffs([[0, 1, 1], [0, 0, 1, 1]])
        dec = decompose(P, (-1, 1))
        ci = dec.intervals[-1]
        est = geom_constant_estimate(P, ci, budget=4000).C_hat
        assert est <= grid_minimum(P, ci, 300) * (1 + 1e-9)
        assert est > 0

    def test_report_json(self, model2):
        row = geom_constant_estimate(model2, (0, 1), budget=200).to_json()
        assert set(row) >= {"interval_id", "C_hat", "argmin", "passed"}


class TestInjectivity:
    def test_models(self, model2, model3):
        assert injectivity_probe(model2, (0, 1), budget=4000).passed
        assert injectivity_probe(model3, (0, 1), budget=4000).passed

    def test_uncertified_interval(self):
        with pytest.raises(PreconditionViolation):
            injectivity_probe(t_t3, (-1, 1), budget=100)

    def test_phi_sign_pattern(self, model2):
        out = phi_map(model2, np.array([[0.0, 1.0]]))
        # d=2: P(t1) - P(t2)
        np.testing.assert_allclose(out, [[-1.0, -1.0]])


class TestIdentity:
    def test_examples(self, model2):
        assert d2_jacobian_identity_check(model2, (-1, 1), 0.0, 1.0) <= 1e-9
        assert d2_jacobian_identity_check(model2, (-1, 1), 0.4, 0.4) == 0
        assert d2_jacobian_identity_check(t_t3, (0, 2), 1.0, 2.0) <= 1e-8

    def test_precondition(self):
        P = CurvePoly.from_coeffs([[0, 0, 1], [0, 0, 0, 1]])
        with pytest.raises(PreconditionViolation):
            d2_jacobian_identity_check(P, (-1, 1), -0.5, 0.5)
        with pytest.raises(ValueError):
            d2_jacobian_identity_check(t_t3, (0, 1), 0.5, 2.0)
