import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polyavg.decomp import (
    CenteredInterval,
    Decomposition,
    certification_error,
    decompose,
    default_window,
    monomialize,
    stage1_split,
)
from polyavg.polycurve import CurvePoly, DegenerateCurve, evaluate


def curve(*comps):
    return CurvePoly.from_coeffs(comps)


class TestStage1:
    def test_model_no_cuts(self, model2):
        s1 = stage1_split(model2, (-1, 1))
        assert s1.cuts == () or list(s1.cuts) == []
        assert s1.intervals == [(-1, 1)] or list(map(tuple, s1.intervals)) == [(-1.0, 1.0)]

    def test_t_t3(self):
        s1 = stage1_split(curve([0, 1], [0, 0, 0, 1]), (-1, 1))
        assert list(s1.cuts) == [0.0]
        assert len(s1.intervals) == 2

    def test_t_t2_t3(self):
        s1 = stage1_split(curve([0, 1], [0, 0, 1, 1]), (-1, 1))
        assert list(s1.cuts) == [-1 / 3]

    def test_degenerate(self):
        with pytest.raises(DegenerateCurve):
            stage1_split(curve([0, 1], [0, 1]), (-1, 1))


class TestMonomialize:
    def test_model(self, model2):
        (ci,) = monomialize(model2, (-1.0, 1.0), 4.0)
        assert ci.k == 0 and ci.A == pytest.approx(2) and ci.kappa == pytest.approx(1)

    def test_t_t3_right(self):
        (ci,) = monomialize(curve([0, 1], [0, 0, 0, 1]), (0.0, 1.0), 4.0)
        assert (ci.b, ci.k) == (0.0, 1)
        assert ci.A == pytest.approx(6, rel=1e-12)
        assert ci.kappa == pytest.approx(1, abs=1e-9)

    def test_t_t3_t4_half_line(self):
        # L = 6t(1 + 2t): order 1 near 0 and order 2 far out
        P = curve([0, 1], [0, 0, 0, 1, 1])
        cis = monomialize(P, (0.0, 100.0), 4.0)
        assert cis[0].k == 1 and cis[0].b == 0
        assert cis[-1].k == 2
        assert len(cis) >= 2
        for ci in cis:
            assert certification_error(P, ci) <= math.log(4.0) + 1e-9


class TestDecompose:
    def test_model3(self, model3):
        dec = decompose(model3, (-1, 1))
        (ci,) = dec.intervals
        assert ci.k == 0 and ci.A == pytest.approx(12)

    def test_t_t3(self):
        dec = decompose(curve([0, 1], [0, 0, 0, 1]), (-1, 1))
        assert len(dec.intervals) == 2
        for ci in dec.intervals:
            assert (ci.b, ci.k) == (0.0, 1) and ci.A == pytest.approx(6)

    def test_degenerate(self):
        with pytest.raises(DegenerateCurve):
            decompose(curve([0, 1], [0, 1]))

    def test_b_outside(self):
        with pytest.raises(ValueError):
            CenteredInterval(0.0, 1.0, 0.5, 1, 1.0, 1.0)

    def test_json_round_trip(self):
        dec = decompose(curve([0, 1, 1], [0, 0, 1, 0, 1]))
        text = dec.dumps()
        again = Decomposition.loads(text)
        assert again.dumps() == text
        assert again.intervals == dec.intervals

    def test_default_window(self):
        lo, hi = default_window(curve([0, 1], [0, 0, 1, 1]))
        assert lo == -hi and hi == pytest.approx(1 + 2 / 3)


random_curves = st.lists(st.lists(st.integers(-4, 4), min_size=2, max_size=6), min_size=2, max_size=2).filter(
    lambda cs: any(any(c[1:]) for c in cs)
).map(CurvePoly.from_coeffs)


@settings(max_examples=25)
@given(random_curves, st.integers(0, 2**16))
def test_decomposition_properties(P, seed):
    if P.torsion.is_zero():
        return
    window = default_window(P)
    dec = decompose(P, window, geom_budget=100)
    n = max(P.degree, 1)
    assert len(dec.intervals) <= 64 * n
    # interiors disjoint, closures cover the window
    assert dec.intervals[0].lo == pytest.approx(window[0]) and dec.intervals[-1].hi == pytest.approx(window[1])
    for a, b in zip(dec.intervals, dec.intervals[1:]):
        assert a.hi <= b.lo + 1e-15 and b.lo - a.hi <= 1e-12
    rng = np.random.default_rng(seed)
    for ci in dec.intervals:
        assert not ci.lo < ci.b < ci.hi
        assert certification_error(P, ci) <= math.log(dec.kappa_target) + 1e-9
        ts = rng.uniform(ci.lo, ci.hi, 128)
        for q in (P.torsion, *P.minors):
            vals = np.sign(evaluate(q, ts))
            assert len(set(vals) - {0.0}) <= 1


@settings(max_examples=15)
@given(random_curves)
def test_refinement_consistency(P):
    if P.torsion.is_zero():
        return
    window = default_window(P)
    loose = decompose(P, window, kappa_target=4.0, merge=False, geom_budget=50)
    tight = decompose(P, window, kappa_target=2.0, merge=False, geom_budget=50)
    for ci in tight.intervals:
        hosts = [h for h in loose.intervals if h.lo - 1e-12 <= ci.lo and ci.hi <= h.hi + 1e-12]
        assert len(hosts) == 1
