import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from polyavg.combinat import (
    DeltaUnderflow,
    EmptyPairing,
    ExcisionSpec,
    FloorViolation,
    UnitInterval,
    adversarial_search,
    case_diagnostics,
    discretize_operator,
    duality_closure,
    excise_with_delta,
    exponent_pair,
    fixed_lhs,
    iterated_bound_check,
    iterated_lhs,
    mu_exponent,
    random_mu_union,
    random_suite,
    refine,
    structured_params,
    synthetic_sets,
    weighted_inner,
)
from polyavg.measureops import Box, IntervalUnion, box_pairing, mu_measure
from polyavg.polycurve import CurvePoly

U = IntervalUnion.of


class TestRefine:
    def test_rank_one(self):
        k = [[3] * 4 for _ in range(5)]
        tr = refine(k, range(4), range(5), depth=4)
        assert tr.valid
        for lv in tr.levels:
            assert lv.E == frozenset(range(4)) and lv.F == frozenset(range(5))
            assert lv.pairing == tr.K

    def test_empty_pairing(self):
        with pytest.raises(EmptyPairing):
            refine([[0, 1], [0, 1]], [0], [0, 1])

    def test_negative_kernel(self):
        with pytest.raises(ValueError):
            refine([[-1, 1], [0, 1]], [0, 1], [0, 1])

    def test_exact_relation(self):
        k = [[Fraction(1, 3), 0, 2], [1, Fraction(5, 7), 0]]
        tr = refine(k, [0, 1, 2], [0, 1], mu=[Fraction(1, 2), 1], nu=[1, Fraction(2, 3), 1])
        assert isinstance(tr.alpha, Fraction)
        assert tr.alpha * tr.measure_F == tr.beta * tr.measure_E == tr.K
        assert tr.valid

    @settings(max_examples=60)
    @given(st.integers(1, 20), st.integers(1, 20), st.integers(0, 2**32 - 1), st.floats(0.1, 0.9))
    def test_random_kernels(self, nx, ny, seed, density):
        rng = np.random.default_rng(seed)
        k = rng.integers(0, 5, (nx, ny)) * (rng.uniform(size=(nx, ny)) < density)
        E = [j for j in range(ny) if rng.uniform() < 0.6] or [0]
        F = [i for i in range(nx) if rng.uniform() < 0.6] or [0]
        mu = [Fraction(int(v), 7) for v in rng.integers(1, 8, nx)]
        nu = [Fraction(int(v), 5) for v in rng.integers(1, 6, ny)]
        if not any(k[i, j] for i in F for j in E):
            return
        tr = refine(k.tolist(), E, F, depth=5, mu=mu, nu=nu)
        assert tr.check() == dict.fromkeys(tr.check(), True)

    def test_discretized_operator(self, model2):
        cells_F = Box(((-0.5, 0.5), (0.0, 0.6))).subdivide(3)
        cells_E = Box(((-0.4, 0.4), (-0.4, 0.4))).subdivide(3)
        kern, mu, nu = discretize_operator(model2, (-1, 1), cells_F, cells_E)
        total = sum(kern[i, j] * mu[i] * nu[j] for i in range(len(mu)) for j in range(len(nu)))
        whole = box_pairing(model2, (-1, 1), Box(((-0.4, 0.4), (-0.4, 0.4))), Box(((-0.5, 0.5), (0.0, 0.6))))
        assert float(total) == pytest.approx(whole, rel=1e-7)
        E = [0, 2, 4, 5, 8]
        F = [1, 3, 4, 6, 7]
        tr = refine(kern, E, F, depth=4, mu=mu, nu=nu)
        assert tr.valid


class TestStructured:
    def test_model3(self, model3):
        ci = UnitInterval(lo=-1, hi=1, b=4, k=0)
        E = [Box.centered((0, 0, 0), (0.5,) * 3)]
        sets = structured_params(model3, ci, E, E, n_s=8, n_t=4)
        for name in ("S", "T", "U"):
            fl = sets.floors[name]
            assert fl["observed"] >= fl["floor"] * (1 - 1e-6)
        assert iterated_bound_check(ci, sets, sets.floors["alpha"], sets.floors["beta"], 3)["ratio"] > 0

    def test_model2(self, model2):
        ci = UnitInterval(lo=-1, hi=1, b=4, k=0)
        E = [Box.centered((0, 0), (0.5, 0.5))]
        sets = structured_params(model2, ci, E, E, n_s=16)
        assert sets.floors["S"]["observed"] >= sets.floors["S"]["floor"] * (1 - 1e-6)
        assert sets.floors["T"]["observed"] >= sets.floors["T"]["floor"] * (1 - 1e-6)
        assert len(sets.T) == len(sets.s_samples) == 16

    def test_empty_pullback(self, model2):
        ci = UnitInterval(lo=-1, hi=1, b=4, k=0)
        with pytest.raises(FloorViolation):
            structured_params(model2, ci, [Box.centered((0, 0), (0.1, 0.1))], [Box.centered((9, 9), (0.1, 0.1))])


class TestExcision:
    def test_b_alpha_k0(self):
        spec = ExcisionSpec(0.1, "B_alpha", 0.3, 0.0, 0, 3)
        B = spec.realize()
        assert B.length == pytest.approx(2 * 0.1 * 0.3)
        ci = UnitInterval(lo=0, hi=1, b=0, k=0)
        # clipped to I only the half on the far side of b survives
        assert mu_measure(ci, spec.realize(ci), 0.0) == pytest.approx(0.1 * 0.3)

    def test_radius_formulas(self):
        s = ExcisionSpec(0.5, "B_alpha", 0.2, 0.0, 3, 3)
        assert s.radius == pytest.approx(0.5 * 0.2 ** (6 / 9))
        s = ExcisionSpec(0.5, "B_t_alpha", 0.2, 0.0, 3, 3, anchor=0.4)
        assert s.radius == pytest.approx(0.5 * 0.2 * 0.4 ** (-0.5))
        s = ExcisionSpec(0.5, "B_s_beta", 0.2, 0.0, 3, 2, anchor=0.4)
        assert s.radius == pytest.approx(0.5 * 0.2 * 0.4 ** (-1.0))
        with pytest.raises(ValueError):
            ExcisionSpec(0.5, "B_s_beta", 0.2, 0.0, 3, 2)

    def test_disjoint(self):
        ci = UnitInterval(0.0, 1.0, 0.0, 0)
        W = U((0.6, 0.9))
        kept, delta, _ = excise_with_delta(W, ExcisionSpec(0.1, "B_alpha", 0.5, 0.0, 0, 3), ci, c0=0.5)
        assert kept == W and delta == 0.1

    def test_shrinks_delta(self):
        ci = UnitInterval(0.0, 1.0, 0.0, 1)
        W = U((0.0, 0.5))
        spec = ExcisionSpec(1.0, "B_alpha", 0.8, 0.0, 1, 3)
        kept, delta, c0 = excise_with_delta(W, spec, ci, c0=0.4)
        e = mu_exponent(1, 3)
        assert delta < 1.0
        assert mu_measure(ci, kept, e) >= 0.5 * c0 * 0.8

    def test_underflow(self):
        ci = UnitInterval(0.0, 1.0, 0.0, 0)
        with pytest.raises(DeltaUnderflow):
            excise_with_delta(U((0.0, 0.1)), ExcisionSpec(1.0, "B_alpha", 0.5, 0.0, 0, 3), ci, c0=1.0)


class TestIterated:
    @given(st.floats(0, 2), st.floats(0.0, 0.5), st.floats(0.1, 1.0), st.lists(st.floats(0, 1.5), max_size=2))
    def test_weighted_inner_vs_quad(self, a, lo, w, anchors):
        W = U((lo, lo + w))
        ref = integrate.quad(lambda u: u**a * np.prod([abs(u - x) for x in anchors]), lo, lo + w,
                             points=[x for x in anchors if lo < x < lo + w] or None, epsabs=1e-13)[0]
        assert weighted_inner(W, 0.0, a, anchors) == pytest.approx(ref, rel=1e-9, abs=1e-13)

    def test_far_narrow_piece(self):
        W = U((0.75, 0.75 + 1e-6))
        approx_ = weighted_inner(W, 0.0, 1.0, [0.2, 0.3])
        assert approx_ == pytest.approx(0.75 * 0.55 * 0.45 * 1e-6, rel=1e-5)

    def test_model_constants(self):
        ci = UnitInterval(k=0)
        unit = U((0.0, 1.0))
        # E|s-t| = 1/3; E|s-t||t-u||u-s| = 2 E[a^2 b] for Dirichlet(1,1,1,1) = 1/30
        assert fixed_lhs(ci, unit, unit, None, 2) == pytest.approx(1 / 3, rel=1e-8)
        assert fixed_lhs(ci, unit, unit, unit, 3) == pytest.approx(1 / 30, rel=1e-6)

    def test_weighted_d2_vs_dblquad(self):
        ci = UnitInterval(k=3)
        S, T = U((0.1, 0.4), (0.6, 0.8)), U((0.2, 0.9))
        ref = sum(
            integrate.dblquad(lambda t, s: s**1.5 * t**1.5 * abs(s - t), a, c, 0.2, 0.9, epsabs=1e-12)[0]
            for a, c in S
        )
        assert fixed_lhs(ci, S, T, None, 2) == pytest.approx(ref, rel=1e-7)

    def test_sampled_matches_fixed(self):
        ci = UnitInterval(k=2)
        rng = np.random.default_rng(0)
        e = mu_exponent(2, 2)
        sets = synthetic_sets(ci, 0.3, 0.4, 2, rng, n_s=256)
        T = sets.T[0]
        sets.T = [T] * len(sets.s_samples)
        assert iterated_lhs(sets) == pytest.approx(fixed_lhs(ci, sets.S, T, None, 2), rel=0.02)
        assert mu_measure(ci, sets.S, e) == pytest.approx(0.4 / 4)

    def test_verify_and_adversarial_modes(self):
        ci = UnitInterval(k=1)
        rng = np.random.default_rng(1)
        sets = synthetic_sets(ci, 0.2, 0.5, 2, rng, n_s=16)
        res = iterated_bound_check(ci, sets, 0.2, 0.5, 2, "verify", c0=1e-3)
        assert res["passed"] and res["rhs"] == pytest.approx(0.2**2 * 0.5)
        adv = iterated_bound_check(ci, None, 0.2, 0.5, 2, "adversarial", proposals=50)
        assert adv["ratio"] > 0
        with pytest.raises(ValueError):
            iterated_bound_check(ci, sets, 0.2, 0.5, 2, "other")

    def test_adversarial_deterministic(self):
        ci = UnitInterval(k=1)
        a = adversarial_search(ci, 1.4, 0.014, 2, seed=3, proposals=60)
        b = adversarial_search(ci, 1.4, 0.014, 2, seed=3, proposals=60)
        assert a["ratio"] == b["ratio"]

    @given(st.integers(0, 3), st.floats(0.01, 0.9), st.integers(0, 1000))
    def test_random_mu_union_exact(self, k, frac, seed):
        ci = UnitInterval(k=k)
        e = mu_exponent(k, 3)
        total = 1 / (e + 1)
        W = random_mu_union(ci, e, frac * total, np.random.default_rng(seed))
        assert mu_measure(ci, W, e) == pytest.approx(frac * total, rel=1e-9)


class TestSuites:
    def test_random_suite_rows(self):
        rows = random_suite(1, 2, n_configs=5, seed=2, regime="alpha<=beta", n_s=8)
        assert len(rows) == 5
        assert all(r["alpha"] <= r["beta"] and r["ratio"] > 0 for r in rows)

    def test_duality_closure(self):
        ab = [{"alpha": 0.1, "beta": 0.2, "lhs": 0.1**2 * 0.2 * 0.05}]
        ba = [{"alpha": 0.1, "beta": 0.3, "lhs": 0.1**2 * 0.3 * 0.05}]
        out = duality_closure(ab, ba, 0.01)
        assert all(r["one_sided"] and r["implied"] for r in out)
        # the dual row is reported with alpha and beta swapped back
        assert out[1]["alpha"] == 0.3 and out[1]["E"] == pytest.approx(0.3 * out[1]["F"] / 0.1)


class TestDiagnostics:
    def test_exponent_pairs(self):
        assert exponent_pair(0, 2) == (2, 1)
        assert exponent_pair(1, 2) == (Fraction(15, 8), Fraction(9, 8))
        for k in range(60):
            A, B = exponent_pair(k, 2)
            assert A + B == 3
            A, B = exponent_pair(k, 3)
            assert A + B == 4 and 1 <= A < 2 < B <= 3

    @pytest.mark.parametrize("d", [2, 3])
    def test_partition(self, d):
        ci = UnitInterval(k=2)
        sets = synthetic_sets(ci, 0.3, 0.5, d, np.random.default_rng(4), n_s=8, n_t=4)
        diag = case_diagnostics(ci, sets, 0.3, 0.5, d)
        for row in diag["per_s"]:
            assert sum(row["mu_pieces"]) == pytest.approx(row["mu_T"], rel=1e-12, abs=1e-15)
            assert 1 <= row["choice"] <= 3
        assert np.sum(diag["contributions"]) == pytest.approx(iterated_lhs(sets), rel=1e-9)
