"""Certified decomposition of a working window into centred-monomial intervals.

Stage 1 cuts the window at the real roots of the torsion L_P and of the
leading principal minors D_j of the derivative matrix, so each open piece
has all of them single-signed.  Stage 2 splits each piece, halving in the
distance-to-centre coordinate, until |L_P(t)| is comparable to
A |t - b|^k within a target factor on a dense sample net.

This is a surrogate built around its output contract; it does not follow
any particular published construction step by step.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction
from typing import Sequence

import numpy as np

from .polycurve import (
    CurvePoly,
    DegenerateCurve,
    Polynomial,
    evaluate,
    real_roots,
    refine_root,
    taylor_shift,
)

KAPPA_DEFAULT = 4.0
NET_SIZE = 512
C_FLOOR = 1e-2
MERGE_BUDGET = 600


class SplitBudgetExceeded(RuntimeError):
    """Stage 2 produced too many subintervals without certifying."""


@dataclass(frozen=True)
class CenteredInterval:
    """Open interval (lo, hi) with |L_P(t)| ~ A |t - b|^k, b outside it."""

    lo: float
    hi: float
    b: float
    k: int
    A: float
    kappa: float
    C_estimate: float | None = None
    piece: int = 0

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"empty interval ({self.lo}, {self.hi})")
        if self.lo < self.b < self.hi:
            raise ValueError(f"centre {self.b} inside ({self.lo}, {self.hi})")

    @property
    def length(self) -> float:
        return self.hi - self.lo

    def contains(self, t) -> bool:
        return self.lo < t < self.hi

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, row: dict) -> "CenteredInterval":
        return cls(**row)


@dataclass(frozen=True)
class Stage1:
    cuts: tuple[float, ...]
    intervals: tuple[tuple[float, float], ...]


@dataclass(frozen=True)
class Decomposition:
    curve: CurvePoly
    window: tuple[float, float]
    intervals: tuple[CenteredInterval, ...]
    cuts: tuple[float, ...]
    kappa_target: float

    @property
    def geom_constants(self) -> list[float | None]:
        return [ci.C_estimate for ci in self.intervals]

    def to_json(self) -> dict:
        return {
            "curve": self.curve.to_json(),
            "window": list(self.window),
            "kappa_target": self.kappa_target,
            "stage1_cuts": list(self.cuts),
            "intervals": [ci.to_json() for ci in self.intervals],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, doc: dict) -> "Decomposition":
        return cls(
            curve=CurvePoly.from_coeffs(doc["curve"]),
            window=tuple(doc["window"]),
            intervals=tuple(CenteredInterval.from_json(r) for r in doc["intervals"]),
            cuts=tuple(doc["stage1_cuts"]),
            kappa_target=doc["kappa_target"],
        )

    @classmethod
    def loads(cls, text: str) -> "Decomposition":
        return cls.from_json(json.loads(text))


# ---------------------------------------------------------------------------
# stage 1


def _check_nondegenerate(P: CurvePoly) -> Polynomial:
    L = P.torsion
    if L.is_zero():
        raise DegenerateCurve("torsion polynomial vanishes identically")
    return L


def designated_polys(P: CurvePoly) -> list[Polynomial]:
    """L_P followed by the minors D_1 .. D_{d-1}."""
    return [P.torsion, *P.minors]


def _all_cut_roots(P: CurvePoly) -> list[float]:
    # correctly rounded floats, so centres chosen later coincide with cuts
    roots = set()
    for q in designated_polys(P):
        if q.degree >= 1:
            roots.update(float(refine_root(q, r)) for r in real_roots(q))
    return sorted(roots)


def default_window(P: CurvePoly) -> tuple[float, float]:
    """[-R, R] with R = 1 + 2 * (largest root magnitude of L_P and the minors)."""
    _check_nondegenerate(P)
    rs = _all_cut_roots(P)
    R = 1.0 + 2.0 * max((abs(r) for r in rs), default=0.0)
    return (-R, R)


def stage1_split(P: CurvePoly, window: Sequence[float] | None = None) -> Stage1:
    """Cut ``window`` at the real roots of L_P and D_j lying strictly inside."""
    _check_nondegenerate(P)
    lo, hi = default_window(P) if window is None else (float(window[0]), float(window[1]))
    if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
        raise ValueError(f"window must be finite with lo < hi, got {window}")
    cuts = tuple(r for r in _all_cut_roots(P) if lo < r < hi)
    edges = (lo, *cuts, hi)
    return Stage1(cuts, tuple(zip(edges[:-1], edges[1:])))


# ---------------------------------------------------------------------------
# stage 2


def sample_net(r0: float, r1: float, n: int = NET_SIZE) -> np.ndarray:
    """Points of (r0, r1): geometric clusters at both ends plus a uniform core."""
    w = r1 - r0
    n_geo = n // 3
    n_uni = n - 2 * n_geo
    g = 0.5 * w * np.logspace(-12, 0, n_geo, endpoint=False)
    uni = r0 + w * (np.arange(n_uni) + 0.5) / n_uni
    pts = np.concatenate([r0 + g, r1 - g, uni])
    pts = pts[(pts > r0) & (pts < r1)]
    return np.unique(pts)


@dataclass
class _Centre:
    """Centre b with the torsion re-expanded about it for stable evaluation."""

    b: float
    shifted: Polynomial
    mult: int
    is_root: bool

    @property
    def float_coeffs(self):
        return self.shifted.float_coeffs


def _centre_at_root(L: Polynomial, root) -> _Centre:
    bq = refine_root(L, root)
    return _Centre(float(bq), taylor_shift(L, bq), root.multiplicity, True)


def _fit(centre: _Centre, side: int, r0: float, r1: float, k_candidates, n: int = NET_SIZE):
    """Best (kappa, k, A) over ``k_candidates`` on distances (r0, r1) from b."""
    rho = sample_net(r0, r1, n)
    val = np.abs(evaluate(centre.shifted, side * rho))
    if np.any(val == 0) or not np.all(np.isfinite(val)):
        return math.inf, 0, math.nan
    logv = np.log(val)
    logr = np.log(rho)
    best = (math.inf, 0, math.nan)
    for k in k_candidates:
        z = logv - k * logr
        m = float(np.mean(z))
        kap = math.exp(float(np.max(np.abs(z - m))))
        if kap < best[0]:
            best = (kap, k, math.exp(m))
    return best


def _choose_centre(L: Polynomial, roots, window, J) -> list[tuple[_Centre, tuple[float, float]]]:
    """Centre(s) for stage-1 piece J; splits J first if both ends are roots."""
    lo, hi = J
    tol = 1e-9 * max(1.0, abs(lo), abs(hi))
    at_lo = [r for r in roots if abs(r.value - lo) <= tol]
    at_hi = [r for r in roots if abs(r.value - hi) <= tol]
    if at_lo and at_hi:
        mid = 0.5 * (lo + hi)
        return [(_centre_at_root(L, at_lo[0]), (lo, mid)), (_centre_at_root(L, at_hi[0]), (mid, hi))]
    if at_lo:
        return [(_centre_at_root(L, at_lo[0]), J)]
    if at_hi:
        return [(_centre_at_root(L, at_hi[0]), J)]
    outside = [r for r in roots if r.value <= lo or r.value >= hi]
    if outside:
        near = min(outside, key=lambda r: min(abs(r.value - lo), abs(r.value - hi)))
        return [(_centre_at_root(L, near), J)]
    wlo, whi = window
    b = whi + (whi - wlo) + 1.0
    return [(_Centre(b, taylor_shift(L, Fraction(b)), 0, False), J)]


def _to_rho(centre: _Centre, J: tuple[float, float]) -> tuple[int, float, float]:
    """Side of b and distance range (r0, r1) for the piece J."""
    lo, hi = J
    b = centre.b
    if hi <= b + 1e-9 * max(1.0, abs(b)):
        side = -1
        r0, r1 = b - hi, b - lo
    else:
        side = 1
        r0, r1 = lo - b, hi - b
    if centre.is_root and abs(r0) <= 1e-9 * max(1.0, abs(b)):
        r0 = 0.0
    return side, max(r0, 0.0), r1


def _from_rho(centre: _Centre, side: int, r: tuple[float, float], r_full: tuple[float, float], J) -> tuple[float, float]:
    """Map a distance range back to t, reusing J's exact endpoints where they touch."""
    lo, hi = J
    if side > 0:
        a = lo if r[0] == r_full[0] else centre.b + r[0]
        c = hi if r[1] == r_full[1] else centre.b + r[1]
    else:
        a = lo if r[1] == r_full[1] else centre.b - r[1]
        c = hi if r[0] == r_full[0] else centre.b - r[0]
    return a, c


def monomialize(
    P: CurvePoly,
    J: Sequence[float],
    kappa_target: float = KAPPA_DEFAULT,
    window: Sequence[float] | None = None,
    piece: int = 0,
) -> list[CenteredInterval]:
    """Split the stage-1 piece ``J`` into certified centred-monomial intervals.

    The order k is the one with the smallest achieved kappa on the net, which
    near b is forced to be the multiplicity of the root.
    """
    if kappa_target <= 1:
        raise ValueError("kappa_target must exceed 1")
    L = _check_nondegenerate(P)
    J = (float(J[0]), float(J[1]))
    window = J if window is None else (float(window[0]), float(window[1]))
    roots = list(real_roots(L)) if L.degree >= 1 else []
    budget = 64 * (max(L.degree, 0) + 1)
    # fitted values are tiny-relative noisy at kappa = 1 exactly; absorb that
    slack = 1e-12
    out: list[CenteredInterval] = []
    produced = 0
    for centre, sub in _choose_centre(L, roots, window, J):
        side, r0, r1 = _to_rho(centre, sub)
        ks = range(0, L.degree + 1) if centre.is_root else [0]
        stack = [(r0, r1)]
        leaves = []
        while stack:
            a, c = stack.pop()
            kap, k, A = _fit(centre, side, a, c, ks)
            if kap <= kappa_target * (1 + slack):
                leaves.append((a, c, k, A, kap))
                continue
            produced += 2
            if produced > budget:
                raise SplitBudgetExceeded(
                    f"more than {budget} subintervals on {J} at kappa_target={kappa_target}"
                )
            m = 0.5 * (a + c)
            stack.append((m, c))
            stack.append((a, m))
        for a, c, k, A, kap in leaves:
            lo, hi = _from_rho(centre, side, (a, c), (r0, r1), sub)
            out.append(CenteredInterval(lo, hi, centre.b, k, A, max(kap, 1.0), None, piece))
    out.sort(key=lambda ci: ci.lo)
    return out


def _refit(P: CurvePoly, ci_lo: CenteredInterval, ci_hi: CenteredInterval, L, roots):
    """Certification data for the union of two adjacent intervals with one centre."""
    b = ci_lo.b
    if b <= ci_lo.lo:
        side, r0, r1 = 1, ci_lo.lo - b, ci_hi.hi - b
    else:
        side, r0, r1 = -1, b - ci_hi.hi, b - ci_lo.lo
    root = next((r for r in roots if abs(r.value - b) <= 1e-9 * max(1.0, abs(b))), None)
    if root is not None:
        centre = _centre_at_root(L, root)
        ks = range(0, L.degree + 1)
    else:
        centre = _Centre(b, taylor_shift(L, Fraction(b)), 0, False)
        ks = [0]
    if root is not None and min(abs(ci_lo.lo - b), abs(ci_hi.hi - b)) <= 1e-9 * max(1.0, abs(b)):
        r0 = 0.0
    return _fit(centre, side, max(r0, 0.0), r1, ks)


def merge_pass(
    P: CurvePoly,
    intervals: list[CenteredInterval],
    kappa_target: float,
    c_floor: float = C_FLOOR,
    geom_budget: int = MERGE_BUDGET,
    seed: int = 0,
) -> list[CenteredInterval]:
    """Greedy left-to-right merge of neighbours sharing a piece and a centre."""
    from .geomcheck import geom_constant_estimate

    L = P.torsion
    roots = list(real_roots(L)) if L.degree >= 1 else []
    out: list[CenteredInterval] = []
    for ci in intervals:
        if out and out[-1].piece == ci.piece and out[-1].b == ci.b:
            prev = out[-1]
            kap, k, A = _refit(P, prev, ci, L, roots)
            if kap <= kappa_target * (1 + 1e-12):
                cand = CenteredInterval(prev.lo, ci.hi, prev.b, k, A, max(kap, 1.0), None, ci.piece)
                rep = geom_constant_estimate(P, cand, budget=geom_budget, seed=seed)
                if rep.C_hat >= c_floor:
                    out[-1] = cand
                    continue
        out.append(ci)
    return out


def decompose(
    P: CurvePoly,
    window: Sequence[float] | None = None,
    kappa_target: float = KAPPA_DEFAULT,
    merge: bool = True,
    geom_budget: int = MERGE_BUDGET,
    c_floor: float = C_FLOOR,
    seed: int = 0,
) -> Decomposition:
    """Stage 1, stage 2 per piece, merge pass, then per-interval C estimates."""
    from .geomcheck import geom_constant_estimate

    s1 = stage1_split(P, window)
    w = (s1.intervals[0][0], s1.intervals[-1][1])
    cis: list[CenteredInterval] = []
    for i, J in enumerate(s1.intervals):
        cis.extend(monomialize(P, J, kappa_target, window=w, piece=i))
    if merge:
        cis = merge_pass(P, cis, kappa_target, c_floor=c_floor, geom_budget=geom_budget, seed=seed)
    final = []
    for ci in cis:
        rep = geom_constant_estimate(P, ci, budget=geom_budget, seed=seed)
        final.append(replace(ci, C_estimate=float(rep.C_hat)))
    return Decomposition(P, w, tuple(final), s1.cuts, float(kappa_target))


def certification_error(P: CurvePoly, ci: CenteredInterval, n: int = NET_SIZE) -> float:
    """max over the sample net of |log(|L_P(t)| / (A |t - b|^k))|.

    L_P is re-expanded about b so that points very close to the centre do
    not cancel.
    """
    shifted = taylor_shift(P.torsion, ci.b)
    if ci.b <= ci.lo:
        rho = sample_net(ci.lo - ci.b, ci.hi - ci.b, n)
        val = np.abs(evaluate(shifted, rho))
    else:
        rho = sample_net(ci.b - ci.hi, ci.b - ci.lo, n)
        val = np.abs(evaluate(shifted, -rho))
    return float(np.max(np.abs(np.log(val) - math.log(ci.A) - ci.k * np.log(rho))))
