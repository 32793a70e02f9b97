"""Numerical checks of the geometric inequality, injectivity and the d=2 identity.

The geometric ratio of a curve P at distinct parameters t_1..t_d is

    |det(P'(t_1), ..., P'(t_d))| / (prod_j |L_P(t_j)|^(1/d) * prod_{j<k} |t_j - t_k|)

and a certified interval should keep it bounded below.  Everything here
samples; nothing is a proof.
"""

from __future__ import annotations

import math
from fractions import Fraction
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy import integrate, optimize
from scipy.spatial import cKDTree
from scipy.stats import qmc

from .polycurve import CurvePoly, evaluate, jacobian_det, jacobian_reduced_array, real_roots, refine_root

GAP_FRACTION = 1e-7
TOL_IMAGE = 1e-9
TOL_DOMAIN = 1e-6


class DegeneratePoint(ValueError):
    """Coincident parameters or a zero of the torsion."""


class PreconditionViolation(ValueError):
    """The interval handed to a probe was not certified."""


@dataclass
class GeomReport:
    interval_id: int
    samples: int
    C_hat: float
    argmin: tuple[float, ...]
    violations: int
    floor: float = 0.0

    @property
    def passed(self) -> bool:
        return self.violations == 0 and self.C_hat > 0

    def to_json(self) -> dict:
        row = asdict(self)
        row["argmin"] = list(self.argmin)
        row["passed"] = self.passed
        return row

    def csv_row(self) -> list:
        return [self.interval_id, self.C_hat, *self.argmin, self.samples]


@dataclass
class InjectivityReport:
    interval_id: int
    samples: int
    min_image_gap: float
    collisions: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.collisions

    def to_json(self) -> dict:
        return {
            "interval_id": self.interval_id,
            "samples": self.samples,
            "min_image_gap": self.min_image_gap,
            "collisions": [[list(a), list(b)] for a, b in self.collisions],
            "passed": self.passed,
        }


def geom_ratio(P: CurvePoly, pts: Sequence[float]) -> float:
    """|J_Phi| over the product of |L_P(t_j)|^(1/d) and the Vandermonde factor."""
    d = P.dim
    if len(pts) != d:
        raise ValueError(f"need {d} points, got {len(pts)}")
    ts = [float(t) for t in pts]
    if len(set(ts)) < d:
        raise DegeneratePoint(f"coincident parameters in {ts}")
    for t in ts:
        if evaluate(P.torsion, t) == 0:
            raise DegeneratePoint(f"torsion vanishes at {t}")
    return float(geom_ratio_array(P, np.array([ts]))[0])


def geom_ratio_array(P: CurvePoly, pts: np.ndarray) -> np.ndarray:
    """Vectorised :func:`geom_ratio`; degenerate rows give nan.

    The Vandermonde factor is divided out analytically, so nearly
    coincident tuples lose no accuracy.
    """
    pts = np.asarray(pts, dtype=float)
    d = P.dim
    red = np.abs(jacobian_reduced_array(P, pts))
    lw = np.prod(np.abs(evaluate(P.torsion, pts)) ** (1.0 / d), axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = red / lw
    r[(lw == 0) | (_min_gap(pts) == 0)] = np.nan
    return r


def _bounds(I) -> tuple[float, float]:
    return (float(I.lo), float(I.hi)) if hasattr(I, "lo") else (float(I[0]), float(I[1]))


def _min_gap(pts: np.ndarray) -> np.ndarray:
    s = np.sort(pts, axis=1)
    return np.min(np.diff(s, axis=1), axis=1)


def geom_constant_estimate(
    P: CurvePoly,
    I,
    budget: int = 20000,
    seed: int = 0,
    floor: float = 0.0,
    interval_id: int = 0,
    n_starts: int = 8,
) -> GeomReport:
    """Estimate the infimum of the geometric ratio over I^d.

    About 80% of the budget goes to a Latin-hypercube design, the rest to
    coordinate descent from the best design points.  The reported C_hat is
    the exact minimum over every admissible evaluation.
    """
    lo, hi = _bounds(I)
    d = P.dim
    width = hi - lo
    min_gap = GAP_FRACTION * width
    eps = 1e-12 * max(width, abs(lo), abs(hi), 1.0)
    a, b = lo + eps, hi - eps
    n_lhs = max(int(0.8 * budget), d + 1)
    sampler = qmc.LatinHypercube(d=d, seed=np.random.default_rng(seed))
    pts = a + (b - a) * sampler.random(n_lhs)
    ok = _min_gap(pts) >= min_gap
    pts = pts[ok]
    vals = geom_ratio_array(P, pts)
    good = np.isfinite(vals)
    pts, vals = pts[good], vals[good]
    used = n_lhs
    violations = int(np.sum(vals <= floor))
    if len(vals) == 0:
        return GeomReport(interval_id, used, math.nan, (math.nan,) * d, violations, floor)
    best_i = int(np.argmin(vals))
    best = [float(vals[best_i]), tuple(float(x) for x in pts[best_i])]

    remaining = budget - used
    order = np.argsort(vals)[:n_starts]
    counter = [0]

    def objective(x):
        counter[0] += 1
        arr = np.asarray(x, dtype=float)[None, :]
        if _min_gap(arr)[0] < min_gap:
            return math.inf
        v = float(geom_ratio_array(P, arr)[0])
        if not math.isfinite(v):
            return math.inf
        if v < best[0]:
            best[0], best[1] = v, tuple(float(t) for t in arr[0])
        if v <= floor:
            nonlocal violations
            violations += 1
        return v

    for idx in order:
        if counter[0] >= remaining:
            break
        x = pts[idx].copy()
        for _sweep in range(4):
            improved = False
            for j in range(d):
                if counter[0] >= remaining:
                    break

                def f1(s, j=j):
                    y = x.copy()
                    y[j] = s
                    return objective(y)

                res = optimize.minimize_scalar(
                    f1, bounds=(a, b), method="bounded", options={"xatol": 1e-10 * width, "maxiter": 60}
                )
                if res.fun < objective(x):
                    x[j] = res.x
                    improved = True
            if not improved:
                break
    # spend any budget the descent left over on fresh design points
    extra = budget - used - counter[0]
    if extra > 0:
        more = a + (b - a) * sampler.random(extra)
        more = more[_min_gap(more) >= min_gap]
        mv = geom_ratio_array(P, more)
        ok = np.isfinite(mv)
        more, mv = more[ok], mv[ok]
        violations += int(np.sum(mv <= floor))
        if len(mv) and mv.min() < best[0]:
            i = int(np.argmin(mv))
            best = [float(mv[i]), tuple(float(x) for x in more[i])]
        counter[0] += extra
    return GeomReport(interval_id, used + counter[0], best[0], best[1], violations, floor)


def grid_minimum(P: CurvePoly, I, resolution: int = 400) -> float:
    """Brute-force minimum over an open tensor grid of I^d, off-diagonal cells only."""
    lo, hi = _bounds(I)
    h = (hi - lo) / resolution
    axis = lo + (np.arange(resolution) + 0.5) * h
    mesh = np.meshgrid(*[axis] * P.dim, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    pts = pts[_min_gap(pts) > 0.5 * h]
    return float(np.nanmin(geom_ratio_array(P, pts)))


def phi_map(P: CurvePoly, pts: np.ndarray) -> np.ndarray:
    """Phi_P(t) = sum_j (-1)^(d+j-1) P(t_j) for j = 1..d, rowwise."""
    pts = np.asarray(pts, dtype=float)
    d = P.dim
    out = np.zeros((len(pts), d))
    for j in range(d):
        sign = -1.0 if (d + j) % 2 else 1.0  # exponent d + (j+1) - 1
        out += sign * P.point(pts[:, j])
    return out


def _stage1_roots(P: CurvePoly) -> list[float]:
    rs = []
    for q in (P.torsion, *P.minors):
        if q.degree >= 1:
            rs.extend(float(refine_root(q, r)) for r in real_roots(q))
    return sorted(rs)


def injectivity_probe(
    P: CurvePoly,
    I,
    budget: int = 20000,
    tol_domain: float = TOL_DOMAIN,
    tol_image: float = TOL_IMAGE,
    seed: int = 0,
    interval_id: int = 0,
) -> InjectivityReport:
    """Look for distinct sorted tuples in I^d with (nearly) equal images."""
    lo, hi = _bounds(I)
    if P.torsion.is_zero():
        raise PreconditionViolation("torsion vanishes identically")
    inside = [r for r in _stage1_roots(P) if lo < r < hi]
    if inside:
        raise PreconditionViolation(f"interval ({lo}, {hi}) contains stage-1 cut(s) {inside}")
    d = P.dim
    sampler = qmc.LatinHypercube(d=d, seed=np.random.default_rng(seed))
    pts = np.sort(lo + (hi - lo) * sampler.random(budget), axis=1)
    pts = pts[_min_gap(pts) >= GAP_FRACTION * (hi - lo)]
    img = phi_map(P, pts)
    tree = cKDTree(img)
    dist, _ = tree.query(img, k=2)
    min_gap = float(np.min(dist[:, 1])) if len(img) > 1 else math.inf
    collisions = []
    for i, j in sorted(tree.query_pairs(r=tol_image)):
        if np.linalg.norm(pts[i] - pts[j]) > tol_domain:
            collisions.append((tuple(pts[i]), tuple(pts[j])))
    return InjectivityReport(interval_id, len(pts), min_gap, collisions)


def d2_jacobian_identity_check(P: CurvePoly, J, s: float, t: float) -> float:
    """Residual between |J_Phi(s,t)| and |P1'(s) P1'(t) int_s^t L_P / P1'^2|.

    The difference is divided by max(1, |J_Phi|): far out on a long window
    both sides reach 1e9 and an absolute residual would only measure
    double rounding.
    """
    if P.dim != 2:
        raise ValueError("identity is two-dimensional")
    lo, hi = _bounds(J)
    if not (lo <= s <= hi and lo <= t <= hi):
        raise ValueError(f"s={s}, t={t} not in ({lo}, {hi})")
    d1 = P.velocity[0]
    roots = [float(refine_root(d1, r)) for r in real_roots(d1)] if d1.degree >= 1 else []
    if d1.is_zero() or any(lo < r < hi for r in roots):
        raise PreconditionViolation("P1' vanishes on the interval")
    if s == t:
        return 0.0
    L = P.torsion
    val, _ = integrate.quad(
        lambda w: evaluate(L, w) / evaluate(d1, w) ** 2, s, t, epsabs=1e-14, epsrel=1e-12, limit=200
    )
    rhs = abs(evaluate(d1, s) * evaluate(d1, t) * val)
    lhs = abs(float(jacobian_det(P, (Fraction(s), Fraction(t)))))
    return abs(lhs - rhs) / max(1.0, lhs)
