"""Measures on the parameter line and the averaging operator on boxes and grids.

The operator is

    A f(x) = integral over I of f(x - P(t)) w(t) dt

with the affine arclength weight w = |L_P|^(2/(d(d+1))) by default, or the
centred-monomial weight |t - b|^e used on a single decomposed interval.
Indicators of boxes go through an exact pullback to an interval union in t,
so only one-dimensional quadrature is ever needed.
"""

from __future__ import annotations

import json
import math
import struct
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import integrate, optimize

from .polycurve import CurvePoly, Polynomial, critical_points, evaluate, real_roots

QUAD_EPSREL = 1e-8
QUAD_EPSABS = 1e-14


class OutOfInterval(ValueError):
    """A set handed to a centred measure is not inside its interval."""


# ---------------------------------------------------------------------------
# interval unions


@dataclass(frozen=True)
class IntervalUnion:
    """Finite union of disjoint closed intervals, sorted; null pieces dropped."""

    pieces: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        ps = sorted((float(a), float(b)) for a, b in self.pieces if b > a)
        merged: list[list[float]] = []
        for a, b in ps:
            if not (math.isfinite(a) and math.isfinite(b)):
                raise ValueError("interval endpoints must be finite")
            if merged and a <= merged[-1][1]:
                merged[-1][1] = max(merged[-1][1], b)
            else:
                merged.append([a, b])
        object.__setattr__(self, "pieces", tuple((a, b) for a, b in merged))

    @classmethod
    def of(cls, *pieces) -> "IntervalUnion":
        return cls(tuple(pieces))

    @classmethod
    def empty(cls) -> "IntervalUnion":
        return cls(())

    def __iter__(self):
        return iter(self.pieces)

    def __len__(self):
        return len(self.pieces)

    def __bool__(self):
        return bool(self.pieces)

    @property
    def length(self) -> float:
        return sum(b - a for a, b in self.pieces)

    @property
    def lo(self) -> float:
        return self.pieces[0][0]

    @property
    def hi(self) -> float:
        return self.pieces[-1][1]

    def __or__(self, other: "IntervalUnion") -> "IntervalUnion":
        return IntervalUnion(self.pieces + other.pieces)

    def __and__(self, other: "IntervalUnion") -> "IntervalUnion":
        out = []
        i = j = 0
        a, b = self.pieces, other.pieces
        while i < len(a) and j < len(b):
            lo = max(a[i][0], b[j][0])
            hi = min(a[i][1], b[j][1])
            if hi > lo:
                out.append((lo, hi))
            if a[i][1] < b[j][1]:
                i += 1
            else:
                j += 1
        return IntervalUnion(tuple(out))

    def __sub__(self, other: "IntervalUnion") -> "IntervalUnion":
        out = []
        for a, b in self.pieces:
            cur = a
            for c, e in other.pieces:
                if e <= cur or c >= b:
                    continue
                if c > cur:
                    out.append((cur, c))
                cur = max(cur, e)
                if cur >= b:
                    break
            if cur < b:
                out.append((cur, b))
        return IntervalUnion(tuple(out))

    def clip(self, lo: float, hi: float) -> "IntervalUnion":
        return self & IntervalUnion(((lo, hi),))

    def contains(self, t: float) -> bool:
        return any(a <= t <= b for a, b in self.pieces)

    def subset_of(self, lo: float, hi: float, tol: float = 0.0) -> bool:
        return all(a >= lo - tol and b <= hi + tol for a, b in self.pieces)

    def to_json(self):
        return [list(p) for p in self.pieces]


# ---------------------------------------------------------------------------
# boxes and grid functions


@dataclass(frozen=True)
class Box:
    """Axis-aligned closed box given by per-axis (lo, hi)."""

    bounds: tuple[tuple[float, float], ...]

    def __post_init__(self):
        bs = tuple((float(a), float(b)) for a, b in self.bounds)
        for a, b in bs:
            if not a < b:
                raise ValueError(f"degenerate box side ({a}, {b})")
        object.__setattr__(self, "bounds", bs)

    @classmethod
    def centered(cls, centre: Sequence[float], half_widths: Sequence[float]) -> "Box":
        return cls(tuple((c - h, c + h) for c, h in zip(centre, half_widths)))

    @classmethod
    def nonisotropic(cls, delta: float, d: int, centre=None) -> "Box":
        """D_delta = {|x_j| <= delta^j}, optionally translated."""
        centre = centre if centre is not None else (0.0,) * d
        return cls.centered(centre, [delta**j for j in range(1, d + 1)])

    @property
    def dim(self) -> int:
        return len(self.bounds)

    @property
    def volume(self) -> float:
        return math.prod(b - a for a, b in self.bounds)

    @property
    def lo(self) -> np.ndarray:
        return np.array([a for a, _ in self.bounds])

    @property
    def hi(self) -> np.ndarray:
        return np.array([b for _, b in self.bounds])

    def translate(self, v) -> "Box":
        return Box(tuple((a + float(s), b + float(s)) for (a, b), s in zip(self.bounds, v)))

    def intersection_volume(self, other: "Box") -> float:
        v = 1.0
        for (a, b), (c, e) in zip(self.bounds, other.bounds):
            w = min(b, e) - max(a, c)
            if w <= 0:
                return 0.0
            v *= w
        return v

    def contains(self, x) -> bool:
        return all(a <= xi <= b for (a, b), xi in zip(self.bounds, x))

    def subdivide(self, res: int | Sequence[int]) -> list["Box"]:
        res = [res] * self.dim if isinstance(res, int) else list(res)
        edges = [np.linspace(a, b, n + 1) for (a, b), n in zip(self.bounds, res)]
        out = []
        for idx in np.ndindex(*res):
            out.append(Box(tuple((edges[k][i], edges[k][i + 1]) for k, i in enumerate(idx))))
        return out

    def to_json(self):
        return [list(b) for b in self.bounds]


@dataclass(frozen=True)
class GridSpec:
    """Uniform cell grid over a box; cell values sit at cell centres."""

    box: Box
    resolution: tuple[int, ...]

    def __post_init__(self):
        res = tuple(int(n) for n in self.resolution)
        if len(res) != self.box.dim or min(res) < 1:
            raise ValueError("resolution must give a positive count per axis")
        object.__setattr__(self, "resolution", res)

    @property
    def dim(self) -> int:
        return self.box.dim

    @property
    def spacing(self) -> np.ndarray:
        return (self.box.hi - self.box.lo) / np.array(self.resolution)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def axes(self) -> list[np.ndarray]:
        h = self.spacing
        return [self.box.lo[k] + (np.arange(n) + 0.5) * h[k] for k, n in enumerate(self.resolution)]

    def centres(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)


@dataclass
class GridFunction:
    """Cell values on a :class:`GridSpec`, stored row-major (C order)."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).reshape(self.grid.resolution)

    @property
    def dim(self) -> int:
        return self.grid.dim

    @property
    def cell_volume(self) -> float:
        return self.grid.cell_volume

    @classmethod
    def indicator(cls, grid: GridSpec, box: Box) -> "GridFunction":
        """Cells whose centre lies in ``box`` get value 1."""
        c = grid.centres()
        inside = np.all((c >= box.lo) & (c <= box.hi), axis=1)
        return cls(grid, inside.astype(float))

    def lookup(self, x: np.ndarray) -> np.ndarray:
        """Nearest-cell values at points ``x`` of shape (n, d); zero outside."""
        x = np.atleast_2d(x)
        h = self.grid.spacing
        idx = np.floor((x - self.grid.box.lo) / h).astype(np.int64)
        res = np.array(self.grid.resolution)
        ok = np.all((idx >= 0) & (idx < res), axis=1)
        out = np.zeros(len(x))
        if ok.any():
            out[ok] = self.values[tuple(idx[ok].T)]
        return out

    # serialisation: one ASCII header line then little-endian float64 payload
    def to_bytes(self) -> bytes:
        header = {
            "dim": self.dim,
            "box": self.grid.box.to_json(),
            "resolution": list(self.grid.resolution),
        }
        line = json.dumps(header, separators=(",", ":")) + "\n"
        payload = np.ascontiguousarray(self.values, dtype="<f8").tobytes(order="C")
        return line.encode("ascii") + payload

    @classmethod
    def from_bytes(cls, blob: bytes) -> "GridFunction":
        nl = blob.index(b"\n")
        header = json.loads(blob[:nl].decode("ascii"))
        grid = GridSpec(Box(tuple(tuple(b) for b in header["box"])), tuple(header["resolution"]))
        vals = np.frombuffer(blob[nl + 1:], dtype="<f8").reshape(grid.resolution)
        return cls(grid, vals.copy())

    def sidecar(self) -> dict:
        return {
            "dim": self.dim,
            "box": self.grid.box.to_json(),
            "resolution": list(self.grid.resolution),
            "cell_volume": self.cell_volume,
            "dtype": "float64",
            "byte_order": "little",
            "layout": "row-major",
        }

    def to_csv(self) -> str:
        c = self.grid.centres()
        cols = [f"x{k + 1}" for k in range(self.dim)] + ["value"]
        lines = [",".join(cols)]
        for row, v in zip(c, self.values.ravel()):
            lines.append(",".join(format(float(a), ".17g") for a in (*row, v)))
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# measures on the parameter line


def mu_measure(ci, S: IntervalUnion, e: float) -> float:
    """Closed-form integral of |t - b|^e over S, where S lies in [ci.lo, ci.hi].

    ``ci`` is anything with ``lo``, ``hi`` and centre ``b`` outside (lo, hi).
    """
    if not S:
        return 0.0
    tol = 1e-12 * max(1.0, abs(ci.lo), abs(ci.hi))
    if not S.subset_of(ci.lo, ci.hi, tol):
        raise OutOfInterval(f"{S.pieces} not inside [{ci.lo}, {ci.hi}]")
    return _power_mass(S, ci.b, e)


def _power_mass(S: IntervalUnion, b: float, e: float) -> float:
    total = 0.0
    for a, c in S:
        da, dc = abs(a - b), abs(c - b)
        if a < b < c:
            total += (da ** (e + 1) + dc ** (e + 1)) / (e + 1)
        else:
            total += abs(dc ** (e + 1) - da ** (e + 1)) / (e + 1)
    return total


def mu_cumulative(ci, t: float, e: float) -> float:
    """mu((near end, t)) measured from the endpoint of I closest to b."""
    base = min(abs(ci.lo - ci.b), abs(ci.hi - ci.b))
    return (abs(t - ci.b) ** (e + 1) - base ** (e + 1)) / (e + 1)


def mu_inverse(ci, m: float, e: float) -> float:
    """Point t in I with mu_cumulative(ci, t) == m."""
    base = min(abs(ci.lo - ci.b), abs(ci.hi - ci.b))
    r = (base ** (e + 1) + (e + 1) * m) ** (1.0 / (e + 1))
    side = 1.0 if ci.lo >= ci.b else -1.0
    return ci.b + side * r


def affine_weight_exponent(d: int) -> float:
    return 2.0 / (d * (d + 1))


def nu_mass(P: CurvePoly, S: IntervalUnion) -> float:
    """Affine arclength of P over S: integral of |L_P|^(2/(d(d+1)))."""
    if not S:
        return 0.0
    L = P.torsion
    e = affine_weight_exponent(P.dim)
    if L.is_constant():
        return abs(float(L.leading)) ** e * S.length
    roots = _torsion_roots(P)
    total = 0.0
    for a, b in S:
        cuts = [a] + [r for r in roots if a < r < b] + [b]
        for u, v in zip(cuts, cuts[1:]):
            val, _ = integrate.quad(
                lambda t: abs(evaluate(L, t)) ** e, u, v, epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL, limit=200
            )
            total += val
    return total


@lru_cache(maxsize=1024)
def _torsion_roots(P: CurvePoly) -> tuple[float, ...]:
    L = P.torsion
    if L.is_zero() or L.is_constant():
        return ()
    return tuple(real_roots(L).values)


def affine_weight(P: CurvePoly) -> Callable[[IntervalUnion], float]:
    return lambda S: nu_mass(P, S)


def centred_weight(ci, e: float) -> Callable[[IntervalUnion], float]:
    return lambda S: _power_mass(S, ci.b, e)


def weight_density(P: CurvePoly, weight=None) -> Callable[[np.ndarray], np.ndarray]:
    """Pointwise density matching ``weight`` (affine arclength by default)."""
    if weight is None or weight == "affine":
        L = P.torsion
        e = affine_weight_exponent(P.dim)
        return lambda t: np.abs(evaluate(L, np.asarray(t, dtype=float))) ** e
    if isinstance(weight, tuple) and weight[0] == "centred":
        _, b, e = weight
        return lambda t: np.abs(np.asarray(t, dtype=float) - b) ** e
    raise ValueError(f"unknown weight {weight!r}")


def _measure_fn(P: CurvePoly, weight) -> Callable[[IntervalUnion], float]:
    if weight is None or weight == "affine":
        return affine_weight(P)
    if isinstance(weight, tuple) and weight[0] == "centred":
        _, b, e = weight
        return lambda S: _power_mass(S, b, e)
    if callable(weight):
        return weight
    raise ValueError(f"unknown weight {weight!r}")


# ---------------------------------------------------------------------------
# pullbacks


@lru_cache(maxsize=4096)
def _monotone_breaks(p: Polynomial) -> tuple[float, ...]:
    return tuple(critical_points(p))


def level_band(p: Polynomial, lo: float, hi: float, I: tuple[float, float]) -> IntervalUnion:
    """{t in I : lo <= p(t) <= hi}.

    p is monotone between consecutive critical points, so on each monotone
    piece the band is a single interval found by inverting p with brentq.
    """
    a, b = I
    if p.is_constant():
        c = float(p.leading)
        return IntervalUnion(((a, b),)) if lo <= c <= hi else IntervalUnion()
    cuts = [a] + [c for c in _monotone_breaks(p) if a < c < b] + [b]
    out = []
    for u, v in zip(cuts, cuts[1:]):
        pu, pv = evaluate(p, u), evaluate(p, v)
        if pu <= pv:
            x0, x1 = _invert(p, u, v, pu, pv, lo, rising=True), _invert(p, u, v, pu, pv, hi, rising=True)
            if x0 is not None and x1 is not None and x1 > x0:
                out.append((x0, x1))
        else:
            x0, x1 = _invert(p, u, v, pu, pv, hi, rising=False), _invert(p, u, v, pu, pv, lo, rising=False)
            if x0 is not None and x1 is not None and x1 > x0:
                out.append((x0, x1))
    return IntervalUnion(tuple(out))


def _invert(p, u, v, pu, pv, level, rising):
    """Crossing of ``level`` on a monotone piece, clamped to [u, v].

    Returns None when the level lies entirely on the wrong side so that the
    band is empty on this piece.
    """
    if rising:
        if level <= pu:
            return u
        if level >= pv:
            return v
    else:
        if level >= pu:
            return u
        if level <= pv:
            return v
    return optimize.brentq(lambda t: evaluate(p, t) - level, u, v, xtol=1e-15, rtol=4 * np.finfo(float).eps)


def pullback_set(P: CurvePoly, E: Box, x, I) -> IntervalUnion:
    """{t in I : x - P(t) in E} as an interval union."""
    a, b = (I.lo, I.hi) if hasattr(I, "lo") else I
    out = IntervalUnion(((a, b),))
    for p, (elo, ehi), xj in zip(P.components, E.bounds, x):
        # elo <= x_j - p(t) <= ehi  <=>  x_j - ehi <= p(t) <= x_j - elo
        out = out & level_band(p, xj - ehi, xj - elo, (a, b))
        if not out:
            break
    return out


def pullback_union(P: CurvePoly, boxes: Iterable[Box], x, I) -> IntervalUnion:
    out = IntervalUnion()
    for E in boxes:
        out = out | pullback_set(P, E, x, I)
    return out


# ---------------------------------------------------------------------------
# the operator


def apply_operator(P: CurvePoly, I, f, x, weight=None, nodes_per_cell: int = 8) -> float:
    """A f(x) for a Box indicator, a list of boxes, or a GridFunction."""
    a, b = (I.lo, I.hi) if hasattr(I, "lo") else I
    measure = _measure_fn(P, weight)
    if isinstance(f, Box):
        return measure(pullback_set(P, f, x, (a, b)))
    if isinstance(f, (list, tuple)) and f and isinstance(f[0], Box):
        return measure(pullback_union(P, f, x, (a, b)))
    if isinstance(f, GridFunction):
        return _apply_grid(P, (a, b), f, np.asarray(x, dtype=float), weight, nodes_per_cell)
    if f is None or (np.isscalar(f) and f == 0):
        return 0.0
    raise TypeError(f"unsupported input {type(f).__name__}")


def _apply_grid(P, I, f: GridFunction, x, weight, nodes_per_cell):
    a, b = I
    h = f.grid.spacing
    # cell crossings bounded by total variation of each coordinate over I
    crossings = 0.0
    for k, p in enumerate(P.components):
        cuts = [a] + [c for c in _monotone_breaks(p) if a < c < b] + [b]
        tv = sum(abs(evaluate(p, v) - evaluate(p, u)) for u, v in zip(cuts, cuts[1:]))
        crossings += tv / h[k]
    n = int(nodes_per_cell * (crossings + 1))
    n = max(n, 64)
    t = a + (np.arange(n) + 0.5) * (b - a) / n
    pts = x[None, :] - P.point(t)
    vals = f.lookup(pts)
    w = weight_density(P, weight)(t)
    return float(np.sum(vals * w) * (b - a) / n)


def apply_operator_field(P: CurvePoly, I, f, grid: GridSpec, weight=None, points: np.ndarray | None = None) -> GridFunction:
    """A f evaluated at every cell centre of ``grid`` (or at ``points`` mapped onto it)."""
    pts = grid.centres() if points is None else points
    vals = np.array([apply_operator(P, I, f, x, weight=weight) for x in pts])
    return GridFunction(grid, vals)


def adjoint_curve(P: CurvePoly) -> CurvePoly:
    """A* f(y) = integral of f(y + P(t)) is A applied along -P."""
    return -P


def box_pairing(P: CurvePoly, I, E: Sequence[Box] | Box, F: Sequence[Box] | Box, weight=None) -> float:
    """<A chi_E, chi_F> = integral over I of |F cap (E + P(t))| w(t) dt.

    The integrand is piecewise polynomial in t; quad handles the kinks.
    """
    Es = [E] if isinstance(E, Box) else list(E)
    Fs = [F] if isinstance(F, Box) else list(F)
    a, b = (I.lo, I.hi) if hasattr(I, "lo") else I
    dens = weight_density(P, weight)

    def integrand(t):
        shift = P.point(t)
        vol = 0.0
        for e in Es:
            moved = e.translate(shift)
            for g in Fs:
                vol += moved.intersection_volume(g)
        return vol * float(dens(np.array([t]))[0]) if vol else 0.0

    # restrict to the t-range where E + P(t) can meet F
    hull_lo = np.min([g.lo for g in Fs], axis=0) - np.max([e.hi for e in Es], axis=0)
    hull_hi = np.max([g.hi for g in Fs], axis=0) - np.min([e.lo for e in Es], axis=0)
    active = IntervalUnion(((a, b),))
    for p, lo, hi in zip(P.components, hull_lo, hull_hi):
        active = active & level_band(p, lo, hi, (a, b))
    roots = _torsion_roots(P) if weight in (None, "affine") else ()
    total = 0.0
    with warnings.catch_warnings():
        # kinks of the overlap volume can stall quad at the tight tolerance
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for u, v in active:
            pts = sorted(r for r in roots if u < r < v)
            val, _ = integrate.quad(integrand, u, v, points=pts or None, limit=400, epsabs=1e-15, epsrel=1e-10)
            total += val
    return total


# ---------------------------------------------------------------------------
# norms


def lp_norm(f: GridFunction, p: float) -> float:
    v = np.abs(f.values.ravel())
    if math.isinf(p):
        return float(v.max(initial=0.0))
    return float((np.sum(v**p) * f.cell_volume) ** (1.0 / p))


def rearrangement(values: np.ndarray, measures: np.ndarray | float) -> tuple[np.ndarray, np.ndarray]:
    """Level values in decreasing order with cumulative measures t_j."""
    v = np.abs(np.asarray(values, dtype=float).ravel())
    m = np.broadcast_to(np.asarray(measures, dtype=float), v.shape)
    order = np.argsort(-v, kind="stable")
    v, m = v[order], m[order]
    keep = v > 0
    return v[keep], np.cumsum(m[keep])


def lorentz_from_levels(values, measures, p: float, r: float) -> float:
    """L^{p,r} quasi-norm of a simple function given by (value, measure) pairs.

    f* is piecewise constant, so the layer integral of (t^{1/p} f*(t))^r dt/t
    is a sum of closed-form terms.
    """
    v, t = rearrangement(values, measures)
    if len(v) == 0:
        return 0.0
    if math.isinf(r):
        return float(np.max(t ** (1.0 / p) * v))
    tprev = np.concatenate(([0.0], t[:-1]))
    terms = v**r * (p / r) * (t ** (r / p) - tprev ** (r / p))
    return float(np.sum(terms) ** (1.0 / r))


def lorentz_norm(f: GridFunction, p: float, r: float) -> float:
    return lorentz_from_levels(f.values, f.cell_volume, p, r)
