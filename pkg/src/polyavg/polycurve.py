"""Exact univariate polynomials and polynomial curves in the plane and space.

Coefficients are kept as :class:`fractions.Fraction` in ascending degree
order, so determinants built from curve derivatives are sign-exact.
Floating point only enters through :func:`evaluate` on float arguments and
through root refinement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, lru_cache
from numbers import Rational
from typing import Iterable, Sequence

import numpy as np

MAX_DEGREE = 16
ROOT_TOL = Fraction(1, 10**12)


class ZeroPolynomial(ValueError):
    """Raised when an operation needs a nonzero polynomial."""


def as_fraction(x) -> Fraction:
    """Convert ints, decimal strings, fractions and floats to an exact rational."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, Rational)):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x.strip())
    if isinstance(x, (float, np.floating)):
        if not math.isfinite(x):
            raise ValueError(f"non-finite coefficient {x!r}")
        return Fraction(float(x))
    if isinstance(x, np.integer):
        return Fraction(int(x))
    raise TypeError(f"cannot interpret {x!r} as an exact rational")


@dataclass(frozen=True)
class Polynomial:
    """Polynomial with exact rational coefficients, lowest degree first."""

    coeffs: tuple[Fraction, ...] = ()

    def __post_init__(self):
        cs = [as_fraction(c) for c in self.coeffs]
        while cs and cs[-1] == 0:
            cs.pop()
        object.__setattr__(self, "coeffs", tuple(cs))

    @classmethod
    def monomial(cls, n: int, c=1) -> "Polynomial":
        return cls((0,) * n + (c,))

    @classmethod
    def constant(cls, c) -> "Polynomial":
        return cls((c,))

    @property
    def degree(self) -> int:
        """Degree, with -1 for the zero polynomial."""
        return len(self.coeffs) - 1

    def is_zero(self) -> bool:
        return not self.coeffs

    def is_constant(self) -> bool:
        return len(self.coeffs) <= 1

    @property
    def leading(self) -> Fraction:
        return self.coeffs[-1] if self.coeffs else Fraction(0)

    def __add__(self, other):
        other = _coerce(other)
        n = max(len(self.coeffs), len(other.coeffs))
        a = self.coeffs + (Fraction(0),) * (n - len(self.coeffs))
        b = other.coeffs + (Fraction(0),) * (n - len(other.coeffs))
        return Polynomial(tuple(x + y for x, y in zip(a, b)))

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(tuple(-c for c in self.coeffs))

    def __sub__(self, other):
        return self + (-_coerce(other))

    def __rsub__(self, other):
        return _coerce(other) - self

    def __mul__(self, other):
        other = _coerce(other)
        if self.is_zero() or other.is_zero():
            return Polynomial()
        out = [Fraction(0)] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            if a == 0:
                continue
            for j, b in enumerate(other.coeffs):
                out[i + j] += a * b
        return Polynomial(tuple(out))

    __rmul__ = __mul__

    def __divmod__(self, other):
        other = _coerce(other)
        if other.is_zero():
            raise ZeroDivisionError("polynomial division by zero")
        rem = list(self.coeffs)
        dq = other.degree
        lead = other.leading
        quot = [Fraction(0)] * max(len(rem) - dq, 1)
        while len(rem) - 1 >= dq and rem:
            shift = len(rem) - 1 - dq
            c = rem[-1] / lead
            quot[shift] = c
            for j, b in enumerate(other.coeffs):
                rem[shift + j] -= c * b
            rem.pop()
            while rem and rem[-1] == 0:
                rem.pop()
        return Polynomial(tuple(quot)), Polynomial(tuple(rem))

    def __floordiv__(self, other):
        return divmod(self, other)[0]

    def __mod__(self, other):
        return divmod(self, other)[1]

    def monic(self) -> "Polynomial":
        if self.is_zero():
            return self
        return Polynomial(tuple(c / self.leading for c in self.coeffs))

    def __call__(self, t):
        return evaluate(self, t)

    def __repr__(self):
        if self.is_zero():
            return "Polynomial(0)"
        terms = []
        for i, c in enumerate(self.coeffs):
            if c == 0:
                continue
            terms.append(f"{c}" if i == 0 else f"{c}*t^{i}")
        return "Polynomial(" + " + ".join(terms) + ")"

    @cached_property
    def float_coeffs(self) -> np.ndarray:
        return np.array([float(c) for c in self.coeffs], dtype=float)

    def to_json(self) -> list[str]:
        return [str(c) for c in self.coeffs]


def _coerce(x) -> Polynomial:
    return x if isinstance(x, Polynomial) else Polynomial((x,))


def poly(*coeffs) -> Polynomial:
    """Shorthand: ``poly(0, 0, 1)`` is t^2."""
    return Polynomial(tuple(coeffs))


T = Polynomial((0, 1))


def derivative(p: Polynomial, order: int = 1) -> Polynomial:
    """Exact ``order``-th derivative; order 0 returns ``p`` itself."""
    if order < 0:
        raise ValueError("derivative order must be nonnegative")
    cs = p.coeffs
    for _ in range(order):
        cs = tuple(i * c for i, c in enumerate(cs))[1:]
    return Polynomial(cs)


def evaluate(p: Polynomial, t, exact: bool = False):
    """Horner evaluation.

    Rational ``t`` with ``exact=True`` gives an exact Fraction.  Arrays are
    evaluated elementwise in floating point.
    """
    if isinstance(t, np.ndarray):
        out = np.zeros_like(t, dtype=float)
        for c in reversed(p.float_coeffs):
            out = out * t + c
        return out
    if exact:
        t = as_fraction(t)
        acc = Fraction(0)
        for c in reversed(p.coeffs):
            acc = acc * t + c
        return acc
    t = float(t)
    acc = 0.0
    for c in reversed(p.float_coeffs):
        acc = acc * t + c
    return acc


def poly_gcd(a: Polynomial, b: Polynomial) -> Polynomial:
    """Monic gcd by the Euclidean algorithm over the rationals."""
    while not b.is_zero():
        a, b = b, a % b
    return a.monic()


def squarefree_decomposition(p: Polynomial) -> list[tuple[Polynomial, int]]:
    """Yun's algorithm: ``p = c * prod f_i^i`` with ``f_i`` squarefree, coprime."""
    if p.is_zero():
        raise ZeroPolynomial("squarefree decomposition of the zero polynomial")
    if p.degree == 0:
        return []
    dp = derivative(p)
    a = poly_gcd(p, dp)
    b = p // a
    c = dp // a
    d = c - derivative(b)
    out = []
    i = 1
    while b.degree > 0:
        a = poly_gcd(b, d)
        b = b // a
        c = d // a if not a.is_zero() else c
        d = c - derivative(b)
        if a.degree > 0:
            out.append((a.monic(), i))
        i += 1
    return out


def sturm_sequence(p: Polynomial) -> list[Polynomial]:
    seq = [p, derivative(p)]
    while not seq[-1].is_zero():
        r = seq[-2] % seq[-1]
        if r.is_zero():
            break
        # sequence members are rescaled by positive constants only
        seq.append(-r * (1 / abs(r.leading)))
    return seq


def _sign_variations(seq: Sequence[Polynomial], x: Fraction) -> int:
    signs = []
    for q in seq:
        v = evaluate(q, x, exact=True)
        if v != 0:
            signs.append(v > 0)
    return sum(1 for u, v in zip(signs, signs[1:]) if u != v)


def cauchy_bound(p: Polynomial) -> Fraction:
    lead = abs(p.leading)
    return 1 + max((abs(c) / lead for c in p.coeffs[:-1]), default=Fraction(0))


@dataclass(frozen=True)
class Root:
    value: float
    multiplicity: int
    lo: Fraction
    hi: Fraction

    @property
    def radius(self) -> float:
        return float(self.hi - self.lo) / 2


@dataclass(frozen=True)
class RootList:
    """Distinct real roots in increasing order with multiplicities."""

    entries: tuple[Root, ...]

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, i):
        return self.entries[i]

    @property
    def values(self) -> list[float]:
        return [r.value for r in self.entries]

    @property
    def multiplicities(self) -> list[int]:
        return [r.multiplicity for r in self.entries]


def _isolate(p: Polynomial, seq, lo: Fraction, hi: Fraction, out: list):
    """Collect isolating intervals (lo, hi] of the squarefree ``p``."""
    n = _sign_variations(seq, lo) - _sign_variations(seq, hi)
    if n == 0:
        return
    if n == 1:
        out.append((lo, hi))
        return
    mid = (lo + hi) / 2
    k = 3
    while evaluate(p, mid, exact=True) == 0:
        # keep split points off the roots so counts stay well defined
        mid = lo + (hi - lo) * Fraction(k, 2 * k + 1)
        k += 1
    _isolate(p, seq, lo, mid, out)
    _isolate(p, seq, mid, hi, out)


def _refine(p: Polynomial, lo: Fraction, hi: Fraction, tol: Fraction) -> tuple[Fraction, Fraction]:
    # root lies in (lo, hi]; p(lo) != 0
    if evaluate(p, hi, exact=True) == 0:
        return hi, hi
    s_lo = evaluate(p, lo, exact=True) > 0
    while hi - lo > tol:
        mid = (lo + hi) / 2
        v = evaluate(p, mid, exact=True)
        if v == 0:
            return mid, mid
        if (v > 0) == s_lo:
            lo = mid
        else:
            hi = mid
    return lo, hi


@lru_cache(maxsize=4096)
def real_roots(p: Polynomial, tol: Fraction = ROOT_TOL) -> RootList:
    """All real roots of ``p`` with multiplicities.

    Multiplicities come from the exact squarefree decomposition; each
    squarefree factor is isolated with Sturm sequences and refined by exact
    bisection to bracket width ``tol``.
    """
    if p.is_zero():
        raise ZeroPolynomial("real roots of the zero polynomial")
    roots = []
    for f, mult in squarefree_decomposition(p):
        seq = sturm_sequence(f)
        bound = Fraction(math.ceil(cauchy_bound(f)))
        brackets = []
        _isolate(f, seq, -bound, bound, brackets)
        for lo, hi in brackets:
            a, b = _refine(f, lo, hi, tol)
            if a == b:
                half = tol / 2
                roots.append(Root(float(a), mult, a - half, a + half))
            else:
                roots.append(Root(float((a + b) / 2), mult, a, b))
    roots.sort(key=lambda r: r.value)
    return RootList(tuple(roots))


def det(m: Sequence[Sequence]):
    """Cofactor-expansion determinant for small matrices of any ring elements."""
    n = len(m)
    if n == 1:
        return m[0][0]
    if n == 2:
        return m[0][0] * m[1][1] - m[0][1] * m[1][0]
    total = None
    for j in range(n):
        minor = [row[:j] + row[j + 1:] for row in m[1:]]
        term = m[0][j] * det(minor)
        if j % 2:
            term = -term
        total = term if total is None else total + term
    return total


class DegenerateCurve(ValueError):
    """The torsion polynomial vanishes identically."""


@dataclass(frozen=True)
class CurvePoly:
    """Polynomial curve t -> (P_1(t), ..., P_d(t)) with d in {2, 3}."""

    components: tuple[Polynomial, ...]

    def __post_init__(self):
        comps = tuple(c if isinstance(c, Polynomial) else Polynomial(tuple(c)) for c in self.components)
        object.__setattr__(self, "components", comps)
        if len(comps) not in (2, 3):
            raise ValueError(f"curve dimension must be 2 or 3, got {len(comps)}")
        degs = [c.degree for c in comps]
        if max(degs) < 1:
            raise ValueError("curve must be non-constant")
        if max(degs) > MAX_DEGREE:
            raise ValueError(f"component degree {max(degs)} exceeds cap {MAX_DEGREE}")

    @classmethod
    def from_coeffs(cls, coeff_lists: Iterable[Iterable]) -> "CurvePoly":
        return cls(tuple(Polynomial(tuple(as_fraction(c) for c in cl)) for cl in coeff_lists))

    @classmethod
    def model(cls, d: int) -> "CurvePoly":
        """The moment curve (t, t^2, ..., t^d)."""
        return cls(tuple(Polynomial.monomial(j) for j in range(1, d + 1)))

    @property
    def dim(self) -> int:
        return len(self.components)

    @property
    def degree(self) -> int:
        return max(c.degree for c in self.components)

    def __neg__(self):
        return CurvePoly(tuple(-c for c in self.components))

    def transform(self, matrix) -> "CurvePoly":
        """Apply a rational d x d matrix to the curve."""
        m = [[as_fraction(x) for x in row] for row in matrix]
        comps = []
        for row in m:
            acc = Polynomial()
            for a, c in zip(row, self.components):
                acc = acc + c * a
            comps.append(acc)
        return CurvePoly(tuple(comps))

    def reparametrize(self, a, c) -> "CurvePoly":
        """Curve t -> P(a t + c)."""
        sub = Polynomial((as_fraction(c), as_fraction(a)))
        return CurvePoly(tuple(compose(p, sub) for p in self.components))

    def derivative_matrix(self) -> list[list[Polynomial]]:
        """Rows are components, column j is the (j+1)-th derivative."""
        d = self.dim
        return [[derivative(p, j) for j in range(1, d + 1)] for p in self.components]

    @cached_property
    def torsion(self) -> Polynomial:
        return torsion_det(self)

    @cached_property
    def minors(self) -> tuple[Polynomial, ...]:
        return leading_minors(self)

    @cached_property
    def velocity(self) -> tuple[Polynomial, ...]:
        return tuple(derivative(p) for p in self.components)

    def __call__(self, t):
        return self.point(t)

    def point(self, t):
        if isinstance(t, np.ndarray):
            return np.stack([evaluate(p, t) for p in self.components], axis=-1)
        return np.array([evaluate(p, t) for p in self.components])

    def to_json(self) -> list[list[str]]:
        return [p.to_json() for p in self.components]


def compose(p: Polynomial, q: Polynomial) -> Polynomial:
    acc = Polynomial()
    for c in reversed(p.coeffs):
        acc = acc * q + c
    return acc


def torsion_det(P: CurvePoly) -> Polynomial:
    """L_P(t) = det(P'(t), ..., P^(d)(t)) as an exact polynomial."""
    return det(P.derivative_matrix())


def leading_minors(P: CurvePoly) -> tuple[Polynomial, ...]:
    """Leading principal minors D_1, ..., D_{d-1} of the derivative matrix."""
    m = P.derivative_matrix()
    return tuple(det([row[:j] for row in m[:j]]) for j in range(1, P.dim))


def jacobian_det(P: CurvePoly, pts: Sequence):
    """Raw det(P'(t_1), ..., P'(t_d)); no sign normalisation.

    Exact when every point is rational and ``exact`` evaluation is possible
    (Fractions or ints in, Fraction out); floats otherwise.
    """
    if len(pts) != P.dim:
        raise ValueError(f"need {P.dim} points, got {len(pts)}")
    exact = all(isinstance(t, (int, Fraction)) for t in pts)
    cols = [[evaluate(v, t, exact=exact) for v in P.velocity] for t in pts]
    # matrix with columns P'(t_j): row i holds component i
    return det([[cols[j][i] for j in range(P.dim)] for i in range(P.dim)])


def jacobian_det_array(P: CurvePoly, pts: np.ndarray) -> np.ndarray:
    """Vectorised :func:`jacobian_det` for an (n, d) array of parameter tuples."""
    d = P.dim
    # vel[n, i, j] = P_i'(t_j)
    vel = np.stack([np.stack([evaluate(v, pts[:, j]) for v in P.velocity], axis=-1) for j in range(d)], axis=-1)
    if d == 2:
        return vel[:, 0, 0] * vel[:, 1, 1] - vel[:, 0, 1] * vel[:, 1, 0]
    return (
        vel[:, 0, 0] * (vel[:, 1, 1] * vel[:, 2, 2] - vel[:, 1, 2] * vel[:, 2, 1])
        - vel[:, 0, 1] * (vel[:, 1, 0] * vel[:, 2, 2] - vel[:, 1, 2] * vel[:, 2, 0])
        + vel[:, 0, 2] * (vel[:, 1, 0] * vel[:, 2, 1] - vel[:, 1, 1] * vel[:, 2, 0])
    )


def critical_points(p: Polynomial) -> list[float]:
    """Distinct real roots of p' (empty for constant or linear p)."""
    dp = derivative(p)
    if dp.is_constant():
        return []
    return real_roots(dp).values


def squarefree_part(p: Polynomial) -> Polynomial:
    """p / gcd(p, p'): same distinct roots, all simple."""
    if p.degree < 1:
        return p
    return (p // poly_gcd(p, derivative(p))).monic()


@lru_cache(maxsize=4096)
def refine_root(p: Polynomial, root: Root, tol: Fraction = Fraction(1, 10**40)) -> Fraction:
    """Rational approximation of ``root`` accurate to ``tol``.

    Bisects the squarefree part of ``p`` inside the stored isolating bracket.
    """
    f = squarefree_part(p)
    if root.hi - root.lo <= tol or evaluate(f, root.lo, exact=True) == 0:
        mid = (root.lo + root.hi) / 2
        return root.lo if evaluate(f, root.lo, exact=True) == 0 else mid
    a, b = _refine(f, root.lo, root.hi, tol)
    return (a + b) / 2


def taylor_shift(p: Polynomial, c) -> Polynomial:
    """The polynomial h -> p(c + h)."""
    return compose(p, Polynomial((as_fraction(c), Fraction(1))))


def _divided_difference_array(p: Polynomial, pts: np.ndarray) -> np.ndarray:
    """p[t_1, ..., t_m] for each row of ``pts`` with m = pts.shape[1].

    For p = sum c_n t^n this is sum c_n h_{n-m+1}(t_1..t_m), with h_r the
    complete homogeneous symmetric polynomials; no differences of nearby
    values are formed.
    """
    n_rows, m = pts.shape
    cs = p.float_coeffs
    deg = len(cs) - 1
    if deg < m - 1:
        return np.zeros(n_rows)
    rmax = deg - m + 1
    # h[r] over the first i variables, built one variable at a time
    h = np.zeros((rmax + 1, n_rows))
    h[0] = 1.0
    for i in range(m):
        x = pts[:, i]
        for r in range(1, rmax + 1):
            h[r] = h[r] + x * h[r - 1]
    return sum(cs[r + m - 1] * h[r] for r in range(rmax + 1))


def jacobian_reduced_array(P: CurvePoly, pts: np.ndarray) -> np.ndarray:
    """det(P'(t_1), ..., P'(t_d)) divided by prod_{i<j} (t_j - t_i).

    Column m of the reduced matrix is the divided difference
    P'[t_1, ..., t_{m+1}], so the quotient is a polynomial in the t_j and is
    evaluated without cancellation near the diagonal.
    """
    pts = np.asarray(pts, dtype=float)
    d = P.dim
    M = np.empty((len(pts), d, d))
    for i, v in enumerate(P.velocity):
        for m in range(d):
            M[:, i, m] = _divided_difference_array(v, pts[:, : m + 1])
    return np.linalg.det(M) if len(pts) else np.zeros(0)
