"""Real roots of low-degree polynomials via Sturm sequences.

Coefficients are stored in ascending degree.  Roots are isolated by
bisection on Sturm counts and polished with bisection-safeguarded Newton;
no closed-form cubic or quartic formulas are used.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

ZERO_REL = 1e-14
STURM_ZERO_REL = 1e-13


def _two_sum(a: float, b: float) -> tuple[float, float]:
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


_SPLIT = 134217729.0  # 2**27 + 1


def _two_prod(a: float, b: float) -> tuple[float, float]:
    p = a * b
    t = _SPLIT * a
    ah = t - (t - a)
    al = a - ah
    t = _SPLIT * b
    bh = t - (t - b)
    bl = b - bh
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


class Polynomial:
    """Real polynomial, coefficients ascending by degree."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs):
        c = np.atleast_1d(np.asarray(coeffs, dtype=float)).copy()
        big = np.max(np.abs(c)) if c.size else 0.0
        k = len(c)
        while k > 1 and abs(c[k - 1]) <= ZERO_REL * big:
            k -= 1
        if k == 1 and c.size and abs(c[0]) <= ZERO_REL * big:
            c = c[:1]
        self.coeffs = c[:k] if c.size else np.zeros(1)

    @property
    def degree(self) -> int:
        if len(self.coeffs) == 1 and self.coeffs[0] == 0.0:
            return -1
        return len(self.coeffs) - 1

    @property
    def scale(self) -> float:
        return float(np.max(np.abs(self.coeffs)))

    def __call__(self, x: float) -> float:
        """Compensated Horner evaluation."""
        c = self.coeffs
        s = float(c[-1])
        err = 0.0
        for a in c[-2::-1]:
            p, pe = _two_prod(s, x)
            s, se = _two_sum(p, float(a))
            err = err * x + (pe + se)
        return s + err

    def deriv(self) -> "Polynomial":
        if len(self.coeffs) == 1:
            return Polynomial([0.0])
        return Polynomial(self.coeffs[1:] * np.arange(1, len(self.coeffs)))

    def divmod(self, other: "Polynomial") -> tuple["Polynomial", "Polynomial"]:
        num = self.coeffs.astype(float).copy()
        den = other.coeffs
        dn = len(den) - 1
        if dn < 0 or other.degree < 0:
            raise ZeroDivisionError("polynomial division by zero")
        if len(num) - 1 < dn:
            return Polynomial([0.0]), Polynomial(num)
        q = np.zeros(len(num) - dn)
        for k in range(len(num) - 1, dn - 1, -1):
            f = num[k] / den[-1]
            q[k - dn] = f
            num[k - dn : k + 1] -= f * den
            num[k] = 0.0
        return Polynomial(q), Polynomial(num[:dn] if dn > 0 else [0.0])

    def __repr__(self) -> str:
        return f"Polynomial({list(self.coeffs)})"


def sturm_sequence(p: Polynomial) -> list[Polynomial]:
    """``p, p', -rem(...)`` down to the (numerical) gcd of ``p`` and ``p'``."""
    if p.degree < 1:
        return [p]
    seq = [p, p.deriv()]
    scale = p.scale
    while seq[-1].degree > 0:
        _, r = seq[-2].divmod(seq[-1])
        if r.scale <= STURM_ZERO_REL * scale or r.degree < 0:
            break
        seq.append(Polynomial(-r.coeffs))
    return seq


def _sign_changes(values) -> int:
    signs = [v for v in values if v != 0.0]
    return sum(1 for a, b in zip(signs, signs[1:]) if (a > 0) != (b > 0))


def _values_at(seq, x: float) -> list[float]:
    if math.isinf(x):
        out = []
        for q in seq:
            lead = q.coeffs[-1]
            if x < 0 and q.degree % 2 == 1:
                lead = -lead
            out.append(lead)
        return out
    return [q(x) for q in seq]


def count_real_roots(p: Polynomial, lo: float = -math.inf, hi: float = math.inf, seq=None) -> int:
    """Number of distinct real roots in ``(lo, hi)``."""
    if not isinstance(p, Polynomial):
        p = Polynomial(p)
    if p.degree < 1:
        return 0
    if lo >= hi:
        raise ValueError("count_real_roots needs lo < hi")
    seq = seq or sturm_sequence(p)
    eps = 1e-12 * max(1.0, p.scale)
    if not math.isinf(lo) and p(lo) == 0.0:
        lo += eps * max(1.0, abs(lo))
    if not math.isinf(hi) and p(hi) == 0.0:
        hi -= eps * max(1.0, abs(hi))
    return _sign_changes(_values_at(seq, lo)) - _sign_changes(_values_at(seq, hi))


def root_bound(p: Polynomial) -> float:
    c = p.coeffs
    return 1.0 + float(np.max(np.abs(c[:-1] / c[-1]))) if len(c) > 1 else 1.0


def _refine(q: Polynomial, dq: Polynomial, a: float, b: float, tol: float) -> float:
    fa = q(a)
    x = 0.5 * (a + b)
    for _ in range(200):
        fx = q(x)
        if fx == 0.0:
            return x
        if (fx > 0) == (fa > 0):
            a, fa = x, fx
        else:
            b = x
        width = b - a
        d = dq(x)
        xn = x - fx / d if d != 0.0 else None
        if xn is None or not (a < xn < b):
            xn = 0.5 * (a + b)
        if width <= max(tol, 4 * np.spacing(abs(x))) or abs(xn - x) <= 0.25 * max(tol, np.spacing(abs(x))):
            return xn
        x = xn
    return x


@dataclass(frozen=True)
class Root:
    value: float
    multiplicity: int


def _gcd_tail(p: Polynomial) -> Polynomial:
    seq = sturm_sequence(p)
    return seq[-1]


def _multiplicity(p: Polynomial, r: float, width: float) -> int:
    m = 1
    g = _gcd_tail(p)
    while g.degree >= 1 and count_real_roots(g, r - width, r + width) > 0:
        m += 1
        g = _gcd_tail(g)
    return m


def real_roots_with_multiplicity(p, tol: float = 1e-12) -> list[Root]:
    if not isinstance(p, Polynomial):
        p = Polynomial(p)
    if p.degree < 1:
        return []
    if p.degree > 6:
        raise ValueError("real_roots supports degree <= 6")
    g = _gcd_tail(p)
    q = p.divmod(g)[0] if g.degree >= 1 else p
    seq = sturm_sequence(q)
    dq = q.deriv()
    B = root_bound(q)
    roots: list[float] = []
    stack = [(-B, B, count_real_roots(q, -B, B, seq))]
    while stack:
        a, b, k = stack.pop()
        if k == 0:
            continue
        if k == 1 and (q(a) > 0) != (q(b) > 0) and q(a) != 0.0 and q(b) != 0.0:
            roots.append(_refine(q, dq, a, b, tol))
            continue
        mid = 0.5 * (a + b)
        if b - a <= max(tol, 4 * np.spacing(abs(mid))):
            roots.append(mid)
            continue
        if q(mid) == 0.0:
            roots.append(mid)
            mid_lo, mid_hi = mid - 1e-3 * (b - a), mid + 1e-3 * (b - a)
            stack.append((a, mid_lo, count_real_roots(q, a, mid_lo, seq)))
            stack.append((mid_hi, b, count_real_roots(q, mid_hi, b, seq)))
            continue
        stack.append((a, mid, count_real_roots(q, a, mid, seq)))
        stack.append((mid, b, count_real_roots(q, mid, b, seq)))
    roots.sort()
    width = max(1e-6, 1e3 * tol) * max(1.0, B)
    return [Root(r, _multiplicity(p, r, width) if g.degree >= 1 else 1) for r in roots]


def real_roots(p, tol: float = 1e-12) -> list[float]:
    """Sorted distinct real roots."""
    return [r.value for r in real_roots_with_multiplicity(p, tol)]


def quartic_R(a1: float, a0: float) -> float:
    """``a1^4 - (256/27) a0^3``; its sign gives the number of real roots of
    ``chi^4 + a1 chi + a0`` (negative: 0, zero: 1, positive: 2)."""
    return a1**4 - (256.0 / 27.0) * a0**3
