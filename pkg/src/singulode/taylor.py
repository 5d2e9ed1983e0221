"""Second-order multivariate jets and division-free determinant/adjugate.

A :class:`Jet2` carries the truncated Taylor expansion ``value + grad.h +
h.hess.h / 2`` of a scalar function at a point.  Arithmetic on jets is
exact through second order, so any function built from the model
expressions comes with its gradient and Hessian for free.

:class:`JetMatrix` stores a grid of jets as three stacked arrays so that
matrix products stay vectorised; indexing returns ordinary ``Jet2``
objects.
"""
from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionCap, DivisionByZero, DomainError

DIVISION_FLOOR = 1e-300
MAX_DIM = 10


class Jet2:
    __slots__ = ("value", "grad", "hess")

    def __init__(self, value, grad, hess):
        self.value = float(value)
        self.grad = np.asarray(grad, dtype=float)
        hess = np.asarray(hess, dtype=float)
        # symmetrise on write
        self.hess = 0.5 * (hess + hess.T)

    @classmethod
    def _raw(cls, value, grad, hess):
        # caller guarantees symmetry
        obj = cls.__new__(cls)
        obj.value = float(value)
        obj.grad = grad
        obj.hess = hess
        return obj

    @classmethod
    def constant(cls, c, m: int) -> "Jet2":
        return cls._raw(c, np.zeros(m), np.zeros((m, m)))

    @property
    def m(self) -> int:
        return self.grad.shape[0]

    def __repr__(self):
        return f"Jet2(value={self.value!r}, grad={self.grad.tolist()!r}, hess={self.hess.tolist()!r})"

    def _coerce(self, other) -> "Jet2":
        if isinstance(other, Jet2):
            if other.m != self.m:
                raise ValueError(f"jet size mismatch: {self.m} vs {other.m}")
            return other
        return Jet2.constant(other, self.m)

    # arithmetic -----------------------------------------------------
    def __add__(self, other):
        if not isinstance(other, Jet2):
            return Jet2._raw(self.value + other, self.grad, self.hess)
        o = self._coerce(other)
        return Jet2._raw(self.value + o.value, self.grad + o.grad, self.hess + o.hess)

    __radd__ = __add__

    def __neg__(self):
        return Jet2._raw(-self.value, -self.grad, -self.hess)

    def __pos__(self):
        return self

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Jet2):
            c = float(other)
            return Jet2._raw(self.value * c, self.grad * c, self.hess * c)
        o = self._coerce(other)
        cross = np.outer(self.grad, o.grad)
        return Jet2._raw(
            self.value * o.value,
            self.grad * o.value + o.grad * self.value,
            self.hess * o.value + o.hess * self.value + cross + cross.T,
        )

    __rmul__ = __mul__

    def reciprocal(self) -> "Jet2":
        v = self.value
        if abs(v) < DIVISION_FLOOR:
            raise DivisionByZero(f"jet division by {v!r}")
        return self._chain(1.0 / v, -1.0 / v**2, 2.0 / v**3)

    def __truediv__(self, other):
        if not isinstance(other, Jet2):
            c = float(other)
            if abs(c) < DIVISION_FLOOR:
                raise DivisionByZero(f"jet division by {c!r}")
            return Jet2._raw(self.value / c, self.grad / c, self.hess / c)
        return self._quotient(self._coerce(other))

    def __rtruediv__(self, other):
        return self._coerce(other)._quotient(self)

    def _quotient(self, d: "Jet2") -> "Jet2":
        # quotient rule on (value, grad, hess); the value is a plain float division
        v = d.value
        if abs(v) < DIVISION_FLOOR:
            raise DivisionByZero(f"jet division by {v!r}")
        q = self.value / v
        gq = (self.grad - q * d.grad) / v
        cross = np.outer(gq, d.grad)
        return Jet2._raw(q, gq, (self.hess - q * d.hess - cross - cross.T) / v)

    def __pow__(self, p):
        return self.pow_const(p)

    # elementary functions ------------------------------------------
    def _chain(self, f0, f1, f2) -> "Jet2":
        g = self.grad
        return Jet2._raw(f0, f1 * g, f1 * self.hess + f2 * np.outer(g, g))

    def exp(self):
        e = math.exp(self.value)
        return self._chain(e, e, e)

    def log(self):
        v = self.value
        if v <= 0.0:
            raise DomainError("log", v)
        return self._chain(math.log(v), 1.0 / v, -1.0 / v**2)

    def sin(self):
        s, c = math.sin(self.value), math.cos(self.value)
        return self._chain(s, c, -s)

    def cos(self):
        s, c = math.sin(self.value), math.cos(self.value)
        return self._chain(c, -s, -c)

    def sqrt(self):
        v = self.value
        if v <= 0.0:
            raise DomainError("sqrt", v)
        r = math.sqrt(v)
        return self._chain(r, 0.5 / r, -0.25 / (r * v))

    def pow_const(self, p) -> "Jet2":
        p = float(p)
        v = self.value
        if p == 0.0:
            return Jet2.constant(1.0, self.m)
        if p == 1.0:
            return self
        if p.is_integer():
            k = int(p)
            if k < 0 and abs(v) < DIVISION_FLOOR:
                raise DivisionByZero(f"{v!r} ** {k}")
            f1 = k * v ** (k - 1) if k != 1 else 1.0
            f2 = k * (k - 1) * v ** (k - 2) if k not in (0, 1) else 0.0
            return self._chain(v**k, f1, f2)
        if v <= 0.0:
            raise DomainError(f"pow(., {p})", v)
        return self._chain(v**p, p * v ** (p - 1), p * (p - 1) * v ** (p - 2))

    # composition ----------------------------------------------------
    def compose(self, inner: Sequence["Jet2"]) -> "Jet2":
        """Jet of ``f(inner(v))`` where ``self`` is the jet of ``f`` at
        ``inner(0)``.  The inner map must be centred (the expansion point of
        ``self`` is the image of the new origin), so its values are ignored.
        """
        G = np.array([j.grad for j in inner])  # (m_self, m_new)
        hess = G.T @ self.hess @ G
        for gk, jk in zip(self.grad, inner):
            if gk != 0.0:
                hess = hess + gk * jk.hess
        return Jet2._raw(self.value, G.T @ self.grad, 0.5 * (hess + hess.T))

    def taylor(self, h) -> float:
        """Evaluate the quadratic model at offset ``h``."""
        h = np.asarray(h, dtype=float)
        return self.value + self.grad @ h + 0.5 * h @ self.hess @ h


def jet_variable(index: int, value, m: int) -> Jet2:
    if not 0 <= index < m:
        raise IndexError(f"variable index {index} out of range for m={m}")
    g = np.zeros(m)
    g[index] = 1.0
    return Jet2._raw(value, g, np.zeros((m, m)))


def jet_arith(a: Jet2, b: Jet2, kind: str) -> Jet2:
    ops = {"add": a.__add__, "sub": a.__sub__, "mul": a.__mul__, "div": a.__truediv__}
    return ops[kind](b)


def jet_unary(a: Jet2, kind: str, p=None) -> Jet2:
    if kind == "neg":
        return -a
    if kind == "pow_const":
        return a.pow_const(p)
    return getattr(a, kind)()


def linear_combination(coeffs, jets: Sequence[Jet2]) -> Jet2:
    m = jets[0].m
    value = 0.0
    grad = np.zeros(m)
    hess = np.zeros((m, m))
    for c, j in zip(coeffs, jets):
        if c == 0.0:
            continue
        value += c * j.value
        grad = grad + c * j.grad
        hess = hess + c * j.hess
    return Jet2._raw(value, grad, hess)


def inverse_map(phi: Sequence[Jet2]) -> list[Jet2]:
    """Second-order jet of the inverse of a centred map ``u -> phi(u)``.

    Returns jets over the new coordinates ``v`` giving ``u_k(v)``.
    """
    J = np.array([p.grad for p in phi])
    Jinv = np.linalg.inv(J)
    m = J.shape[0]
    # second derivative of phi pulled back to v-coordinates
    pulled = np.array([Jinv.T @ p.hess @ Jinv for p in phi])  # (m, m, m)
    out = []
    for k in range(m):
        hk = -np.einsum("l,lab->ab", Jinv[k], pulled)
        out.append(Jet2._raw(0.0, Jinv[k].copy(), 0.5 * (hk + hk.T)))
    return out


class JetMatrix:
    """Rectangular grid of jets sharing one variable count ``m``."""

    __slots__ = ("val", "grad", "hess")

    def __init__(self, val, grad, hess):
        self.val = np.asarray(val, dtype=float)
        self.grad = np.asarray(grad, dtype=float)
        self.hess = np.asarray(hess, dtype=float)

    @classmethod
    def from_jets(cls, rows: Iterable[Iterable[Jet2]]) -> "JetMatrix":
        rows = [list(r) for r in rows]
        m = rows[0][0].m
        if any(j.m != m for r in rows for j in r):
            raise ValueError("all entries of a JetMatrix must share m")
        val = np.array([[j.value for j in r] for r in rows])
        grad = np.array([[j.grad for j in r] for r in rows])
        hess = np.array([[j.hess for j in r] for r in rows])
        return cls(val, grad, hess)

    @classmethod
    def constant(cls, array, m: int) -> "JetMatrix":
        a = np.atleast_2d(np.asarray(array, dtype=float))
        r, c = a.shape
        return cls(a, np.zeros((r, c, m)), np.zeros((r, c, m, m)))

    @classmethod
    def identity(cls, n: int, m: int) -> "JetMatrix":
        return cls.constant(np.eye(n), m)

    @property
    def shape(self):
        return self.val.shape

    @property
    def m(self) -> int:
        return self.grad.shape[-1]

    def __getitem__(self, ij) -> Jet2:
        i, j = ij
        return Jet2._raw(self.val[i, j], self.grad[i, j].copy(), self.hess[i, j].copy())

    def rows(self) -> list[list[Jet2]]:
        r, c = self.shape
        return [[self[i, j] for j in range(c)] for i in range(r)]

    def __add__(self, other: "JetMatrix") -> "JetMatrix":
        return JetMatrix(self.val + other.val, self.grad + other.grad, self.hess + other.hess)

    def __sub__(self, other: "JetMatrix") -> "JetMatrix":
        return JetMatrix(self.val - other.val, self.grad - other.grad, self.hess - other.hess)

    def scale(self, c: float) -> "JetMatrix":
        return JetMatrix(self.val * c, self.grad * c, self.hess * c)

    def __matmul__(self, other: "JetMatrix") -> "JetMatrix":
        A, B = self, other
        val = A.val @ B.val
        grad = np.einsum("ika,kj->ija", A.grad, B.val) + np.einsum("ik,kja->ija", A.val, B.grad)
        cross = np.einsum("ika,kjb->ijab", A.grad, B.grad)
        hess = (
            np.einsum("ikab,kj->ijab", A.hess, B.val)
            + np.einsum("ik,kjab->ijab", A.val, B.hess)
            + cross
            + cross.transpose(0, 1, 3, 2)
        )
        return JetMatrix(val, grad, hess)

    def matvec(self, vec: Sequence[Jet2]) -> list[Jet2]:
        col = JetMatrix.from_jets([[v] for v in vec])
        out = self @ col
        return [out[i, 0] for i in range(out.shape[0])]

    def trace(self) -> Jet2:
        return Jet2._raw(
            np.trace(self.val),
            np.einsum("iia->a", self.grad),
            np.einsum("iiab->ab", self.hess),
        )

    def add_diagonal(self, c: Jet2) -> "JetMatrix":
        n = self.shape[0]
        val, grad, hess = self.val.copy(), self.grad.copy(), self.hess.copy()
        idx = np.arange(n)
        val[idx, idx] += c.value
        grad[idx, idx] += c.grad
        hess[idx, idx] += c.hess
        return JetMatrix(val, grad, hess)

    def linear_transform(self, left: np.ndarray | None = None, right: np.ndarray | None = None) -> "JetMatrix":
        """Constant-matrix product ``left @ self @ right``."""
        val, grad, hess = self.val, self.grad, self.hess
        if left is not None:
            val = left @ val
            grad = np.einsum("ik,kja->ija", left, grad)
            hess = np.einsum("ik,kjab->ijab", left, hess)
        if right is not None:
            val = val @ right
            grad = np.einsum("ika,kj->ija", grad, right)
            hess = np.einsum("ikab,kj->ijab", hess, right)
        return JetMatrix(val, grad, hess)


def det_adjugate(M: JetMatrix) -> tuple[Jet2, JetMatrix]:
    """Determinant and adjugate by the Faddeev-LeVerrier recursion.

    Only integer divisions occur, so the recursion is safe exactly where
    elimination would pivot on a vanishing jet.
    """
    n, n2 = M.shape
    if n != n2:
        raise ValueError("det_adjugate needs a square matrix")
    if n > MAX_DIM:
        raise DimensionCap(f"n={n} exceeds the cap of {MAX_DIM}")
    m = M.m
    Mk = JetMatrix.identity(n, m)  # M_1 = I
    for k in range(1, n + 1):
        AM = M @ Mk
        c = AM.trace() * (-1.0 / k)
        if k == n:
            break
        Mk = AM.add_diagonal(c)
    det = c * (-1.0) ** n
    adj = Mk.scale((-1.0) ** (n - 1))
    return det, adj


def det_adjugate_values(A: np.ndarray) -> tuple[float, np.ndarray]:
    """Plain-float counterpart of :func:`det_adjugate`."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    if n > MAX_DIM:
        raise DimensionCap(f"n={n} exceeds the cap of {MAX_DIM}")
    Mk = np.eye(n)
    c = 1.0
    for k in range(1, n + 1):
        AM = A @ Mk
        c = -np.trace(AM) / k
        if k == n:
            break
        Mk = AM + c * np.eye(n)
    return (-1.0) ** n * c, (-1.0) ** (n - 1) * Mk
