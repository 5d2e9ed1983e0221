"""Local orthonormal frame at a singular point.

The right basis ``Q = [kernel | complement]`` splits the state offset
``x - x0 = Q u``; the left basis ``P`` splits equations the same way, so
that ``P^T A0 Q`` has the block form ``diag(0, A0_block)``.  Both bases are
chosen with ``det P = det Q`` which makes ``adj(P^T A Q) P^T b = Q^T adj(A) b``
and keeps ``det(P^T A Q) = det A``; every jet downstream can therefore be
taken straight from ``adj(A) b`` and ``det A``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BlockSingular, NotSingular, UnsupportedDefect
from .model import ImplicitOdeModel, SystemJets
from .taylor import Jet2, linear_combination

DEFAULT_TOL = 1e-9


def _fix_sign(v: np.ndarray) -> np.ndarray:
    i = int(np.argmax(np.abs(v) - 1e-12 * np.arange(len(v))))  # first index on ties
    return v if v[i] >= 0 else -v


def detect_defect(A0, tol: float = DEFAULT_TOL) -> tuple[int, np.ndarray]:
    """Numerical rank defect of ``A0`` and an orthonormal kernel basis.

    Raises :class:`NotSingular` for defect 0 and :class:`UnsupportedDefect`
    for defect 3 or more.
    """
    A0 = np.atleast_2d(np.asarray(A0, dtype=float))
    n = A0.shape[0]
    _, s, Vt = np.linalg.svd(A0)
    smax = s[0] if s.size else 0.0
    rank = int(np.sum(s > tol * max(smax, 1.0))) if smax > 0 else 0
    defect = n - rank
    if defect == 0:
        raise NotSingular(f"A is nonsingular at the point (smallest singular value {s[-1]:.3g})")
    if defect >= 3:
        raise UnsupportedDefect(defect)
    kernel = Vt[rank:].T.copy()
    for j in range(kernel.shape[1]):
        kernel[:, j] = _fix_sign(kernel[:, j])
    return defect, kernel


def _left_kernel(A0, defect) -> np.ndarray:
    U, _, _ = np.linalg.svd(A0)
    return U[:, A0.shape[0] - defect:].copy()


def complete_basis(kernel: np.ndarray) -> np.ndarray:
    """Orthonormal complement by modified Gram-Schmidt over coordinate axes,
    taken in order of decreasing residual against the kernel."""
    n, k = kernel.shape
    axes = np.eye(n)
    resid = np.linalg.norm(axes - kernel @ (kernel.T @ axes), axis=0)
    order = sorted(range(n), key=lambda i: (-round(resid[i], 12), i))
    basis = [kernel[:, j] for j in range(k)]
    comp = []
    for i in order:
        if len(comp) == n - k:
            break
        v = axes[:, i].copy()
        for b in basis:
            v -= (b @ v) * b
        norm = np.linalg.norm(v)
        if norm < 1e-8:
            continue
        v /= norm
        basis.append(v)
        comp.append(v)
    return np.array(comp).T.reshape(n, n - k)


def jet_to_frame(jet: Jet2, Q: np.ndarray) -> Jet2:
    """Re-express a jet over ``(x, t)`` in frame coordinates ``(u, tau)``."""
    n = Q.shape[0]
    M = np.zeros((n + 1, n + 1))
    M[:n, :n] = Q
    M[n, n] = 1.0
    return Jet2(jet.value, M.T @ jet.grad, M.T @ jet.hess @ M)


@dataclass(frozen=True)
class SingularFrame:
    x0: np.ndarray
    t0: float
    defect: int
    Q: np.ndarray  # columns: kernel then complement
    P: np.ndarray  # left basis, same layout
    A0: np.ndarray
    A0_block: np.ndarray
    det_block: float
    inv_block: np.ndarray
    D_jet: Jet2  # det A over frame coordinates (u, tau)
    scale: float
    tol: float
    system: SystemJets

    @property
    def n(self) -> int:
        return self.Q.shape[0]

    @property
    def kernel(self) -> np.ndarray:
        return self.Q[:, : self.defect]

    @property
    def complement(self) -> np.ndarray:
        return self.Q[:, self.defect:]

    @property
    def left_kernel(self) -> np.ndarray:
        return self.P[:, : self.defect]

    def to_frame(self, jet: Jet2) -> Jet2:
        return jet_to_frame(jet, self.Q)

    def field_jets(self) -> list[Jet2]:
        """``Q^T adj(A) b`` as jets over frame coordinates."""
        V = self.system.field()
        out = []
        for k in range(self.n):
            out.append(self.to_frame(linear_combination(self.Q[:, k], V)))
        return out

    def gram_residual(self) -> float:
        return float(max(np.abs(self.Q.T @ self.Q - np.eye(self.n)).max(), np.abs(self.P.T @ self.P - np.eye(self.n)).max()))


def build_frame(model: ImplicitOdeModel, x0, t0: float, tol: float = DEFAULT_TOL) -> SingularFrame:
    x0 = np.asarray(x0, dtype=float)
    sysj = model.eval_system(x0, t0)
    A0 = sysj.A.val
    n = model.n
    defect, N = detect_defect(A0, tol)
    L = _left_kernel(A0, defect)

    if defect == 2:
        # rotate the kernel pair so the quadratic part of det A is diagonal
        Hk = N.T @ sysj.det.hess[:n, :n] @ N
        w, R = np.linalg.eigh(0.5 * (Hk + Hk.T))
        R = R[:, np.argsort(-w)]
        N = N @ R
        for j in range(2):
            N[:, j] = _fix_sign(N[:, j])

    # align the left kernel with the right one (identical for symmetric A0)
    Uw, _, Vw = np.linalg.svd(L.T @ N)
    L = L @ (Uw @ Vw)

    Q = np.hstack([N, complete_basis(N)])
    P = np.hstack([L, complete_basis(L)])
    if np.linalg.det(P) * np.linalg.det(Q) < 0:
        P[:, -1] = -P[:, -1]

    T = P.T @ A0 @ Q
    block = T[defect:, defect:]
    det_block = float(np.linalg.det(block)) if block.size else 1.0
    scale = max(abs(det_block), float(np.linalg.norm(A0, 2)) if n else 0.0, 1.0)
    if abs(det_block) <= tol:
        raise BlockSingular(f"|det A0_block| = {abs(det_block):.3g} <= tol")
    # same-basis block: singular exactly when the kernel sits in a Jordan chain
    Qc = Q[:, defect:]
    same = float(np.linalg.det(Qc.T @ A0 @ Qc)) if Qc.size else 1.0
    if abs(same) <= tol * scale:
        raise BlockSingular(f"complement block of A0 in the kernel frame is singular (det {same:.3g}); Jordan-chain kernels are not supported")
    inv_block = np.linalg.inv(block) if block.size else np.zeros((0, 0))

    return SingularFrame(
        x0=x0,
        t0=float(t0),
        defect=defect,
        Q=Q,
        P=P,
        A0=A0,
        A0_block=block,
        det_block=det_block,
        inv_block=inv_block,
        D_jet=jet_to_frame(sysj.det, Q),
        scale=scale,
        tol=tol,
        system=sysj,
    )


@dataclass(frozen=True)
class TransformedRhs:
    C: list  # defect jets, <left kernel vector, b>
    d: list  # n - defect jets

    @property
    def C0(self) -> np.ndarray:
        return np.array([c.value for c in self.C])

    @property
    def d0(self) -> np.ndarray:
        return np.array([v.value for v in self.d])


def transform_rhs(frame: SingularFrame, model: ImplicitOdeModel | None = None) -> TransformedRhs:
    b = frame.system.b
    jets = [frame.to_frame(linear_combination(frame.P[:, k], b)) for k in range(frame.n)]
    return TransformedRhs(jets[: frame.defect], jets[frame.defect:])
