"""Constants of the reduced equations, read off second-order jets.

With ``D = det A`` and ``V = Q^T adj(A) b`` the system becomes
``D u' = V(u, tau)`` in frame coordinates.  Along solutions the singular
coordinate obeys ``D D' = G`` with ``G = <grad_x D, adj(A) b> + D dD/dt``.
Replacing one frame coordinate by ``y = D`` (a nonlinear change of
variables handled exactly at second order by :func:`inverse_map`) turns
``G``, ``V`` into the reduced right-hand sides whose Taylor coefficients
are the constants used by the classifier.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InconsistentReduction
from .frame import SingularFrame, TransformedRhs, transform_rhs
from .model import ImplicitOdeModel
from .taylor import Jet2, inverse_map, jet_variable


@dataclass(frozen=True)
class Chart:
    """Map from reduced coordinates ``v`` (last entry ``tau``) back to ``x``.

    ``psi[k]`` is the second-order jet of frame coordinate ``u_k`` as a
    function of ``v``.
    """

    x0: np.ndarray
    t0: float
    Q: np.ndarray
    psi: tuple
    names: tuple

    def frame_coords(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        return np.array([p.taylor(v) for p in self.psi])

    def to_x(self, v) -> np.ndarray:
        u = self.frame_coords(v)
        n = self.Q.shape[0]
        return self.x0 + self.Q @ u[:n]


@dataclass(frozen=True)
class SplitCoeffs:
    """Second split (``r = 0``): coordinates ``(y~, y, z, tau)``."""

    r_hat: float
    y_hat_index: int  # complement index replaced by y
    a_tilde: float
    a: float
    b_vec: np.ndarray
    b_t: float
    alpha_tilde: float
    alpha: float
    beta: np.ndarray
    gamma: float
    alpha_hat: float
    W_ytilde: np.ndarray  # coefficient of y~ in the z-equation, equals C0 * g
    G_vec: np.ndarray  # coefficient of y in the z-equation
    K: float  # constant term of the y~-equation, C0 * det(A0_block)
    C0: float

    @property
    def g_vec(self) -> np.ndarray:
        if self.C0 == 0.0:
            return np.zeros_like(self.W_ytilde)
        return self.W_ytilde / self.C0


@dataclass(frozen=True)
class ReducedCoeffs1:
    r: float
    C0: float
    det_block: float
    d0: np.ndarray
    K: float  # V_0 at the point; C0 * det_block
    F0: float
    g0: np.ndarray
    alpha: float
    beta: np.ndarray
    gamma: float
    W_z: np.ndarray  # linear z-block of the z-equation (Delta * C0)
    W_t: np.ndarray  # linear t-block of the z-equation (theta * C0)
    A0inv_d0: np.ndarray
    scale: float
    chart: Chart
    G_jet: Jet2  # G over the reduced coordinates
    split: Optional[SplitCoeffs] = None


@dataclass(frozen=True)
class ReducedCoeffs2:
    lambda1: float
    lambda2: float
    lambda12: float  # residual cross term, ~0 after rotation
    C1_0: float
    C2_0: float
    d0: np.ndarray
    A0inv_d0: np.ndarray
    a1: float
    b1: float
    a2: float
    b2: float
    g11: np.ndarray
    g12: np.ndarray
    g22: np.ndarray
    det_block: float
    scale: float
    chart: Chart
    const_terms: np.ndarray = field(default_factory=lambda: np.zeros(2))


def _G_jet_x(frame: SingularFrame, model: ImplicitOdeModel) -> Jet2:
    sysj = frame.system
    n = frame.n
    Vx = sysj.field()
    dD = model.det_gradient_jets(frame.x0, frame.t0, sysj.adj)
    G = sysj.det * dD[n]
    for i in range(n):
        G = G + dD[i] * Vx[i]
    return G


def G_jet(frame: SingularFrame, model: ImplicitOdeModel) -> Jet2:
    """``dD/ds`` along the desingularised field, over frame coordinates."""
    return frame.to_frame(_G_jet_x(frame, model))


def _replace_with_D(D: Jet2, slot: int) -> list[Jet2]:
    m = D.m
    phi = [jet_variable(k, 0.0, m) for k in range(m)]
    phi[slot] = Jet2(0.0, D.grad, D.hess)
    return phi


def _identity_chart(frame, names) -> Chart:
    m = frame.n + 1
    psi = tuple(jet_variable(k, 0.0, m) for k in range(m))
    return Chart(frame.x0, frame.t0, frame.Q, psi, tuple(names))


def extract_defect1(frame: SingularFrame, model: ImplicitOdeModel, rhs: TransformedRhs | None = None) -> ReducedCoeffs1:
    if frame.defect != 1:
        raise ValueError("extract_defect1 needs a defect-1 frame")
    if rhs is None:
        rhs = transform_rhs(frame)
    n = frame.n
    tol = frame.tol * frame.scale
    D = frame.D_jet
    V = frame.field_jets()
    G = G_jet(frame, model)
    C0 = float(rhs.C0[0])
    d0 = rhs.d0
    K = V[0].value
    A0inv_d0 = frame.inv_block @ d0 if n > 1 else np.zeros(0)
    r = float(D.grad[0])

    if abs(r) > tol:
        psi = inverse_map(_replace_with_D(D, 0))
        Gv = G.compose(psi)
        W = [V[k].compose(psi) for k in range(1, n)]
        names = ("y",) + tuple(f"z{k}" for k in range(1, n)) + ("tau",)
        chart = Chart(frame.x0, frame.t0, frame.Q, tuple(psi), names)
        return ReducedCoeffs1(
            r=r, C0=C0, det_block=frame.det_block, d0=d0, K=K,
            F0=Gv.value,
            g0=np.array([w.grad[0] for w in W]),
            alpha=float(Gv.grad[0]),
            beta=Gv.grad[1:n].copy(),
            gamma=float(Gv.grad[n]),
            W_z=np.array([w.grad[1:n] for w in W]).reshape(n - 1, n - 1),
            W_t=np.array([w.grad[n] for w in W]),
            A0inv_d0=A0inv_d0, scale=frame.scale, chart=chart, G_jet=Gv,
        )

    # r = 0: replace the complement direction with the largest |dD/dz_i| by y
    comp_grad = D.grad[1:n]
    if comp_grad.size == 0 or np.max(np.abs(comp_grad)) <= tol:
        chart = _identity_chart(frame, ("y~",) + tuple(f"z{k}" for k in range(1, n)) + ("tau",))
        return ReducedCoeffs1(
            r=r, C0=C0, det_block=frame.det_block, d0=d0, K=K, F0=G.value,
            g0=np.zeros(n - 1), alpha=np.nan, beta=np.full(n - 1, np.nan), gamma=np.nan,
            W_z=np.zeros((n - 1, n - 1)), W_t=np.zeros(n - 1), A0inv_d0=A0inv_d0,
            scale=frame.scale, chart=chart, G_jet=G,
            split=SplitCoeffs(
                r_hat=float(comp_grad.max(initial=0.0)), y_hat_index=-1, a_tilde=np.nan, a=np.nan,
                b_vec=np.zeros(0), b_t=np.nan, alpha_tilde=np.nan, alpha=np.nan, beta=np.zeros(0),
                gamma=np.nan, alpha_hat=np.nan, W_ytilde=np.zeros(0), G_vec=np.zeros(0), K=K, C0=C0,
            ),
        )
    j = int(np.argmax(np.abs(comp_grad)))
    slot = 1 + j
    zi = [k for k in range(1, n) if k != slot]
    psi = inverse_map(_replace_with_D(D, slot))
    Pv = V[0].compose(psi)
    Gv = G.compose(psi)
    W = [V[k].compose(psi) for k in zi]
    names = ["y~"] + [""] * (n - 1) + ["tau"]
    names[slot] = "y"
    for c, k in enumerate(zi, start=1):
        names[k] = f"z{c}"
    chart = Chart(frame.x0, frame.t0, frame.Q, tuple(psi), tuple(names))
    split = SplitCoeffs(
        r_hat=float(comp_grad[j]),
        y_hat_index=j,
        a_tilde=float(Pv.grad[0]),
        a=float(Pv.grad[slot]),
        b_vec=Pv.grad[zi].copy(),
        b_t=float(Pv.grad[n]),
        alpha_tilde=float(Gv.grad[0]),
        alpha=float(Gv.grad[slot]),
        beta=Gv.grad[zi].copy(),
        gamma=float(Gv.grad[n]),
        alpha_hat=0.5 * float(Gv.hess[0, 0]),
        W_ytilde=np.array([w.grad[0] for w in W]),
        G_vec=np.array([w.grad[slot] for w in W]),
        K=Pv.value,
        C0=C0,
    )
    return ReducedCoeffs1(
        r=r, C0=C0, det_block=frame.det_block, d0=d0, K=K, F0=Gv.value,
        g0=np.zeros(n - 1), alpha=split.alpha, beta=split.beta, gamma=split.gamma,
        W_z=np.zeros((n - 1, n - 1)), W_t=np.zeros(n - 1), A0inv_d0=A0inv_d0,
        scale=frame.scale, chart=chart, G_jet=Gv, split=split,
    )


def extract_defect2(frame: SingularFrame, model: ImplicitOdeModel | None = None, rhs: TransformedRhs | None = None) -> ReducedCoeffs2:
    if frame.defect != 2:
        raise ValueError("extract_defect2 needs a defect-2 frame")
    if rhs is None:
        rhs = transform_rhs(frame)
    n = frame.n
    db = frame.det_block
    D = frame.D_jet
    V = frame.field_jets()
    const = np.array([V[0].value, V[1].value])
    b0 = np.array([b.value for b in frame.system.b])
    bound = frame.tol * frame.scale * max(1.0, float(np.linalg.norm(b0)))
    if np.max(np.abs(const)) > bound:
        raise InconsistentReduction(f"constant terms {const} of the kernel equations do not vanish")
    lam1 = 0.5 * D.hess[0, 0] / db
    lam2 = 0.5 * D.hess[1, 1] / db
    lam12 = D.hess[0, 1] / db
    d0 = rhs.d0
    xi = frame.inv_block @ d0 if n > 2 else np.zeros(0)
    Vz = V[2:n]
    q11 = np.array([0.5 * v.hess[0, 0] for v in Vz]) / db
    q12 = np.array([v.hess[0, 1] for v in Vz]) / db
    q22 = np.array([0.5 * v.hess[1, 1] for v in Vz]) / db
    names = ("y1", "y2") + tuple(f"z{k}" for k in range(1, n - 1)) + ("tau",)
    return ReducedCoeffs2(
        lambda1=float(lam1), lambda2=float(lam2), lambda12=float(lam12),
        C1_0=float(rhs.C0[0]), C2_0=float(rhs.C0[1]), d0=d0, A0inv_d0=xi,
        a1=float(V[0].grad[0] / db), b1=float(V[0].grad[1] / db),
        a2=float(V[1].grad[0] / db), b2=float(V[1].grad[1] / db),
        g11=q11 - lam1 * xi, g12=q12 - lam12 * xi, g22=q22 - lam2 * xi,
        det_block=db, scale=frame.scale, chart=_identity_chart(frame, names),
        const_terms=const,
    )
