"""Decision tree over the reduced coefficients and leading-order branch solvers.

Every branch is a list of power terms ``c |tau|^e`` (times ``sign(tau)`` for
odd terms) in the reduced coordinates of a :class:`~singulode.coeffs.Chart`;
:func:`evaluate_branch` maps it back to the original state.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Optional

import numpy as np

from . import poly
from .coeffs import Chart, ReducedCoeffs1, ReducedCoeffs2, extract_defect1, extract_defect2
from .errors import InconsistentReduction, NotSingular, WrongSide
from .frame import DEFAULT_TOL, SingularFrame, build_frame, transform_rhs
from .model import ImplicitOdeModel


class Kind(str, Enum):
    TURNING = "Turning"
    DOUBLE_INTERSECTION = "DoubleIntersection"
    REFLECTING = "Reflecting"
    COMPLICATED_BRANCHING = "ComplicatedBranching"
    TRIPLE_INTERSECTION = "TripleIntersection"
    LINKING_OF_TURNINGS = "LinkingOfTurnings"
    NO_REAL_BRANCH = "NoRealBranch"
    DEGENERATE = "Degenerate"

    def __str__(self) -> str:
        return self.value


DESCRIPTIONS = {
    Kind.TURNING: "the turning",
    Kind.DOUBLE_INTERSECTION: "the double intersection",
    Kind.REFLECTING: "the reflecting",
    Kind.COMPLICATED_BRANCHING: "the complicated branching",
    Kind.TRIPLE_INTERSECTION: "the triple intersection",
    Kind.LINKING_OF_TURNINGS: "the linking of turnings",
    Kind.NO_REAL_BRANCH: "no real branch",
    Kind.DEGENERATE: "degenerate",
}


@dataclass(frozen=True)
class Term:
    name: str
    exponent: Fraction
    coefficient: float
    odd: bool = False  # multiply by sign(tau); only used on two-sided branches


@dataclass(frozen=True)
class Branch:
    kind: Kind
    side: int  # +1, -1, or 0 for both sides of t0
    terms: tuple
    chart: Chart
    frame: SingularFrame
    label: str = ""

    @property
    def x0(self) -> np.ndarray:
        return self.chart.x0

    @property
    def t0(self) -> float:
        return self.chart.t0

    @property
    def exponents(self) -> dict:
        return {tm.name: tm.exponent for tm in self.terms}

    @property
    def coefficients(self) -> dict:
        return {tm.name: tm.coefficient for tm in self.terms}

    @property
    def min_exponent(self) -> Fraction:
        return min(tm.exponent for tm in self.terms if tm.coefficient != 0.0) if any(
            tm.coefficient != 0.0 for tm in self.terms) else Fraction(1)

    def with_coefficients(self, **coeffs) -> "Branch":
        terms = tuple(Term(tm.name, tm.exponent, coeffs.get(tm.name, tm.coefficient), tm.odd) for tm in self.terms)
        return Branch(self.kind, self.side, terms, self.chart, self.frame, self.label)

    def reduced(self, tau: float) -> np.ndarray:
        """Reduced coordinates ``v`` (including ``tau`` last) at offset ``tau``."""
        if self.side and self.side * tau < 0.0:
            raise WrongSide(f"branch lives on side {self.side:+d} of t0, got t - t0 = {tau:.3g}")
        names = self.chart.names
        v = np.zeros(len(names))
        v[-1] = tau
        a = abs(tau)
        sg = math.copysign(1.0, tau) if tau != 0.0 else 0.0
        for tm in self.terms:
            k = names.index(tm.name)
            val = tm.coefficient * a ** float(tm.exponent) if a > 0.0 else 0.0
            v[k] = val * sg if tm.odd else val
        return v

    def reduced_velocity(self, tau: float) -> np.ndarray:
        """``dv/dtau`` of :meth:`reduced`; requires ``tau != 0``."""
        names = self.chart.names
        dv = np.zeros(len(names))
        dv[-1] = 1.0
        a = abs(tau)
        sg = math.copysign(1.0, tau)
        for tm in self.terms:
            k = names.index(tm.name)
            e = float(tm.exponent)
            d = tm.coefficient * e * a ** (e - 1.0)
            dv[k] = d if tm.odd else d * sg
        return dv

    def describe(self) -> str:
        side = {1: "t>t0", -1: "t<t0", 0: "both"}[self.side]
        parts = [f"{tm.name}: {tm.coefficient:.10g}*|tau|^{tm.exponent}" + (" sgn" if tm.odd else "")
                 for tm in self.terms]
        return f"[{self.label or '-'}] side {side}; " + ", ".join(parts)


def evaluate_branch(br: Branch, t: float) -> np.ndarray:
    """Leading-order state on the branch at time ``t``."""
    tau = float(t) - br.t0
    if tau == 0.0:
        return br.x0.copy()
    return br.chart.to_x(br.reduced(tau))


def branch_velocity(br: Branch, t: float) -> np.ndarray:
    """``dx/dt`` of :func:`evaluate_branch`, exact through the chart."""
    tau = float(t) - br.t0
    v = br.reduced(tau)
    dv = br.reduced_velocity(tau)
    du = np.array([(p.grad + p.hess @ v) @ dv for p in br.chart.psi])
    n = br.chart.Q.shape[0]
    return br.chart.Q @ du[:n]


@dataclass
class Classification:
    kind: Kind
    branches: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)
    case: Optional[str] = None
    reason: Optional[str] = None
    frame: Optional[SingularFrame] = None
    coeffs: object = None

    @property
    def description(self) -> str:
        text = DESCRIPTIONS[self.kind]
        if self.case:
            text += f", case ({self.case})"
        if self.reason:
            text += f": {self.reason}"
        return text


def _names(chart: Chart):
    return chart.names[:-1]


def _degenerate(reason, **kw) -> Classification:
    return Classification(Kind.DEGENERATE, reason=reason, **kw)


# ---------------------------------------------------------------- defect 1

def solve_turning(c: ReducedCoeffs1, frame: SingularFrame) -> list[Branch]:
    s = 1 if c.F0 > 0 else -1
    amp = math.sqrt(2.0 * abs(c.F0))
    names = _names(c.chart)
    out = []
    for sign, label in ((1.0, "+"), (-1.0, "-")):
        terms = [Term(names[0], Fraction(1, 2), sign * amp)]
        terms += [Term(nm, Fraction(1), s * float(g)) for nm, g in zip(names[1:], c.g0)]
        out.append(Branch(Kind.TURNING, s, tuple(terms), c.chart, frame, label))
    return out


def double_intersection_roots(alpha: float, G: float, tol: float = 0.0) -> list[float]:
    """Real roots of ``eta^2 - alpha eta - G = 0``."""
    dis = alpha * alpha + 4.0 * G
    if dis < -tol:
        return []
    if abs(dis) <= tol:
        return [0.5 * alpha]
    r = math.sqrt(dis)
    # avoid cancellation: the larger-magnitude root first, the other from the product -G
    q = 0.5 * (alpha + math.copysign(r, alpha if alpha != 0.0 else 1.0))
    roots = [q, -G / q] if q != 0.0 else [0.5 * r, -0.5 * r]
    return sorted(roots)


def solve_double_intersection(c: ReducedCoeffs1, frame: SingularFrame, tol: float = 0.0) -> list[Branch]:
    xi = c.A0inv_d0
    G = float(np.dot(c.beta, xi)) + c.gamma
    names = _names(c.chart)
    out = []
    for i, eta in enumerate(double_intersection_roots(c.alpha, G, tol)):
        terms = [Term(names[0], Fraction(1), eta, True)]
        terms += [Term(nm, Fraction(1), float(x), True) for nm, x in zip(names[1:], xi)]
        out.append(Branch(Kind.DOUBLE_INTERSECTION, 0, tuple(terms), c.chart, frame, f"eta{i + 1}"))
    return out


def _split_names(c: ReducedCoeffs1):
    names = _names(c.chart)
    yt = names[0]
    y = names[1 + c.split.y_hat_index]
    zs = [nm for nm in names[1:] if nm != y]
    return yt, y, zs


def reflecting_coefficients(alpha_tilde: float, K: float) -> tuple[float, float]:
    """``(delta, chi)`` solving ``chi delta = 3K``, ``2 chi^2 = 3 alpha~ delta``."""
    chi = float(np.cbrt(4.5 * alpha_tilde * K))
    delta = 2.0 * chi * chi / (3.0 * alpha_tilde)
    return delta, chi


def solve_reflecting(c: ReducedCoeffs1, frame: SingularFrame) -> list[Branch]:
    sp = c.split
    delta, chi = reflecting_coefficients(sp.alpha_tilde, sp.K)
    Delta = 1.5 * sp.W_ytilde * delta / chi
    yt, y, zs = _split_names(c)
    terms = [Term(yt, Fraction(1, 3), delta, True), Term(y, Fraction(2, 3), chi)]
    terms += [Term(nm, Fraction(2, 3), float(d)) for nm, d in zip(zs, Delta)]
    return [Branch(Kind.REFLECTING, 0, tuple(terms), c.chart, frame, "reflecting")]


def complicated_quartic(c: ReducedCoeffs1, s: int) -> tuple[float, float]:
    """``(a1, a0)`` of ``chi^4 + a1 chi + a0`` for side ``s``.

    Substituting ``y~ = delta (s tau)^(1/4)``, ``y = chi (s tau)^(3/4)``,
    ``z = Delta (s tau)^(1/2)`` gives ``delta = 4 s K / chi``,
    ``Delta = 2 s W_y~ delta / chi`` and ``3 s chi^2 / 4 = alpha^ delta^2 +
    <beta, Delta>``; both right-hand terms scale as ``chi^-2`` so the linear
    coefficient vanishes.
    """
    sp = c.split
    K = sp.K
    a0 = -(s / 3.0) * (64.0 * sp.alpha_hat * K * K + 32.0 * K * float(np.dot(sp.beta, sp.W_ytilde)))
    return 0.0, a0


def complicated_case(counts: dict) -> Optional[str]:
    """Case label from the number of real roots on each side.

    a: roots on one side only; b: two roots on both sides; c: one root on one
    side and two on the other.
    """
    n_pos, n_neg = counts.get(1, 0), counts.get(-1, 0)
    if (n_pos == 0) != (n_neg == 0):
        return "a"
    if n_pos == 2 and n_neg == 2:
        return "b"
    if {n_pos, n_neg} == {1, 2}:
        return "c"
    return None


def solve_complicated_branching(c: ReducedCoeffs1, frame: SingularFrame, tol: float = 1e-9) -> tuple[Optional[str], list[Branch], dict]:
    sp = c.split
    yt, y, zs = _split_names(c)
    branches = []
    counts = {}
    diag = {}
    for s in (1, -1):
        a1, a0 = complicated_quartic(c, s)
        p = poly.Polynomial([a0, a1, 0.0, 0.0, 1.0])
        n_sturm = poly.count_real_roots(p)
        R = poly.quartic_R(a1, a0)
        diag[f"s={s:+d}"] = {"a1": a1, "a0": a0, "R": R, "sturm_count": n_sturm}
        roots = [r for r in poly.real_roots(p) if abs(r) > tol * max(1.0, abs(a0)) ** 0.25]
        counts[s] = len(roots)
        for chi in roots:
            delta = 4.0 * s * sp.K / chi
            Delta = 2.0 * s * sp.W_ytilde * delta / chi
            terms = [Term(yt, Fraction(1, 4), delta), Term(y, Fraction(3, 4), chi)]
            terms += [Term(nm, Fraction(1, 2), float(d)) for nm, d in zip(zs, Delta)]
            branches.append(Branch(Kind.COMPLICATED_BRANCHING, s, tuple(terms), c.chart, frame, f"s={s:+d},chi={chi:.6g}"))
    return complicated_case(counts), branches, diag


def _z_slopes(c: ReducedCoeffs1) -> np.ndarray:
    """Leading ``dz/dt`` of the untouched complement coordinates, ``A0_block^-1 d0``."""
    n = len(c.chart.names) - 1
    slot = 1 + c.split.y_hat_index
    idx = [k - 1 for k in range(1, n) if k != slot]
    return c.A0inv_d0[idx]


def triple_cubic(c: ReducedCoeffs1) -> tuple[poly.Polynomial, dict]:
    sp = c.split
    Delta = _z_slopes(c)
    F = float(np.dot(sp.b_vec, Delta)) + sp.b_t
    f = float(np.dot(sp.beta, Delta)) + sp.gamma
    at, a, alt, al = sp.a_tilde, sp.a, sp.alpha_tilde, sp.alpha
    coeffs = [f * at - alt * F, al * at - f - alt * a, -(at + al), 1.0]
    return poly.Polynomial(coeffs), {"F": F, "f": f}


def _triple_residual(c: ReducedCoeffs1, F: float, f: float, chi: float, delta: float) -> float:
    sp = c.split
    e1 = chi * delta - (sp.a_tilde * delta + sp.a * chi + F)
    e2 = chi * chi - (sp.alpha_tilde * delta + sp.alpha * chi + f)
    return math.hypot(e1, e2)


def _newton_triple(c, F, f, chi, delta, steps=8):
    sp = c.split
    for _ in range(steps):
        e = np.array([chi * delta - (sp.a_tilde * delta + sp.a * chi + F),
                      chi * chi - (sp.alpha_tilde * delta + sp.alpha * chi + f)])
        J = np.array([[delta - sp.a, chi - sp.a_tilde], [2 * chi - sp.alpha, -sp.alpha_tilde]])
        try:
            step = np.linalg.solve(J, e)
        except np.linalg.LinAlgError:
            break
        chi, delta = chi - step[0], delta - step[1]
        if np.max(np.abs(step)) < 1e-15 * max(1.0, abs(chi), abs(delta)):
            break
    return chi, delta


def solve_triple_intersection(c: ReducedCoeffs1, frame: SingularFrame, tol: float = 1e-9) -> tuple[list[Branch], dict]:
    sp = c.split
    p, extra = triple_cubic(c)
    F, f = extra["F"], extra["f"]
    yt, y, zs = _split_names(c)
    Delta = _z_slopes(c)
    branches = []
    rejected = []
    scale = max(1.0, p.scale)
    for chi in poly.real_roots(p):
        if abs(chi) <= tol * scale or abs(chi - sp.a_tilde) <= tol * scale:
            rejected.append(chi)
            continue
        delta = (sp.a * chi + F) / (chi - sp.a_tilde)
        chi, delta = _newton_triple(c, F, f, chi, delta)
        if _triple_residual(c, F, f, chi, delta) > 1e-8 * scale * max(1.0, chi * chi, abs(delta)):
            rejected.append(chi)
            continue
        terms = [Term(yt, Fraction(1), delta, True), Term(y, Fraction(1), chi, True)]
        terms += [Term(nm, Fraction(1), float(d), True) for nm, d in zip(zs, Delta)]
        branches.append(Branch(Kind.TRIPLE_INTERSECTION, 0, tuple(terms), c.chart, frame, f"chi={chi:.6g}"))
    return branches, {"F": F, "f": f, "cubic": list(p.coeffs), "rejected_roots": rejected}


# ---------------------------------------------------------------- defect 2

def linking_roots(a1: float, b1: float, a2: float, b2: float, tol: float = 1e-12) -> tuple[float, list]:
    """Discriminant and ``(mu, w, g)`` eigen-pairs of ``[[a1, b1], [a2, b2]]``.

    ``w`` is normalised as ``(1, g)`` when ``b1 != 0`` (so ``g`` is the ratio
    ``eta2/eta1``) and as ``(kappa, 1)`` otherwise.
    """
    dis = (a1 - b2) ** 2 + 4.0 * b1 * a2
    if dis < -tol:
        return dis, []
    sq = math.sqrt(max(dis, 0.0))
    signs = (1.0,) if abs(dis) <= tol else (1.0, -1.0)
    out = []
    for sg in signs:
        mu = 0.5 * (a1 + b2 + sg * sq)
        if abs(b1) > tol:
            g = (-a1 + b2 + sg * sq) / (2.0 * b1)
            w = np.array([1.0, g])
        else:
            # lower-triangular matrix: eigenvector for mu = b2 is (0, 1)
            if abs(mu - b2) <= tol * max(1.0, abs(mu)) and abs(a1 - b2) > tol:
                w = np.array([0.0, 1.0])
            else:
                w = np.array([1.0, a2 / (mu - b2)]) if abs(mu - b2) > tol else np.array([0.0, 1.0])
            g = w[1] / w[0] if w[0] != 0.0 else math.inf
        out.append((mu, w, g))
    return dis, out


def solve_linking(c2: ReducedCoeffs2, frame: SingularFrame, tol: float = 1e-9) -> tuple[list[Branch], dict]:
    dis, pairs = linking_roots(c2.a1, c2.b1, c2.a2, c2.b2, tol)
    diag = {"Dis": dis, "roots": []}
    branches = []
    names = _names(c2.chart)
    for k, (mu, w, g) in enumerate(pairs):
        label = "+" if k == 0 else "-"
        qD = c2.lambda1 * w[0] ** 2 + c2.lambda12 * w[0] * w[1] + c2.lambda2 * w[1] ** 2
        if abs(qD) <= tol:
            raise _LinkingDegenerate(f"lambda1 w1^2 + lambda2 w2^2 = 0 for root g{label}")
        R = 2.0 * mu / qD
        diag["roots"].append({"g": g, "mu": mu, "R": R, "w": w.tolist()})
        if abs(R) <= tol:
            continue
        s = 1 if R > 0 else -1
        amp = math.sqrt(abs(R))
        qz = c2.g11 * w[0] ** 2 + c2.g12 * w[0] * w[1] + c2.g22 * w[1] ** 2
        Delta = c2.A0inv_d0 + qz / qD
        for sign, tag in ((1.0, "+"), (-1.0, "-")):
            terms = [Term(names[0], Fraction(1, 2), sign * amp * w[0]),
                     Term(names[1], Fraction(1, 2), sign * amp * w[1])]
            terms += [Term(nm, Fraction(1), s * float(d)) for nm, d in zip(names[2:], Delta)]
            branches.append(Branch(Kind.LINKING_OF_TURNINGS, s, tuple(terms), c2.chart, frame, f"g{label}{tag}"))
    return branches, diag


class _LinkingDegenerate(Exception):
    pass


# ---------------------------------------------------------------- driver

def classify(model: ImplicitOdeModel, x0, t0: float, tol: float = DEFAULT_TOL) -> Classification:
    """Classify the singular point ``(x0, t0)`` of ``model``."""
    frame = build_frame(model, x0, t0, tol)
    D0 = frame.D_jet.value
    if abs(D0) > 1e3 * tol * frame.scale ** model.n:
        raise NotSingular(f"det A = {D0:.3g} is not zero at the point")
    rhs = transform_rhs(frame)
    eps = tol * frame.scale
    if frame.defect == 1:
        return _classify_defect1(model, frame, rhs, eps)
    return _classify_defect2(model, frame, rhs, eps)


def _classify_defect1(model, frame, rhs, eps) -> Classification:
    c = extract_defect1(frame, model, rhs)
    n = frame.n
    diag = {"defect": 1, "r": c.r, "C0": c.C0, "det_block": c.det_block, "K": c.K}
    kw = dict(diagnostics=diag, frame=frame, coeffs=c)
    if abs(c.r) > eps:
        diag.update(F0=c.F0, alpha=c.alpha, beta=c.beta.tolist(), gamma=c.gamma, g0=c.g0.tolist())
        if abs(c.C0) > eps:
            if n >= 2 and np.linalg.norm(c.g0) <= eps:
                return _degenerate("turning with g0 = 0", **kw)
            return Classification(Kind.TURNING, solve_turning(c, frame), **kw)
        G = float(np.dot(c.beta, c.A0inv_d0)) + c.gamma
        diag.update(G=G, Dis=c.alpha ** 2 + 4.0 * G, xi=c.A0inv_d0.tolist())
        brs = solve_double_intersection(c, frame, eps * eps)
        if not brs:
            return Classification(Kind.NO_REAL_BRANCH, [], reason="eta^2 - alpha eta - G has no real root", **kw)
        return Classification(Kind.DOUBLE_INTERSECTION, brs, **kw)

    sp = c.split
    diag["r_hat"] = sp.r_hat
    if sp.y_hat_index < 0:
        return _degenerate("r = 0 and dD/dz = 0", **kw)
    diag.update(a_tilde=sp.a_tilde, a=sp.a, b=sp.b_vec.tolist(), b_t=sp.b_t, alpha_tilde=sp.alpha_tilde,
                alpha=sp.alpha, beta=sp.beta.tolist(), gamma=sp.gamma, alpha_hat=sp.alpha_hat,
                g=sp.g_vec.tolist(), G=sp.G_vec.tolist())
    if abs(sp.C0) > eps:
        need_g = n >= 3
        if abs(sp.alpha_tilde) > eps:
            if need_g and np.linalg.norm(sp.g_vec) <= eps:
                return _degenerate("reflecting with g = 0", **kw)
            delta, chi = reflecting_coefficients(sp.alpha_tilde, sp.K)
            diag.update(delta=delta, chi=chi)
            return Classification(Kind.REFLECTING, solve_reflecting(c, frame), **kw)
        if abs(sp.alpha_hat) <= eps:
            return _degenerate("alpha~ = 0 and alpha^ = 0", **kw)
        if need_g and np.linalg.norm(sp.g_vec) <= eps:
            return _degenerate("complicated branching with g = 0", **kw)
        case, brs, qd = solve_complicated_branching(c, frame, eps)
        diag["quartic"] = qd
        if not brs:
            return Classification(Kind.NO_REAL_BRANCH, [], reason="quartic has no admissible real root", **kw)
        return Classification(Kind.COMPLICATED_BRANCHING, brs, case=case, **kw)

    p, _ = triple_cubic(c)
    if p.degree < 3 or np.max(np.abs(p.coeffs[:-1])) <= eps:
        return _degenerate("all triple-intersection data vanish", **kw)
    brs, td = solve_triple_intersection(c, frame, eps)
    diag.update(td)
    if not brs:
        return Classification(Kind.NO_REAL_BRANCH, [], reason="no admissible root of the cubic", **kw)
    return Classification(Kind.TRIPLE_INTERSECTION, brs, **kw)


def _classify_defect2(model, frame, rhs, eps) -> Classification:
    try:
        c2 = extract_defect2(frame, model, rhs)
    except InconsistentReduction as exc:
        return _degenerate(str(exc), frame=frame)
    diag = {"defect": 2, "lambda1": c2.lambda1, "lambda2": c2.lambda2, "C1": c2.C1_0, "C2": c2.C2_0,
            "a1": c2.a1, "b1": c2.b1, "a2": c2.a2, "b2": c2.b2, "det_block": c2.det_block}
    kw = dict(diagnostics=diag, frame=frame, coeffs=c2)
    if abs(c2.C1_0) + abs(c2.C2_0) <= eps:
        return _degenerate("C1 = C2 = 0", **kw)
    if abs(c2.b1) + abs(c2.a2) <= eps:
        return _degenerate("b1 = a2 = 0", **kw)
    try:
        brs, ld = solve_linking(c2, frame, eps)
    except _LinkingDegenerate as exc:
        return _degenerate(str(exc), **kw)
    diag.update(ld)
    if not brs:
        return Classification(Kind.NO_REAL_BRANCH, [], reason="Dis < 0", **kw)
    return Classification(Kind.LINKING_OF_TURNINGS, brs, **kw)


# ---------------------------------------------------------------- residual check

def branch_residual(model: ImplicitOdeModel, br: Branch, tau: float) -> float:
    """Relative residual of ``A x' = b`` along the branch at offset ``tau``.

    Rows are split by the left frame and each row is divided by the size of
    the terms it balances, so that a correct leading-order branch gives a
    residual that vanishes as ``tau -> 0``.
    """
    t = br.t0 + tau
    xp = branch_velocity(br, t)
    x = evaluate_branch(br, t)
    A, b = model.eval_values(x, t)
    P, Q = br.frame.P, br.frame.Q
    res = P.T @ (A @ xp - b)
    M = P.T @ A @ Q
    up = Q.T @ xp
    rows = np.abs(M) @ np.abs(up) + np.abs(P.T @ b)
    return float(np.linalg.norm(res) / max(np.linalg.norm(rows), 1e-300))


def branch_time_scale(br: Branch, small: float = 0.1) -> float:
    """Largest ``10^-k <= 1`` at which the branch is still in its leading-order
    window: reduced coordinates at most ``small`` and the quadratic part of
    the chart at most ``small`` times its linear part."""
    tau = 1.0
    for _ in range(16):
        ok = True
        for s in ((br.side,) if br.side else (1, -1)):
            v = br.reduced(s * tau)
            if np.max(np.abs(v[:-1]), initial=0.0) > small:
                ok = False
                break
            for p in br.chart.psi:
                lin = abs(p.grad @ v)
                quad = 0.5 * abs(v @ p.hess @ v)
                if quad > small * max(lin, np.linalg.norm(v)):
                    ok = False
                    break
            if not ok:
                break
        if ok:
            return tau
        tau *= 0.1
    return tau


def residual_order(model: ImplicitOdeModel, br: Branch, taus=(1e-3, 1e-4, 1e-5), scaled: bool = True) -> float:
    """Fitted decay order of :func:`branch_residual`; the minimum over the
    branch's sides.  With ``scaled`` the offsets are multiplied by
    :func:`branch_time_scale`."""
    sides = (br.side,) if br.side else (1, -1)
    if scaled:
        taus = tuple(branch_time_scale(br) * tau for tau in taus)
    orders = []
    for s in sides:
        rho = np.array([branch_residual(model, br, s * tau) for tau in taus])
        lt = np.log(np.asarray(taus))
        lr = np.log(np.maximum(rho, 1e-300))
        if np.all(rho < 1e-12):
            orders.append(math.inf)
            continue
        orders.append(float(np.polyfit(lt, lr, 1)[0]))
    return min(orders)


def branch_passes(model: ImplicitOdeModel, br: Branch, taus=(1e-3, 1e-4, 1e-5), slack: float = 0.1, scaled: bool = True) -> tuple[bool, float]:
    order = residual_order(model, br, taus, scaled)
    return order >= float(br.min_exponent) - slack, order


# ---------------------------------------------------------------- exponent balances

def balance_reflecting(eps: Fraction, nu: Fraction, omega: Fraction) -> tuple:
    """Residuals of the exponent balance for the reflecting case.

    Equations, from the ``y~``, ``y`` and ``z`` equations respectively:
    ``eps + nu - 1 = 0``, ``2 nu - 1 = min(eps, nu, omega, 1)``,
    ``nu + omega - 1 = min(eps, nu, omega, 1)``.
    """
    m = min(eps, nu, omega, Fraction(1))
    return (eps + nu - 1, 2 * nu - 1 - m, nu + omega - 1 - m)


def balance_complicated(eps: Fraction, nu: Fraction, omega: Fraction) -> tuple:
    """As :func:`balance_reflecting` with ``2 eps`` entering the ``y`` balance."""
    m = min(eps, nu, omega, Fraction(1))
    return (eps + nu - 1, 2 * nu - 1 - min(2 * eps, nu, omega, Fraction(1)), nu + omega - 1 - m)


def solve_balance(system, denominators=range(1, 13)) -> list[tuple]:
    """All rational triples in ``(0, 1]`` with small denominators solving ``system``."""
    vals = sorted({Fraction(p, q) for q in denominators for p in range(1, q + 1)})
    out = []
    for e in vals:
        nu = 1 - e
        if nu <= 0:
            continue
        for w in vals:
            if all(r == 0 for r in system(e, nu, w)):
                out.append((e, nu, w))
    return out
