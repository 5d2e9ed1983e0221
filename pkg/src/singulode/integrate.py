"""Continuation through the singular surface with the desingularised field.

Writing ``x' = adj(A) b / det A`` and multiplying by ``det A`` gives the
smooth autonomous system ``dx/ds = adj(A) b``, ``dt/ds = det A``.  Its orbits
are the solution curves of the implicit system; ``t`` stops and reverses
wherever ``det A`` changes sign, which is how turnings are passed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import InsufficientSamples, NonFiniteState, StepUnderflow
from .model import ImplicitOdeModel

SINGULAR_CROSSING = "SingularCrossing"
TURNING_TANGENCY = "TurningTangency"

# Dormand-Prince 5(4)
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4


@dataclass(frozen=True)
class StepControl:
    mode: str = "adaptive"  # "adaptive" | "fixed"
    h0: float = 1e-2
    h_min: float = 1e-12
    h_max: float = 0.1
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12

    def __post_init__(self):
        if self.mode not in ("adaptive", "fixed"):
            raise ValueError(f"unknown step mode {self.mode!r}")
        if not (0.0 < self.h_min <= self.h0 <= self.h_max):
            raise ValueError("step control needs 0 < h_min <= h0 <= h_max")
        if self.mode == "adaptive" and (self.rel_tol <= 0.0 or self.abs_tol < 0.0):
            raise ValueError("adaptive stepping needs rel_tol > 0 and abs_tol >= 0")


def desingularized_field(model: ImplicitOdeModel, x, t: float) -> tuple[np.ndarray, float]:
    """``(adj(A) b, det A)`` at ``(x, t)``."""
    return model.field_values(np.asarray(x, dtype=float), float(t))


def _make_rhs(model: ImplicitOdeModel) -> Callable[[np.ndarray], np.ndarray]:
    n = model.n

    def f(Y: np.ndarray) -> np.ndarray:
        dx, dt = model.field_values(Y[:n], Y[n])
        out = np.empty(n + 1)
        out[:n] = dx
        out[n] = dt
        return out

    return f


def _dp_step(f, Y, h, k1=None):
    k = [k1 if k1 is not None else f(Y)]
    for i in range(1, 7):
        Yi = Y + h * sum(a * kj for a, kj in zip(_A[i], k))
        k.append(f(Yi))
    Y5 = Y + h * sum(b * kj for b, kj in zip(_B5, k))
    err = h * sum(e * kj for e, kj in zip(_E, k))
    return Y5, err, k[-1]


def _rk4_step(f, Y, h):
    k1 = f(Y)
    k2 = f(Y + 0.5 * h * k1)
    k3 = f(Y + 0.5 * h * k2)
    k4 = f(Y + h * k3)
    return Y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


@dataclass(frozen=True)
class Event:
    index: int  # sample index of the event point
    s: float
    kind: str
    t: float
    x: np.ndarray
    detA: float


@dataclass(frozen=True)
class Trajectory:
    s: np.ndarray
    t: np.ndarray
    x: np.ndarray  # (N, n)
    detA: np.ndarray
    events: tuple
    var_names: tuple
    ctl: StepControl
    _rhs: Callable = field(repr=False, compare=False)

    def __len__(self) -> int:
        return len(self.s)

    @property
    def samples(self):
        return [(self.s[i], self.t[i], self.x[i], self.detA[i]) for i in range(len(self.s))]

    def state_at(self, s: float) -> np.ndarray:
        """State ``(x, t)`` at parameter ``s`` by one step from the preceding sample."""
        if not (self.s[0] <= s <= self.s[-1]):
            raise ValueError(f"s = {s} outside the trajectory [{self.s[0]}, {self.s[-1]}]")
        i = int(np.searchsorted(self.s, s, side="right")) - 1
        i = min(max(i, 0), len(self.s) - 1)
        Y = np.append(self.x[i], self.t[i])
        h = s - self.s[i]
        if h == 0.0:
            return Y
        if self.ctl.mode == "fixed":
            return _rk4_step(self._rhs, Y, h)
        return _dp_step(self._rhs, Y, h)[0]


def _check_finite(Y, s):
    if not np.all(np.isfinite(Y)):
        raise NonFiniteState(f"non-finite state at s = {s:.6g}")


def _march(f, Y0, s0, s1, ctl: StepControl):
    """Samples from ``s0`` to ``s1`` (either direction), including both ends."""
    # blow-up is reported through NonFiniteState / StepUnderflow, not warnings
    with np.errstate(over="ignore", invalid="ignore"):
        return _march_inner(f, Y0, s0, s1, ctl)


def _march_inner(f, Y0, s0, s1, ctl: StepControl):
    direction = 1.0 if s1 >= s0 else -1.0
    ss = [s0]
    Ys = [Y0.copy()]
    s, Y = s0, Y0.copy()
    h = ctl.h0
    if ctl.mode == "fixed":
        while direction * (s1 - s) > 1e-15 * max(1.0, abs(s1)):
            step = min(h, abs(s1 - s))
            Y = _rk4_step(f, Y, direction * step)
            s = s1 if step == abs(s1 - s) else s + direction * step
            _check_finite(Y, s)
            ss.append(s)
            Ys.append(Y)
        return ss, Ys
    k1 = f(Y)
    while direction * (s1 - s) > 1e-15 * max(1.0, abs(s1)):
        h = min(h, ctl.h_max, abs(s1 - s))
        Yn, err, k_last = _dp_step(f, Y, direction * h, k1)
        scale = ctl.abs_tol + ctl.rel_tol * np.maximum(np.abs(Y), np.abs(Yn))
        en = float(np.max(np.abs(err) / scale)) if np.all(np.isfinite(Yn)) else math.inf
        if en <= 1.0:
            last = h == abs(s1 - s)
            s = s1 if last else s + direction * h
            Y = Yn
            _check_finite(Y, s)
            k1 = k_last
            ss.append(s)
            Ys.append(Y)
            fac = 5.0 if en == 0.0 else min(5.0, max(0.2, 0.9 * en ** -0.2))
            h *= fac
        else:
            h *= max(0.1, 0.9 * en ** -0.25) if math.isfinite(en) else 0.1
            if h < ctl.h_min:
                raise StepUnderflow(f"step {h:.3g} below h_min at s = {s:.6g}")
    return ss, Ys


def integrate(model: ImplicitOdeModel, x0, t0: float, s_span, ctl: StepControl | None = None, s0: float | None = None,
              tangency_tol: float = 1e-6) -> Trajectory:
    """Integrate the desingularised field through ``(x0, t0)`` over ``s_span``.

    The initial state sits at ``s0`` (default: 0 if it lies in ``s_span``,
    otherwise ``s_span[0]``); the orbit is continued to both ends.
    """
    ctl = ctl or StepControl()
    a, b = float(s_span[0]), float(s_span[1])
    if not (math.isfinite(a) and math.isfinite(b)) or a > b:
        raise ValueError("s_span must be a finite interval (lo, hi) with lo <= hi")
    if s0 is None:
        s0 = 0.0 if a <= 0.0 <= b else a
    n = model.n
    f = _make_rhs(model)
    Y0 = np.append(np.asarray(x0, dtype=float), float(t0))
    _check_finite(Y0, s0)
    fwd_s, fwd_Y = _march(f, Y0, s0, b, ctl)
    bwd_s, bwd_Y = _march(f, Y0, s0, a, ctl)
    ss = bwd_s[:0:-1] + fwd_s
    Ys = bwd_Y[:0:-1] + fwd_Y
    S = np.array(ss)
    Y = np.array(Ys).reshape(len(ss), n + 1)
    det = np.array([model.field_values(y[:n], y[n])[1] for y in Y])
    traj = Trajectory(S, Y[:, n].copy(), Y[:, :n].copy(), det, (), tuple(model.var_names), ctl, f)
    return _with_events(model, traj, tangency_tol)


def _locate_crossing(traj: Trajectory, i: int, n: int) -> tuple[float, np.ndarray, float]:
    lo, hi = traj.s[i], traj.s[i + 1]
    dlo = traj.detA[i]
    f = traj._rhs
    Y = np.append(traj.x[i], traj.t[i])
    s_mid, Ym, dm = lo, Y, dlo
    while hi - lo > 1e-12 * max(1.0, abs(lo)):
        s_mid = 0.5 * (lo + hi)
        Ym = traj.state_at(s_mid)
        dm = f(Ym)[n]
        if dm == 0.0:
            break
        if (dm > 0) == (dlo > 0):
            lo, dlo = s_mid, dm
        else:
            hi = s_mid
    return s_mid, Ym, dm


def _with_events(model: ImplicitOdeModel, traj: Trajectory, tangency_tol: float) -> Trajectory:
    n = model.n
    S, T, X, det = list(traj.s), list(traj.t), list(traj.x), list(traj.detA)
    located = []
    for i in range(len(traj.s) - 1):
        if det[i] != 0.0 and det[i + 1] != 0.0 and (det[i] > 0) != (det[i + 1] > 0):
            located.append((i, _locate_crossing(traj, i, n)))
    # insert located crossings as samples
    for i, (s_e, Y_e, d_e) in reversed(located):
        if s_e in (S[i], S[i + 1]):
            continue
        S.insert(i + 1, s_e)
        T.insert(i + 1, Y_e[n])
        X.insert(i + 1, Y_e[:n])
        det.insert(i + 1, d_e)
    S_arr = np.array(S)
    det_arr = np.array(det)
    thr = tangency_tol * max(1.0, float(np.max(np.abs(det_arr))) if det_arr.size else 1.0)
    events = []
    crossing_s = {s_e for _, (s_e, _, _) in located}
    N = len(S)
    for j in range(N):
        d = det_arr[j]
        if S[j] in crossing_s:
            events.append(Event(j, S[j], SINGULAR_CROSSING, T[j], np.asarray(X[j]), d))
            continue
        if abs(d) > thr:
            continue
        left = det_arr[j - 1] if j > 0 else None
        right = det_arr[j + 1] if j + 1 < N else None
        neighbours = [v for v in (left, right) if v is not None]
        if not neighbours or any(abs(v) < abs(d) for v in neighbours):
            continue
        if d == 0.0 and left is not None and right is not None and left != 0.0 and right != 0.0 and (left > 0) != (right > 0):
            events.append(Event(j, S[j], SINGULAR_CROSSING, T[j], np.asarray(X[j]), d))
            continue
        if d != 0.0 and any(v != 0.0 and (v > 0) != (d > 0) for v in neighbours):
            continue  # a crossing, already located between samples
        events.append(Event(j, S[j], TURNING_TANGENCY, T[j], np.asarray(X[j]), d))
    return Trajectory(S_arr, np.array(T), np.array(X).reshape(N, n), det_arr, tuple(events), traj.var_names, traj.ctl, traj._rhs)


# ---------------------------------------------------------------- branch matching

@dataclass(frozen=True)
class CoordinateFit:
    name: str
    direction: int  # +1: samples after the event in s, -1: before
    side: int  # sign of t - t0 on those samples
    exponent: float
    coefficient: float  # from the fitted power law
    samples: int


@dataclass(frozen=True)
class BranchMatch:
    fits: tuple  # CoordinateFit per reduced coordinate and side
    best: dict  # direction -> (branch label, mismatch)
    event: Event

    def fit(self, name: str, direction: int) -> CoordinateFit | None:
        for ft in self.fits:
            if ft.name == name and ft.direction == direction:
                return ft
        return None


def _reduced_coords(cls, X: np.ndarray, T: np.ndarray, det: np.ndarray):
    """Reduced coordinates of trajectory samples: frame coordinates with the
    replaced slot set to ``det A``."""
    frame = cls.frame
    chart = cls.branches[0].chart if cls.branches else None
    names = chart.names[:-1] if chart is not None else tuple(f"u{k}" for k in range(frame.n))
    U = (X - frame.x0) @ frame.Q
    V = U.copy()
    for k, nm in enumerate(names):
        if nm == "y":
            V[:, k] = det
    return names, V, T - frame.t0


def match_branch(traj: Trajectory, cls, window: float = 1e-2, offsets=None, model: ImplicitOdeModel | None = None) -> BranchMatch:
    """Fit power laws ``|v_k| ~ c |t - t0|^e`` near the classified point.

    The trajectory is resampled on a geometric ladder of ``s`` offsets about
    the event closest to the singular point.
    """
    frame = cls.frame
    if frame is None:
        raise InsufficientSamples("classification carries no frame")
    if not traj.events:
        raise InsufficientSamples("trajectory has no singular event")
    pt = np.append(frame.x0, frame.t0)
    ev = min(traj.events, key=lambda e: np.linalg.norm(np.append(e.x, e.t) - pt))
    if np.linalg.norm(np.append(ev.x, ev.t) - pt) > 1e-6 * max(1.0, np.linalg.norm(pt)):
        raise InsufficientSamples("no trajectory event at the classified point")
    if offsets is None:
        offsets = np.logspace(-0.5, -4.0, 29)
    n = frame.n
    det_of = lambda Y: traj._rhs(Y)[n]
    pts = {1: [], -1: []}
    for d in (1, -1):
        for h in offsets:
            s = ev.s + d * h
            if not (traj.s[0] <= s <= traj.s[-1]):
                continue
            Y = traj.state_at(s)
            tau = Y[n] - frame.t0
            if abs(tau) > window or abs(tau) < 1e-14:
                continue
            pts[d].append((Y, det_of(Y)))
    fits = []
    for direction, rows in pts.items():
        if len(rows) < 3:
            continue
        side = int(np.sign(np.median([r[0][n] - frame.t0 for r in rows])))
        X = np.array([r[0][:n] for r in rows])
        T = np.array([r[0][n] for r in rows])
        det = np.array([r[1] for r in rows])
        names, V, tau = _reduced_coords(cls, X, T, det)
        lt = np.log(np.abs(tau))
        for k, nm in enumerate(names):
            vals = V[:, k]
            ok = np.abs(vals) > 1e-13
            if ok.sum() < 3:
                continue
            slope, icpt = np.polyfit(lt[ok], np.log(np.abs(vals[ok])), 1)
            sign = float(np.sign(np.median(vals[ok])))
            fits.append(CoordinateFit(nm, direction, side, float(slope), sign * math.exp(icpt), int(ok.sum())))
    if not fits:
        raise InsufficientSamples(f"fewer than 3 samples within |t - t0| <= {window}")
    best = {}
    for direction in (1, -1):
        dfits = [f for f in fits if f.direction == direction]
        if not dfits:
            continue
        side = dfits[0].side
        cands = []
        for br in cls.branches:
            if br.side and br.side != side:
                continue
            errs = []
            for tm in br.terms:
                ft = next((f for f in dfits if f.name == tm.name), None)
                if ft is None or tm.coefficient == 0.0:
                    continue
                pred = tm.coefficient * (-1.0 if (tm.odd and side < 0) else 1.0)
                errs.append(abs(ft.coefficient - pred) / abs(pred) + abs(ft.exponent - float(tm.exponent)))
            if errs:
                cands.append((max(errs), br.label))
        if cands:
            err, label = min(cands)
            best[direction] = (label, err)
    return BranchMatch(tuple(fits), best, ev)
