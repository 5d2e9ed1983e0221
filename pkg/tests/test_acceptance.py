"""Acceptance criteria, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -v`` or directly with
``python3 tests/test_acceptance.py``.
"""
import math
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from conftest import fixture_model, random_orthogonal, random_singular_model, transformed_model  # noqa: E402
from singulode.classify import (  # noqa: E402
    Kind,
    balance_complicated,
    balance_reflecting,
    branch_passes,
    classify,
)
from singulode.cli import verify_point  # noqa: E402
from singulode.integrate import StepControl, integrate  # noqa: E402
from singulode.poly import Polynomial, count_real_roots, quartic_R  # noqa: E402
from singulode.taylor import det_adjugate_values  # noqa: E402


def report(number, title, ok, elapsed, limit, detail=""):
    ok = ok and elapsed < limit
    line = f"criterion {number} {title}: {'PASS' if ok else 'FAIL'} ({elapsed:.3f} s, limit {limit:g} s)"
    if detail:
        line += f" {detail}"
    print(line, flush=True)
    return ok


def criterion_1():
    t = time.perf_counter()
    c = classify(fixture_model("reflect.model"), [0.0, 0.0], 0.0)
    (b,) = c.branches
    delta, chi = b.coefficients["y~"], b.coefficients["y"]
    el = time.perf_counter() - t
    err = max(abs(delta + 6 ** (1 / 3)), abs(chi - 4.5 ** (1 / 3)))
    ok = c.kind is Kind.REFLECTING and err <= 1e-9
    return report(1, "reflecting coefficients", ok, el, 1.0, f"delta={delta!r} chi={chi!r} err={err:.1e}")


def criterion_2():
    t = time.perf_counter()
    m = fixture_model("scalar_turning.model")
    turn = classify(m, [0.0], 1.0)
    dbl = classify(m, [0.0], 0.0)
    neg = classify(fixture_model("scalar_neg.model"), [0.0], 0.0)
    el = time.perf_counter() - t
    tc = sorted(b.coefficients["y"] for b in turn.branches)
    eta = sorted(b.coefficients["y"] for b in dbl.branches)
    ok = (
        turn.kind is Kind.TURNING
        and len(tc) == 2
        and max(abs(tc[0] + math.sqrt(2)), abs(tc[1] - math.sqrt(2))) <= 1e-9
        and dbl.kind is Kind.DOUBLE_INTERSECTION
        and eta == pytest.approx([-1.0, 1.0], abs=1e-9)
        and neg.kind is Kind.NO_REAL_BRANCH
    )
    return report(2, "scalar taxonomy", ok, el, 1.0, f"turning={tc} eta={eta} neg={neg.kind}")


def criterion_3():
    t = time.perf_counter()
    tr = integrate(fixture_model("scalar_turning.model"), [0.0], 1.0, (-2.0, 2.0), StepControl(rel_tol=1e-10))
    el = time.perf_counter() - t
    err = float(np.max(np.abs(tr.x[:, 0] ** 2 - tr.t**2 + 1)))
    return report(3, "continuation through a turning", err <= 1e-8, el, 1.0, f"max|x^2-t^2+1|={err:.2e}")


def criterion_4():
    t = time.perf_counter()
    tr = integrate(fixture_model("reflect.model"), [0.0, 0.0], 0.0, (-0.6, 0.6))
    el = time.perf_counter() - t
    x, y, tt = tr.x[:, 0], tr.x[:, 1], tr.t
    inside = np.abs(x) <= 0.5
    e1 = float(np.max(np.abs(tt - (np.exp(-x) - 1 + x - x**2 / 2))[inside]))
    e2 = float(np.max(np.abs(y - tt - x**2 / 2)[inside]))
    covered = x.min() < -0.5 and x.max() > 0.5
    ok = covered and e1 <= 1e-6 and e2 <= 1e-6
    return report(4, "implicit-solution conformance", ok, el, 2.0, f"t-residual={e1:.2e} y-residual={e2:.2e}")


def criterion_5():
    t = time.perf_counter()
    rng = np.random.default_rng(2024)
    agree = used = 0
    while used < 500:
        a1, a0 = rng.normal(size=2) * 3
        R = quartic_R(a1, a0)
        if abs(R) <= 1e-6 * max(1.0, a1**4, abs(a0) ** 3):
            continue
        used += 1
        n = count_real_roots(Polynomial([a0, a1, 0.0, 0.0, 1.0]))
        agree += n == (2 if R > 0 else 0)
    el = time.perf_counter() - t
    return report(5, "quartic root-count equivalence", agree == used, el, 2.0, f"{agree}/{used} agree")


def criterion_6():
    t = time.perf_counter()
    m = fixture_model("complicated.model")
    c = classify(m, [0.0, 0.0], 0.0)
    chi = (64 / 3) ** 0.25
    chis = sorted(b.coefficients["y"] for b in c.branches)
    q = c.diagnostics.get("quartic", {})
    rep = verify_point(m, [0.0, 0.0], 0.0)
    fits = [f for f in rep.trajectory_fits if f[3] == 0.75]
    el = time.perf_counter() - t
    ok = (
        c.kind is Kind.COMPLICATED_BRANCHING
        and c.case == "a"
        and q.get("s=-1", {}).get("sturm_count") == 2
        and all(b.side == -1 for b in c.branches)
        and len(chis) == 2
        and max(abs(chis[0] + chi), abs(chis[1] - chi)) <= 1e-8
        and bool(fits)
        and all(f[2] >= 0.65 for f in fits)
        and rep.ok
    )
    orders = ", ".join(f"{f[2]:.3f}" for f in fits)
    return report(6, "complicated branching", ok, el, 2.0, f"chi={chis} fitted 3/4-orders=[{orders}]")


def criterion_7():
    t = time.perf_counter()
    m = fixture_model("linking.model")
    c = classify(m, [0.0, 0.0], 0.0)
    roots = c.diagnostics["roots"]
    g = [r["g"] for r in roots]
    R = [float(r["R"]) for r in roots]
    passes = all(branch_passes(m, b)[0] for b in c.branches)
    el = time.perf_counter() - t
    r3 = math.sqrt(3)
    ok = (
        c.kind is Kind.LINKING_OF_TURNINGS
        and abs(c.diagnostics["Dis"] - 12.0) <= 1e-8
        and g == pytest.approx([2 - r3, 2 + r3], abs=1e-8)
        and R == pytest.approx([4 + 2 * r3, 4 - 2 * r3], abs=1e-8)
        and all(v > 0 for v in R)
        and passes
    )
    return report(7, "linking of turnings", ok, el, 2.0, f"Dis={c.diagnostics['Dis']!r} g={g} R={R}")


FIXTURE_POINTS = [
    ("scalar_turning.model", [0.0], 1.0),
    ("scalar_turning.model", [0.0], 0.0),
    ("scalar_neg.model", [0.0], 0.0),
    ("reflect.model", [0.0, 0.0], 0.0),
    ("complicated.model", [0.0, 0.0], 0.0),
    ("triple.model", [0.0, 0.0], 0.0),
    ("turning2d.model", [0.0, 0.0], 0.0),
    ("linking.model", [0.0, 0.0], 0.0),
]
CORPUS = [
    "scalar_turning.model", "scalar_neg.model", "reflect.model", "complicated.model", "triple.model",
    "turning2d.model", "linking.model", "cubic.lagr", "dilaton.lagr", "harmonic.lagr", "two_coord.lagr",
]


def _jets_vs_fd(rng):
    worst = 0.0
    for name in CORPUS:
        m = fixture_model(name)
        for _ in range(5):
            x = rng.uniform(-0.5, 0.5, m.n) + 0.7
            t = float(rng.uniform(-0.5, 0.5))
            z = np.append(x, t)
            jet = m.eval_system(x, t).det
            f = lambda v: m.det_value(v[:-1], v[-1])  # noqa: E731
            h = 1e-5
            for i in range(m.n + 1):
                e = np.zeros(m.n + 1)
                e[i] = h
                g_fd = (f(z + e) - f(z - e)) / (2 * h)
                sc = max(1.0, abs(jet.value), float(np.abs(jet.grad).max()))
                worst = max(worst, abs(g_fd - jet.grad[i]) / sc)
                for j in range(m.n + 1):
                    d = np.zeros(m.n + 1)
                    d[j] = 1e-4
                    h_fd = (f(z + e * 10 + d) - f(z + e * 10 - d) - f(z - e * 10 + d) + f(z - e * 10 - d)) / (4 * 1e-4 * 1e-4)
                    hs = max(sc, float(np.abs(jet.hess).max()))
                    worst = max(worst, abs(h_fd - jet.hess[i, j]) / hs)
    return worst


def _adjugate_identity(rng):
    worst = 0.0
    for k in range(200):
        n = 1 + k % 6
        A = rng.normal(size=(n, n))
        det, adj = det_adjugate_values(A)
        sc = max(1.0, float(np.abs(A).max())) ** n
        worst = max(worst, float(np.abs(adj @ A - det * np.eye(n)).max()) / sc)
    return worst


def _branches_pass(rng):
    total = failed = 0
    models = [(fixture_model(name), x0, t0) for name, x0, t0 in FIXTURE_POINTS]
    for k in range(30):
        defect = 1 if k % 2 else 2
        n = 2 + k % 3 + (defect == 2)
        models.append((random_singular_model(rng, n, defect), np.zeros(n), 0.0))
    for m, x0, t0 in models:
        for b in classify(m, x0, t0).branches:
            total += 1
            failed += not branch_passes(m, b)[0]
    return total, failed


def _balances():
    third, quarter = Fraction(1, 3), Fraction(1, 4)
    return (
        balance_reflecting(third, 2 * third, 2 * third) == (0, 0, 0)
        and balance_complicated(quarter, 3 * quarter, 2 * quarter) == (0, 0, 0)
    )


def _invariance(rng):
    bad = 0
    for k in range(50):
        name, x0, t0 = FIXTURE_POINTS[k % len(FIXTURE_POINTS)]
        m = fixture_model(name)
        ref = classify(m, x0, t0)
        O = random_orthogonal(rng, m.n)
        w = rng.uniform(0.2, 5.0, size=m.n)
        got = classify(transformed_model(m, O, w), O.T @ np.asarray(x0), t0)
        bad += got.kind is not ref.kind or len(got.branches) != len(ref.branches)
    return bad


def criterion_8():
    t = time.perf_counter()
    rng = np.random.default_rng(8)
    fd = _jets_vs_fd(rng)
    adj = _adjugate_identity(rng)
    total, failed = _branches_pass(rng)
    exact = _balances()
    bad = _invariance(rng)
    el = time.perf_counter() - t
    ok = fd <= 1e-6 and adj <= 1e-9 and failed == 0 and total > 0 and exact and bad == 0
    detail = (
        f"(i) fd={fd:.1e} (ii) adj={adj:.1e} (iii) {total - failed}/{total} branches "
        f"(iv) exact={exact} (v) {50 - bad}/50 invariant"
    )
    return report(8, "property suites", ok, el, 60.0, detail)


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6, criterion_7, criterion_8]


@pytest.mark.parametrize("criterion", CRITERIA, ids=[f"criterion_{i}" for i in range(1, 9)])
def test_acceptance(criterion, capsys):
    with capsys.disabled():
        ok = criterion()
    assert ok


if __name__ == "__main__":
    results = [c() for c in CRITERIA]
    sys.exit(0 if all(results) else 1)
