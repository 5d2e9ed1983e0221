import dataclasses

import numpy as np
import pytest

from conftest import fixture_model, random_singular_model
from singulode.coeffs import extract_defect1, extract_defect2
from singulode.errors import InconsistentReduction
from singulode.frame import build_frame
from singulode.model import explicit_model


def coeffs1(name, x0, t0):
    m = fixture_model(name)
    return m, extract_defect1(build_frame(m, x0, t0), m)


def test_scalar_turning_values():
    _, c = coeffs1("scalar_turning.model", [0.0], 1.0)
    assert (c.r, c.C0, c.F0, c.alpha, c.gamma) == (1.0, 1.0, 1.0, 0.0, 1.0)
    assert c.split is None


def test_scalar_intersection_values():
    _, c = coeffs1("scalar_turning.model", [0.0], 0.0)
    assert (c.r, c.C0, c.F0, c.alpha, c.gamma) == (1.0, 0.0, 0.0, 0.0, 1.0)


def test_reflecting_split():
    _, c = coeffs1("reflect.model", [0.0, 0.0], 0.0)
    assert c.r == 0.0 and c.split is not None
    s = c.split
    assert abs(s.r_hat) == pytest.approx(1.0)
    assert s.C0 == pytest.approx(-1.0)
    assert s.alpha_tilde == pytest.approx(-1.0)
    assert s.alpha == pytest.approx(1.0)
    assert c.chart.names == ("y~", "y", "tau")


def test_complicated_split():
    _, c = coeffs1("complicated.model", [0.0, 0.0], 0.0)
    s = c.split
    assert s.alpha_tilde == pytest.approx(0.0, abs=1e-14)
    assert s.alpha_hat == pytest.approx(-1.0)
    assert s.K == pytest.approx(-1.0)


DEFECT1_POINTS = [
    ("scalar_turning.model", [0.0], 1.0),
    ("scalar_turning.model", [0.0], 0.0),
    ("reflect.model", [0.0, 0.0], 0.0),
    ("complicated.model", [0.0, 0.0], 0.0),
    ("triple.model", [0.0, 0.0], 0.0),
    ("turning2d.model", [0.0, 0.0], 0.0),
]


@pytest.mark.parametrize("name,x0,t0", DEFECT1_POINTS)
def test_F0_identity(name, x0, t0):
    _, c = coeffs1(name, x0, t0)
    if c.split is None:
        assert c.F0 == pytest.approx(c.r * c.det_block * c.C0, abs=1e-10)
    assert c.K == pytest.approx(c.C0 * c.det_block, abs=1e-10)


def _raw_G(model, x, t):
    s = model.eval_system(x, t)
    n = model.n
    V = s.adj.val @ np.array([b.value for b in s.b])
    return float(s.det.grad[:n] @ V + s.det.value * s.det.grad[n])


def _decay_order(model, c, direction, t0):
    """Slope of log|G_raw - G_taylor| against log eps along ``eps * direction``."""
    eps = np.array([1e-2, 5e-3, 2.5e-3, 1.25e-3])
    errs = []
    for e in eps:
        v = e * direction
        x = c.chart.to_x(v)
        t = t0 + v[-1]
        errs.append(abs(_raw_G(model, x, t) - c.G_jet.taylor(v)))
    errs = np.maximum(errs, 1e-300)
    return np.polyfit(np.log(eps), np.log(errs), 1)[0], max(errs)


@pytest.mark.parametrize("name,x0,t0", DEFECT1_POINTS)
def test_jet_extraction_consistency(name, x0, t0):
    m, c = coeffs1(name, x0, t0)
    rng = np.random.default_rng(0)
    for _ in range(20):
        d = rng.normal(size=m.n + 1)
        d /= np.linalg.norm(d)
        order, worst = _decay_order(m, c, d, t0)
        assert worst < 1e-12 or order >= 2.7


def test_jet_extraction_consistency_random_models():
    rng = np.random.default_rng(1)
    for _ in range(10):
        m = random_singular_model(rng, 3)
        c = extract_defect1(build_frame(m, np.zeros(3), 0.0), m)
        d = rng.normal(size=4)
        order, worst = _decay_order(m, c, d / np.linalg.norm(d), 0.0)
        assert worst < 1e-12 or order >= 2.7


def test_named_coefficients_are_jet_entries():
    _, c = coeffs1("turning2d.model", [0.0, 0.0], 0.0)
    G = c.G_jet
    assert c.F0 == G.value and c.alpha == G.grad[0]
    assert np.array_equal(c.beta, G.grad[1:-1]) and c.gamma == G.grad[-1]


def test_linking_coefficients(linking):
    c = extract_defect2(build_frame(linking, [0.0, 0.0], 0.0), linking)
    got = [c.lambda1, c.lambda2, c.a1, c.b1, c.a2, c.b2]
    assert got == pytest.approx([0.5, -0.5, 2.0, -1.0, 1.0, -2.0], abs=1e-12)
    assert np.abs(c.const_terms).max() <= 1e-9


def test_linking_unit_rhs():
    m = explicit_model(["x1", "x2"], [["x1", "0"], ["0", "x2"]], ["1", "1"])
    c = extract_defect2(build_frame(m, [0.0, 0.0], 0.0), m)
    assert [c.a1, c.b1, c.a2, c.b2] == pytest.approx([1.0, 0.0, 0.0, -1.0], abs=1e-12)


def test_linking_zero_rhs():
    m = explicit_model(["x1", "x2"], [["x1", "0"], ["0", "x2"]], ["0", "0"])
    c = extract_defect2(build_frame(m, [0.0, 0.0], 0.0), m)
    assert [c.a1, c.b1, c.a2, c.b2] == [0.0, 0.0, 0.0, 0.0]


def test_defect2_constant_terms_small_on_random_models():
    rng = np.random.default_rng(2)
    for _ in range(10):
        m = random_singular_model(rng, 4, defect=2)
        c = extract_defect2(build_frame(m, np.zeros(4), 0.0), m)
        assert np.abs(c.const_terms).max() <= 1e-9 * max(1.0, c.scale)
        # ordering is fixed on the Hessian of det A, i.e. on lambda_i * det(A0_block)
        assert c.lambda1 * c.det_block >= c.lambda2 * c.det_block - 1e-12


def test_wrong_defect_is_rejected(linking, reflect):
    with pytest.raises(ValueError):
        extract_defect1(build_frame(linking, [0.0, 0.0], 0.0), linking)
    with pytest.raises(ValueError):
        extract_defect2(build_frame(reflect, [0.0, 0.0], 0.0), reflect)


def test_inconsistent_reduction_flagged():
    # defect 2 detected at a loose tolerance, reduction checked at a strict one
    m = explicit_model(["x1", "x2"], [["x1 + 1e-6", "0"], ["0", "x2"]], ["3", "1"])
    f = build_frame(m, [0.0, 0.0], 0.0, tol=1e-4)
    assert f.defect == 2
    extract_defect2(f, m)
    with pytest.raises(InconsistentReduction):
        extract_defect2(dataclasses.replace(f, tol=1e-9), m)


def test_chart_inverts_coordinate_change(reflect):
    c = extract_defect1(build_frame(reflect, [0.0, 0.0], 0.0), reflect)
    # reduced y equals det A = y at second order, so mapping back keeps x_2 == y
    for v in ([0.01, 0.02, 0.0], [-0.03, 0.01, 0.05]):
        x = c.chart.to_x(np.array(v))
        assert reflect.det_value(x, v[-1]) == pytest.approx(v[1], abs=1e-12)
