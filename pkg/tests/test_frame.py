import numpy as np
import pytest

from conftest import fixture_model, random_singular_model
from singulode.errors import BlockSingular, NotSingular, UnsupportedDefect
from singulode.frame import build_frame, detect_defect, transform_rhs
from singulode.model import explicit_model


def test_detect_defect_examples():
    d, k = detect_defect([[0.0, 0.0], [0.0, 1.0]])
    assert d == 1 and np.allclose(k[:, 0], [1.0, 0.0])
    d, k = detect_defect(np.zeros((2, 2)))
    assert d == 2 and k.shape == (2, 2)
    with pytest.raises(NotSingular):
        detect_defect(np.eye(2))
    with pytest.raises(UnsupportedDefect):
        detect_defect(np.zeros((3, 3)))


def test_kernel_sign_convention():
    _, k = detect_defect([[1.0, 1.0], [1.0, 1.0]])
    v = k[:, 0]
    assert np.isclose(abs(v[0]), abs(v[1])) and v[0] > 0


def test_reflecting_frame(reflect):
    f = build_frame(reflect, [0.0, 0.0], 0.0)
    assert f.defect == 1
    assert np.allclose(f.kernel[:, 0], [1.0, 0.0])
    assert np.allclose(np.abs(f.complement[:, 0]), [0.0, 1.0])
    assert np.allclose(np.abs(f.A0_block), [[1.0]])
    assert np.allclose(np.abs(f.D_jet.grad), [0.0, 1.0, 0.0])
    assert f.D_jet.grad[0] == 0.0  # r = 0
    rhs = transform_rhs(f)
    assert rhs.C0[0] == pytest.approx(-1.0)


def test_scalar_frame(scalar):
    f = build_frame(scalar, [0.0], 1.0)
    assert f.complement.shape == (1, 0)
    assert f.D_jet.grad.tolist() == [1.0, 0.0]
    for t0 in (1.0, 0.0, -2.5):
        assert transform_rhs(build_frame(scalar, [0.0], t0)).C0[0] == t0


def test_zero_rhs_gives_zero_constants():
    m = explicit_model(["x", "y"], [["y", "0"], ["y - x", "1"]], ["0", "0"])
    rhs = transform_rhs(build_frame(m, [0.0, 0.0], 0.0))
    assert rhs.C0[0] == 0.0 and np.all(rhs.d0 == 0.0)


def test_diag_rotation(linking):
    f = build_frame(linking, [0.0, 0.0], 0.0)
    assert f.defect == 2
    H = f.D_jet.hess[:2, :2]
    assert abs(H[0, 1]) <= 1e-9
    assert 0.5 * H[0, 0] == pytest.approx(0.5) and 0.5 * H[1, 1] == pytest.approx(-0.5)


def test_block_singular():
    # A0 = [[0,1],[0,0]] has defect 1 but the complementary block vanishes
    m = explicit_model(["x", "y"], [["x", "1"], ["y", "0"]], ["1", "1"])
    with pytest.raises(BlockSingular):
        build_frame(m, [0.0, 0.0], 0.0)


FIXTURE_POINTS = [
    ("scalar_turning.model", [0.0], 1.0),
    ("reflect.model", [0.0, 0.0], 0.0),
    ("complicated.model", [0.0, 0.0], 0.0),
    ("linking.model", [0.0, 0.0], 0.0),
    ("triple.model", [0.0, 0.0], 0.0),
    ("turning2d.model", [0.0, 0.0], 0.0),
]


@pytest.mark.parametrize("name,x0,t0", FIXTURE_POINTS)
def test_fixture_frames_orthonormal_and_deterministic(name, x0, t0):
    m = fixture_model(name)
    f = build_frame(m, x0, t0)
    assert f.gram_residual() <= 1e-10
    for j in range(f.defect):
        assert np.linalg.norm(f.A0 @ f.kernel[:, j]) <= f.tol * max(1.0, np.linalg.norm(f.A0))
    assert abs(f.det_block) > f.tol
    g = build_frame(m, x0, t0)
    assert np.array_equal(f.Q, g.Q) and np.array_equal(f.P, g.P)


def test_random_singular_models_frames():
    rng = np.random.default_rng(7)
    for k in range(100):
        n = 2 + k % 4
        defect = 1 if k % 3 else 2
        m = random_singular_model(rng, n, defect)
        f = build_frame(m, np.zeros(n), 0.0)
        assert f.defect == defect
        assert f.gram_residual() <= 1e-10
        assert np.linalg.det(f.P) * np.linalg.det(f.Q) > 0
        # P^T A0 Q is block diagonal with a zero kernel block
        T = f.P.T @ f.A0 @ f.Q
        assert np.abs(T[:defect, :]).max() <= 1e-9 and np.abs(T[:, :defect]).max() <= 1e-9


def test_frame_reexpression_is_exact():
    rng = np.random.default_rng(8)
    for _ in range(20):
        m = random_singular_model(rng, 3)
        f = build_frame(m, np.zeros(3), 0.0)
        raw = f.system.det
        M = np.eye(4)
        M[:3, :3] = f.Q
        Minv = np.linalg.inv(M)
        back_grad = Minv.T @ f.D_jet.grad
        back_hess = Minv.T @ f.D_jet.hess @ Minv
        assert np.abs(back_grad - raw.grad).max() <= 1e-10
        assert np.abs(back_hess - raw.hess).max() <= 1e-10


def test_defect2_rotation_invariants():
    rng = np.random.default_rng(9)
    for _ in range(20):
        m = random_singular_model(rng, 4, defect=2)
        f = build_frame(m, np.zeros(4), 0.0)
        H = f.D_jet.hess[:2, :2]
        assert abs(H[0, 1]) <= 1e-9 * max(1.0, np.abs(H).max())
        assert H[0, 0] >= H[1, 1]
        raw = f.system.det.hess[:4, :4]
        Hk = f.kernel.T @ raw @ f.kernel
        assert np.trace(H) == pytest.approx(np.trace(Hk), abs=1e-10)
        assert np.linalg.det(H) == pytest.approx(np.linalg.det(Hk), abs=1e-10)


def test_rhs_constant_matches_projection():
    rng = np.random.default_rng(10)
    for _ in range(10):
        m = random_singular_model(rng, 3)
        f = build_frame(m, np.zeros(3), 0.0)
        _, b0 = m.eval_values(np.zeros(3), 0.0)
        rhs = transform_rhs(f)
        assert rhs.C0[0] == pytest.approx(f.left_kernel[:, 0] @ b0, abs=1e-12)
