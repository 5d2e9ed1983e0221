import numpy as np
import pytest

from singulode import fixture_path
from singulode import exprlang as el
from singulode.errors import DomainError, FormatError
from singulode.exprlang import ParseError, UnknownIdentifier
from singulode.model import (
    ImplicitOdeModel,
    LagrangianModel,
    dump_model,
    explicit_model,
    lagrangian_to_implicit,
    load_model,
    load_model_path,
    parse_model_file,
    same_model,
)

FIXTURES = [
    "scalar_turning.model",
    "scalar_neg.model",
    "reflect.model",
    "complicated.model",
    "linking.model",
    "triple.model",
    "turning2d.model",
    "harmonic.lagr",
    "cubic.lagr",
    "two_coord.lagr",
    "dilaton.lagr",
]


def test_reflecting_file_has_det_y():
    m = load_model_path(fixture_path("reflect.model"))
    assert m.n == 2 and m.var_names == ("x", "y")
    rng = np.random.default_rng(0)
    for _ in range(10):
        x, t = rng.normal(size=2), rng.normal()
        assert m.det_value(x, t) == pytest.approx(x[1])


def test_scalar_turning_file():
    m = load_model("dim = 1\nvars = x\nA[1][1] = x\nb[1] = t\n")
    A, b = m.eval_values([2.0], 3.0)
    assert A.tolist() == [[2.0]] and b.tolist() == [3.0]


@pytest.mark.parametrize("name", FIXTURES)
def test_fixture_corpus_loads_and_round_trips(name):
    m = load_model_path(fixture_path(name))
    again = load_model(dump_model(m))
    assert same_model(m, again)


NEGATIVE_FILES = {
    "index": ("dim = 2\nvars = x, y\nA[3][1] = x\nb[1] = 0\nb[2] = 0\n", 3),
    "missing dim": ("vars = x\nb[1] = 0\n", None),
    "missing vars": ("dim = 1\nb[1] = 0\n", None),
    "dup entry": ("dim = 1\nvars = x\nA[1][1] = x\nA[1][1] = 1\nb[1] = 0\n", 4),
    "missing b": ("dim = 2\nvars = x, y\nb[1] = 0\n", None),
    "unknown key": ("dim = 1\nvars = x\nc[1] = 0\nb[1] = 0\n", 3),
    "count": ("dim = 2\nvars = x\nb[1] = 0\n", 2),
    "reserved t": ("dim = 1\nvars = t\nb[1] = 0\n", 2),
    "no equals": ("dim = 1\nvars x\n", 2),
    "bad mode": ("mode = hamiltonian\n", 1),
    "bad param": ("param k = abc\ndim = 1\nvars = x\nb[1] = 0\n", 1),
    "lagr no L": ("mode = lagrangian\ncoords = q\n", None),
    "lagr dim": ("mode = lagrangian\ncoords = q\ndim = 2\nL = q\n", 3),
}


@pytest.mark.parametrize("key", sorted(NEGATIVE_FILES))
def test_negative_corpus_format_errors(key):
    text, line = NEGATIVE_FILES[key]
    with pytest.raises(FormatError) as info:
        load_model(text)
    assert info.value.line == line


def test_parse_error_carries_file_position():
    text = "dim = 1\nvars = x\nA[1][1] = x +\nb[1] = 0\n"
    with pytest.raises(ParseError) as info:
        load_model(text)
    assert info.value.span.line == 3
    assert info.value.span.column == len("A[1][1] = x +") + 1
    with pytest.raises(UnknownIdentifier) as info:
        load_model("dim = 1\nvars = x\nb[1] = q\n")
    assert info.value.span.line == 3 and info.value.span.column == 8


def test_params_are_available():
    m = load_model("param k = 2\ndim = 1\nvars = x\nA[1][1] = k*x\nb[1] = t\n")
    A, _ = m.eval_values([1.5], 0.0)
    assert A[0, 0] == 3.0


def test_harmonic_lagrangian_is_identity():
    lag = parse_model_file("mode = lagrangian\ncoords = q\nL = qdot^2/2 - q^2/2\n")
    assert isinstance(lag, LagrangianModel)
    m = lagrangian_to_implicit(lag)
    assert m.provenance == "from_lagrangian" and m.var_names == ("q", "qdot")
    A, b = m.eval_values([0.3, -0.7], 1.0)
    assert A.tolist() == [[1.0, 0.0], [0.0, 1.0]]
    assert b.tolist() == [-0.7, -0.3]


def test_cubic_lagrangian():
    m = load_model_path(fixture_path("cubic.lagr"))
    assert el.to_string(m.A_entries[1][1]) == "2 * qdot"
    A, b = m.eval_values([0.4, 0.5], 0.0)
    assert A.tolist() == [[1.0, 0.0], [0.0, 1.0]]
    assert b.tolist() == [0.5, 0.0]
    assert m.det_value([1.0, 0.0], 0.0) == 0.0


def test_mixed_velocity_lagrangian():
    m = load_model("mode = lagrangian\ncoords = q1, q2\nL = q1dot*q2dot\n")
    A, _ = m.eval_values(np.zeros(4), 0.0)
    assert A[2:, 2:].tolist() == [[0.0, 1.0], [1.0, 0.0]]
    assert m.det_value(np.zeros(4), 0.0) == -1.0


def test_lagrangian_time_and_position_terms():
    # L = qdot^3/3 + pdot^2/2 - k q p + t q: b = (qdot, pdot, -k p + t, -k q)
    m = load_model_path(fixture_path("two_coord.lagr"))
    k = m.params["k"]
    x = np.array([0.3, -0.2, 0.1, 0.4])
    A, b = m.eval_values(x, 2.0)
    assert np.allclose(np.diag(A), [1, 1, 2 * x[2], 1])
    assert np.allclose(b, [x[2], x[3], -k * x[1] + 2.0, -k * x[0]])


def test_eval_system_reflecting_origin():
    m = load_model_path(fixture_path("reflect.model"))
    s = m.eval_system([0.0, 0.0], 0.0)
    assert s.det.value == 0.0 and s.det.grad.tolist() == [0.0, 1.0, 0.0]


def test_eval_system_scalar_convention():
    m = load_model_path(fixture_path("scalar_turning.model"))
    s = m.eval_system([0.0], 1.0)
    assert s.adj[0, 0].value == 1.0 and not s.adj[0, 0].grad.any()
    assert s.det.grad.tolist() == [1.0, 0.0]


def test_eval_system_adjugate_identity_off_surface():
    m = load_model_path(fixture_path("complicated.model"))
    rng = np.random.default_rng(3)
    for _ in range(20):
        x, t = rng.normal(size=2), rng.normal()
        s = m.eval_system(x, t)
        assert np.abs(s.adj.val @ s.A.val - s.det.value * np.eye(2)).max() <= 1e-9


def test_eval_system_is_deterministic():
    m = load_model_path(fixture_path("dilaton.lagr"))
    x = np.linspace(0.1, 0.4, m.n)
    a, b = m.eval_system(x, 0.2), m.eval_system(x, 0.2)
    assert np.array_equal(a.det.hess, b.det.hess) and np.array_equal(a.adj.hess, b.adj.hess)


def test_det_gradient_jets_match_det_jet():
    m = load_model_path(fixture_path("two_coord.lagr"))
    x = np.array([0.3, -0.2, 0.1, 0.4])
    s = m.eval_system(x, 0.5)
    grads = m.det_gradient_jets(x, 0.5, s.adj)
    assert np.allclose([g.value for g in grads], s.det.grad)
    for k, g in enumerate(grads):
        assert np.allclose(g.grad, s.det.hess[k])


def test_domain_error_names_entry():
    m = explicit_model(["x"], [["log(x)"]], ["1"])
    with pytest.raises(DomainError, match=r"A\[1\]\[1\]"):
        m.eval_values([-1.0], 0.0)


def test_constructor_invariants():
    with pytest.raises(FormatError):
        ImplicitOdeModel(0, (), (), ())
    with pytest.raises(FormatError):
        ImplicitOdeModel(1, ("x",), ((el.Var("z"),),), (el.ZERO,))
