"""Shared fixtures and model builders for the test suite."""
import numpy as np
import pytest

from singulode import exprlang as el
from singulode import fixture_path
from singulode.model import ImplicitOdeModel, load_model_path


def fixture_model(name: str) -> ImplicitOdeModel:
    return load_model_path(fixture_path(name))


@pytest.fixture
def reflect():
    return fixture_model("reflect.model")


@pytest.fixture
def complicated():
    return fixture_model("complicated.model")


@pytest.fixture
def scalar():
    return fixture_model("scalar_turning.model")


@pytest.fixture
def linking():
    return fixture_model("linking.model")


def _lin(coeffs, names, const=0.0) -> str:
    terms = [repr(float(const))]
    terms += [f"({float(c)!r})*{v}" for c, v in zip(coeffs, names) if c != 0.0]
    return " + ".join(terms)


def random_orthogonal(rng, n) -> np.ndarray:
    q, r = np.linalg.qr(rng.normal(size=(n, n)))
    return q * np.sign(np.diag(r))


def random_singular_model(rng, n: int, defect: int = 1, quad: float = 0.3) -> ImplicitOdeModel:
    """Model singular at the origin with rank(A0) = n - defect, linear and
    mildly quadratic dependence on (x, t)."""
    names = tuple(f"x{i+1}" for i in range(n))
    U, V = random_orthogonal(rng, n), random_orthogonal(rng, n)
    s = rng.uniform(1.0, 2.0, size=n)
    s[n - defect:] = 0.0
    A0 = U @ np.diag(s) @ V.T
    allv = names + ("t",)
    A = []
    for i in range(n):
        row = []
        for j in range(n):
            e = _lin(rng.normal(size=n + 1), allv, A0[i, j])
            k = rng.integers(n)
            e += f" + ({quad * rng.normal()!r})*{names[k]}^2"
            row.append(e)
        A.append(row)
    b = [_lin(rng.normal(size=n + 1), allv, rng.normal()) for _ in range(n)]
    Ae = tuple(tuple(el.parse(s_, names) for s_ in row) for row in A)
    be = tuple(el.parse(s_, names) for s_ in b)
    return ImplicitOdeModel(n, names, Ae, be, {})


def transformed_model(model: ImplicitOdeModel, O: np.ndarray, row_scale) -> ImplicitOdeModel:
    """State change ``x = O x'`` and left multiplication by ``diag(row_scale)``.

    The new model ``diag(w) A(O x', t) O x'' = diag(w) b(O x', t)`` has the
    same solutions up to the rotation.
    """
    n = model.n
    new = tuple(f"{v}_r" for v in model.var_names)
    sub = {}
    for i, v in enumerate(model.var_names):
        e = el.ZERO
        for j in range(n):
            e = el.add(e, el.mul(el.Constant(float(O[i, j])), el.Var(new[j])))
        sub[v] = e
    A = [[el.substitute(e, sub) for e in row] for row in model.A_entries]
    b = [el.substitute(e, sub) for e in model.b_entries]
    A2 = []
    for i in range(n):
        row = []
        for j in range(n):
            e = el.ZERO
            for k in range(n):
                e = el.add(e, el.mul(A[i][k], el.Constant(float(O[k, j]))))
            row.append(el.mul(el.Constant(float(row_scale[i])), e))
        A2.append(tuple(row))
    b2 = tuple(el.mul(el.Constant(float(row_scale[i])), b[i]) for i in range(n))
    return ImplicitOdeModel(n, new, tuple(A2), b2, dict(model.params))
