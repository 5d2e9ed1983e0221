"""Implicit ODE models ``A(x, t) x' = b(x, t)`` and their file format.

Model files are line oriented::

    # comment
    dim = 2
    vars = x, y
    param k = 0.5
    A[1][1] = y
    A[2][1] = y - x
    A[2][2] = 1
    b[1] = -1
    b[2] = 0

Omitted ``A`` entries are zero; every ``b`` entry is required.  A
Lagrangian model is written instead as::

    mode = lagrangian
    coords = q
    L = qdot^3/3

where the velocity of coordinate ``q`` is named ``qdot``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np

from . import exprlang as el
from .errors import DomainError, FormatError
from .exprlang import Expr, ParseError
from .taylor import Jet2, JetMatrix, det_adjugate, det_adjugate_values, jet_variable

_NAME_RE = re.compile(r"^[A-Za-z][A-Za-z0-9_]*$")
_A_KEY = re.compile(r"^A\s*\[\s*(\d+)\s*\]\s*\[\s*(\d+)\s*\]$")
_B_KEY = re.compile(r"^b\s*\[\s*(\d+)\s*\]$")
_PARAM_KEY = re.compile(r"^param\s+([A-Za-z][A-Za-z0-9_]*)$")


@dataclass(frozen=True)
class ImplicitOdeModel:
    n: int
    var_names: tuple[str, ...]
    A_entries: tuple[tuple[Expr, ...], ...]
    b_entries: tuple[Expr, ...]
    params: Mapping[str, float] = field(default_factory=dict)
    provenance: str = "explicit"

    def __post_init__(self):
        if self.n < 1:
            raise FormatError("dimension must be at least 1")
        if len(self.var_names) != self.n:
            raise FormatError(f"expected {self.n} variable names, got {len(self.var_names)}")
        if len(self.A_entries) != self.n or any(len(r) != self.n for r in self.A_entries):
            raise FormatError("A must be n x n")
        if len(self.b_entries) != self.n:
            raise FormatError("b must have n entries")
        allowed = set(self.var_names) | {"t"} | set(self.params)
        for e in self._all_exprs():
            bad = el.names_in(e) - allowed
            if bad:
                raise FormatError(f"undeclared names {sorted(bad)}")

    def _all_exprs(self):
        for row in self.A_entries:
            yield from row
        yield from self.b_entries

    @property
    def state_names(self) -> tuple[str, ...]:
        return tuple(self.var_names) + ("t",)

    # compiled closures -------------------------------------------------
    @cached_property
    def _compiled(self):
        names = self.state_names
        A = [[el.compile_expr(e, names, self.params) for e in row] for row in self.A_entries]
        b = [el.compile_expr(e, names, self.params) for e in self.b_entries]
        return A, b

    @cached_property
    def _compiled_dA(self):
        # dA/dx_k for k < n and dA/dt for k == n, used for Jacobi's formula
        names = self.state_names
        out = []
        for wrt in names:
            out.append([[el.compile_expr(el.diff(e, wrt), names, self.params) for e in row] for row in self.A_entries])
        return out

    def _call(self, f, args, where):
        try:
            return f(args)
        except DomainError as exc:
            raise DomainError(exc.func, exc.value, where) from None
        except ZeroDivisionError:
            raise DomainError("division", 0.0, where) from None

    def eval_values(self, x, t) -> tuple[np.ndarray, np.ndarray]:
        """Plain float ``A`` and ``b`` at ``(x, t)``."""
        args = [float(v) for v in x] + [float(t)]
        Af, bf = self._compiled
        A = np.array([[self._call(f, args, f"A[{i+1}][{j+1}]") for j, f in enumerate(row)] for i, row in enumerate(Af)], dtype=float)
        b = np.array([self._call(f, args, f"b[{i+1}]") for i, f in enumerate(bf)], dtype=float)
        return A, b

    def field_values(self, x, t) -> tuple[np.ndarray, float]:
        """Desingularised right-hand side ``(adj(A) b, det A)``."""
        A, b = self.eval_values(x, t)
        det, adj = det_adjugate_values(A)
        return adj @ b, det

    def _seeds(self, x, t):
        m = self.n + 1
        return [jet_variable(i, v, m) for i, v in enumerate(list(x) + [t])]

    def _jet(self, f, seeds, where) -> Jet2:
        out = self._call(f, seeds, where)
        if not isinstance(out, Jet2):
            out = Jet2.constant(out, len(seeds))
        return out

    def eval_system(self, x, t) -> "SystemJets":
        """Jets of ``A``, ``b``, ``det A`` and ``adj A`` over ``(x, t)``."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise ValueError(f"x must have length {self.n}")
        seeds = self._seeds(x, t)
        Af, bf = self._compiled
        A = JetMatrix.from_jets([[self._jet(f, seeds, f"A[{i+1}][{j+1}]") for j, f in enumerate(row)] for i, row in enumerate(Af)])
        b = [self._jet(f, seeds, f"b[{i+1}]") for i, f in enumerate(bf)]
        det, adj = det_adjugate(A)
        return SystemJets(A, b, det, adj)

    def det_gradient_jets(self, x, t, adj: JetMatrix) -> list[Jet2]:
        """Jets of ``d(det A)/dx_k`` (and ``d/dt`` last) via Jacobi's formula
        ``d det A = tr(adj(A) dA)``; exact through second order."""
        seeds = self._seeds(np.asarray(x, dtype=float), t)
        out = []
        for k, dA in enumerate(self._compiled_dA):
            dM = JetMatrix.from_jets([[self._jet(f, seeds, f"dA/d{self.state_names[k]}") for f in row] for row in dA])
            out.append((adj @ dM).trace())
        return out

    def det_value(self, x, t) -> float:
        A, _ = self.eval_values(x, t)
        return det_adjugate_values(A)[0]


@dataclass(frozen=True)
class SystemJets:
    A: JetMatrix
    b: list
    det: Jet2
    adj: JetMatrix

    def field(self) -> list[Jet2]:
        """Jets of ``adj(A) b``."""
        return self.adj.matvec(self.b)


@dataclass(frozen=True)
class LagrangianModel:
    coords: tuple[str, ...]
    L: Expr
    params: Mapping[str, float] = field(default_factory=dict)

    @property
    def n_coords(self) -> int:
        return len(self.coords)

    @property
    def velocities(self) -> tuple[str, ...]:
        return tuple(q + "dot" for q in self.coords)


def lagrangian_to_implicit(lag: LagrangianModel) -> ImplicitOdeModel:
    """Euler-Lagrange equations in first-order implicit form.

    State is ``(q_1..q_k, qdot_1..qdot_k)``; ``A = diag(I, d2L/dqdot2)`` and
    ``b = (qdot, dL/dq - d2L/dqdot dt - d2L/dqdot dq . qdot)``.
    """
    q, v = lag.coords, lag.velocities
    k = len(q)
    n = 2 * k
    dL_dv = [el.diff(lag.L, vi) for vi in v]
    A = [[el.ZERO] * n for _ in range(n)]
    for i in range(k):
        A[i][i] = el.ONE
        for j in range(k):
            A[k + i][k + j] = el.diff(dL_dv[i], v[j])
    b = [el.Var(vi) for vi in v]
    for i in range(k):
        rhs = el.sub(el.diff(lag.L, q[i]), el.diff(dL_dv[i], "t"))
        for j in range(k):
            rhs = el.sub(rhs, el.mul(el.diff(dL_dv[i], q[j]), el.Var(v[j])))
        b.append(rhs)
    return ImplicitOdeModel(
        n=n,
        var_names=tuple(q) + tuple(v),
        A_entries=tuple(tuple(r) for r in A),
        b_entries=tuple(b),
        params=dict(lag.params),
        provenance="from_lagrangian",
    )


# -- file format ---------------------------------------------------------------

def _split_names(value: str, line: int) -> tuple[str, ...]:
    names = tuple(s.strip() for s in value.split(","))
    for s in names:
        if not _NAME_RE.match(s):
            raise FormatError(f"invalid name {s!r}", line)
        if s == "t":
            raise FormatError("'t' is reserved for time", line)
    if len(set(names)) != len(names):
        raise FormatError("duplicate names", line)
    return names


def _parse_expr(text, line, col, variables, params) -> Expr:
    try:
        return el.parse(text, variables, params)
    except ParseError as exc:
        span = exc.span.shifted(line, col - 1)
        raise type(exc)(exc.message, span) from None


def parse_model_file(text: str) -> ImplicitOdeModel | LagrangianModel:
    """Parse a model file, returning whichever kind it declares."""
    entries = []  # (line, key, value, value_col)
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0]
        if not body.strip():
            continue
        if "=" not in body:
            raise FormatError(f"expected 'key = value', got {body.strip()!r}", lineno)
        key, value = body.split("=", 1)
        col = len(key) + 2 + (len(value) - len(value.lstrip()))
        entries.append((lineno, key.strip(), value.strip(), col))

    header = {}
    params: dict[str, float] = {}
    for lineno, key, value, _ in entries:
        pm = _PARAM_KEY.match(key)
        if pm:
            name = pm.group(1)
            if name in params:
                raise FormatError(f"duplicate parameter {name!r}", lineno)
            try:
                params[name] = float(value)
            except ValueError:
                raise FormatError(f"parameter value must be a real number, got {value!r}", lineno) from None
        elif key in ("dim", "vars", "mode", "coords"):
            if key in header:
                raise FormatError(f"duplicate key {key!r}", lineno)
            header[key] = (lineno, value)

    mode = header.get("mode", (0, "explicit"))[1]
    if mode == "lagrangian":
        return _parse_lagrangian(entries, header, params)
    if mode != "explicit":
        raise FormatError(f"unknown mode {mode!r}", header["mode"][0])

    if "dim" not in header:
        raise FormatError("missing 'dim'")
    if "vars" not in header:
        raise FormatError("missing 'vars'")
    dline, dval = header["dim"]
    try:
        n = int(dval)
    except ValueError:
        raise FormatError(f"dim must be an integer, got {dval!r}", dline) from None
    if n < 1:
        raise FormatError("dim must be at least 1", dline)
    vline, vval = header["vars"]
    names = _split_names(vval, vline)
    if len(names) != n:
        raise FormatError(f"dim = {n} but {len(names)} vars declared", vline)
    clash = set(names) & set(params)
    if clash:
        raise FormatError(f"names used both as var and param: {sorted(clash)}", vline)

    A: list[list[Expr]] = [[el.ZERO] * n for _ in range(n)]
    seenA = set()
    b: list[Expr | None] = [None] * n
    for lineno, key, value, col in entries:
        if key in header or _PARAM_KEY.match(key):
            continue
        am, bm = _A_KEY.match(key), _B_KEY.match(key)
        if am:
            i, j = int(am.group(1)), int(am.group(2))
            if not (1 <= i <= n and 1 <= j <= n):
                raise FormatError(f"index A[{i}][{j}] out of range 1..{n}", lineno)
            if (i, j) in seenA:
                raise FormatError(f"duplicate entry A[{i}][{j}]", lineno)
            seenA.add((i, j))
            A[i - 1][j - 1] = _parse_expr(value, lineno, col, names, params)
        elif bm:
            i = int(bm.group(1))
            if not 1 <= i <= n:
                raise FormatError(f"index b[{i}] out of range 1..{n}", lineno)
            if b[i - 1] is not None:
                raise FormatError(f"duplicate entry b[{i}]", lineno)
            b[i - 1] = _parse_expr(value, lineno, col, names, params)
        else:
            raise FormatError(f"unknown key {key!r}", lineno)
    missing = [i + 1 for i, e in enumerate(b) if e is None]
    if missing:
        raise FormatError(f"missing b entries {missing}")
    return ImplicitOdeModel(n, names, tuple(tuple(r) for r in A), tuple(b), params, "explicit")


def _parse_lagrangian(entries, header, params) -> LagrangianModel:
    if "coords" not in header:
        raise FormatError("lagrangian mode needs 'coords'")
    if "dim" in header or "vars" in header:
        raise FormatError("'dim'/'vars' are not used in lagrangian mode", header.get("dim", header.get("vars"))[0])
    cline, cval = header["coords"]
    coords = _split_names(cval, cline)
    velocities = [q + "dot" for q in coords]
    if set(velocities) & set(coords):
        raise FormatError("coordinate names collide with velocity names", cline)
    L = None
    for lineno, key, value, col in entries:
        if key in header or _PARAM_KEY.match(key):
            continue
        if key != "L":
            raise FormatError(f"unknown key {key!r} in lagrangian mode", lineno)
        if L is not None:
            raise FormatError("duplicate 'L'", lineno)
        L = _parse_expr(value, lineno, col, list(coords) + velocities, params)
    if L is None:
        raise FormatError("missing 'L'")
    return LagrangianModel(coords, L, params)


def load_model(file_text: str) -> ImplicitOdeModel:
    """Load a model file; Lagrangian files are converted to implicit form."""
    m = parse_model_file(file_text)
    if isinstance(m, LagrangianModel):
        return lagrangian_to_implicit(m)
    return m


def load_model_path(path) -> ImplicitOdeModel:
    with open(path, encoding="utf-8") as fh:
        return load_model(fh.read())


def dump_model(model: ImplicitOdeModel) -> str:
    """Explicit-form model file text; ``load_model(dump_model(m)) == m``."""
    lines = []
    if model.provenance == "from_lagrangian":
        lines.append("# generated from a Lagrangian; state = (coords, velocities)")
    lines.append(f"dim = {model.n}")
    lines.append("vars = " + ", ".join(model.var_names))
    for k, v in model.params.items():
        lines.append(f"param {k} = {float(v)!r}")
    for i, row in enumerate(model.A_entries):
        for j, e in enumerate(row):
            if not (isinstance(e, el.Constant) and e.value == 0.0):
                lines.append(f"A[{i+1}][{j+1}] = {el.to_string(e)}")
    for i, e in enumerate(model.b_entries):
        lines.append(f"b[{i+1}] = {el.to_string(e)}")
    return "\n".join(lines) + "\n"


def explicit_model(var_names: Sequence[str], A: Sequence[Sequence[str]], b: Sequence[str], params=None) -> ImplicitOdeModel:
    """Build a model from expression strings (convenience for scripts and tests)."""
    params = dict(params or {})
    names = tuple(var_names)
    Ae = tuple(tuple(el.parse(str(s), names, params) for s in row) for row in A)
    be = tuple(el.parse(str(s), names, params) for s in b)
    return ImplicitOdeModel(len(names), names, Ae, be, params)


def same_model(a: ImplicitOdeModel, b: ImplicitOdeModel) -> bool:
    return (
        a.n == b.n
        and tuple(a.var_names) == tuple(b.var_names)
        and a.A_entries == b.A_entries
        and a.b_entries == b.b_entries
        and dict(a.params) == dict(b.params)
    )
