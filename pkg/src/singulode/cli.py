"""Command-line front end.

Exit codes: 0 success (any definite kind, including no real branch),
1 error, 2 degenerate point, 3 point not singular, 4 verification failed,
64 usage error.  Data goes to stdout, diagnostics to stderr.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from .classify import Classification, Kind, branch_passes, classify, evaluate_branch
from .errors import DomainError, FormatError, NotSingular, SingulodeError, UnsupportedDefect
from .exprlang import ParseError
from .frame import DEFAULT_TOL
from .integrate import StepControl, Trajectory, integrate, match_branch
from .model import ImplicitOdeModel, dump_model, load_model_path

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_DEGENERATE = 2
EXIT_NOT_SINGULAR = 3
EXIT_VERIFY_FAILED = 4
EXIT_USAGE = 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def fmt(v: float, fixed17: bool = False) -> str:
    """Shortest round-trip float text, or 17 significant digits."""
    v = float(v)
    return f"{v:.17g}" if fixed17 else repr(v)


def _floats(text: str) -> list[float]:
    try:
        return [float(p) for p in text.replace(" ", "").split(",") if p]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def default_tol() -> float:
    env = os.environ.get("SINGULODE_TOL")
    if env:
        try:
            return float(env)
        except ValueError:
            raise UsageError(f"SINGULODE_TOL must be a number, got {env!r}") from None
    return DEFAULT_TOL


def _point(model: ImplicitOdeModel, args) -> tuple[np.ndarray, float]:
    if args.x0 is None or args.t0 is None:
        raise UsageError("--x0 and --t0 are required")
    if len(args.x0) != model.n:
        raise UsageError(f"--x0 needs {model.n} values for variables {', '.join(model.var_names)}")
    return np.array(args.x0), float(args.t0)


# ---------------------------------------------------------------- reports

def _kind_exit(cls: Classification) -> int:
    return EXIT_DEGENERATE if cls.kind is Kind.DEGENERATE else EXIT_OK


def _fmt_value(v, f17):
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt_value(u, f17) for u in v) + "]"
    if isinstance(v, dict):
        return "{" + ", ".join(f"{k}: {_fmt_value(u, f17)}" for k, u in v.items()) + "}"
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return fmt(v, f17)
    return str(v)


def classification_report(cls: Classification, fixed17: bool = False) -> str:
    lines = [f"kind: {cls.kind}" + (f" ({cls.case})" if cls.case else ""), f"description: {cls.description}"]
    for k, v in cls.diagnostics.items():
        lines.append(f"  {k} = {_fmt_value(v, fixed17)}")
    if cls.branches:
        lines.append("branches:")
        lines.append(branch_table(cls, fixed17))
    return "\n".join(lines)


def branch_table(cls: Classification, fixed17: bool = False) -> str:
    rows = [("branch", "side", "coordinate", "exponent", "coefficient", "odd")]
    for br in cls.branches:
        side = {1: "+", -1: "-", 0: "both"}[br.side]
        for tm in br.terms:
            rows.append((br.label, side, tm.name, str(tm.exponent), fmt(tm.coefficient, fixed17), "yes" if tm.odd else "no"))
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    return "\n".join("  " + "  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows)


def trajectory_csv(traj: Trajectory, fixed17: bool = False) -> str:
    out = ["s,t," + ",".join(traj.var_names) + ",detA"]
    for i in range(len(traj)):
        vals = [traj.s[i], traj.t[i], *traj.x[i], traj.detA[i]]
        out.append(",".join(fmt(v, fixed17) for v in vals))
    for ev in traj.events:
        out.append(f"# event,{fmt(ev.s, fixed17)},{ev.kind}")
    return "\n".join(out) + "\n"


def trajectory_text(traj: Trajectory, fixed17: bool = False) -> str:
    header = ["s", "t", *traj.var_names, "detA"]
    rows = [header]
    for i in range(len(traj)):
        rows.append([fmt(v, fixed17) for v in (traj.s[i], traj.t[i], *traj.x[i], traj.detA[i])])
    widths = [max(len(r[k]) for r in rows) for k in range(len(header))]
    lines = ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in rows]
    lines += [f"event at s={fmt(ev.s, fixed17)}: {ev.kind}" for ev in traj.events]
    return "\n".join(lines) + "\n"


def parse_trajectory_csv(text: str) -> tuple[list[str], np.ndarray, list[tuple[float, str]]]:
    """Inverse of :func:`trajectory_csv`: (header, rows, events)."""
    header = None
    rows, events = [], []
    for line in text.splitlines():
        if not line.strip():
            continue
        if line.startswith("# event,"):
            _, s, kind = line[2:].split(",")
            events.append((float(s), kind))
            continue
        if header is None:
            header = line.split(",")
            continue
        rows.append([float(v) for v in line.split(",")])
    return header, np.array(rows), events


# ---------------------------------------------------------------- verify

@dataclass
class VerifyReport:
    classification: Classification
    residual_orders: dict = field(default_factory=dict)  # label -> (order, required, ok)
    trajectory_fits: list = field(default_factory=list)  # (name, direction, fitted, predicted, ok)
    notes: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(v[2] for v in self.residual_orders.values()) and all(f[4] for f in self.trajectory_fits)


def verify_point(model: ImplicitOdeModel, x0, t0: float, tol: float = DEFAULT_TOL, s_span=(-1.0, 1.0), window: float = 1e-2) -> VerifyReport:
    """Residual ladder for every branch plus, when the point is not an
    equilibrium of the desingularised field, a power-law fit of the orbit
    through it."""
    cls = classify(model, x0, t0, tol)
    rep = VerifyReport(cls)
    for br in cls.branches:
        ok, order = branch_passes(model, br)
        rep.residual_orders[br.label] = (order, float(br.min_exponent) - 0.1, ok)
    if not cls.branches:
        return rep
    dx, dt = model.field_values(np.asarray(x0, dtype=float), t0)
    if np.linalg.norm(dx) <= tol * max(1.0, cls.frame.scale) and abs(dt) <= tol:
        rep.notes.append("point is an equilibrium of the desingularised field; no orbit fit")
        return rep
    traj = integrate(model, x0, t0, s_span, StepControl(rel_tol=1e-11, abs_tol=1e-13, h_max=0.05))
    mb = match_branch(traj, cls, window)
    for direction, (label, _) in mb.best.items():
        br = next(b for b in cls.branches if b.label == label)
        for tm in br.terms:
            ft = mb.fit(tm.name, direction)
            if ft is None or tm.coefficient == 0.0:
                continue
            pred = float(tm.exponent)
            rep.trajectory_fits.append((tm.name, direction, ft.exponent, pred, abs(ft.exponent - pred) <= 0.1))
    return rep


# ---------------------------------------------------------------- commands

def cmd_classify(args) -> int:
    model = load_model_path(args.model)
    x0, t0 = _point(model, args)
    cls = classify(model, x0, t0, args.tol)
    print(classification_report(cls, args.fixed17))
    return _kind_exit(cls)


def cmd_branches(args) -> int:
    model = load_model_path(args.model)
    x0, t0 = _point(model, args)
    cls = classify(model, x0, t0, args.tol)
    if args.format == "text":
        print(f"kind: {cls.kind}" + (f" ({cls.case})" if cls.case else ""))
        if cls.branches:
            print(branch_table(cls, args.fixed17))
        return _kind_exit(cls)
    print("branch,t," + ",".join(model.var_names))
    w = args.span
    for br in cls.branches:
        sides = (br.side,) if br.side else (-1, 1)
        for s in sides:
            for k in range(args.points + 1):
                tau = s * w * k / args.points
                x = evaluate_branch(br, t0 + tau)
                print(",".join([br.label, fmt(t0 + tau, args.fixed17)] + [fmt(v, args.fixed17) for v in x]))
    return _kind_exit(cls)


def cmd_integrate(args) -> int:
    model = load_model_path(args.model)
    x0, t0 = _point(model, args)
    if args.s_span is None:
        raise UsageError("--s-span is required for integrate")
    if len(args.s_span) != 2:
        raise UsageError("--s-span takes two numbers: lo,hi")
    ctl = StepControl(mode=args.mode, h0=args.h0, h_min=args.h_min, h_max=args.h_max, rel_tol=args.rel_tol, abs_tol=args.abs_tol)
    traj = integrate(model, x0, t0, args.s_span, ctl)
    text = trajectory_csv(traj, args.fixed17) if args.format == "csv" else trajectory_text(traj, args.fixed17)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    for ev in traj.events:
        print(f"event: {ev.kind} at s={fmt(ev.s)} t={fmt(ev.t)}", file=sys.stderr)
    return EXIT_OK


def cmd_verify(args) -> int:
    model = load_model_path(args.model)
    x0, t0 = _point(model, args)
    span = args.s_span if args.s_span else (-1.0, 1.0)
    rep = verify_point(model, x0, t0, args.tol, span)
    cls = rep.classification
    print(f"kind: {cls.kind}" + (f" ({cls.case})" if cls.case else ""))
    if cls.kind is Kind.DEGENERATE:
        print(f"nothing to verify: {cls.reason}")
        return EXIT_DEGENERATE
    for label, (order, need, ok) in rep.residual_orders.items():
        order_s = "inf" if math.isinf(order) else f"{order:.4f}"
        print(f"branch {label}: residual order {order_s} (need >= {need:.4f}) {'PASS' if ok else 'FAIL'}")
    for name, direction, fitted, pred, ok in rep.trajectory_fits:
        print(f"orbit s{'+' if direction > 0 else '-'} {name}: exponent {fitted:.4f} (branch {pred:.4f}) {'PASS' if ok else 'FAIL'}")
    for note in rep.notes:
        print(note)
    print("PASS" if rep.ok else "FAIL")
    return EXIT_OK if rep.ok else EXIT_VERIFY_FAILED


def cmd_derive_el(args) -> int:
    model = load_model_path(args.model)
    if model.provenance != "from_lagrangian":
        raise FormatError("derive-el needs a model file with 'mode = lagrangian'")
    text = dump_model(model)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="singulode", description="Singular points of implicit ODEs A(x,t) x' = b(x,t).")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    def common(sp, point=True):
        sp.add_argument("model", help="model file")
        if point:
            sp.add_argument("--x0", type=_floats, help="state, comma separated")
            sp.add_argument("--t0", type=float)
            sp.add_argument("--tol", type=float, default=None, help="zero threshold (default $SINGULODE_TOL or 1e-9)")
        sp.add_argument("--fixed17", action="store_true", help="print floats with 17 significant digits")

    sp = sub.add_parser("classify", help="classify a singular point")
    common(sp)
    sp.set_defaults(func=cmd_classify)

    sp = sub.add_parser("branches", help="leading-order branches")
    common(sp)
    sp.add_argument("--format", choices=("text", "csv"), default="text")
    sp.add_argument("--span", type=float, default=0.1, help="|t - t0| range for csv samples")
    sp.add_argument("--points", type=int, default=20)
    sp.set_defaults(func=cmd_branches)

    sp = sub.add_parser("integrate", help="continue a solution with the desingularised field")
    common(sp)
    sp.add_argument("--s-span", type=_floats, default=None, help="lo,hi")
    sp.add_argument("--mode", choices=("adaptive", "fixed"), default="adaptive")
    sp.add_argument("--h0", type=float, default=1e-2)
    sp.add_argument("--h-min", type=float, default=1e-12)
    sp.add_argument("--h-max", type=float, default=0.1)
    sp.add_argument("--rel-tol", type=float, default=1e-10)
    sp.add_argument("--abs-tol", type=float, default=1e-12)
    sp.add_argument("--format", choices=("csv", "text"), default="csv")
    sp.add_argument("-o", "--output")
    sp.set_defaults(func=cmd_integrate)

    sp = sub.add_parser("verify", help="check branches by residual decay and orbit fits")
    common(sp)
    sp.add_argument("--s-span", type=_floats, default=None)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("derive-el", help="explicit model file from a Lagrangian file")
    common(sp, point=False)
    sp.add_argument("-o", "--output")
    sp.set_defaults(func=cmd_derive_el)
    return p


_VALUE_FLAGS = ("--x0", "--t0", "--s-span", "--tol")


def _glue_negative_values(argv: list[str]) -> list[str]:
    """``--s-span -2,2`` -> ``--s-span=-2,2`` (argparse reads ``-2,2`` as a flag)."""
    out = []
    i = 0
    while i < len(argv):
        a = argv[i]
        if a in _VALUE_FLAGS and i + 1 < len(argv) and argv[i + 1].startswith("-") and len(argv[i + 1]) > 1 \
                and (argv[i + 1][1].isdigit() or argv[i + 1][1] == "."):
            out.append(f"{a}={argv[i + 1]}")
            i += 2
            continue
        out.append(a)
        i += 1
    return out


def main(argv=None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parser.parse_args(_glue_negative_values(argv))
    except SystemExit as exc:  # argparse: --help exits 0, bad usage exits 64
        return int(exc.code or 0)
    try:
        if hasattr(args, "tol") and args.tol is None:
            args.tol = default_tol()
        return args.func(args)
    except UsageError as exc:
        print(f"singulode: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NotSingular as exc:
        print(f"not singular: {exc}", file=sys.stderr)
        return EXIT_NOT_SINGULAR
    except UnsupportedDefect as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (SingulodeError, DomainError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    raise SystemExit(main())
