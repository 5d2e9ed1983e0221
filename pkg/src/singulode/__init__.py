"""Singular points of implicit ODEs ``A(x, t) x' = b(x, t)``.

Classification of points where ``det A = 0``, leading-order branches through
them, and numerical continuation across the singular surface.
"""
from importlib import resources

from .classify import (
    Branch,
    Classification,
    Kind,
    branch_passes,
    branch_residual,
    branch_velocity,
    classify,
    evaluate_branch,
    residual_order,
)
from .errors import (
    BlockSingular,
    DimensionCap,
    DivisionByZero,
    DomainError,
    FormatError,
    InconsistentReduction,
    InsufficientSamples,
    NonFiniteState,
    NotSingular,
    SingulodeError,
    StepUnderflow,
    UnsupportedDefect,
    WrongSide,
)
from .frame import SingularFrame, build_frame, detect_defect
from .integrate import StepControl, Trajectory, desingularized_field, integrate, match_branch
from .model import (
    ImplicitOdeModel,
    LagrangianModel,
    dump_model,
    explicit_model,
    lagrangian_to_implicit,
    load_model,
    load_model_path,
)
from .taylor import Jet2, JetMatrix, det_adjugate, det_adjugate_values

__version__ = "0.1.0"


def fixture_path(name: str) -> str:
    """Path of a bundled fixture model, e.g. ``fixture_path("reflect.model")``."""
    return str(resources.files(__package__).joinpath("fixtures", name))
