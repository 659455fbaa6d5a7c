"""Tools for piecewise-smooth dynamics with a single switching surface.

Two smooth vector fields glued along {x1 = 0} are integrated with event
detection and Filippov sliding, reduced at a boundary equilibrium to a
linear/constant normal form, probed for exponential stability from sampled
initial conditions, and, in dimension four, analyzed through the return map
their scale-invariant orbits induce on a section circle.
"""

__version__ = "0.1.0"

from .catalog import get_builtin
from .errors import (
    ConvergenceFailure,
    CrossingError,
    DegenerateError,
    DimensionError,
    DomainError,
    ExpressionError,
    ExpressionSyntaxError,
    FilippovError,
    InvalidDelta,
    MaxEventsExceeded,
    NonUniqueEvolutionError,
    NoReturnError,
    NotBoundaryEquilibrium,
    NotOnSurfaceError,
    ScalingHypothesisError,
    TwoFoldError,
    UnknownSymbolError,
    VariableIndexError,
    ZeroStateError,
)
from .expressions import FieldExpression, parse_expression, parse_field, pretty_print
from .integrate import (
    EventRecord,
    IntegratorConfig,
    Trajectory,
    TrajectorySegment,
    TimeScalingResult,
    check_right_entering,
    integrate,
    reparameterize_time,
    scale_right_piece,
    verify_time_scaling,
    write_events_csv,
    write_trajectory_csv,
)
from .reduction import (
    ProbeConfig,
    StabilityVerdict,
    SweepReport,
    check_uniqueness_condition,
    linearize_at_origin,
    robustness_sweep,
    sample_half_sphere,
    stability_probe,
    sweep_to_json,
    verdict_to_json,
    write_verdicts_json,
)
from .sphere import (
    OrbitStatistics,
    ReturnSample,
    SectionConfig,
    find_fixed_points,
    iterate_return_map,
    project_to_sphere,
    return_map,
    scan_return_map,
    section_point,
)
from .systems import (
    AffineField,
    BoundaryPointClass,
    SlidingData,
    ExpressionField,
    PiecewiseSystem,
    ReducedSystem,
    classify_boundary_point,
    reduced_sliding_matrix,
    sliding_data,
)

__all__ = [
    "__version__",
    # systems
    "AffineField",
    "ExpressionField",
    "PiecewiseSystem",
    "ReducedSystem",
    "BoundaryPointClass",
    "SlidingData",
    "classify_boundary_point",
    "sliding_data",
    "reduced_sliding_matrix",
    # expressions
    "FieldExpression",
    "parse_expression",
    "parse_field",
    "pretty_print",
    # integration
    "IntegratorConfig",
    "Trajectory",
    "TrajectorySegment",
    "EventRecord",
    "TimeScalingResult",
    "integrate",
    "reparameterize_time",
    "scale_right_piece",
    "verify_time_scaling",
    "check_right_entering",
    "write_trajectory_csv",
    "write_events_csv",
    # reduction / probing
    "ProbeConfig",
    "StabilityVerdict",
    "SweepReport",
    "linearize_at_origin",
    "check_uniqueness_condition",
    "sample_half_sphere",
    "stability_probe",
    "robustness_sweep",
    "verdict_to_json",
    "sweep_to_json",
    "write_verdicts_json",
    # section dynamics
    "SectionConfig",
    "ReturnSample",
    "OrbitStatistics",
    "section_point",
    "project_to_sphere",
    "return_map",
    "scan_return_map",
    "iterate_return_map",
    "find_fixed_points",
    # builtins
    "get_builtin",
    # errors
    "FilippovError",
    "ExpressionError",
    "ExpressionSyntaxError",
    "UnknownSymbolError",
    "VariableIndexError",
    "DomainError",
    "DimensionError",
    "NotOnSurfaceError",
    "TwoFoldError",
    "CrossingError",
    "DegenerateError",
    "ConvergenceFailure",
    "MaxEventsExceeded",
    "NonUniqueEvolutionError",
    "ScalingHypothesisError",
    "NotBoundaryEquilibrium",
    "InvalidDelta",
    "ZeroStateError",
    "NoReturnError",
]
