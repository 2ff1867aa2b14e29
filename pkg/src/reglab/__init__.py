"""Numerical comparison of the graph and Riesz topologies on unbounded operator families."""

from .core import (
    BoundedTransformData,
    ClosedRelation,
    GraphDecision,
    MatrixOperator,
    Tolerances,
    adjoint_relation,
    bounded_transform,
    graph_distance,
    graph_projection,
    inverse_bounded_transform,
    is_operator_graph,
    kernel_cokernel_dims,
    riesz_distance,
)
from .errors import (
    IncompatibleChartsError,
    InconclusiveError,
    NotInImageError,
    NumericalError,
    PreconditionError,
    RankAmbiguityError,
    RefinePathError,
    UncoveredNodeError,
)
from .families import (
    ContinuityReport,
    Mode,
    ModeFamily,
    OperatorFamily,
    ParamGrid,
    analyze,
    evaluate,
    modulus,
    refine_until,
    semibounded_constant,
)
from .gallery import GeneratorSpec, dd_constancy_check, family_from_json, generate
from .phi import Frame, phi, phi_family, phi_refinement, polar_twist, projection_transport, section_along_family
from .selfadjoint import (
    PolarizationFamily,
    chart_cover,
    compact_part,
    compatibility,
    conjugation_trivializer,
    essential_sign,
    make_riesz_continuous_sa,
    semibounded_check,
    spectral_projection,
)

__version__ = "0.1.0"
