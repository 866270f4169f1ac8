"""projmech: projector-based dynamics for linearly constrained systems.

Configuration space carries a kinetic metric, a potential and a set of
linear velocity constraints. The package builds the induced projector
pairs (metric-orthogonal and oblique), integrates the projected
Euler-Lagrange equations with post-step velocity projection, and
exposes the Poisson-side constructions: Dirac brackets, transverse
decompositions and the pseudo-Poisson tensor of a projector field.
"""

from .errors import (
    DegenerateConstraints,
    DifferentiationFailure,
    FirstClassConstraint,
    IllPosedDynamics,
    IntegrationFailure,
    NotSymplecticOnLeaf,
    ProjmechError,
    SingularMetric,
)
from .fields import (
    MetricField,
    PfaffianSystem,
    ScalarField,
    as_point,
    flat,
    jacobian,
    metric_inverse,
    sharp,
)
from .projectors import (
    AdaptedMetricBlocks,
    Convention,
    ObliqueFrame,
    ProjectorPair,
    adapted_metric,
    oblique_pair,
    orthogonal_pair,
    q_projector,
)
from .dynamics import (
    LagrangianSystem,
    State,
    Trajectory,
    constrained_accel,
    el_residual,
    energy,
    integrate,
    project_initial_velocity,
)
from .kernels import (
    ENV_VAR,
    HAVE_NUMBA,
    FieldCallbacks,
    build_stepper,
    resolve_backend,
)
from .poisson import (
    DiracDecomposition,
    LeafProjectors,
    PoissonField,
    SecondClassConstraintSet,
    bracket,
    canonical_poisson,
    coordinate_field,
    dirac_bracket,
    jacobiator,
    leaf_projectors,
    pseudo_poisson,
    pseudo_poisson_field,
    transverse_decomposition,
)
from .scenarios import (
    SCENARIOS,
    ScenarioSpec,
    chaplygin_sleigh,
    heisenberg_initial_state,
    heisenberg_oblique_frame,
    heisenberg_particle,
    heisenberg_reduced_oracle,
    sleigh_body_velocities,
    sleigh_initial_state,
    sleigh_reduced_oracle,
)

__version__ = "0.1.0"

__all__ = [
    "ProjmechError",
    "SingularMetric",
    "DifferentiationFailure",
    "DegenerateConstraints",
    "IllPosedDynamics",
    "IntegrationFailure",
    "FirstClassConstraint",
    "NotSymplecticOnLeaf",
    "MetricField",
    "ScalarField",
    "PfaffianSystem",
    "as_point",
    "jacobian",
    "metric_inverse",
    "sharp",
    "flat",
    "Convention",
    "ProjectorPair",
    "ObliqueFrame",
    "AdaptedMetricBlocks",
    "orthogonal_pair",
    "oblique_pair",
    "adapted_metric",
    "q_projector",
    "State",
    "Trajectory",
    "LagrangianSystem",
    "constrained_accel",
    "el_residual",
    "energy",
    "integrate",
    "project_initial_velocity",
    "FieldCallbacks",
    "build_stepper",
    "resolve_backend",
    "HAVE_NUMBA",
    "ENV_VAR",
    "PoissonField",
    "SecondClassConstraintSet",
    "coordinate_field",
    "canonical_poisson",
    "bracket",
    "dirac_bracket",
    "transverse_decomposition",
    "DiracDecomposition",
    "leaf_projectors",
    "LeafProjectors",
    "pseudo_poisson",
    "pseudo_poisson_field",
    "jacobiator",
    "chaplygin_sleigh",
    "sleigh_initial_state",
    "sleigh_body_velocities",
    "sleigh_reduced_oracle",
    "heisenberg_particle",
    "heisenberg_initial_state",
    "heisenberg_reduced_oracle",
    "heisenberg_oblique_frame",
    "SCENARIOS",
    "ScenarioSpec",
    "__version__",
]
