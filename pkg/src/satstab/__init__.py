"""Saturating state-feedback synthesis from models or noisy data.

The package designs controllers u = sat(K x) for discrete-time linear plants
by solving small semidefinite programs, certifies an ellipsoidal estimate of
the basin of attraction together with an invariant attractor ellipsoid, and
reproduces the whole design-and-verify loop from recorded data alone.
"""
from .errors import (
    AllInfeasible,
    EmptySet,
    NoiseBoundViolation,
    NumericalError,
    SatStabError,
    ShapeError,
    SingularBlock,
)
from .harness import (
    DataCollection,
    ExperimentPlan,
    ExperimentReport,
    emit_figures,
    generate_data,
    informativity,
    run_experiment,
)
from .qmi_relaxation import (
    QuadraticSet,
    RelaxationInstance,
    check_equivalence,
    consistency_set,
    in_sigma,
    relaxed_lmi,
    sample_sigma,
    sigma_center_radius,
    slemma_embedding,
)
from .saturated_sys import (
    Controller,
    Ellipsoid,
    NoiseModel,
    Plant,
    deadzone,
    ellipsoid_boundary_points,
    ellipsoid_in_S,
    in_S_of_G,
    sat,
    sector_holds,
    simulate,
    step,
)
from .sdp import (
    LmiConstraint,
    LmiProblem,
    SolveOptions,
    SolveReport,
    VarSpace,
    check_feasible,
    solve,
)
from .synthesis import (
    DEFAULT_MU_GRID,
    CertificationReport,
    SynthesisConfig,
    SynthesisResult,
    build_inclusion,
    build_phi,
    build_psi,
    certify,
    synthesize,
)

__version__ = "0.1.0"
