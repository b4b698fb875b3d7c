"""Interacting-particle simulation and verification of degenerate kinetic
mean-field SDE systems: positions driven by averaged drift alone, velocities
by averaged drift plus a uniformly elliptic averaged diffusion."""

from .coefficients import (
    CoefficientSet,
    HypothesisReport,
    attraction_system,
    catalog_names,
    eval_b0,
    eval_b1,
    eval_sigma,
    free_system,
    make_system,
    rough_system,
    transport_system,
    validate_hypotheses,
)
from .diagnostics import (
    INDEPENDENCE_PAIRS,
    IndependenceReport,
    LadderReport,
    MomentReport,
    degeneracy_check,
    ellipticity_scan,
    increment_moment4,
    independence_test,
    ladder,
    moment_sup4,
    run_independence_battery,
    sliced_w1,
    wiener_paths,
)
from .errors import (
    ConfigError,
    ConstructionError,
    DomainError,
    MVSDEError,
    ShapeError,
    SimulationError,
    StoreError,
    StoreIntegrityError,
    StoreVersionError,
)
from .integrator import (
    InitialLawSpec,
    ParticleEnsemble,
    SimulationConfig,
    TrajectoryStore,
    em_step,
    init_ensemble,
    simulate,
)
from .meanfield import EmpiricalMeasure, mf_batch, mf_drift0, mf_drift1, mf_sigma
from .mollify import (
    MollifiedCoefficientSet,
    MollifierKernel,
    QuadratureSpec,
    lipschitz_probe,
    mollify,
)
from .persistence import load_store, save_store

__version__ = "0.1.0"
