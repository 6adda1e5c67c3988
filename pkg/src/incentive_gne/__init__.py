"""Two-layer equilibrium seeking for quadratic hypomonotone games.

A coordinator learns the agents' pseudo-gradients from noisy cost feedback,
designs personalized quadratic incentives, and the regularized inner game is
solved to its unique variational equilibrium each outer round.
"""

from .game import (
    GameStructureError,
    QuadraticGame,
    ValidationReport,
    WeakConvexityCertificate,
    validate_game,
)
from .geometry import EmptyFeasibleSetError, FeasibleGeometry, ProjectionError
from .incentives import (
    IncentiveSchedule,
    IncentiveState,
    ScheduleError,
    extended_mapping,
    incentive_target,
    make_schedule,
    schedule_from_gain_and_step,
)
from .inner_solver import (
    AffineMap,
    InnerSolveError,
    SolverParams,
    VgneSolution,
    affine_vi_oracle,
    natural_residual,
    solve_vgne,
)
from .estimators import (
    FeedbackSample,
    GaussianProcessEstimator,
    LeastSquaresEstimator,
    NoiseModel,
    PerfectEstimator,
    ReconstructionDiagnostics,
    feedback,
    make_estimator,
)
from .orchestrator import (
    DescentReport,
    OracleResult,
    RunTrace,
    StationarityCertificate,
    average_residual,
    default_start,
    descent_check,
    global_minimizer_oracle,
    run,
    select_tbar,
    stationarity_residual,
    theorem_bound,
)

__version__ = "0.1.0"
