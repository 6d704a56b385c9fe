"""DCM-based model predictive walking controller and push-recovery simulator.

The controller optimizes CoP motion, upcoming footstep placements and
centroidal angular-momentum rate in a single quadratic program per control
tick over time-varying divergent-component-of-motion dynamics. The simulator
closes the loop around an RK4 pendulum plant, injects CoM pushes and measures
maximum recoverable push magnitudes per controller mode.
"""

from .gait_plan import (
    ConfigurationError,
    FootstepPlan,
    PhaseTimeline,
    ProfileError,
    ReferenceTrajectories,
    VerticalProfile,
    build_plan,
    build_references,
    build_vertical_profile,
)
from .lip_model import (
    ComState,
    FreeFallError,
    FrequencySingularityError,
    GRAVITY,
    Omega,
    cmp_from_cop,
    dcm_from_state,
    integrate_plant,
    natural_frequency,
)
from .mpc import FallPredictedError, MpcConfig, WalkingMpc
from .qp_solver import ActiveSetQp, QpProblem, QpSolution, kkt_residual
from .scenario_io import ScenarioFormatError, load_scenario, scenario_to_dict
from .simulator import (
    CONTROLLER_MODES,
    PushEvent,
    RecoveryEnvelope,
    Scenario,
    SimLog,
    compare_controllers,
    max_recoverable_push,
    recoverable,
    run,
)

__version__ = "0.1.0"

__all__ = [
    "ActiveSetQp",
    "CONTROLLER_MODES",
    "ComState",
    "ConfigurationError",
    "FallPredictedError",
    "FootstepPlan",
    "FreeFallError",
    "FrequencySingularityError",
    "GRAVITY",
    "MpcConfig",
    "Omega",
    "PhaseTimeline",
    "ProfileError",
    "PushEvent",
    "QpProblem",
    "QpSolution",
    "RecoveryEnvelope",
    "ReferenceTrajectories",
    "Scenario",
    "ScenarioFormatError",
    "SimLog",
    "VerticalProfile",
    "WalkingMpc",
    "build_plan",
    "build_references",
    "build_vertical_profile",
    "cmp_from_cop",
    "compare_controllers",
    "dcm_from_state",
    "integrate_plant",
    "kkt_residual",
    "load_scenario",
    "max_recoverable_push",
    "natural_frequency",
    "recoverable",
    "run",
    "scenario_to_dict",
]
