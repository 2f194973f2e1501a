"""Fixed-wing path-following guidance and control workbench.

A desk-scale closed-loop stack: smooth-saturation math utilities, parallel
transport path frames, a 6-DOF rigid-body plant with a compact aerodynamic
model, the cascaded speed/guidance/attitude controller with its practical
guards, a deterministic scenario runner, and numerical stability oracles.
"""

from .aircraft import (
    AeroParams,
    AircraftState,
    AirState,
    GlideMetrics,
    PlantModel,
    WindField,
    aero_force,
    air_state,
    glide_metrics,
    level_trim,
    step_dynamics,
    trimmed_state,
)
from .control import (
    Command,
    ControllerConfig,
    ControllerMemory,
    Gains,
    Guard,
    Measurements,
    PathController,
    attitude_omega,
    estimate_airvelocity,
    guidance_heading,
    heading_omega,
    moving_guidance,
    surface_allocation,
)
from .curves import (
    Carrier,
    Circle,
    CompositePath,
    Helix,
    Line,
    PathError,
    PathFrame,
    PathSpec,
    Segment,
    advance_frame,
    check_trim_conditions,
    closest_point,
    min_speed_for_trim,
    path_rates,
)
from .errors import PathwingError
from .oracles import (
    SatPiSystem,
    attitude_decay_trace,
    fit_log_slope,
    heading_loop_trace,
    integrate_sat_pi,
    linearized_heading_poles,
    monitor_decreasing,
    run_verification_suite,
)
from .scenario import Scenario, load_scenario, scenario_from_dict
from .simulate import SimLog, SimResult, run_scenario
from .vectors import SatProfile, Vec3, project_perp, rotate_about, smooth_sat

__version__ = "0.1.0"
