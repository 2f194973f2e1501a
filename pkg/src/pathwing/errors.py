"""Exception types shared across the package."""


class PathwingError(Exception):
    """Base class for all package-specific errors."""


class FrameMismatch(PathwingError, ValueError):
    """Operation mixed vectors expressed in different reference frames."""


class UnitVectorError(PathwingError, ValueError):
    """A vector expected to have unit norm deviates beyond tolerance."""


class CircleAxisDegenerate(PathwingError):
    """Projection point lies on (or too close to) the circle axis."""


class NewtonNoConvergence(PathwingError):
    """Closest-point Newton iteration failed to converge."""


class IllPosedProjection(PathwingError):
    """Well-posedness margin of the path projection dropped below threshold."""


class DegenerateAirspeed(PathwingError):
    """Air velocity too small to extract attack/sideslip angles."""


class DegeneratePitot(PathwingError):
    """Longitudinal airspeed too small for the air-velocity estimator."""


class DegenerateSpeed(PathwingError):
    """Inertial speed too small for guidance computations."""


class HeadingSingular(PathwingError):
    """Thrust pre-compensation undefined: body axis nearly orthogonal to heading."""


class FrameSingular(PathwingError):
    """Desired attitude frame undefined (degenerate acceleration or airflow)."""


class CarrierTooFast(PathwingError):
    """Moving-path carrier speed exceeds the aircraft speed."""


class AllocationSingular(PathwingError):
    """Control-surface allocation undefined at near-zero airspeed."""


class NonFiniteState(PathwingError):
    """Simulation state became NaN or infinite (controller blow-up)."""


class ScenarioError(PathwingError, ValueError):
    """Scenario file failed validation."""
