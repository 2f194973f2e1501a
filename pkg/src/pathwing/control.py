"""Cascaded path-following controller.

Three stages run at the controller rate:

1. Speed loop: thrust from a pre-compensated PI law on either the inertial
   speed or the longitudinal airspeed, with a smoothly saturated
   anti-windup integrator.
2. Guidance: a desired heading vector built from the path error, with an
   approach angle that saturates at asin(mu) far from the path.
3. Attitude: a desired body triad constructed from the desired
   acceleration and the air velocity (which enforces zero sideslip), then
   an angular-velocity law driving the actual triad onto it.

Practical extensions: moving-path correction of the desired heading,
thrust clamping with a speed-setpoint override while pinned at the lower
bound, an attack-angle guard that re-aims the desired triad when the
predicted attack angle exceeds a stall margin, two-axis operation, and
rate/angle-limited control-surface allocation.

All vectors are inertial-frame numpy arrays unless a name says otherwise
(``va_body``, ``omega_body``, ...).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .aircraft import AeroParams
from .curves import PathError, PathFrame, PathSpec
from .errors import (
    AllocationSingular,
    CarrierTooFast,
    DegeneratePitot,
    DegenerateSpeed,
    FrameSingular,
    HeadingSingular,
    IllPosedProjection,
)
from .vectors import cross3, norm3, project_perp, rotate_about, sat_alpha, sat_tanh, unit3

DOWN = np.array([0.0, 0.0, 1.0])


class Guard(enum.IntFlag):
    """Bit flags recording which guards fired during a controller step."""

    NONE = 0
    HEADING_SINGULAR = 1
    FRAME_ACC_SINGULAR = 2
    FRAME_CROSS_SINGULAR = 4
    SPEED_DEGENERATE = 8
    ALPHA_GUARD = 16
    THRUST_CLAMPED = 32
    VSTAR_OVERRIDE = 64
    ILL_POSED_PROJECTION = 128
    PITOT_DEGENERATE = 256
    SEGMENT_SWITCH = 512


@dataclass(frozen=True)
class Gains:
    """Controller gains, bounds, and guard thresholds.

    Defaults follow the reference tuning for a 2 kg scale model:
    speed loop kT1 = 1.8, kT2 = kT1 / 2; guidance k1 = 1, mu = 0.5,
    d1 = 1, d2 = 0.5; heading kh1 = 1.4, kh2 = 0.49, kz = 10,
    delta_z = 0.5; attitude k_omega = 7.
    """

    # speed loop
    kT11: float = 1.8
    kT12: float = 0.0
    p_ev: float = 2.0
    kT2: float = 0.9
    kT3: float = 1.0
    delta_ev: float = 2.0
    # guidance
    k1: float = 1.0
    mu: float = 0.5
    d1: float = 1.0
    d2: float = 0.5
    # heading stabilization
    kh1: float = 1.4
    kh2: float = 0.49
    kz: float = 10.0
    delta_z: float = 0.5
    # attitude
    k_omega: float = 7.0
    # surface allocation (servo gain well above the rate-loop bandwidth)
    k_gamma: float = 50.0
    k_delta: float = 80.0
    kbar_delta: float = 120.0
    delta_max: tuple[float, float, float] = (0.5, 0.5, 0.5)
    rate_max: float = 1.0
    alloc_gain: tuple[float, float, float] = (45.0, 60.0, 45.0)
    # thrust and attack-angle limits
    T_min: float = 0.0
    T_max: float = 15.0
    alpha_max: float = 0.3
    # singularity guards
    eps_ih: float = 0.1
    eps_acc: float = 0.5
    eps_cross: float = 0.5
    eps_speed: float = 0.5
    eps_margin: float = 0.1
    omega_bar_max: float = 10.0
    # achievable body-rate magnitude (backstepping assumes rates are
    # produced by finite actuators; also bounds the command fed to the
    # surface allocation)
    omega_cmd_max: float = 2.0
    # one-pole low-pass on the finite-difference feedforward rates; a raw
    # backward difference amplifies estimator jitter by 1/dt
    ff_filter_tau: float = 0.15
    # low-pass on the estimated air velocity (inertial coordinates). The
    # vertical-balance estimate is only valid quasi-statically and is
    # slaved to the body attitude, so unfiltered it closes a fast positive
    # feedback loop through the attitude stage. Ignored in true-state
    # measurement mode.
    va_filter_tau: float = 0.4

    def __post_init__(self):
        positive = ("kT11", "kT2", "kT3", "delta_ev", "k1", "d1", "d2",
                    "kh1", "kh2", "kz", "delta_z", "k_omega")
        for name in positive:
            if not getattr(self, name) > 0.0:
                raise ValueError(f"gain {name} must be positive")
        if not 0.0 < self.mu < 1.0:
            raise ValueError("mu must lie in (0, 1)")
        if not (self.d1 <= 1.0 and self.d2 <= 1.0):
            raise ValueError("d1 and d2 must lie in (0, 1]")
        if self.kT12 < 0.0:
            raise ValueError("kT12 must be nonnegative")
        if self.kT12 > 0.0 and not self.p_ev > 1.0:
            raise ValueError("speed-error exponent must exceed 1 when kT12 > 0")
        if not self.T_min <= self.T_max:
            raise ValueError("T_min must not exceed T_max")

    def kT1(self, e_v: float) -> float:
        if self.kT12 == 0.0:
            return self.kT11
        return self.kT11 + self.kT12 * abs(e_v) ** self.p_ev


@dataclass
class ControllerMemory:
    """All controller-internal state carried between steps."""

    I_ev: float = 0.0
    z: np.ndarray = field(default_factory=lambda: np.zeros(3))
    delta: np.ndarray = field(default_factory=lambda: np.zeros(3))
    segment: int = 0
    s_hint: float = 0.0
    prev_hstar: Optional[np.ndarray] = None
    prev_ibar: Optional[np.ndarray] = None
    prev_jbar: Optional[np.ndarray] = None
    prev_kbar: Optional[np.ndarray] = None
    prev_l: Optional[np.ndarray] = None
    prev_frame: Optional[PathFrame] = None
    prev_error: Optional[PathError] = None
    va_est_filt: Optional[np.ndarray] = None
    omega_hstar_filt: np.ndarray = field(default_factory=lambda: np.zeros(3))
    omega_bar_filt: np.ndarray = field(default_factory=lambda: np.zeros(3))
    last_thrust: float = 0.0
    last_omega_cmd_body: np.ndarray = field(default_factory=lambda: np.zeros(3))
    vdot_filt: float = 0.0
    prev_speed: Optional[float] = None
    override_active: bool = False
    guard_was_active: bool = False

    def copy(self) -> "ControllerMemory":
        return replace(
            self,
            z=self.z.copy(),
            delta=self.delta.copy(),
            va_est_filt=None if self.va_est_filt is None else self.va_est_filt.copy(),
            omega_hstar_filt=self.omega_hstar_filt.copy(),
            omega_bar_filt=self.omega_bar_filt.copy(),
            last_omega_cmd_body=self.last_omega_cmd_body.copy(),
        )


# ---------------------------------------------------------------------------
# Speed loop
# ---------------------------------------------------------------------------

def gbar_vector(va: np.ndarray, params: AeroParams, g0: float = 9.81) -> np.ndarray:
    """Drag-adjusted gravity: g - (c0bar/m) |va| va, with va inertial."""
    van = norm3(va)
    return g0 * DOWN - (params.c0bar / params.mass) * van * va


def gbar_and_tbar(va: np.ndarray, thrust: float, va1: float, va_norm: float,
                  params: AeroParams, g0: float = 9.81) -> tuple[np.ndarray, float]:
    """Drag-adjusted gravity and lift-adjusted thrust.

    gbar = g - (c0bar/m) |va| va (va inertial); Tbar = T + 2 c1 va1 |va|.
    """
    return gbar_vector(va, params, g0), tbar_from_thrust(thrust, va1, va_norm, params)


def tbar_from_thrust(thrust: float, va1: float, va_norm: float, params: AeroParams) -> float:
    return thrust + 2.0 * params.c1 * va1 * va_norm


def thrust_from_tbar(tbar: float, va1: float, va_norm: float, params: AeroParams) -> float:
    return tbar - 2.0 * params.c1 * va1 * va_norm


def integrator_alpha(I_ev: float, e_v: float, gains: Gains) -> float:
    """Saturation gain shared by the thrust law and the integrator."""
    return sat_alpha(abs(I_ev + e_v / gains.kT3), gains.delta_ev)


def update_speed_integrator(I_ev: float, e_v: float, gains: Gains, dt: float) -> float:
    """Euler step of the bounded speed-error integrator."""
    arg = I_ev + e_v / gains.kT3
    sat = sat_alpha(abs(arg), gains.delta_ev) * arg
    return I_ev + dt * gains.kT2 * gains.kT3 * (sat - I_ev)


def speed_thrust(
    i_axis: np.ndarray,
    h: np.ndarray,
    gbar: np.ndarray,
    e_v: float,
    vdot_star: float,
    I_ev: float,
    gains: Gains,
    params: AeroParams,
) -> float:
    """Pre-compensated PI thrust law on the inertial speed, returning Tbar.

    Raises HeadingSingular when the body x axis is nearly orthogonal to
    the heading, which would blow up the pre-compensation.
    """
    ih = float(i_axis @ h)
    if abs(ih) <= gains.eps_ih:
        raise HeadingSingular(f"i . h = {ih:.3f} within {gains.eps_ih} of zero")
    a_e = integrator_alpha(I_ev, e_v, gains)
    return params.mass * (
        -float(gbar @ h) + vdot_star - gains.kT1(e_v) * e_v - gains.kT2 * a_e * I_ev
    ) / ih


def airspeed_thrust(
    va_body: np.ndarray,
    omega_body: np.ndarray,
    i_axis: np.ndarray,
    e_v: float,
    vdot_star: float,
    I_ev: float,
    wind_rate: np.ndarray,
    gains: Gains,
    params: AeroParams,
    g0: float = 9.81,
) -> float:
    """Thrust law stabilizing the longitudinal airspeed component.

    T = T* - m (kT1 e_v + kT2 alpha_e I); the feedforward T* cancels
    gravity/wind-rate projection, the rotation coupling omega . (ex x va),
    and the longitudinal drag.
    """
    van = norm3(va_body)
    # omega . (e1 x va) with e1 x va = (0, -va3, va2), all body coords
    coupling = -omega_body[1] * va_body[2] + omega_body[2] * va_body[1]
    t_star = params.mass * (
        vdot_star - float((g0 * DOWN - wind_rate) @ i_axis) - coupling
    ) + params.c0 * van * va_body[0]
    a_e = integrator_alpha(I_ev, e_v, gains)
    return t_star - params.mass * (gains.kT1(e_v) * e_v + gains.kT2 * a_e * I_ev)


def thrust_clamp(t_raw: float, gains: Gains) -> tuple[float, bool, bool]:
    """Clamp thrust to its physical range.

    Returns (thrust, clamped_any, clamped_low); a low clamp engages the
    speed-setpoint override on the next cycle (track the achieved speed
    instead of fighting an unreachable negative thrust).
    """
    if t_raw < gains.T_min:
        return gains.T_min, True, True
    if t_raw > gains.T_max:
        return gains.T_max, True, False
    return t_raw, False, False


# ---------------------------------------------------------------------------
# Guidance
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GuidanceOutput:
    hstar: np.ndarray
    theta_h: float
    l: np.ndarray
    ybar: np.ndarray
    sin_theta: float


def guidance_heading(
    err: PathError,
    frame: PathFrame,
    speed: float,
    sign_vu: float,
    gains: Gains,
    prev_l: Optional[np.ndarray] = None,
) -> GuidanceOutput:
    """Desired heading from the path error.

    The scaled error ybar = k1 D satbar(y) / |v| has norm at most mu, so
    the approach angle theta_h = asin(|ybar|) never reaches 90 degrees;
    far from the path it tends to asin(mu) when d1 = d2.
    """
    if speed <= gains.eps_speed:
        raise DegenerateSpeed(f"speed {speed:.2f} m/s too small for guidance")
    dmax = max(gains.d1, gains.d2)
    delta_h = gains.mu * speed / (gains.k1 * dmax)
    y_sat = sat_tanh(err.y, delta_h)
    ybar = gains.k1 * np.array([gains.d1, gains.d2]) * y_sat / speed
    yn = math.hypot(ybar[0], ybar[1])
    if yn > 1e-12:
        l = -(ybar[0] * frame.ubar + ybar[1] * frame.ubarbar) / yn
    elif prev_l is not None:
        l = prev_l
    else:
        l = frame.ubar
    theta_h = math.asin(min(1.0, yn))
    hstar = math.sin(theta_h) * l + math.cos(theta_h) * sign_vu * frame.u
    return GuidanceOutput(hstar=hstar, theta_h=theta_h, l=l, ybar=ybar, sin_theta=yn)


def moving_guidance(hstar: np.ndarray, v_c: np.ndarray, speed: float) -> np.ndarray:
    """Correct the desired heading for a path carried at velocity ``v_c``.

    Solves for the inertial heading whose air of relative velocity points
    along ``hstar``; well defined while |v| > |v_c|.
    """
    vcn = norm3(v_c)
    if vcn == 0.0:
        return hstar
    if speed <= vcn:
        raise CarrierTooFast(f"carrier speed {vcn:.2f} >= aircraft speed {speed:.2f}")
    perp = project_perp(hstar, v_c) / speed
    return perp + math.sqrt(max(0.0, 1.0 - float(perp @ perp))) * hstar


# ---------------------------------------------------------------------------
# Heading stabilization with bounded integral
# ---------------------------------------------------------------------------

def heading_alpha(z: np.ndarray, htilde: np.ndarray, gains: Gains) -> float:
    return sat_alpha(norm3(z + htilde / gains.kz), gains.delta_z)


def heading_omega(
    h: np.ndarray,
    hstar: np.ndarray,
    omega_hstar: np.ndarray,
    z: np.ndarray,
    gains: Gains,
) -> np.ndarray:
    """Desired angular velocity of the heading vector (with integral term)."""
    htilde = cross3(h, hstar)
    return omega_hstar + gains.kh1 * htilde + gains.kh2 * heading_alpha(z, htilde, gains) * z


def update_heading_integrator(
    z: np.ndarray,
    h: np.ndarray,
    hstar: np.ndarray,
    omega_hstar: np.ndarray,
    gains: Gains,
    dt: float,
) -> np.ndarray:
    """Euler step of the rotating bounded heading integrator."""
    htilde = cross3(h, hstar)
    zdot = cross3(omega_hstar, z) + gains.kz * (
        sat_tanh(z + htilde / gains.kz, gains.delta_z) - z
    )
    return z + dt * zdot


# ---------------------------------------------------------------------------
# Desired frame construction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DesiredFrame:
    ibar: np.ndarray
    jbar: np.ndarray
    kbar: np.ndarray
    omega_bar: np.ndarray
    astar: np.ndarray
    guard_active: bool = False


def desired_accel(vdot_star: float, speed: float, omega_bar_h: np.ndarray,
                  h: np.ndarray) -> np.ndarray:
    """Acceleration realizing the desired speed and heading rates."""
    return vdot_star * h + speed * cross3(omega_bar_h, h)


def desired_ibar(astar: np.ndarray, gbar: np.ndarray, eps_acc: float) -> np.ndarray:
    """Desired longitudinal axis, along the net specific-force demand."""
    d = astar - gbar
    dn = norm3(d)
    if dn <= eps_acc:
        raise FrameSingular(f"|a* - gbar| = {dn:.3f} below {eps_acc}")
    return d / dn


def desired_jbar(va: np.ndarray, ibar: np.ndarray, eps_cross: float) -> np.ndarray:
    """Desired lateral axis, normal to the airflow (balanced flight)."""
    c = cross3(va, ibar)
    cn = norm3(c)
    if cn <= eps_cross:
        raise FrameSingular(f"|va x ibar| = {cn:.3f} below {eps_cross}")
    return c / cn


def desired_triad(
    astar: np.ndarray,
    gbar: np.ndarray,
    va: np.ndarray,
    gains: Gains,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Desired body triad: ibar along (a* - gbar), jbar normal to airflow.

    Placing jbar orthogonal to the air velocity is what drives the
    sideslip to zero once the attitude converges. Independent of the
    aircraft attitude by construction.
    """
    ibar = desired_ibar(astar, gbar, gains.eps_acc)
    jbar = desired_jbar(va, ibar, gains.eps_cross)
    return ibar, jbar, cross3(ibar, jbar)


def attack_angle_guard(
    ibar: np.ndarray,
    jbar: np.ndarray,
    kbar: np.ndarray,
    va: np.ndarray,
    alpha_max: float,
    eps_speed: float = 0.5,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, bool]:
    """Cap the predicted attack angle of the desired triad at ``alpha_max``.

    When the predicted angle asin(va_hat . kbar) exceeds the limit, ibar
    is re-aimed to the air-velocity direction rotated by alpha_max about
    jbar, which is the smallest change to ibar achieving the cap.
    """
    van = norm3(va)
    if van <= eps_speed:
        return ibar, jbar, kbar, False
    va_hat = va / van
    alpha_pred = math.asin(min(1.0, max(-1.0, float(va_hat @ kbar))))
    if alpha_pred <= alpha_max:
        return ibar, jbar, kbar, False
    ibar_new = rotate_about(jbar, alpha_max, va_hat)
    # remove any numerical component along jbar and re-orthonormalize
    ibar_new = unit3(ibar_new - float(ibar_new @ jbar) * jbar)
    kbar_new = cross3(ibar_new, jbar)
    return ibar_new, jbar, kbar_new, True


def frame_angular_velocity(
    ibar: np.ndarray,
    jbar: np.ndarray,
    prev_ibar: Optional[np.ndarray],
    prev_jbar: Optional[np.ndarray],
    dt: float,
    omega_max: float,
) -> np.ndarray:
    """Angular velocity of the desired triad from cached previous vectors.

    omega = omega_i + (ibar . omega_j) ibar with the vector rates taken by
    backward differences; clipped in norm to absorb reprojection jumps.
    """
    if prev_ibar is None or prev_jbar is None:
        return np.zeros(3)
    omega_i = cross3(ibar, (ibar - prev_ibar) / dt)
    omega_j = cross3(jbar, (jbar - prev_jbar) / dt)
    omega = omega_i + float(ibar @ omega_j) * ibar
    n = norm3(omega)
    if n > omega_max:
        omega *= omega_max / n
    return omega


def vector_angular_velocity(
    x: np.ndarray, prev_x: Optional[np.ndarray], dt: float, omega_max: float
) -> np.ndarray:
    """Angular velocity of a unit vector from its cached previous value."""
    if prev_x is None:
        return np.zeros(3)
    omega = cross3(x, (x - prev_x) / dt)
    n = norm3(omega)
    if n > omega_max:
        omega *= omega_max / n
    return omega


def attitude_omega(
    R: np.ndarray,
    ibar: np.ndarray,
    jbar: np.ndarray,
    kbar: np.ndarray,
    omega_bar: np.ndarray,
    k_omega: float,
) -> np.ndarray:
    """Angular-velocity command (inertial vector) stabilizing the triad."""
    correction = (
        cross3(R[:, 0], ibar) + cross3(R[:, 1], jbar) + cross3(R[:, 2], kbar)
    )
    return omega_bar + k_omega * correction


def attitude_error_angle(R: np.ndarray, ibar: np.ndarray, jbar: np.ndarray,
                         kbar: np.ndarray) -> float:
    tr = float(R[:, 0] @ ibar + R[:, 1] @ jbar + R[:, 2] @ kbar)
    return math.acos(min(1.0, max(-1.0, 0.5 * (tr - 1.0))))


# ---------------------------------------------------------------------------
# Actuation
# ---------------------------------------------------------------------------

def two_axis_reduce(omega_err_body: np.ndarray) -> np.ndarray:
    """Drop the yaw channel: roll/pitch tracked, yaw left to the tail fin."""
    return np.array([omega_err_body[0], omega_err_body[1], 0.0])


def surface_allocation(
    omega_body: np.ndarray,
    omega_star_body: np.ndarray,
    va_norm: float,
    delta: np.ndarray,
    gains: Gains,
    dt: float,
    two_axis: bool = False,
    inertia: Optional[np.ndarray] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Surface-angle update tracking the angular-velocity command.

    Default allocation delta* = -(1/|va|^2) diag(alloc_gain) (omega -
    omega*); passing the inertia adds the gyroscopic feedforward
    S(omega) J omega* resolved through the same gain map. Surface angles
    obey the smooth angle bound and a hard per-step rate limit.
    """
    if va_norm <= gains.eps_speed:
        raise AllocationSingular(f"airspeed {va_norm:.2f} m/s too small to allocate")
    err = omega_body - omega_star_body
    if two_axis:
        err = two_axis_reduce(err)
    gain = np.asarray(gains.alloc_gain)
    va_sq = va_norm * va_norm
    delta_star = -gain * err / va_sq
    if inertia is not None:
        # gyroscopic feedforward resolved through the same surface map
        torque_ff = cross3(omega_body, inertia @ omega_star_body)
        delta_star = delta_star + gain * np.linalg.solve(inertia, torque_ff) / (
            gains.k_gamma * va_sq
        )
    if two_axis:
        delta_star[2] = 0.0
    new_delta = np.empty(3)
    step_max = gains.rate_max * dt
    n_sub = max(1, int(math.ceil(gains.kbar_delta * dt / 0.2)))
    h = dt / n_sub
    for i in range(3):
        d = delta[i]
        for _ in range(n_sub):
            u = -gains.k_delta * (d - delta_star[i])
            u = max(-gains.rate_max, min(gains.rate_max, u))
            arg = d + u / gains.kbar_delta
            ddot = gains.kbar_delta * (
                sat_alpha(abs(arg), gains.delta_max[i]) * arg - d
            )
            d += h * ddot
        d = max(delta[i] - step_max, min(delta[i] + step_max, d))
        new_delta[i] = d
    return new_delta, delta_star


# ---------------------------------------------------------------------------
# Air-velocity estimation
# ---------------------------------------------------------------------------

def estimate_airvelocity(
    va1: float,
    R: np.ndarray,
    accel_hat: np.ndarray,
    params: AeroParams,
    g0: float = 9.81,
    eps_speed: float = 0.5,
    alpha_cap: float = 0.5,
) -> np.ndarray:
    """Body air velocity from the pitot component and a vertical balance.

    The unmodeled lateral force being parallel to body y means the body-z
    acceleration balance gives va3 = m (g - a) . k / (c0bar |va|);
    approximating |va| by |va1| and the acceleration by ``accel_hat``
    yields the estimate. The lateral component is taken as zero (balanced
    flight).

    The ratio va3/va1 is capped at tan(alpha_cap): the balance argument is
    a cruise approximation and diverges as va1 -> 0, so an uncapped
    estimate would feed arbitrarily wrong directions to the attitude
    stage mid-maneuver.
    """
    if abs(va1) <= eps_speed:
        raise DegeneratePitot(f"pitot airspeed {va1:.2f} m/s too small")
    k_axis = R[:, 2]
    va3 = params.mass * float((g0 * DOWN - accel_hat) @ k_axis) / (params.c0bar * abs(va1))
    cap = math.tan(alpha_cap) * abs(va1)
    va3 = max(-cap, min(cap, va3))
    return np.array([va1, 0.0, va3])


# ---------------------------------------------------------------------------
# Controller orchestration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Measurements:
    """Quantities the controller is allowed to see at one sampling instant."""

    t: float
    p: np.ndarray
    v: np.ndarray
    R: np.ndarray
    omega_body: np.ndarray
    va1: float
    va_body: Optional[np.ndarray] = None  # full vector, true-state mode only
    accel: Optional[np.ndarray] = None    # accelerometer-derived, if available


@dataclass(frozen=True)
class Command:
    thrust: float
    mode: str                      # "omega" or "surfaces"
    omega_body: np.ndarray
    delta: np.ndarray


@dataclass(frozen=True)
class StepDiag:
    """Per-step values exported for logging and analysis."""

    y1: float
    y2: float
    margin: float
    e_v: float
    sin_theta: float
    theta_err: float
    alpha_pred: float
    segment: int
    s: float
    flags: int
    hstar: np.ndarray
    ibar: np.ndarray
    jbar: np.ndarray
    kbar: np.ndarray


@dataclass(frozen=True)
class ControllerConfig:
    path: PathSpec
    gains: Gains = field(default_factory=Gains)
    model: AeroParams = field(default_factory=AeroParams)
    speed_mode: str = "airspeed"          # "airspeed" | "inertial"
    measurement: str = "true"             # "true" | "estimated"
    accel_source: str = "zero"            # "zero" | "accelerometer" | "omega_cross_v"
    actuation: str = "omega"              # "omega" | "surfaces"
    two_axis: bool = False
    sign_vu: float = 1.0
    g0: float = 9.81
    dt: float = 0.004
    vdot_filter_tau: float = 0.25

    def __post_init__(self):
        if self.speed_mode not in ("airspeed", "inertial"):
            raise ValueError("speed_mode must be 'airspeed' or 'inertial'")
        if self.measurement not in ("true", "estimated"):
            raise ValueError("measurement must be 'true' or 'estimated'")
        if self.accel_source not in ("zero", "accelerometer", "omega_cross_v"):
            raise ValueError("bad accel_source")
        if self.actuation not in ("omega", "surfaces"):
            raise ValueError("actuation must be 'omega' or 'surfaces'")
        if self.two_axis and self.actuation == "omega":
            raise ValueError("two-axis operation requires surface actuation")
        if self.sign_vu not in (-1.0, 1.0):
            raise ValueError("sign_vu must be +1 or -1")


class PathController:
    """Pure transition function: (measurements, memory) -> (command, memory)."""

    def __init__(self, config: ControllerConfig, setpoint):
        self.cfg = config
        self.setpoint = setpoint  # callable t -> (v_star, vdot_star)

    def initial_memory(self, p0: np.ndarray, t0: float = 0.0) -> ControllerMemory:
        mem = ControllerMemory()
        base = self.cfg.path.base
        p_local = p0 if self.cfg.path.carrier is None else p0 - self.cfg.path.carrier.offset(t0)
        if self.cfg.path.is_composite:
            mem.segment = base.initial_segment(p_local)
        mem.s_hint = 0.0
        return mem

    def _estimate_va(self, meas: Measurements, mem: ControllerMemory,
                     flags: Guard) -> tuple[np.ndarray, Guard]:
        cfg = self.cfg
        if cfg.measurement == "true":
            return meas.va_body, flags
        if cfg.accel_source == "zero":
            a_hat = np.zeros(3)
        elif cfg.accel_source == "accelerometer":
            a_hat = meas.accel if meas.accel is not None else np.zeros(3)
        else:
            omega_inertial = meas.R @ meas.omega_body
            a_hat = cross3(omega_inertial, meas.v)
        try:
            va_body = estimate_airvelocity(meas.va1, meas.R, a_hat, cfg.model, cfg.g0)
        except DegeneratePitot:
            va_body = np.array([max(meas.va1, cfg.gains.eps_speed), 0.0, 0.0])
            flags |= Guard.PITOT_DEGENERATE
        if cfg.gains.va_filter_tau <= 0.0:
            return va_body, flags
        va_inertial = meas.R @ va_body
        if mem.va_est_filt is None:
            mem.va_est_filt = va_inertial
        else:
            lp = min(1.0, cfg.dt / cfg.gains.va_filter_tau)
            mem.va_est_filt = mem.va_est_filt + lp * (va_inertial - mem.va_est_filt)
        return meas.R.T @ mem.va_est_filt, flags

    def step(self, meas: Measurements, mem_in: ControllerMemory) -> tuple[Command, ControllerMemory, StepDiag]:
        cfg = self.cfg
        gains = cfg.gains
        dt = cfg.dt
        mem = mem_in.copy()
        flags = Guard.NONE

        speed = norm3(meas.v)
        v_star, vdot_star = self.setpoint(meas.t)

        # ---- air velocity (body + inertial) -------------------------------
        va_body, flags = self._estimate_va(meas, mem, flags)
        va = meas.R @ va_body
        va_norm = norm3(va_body)
        gbar = gbar_vector(va, cfg.model, cfg.g0)

        # ---- path projection ----------------------------------------------
        try:
            seg, frame, err = cfg.path.project(meas.p, meas.t, mem.segment, mem.s_hint)
            if err.margin <= gains.eps_margin:
                raise IllPosedProjection("margin below threshold")
        except IllPosedProjection:
            flags |= Guard.ILL_POSED_PROJECTION
            if mem.prev_frame is None:
                raise
            seg, frame, err = mem.segment, mem.prev_frame, mem.prev_error
        if seg != mem.segment:
            flags |= Guard.SEGMENT_SWITCH
            # a reprojection jump makes finite differences meaningless
            mem.prev_hstar = None
            mem.prev_ibar = None
            mem.prev_jbar = None
            mem.omega_hstar_filt = np.zeros(3)
            mem.omega_bar_filt = np.zeros(3)
        mem.segment = seg
        mem.s_hint = frame.s
        mem.prev_frame = frame
        mem.prev_error = err

        # ---- measured-speed derivative filter (for the thrust override) ---
        if cfg.speed_mode == "airspeed":
            speed_meas = meas.va1
        else:
            speed_meas = speed
        if mem.prev_speed is not None:
            raw = (speed_meas - mem.prev_speed) / dt
            mem.vdot_filt += (raw - mem.vdot_filt) * min(1.0, dt / cfg.vdot_filter_tau)
        mem.prev_speed = speed_meas

        # ---- desired-acceleration override while pinned at minimum thrust --
        # Accepting overspeed means the achieved speed acts as the setpoint
        # for the attitude frame: a* uses the measured speed derivative. The
        # thrust law keeps the nominal setpoint, so it stays clamped until
        # drag brings the speed back.
        if mem.override_active:
            vdot_star_eff = mem.vdot_filt
            flags |= Guard.VSTAR_OVERRIDE
        else:
            vdot_star_eff = vdot_star

        # ---- guidance -------------------------------------------------------
        degenerate_speed = speed <= gains.eps_speed
        if degenerate_speed:
            flags |= Guard.SPEED_DEGENERATE
            hstar = mem.prev_hstar if mem.prev_hstar is not None else cfg.sign_vu * frame.u
            guidance = None
        else:
            guidance = guidance_heading(err, frame, speed, cfg.sign_vu, gains, mem.prev_l)
            mem.prev_l = guidance.l
            hstar = guidance.hstar
            v_c = cfg.path.carrier_velocity(meas.t)
            if cfg.path.carrier is not None:
                try:
                    hstar = moving_guidance(hstar, v_c, speed)
                except CarrierTooFast:
                    flags |= Guard.SPEED_DEGENERATE
                    hstar = mem.prev_hstar if mem.prev_hstar is not None else hstar

        omega_hstar_raw = vector_angular_velocity(hstar, mem.prev_hstar, dt,
                                                  gains.omega_bar_max)
        mem.prev_hstar = hstar
        lp = min(1.0, dt / gains.ff_filter_tau)
        mem.omega_hstar_filt = mem.omega_hstar_filt + lp * (omega_hstar_raw
                                                            - mem.omega_hstar_filt)
        omega_hstar = mem.omega_hstar_filt

        h = meas.v / speed if speed > 1e-9 else meas.R[:, 0]

        # ---- heading integrator and desired heading rate -------------------
        omega_bar_h = heading_omega(h, hstar, omega_hstar, mem.z, gains)
        mem.z = update_heading_integrator(mem.z, h, hstar, omega_hstar, gains, dt)

        # ---- desired frame --------------------------------------------------
        astar = desired_accel(vdot_star_eff, speed, omega_bar_h, h)
        guard_active = False
        try:
            ibar = desired_ibar(astar, gbar, gains.eps_acc)
        except FrameSingular:
            flags |= Guard.FRAME_ACC_SINGULAR
            ibar = mem.prev_ibar if mem.prev_ibar is not None else meas.R[:, 0]
        try:
            jbar = desired_jbar(va, ibar, gains.eps_cross)
            kbar = cross3(ibar, jbar)
        except FrameSingular:
            # airflow parallel to ibar: any lateral axis is balanced, so
            # carry the previous one through the degeneracy
            flags |= Guard.FRAME_CROSS_SINGULAR
            j_prev = mem.prev_jbar if mem.prev_jbar is not None else meas.R[:, 1]
            jbar = unit3(j_prev - float(j_prev @ ibar) * ibar)
            kbar = cross3(ibar, jbar)
        ibar, jbar, kbar, guard_active = attack_angle_guard(
            ibar, jbar, kbar, va, gains.alpha_max, gains.eps_speed
        )
        # the guarded triad equals the raw one exactly at the activation
        # boundary, so finite differences stay valid across toggles
        if guard_active:
            flags |= Guard.ALPHA_GUARD
        mem.guard_was_active = guard_active

        omega_bar_raw = frame_angular_velocity(ibar, jbar, mem.prev_ibar, mem.prev_jbar,
                                               dt, gains.omega_bar_max)
        mem.omega_bar_filt = mem.omega_bar_filt + lp * (omega_bar_raw - mem.omega_bar_filt)
        omega_bar = mem.omega_bar_filt
        mem.prev_ibar = ibar
        mem.prev_jbar = jbar
        mem.prev_kbar = kbar

        # ---- attitude command ----------------------------------------------
        omega_cmd = attitude_omega(meas.R, ibar, jbar, kbar, omega_bar, gains.k_omega)
        omega_cmd_body = meas.R.T @ omega_cmd
        wn = norm3(omega_cmd_body)
        if wn > gains.omega_cmd_max:
            omega_cmd_body = omega_cmd_body * (gains.omega_cmd_max / wn)
        mem.last_omega_cmd_body = omega_cmd_body

        # ---- thrust (always against the nominal setpoint) ------------------
        if cfg.speed_mode == "airspeed":
            e_v = meas.va1 - v_star
            t_raw = airspeed_thrust(va_body, meas.omega_body, meas.R[:, 0], e_v,
                                    vdot_star, mem.I_ev, np.zeros(3), gains,
                                    cfg.model, cfg.g0)
        else:
            e_v = speed - v_star
            try:
                tbar = speed_thrust(meas.R[:, 0], h, gbar, e_v, vdot_star,
                                    mem.I_ev, gains, cfg.model)
                t_raw = thrust_from_tbar(tbar, va_body[0], va_norm, cfg.model)
            except HeadingSingular:
                flags |= Guard.HEADING_SINGULAR
                t_raw = mem.last_thrust
        thrust, clamped, clamped_low = thrust_clamp(t_raw, gains)
        if clamped:
            flags |= Guard.THRUST_CLAMPED
        mem.override_active = clamped_low
        mem.I_ev = update_speed_integrator(mem.I_ev, e_v, gains, dt)
        mem.last_thrust = thrust

        # ---- actuation -------------------------------------------------------
        if cfg.actuation == "surfaces":
            try:
                mem.delta, _ = surface_allocation(
                    meas.omega_body, omega_cmd_body, va_norm, mem.delta, gains,
                    dt, two_axis=cfg.two_axis,
                )
            except AllocationSingular:
                flags |= Guard.SPEED_DEGENERATE
            command = Command(thrust=thrust, mode="surfaces",
                              omega_body=omega_cmd_body, delta=mem.delta.copy())
        else:
            command = Command(thrust=thrust, mode="omega",
                              omega_body=omega_cmd_body, delta=mem.delta.copy())

        # ---- diagnostics -----------------------------------------------------
        van = norm3(va)
        alpha_pred = math.asin(min(1.0, max(-1.0, float(va @ kbar) / van))) if van > 1e-9 else 0.0
        diag = StepDiag(
            y1=err.y1, y2=err.y2, margin=err.margin, e_v=e_v,
            sin_theta=guidance.sin_theta if guidance is not None else 0.0,
            theta_err=attitude_error_angle(meas.R, ibar, jbar, kbar),
            alpha_pred=alpha_pred, segment=seg, s=frame.s, flags=int(flags),
            hstar=hstar, ibar=ibar, jbar=jbar, kbar=kbar,
        )
        return command, mem, diag
