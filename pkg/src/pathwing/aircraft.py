"""Aerodynamic force model, rigid-body plant, wind, and glide metrics.

Aerodynamic model (body coordinates, va = air velocity):

    F_a = -(c0 va1 ex + c0bar va3 ez) |va| + va2 * O(va),   c0bar = c0 + 2 c1

The lateral term O is deliberately loose; only |O|/|va| bounded matters.
The default instance is the dissipative disc model O = -c0 |va| ey. With
zero sideslip this model yields C_D ~ c0 and a lift slope of 2 c1, keeps
the no-lift property at 90 deg attack angle, and implies the glide
numbers computed by :func:`glide_metrics`.

Plant state: inertial position p, inertial velocity v, attitude as the
body triad (i, j, k) stored column-wise in a rotation matrix, and the
body-frame angular velocity. Translational and rotational dynamics are
integrated with fixed-step RK4; the attitude is re-orthonormalized after
every step.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

from .errors import DegenerateAirspeed, NonFiniteState
from .vectors import cross3, norm3, orthonormalize_columns, unit3

G0 = 9.81
EPS_SPEED = 0.5  # m/s, below which flow angles are meaningless


def lateral_disc(va: np.ndarray, c_lat: float) -> np.ndarray:
    """Lateral force model: pure dissipation along body y.

    With c_lat equal to the drag coefficient this is the disc-shaped-body
    instance; a fuselage-plus-fin airframe has a much larger coefficient
    (strong transversal dissipation), which is what keeps the sideslip
    nominally small when the controller cannot observe it.
    """
    return np.array([0.0, -c_lat * norm3(va), 0.0])


def lateral_cross_coupled(va: np.ndarray, c_lat: float) -> np.ndarray:
    """Alternative lateral model with mild cross-axis coupling.

    Used to exercise controller robustness; the ratio |O|/|va| stays
    bounded as required.
    """
    n = norm3(va)
    return c_lat * np.array([0.1 * n, -0.9 * n, 0.25 * va[0]])


LATERAL_MODELS: dict[str, Callable[[np.ndarray, float], np.ndarray]] = {
    "disc": lateral_disc,
    "cross_coupled": lateral_cross_coupled,
}


@dataclass(frozen=True)
class AeroParams:
    """Mass, inertia, and aerodynamic coefficients of the airframe.

    ``c_lat`` scales the unmodeled lateral force (None means c0, the
    disc-body value). The controller never uses it; only the plant does.
    """

    mass: float = 2.0
    c0: float = 0.006
    c1: float = 0.5
    inertia: np.ndarray = field(default_factory=lambda: np.diag([0.02, 0.04, 0.05]))
    lateral_model: str = "disc"
    c_lat: Optional[float] = None

    def __post_init__(self):
        if not (self.mass > 0.0 and self.c0 > 0.0 and self.c1 > 0.0):
            raise ValueError("mass, c0 and c1 must be positive")
        J = np.asarray(self.inertia, dtype=float)
        if J.shape != (3, 3):
            raise ValueError("inertia must be a 3x3 matrix")
        if not np.allclose(J, J.T, atol=1e-12):
            raise ValueError("inertia must be symmetric")
        if np.any(np.linalg.eigvalsh(J) <= 0.0):
            raise ValueError("inertia must be positive definite")
        if self.lateral_model not in LATERAL_MODELS:
            raise ValueError(f"unknown lateral model {self.lateral_model!r}")
        if self.c_lat is not None and self.c_lat < 0.0:
            raise ValueError("c_lat must be nonnegative")
        object.__setattr__(self, "inertia", J)

    @property
    def c0bar(self) -> float:
        return self.c0 + 2.0 * self.c1

    @property
    def lateral_coeff(self) -> float:
        return self.c0 if self.c_lat is None else self.c_lat

    @property
    def inertia_diag(self) -> Optional[np.ndarray]:
        J = self.inertia
        if abs(J[0, 1]) + abs(J[0, 2]) + abs(J[1, 2]) == 0.0:
            return np.diag(J).copy()
        return None

    def lateral_force(self, va: np.ndarray) -> np.ndarray:
        return LATERAL_MODELS[self.lateral_model](va, self.lateral_coeff)


def aero_force(va: np.ndarray, params: AeroParams) -> np.ndarray:
    """Aerodynamic force in body coordinates for body air velocity ``va``."""
    n = norm3(va)
    f = np.array([-params.c0 * va[0] * n, 0.0, -params.c0bar * va[2] * n])
    if va[1] != 0.0:
        f += va[1] * params.lateral_force(va)
    return f


@dataclass(frozen=True)
class GustSpec:
    """Smooth bounded wind perturbation: a seeded mix of sinusoids."""

    amplitude: float
    n_modes: int = 3
    freq_hz: tuple[float, float] = (0.02, 0.3)
    seed: int = 0

    def build(self) -> Callable[[float], np.ndarray]:
        rng = np.random.default_rng(self.seed)
        freqs = rng.uniform(*self.freq_hz, size=(3, self.n_modes)) * 2.0 * math.pi
        phases = rng.uniform(0.0, 2.0 * math.pi, size=(3, self.n_modes))
        amps = rng.uniform(0.3, 1.0, size=(3, self.n_modes))
        amps *= self.amplitude / np.sum(amps, axis=1, keepdims=True)

        def gust(t: float) -> np.ndarray:
            return np.sum(amps * np.sin(freqs * t + phases), axis=1)

        return gust


@dataclass(frozen=True)
class WindField:
    """Constant ambient wind plus an optional differentiable gust."""

    constant: np.ndarray = field(default_factory=lambda: np.zeros(3))
    gust: Optional[GustSpec] = None

    def __post_init__(self):
        object.__setattr__(self, "constant", np.asarray(self.constant, dtype=float))
        object.__setattr__(self, "_gust_fn", None if self.gust is None else self.gust.build())

    def velocity(self, t: float) -> np.ndarray:
        if self._gust_fn is None:
            return self.constant
        return self.constant + self._gust_fn(t)


@dataclass(frozen=True)
class AircraftState:
    """Full rigid-body state; attitude columns are the body axes i, j, k."""

    p: np.ndarray
    v: np.ndarray
    R: np.ndarray
    omega: np.ndarray  # body coordinates

    def __post_init__(self):
        object.__setattr__(self, "p", np.asarray(self.p, dtype=float))
        object.__setattr__(self, "v", np.asarray(self.v, dtype=float))
        object.__setattr__(self, "R", np.asarray(self.R, dtype=float))
        object.__setattr__(self, "omega", np.asarray(self.omega, dtype=float))

    @property
    def i(self) -> np.ndarray:
        return self.R[:, 0]

    @property
    def j(self) -> np.ndarray:
        return self.R[:, 1]

    @property
    def k(self) -> np.ndarray:
        return self.R[:, 2]

    def renormalized(self) -> "AircraftState":
        return replace(self, R=orthonormalize_columns(self.R))


@dataclass(frozen=True)
class AirState:
    """Body air velocity with flow angles (absent at degenerate airspeed)."""

    va: np.ndarray
    speed: float
    alpha: Optional[float]
    beta: Optional[float]


def air_state(state: AircraftState, wind: WindField, t: float = 0.0,
              eps_speed: float = EPS_SPEED) -> AirState:
    """Body-frame air velocity and flow angles at time ``t``."""
    va_inertial = state.v - wind.velocity(t)
    va = state.R.T @ va_inertial
    speed = norm3(va)
    if speed <= eps_speed:
        return AirState(va=va, speed=speed, alpha=None, beta=None)
    alpha = math.asin(min(1.0, max(-1.0, va[2] / speed)))
    beta = math.atan2(va[1], va[0])
    return AirState(va=va, speed=speed, alpha=alpha, beta=beta)


def flow_angles(state: AircraftState, wind: WindField, t: float = 0.0) -> tuple[float, float]:
    """Attack and sideslip angles; raises at degenerate airspeed."""
    st = air_state(state, wind, t)
    if st.alpha is None:
        raise DegenerateAirspeed(f"airspeed {st.speed:.3f} m/s too small for flow angles")
    return st.alpha, st.beta


# ---------------------------------------------------------------------------
# Glide metrics and level trim
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GlideMetrics:
    glide_ratio: float        # approximate form 0.5 sqrt(c0bar/c0)
    glide_ratio_exact: float  # (1 - c0/c0bar) / (2 sqrt(c0/c0bar))
    glide_speed: float
    sink_rate: float


def glide_metrics(params: AeroParams, g0: float = G0) -> GlideMetrics:
    """Best glide numbers implied by the aerodynamic coefficients."""
    ratio = params.c0 / params.c0bar
    gr_exact = (1.0 - ratio) / (2.0 * math.sqrt(ratio))
    gr = 0.5 * math.sqrt(params.c0bar / params.c0)
    v_gr = math.sqrt(params.mass * g0) / (params.c0 * params.c0bar) ** 0.25
    v_sink = v_gr / gr if gr > 0.0 else math.inf
    return GlideMetrics(glide_ratio=gr, glide_ratio_exact=gr_exact,
                        glide_speed=v_gr, sink_rate=v_sink)


@dataclass(frozen=True)
class LevelTrim:
    alpha: float
    thrust: float


def level_trim(params: AeroParams, speed: float, g0: float = G0) -> LevelTrim:
    """Attack angle and thrust for steady level flight at the given airspeed.

    Solves the longitudinal force balance for zero wind, zero sideslip:
    thrust along body x, lift/drag from the aero model, weight balanced.
    """
    m, c0, c0bar, c1 = params.mass, params.c0, params.c0bar, params.c1
    V2 = speed * speed

    def thrust_of(alpha: float) -> float:
        ca = math.cos(alpha)
        return V2 * (c0 * ca * ca + c0bar * math.sin(alpha) ** 2) / math.cos(alpha)

    def vertical_residual(alpha: float) -> float:
        return (thrust_of(alpha) * math.sin(alpha)
                + c1 * V2 * math.sin(2.0 * alpha) - m * g0)

    hi = math.pi / 2 - 1e-6
    if vertical_residual(hi) < 0.0:
        raise ValueError(f"no level trim exists at {speed} m/s (too slow)")
    alpha = brentq(vertical_residual, 0.0, hi, xtol=1e-14)
    return LevelTrim(alpha=alpha, thrust=thrust_of(alpha))


def trimmed_state(params: AeroParams, speed: float, direction: np.ndarray,
                  position: np.ndarray, g0: float = G0) -> tuple[AircraftState, float]:
    """Level-flight state (and its thrust) heading along ``direction``."""
    d = unit3(np.asarray(direction, dtype=float))
    if abs(d[2]) > 1e-9:
        raise ValueError("level trim needs a horizontal direction")
    trim = level_trim(params, speed, g0)
    up = np.array([0.0, 0.0, -1.0])
    i = math.cos(trim.alpha) * d + math.sin(trim.alpha) * up
    j = cross3(np.array([0.0, 0.0, 1.0]), d)
    k = cross3(i, j)
    state = AircraftState(p=np.asarray(position, dtype=float), v=speed * d,
                          R=np.column_stack([i, j, k]), omega=np.zeros(3))
    return state, trim.thrust


# ---------------------------------------------------------------------------
# Plant model and RK4 integration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PlantModel:
    """The simulated airframe: true aero params plus actuation details.

    ``surface_gain`` maps surface angles to torque as
    gamma = |va|^2 * diag(surface_gain) @ delta. ``weathercock`` adds the
    passive yaw restoring torque of a tail fin,
    gamma_z += c_v |va| va2. ``rot_damping`` adds the rate damping of the
    fixed surfaces (wings and tail resist rotation),
    gamma -= |va| diag(rot_damping) omega; both are torque-level effects
    the control model deliberately omits.
    """

    params: AeroParams = field(default_factory=AeroParams)
    gravity: float = G0
    surface_gain: np.ndarray = field(default_factory=lambda: np.array([0.0111, 0.0167, 0.0278]))
    weathercock: Optional[float] = None
    rot_damping: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "surface_gain", np.asarray(self.surface_gain, dtype=float))
        if self.rot_damping is not None:
            object.__setattr__(self, "rot_damping",
                               np.asarray(self.rot_damping, dtype=float))
        # cache hot-loop lookups
        object.__setattr__(self, "_lat_is_disc", self.params.lateral_model == "disc")
        object.__setattr__(self, "_lat_fn", LATERAL_MODELS[self.params.lateral_model])
        object.__setattr__(self, "_c_lat", self.params.lateral_coeff)
        object.__setattr__(self, "_J_diag", self.params.inertia_diag)


OMEGA_MODE = "omega"
TORQUE_MODE = "torque"
SURFACE_MODE = "surfaces"


def _deriv(x: np.ndarray, t: float, thrust: float, mode: str, u: np.ndarray,
           plant: PlantModel, wind: WindField) -> np.ndarray:
    """State derivative; state layout [p(3), v(3), i(3), j(3), k(3), w(3)]."""
    par = plant.params
    m = par.mass
    vw = wind.velocity(t)

    vx, vy, vz = x[3], x[4], x[5]
    ix, iy, iz = x[6], x[7], x[8]
    jx, jy, jz = x[9], x[10], x[11]
    kx, ky, kz = x[12], x[13], x[14]

    if mode == OMEGA_MODE:
        w1, w2, w3 = u[0], u[1], u[2]
    else:
        w1, w2, w3 = x[15], x[16], x[17]

    # air velocity in body coordinates
    ax_, ay_, az_ = vx - vw[0], vy - vw[1], vz - vw[2]
    va1 = ix * ax_ + iy * ay_ + iz * az_
    va2 = jx * ax_ + jy * ay_ + jz * az_
    va3 = kx * ax_ + ky * ay_ + kz * az_
    van = math.sqrt(va1 * va1 + va2 * va2 + va3 * va3)

    f1 = -par.c0 * va1 * van + thrust
    f2 = 0.0
    f3 = -par.c0bar * va3 * van
    if va2 != 0.0:
        if plant._lat_is_disc:
            f2 -= plant._c_lat * van * va2
        else:
            ol = plant._lat_fn(np.array([va1, va2, va3]), plant._c_lat)
            f1 += va2 * ol[0]
            f2 += va2 * ol[1]
            f3 += va2 * ol[2]

    inv_m = 1.0 / m
    acc_x = (f1 * ix + f2 * jx + f3 * kx) * inv_m
    acc_y = (f1 * iy + f2 * jy + f3 * ky) * inv_m
    acc_z = (f1 * iz + f2 * jz + f3 * kz) * inv_m + plant.gravity

    # attitude kinematics: di/dt = w3 j - w2 k etc. (body-rate form)
    di = (w3 * jx - w2 * kx, w3 * jy - w2 * ky, w3 * jz - w2 * kz)
    dj = (w1 * kx - w3 * ix, w1 * ky - w3 * iy, w1 * kz - w3 * iz)
    dk = (w2 * ix - w1 * jx, w2 * iy - w1 * jy, w2 * iz - w1 * jz)

    if mode == OMEGA_MODE:
        dw1 = dw2 = dw3 = 0.0
    else:
        if mode == SURFACE_MODE:
            sg = plant.surface_gain
            va_sq = van * van
            g1 = va_sq * sg[0] * u[0]
            g2 = va_sq * sg[1] * u[1]
            g3 = va_sq * sg[2] * u[2]
            if plant.weathercock is not None:
                # tail-fin side force behind the CoM: restoring yaw torque
                # toward the airflow
                g3 += van * plant.weathercock * va2
            if plant.rot_damping is not None:
                rd = plant.rot_damping
                g1 -= van * rd[0] * w1
                g2 -= van * rd[1] * w2
                g3 -= van * rd[2] * w3
        else:
            g1, g2, g3 = u[0], u[1], u[2]
        Jd = plant._J_diag
        if Jd is not None:
            J1, J2, J3 = Jd[0], Jd[1], Jd[2]
            dw1 = (g1 - w2 * w3 * (J3 - J2)) / J1
            dw2 = (g2 - w3 * w1 * (J1 - J3)) / J2
            dw3 = (g3 - w1 * w2 * (J2 - J1)) / J3
        else:
            w = np.array([w1, w2, w3])
            dw = np.linalg.solve(par.inertia,
                                 np.array([g1, g2, g3]) - cross3(w, par.inertia @ w))
            dw1, dw2, dw3 = dw[0], dw[1], dw[2]

    return np.array([
        vx, vy, vz,
        acc_x, acc_y, acc_z,
        di[0], di[1], di[2],
        dj[0], dj[1], dj[2],
        dk[0], dk[1], dk[2],
        dw1, dw2, dw3,
    ])


def _renorm_inplace(x: np.ndarray) -> None:
    ix, iy, iz = x[6], x[7], x[8]
    n = math.sqrt(ix * ix + iy * iy + iz * iz)
    ix, iy, iz = ix / n, iy / n, iz / n
    jx, jy, jz = x[9], x[10], x[11]
    d = jx * ix + jy * iy + jz * iz
    jx, jy, jz = jx - d * ix, jy - d * iy, jz - d * iz
    n = math.sqrt(jx * jx + jy * jy + jz * jz)
    jx, jy, jz = jx / n, jy / n, jz / n
    x[6:9] = ix, iy, iz
    x[9:12] = jx, jy, jz
    x[12] = iy * jz - iz * jy
    x[13] = iz * jx - ix * jz
    x[14] = ix * jy - iy * jx


def rk4_step(x: np.ndarray, t: float, dt: float, thrust: float, mode: str,
             u: np.ndarray, plant: PlantModel, wind: WindField) -> np.ndarray:
    """One RK4 step with zero-order-hold inputs and attitude renormalization."""
    k1 = _deriv(x, t, thrust, mode, u, plant, wind)
    k2 = _deriv(x + 0.5 * dt * k1, t + 0.5 * dt, thrust, mode, u, plant, wind)
    k3 = _deriv(x + 0.5 * dt * k2, t + 0.5 * dt, thrust, mode, u, plant, wind)
    k4 = _deriv(x + dt * k3, t + dt, thrust, mode, u, plant, wind)
    out = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if mode == OMEGA_MODE:
        out[15:18] = u
    _renorm_inplace(out)
    return out


def pack_state(state: AircraftState) -> np.ndarray:
    x = np.empty(18)
    x[0:3] = state.p
    x[3:6] = state.v
    x[6:9] = state.R[:, 0]
    x[9:12] = state.R[:, 1]
    x[12:15] = state.R[:, 2]
    x[15:18] = state.omega
    return x


def unpack_state(x: np.ndarray) -> AircraftState:
    R = np.column_stack([x[6:9], x[9:12], x[12:15]])
    return AircraftState(p=x[0:3].copy(), v=x[3:6].copy(), R=R, omega=x[15:18].copy())


def step_dynamics(state: AircraftState, thrust: float, mode: str, u: np.ndarray,
                  wind: WindField, plant: PlantModel, dt: float,
                  t: float = 0.0) -> AircraftState:
    """Advance the plant one RK4 step; raises NonFiniteState on blow-up.

    ``mode`` selects the rotational input: "omega" imposes the body
    angular velocity directly (backstepping form), "torque" integrates the
    Euler equation from a torque vector, "surfaces" computes the torque
    from surface angles through the plant's surface gain map.
    """
    if not dt > 0.0:
        raise ValueError("dt must be positive")
    if mode not in (OMEGA_MODE, TORQUE_MODE, SURFACE_MODE):
        raise ValueError(f"unknown input mode {mode!r}")
    x = rk4_step(pack_state(state), t, dt, thrust, mode, np.asarray(u, dtype=float),
                 plant, wind)
    if not np.all(np.isfinite(x)):
        raise NonFiniteState("plant state became non-finite")
    return unpack_state(x)
