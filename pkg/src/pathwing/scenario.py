"""Scenario configuration: schema, YAML loading, and validation.

Scenario files are YAML with explicit units in key names (radius_m,
wind_mps, duration_s, ...). The schema is versioned; see README for the
full reference. Everything needed for a deterministic closed-loop run
lives in one file: airframe, plant perturbations, wind, path, speed
setpoint, controller options, initial state, optional sensor noise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from .aircraft import AeroParams, GustSpec, PlantModel, WindField
from .control import ControllerConfig, Gains
from .curves import Carrier, Circle, CompositePath, Helix, Line, PathSpec, Segment
from .errors import ScenarioError
from .vectors import norm3, unit3

SCHEMA_VERSION = 1

_GAIN_KEYS = {f.name for f in Gains.__dataclass_fields__.values()}  # type: ignore[attr-defined]


@dataclass(frozen=True)
class NoiseSpec:
    """Additive Gaussian measurement noise, drawn per controller step."""

    seed: int = 0
    pos_m: float = 0.0
    vel_mps: float = 0.0
    att_rad: float = 0.0
    omega_radps: float = 0.0
    pitot_mps: float = 0.0

    @property
    def any_active(self) -> bool:
        return any((self.pos_m, self.vel_mps, self.att_rad,
                    self.omega_radps, self.pitot_mps))


@dataclass(frozen=True)
class SpeedSetpoint:
    """Constant or piecewise-linear speed setpoint profile."""

    mode: str                      # "airspeed" | "inertial"
    points: tuple[tuple[float, float], ...]

    def __call__(self, t: float) -> tuple[float, float]:
        pts = self.points
        if len(pts) == 1 or t <= pts[0][0]:
            return pts[0][1], 0.0
        for (t0, v0), (t1, v1) in zip(pts, pts[1:]):
            if t < t1:
                if t1 == t0:
                    return v1, 0.0
                slope = (v1 - v0) / (t1 - t0)
                return v0 + slope * (t - t0), slope
        return pts[-1][1], 0.0


@dataclass(frozen=True)
class InitialState:
    position: np.ndarray
    velocity: np.ndarray
    attitude: str = "trim"          # "trim" | "level" | "rpy"
    rpy_deg: tuple[float, float, float] = (0.0, 0.0, 0.0)
    omega: np.ndarray = field(default_factory=lambda: np.zeros(3))


@dataclass(frozen=True)
class Scenario:
    """Everything defining one deterministic closed-loop run."""

    name: str
    duration: float
    dt_plant: float
    dt_controller: float
    model: AeroParams
    plant: PlantModel
    wind: WindField
    path: PathSpec
    setpoint: SpeedSetpoint
    gains: Gains
    measurement: str
    accel_source: str
    actuation: str
    two_axis: bool
    sign_vu: float
    initial: InitialState
    noise: Optional[NoiseSpec] = None
    seed: int = 0
    g0: float = 9.81

    def __post_init__(self):
        if not self.duration > 0.0:
            raise ScenarioError("duration must be positive")
        ratio = self.dt_controller / self.dt_plant
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise ScenarioError("controller period must be an integer multiple "
                                "of the plant step")

    @property
    def substeps(self) -> int:
        return int(round(self.dt_controller / self.dt_plant))

    def controller_config(self) -> ControllerConfig:
        return ControllerConfig(
            path=self.path,
            gains=self.gains,
            model=self.model,
            speed_mode=self.setpoint.mode,
            measurement=self.measurement,
            accel_source=self.accel_source,
            actuation=self.actuation,
            two_axis=self.two_axis,
            sign_vu=self.sign_vu,
            g0=self.g0,
            dt=self.dt_controller,
        )


def consistent_surface_gain(params: AeroParams, gains: Gains) -> np.ndarray:
    """Plant surface-to-torque gain matching the allocation's assumed map.

    The allocation treats delta* = -(1/|va|^2) diag(alloc_gain) (w - w*)
    as realizing the torque -k_gamma J (w - w*); the diagonal plant map
    delivering exactly that is k_gamma J_ii / alloc_gain_i.
    """
    return gains.k_gamma * np.diag(params.inertia) / np.asarray(gains.alloc_gain)


# ---------------------------------------------------------------------------
# Parsing helpers
# ---------------------------------------------------------------------------

def _vec(node, key: str) -> np.ndarray:
    v = node.get(key)
    if v is None or len(v) != 3:
        raise ScenarioError(f"{key} must be a 3-element list")
    return np.array([float(c) for c in v])


def _parse_curve(node: dict):
    kind = node.get("type")
    if kind == "line":
        return Line(point=_vec(node, "point_m"), direction=_vec(node, "direction"))
    if kind == "circle":
        return Circle(center=_vec(node, "center_m"), radius=float(node["radius_m"]),
                      normal=_vec(node, "normal"),
                      d0=_vec(node, "d0") if "d0" in node else None)
    if kind == "helix":
        return Helix(point=_vec(node, "point_m"), axis=_vec(node, "axis"),
                     radius=float(node["radius_m"]), pitch=float(node["pitch_m"]))
    raise ScenarioError(f"unknown curve type {kind!r}")


def _parse_segment(node: dict) -> Segment:
    kind = node.get("type")
    if kind == "line":
        start, end = _vec(node, "start_m"), _vec(node, "end_m")
        span = end - start
        length = norm3(span)
        if length <= 0.0:
            raise ScenarioError("line segment start and end coincide")
        return Segment(curve=Line(point=start, direction=span / length), length=length)
    if kind == "arc":
        center, start = _vec(node, "center_m"), _vec(node, "start_m")
        normal = unit3(_vec(node, "normal"))
        radial = start - center
        radius = norm3(radial)
        if radius <= 0.0:
            raise ScenarioError("arc start coincides with its center")
        if abs(float(radial @ normal)) > 1e-6 * radius:
            raise ScenarioError("arc start is not in the plane through the center")
        angle = math.radians(float(node["angle_deg"]))
        if angle <= 0.0:
            raise ScenarioError("arc angle_deg must be positive")
        circle = Circle(center=center, radius=radius, normal=normal, d0=radial / radius)
        return Segment(curve=circle, length=radius * angle)
    raise ScenarioError(f"unknown segment type {kind!r}")


def _parse_path(node: dict) -> PathSpec:
    kind = node.get("type")
    if kind == "composite":
        segs = [_parse_segment(s) for s in node.get("segments", [])]
        if not segs:
            raise ScenarioError("composite path needs at least one segment")
        base = CompositePath(segments=tuple(segs), closed=bool(node.get("closed", True)))
    else:
        base = _parse_curve(node)
    carrier = None
    if "carrier" in node and node["carrier"] is not None:
        cnode = node["carrier"]
        carrier = Carrier(velocity=_vec(cnode, "velocity_mps"),
                          origin=_vec(cnode, "origin_m") if "origin_m" in cnode
                          else np.zeros(3))
    return PathSpec(base=base, carrier=carrier)


def _parse_setpoint(node: dict) -> SpeedSetpoint:
    if "airspeed_mps" in node:
        mode, value = "airspeed", node["airspeed_mps"]
    elif "inertial_speed_mps" in node:
        mode, value = "inertial", node["inertial_speed_mps"]
    else:
        raise ScenarioError("setpoint needs airspeed_mps or inertial_speed_mps")
    if isinstance(value, (int, float)):
        points = ((0.0, float(value)),)
    else:
        points = tuple((float(t), float(v)) for t, v in value)
        if any(t1 <= t0 for (t0, _), (t1, _) in zip(points, points[1:])):
            raise ScenarioError("setpoint profile times must be increasing")
    return SpeedSetpoint(mode=mode, points=points)


def _parse_aircraft(node: dict) -> AeroParams:
    inertia = node.get("inertia_diag_kgm2", [0.02, 0.04, 0.05])
    return AeroParams(
        mass=float(node.get("mass_kg", 2.0)),
        c0=float(node.get("c0_kg_per_m", 0.006)),
        c1=float(node.get("c1_kg_per_m", 0.5)),
        inertia=np.diag([float(x) for x in inertia]),
        lateral_model=node.get("lateral_model", "disc"),
    )


def scenario_from_dict(raw: dict, name: str = "scenario") -> Scenario:
    version = raw.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ScenarioError(f"unsupported schema_version {version!r}, "
                            f"expected {SCHEMA_VERSION}")
    try:
        model = _parse_aircraft(raw.get("aircraft", {}))

        gains_over = dict(raw.get("controller", {}).get("gains", {}) or {})
        bad = set(gains_over) - _GAIN_KEYS
        if bad:
            raise ScenarioError(f"unknown gain keys: {sorted(bad)}")
        gains_over = {k: (tuple(v) if isinstance(v, list) else float(v))
                      for k, v in gains_over.items()}
        gains = Gains(**gains_over)

        plant_node = raw.get("plant", {}) or {}
        c_lat = plant_node.get("c_lat_kg_per_m")
        plant_params = AeroParams(
            mass=model.mass,
            c0=model.c0 * float(plant_node.get("c0_scale", 1.0)),
            c1=model.c1 * float(plant_node.get("c1_scale", 1.0)),
            inertia=model.inertia,
            lateral_model=plant_node.get("lateral_model", model.lateral_model),
            c_lat=None if c_lat is None else float(c_lat),
        )
        weathercock = plant_node.get("weathercock_cv")
        rot_damping = plant_node.get("rot_damping")
        plant = PlantModel(
            params=plant_params,
            gravity=float(raw.get("g0", 9.81)),
            surface_gain=consistent_surface_gain(model, gains),
            weathercock=None if weathercock is None else float(weathercock),
            rot_damping=None if rot_damping is None
            else np.array([float(x) for x in rot_damping]),
        )

        wind_node = raw.get("wind", {}) or {}
        gust = None
        if wind_node.get("gust"):
            gnode = wind_node["gust"]
            gust = GustSpec(amplitude=float(gnode["amplitude_mps"]),
                            n_modes=int(gnode.get("n_modes", 3)),
                            seed=int(gnode.get("seed", 0)))
        wind = WindField(constant=_vec(wind_node, "constant_mps")
                         if "constant_mps" in wind_node else np.zeros(3),
                         gust=gust)

        ctrl = raw.get("controller", {}) or {}
        init_node = raw["initial"]
        attitude = init_node.get("attitude", "trim")
        if attitude not in ("trim", "level", "rpy"):
            raise ScenarioError(f"unknown initial attitude {attitude!r}")
        initial = InitialState(
            position=_vec(init_node, "position_m"),
            velocity=_vec(init_node, "velocity_mps"),
            attitude=attitude,
            rpy_deg=tuple(init_node.get("rpy_deg", (0.0, 0.0, 0.0))),
            omega=_vec(init_node, "omega_radps") if "omega_radps" in init_node
            else np.zeros(3),
        )

        noise = None
        if raw.get("noise"):
            nn = raw["noise"]
            noise = NoiseSpec(
                seed=int(nn.get("seed", raw.get("seed", 0))),
                pos_m=float(nn.get("pos_m", 0.0)),
                vel_mps=float(nn.get("vel_mps", 0.0)),
                att_rad=float(nn.get("att_rad", 0.0)),
                omega_radps=float(nn.get("omega_radps", 0.0)),
                pitot_mps=float(nn.get("pitot_mps", 0.0)),
            )

        return Scenario(
            name=raw.get("name", name),
            duration=float(raw["duration_s"]),
            dt_plant=float(raw.get("dt_plant_s", 0.001)),
            dt_controller=float(raw.get("dt_controller_s", 0.004)),
            model=model,
            plant=plant,
            wind=wind,
            path=_parse_path(raw["path"]),
            setpoint=_parse_setpoint(raw["setpoint"]),
            gains=gains,
            measurement=ctrl.get("measurement", "true"),
            accel_source=ctrl.get("accel_source", "zero"),
            actuation=ctrl.get("actuation", "omega"),
            two_axis=bool(ctrl.get("two_axis", False)),
            sign_vu=float(ctrl.get("sign_vu", 1.0)),
            initial=initial,
            noise=noise,
            seed=int(raw.get("seed", 0)),
            g0=float(raw.get("g0", 9.81)),
        )
    except KeyError as exc:
        raise ScenarioError(f"missing required scenario key: {exc}") from exc


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    with open(path) as fh:
        raw = yaml.safe_load(fh)
    if not isinstance(raw, dict):
        raise ScenarioError(f"{path} does not contain a mapping")
    return scenario_from_dict(raw, name=path.stem)


def builtin_scenario_dir() -> Path:
    """Directory of the scenario files shipped with the repository."""
    return Path(__file__).resolve().parents[2] / "scenarios"
