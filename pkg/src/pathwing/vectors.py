"""Frame-aware 3-vectors, smooth saturation, and rotation helpers.

Conventions used throughout the package: the inertial frame is
north-east-down, so the unit "down" vector is ``(0, 0, 1)`` and gravity is
``+g0`` along z. Altitude is ``-z``. Body frame: x longitudinal, y toward
the right wing, z completing the right-handed triad (down in level flight).

``Vec3`` is the checked boundary type: it carries a frame tag and refuses
dot/cross products between vectors expressed in different frames. Hot
loops (plant integration, controller step) operate on raw length-3 numpy
arrays via the module-level helpers, which assume the caller keeps frames
straight.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .errors import FrameMismatch, UnitVectorError

INERTIAL = "inertial"
BODY = "body"
PATH = "path"
FRAMES = (INERTIAL, BODY, PATH)

# Unit-vector handling: accept as-is below this deviation ...
UNIT_TOL = 1e-9
# ... silently renormalize below this one, hard error beyond (long
# integrations drift; anything worse is a caller bug).
UNIT_RENORM_TOL = 1e-6


@dataclass(frozen=True)
class Vec3:
    """Euclidean 3-vector tagged with the frame it is expressed in."""

    x: float
    y: float
    z: float
    frame: str = INERTIAL

    def __post_init__(self):
        if self.frame not in FRAMES:
            raise ValueError(f"unknown frame {self.frame!r}, expected one of {FRAMES}")

    @classmethod
    def from_array(cls, a: Iterable[float], frame: str = INERTIAL) -> "Vec3":
        ax, ay, az = (float(v) for v in a)
        return cls(ax, ay, az, frame)

    @property
    def array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    def _check(self, other: "Vec3") -> None:
        if self.frame != other.frame:
            raise FrameMismatch(
                f"cannot combine {self.frame!r} vector with {other.frame!r} vector"
            )

    def __add__(self, other: "Vec3") -> "Vec3":
        self._check(other)
        return Vec3(self.x + other.x, self.y + other.y, self.z + other.z, self.frame)

    def __sub__(self, other: "Vec3") -> "Vec3":
        self._check(other)
        return Vec3(self.x - other.x, self.y - other.y, self.z - other.z, self.frame)

    def __mul__(self, s: float) -> "Vec3":
        return Vec3(self.x * s, self.y * s, self.z * s, self.frame)

    __rmul__ = __mul__

    def __neg__(self) -> "Vec3":
        return Vec3(-self.x, -self.y, -self.z, self.frame)

    def dot(self, other: "Vec3") -> float:
        self._check(other)
        return self.x * other.x + self.y * other.y + self.z * other.z

    def cross(self, other: "Vec3") -> "Vec3":
        self._check(other)
        return Vec3(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
            self.frame,
        )

    def norm(self) -> float:
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)

    def unit(self) -> "Vec3":
        n = self.norm()
        if n == 0.0:
            raise ValueError("cannot normalize a zero vector")
        return Vec3(self.x / n, self.y / n, self.z / n, self.frame)


# ---------------------------------------------------------------------------
# Raw-array helpers (hot path)
# ---------------------------------------------------------------------------

def norm3(v: np.ndarray) -> float:
    return math.sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2])


def cross3(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.array(
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    )


def unit3(v: np.ndarray) -> np.ndarray:
    n = norm3(v)
    if n == 0.0:
        raise ValueError("cannot normalize a zero vector")
    return v / n


def ensure_unit(v: np.ndarray, name: str = "vector") -> np.ndarray:
    """Return ``v`` guaranteed unit-norm, renormalizing small drift.

    Deviation below UNIT_TOL passes through untouched, below
    UNIT_RENORM_TOL is renormalized, beyond that raises UnitVectorError.
    """
    dev = abs(norm3(v) - 1.0)
    if dev <= UNIT_TOL:
        return v
    if dev <= UNIT_RENORM_TOL:
        return unit3(v)
    raise UnitVectorError(f"{name} has norm deviating by {dev:.3e} from 1")


def project_perp(u: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Project ``x`` onto the plane orthogonal to the unit vector ``u``."""
    u = ensure_unit(u, "projection axis")
    d = u[0] * x[0] + u[1] * x[1] + u[2] * x[2]
    return x - d * u


def rotate_about(axis: np.ndarray, angle: float, x: np.ndarray) -> np.ndarray:
    """Rodrigues rotation of ``x`` by ``angle`` about the unit vector ``axis``."""
    k = ensure_unit(axis, "rotation axis")
    c = math.cos(angle)
    s = math.sin(angle)
    kx = cross3(k, x)
    kd = k[0] * x[0] + k[1] * x[1] + k[2] * x[2]
    return x * c + kx * s + k * (kd * (1.0 - c))


# ---------------------------------------------------------------------------
# Smooth saturation
# ---------------------------------------------------------------------------

def _tanh_gain(ratio: float) -> float:
    """tanh(r)/r, the normalized gain of the tanh saturation profile."""
    if ratio < 1e-4:
        # series expansion, exact to double precision in this range
        r2 = ratio * ratio
        return 1.0 - r2 / 3.0 + 2.0 * r2 * r2 / 15.0
    return math.tanh(ratio) / ratio


@dataclass(frozen=True)
class SatProfile:
    """Smooth saturation profile: bound ``delta`` plus a normalized gain shape.

    ``gain(r)`` maps the ratio ``|y|/delta`` to a multiplier in (0, 1] with
    gain(0) = 1, decreasing, and gain(r) * r -> 1 as r -> infinity, so that
    the saturated vector ``gain(|y|/delta) * y`` never exceeds ``delta`` in
    norm. The default is the tanh shape; the profile is pluggable because
    only this class of functions matters, not one specific member.
    """

    delta: float
    gain: Callable[[float], float] = field(default=_tanh_gain)

    def __post_init__(self):
        if not self.delta > 0.0:
            raise ValueError("saturation bound delta must be positive")

    def alpha(self, magnitude: float) -> float:
        """Gain multiplier for an input of the given magnitude (>= 0)."""
        return self.gain(magnitude / self.delta)


def smooth_sat(y: np.ndarray | float, profile: SatProfile) -> np.ndarray | float:
    """Saturate ``y`` smoothly: direction preserved, norm bounded by delta."""
    if np.isscalar(y):
        return profile.alpha(abs(y)) * y
    y = np.asarray(y, dtype=float)
    return profile.alpha(float(np.sqrt(y @ y))) * y


def sat_alpha(magnitude: float, delta: float) -> float:
    """Gain of the tanh profile at the given input magnitude (hot path)."""
    return _tanh_gain(magnitude / delta)


def sat_tanh(y: np.ndarray, delta: float) -> np.ndarray:
    """Smooth tanh saturation of a vector (hot path, default profile)."""
    n = math.sqrt(float(y @ y))
    return _tanh_gain(n / delta) * y


# ---------------------------------------------------------------------------
# Rotation-matrix helpers (attitude is stored column-wise: R = [i j k])
# ---------------------------------------------------------------------------

def orthonormalize_columns(R: np.ndarray) -> np.ndarray:
    """Gram-Schmidt the columns of R, keeping the first column's direction."""
    i = unit3(R[:, 0])
    j = R[:, 1] - (R[:, 1] @ i) * i
    j = unit3(j)
    k = cross3(i, j)
    return np.column_stack([i, j, k])


def rotation_about(axis: np.ndarray, angle: float) -> np.ndarray:
    """Rotation matrix for a rotation of ``angle`` about ``axis``."""
    k = ensure_unit(axis, "rotation axis")
    K = np.array(
        [
            [0.0, -k[2], k[1]],
            [k[2], 0.0, -k[0]],
            [-k[1], k[0], 0.0],
        ]
    )
    return np.eye(3) + math.sin(angle) * K + (1.0 - math.cos(angle)) * (K @ K)


def rotation_rpy(roll: float, pitch: float, yaw: float) -> np.ndarray:
    """Rotation matrix from roll-pitch-yaw (z-y-x intrinsic, NED body)."""
    cr, sr = math.cos(roll), math.sin(roll)
    cp, sp = math.cos(pitch), math.sin(pitch)
    cy, sy = math.cos(yaw), math.sin(yaw)
    return np.array(
        [
            [cp * cy, sr * sp * cy - cr * sy, cr * sp * cy + sr * sy],
            [cp * sy, sr * sp * sy + cr * cy, cr * sp * sy - sr * cy],
            [-sp, sr * cp, cr * cp],
        ]
    )


def rotation_angle(Ra: np.ndarray, Rb: np.ndarray) -> float:
    """Angle of the relative rotation between two attitude matrices."""
    tr = float(np.trace(Ra.T @ Rb))
    c = 0.5 * (tr - 1.0)
    return math.acos(min(1.0, max(-1.0, c)))
