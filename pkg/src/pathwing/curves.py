"""Curve definitions, parallel transport frames, and path-error kinematics.

A path is framed by an orthonormal, right-handed triad {u, ubar, ubarbar}
propagated along arc length s by the parallel transport equations

    d(ubar)/ds = -gamma1 u,  d(ubarbar)/ds = -gamma2 u,
    d(u)/ds = gamma1 ubar + gamma2 ubarbar

which, unlike the Frenet-Serret frame, stays well defined where curvature
vanishes. Curvature kappa = sqrt(gamma1^2 + gamma2^2).

The position error relative to the closest point q(s) is
p - q = y1 ubar + y2 ubarbar, and the projection is locally well posed
while the margin 1 - gamma1 y1 - gamma2 y2 stays positive.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import (
    CircleAxisDegenerate,
    IllPosedProjection,
    NewtonNoConvergence,
)
from .vectors import cross3, norm3, unit3

DOWN = np.array([0.0, 0.0, 1.0])

# Projection well-posedness threshold: keeps sdot bounded by 10 |v|.
MARGIN_EPS = 0.1


@dataclass(frozen=True)
class PathFrame:
    """Point on the curve plus its parallel transport frame."""

    q: np.ndarray
    u: np.ndarray
    ubar: np.ndarray
    ubarbar: np.ndarray
    gamma1: float
    gamma2: float
    s: float

    @property
    def curvature(self) -> float:
        return math.hypot(self.gamma1, self.gamma2)


@dataclass(frozen=True)
class PathError:
    """In-plane position error coordinates and the well-posedness margin."""

    y1: float
    y2: float
    margin: float

    @property
    def y(self) -> np.ndarray:
        return np.array([self.y1, self.y2])

    @property
    def norm(self) -> float:
        return math.hypot(self.y1, self.y2)


def _error_for(frame: PathFrame, p: np.ndarray) -> PathError:
    d = p - frame.q
    y1 = float(d @ frame.ubar)
    y2 = float(d @ frame.ubarbar)
    margin = 1.0 - frame.gamma1 * y1 - frame.gamma2 * y2
    return PathError(y1, y2, margin)


def _vertical_most(u: np.ndarray) -> np.ndarray:
    """Unit vector in the plane orthogonal to u closest to the down axis.

    Used as the default ubarbar for straight lines so the second error
    coordinate acts on climb/descent. Falls back to north for vertical
    lines, where every perpendicular is horizontal.
    """
    w = DOWN - (DOWN @ u) * u
    n = norm3(w)
    if n < 1e-9:
        w = np.array([1.0, 0.0, 0.0]) - u[0] * u
        n = norm3(w)
    return w / n


@dataclass(frozen=True)
class Line:
    """Straight line through ``point`` along unit ``direction``."""

    point: np.ndarray
    direction: np.ndarray
    ubarbar: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        object.__setattr__(self, "point", np.asarray(self.point, dtype=float))
        object.__setattr__(self, "direction", unit3(np.asarray(self.direction, dtype=float)))
        ubb = self.ubarbar
        if ubb is None:
            ubb = _vertical_most(self.direction)
        else:
            ubb = np.asarray(ubb, dtype=float)
            ubb = unit3(ubb - (ubb @ self.direction) * self.direction)
        object.__setattr__(self, "ubarbar", ubb)
        object.__setattr__(self, "_ubar", cross3(ubb, self.direction))

    def gammas(self, s: float) -> tuple[float, float]:
        return 0.0, 0.0

    def frame_at(self, s: float) -> PathFrame:
        return PathFrame(
            q=self.point + s * self.direction,
            u=self.direction,
            ubar=self._ubar,
            ubarbar=self.ubarbar,
            gamma1=0.0,
            gamma2=0.0,
            s=s,
        )

    def project(self, p: np.ndarray) -> tuple[PathFrame, PathError]:
        s = float(self.direction @ (p - self.point))
        fr = self.frame_at(s)
        return fr, _error_for(fr, p)


@dataclass(frozen=True)
class Circle:
    """Circle of radius ``radius`` centered at ``center`` in the plane
    orthogonal to the unit ``normal``.

    Traversal is counterclockwise about ``normal`` (right-hand rule), with
    arc length measured from the reference direction ``d0`` (center to the
    s = 0 point). The frame normal ubar points from the curve toward the
    center, ubarbar equals the plane normal, gamma1 = 1/radius, gamma2 = 0.
    """

    center: np.ndarray
    radius: float
    normal: np.ndarray
    d0: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if not self.radius > 0.0:
            raise ValueError("circle radius must be positive")
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        n = unit3(np.asarray(self.normal, dtype=float))
        object.__setattr__(self, "normal", n)
        d0 = self.d0
        if d0 is None:
            d0 = _vertical_most(n)
        else:
            d0 = np.asarray(d0, dtype=float)
            d0 = unit3(d0 - (d0 @ n) * n)
        object.__setattr__(self, "d0", d0)
        object.__setattr__(self, "_d2", cross3(n, d0))

    @property
    def circumference(self) -> float:
        return 2.0 * math.pi * self.radius

    def gammas(self, s: float) -> tuple[float, float]:
        return 1.0 / self.radius, 0.0

    def frame_at(self, s: float) -> PathFrame:
        th = s / self.radius
        c, sn = math.cos(th), math.sin(th)
        radial = c * self.d0 + sn * self._d2  # unit, center -> point
        u = -sn * self.d0 + c * self._d2
        return PathFrame(
            q=self.center + self.radius * radial,
            u=u,
            ubar=-radial,
            ubarbar=self.normal,
            gamma1=1.0 / self.radius,
            gamma2=0.0,
            s=s,
        )

    def project(self, p: np.ndarray, s_hint: Optional[float] = None) -> tuple[PathFrame, PathError]:
        rel = p - self.center
        w = cross3(cross3(rel, self.normal), self.normal)
        wn = norm3(w)
        if wn < 1e-9 * max(1.0, self.radius):
            raise CircleAxisDegenerate(
                "point lies on the circle axis; closest point is not unique"
            )
        ubar = w / wn  # points from the closest point toward the center
        u = cross3(ubar, self.normal)
        q = self.center - self.radius * ubar
        radial = -ubar
        th = math.atan2(float(radial @ self._d2), float(radial @ self.d0))
        s = th * self.radius
        if s_hint is not None:
            # unwrap onto the branch nearest the hint
            two_pi_r = self.circumference
            s += two_pi_r * round((s_hint - s) / two_pi_r)
        fr = PathFrame(q=q, u=u, ubar=ubar, ubarbar=self.normal,
                       gamma1=1.0 / self.radius, gamma2=0.0, s=s)
        return fr, _error_for(fr, p)


@dataclass(frozen=True)
class Helix:
    """Helix about ``axis`` through the plane point ``point``.

    ``pitch`` is the climb along the axis per full turn. The parallel
    transport frame is the Frenet frame untwisted at the torsion rate, so
    gamma1(s) = kappa cos(tau s + c) and gamma2(s) = kappa sin(tau s + c).
    """

    point: np.ndarray
    axis: np.ndarray
    radius: float
    pitch: float

    def __post_init__(self):
        if not self.radius > 0.0:
            raise ValueError("helix radius must be positive")
        object.__setattr__(self, "point", np.asarray(self.point, dtype=float))
        w = unit3(np.asarray(self.axis, dtype=float))
        object.__setattr__(self, "axis", w)
        e1 = _vertical_most(w)
        object.__setattr__(self, "_e1", e1)
        object.__setattr__(self, "_e2", cross3(w, e1))
        b = self.pitch / (2.0 * math.pi)
        object.__setattr__(self, "_b", b)
        object.__setattr__(self, "_den", math.sqrt(self.radius ** 2 + b * b))

    @property
    def curvature(self) -> float:
        return self.radius / (self.radius ** 2 + self._b ** 2)

    @property
    def torsion(self) -> float:
        return self._b / (self.radius ** 2 + self._b ** 2)

    def _theta(self, s: float) -> float:
        return s / self._den

    def point_at(self, s: float) -> np.ndarray:
        th = self._theta(s)
        return (
            self.point
            + self.radius * (math.cos(th) * self._e1 + math.sin(th) * self._e2)
            + self._b * th * self.axis
        )

    def gammas(self, s: float) -> tuple[float, float]:
        phi = -self.torsion * s  # parallel transport untwists at rate tau
        k = self.curvature
        return k * math.cos(phi), -k * math.sin(phi)

    def frame_at(self, s: float) -> PathFrame:
        th = self._theta(s)
        c, sn = math.cos(th), math.sin(th)
        radial = c * self._e1 + sn * self._e2
        u = (-self.radius * sn * self._e1 + self.radius * c * self._e2
             + self._b * self.axis) / self._den
        fre_n = -radial  # Frenet normal
        fre_b = cross3(u, fre_n)
        phi = -self.torsion * s
        ubar = math.cos(phi) * fre_n + math.sin(phi) * fre_b
        ubarbar = -math.sin(phi) * fre_n + math.cos(phi) * fre_b
        g1, g2 = self.gammas(s)
        return PathFrame(q=self.point_at(s), u=u, ubar=ubar, ubarbar=ubarbar,
                         gamma1=g1, gamma2=g2, s=s)


def project_newton(
    curve,
    p: np.ndarray,
    s_hint: float,
    tol: float = 1e-10,
    max_iter: int = 60,
    max_step: Optional[float] = None,
) -> tuple[PathFrame, PathError]:
    """Damped Newton solve of (p - q(s)) . u(s) = 0, seeded at ``s_hint``.

    The derivative of the residual is -(1 - gamma1 y1 - gamma2 y2), the
    projection margin, so steps are f / margin with backtracking whenever
    the residual fails to shrink.
    """
    s = float(s_hint)
    fr = curve.frame_at(s)
    err = _error_for(fr, p)
    f = float((p - fr.q) @ fr.u)
    scale = max(1.0, norm3(p - fr.q))
    for _ in range(max_iter):
        if abs(f) < tol * scale:
            return fr, err
        margin = err.margin
        if margin <= 1e-6:
            raise IllPosedProjection(
                f"projection margin {margin:.3e} nonpositive during Newton solve"
            )
        step = f / margin
        if max_step is not None:
            step = max(-max_step, min(max_step, step))
        # backtracking line search on |f|
        for _ in range(25):
            s_new = s + step
            fr_new = curve.frame_at(s_new)
            f_new = float((p - fr_new.q) @ fr_new.u)
            if abs(f_new) <= abs(f) * (1.0 - 1e-4) or abs(f_new) < tol * scale:
                break
            step *= 0.5
        else:
            raise NewtonNoConvergence("line search stalled in closest-point solve")
        s, fr, f = s_new, fr_new, f_new
        err = _error_for(fr, p)
    raise NewtonNoConvergence(f"no convergence after {max_iter} iterations")


def closest_point(
    curve,
    p: np.ndarray,
    s_hint: Optional[float] = None,
    method: str = "auto",
) -> tuple[PathFrame, PathError]:
    """Closest point on ``curve`` with its frame and error coordinates.

    Lines and circles use their closed forms (method="auto"); any curve
    exposing ``frame_at`` can be solved with method="newton", which
    requires a hint abscissa. Raises IllPosedProjection when the margin
    drops to MARGIN_EPS or below.
    """
    if method == "auto" and isinstance(curve, Line):
        fr, err = curve.project(p)
    elif method == "auto" and isinstance(curve, Circle):
        fr, err = curve.project(p, s_hint)
    else:
        if s_hint is None:
            raise ValueError("generic closest-point solve requires a hint abscissa")
        fr, err = project_newton(curve, p, s_hint)
    if err.margin <= MARGIN_EPS:
        raise IllPosedProjection(
            f"projection margin {err.margin:.3f} at s={fr.s:.2f} below {MARGIN_EPS}"
        )
    return fr, err


def advance_frame(frame: PathFrame, ds: float, curve, max_step: float = 0.05) -> PathFrame:
    """Propagate a parallel transport frame by ``ds`` along ``curve``.

    RK4 on the transport equations with the curve supplying gamma1(s),
    gamma2(s), followed by re-orthonormalization. For lines and circles
    this must match the closed-form frames.
    """
    if not math.isfinite(ds):
        raise ValueError("ds must be finite")
    n_sub = max(1, int(math.ceil(abs(ds) / max_step)))
    h = ds / n_sub
    s = frame.s
    q, u = frame.q.copy(), frame.u.copy()
    ub, ubb = frame.ubar.copy(), frame.ubarbar.copy()

    def rates(s_, u_, ub_, ubb_):
        g1, g2 = curve.gammas(s_)
        return u_, g1 * ub_ + g2 * ubb_, -g1 * u_, -g2 * u_

    for _ in range(n_sub):
        k1 = rates(s, u, ub, ubb)
        k2 = rates(s + 0.5 * h, u + 0.5 * h * k1[1], ub + 0.5 * h * k1[2], ubb + 0.5 * h * k1[3])
        k3 = rates(s + 0.5 * h, u + 0.5 * h * k2[1], ub + 0.5 * h * k2[2], ubb + 0.5 * h * k2[3])
        k4 = rates(s + h, u + h * k3[1], ub + h * k3[2], ubb + h * k3[3])
        q = q + (h / 6.0) * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
        u = u + (h / 6.0) * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
        ub = ub + (h / 6.0) * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2])
        ubb = ubb + (h / 6.0) * (k1[3] + 2.0 * k2[3] + 2.0 * k3[3] + k4[3])
        s += h
        # keep the triad orthonormal (u primary, ubar secondary)
        u = unit3(u)
        ub = unit3(ub - (ub @ u) * u)
        ubb = cross3(u, ub)

    g1, g2 = curve.gammas(s)
    return PathFrame(q=q, u=u, ubar=ub, ubarbar=ubb, gamma1=g1, gamma2=g2, s=s)


def path_rates(
    frame: PathFrame,
    err: PathError,
    v_rel: np.ndarray,
    margin_eps: float = MARGIN_EPS,
) -> tuple[float, float, float]:
    """Abscissa and error-coordinate rates for relative velocity ``v_rel``.

    ``v_rel`` is the inertial velocity for a fixed path, or velocity minus
    carrier velocity for a moving path.
    """
    if err.margin <= margin_eps:
        raise IllPosedProjection(f"projection margin {err.margin:.3f} too small")
    sdot = float(frame.u @ v_rel) / err.margin
    return sdot, float(frame.ubar @ v_rel), float(frame.ubarbar @ v_rel)


# ---------------------------------------------------------------------------
# Composite paths and moving carriers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Segment:
    """Bounded piece of a curve: local abscissa runs over [0, length]."""

    curve: Line | Circle | Helix
    length: float

    def __post_init__(self):
        if not self.length > 0.0:
            raise ValueError("segment length must be positive")

    def project(self, p: np.ndarray, s_hint: Optional[float] = None):
        if isinstance(self.curve, Circle):
            # center the branch cut opposite the segment midpoint so local
            # abscissas just past either end keep their sign
            mid = 0.5 * self.length
            fr, err = self.curve.project(p, s_hint if s_hint is not None else mid)
            two_pi_r = self.curve.circumference
            rel = math.remainder(fr.s - mid, two_pi_r)
            fr = PathFrame(fr.q, fr.u, fr.ubar, fr.ubarbar, fr.gamma1, fr.gamma2, mid + rel)
            return fr, err
        if isinstance(self.curve, Line):
            return self.curve.project(p)
        return project_newton(self.curve, p, self.length / 2.0 if s_hint is None else s_hint)

    @property
    def end_point(self) -> np.ndarray:
        return self.curve.frame_at(self.length).q

    @property
    def start_point(self) -> np.ndarray:
        return self.curve.frame_at(0.0).q


@dataclass(frozen=True)
class CompositePath:
    """Ordered list of segments with an advance-past-the-end switch rule.

    The active segment is tracked by the caller; projection onto the
    active segment whose local abscissa exceeds the segment length hands
    over to the next segment (wrapping when closed). The error may jump at
    the hand-over, which shows up as a switch transient.
    """

    segments: Sequence[Segment]
    closed: bool = True

    def __post_init__(self):
        if len(self.segments) == 0:
            raise ValueError("composite path needs at least one segment")

    def initial_segment(self, p: np.ndarray) -> int:
        """Segment whose projection is nearest to ``p`` (ties: lowest index)."""
        best, best_d = 0, math.inf
        for idx, seg in enumerate(self.segments):
            try:
                fr, _ = seg.project(p)
            except CircleAxisDegenerate:
                continue
            d = norm3(p - fr.q)
            if d < best_d - 1e-12:
                best, best_d = idx, d
        return best

    def project_active(
        self, p: np.ndarray, segment: int, s_hint: Optional[float] = None
    ) -> tuple[int, PathFrame, PathError]:
        """Project onto the active segment, advancing past finished ones."""
        idx = segment
        for _ in range(len(self.segments) + 1):
            seg = self.segments[idx]
            fr, err = seg.project(p, s_hint)
            if fr.s <= seg.length:
                return idx, fr, err
            if not self.closed and idx == len(self.segments) - 1:
                return idx, fr, err
            idx = (idx + 1) % len(self.segments)
            s_hint = None
        raise IllPosedProjection("projection cycled through every segment")


@dataclass(frozen=True)
class Carrier:
    """Uniformly translating frame the path is attached to."""

    velocity: np.ndarray
    origin: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "velocity", np.asarray(self.velocity, dtype=float))
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=float))

    def offset(self, t: float) -> np.ndarray:
        return self.origin + t * self.velocity

    def velocity_at(self, t: float) -> np.ndarray:
        return self.velocity


@dataclass(frozen=True)
class PathSpec:
    """A curve or composite path, optionally attached to a moving carrier."""

    base: Line | Circle | Helix | CompositePath
    carrier: Optional[Carrier] = None

    @property
    def is_composite(self) -> bool:
        return isinstance(self.base, CompositePath)

    def carrier_velocity(self, t: float) -> np.ndarray:
        if self.carrier is None:
            return np.zeros(3)
        return self.carrier.velocity_at(t)

    def project(
        self, p: np.ndarray, t: float, segment: int = 0, s_hint: Optional[float] = None
    ) -> tuple[int, PathFrame, PathError]:
        """Project in the carrier frame, returning a world-frame result."""
        p_local = p if self.carrier is None else p - self.carrier.offset(t)
        if self.is_composite:
            idx, fr, err = self.base.project_active(p_local, segment, s_hint)
        else:
            fr, err = closest_point(self.base, p_local, s_hint)
            idx = 0
        if self.carrier is not None:
            fr = PathFrame(fr.q + self.carrier.offset(t), fr.u, fr.ubar,
                           fr.ubarbar, fr.gamma1, fr.gamma2, fr.s)
        return idx, fr, err


# ---------------------------------------------------------------------------
# Trim feasibility conditions for local exponential stability
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrimConditions:
    """Point-wise feasibility of the zero-wind constant-speed equilibrium.

    ``frame_ok``: the desired-attitude construction stays nondegenerate
    (gravity cross tangent vs. centripetal demand). ``speed_ok``: the
    drag-adjusted gravity component along the tangent stays away from the
    singular speed.
    """

    frame_ok: bool
    speed_ok: bool


def check_trim_conditions(
    frame: PathFrame,
    v_star: float,
    mass: float,
    c0bar: float,
    g0: float = 9.81,
    eps_frame: float = 1e-6,
    eps_speed: float = 1e-6,
) -> TrimConditions:
    """Evaluate both feasibility conditions at one point of the path."""
    g_vec = g0 * DOWN
    lateral = cross3(g_vec, frame.u) - v_star ** 2 * (
        frame.gamma1 * frame.ubarbar - frame.gamma2 * frame.ubar
    )
    frame_ok = norm3(lateral) > eps_frame
    speed_ok = abs((c0bar / mass) * v_star ** 2 - float(g_vec @ frame.u)) > eps_speed
    return TrimConditions(frame_ok=frame_ok, speed_ok=speed_ok)


def min_speed_for_trim(
    curve,
    s_range: tuple[float, float],
    mass: float,
    c0bar: float,
    g0: float = 9.81,
    n_scan: int = 3600,
) -> float:
    """Smallest speed satisfying the speed condition everywhere on the curve.

    Scans the tangent direction over the abscissa range; the binding value
    is the largest downhill gravity component g . u along the path.
    """
    worst = 0.0
    for s in np.linspace(s_range[0], s_range[1], n_scan):
        fr = curve.frame_at(float(s))
        worst = max(worst, g0 * float(fr.u @ DOWN))
    if worst <= 0.0:
        return 0.0
    return math.sqrt(mass * worst / c0bar)
