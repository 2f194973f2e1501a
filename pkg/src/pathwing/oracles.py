"""Executable stability oracles: reference ODEs, pole checks, monitors.

These encode the analytical guarantees of the control design as runnable
numerical checks, consumed both by the test suite and the ``verify`` CLI
subcommand:

- the saturated-PI error system whose solutions must stay bounded, keep
  the integrator ultimately inside its saturation bound, and decay
  exponentially when the perturbation vanishes;
- the linearized heading dynamics, whose stable branch has characteristic
  polynomial s^2 + kh1 s + kh2 (and a mirrored unstable branch);
- Lyapunov-style monitors over simulation traces: monotone decrease
  within integrator tolerance, and log-slope fits for exponential decay.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .control import (
    Gains,
    attitude_omega,
    heading_omega,
    update_heading_integrator,
)
from .vectors import (
    cross3,
    norm3,
    rotate_about,
    rotation_about,
    sat_alpha,
    sat_tanh,
    unit3,
)


# ---------------------------------------------------------------------------
# Saturated-PI reference system
#   xdot = -k1(x) x - k2 alpha y + mu(t, x)
#   ydot = k2 k3 (-y + satbar(y + x/k3))
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SatPiSystem:
    """Reference error system with a smoothly saturated integrator.

    k1(x) = k11 + k12 |x|^p with p > max(0, q - 1); the perturbation must
    satisfy |mu| <= k_mu (|x| + c)^q; k1/k2 stays within fixed bounds by
    construction (both constant here except for the k12 term).
    """

    k11: float
    k12: float
    p: float
    k2: float
    k3: float
    delta_y: float
    k_mu: float = 0.0
    c: float = 1.0
    q: float = 1.0
    dim: int = 1
    mu: Optional[Callable[[float, np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        if min(self.k11, self.k2, self.k3, self.delta_y) <= 0.0:
            raise ValueError("k11, k2, k3 and delta_y must be positive")
        if self.k12 < 0.0 or self.k_mu < 0.0 or self.c < 0.0:
            raise ValueError("k12, k_mu and c must be nonnegative")
        if self.k12 > 0.0 and not self.p > max(0.0, self.q - 1.0):
            raise ValueError("exponent p must exceed max(0, q - 1)")
        if self.k12 == 0.0 and self.k_mu > 0.0 and self.q > 1.0:
            raise ValueError("persistent superlinear perturbation needs k12 > 0")

    def k1(self, xn: float) -> float:
        if self.k12 == 0.0:
            return self.k11
        return self.k11 + self.k12 * xn ** self.p

    def rhs(self, t: float, x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        arg = y + x / self.k3
        alpha = sat_alpha(norm3_any(arg), self.delta_y)
        xdot = -self.k1(norm3_any(x)) * x - self.k2 * alpha * y
        if self.mu is not None:
            xdot = xdot + self.mu(t, x)
        ydot = self.k2 * self.k3 * (alpha * arg - y)
        return xdot, ydot

    def x_ultimate_bound(self, y_max: float,
                         mu_envelope: Optional[Callable[[float], float]] = None) -> float:
        """Radius beyond which |x| strictly decreases, whatever y does.

        Solves k1(r) r = k2 y_max + mu_env(r) for the outermost root;
        |x(t)| <= max(|x0|, bound) follows. ``mu_envelope`` is the worst
        perturbation magnitude as a function of |x| (defaults to the class
        envelope k_mu (r + c)^q).
        """
        env = mu_envelope if mu_envelope is not None else (
            lambda r: self.k_mu * (r + self.c) ** self.q)

        def g(r: float) -> float:
            return self.k1(r) * r - self.k2 * y_max - env(r)

        hi = 1.0
        for _ in range(200):
            if g(hi) > 0.0:
                break
            hi *= 2.0
        else:
            raise ValueError("no finite ultimate bound for these parameters")
        return brentq(g, 0.0, hi, xtol=1e-10)


def norm3_any(v: np.ndarray) -> float:
    return float(np.sqrt(v @ v))


@dataclass
class SatPiTrace:
    t: np.ndarray
    x: np.ndarray  # (n, dim)
    y: np.ndarray  # (n, dim)

    @property
    def x_norm(self) -> np.ndarray:
        return np.sqrt(np.sum(self.x * self.x, axis=1))

    @property
    def y_norm(self) -> np.ndarray:
        return np.sqrt(np.sum(self.y * self.y, axis=1))

    @property
    def energy(self) -> np.ndarray:
        """0.5 (|x|^2 + |y|^2), the epsilon = 0 quadratic form."""
        return 0.5 * (self.x_norm ** 2 + self.y_norm ** 2)


def integrate_sat_pi(sys: SatPiSystem, x0: np.ndarray, y0: np.ndarray,
                     t_end: float, dt: Optional[float] = None) -> SatPiTrace:
    """Fixed-step RK4 trace of the saturated-PI system."""
    x = np.atleast_1d(np.asarray(x0, dtype=float))
    y = np.atleast_1d(np.asarray(y0, dtype=float))
    if dt is None:
        rate = sys.k1(norm3_any(x)) + sys.k2 * sys.k3 + sys.k2
        dt = min(0.025, 0.35 / rate)
    n = int(math.ceil(t_end / dt))
    ts = np.empty(n + 1)
    xs = np.empty((n + 1, x.size))
    ys = np.empty((n + 1, y.size))
    ts[0], xs[0], ys[0] = 0.0, x, y
    t = 0.0
    for k in range(n):
        ax, ay = sys.rhs(t, x, y)
        bx, by = sys.rhs(t + dt / 2, x + dt / 2 * ax, y + dt / 2 * ay)
        cx, cy = sys.rhs(t + dt / 2, x + dt / 2 * bx, y + dt / 2 * by)
        dx, dy = sys.rhs(t + dt, x + dt * cx, y + dt * cy)
        x = x + dt / 6 * (ax + 2 * bx + 2 * cx + dx)
        y = y + dt / 6 * (ay + 2 * by + 2 * cy + dy)
        t += dt
        ts[k + 1], xs[k + 1], ys[k + 1] = t, x, y
    return SatPiTrace(t=ts, x=xs, y=ys)


# ---------------------------------------------------------------------------
# Linearized heading poles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HeadingPoles:
    stable: tuple[complex, complex]    # roots of s^2 + kh1 s + kh2
    unstable: tuple[complex, complex]  # roots of s^2 - kh1 s - kh2
    multiplicity: int = 2              # each root appears twice in the 4th-order system


def _quadratic_roots(b: float, c: float) -> tuple[complex, complex]:
    """Roots of s^2 + b s + c with exact handling of near-double roots."""
    disc = b * b - 4.0 * c
    if abs(disc) <= 4.0 * math.ulp(max(b * b, abs(4.0 * c))):
        r = -b / 2.0
        return (complex(r, 0.0), complex(r, 0.0))
    sq = math.sqrt(abs(disc))
    if disc > 0.0:
        return (complex((-b - sq) / 2.0, 0.0), complex((-b + sq) / 2.0, 0.0))
    return (complex(-b / 2.0, -sq / 2.0), complex(-b / 2.0, sq / 2.0))


def linearized_heading_poles(kh1: float, kh2: float) -> HeadingPoles:
    """Poles of the linearized heading dynamics about both equilibria."""
    if kh1 <= 0.0 or kh2 <= 0.0:
        raise ValueError("heading gains must be positive")
    return HeadingPoles(
        stable=_quadratic_roots(kh1, kh2),
        unstable=_quadratic_roots(-kh1, -kh2),
    )


# ---------------------------------------------------------------------------
# Monitors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MonitorVerdict:
    passed: bool
    detail: str
    worst: float = 0.0


def monitor_decreasing(t: np.ndarray, v: np.ndarray, dt: float,
                       tol_factor: float = 10.0, abs_tol: float = 1e-14) -> MonitorVerdict:
    """Check that a sampled functional never increases beyond RK4 tolerance.

    Per-step increases up to tol_factor * dt^2 * |v| are attributed to the
    integrator (the underlying inequalities are continuous-time).
    """
    dv = np.diff(v)
    allowed = tol_factor * dt * dt * np.abs(v[:-1]) + abs_tol
    excess = dv - allowed
    worst = float(excess.max()) if excess.size else 0.0
    if worst > 0.0:
        k = int(np.argmax(excess))
        return MonitorVerdict(False, f"increase {dv[k]:.3e} at t={t[k]:.4f} "
                                     f"exceeds tolerance {allowed[k]:.3e}", worst)
    return MonitorVerdict(True, "non-increasing within tolerance", worst)


def fit_log_slope(t: np.ndarray, v: np.ndarray,
                  floor: float = 0.0) -> tuple[float, float]:
    """Least-squares slope and R^2 of log(v) against t (v must be > floor)."""
    mask = v > max(floor, 0.0)
    t, v = t[mask], v[mask]
    if t.size < 3:
        raise ValueError("not enough positive samples for a log fit")
    ln = np.log(v)
    A = np.column_stack([t, np.ones_like(t)])
    coef, *_ = np.linalg.lstsq(A, ln, rcond=None)
    resid = ln - A @ coef
    ss_res = float(resid @ resid)
    ss_tot = float(np.sum((ln - ln.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0.0 else 1.0
    return float(coef[0]), r2


# ---------------------------------------------------------------------------
# Closed-form closed-loop traces used by the monitors
# ---------------------------------------------------------------------------

@dataclass
class AttitudeDecayTrace:
    t: np.ndarray
    theta: np.ndarray

    @property
    def tan_sq_half(self) -> np.ndarray:
        return np.tan(self.theta / 2.0) ** 2


def attitude_decay_trace(k_omega: float, theta0: float, t_end: float,
                         dt: float = 0.001,
                         axis: Sequence[float] = (0.36, 0.48, 0.8)) -> AttitudeDecayTrace:
    """Attitude-only closed loop: angular-velocity input, fixed desired triad.

    The command (zero feedforward) is held over each step and applied as
    an exact rotation, reproducing the pure attitude stabilization loop.
    """
    target = np.eye(3)
    R = rotation_about(unit3(np.asarray(axis, dtype=float)), theta0)
    n = int(round(t_end / dt))
    ts = np.empty(n + 1)
    th = np.empty(n + 1)
    for k in range(n + 1):
        tr = float(np.trace(R))
        th[k] = math.acos(min(1.0, max(-1.0, 0.5 * (tr - 1.0))))
        ts[k] = k * dt
        if k == n:
            break
        omega = attitude_omega(R, target[:, 0], target[:, 1], target[:, 2],
                               np.zeros(3), k_omega)
        wn = norm3(omega)
        if wn > 1e-15:
            R = rotation_about(omega / wn, wn * dt) @ R
    return AttitudeDecayTrace(t=ts, theta=th)


@dataclass
class HeadingLoopTrace:
    t: np.ndarray
    h: np.ndarray       # (n, 3)
    z: np.ndarray       # (n, 3)
    hstar: np.ndarray   # (n, 3)

    def lyapunov(self, kh2: float) -> np.ndarray:
        """(1 - h . h*) + 0.5 kh2 |z|^2, the heading stabilization functional."""
        dot = np.sum(self.h * self.hstar, axis=1)
        return (1.0 - dot) + 0.5 * kh2 * np.sum(self.z * self.z, axis=1)


def heading_loop_trace(gains: Gains, h0: np.ndarray, t_end: float,
                       dt: float = 0.001, hstar0: Sequence[float] = (1.0, 0.0, 0.0),
                       omega_hstar: Optional[np.ndarray] = None) -> HeadingLoopTrace:
    """Kinematic heading loop with exact desired-rate tracking (no residual).

    Integrates hdot = omega_bar_h x h together with the rotating bounded
    integrator, the configuration in which the heading functional must be
    non-increasing.
    """
    h = unit3(np.asarray(h0, dtype=float))
    hstar = unit3(np.asarray(hstar0, dtype=float))
    w_hs = np.zeros(3) if omega_hstar is None else np.asarray(omega_hstar, dtype=float)
    z = np.zeros(3)
    n = int(round(t_end / dt))
    ts = np.empty(n + 1)
    hs = np.empty((n + 1, 3))
    zs = np.empty((n + 1, 3))
    hstars = np.empty((n + 1, 3))

    def h_rhs(h_, z_, hstar_):
        wbar = heading_omega(h_, hstar_, w_hs, z_, gains)
        htilde = cross3(h_, hstar_)
        zdot = cross3(w_hs, z_) + gains.kz * (
            sat_tanh(z_ + htilde / gains.kz, gains.delta_z) - z_
        )
        return cross3(wbar, h_), zdot

    t = 0.0
    for k in range(n + 1):
        ts[k], hs[k], zs[k], hstars[k] = t, h, z, hstar
        if k == n:
            break
        a_h, a_z = h_rhs(h, z, hstar)
        b_h, b_z = h_rhs(unit_or(h + dt / 2 * a_h), z + dt / 2 * a_z, _rot(hstar, w_hs, dt / 2))
        c_h, c_z = h_rhs(unit_or(h + dt / 2 * b_h), z + dt / 2 * b_z, _rot(hstar, w_hs, dt / 2))
        d_h, d_z = h_rhs(unit_or(h + dt * c_h), z + dt * c_z, _rot(hstar, w_hs, dt))
        h = unit3(h + dt / 6 * (a_h + 2 * b_h + 2 * c_h + d_h))
        z = z + dt / 6 * (a_z + 2 * b_z + 2 * c_z + d_z)
        hstar = _rot(hstar, w_hs, dt)
        t += dt
    return HeadingLoopTrace(t=ts, h=hs, z=zs, hstar=hstars)


def unit_or(v: np.ndarray) -> np.ndarray:
    n = norm3(v)
    return v / n if n > 0 else v


def _rot(v: np.ndarray, omega: np.ndarray, dt: float) -> np.ndarray:
    wn = norm3(omega)
    if wn < 1e-15:
        return v
    return rotate_about(omega / wn, wn * dt, v)


# ---------------------------------------------------------------------------
# Verification suite (shared by tests and the CLI `verify` subcommand)
# ---------------------------------------------------------------------------

@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def _sat_pi_grid(n_cases: int = 100, seed: int = 20240817) -> list[dict]:
    """Deterministic fuzzed grid of admissible parameter/IC combinations."""
    rng = np.random.default_rng(seed)
    cases = []
    for i in range(n_cases):
        kind = ("zero", "decay", "persistent")[i % 3]
        k11 = rng.uniform(0.6, 2.5)
        k12 = 0.0 if (kind != "persistent" and rng.random() < 0.5) else rng.uniform(0.05, 0.8)
        # keep k1(|x0|) moderate so fixed-step RK4 stays comfortably stable
        p = rng.uniform(1.1, 2.0)
        k2 = k11 / rng.uniform(0.8, 4.0)
        k3 = rng.uniform(0.6, 3.0)
        delta_y = rng.uniform(0.3, 3.0)
        dim = int(rng.integers(1, 4))
        if kind == "zero":
            k_mu, c, q = 0.0, 1.0, 1.0
        elif kind == "decay":
            # envelope constant in practice; c >= 1 keeps |mu| <= k_mu (|x|+c)^q
            k_mu, c, q = rng.uniform(0.2, 2.0), rng.uniform(1.0, 3.0), 1.0
        else:
            q = rng.uniform(0.3, 0.9) if k12 == 0.0 else rng.uniform(0.5, min(2.0, p + 0.9))
            k_mu, c = rng.uniform(0.05, 0.5), rng.uniform(0.5, 2.0)
        x0 = rng.uniform(-1.0, 1.0, dim)
        x0 *= rng.uniform(0.5, 8.0 if k12 == 0.0 else 4.0) / max(norm3_any(x0), 1e-9)
        y0 = rng.uniform(-1.0, 1.0, dim)
        y0 *= (10.0 * delta_y if i % 5 == 0 else rng.uniform(0.1, 2.0) * delta_y) \
            / max(norm3_any(y0), 1e-9)
        cases.append(dict(kind=kind, k11=k11, k12=k12, p=p, k2=k2, k3=k3,
                          delta_y=delta_y, k_mu=k_mu, c=c, q=q, dim=dim,
                          x0=x0, y0=y0, decay_rate=rng.uniform(0.2, 0.8)))
    return cases


def check_sat_pi_case(case: dict) -> list[str]:
    """Run one grid case and return a list of property violations (empty = pass)."""
    kind = case["kind"]
    mu_fn = None
    rate = case["decay_rate"]
    if kind == "decay":
        direction = np.ones(case["dim"]) / math.sqrt(case["dim"])

        def mu_fn(t, x, _d=direction, _k=case["k_mu"], _r=rate):
            return _k * math.exp(-_r * t) * _d

    elif kind == "persistent":
        direction = np.ones(case["dim"]) / math.sqrt(case["dim"])

        def mu_fn(t, x, _d=direction, _k=case["k_mu"], _c=case["c"], _q=case["q"]):
            return _k * (norm3_any(x) + _c) ** _q * math.sin(1.7 * t) * _d

    sys = SatPiSystem(k11=case["k11"], k12=case["k12"], p=case["p"], k2=case["k2"],
                      k3=case["k3"], delta_y=case["delta_y"], k_mu=case["k_mu"],
                      c=case["c"], q=case["q"], dim=case["dim"], mu=mu_fn)
    slow = min(case["k11"] / 2.0, case["k2"] * case["k3"])
    if kind == "decay":
        slow = min(slow, rate)
    t_end = max(40.0, 14.0 / slow)
    trace = integrate_sat_pi(sys, case["x0"], case["y0"], t_end)

    violations = []
    yn = trace.y_norm
    xn = trace.x_norm
    dy = case["delta_y"]
    y_cap = max(norm3_any(case["y0"]), dy)

    # (3) completeness: no blow-up over the horizon
    if not (np.all(np.isfinite(xn)) and np.all(np.isfinite(yn))):
        return ["non-finite solution"]
    # (1) boundedness and ultimate bound of the integrator state
    if yn.max() > y_cap * (1.0 + 1e-6) + 1e-9:
        violations.append(f"|y| exceeded max(|y0|, delta_y): {yn.max():.4f} > {y_cap:.4f}")
    tail = yn[int(0.9 * yn.size):]
    if tail.max() > dy * (1.0 + 5e-3) + 1e-6:
        violations.append(f"|y| tail {tail.max():.4f} above delta_y {dy:.4f}")
    # (2) boundedness of the error state
    env = (lambda r: case["k_mu"]) if kind == "decay" else None
    x_bound = max(norm3_any(case["x0"]), sys.x_ultimate_bound(y_cap, env))
    if xn.max() > x_bound * (1.0 + 1e-3) + 1e-9:
        violations.append(f"|x| exceeded bound: {xn.max():.4f} > {x_bound:.4f}")

    if kind == "zero":
        # (4) quadratic form non-increasing and exponential convergence
        energy = trace.energy
        dt = trace.t[1] - trace.t[0]
        verdict = monitor_decreasing(trace.t, energy, dt)
        if not verdict.passed:
            violations.append(f"energy increased: {verdict.detail}")
    if kind in ("zero", "decay"):
        # (4)/(5) exponential convergence of the state, fitted on the tail
        # of the above-floor window to skip the saturated transient
        energy = trace.energy
        above = np.flatnonzero(energy > max(energy[0] * 1e-14, 1e-28))
        if above.size > 20:
            i0 = above[int(0.5 * above.size)]
            i1 = above[-1]
            slope, r2 = fit_log_slope(trace.t[i0:i1], energy[i0:i1])
            if slope >= -1e-4 or r2 < 0.99:
                label = ("energy not exponential" if kind == "zero" else
                         "no exponential decay under vanishing perturbation")
                violations.append(f"{label} (slope {slope:.3e}, R2 {r2:.4f})")
        elif energy[-1] > 1e-12:
            violations.append("state neither decayed below floor nor left a fit window")
    return violations


def run_sat_pi_grid(n_cases: int = 100) -> CheckResult:
    cases = _sat_pi_grid(n_cases)
    failures = []
    for idx, case in enumerate(cases):
        bad = check_sat_pi_case(case)
        if bad:
            failures.append(f"case {idx} ({case['kind']}): " + "; ".join(bad))
    if failures:
        return CheckResult("saturated-pi-grid", False,
                           f"{len(failures)}/{len(cases)} cases failed: "
                           + " | ".join(failures[:4]))
    return CheckResult("saturated-pi-grid", True,
                       f"all {len(cases)} fuzzed cases satisfy properties 1-5")


def run_verification_suite(fast: bool = False) -> list[CheckResult]:
    """All oracle checks; returns one result per check."""
    from .aircraft import AeroParams, glide_metrics

    results = []

    gm = glide_metrics(AeroParams(mass=2.0, c0=0.006, c1=0.5))
    ok = abs(gm.glide_ratio - 6.5) <= 0.1 and abs(gm.glide_speed - 15.9) <= 0.1
    results.append(CheckResult(
        "glide-metrics", ok,
        f"glide ratio {gm.glide_ratio:.3f} (want 6.5 +/- 0.1), "
        f"glide speed {gm.glide_speed:.3f} m/s (want 15.9 +/- 0.1)"))

    poles = linearized_heading_poles(1.4, 0.49)
    stable_ok = all(abs(r - (-0.7)) <= 1e-10 for r in poles.stable)
    unstable_ok = any(r.real > 0.0 and abs(r.imag) == 0.0 for r in poles.unstable)
    results.append(CheckResult(
        "heading-poles", stable_ok and unstable_ok,
        f"stable roots {poles.stable}, unstable roots {poles.unstable}"))

    trace = attitude_decay_trace(k_omega=7.0, theta0=2.0, t_end=1.0)
    mask = trace.theta >= 1e-4
    slope, r2 = fit_log_slope(trace.t[mask], trace.tan_sq_half[mask])
    ok = abs(slope - (-28.0)) <= 0.05 * 28.0
    results.append(CheckResult(
        "attitude-decay", ok,
        f"log-slope {slope:.3f} (want -28 +/- 5%), R2 {r2:.5f}"))

    gains = Gains()
    hl = heading_loop_trace(gains, h0=rotate_about(np.array([0.0, 1.0, 0.0]), 2.4,
                                                   np.array([1.0, 0.0, 0.0])),
                            t_end=8.0)
    v0 = hl.lyapunov(gains.kh2)
    verdict = monitor_decreasing(hl.t, v0, float(hl.t[1] - hl.t[0]))
    results.append(CheckResult(
        "heading-lyapunov", verdict.passed,
        verdict.detail + f" (V0: {v0[0]:.4f} -> {v0[-1]:.2e})"))

    results.append(run_sat_pi_grid(30 if fast else 100))
    return results
