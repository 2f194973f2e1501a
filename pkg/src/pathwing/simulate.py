"""Deterministic closed-loop execution, logging, and run summaries.

The plant integrates at ``dt_plant`` with zero-order-hold commands; the
controller samples every ``dt_controller`` (an integer multiple). One log
record is written per controller step, in a fixed column order, so runs
with identical configuration and seed replay bit-identically.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .aircraft import (
    AircraftState,
    pack_state,
    rk4_step,
    trimmed_state,
    unpack_state,
)
from .control import Guard, Measurements, PathController
from .errors import NonFiniteState
from .scenario import Scenario
from .vectors import norm3, rotation_about, rotation_rpy, unit3

COLUMNS = (
    "t", "px", "py", "pz", "vx", "vy", "vz", "speed", "va1", "alpha", "beta",
    "y1", "y2", "y_norm", "att_err", "e_v", "i_ev", "z_norm", "thrust",
    "d_ail", "d_elev", "d_rud", "flags", "segment",
)
_IDX = {name: k for k, name in enumerate(COLUMNS)}


class SimLog:
    """Column-major access to the per-step log records."""

    def __init__(self, data: np.ndarray):
        if data.ndim != 2 or data.shape[1] != len(COLUMNS):
            raise ValueError("log array has the wrong shape")
        self.data = data

    def __len__(self) -> int:
        return self.data.shape[0]

    def col(self, name: str) -> np.ndarray:
        return self.data[:, _IDX[name]]

    def to_csv(self, path: str | Path) -> None:
        header = ",".join(COLUMNS)
        np.savetxt(path, self.data, delimiter=",", header=header, comments="",
                   fmt="%.17g")

    @classmethod
    def from_csv(cls, path: str | Path) -> "SimLog":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(data)


@dataclass
class SimResult:
    scenario: Scenario
    log: SimLog
    summary: dict
    final_state: AircraftState
    aborted: bool = False


def initial_aircraft_state(scn: Scenario) -> AircraftState:
    init = scn.initial
    v0 = init.velocity
    speed = norm3(v0)
    if init.attitude == "trim":
        horiz = np.array([v0[0], v0[1], 0.0])
        if norm3(horiz) < 1e-9:
            raise ValueError("trim attitude needs a horizontal velocity component")
        state, _ = trimmed_state(scn.model, max(speed, 1e-3), unit3(horiz),
                                 init.position, scn.g0)
        return AircraftState(p=init.position, v=v0, R=state.R, omega=init.omega)
    if init.attitude == "level":
        # wings level, zero pitch: i horizontal along the velocity heading
        horiz = np.array([v0[0], v0[1], 0.0])
        i = unit3(horiz) if norm3(horiz) > 1e-9 else np.array([1.0, 0.0, 0.0])
        k = np.array([0.0, 0.0, 1.0])
        j = np.cross(k, i)
        R = np.column_stack([i, j, k])
        return AircraftState(p=init.position, v=v0, R=R, omega=init.omega)
    roll, pitch, yaw = (math.radians(a) for a in init.rpy_deg)
    return AircraftState(p=init.position, v=v0, R=rotation_rpy(roll, pitch, yaw),
                         omega=init.omega)


def run_scenario(scn: Scenario, duration: Optional[float] = None,
                 seed: Optional[int] = None) -> SimResult:
    """Run one scenario to completion (or abort on a non-finite state)."""
    duration = scn.duration if duration is None else duration
    controller = PathController(scn.controller_config(), scn.setpoint)
    state0 = initial_aircraft_state(scn)
    mem = controller.initial_memory(state0.p)

    dt_c, dt_p, sub = scn.dt_controller, scn.dt_plant, scn.substeps
    n_steps = int(round(duration / dt_c))
    mode = "surfaces" if scn.actuation == "surfaces" else "omega"

    noise = scn.noise if (scn.noise is not None and scn.noise.any_active) else None
    rng = np.random.default_rng(noise.seed if noise is not None
                                else (seed if seed is not None else scn.seed))

    x = pack_state(state0)
    log = np.empty((n_steps, len(COLUMNS)))
    prev_v_meas: Optional[np.ndarray] = None
    aborted = False
    k = 0

    for k in range(n_steps):
        t = k * dt_c
        if not np.all(np.isfinite(x)):
            aborted = True
            break

        # ---- sense -----------------------------------------------------
        p = x[0:3].copy()
        v = x[3:6].copy()
        R = np.column_stack([x[6:9], x[9:12], x[12:15]])
        omega = x[15:18].copy()
        vw = scn.wind.velocity(t)
        va_inertial = v - vw
        va_body_true = R.T @ va_inertial
        va1 = float(va_body_true[0])

        if noise is not None:
            p = p + rng.normal(0.0, noise.pos_m, 3) if noise.pos_m else p
            v = v + rng.normal(0.0, noise.vel_mps, 3) if noise.vel_mps else v
            if noise.att_rad:
                axis = rng.normal(size=3)
                axis /= norm3(axis)
                R = rotation_about(axis, rng.normal(0.0, noise.att_rad)) @ R
            if noise.omega_radps:
                omega = omega + rng.normal(0.0, noise.omega_radps, 3)
            if noise.pitot_mps:
                va1 += rng.normal(0.0, noise.pitot_mps)

        accel = None
        if scn.accel_source == "accelerometer":
            accel = np.zeros(3) if prev_v_meas is None else (v - prev_v_meas) / dt_c
        prev_v_meas = v

        meas = Measurements(t=t, p=p, v=v, R=R, omega_body=omega, va1=va1,
                            va_body=va_body_true if scn.measurement == "true" else None,
                            accel=accel)

        # ---- control -----------------------------------------------------
        cmd, mem, diag = controller.step(meas, mem)

        # ---- log (true state plus controller diagnostics) ----------------
        speed_true = norm3(x[3:6])
        van = norm3(va_body_true)
        if van > 1e-9:
            alpha = math.asin(min(1.0, max(-1.0, va_body_true[2] / van)))
            beta = math.atan2(va_body_true[1], va_body_true[0])
        else:
            alpha = beta = math.nan
        row = log[k]
        row[0] = t
        row[1:4] = x[0:3]
        row[4:7] = x[3:6]
        row[7] = speed_true
        row[8] = va_body_true[0]
        row[9] = alpha
        row[10] = beta
        row[11] = diag.y1
        row[12] = diag.y2
        row[13] = math.hypot(diag.y1, diag.y2)
        row[14] = diag.theta_err
        row[15] = diag.e_v
        row[16] = mem.I_ev
        row[17] = norm3(mem.z)
        row[18] = cmd.thrust
        row[19:22] = cmd.delta
        row[22] = float(diag.flags)
        row[23] = float(diag.segment)

        # ---- actuate -------------------------------------------------------
        u = cmd.delta if mode == "surfaces" else cmd.omega_body
        for i in range(sub):
            x = rk4_step(x, t + i * dt_p, dt_p, cmd.thrust, mode, u,
                         scn.plant, scn.wind)

    if aborted:
        log = log[:k]
    final = unpack_state(x) if np.all(np.isfinite(x)) else unpack_state(np.nan_to_num(x))
    sim_log = SimLog(log)
    return SimResult(scenario=scn, log=sim_log,
                     summary=summarize(sim_log, scn, aborted=aborted),
                     final_state=final, aborted=aborted)


# ---------------------------------------------------------------------------
# Summary statistics
# ---------------------------------------------------------------------------

def segment_windows(log: SimLog) -> list[dict]:
    """Occupancy windows of each path segment visit, in time order."""
    seg = log.col("segment").astype(int)
    t = log.col("t")
    windows = []
    start = 0
    for k in range(1, len(seg) + 1):
        if k == len(seg) or seg[k] != seg[start]:
            windows.append({"segment": int(seg[start]),
                            "t_enter": float(t[start]), "t_exit": float(t[k - 1]),
                            "i_enter": start, "i_exit": k - 1})
            start = k
    return windows


def convergence_time(y: np.ndarray, t: np.ndarray, threshold: float) -> Optional[float]:
    """First time after which y stays below threshold to the end, else None."""
    rev_max = np.maximum.accumulate(y[::-1])[::-1]
    idx = np.flatnonzero(rev_max < threshold)
    if idx.size == 0:
        return None
    return float(t[idx[0]])


def segment_convergence(log: SimLog, threshold: float) -> list[dict]:
    """Per-visit convergence diagnostics for the position error norm."""
    y = log.col("y_norm")
    t = log.col("t")
    out = []
    for w in segment_windows(log):
        i0, i1 = w["i_enter"], w["i_exit"] + 1
        t_conv = convergence_time(y[i0:i1], t[i0:i1], threshold)
        entry = dict(w)
        entry["t_converged"] = t_conv
        entry["transient_s"] = None if t_conv is None else t_conv - w["t_enter"]
        if t_conv is not None:
            steady = y[i0:i1][t[i0:i1] >= t_conv]
            entry["steady_max_y"] = float(steady.max()) if steady.size else None
        else:
            entry["steady_max_y"] = None
        out.append(entry)
    return out


def summarize(log: SimLog, scn: Scenario, aborted: bool = False,
              steady_fraction: float = 0.2, y_threshold: float = 1.5) -> dict:
    """Run statistics: steady-state window, per-segment convergence, duty cycles."""
    n = len(log)
    if n == 0:
        return {"aborted": True, "n_steps": 0}
    t = log.col("t")
    i0 = int(n * (1.0 - steady_fraction))
    tail = slice(i0, n)
    y = log.col("y_norm")
    beta = log.col("beta")
    va1 = log.col("va1")
    va2 = va1 * np.tan(beta)
    flags = log.col("flags").astype(int)
    guard_counts = {g.name: int(np.count_nonzero(flags & g))
                    for g in Guard if g is not Guard.NONE}
    segments = segment_convergence(log, y_threshold)
    summary = {
        "aborted": aborted,
        "n_steps": n,
        "duration_s": float(t[-1] - t[0] + scn.dt_controller),
        "steady": {
            "t_start": float(t[i0]),
            "mean_y_m": float(np.mean(y[tail])),
            "max_y_m": float(np.max(y[tail])),
            "max_beta_deg": float(np.nanmax(np.abs(np.degrees(beta[tail])))),
            "max_abs_va2_mps": float(np.nanmax(np.abs(va2[tail]))),
            "mean_e_v_mps": float(np.mean(np.abs(log.col("e_v")[tail]))),
        },
        "thrust_sat_duty": float(np.count_nonzero(flags & Guard.THRUST_CLAMPED) / n),
        "guard_counts": guard_counts,
        "segments": [
            {k: v for k, v in s.items() if not k.startswith("i_")} for s in segments
        ],
        "final_y_m": float(y[-1]),
    }
    return summary
