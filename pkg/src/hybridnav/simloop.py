"""Closed-loop simulation: plant, sensors, estimator and controller.

Every noise family draws from its own seeded stream, so a run is a pure
function of its :class:`ScenarioConfig` and repeated runs are bit-identical.
"""

from __future__ import annotations

import csv
import io
import json
import math
import statistics
from dataclasses import dataclass, field
from typing import Any, Iterator, NamedTuple

import numpy as np

from hybridnav.config import ScenarioConfig
from hybridnav.controller import HybridController, Region
from hybridnav.estimator import (
    HEADING,
    heading_model,
    kalman_update,
    nees_value,
    pose_error,
    propagate_covariance,
    range_bearing_model,
)
from hybridnav.geometry import Pose, normalize_angle
from hybridnav.plant import (
    DisturbanceBounds,
    WheelSpeeds,
    dead_reckon_step,
    odometry_increment,
    plant_step,
)

CHUNK = 4096
STREAMS = ("disturbance", "odometry", "sensors", "feedback", "init")


class NoiseSource:
    """Chunked scalar draws from a numpy generator.

    Pulling one float at a time from ``Generator`` is slow; this buffers
    fixed-size blocks, which keeps the sequence independent of how many
    values a run ends up consuming.
    """

    def __init__(self, rng: np.random.Generator) -> None:
        self._rng = rng
        self._uniform = self._blocks(rng.random)
        self._normal = self._blocks(rng.standard_normal)

    @staticmethod
    def _blocks(draw) -> Iterator[float]:
        while True:
            yield from draw(CHUNK).tolist()

    def uniform(self, bound: float) -> float:
        """Uniform on [-bound, bound)."""
        return bound * (2.0 * next(self._uniform) - 1.0)

    def normal(self, sigma: float) -> float:
        return sigma * next(self._normal)


def make_streams(seed: int) -> dict[str, NoiseSource]:
    children = np.random.SeedSequence(seed).spawn(len(STREAMS))
    return {name: NoiseSource(np.random.default_rng(ss)) for name, ss in zip(STREAMS, children)}


def sample_disturbance(
    bounds: DisturbanceBounds, rng: NoiseSource | np.random.Generator
) -> tuple[float, float]:
    """Draw ``(eps_v, eps_omega)`` uniformly inside the bounds."""
    if isinstance(rng, np.random.Generator):
        u = rng.random(2)
        return (
            bounds.eps_v_max * (2.0 * float(u[0]) - 1.0),
            bounds.eps_omega_max * (2.0 * float(u[1]) - 1.0),
        )
    return rng.uniform(bounds.eps_v_max), rng.uniform(bounds.eps_omega_max)


class StepRecord(NamedTuple):
    t: float
    x_true: float
    y_true: float
    theta_true: float
    x_est: float
    y_est: float
    theta_est: float
    rho: float
    alpha: float
    phi: float
    region: str
    v_cmd: float
    omega_cmd: float
    V: float
    trace_P: float


CSV_COLUMNS = StepRecord._fields


@dataclass
class RunSummary:
    seed: int
    status: str = "timeout"
    settled: bool = False
    final_position_error: float = math.nan
    final_heading_error: float = math.nan
    settle_time: float | None = None
    transition_count: int = 0
    steps: int = 0
    rmse_estimate: float = math.nan
    rmse_dead_reckoning: float = math.nan
    mean_nees: float | None = None
    abort_reason: str | None = None

    def to_dict(self) -> dict[str, Any]:
        return {k: json_safe(v) for k, v in vars(self).items()}


@dataclass
class TrajectoryLog:
    records: list[StepRecord] = field(default_factory=list)
    summary: RunSummary = field(default_factory=lambda: RunSummary(seed=0))
    # dead-reckoned (x, y, theta) computed alongside, one row per record
    dead_reckoning: list[tuple[float, float, float]] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for rec in self.records:
            writer.writerow(str(v) if isinstance(v, str) else f"{v:.9g}" for v in rec)
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps(self.summary.to_dict(), indent=2) + "\n"


def json_safe(v: Any) -> Any:
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def _fuse_sensors(mean, cov, truth: Pose, tick: int, noise: NoiseSource, schedule, landmarks):
    """Simulate every sensor due on ``tick`` from the true pose and fuse it."""
    for sensor, ticks in schedule:
        if tick % ticks:
            continue
        if sensor.kind == HEADING:
            (sigma,) = sensor.sigma
            z = truth.heading + noise.normal(sigma)
            predicted, rows = heading_model(mean)
            innovation = (normalize_angle(z - predicted[0]),)
            mean, cov = kalman_update(mean, cov, rows, innovation, ((sigma * sigma,),))
        else:
            s_r, s_b = sensor.sigma
            noise_cov = ((s_r * s_r, 0.0), (0.0, s_b * s_b))
            for _, lx, ly in landmarks:
                dx, dy = lx - truth.x, ly - truth.y
                z_r = math.hypot(dx, dy) + noise.normal(s_r)
                z_b = math.atan2(dy, dx) - truth.heading + noise.normal(s_b)
                predicted, rows = range_bearing_model(mean, (lx, ly))
                innovation = (z_r - predicted[0], normalize_angle(z_b - predicted[1]))
                mean, cov = kalman_update(mean, cov, rows, innovation, noise_cov)
    return mean, cov


def run_scenario(cfg: ScenarioConfig, seed: int | None = None) -> TrajectoryLog:
    """Simulate one closed-loop run.

    Each tick: the controller acts on the current feedback pose, the plant
    integrates the disturbed command, wheel encoders report the true wheel
    speeds with proportional Gaussian noise, the estimator predicts from them
    and fuses any sensor due on this tick.  With ``estimator_enabled`` false
    the controller is fed the dead-reckoned pose instead; with ``feedback``
    set to ``"truth"`` it sees the true pose (plus any feedback disturbance).
    """
    seed = cfg.seed if seed is None else seed
    streams = make_streams(seed)
    dist_src, odo_src, sens_src, fb_src, init_src = (streams[n] for n in STREAMS)

    robot = cfg.robot
    odo_scale = math.sqrt(robot.delta)
    bounds = cfg.disturbance
    feedback_noisy = bounds.eps_x_max > 0.0 or bounds.eps_y_max > 0.0 or bounds.eps_theta_max > 0.0
    schedule = [(s, cfg.sensor_ticks(s)) for s in cfg.sensors] if cfg.estimator_enabled else []
    goal = cfg.goal
    dt = cfg.dt

    sx, sy, st = cfg.init_sigma
    init_mean = Pose(
        cfg.start.x + init_src.normal(sx),
        cfg.start.y + init_src.normal(sy),
        cfg.start.heading + init_src.normal(st),
    )
    est_mean = init_mean
    est_cov = (sx * sx, 0.0, 0.0, sy * sy, 0.0, st * st)
    # dead reckoning carried alongside as bare floats; it is only logged
    dr_x, dr_y, dr_th = init_mean.as_tuple()
    truth = cfg.start

    ctrl = HybridController(cfg.gains, cfg.thresholds, robot, hybrid=cfg.controller == "hybrid")
    log = TrajectoryLog(summary=RunSummary(seed=seed))
    records = log.records
    dr_rows = log.dead_reckoning
    summary = log.summary
    nees_sum = 0.0
    in_tol = 0
    k = 0
    prev_region: Region | None = None
    # loop-invariant lookups
    step_controller = ctrl.step
    append_record = records.append
    append_dr = dr_rows.append
    estimating = cfg.estimator_enabled
    truth_feedback = cfg.feedback == "truth"
    pos_tol, head_tol, settle_steps = cfg.position_tol, cfg.heading_tol, cfg.settle_steps
    n_steps, stop_on_settle = cfg.n_steps, cfg.stop_on_settle
    gx, gy, gtheta = goal.x, goal.y, goal.heading
    landmarks = cfg.landmarks.landmarks
    delta = robot.delta
    half_axle, radius = 0.5 * robot.axle_length, robot.wheel_radius
    eps_v_max, eps_omega_max = bounds.eps_v_max, bounds.eps_omega_max
    uniform_dist = dist_src.uniform
    odo_normal = odo_src.normal

    try:
        while True:
            fb = truth if truth_feedback else est_mean
            if feedback_noisy:
                fb = Pose(
                    fb.x + fb_src.uniform(bounds.eps_x_max),
                    fb.y + fb_src.uniform(bounds.eps_y_max),
                    fb.heading + fb_src.uniform(bounds.eps_theta_max),
                )
            decision = step_controller(fb, goal)
            if prev_region is not None and decision.region is not prev_region:
                summary.transition_count += 1
            prev_region = decision.region
            u = decision.input
            nav = decision.nav
            m = est_mean
            append_record(
                StepRecord(
                    k * dt, truth.x, truth.y, truth.heading, m.x, m.y, m.heading,
                    nav.rho, nav.alpha, nav.phi, decision.region.value,
                    u.v, u.omega, decision.lyapunov_value,
                    est_cov[0] + est_cov[3] + est_cov[5],
                )
            )
            append_dr((dr_x, dr_y, dr_th))
            if estimating:
                nees_sum += nees_value(pose_error(est_mean, truth), est_cov)

            rho_true = math.hypot(gx - truth.x, gy - truth.y)
            heading_err = abs(normalize_angle(truth.heading - gtheta))
            if k > 0 and rho_true < pos_tol and heading_err < head_tol:
                in_tol += 1
                if in_tol >= settle_steps and not summary.settled:
                    summary.settled = True
                    summary.status = "settled"
                    summary.settle_time = k * dt
                    if stop_on_settle:
                        break
            else:
                in_tol = 0
            if k >= n_steps:
                break

            eps = (uniform_dist(eps_v_max), uniform_dist(eps_omega_max))
            truth = plant_step(truth, u, eps, dt, bounds)
            # wheel speeds actually turned, as in inverse_kinematics
            half_turn = (u.omega + eps[1]) * half_axle
            wl = (u.v + eps[0] - half_turn) / radius
            wr = (u.v + eps[0] + half_turn) / radius
            measured = WheelSpeeds(
                wl + odo_scale * abs(wl) * odo_normal(1.0),
                wr + odo_scale * abs(wr) * odo_normal(1.0),
            )
            ds, dth = odometry_increment(measured, dt, robot)
            est_cov = propagate_covariance(
                est_cov, est_mean.heading, ds, dth, measured, dt, robot, delta
            )
            est_mean = dead_reckon_step(est_mean, ds, dth)
            mid = dr_th + 0.5 * dth
            dr_x += ds * math.cos(mid)
            dr_y += ds * math.sin(mid)
            dr_th = normalize_angle(dr_th + dth)
            k += 1
            if schedule:
                est_mean, est_cov = _fuse_sensors(
                    est_mean, est_cov, truth, k, sens_src, schedule, landmarks
                )
    except (ValueError, ArithmeticError) as exc:
        summary.status = "aborted"
        summary.settled = False
        summary.settle_time = None
        summary.abort_reason = f"{type(exc).__name__} at t={k * dt:.9g}: {exc}"

    summary.steps = k
    if records:
        last = records[-1]
        summary.final_position_error = math.hypot(goal.x - last.x_true, goal.y - last.y_true)
        summary.final_heading_error = abs(normalize_angle(last.theta_true - goal.heading))
        n = len(records)
        se_est = sum((r.x_est - r.x_true) ** 2 + (r.y_est - r.y_true) ** 2 for r in records)
        se_dr = sum(
            (d[0] - r.x_true) ** 2 + (d[1] - r.y_true) ** 2 for r, d in zip(records, dr_rows)
        )
        summary.rmse_estimate = math.sqrt(se_est / n)
        summary.rmse_dead_reckoning = math.sqrt(se_dr / n)
        if cfg.estimator_enabled:
            summary.mean_nees = nees_sum / n
    return log


@dataclass
class BatchResult:
    logs: list[TrajectoryLog]
    aggregate: dict[str, Any]

    def summary_json(self) -> str:
        doc = {
            "aggregate": {k: json_safe(v) for k, v in self.aggregate.items()},
            "runs": [log.summary.to_dict() for log in self.logs],
        }
        return json.dumps(doc, indent=2) + "\n"


def aggregate(summaries: list[RunSummary]) -> dict[str, Any]:
    completed = [s for s in summaries if s.status != "aborted"]
    settled = [s for s in summaries if s.settled]
    out: dict[str, Any] = {
        "runs": len(summaries),
        "completed": len(completed),
        "aborted": len(summaries) - len(completed),
        "success_rate": len(settled) / len(summaries) if summaries else math.nan,
        "rmse_estimate": math.nan,
        "rmse_dead_reckoning": math.nan,
        "mean_settle_time": math.nan,
        "mean_nees": None,
    }
    if completed:
        out["rmse_estimate"] = math.sqrt(statistics.fmean(s.rmse_estimate**2 for s in completed))
        out["rmse_dead_reckoning"] = math.sqrt(
            statistics.fmean(s.rmse_dead_reckoning**2 for s in completed)
        )
        nees_vals = [s.mean_nees for s in completed if s.mean_nees is not None]
        if nees_vals:
            out["mean_nees"] = statistics.fmean(nees_vals)
    if settled:
        out["mean_settle_time"] = statistics.fmean(s.settle_time for s in settled)
    return out


def run_batch(cfg: ScenarioConfig) -> BatchResult:
    """Monte Carlo batch; run ``i`` uses seed ``cfg.seed + i``."""
    logs = [run_scenario(cfg, cfg.seed + i) for i in range(cfg.runs)]
    return BatchResult(logs, aggregate([log.summary for log in logs]))
