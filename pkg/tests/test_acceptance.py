"""Acceptance suite: one check per criterion, each printing a PASS/FAIL line.

Run ``pytest tests/test_acceptance.py -v`` or ``python tests/test_acceptance.py``.
"""

from __future__ import annotations

import math
import statistics
import subprocess
import sys
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pytest

from hybridnav.cli import compare_ekf
from hybridnav.config import ScenarioConfig
from hybridnav.controller import Gains, RegionThresholds, global_law_raw, lyapunov_global, lyapunov_local
from hybridnav.diagnostics import jacobian_report
from hybridnav.estimator import (
    EstimatorState,
    LandmarkMap,
    Measurement,
    ProcessNoiseModel,
    correct,
    predict,
)
from hybridnav.geometry import NavState, Pose, normalize_angle, to_nav
from hybridnav.plant import DisturbanceBounds, RobotParams, WheelSpeeds
from hybridnav.simloop import run_batch, run_scenario


@dataclass
class Outcome:
    passed: bool
    detail: str


NAMES = {
    1: "convergence, 3 goals x 100 runs, < 10 s",
    2: "noise-free Lyapunov descent",
    3: "Jacobians vs central differences",
    4: "covariance health over 10,000 steps",
    5: "EKF benefit over dead reckoning",
    6: "global-law instability vs hybrid",
    7: "singularity safety at alpha -> 0",
    8: "batch CLI determinism",
    9: "NEES consistency over 200 runs",
}


def line(n: int, out: Outcome) -> str:
    return f"[{'PASS' if out.passed else 'FAIL'}] criterion {n}: {NAMES[n]} | {out.detail}"


def criterion_1() -> Outcome:
    goals = [Pose(2.0, 2.0, math.radians(d)) for d in (30.0, 60.0, 90.0)]
    base = ScenarioConfig(disturbance=DisturbanceBounds(0.001, 0.001), gains=Gains(k_v=10.0), runs=100)
    t0 = time.perf_counter()
    results = [run_batch(base.replace(goal=g)) for g in goals]
    elapsed = time.perf_counter() - t0
    settled = [sum(log.summary.settled for log in r.logs) for r in results]
    worst_t = max(log.summary.settle_time or math.inf for r in results for log in r.logs)
    ok = all(s == 100 for s in settled) and worst_t <= 60.0 and elapsed < 10.0
    return Outcome(ok, f"settled {settled} of 100 each, slowest {worst_t:.2f} s sim, wall {elapsed:.2f} s")


def _descent_violations(log, goal: Pose, gains: Gains, slack: float) -> tuple[int, float]:
    """Check the Lyapunov function of the law active over each step on the true pose."""
    count, worst = 0, -math.inf
    recs = log.records
    for a, b in zip(recs, recs[1:]):
        pa = Pose(a.x_true, a.y_true, a.theta_true)
        pb = Pose(b.x_true, b.y_true, b.theta_true)
        if a.region == "Global":
            if pb.x == goal.x and pb.y == goal.y:
                continue
            va = lyapunov_global(to_nav(pa, goal), gains)
            vb = lyapunov_global(to_nav(pb, goal), gains)
        else:
            va = lyapunov_local(pa.distance_to(goal), normalize_angle(pa.heading - goal.heading))
            vb = lyapunov_local(pb.distance_to(goal), normalize_angle(pb.heading - goal.heading))
        worst = max(worst, vb - va)
        count += vb > va + slack
    return count, worst


def criterion_2() -> Outcome:
    rng = np.random.default_rng(2024)
    base = ScenarioConfig(dt=1e-3, t_max=60.0).noise_free()
    violations, worst, transitions, steps = 0, -math.inf, set(), 0
    for _ in range(100):
        goal = Pose(0.0, 0.0, float(rng.uniform(-math.pi, math.pi)))
        r0 = float(rng.uniform(0.5, 5.0))
        b = float(rng.uniform(-math.pi, math.pi))
        start = Pose(r0 * math.cos(b), r0 * math.sin(b), float(rng.uniform(-math.pi, math.pi)))
        log = run_scenario(base.replace(start=start, goal=goal))
        n, w = _descent_violations(log, goal, base.gains, 1e-6)
        violations += n
        worst = max(worst, w)
        transitions.add(log.summary.transition_count)
        steps += len(log.records) - 1
    return Outcome(
        violations == 0,
        f"{violations} violations over {steps} steps, largest increase {worst:.2e}, "
        f"transition counts {sorted(transitions)}",
    )


def criterion_3() -> Outcome:
    rep = jacobian_report(samples=1000, seed=3)
    detail = ", ".join(f"{k} {v:.1e}" for k, v in rep.max_error.items())
    return Outcome(rep.passed, f"max relative error: {detail}")


def criterion_4() -> Outcome:
    rng = np.random.default_rng(4)
    p = RobotParams()
    noise = ProcessNoiseModel(p.delta)
    landmarks = LandmarkMap(((0, -1.5, -1.5), (1, 3.5, -1.5), (2, 3.5, 3.5), (3, -1.5, 3.5)))
    state = EstimatorState.from_sigmas(Pose(1.0, 1.0, 0.0), 0.05, 0.05, 0.05)
    worst_asym, worst_eig, worst_rise = 0.0, math.inf, -math.inf
    for k in range(10_000):
        if k % 3 == 0:
            state = predict(state, WheelSpeeds(*rng.uniform(-8.0, 8.0, 2)), 0.1, p, noise)
        elif k % 3 == 1:
            m = Measurement.heading(float(rng.uniform(-math.pi, math.pi)), float(rng.uniform(1e-3, 0.5)))
            before = state.trace
            state = correct(state, m)
            worst_rise = max(worst_rise, state.trace - before)
        else:
            lid = int(rng.integers(4))
            m = Measurement.range_bearing(
                lid, float(rng.uniform(0.5, 6.0)), float(rng.uniform(-math.pi, math.pi)),
                float(rng.uniform(0.01, 0.5)), float(rng.uniform(1e-3, 0.2)),
            )
            before = state.trace
            state = correct(state, m, landmarks)
            worst_rise = max(worst_rise, state.trace - before)
        # keep the mean inside the landmark square so ranges stay well posed
        mx, my = state.mean.x, state.mean.y
        if not (-1.0 < mx < 3.0 and -1.0 < my < 3.0):
            state = EstimatorState(Pose(min(max(mx, -0.9), 2.9), min(max(my, -0.9), 2.9), state.mean.heading),
                                   state.covariance)
        P = state.covariance
        worst_asym = max(worst_asym, float(np.max(np.abs(P - P.T))))
        worst_eig = min(worst_eig, float(np.linalg.eigvalsh(P).min()))
    ok = worst_asym < 1e-12 and worst_eig > -1e-12 and worst_rise <= 1e-12
    return Outcome(
        ok,
        f"max asymmetry {worst_asym:.1e}, min eigenvalue {worst_eig:.2e}, "
        f"largest trace rise in correct {worst_rise:.1e}",
    )


def criterion_5() -> Outcome:
    doc = compare_ekf(ScenarioConfig(runs=100, seed=500))
    wins, median = doc["ekf_better"], doc["median_ratio"]
    return Outcome(wins >= 95 and median <= 0.5, f"EKF better in {wins}/100, median RMSE ratio {median:.3f}")


def _alpha_growth(controller: str, n: int = 100) -> list[float]:
    """Largest |alpha| / |alpha_0| on the true pose while inside the local set."""
    th = RegionThresholds(eps_p=0.005)
    base = ScenarioConfig(
        goal=Pose(0.0, 0.0, 0.0),
        thresholds=th,
        disturbance=DisturbanceBounds(0.01, 0.01, 0.01, 0.01, 0.01),
        robot=RobotParams(delta=0.0),
        sensors=(),
        estimator_enabled=False,
        init_sigma=(0.0, 0.0, 0.0),
        feedback="truth",
        stop_on_settle=False,
        t_max=30.0,
        controller=controller,
    )
    rng = np.random.default_rng(66)
    growth = []
    for i in range(n):
        r0 = float(rng.uniform(0.5, 0.9)) * th.eps_p
        a0 = float(rng.choice([-1.0, 1.0]) * rng.uniform(0.02, 0.1))
        heading = float(rng.uniform(-0.1, 0.1))
        bearing = heading + a0
        start = Pose(-r0 * math.cos(bearing), -r0 * math.sin(bearing), heading)
        log = run_scenario(base.replace(start=start), seed=i)
        worst = 0.0
        for r in log.records:
            pose = Pose(r.x_true, r.y_true, r.theta_true)
            rho = math.hypot(pose.x, pose.y)
            if 0.0 < rho < th.eps_p and abs(pose.heading) < th.eps_heading:
                worst = max(worst, abs(to_nav(pose, base.goal).alpha))
        growth.append(worst / abs(a0))
    return growth


def criterion_6() -> Outcome:
    g = _alpha_growth("global")
    h = _alpha_growth("hybrid")
    g_frac = sum(x > 10.0 for x in g) / len(g)
    h_frac = sum(x > 10.0 for x in h) / len(h)
    h_bounded = sum(x <= 2.0 for x in h) / len(h)
    ok = g_frac >= 0.2 and h_frac == 0.0
    return Outcome(
        ok,
        f"global-only: {g_frac:.0%} exceed 10x (median growth {statistics.median(g):.1f}); "
        f"hybrid: {h_frac:.0%} exceed 10x, {h_bounded:.0%} within 2x (median growth {statistics.median(h):.1f})",
    )


def criterion_7() -> Outcome:
    g = Gains()
    phi = 0.1
    worst, finite = 0.0, True
    per_alpha = []
    for a in (1e-6, -1e-6, 1e-9, -1e-9, 0.0):
        _, omega = global_law_raw(NavState(1.0, a, phi), g)
        finite &= math.isfinite(omega)
        dev = abs(omega - (g.k_v * g.h * phi + g.k_alpha * a))
        per_alpha.append(f"{a:+.0e}: {dev:.6e}")
        worst = max(worst, dev)
    return Outcome(finite and worst < 1e-5, f"phi={phi}, deviation by alpha {'; '.join(per_alpha)}")


def criterion_8() -> Outcome:
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        cfg = tmp / "cfg.yaml"
        cfg.write_text("runs: 4\nt_max: 30.0\n")
        outs = []
        for name in ("first", "second"):
            out = tmp / name
            cmd = [sys.executable, "-m", "hybridnav.cli", "batch", "--config", str(cfg),
                   "--seed", "12345", "--out", str(out), "--format", "csv"]
            subprocess.run(cmd, check=True, capture_output=True)
            outs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
        same = outs[0] == outs[1] and len(outs[0]) == 5
        return Outcome(same, f"{len(outs[0])} files compared, {'identical' if same else 'differ'}")


def criterion_9() -> Outcome:
    res = run_batch(ScenarioConfig(runs=200, seed=900))
    agg = res.aggregate
    mean_nees = agg["mean_nees"]
    ok = agg["completed"] == 200 and 1.5 <= mean_nees <= 6.0
    return Outcome(ok, f"average NEES {mean_nees:.3f} over {agg['completed']} runs")


CRITERIA = {
    1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5,
    6: criterion_6, 7: criterion_7, 8: criterion_8, 9: criterion_9,
}


@pytest.mark.parametrize("n", sorted(CRITERIA))
def test_criterion(n, capsys):
    out = CRITERIA[n]()
    with capsys.disabled():
        print("\n" + line(n, out))
    assert out.passed, out.detail


if __name__ == "__main__":
    failed = 0
    for n, fn in CRITERIA.items():
        out = fn()
        failed += not out.passed
        print(line(n, out), flush=True)
    sys.exit(1 if failed else 0)
