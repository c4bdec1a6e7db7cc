"""Finite-difference checks of the estimator Jacobians."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from hybridnav.estimator import heading_model, jacobian_A, jacobian_W, range_bearing_model
from hybridnav.geometry import Pose, normalize_angle
from hybridnav.plant import RobotParams, dead_reckon_step

FD_STEP = 1e-6


def central_difference(
    f: Callable[[np.ndarray], np.ndarray],
    x: np.ndarray,
    h: float = FD_STEP,
    angular: tuple[int, ...] = (),
) -> np.ndarray:
    """Central-difference Jacobian of ``f`` at ``x``.

    Output components listed in ``angular`` are differenced on the circle so
    a wrap at +-pi between the two probes does not show up as a jump.
    """
    x = np.asarray(x, dtype=float)
    cols = []
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        diff = np.asarray(f(x + e), dtype=float) - np.asarray(f(x - e), dtype=float)
        for i in angular:
            diff[i] = normalize_angle(diff[i])
        cols.append(diff / (2.0 * h))
    return np.column_stack(cols)


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Largest entry error scaled by the largest reference entry."""
    scale = float(np.max(np.abs(numeric)))
    err = float(np.max(np.abs(np.asarray(analytic) - numeric)))
    return err / scale if scale > 0.0 else err


def _pose(v: np.ndarray) -> Pose:
    return Pose(float(v[0]), float(v[1]), float(v[2]))


def check_A(pose: Pose, ds: float, dth: float) -> float:
    def f(v):
        return np.array(dead_reckon_step(_pose(v), ds, dth).as_tuple())

    x = np.array(pose.as_tuple())
    return relative_error(jacobian_A(pose, ds, dth), central_difference(f, x, angular=(2,)))


def check_W(pose: Pose, ds: float, dth: float, p: RobotParams) -> float:
    axle = p.axle_length
    d_right = ds + dth * axle / 2.0
    d_left = ds - dth * axle / 2.0

    def f(v):
        step = ((v[0] + v[1]) / 2.0, (v[0] - v[1]) / axle)
        return np.array(dead_reckon_step(pose, *step).as_tuple())

    num = central_difference(f, np.array([d_right, d_left]), angular=(2,))
    return relative_error(jacobian_W(pose, ds, dth, p), num)


def check_H_heading(pose: Pose) -> float:
    x = np.array(pose.as_tuple())
    num = central_difference(lambda v: np.array(heading_model(_pose(v))[0]), x, angular=(0,))
    return relative_error(np.array(heading_model(pose)[1]), num)


def check_H_range_bearing(pose: Pose, landmark: tuple[float, float]) -> float:
    x = np.array(pose.as_tuple())
    num = central_difference(
        lambda v: np.array(range_bearing_model(_pose(v), landmark)[0]), x, angular=(1,)
    )
    return relative_error(np.array(range_bearing_model(pose, landmark)[1]), num)


@dataclass
class JacobianReport:
    samples: int
    max_error: dict[str, float]
    tolerance: float

    @property
    def passed(self) -> bool:
        return all(e < self.tolerance for e in self.max_error.values())

    def lines(self) -> list[str]:
        out = [f"jacobian check over {self.samples} samples (tolerance {self.tolerance:g})"]
        for name, err in self.max_error.items():
            verdict = "ok" if err < self.tolerance else "FAIL"
            out.append(f"  {name:<16} max relative error {err:.3e}  {verdict}")
        return out


def jacobian_report(
    samples: int = 1000, seed: int = 0, params: RobotParams | None = None, tolerance: float = 1e-6
) -> JacobianReport:
    """Compare A, W and both measurement Jacobians with central differences.

    Poses are drawn over a 10 m square with any heading; odometry steps up
    to 5 cm and 0.1 rad; landmarks at least 0.5 m from the pose.
    """
    p = params or RobotParams()
    rng = np.random.default_rng(seed)
    worst = {"A": 0.0, "W": 0.0, "H_heading": 0.0, "H_range_bearing": 0.0}
    for _ in range(samples):
        x, y = rng.uniform(-5.0, 5.0, 2)
        pose = Pose(float(x), float(y), float(rng.uniform(-math.pi, math.pi)))
        ds = float(rng.uniform(-0.05, 0.05))
        dth = float(rng.uniform(-0.1, 0.1))
        r = float(rng.uniform(0.5, 8.0))
        b = float(rng.uniform(-math.pi, math.pi))
        landmark = (pose.x + r * math.cos(b), pose.y + r * math.sin(b))
        worst["A"] = max(worst["A"], check_A(pose, ds, dth))
        worst["W"] = max(worst["W"], check_W(pose, ds, dth, p))
        worst["H_heading"] = max(worst["H_heading"], check_H_heading(pose))
        worst["H_range_bearing"] = max(
            worst["H_range_bearing"], check_H_range_bearing(pose, landmark)
        )
    return JacobianReport(samples, worst, tolerance)
