"""Extended Kalman filter over the planar pose (x, y, theta).

Prediction runs the midpoint odometry model on measured wheel speeds;
correction fuses absolute heading and range-bearing landmark fixes.
Matrix algebra is written out on scalars: the state is 3-dimensional and
measurements are at most 2-dimensional, so closed forms are both exact and
far cheaper than generic linear algebra inside the simulation loop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from hybridnav.errors import InnovationError
from hybridnav.geometry import Pose, normalize_angle
from hybridnav.plant import RobotParams, WheelSpeeds, dead_reckon_step, odometry_increment

HEADING = "heading"
RANGE_BEARING = "range_bearing"
MeasurementKind = Literal["heading", "range_bearing"]

MAX_CONDITION = 1e12


@dataclass(frozen=True)
class EstimatorState:
    """Pose estimate and its 3x3 error covariance."""

    mean: Pose
    covariance: np.ndarray

    def __post_init__(self) -> None:
        cov = np.array(self.covariance, dtype=float).reshape(3, 3)
        cov.setflags(write=False)
        object.__setattr__(self, "covariance", cov)

    @classmethod
    def from_sigmas(cls, mean: Pose, sx: float, sy: float, stheta: float) -> EstimatorState:
        return cls(mean, np.diag([sx * sx, sy * sy, stheta * stheta]))

    @property
    def trace(self) -> float:
        return float(np.trace(self.covariance))


@dataclass(frozen=True)
class ProcessNoiseModel:
    """Wheel-speed noise: each wheel has variance ``delta * omega_wheel**2``."""

    delta: float = 0.01

    def __post_init__(self) -> None:
        if not self.delta >= 0.0:
            raise ValueError(f"delta must be >= 0, got {self.delta}")


@dataclass(frozen=True)
class LandmarkMap:
    landmarks: tuple[tuple[int, float, float], ...] = ()
    _index: dict[int, tuple[float, float]] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        lms = tuple((int(i), float(x), float(y)) for i, x, y in self.landmarks)
        index = {i: (x, y) for i, x, y in lms}
        if len(index) != len(lms):
            raise ValueError("landmark ids must be unique")
        object.__setattr__(self, "landmarks", lms)
        object.__setattr__(self, "_index", index)

    def position(self, landmark_id: int) -> tuple[float, float]:
        try:
            return self._index[landmark_id]
        except KeyError:
            raise KeyError(f"unknown landmark id {landmark_id}") from None

    def ids(self) -> list[int]:
        return [lm[0] for lm in self.landmarks]


@dataclass(frozen=True)
class Measurement:
    """One absolute observation with its noise covariance.

    ``value`` is ``(theta,)`` for a heading fix and ``(range, bearing)`` for a
    range-bearing fix on landmark ``landmark_id``.
    """

    kind: MeasurementKind
    value: tuple[float, ...]
    noise_cov: tuple[tuple[float, ...], ...]
    landmark_id: int | None = None

    def __post_init__(self) -> None:
        dim = {HEADING: 1, RANGE_BEARING: 2}.get(self.kind)
        if dim is None:
            raise ValueError(f"unknown measurement kind {self.kind!r}")
        if self.kind == RANGE_BEARING and self.landmark_id is None:
            raise ValueError("range_bearing measurement needs a landmark_id")
        raw = self.value
        value = (float(raw),) if np.isscalar(raw) else tuple(map(float, raw))
        if len(value) != dim:
            raise ValueError(f"{self.kind} measurement must have {dim} component(s)")
        cov = self.noise_cov
        if isinstance(cov, np.ndarray):
            cov = cov.reshape(dim, dim).tolist()
        elif np.isscalar(cov):
            cov = ((cov,),)
        cov = tuple(tuple(map(float, row)) for row in cov)
        if len(cov) != dim or any(len(row) != dim for row in cov):
            raise ValueError(f"noise covariance must be {dim}x{dim}")
        if dim == 1:
            positive = cov[0][0] > 0.0
        else:
            if cov[0][1] != cov[1][0]:
                raise ValueError("noise covariance must be symmetric")
            positive = cov[0][0] > 0.0 and cov[0][0] * cov[1][1] - cov[0][1] ** 2 > 0.0
        if not positive:
            raise ValueError("noise covariance must be positive definite")
        object.__setattr__(self, "value", value)
        object.__setattr__(self, "noise_cov", cov)

    @classmethod
    def heading(cls, theta: float, sigma: float) -> Measurement:
        return cls(HEADING, (theta,), ((sigma * sigma,),))

    @classmethod
    def range_bearing(
        cls, landmark_id: int, rng: float, bearing: float, sigma_range: float, sigma_bearing: float
    ) -> Measurement:
        cov = ((sigma_range**2, 0.0), (0.0, sigma_bearing**2))
        return cls(RANGE_BEARING, (rng, bearing), cov, landmark_id)


def jacobian_A(mean: Pose, delta_s: float, delta_theta: float) -> np.ndarray:
    """Jacobian of the odometry map with respect to the pose."""
    mid = mean.heading + delta_theta / 2.0
    return np.array(
        [
            [1.0, 0.0, -delta_s * math.sin(mid)],
            [0.0, 1.0, delta_s * math.cos(mid)],
            [0.0, 0.0, 1.0],
        ]
    )


def _w_entries(theta: float, delta_s: float, delta_theta: float, axle: float):
    mid = theta + delta_theta / 2.0
    c, s = math.cos(mid), math.sin(mid)
    couple = delta_s / (2.0 * axle)
    # columns: right wheel, left wheel
    return (
        (c / 2.0 - couple * s, c / 2.0 + couple * s),
        (s / 2.0 + couple * c, s / 2.0 - couple * c),
        (1.0 / axle, -1.0 / axle),
    )


def jacobian_W(mean: Pose, delta_s: float, delta_theta: float, p: RobotParams) -> np.ndarray:
    """Jacobian of the odometry map with respect to per-wheel travel.

    Columns are (right wheel, left wheel) distance perturbations in metres.
    The position rows carry ``cos/2`` and ``sin/2`` terms plus a heading
    coupling ``delta_s / (2 L)``; the heading row is ``(1/L, -1/L)``.
    """
    return np.array(_w_entries(mean.heading, delta_s, delta_theta, p.axle_length))


def process_noise_Q(w: WheelSpeeds, noise: ProcessNoiseModel) -> np.ndarray:
    """Wheel-speed noise covariance ordered (right, left), in (rad/s)^2."""
    return np.array(
        [
            [noise.delta * w.omega_right**2, 0.0],
            [0.0, noise.delta * w.omega_left**2],
        ]
    )


Cov6 = tuple[float, float, float, float, float, float]


def _cov6(cov: np.ndarray) -> Cov6:
    (p00, p01, p02), (_, p11, p12), (_, _, p22) = cov.tolist()
    return (p00, p01, p02, p11, p12, p22)


def _matrix(c: Cov6) -> np.ndarray:
    p00, p01, p02, p11, p12, p22 = c
    return np.array([[p00, p01, p02], [p01, p11, p12], [p02, p12, p22]])


def propagate_covariance(
    cov: Cov6,
    theta: float,
    delta_s: float,
    delta_theta: float,
    w: WheelSpeeds,
    dt: float,
    p: RobotParams,
    delta: float,
) -> Cov6:
    """``A P A^T + W Q W^T`` on the six unique covariance entries.

    ``Q`` is wheel-speed noise, so it is scaled by ``(dt * R)^2`` to become
    per-wheel travel variance before passing through the travel Jacobian.
    """
    p00, p01, p02, p11, p12, p22 = cov
    mid = theta + delta_theta / 2.0
    a02 = -delta_s * math.sin(mid)
    a12 = delta_s * math.cos(mid)
    # A = I + (a02, a12, 0) in the heading column
    r00 = p00 + a02 * p02
    r01 = p01 + a02 * p12
    r02 = p02 + a02 * p22
    r11 = p11 + a12 * p12
    r12 = p12 + a12 * p22
    n00 = r00 + a02 * r02
    n01 = r01 + a12 * r02
    n11 = r11 + a12 * r12

    k2 = (dt * p.wheel_radius) ** 2
    q_r = k2 * delta * w.omega_right**2
    q_l = k2 * delta * w.omega_left**2
    (wxr, wxl), (wyr, wyl), (wtr, wtl) = _w_entries(theta, delta_s, delta_theta, p.axle_length)
    return (
        n00 + q_r * wxr * wxr + q_l * wxl * wxl,
        n01 + q_r * wxr * wyr + q_l * wxl * wyl,
        r02 + q_r * wxr * wtr + q_l * wxl * wtl,
        n11 + q_r * wyr * wyr + q_l * wyl * wyl,
        r12 + q_r * wyr * wtr + q_l * wyl * wtl,
        p22 + q_r * wtr * wtr + q_l * wtl * wtl,
    )


def predict(
    state: EstimatorState,
    w: WheelSpeeds,
    dt: float,
    p: RobotParams,
    noise: ProcessNoiseModel,
) -> EstimatorState:
    """Time update from one interval of measured wheel speeds."""
    ds, dth = odometry_increment(w, dt, p)
    cov = propagate_covariance(
        _cov6(state.covariance), state.mean.heading, ds, dth, w, dt, p, noise.delta
    )
    return EstimatorState(dead_reckon_step(state.mean, ds, dth), _matrix(cov))


def heading_model(mean: Pose) -> tuple[tuple[float], tuple[tuple[float, float, float]]]:
    return (mean.heading,), ((0.0, 0.0, 1.0),)


def range_bearing_model(mean: Pose, landmark: tuple[float, float]):
    """Range and bearing to ``landmark`` with the 2x3 Jacobian rows."""
    dx = landmark[0] - mean.x
    dy = landmark[1] - mean.y
    q = dx * dx + dy * dy
    if q == 0.0:
        raise ValueError("landmark coincides with the pose estimate")
    r = math.sqrt(q)
    predicted = (r, normalize_angle(math.atan2(dy, dx) - mean.heading))
    return predicted, ((-dx / r, -dy / r, 0.0), (dy / q, -dx / q, -1.0))


def measurement_model(
    kind: MeasurementKind,
    mean: Pose,
    landmarks: LandmarkMap | None = None,
    landmark_id: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Predicted measurement and its Jacobian with respect to the pose."""
    if kind == HEADING:
        predicted, rows = heading_model(mean)
    elif kind == RANGE_BEARING:
        if landmarks is None or landmark_id is None:
            raise ValueError("range_bearing needs a landmark map and id")
        predicted, rows = range_bearing_model(mean, landmarks.position(landmark_id))
    else:
        raise ValueError(f"unknown measurement kind {kind!r}")
    return np.array(predicted), np.array(rows)


def kalman_update(
    mean: Pose,
    cov: Cov6,
    rows: tuple[tuple[float, float, float], ...],
    innovation: tuple[float, ...],
    noise_cov: tuple[tuple[float, ...], ...],
) -> tuple[Pose, Cov6]:
    """Gain ``K = P H^T S^-1``, mean ``+ K y``, covariance ``(I - K H) P`` symmetrized."""
    p00, p01, p02, p11, p12, p22 = cov
    h0, h1, h2 = rows[0]
    # a = P h for the first row
    a0 = p00 * h0 + p01 * h1 + p02 * h2
    a1 = p01 * h0 + p11 * h1 + p12 * h2
    a2 = p02 * h0 + p12 * h1 + p22 * h2
    s00 = h0 * a0 + h1 * a1 + h2 * a2 + noise_cov[0][0]
    if len(rows) == 1:
        if not (math.isfinite(s00) and s00 > 0.0):
            raise InnovationError(f"innovation variance {s00} is not positive")
        k0, k1, k2 = a0 / s00, a1 / s00, a2 / s00
        e = innovation[0]
        mean = Pose(mean.x + k0 * e, mean.y + k1 * e, mean.heading + k2 * e)
        n00 = p00 - k0 * a0
        n11 = p11 - k1 * a1
        n22 = p22 - k2 * a2
        n01 = 0.5 * ((p01 - k0 * a1) + (p01 - k1 * a0))
        n02 = 0.5 * ((p02 - k0 * a2) + (p02 - k2 * a0))
        n12 = 0.5 * ((p12 - k1 * a2) + (p12 - k2 * a1))
        return mean, (n00, n01, n02, n11, n12, n22)

    g0, g1, g2 = rows[1]
    b0 = p00 * g0 + p01 * g1 + p02 * g2
    b1 = p01 * g0 + p11 * g1 + p12 * g2
    b2 = p02 * g0 + p12 * g1 + p22 * g2
    s01 = 0.5 * ((h0 * b0 + h1 * b1 + h2 * b2) + (g0 * a0 + g1 * a1 + g2 * a2))
    s01 += 0.5 * (noise_cov[0][1] + noise_cov[1][0])
    s11 = g0 * b0 + g1 * b1 + g2 * b2 + noise_cov[1][1]
    det = s00 * s11 - s01 * s01
    half_tr = 0.5 * (s00 + s11)
    gap = math.sqrt(max(half_tr * half_tr - det, 0.0))
    lo = half_tr - gap
    if not (math.isfinite(det) and det > 0.0 and lo > 0.0 and (half_tr + gap) / lo <= MAX_CONDITION):
        raise InnovationError(f"innovation covariance is ill-conditioned (det={det})")
    i00, i01, i11 = s11 / det, -s01 / det, s00 / det
    # K = [a b] S^-1, one row per state component
    ka0, kb0 = a0 * i00 + b0 * i01, a0 * i01 + b0 * i11
    ka1, kb1 = a1 * i00 + b1 * i01, a1 * i01 + b1 * i11
    ka2, kb2 = a2 * i00 + b2 * i01, a2 * i01 + b2 * i11
    e0, e1 = innovation
    mean = Pose(
        mean.x + ka0 * e0 + kb0 * e1,
        mean.y + ka1 * e0 + kb1 * e1,
        mean.heading + ka2 * e0 + kb2 * e1,
    )
    n00 = p00 - (ka0 * a0 + kb0 * b0)
    n11 = p11 - (ka1 * a1 + kb1 * b1)
    n22 = p22 - (ka2 * a2 + kb2 * b2)
    n01 = p01 - 0.5 * ((ka0 * a1 + kb0 * b1) + (ka1 * a0 + kb1 * b0))
    n02 = p02 - 0.5 * ((ka0 * a2 + kb0 * b2) + (ka2 * a0 + kb2 * b0))
    n12 = p12 - 0.5 * ((ka1 * a2 + kb1 * b2) + (ka2 * a1 + kb2 * b1))
    return mean, (n00, n01, n02, n11, n12, n22)


def correct(
    state: EstimatorState, m: Measurement, landmarks: LandmarkMap | None = None
) -> EstimatorState:
    """Fuse one measurement; angular innovations are wrapped before the update."""
    if m.kind == HEADING:
        predicted, rows = heading_model(state.mean)
        innovation = (normalize_angle(m.value[0] - predicted[0]),)
    else:
        if landmarks is None:
            raise ValueError("range_bearing correction needs a landmark map")
        predicted, rows = range_bearing_model(state.mean, landmarks.position(m.landmark_id))
        innovation = (m.value[0] - predicted[0], normalize_angle(m.value[1] - predicted[1]))
    mean, cov = kalman_update(state.mean, _cov6(state.covariance), rows, innovation, m.noise_cov)
    return EstimatorState(mean, _matrix(cov))


def pose_error(est: Pose, truth: Pose) -> tuple[float, float, float]:
    return (est.x - truth.x, est.y - truth.y, normalize_angle(est.heading - truth.heading))


def nees_value(error: tuple[float, float, float], cov: Cov6) -> float:
    a, b, c, d, f, g = cov
    # adjugate of the symmetric 3x3 covariance
    c00 = d * g - f * f
    c01 = c * f - b * g
    c02 = b * f - c * d
    c11 = a * g - c * c
    c12 = b * c - a * f
    c22 = a * d - b * b
    det = a * c00 + b * c01 + c * c02
    if not det > 0.0:
        return math.inf
    x, y, t = error
    quad = (
        c00 * x * x + c11 * y * y + c22 * t * t
        + 2.0 * (c01 * x * y + c02 * x * t + c12 * y * t)
    )
    return quad / det


def nees(state: EstimatorState, truth: Pose) -> float:
    """Normalized estimation error squared, ``e^T P^-1 e``."""
    return nees_value(pose_error(state.mean, truth), _cov6(state.covariance))
