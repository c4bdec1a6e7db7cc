"""Differential-drive kinematics: ground-truth plant and wheel odometry."""

from __future__ import annotations

import math
from dataclasses import dataclass

from hybridnav.errors import ContractViolation, DegenerateAtGoal
from hybridnav.geometry import NavState, Pose


@dataclass(frozen=True)
class RobotParams:
    """Physical and actuation limits of the robot.

    Defaults describe a 10 cm wheel on a 60 cm axle with a 0.3 m/s top speed.
    ``delta`` scales the wheel-speed noise variance, ``delta * omega_wheel**2``.
    """

    wheel_radius: float = 0.05
    axle_length: float = 0.6
    v_max: float = 0.3
    omega_max: float = 1.5
    delta: float = 0.01

    def __post_init__(self) -> None:
        for name in ("wheel_radius", "axle_length", "v_max", "omega_max"):
            value = getattr(self, name)
            if not value > 0.0:
                raise ValueError(f"{name} must be > 0, got {value}")
        if not self.delta >= 0.0:
            raise ValueError(f"delta must be >= 0, got {self.delta}")


@dataclass(frozen=True, slots=True)
class ControlInput:
    """Translational speed ``v`` [m/s] and angular speed ``omega`` [rad/s]."""

    v: float = 0.0
    omega: float = 0.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.v) and math.isfinite(self.omega)):
            raise ValueError(f"control input must be finite, got ({self.v}, {self.omega})")

    @classmethod
    def limited(cls, v: float, omega: float, params: RobotParams) -> ControlInput:
        """Build an input with each component clamped to the robot limits."""
        v = min(max(v, -params.v_max), params.v_max)
        omega = min(max(omega, -params.omega_max), params.omega_max)
        return cls(v, omega)


@dataclass(frozen=True, slots=True)
class WheelSpeeds:
    omega_left: float
    omega_right: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.omega_left) and math.isfinite(self.omega_right)):
            raise ValueError("wheel speeds must be finite")


@dataclass(frozen=True)
class DisturbanceBounds:
    """Absolute maxima of the input disturbances and of the pose feedback noise."""

    eps_v_max: float = 0.0
    eps_omega_max: float = 0.0
    eps_x_max: float = 0.0
    eps_y_max: float = 0.0
    eps_theta_max: float = 0.0

    def __post_init__(self) -> None:
        for name, value in vars(self).items():
            if not value >= 0.0:
                raise ValueError(f"{name} must be >= 0, got {value}")


def inverse_kinematics(u: ControlInput, p: RobotParams) -> WheelSpeeds:
    half_turn = u.omega * p.axle_length / 2.0
    return WheelSpeeds(
        (u.v - half_turn) / p.wheel_radius,
        (u.v + half_turn) / p.wheel_radius,
    )


def odometry_increment(w: WheelSpeeds, dt: float, p: RobotParams) -> tuple[float, float]:
    """Distance travelled by the axle centre and heading change over ``dt``."""
    if not dt > 0.0:
        raise ValueError(f"dt must be > 0, got {dt}")
    ds_left = dt * p.wheel_radius * w.omega_left
    ds_right = dt * p.wheel_radius * w.omega_right
    return (ds_left + ds_right) / 2.0, (ds_right - ds_left) / p.axle_length


def dead_reckon_step(pose: Pose, delta_s: float, delta_theta: float) -> Pose:
    """Midpoint-heading odometry update."""
    mid = pose.heading + delta_theta / 2.0
    return Pose(
        pose.x + delta_s * math.cos(mid),
        pose.y + delta_s * math.sin(mid),
        pose.heading + delta_theta,
    )


def _sinc(x: float) -> float:
    if abs(x) < 1e-4:
        return 1.0 - x * x / 6.0
    return math.sin(x) / x


def plant_step(
    truth: Pose,
    u: ControlInput,
    dist: tuple[float, float] = (0.0, 0.0),
    dt: float = 0.01,
    bounds: DisturbanceBounds | None = None,
) -> Pose:
    """Advance the true pose by one constant-twist arc.

    ``dist`` is the ``(eps_v, eps_omega)`` pair added to the commanded input.
    When ``bounds`` is given, a disturbance outside it raises
    :class:`ContractViolation`.
    """
    if not dt > 0.0:
        raise ValueError(f"dt must be > 0, got {dt}")
    eps_v, eps_omega = dist
    if bounds is not None and (
        abs(eps_v) > bounds.eps_v_max or abs(eps_omega) > bounds.eps_omega_max
    ):
        raise ContractViolation(
            f"disturbance ({eps_v}, {eps_omega}) exceeds bounds "
            f"({bounds.eps_v_max}, {bounds.eps_omega_max})"
        )
    ds = (u.v + eps_v) * dt
    dth = (u.omega + eps_omega) * dt
    # exact chord of the arc, taken along the mid-step heading
    chord = ds * _sinc(dth / 2.0)
    mid = truth.heading + dth / 2.0
    return Pose(truth.x + chord * math.cos(mid), truth.y + chord * math.sin(mid), truth.heading + dth)


def nav_dynamics(
    nav: NavState, u: ControlInput, dist: tuple[float, float] = (0.0, 0.0)
) -> tuple[float, float, float]:
    """Time derivatives ``(rho_dot, alpha_dot, phi_dot)`` of the navigation variables."""
    if nav.rho == 0.0:
        raise DegenerateAtGoal("navigation dynamics are singular at rho = 0")
    v = u.v + dist[0]
    omega = u.omega + dist[1]
    drift = v * math.sin(nav.alpha) / nav.rho
    return -v * math.cos(nav.alpha), -omega + drift, drift

