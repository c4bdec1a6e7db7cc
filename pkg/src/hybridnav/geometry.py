"""Angle arithmetic, planar poses, and goal-relative navigation variables.

All angles are radians wrapped to the half-open interval (-pi, pi].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from hybridnav.errors import DegenerateAtGoal

_PI = math.pi
TWO_PI = 2.0 * math.pi


def normalize_angle(raw: float) -> float:
    """Wrap ``raw`` into (-pi, pi].

    Raises
    ------
    ValueError
        If ``raw`` is NaN or infinite.
    """
    if -_PI < raw <= _PI:
        return raw
    if not math.isfinite(raw):
        raise ValueError(f"cannot normalize non-finite angle {raw!r}")
    # math.remainder is exact and lands in [-pi, pi]
    r = math.remainder(raw, TWO_PI)
    if r <= -_PI:
        return _PI
    return r


@dataclass(frozen=True, slots=True)
class Pose:
    """Robot configuration in the world frame."""

    x: float
    y: float
    heading: float = 0.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"pose position must be finite, got ({self.x}, {self.y})")
        object.__setattr__(self, "heading", normalize_angle(self.heading))

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.heading)

    def distance_to(self, other: Pose) -> float:
        return math.hypot(other.x - self.x, other.y - self.y)


@dataclass(frozen=True, slots=True)
class NavState:
    """Polar navigation variables of the robot relative to the goal.

    ``rho`` is the distance to the goal, ``alpha`` the bearing of the goal
    ray measured from the robot heading and ``phi`` the bearing of the goal
    ray measured from the goal heading.
    """

    rho: float
    alpha: float
    phi: float

    def __post_init__(self) -> None:
        if not self.rho >= 0.0:
            raise ValueError(f"rho must be >= 0, got {self.rho}")
        object.__setattr__(self, "alpha", normalize_angle(self.alpha))
        object.__setattr__(self, "phi", normalize_angle(self.phi))


def to_nav(robot: Pose, goal: Pose) -> NavState:
    """Convert a robot pose into navigation variables relative to ``goal``.

    Raises
    ------
    DegenerateAtGoal
        When the robot sits exactly on the goal position.
    """
    dx = goal.x - robot.x
    dy = goal.y - robot.y
    if dx == 0.0 and dy == 0.0:
        raise DegenerateAtGoal("robot position equals goal position")
    bearing = math.atan2(dy, dx)
    return NavState(
        math.hypot(dx, dy),
        bearing - robot.heading,
        bearing - goal.heading,
    )


def nav_error_offsets(est: Pose, truth: Pose, goal: Pose) -> tuple[float, float, float]:
    """Feedback disturbances of (rho, phi, alpha) induced by a pose estimate error.

    Returns ``(eps_rho, eps_phi, eps_alpha)`` where the angular offsets are
    wrapped and ``eps_alpha = eps_phi - eps_theta``.
    """
    nav_est = to_nav(est, goal)
    nav_true = to_nav(truth, goal)
    eps_rho = nav_est.rho - nav_true.rho
    eps_phi = normalize_angle(nav_est.phi - nav_true.phi)
    eps_theta = normalize_angle(est.heading - truth.heading)
    return eps_rho, eps_phi, normalize_angle(eps_phi - eps_theta)
