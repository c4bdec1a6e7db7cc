"""Hybrid Lyapunov point-stabilization controller.

Far from the goal (the global set) the robot follows a polar feedback law
that makes ``V_g = rho^2/2 + (alpha^2 + h phi^2)/2`` non-increasing.  Near the
goal with roughly the right heading (the local set) it switches to a parking
law for ``V_l = rho^2/2 + theta_e^2/2``, which stays well behaved as rho -> 0.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple

from hybridnav.errors import DegenerateAtGoal
from hybridnav.estimator import EstimatorState
from hybridnav.geometry import NavState, Pose, normalize_angle, to_nav
from hybridnav.plant import ControlInput, DisturbanceBounds, RobotParams

SINC_SERIES_BELOW = 1e-4


class Region(str, enum.Enum):
    GLOBAL = "Global"
    LOCAL = "Local"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class Gains:
    k_v: float = 10.0
    k_alpha: float = 100.0
    h: float = 1.0
    k_theta: float = 1.0

    def __post_init__(self) -> None:
        for name, value in vars(self).items():
            if not value > 0.0:
                raise ValueError(f"gain {name} must be > 0, got {value}")


@dataclass(frozen=True)
class RegionThresholds:
    """Size of the local set: ``rho < eps_p`` and ``|phi - alpha| < eps_heading``."""

    eps_p: float = 0.05
    eps_heading: float = 0.2

    def __post_init__(self) -> None:
        if not self.eps_p > 0.0 or not self.eps_heading > 0.0:
            raise ValueError("region thresholds must be > 0")

    def check_against(self, bounds: DisturbanceBounds, gains: Gains) -> None:
        """Raise unless the local radius dominates the speed disturbance, eps_p > eps_v/k_v."""
        floor = bounds.eps_v_max / gains.k_v
        if not self.eps_p > floor:
            raise ValueError(
                f"eps_p={self.eps_p} must exceed eps_v_max/k_v={floor} for the local set"
            )


class ControlDecision(NamedTuple):
    region: Region
    input: ControlInput
    lyapunov_value: float
    nav: NavState
    heading_error: float


def _sinc(x: float) -> float:
    if abs(x) < SINC_SERIES_BELOW:
        return 1.0 - x * x / 6.0
    return math.sin(x) / x


def classify_region(
    nav: NavState, th: RegionThresholds, previous: Region | None = None
) -> Region:
    """Local iff inside the local set; once Local, stay Local until rho > 2 eps_p."""
    if previous is Region.LOCAL:
        return Region.LOCAL if nav.rho <= 2.0 * th.eps_p else Region.GLOBAL
    if nav.rho < th.eps_p and abs(normalize_angle(nav.phi - nav.alpha)) < th.eps_heading:
        return Region.LOCAL
    return Region.GLOBAL


def global_law_raw(nav: NavState, g: Gains) -> tuple[float, float]:
    """Unsaturated ``(v, omega)`` of the global law.

    ``omega = k_alpha alpha + k_v cos(alpha) sin(alpha) (alpha + h phi) / alpha``;
    the ratio ``sin(alpha)/alpha`` is taken from its series near zero.
    """
    if nav.rho == 0.0:
        raise DegenerateAtGoal("global law is undefined at rho = 0")
    cos_a = math.cos(nav.alpha)
    v = g.k_v * nav.rho * cos_a
    omega = g.k_alpha * nav.alpha + g.k_v * cos_a * _sinc(nav.alpha) * (nav.alpha + g.h * nav.phi)
    return v, omega


def global_law(nav: NavState, g: Gains, params: RobotParams | None = None) -> ControlInput:
    """Global law, scaled down as a whole when it exceeds the robot limits.

    Both components share one scale factor so the commanded path curvature is
    kept; that keeps ``dV_g/dt`` a positive multiple of its unsaturated value.
    """
    v, omega = global_law_raw(nav, g)
    if params is not None:
        scale = 1.0
        if abs(v) > params.v_max:
            scale = params.v_max / abs(v)
        if abs(omega) * scale > params.omega_max:
            scale = params.omega_max / abs(omega)
        v *= scale
        omega *= scale
    return ControlInput(v, omega)


def local_law(
    nav: NavState, heading_error: float, g: Gains, params: RobotParams | None = None
) -> ControlInput:
    """Parking law ``v = k_v rho cos(alpha)``, ``omega = -k_theta theta_e``.

    Clamping each component separately keeps both Lyapunov terms non-positive.
    """
    v = g.k_v * nav.rho * math.cos(nav.alpha)
    omega = -g.k_theta * heading_error
    if params is None:
        return ControlInput(v, omega)
    return ControlInput.limited(v, omega, params)


def lyapunov_global(nav: NavState, g: Gains) -> float:
    return 0.5 * nav.rho**2 + 0.5 * (nav.alpha**2 + g.h * nav.phi**2)


def lyapunov_local(rho: float, theta_e: float) -> float:
    return 0.5 * rho**2 + 0.5 * theta_e**2


class HybridController:
    """Switches between the global and local laws with hysteresis.

    ``hybrid=False`` runs the global law everywhere (used to exhibit its
    behaviour inside the local set).  The last region is the only state, so
    one instance serves one robot sequentially.
    """

    def __init__(
        self,
        gains: Gains | None = None,
        thresholds: RegionThresholds | None = None,
        params: RobotParams | None = None,
        hybrid: bool = True,
    ) -> None:
        self.gains = gains or Gains()
        self.thresholds = thresholds or RegionThresholds()
        self.params = params
        self.hybrid = hybrid
        self.region: Region | None = None

    def reset(self) -> None:
        self.region = None

    def step(self, est: EstimatorState | Pose, goal: Pose) -> ControlDecision:
        pose = est.mean if isinstance(est, EstimatorState) else est
        g = self.gains
        theta_e = normalize_angle(pose.heading - goal.heading)
        try:
            nav = to_nav(pose, goal)
        except DegenerateAtGoal:
            # on the goal point: no bearing; keep phi - alpha equal to theta_e
            nav = NavState(0.0, 0.0, theta_e)

        if not self.hybrid:
            region = Region.GLOBAL
            if nav.rho == 0.0:
                u = ControlInput(0.0, 0.0)
            else:
                u = global_law(nav, g, self.params)
            value = lyapunov_global(nav, g)
        else:
            if nav.rho == 0.0:
                region = Region.LOCAL
            else:
                region = classify_region(nav, self.thresholds, self.region)
            if region is Region.LOCAL:
                u = local_law(nav, theta_e, g, self.params)
                value = lyapunov_local(nav.rho, theta_e)
            else:
                u = global_law(nav, g, self.params)
                value = lyapunov_global(nav, g)
        self.region = region
        return ControlDecision(region, u, value, nav, theta_e)
