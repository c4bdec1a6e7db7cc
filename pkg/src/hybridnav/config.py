"""Scenario configuration and its YAML / dict round trip."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from hybridnav.controller import Gains, RegionThresholds
from hybridnav.estimator import HEADING, RANGE_BEARING, LandmarkMap
from hybridnav.geometry import Pose
from hybridnav.plant import DisturbanceBounds, RobotParams

COMPASS_SIGMA = math.radians(0.1)
LRF_RANGE_SIGMA = 0.03
LRF_BEARING_SIGMA = math.radians(0.25)


@dataclass(frozen=True)
class SensorConfig:
    """A periodic absolute sensor.

    ``sigma`` holds one standard deviation for ``heading`` and
    ``(range, bearing)`` for ``range_bearing``, which observes every landmark.
    """

    kind: str
    period: float
    sigma: tuple[float, ...]

    def __post_init__(self) -> None:
        dim = {HEADING: 1, RANGE_BEARING: 2}.get(self.kind)
        if dim is None:
            raise ValueError(f"unknown sensor kind {self.kind!r}")
        sigma = (self.sigma,) if isinstance(self.sigma, (int, float)) else tuple(self.sigma)
        if len(sigma) != dim or not all(s > 0.0 for s in sigma):
            raise ValueError(f"{self.kind} sensor needs {dim} positive sigma(s), got {sigma}")
        object.__setattr__(self, "sigma", tuple(float(s) for s in sigma))
        if not self.period > 0.0:
            raise ValueError("sensor period must be > 0")


# filter update interval; odometry prediction still runs every simulation tick
EKF_PERIOD = 0.1


def default_sensors() -> tuple[SensorConfig, ...]:
    """Compass every filter interval, laser landmark fixes every fifth."""
    return (
        SensorConfig(HEADING, EKF_PERIOD, (COMPASS_SIGMA,)),
        SensorConfig(RANGE_BEARING, 5 * EKF_PERIOD, (LRF_RANGE_SIGMA, LRF_BEARING_SIGMA)),
    )


def default_landmarks() -> LandmarkMap:
    # corners of a 5 m square centred between the default start and goal
    return LandmarkMap(((0, -1.5, -1.5), (1, 3.5, -1.5), (2, 3.5, 3.5), (3, -1.5, 3.5)))


@dataclass(frozen=True)
class ScenarioConfig:
    start: Pose = Pose(0.0, 0.0, 0.0)
    goal: Pose = Pose(2.0, 2.0, math.radians(30.0))
    robot: RobotParams = RobotParams()
    gains: Gains = Gains()
    thresholds: RegionThresholds = RegionThresholds()
    disturbance: DisturbanceBounds = DisturbanceBounds(0.001, 0.001)
    sensors: tuple[SensorConfig, ...] = field(default_factory=default_sensors)
    landmarks: LandmarkMap = field(default_factory=default_landmarks)
    dt: float = 0.01
    t_max: float = 60.0
    seed: int = 0
    estimator_enabled: bool = True
    runs: int = 1
    # initial estimate spread (x, y, theta); the estimate is drawn from it
    init_sigma: tuple[float, float, float] = (0.01, 0.01, math.radians(1.0))
    position_tol: float = 0.05
    heading_tol: float = math.radians(3.0)
    settle_steps: int = 10
    stop_on_settle: bool = True
    controller: str = "hybrid"
    # what the controller acts on: the filter estimate or the true pose
    feedback: str = "estimate"

    def __post_init__(self) -> None:
        if not self.dt > 0.0:
            raise ValueError("dt must be > 0")
        if not self.t_max >= self.dt:
            raise ValueError("t_max must be >= dt")
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if self.controller not in ("hybrid", "global"):
            raise ValueError(f"controller must be 'hybrid' or 'global', got {self.controller!r}")
        if self.feedback not in ("estimate", "truth"):
            raise ValueError(f"feedback must be 'estimate' or 'truth', got {self.feedback!r}")
        for s in self.sensors:
            self.sensor_ticks(s)
        if self.sensors and any(s.kind == RANGE_BEARING for s in self.sensors):
            if not self.landmarks.landmarks:
                raise ValueError("range_bearing sensor configured without landmarks")
        if len(self.init_sigma) != 3 or any(s < 0.0 for s in self.init_sigma):
            raise ValueError("init_sigma needs three non-negative entries")
        self.thresholds.check_against(self.disturbance, self.gains)
        object.__setattr__(self, "seed", int(self.seed))

    @property
    def n_steps(self) -> int:
        return int(round(self.t_max / self.dt))

    def sensor_ticks(self, sensor: SensorConfig) -> int:
        ticks = sensor.period / self.dt
        n = int(round(ticks))
        if n < 1 or abs(ticks - n) > 1e-9 * max(1.0, ticks):
            raise ValueError(
                f"sensor period {sensor.period} is not a positive multiple of dt={self.dt}"
            )
        return n

    def replace(self, **changes: Any) -> ScenarioConfig:
        return dataclasses.replace(self, **changes)

    def noise_free(self) -> ScenarioConfig:
        """Same scenario with every noise source removed and true-state feedback."""
        return self.replace(
            disturbance=DisturbanceBounds(),
            robot=dataclasses.replace(self.robot, delta=0.0),
            sensors=(),
            estimator_enabled=False,
            init_sigma=(0.0, 0.0, 0.0),
            feedback="truth",
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "start": dataclasses.asdict(self.start),
            "goal": dataclasses.asdict(self.goal),
            "robot": dataclasses.asdict(self.robot),
            "gains": dataclasses.asdict(self.gains),
            "thresholds": dataclasses.asdict(self.thresholds),
            "disturbance": dataclasses.asdict(self.disturbance),
            "sensors": [
                {"kind": s.kind, "period": s.period, "sigma": list(s.sigma)} for s in self.sensors
            ],
            "landmarks": [{"id": i, "x": x, "y": y} for i, x, y in self.landmarks.landmarks],
            "dt": self.dt,
            "t_max": self.t_max,
            "seed": self.seed,
            "estimator_enabled": self.estimator_enabled,
            "runs": self.runs,
            "init_sigma": list(self.init_sigma),
            "position_tol": self.position_tol,
            "heading_tol": self.heading_tol,
            "settle_steps": self.settle_steps,
            "stop_on_settle": self.stop_on_settle,
            "controller": self.controller,
            "feedback": self.feedback,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ScenarioConfig:
        data = dict(data)
        unknown = set(data) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ValueError(f"unknown scenario keys: {sorted(unknown)}")
        kwargs: dict[str, Any] = {}
        for key in ("start", "goal"):
            if key in data:
                kwargs[key] = _pose(data.pop(key))
        for key, typ in (
            ("robot", RobotParams),
            ("gains", Gains),
            ("thresholds", RegionThresholds),
            ("disturbance", DisturbanceBounds),
        ):
            if key in data:
                kwargs[key] = typ(**data.pop(key))
        if "sensors" in data:
            kwargs["sensors"] = tuple(SensorConfig(**s) for s in data.pop("sensors") or ())
        if "landmarks" in data:
            kwargs["landmarks"] = LandmarkMap(
                tuple((lm["id"], lm["x"], lm["y"]) for lm in data.pop("landmarks") or ())
            )
        if "init_sigma" in data:
            kwargs["init_sigma"] = tuple(float(s) for s in data.pop("init_sigma"))
        kwargs.update(data)
        return cls(**kwargs)


def _pose(d: dict[str, Any]) -> Pose:
    d = dict(d)
    if "heading_deg" in d:
        if "heading" in d:
            raise ValueError("give either heading or heading_deg, not both")
        d["heading"] = math.radians(d.pop("heading_deg"))
    return Pose(**d)


def load_config(path: str | Path) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or {}
    return ScenarioConfig.from_dict(data)


def dump_config(cfg: ScenarioConfig, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(cfg.to_dict(), fh, sort_keys=False)
