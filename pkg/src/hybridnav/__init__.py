"""EKF-based pose estimation and hybrid Lyapunov point stabilization for a differential-drive robot."""

from hybridnav.config import ScenarioConfig, SensorConfig, load_config
from hybridnav.controller import ControlDecision, Gains, HybridController, Region, RegionThresholds
from hybridnav.errors import ContractViolation, DegenerateAtGoal, InnovationError
from hybridnav.estimator import EstimatorState, LandmarkMap, Measurement, ProcessNoiseModel
from hybridnav.geometry import NavState, Pose, normalize_angle, to_nav
from hybridnav.plant import ControlInput, DisturbanceBounds, RobotParams, WheelSpeeds
from hybridnav.simloop import TrajectoryLog, run_batch, run_scenario

__version__ = "0.1.0"
