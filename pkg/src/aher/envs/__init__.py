"""Goal-conditioned environments: bit-flip, kinematic maze, equation discovery."""

from .bitflip import BitFlipConfig, BitFlipEnv
from .core import EnvSpec, GoalEnv, GoalObservation, StepResult
from .eqdisc import EqAchieved, EqDiscConfig, EqDiscEnv, INCOMPLETE
from .maze import MazeConfig, MazeEnv, parse_layout

__all__ = [
    "BitFlipConfig",
    "BitFlipEnv",
    "EnvSpec",
    "EqAchieved",
    "EqDiscConfig",
    "EqDiscEnv",
    "GoalEnv",
    "GoalObservation",
    "INCOMPLETE",
    "MazeConfig",
    "MazeEnv",
    "StepResult",
    "parse_layout",
]
