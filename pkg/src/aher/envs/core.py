"""Goal-conditioned single-player environment contract.

Environments are deterministic and functional over explicit states: ``step``
takes the state to advance, so tree search can branch from any node. The
episode's desired goal is held by the instance (set at ``reset``) and stays
fixed until the next reset; the relabeler recomputes rewards against other
goals through ``compute_reward`` alone, which is the single source of truth
for rewards.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, Optional

import numpy as np


@dataclass(frozen=True)
class EnvSpec:
    action_count: int
    horizon: int
    feature_dim: int
    goal_dim: int

    def __post_init__(self):
        for name in ("action_count", "horizon", "feature_dim", "goal_dim"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be a positive integer")


@dataclass(frozen=True)
class GoalObservation:
    state: Any
    achieved_goal: Any
    desired_goal: Any


@dataclass(frozen=True)
class StepResult:
    observation: GoalObservation
    reward: float
    terminal: bool
    success: bool


class GoalEnv(ABC):
    """Base contract shared by bit-flip, maze, and equation discovery."""

    spec: EnvSpec

    #: multiplier taking raw episode returns into the value head's [-1, 1]
    #: range (1/horizon for unit-step-cost tasks, 1 for terminal 0/1 reward)
    value_scale: float = 1.0

    #: whether non-terminal states have achieved goals that can satisfy the
    #: goal predicate ("future" relabeling is rejected when False)
    future_goals_usable: bool = True

    @abstractmethod
    def reset(self, rng: np.random.Generator, goal_override=None) -> GoalObservation:
        """Start an episode; the returned observation's goal becomes the
        episode goal used by ``step`` until the next reset."""

    @abstractmethod
    def step(self, state, action: int) -> StepResult:
        """Advance ``state`` by an action, scoring against the episode goal.

        Raises on illegal actions and on terminal states; callers are
        expected to respect ``legal_actions`` and terminal flags.
        """

    @abstractmethod
    def compute_reward(self, achieved, desired) -> tuple[float, bool]:
        """Pure reward/success predicate on goal-space values."""

    @abstractmethod
    def legal_actions(self, state) -> np.ndarray:
        """Boolean mask of length action_count; errors on terminal states."""

    @abstractmethod
    def achieved_goal(self, state):
        """Goal-space value reached by ``state`` (pure function of state)."""

    @abstractmethod
    def encode(self, obs: GoalObservation) -> np.ndarray:
        """Deterministic network input of length feature_dim (state features
        concatenated with desired-goal features)."""

    @abstractmethod
    def goal_distance(self, achieved, desired) -> float:
        """Distance used by experience ranking; compatible with the success
        predicate (smaller means closer to success)."""

    @abstractmethod
    def is_terminal(self, state) -> bool:
        """True when the state ends the episode (success or horizon)."""

    def relabel_goal(self, state, rng: np.random.Generator, dataset_change: bool = False):
        """Goal to substitute when relabeling toward ``state``; None when the
        state cannot serve as a goal (e.g. an incomplete derivation)."""
        return self.achieved_goal(state)

    def value_target(self, raw_return: float) -> float:
        """Scale a raw return-to-go into the value head's range."""
        return float(np.clip(raw_return * self.value_scale, -1.0, 1.0))
