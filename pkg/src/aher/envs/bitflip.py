"""Bit-flipping: invert one bit per step to reach a target configuration."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import EnvSpec, GoalEnv, GoalObservation, StepResult

# state: (bits: tuple of 0/1, step index t, reached-goal flag); goal: tuple of 0/1


@dataclass(frozen=True)
class BitFlipConfig:
    n_bits: int
    horizon: Optional[int] = None  # defaults to n_bits

    def __post_init__(self):
        if self.n_bits < 1:
            raise ValueError("n_bits must be at least 1")


class BitFlipEnv(GoalEnv):
    def __init__(self, config: BitFlipConfig):
        self.config = config
        n = config.n_bits
        horizon = config.horizon if config.horizon is not None else n
        self.spec = EnvSpec(
            action_count=n, horizon=horizon, feature_dim=2 * n, goal_dim=n
        )
        self.value_scale = 1.0 / horizon
        self._goal: Optional[tuple] = None

    def reset(self, rng, goal_override=None):
        n = self.config.n_bits
        bits = tuple(int(b) for b in rng.integers(0, 2, size=n))
        if goal_override is not None:
            goal = self._validate_goal(goal_override)
        else:
            goal = tuple(int(b) for b in rng.integers(0, 2, size=n))
            while goal == bits:
                goal = tuple(int(b) for b in rng.integers(0, 2, size=n))
        self._goal = goal
        state = (bits, 0, False)
        return GoalObservation(state, bits, goal)

    def _validate_goal(self, goal) -> tuple:
        goal = tuple(int(b) for b in goal)
        if len(goal) != self.config.n_bits:
            raise ValueError(
                f"goal has {len(goal)} bits, environment expects {self.config.n_bits}"
            )
        if any(b not in (0, 1) for b in goal):
            raise ValueError("goal entries must be 0 or 1")
        return goal

    def step(self, state, action):
        bits, t = state[0], state[1]
        if self.is_terminal(state):
            raise ValueError("cannot step a terminal state")
        if not 0 <= action < self.spec.action_count:
            raise ValueError(f"action {action} out of range")
        flipped = list(bits)
        flipped[action] = 1 - flipped[action]
        next_bits = tuple(flipped)
        reward, success = self.compute_reward(next_bits, self._goal)
        next_state = (next_bits, t + 1, success)
        obs = GoalObservation(next_state, next_bits, self._goal)
        terminal = success or t + 1 >= self.spec.horizon
        return StepResult(obs, reward, terminal, success)

    def compute_reward(self, achieved, desired):
        achieved = tuple(achieved)
        desired = tuple(desired)
        if len(achieved) != len(desired):
            raise ValueError("goal dimension mismatch")
        success = achieved == desired
        return (0.0 if success else -1.0), success

    def legal_actions(self, state):
        if self.is_terminal(state):
            raise ValueError("no legal actions in a terminal state")
        return np.ones(self.spec.action_count, dtype=bool)

    def achieved_goal(self, state):
        return state[0]

    def is_terminal(self, state):
        # the success flag is stamped onto the state at step time; reset
        # re-draws equal start/goal pairs so initial states are never terminal
        return state[2] or state[1] >= self.spec.horizon

    def encode(self, obs):
        return np.concatenate(
            [
                np.asarray(obs.state[0], dtype=np.float64),
                np.asarray(obs.desired_goal, dtype=np.float64),
            ]
        )

    def goal_distance(self, achieved, desired):
        return float(sum(a != b for a, b in zip(achieved, desired)))
