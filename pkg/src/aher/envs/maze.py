"""Kinematic point maze: 8 discrete acceleration directions on a wall grid.

Dynamics per step: v' = clip(damping * v + a * dt, max_speed), p' = p + v' * dt,
with axis-separated wall collision that stops the position at the wall face
and zeroes the blocked velocity component. Cells are unit squares; a cell is
addressed by (floor(x), floor(y)) with x running along columns and y along
rows (row 0 is the first layout line).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import EnvSpec, GoalEnv, GoalObservation, StepResult

_WALL_EPS = 1e-9

# state: (x, y, vx, vy, t, reached-goal flag); goal: (gx, gy)


@dataclass(frozen=True)
class MazeConfig:
    layout: tuple[str, ...]
    dt: float = 0.1
    accel: float = 1.0
    damping: float = 0.9
    max_speed: float = 2.0
    success_radius: float = 0.45
    horizon: int = 300
    random_goal: bool = True  # False: always the layout's G cell

    def __post_init__(self):
        if not 0.0 <= self.damping < 1.0:
            raise ValueError("damping must be in [0, 1)")
        if min(self.dt, self.accel, self.max_speed, self.success_radius) <= 0:
            raise ValueError("dt, accel, max_speed, success_radius must be positive")
        if self.horizon < 1:
            raise ValueError("horizon must be positive")
        if self.max_speed * self.dt >= 1.0:
            raise ValueError("max_speed * dt must stay below one cell per step")


def parse_layout(text: str) -> tuple[str, ...]:
    """Lines of '#' (wall), '.' (free), 'S' (start), 'G' (default goal)."""
    rows = [line.rstrip("\n") for line in text.splitlines() if line.strip()]
    if not rows:
        raise ValueError("empty maze layout")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ValueError("maze layout rows must all have the same width")
    allowed = set("#.SG")
    for r in rows:
        bad = set(r) - allowed
        if bad:
            raise ValueError(f"unknown layout characters: {sorted(bad)}")
    if "".join(rows).count("S") != 1:
        raise ValueError("layout must contain exactly one start cell 'S'")
    if "".join(rows).count("G") != 1:
        raise ValueError("layout must contain exactly one goal cell 'G'")
    border = rows[0] + rows[-1] + "".join(r[0] + r[-1] for r in rows)
    if set(border) != {"#"}:
        raise ValueError("layout border must be all walls")
    return tuple(rows)


class MazeEnv(GoalEnv):
    def __init__(self, config: MazeConfig):
        self.config = config
        rows = parse_layout("\n".join(config.layout))
        self.height = len(rows)
        self.width = len(rows[0])
        self._wall = np.array([[c == "#" for c in r] for r in rows], dtype=bool)
        self._start = self._find(rows, "S")
        self._default_goal = self._find(rows, "G")
        self._free_cells = [
            (cx, cy)
            for cy in range(self.height)
            for cx in range(self.width)
            if not self._wall[cy, cx]
        ]
        self.spec = EnvSpec(action_count=8, horizon=config.horizon, feature_dim=6, goal_dim=2)
        self.value_scale = 1.0 / config.horizon
        c = config
        self._accel_vecs = [
            (c.accel * math.cos(k * math.pi / 4.0), c.accel * math.sin(k * math.pi / 4.0))
            for k in range(8)
        ]
        self._goal: Optional[tuple] = None

    @staticmethod
    def _find(rows, ch) -> tuple[int, int]:
        for cy, row in enumerate(rows):
            cx = row.find(ch)
            if cx >= 0:
                return (cx, cy)
        raise ValueError(f"cell {ch!r} not found")

    def _cell_center(self, cell) -> tuple[float, float]:
        return (cell[0] + 0.5, cell[1] + 0.5)

    def _is_wall_at(self, x: float, y: float) -> bool:
        cx, cy = int(math.floor(x)), int(math.floor(y))
        if not (0 <= cx < self.width and 0 <= cy < self.height):
            return True
        return bool(self._wall[cy, cx])

    def reset(self, rng, goal_override=None):
        if goal_override is not None:
            goal = self._validate_goal(goal_override)
        elif self.config.random_goal:
            start_cell = self._start
            candidates = [c for c in self._free_cells if c != start_cell]
            goal = self._cell_center(candidates[int(rng.integers(len(candidates)))])
        else:
            goal = self._cell_center(self._default_goal)
        self._goal = goal
        x, y = self._cell_center(self._start)
        state = (x, y, 0.0, 0.0, 0, False)
        return GoalObservation(state, (x, y), goal)

    def _validate_goal(self, goal) -> tuple[float, float]:
        if len(goal) != 2:
            raise ValueError("maze goals are 2-D positions")
        gx, gy = float(goal[0]), float(goal[1])
        if self._is_wall_at(gx, gy):
            raise ValueError(f"goal ({gx}, {gy}) lies inside a wall")
        return (gx, gy)

    def step(self, state, action):
        if self.is_terminal(state):
            raise ValueError("cannot step a terminal state")
        if not 0 <= action < 8:
            raise ValueError(f"action {action} out of range")
        x, y, vx, vy, t, _ = state
        c = self.config
        ax, ay = self._accel_vecs[action]
        nvx = c.damping * vx + ax * c.dt
        nvy = c.damping * vy + ay * c.dt
        speed = math.hypot(nvx, nvy)
        if speed > c.max_speed:
            scale = c.max_speed / speed
            nvx *= scale
            nvy *= scale
        nx, ny, nvx, nvy = self._move(x, y, nvx, nvy, c.dt)
        reward, success = self.compute_reward((nx, ny), self._goal)
        next_state = (nx, ny, nvx, nvy, t + 1, success)
        obs = GoalObservation(next_state, (nx, ny), self._goal)
        terminal = success or t + 1 >= self.spec.horizon
        return StepResult(obs, reward, terminal, success)

    def _move(self, x, y, vx, vy, dt):
        """Axis-separated motion with wall clipping (step < one cell)."""
        nx = x + vx * dt
        if self._is_wall_at(nx, y):
            if vx > 0:
                nx = math.floor(nx) - _WALL_EPS
            else:
                nx = math.ceil(nx) + _WALL_EPS
            vx = 0.0
        ny = y + vy * dt
        if self._is_wall_at(nx, ny):
            if vy > 0:
                ny = math.floor(ny) - _WALL_EPS
            else:
                ny = math.ceil(ny) + _WALL_EPS
            vy = 0.0
        return nx, ny, vx, vy

    def compute_reward(self, achieved, desired):
        if len(achieved) != 2 or len(desired) != 2:
            raise ValueError("maze goals are 2-D positions")
        dist = math.hypot(achieved[0] - desired[0], achieved[1] - desired[1])
        success = dist <= self.config.success_radius
        return (0.0 if success else -1.0), success

    def legal_actions(self, state):
        # walls are handled by collision, not by masking
        if self.is_terminal(state):
            raise ValueError("no legal actions in a terminal state")
        return np.ones(8, dtype=bool)

    def achieved_goal(self, state):
        return (state[0], state[1])

    def is_terminal(self, state):
        return state[5] or state[4] >= self.spec.horizon

    def encode(self, obs):
        x, y, vx, vy, _, _ = obs.state
        gx, gy = obs.desired_goal
        return np.asarray([x, y, vx, vy, gx, gy], dtype=np.float64)

    def goal_distance(self, achieved, desired):
        return math.hypot(achieved[0] - desired[0], achieved[1] - desired[1])
