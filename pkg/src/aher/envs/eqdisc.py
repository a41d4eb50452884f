"""Equation discovery: derive a grammar expression that fits a measurement set.

States are partial leftmost derivations; actions are grammar rule indices.
The desired goal is the episode's measurement dataset. The achieved goal of a
terminal state with a complete derivation is the response of the derived
expression (scored against whatever dataset it is compared to); incomplete
derivations carry a sentinel that can never satisfy the goal predicate, so
"future" relabeling is unavailable here by construction.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .. import grammar as gr
from .core import EnvSpec, GoalEnv, GoalObservation, StepResult


@dataclass(frozen=True)
class EqAchieved:
    """Achieved-goal handle: the derived expression, or None while incomplete."""

    expr: Optional[gr.Expression]

    @property
    def complete(self) -> bool:
        return self.expr is not None


INCOMPLETE = EqAchieved(None)


@dataclass(frozen=True)
class EqDiscConfig:
    grammar_text: str
    n_points: int = 20
    x_range: tuple[float, float] = (-2.0, 2.0)
    nrmse_threshold: float = 1e-6
    max_rules: int = 10
    # ground-truth targets as leftmost rule-index sequences
    target_derivations: tuple[tuple[int, ...], ...] = ()

    def __post_init__(self):
        if self.nrmse_threshold <= 0:
            raise ValueError("nrmse_threshold must be positive")
        if self.max_rules < 1:
            raise ValueError("max_rules must be positive")
        if not self.target_derivations:
            raise ValueError("target pool must not be empty")


class EqDiscEnv(GoalEnv):
    future_goals_usable = False

    def __init__(self, config: EqDiscConfig):
        self.config = config
        self.grammar = gr.parse_grammar(config.grammar_text)
        self.targets: list[gr.Expression] = []
        for seq in config.target_derivations:
            d = gr.Derivation.initial(self.grammar)
            for idx in seq:
                d = gr.apply_rule(d, idx)
            if not d.complete:
                raise ValueError(f"target derivation {seq} is incomplete")
            if len(seq) > config.max_rules:
                raise ValueError(f"target derivation {seq} exceeds max_rules")
            self.targets.append(gr.to_expression(d))
        n_rules = self.grammar.rule_count
        feature_dim = config.max_rules * n_rules + config.n_points + 2
        self.spec = EnvSpec(
            action_count=n_rules,
            horizon=config.max_rules,
            feature_dim=feature_dim,
            goal_dim=config.n_points,
        )
        self.value_scale = 1.0  # terminal 0/1 reward is already in range
        self._goal: Optional[gr.Dataset] = None
        self._target_index: Optional[int] = None

    def reset(self, rng, goal_override=None):
        if goal_override is not None:
            goal = self._validate_goal(goal_override)
            self._target_index = None
        else:
            self._target_index = int(rng.integers(len(self.targets)))
            goal = gr.sample_dataset(
                self.targets[self._target_index],
                self.config.n_points,
                self.config.x_range,
                rng,
            )
        self._goal = goal
        state = gr.Derivation.initial(self.grammar)
        return GoalObservation(state, self.achieved_goal(state), goal)

    def _validate_goal(self, goal) -> gr.Dataset:
        if not isinstance(goal, gr.Dataset):
            raise ValueError("equation-discovery goals are Dataset instances")
        if len(goal) != self.config.n_points:
            raise ValueError(
                f"goal dataset has {len(goal)} points, expected {self.config.n_points}"
            )
        return goal

    def step(self, state: gr.Derivation, action):
        if self.is_terminal(state):
            raise ValueError("cannot step a terminal state")
        next_state = gr.apply_rule(state, action)  # raises on inapplicable rules
        achieved = self.achieved_goal(next_state)
        terminal = self.is_terminal(next_state)
        reward, success = self.compute_reward(achieved, self._goal)
        obs = GoalObservation(next_state, achieved, self._goal)
        return StepResult(obs, reward, terminal, success)

    def compute_reward(self, achieved: EqAchieved, desired: gr.Dataset):
        if not isinstance(achieved, EqAchieved):
            raise ValueError("achieved goal must be an EqAchieved handle")
        if not achieved.complete:
            return 0.0, False
        err = gr.nrmse(achieved.expr, desired)
        success = err <= self.config.nrmse_threshold
        return (1.0 if success else 0.0), success

    def legal_actions(self, state: gr.Derivation):
        if self.is_terminal(state):
            raise ValueError("no legal actions in a terminal state")
        return gr.legal_rule_mask(state)

    def achieved_goal(self, state: gr.Derivation) -> EqAchieved:
        if not state.complete:
            return INCOMPLETE
        return EqAchieved(gr.to_expression(state))

    def is_terminal(self, state: gr.Derivation):
        return state.complete or len(state.applied_rules) >= self.config.max_rules

    def encode(self, obs):
        cfg = self.config
        n_rules = self.grammar.rule_count
        hist = np.zeros(cfg.max_rules * n_rules, dtype=np.float64)
        for slot, rule_idx in enumerate(obs.state.applied_rules):
            hist[slot * n_rules + rule_idx] = 1.0
        ys = obs.desired_goal.ys
        mean = float(np.mean(ys))
        var = float(np.var(ys))
        std = np.sqrt(var)
        if std < 1e-12:
            std = 1.0
        normed = (ys - mean) / std
        return np.concatenate([hist, normed, [mean, var]])

    def goal_distance(self, achieved: EqAchieved, desired: gr.Dataset):
        if not achieved.complete:
            return float("inf")
        return gr.nrmse(achieved.expr, desired)

    def relabel_goal(self, state: gr.Derivation, rng, dataset_change=False):
        """Dataset to relabel toward: the terminal expression's response on
        the episode's x points, or on freshly sampled x points when dataset
        changes are on. None when the derivation is incomplete or the
        expression has no finite response to offer."""
        if not state.complete:
            return None
        expr = gr.to_expression(state)
        if dataset_change:
            try:
                return gr.sample_dataset(expr, self.config.n_points, self.config.x_range, rng)
            except ValueError:
                return None
        ys = gr.evaluate_array(expr, self._goal.xs)
        if not np.all(np.isfinite(ys)):
            return None
        return gr.Dataset(self._goal.xs, ys)

    def target_expression(self, index: int) -> gr.Expression:
        return self.targets[index]
