"""Simulated human labeler: ranks trajectories by return under a hidden task.

The deterministic ranker reproduces how the simulation study labels
preferences; the stochastic labeler draws from the Bradley-Terry model the
human is assumed to follow.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from .preferences import bt_probability
from .rewards import RewardWeights, TaskVector, trajectory_return
from .simulate import Trajectory


@dataclass(frozen=True)
class GroundTruthTask:
    """A named hidden intent: the omega* a method is judged against."""

    name: str
    omega_star: TaskVector

    def __post_init__(self) -> None:
        if not self.omega_star.is_one_hot_gait():
            raise ValueError(f"ground truth for {self.name!r} must have a one-hot gait")
        if self.omega_star != self.omega_star.clamped():
            raise ValueError(f"ground truth for {self.name!r} is out of range")


def load_ground_truth_tasks(path: str | Path | None = None) -> list[GroundTruthTask]:
    """Load ground-truth fixtures: [{name, omega_star: [5 numbers]}, ...].

    The shipped fixture covers the five emotive task names; its omega*
    values are configuration, not measured data.
    """
    if path is None:
        text = resources.files("gaitpref.fixtures").joinpath("ground_truth_tasks.json").read_text()
    else:
        text = Path(path).read_text()
    return [
        GroundTruthTask(item["name"], TaskVector.from_array(item["omega_star"]))
        for item in json.loads(text)
    ]


def oracle_rank(
    trajectories: Sequence[Trajectory],
    truth: GroundTruthTask,
    weights: RewardWeights = RewardWeights(),
) -> list[int]:
    """Indices of the trajectories sorted by descending return under omega*.

    Ties keep the original order, so equal trajectories never swap.
    """
    if len(trajectories) < 2:
        raise ValueError(f"ranking needs at least 2 trajectories, got {len(trajectories)}")
    returns = np.array([trajectory_return(t, truth.omega_star, weights) for t in trajectories])
    return [int(i) for i in np.argsort(-returns, kind="stable")]


def stochastic_label(return_a: float, return_b: float, seed: int = 0) -> int:
    """Bradley-Terry draw: label 1 with probability sigma(return_a - return_b)."""
    p = bt_probability(return_a, return_b)
    rng = np.random.default_rng(seed)
    return 1 if rng.uniform() < p else 2
