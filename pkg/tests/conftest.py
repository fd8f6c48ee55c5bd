"""Shared builders and independent oracles used across the test suite.

The oracles here deliberately take the slow, obvious path (per-step loops,
finite differences) so they stay independent of the vectorized code they
check.
"""

from __future__ import annotations

import math

import numpy as np
import pytest

from gaitpref.preferences import PreferenceDataset, bt_probability
from gaitpref.rewards import RewardWeights, TaskVector, TimeStep, step_reward, trajectory_return
from gaitpref.simulate import Trajectory, rollout
from gaitpref.gaits import contact_pattern


def perfect_step(omega: TaskVector, phase: float = 0.25) -> TimeStep:
    """A step that tracks omega exactly and walks omega's own gait pattern."""
    return TimeStep(
        v=omega.velocity,
        rho=omega.pitch,
        contacts=contact_pattern(omega.gait_name(), phase),
        phase=phase,
    )


def random_step(rng: np.random.Generator) -> TimeStep:
    return TimeStep(
        v=float(rng.uniform(-0.5, 2.0)),
        rho=float(rng.uniform(-0.6, 0.6)),
        contacts=tuple(bool(b) for b in rng.integers(0, 2, size=4)),
        phase=float(rng.uniform(0.0, 1.0)),
    )


def random_omega(rng: np.random.Generator) -> TaskVector:
    return TaskVector(
        float(rng.uniform(0.0, 1.5)),
        float(rng.uniform(-0.4, 0.4)),
        tuple(float(w) for w in rng.uniform(0.0, 1.0, size=3)),
    )


def random_weights(rng: np.random.Generator) -> RewardWeights:
    return RewardWeights(tuple(float(a) for a in rng.uniform(0.1, 2.0, size=5)))


def segment_return(dataset: PreferenceDataset, ref, omega: TaskVector, weights: RewardWeights) -> float:
    traj = dataset.trajectories[ref.trajectory_id]
    return trajectory_return(traj.segment_steps(ref.start, ref.length), omega, weights)


def naive_bce_loss(dataset: PreferenceDataset, omega: TaskVector, weights: RewardWeights) -> float:
    """Per-comparison loop straight off the loss definition."""
    total = 0.0
    for comp in dataset.comparisons:
        r1 = segment_return(dataset, comp.first, omega, weights)
        r2 = segment_return(dataset, comp.second, omega, weights)
        p = bt_probability(r1, r2)
        total += -math.log(p) if comp.label == 1 else -math.log(1.0 - p)
    return total / len(dataset.comparisons)


def central_difference(func, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Second-order finite-difference gradient of a scalar function."""
    grad = np.empty_like(x)
    for i in range(x.size):
        bumped_up = x.copy()
        bumped_up[i] += h
        bumped_down = x.copy()
        bumped_down[i] -= h
        grad[i] = (func(bumped_up) - func(bumped_down)) / (2.0 * h)
    return grad


@pytest.fixture
def noiseless_trot_trajectory() -> Trajectory:
    omega = TaskVector(1.0, 0.2, (1.0, 0.0, 0.0))
    return rollout(omega, T=100, dt=0.02, noise_sigma=0.0, seed=0)
