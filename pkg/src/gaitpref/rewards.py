"""Factored differentiable reward over the 5-dim task vector.

The task vector packs (target velocity, target pitch, trot weight,
pace weight, bound weight). The per-step reward is a weighted sum of five
factors: negated squared tracking errors for velocity and pitch, plus one
contact-pattern match term per gait, each scaled by its gait weight. All
factors are differentiable in the task vector, which is what lets a
preference objective be minimized by plain gradient descent.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .gaits import DEFAULT_DUTY, GAIT_NAMES, match_fraction

VELOCITY_RANGE = (0.0, 1.5)
PITCH_RANGE = (-0.4, 0.4)
GAIT_WEIGHT_RANGE = (0.0, 1.0)

DEFAULT_ALPHAS = (1.0, 1.0, 0.5, 0.5, 0.5)


class EmptyTrajectoryError(ValueError):
    """Raised when a return is requested over zero steps."""


@dataclass(frozen=True)
class TaskVector:
    """Gait command: target velocity [m/s], target pitch [rad], 3 gait weights.

    Gait weights are unconstrained reals while being learned; `clamped()`
    pulls all components back into their valid ranges and
    `project_for_deployment` additionally one-hots the gait slots.
    """

    velocity: float
    pitch: float
    gait_weights: tuple[float, float, float]

    def __post_init__(self) -> None:
        if len(self.gait_weights) != 3:
            raise ValueError("gait_weights must have exactly 3 entries")
        object.__setattr__(self, "velocity", float(self.velocity))
        object.__setattr__(self, "pitch", float(self.pitch))
        object.__setattr__(self, "gait_weights", tuple(float(w) for w in self.gait_weights))

    @classmethod
    def from_array(cls, values: Sequence[float]) -> "TaskVector":
        values = [float(v) for v in values]
        if len(values) != 5:
            raise ValueError(f"task vector needs 5 numbers, got {len(values)}")
        return cls(values[0], values[1], (values[2], values[3], values[4]))

    def to_array(self) -> np.ndarray:
        return np.array([self.velocity, self.pitch, *self.gait_weights], dtype=float)

    def to_list(self) -> list[float]:
        """Wire layout: [velocity, pitch, trot, pace, bound]."""
        return [self.velocity, self.pitch, *self.gait_weights]

    def clamped(self) -> "TaskVector":
        lo_g, hi_g = GAIT_WEIGHT_RANGE
        return TaskVector(
            min(max(self.velocity, VELOCITY_RANGE[0]), VELOCITY_RANGE[1]),
            min(max(self.pitch, PITCH_RANGE[0]), PITCH_RANGE[1]),
            tuple(min(max(w, lo_g), hi_g) for w in self.gait_weights),
        )

    def is_one_hot_gait(self, tol: float = 1e-9) -> bool:
        ws = self.gait_weights
        return (
            sum(abs(w - 1.0) < tol for w in ws) == 1
            and sum(abs(w) < tol for w in ws) == 2
        )

    def gait_name(self) -> str:
        """Name of the dominant gait (lowest index wins ties)."""
        return GAIT_NAMES[int(np.argmax(self.gait_weights))]


@dataclass(frozen=True)
class RewardWeights:
    """Fixed positive scale per reward factor; learning never touches these."""

    alphas: tuple[float, float, float, float, float] = DEFAULT_ALPHAS

    def __post_init__(self) -> None:
        if len(self.alphas) != 5:
            raise ValueError("alphas must have exactly 5 entries")
        if any(a <= 0 for a in self.alphas):
            raise ValueError(f"alphas must all be positive, got {self.alphas}")
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))


@dataclass(frozen=True)
class TimeStep:
    """One instant of gait state: base velocity, pitch, foot contacts, phase."""

    v: float
    rho: float
    contacts: tuple[bool, bool, bool, bool]
    phase: float

    def __post_init__(self) -> None:
        if len(self.contacts) != 4:
            raise ValueError("contacts must have exactly 4 flags")
        if not 0.0 <= self.phase < 1.0:
            raise ValueError(f"phase must lie in [0, 1), got {self.phase}")
        object.__setattr__(self, "contacts", tuple(bool(c) for c in self.contacts))


def step_reward(step: TimeStep, omega: TaskVector, weights: RewardWeights = RewardWeights()) -> float:
    """Per-step reward: tracking factors plus gait-weighted pattern matches.

    Tracking factors are negated squared errors so that larger is better and
    all alphas stay positive. Each gait factor is the gait weight times the
    fraction of feet matching that gait's pattern at the step's phase.
    """
    a = weights.alphas
    r = -a[0] * (omega.velocity - step.v) ** 2
    r -= a[1] * (omega.pitch - step.rho) ** 2
    for i in range(3):
        m = match_fraction(step.contacts, GAIT_NAMES[i], step.phase, DEFAULT_DUTY)
        r += a[2 + i] * omega.gait_weights[i] * m
    return r


def step_reward_grad(step: TimeStep, omega: TaskVector, weights: RewardWeights = RewardWeights()) -> np.ndarray:
    """Exact gradient of step_reward w.r.t. the 5 task-vector components."""
    a = weights.alphas
    grad = np.empty(5, dtype=float)
    grad[0] = -2.0 * a[0] * (omega.velocity - step.v)
    grad[1] = -2.0 * a[1] * (omega.pitch - step.rho)
    for i in range(3):
        grad[2 + i] = a[2 + i] * match_fraction(step.contacts, GAIT_NAMES[i], step.phase, DEFAULT_DUTY)
    return grad


def trajectory_return(steps: Iterable[TimeStep], omega: TaskVector, weights: RewardWeights = RewardWeights()) -> float:
    """Sum of step_reward over a trajectory or any of its sub-segments."""
    steps = getattr(steps, "steps", steps)
    total = 0.0
    count = 0
    for step in steps:
        total += step_reward(step, omega, weights)
        count += 1
    if count == 0:
        raise EmptyTrajectoryError("cannot evaluate the return of an empty segment")
    return total


def project_for_deployment(omega: TaskVector) -> TaskVector:
    """Clamp velocity/pitch and one-hot the gait weights at their argmax.

    Ties break toward the lowest index (trot < pace < bound).
    """
    clamped = omega.clamped()
    winner = int(np.argmax(omega.gait_weights))
    one_hot = tuple(1.0 if i == winner else 0.0 for i in range(3))
    return TaskVector(clamped.velocity, clamped.pitch, one_hot)
