"""Periodic foot-contact patterns for the three gait primitives.

Feet are indexed (FL, FR, RL, RR) everywhere. Each gait moves two pairs of
feet in antiphase: trot uses diagonal pairs, pace lateral pairs, bound
front/rear pairs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FOOT_ORDER = ("FL", "FR", "RL", "RR")

GAIT_NAMES = ("trot", "pace", "bound")

# First-half-cycle foot pair per gait; the complementary pair takes the
# second half-cycle.
_PAIR_A = {
    "trot": (0, 3),   # FL + RR
    "pace": (0, 2),   # FL + RL
    "bound": (0, 1),  # FL + FR
}

DEFAULT_FREQ_HZ = 2.0
DEFAULT_DUTY = 0.5


class UnknownGaitError(ValueError):
    """Raised for a gait id outside {trot, pace, bound}."""


@dataclass(frozen=True)
class GaitPattern:
    """A gait primitive with its cycle frequency and stance duty fraction."""

    gait: str
    freq: float = DEFAULT_FREQ_HZ
    duty: float = DEFAULT_DUTY

    def __post_init__(self) -> None:
        if self.gait not in GAIT_NAMES:
            raise UnknownGaitError(f"unknown gait {self.gait!r}")
        if self.freq <= 0:
            raise ValueError(f"freq must be positive, got {self.freq}")
        if not 0.0 < self.duty < 1.0:
            raise ValueError(f"duty must lie in (0, 1), got {self.duty}")


def contact_pattern(gait: str, phase: float, duty: float = DEFAULT_DUTY) -> tuple[bool, bool, bool, bool]:
    """Foot contacts for a gait at a cycle phase in [0, 1).

    Pair A is in stance on [0, duty), pair B on [0.5, 0.5 + duty) mod 1,
    so with duty = 0.5 the pairs split the cycle exactly in half.
    """
    if gait not in _PAIR_A:
        raise UnknownGaitError(f"unknown gait {gait!r}")
    phase = phase % 1.0
    pair_a = _PAIR_A[gait]
    a_stance = phase < duty
    b_stance = (phase - 0.5) % 1.0 < duty
    return tuple(a_stance if foot in pair_a else b_stance for foot in range(4))


def pattern_matrix(gait: str, phases: np.ndarray, duty: float = DEFAULT_DUTY) -> np.ndarray:
    """Vectorized contact_pattern: (T,) phases -> (T, 4) boolean stance flags."""
    if gait not in _PAIR_A:
        raise UnknownGaitError(f"unknown gait {gait!r}")
    phases = np.asarray(phases, dtype=float) % 1.0
    a_stance = phases < duty
    b_stance = (phases - 0.5) % 1.0 < duty
    out = np.empty((phases.shape[0], 4), dtype=bool)
    pair_a = _PAIR_A[gait]
    for foot in range(4):
        out[:, foot] = a_stance if foot in pair_a else b_stance
    return out


def match_fraction(contacts, gait: str, phase: float, duty: float = DEFAULT_DUTY) -> float:
    """Fraction of the 4 feet whose contact flag matches the gait's pattern."""
    pattern = contact_pattern(gait, phase, duty)
    return sum(bool(c) == p for c, p in zip(contacts, pattern)) / 4.0


def match_fraction_matrix(contacts: np.ndarray, phases: np.ndarray, duty: float = DEFAULT_DUTY) -> np.ndarray:
    """Per-step match fractions against all three gaits.

    Args:
        contacts: (T, 4) boolean stance flags.
        phases: (T,) cycle phases.

    Returns:
        (T, 3) array of match fractions, gait columns ordered (trot, pace, bound).
    """
    contacts = np.asarray(contacts, dtype=bool)
    out = np.empty((contacts.shape[0], 3), dtype=float)
    for i, gait in enumerate(GAIT_NAMES):
        out[:, i] = (contacts == pattern_matrix(gait, phases, duty)).mean(axis=1)
    return out
