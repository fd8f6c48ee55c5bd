"""Analytic trajectory generator standing in for the task-conditioned policy.

Given a deployed (one-hot gait) task vector, produces a trajectory whose
velocity and pitch relax exponentially toward the commanded targets while
the feet follow the commanded gait's contact pattern. Deterministic per
seed so experiments are exactly reproducible.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .gaits import DEFAULT_DUTY, DEFAULT_FREQ_HZ, pattern_matrix
from .rewards import TaskVector, TimeStep

DEFAULT_T = 100
DEFAULT_DT = 0.02
DEFAULT_TAU_LAG = 0.2
DEFAULT_NOISE_SIGMA = 0.02


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Time-indexed gait states plus the deployed command that produced them."""

    vs: np.ndarray
    rhos: np.ndarray
    contacts: np.ndarray
    phases: np.ndarray
    dt: float
    source_omega: TaskVector
    id: str

    def __len__(self) -> int:
        return self.vs.shape[0]

    @property
    def steps(self) -> list[TimeStep]:
        return [self.step(t) for t in range(len(self))]

    def step(self, t: int) -> TimeStep:
        return TimeStep(
            v=float(self.vs[t]),
            rho=float(self.rhos[t]),
            contacts=tuple(bool(c) for c in self.contacts[t]),
            phase=float(self.phases[t]),
        )

    def segment_steps(self, start: int, length: int) -> list[TimeStep]:
        if start < 0 or length < 1 or start + length > len(self):
            raise ValueError(f"segment [{start}, {start + length}) out of range for T={len(self)}")
        return [self.step(t) for t in range(start, start + length)]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Trajectory):
            return NotImplemented
        return (
            self.id == other.id
            and self.dt == other.dt
            and self.source_omega == other.source_omega
            and np.array_equal(self.vs, other.vs)
            and np.array_equal(self.rhos, other.rhos)
            and np.array_equal(self.contacts, other.contacts)
            and np.array_equal(self.phases, other.phases)
        )


def _default_id(omega: TaskVector, T: int, dt: float, noise_sigma: float, seed: int) -> str:
    key = repr((omega.to_list(), T, dt, noise_sigma, seed)).encode()
    return "rollout-" + hashlib.sha256(key).hexdigest()[:12]


def rollout(
    omega: TaskVector,
    T: int = DEFAULT_T,
    dt: float = DEFAULT_DT,
    noise_sigma: float = 0.0,
    seed: int = 0,
    freq: float = DEFAULT_FREQ_HZ,
    duty: float = DEFAULT_DUTY,
    tau_lag: float = DEFAULT_TAU_LAG,
    traj_id: str | None = None,
) -> Trajectory:
    """Roll out the surrogate policy for a deployed command.

    Velocity and pitch start at 0 and decay exponentially toward the targets
    with time constant tau_lag; i.i.d. Gaussian noise of std noise_sigma is
    added on top. Contacts follow the commanded gait's pattern with phase
    advancing freq*dt per step from 0.

    Raises:
        ValueError: if omega's gait weights are not one-hot (project first)
            or T < 1.
    """
    if T < 1:
        raise ValueError(f"T must be at least 1, got {T}")
    if not omega.is_one_hot_gait():
        raise ValueError(
            f"rollout requires a deployment-projected command, got gait weights {omega.gait_weights}"
        )
    gait = omega.gait_name()
    t = np.arange(T, dtype=float)
    decay = np.exp(-t * dt / tau_lag)
    vs = omega.velocity * (1.0 - decay)
    rhos = omega.pitch * (1.0 - decay)
    if noise_sigma > 0.0:
        rng = np.random.default_rng(seed)
        vs = vs + rng.normal(0.0, noise_sigma, T)
        rhos = rhos + rng.normal(0.0, noise_sigma, T)
    phases = (t * freq * dt) % 1.0
    contacts = pattern_matrix(gait, phases, duty)
    return Trajectory(
        vs=vs,
        rhos=rhos,
        contacts=contacts,
        phases=phases,
        dt=dt,
        source_omega=omega,
        id=traj_id or _default_id(omega, T, dt, noise_sigma, seed),
    )


def serialize_trajectory(traj: Trajectory) -> dict:
    """Wire record: {id, dt, source_omega, steps:[{v, rho, contacts, phase}]}.

    Contacts serialize as 0/1 ints in foot order (FL, FR, RL, RR). Values
    survive a JSON round-trip bit-exactly.
    """
    return {
        "id": traj.id,
        "dt": traj.dt,
        "source_omega": traj.source_omega.to_list(),
        "steps": [
            {
                "v": float(traj.vs[t]),
                "rho": float(traj.rhos[t]),
                "contacts": [int(c) for c in traj.contacts[t]],
                "phase": float(traj.phases[t]),
            }
            for t in range(len(traj))
        ],
    }


def deserialize_trajectory(record: dict) -> Trajectory:
    steps = record["steps"]
    if not steps:
        raise ValueError("trajectory record has no steps")
    return Trajectory(
        vs=np.array([s["v"] for s in steps], dtype=float),
        rhos=np.array([s["rho"] for s in steps], dtype=float),
        contacts=np.array([s["contacts"] for s in steps], dtype=bool),
        phases=np.array([s["phase"] for s in steps], dtype=float),
        dt=float(record["dt"]),
        source_omega=TaskVector.from_array(record["source_omega"]),
        id=str(record["id"]),
    )
