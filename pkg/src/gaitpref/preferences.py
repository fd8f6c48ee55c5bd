"""Bradley-Terry preference learning over trajectory sub-segments.

A ranking of n trajectories yields C(n, 2) ordered pairs; assuming
preferences also hold over length-k slices, each pair expands into the
cross product of its sub-segments. The task vector is then fit by
minimizing the binary cross-entropy between the observed labels and the
Bradley-Terry probabilities implied by segment returns.

Loss and gradient are evaluated through per-segment sufficient statistics
(sums of v, v^2, rho, rho^2 and gait match fractions), which reproduce the
per-step reward sums exactly because the reward factors are quadratic or
linear in the state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .gaits import DEFAULT_DUTY, match_fraction_matrix
from .rewards import (
    GAIT_WEIGHT_RANGE,
    PITCH_RANGE,
    RewardWeights,
    TaskVector,
    VELOCITY_RANGE,
)
from .simulate import Trajectory

DEFAULT_SEGMENT_LENGTH = 20
DEFAULT_COMPARISON_CAP = 2000

_CLAMP_LO = np.array([VELOCITY_RANGE[0], PITCH_RANGE[0]] + [GAIT_WEIGHT_RANGE[0]] * 3)
_CLAMP_HI = np.array([VELOCITY_RANGE[1], PITCH_RANGE[1]] + [GAIT_WEIGHT_RANGE[1]] * 3)


class EmptyDatasetError(ValueError):
    """Raised when a loss is requested over zero comparisons."""


class FitDivergedError(RuntimeError):
    """Raised when the preference loss becomes non-finite during descent."""

    def __init__(self, iteration: int):
        super().__init__(f"preference fit diverged at iteration {iteration}")
        self.iteration = iteration


@dataclass(frozen=True, slots=True)
class SegmentRef:
    """A length-k slice [start, start+length) of one trajectory."""

    trajectory_id: str
    start: int
    length: int

    def __post_init__(self) -> None:
        if self.length < 1:
            raise ValueError(f"segment length must be at least 1, got {self.length}")
        if self.start < 0:
            raise ValueError(f"segment start must be nonnegative, got {self.start}")


@dataclass(frozen=True, slots=True)
class Comparison:
    """Ordered sub-segment pair with label 1 (first preferred) or 2."""

    first: SegmentRef
    second: SegmentRef
    label: int

    def __post_init__(self) -> None:
        if self.label not in (1, 2):
            raise ValueError(f"label must be 1 or 2, got {self.label}")
        if self.first.trajectory_id == self.second.trajectory_id:
            raise ValueError("a comparison must reference two different trajectories")


@dataclass
class PreferenceDataset:
    """Sub-segment comparisons plus the trajectories their refs resolve against."""

    comparisons: list[Comparison]
    trajectories: dict[str, Trajectory]

    def __post_init__(self) -> None:
        for comp in self.comparisons:
            for ref in (comp.first, comp.second):
                traj = self.trajectories.get(ref.trajectory_id)
                if traj is None:
                    raise ValueError(f"segment references unknown trajectory {ref.trajectory_id!r}")
                if ref.start + ref.length > len(traj):
                    raise ValueError(
                        f"segment [{ref.start}, {ref.start + ref.length}) exceeds "
                        f"trajectory {ref.trajectory_id!r} of length {len(traj)}"
                    )

    def __len__(self) -> int:
        return len(self.comparisons)


@dataclass(frozen=True)
class FitConfig:
    """Gradient-descent settings for the preference fit.

    init=None means start from the component-wise mean of the candidate
    task vectors behind the dataset's trajectories. comparison_cap and seed
    govern sub-segment subsampling during dataset construction.
    """

    learning_rate: float = 0.05
    iterations: int = 500
    init: TaskVector | None = None
    comparison_cap: int | None = DEFAULT_COMPARISON_CAP
    seed: int = 0

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.iterations < 1:
            raise ValueError(f"iterations must be at least 1, got {self.iterations}")


@dataclass(frozen=True)
class FitResult:
    """Best iterate of the descent plus the loss recorded at every iterate."""

    omega: TaskVector
    loss_trace: list[float]


def ranking_to_pairs(ranking: Sequence[str]) -> list[tuple[str, str]]:
    """All C(n, 2) ordered (preferred, unpreferred) pairs from a ranking.

    The ranking lists trajectory ids best first. Raises on duplicates or
    fewer than two entries.
    """
    if len(ranking) < 2:
        raise ValueError(f"a ranking needs at least 2 trajectories, got {len(ranking)}")
    if len(set(ranking)) != len(ranking):
        raise ValueError("ranking contains duplicate trajectory ids")
    return [
        (ranking[i], ranking[j])
        for i in range(len(ranking))
        for j in range(i + 1, len(ranking))
    ]


def expand_subsegments(
    pairs: Sequence[tuple[str, str]],
    trajectories: Mapping[str, Trajectory],
    k: int = DEFAULT_SEGMENT_LENGTH,
    cap: int | None = None,
    seed: int = 0,
) -> PreferenceDataset:
    """Cross sub-segments of each trajectory pair into labeled comparisons.

    Each trajectory of length T contributes the T - k segments starting at
    0 .. T-k-1, so an uncapped pair yields (T - k)^2 comparisons, every one
    labeled 1 with the preferred trajectory's segment first. If the total
    exceeds cap, a uniform subsample of exactly cap comparisons is drawn
    with the given seed.
    """
    if not pairs:
        raise ValueError("no trajectory pairs to expand")
    seg_counts: list[tuple[int, int]] = []
    for pref_id, unpref_id in pairs:
        counts = []
        for tid in (pref_id, unpref_id):
            traj = trajectories.get(tid)
            if traj is None:
                raise ValueError(f"pair references unknown trajectory {tid!r}")
            if k >= len(traj):
                raise ValueError(f"segment length k={k} must be below trajectory length {len(traj)}")
            counts.append(len(traj) - k)
        seg_counts.append((counts[0], counts[1]))

    blocks = np.array([a * b for a, b in seg_counts], dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(blocks)])
    total = int(offsets[-1])

    def make(pair_idx: int, within: int) -> Comparison:
        pref_id, unpref_id = pairs[pair_idx]
        start_a, start_b = divmod(within, seg_counts[pair_idx][1])
        return Comparison(
            first=SegmentRef(pref_id, start_a, k),
            second=SegmentRef(unpref_id, start_b, k),
            label=1,
        )

    if cap is None or total <= cap:
        comparisons = [
            make(pair_idx, within)
            for pair_idx in range(len(pairs))
            for within in range(int(blocks[pair_idx]))
        ]
    else:
        rng = np.random.default_rng(seed)
        chosen = np.sort(rng.choice(total, size=cap, replace=False))
        pair_indices = np.searchsorted(offsets, chosen, side="right") - 1
        comparisons = [
            make(int(p), int(i - offsets[p])) for p, i in zip(pair_indices, chosen)
        ]

    used = {tid for pair in pairs for tid in pair}
    return PreferenceDataset(
        comparisons=comparisons,
        trajectories={tid: trajectories[tid] for tid in used},
    )


def bt_probability(return_a: float, return_b: float) -> float:
    """Bradley-Terry probability that segment a beats segment b.

    Logistic of the return difference, computed without overflow for
    differences up to at least 1e4 in magnitude.
    """
    d = return_a - return_b
    if d >= 0:
        return 1.0 / (1.0 + math.exp(-d))
    e = math.exp(d)
    return e / (1.0 + e)


@dataclass(frozen=True)
class _SideStats:
    """Per-comparison sufficient statistics for one side's segment return."""

    k: np.ndarray
    s_v: np.ndarray
    s_v2: np.ndarray
    s_rho: np.ndarray
    s_rho2: np.ndarray
    m: np.ndarray  # (n, 3) summed match fractions per gait


@dataclass(frozen=True)
class _ComparisonFeatures:
    first: _SideStats
    second: _SideStats
    target: np.ndarray  # 1.0 where label == 1 else 0.0


def _trajectory_cumsums(traj: Trajectory) -> dict[str, np.ndarray]:
    match = match_fraction_matrix(traj.contacts, traj.phases, DEFAULT_DUTY)

    def cum(x: np.ndarray) -> np.ndarray:
        return np.concatenate([np.zeros(x.shape[1:], dtype=float)[None], np.cumsum(x, axis=0)])

    return {
        "v": cum(traj.vs),
        "v2": cum(traj.vs**2),
        "rho": cum(traj.rhos),
        "rho2": cum(traj.rhos**2),
        "m": cum(match),
    }


def _build_features(dataset: PreferenceDataset) -> _ComparisonFeatures:
    if not dataset.comparisons:
        raise EmptyDatasetError("preference dataset has no comparisons")
    cums = {tid: _trajectory_cumsums(traj) for tid, traj in dataset.trajectories.items()}

    def side(refs: list[SegmentRef]) -> _SideStats:
        n = len(refs)
        out = {name: np.empty(n) for name in ("k", "s_v", "s_v2", "s_rho", "s_rho2")}
        m = np.empty((n, 3))
        for i, ref in enumerate(refs):
            c = cums[ref.trajectory_id]
            lo, hi = ref.start, ref.start + ref.length
            out["k"][i] = ref.length
            out["s_v"][i] = c["v"][hi] - c["v"][lo]
            out["s_v2"][i] = c["v2"][hi] - c["v2"][lo]
            out["s_rho"][i] = c["rho"][hi] - c["rho"][lo]
            out["s_rho2"][i] = c["rho2"][hi] - c["rho2"][lo]
            m[i] = c["m"][hi] - c["m"][lo]
        return _SideStats(m=m, **out)

    return _ComparisonFeatures(
        first=side([c.first for c in dataset.comparisons]),
        second=side([c.second for c in dataset.comparisons]),
        target=np.array([1.0 if c.label == 1 else 0.0 for c in dataset.comparisons]),
    )


def _side_returns(stats: _SideStats, omega: np.ndarray, alphas: np.ndarray) -> np.ndarray:
    r = -alphas[0] * (stats.k * omega[0] ** 2 - 2.0 * omega[0] * stats.s_v + stats.s_v2)
    r -= alphas[1] * (stats.k * omega[1] ** 2 - 2.0 * omega[1] * stats.s_rho + stats.s_rho2)
    r += stats.m @ (alphas[2:] * omega[2:])
    return r


def _side_return_grads(stats: _SideStats, omega: np.ndarray, alphas: np.ndarray) -> np.ndarray:
    n = stats.k.shape[0]
    g = np.empty((n, 5))
    g[:, 0] = -2.0 * alphas[0] * (stats.k * omega[0] - stats.s_v)
    g[:, 1] = -2.0 * alphas[1] * (stats.k * omega[1] - stats.s_rho)
    g[:, 2:] = stats.m * alphas[2:]
    return g


def _logits(feats: _ComparisonFeatures, omega: np.ndarray, alphas: np.ndarray) -> np.ndarray:
    return _side_returns(feats.first, omega, alphas) - _side_returns(feats.second, omega, alphas)


def _loss_from_features(feats: _ComparisonFeatures, omega: np.ndarray, alphas: np.ndarray) -> float:
    delta = _logits(feats, omega, alphas)
    # -[z log sigma(d) + (1-z) log(1 - sigma(d))] in overflow-safe form
    losses = np.logaddexp(0.0, -delta) * feats.target + np.logaddexp(0.0, delta) * (1.0 - feats.target)
    return float(losses.mean())


def _grad_from_features(feats: _ComparisonFeatures, omega: np.ndarray, alphas: np.ndarray) -> np.ndarray:
    delta = _logits(feats, omega, alphas)
    residual = _sigmoid(delta) - feats.target
    dgrad = _side_return_grads(feats.first, omega, alphas) - _side_return_grads(feats.second, omega, alphas)
    return residual @ dgrad / delta.shape[0]


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def bce_loss(dataset: PreferenceDataset, omega: TaskVector, weights: RewardWeights = RewardWeights()) -> float:
    """Mean negative log-likelihood of the labels under the BT model at omega."""
    feats = _build_features(dataset)
    return _loss_from_features(feats, omega.to_array(), np.asarray(weights.alphas))


def bce_loss_grad(dataset: PreferenceDataset, omega: TaskVector, weights: RewardWeights = RewardWeights()) -> np.ndarray:
    """Exact gradient of bce_loss w.r.t. the 5 task-vector components."""
    feats = _build_features(dataset)
    return _grad_from_features(feats, omega.to_array(), np.asarray(weights.alphas))


def _default_init(dataset: PreferenceDataset) -> TaskVector:
    stacked = np.stack([t.source_omega.to_array() for t in dataset.trajectories.values()])
    return TaskVector.from_array(stacked.mean(axis=0))


def fit(
    dataset: PreferenceDataset,
    weights: RewardWeights = RewardWeights(),
    config: FitConfig = FitConfig(),
) -> FitResult:
    """Full-batch projected gradient descent on the preference BCE.

    Each update clamps the iterate back into the valid task-vector box. The
    returned omega is the iterate with the lowest recorded loss; the trace
    holds the loss at the init and after every update (iterations + 1
    entries), so the result never scores worse than the init.

    Raises:
        FitDivergedError: if the loss goes non-finite, naming the iteration.
    """
    feats = _build_features(dataset)
    alphas = np.asarray(weights.alphas)
    init = config.init if config.init is not None else _default_init(dataset)
    w = np.clip(init.to_array(), _CLAMP_LO, _CLAMP_HI)

    trace: list[float] = []
    best_w = w.copy()
    best_loss = math.inf
    for iteration in range(config.iterations + 1):
        loss = _loss_from_features(feats, w, alphas)
        if not math.isfinite(loss):
            raise FitDivergedError(iteration)
        trace.append(loss)
        if loss < best_loss:
            best_loss = loss
            best_w = w.copy()
        if iteration == config.iterations:
            break
        grad = _grad_from_features(feats, w, alphas)
        w = np.clip(w - config.learning_rate * grad, _CLAMP_LO, _CLAMP_HI)

    return FitResult(omega=TaskVector.from_array(best_w), loss_trace=trace)


def learn_from_ranking(
    ranking: Sequence[str],
    trajectories: Mapping[str, Trajectory],
    weights: RewardWeights = RewardWeights(),
    config: FitConfig = FitConfig(),
    k: int = DEFAULT_SEGMENT_LENGTH,
) -> FitResult:
    """Ranking -> pairwise expansion -> sub-segment dataset -> fitted omega."""
    pairs = ranking_to_pairs(ranking)
    dataset = expand_subsegments(pairs, trajectories, k=k, cap=config.comparison_cap, seed=config.seed)
    return fit(dataset, weights, config)


def dataset_to_json(dataset: PreferenceDataset) -> dict:
    """Portable form of a dataset: segment refs, labels, and trajectory ids."""
    return {
        "comparisons": [
            {
                "first": {"trajectory_id": c.first.trajectory_id, "start": c.first.start, "length": c.first.length},
                "second": {"trajectory_id": c.second.trajectory_id, "start": c.second.start, "length": c.second.length},
                "label": c.label,
            }
            for c in dataset.comparisons
        ],
        "trajectory_ids": sorted(dataset.trajectories),
    }


def dataset_from_json(record: dict, trajectories: Mapping[str, Trajectory]) -> PreferenceDataset:
    """Rebuild a dataset from its JSON form plus separately stored trajectories."""
    missing = [tid for tid in record["trajectory_ids"] if tid not in trajectories]
    if missing:
        raise ValueError(f"missing trajectories for ids {missing}")
    comparisons = [
        Comparison(
            first=SegmentRef(**c["first"]),
            second=SegmentRef(**c["second"]),
            label=int(c["label"]),
        )
        for c in record["comparisons"]
    ]
    return PreferenceDataset(
        comparisons=comparisons,
        trajectories={tid: trajectories[tid] for tid in record["trajectory_ids"]},
    )
