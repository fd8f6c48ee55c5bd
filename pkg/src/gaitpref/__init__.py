"""Few-shot inference of quadruped gait parameters from trajectory rankings."""

from .gaits import GaitPattern, contact_pattern, match_fraction
from .rewards import (
    RewardWeights,
    TaskVector,
    TimeStep,
    project_for_deployment,
    step_reward,
    step_reward_grad,
    trajectory_return,
)
from .simulate import Trajectory, deserialize_trajectory, rollout, serialize_trajectory
from .preferences import (
    Comparison,
    FitConfig,
    FitResult,
    PreferenceDataset,
    SegmentRef,
    bce_loss,
    bce_loss_grad,
    bt_probability,
    expand_subsegments,
    fit,
    learn_from_ranking,
    ranking_to_pairs,
)
from .candidates import (
    CandidateRequest,
    InContextExample,
    build_prompt,
    llm_candidates,
    llm_rerank,
    parse_candidates,
    sample_perturbed,
    sample_uniform,
)
from .llm import ChatEndpointConfig, HttpChatClient, MockChatClient
from .oracle import GroundTruthTask, load_ground_truth_tasks, oracle_rank, stochastic_label
from .bench import ExperimentConfig, mse, run_experiment, run_method

__all__ = [
    "GaitPattern",
    "contact_pattern",
    "match_fraction",
    "RewardWeights",
    "TaskVector",
    "TimeStep",
    "project_for_deployment",
    "step_reward",
    "step_reward_grad",
    "trajectory_return",
    "Trajectory",
    "deserialize_trajectory",
    "rollout",
    "serialize_trajectory",
    "Comparison",
    "FitConfig",
    "FitResult",
    "PreferenceDataset",
    "SegmentRef",
    "bce_loss",
    "bce_loss_grad",
    "bt_probability",
    "expand_subsegments",
    "fit",
    "learn_from_ranking",
    "ranking_to_pairs",
    "CandidateRequest",
    "InContextExample",
    "build_prompt",
    "llm_candidates",
    "llm_rerank",
    "parse_candidates",
    "sample_perturbed",
    "sample_uniform",
    "ChatEndpointConfig",
    "HttpChatClient",
    "MockChatClient",
    "GroundTruthTask",
    "load_ground_truth_tasks",
    "oracle_rank",
    "stochastic_label",
    "ExperimentConfig",
    "mse",
    "run_experiment",
    "run_method",
]
