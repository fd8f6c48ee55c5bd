"""Benchmark harness: candidates -> rollouts -> labels -> fit -> MSE sweeps.

Runs the full factorial of tasks x methods x query budgets x seeds, with
per-cell seeds derived by stable hashing so cells never share randomness
and adding a method leaves every other cell untouched.
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .candidates import llm_candidates, llm_rerank, sample_perturbed, sample_uniform
from .candidates import CandidateRequest, InContextExample, default_in_context_examples
from .llm import ChatClient, ChatEndpointConfig, HttpChatClient, MockChatClient
from .oracle import GroundTruthTask, load_ground_truth_tasks, oracle_rank
from .preferences import DEFAULT_SEGMENT_LENGTH, FitConfig, learn_from_ranking
from .rewards import RewardWeights, TaskVector, project_for_deployment
from .simulate import DEFAULT_DT, DEFAULT_NOISE_SIGMA, DEFAULT_T, Trajectory, rollout

METHODS = ("lgpl", "pl", "l2r", "lpl", "lgpl_perturbed")
LLM_METHODS = ("lgpl", "l2r", "lpl")

MSE_AGGREGATION = "mean_over_5_components"


class MethodConfigError(ValueError):
    """A method was requested without the pieces it needs (e.g. no endpoint)."""


def derive_seed(*parts) -> int:
    """Stable 32-bit seed from any mix of strings and numbers."""
    key = ":".join(str(p) for p in parts).encode()
    return int(hashlib.sha256(key).hexdigest()[:8], 16)


def mse(omega_a: TaskVector, omega_b: TaskVector) -> float:
    """Mean squared difference over the 5 raw components (no projection)."""
    diff = omega_a.to_array() - omega_b.to_array()
    return float(np.mean(diff**2))


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a sweep needs; all defaults are the desk-scale settings."""

    tasks: tuple[GroundTruthTask, ...] = ()
    methods: tuple[str, ...] = ("lgpl_perturbed", "pl")
    query_budgets: tuple[int, ...] = (4, 8, 12)
    seeds: int = 5
    T: int = DEFAULT_T
    dt: float = DEFAULT_DT
    noise_sigma: float = DEFAULT_NOISE_SIGMA
    segment_length: int = DEFAULT_SEGMENT_LENGTH
    learning_rate: float = 0.05
    iterations: int = 500
    comparison_cap: int | None = 2000
    perturb_sigma: float = 0.1
    alphas: tuple[float, float, float, float, float] = RewardWeights().alphas
    base_seed: int = 0
    endpoint: ChatEndpointConfig | None = None
    mock_llm_fixture: str | None = None

    def __post_init__(self) -> None:
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise ValueError(f"unknown methods {unknown}; choose from {METHODS}")
        if any(b < 2 for b in self.query_budgets):
            raise ValueError(f"query budgets must be at least 2, got {self.query_budgets}")
        if self.seeds < 1:
            raise ValueError(f"seeds must be at least 1, got {self.seeds}")
        if not self.tasks:
            object.__setattr__(self, "tasks", tuple(load_ground_truth_tasks()))

    @property
    def weights(self) -> RewardWeights:
        return RewardWeights(self.alphas)

    def fit_config(self, init: TaskVector, seed: int) -> FitConfig:
        return FitConfig(
            learning_rate=self.learning_rate,
            iterations=self.iterations,
            init=init,
            comparison_cap=self.comparison_cap,
            seed=seed,
        )


def load_experiment_config(record: dict) -> ExperimentConfig:
    """Build a config from its JSON form (missing keys keep their defaults)."""
    kwargs: dict = {}
    if "tasks" in record:
        kwargs["tasks"] = tuple(
            GroundTruthTask(t["name"], TaskVector.from_array(t["omega_star"])) for t in record["tasks"]
        )
    for key in ("methods", "query_budgets", "alphas"):
        if key in record:
            kwargs[key] = tuple(record[key])
    for key in (
        "seeds", "T", "dt", "noise_sigma", "segment_length", "learning_rate",
        "iterations", "comparison_cap", "perturb_sigma", "base_seed", "mock_llm_fixture",
    ):
        if key in record:
            kwargs[key] = record[key]
    if record.get("endpoint"):
        kwargs["endpoint"] = ChatEndpointConfig(**record["endpoint"])
    return ExperimentConfig(**kwargs)


def _make_client_factory(config: ExperimentConfig) -> Callable[[], ChatClient] | None:
    """One fresh client per cell so canned sequences restart deterministically."""
    if config.mock_llm_fixture:
        fixture = Path(config.mock_llm_fixture)
        return lambda: MockChatClient.from_fixture(fixture)
    if config.endpoint is not None:
        client = HttpChatClient(config.endpoint)
        return lambda: client
    return None


def _instruction_for(task: GroundTruthTask) -> str:
    return f'Make the robot move in a way that looks "{task.name}".'


def run_method(
    method: str,
    task: GroundTruthTask,
    budget: int,
    seed: int,
    config: ExperimentConfig,
    client: ChatClient | None = None,
    examples: tuple[InContextExample, ...] | None = None,
) -> TaskVector:
    """One experiment cell: produce the learned task vector for one method.

    lgpl/pl/lpl/lgpl_perturbed differ only in where candidates come from and
    who ranks them; l2r skips preference learning and trusts the first LLM
    candidate outright.
    """
    if method not in METHODS:
        raise MethodConfigError(f"unknown method {method!r}")
    weights = config.weights
    instruction = _instruction_for(task)

    if method in LLM_METHODS:
        if client is None:
            raise MethodConfigError(f"method {method!r} needs a chat endpoint or a mock fixture")
        if examples is None:
            examples = default_in_context_examples()
        candidates = llm_candidates(CandidateRequest(instruction, budget, examples), client)
    elif method == "pl":
        candidates = sample_uniform(budget, seed=derive_seed(seed, "candidates"))
    else:  # lgpl_perturbed
        candidates = sample_perturbed(
            task.omega_star, config.perturb_sigma, budget, seed=derive_seed(seed, "candidates")
        )

    if method == "l2r":
        return candidates[0]

    deployed = [project_for_deployment(c) for c in candidates]
    trajectories = [
        rollout(
            d,
            T=config.T,
            dt=config.dt,
            noise_sigma=config.noise_sigma,
            seed=derive_seed(seed, "rollout", i),
        )
        for i, d in enumerate(deployed)
    ]

    if method == "lpl":
        order = llm_rerank(instruction, candidates, client)
    else:
        order = oracle_rank(trajectories, task, weights)
    ranked_ids = [trajectories[i].id for i in order]

    init = TaskVector.from_array(np.mean([c.to_array() for c in candidates], axis=0))
    fit_config = config.fit_config(init=init, seed=derive_seed(seed, "subsample"))
    result = learn_from_ranking(
        ranked_ids,
        {t.id: t for t in trajectories},
        weights=weights,
        config=fit_config,
        k=config.segment_length,
    )
    return result.omega


@dataclass(frozen=True)
class CellResult:
    task: str
    method: str
    budget: int
    replicate: int
    omega: list[float] | None
    mse: float | None
    wall_time: float
    error: str | None = None

    def key(self) -> tuple:
        return (self.task, self.method, self.budget, self.replicate)


@dataclass(frozen=True)
class Aggregate:
    task: str
    method: str
    budget: int
    mean_mse: float
    std_mse: float
    n_seeds: int


@dataclass
class ExperimentResult:
    config_record: dict
    rows: list[CellResult]

    @property
    def failed(self) -> list[CellResult]:
        return [r for r in self.rows if r.error is not None]

    def aggregates(self) -> list[Aggregate]:
        groups: dict[tuple, list[float]] = {}
        for row in self.rows:
            if row.error is None:
                groups.setdefault((row.task, row.method, row.budget), []).append(row.mse)
        return [
            Aggregate(task, method, budget, float(np.mean(v)), float(np.std(v)), len(v))
            for (task, method, budget), v in sorted(groups.items())
        ]

    def mean_mse(self, method: str, budget: int) -> float:
        """Mean over every task and seed for one (method, budget) arm."""
        values = [
            r.mse for r in self.rows if r.error is None and r.method == method and r.budget == budget
        ]
        if not values:
            raise ValueError(f"no successful cells for method={method!r} budget={budget}")
        return float(np.mean(values))

    def to_json_record(self) -> dict:
        return {
            "metadata": {
                "mse_aggregation": MSE_AGGREGATION,
                "config": self.config_record,
            },
            "rows": [
                {
                    "task": r.task,
                    "method": r.method,
                    "budget": r.budget,
                    "seed": r.replicate,
                    "omega": r.omega,
                    "mse": r.mse,
                    "wall_time": r.wall_time,
                    "error": r.error,
                }
                for r in self.rows
            ],
        }


def _config_record(config: ExperimentConfig) -> dict:
    record = {
        "tasks": [{"name": t.name, "omega_star": t.omega_star.to_list()} for t in config.tasks],
        "methods": list(config.methods),
        "query_budgets": list(config.query_budgets),
        "seeds": config.seeds,
        "T": config.T,
        "dt": config.dt,
        "noise_sigma": config.noise_sigma,
        "segment_length": config.segment_length,
        "learning_rate": config.learning_rate,
        "iterations": config.iterations,
        "comparison_cap": config.comparison_cap,
        "perturb_sigma": config.perturb_sigma,
        "alphas": list(config.alphas),
        "base_seed": config.base_seed,
        "mock_llm_fixture": config.mock_llm_fixture,
    }
    if config.endpoint is not None:
        record["endpoint"] = {
            "base_url": config.endpoint.base_url,
            "model_name": config.endpoint.model_name,
            "api_key_env_var": config.endpoint.api_key_env_var,
            "timeout": config.endpoint.timeout,
            "max_retries": config.endpoint.max_retries,
        }
    return record


def run_experiment(config: ExperimentConfig, out_dir: str | Path | None = None) -> ExperimentResult:
    """Full factorial sweep; cell failures are recorded, never fatal.

    Writes results.json (per-cell rows plus metadata) and aggregates.csv
    (per task/method/budget mean and std over seeds) when out_dir is given.
    """
    client_factory = _make_client_factory(config)
    needs_client = [m for m in config.methods if m in LLM_METHODS]
    if needs_client and client_factory is None:
        raise MethodConfigError(
            f"methods {needs_client} need an endpoint config or --mock-llm fixture"
        )
    examples = default_in_context_examples()

    rows: list[CellResult] = []
    for task in config.tasks:
        for method in config.methods:
            for budget in config.query_budgets:
                for replicate in range(config.seeds):
                    cell_seed = derive_seed(config.base_seed, task.name, method, budget, replicate)
                    client = client_factory() if (method in LLM_METHODS and client_factory) else None
                    started = time.perf_counter()
                    try:
                        learned = run_method(
                            method, task, budget, cell_seed, config, client=client, examples=examples
                        )
                        rows.append(
                            CellResult(
                                task=task.name,
                                method=method,
                                budget=budget,
                                replicate=replicate,
                                omega=learned.to_list(),
                                mse=mse(learned, task.omega_star),
                                wall_time=time.perf_counter() - started,
                            )
                        )
                    except Exception as exc:  # cell isolation: record and move on
                        rows.append(
                            CellResult(
                                task=task.name,
                                method=method,
                                budget=budget,
                                replicate=replicate,
                                omega=None,
                                mse=None,
                                wall_time=time.perf_counter() - started,
                                error=f"{type(exc).__name__}: {exc}",
                            )
                        )

    rows.sort(key=CellResult.key)
    result = ExperimentResult(config_record=_config_record(config), rows=rows)
    if out_dir is not None:
        write_results(result, out_dir)
    return result


def write_results(result: ExperimentResult, out_dir: str | Path) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "results.json").write_text(json.dumps(result.to_json_record(), indent=2) + "\n")
    with (out / "aggregates.csv").open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["task", "method", "budget", "mean_mse", "std_mse", "n_seeds"])
        for agg in result.aggregates():
            writer.writerow([agg.task, agg.method, agg.budget, f"{agg.mean_mse:.12g}", f"{agg.std_mse:.12g}", agg.n_seeds])


def load_results(out_dir: str | Path) -> dict:
    return json.loads((Path(out_dir) / "results.json").read_text())
