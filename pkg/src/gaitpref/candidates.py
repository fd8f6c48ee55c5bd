"""Candidate task-vector sources: uniform, perturbed-prior, and LLM-backed.

All sources produce vectors inside the valid ranges. The perturbed source
exists so the pipeline can be exercised offline and deterministically with
a prior of controllable quality; the LLM source is the interactive path.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Sequence

import numpy as np

from .llm import ChatClient
from .rewards import (
    GAIT_WEIGHT_RANGE,
    PITCH_RANGE,
    TaskVector,
    VELOCITY_RANGE,
    project_for_deployment,
)

_N_GAITS = 3


class CandidateParseError(ValueError):
    """An LLM response could not be turned into the requested task vectors."""

    def __init__(self, reason: str, response_text: str):
        super().__init__(f"{reason}; offending response: {response_text!r}")
        self.response_text = response_text


class RetriesExhaustedError(RuntimeError):
    """Every parse attempt failed, including all corrective retries."""

    def __init__(self, attempts: int, last_response: str):
        super().__init__(f"retries exhausted after {attempts} attempts")
        self.last_response = last_response


@dataclass(frozen=True)
class InContextExample:
    """A behavior description paired with the task vector that realizes it."""

    description: str
    omega: TaskVector

    def __post_init__(self) -> None:
        if not self.description.strip():
            raise ValueError("example description must be non-empty")
        if self.omega != self.omega.clamped():
            raise ValueError(f"example omega {self.omega.to_list()} is out of range")


@dataclass(frozen=True)
class CandidateRequest:
    """What to ask a candidate source for."""

    instruction: str
    n: int
    examples: tuple[InContextExample, ...] = ()
    diversity_note: str = ""

    def __post_init__(self) -> None:
        if self.n < 2:
            raise ValueError(f"need at least 2 candidates, got n={self.n}")
        object.__setattr__(self, "examples", tuple(self.examples))


def default_in_context_examples() -> tuple[InContextExample, ...]:
    """The shipped description->vector pairs used to prime the LLM."""
    text = resources.files("gaitpref.fixtures").joinpath("in_context_examples.json").read_text()
    return tuple(
        InContextExample(item["description"], TaskVector.from_array(item["omega"]))
        for item in json.loads(text)
    )


def sample_uniform(n: int, seed: int = 0) -> list[TaskVector]:
    """Candidates drawn from the command distribution the policy was trained on.

    Velocity and pitch are uniform over their ranges; the gait is a uniform
    one-hot over the three primitives.
    """
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        velocity = rng.uniform(*VELOCITY_RANGE)
        pitch = rng.uniform(*PITCH_RANGE)
        gait = int(rng.integers(_N_GAITS))
        out.append(TaskVector(velocity, pitch, tuple(1.0 if i == gait else 0.0 for i in range(_N_GAITS))))
    return out


def sample_perturbed(omega_star: TaskVector, sigma: float, n: int, seed: int = 0) -> list[TaskVector]:
    """Noisy copies of a ground-truth vector, as a stand-in for a good prior.

    Velocity and pitch get additive Gaussian noise of std sigma (then
    clamping); the gait is resampled uniformly with probability min(1, 2*sigma),
    otherwise kept. Results are always deployment-projected.
    """
    if sigma < 0:
        raise ValueError(f"sigma must be nonnegative, got {sigma}")
    rng = np.random.default_rng(seed)
    regait_prob = min(1.0, 2.0 * sigma)
    base = project_for_deployment(omega_star)
    out = []
    for _ in range(n):
        velocity = base.velocity + rng.normal(0.0, sigma)
        pitch = base.pitch + rng.normal(0.0, sigma)
        flip = rng.uniform()
        gait = int(rng.integers(_N_GAITS))
        if flip >= regait_prob:
            gait = int(np.argmax(base.gait_weights))
        candidate = TaskVector(velocity, pitch, tuple(1.0 if i == gait else 0.0 for i in range(_N_GAITS)))
        out.append(project_for_deployment(candidate))
    return out


_FORMAT_BLOCK = """A task vector is a JSON array of 5 numbers:
[velocity, pitch, trot, pace, bound]
- velocity: target forward speed in m/s, between {v_lo} and {v_hi}
- pitch: target body pitch in radians, between {p_lo} and {p_hi} (positive = nose up)
- trot, pace, bound: gait weights between {g_lo} and {g_hi}; the largest weight selects the gait"""


def build_prompt(request: CandidateRequest) -> str:
    """Single prompt asking for exactly n diverse candidate task vectors."""
    lines = [
        "You choose task vectors that make a quadruped robot express a behavior.",
        _FORMAT_BLOCK.format(
            v_lo=VELOCITY_RANGE[0],
            v_hi=VELOCITY_RANGE[1],
            p_lo=PITCH_RANGE[0],
            p_hi=PITCH_RANGE[1],
            g_lo=GAIT_WEIGHT_RANGE[0],
            g_hi=GAIT_WEIGHT_RANGE[1],
        ),
        "",
        "Known behaviors:",
    ]
    for example in request.examples:
        lines.append(f'- "{example.description}" -> {json.dumps(example.omega.to_list())}')
    lines += [
        "",
        f"The user wants this behavior: {request.instruction}",
        "",
        "Think step by step about which velocities, pitches, and gaits could express",
        f"this behavior, then propose exactly {request.n} candidate task vectors.",
        "Spread the candidates across plausible gaits and velocities so they explore",
        "a range of possible behaviors.",
    ]
    if request.diversity_note:
        lines.append(request.diversity_note)
    lines += [
        "",
        f"End your reply with one line containing only a JSON array of {request.n} arrays",
        "of 5 numbers each.",
    ]
    return "\n".join(lines)


def _last_json_array(text: str):
    """The last top-level JSON array in a completion, skipping nested ones."""
    decoder = json.JSONDecoder()
    found = None
    pos = 0
    while True:
        start = text.find("[", pos)
        if start < 0:
            return found
        try:
            value, consumed = decoder.raw_decode(text[start:])
        except json.JSONDecodeError:
            pos = start + 1
            continue
        if isinstance(value, list):
            found = value
            pos = start + consumed
        else:
            pos = start + 1


def parse_candidates(response_text: str, n: int) -> list[TaskVector]:
    """Extract n task vectors from the last JSON array in a completion.

    Values are clamped into range but gait weights are NOT one-hotted here:
    soft weights carry information for the fit init, and rollout callers
    project anyway.
    """
    array = _last_json_array(response_text)
    if array is None:
        raise CandidateParseError("no JSON array found", response_text)
    if len(array) != n:
        raise CandidateParseError(f"expected {n} task vectors, got {len(array)}", response_text)
    vectors = []
    for row in array:
        if not isinstance(row, list) or len(row) != 5:
            raise CandidateParseError(f"each task vector needs 5 numbers, got {row!r}", response_text)
        if not all(isinstance(x, (int, float)) and math.isfinite(x) for x in row):
            raise CandidateParseError(f"non-finite or non-numeric entry in {row!r}", response_text)
        vectors.append(TaskVector.from_array(row).clamped())
    return vectors


def _complete_with_retries(client: ChatClient, messages: list[dict], parse, max_retries: int | None):
    retries = client.max_retries if max_retries is None else max_retries
    last_response = ""
    for attempt in range(retries + 1):
        last_response = client.complete(messages)
        try:
            return parse(last_response)
        except CandidateParseError as exc:
            messages = messages + [
                {"role": "assistant", "content": last_response},
                {"role": "user", "content": f"That reply could not be used: {exc.args[0].split(';')[0]}. "
                                            "Answer again, ending with only the requested JSON array."},
            ]
    raise RetriesExhaustedError(retries + 1, last_response)


def llm_candidates(
    request: CandidateRequest,
    client: ChatClient,
    max_retries: int | None = None,
) -> list[TaskVector]:
    """Prompt the model for candidates, retrying with corrections on bad parses."""
    messages = [{"role": "user", "content": build_prompt(request)}]
    return _complete_with_retries(client, messages, lambda text: parse_candidates(text, request.n), max_retries)


def refine_candidates(
    request: CandidateRequest,
    prior: Sequence[TaskVector],
    feedback: str,
    client: ChatClient,
    max_retries: int | None = None,
) -> list[TaskVector]:
    """Re-prompt with the prior candidates and the user's feedback appended."""
    messages = [
        {"role": "user", "content": build_prompt(request)},
        {"role": "assistant", "content": json.dumps([c.to_list() for c in prior])},
        {
            "role": "user",
            "content": (
                f"User feedback on these candidates: {feedback}\n"
                f"Propose {request.n} improved candidate task vectors, ending with one line "
                f"containing only a JSON array of {request.n} arrays of 5 numbers."
            ),
        },
    ]
    return _complete_with_retries(client, messages, lambda text: parse_candidates(text, request.n), max_retries)


def llm_rerank(
    instruction: str,
    candidates: Sequence[TaskVector],
    client: ChatClient,
    max_retries: int | None = None,
) -> list[int]:
    """Ask the model to order its own candidates, best first.

    Returns a permutation of 0..n-1; non-permutation replies are retried and
    ultimately rejected.
    """
    if len(candidates) < 2:
        raise ValueError(f"need at least 2 candidates to rank, got {len(candidates)}")
    n = len(candidates)
    lines = [
        f"The user wants this behavior: {instruction}",
        "",
        "Candidate task vectors ([velocity, pitch, trot, pace, bound]):",
    ]
    for i, omega in enumerate(candidates):
        lines.append(f"{i}: {json.dumps(omega.to_list())}")
    lines += [
        "",
        "Rank the candidates from best to worst fit for the desired behavior.",
        f"End your reply with one line containing only a JSON array that is a",
        f"permutation of the indices 0..{n - 1}, best candidate first.",
    ]

    def parse(text: str) -> list[int]:
        array = _last_json_array(text)
        if array is None:
            raise CandidateParseError("no JSON array found", text)
        if sorted(array) != list(range(n)):
            raise CandidateParseError(f"{array!r} is not a permutation of 0..{n - 1}", text)
        return [int(i) for i in array]

    return _complete_with_retries(client, [{"role": "user", "content": "\n".join(lines)}], parse, max_retries)


@dataclass
class UniformSource:
    """PL baseline: candidates from the policy's training distribution."""

    seed: int = 0

    def generate(self, instruction: str, n: int) -> list[TaskVector]:
        return sample_uniform(n, seed=self.seed)


@dataclass
class PerturbedSource:
    """Offline prior surrogate: noisy copies of a known ground truth."""

    omega_star: TaskVector
    sigma: float = 0.1
    seed: int = 0

    def generate(self, instruction: str, n: int) -> list[TaskVector]:
        return sample_perturbed(self.omega_star, self.sigma, n, seed=self.seed)


@dataclass
class LlmSource:
    """In-context prompting against a chat endpoint (or its mock)."""

    client: ChatClient
    examples: tuple[InContextExample, ...] = field(default_factory=default_in_context_examples)

    def generate(self, instruction: str, n: int) -> list[TaskVector]:
        return llm_candidates(CandidateRequest(instruction, n, self.examples), self.client)
