"""HTTP service for interactive ranking sessions.

A session is created from a behavior instruction, serves candidate
trajectories, accepts one ranking, and answers with the learned and
projected task vectors plus a refined rollout. LLM-backed sessions can
also take free-text feedback to regenerate their candidates.

Sessions live in memory; mutations on one session are serialized by a
per-session lock and optionally snapshotted to disk as JSON.
"""

from __future__ import annotations

import argparse
import json
import threading
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Literal

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field

from .bench import derive_seed
from .candidates import (
    CandidateRequest,
    LlmSource,
    default_in_context_examples,
    refine_candidates,
    sample_perturbed,
    sample_uniform,
)
from .llm import ChatClient, ChatEndpointConfig, HttpChatClient, MockChatClient
from .oracle import load_ground_truth_tasks
from .preferences import FitConfig, learn_from_ranking
from .rewards import TaskVector, project_for_deployment
from .simulate import DEFAULT_DT, DEFAULT_NOISE_SIGMA, DEFAULT_T, Trajectory, rollout, serialize_trajectory

SourceName = Literal["llm", "uniform", "perturbed"]


@dataclass(frozen=True)
class ServiceSettings:
    mock_llm_fixture: str | None = None
    endpoint: ChatEndpointConfig | None = None
    snapshot_dir: str | None = None
    T: int = DEFAULT_T
    dt: float = DEFAULT_DT
    noise_sigma: float = DEFAULT_NOISE_SIGMA
    segment_length: int = 20
    base_seed: int = 0
    cors_origins: tuple[str, ...] = ("*",)


@dataclass
class Session:
    id: str
    instruction: str
    source: str
    state: str = "awaiting_ranking"
    candidates: list[TaskVector] = field(default_factory=list)
    trajectories: list[Trajectory] = field(default_factory=list)
    learned_omega: TaskVector | None = None
    refined: Trajectory | None = None
    history: list[dict] = field(default_factory=list)
    error: str | None = None
    revision: int = 0
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def log(self, kind: str, detail) -> None:
        self.history.append(
            {"kind": kind, "detail": detail, "timestamp": datetime.now(timezone.utc).isoformat()}
        )

    def payload(self) -> dict:
        return {
            "id": self.id,
            "instruction": self.instruction,
            "source": self.source,
            "state": self.state,
            "candidates": [c.to_list() for c in self.candidates],
            "trajectories": [serialize_trajectory(t) for t in self.trajectories],
            "learned_omega": self.learned_omega.to_list() if self.learned_omega else None,
            "projected_omega": (
                project_for_deployment(self.learned_omega).to_list() if self.learned_omega else None
            ),
            "history": self.history,
            "error": self.error,
        }


class CreateSessionRequest(BaseModel):
    instruction: str = Field(min_length=1)
    n: int = Field(default=4, ge=2, le=9)
    source: SourceName = "uniform"


class RankingRequest(BaseModel):
    ranking: list[int]


class FeedbackRequest(BaseModel):
    feedback: str = Field(min_length=1)


class SessionStore:
    def __init__(self) -> None:
        self._sessions: dict[str, Session] = {}
        self._store_lock = threading.Lock()
        self._counter = 0

    def add(self, session: Session) -> None:
        with self._store_lock:
            self._sessions[session.id] = session

    def get(self, session_id: str) -> Session:
        session = self._sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail=f"no session {session_id!r}")
        return session

    def next_index(self) -> int:
        with self._store_lock:
            self._counter += 1
            return self._counter


def create_app(settings: ServiceSettings = ServiceSettings()) -> FastAPI:
    app = FastAPI(title="gaitpref ranking service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=list(settings.cors_origins),
        allow_methods=["*"],
        allow_headers=["*"],
    )
    store = SessionStore()
    app.state.store = store
    app.state.settings = settings

    def chat_client() -> ChatClient | None:
        if settings.mock_llm_fixture:
            return MockChatClient.from_fixture(settings.mock_llm_fixture)
        if settings.endpoint is not None:
            return HttpChatClient(settings.endpoint)
        return None

    def snapshot(session: Session) -> None:
        if settings.snapshot_dir is None:
            return
        directory = Path(settings.snapshot_dir)
        directory.mkdir(parents=True, exist_ok=True)
        (directory / f"{session.id}.json").write_text(json.dumps(session.payload(), indent=2) + "\n")

    def generate_candidates(session: Session, n: int) -> list[TaskVector]:
        seed = derive_seed(settings.base_seed, session.id, session.revision)
        if session.source == "uniform":
            return sample_uniform(n, seed=seed)
        if session.source == "perturbed":
            wanted = session.instruction.lower()
            for task in load_ground_truth_tasks():
                if task.name in wanted:
                    return sample_perturbed(task.omega_star, 0.15, n, seed=seed)
            raise HTTPException(
                status_code=400,
                detail="perturbed source needs the instruction to name a known task "
                       f"({', '.join(t.name for t in load_ground_truth_tasks())})",
            )
        client = chat_client()
        if client is None:
            raise HTTPException(status_code=400, detail="llm source needs an endpoint or a mock fixture")
        return LlmSource(client, default_in_context_examples()).generate(session.instruction, n)

    def roll_candidates(session: Session) -> None:
        session.trajectories = [
            rollout(
                project_for_deployment(c),
                T=settings.T,
                dt=settings.dt,
                noise_sigma=settings.noise_sigma,
                seed=derive_seed(settings.base_seed, session.id, session.revision, i),
                traj_id=f"{session.id}-r{session.revision}-c{i}",
            )
            for i, c in enumerate(session.candidates)
        ]

    @app.post("/sessions")
    def create_session(request: CreateSessionRequest) -> dict:
        session = Session(
            id=uuid.uuid4().hex[:12],
            instruction=request.instruction,
            source=request.source,
        )
        try:
            session.candidates = generate_candidates(session, request.n)
            roll_candidates(session)
            session.log("created", {"n": request.n, "source": request.source})
        except HTTPException:
            raise
        except Exception as exc:
            session.state = "error"
            session.error = f"{type(exc).__name__}: {exc}"
            session.log("error", session.error)
        store.add(session)
        snapshot(session)
        return session.payload()

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str) -> dict:
        return store.get(session_id).payload()

    @app.post("/sessions/{session_id}/ranking")
    def submit_ranking(session_id: str, request: RankingRequest) -> dict:
        session = store.get(session_id)
        with session.lock:
            if session.state == "fitted":
                raise HTTPException(status_code=409, detail="session already fitted")
            if session.state != "awaiting_ranking":
                raise HTTPException(status_code=409, detail=f"session in state {session.state!r}")
            n = len(session.trajectories)
            if sorted(request.ranking) != list(range(n)):
                raise HTTPException(
                    status_code=400,
                    detail=f"ranking must be a permutation of 0..{n - 1}, got {request.ranking}",
                )
            ranked_ids = [session.trajectories[i].id for i in request.ranking]
            init = TaskVector.from_array(np.mean([c.to_array() for c in session.candidates], axis=0))
            config = FitConfig(init=init, seed=derive_seed(settings.base_seed, session.id, "fit"))
            result = learn_from_ranking(
                ranked_ids,
                {t.id: t for t in session.trajectories},
                config=config,
                k=settings.segment_length,
            )
            session.learned_omega = result.omega
            projected = project_for_deployment(result.omega)
            session.refined = rollout(
                projected,
                T=settings.T,
                dt=settings.dt,
                noise_sigma=settings.noise_sigma,
                seed=settings.base_seed,
                traj_id=f"{session.id}-refined",
            )
            session.state = "fitted"
            session.log("ranking", request.ranking)
            snapshot(session)
            return {
                "state": session.state,
                "raw_omega": session.learned_omega.to_list(),
                "projected_omega": projected.to_list(),
                "refined_trajectory": serialize_trajectory(session.refined),
            }

    @app.post("/sessions/{session_id}/feedback")
    def submit_feedback(session_id: str, request: FeedbackRequest) -> dict:
        session = store.get(session_id)
        with session.lock:
            if session.source != "llm":
                raise HTTPException(
                    status_code=400, detail=f"feedback is only supported for llm sessions, not {session.source!r}"
                )
            if session.state == "fitted":
                raise HTTPException(status_code=409, detail="session already fitted")
            client = chat_client()
            if client is None:
                raise HTTPException(status_code=400, detail="llm source needs an endpoint or a mock fixture")
            prior = session.candidates
            candidate_request = CandidateRequest(
                session.instruction, max(len(prior), 2), default_in_context_examples()
            )
            session.revision += 1
            session.candidates = refine_candidates(candidate_request, prior, request.feedback, client)
            roll_candidates(session)
            session.state = "awaiting_ranking"
            session.error = None
            session.log("feedback", request.feedback)
            snapshot(session)
            return session.payload()

    @app.get("/sessions/{session_id}/result")
    def get_result(session_id: str) -> dict:
        session = store.get(session_id)
        if session.state != "fitted":
            raise HTTPException(status_code=409, detail=f"session is {session.state}, not fitted")
        projected = project_for_deployment(session.learned_omega)
        return {
            "state": session.state,
            "raw_omega": session.learned_omega.to_list(),
            "projected_omega": projected.to_list(),
            "refined_trajectory": serialize_trajectory(session.refined),
        }

    return app


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="gait-service", description="interactive ranking service")
    parser.add_argument("--port", type=int, default=8000)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--mock-llm", help="mock LLM fixture file")
    parser.add_argument("--snapshot-dir", help="write session snapshots here")
    parser.add_argument("--endpoint-config", help="JSON file with chat endpoint settings")
    parser.add_argument("--noise-sigma", type=float, default=DEFAULT_NOISE_SIGMA)
    args = parser.parse_args(argv)

    endpoint = None
    if args.endpoint_config:
        endpoint = ChatEndpointConfig(**json.loads(Path(args.endpoint_config).read_text()))
    settings = ServiceSettings(
        mock_llm_fixture=args.mock_llm,
        endpoint=endpoint,
        snapshot_dir=args.snapshot_dir,
        noise_sigma=args.noise_sigma,
    )

    import uvicorn

    uvicorn.run(create_app(settings), host=args.host, port=args.port, log_level="warning")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
