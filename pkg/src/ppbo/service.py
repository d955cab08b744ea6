"""Long-lived elicitation sessions over a JSON HTTP API.

A session drives the query loop for a human oracle: the service owns
the model, the client renders the pending query, the human answers with
a slider value, the service refits and proposes the next query. One
JSON file per session under the data directory, written atomically
before any response, so a crash never loses an acknowledged answer.

Endpoints:
    POST /sessions                     create (idempotent under "token")
    GET  /sessions/{id}                state summary
    GET  /sessions/{id}/query          pending query
    GET  /sessions/{id}/slice          predictive band along the pending query
    GET  /sessions/{id}/surface        predictive-mean grid (2-d sessions)
    POST /sessions/{id}/feedback       submit an answer (idempotent under "token")
"""

from __future__ import annotations

import json
import os
import threading
import time
import uuid
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, HTTPException, Query
from pydantic import BaseModel, Field

from .acquisition import AcquisitionConfig, select_next_query
from .geometry import (
    Domain,
    ProjectiveQuery,
    ProjectionVector,
    coordinate_projection,
    denormalize_point,
)
from .gp import (
    Hyperparameters,
    ModelState,
    TgnSchedule,
    fit_map,
    make_observation,
    model_from_dict,
    model_to_dict,
    posterior_mean_argmax,
    predict,
)
from .harness import _ACQUIRE, _ARGMAX, _BETAS, stream

SESSION_SCHEMA = "ppbo.session"
SESSION_SCHEMA_VERSION = 1

_CREATE_NAMESPACE = uuid.UUID("41a95021-6f2e-4efb-9a39-0d4e0f534c5a")


class SessionRequest(BaseModel):
    """Body of POST /sessions."""

    domain: dict = Field(..., description='{"lower": [...], "upper": [...]}')
    budget: int
    seed: int = 0
    m: int = 25
    strategy: dict = Field(default_factory=lambda: {"strategy": "ei-ext", "coordinate_only": True})
    hyper: dict | None = None
    schedule: dict | None = None
    initial_reference: list[float] | None = None
    token: str | None = None


class FeedbackRequest(BaseModel):
    alpha: float
    token: str | None = None


@dataclass
class Session:
    """In-memory session state; the JSON file is the source of truth."""

    id: str
    domain: Domain
    budget: int
    seed: int
    m: int
    strategy: AcquisitionConfig
    hyper: Hyperparameters
    schedule: TgnSchedule
    initial_reference: np.ndarray  # normalized units
    create_token: str | None
    model: ModelState
    pending: ProjectiveQuery | None
    pending_index: int
    history: list = field(default_factory=list)  # dicts: query, alpha, timestamp, token
    incumbent: dict | None = None
    incumbent_series: list = field(default_factory=list)
    applied_tokens: set = field(default_factory=set)

    @property
    def dim(self) -> int:
        return self.domain.dim

    @property
    def answered(self) -> int:
        return len(self.history)

    @property
    def completed(self) -> bool:
        return self.pending is None


def _initial_query(session: Session, index: int) -> ProjectiveQuery:
    x = np.array(session.initial_reference)
    x[index] = 0.0
    return ProjectiveQuery(coordinate_projection(session.dim, index), x)


def _query_payload(session: Session) -> dict | None:
    q = session.pending
    if q is None:
        return None
    dom = session.domain
    p0 = denormalize_point(dom, q.x)
    p1 = denormalize_point(dom, np.clip(q.xi.values + q.x, 0.0, 1.0))
    return {
        "index": session.pending_index,
        "support": [int(d) for d in q.xi.support],
        "xi": q.xi.values.tolist(),
        "reference": q.x.tolist(),
        "reference_native": p0.tolist(),
        "point_at_zero_native": p0.tolist(),
        "point_at_one_native": p1.tolist(),
    }


def _summary(session: Session) -> dict:
    return {
        "id": session.id,
        "dim": session.dim,
        "budget": session.budget,
        "queries_answered": session.answered,
        "status": "completed" if session.completed else "active",
        "domain": session.domain.to_config(),
        "pending": _query_payload(session),
        "incumbent": session.incumbent,
        "incumbent_series": list(session.incumbent_series),
        "history": list(session.history),
    }


def _session_to_doc(session: Session) -> dict:
    return {
        "schema": SESSION_SCHEMA,
        "version": SESSION_SCHEMA_VERSION,
        "id": session.id,
        "domain": session.domain.to_config(),
        "budget": session.budget,
        "seed": session.seed,
        "m": session.m,
        "strategy": session.strategy.to_dict(),
        "hyper": session.hyper.to_dict(),
        "schedule": session.schedule.to_dict(),
        "initial_reference": session.initial_reference.tolist(),
        "create_token": session.create_token,
        "model": model_to_dict(session.model),
        "pending": None
        if session.pending is None
        else {
            "index": session.pending_index,
            "xi": session.pending.xi.values.tolist(),
            "x": session.pending.x.tolist(),
        },
        "history": session.history,
        "incumbent": session.incumbent,
        "incumbent_series": session.incumbent_series,
        "applied_tokens": sorted(session.applied_tokens),
    }


def _session_from_doc(doc: dict) -> Session:
    from .gp import SchemaError

    if doc.get("schema") != SESSION_SCHEMA:
        raise SchemaError(f"not a session document: schema {doc.get('schema')!r}")
    if doc.get("version") != SESSION_SCHEMA_VERSION:
        raise SchemaError(
            f"session schema version {doc.get('version')!r} is not supported "
            f"(expected {SESSION_SCHEMA_VERSION}); no migration is available"
        )
    pending = doc["pending"]
    return Session(
        id=doc["id"],
        domain=Domain.from_config(doc["domain"]),
        budget=doc["budget"],
        seed=doc["seed"],
        m=doc["m"],
        strategy=AcquisitionConfig.from_dict(doc["strategy"]),
        hyper=Hyperparameters.from_dict(doc["hyper"]),
        schedule=TgnSchedule.from_dict(doc["schedule"]),
        initial_reference=np.asarray(doc["initial_reference"], float),
        create_token=doc.get("create_token"),
        model=model_from_dict(doc["model"]),
        pending=None
        if pending is None
        else ProjectiveQuery(
            ProjectionVector(np.asarray(pending["xi"], float)),
            np.asarray(pending["x"], float),
        ),
        pending_index=0 if pending is None else pending["index"],
        history=list(doc["history"]),
        incumbent=doc["incumbent"],
        incumbent_series=list(doc["incumbent_series"]),
        applied_tokens=set(doc["applied_tokens"]),
    )


def load_session(path) -> Session:
    """Rebuild a session from its JSON file.

    Predictions of the reloaded model are bitwise identical to the
    saved one; schema mismatches and truncated files raise
    :class:`~ppbo.gp.SchemaError` without partial state.
    """
    from .gp import SchemaError

    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"session file is not valid JSON: {exc}") from exc
    return _session_from_doc(doc)


class SessionStore:
    """Disk-backed session registry with per-session write locks."""

    def __init__(self, data_dir: str):
        self.data_dir = data_dir
        os.makedirs(data_dir, exist_ok=True)
        self._sessions: dict[str, Session] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()

    def path(self, session_id: str) -> str:
        return os.path.join(self.data_dir, f"{session_id}.json")

    def lock(self, session_id: str) -> threading.Lock:
        with self._registry_lock:
            return self._locks.setdefault(session_id, threading.Lock())

    def persist(self, session: Session) -> None:
        doc = _session_to_doc(session)
        path = self.path(session.id)
        tmp = f"{path}.tmp"
        with open(tmp, "w") as fh:
            json.dump(doc, fh)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)

    def get(self, session_id: str) -> Session:
        with self._registry_lock:
            if session_id in self._sessions:
                return self._sessions[session_id]
        path = self.path(session_id)
        if not os.path.exists(path):
            raise KeyError(session_id)
        session = load_session(path)
        with self._registry_lock:
            return self._sessions.setdefault(session_id, session)

    def add(self, session: Session) -> None:
        with self._registry_lock:
            self._sessions[session.id] = session


def _refit_and_advance(store: SessionStore, session: Session, alpha: float, token: str | None):
    """Append the answer, refit, pick the next query, persist, update."""
    index = session.pending_index
    query = session.pending
    obs = make_observation(
        query, alpha, session.m, session.schedule, index, stream(session.seed, _BETAS, index)
    )
    dataset = list(session.model.dataset) + [obs]
    model = fit_map(
        dataset,
        session.hyper,
        session.schedule,
        session.seed,
        dim=session.dim,
        warm_start=session.model.f_map if not session.model.is_empty else None,
    )
    x_star, mu_star = posterior_mean_argmax(
        model, session.strategy.restarts, stream(session.seed, _ARGMAX, index)
    )
    incumbent = {
        "x_native": denormalize_point(session.domain, x_star).tolist(),
        "mean": mu_star,
    }
    answered = index + 1
    if answered >= session.budget:
        pending, pending_index = None, answered
    elif answered < session.dim:
        pending_index = answered
        pending = _initial_query(session, answered)
    else:
        pending_index = answered
        pending = select_next_query(
            model,
            session.strategy,
            iteration=answered - session.dim,
            rng=stream(session.seed, _ACQUIRE, answered),
            dim=session.dim,
            x_star=x_star,
        )
    entry = {
        "index": index,
        "support": [int(d) for d in query.xi.support],
        "xi": query.xi.values.tolist(),
        "reference": query.x.tolist(),
        "alpha": float(alpha),
        "x_native_answered": denormalize_point(
            session.domain, np.clip(alpha * query.xi.values + query.x, 0.0, 1.0)
        ).tolist(),
        "timestamp": time.time(),
        "token": token,
    }

    staged = Session(
        id=session.id,
        domain=session.domain,
        budget=session.budget,
        seed=session.seed,
        m=session.m,
        strategy=session.strategy,
        hyper=session.hyper,
        schedule=session.schedule,
        initial_reference=session.initial_reference,
        create_token=session.create_token,
        model=model,
        pending=pending,
        pending_index=pending_index,
        history=session.history + [entry],
        incumbent=incumbent,
        incumbent_series=session.incumbent_series + [mu_star],
        applied_tokens=session.applied_tokens | ({token} if token else set()),
    )
    store.persist(staged)  # commit point: durable before any response
    store.add(staged)
    return staged


def create_app(data_dir: str) -> FastAPI:
    """Build the service around a data directory."""
    store = SessionStore(data_dir)
    app = FastAPI(title="ppbo elicitation service")
    app.state.store = store

    def fetch(session_id: str) -> Session:
        try:
            return store.get(session_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id!r}")

    @app.post("/sessions")
    def create_session(req: SessionRequest):
        try:
            domain = Domain.from_config(req.domain)
        except (KeyError, ValueError) as exc:
            raise HTTPException(status_code=400, detail=f"domain: {exc}")
        if req.budget <= domain.dim:
            raise HTTPException(
                status_code=400,
                detail=f"budget: must exceed the dimension ({req.budget} <= {domain.dim})",
            )
        try:
            strategy = AcquisitionConfig.from_dict(req.strategy)
            hyper = (
                Hyperparameters.from_dict(req.hyper)
                if req.hyper
                else Hyperparameters.default(domain.dim)
            )
            schedule = (
                TgnSchedule.from_dict(req.schedule)
                if req.schedule
                else TgnSchedule.default(domain.dim)
            )
        except (TypeError, ValueError) as exc:
            raise HTTPException(status_code=400, detail=f"config: {exc}")
        if req.initial_reference is None:
            reference = np.full(domain.dim, 0.5)
        else:
            if len(req.initial_reference) != domain.dim:
                raise HTTPException(status_code=400, detail="initial_reference: wrong length")
            from .geometry import normalize_point

            try:
                reference = np.array(
                    normalize_point(domain, np.asarray(req.initial_reference, float))
                )
            except ValueError as exc:
                raise HTTPException(status_code=400, detail=f"initial_reference: {exc}")
        if req.m < 1:
            raise HTTPException(status_code=400, detail="m: must be >= 1")

        session_id = (
            str(uuid.uuid5(_CREATE_NAMESPACE, req.token)) if req.token else str(uuid.uuid4())
        )
        if req.token:
            try:
                return _summary(store.get(session_id))
            except KeyError:
                pass
        session = Session(
            id=session_id,
            domain=domain,
            budget=req.budget,
            seed=req.seed,
            m=req.m,
            strategy=strategy,
            hyper=hyper,
            schedule=schedule,
            initial_reference=reference,
            create_token=req.token,
            model=ModelState.empty(hyper, dim=domain.dim),
            pending=None,
            pending_index=0,
        )
        session.pending = _initial_query(session, 0)
        store.persist(session)
        store.add(session)
        return _summary(session)

    @app.get("/sessions/{session_id}")
    def get_state(session_id: str):
        return _summary(fetch(session_id))

    @app.get("/sessions/{session_id}/query")
    def get_query(session_id: str):
        session = fetch(session_id)
        payload = _query_payload(session)
        if payload is None:
            raise HTTPException(status_code=409, detail="session completed; no pending query")
        return payload

    @app.get("/sessions/{session_id}/slice")
    def get_slice(session_id: str, resolution: int = Query(default=101, ge=2)):
        session = fetch(session_id)
        q = session.pending
        if q is None:
            raise HTTPException(status_code=409, detail="session completed; no pending query")
        alphas = np.linspace(0.0, 1.0, resolution)
        pts = alphas[:, None] * q.xi.values[None, :] + q.x[None, :]
        mu, cov = predict(session.model, pts)
        sds = np.sqrt(np.clip(np.diag(cov), 0.0, None))
        native = [denormalize_point(session.domain, p).tolist() for p in np.clip(pts, 0.0, 1.0)]
        return {
            "alphas": alphas.tolist(),
            "means": mu.tolist(),
            "sds": sds.tolist(),
            "points_native": native,
        }

    @app.get("/sessions/{session_id}/surface")
    def get_surface(session_id: str, resolution: int = Query(default=41, ge=2)):
        session = fetch(session_id)
        if session.dim != 2:
            raise HTTPException(status_code=400, detail="surface view requires a 2-d session")
        g = np.linspace(0.0, 1.0, resolution)
        xx, yy = np.meshgrid(g, g, indexing="ij")
        pts = np.column_stack([xx.ravel(), yy.ravel()])
        mu = predict(session.model, pts)[0] if not session.model.is_empty else np.zeros(len(pts))
        axis0 = (session.domain.lower[0] + g * session.domain.span[0]).tolist()
        axis1 = (session.domain.lower[1] + g * session.domain.span[1]).tolist()
        return {
            "axis0_native": axis0,
            "axis1_native": axis1,
            "means": mu.reshape(resolution, resolution).tolist(),
        }

    @app.post("/sessions/{session_id}/feedback")
    def post_feedback(session_id: str, req: FeedbackRequest):
        with store.lock(session_id):
            session = fetch(session_id)
            if req.token and req.token in session.applied_tokens:
                return _summary(session)  # idempotent replay
            if session.pending is None:
                raise HTTPException(status_code=409, detail="budget reached; no pending query")
            if not np.isfinite(req.alpha) or not 0.0 <= req.alpha <= 1.0:
                raise HTTPException(status_code=422, detail=f"alpha {req.alpha} outside [0, 1]")
            session = _refit_and_advance(store, session, req.alpha, req.token)
            return _summary(session)

    return app
