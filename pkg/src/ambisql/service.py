"""HTTP service exposing the ask -> review -> feedback loop.

Endpoints:
  POST /ask       run the pipeline for a question, open a review session
  POST /feedback  resolve a session with the chosen candidate (or none)
  GET  /hints     list a user's active hints
  DELETE /hints/{hint_id}  tombstone a hint

State is file-backed: sessions and hints are append-only JSON-lines
journals, replayed on startup, so a restart reproduces the exact state. The
UI-facing "confidence" is 1 - score for display; the raw nonconformity
score is returned alongside it.
"""

from __future__ import annotations

import json
import os
import uuid
from dataclasses import dataclass, field
from typing import Any, Optional

from fastapi import FastAPI, HTTPException
from fastapi.responses import RedirectResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .errors import (
    BackendUnavailable,
    FormatError,
    GenerationRefused,
    NoColumnsUsed,
    SqlError,
)
from .gateway import HttpBackend, LlmBackend, MockBackend, MockOracle, extract_entities
from .generator import gen_sql_queries
from .model import ColumnRef, PipelineConfig, Question, SqlCandidate
from .personalizer import (
    FeedbackEvent,
    HintStore,
    apply_feedback,
    hint_overrides,
    hints_for,
    schema_map,
)
from .selector import ConformalModel, make_scorer, score_candidates, select
from .similarity import LexiconProvider, NgramEmbeddingProvider, SimilarityProvider
from .sql import Database


@dataclass
class Session:
    session_id: str
    user_id: str
    db_id: str
    question_text: str
    candidates: list[dict]  # [{id, sql}]
    status: str = "open"  # open | resolved | abandoned
    chosen_id: str | None = None


@dataclass
class ServiceConfig:
    databases: dict[str, str]  # db_id -> fixture path
    backend_kind: str = "mock"
    oracle_path: str | None = None
    endpoint: str | None = None
    model: str = "default"
    seed: int = 0
    calibration_artifact: str | None = None
    selector_enabled: bool = False
    hint_journal: str | None = None
    session_journal: str | None = None
    static_dir: str | None = None
    similarity_mode: str = "embedding"
    lexicon: list[dict] = field(default_factory=list)
    lexicon_default: float = 0.05
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)

    @classmethod
    def from_json(cls, doc: dict[str, Any], base_dir: str = ".") -> "ServiceConfig":
        def resolve(p: str | None) -> str | None:
            if p is None:
                return None
            return os.path.normpath(os.path.join(base_dir, p))

        backend = doc.get("backend", {})
        pipeline = doc.get("pipeline", {})
        similarity = doc.get("similarity", {})
        try:
            return cls(
                databases={d["db_id"]: resolve(d["fixture"])
                           for d in doc.get("databases", [])},
                backend_kind=backend.get("kind", "mock"),
                oracle_path=resolve(backend.get("oracle")),
                endpoint=backend.get("endpoint"),
                model=backend.get("model", "default"),
                seed=int(backend.get("seed", 0)),
                calibration_artifact=resolve(doc.get("calibration_artifact")),
                selector_enabled=bool(doc.get("selector_enabled", False)),
                hint_journal=resolve(doc.get("hint_journal")),
                session_journal=resolve(doc.get("session_journal")),
                static_dir=resolve(doc.get("static_dir")),
                similarity_mode=similarity.get("mode", "embedding"),
                lexicon=similarity.get("lexicon", []),
                lexicon_default=float(similarity.get("default", 0.05)),
                pipeline=PipelineConfig(
                    max_calls=int(pipeline.get("max_calls", 5)),
                    alpha=float(pipeline.get("alpha", 0.1)),
                    scoring=pipeline.get("scoring", "embedding"),
                    personalization_enabled=bool(
                        pipeline.get("personalization_enabled", True)),
                ),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"bad service config: {exc}") from exc

    @classmethod
    def load(cls, path: str) -> "ServiceConfig":
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        return cls.from_json(doc, base_dir=os.path.dirname(os.path.abspath(path)))


def build_backend(config: ServiceConfig) -> LlmBackend:
    if config.backend_kind == "mock":
        if not config.oracle_path:
            raise FormatError("mock backend requires an oracle path")
        return MockBackend(MockOracle.load(config.oracle_path), seed=config.seed)
    if config.backend_kind == "http":
        if not config.endpoint:
            raise FormatError("http backend requires an endpoint")
        return HttpBackend(endpoint=config.endpoint, model=config.model,
                           api_key=os.environ.get("AMBISQL_API_KEY"))
    raise FormatError(f"unknown backend kind {config.backend_kind!r}")


def build_provider(config: ServiceConfig) -> SimilarityProvider:
    if config.similarity_mode == "lexicon":
        entries = {
            (e["entity"], ColumnRef(e["table"], e["column"])): float(e["weight"])
            for e in config.lexicon
        }
        return LexiconProvider(entries, default=config.lexicon_default)
    return NgramEmbeddingProvider()


class SessionLog:
    """Append-only session journal; replay rebuilds open/resolved state."""

    def __init__(self, path: str | None):
        self.path = path
        self.sessions: dict[str, Session] = {}
        if path and os.path.exists(path):
            with open(path, "r", encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if line:
                        self._apply(json.loads(line))

    def _apply(self, rec: dict) -> None:
        if rec["op"] == "open":
            self.sessions[rec["session_id"]] = Session(
                session_id=rec["session_id"],
                user_id=rec["user_id"],
                db_id=rec["db_id"],
                question_text=rec["question"],
                candidates=rec["candidates"],
            )
        elif rec["op"] == "resolve":
            session = self.sessions.get(rec["session_id"])
            if session is not None:
                session.status = "resolved"
                session.chosen_id = rec.get("chosen_id")

    def _append(self, rec: dict) -> None:
        if self.path:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(rec) + "\n")

    def open(self, session: Session) -> None:
        self.sessions[session.session_id] = session
        self._append({
            "op": "open",
            "session_id": session.session_id,
            "user_id": session.user_id,
            "db_id": session.db_id,
            "question": session.question_text,
            "candidates": session.candidates,
        })

    def resolve(self, session_id: str, chosen_id: str | None) -> None:
        session = self.sessions[session_id]
        session.status = "resolved"
        session.chosen_id = chosen_id
        self._append({"op": "resolve", "session_id": session_id,
                      "chosen_id": chosen_id})


class AskRequest(BaseModel):
    user_id: str
    db_id: str
    question: str
    k: Optional[int] = None
    alpha_profile: Optional[float] = None


class FeedbackRequest(BaseModel):
    session_id: str
    chosen_candidate_id: Optional[str] = None


def create_app(config: ServiceConfig,
               backend: LlmBackend | None = None,
               provider: SimilarityProvider | None = None) -> FastAPI:
    app = FastAPI(title="ambisql", version="0.1.0")

    backend = backend or build_backend(config)
    provider = provider or build_provider(config)
    databases = {db_id: Database.load(path)
                 for db_id, path in config.databases.items()}
    hint_store = HintStore(journal_path=config.hint_journal)
    sessions = SessionLog(config.session_journal)
    model: ConformalModel | None = None
    if config.calibration_artifact and os.path.exists(config.calibration_artifact):
        model = ConformalModel.load(config.calibration_artifact)

    @app.post("/ask")
    def ask(req: AskRequest) -> dict:
        db = databases.get(req.db_id)
        if db is None:
            raise HTTPException(status_code=404, detail=f"unknown db {req.db_id!r}")
        if config.selector_enabled and model is None:
            raise HTTPException(status_code=409,
                                detail="selector enabled but no calibration artifact")
        question = Question(text=req.question, user_id=req.user_id, db_id=req.db_id)
        k = req.k if req.k is not None else config.pipeline.max_calls
        if k < 1:
            raise HTTPException(status_code=422, detail="k must be >= 1")
        try:
            extract_entities(backend, question)
            hints = ()
            item_provider = provider
            if config.pipeline.personalization_enabled:
                hints = tuple(hints_for(hint_store, req.user_id, question, provider))
                if hints:
                    item_provider = provider.with_overrides(hint_overrides(hints))
            trace = gen_sql_queries(backend, item_provider, db.schema, question,
                                    k, hints)
            texts = trace.final_queries()
            candidates = [SqlCandidate(sql_text=t, strategy="odin", id=f"c{i}")
                          for i, t in enumerate(texts)]
            scorer = make_scorer(config.pipeline, backend, item_provider,
                                 db.schema, hints, allow_fallback=True)
            candidates = score_candidates(candidates, question, scorer)
            shown = candidates
            if config.selector_enabled and model is not None:
                active = model
                if req.alpha_profile is not None:
                    active = model.with_alpha(req.alpha_profile)
                shown = select(active, candidates)
        except BackendUnavailable as exc:
            raise HTTPException(status_code=502, detail=str(exc)) from exc
        except GenerationRefused as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc

        session = Session(
            session_id=uuid.uuid4().hex,
            user_id=req.user_id,
            db_id=req.db_id,
            question_text=req.question,
            candidates=[{"id": c.id, "sql": c.sql_text} for c in shown],
        )
        sessions.open(session)
        payload = []
        for cand in shown:
            explanation = []
            for entity in question.entities or ():
                try:
                    col = schema_map(item_provider, entity, cand.sql_text, db.schema)
                    explanation.append({"entity": entity.phrase, "column": str(col)})
                except NoColumnsUsed:
                    continue
            payload.append({
                "id": cand.id,
                "sql": cand.sql_text,
                "score": cand.score,
                "confidence": None if cand.score is None else round(1.0 - cand.score, 6),
                "explanation": explanation,
            })
        return {"session_id": session.session_id, "candidates": payload}

    @app.post("/feedback")
    def feedback(req: FeedbackRequest) -> dict:
        session = sessions.sessions.get(req.session_id)
        if session is None:
            raise HTTPException(status_code=404,
                                detail=f"unknown session {req.session_id!r}")
        if session.status != "open":
            raise HTTPException(status_code=409, detail="session already resolved")
        ids = {c["id"] for c in session.candidates}
        if req.chosen_candidate_id is not None and req.chosen_candidate_id not in ids:
            raise HTTPException(status_code=422,
                                detail="chosen candidate is not part of this session")

        db = databases[session.db_id]
        question = Question(text=session.question_text, user_id=session.user_id,
                            db_id=session.db_id)
        shown = tuple(SqlCandidate(sql_text=c["sql"], strategy="odin", id=c["id"])
                      for c in session.candidates)
        event = FeedbackEvent(session_id=session.session_id, question=question,
                              shown=shown, chosen_id=req.chosen_candidate_id)
        try:
            hints = apply_feedback(hint_store, event, provider, db.schema,
                                   backend=backend)
        except (GenerationRefused, NoColumnsUsed, SqlError) as exc:
            sessions.resolve(session.session_id, req.chosen_candidate_id)
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        sessions.resolve(session.session_id, req.chosen_candidate_id)
        return {"hints_created": [_hint_payload(h) for h in hints]}

    @app.get("/hints")
    def list_hints(user_id: str) -> dict:
        return {"hints": [_hint_payload(h)
                          for h in hint_store.active_hints(user_id)]}

    @app.delete("/hints/{hint_id}")
    def delete_hint(hint_id: str) -> dict:
        if not hint_store.delete(hint_id):
            raise HTTPException(status_code=404, detail=f"unknown hint {hint_id!r}")
        return {"deleted": hint_id}

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "databases": sorted(databases),
                "selector_enabled": config.selector_enabled}

    if config.static_dir and os.path.isdir(config.static_dir):
        # html=True serves index.html at /ui/, keeping its relative asset
        # paths valid whether opened from disk or from the service.
        app.mount("/ui", StaticFiles(directory=config.static_dir, html=True),
                  name="ui")

        @app.get("/")
        def index() -> RedirectResponse:
            return RedirectResponse(url="/ui/")

    return app


def _hint_payload(hint) -> dict:
    return {
        "id": hint.hint_id,
        "entity": hint.entity,
        "preferred": str(hint.preferred),
        "rejected": [str(r) for r in hint.rejected],
        "text": hint.text,
        "created_at": hint.created_at,
    }
