"""Session service: script upload, recommendation pipeline, palette edits with
event-log persistence, and the live rehearsal stream.

Persistence is a per-session append-only JSONL event log replayed on load, so
a restarted service reconstructs byte-identical session state without
re-running any provider.
"""

from __future__ import annotations

import hashlib
import json
import logging
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request, Response, WebSocket
from starlette.websockets import WebSocketDisconnect

from .config import Config
from .corpus import GestureDatabase, load_database, precompute_embeddings
from .embedding import EmbeddingCache, build_provider
from .proposal import GestureRegion, ProposalError, propose_regions
from .providers import build_completion_provider
from .retrieval import GestureCandidate, Recommendation, recommend_chunk
from .script import Chunk, Script, Span, parse_script, span_text
from . import tracker

log = logging.getLogger(__name__)


class SessionNotFound(KeyError):
    pass


class RegionNotFound(KeyError):
    pass


@dataclass
class ChunkResult:
    chunk_id: str
    regions: list[GestureRegion] = field(default_factory=list)
    recommendations: dict[str, Recommendation] = field(default_factory=dict)
    error: str | None = None


@dataclass
class Session:
    session_id: str
    document: str
    script: Script
    config: dict
    chunk_results: dict[str, ChunkResult] = field(default_factory=dict)
    palette: dict[str, dict] = field(default_factory=dict)
    created_at: float = 0.0

    def region(self, region_id: str) -> tuple[Chunk, GestureRegion, ChunkResult]:
        for chunk in self.script.chunks():
            result = self.chunk_results.get(chunk.chunk_id)
            if result is None:
                continue
            for r in result.regions:
                if r.region_id == region_id:
                    return chunk, r, result
        raise RegionNotFound(region_id)

    def is_deleted(self, region_id: str) -> bool:
        return bool(self.palette.get(region_id, {}).get("deleted"))

    def active_regions(self, chunk_id: str) -> list[GestureRegion]:
        result = self.chunk_results.get(chunk_id)
        if result is None:
            return []
        return [r for r in result.regions if not self.is_deleted(r.region_id)]


def _region_to_json(region: GestureRegion) -> dict:
    return {
        "region_id": region.region_id,
        "chunk_id": region.span.chunk_id,
        "start": region.span.start,
        "end": region.span.end,
        "source": region.source,
        "match_similarity": region.match_similarity,
        "status": region.status,
    }


def _region_from_json(rec: dict) -> GestureRegion:
    return GestureRegion(
        region_id=rec["region_id"],
        span=Span(rec["chunk_id"], rec["start"], rec["end"]),
        source=rec["source"],
        match_similarity=rec["match_similarity"],
        status=rec["status"],
    )


def _recommendation_to_json(rec: Recommendation) -> dict:
    return {
        "region_id": rec.region_id,
        "candidates": [
            {"entry_id": c.entry_id, "similarity": c.similarity, "rank": c.rank}
            for c in rec.candidates
        ],
        "selected_rank": rec.selected_rank,
        "selection_source": rec.selection_source,
    }


def _recommendation_from_json(rec: dict) -> Recommendation:
    return Recommendation(
        region_id=rec["region_id"],
        candidates=tuple(
            GestureCandidate(
                entry_id=c["entry_id"], similarity=c["similarity"], rank=c["rank"]
            )
            for c in rec["candidates"]
        ),
        selected_rank=rec["selected_rank"],
        selection_source=rec["selection_source"],
    )


class SessionStore:
    """Append-only JSONL event logs, one file per session."""

    def __init__(self, data_dir: str | Path):
        self.root = Path(data_dir) / "sessions"
        self.root.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def _path(self, session_id: str) -> Path:
        return self.root / f"{session_id}.jsonl"

    def append(self, session_id: str, event: dict) -> None:
        with self._lock:
            with self._path(session_id).open("a") as fh:
                fh.write(json.dumps(event, sort_keys=True) + "\n")

    def events(self, session_id: str) -> list[dict]:
        path = self._path(session_id)
        if not path.exists():
            raise SessionNotFound(session_id)
        with path.open() as fh:
            return [json.loads(line) for line in fh if line.strip()]

    def exists(self, session_id: str) -> bool:
        return self._path(session_id).exists()

    def discard(self, session_id: str) -> None:
        self._path(session_id).unlink(missing_ok=True)


class RehearsalService:
    """Pipeline + persistence facade the HTTP layer delegates to."""

    def __init__(self, config: Config):
        self.config = config
        self.store = SessionStore(config.data_dir)
        self.cache = EmbeddingCache(config.embedding_cache)
        self.embedder = build_provider(config.embedding_provider)
        self.emphasis_provider = build_completion_provider(config.emphasis_provider)
        self.selection_provider = build_completion_provider(config.selection_provider)
        self.db: GestureDatabase | None = None
        if config.database_path:
            self.db = precompute_embeddings(
                load_database(config.database_path), self.embedder, self.cache
            )
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()

    # -- session lifecycle ---------------------------------------------------

    def create_session(self, document: str) -> Session:
        if self.db is None or self.db.index is None:
            raise RuntimeError("no gesture database configured")
        script = parse_script(document, target_words=self.config.chunk_target_words)
        # Sorted so the snapshot round-trips byte-identically through the
        # sorted-key event log.
        config_snapshot = dict(sorted(self.config.to_dict().items()))
        session_id = hashlib.sha256(
            (document + json.dumps(config_snapshot, sort_keys=True)).encode()
        ).hexdigest()[:16]
        session = Session(
            session_id=session_id,
            document=document,
            script=script,
            config=config_snapshot,
            created_at=time.time(),
        )
        self.store.discard(session_id)
        self.store.append(
            session_id,
            {
                "type": "created",
                "session_id": session_id,
                "document": document,
                "config": config_snapshot,
                "created_at": session.created_at,
            },
        )
        for chunk in script.chunks():
            result = ChunkResult(chunk_id=chunk.chunk_id)
            try:
                regions = propose_regions(
                    chunk,
                    self.emphasis_provider,
                    self.embedder,
                    threshold=self.config.filter_threshold,
                    cache=self.cache,
                )
                recs = recommend_chunk(
                    chunk,
                    regions,
                    self.db,
                    self.embedder,
                    self.selection_provider,
                    k=self.config.knn_k,
                    cache=self.cache,
                )
                result.regions = regions
                result.recommendations = {r.region_id: r for r in recs}
            except ProposalError as exc:
                result.error = str(exc)
                log.warning("pipeline failed for chunk %s: %s", chunk.chunk_id, exc)
            session.chunk_results[chunk.chunk_id] = result
            self.store.append(
                session_id,
                {
                    "type": "pipeline",
                    "chunk_id": chunk.chunk_id,
                    "regions": [_region_to_json(r) for r in result.regions],
                    "recommendations": [
                        _recommendation_to_json(r)
                        for r in result.recommendations.values()
                    ],
                    "error": result.error,
                },
            )
        with self._lock:
            self._sessions[session_id] = session
        return session

    def get_session(self, session_id: str) -> Session:
        with self._lock:
            if session_id in self._sessions:
                return self._sessions[session_id]
        session = self._replay(session_id)
        with self._lock:
            self._sessions[session_id] = session
        return session

    def _replay(self, session_id: str) -> Session:
        events = self.store.events(session_id)
        session: Session | None = None
        for event in events:
            kind = event["type"]
            if kind == "created":
                session = Session(
                    session_id=event["session_id"],
                    document=event["document"],
                    script=parse_script(
                        event["document"],
                        target_words=event["config"].get("chunk_target_words", 100),
                    ),
                    config=event["config"],
                    created_at=event["created_at"],
                )
            elif session is None:
                raise ValueError(f"event before creation in log {session_id}")
            elif kind == "pipeline":
                result = ChunkResult(
                    chunk_id=event["chunk_id"],
                    regions=[_region_from_json(r) for r in event["regions"]],
                    recommendations={
                        r["region_id"]: _recommendation_from_json(r)
                        for r in event["recommendations"]
                    },
                    error=event["error"],
                )
                session.chunk_results[result.chunk_id] = result
            elif kind == "patch":
                self._apply_patch(session, event)
            elif kind == "run":
                pass  # transcripts are audit data, not state
        if session is None:
            raise SessionNotFound(session_id)
        return session

    # -- palette edits -------------------------------------------------------

    @staticmethod
    def _apply_patch(session: Session, event: dict) -> None:
        action = event["action"]
        region_id = event["region_id"]
        if action == "select_rank":
            entry = session.palette.setdefault(region_id, {})
            entry["selected_rank"] = event["rank"]
            entry.pop("deleted", None)
        elif action == "delete":
            session.palette.setdefault(region_id, {})["deleted"] = True
        elif action == "restore":
            session.palette.setdefault(region_id, {}).pop("deleted", None)

    def patch_region(self, session_id: str, region_id: str, action: str, rank: int | None = None) -> dict:
        session = self.get_session(session_id)
        chunk, region, result = session.region(region_id)
        if action == "select_rank":
            rec = result.recommendations.get(region_id)
            if rec is None:
                raise RegionNotFound(region_id)
            if rank is None or not 1 <= rank <= len(rec.candidates):
                raise ValueError(f"rank {rank} out of range 1..{len(rec.candidates)}")
        elif action not in ("delete", "restore"):
            raise ValueError(f"unknown action {action!r}")
        event = {"type": "patch", "region_id": region_id, "action": action, "rank": rank}
        self._apply_patch(session, event)
        self.store.append(session_id, event)
        return self.recommendation_view(session, region_id)

    # -- views ---------------------------------------------------------------

    def recommendation_view(self, session: Session, region_id: str) -> dict:
        chunk, region, result = session.region(region_id)
        rec = result.recommendations.get(region_id)
        overlay = session.palette.get(region_id, {})
        view = {
            "region": _region_to_json(region),
            "text": span_text(chunk, region.span),
            "deleted": bool(overlay.get("deleted")),
            "recommendation": None,
        }
        if rec is not None:
            selected_rank = overlay.get("selected_rank", rec.selected_rank)
            source = "user" if "selected_rank" in overlay else rec.selection_source
            candidates = []
            for c in rec.candidates:
                entry = self.db.entry(c.entry_id) if self.db else None
                candidates.append(
                    {
                        "entry_id": c.entry_id,
                        "similarity": c.similarity,
                        "rank": c.rank,
                        "region_text": entry.region_text if entry else None,
                        "clip_uri": entry.clip_uri if entry else None,
                    }
                )
            view["recommendation"] = {
                "candidates": candidates,
                "selected_rank": selected_rank,
                "selection_source": source,
            }
        return view

    def session_view(self, session: Session) -> dict:
        slides = []
        for slide in session.script.slides:
            chunks = []
            for chunk in slide.chunks:
                result = session.chunk_results.get(chunk.chunk_id)
                regions = []
                if result is not None:
                    for region in sorted(result.regions, key=lambda r: r.span.start):
                        regions.append(self.recommendation_view(session, region.region_id))
                chunks.append(
                    {
                        "chunk_id": chunk.chunk_id,
                        "raw_text": chunk.raw_text,
                        "tokens": [
                            {
                                "surface": t.surface,
                                "norm": t.norm,
                                "word_index": t.word_index,
                                "char_start": t.char_start,
                                "char_end": t.char_end,
                            }
                            for t in chunk.tokens
                        ],
                        "regions": regions,
                        "error": result.error if result else None,
                    }
                )
            slides.append(
                {"slide_id": slide.slide_id, "asset_ref": slide.asset_ref, "chunks": chunks}
            )
        return {
            "session_id": session.session_id,
            "created_at": session.created_at,
            "config": session.config,
            "slides": slides,
        }

    # -- rehearsal -----------------------------------------------------------

    def clip_for_region(self, session: Session, region_id: str) -> str:
        chunk, region, result = session.region(region_id)
        rec = result.recommendations.get(region_id)
        if rec is None or self.db is None:
            return ""
        overlay = session.palette.get(region_id, {})
        rank = overlay.get("selected_rank", rec.selected_rank)
        candidate = rec.candidates[rank - 1]
        return self.db.entry(candidate.entry_id).clip_uri

    def start_run(self, session: Session, chunk_id: str, run_id: str):
        chunk = session.script.chunk(chunk_id)
        regions = session.active_regions(chunk_id)
        return tracker.start_run(
            chunk,
            regions,
            run_id,
            clip_for_region=lambda rid: self.clip_for_region(session, rid),
            onset=int(session.config.get("onset_words", 4)),
        )

    def on_word(self, session: Session, state, word: str):
        chunk = session.script.chunk(state.chunk_id)
        regions = session.active_regions(state.chunk_id)
        return tracker.on_word(
            state,
            word,
            chunk,
            regions,
            clip_for_region=lambda rid: self.clip_for_region(session, rid),
            threshold=float(session.config.get("tracker_threshold", 50.0)),
            onset=int(session.config.get("onset_words", 4)),
        )

    def record_run(self, session: Session, run_id: str, chunk_id: str, transcript: list) -> None:
        self.store.append(
            session.session_id,
            {"type": "run", "run_id": run_id, "chunk_id": chunk_id, "transcript": transcript},
        )

    # -- clips ---------------------------------------------------------------

    def clip_path(self, clip_uri: str) -> Path:
        if self.db is None or clip_uri not in self.db.clip_uris():
            raise FileNotFoundError(clip_uri)
        if not self.config.clips_dir:
            raise FileNotFoundError(clip_uri)
        path = (Path(self.config.clips_dir) / clip_uri).resolve()
        root = Path(self.config.clips_dir).resolve()
        if root not in path.parents and path != root:
            raise FileNotFoundError(clip_uri)
        if not path.exists():
            raise FileNotFoundError(clip_uri)
        return path


def create_app(config: Config):
    """FastAPI application exposing the HTTP + WebSocket contract."""
    service = RehearsalService(config)
    app = FastAPI(title="gesturelab")
    app.state.service = service

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.post("/sessions", status_code=201)
    async def create_session(request: Request):
        body = await request.json()
        document = body.get("script")
        if not isinstance(document, str) or not document.strip():
            raise HTTPException(status_code=400, detail="missing script document")
        try:
            session = service.create_session(document)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return service.session_view(session)

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        try:
            session = service.get_session(session_id)
        except SessionNotFound:
            raise HTTPException(status_code=404, detail="session not found")
        return service.session_view(session)

    @app.patch("/sessions/{session_id}/regions/{region_id}")
    async def patch_region(session_id: str, region_id: str, request: Request):
        body = await request.json()
        action = body.get("action")
        rank = body.get("rank")
        try:
            return service.patch_region(session_id, region_id, action, rank)
        except SessionNotFound:
            raise HTTPException(status_code=404, detail="session not found")
        except RegionNotFound:
            raise HTTPException(status_code=404, detail="region not found")
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))

    @app.get("/clips/{clip_uri:path}")
    def get_clip(clip_uri: str, request: Request):
        try:
            path = service.clip_path(clip_uri)
        except FileNotFoundError:
            raise HTTPException(status_code=404, detail="clip not found")
        data = path.read_bytes()
        content_type = "video/mp4" if path.suffix == ".mp4" else "application/octet-stream"
        range_header = request.headers.get("range")
        if range_header and range_header.startswith("bytes="):
            try:
                spec = range_header[len("bytes=") :]
                start_s, _, end_s = spec.partition("-")
                start = int(start_s)
                end = int(end_s) if end_s else len(data) - 1
                end = min(end, len(data) - 1)
            except ValueError:
                raise HTTPException(status_code=416, detail="bad range")
            if start > end or start >= len(data):
                raise HTTPException(status_code=416, detail="range out of bounds")
            body = data[start : end + 1]
            return Response(
                content=body,
                status_code=206,
                media_type=content_type,
                headers={
                    "Content-Range": f"bytes {start}-{end}/{len(data)}",
                    "Accept-Ranges": "bytes",
                },
            )
        return Response(
            content=data,
            media_type=content_type,
            headers={"Accept-Ranges": "bytes"},
        )

    @app.websocket("/sessions/{session_id}/chunks/{chunk_id}/rehearse")
    async def rehearse(ws: WebSocket, session_id: str, chunk_id: str):
        await ws.accept()
        try:
            session = service.get_session(session_id)
            session.script.chunk(chunk_id)
        except (SessionNotFound, KeyError):
            await ws.send_text(json.dumps({"type": "error", "code": "not-found"}))
            await ws.close()
            return

        state = None
        run_counter = 0
        transcript: list = []

        async def send(obj: dict) -> None:
            await ws.send_text(json.dumps(obj))

        try:
            while True:
                try:
                    message = json.loads(await ws.receive_text())
                except json.JSONDecodeError:
                    await send({"type": "error", "code": "bad-message"})
                    continue
                kind = message.get("type")
                if kind == "start":
                    if state is not None and transcript:
                        service.record_run(session, state.run_id, chunk_id, transcript)
                    run_counter += 1
                    run_id = f"{session_id}-{chunk_id}-{run_counter}"
                    state, cues = service.start_run(session, chunk_id, run_id)
                    transcript = []
                    for cue in cues:
                        await send(
                            {
                                "type": "cue",
                                "region_id": cue.region_id,
                                "clip_uri": cue.clip_uri,
                                "flow_index": cue.triggered_at_flow_index,
                            }
                        )
                    await send({"type": "flow", "flow_index": state.flow_index})
                elif kind == "word":
                    if state is None:
                        await send({"type": "error", "code": "protocol"})
                        continue
                    word = message.get("text", "")
                    cues = service.on_word(session, state, word)
                    transcript.append([word, message.get("ts"), state.flow_index])
                    for cue in cues:
                        await send(
                            {
                                "type": "cue",
                                "region_id": cue.region_id,
                                "clip_uri": cue.clip_uri,
                                "flow_index": cue.triggered_at_flow_index,
                            }
                        )
                    await send({"type": "flow", "flow_index": state.flow_index})
                else:
                    await send({"type": "error", "code": "protocol"})
        except WebSocketDisconnect:
            if state is not None and transcript:
                service.record_run(session, state.run_id, chunk_id, transcript)

    return app
