"""HTTP service exposing embedding, inversion, judging, and text transforms.

Endpoints validate bodies by hand so malformed requests get 400, reserving
422 for the one case the protocol defines it: judge output that stayed
unparseable after the internal re-ask. Backend inference runs behind a lock,
queueing concurrent requests for single-inference-at-a-time models. All
endpoints are stateless between requests.
"""

from __future__ import annotations

import logging
import threading

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .backends import Backend, DeterministicBackend, JudgeOutputUnparseable
from .cassette import CassetteRecorder, CassetteStore
from .config import ServiceConfig

logger = logging.getLogger(__name__)


def _error(status: int, detail: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"detail": detail})


def create_app(config: ServiceConfig | None = None, backend: Backend | None = None) -> FastAPI:
    config = config or ServiceConfig()
    app = FastAPI(title="twin-model-services", version="0.1.0")

    cassette: CassetteStore | None = None
    recorder: CassetteRecorder | None = None
    load_error: str | None = None

    if config.backend == "cassette":
        try:
            cassette = CassetteStore(config.cassette_path)
        except (OSError, ValueError, KeyError) as exc:
            load_error = f"cassette load failed: {exc}"
            logger.error("%s", load_error)
    elif backend is None:
        try:
            backend = DeterministicBackend(
                model_id=config.embedding_model_id, dim=config.embedding_dim
            )
        except Exception as exc:  # model load failure -> 503 on every endpoint
            load_error = f"backend load failed: {exc}"
            logger.error("%s", load_error)

    if config.record_path:
        recorder = CassetteRecorder(config.record_path)

    inference_lock = threading.Lock()

    def unauthorized(request: Request) -> JSONResponse | None:
        if config.bearer_token is None:
            return None
        header = request.headers.get("authorization", "")
        if header != f"Bearer {config.bearer_token}":
            return _error(401, "missing or invalid bearer token")
        return None

    async def read_body(request: Request) -> dict | JSONResponse:
        try:
            body = await request.json()
        except Exception:
            return _error(400, "request body is not valid JSON")
        if not isinstance(body, dict):
            return _error(400, "request body must be a JSON object")
        return body

    def serve(endpoint: str, body: dict, compute) -> JSONResponse:
        """Shared replay/record/compute path for one request body."""
        if cassette is not None:
            response = cassette.lookup(endpoint, body)
            if response is None:
                return _error(404, f"no recorded response for this {endpoint} request")
            return JSONResponse(response)
        if backend is None:
            return _error(503, load_error or "backend unavailable")
        with inference_lock:
            response = compute()
        if recorder is not None:
            recorder.record(endpoint, body, response)
        return JSONResponse(response)

    @app.get("/health")
    def health():
        if config.backend == "cassette":
            dim = config.embedding_dim
        elif backend is None:
            return _error(503, load_error or "backend unavailable")
        else:
            dim = getattr(backend, "dim", config.embedding_dim)
        return {"status": "ok", "dim": dim}

    @app.post("/embed")
    async def embed_endpoint(request: Request):
        denied = unauthorized(request)
        if denied is not None:
            return denied
        body = await read_body(request)
        if isinstance(body, JSONResponse):
            return body
        model = body.get("model")
        texts = body.get("texts")
        if not isinstance(model, str) or not isinstance(texts, list) or not texts:
            return _error(400, "body must be {'model': str, 'texts': [str, ...]}")
        if not all(isinstance(t, str) and t for t in texts):
            return _error(400, "texts must be non-empty strings")

        def compute():
            dim, vectors = backend.embed(model, texts)
            return {"dim": dim, "vectors": vectors}

        try:
            return serve("/embed", body, compute)
        except ValueError as exc:
            return _error(400, str(exc))

    @app.post("/invert")
    async def invert_endpoint(request: Request):
        denied = unauthorized(request)
        if denied is not None:
            return denied
        body = await read_body(request)
        if isinstance(body, JSONResponse):
            return body
        vector = body.get("vector")
        steps = body.get("steps")
        beam_width = body.get("beam_width")
        if not isinstance(vector, list) or not vector:
            return _error(400, "body must carry a non-empty 'vector'")
        if not all(isinstance(x, (int, float)) for x in vector):
            return _error(400, "vector entries must be numbers")
        if not isinstance(steps, int) or steps < 1 or not isinstance(beam_width, int) or beam_width < 1:
            return _error(400, "steps and beam_width must be integers >= 1")

        def compute():
            return {"text": backend.invert(vector, steps, beam_width)}

        try:
            return serve("/invert", body, compute)
        except ValueError as exc:
            return _error(400, str(exc))

    @app.post("/judge")
    async def judge_endpoint(request: Request):
        denied = unauthorized(request)
        if denied is not None:
            return denied
        body = await read_body(request)
        if isinstance(body, JSONResponse):
            return body
        event_a = body.get("event_a")
        event_b = body.get("event_b")
        question = body.get("question")
        prompt = body.get("prompt")
        if not all(isinstance(x, str) for x in (event_a, event_b, question)):
            return _error(400, "body must carry string 'event_a', 'event_b', 'question'")

        def compute():
            try:
                return backend.judge(event_a, event_b, question, prompt)
            except JudgeOutputUnparseable:
                logger.warning("judge output unparseable; re-asking once")
                return backend.judge(event_a, event_b, question, prompt)

        try:
            return serve("/judge", body, compute)
        except JudgeOutputUnparseable as exc:
            return _error(422, f"judge output stayed unparseable after re-ask: {exc}")
        except ValueError as exc:
            return _error(400, str(exc))

    @app.post("/transform")
    async def transform_endpoint(request: Request):
        denied = unauthorized(request)
        if denied is not None:
            return denied
        body = await read_body(request)
        if isinstance(body, JSONResponse):
            return body
        op = body.get("op")
        text = body.get("text")
        if op not in ("anonymize", "summarize", "augment") or not isinstance(text, str) or not text:
            return _error(400, "body must be {'op': anonymize|summarize|augment, 'text': str}")

        def compute():
            return {"result": backend.transform(op, text)}

        try:
            return serve("/transform", body, compute)
        except ValueError as exc:
            return _error(400, str(exc))

    return app
