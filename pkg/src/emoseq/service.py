"""JSON-over-HTTP inference service backing the chat UI.

Hosts any number of dialogue variants plus one classifier; handlers share
the models read-only and each request owns its decode state.
"""
from __future__ import annotations

import hashlib
import json
import os

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .errors import ContractError
from .vocab import ALL_EMOTIONS, EMOTIONS, NON_EMOTION, NUM_EMOTIONS, emotion_id

MAX_TEXT_CHARS = 2000


def model_digest(model) -> str:
    ident = {
        "tag": getattr(model, "tag", None) or "baseline",
        "d": model.d,
        "d_w": model.d_w,
        "vocab": len(model.vocab),
        "padding": model.padding,
    }
    return hashlib.sha256(json.dumps(ident, sort_keys=True).encode()).hexdigest()[:12]


def build_app(models: dict, classifier, default_variant: str | None = None,
              frontend_dir: str | None = None) -> FastAPI:
    if not models:
        raise ContractError("service needs at least one dialogue model")
    default_variant = default_variant or next(iter(models))
    app = FastAPI(title="emoseq")

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.get("/api/emotions")
    def emotions():
        return list(EMOTIONS)

    @app.get("/api/models")
    def model_list():
        return [
            {"variant": tag, "config_digest": model_digest(m)}
            for tag, m in models.items()
        ]

    @app.post("/api/chat")
    async def chat(request: Request):
        try:
            body = await request.json()
        except Exception:
            return JSONResponse(status_code=400, content={"error": "body must be JSON"})
        if not isinstance(body, dict):
            return JSONResponse(status_code=400, content={"error": "body must be an object"})
        text = body.get("text")
        emotion = body.get("emotion")
        variant = body.get("variant", "default")
        if not isinstance(text, str) or not text.strip():
            return JSONResponse(status_code=400, content={"error": "text must be a non-empty string"})
        if len(text) > MAX_TEXT_CHARS:
            return JSONResponse(status_code=413, content={"error": f"text exceeds {MAX_TEXT_CHARS} characters"})
        if emotion not in ALL_EMOTIONS:
            return JSONResponse(status_code=400, content={"error": f"unknown emotion {emotion!r}"})
        if variant == "default":
            variant = default_variant
        if variant not in models:
            return JSONResponse(status_code=400, content={"error": f"unknown variant {variant!r}"})
        model = models[variant]
        e = emotion_id(emotion)
        try:
            out_tokens, trace = model.respond(text, e)
        except ContractError as exc:
            return JSONResponse(status_code=400, content={"error": str(exc)})
        if out_tokens:
            dist = classifier.classify(" ".join(out_tokens))
            probs = dist.probs
            detected = EMOTIONS[dist.top_id]
        else:
            probs = np.full(NUM_EMOTIONS, 1.0 / NUM_EMOTIONS)
            detected = NON_EMOTION
        return {
            "response": " ".join(out_tokens),
            "detected_emotion": detected,
            "distribution": [float(p) for p in probs],
            "attention": {
                "source_tokens": trace.source_tokens,
                "output_tokens": trace.output_tokens,
                "matrix": [[float(v) for v in row] for row in trace.matrix],
            },
        }

    if frontend_dir and os.path.isdir(frontend_dir):
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=frontend_dir, html=True), name="ui")
    return app


def serve(models: dict, classifier, port: int = 8080, host: str = "127.0.0.1",
          default_variant: str | None = None, frontend_dir: str | None = None):
    """Run the service until interrupted."""
    import uvicorn

    app = build_app(models, classifier, default_variant, frontend_dir)
    uvicorn.run(app, host=host, port=port, log_level="info")
