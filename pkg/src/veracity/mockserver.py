"""Deterministic in-process scoring server for tests and offline runs.

Implements the /v1 protocol the client speaks: score, generate, stats, reset.
Tokenization is whitespace.  Two scoring modes:

* "table": each continuation token is looked up in a logprob table, with a
  default for unknown tokens.  Good for byte-stable golden tests.
* "planted": tokens "0"/"1"/"2" before the first "###" token form a label
  line; the i-th one scores -weight when it disagrees with the configured
  truth (looked up per request tag, falling back to a global truth).  All
  other tokens score a constant filler.  This makes the HTTP reward an affine
  copy of a separable planted landscape, so search behaviour end to end is
  predictable.

The server independently meters processed tokens as
len(prompt)+len(continuation)-cached_prefix_tokens, which lets tests confirm
the client's cache hints and the cost model agree with what a server would
actually compute.
"""

from __future__ import annotations

import threading
from typing import Any

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

_DEFAULTS: dict[str, Any] = {
    "mode": "table",
    "table": {},
    "default_logprob": -1.0,
    "truth": None,
    "truths": {},
    "weight": 1.0,
    "filler_logprob": -0.05,
    "generations": ['{"Label": [true]}'],
    "api_key": None,
    "fail_next": 0,
}


class ScoreRequest(BaseModel):
    model: str
    prompt: str
    continuation: str
    cached_prefix_tokens: int = Field(default=0, ge=0)
    tag: str | None = None


class GenerateRequest(BaseModel):
    model: str
    prompt: str
    max_tokens: int = Field(default=256, ge=1)
    temperature: float = Field(default=0.0, ge=0.0)


class _State:
    def __init__(self, config: dict[str, Any] | None):
        self.lock = threading.Lock()
        self.configure(config or {})

    def configure(self, config: dict[str, Any]) -> None:
        unknown = set(config) - set(_DEFAULTS)
        if unknown:
            raise ValueError(f"unknown mock config keys: {sorted(unknown)}")
        merged = {**_DEFAULTS, **config}
        if merged["mode"] not in ("table", "planted"):
            raise ValueError(f"unknown mock mode {merged['mode']!r}")
        self.config = merged
        self.reset_counters()

    def reset_counters(self) -> None:
        self.score_requests = 0
        self.generate_requests = 0
        self.scored_tokens = 0
        self.continuation_tokens = 0
        self.generation_index = 0
        self.fail_next = int(self.config["fail_next"])


def _score_tokens(state: _State, tokens: list[str], tag: str | None) -> list[float]:
    cfg = state.config
    if cfg["mode"] == "table":
        table = cfg["table"]
        default = float(cfg["default_logprob"])
        return [float(table.get(t, default)) for t in tokens]

    truth = cfg["truths"].get(tag) if tag is not None else None
    if truth is None:
        truth = cfg["truth"]
    if truth is None:
        raise ValueError("planted mode needs a 'truth' (or a per-tag entry in 'truths')")
    weight = float(cfg["weight"])
    filler = float(cfg["filler_logprob"])
    out = []
    label_index = 0
    in_label_region = True
    for t in tokens:
        if t == "###":
            in_label_region = False
        if in_label_region and t in ("0", "1", "2") and label_index < len(truth):
            out.append(0.0 if int(t) == int(truth[label_index]) else -weight)
            label_index += 1
        else:
            out.append(filler)
    return out


def create_app(config: dict[str, Any] | None = None) -> FastAPI:
    app = FastAPI(title="veracity mock scoring server")
    state = _State(config)
    app.state.mock = state

    def _auth_failure(request: Request) -> JSONResponse | None:
        key = state.config["api_key"]
        if key is None:
            return None
        if request.headers.get("authorization") == f"Bearer {key}":
            return None
        return JSONResponse({"error": "invalid api key"}, status_code=401)

    def _maybe_fail() -> JSONResponse | None:
        with state.lock:
            if state.fail_next > 0:
                state.fail_next -= 1
                return JSONResponse({"error": "scripted failure"}, status_code=503)
        return None

    @app.post("/v1/score")
    def score(req: ScoreRequest, request: Request):
        denied = _auth_failure(request) or _maybe_fail()
        if denied is not None:
            return denied
        prompt_tokens = req.prompt.split()
        continuation_tokens = req.continuation.split()
        total = len(prompt_tokens) + len(continuation_tokens)
        processed = total - min(req.cached_prefix_tokens, total)
        try:
            logprobs = _score_tokens(state, continuation_tokens, req.tag)
        except ValueError as e:
            return JSONResponse({"error": str(e)}, status_code=422)
        with state.lock:
            state.score_requests += 1
            state.scored_tokens += processed
            state.continuation_tokens += len(continuation_tokens)
        return {
            "tokens": continuation_tokens,
            "token_logprobs": logprobs,
            "processed_tokens": processed,
        }

    @app.post("/v1/generate")
    def generate(req: GenerateRequest, request: Request):
        denied = _auth_failure(request) or _maybe_fail()
        if denied is not None:
            return denied
        generations = state.config["generations"]
        with state.lock:
            text = generations[state.generation_index % len(generations)]
            state.generation_index += 1
            state.generate_requests += 1
        return {"text": text}

    @app.get("/v1/stats")
    def stats():
        with state.lock:
            return {
                "mode": state.config["mode"],
                "score_requests": state.score_requests,
                "generate_requests": state.generate_requests,
                "scored_tokens": state.scored_tokens,
                "continuation_tokens": state.continuation_tokens,
            }

    @app.post("/v1/reset")
    async def reset(request: Request):
        body = await request.body()
        if body:
            import json as _json

            try:
                new_config = _json.loads(body)
            except ValueError as e:
                return JSONResponse({"error": f"invalid config: {e}"}, status_code=422)
            if not isinstance(new_config, dict):
                return JSONResponse({"error": "config must be an object"}, status_code=422)
            try:
                with state.lock:
                    state.configure(new_config)
            except ValueError as e:
                return JSONResponse({"error": str(e)}, status_code=422)
        else:
            with state.lock:
                state.reset_counters()
        return {"ok": True}

    return app


def serve(host: str = "127.0.0.1", port: int = 8977, config: dict[str, Any] | None = None) -> None:
    """Run the mock server in the foreground (used by the CLI subcommand)."""
    import uvicorn

    uvicorn.run(create_app(config), host=host, port=port, log_level="warning")
