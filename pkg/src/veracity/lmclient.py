"""HTTP scoring client, prompt templates, and LM-backed labeling.

The scoring protocol is a single POST /v1/score carrying a prompt, a
continuation, and a `cached_prefix_tokens` hint; the server returns per-token
logprobs for the continuation plus how many tokens it actually processed.
Tokenization is whitespace on both sides, so cache hints are exact and the
client-side cost accounting can be cross-checked against server counters.

Retries apply to transport failures only; an HTTP error status is a real
answer from the server and is surfaced immediately as EndpointError.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from importlib import resources
from typing import Sequence

import httpx

from veracity.core import (
    DataError,
    EndpointError,
    ReasoningProblem,
    VeracityVector,
)
from veracity.oracle import RewardOracle

REWARD_TEMPLATES = ("reward_logic", "reward_math", "reward_avi")
BASELINE_METHODS = ("many2many", "cot", "recursive", "voting")

_JUDGEMENT_WORDS = {0: "Incorrect", 1: "Correct", 2: "Unrelated"}


def tokenize(text: str) -> list[str]:
    """Whitespace tokens; the unit both sides of the protocol count in."""
    return text.split()


def token_count(text: str) -> int:
    return len(text.split())


def common_prefix_len(a: Sequence[str], b: Sequence[str]) -> int:
    n = 0
    for x, y in zip(a, b):
        if x != y:
            break
        n += 1
    return n


# ---------------------------------------------------------------------------
# prompt templates


def load_demos(kind: str) -> str:
    """Bundled few-shot demonstrations ("logic" or "math")."""
    if kind not in ("logic", "math"):
        raise ValueError(f"no demos bundled for {kind!r}")
    return (
        resources.files("veracity")
        .joinpath(f"assets/demos_{kind}.txt")
        .read_text(encoding="utf-8")
        .strip()
    )


def _steps_block(problem: ReasoningProblem) -> str:
    return "\n".join(
        f"Step {i + 1}: {s.text}" for i, s in enumerate(problem.chain.steps)
    )


def render_reward_prompt(
    problem: ReasoningProblem, kind: str = "reward_logic", demos: str | None = None
) -> str:
    """Prompt scored against a label-assignment continuation.

    reward_logic / reward_math end at the assignment header; reward_avi states
    the answer as Unknown so only the step labels carry signal.
    """
    if kind not in REWARD_TEMPLATES:
        raise ValueError(f"unknown reward template {kind!r}")
    head = f"{demos}\n\n" if demos else ""
    body = (
        f"### Context\n{problem.context}\n\n"
        f"### Query\n{problem.query}\n\n"
        f"### Reasoning Steps\n{_steps_block(problem)}\n\n"
    )
    if kind == "reward_math":
        tail = "### Step Judgements\n"
    elif kind == "reward_avi":
        tail = "### Answer\nUnknown\n\n### Label Vector (V_z)\n"
    else:
        tail = "### Label Vector (V_z)\n"
    return head + body + tail


def render_label_continuation(
    labels: Sequence[int], answer: str, kind: str = "reward_logic"
) -> str:
    """The continuation whose token logprobs define the reward."""
    if kind not in REWARD_TEMPLATES:
        raise ValueError(f"unknown reward template {kind!r}")
    if kind == "reward_math":
        lines = "\n".join(
            f"Step {i + 1}: {_JUDGEMENT_WORDS[int(x)]}" for i, x in enumerate(labels)
        )
        return f"{lines}\n\n### Answer\n{answer}"
    line = " ".join(str(int(x)) for x in labels)
    if kind == "reward_avi":
        return line
    return f"{line}\n\n### Answer\n{answer}"


def render_labeling_prompt(
    problem: ReasoningProblem, method: str = "many2many", step_index: int | None = None
) -> str:
    """Generation prompt for the direct-labeling baselines."""
    if method not in BASELINE_METHODS:
        raise ValueError(f"unknown baseline method {method!r}")
    body = (
        f"### Context\n{problem.context}\n\n"
        f"### Query\n{problem.query}\n\n"
    )
    if method == "recursive":
        if step_index is None or not 0 <= step_index < len(problem.chain):
            raise ValueError("recursive labeling needs a valid step_index")
        shown = "\n".join(
            f"Step {i + 1}: {s.text}"
            for i, s in enumerate(problem.chain.steps[: step_index + 1])
        )
        return (
            body
            + f"### Reasoning Steps\n{shown}\n\n"
            + "### Instructions\n"
            + f"Is Step {step_index + 1} correct given the context and the steps "
            + 'before it? Respond with JSON: {"Label": true} or {"Label": false}.\n'
        )
    instructions = (
        "Decide for every step whether it is correct. "
        'Respond with JSON: {"Label": [true, false, ...]}, one entry per step.'
    )
    if method == "cot":
        instructions += " Think it through step by step, then put the JSON object on the last line."
    return body + f"### Reasoning Steps\n{_steps_block(problem)}\n\n### Instructions\n{instructions}\n"


# ---------------------------------------------------------------------------
# label parsing


@dataclass(frozen=True)
class ParsedLabels:
    labels: tuple[int, ...]
    padded: bool = False
    truncated: bool = False


def _coerce_label(x: object) -> int:
    if isinstance(x, bool):
        return 1 if x else 0
    if isinstance(x, int) and 0 <= x <= 2:
        return x
    raise DataError(f"label entry {x!r} is not a boolean or a class in 0..2")


def parse_label_json(text: str, expected_len: int | None = None) -> ParsedLabels:
    """Extract the first JSON object with a "Label" key from generated text.

    The value may be one boolean/int (single-step form) or a list.  When
    expected_len is given, short vectors are padded with 1 (assume-true) and
    long ones truncated, with flags saying so.
    """
    decoder = json.JSONDecoder()
    found: object = None
    pos = text.find("{")
    while pos != -1:
        try:
            obj, _ = decoder.raw_decode(text, pos)
        except ValueError:
            pos = text.find("{", pos + 1)
            continue
        if isinstance(obj, dict) and "Label" in obj:
            found = obj["Label"]
            break
        pos = text.find("{", pos + 1)
    if found is None:
        snippet = text if len(text) <= 200 else text[:200] + "..."
        raise DataError(f"no label JSON found in generation: {snippet!r}")

    raw = found if isinstance(found, list) else [found]
    labels = [_coerce_label(x) for x in raw]
    padded = truncated = False
    if expected_len is not None:
        if len(labels) < expected_len:
            labels += [1] * (expected_len - len(labels))
            padded = True
        elif len(labels) > expected_len:
            labels = labels[:expected_len]
            truncated = True
    return ParsedLabels(tuple(labels), padded=padded, truncated=truncated)


# ---------------------------------------------------------------------------
# HTTP client


@dataclass(frozen=True)
class ScoreResult:
    tokens: tuple[str, ...]
    token_logprobs: tuple[float, ...]
    processed_tokens: int

    @property
    def total_logprob(self) -> float:
        return sum(self.token_logprobs)


class ScoringEndpoint:
    """Client for the /v1 scoring protocol.

    caching selects the cache hints sessions send: "none", "prefix" (shared
    prompt reused), or "prefix_plus_divergence" (also reuse the common prefix
    of consecutive continuations).  `transport` is injectable so tests can run
    against an in-process ASGI app.
    """

    def __init__(
        self,
        base_url: str,
        model: str = "mock",
        api_key: str | None = None,
        caching: str = "prefix",
        timeout: float = 30.0,
        max_retries: int = 3,
        backoff: float = 0.1,
        transport: httpx.BaseTransport | None = None,
    ) -> None:
        if caching not in ("none", "prefix", "prefix_plus_divergence"):
            raise ValueError(f"unknown caching mode {caching!r}")
        if max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        self.model = model
        self.caching = caching
        self.max_retries = max_retries
        self.backoff = backoff
        headers = {}
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        self._client = httpx.Client(
            base_url=base_url, headers=headers, timeout=timeout, transport=transport
        )

    def close(self) -> None:
        self._client.close()

    def __enter__(self) -> "ScoringEndpoint":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def _request(self, method: str, path: str, payload: dict | None = None) -> dict:
        attempt = 0
        while True:
            try:
                response = self._client.request(method, path, json=payload)
            except httpx.TransportError as e:
                if attempt >= self.max_retries:
                    raise EndpointError(
                        f"{path}: transport failure after {attempt + 1} attempts: {e}"
                    ) from e
                time.sleep(self.backoff * (2**attempt))
                attempt += 1
                continue
            if response.status_code != 200:
                body = response.text
                if len(body) > 200:
                    body = body[:200] + "..."
                raise EndpointError(f"{path}: HTTP {response.status_code}: {body}")
            return response.json()

    def _post(self, path: str, payload: dict) -> dict:
        return self._request("POST", path, payload)

    def get_stats(self) -> dict:
        """Server-side counters (mock servers expose these; others may not)."""
        return self._request("GET", "/v1/stats")

    def reset(self, config: dict | None = None) -> None:
        """Zero the server counters; with a config dict, also reconfigure."""
        self._request("POST", "/v1/reset", config)

    def score(
        self,
        prompt: str,
        continuation: str,
        cached_prefix_tokens: int = 0,
        tag: str | None = None,
    ) -> ScoreResult:
        payload = {
            "model": self.model,
            "prompt": prompt,
            "continuation": continuation,
            "cached_prefix_tokens": cached_prefix_tokens,
        }
        if tag is not None:
            payload["tag"] = tag
        data = self._post("/v1/score", payload)
        try:
            return ScoreResult(
                tokens=tuple(data["tokens"]),
                token_logprobs=tuple(float(x) for x in data["token_logprobs"]),
                processed_tokens=int(data["processed_tokens"]),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise EndpointError(f"malformed score response: {e}") from e

    def generate(
        self, prompt: str, max_tokens: int = 256, temperature: float = 0.0
    ) -> str:
        payload = {
            "model": self.model,
            "prompt": prompt,
            "max_tokens": max_tokens,
            "temperature": temperature,
        }
        data = self._post("/v1/generate", payload)
        try:
            return str(data["text"])
        except KeyError as e:
            raise EndpointError(f"malformed generate response: {e}") from e


class ScoringSession:
    """Cache-aware scoring of many continuations against one fixed prompt.

    Tracks what the server can reuse under the endpoint's caching mode and
    records the measured divergence offsets, so `scored_tokens` here must
    agree with the server's processed-token counter and with the exact cost
    model.
    """

    def __init__(self, endpoint: ScoringEndpoint, prompt: str, tag: str | None = None):
        self.endpoint = endpoint
        self.prompt = prompt
        self.tag = tag
        self.prompt_tokens = token_count(prompt)
        self.calls = 0
        self.scored_tokens = 0
        self.divergence_offsets: list[int] = []
        self._prev_continuation: list[str] | None = None

    def score(self, continuation: str) -> ScoreResult:
        tokens = tokenize(continuation)
        mode = self.endpoint.caching
        if self.calls == 0 or mode == "none":
            cached = 0
        elif mode == "prefix":
            cached = self.prompt_tokens
        else:
            d = common_prefix_len(self._prev_continuation, tokens)
            self.divergence_offsets.append(d)
            cached = self.prompt_tokens + d
        result = self.endpoint.score(
            self.prompt, continuation, cached_prefix_tokens=cached, tag=self.tag
        )
        self.calls += 1
        self.scored_tokens += result.processed_tokens
        if mode == "prefix_plus_divergence":
            self._prev_continuation = tokens
        return result


# ---------------------------------------------------------------------------
# LM-backed reward oracle and labeling baselines


class LMRewardOracle(RewardOracle):
    """Reward = sum of continuation token logprobs under the endpoint.

    One cache session per problem; prefix scoring renders a truncated label
    line, which is comparable across assignments of the same prefix length.
    """

    def __init__(
        self,
        endpoint: ScoringEndpoint,
        template: str = "reward_logic",
        num_classes: int = 2,
        demos: str | None = None,
    ) -> None:
        if template not in REWARD_TEMPLATES:
            raise ValueError(f"unknown reward template {template!r}")
        if num_classes < 2:
            raise ValueError("num_classes must be >= 2")
        self.endpoint = endpoint
        self.template = template
        self._k = num_classes
        self.demos = demos
        self._sessions: dict[str, ScoringSession] = {}

    @property
    def num_classes(self) -> int:
        return self._k

    def session_for(self, problem: ReasoningProblem) -> ScoringSession:
        session = self._sessions.get(problem.id)
        if session is None:
            prompt = render_reward_prompt(problem, self.template, self.demos)
            session = ScoringSession(self.endpoint, prompt, tag=problem.id)
            self._sessions[problem.id] = session
        return session

    def log_reward(self, problem: ReasoningProblem, v: VeracityVector) -> float:
        if problem is None:
            raise ValueError("LM reward needs the problem text")
        if len(v) != len(problem.chain):
            raise ValueError("assignment length must match the chain")
        continuation = render_label_continuation(v.labels, problem.answer, self.template)
        return self.session_for(problem).score(continuation).total_logprob

    def log_reward_prefix(
        self, problem: ReasoningProblem, prefix: Sequence[int], i: int | None = None
    ) -> float:
        if problem is None:
            raise ValueError("LM reward needs the problem text")
        continuation = render_label_continuation(
            [int(x) for x in prefix], problem.answer, self.template
        )
        return self.session_for(problem).score(continuation).total_logprob


@dataclass(frozen=True)
class BaselineResult:
    vector: VeracityVector
    generate_calls: int
    padded: bool = False
    truncated: bool = False


def _vector_from_labels(labels: Sequence[int]) -> VeracityVector:
    k = 3 if any(x == 2 for x in labels) else 2
    return VeracityVector(tuple(int(x) for x in labels), num_classes=k)


def run_labeling_baseline(
    endpoint: ScoringEndpoint,
    problem: ReasoningProblem,
    method: str = "many2many",
    num_votes: int = 50,
    temperature: float = 0.5,
    max_tokens: int = 512,
) -> BaselineResult:
    """Direct LM labeling without search.

    many2many: one generation labels every step at once.
    cot: same, after free-form reasoning; the JSON is wherever it is.
    recursive: one generation per step, seeing only the steps so far.
    voting: num_votes sampled many2many generations, per-step majority,
        ties resolved to label 1.
    """
    if method not in BASELINE_METHODS:
        raise ValueError(f"unknown baseline method {method!r}")
    n = len(problem.chain)

    if method == "recursive":
        labels = []
        for i in range(n):
            text = endpoint.generate(
                render_labeling_prompt(problem, "recursive", step_index=i),
                max_tokens=max_tokens,
                temperature=0.0,
            )
            labels.append(parse_label_json(text, expected_len=1).labels[0])
        return BaselineResult(_vector_from_labels(labels), generate_calls=n)

    if method in ("many2many", "cot"):
        text = endpoint.generate(
            render_labeling_prompt(problem, method), max_tokens=max_tokens, temperature=0.0
        )
        parsed = parse_label_json(text, expected_len=n)
        return BaselineResult(
            _vector_from_labels(parsed.labels),
            generate_calls=1,
            padded=parsed.padded,
            truncated=parsed.truncated,
        )

    if num_votes < 1:
        raise ValueError("voting needs num_votes >= 1")
    prompt = render_labeling_prompt(problem, "many2many")
    tallies = [dict() for _ in range(n)]
    padded = truncated = False
    for _ in range(num_votes):
        text = endpoint.generate(prompt, max_tokens=max_tokens, temperature=temperature)
        parsed = parse_label_json(text, expected_len=n)
        padded = padded or parsed.padded
        truncated = truncated or parsed.truncated
        for i, x in enumerate(parsed.labels):
            tallies[i][x] = tallies[i].get(x, 0) + 1
    labels = []
    for counts in tallies:
        top = max(counts.values())
        winners = [label for label, c in counts.items() if c == top]
        labels.append(1 if len(winners) > 1 else winners[0])
    return BaselineResult(
        _vector_from_labels(labels),
        generate_calls=num_votes,
        padded=padded,
        truncated=truncated,
    )
