"""Core value types shared across the package.

Immutable problem/chain/label containers, the annealing schedule, search
configuration, trace records, and the JSONL/CSV (de)serialization helpers.
Everything here is deterministic and side-effect free; all indices are 0-based.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

STEP_KINDS = ("fact", "rule", "conclusion", "arithmetic", "unrelated")

SCHEDULE_KINDS = ("constant", "linear", "cosine")

# Fixed class-name table for label values. Binary problems use the first two.
CLASS_NAMES = ("False", "True", "Unrelated")


class VeracityError(Exception):
    """Base class for package errors."""


class DataError(VeracityError):
    """Malformed input data (bad JSONL, schema violations, bad label arrays)."""


class EndpointError(VeracityError):
    """A scoring endpoint failed or is unreachable."""


@dataclass(frozen=True)
class Statement:
    """One reasoning step.

    numeric_out is the stated intermediate value of an arithmetic step and must
    be present exactly for kind == "arithmetic".
    """

    text: str
    kind: str = "conclusion"
    numeric_out: int | None = None

    def __post_init__(self) -> None:
        if not self.text:
            raise ValueError("statement text must be non-empty")
        if self.kind not in STEP_KINDS:
            raise ValueError(f"unknown statement kind {self.kind!r}")
        if (self.numeric_out is not None) != (self.kind == "arithmetic"):
            raise ValueError("numeric_out must be present iff kind is 'arithmetic'")


@dataclass(frozen=True)
class ReasoningChain:
    """An ordered tuple of statements; never empty."""

    steps: tuple[Statement, ...]

    def __post_init__(self) -> None:
        if not isinstance(self.steps, tuple):
            object.__setattr__(self, "steps", tuple(self.steps))
        if len(self.steps) == 0:
            raise ValueError("a reasoning chain needs at least one step")

    def __len__(self) -> int:
        return len(self.steps)

    def __iter__(self) -> Iterator[Statement]:
        return iter(self.steps)


@dataclass(frozen=True)
class VeracityVector:
    """Per-step label assignment: labels[i] in [0, num_classes).

    Class 0 is False, class 1 is True, class 2 (when present) is Unrelated.
    """

    labels: tuple[int, ...]
    num_classes: int = 2

    def __post_init__(self) -> None:
        if not isinstance(self.labels, tuple):
            object.__setattr__(self, "labels", tuple(self.labels))
        if len(self.labels) == 0:
            raise ValueError("empty veracity vector")
        if self.num_classes < 2:
            raise ValueError("num_classes must be >= 2")
        for x in self.labels:
            if not isinstance(x, int) or isinstance(x, bool) or not 0 <= x < self.num_classes:
                raise ValueError(
                    f"label {x!r} outside [0, {self.num_classes})"
                )

    def __len__(self) -> int:
        return len(self.labels)

    @classmethod
    def all_true(cls, n: int, num_classes: int = 2) -> "VeracityVector":
        return cls(tuple([1] * n), num_classes)

    @classmethod
    def from_bools(cls, bools: Iterable[bool]) -> "VeracityVector":
        return cls(tuple(1 if b else 0 for b in bools), 2)

    def as_bools(self) -> list[bool]:
        if self.num_classes != 2:
            raise ValueError("as_bools requires a binary vector")
        return [bool(x) for x in self.labels]


def flip(v: VeracityVector, j: int) -> VeracityVector:
    """Binary flip at position j, e.g. flip([1,0,1], 2) -> [1,0,0]."""
    if v.num_classes != 2:
        raise ValueError("flip is defined for binary vectors only")
    if not 0 <= j < len(v):
        raise IndexError(f"flip index {j} out of range for length {len(v)}")
    labels = list(v.labels)
    labels[j] = 1 - labels[j]
    return VeracityVector(tuple(labels), 2)


def set_label(v: VeracityVector, j: int, value: int) -> VeracityVector:
    """Return a copy of v with position j set to value (any class count)."""
    if not 0 <= j < len(v):
        raise IndexError(f"index {j} out of range for length {len(v)}")
    if not 0 <= value < v.num_classes:
        raise ValueError(f"label {value} outside [0, {v.num_classes})")
    labels = list(v.labels)
    labels[j] = value
    return VeracityVector(tuple(labels), v.num_classes)


def hamming_distance(v: VeracityVector, w: VeracityVector) -> int:
    if len(v) != len(w):
        raise ValueError("hamming_distance requires equal lengths")
    return sum(1 for a, b in zip(v.labels, w.labels) if a != b)


@dataclass(frozen=True)
class ReasoningProblem:
    """A task instance: context + query + candidate chain (+ optional gold)."""

    id: str
    context: str
    query: str
    answer: str
    chain: ReasoningChain
    gold_veracity: VeracityVector | None = None
    hops: int | None = None

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("problem id must be non-empty")
        if self.gold_veracity is not None and len(self.gold_veracity) != len(self.chain):
            raise ValueError("gold_veracity length must match chain length")


@dataclass(frozen=True)
class AnnealingSchedule:
    """Temperature schedule T(t) for t in [0, num_iters].

    kinds: "constant" (T_start throughout), "linear" (straight interpolation),
    "cosine" (half-cosine ramp T_end + (T_start - T_end) * (1 + cos(pi t/M)) / 2).
    """

    kind: str = "linear"
    t_start: float = 2.0
    t_end: float = 1.0
    num_iters: int = 200

    def __post_init__(self) -> None:
        if self.kind not in SCHEDULE_KINDS:
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if self.kind == "constant":
            # normalize so t_end always reports the true final temperature
            object.__setattr__(self, "t_end", self.t_start)
        if self.t_start <= 0 or self.t_end <= 0:
            raise ValueError("temperatures must be positive")
        if self.t_end > self.t_start:
            raise ValueError("schedule must not heat up: require t_end <= t_start")
        if self.num_iters < 1:
            raise ValueError("num_iters must be >= 1")

    @classmethod
    def constant(cls, temperature: float, num_iters: int = 200) -> "AnnealingSchedule":
        return cls("constant", temperature, temperature, num_iters)

    def temperature_at(self, t: int) -> float:
        if not 0 <= t <= self.num_iters:
            raise ValueError(f"step {t} outside [0, {self.num_iters}]")
        if self.kind == "constant":
            return self.t_start
        frac = t / self.num_iters
        if self.kind == "linear":
            return self.t_start + (self.t_end - self.t_start) * frac
        # cosine
        return self.t_end + (self.t_start - self.t_end) * (1.0 + math.cos(math.pi * frac)) / 2.0


PROPOSAL_KINDS = ("single_bit", "block", "categorical_resample")


@dataclass(frozen=True)
class SearchConfig:
    """Knobs for the Metropolis search.

    schedule=None means the default recipe: linear 2.0 -> 1.0 over `iterations`.
    """

    iterations: int = 200
    schedule: AnnealingSchedule | None = None
    proposal: str = "single_bit"
    block_max_size: int = 3
    use_greedy_init: bool = True
    seed: int = 0

    def __post_init__(self) -> None:
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.proposal not in PROPOSAL_KINDS:
            raise ValueError(f"unknown proposal kind {self.proposal!r}")
        if self.block_max_size < 1:
            raise ValueError("block_max_size must be >= 1")
        if self.schedule is not None and self.schedule.num_iters != self.iterations:
            raise ValueError(
                f"schedule spans {self.schedule.num_iters} iterations "
                f"but the search runs {self.iterations}"
            )

    def resolved_schedule(self) -> AnnealingSchedule:
        if self.schedule is not None:
            return self.schedule
        return AnnealingSchedule("linear", 2.0, 1.0, self.iterations)


@dataclass(frozen=True)
class TraceRecord:
    """One Metropolis step (or one baseline evaluation)."""

    iteration: int
    temperature: float
    log_reward_current: float
    log_reward_proposed: float
    accepted: bool
    proposed_indices: tuple[int, ...]


@dataclass
class SearchTrace:
    """Search output: per-step records plus best-ever bookkeeping.

    best_v tracks the best state over every evaluated vector, including the
    initial state and rejected proposals. oracle_calls counts every reward or
    prefix-reward evaluation made on the run's behalf.
    """

    records: list[TraceRecord] = field(default_factory=list)
    best_v: VeracityVector | None = None
    best_log_reward: float = -math.inf
    oracle_calls: int = 0

    def observe(self, v: VeracityVector, log_reward: float) -> None:
        if log_reward > self.best_log_reward:
            self.best_log_reward = log_reward
            self.best_v = v


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

_PROBLEM_FIELDS = {"id", "context", "query", "answer", "steps", "gold_veracity", "hops"}

TRACE_CSV_HEADER = "iter,temperature,log_reward_current,log_reward_proposed,accepted,proposed_indices"


def labels_to_json(v: VeracityVector) -> list:
    """Binary vectors serialize as booleans, k-class as integers."""
    if v.num_classes == 2:
        return [bool(x) for x in v.labels]
    return list(v.labels)


def labels_from_json(raw: list) -> VeracityVector:
    if not isinstance(raw, list) or not raw:
        raise DataError(f"bad label array: {raw!r}")
    if all(isinstance(x, bool) for x in raw):
        return VeracityVector.from_bools(raw)
    if all(isinstance(x, int) and not isinstance(x, bool) for x in raw):
        num_classes = max(2, max(raw) + 1)
        return VeracityVector(tuple(raw), num_classes)
    raise DataError(f"label array mixes booleans and integers: {raw!r}")


def problem_to_dict(p: ReasoningProblem) -> dict:
    steps = []
    for s in p.chain.steps:
        d: dict = {"text": s.text, "kind": s.kind}
        if s.numeric_out is not None:
            d["numeric_out"] = s.numeric_out
        steps.append(d)
    out: dict = {
        "id": p.id,
        "context": p.context,
        "query": p.query,
        "answer": p.answer,
        "steps": steps,
    }
    if p.gold_veracity is not None:
        out["gold_veracity"] = labels_to_json(p.gold_veracity)
    if p.hops is not None:
        out["hops"] = p.hops
    return out


def problem_from_dict(d: dict) -> ReasoningProblem:
    unknown = set(d) - _PROBLEM_FIELDS
    if unknown:
        raise DataError(f"unknown problem fields: {sorted(unknown)}")
    missing = {"id", "context", "query", "answer", "steps"} - set(d)
    if missing:
        raise DataError(f"missing problem fields: {sorted(missing)}")
    try:
        steps = tuple(
            Statement(s["text"], s.get("kind", "conclusion"), s.get("numeric_out"))
            for s in d["steps"]
        )
        chain = ReasoningChain(steps)
    except (TypeError, KeyError, ValueError) as e:
        raise DataError(f"bad steps array in problem {d.get('id')!r}: {e}") from e
    gold = None
    if d.get("gold_veracity") is not None:
        gold = labels_from_json(d["gold_veracity"])
    try:
        return ReasoningProblem(
            id=str(d["id"]),
            context=d["context"],
            query=d["query"],
            answer=str(d["answer"]),
            chain=chain,
            gold_veracity=gold,
            hops=d.get("hops"),
        )
    except ValueError as e:
        raise DataError(str(e)) from e


def write_problems_jsonl(path: str | Path, problems: Iterable[ReasoningProblem]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for p in problems:
            f.write(json.dumps(problem_to_dict(p), ensure_ascii=False) + "\n")


def read_problems_jsonl(path: str | Path) -> list[ReasoningProblem]:
    problems = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                d = json.loads(line)
            except json.JSONDecodeError as e:
                raise DataError(f"{path}:{lineno}: invalid JSON: {e}") from e
            problems.append(problem_from_dict(d))
    return problems


def trace_to_csv(trace: SearchTrace) -> str:
    """Render trace records in the fixed CSV layout (indices ';'-joined)."""
    lines = [TRACE_CSV_HEADER]
    for r in trace.records:
        idx = ";".join(str(i) for i in r.proposed_indices)
        lines.append(
            f"{r.iteration},{r.temperature!r},{r.log_reward_current!r},"
            f"{r.log_reward_proposed!r},{str(r.accepted).lower()},{idx}"
        )
    return "\n".join(lines) + "\n"


def problem_rng(master_seed: int, problem_id: str, salt: int = 0) -> np.random.Generator:
    """Per-problem RNG stream: hash of (master seed, problem id).

    Streams are independent across problems and identical regardless of the
    order or worker pool that processes them.  ``salt`` separates different
    consumers (search vs. corruption) that share a master seed; salt 0 keeps
    the original entropy layout.
    """
    if master_seed < 0:
        raise ValueError("master seed must be >= 0")
    digest = hashlib.sha256(problem_id.encode("utf-8")).digest()
    words = [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)]
    entropy = [master_seed, *words] if salt == 0 else [master_seed, *words, salt]
    return np.random.default_rng(np.random.SeedSequence(entropy))
