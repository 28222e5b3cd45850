"""Evaluation metrics and the inference-cost model.

Cost accounting separates two quantities: `attention_units`, a closed-form
quadratic approximation of attention FLOPs, and `scored_tokens`, the exact
count of newly processed (non-cached) tokens.  The latter is what a scoring
endpoint meters, so it can be cross-checked against server-side counters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from veracity.core import ReasoningProblem, VeracityVector
from veracity.oracle import MAX_ENUMERATION, RewardOracle, enumerate_labels

CACHING_MODES = ("none", "prefix", "prefix_plus_divergence")


def _as_labels(v: VeracityVector | Sequence[int]) -> tuple[int, ...]:
    if isinstance(v, VeracityVector):
        return v.labels
    return tuple(int(x) for x in v)


def hamming_similarity(
    a: VeracityVector | Sequence[int], b: VeracityVector | Sequence[int]
) -> float:
    """1 - normalized Hamming distance; 1.0 means identical assignments."""
    xa, xb = _as_labels(a), _as_labels(b)
    if len(xa) != len(xb):
        raise ValueError(f"length mismatch: {len(xa)} vs {len(xb)}")
    if not xa:
        raise ValueError("empty assignment")
    mism = sum(1 for p, q in zip(xa, xb) if p != q)
    return 1.0 - mism / len(xa)


def exact_match(
    a: VeracityVector | Sequence[int], b: VeracityVector | Sequence[int]
) -> bool:
    return _as_labels(a) == _as_labels(b)


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float | None:
    """Sample Pearson correlation; None when either side has zero variance."""
    n = len(xs)
    if n != len(ys):
        raise ValueError(f"length mismatch: {n} vs {len(ys)}")
    if n < 2:
        raise ValueError("need at least two points")
    mx = math.fsum(xs) / n
    my = math.fsum(ys) / n
    sxx = math.fsum((x - mx) ** 2 for x in xs)
    syy = math.fsum((y - my) ** 2 for y in ys)
    if sxx == 0.0 or syy == 0.0:
        return None
    sxy = math.fsum((x - mx) * (y - my) for x, y in zip(xs, ys))
    return sxy / math.sqrt(sxx * syy)


@dataclass(frozen=True)
class AggregateStats:
    mean: float
    std: float
    n: int


def aggregate(values: Sequence[float]) -> AggregateStats:
    """Mean and sample standard deviation (ddof=1; a single value has std 0)."""
    n = len(values)
    if n == 0:
        raise ValueError("nothing to aggregate")
    mean = math.fsum(values) / n
    if n == 1:
        return AggregateStats(mean=float(values[0]), std=0.0, n=1)
    var = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
    return AggregateStats(mean=mean, std=math.sqrt(var), n=n)


@dataclass(frozen=True)
class CostEstimate:
    attention_units: float
    scored_tokens: float


def cost_model(
    num_steps: int,
    context_tokens: int,
    step_tokens: int,
    caching: str = "prefix",
    divergence_offsets: Sequence[int] | None = None,
) -> CostEstimate:
    """Cost of scoring an N-step chain one step at a time.

    Per evaluation the prompt is the shared context (Lc tokens) and the
    continuation is one step (Lt tokens).

    none: every call reprocesses everything.
        attention N*(Lc+Lt)^2, scored N*(Lc+Lt).
    prefix: the context KV cache is built once and reused.
        attention Lc^2 + N*Lt*(Lc+Lt), scored Lc + N*Lt.
    prefix_plus_divergence: consecutive continuations additionally share their
        common token prefix; call t >= 2 only pays Lt - d_t new tokens.  With
        measured offsets the scored count is exact: Lc + Lt + sum(Lt - d_t).
        Without them d = Lt/2 is assumed, and the attention closed form uses
        that assumption throughout: Lc^2 + N*(Lc*Lt/2 + Lt^2/4).
    """
    if num_steps < 1:
        raise ValueError("num_steps must be >= 1")
    if context_tokens < 0 or step_tokens < 1:
        raise ValueError("token counts out of range")
    if caching not in CACHING_MODES:
        raise ValueError(f"unknown caching mode {caching!r}; expected one of {CACHING_MODES}")
    if divergence_offsets is not None:
        if caching != "prefix_plus_divergence":
            raise ValueError("divergence_offsets apply only to prefix_plus_divergence")
        if len(divergence_offsets) != num_steps - 1:
            raise ValueError(
                f"need {num_steps - 1} offsets (one per call after the first), "
                f"got {len(divergence_offsets)}"
            )
        for d in divergence_offsets:
            if not 0 <= d <= step_tokens:
                raise ValueError(f"offset {d} outside [0, {step_tokens}]")

    n, lc, lt = num_steps, float(context_tokens), float(step_tokens)
    if caching == "none":
        return CostEstimate(
            attention_units=n * (lc + lt) ** 2,
            scored_tokens=n * (lc + lt),
        )
    if caching == "prefix":
        return CostEstimate(
            attention_units=lc**2 + n * lt * (lc + lt),
            scored_tokens=lc + n * lt,
        )
    attention = lc**2 + n * (lc * lt / 2 + lt**2 / 4)
    if divergence_offsets is None:
        scored = lc + lt + (n - 1) * lt / 2
    else:
        scored = lc + lt + math.fsum(lt - d for d in divergence_offsets)
    return CostEstimate(attention_units=attention, scored_tokens=scored)


def reward_similarity_correlation(
    oracle: RewardOracle,
    problem: ReasoningProblem | None,
    reference: VeracityVector,
) -> float | None:
    """Pearson correlation between log-reward and similarity to a reference,
    over the full enumeration of assignments.  None if the reward is flat."""
    n = len(reference)
    k = oracle.num_classes
    if k**n > MAX_ENUMERATION:
        raise ValueError(f"{k}^{n} assignments exceed the enumeration cap")
    states = enumerate_labels(n, k)
    rewards = [float(r) for r in oracle.log_reward_batch(problem, states)]
    ref = reference.labels
    sims = [
        1.0 - sum(1 for p in range(n) if int(row[p]) != ref[p]) / n for row in states
    ]
    return pearson(rewards, sims)
