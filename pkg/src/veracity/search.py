"""Metropolis search over veracity assignments, greedy init, and baselines.

RNG contract (what reproducibility rests on): every run derives one stream
from (master seed, problem id) via `problem_rng`. A Metropolis run then draws,
in this order and nothing else:

    1. proposal positions:  rng.integers(0, N, size=iterations)
    2. block sizes:         rng.integers(1, max_size+1, size=iterations)
                            -- only for block proposals with max_size > 1
       class offsets:       rng.integers(1, k, size=iterations)
                            -- only for categorical_resample
    3. acceptance draws:    rng.random(iterations)

At step t (0-based) the proposal is evaluated and accepted iff
u_t < exp(min(0, beta_t * (logR' - logR))) with beta_t = 1/T(t). Block
proposals flip the contiguous range [start, min(start+size, N)); with
max_size == 1 no size batch is drawn, so block runs are bit-identical to
single_bit runs under the same seed.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np

from veracity.core import (
    ReasoningProblem,
    SearchConfig,
    problem_rng,
    SearchTrace,
    TraceRecord,
    VeracityVector,
)
from veracity.oracle import MAX_ENUMERATION, RewardOracle, enumerate_labels

TIE_BREAK_FIRST = 1  # greedy prefers class True on ties, then lowest index


def _tie_break_order(num_classes: int) -> list[int]:
    return [1, 0] + list(range(2, num_classes))


def greedy_init(oracle: RewardOracle, problem: ReasoningProblem) -> VeracityVector:
    """Fix positions left to right by argmax of the prefix score.

    Makes exactly N * k prefix calls. Ties go to class True (1), then to the
    lowest class index; with a uniform oracle every position lands on 1.
    """
    n = len(problem.chain)
    k = oracle.num_classes
    prefix: list[int] = []
    for i in range(n):
        best_label = None
        best_score = -math.inf
        for label in _tie_break_order(k):
            score = oracle.log_reward_prefix(problem, (*prefix, label), i + 1)
            if score > best_score:
                best_score = score
                best_label = label
        prefix.append(best_label)
    return VeracityVector(tuple(prefix), k)


def _apply_flip_range(v: VeracityVector, start: int, end: int) -> VeracityVector:
    labels = list(v.labels)
    for j in range(start, end):
        labels[j] = 1 - labels[j]
    return VeracityVector(tuple(labels), 2)


def metropolis_run(
    oracle: RewardOracle,
    problem: ReasoningProblem,
    v0: VeracityVector,
    config: SearchConfig,
) -> SearchTrace:
    """Annealed single-chain Metropolis from v0; symmetric proposals only."""
    n = len(v0)
    if len(problem.chain) != n:
        raise ValueError("initial state length does not match the chain")
    k = v0.num_classes
    if config.proposal in ("single_bit", "block") and k != 2:
        raise ValueError(f"{config.proposal} proposals require binary labels")
    schedule = config.resolved_schedule()
    rng = problem_rng(config.seed, problem.id)
    iters = config.iterations

    starts = rng.integers(0, n, size=iters)
    if config.proposal == "block" and config.block_max_size > 1:
        sizes = rng.integers(1, config.block_max_size + 1, size=iters)
    elif config.proposal == "categorical_resample":
        deltas = rng.integers(1, k, size=iters)
    uniforms = rng.random(iters)

    trace = SearchTrace()
    v = v0
    lr = oracle.log_reward(problem, v)
    trace.oracle_calls += 1
    trace.observe(v, lr)

    for t in range(iters):
        j = int(starts[t])
        if config.proposal == "single_bit":
            proposal = _apply_flip_range(v, j, j + 1)
            indices = (j,)
        elif config.proposal == "block":
            size = int(sizes[t]) if config.block_max_size > 1 else 1
            end = min(j + size, n)
            proposal = _apply_flip_range(v, j, end)
            indices = tuple(range(j, end))
        else:  # categorical_resample
            labels = list(v.labels)
            labels[j] = (labels[j] + int(deltas[t])) % k
            proposal = VeracityVector(tuple(labels), k)
            indices = (j,)

        lr_prop = oracle.log_reward(problem, proposal)
        trace.oracle_calls += 1
        trace.observe(proposal, lr_prop)

        temperature = schedule.temperature_at(t)
        beta = 1.0 / temperature
        accepted = bool(uniforms[t] < math.exp(min(0.0, beta * (lr_prop - lr))))
        trace.records.append(
            TraceRecord(
                iteration=t,
                temperature=temperature,
                log_reward_current=lr,
                log_reward_proposed=lr_prop,
                accepted=accepted,
                proposed_indices=indices,
            )
        )
        if accepted:
            v, lr = proposal, lr_prop
    return trace


def run_vs(
    oracle: RewardOracle, problem: ReasoningProblem, config: SearchConfig | None = None
) -> SearchTrace:
    """Full veracity search: greedy init (unless disabled) + Metropolis.

    The greedy stage's N*k prefix evaluations are included in oracle_calls.
    """
    config = config or SearchConfig()
    n = len(problem.chain)
    k = oracle.num_classes
    if config.use_greedy_init:
        v0 = greedy_init(oracle, problem)
        greedy_calls = n * k
    else:
        v0 = VeracityVector.all_true(n, k)
        greedy_calls = 0
    trace = metropolis_run(oracle, problem, v0, config)
    trace.oracle_calls += greedy_calls
    return trace


def chain_states(v0: VeracityVector, records: Sequence[TraceRecord]) -> list[VeracityVector]:
    """Replay a binary-proposal trace into the visited state sequence.

    Returns [v0, state after step 0, ..., state after the last step]. Only
    valid for single_bit/block traces (flip replay); categorical traces do not
    carry the proposed class.
    """
    if v0.num_classes != 2:
        raise ValueError("replay supports binary traces only")
    states = [v0]
    v = v0
    for rec in records:
        if rec.accepted:
            labels = list(v.labels)
            for j in rec.proposed_indices:
                labels[j] = 1 - labels[j]
            v = VeracityVector(tuple(labels), 2)
        states.append(v)
    return states


def _record_draw(
    trace: SearchTrace, t: int, v: VeracityVector, lr: float, n: int
) -> None:
    best_before = trace.best_log_reward
    trace.observe(v, lr)
    trace.records.append(
        TraceRecord(
            iteration=t,
            temperature=math.nan,
            log_reward_current=best_before,
            log_reward_proposed=lr,
            accepted=lr > best_before,
            proposed_indices=tuple(range(n)),
        )
    )


def random_search(
    oracle: RewardOracle, problem: ReasoningProblem, iterations: int, seed: int
) -> SearchTrace:
    """Uniform random state per iteration (no chain structure).

    If the budget covers the whole space (iterations >= k^N within the
    enumeration cap) the draw degenerates to exhaustive enumeration, so the
    best state is the global argmax.
    """
    n = len(problem.chain)
    k = oracle.num_classes
    trace = SearchTrace()
    if k**n <= min(iterations, MAX_ENUMERATION):
        for t, row in enumerate(enumerate_labels(n, k)):
            v = VeracityVector(tuple(int(x) for x in row), k)
            lr = oracle.log_reward(problem, v)
            trace.oracle_calls += 1
            _record_draw(trace, t, v, lr, n)
        return trace
    rng = problem_rng(seed, problem.id)
    draws = rng.integers(0, k, size=(iterations, n))
    for t in range(iterations):
        v = VeracityVector(tuple(int(x) for x in draws[t]), k)
        lr = oracle.log_reward(problem, v)
        trace.oracle_calls += 1
        _record_draw(trace, t, v, lr, n)
    return trace


Sampler = Callable[[np.random.Generator, ReasoningProblem, int], VeracityVector]


def _uniform_sampler(
    rng: np.random.Generator, problem: ReasoningProblem, num_classes: int
) -> VeracityVector:
    n = len(problem.chain)
    return VeracityVector(
        tuple(int(x) for x in rng.integers(0, num_classes, size=n)), num_classes
    )


def best_of_n(
    oracle: RewardOracle,
    problem: ReasoningProblem,
    sampler: Sampler | None = None,
    n: int = 200,
    seed: int = 0,
) -> SearchTrace:
    """Score n i.i.d. samples and keep the best.

    The default sampler draws each label uniformly (Bernoulli(0.5) for binary
    problems); pass a sampler to plug in externally generated candidates.
    """
    sampler = sampler or _uniform_sampler
    length = len(problem.chain)
    k = oracle.num_classes
    rng = problem_rng(seed, problem.id)
    trace = SearchTrace()
    for t in range(n):
        v = sampler(rng, problem, k)
        lr = oracle.log_reward(problem, v)
        trace.oracle_calls += 1
        _record_draw(trace, t, v, lr, length)
    return trace
