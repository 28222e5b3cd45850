"""Reward oracles: the planted synthetic landscape and the exact posterior.

A reward oracle maps a full (or prefix) label assignment to a log reward. The
planted landscape is a controlled test bed whose global structure is known by
construction:

    log R(v) = C - sum_i w_i * [v_i != v*_i]
                 - sum_(i,j) J_ij * [exactly one of v_i, v_j mismatches]
                 + eps(v)

with eps(v) a deterministic, hash-seeded per-state normal perturbation. With
no couplings and no noise the unique argmax is the planted truth v*, which is
what makes recovery rates meaningful.

ExactPosterior enumerates every label assignment (k^N states, N <= 20) to get
the normalizer; it is the ground truth that the Metropolis sampler is checked
against.
"""

from __future__ import annotations

import abc
import itertools
import math
from typing import Sequence

import numpy as np

from veracity.core import ReasoningProblem, VeracityVector

# Hard cap on any exhaustive enumeration (states, completions, components).
MAX_ENUMERATION = 2**20

_NOISE_TAG = 0x9E3779B9  # domain separator for per-state noise streams


class RewardOracle(abc.ABC):
    """Scoring interface shared by planted landscapes and LM-backed rewards."""

    @property
    @abc.abstractmethod
    def num_classes(self) -> int:
        ...

    @abc.abstractmethod
    def log_reward(self, problem: ReasoningProblem | None, v: VeracityVector) -> float:
        """Log reward of a full assignment."""

    @abc.abstractmethod
    def log_reward_prefix(
        self,
        problem: ReasoningProblem | None,
        prefix: Sequence[int],
        i: int | None = None,
    ) -> float:
        """Score with only the first len(prefix) positions assigned.

        `i`, when given, must equal len(prefix); it exists for call sites that
        track the boundary explicitly.
        """

    def log_reward_batch(self, problem, labels: np.ndarray) -> np.ndarray:
        """Score many assignments (rows of `labels`). Default: a plain loop."""
        k = self.num_classes
        return np.array(
            [
                self.log_reward(problem, VeracityVector(tuple(int(x) for x in row), k))
                for row in labels
            ],
            dtype=np.float64,
        )


class PlantedOracle(RewardOracle):
    """Synthetic landscape with a planted truth.

    weights: positive per-position penalties (scalar broadcasts).
    couplings: (i, j, J) triples; J fires when exactly one end mismatches the
        truth, which carves two-bit-correlated modes into the landscape.
    noise_sigma: per-state N(0, sigma) perturbation, keyed by (seed, state) so
        the landscape is frozen, not re-rolled per call.
    """

    def __init__(
        self,
        truth: VeracityVector,
        weights: float | Sequence[float] = 1.0,
        couplings: Sequence[tuple[int, int, float]] = (),
        noise_sigma: float = 0.0,
        base_log_reward: float = 0.0,
        seed: int = 0,
    ):
        self.truth = truth
        self._n = len(truth)
        self._k = truth.num_classes
        if isinstance(weights, (int, float)):
            weights = (float(weights),) * self._n
        else:
            weights = tuple(float(w) for w in weights)
        if len(weights) != self._n:
            raise ValueError(f"need {self._n} weights, got {len(weights)}")
        if any(w <= 0 for w in weights):
            raise ValueError("weights must be positive")
        self.weights = weights
        normalized = []
        for (i, j, coupling) in couplings:
            if i == j:
                raise ValueError("coupling must join two distinct positions")
            if not (0 <= i < self._n and 0 <= j < self._n):
                raise ValueError(f"coupling ({i},{j}) out of range")
            if coupling <= 0:
                raise ValueError("coupling strength must be positive")
            normalized.append((min(i, j), max(i, j), float(coupling)))
        self.couplings = tuple(normalized)
        if noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if seed < 0:
            raise ValueError("seed must be >= 0")
        self.noise_sigma = float(noise_sigma)
        self.base_log_reward = float(base_log_reward)
        self.seed = int(seed)
        self._noise_cache: dict[tuple[int, ...], float] = {}

    @property
    def n(self) -> int:
        return self._n

    @property
    def num_classes(self) -> int:
        return self._k

    # -- noise -------------------------------------------------------------

    def _noise(self, labels: tuple[int, ...], cache: bool = True) -> float:
        if self.noise_sigma == 0.0:
            return 0.0
        hit = self._noise_cache.get(labels)
        if hit is not None:
            return hit
        seq = np.random.SeedSequence([self.seed, _NOISE_TAG, *labels])
        value = float(np.random.default_rng(seq).normal(0.0, self.noise_sigma))
        if cache:
            self._noise_cache[labels] = value
        return value

    # -- scoring -----------------------------------------------------------

    def _check(self, v: VeracityVector) -> None:
        if len(v) != self._n:
            raise ValueError(f"expected length {self._n}, got {len(v)}")
        if v.num_classes != self._k:
            raise ValueError(f"expected {self._k} classes, got {v.num_classes}")

    def log_reward(self, problem, v: VeracityVector) -> float:
        self._check(v)
        labels = v.labels
        truth = self.truth.labels
        total = self.base_log_reward
        for a, b, w in zip(labels, truth, self.weights):
            if a != b:
                total -= w
        for i, j, coupling in self.couplings:
            if (labels[i] != truth[i]) != (labels[j] != truth[j]):
                total -= coupling
        return total + self._noise(labels)

    def log_reward_batch(self, problem, labels: np.ndarray) -> np.ndarray:
        labels = np.asarray(labels)
        if labels.ndim != 2 or labels.shape[1] != self._n:
            raise ValueError(f"labels must be (M, {self._n})")
        truth = np.asarray(self.truth.labels, dtype=labels.dtype)
        mism = labels != truth
        out = self.base_log_reward - mism @ np.asarray(self.weights)
        for i, j, coupling in self.couplings:
            out = out - coupling * (mism[:, i] != mism[:, j])
        if self.noise_sigma > 0.0:
            cache = labels.shape[0] <= 2**16
            noise = np.empty(labels.shape[0])
            for r in range(labels.shape[0]):
                noise[r] = self._noise(tuple(int(x) for x in labels[r]), cache=cache)
            out = out + noise
        return np.asarray(out, dtype=np.float64)

    def log_reward_prefix(self, problem, prefix, i=None) -> float:
        prefix = tuple(int(x) for x in prefix)
        if i is not None and i != len(prefix):
            raise ValueError(f"boundary {i} does not match prefix length {len(prefix)}")
        i = len(prefix)
        if i > self._n:
            raise ValueError(f"prefix longer than chain ({i} > {self._n})")
        for x in prefix:
            if not 0 <= x < self._k:
                raise ValueError(f"label {x} outside [0, {self._k})")

        if self.noise_sigma > 0.0:
            # per-state noise breaks all factorization: enumerate completions
            tail = self._n - i
            if self._k**tail > MAX_ENUMERATION:
                raise ValueError(
                    f"prefix marginalization over {self._k}^{tail} completions "
                    f"exceeds the {MAX_ENUMERATION} state cap"
                )
            scores = [
                self.log_reward(problem, VeracityVector(prefix + rest, self._k))
                for rest in itertools.product(range(self._k), repeat=tail)
            ]
            return _logsumexp(scores)

        truth = self.truth.labels
        total = self.base_log_reward
        for pos in range(i):
            if prefix[pos] != truth[pos]:
                total -= self.weights[pos]

        # couplings fully inside the assigned prefix contribute directly;
        # anything touching an unassigned position is marginalized per
        # connected component below
        unassigned = list(range(i, self._n))
        adjacency: dict[int, list[tuple[int, int, float]]] = {u: [] for u in unassigned}
        for a, b, coupling in self.couplings:
            if a < i and b < i:
                if (prefix[a] != truth[a]) != (prefix[b] != truth[b]):
                    total -= coupling
            else:
                for end in (a, b):
                    if end >= i:
                        adjacency[end].append((a, b, coupling))

        seen: set[int] = set()
        for u in unassigned:
            if u in seen:
                continue
            component = []
            stack = [u]
            seen.add(u)
            while stack:
                node = stack.pop()
                component.append(node)
                for a, b, _ in adjacency[node]:
                    for end in (a, b):
                        if end >= i and end not in seen:
                            seen.add(end)
                            stack.append(end)
            component.sort()
            total += self._marginalize_component(prefix, i, component)
        return total

    def _marginalize_component(
        self, prefix: tuple[int, ...], i: int, component: list[int]
    ) -> float:
        truth = self.truth.labels
        if self._k ** len(component) > MAX_ENUMERATION:
            raise ValueError(
                f"coupled component of {len(component)} unassigned positions "
                f"is too large to marginalize exactly"
            )
        edges = [
            (a, b, coupling)
            for a, b, coupling in self.couplings
            if a in component or b in component
        ]
        slot = {pos: idx for idx, pos in enumerate(component)}

        def mismatch(pos: int, assignment: tuple[int, ...]) -> bool:
            if pos in slot:
                return assignment[slot[pos]] != truth[pos]
            return prefix[pos] != truth[pos]  # assigned context

        scores = []
        for assignment in itertools.product(range(self._k), repeat=len(component)):
            s = 0.0
            for pos, value in zip(component, assignment):
                if value != truth[pos]:
                    s -= self.weights[pos]
            for a, b, coupling in edges:
                if mismatch(a, assignment) != mismatch(b, assignment):
                    s -= coupling
            scores.append(s)
        return _logsumexp(scores)


def _logsumexp(xs) -> float:
    m = max(xs)
    if m == -math.inf:
        return -math.inf
    return m + math.log(sum(math.exp(x - m) for x in xs))


def enumerate_labels(n: int, num_classes: int) -> np.ndarray:
    """All k^n assignments as a (k^n, n) uint8 matrix, lexicographic order
    (position 0 is the most significant digit)."""
    m = num_classes**n
    if m > MAX_ENUMERATION:
        raise ValueError(f"{num_classes}^{n} states exceed the enumeration cap")
    idx = np.arange(m, dtype=np.int64)
    out = np.empty((m, n), dtype=np.uint8)
    for pos in range(n):
        power = num_classes ** (n - 1 - pos)
        out[:, pos] = (idx // power) % num_classes
    return out


class ExactPosterior:
    """Exhaustive normalizer over all k^N assignments (N <= 20).

    States are enumerated lexicographically with position 0 most significant;
    log Z uses a max-shifted log-sum-exp so arbitrarily large base offsets do
    not overflow.
    """

    def __init__(self, oracle: RewardOracle, problem: ReasoningProblem | None):
        if problem is not None:
            n = len(problem.chain)
        elif hasattr(oracle, "n"):
            n = oracle.n
        else:
            raise ValueError("need a problem (or an oracle that knows its length)")
        k = oracle.num_classes
        if n > 20:
            raise ValueError(f"exact posterior limited to N <= 20, got {n}")
        if k**n > MAX_ENUMERATION:
            raise ValueError(f"{k}^{n} states exceed the enumeration cap")
        self.oracle = oracle
        self.problem = problem
        self.n = n
        self.k = k
        self._states = enumerate_labels(n, k)
        self._log_rewards = np.asarray(
            oracle.log_reward_batch(problem, self._states), dtype=np.float64
        )
        m = float(self._log_rewards.max())
        self.log_z = m + math.log(float(np.exp(self._log_rewards - m).sum()))
        self._probs = np.exp(self._log_rewards - self.log_z)

    def _index(self, v: VeracityVector) -> int:
        if len(v) != self.n or v.num_classes != self.k:
            raise ValueError(
                f"expected length {self.n} with {self.k} classes, "
                f"got length {len(v)} with {v.num_classes}"
            )
        idx = 0
        for x in v.labels:
            idx = idx * self.k + x
        return idx

    def posterior(self, v: VeracityVector) -> float:
        return float(self._probs[self._index(v)])

    def log_posterior(self, v: VeracityVector) -> float:
        return float(self._log_rewards[self._index(v)] - self.log_z)

    def argmax(self) -> VeracityVector:
        row = self._states[int(np.argmax(self._log_rewards))]
        return VeracityVector(tuple(int(x) for x in row), self.k)

    def sample_many(self, seed: int, n: int) -> list[VeracityVector]:
        rng = np.random.default_rng(seed)
        picks = rng.choice(len(self._probs), size=n, p=self._probs)
        return [
            VeracityVector(tuple(int(x) for x in self._states[p]), self.k)
            for p in picks
        ]

    def sample(self, seed: int) -> VeracityVector:
        return self.sample_many(seed, 1)[0]
