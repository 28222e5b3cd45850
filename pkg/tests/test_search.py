"""Search kernel checks.

The Metropolis trace is verified against an independent reimplementation that
follows only the documented RNG-consumption contract (index batch, optional
size batch, uniform batch) and the acceptance rule u < exp(min(0, beta*delta)).
Greedy init is verified against a replayed argmax-by-prefix recursion whose
prefix scores the test computes itself by explicit completion sums.
"""

import itertools
import math

import numpy as np
import pytest

from veracity.core import (
    AnnealingSchedule,
    ReasoningChain,
    ReasoningProblem,
    SearchConfig,
    Statement,
    VeracityVector,
    flip,
    set_label,
)
from veracity.oracle import ExactPosterior, PlantedOracle, RewardOracle
from veracity.search import (
    best_of_n,
    chain_states,
    greedy_init,
    metropolis_run,
    problem_rng,
    random_search,
    run_vs,
)


def dummy_problem(n, pid=None):
    steps = tuple(Statement(f"s{i}.", "conclusion") for i in range(n))
    return ReasoningProblem(pid or f"d{n}", "c", "q", "True", ReasoningChain(steps))


def ref_logsumexp(xs):
    m = max(xs)
    return m + math.log(sum(math.exp(x - m) for x in xs))


class CountingOracle(RewardOracle):
    """Wraps an oracle and counts calls; used to audit call budgets."""

    def __init__(self, inner):
        self.inner = inner
        self.full_calls = 0
        self.prefix_calls = 0

    @property
    def num_classes(self):
        return self.inner.num_classes

    def log_reward(self, problem, v):
        self.full_calls += 1
        return self.inner.log_reward(problem, v)

    def log_reward_prefix(self, problem, prefix, i=None):
        self.prefix_calls += 1
        return self.inner.log_reward_prefix(problem, prefix, i)


class UniformOracle(RewardOracle):
    """Same reward everywhere; exposes the tie-break behavior."""

    def __init__(self, num_classes=2, n=4):
        self._k = num_classes
        self.n = n

    @property
    def num_classes(self):
        return self._k

    def log_reward(self, problem, v):
        return -1.0

    def log_reward_prefix(self, problem, prefix, i=None):
        return -1.0


class TestGreedyInit:
    def test_recovers_truth_separable(self):
        truth = VeracityVector((1, 0, 1, 1, 0, 0, 1))
        oracle = PlantedOracle(truth=truth, weights=1.0)
        assert greedy_init(oracle, dummy_problem(7)) == truth

    def test_replays_independent_argmax_recursion(self):
        # coupled + unequal weights; the test recomputes every prefix score
        # by explicit completion sums over the public full-state scorer
        truth = VeracityVector((0, 1, 1, 0))
        oracle = PlantedOracle(
            truth=truth,
            weights=(0.3, 1.2, 0.6, 2.0),
            couplings=((0, 3, 0.9), (1, 2, 0.4)),
        )
        p = dummy_problem(4)

        prefix = []
        for i in range(4):
            scored = []
            for b in (1, 0):  # tie-break order: True first, then lower index
                cand = tuple(prefix) + (b,)
                score = ref_logsumexp(
                    [
                        oracle.log_reward(p, VeracityVector(cand + rest))
                        for rest in itertools.product((0, 1), repeat=3 - i)
                    ]
                )
                scored.append((score, b))
            best_score, best_b = scored[0]
            for score, b in scored[1:]:
                if score > best_score:
                    best_score, best_b = score, b
            prefix.append(best_b)

        assert greedy_init(oracle, p) == VeracityVector(tuple(prefix))

    def test_exactly_n_times_k_prefix_calls(self):
        truth = VeracityVector((1, 0, 1, 1, 0))
        counting = CountingOracle(PlantedOracle(truth=truth))
        greedy_init(counting, dummy_problem(5))
        assert counting.prefix_calls == 5 * 2
        assert counting.full_calls == 0

        truth3 = VeracityVector((2, 0, 1), num_classes=3)
        counting3 = CountingOracle(PlantedOracle(truth=truth3))
        greedy_init(counting3, dummy_problem(3))
        assert counting3.prefix_calls == 3 * 3

    def test_uniform_oracle_takes_tie_break_class(self):
        out = greedy_init(UniformOracle(2, 4), dummy_problem(4))
        assert out.labels == (1, 1, 1, 1)
        out3 = greedy_init(UniformOracle(3, 4), dummy_problem(4))
        assert out3.labels == (1, 1, 1, 1)
        assert out3.num_classes == 3


def independent_metropolis(oracle, problem, v0, config):
    """Reference implementation written only from the documented contract."""
    schedule = config.resolved_schedule()
    n = len(v0)
    k = v0.num_classes
    rng = problem_rng(config.seed, problem.id)
    iters = config.iterations
    if config.proposal in ("single_bit", "block"):
        starts = rng.integers(0, n, size=iters)
        if config.proposal == "block" and config.block_max_size > 1:
            sizes = rng.integers(1, config.block_max_size + 1, size=iters)
        else:
            sizes = np.ones(iters, dtype=np.int64)
    else:
        starts = rng.integers(0, n, size=iters)
        deltas = rng.integers(1, k, size=iters)
    uniforms = rng.random(iters)

    v = v0
    lr = oracle.log_reward(problem, v)
    out = []
    for t in range(iters):
        if config.proposal == "categorical_resample":
            j = int(starts[t])
            prop = set_label(v, j, (v.labels[j] + int(deltas[t])) % k)
            indices = (j,)
        else:
            start = int(starts[t])
            end = min(start + int(sizes[t]), n)
            prop = v
            for j in range(start, end):
                prop = flip(prop, j)
            indices = tuple(range(start, end))
        lr_prop = oracle.log_reward(problem, prop)
        beta = 1.0 / schedule.temperature_at(t)
        accepted = uniforms[t] < math.exp(min(0.0, beta * (lr_prop - lr)))
        out.append((t, schedule.temperature_at(t), lr, lr_prop, accepted, indices))
        if accepted:
            v, lr = prop, lr_prop
    return out, v


class TestMetropolis:
    def make(self, n=5, sigma=0.0, couplings=(), seed=0):
        truth = VeracityVector(tuple((i * 7 + 3) % 2 for i in range(n)))
        oracle = PlantedOracle(
            truth=truth, weights=1.0, couplings=couplings, noise_sigma=sigma, seed=seed
        )
        return oracle, dummy_problem(n), truth

    @pytest.mark.parametrize(
        "proposal,block_max",
        [("single_bit", 3), ("block", 3), ("categorical_resample", 3)],
    )
    def test_trace_matches_independent_reimplementation(self, proposal, block_max):
        oracle, p, truth = self.make(5, sigma=0.4, couplings=((1, 3, 0.8),))
        config = SearchConfig(
            iterations=300,
            schedule=AnnealingSchedule("linear", 2.0, 0.5, 300),
            proposal=proposal,
            block_max_size=block_max,
            use_greedy_init=False,
            seed=42,
        )
        v0 = VeracityVector.all_true(5)
        trace = metropolis_run(oracle, p, v0, config)
        expected, final = independent_metropolis(oracle, p, v0, config)
        assert len(trace.records) == 300
        for rec, (t, temp, lr, lr_prop, acc, idx) in zip(trace.records, expected):
            assert rec.iteration == t
            assert rec.temperature == temp
            assert rec.log_reward_current == lr
            assert rec.log_reward_proposed == lr_prop
            assert rec.accepted == acc
            assert rec.proposed_indices == idx
        states = chain_states(v0, trace.records)
        assert states[-1] == final

    def test_block_size_one_identical_to_single_bit(self):
        oracle, p, truth = self.make(7, sigma=0.3)
        base = dict(iterations=250, use_greedy_init=False, seed=9,
                    schedule=AnnealingSchedule("linear", 2.0, 1.0, 250))
        v0 = VeracityVector.all_true(7)
        a = metropolis_run(oracle, p, v0, SearchConfig(proposal="single_bit", **base))
        b = metropolis_run(
            oracle, p, v0, SearchConfig(proposal="block", block_max_size=1, **base)
        )
        assert a.records == b.records
        assert a.best_v == b.best_v
        assert a.best_log_reward == b.best_log_reward

    def test_block_proposals_contiguous_and_clipped(self):
        oracle, p, truth = self.make(6)
        config = SearchConfig(
            iterations=400, proposal="block", block_max_size=3,
            use_greedy_init=False, seed=3,
            schedule=AnnealingSchedule("constant", 1.0, 1.0, 400),
        )
        trace = metropolis_run(oracle, p, VeracityVector.all_true(6), config)
        saw_clip = False
        for rec in trace.records:
            idx = rec.proposed_indices
            assert 1 <= len(idx) <= 3
            assert all(b - a == 1 for a, b in zip(idx, idx[1:]))  # contiguous
            assert 0 <= idx[0] and idx[-1] <= 5
            if len(idx) < 3 and idx[-1] == 5:
                saw_clip = True
        assert saw_clip  # blocks at the right edge are clipped, not wrapped

    def test_reward_neutral_proposals_always_accepted(self):
        oracle = UniformOracle(2, 4)
        p = dummy_problem(4)
        config = SearchConfig(
            iterations=100, use_greedy_init=False, seed=1,
            schedule=AnnealingSchedule.constant(0.1, 100),
        )
        trace = metropolis_run(oracle, p, VeracityVector.all_true(4), config)
        assert all(r.accepted for r in trace.records)

    def test_improving_proposals_always_accepted(self):
        # start maximally wrong at a cold temperature: every flip toward truth
        # improves and must be taken
        truth = VeracityVector((1, 1, 1, 1))
        oracle = PlantedOracle(truth=truth, weights=1.0)
        p = dummy_problem(4)
        config = SearchConfig(
            iterations=60, use_greedy_init=False, seed=5,
            schedule=AnnealingSchedule.constant(0.05, 60),
        )
        trace = metropolis_run(oracle, p, VeracityVector((0, 0, 0, 0)), config)
        for rec in trace.records:
            if rec.log_reward_proposed > rec.log_reward_current:
                assert rec.accepted

    def test_best_ever_tracks_peak_not_final(self):
        oracle, p, truth = self.make(6)
        config = SearchConfig(
            iterations=3000, use_greedy_init=False, seed=11,
            schedule=AnnealingSchedule.constant(2.0, 3000),  # hot: wanders
        )
        trace = metropolis_run(oracle, p, VeracityVector.all_true(6), config)
        states = chain_states(VeracityVector.all_true(6), trace.records)
        final_lr = oracle.log_reward(p, states[-1])
        assert trace.best_log_reward >= final_lr
        peak = max(
            max(r.log_reward_current for r in trace.records),
            max(r.log_reward_proposed for r in trace.records),
        )
        assert trace.best_log_reward == peak
        # a hot chain at 3000 steps on 6 bits visits the optimum
        assert trace.best_v == truth

    def test_oracle_calls_accounting(self):
        truth = VeracityVector((1, 0, 1, 1, 0))
        counting = CountingOracle(PlantedOracle(truth=truth))
        p = dummy_problem(5)
        trace = run_vs(counting, p, SearchConfig(iterations=50, seed=0))
        assert counting.prefix_calls == 10
        assert counting.full_calls == 51
        assert trace.oracle_calls == 10 + 51

    def test_determinism_and_stream_separation(self):
        oracle, p, truth = self.make(5, sigma=0.2)
        config = SearchConfig(iterations=80, seed=13,
                              schedule=AnnealingSchedule("linear", 2.0, 1.0, 80))
        t1 = run_vs(oracle, p, config)
        t2 = run_vs(oracle, p, config)
        assert t1.records == t2.records and t1.best_v == t2.best_v
        other = dummy_problem(5, pid="other-id")
        t3 = run_vs(oracle, other, config)
        assert t3.records != t1.records  # per-problem stream differs

    def test_schedule_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            SearchConfig(iterations=100, schedule=AnnealingSchedule("linear", 2.0, 1.0, 200))

    def test_binary_proposals_reject_multiclass_state(self):
        truth = VeracityVector((2, 0, 1), num_classes=3)
        oracle = PlantedOracle(truth=truth)
        p = dummy_problem(3)
        config = SearchConfig(iterations=10, use_greedy_init=False, seed=0)
        with pytest.raises(ValueError):
            metropolis_run(oracle, p, VeracityVector.all_true(3, num_classes=3), config)

    def test_run_vs_defaults_recover_truth(self):
        truth = VeracityVector((1, 0, 0, 1, 1, 0, 1, 0))
        oracle = PlantedOracle(truth=truth, weights=1.0)
        p = dummy_problem(8)
        trace = run_vs(oracle, p, SearchConfig(seed=21))
        assert trace.best_v == truth

    def test_categorical_recovery_three_class(self):
        truth = VeracityVector((2, 1, 0, 1, 2, 1), num_classes=3)
        oracle = PlantedOracle(truth=truth, weights=1.0)
        p = dummy_problem(6)
        config = SearchConfig(proposal="categorical_resample", seed=2)
        trace = run_vs(oracle, p, config)
        assert trace.best_v == truth

    def test_stationarity_constant_beta_one(self):
        # visit frequencies of the chain at beta=1 approach the exact posterior
        truth = VeracityVector((1, 0, 1))
        oracle = PlantedOracle(truth=truth, weights=(1.0, 0.5, 0.75))
        p = dummy_problem(3)
        ep = ExactPosterior(oracle, p)
        steps = 40_000
        config = SearchConfig(
            iterations=steps, use_greedy_init=False, seed=17,
            schedule=AnnealingSchedule.constant(1.0, steps),
        )
        v0 = VeracityVector.all_true(3)
        trace = metropolis_run(oracle, p, v0, config)
        states = chain_states(v0, trace.records)
        burn = 2_000
        counts = {}
        for v in states[burn:]:
            counts[v.labels] = counts.get(v.labels, 0) + 1
        total = len(states) - burn
        tv = 0.5 * sum(
            abs(counts.get(s, 0) / total - ep.posterior(VeracityVector(s)))
            for s in itertools.product((0, 1), repeat=3)
        )
        assert tv < 0.05


class TestBaselines:
    def test_random_search_enumeration_fallback(self):
        truth = VeracityVector((1, 0, 1, 0))
        oracle = PlantedOracle(
            truth=truth, weights=(1.0, 0.2, 0.6, 1.4), couplings=((0, 2, 0.5),),
            noise_sigma=0.3, seed=8,
        )
        p = dummy_problem(4)
        ep = ExactPosterior(oracle, p)
        trace = random_search(oracle, p, iterations=16, seed=4)
        assert trace.best_v == ep.argmax()
        assert trace.best_log_reward == pytest.approx(
            oracle.log_reward(p, ep.argmax())
        )

    def test_random_search_deterministic(self):
        truth = VeracityVector.all_true(6)
        oracle = PlantedOracle(truth=truth)
        p = dummy_problem(6)
        a = random_search(oracle, p, iterations=50, seed=3)
        b = random_search(oracle, p, iterations=50, seed=3)
        assert a.records == b.records
        assert len(a.records) == 50

    def test_best_of_n_default_sampler(self):
        truth = VeracityVector((1, 0, 1, 1, 0))
        oracle = PlantedOracle(truth=truth)
        p = dummy_problem(5)
        a = best_of_n(oracle, p, n=40, seed=6)
        b = best_of_n(oracle, p, n=40, seed=6)
        assert a.records == b.records
        assert a.oracle_calls == 40

    def test_best_of_n_custom_sampler(self):
        truth = VeracityVector((1, 0, 1))
        oracle = PlantedOracle(truth=truth)
        p = dummy_problem(3)

        def oracle_sampler(rng, problem, num_classes):
            return truth

        trace = best_of_n(oracle, p, sampler=oracle_sampler, n=3, seed=0)
        assert trace.best_v == truth
        assert trace.best_log_reward == pytest.approx(0.0)

    def test_best_of_n_three_class(self):
        truth = VeracityVector((2, 1, 0), num_classes=3)
        oracle = PlantedOracle(truth=truth)
        p = dummy_problem(3)
        trace = best_of_n(oracle, p, n=200, seed=1)
        assert trace.best_v.num_classes == 3
