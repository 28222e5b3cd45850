"""Latent veracity inference over chain-of-thought reasoning.

A library + CLI for searching over per-step truthfulness labels of a reasoning
chain with an annealed Metropolis sampler, validating the sampler against exact
posteriors on synthetic planted landscapes, generating corrupted synthetic
reasoning tasks, and scoring real chains through a teacher-forced LM endpoint.
"""

from veracity.core import (
    AnnealingSchedule,
    DataError,
    EndpointError,
    ReasoningChain,
    ReasoningProblem,
    SearchConfig,
    SearchTrace,
    Statement,
    TRACE_CSV_HEADER,
    TraceRecord,
    VeracityError,
    VeracityVector,
    flip,
    hamming_distance,
    problem_from_dict,
    problem_rng,
    problem_to_dict,
    read_problems_jsonl,
    trace_to_csv,
    write_problems_jsonl,
)
from veracity.lmclient import (
    BaselineResult,
    LMRewardOracle,
    ParsedLabels,
    ScoreResult,
    ScoringEndpoint,
    ScoringSession,
    parse_label_json,
    render_label_continuation,
    render_labeling_prompt,
    render_reward_prompt,
    run_labeling_baseline,
    token_count,
    tokenize,
)
from veracity.metrics import (
    AggregateStats,
    CostEstimate,
    aggregate,
    cost_model,
    exact_match,
    hamming_similarity,
    pearson,
    reward_similarity_correlation,
)
from veracity.oracle import (
    MAX_ENUMERATION,
    ExactPosterior,
    PlantedOracle,
    RewardOracle,
    enumerate_labels,
)
from veracity.search import (
    best_of_n,
    chain_states,
    greedy_init,
    metropolis_run,
    random_search,
    run_vs,
)
from veracity.taskgen import (
    CorruptionSpec,
    LabelReport,
    Ontology,
    corrupt,
    gen_arithmetic_problem,
    gen_ontology,
    gen_problem,
    inject_unrelated,
    label_veracity,
    negate_statement,
    restore_gold,
    unrelated_pool,
)

__version__ = "0.1.0"

__all__ = [
    "AggregateStats",
    "AnnealingSchedule",
    "BaselineResult",
    "CorruptionSpec",
    "CostEstimate",
    "DataError",
    "EndpointError",
    "ExactPosterior",
    "LMRewardOracle",
    "LabelReport",
    "MAX_ENUMERATION",
    "Ontology",
    "ParsedLabels",
    "PlantedOracle",
    "ReasoningChain",
    "ReasoningProblem",
    "RewardOracle",
    "ScoreResult",
    "ScoringEndpoint",
    "ScoringSession",
    "SearchConfig",
    "SearchTrace",
    "Statement",
    "TRACE_CSV_HEADER",
    "TraceRecord",
    "VeracityError",
    "VeracityVector",
    "aggregate",
    "best_of_n",
    "chain_states",
    "corrupt",
    "cost_model",
    "enumerate_labels",
    "exact_match",
    "flip",
    "gen_arithmetic_problem",
    "gen_ontology",
    "gen_problem",
    "greedy_init",
    "hamming_distance",
    "hamming_similarity",
    "inject_unrelated",
    "label_veracity",
    "metropolis_run",
    "negate_statement",
    "parse_label_json",
    "pearson",
    "problem_from_dict",
    "problem_rng",
    "problem_to_dict",
    "random_search",
    "read_problems_jsonl",
    "render_label_continuation",
    "render_labeling_prompt",
    "render_reward_prompt",
    "restore_gold",
    "reward_similarity_correlation",
    "run_labeling_baseline",
    "run_vs",
    "token_count",
    "tokenize",
    "trace_to_csv",
    "unrelated_pool",
    "write_problems_jsonl",
    "__version__",
]
