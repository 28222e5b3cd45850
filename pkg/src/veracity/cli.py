"""Command-line pipeline: generate, corrupt, search, evaluate, export.

Exit codes: 0 success, 1 usage, 2 data problem, 3 endpoint problem.

Every subcommand that writes a results JSONL puts a single meta line first
({"meta": {...}} with the resolved experiment configuration); output files are
byte-deterministic for a fixed input and seed, regardless of --workers.  A
TOML file given with --config supplies defaults for any flag not set on the
command line.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Callable, Sequence

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - Python 3.10
    import tomli as tomllib

from veracity.core import (
    AnnealingSchedule,
    DataError,
    EndpointError,
    ReasoningProblem,
    SearchConfig,
    SearchTrace,
    VeracityVector,
    labels_from_json,
    labels_to_json,
    problem_to_dict,
    read_problems_jsonl,
    trace_to_csv,
    write_problems_jsonl,
)
from veracity.metrics import aggregate, cost_model, reward_similarity_correlation
from veracity.oracle import PlantedOracle, RewardOracle
from veracity.search import best_of_n, greedy_init, random_search, run_vs
from veracity.taskgen import (
    CorruptionSpec,
    corrupt,
    gen_arithmetic_problem,
    gen_ontology,
    gen_problem,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_ENDPOINT = 3

ENV_ENDPOINT_URL = "VERACITY_ENDPOINT_URL"
ENV_API_KEY = "VERACITY_API_KEY"

ABLATION_VARIANTS = ("vs", "sa", "const-high", "const-low", "random", "bon", "greedy")


class _Parser(argparse.ArgumentParser):
    """argparse uses exit code 2 for usage; remap onto this tool's contract."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


# ---------------------------------------------------------------------------
# config resolution: CLI flag > TOML entry > built-in default


class Resolver:
    def __init__(self, args: argparse.Namespace, defaults: dict[str, Any]):
        self.args = vars(args)
        self.defaults = defaults
        path = self.args.get("config")
        if path:
            with open(path, "rb") as f:
                self.file_config = tomllib.load(f)
            unknown = set(self.file_config) - set(defaults)
            if unknown:
                raise DataError(f"unknown config keys in {path}: {sorted(unknown)}")
        else:
            self.file_config = {}

    def __getitem__(self, key: str) -> Any:
        flag = self.args.get(key)
        if flag is not None:
            return flag
        if key in self.file_config:
            return self.file_config[key]
        return self.defaults[key]

    def resolved(self) -> dict[str, Any]:
        return {k: self[k] for k in self.defaults}


# Runtime-only knobs that must not leak into result files: output bytes are
# required to be identical for the same experiment regardless of --workers.
VOLATILE_CONFIG_KEYS = ("workers", "traces")


def _meta_line(command: str, config: dict[str, Any]) -> str:
    config = {k: v for k, v in config.items() if k not in VOLATILE_CONFIG_KEYS}
    meta = {"command": command, "config": config}
    return json.dumps({"meta": meta}, ensure_ascii=False)


def write_results(path: str | Path, command: str, config: dict[str, Any], rows: list[dict]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(_meta_line(command, config) + "\n")
        for row in rows:
            f.write(json.dumps(row, ensure_ascii=False) + "\n")


def read_results(path: str | Path) -> tuple[dict | None, list[dict]]:
    """Returns (meta, rows); the meta line is optional in the input."""
    meta = None
    rows = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise DataError(f"{path}:{lineno}: invalid JSON: {e}") from e
            if "meta" in obj and lineno == 1:
                meta = obj["meta"]
            else:
                rows.append(obj)
    return meta, rows


def _parse_couplings(text: str) -> tuple[tuple[int, int, float], ...]:
    """"0:1:0.5;2:3:1.0" -> ((0, 1, 0.5), (2, 3, 1.0))"""
    out = []
    for part in text.split(";"):
        part = part.strip()
        if not part:
            continue
        pieces = part.split(":")
        if len(pieces) != 3:
            raise ValueError(f"coupling {part!r} is not i:j:strength")
        out.append((int(pieces[0]), int(pieces[1]), float(pieces[2])))
    return tuple(out)


def _parse_float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _parse_int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


# ---------------------------------------------------------------------------
# oracle construction


def _planted_oracle_for(problem: ReasoningProblem, r: Resolver) -> PlantedOracle:
    if problem.gold_veracity is None:
        raise DataError(f"problem {problem.id}: planted oracle needs gold labels")
    couplings = r["couplings"]
    if isinstance(couplings, str):
        couplings = _parse_couplings(couplings)
    return PlantedOracle(
        truth=problem.gold_veracity,
        weights=r["weight"],
        couplings=couplings,
        noise_sigma=r["noise_sigma"],
        seed=r["oracle_seed"],
    )


def _endpoint_oracle_factory(r: Resolver) -> tuple[Callable[[ReasoningProblem], RewardOracle], Any]:
    from veracity.lmclient import LMRewardOracle, ScoringEndpoint, load_demos

    url = r["endpoint_url"] or os.environ.get(ENV_ENDPOINT_URL)
    if not url:
        raise EndpointError(
            f"no endpoint URL: pass --endpoint-url or set {ENV_ENDPOINT_URL}"
        )
    api_key = r["api_key"] or os.environ.get(ENV_API_KEY)
    endpoint = ScoringEndpoint(
        url,
        model=r["model"],
        api_key=api_key,
        caching=r["caching"],
        timeout=r["timeout"],
    )
    demos = load_demos(r["demos"]) if r["demos"] else None

    def factory(problem: ReasoningProblem) -> RewardOracle:
        return LMRewardOracle(
            endpoint,
            template=r["template"],
            num_classes=r["num_classes"],
            demos=demos,
        )

    return factory, endpoint


def _oracle_factory(r: Resolver) -> tuple[Callable[[ReasoningProblem], RewardOracle], Any]:
    if r["oracle"] == "planted":
        return (lambda problem: _planted_oracle_for(problem, r)), None
    return _endpoint_oracle_factory(r)


def _search_config(r: Resolver) -> SearchConfig:
    iterations = r["iterations"]
    schedule = None
    if r["schedule"] is not None or r["t_start"] is not None or r["t_end"] is not None:
        kind = r["schedule"] or "linear"
        t_start = r["t_start"] if r["t_start"] is not None else 2.0
        t_end = r["t_end"] if r["t_end"] is not None else (t_start if kind == "constant" else 1.0)
        schedule = AnnealingSchedule(kind, t_start, t_end, iterations)
    return SearchConfig(
        iterations=iterations,
        schedule=schedule,
        proposal=r["proposal"],
        block_max_size=r["block_max_size"],
        use_greedy_init=not r["no_greedy_init"],
        seed=r["seed"],
    )


def _run_parallel(worker: Callable, items: Sequence, workers: int) -> list:
    """Map preserving input order; worker count never changes the output."""
    if workers <= 1:
        return [worker(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(worker, items))


# ---------------------------------------------------------------------------
# subcommands


GEN_DEFAULTS = {
    "kind": "logic",
    "num_problems": 10,
    "hops": 3,
    "num_concepts": None,
    "num_distractors": 8,
    "num_steps": 7,
    "seed": 0,
}


def cmd_gen(args: argparse.Namespace) -> int:
    r = Resolver(args, GEN_DEFAULTS)
    kind = r["kind"]
    problems = []
    for i in range(r["num_problems"]):
        seed = r["seed"] + i
        if kind == "logic":
            hops = r["hops"]
            num_concepts = r["num_concepts"] or hops + 1
            ontology = gen_ontology(seed, num_concepts, r["num_distractors"])
            problems.append(gen_problem(ontology, hops, seed))
        else:
            problems.append(gen_arithmetic_problem(seed, r["num_steps"]))
    write_problems_jsonl(args.out, problems)
    print(f"wrote {len(problems)} problems to {args.out}")
    return EXIT_OK


CORRUPT_DEFAULTS = {
    "pattern": "uniform_exact_half",
    "p": 0.5,
    "fraction": 0.5,
    "count": 1,
    "seed": 0,
}


def cmd_corrupt(args: argparse.Namespace) -> int:
    r = Resolver(args, CORRUPT_DEFAULTS)
    try:
        spec = CorruptionSpec(
            pattern=r["pattern"], p=r["p"], fraction=r["fraction"], count=r["count"]
        )
    except ValueError as e:
        raise DataError(str(e)) from e
    problems = read_problems_jsonl(args.infile)
    corrupted = [corrupt(p, spec, r["seed"]) for p in problems]
    write_problems_jsonl(args.out, corrupted)
    print(f"corrupted {len(corrupted)} problems -> {args.out}")
    return EXIT_OK


SEARCH_DEFAULTS = {
    "oracle": "planted",
    "weight": 2.0,
    "couplings": (),
    "noise_sigma": 0.0,
    "oracle_seed": 0,
    "endpoint_url": None,
    "api_key": None,
    "model": "mock",
    "template": "reward_logic",
    "caching": "prefix",
    "timeout": 30.0,
    "num_classes": 2,
    "demos": None,
    "iterations": 200,
    "schedule": None,
    "t_start": None,
    "t_end": None,
    "proposal": "single_bit",
    "block_max_size": 3,
    "no_greedy_init": False,
    "seed": 0,
    "workers": 1,
    "traces": None,
}


def cmd_search(args: argparse.Namespace) -> int:
    r = Resolver(args, SEARCH_DEFAULTS)
    problems = read_problems_jsonl(args.infile)
    factory, endpoint = _oracle_factory(r)
    config = _search_config(r)
    traces_dir = r["traces"]
    if traces_dir:
        Path(traces_dir).mkdir(parents=True, exist_ok=True)

    def worker(problem: ReasoningProblem) -> dict:
        oracle = factory(problem)
        trace = run_vs(oracle, problem, config)
        if traces_dir:
            Path(traces_dir, f"{problem.id}.csv").write_text(
                trace_to_csv(trace), encoding="utf-8"
            )
        return {
            "id": problem.id,
            "best_veracity": labels_to_json(trace.best_v),
            "best_log_reward": trace.best_log_reward,
            "oracle_calls": trace.oracle_calls,
        }

    try:
        rows = _run_parallel(worker, problems, r["workers"])
    finally:
        if endpoint is not None:
            endpoint.close()
    write_results(args.out, "search", r.resolved(), rows)
    print(f"searched {len(rows)} problems -> {args.out}")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    from veracity.metrics import exact_match, hamming_similarity

    problems = {p.id: p for p in read_problems_jsonl(args.problems)}
    _, rows = read_results(args.results)
    per_problem = []
    sims = []
    exacts = []
    for row in rows:
        pid = row.get("id")
        if pid not in problems:
            raise DataError(f"result references unknown problem id {pid!r}")
        gold = problems[pid].gold_veracity
        if gold is None:
            raise DataError(f"problem {pid} carries no gold labels to evaluate against")
        found = labels_from_json(row["best_veracity"])
        if len(found) != len(gold):
            raise DataError(f"problem {pid}: result length {len(found)} != gold {len(gold)}")
        sim = hamming_similarity(found, gold)
        exact = exact_match(found, gold)
        sims.append(sim)
        exacts.append(1.0 if exact else 0.0)
        per_problem.append({"id": pid, "hamming_similarity": sim, "exact_match": exact})
    if not per_problem:
        raise DataError("no result rows to evaluate")
    sim_stats = aggregate(sims)
    report = {
        "num_problems": len(per_problem),
        "hamming_similarity": {
            "mean": sim_stats.mean,
            "std": sim_stats.std,
            "n": sim_stats.n,
        },
        "exact_match_rate": aggregate(exacts).mean,
        "per_problem": per_problem,
    }
    Path(args.out).write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    print(
        f"evaluated {len(per_problem)} problems: "
        f"similarity {sim_stats.mean:.4f}, exact {report['exact_match_rate']:.4f}"
    )
    return EXIT_OK


ABLATE_DEFAULTS = {
    "variants": ",".join(ABLATION_VARIANTS),
    "iterations": 200,
    "repetitions": 5,
    "weight": 2.0,
    "couplings": (),
    "noise_sigma": 0.0,
    "oracle_seed": 0,
    "seed": 0,
    "workers": 1,
}


def run_ablation_variant(
    name: str,
    oracle: RewardOracle,
    problem: ReasoningProblem,
    iterations: int,
    seed: int,
) -> SearchTrace:
    """One named strategy under a shared evaluation budget."""
    if name == "vs":
        return run_vs(oracle, problem, SearchConfig(iterations=iterations, seed=seed))
    if name == "sa":
        return run_vs(
            oracle,
            problem,
            SearchConfig(
                iterations=iterations,
                schedule=AnnealingSchedule("linear", 2.0, 0.1, iterations),
                use_greedy_init=False,
                seed=seed,
            ),
        )
    if name in ("const-high", "const-low"):
        temperature = 1.0 if name == "const-high" else 0.1
        return run_vs(
            oracle,
            problem,
            SearchConfig(
                iterations=iterations,
                schedule=AnnealingSchedule.constant(temperature, iterations),
                use_greedy_init=False,
                seed=seed,
            ),
        )
    if name == "random":
        return random_search(oracle, problem, iterations, seed)
    if name == "bon":
        return best_of_n(oracle, problem, n=iterations, seed=seed)
    if name == "greedy":
        v = greedy_init(oracle, problem)
        trace = SearchTrace()
        trace.observe(v, oracle.log_reward(problem, v))
        trace.oracle_calls = len(problem.chain) * oracle.num_classes + 1
        return trace
    raise ValueError(f"unknown ablation variant {name!r}")


def cmd_ablate(args: argparse.Namespace) -> int:
    from veracity.metrics import hamming_similarity

    r = Resolver(args, ABLATE_DEFAULTS)
    names = [v.strip() for v in r["variants"].split(",") if v.strip()]
    for name in names:
        if name not in ABLATION_VARIANTS:
            raise DataError(
                f"unknown variant {name!r}; known: {', '.join(ABLATION_VARIANTS)}"
            )
    problems = read_problems_jsonl(args.infile)
    iterations = r["iterations"]
    reps = r["repetitions"]

    def worker(item: tuple[str, int, ReasoningProblem]) -> tuple[str, float, float, int]:
        name, rep, problem = item
        oracle = _planted_oracle_for(problem, r)
        trace = run_ablation_variant(name, oracle, problem, iterations, r["seed"] + rep)
        sim = hamming_similarity(trace.best_v, problem.gold_veracity)
        return name, trace.best_log_reward, sim, trace.oracle_calls

    items = [
        (name, rep, problem)
        for name in names
        for rep in range(reps)
        for problem in problems
    ]
    outcomes = _run_parallel(worker, items, r["workers"])

    variants_report = {}
    for name in names:
        rewards = [x[1] for x in outcomes if x[0] == name]
        sims = [x[2] for x in outcomes if x[0] == name]
        calls = [x[3] for x in outcomes if x[0] == name]
        reward_stats = aggregate(rewards)
        variants_report[name] = {
            "mean_best_log_reward": reward_stats.mean,
            "std_best_log_reward": reward_stats.std,
            "mean_similarity": aggregate(sims).mean,
            "mean_oracle_calls": aggregate(calls).mean,
            "runs": len(rewards),
        }
    report = {
        "iterations": iterations,
        "repetitions": reps,
        "num_problems": len(problems),
        "variants": variants_report,
    }
    Path(args.out).write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    print(f"ablation over {len(names)} variants -> {args.out}")
    return EXIT_OK


CORRELATE_DEFAULTS = {
    "noise_sigmas": "0.0",
    "weight": 2.0,
    "couplings": (),
    "oracle_seed": 0,
    "workers": 1,
}


def cmd_correlate(args: argparse.Namespace) -> int:
    r = Resolver(args, CORRELATE_DEFAULTS)
    sigmas = r["noise_sigmas"]
    if isinstance(sigmas, str):
        sigmas = _parse_float_list(sigmas)
    problems = read_problems_jsonl(args.infile)

    def worker(item: tuple[float, ReasoningProblem]) -> tuple[float, float | None]:
        sigma, problem = item
        if problem.gold_veracity is None:
            raise DataError(f"problem {problem.id}: correlation needs gold labels")
        oracle = PlantedOracle(
            truth=problem.gold_veracity,
            weights=r["weight"],
            couplings=r["couplings"] if not isinstance(r["couplings"], str)
            else _parse_couplings(r["couplings"]),
            noise_sigma=sigma,
            seed=r["oracle_seed"],
        )
        return sigma, reward_similarity_correlation(oracle, problem, problem.gold_veracity)

    items = [(sigma, p) for sigma in sigmas for p in problems]
    outcomes = _run_parallel(worker, items, r["workers"])
    per_sigma = {}
    for sigma in sigmas:
        values = [c for s, c in outcomes if s == sigma and c is not None]
        dropped = sum(1 for s, c in outcomes if s == sigma and c is None)
        stats = aggregate(values) if values else None
        per_sigma[str(sigma)] = {
            "mean_pearson": stats.mean if stats else None,
            "std_pearson": stats.std if stats else None,
            "n": len(values),
            "flat_reward_dropped": dropped,
        }
    report = {"sigmas": sigmas, "per_sigma": per_sigma}
    Path(args.out).write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    means = [per_sigma[str(s)]["mean_pearson"] for s in sigmas]
    print(f"correlation at sigmas {sigmas}: {means}")
    return EXIT_OK


def cmd_export_labels(args: argparse.Namespace) -> int:
    problems = {p.id: p for p in read_problems_jsonl(args.problems)}
    _, rows = read_results(args.results)
    out_rows = []
    for row in rows:
        pid = row.get("id")
        if pid not in problems:
            raise DataError(f"result references unknown problem id {pid!r}")
        p = problems[pid]
        labels = labels_from_json(row["best_veracity"])
        if len(labels) != len(p.chain):
            raise DataError(f"problem {pid}: label length != chain length")
        out_rows.append(
            {
                "id": pid,
                "context": p.context,
                "query": p.query,
                "steps": [s.text for s in p.chain.steps],
                "pseudo_labels": labels_to_json(labels),
                "answer_withheld": True,
            }
        )
    if not out_rows:
        raise DataError("no result rows to export")
    write_results(args.out, "export-labels", {"source": str(args.results)}, out_rows)
    print(f"exported {len(out_rows)} pseudo-labeled records -> {args.out}")
    return EXIT_OK


COST_DEFAULTS = {
    "caching": "prefix",
    "offsets": None,
}


def cmd_cost(args: argparse.Namespace) -> int:
    r = Resolver(args, COST_DEFAULTS)
    offsets = r["offsets"]
    if isinstance(offsets, str):
        offsets = _parse_int_list(offsets)
    try:
        estimate = cost_model(
            args.num_steps,
            args.context_tokens,
            args.step_tokens,
            caching=r["caching"],
            divergence_offsets=offsets,
        )
    except ValueError as e:
        raise DataError(str(e)) from e
    payload = {
        "caching": r["caching"],
        "attention_units": estimate.attention_units,
        "scored_tokens": estimate.scored_tokens,
    }
    text = json.dumps(payload, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    print(text)
    return EXIT_OK


MOCK_DEFAULTS = {
    "host": "127.0.0.1",
    "port": 8977,
}


def cmd_mock_server(args: argparse.Namespace) -> int:
    from veracity.mockserver import serve

    r = Resolver(args, MOCK_DEFAULTS)
    config = None
    if args.server_config:
        with open(args.server_config, "r", encoding="utf-8") as f:
            config = json.load(f)
    serve(host=r["host"], port=r["port"], config=config)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser wiring


def build_parser() -> _Parser:
    parser = _Parser(prog="veracity", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config(p: _Parser) -> None:
        p.add_argument("--config", help="TOML file with defaults for this subcommand")

    p = sub.add_parser("gen", help="generate synthetic problems")
    p.add_argument("--kind", choices=["logic", "arithmetic"])
    p.add_argument("--num-problems", type=int, dest="num_problems")
    p.add_argument("--hops", type=int)
    p.add_argument("--num-concepts", type=int, dest="num_concepts")
    p.add_argument("--num-distractors", type=int, dest="num_distractors")
    p.add_argument("--num-steps", type=int, dest="num_steps")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    add_config(p)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("corrupt", help="plant wrong steps with gold bookkeeping")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument(
        "--pattern",
        choices=[
            "uniform_prob",
            "uniform_exact_half",
            "front_half",
            "back_half",
            "numeric",
            "inject_unrelated",
        ],
    )
    p.add_argument("--p", type=float)
    p.add_argument("--fraction", type=float)
    p.add_argument("--count", type=int)
    p.add_argument("--seed", type=int)
    add_config(p)
    p.set_defaults(func=cmd_corrupt)

    p = sub.add_parser("search", help="run veracity search over problems")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--oracle", choices=["planted", "endpoint"])
    p.add_argument("--weight", type=float)
    p.add_argument("--couplings", help='e.g. "0:1:0.5;2:3:1.0"')
    p.add_argument("--noise-sigma", type=float, dest="noise_sigma")
    p.add_argument("--oracle-seed", type=int, dest="oracle_seed")
    p.add_argument("--endpoint-url", dest="endpoint_url")
    p.add_argument("--api-key", dest="api_key")
    p.add_argument("--model")
    p.add_argument("--template", choices=["reward_logic", "reward_math", "reward_avi"])
    p.add_argument("--caching", choices=["none", "prefix", "prefix_plus_divergence"])
    p.add_argument("--timeout", type=float)
    p.add_argument("--num-classes", type=int, dest="num_classes")
    p.add_argument("--demos", choices=["logic", "math"])
    p.add_argument("--iterations", type=int)
    p.add_argument("--schedule", choices=["constant", "linear", "cosine"])
    p.add_argument("--t-start", type=float, dest="t_start")
    p.add_argument("--t-end", type=float, dest="t_end")
    p.add_argument("--proposal", choices=["single_bit", "block", "categorical_resample"])
    p.add_argument("--block-max-size", type=int, dest="block_max_size")
    p.add_argument(
        "--no-greedy-init", action="store_const", const=True, dest="no_greedy_init"
    )
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--traces", help="directory for per-problem trace CSVs")
    add_config(p)
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("eval", help="score search results against gold labels")
    p.add_argument("--results", required=True)
    p.add_argument("--problems", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="compare search strategies on one problem set")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--variants", help=f"comma list from: {', '.join(ABLATION_VARIANTS)}")
    p.add_argument("--iterations", type=int)
    p.add_argument("--repetitions", type=int)
    p.add_argument("--weight", type=float)
    p.add_argument("--couplings")
    p.add_argument("--noise-sigma", type=float, dest="noise_sigma")
    p.add_argument("--oracle-seed", type=int, dest="oracle_seed")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    add_config(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser(
        "correlate", help="reward vs. similarity correlation across noise levels"
    )
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--noise-sigmas", dest="noise_sigmas", help='e.g. "0,0.5,1,2"')
    p.add_argument("--weight", type=float)
    p.add_argument("--couplings")
    p.add_argument("--oracle-seed", type=int, dest="oracle_seed")
    p.add_argument("--workers", type=int)
    add_config(p)
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser(
        "export-labels", help="export pseudo-labeled records (answers withheld)"
    )
    p.add_argument("--results", required=True)
    p.add_argument("--problems", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_labels)

    p = sub.add_parser("cost", help="inference-cost estimates for a chain")
    p.add_argument("--num-steps", type=int, required=True, dest="num_steps")
    p.add_argument("--context-tokens", type=int, required=True, dest="context_tokens")
    p.add_argument("--step-tokens", type=int, required=True, dest="step_tokens")
    p.add_argument("--caching", choices=["none", "prefix", "prefix_plus_divergence"])
    p.add_argument("--offsets", help='measured divergence offsets, e.g. "3,7,2,9"')
    p.add_argument("--out")
    add_config(p)
    p.set_defaults(func=cmd_cost)

    p = sub.add_parser("mock-server", help="run the bundled mock scoring server")
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.add_argument("--server-config", dest="server_config", help="JSON config file")
    add_config(p)
    p.set_defaults(func=cmd_mock_server)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit:
        raise
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except EndpointError as e:
        print(f"endpoint error: {e}", file=sys.stderr)
        return EXIT_ENDPOINT
    except FileNotFoundError as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
