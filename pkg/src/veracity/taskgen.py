"""Synthetic reasoning tasks with known per-step veracity.

Two families:

* Logic chains over a generated ontology of pseudoword concepts.  A problem
  walks a backbone of concept inclusions ("Jompuses are wumpuses.") from a
  membership fact to a property conclusion, padded with distractor rules.
  Every generated step is true, so corruption can plant exact gold labels.
* Arithmetic chains ("Start with 5.", "Add 3.", ...) where each step states
  its running value, corrupted by perturbing stated values.

`label_veracity` is an independent checker: it re-parses the context and the
chain and labels each step by forward-chaining entailment (logic) or by
recomputing from the nearest upstream stated value (arithmetic).  Negated
statements are labeled by negation-as-failure: true iff the positive form is
not entailed.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, replace
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np

from veracity.core import (
    DataError,
    ReasoningChain,
    ReasoningProblem,
    Statement,
    VeracityVector,
    problem_rng,
)

# stream tags so the same user seed never aliases across generators
_TAG_ONTOLOGY = 11
_TAG_CONTEXT = 12
_TAG_PROBLEM = 13
_TAG_ARITH = 14
_SALT_CORRUPT = 101
_SALT_INJECT = 102

_ONSETS = (
    "", "b", "br", "d", "dr", "f", "fl", "g", "gr", "j", "k", "l", "m",
    "n", "p", "pl", "r", "s", "sh", "st", "t", "tr", "v", "w", "y", "z",
)
_VOWELS = ("a", "e", "i", "o", "u")
_CODAS = ("m", "r", "l", "n")

_ADJECTIVES = (
    "orange", "overcast", "dull", "wooden", "luminous", "bitter", "sweet",
    "sour", "spicy", "shy", "mean", "kind", "brave", "hot", "cold", "bright",
    "dark", "metallic", "opaque", "transparent", "fruity", "floral", "earthy",
    "small", "large", "feisty", "happy", "nervous", "slow", "fast", "loud",
    "quiet", "red", "blue", "angry", "windy", "salty", "smooth", "rough",
    "heavy",
)

_NAMES = ("Polly", "Max", "Sam", "Wren", "Alex", "Stella", "Fae", "Rex", "Sally", "Tom")

CORRUPTION_PATTERNS = (
    "uniform_prob",
    "uniform_exact_half",
    "front_half",
    "back_half",
    "numeric",
    "inject_unrelated",
)


def _article(word: str) -> str:
    return "an" if word[0] in "aeiou" else "a"


def _plural(concept: str) -> str:
    return concept + "es"


def _singular(plural_word: str) -> str:
    return plural_word[:-2]


@dataclass(frozen=True)
class Implication:
    """One universally quantified rule edge of the ontology.

    obj is a concept (inclusion edge) or a property adjective.  polarity False
    renders and means "are not" / "is not".  template picks one of the three
    surface forms so the corpus is not monotonous; the choice is frozen here so
    the context and any chain step render the same sentence byte for byte.
    """

    subject: str
    obj: str
    obj_is_concept: bool
    polarity: bool = True
    template: int = 0

    def render(self) -> str:
        if self.obj_is_concept:
            obj_plural = _plural(self.obj)
            obj_single = f"{_article(self.obj)} {self.obj}"
            neg_plural = "" if self.polarity else "not "
        else:
            obj_plural = obj_single = self.obj
            neg_plural = "" if self.polarity else "not "
        if self.template == 0:
            return f"{_plural(self.subject).capitalize()} are {neg_plural}{obj_plural}."
        quant = "Every" if self.template == 1 else "Each"
        return f"{quant} {self.subject} is {neg_plural}{obj_single}."


@dataclass(frozen=True)
class Ontology:
    """A generated concept graph plus one individual.

    backbone is the ordered inclusion chain the problems walk; every backbone
    concept carries its own distinct property edge.  Distractor implications
    only ever point away from the backbone (backbone -> distractor concept,
    distractor -> later distractor, or any concept -> an otherwise unused
    property), so they never create alternative proofs of a backbone claim,
    and `concepts` is a topological order of the inclusion graph.
    """

    seed: int
    backbone: tuple[str, ...]
    distractor_concepts: tuple[str, ...]
    properties: tuple[str, ...]
    implications: tuple[Implication, ...]
    individuals: tuple[tuple[str, tuple[str, ...]], ...]
    num_distractors: int

    @property
    def concepts(self) -> tuple[str, ...]:
        return self.backbone + self.distractor_concepts

    def backbone_property(self, concept: str) -> Implication | None:
        if concept not in self.backbone:
            return None
        prop = self.properties[self.backbone.index(concept)]
        for imp in self.implications:
            if imp.subject == concept and not imp.obj_is_concept and imp.obj == prop:
                return imp
        return None

    def inclusion(self, subject: str, obj: str) -> Implication:
        for imp in self.implications:
            if imp.obj_is_concept and imp.subject == subject and imp.obj == obj:
                return imp
        raise KeyError(f"no inclusion edge {subject} -> {obj}")


def _render_membership(name: str, concept: str) -> str:
    return f"{name} is {_article(concept)} {concept}."


def _render_property_fact(name: str, prop: str, polarity: bool) -> str:
    neg = "" if polarity else "not "
    return f"{name} is {neg}{prop}."


def _draw_word(rng: np.random.Generator, taken: set[str]) -> str:
    while True:
        word = (
            _ONSETS[int(rng.integers(len(_ONSETS)))]
            + _VOWELS[int(rng.integers(len(_VOWELS)))]
            + _CODAS[int(rng.integers(len(_CODAS)))]
            + "pus"
        )
        if word not in taken:
            taken.add(word)
            return word


def gen_ontology(seed: int, num_concepts: int, num_distractors: int = 0) -> Ontology:
    """Generate a pseudoword ontology with a `num_concepts`-long backbone.

    num_distractors counts extra implications, not extra concepts; problems of
    1..num_concepts-1 hops can be drawn from the result.
    """
    if seed < 0:
        raise ValueError("seed must be >= 0")
    if num_concepts < 2:
        raise ValueError("need at least 2 concepts for a 1-hop problem")
    if num_distractors < 0:
        raise ValueError("num_distractors must be >= 0")

    rng = np.random.default_rng(
        np.random.SeedSequence([seed, _TAG_ONTOLOGY, num_concepts, num_distractors])
    )
    taken: set[str] = set()
    backbone = tuple(_draw_word(rng, taken) for _ in range(num_concepts))
    num_d_concepts = 0 if num_distractors == 0 else max(2, (num_distractors + 1) // 2)
    distractors = tuple(_draw_word(rng, taken) for _ in range(num_d_concepts))

    num_extra_props = min(num_distractors, len(_ADJECTIVES) - num_concepts)
    if num_concepts > len(_ADJECTIVES):
        raise ValueError("backbone longer than the available property pool")
    prop_idx = rng.choice(len(_ADJECTIVES), size=num_concepts + num_extra_props, replace=False)
    properties = tuple(_ADJECTIVES[int(i)] for i in prop_idx)

    def draw_template() -> int:
        return int(rng.integers(3))

    def draw_polarity() -> bool:
        return bool(rng.random() < 0.8)

    implications: list[Implication] = []
    for a, b in zip(backbone, backbone[1:]):
        implications.append(Implication(a, b, True, True, draw_template()))
    for i, c in enumerate(backbone):
        implications.append(Implication(c, properties[i], False, draw_polarity(), draw_template()))

    # distractor edge candidates, all pointing away from the backbone
    candidates: list[tuple[str, str | None, str | None]] = []
    for c in backbone:
        for d in distractors:
            candidates.append(("cc", c, d))
    for i in range(len(distractors)):
        for j in range(i + 1, len(distractors)):
            candidates.append(("cc", distractors[i], distractors[j]))
    for k in range(num_extra_props):
        candidates.append(("cp", None, properties[num_concepts + k]))
    if num_distractors > len(candidates):
        raise ValueError(
            f"cannot place {num_distractors} distractors; only {len(candidates)} slots"
        )
    all_concepts = backbone + distractors
    chosen = sorted(int(i) for i in rng.choice(len(candidates), size=num_distractors, replace=False))
    for ci in chosen:
        kind, subj, obj = candidates[ci]
        if kind == "cc":
            implications.append(Implication(subj, obj, True, True, draw_template()))
        else:
            subj = all_concepts[int(rng.integers(len(all_concepts)))]
            implications.append(Implication(subj, obj, False, draw_polarity(), draw_template()))

    name = _NAMES[int(rng.integers(len(_NAMES)))]
    memberships = [backbone[0]]
    if distractors:
        memberships.append(distractors[int(rng.integers(len(distractors)))])
    individuals = ((name, tuple(memberships)),)

    return Ontology(
        seed=seed,
        backbone=backbone,
        distractor_concepts=distractors,
        properties=properties,
        implications=tuple(implications),
        individuals=individuals,
        num_distractors=num_distractors,
    )


def render_context(ontology: Ontology, seed: int) -> str:
    """All implications in a seeded shuffle, then the membership assertions."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, _TAG_CONTEXT, ontology.seed]))
    sentences = [imp.render() for imp in ontology.implications]
    order = rng.permutation(len(sentences))
    shuffled = [sentences[int(i)] for i in order]
    for name, memberships in ontology.individuals:
        for concept in memberships:
            shuffled.append(_render_membership(name, concept))
    return " ".join(shuffled)


def gen_problem(ontology: Ontology, hops: int, seed: int) -> ReasoningProblem:
    """A d-hop problem: fact, then d (rule, conclusion) pairs, 2d+1 steps."""
    if seed < 0:
        raise ValueError("seed must be >= 0")
    if not 1 <= hops <= len(ontology.backbone) - 1:
        raise ValueError(
            f"hops must be in [1, {len(ontology.backbone) - 1}] for this ontology"
        )
    rng = np.random.default_rng(
        np.random.SeedSequence([seed, _TAG_PROBLEM, ontology.seed, hops])
    )
    ctx_seed = int(rng.integers(2**31))
    answer_is_true = bool(rng.random() < 0.5)

    name = ontology.individuals[0][0]
    backbone = ontology.backbone
    steps = [Statement(_render_membership(name, backbone[0]), "fact")]
    for i in range(hops - 1):
        edge = ontology.inclusion(backbone[i], backbone[i + 1])
        steps.append(Statement(edge.render(), "rule"))
        steps.append(Statement(_render_membership(name, backbone[i + 1]), "conclusion"))
    prop_edge = ontology.backbone_property(backbone[hops - 1])
    steps.append(Statement(prop_edge.render(), "rule"))
    final = _render_property_fact(name, prop_edge.obj, prop_edge.polarity)
    steps.append(Statement(final, "conclusion"))

    claim = final if answer_is_true else negate_statement(final)
    pid = (
        f"logic-o{ontology.seed}-n{len(backbone)}-d{ontology.num_distractors}"
        f"-h{hops}-s{seed}"
    )
    return ReasoningProblem(
        id=pid,
        context=render_context(ontology, ctx_seed),
        query=f"True or false: {claim}",
        answer="True" if answer_is_true else "False",
        chain=ReasoningChain(tuple(steps)),
        gold_veracity=VeracityVector.all_true(2 * hops + 1),
        hops=hops,
    )


def gen_arithmetic_problem(seed: int, num_steps: int) -> ReasoningProblem:
    """A running-total chain; each step states its value in numeric_out."""
    if seed < 0:
        raise ValueError("seed must be >= 0")
    if num_steps < 1:
        raise ValueError("num_steps must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence([seed, _TAG_ARITH, num_steps]))
    value = int(rng.integers(2, 13))
    start = value
    steps = [Statement(f"Start with {value}.", "arithmetic", value)]
    for _ in range(num_steps - 1):
        # draw everything every iteration so consumption is shape-stable
        code = int(rng.integers(3))
        k = int(rng.integers(1, 10))
        m = int(rng.integers(2, 4))
        if code == 2 and value > 50:
            code = 0
        if code == 1 and value - k < 0:
            code = 0
        if code == 0:
            text, value = f"Add {k}.", value + k
        elif code == 1:
            text, value = f"Subtract {k}.", value - k
        else:
            text, value = f"Multiply by {m}.", value * m
        steps.append(Statement(text, "arithmetic", value))
    return ReasoningProblem(
        id=f"arith-n{num_steps}-s{seed}",
        context=f"A running total starts at {start} and is updated one operation at a time.",
        query="What is the final value?",
        answer=str(value),
        chain=ReasoningChain(tuple(steps)),
        gold_veracity=VeracityVector.all_true(num_steps),
        hops=None,
    )


# negation: first matching pattern wins, one substitution, involutive
_NEGATION_RULES = (
    (" is not an ", " is an "),
    (" is not a ", " is a "),
    (" are not ", " are "),
    (" is not ", " is "),
    (" is an ", " is not an "),
    (" is a ", " is not a "),
    (" are ", " are not "),
    (" is ", " is not "),
)


def negate_statement(text: str) -> str:
    """Toggle the copula negation: "X is a Y." <-> "X is not a Y."."""
    for old, new in _NEGATION_RULES:
        if old in text:
            return text.replace(old, new, 1)
    raise ValueError(f"no copula to negate in {text!r}")


@lru_cache(maxsize=8)
def _pool_from_file(path: str) -> tuple[str, ...]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    pool = tuple(s.strip() for s in lines if s.strip())
    if not pool:
        raise DataError(f"unrelated-statement pool {path!r} is empty")
    return pool


@lru_cache(maxsize=1)
def _default_pool() -> tuple[str, ...]:
    text = resources.files("veracity").joinpath("assets/unrelated_pool.txt").read_text(
        encoding="utf-8"
    )
    return tuple(s.strip() for s in text.splitlines() if s.strip())


def unrelated_pool(path: str | Path | None = None) -> tuple[str, ...]:
    """Statements that are true but tell you nothing about any problem."""
    if path is None:
        return _default_pool()
    return _pool_from_file(str(path))


@dataclass(frozen=True)
class CorruptionSpec:
    """How to plant wrong steps.

    p applies to uniform_prob; fraction to numeric (share of arithmetic steps,
    rounded half up, at least one); count to inject_unrelated.
    """

    pattern: str
    p: float = 0.5
    fraction: float = 0.5
    count: int = 1

    def __post_init__(self) -> None:
        if self.pattern not in CORRUPTION_PATTERNS:
            raise ValueError(
                f"unknown pattern {self.pattern!r}; expected one of {CORRUPTION_PATTERNS}"
            )
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("p must lie in [0, 1]")
        if not 0.0 < self.fraction <= 1.0:
            raise ValueError("fraction must lie in (0, 1]")
        if self.count < 1:
            raise ValueError("count must be >= 1")


_ARITH_OPS = (
    (re.compile(r"^Start with (-?\d+)\.$"), "start"),
    (re.compile(r"^Add (\d+)\.$"), "add"),
    (re.compile(r"^Subtract (\d+)\.$"), "sub"),
    (re.compile(r"^Multiply by (\d+)\.$"), "mul"),
)


def _parse_arith(text: str) -> tuple[str, int] | None:
    for pattern, op in _ARITH_OPS:
        m = pattern.match(text)
        if m:
            return op, int(m.group(1))
    return None


def _apply_arith(op: str, upstream: int, operand: int) -> int:
    if op == "add":
        return upstream + operand
    if op == "sub":
        return upstream - operand
    return upstream * operand


def _expected_value(step: Statement, upstream: int | None) -> int | None:
    """What this step's stated value should be, given the upstream stated one."""
    parsed = _parse_arith(step.text)
    if parsed is None:
        return None
    op, operand = parsed
    if op == "start":
        return operand
    if upstream is None:
        return None
    return _apply_arith(op, upstream, operand)


def _corrupt_numeric_value(
    step: Statement, expected: int | None, rng: np.random.Generator
) -> Statement:
    original = step.numeric_out
    seen: set[int] = set()
    candidates = []
    for c in (original - 1, original + 1, original * 2, original // 2):
        # must differ from the true value AND from what the checker would
        # recompute (those diverge when an upstream step was also corrupted)
        if c != original and c != expected and c not in seen:
            seen.add(c)
            candidates.append(c)
    new = candidates[int(rng.integers(len(candidates)))]
    return Statement(step.text, step.kind, new)


def corrupt(problem: ReasoningProblem, spec: CorruptionSpec, seed: int) -> ReasoningProblem:
    """Plant wrong steps into a clean problem; gold labels record exactly where.

    Logic steps are corrupted by negating their copula, arithmetic steps by
    perturbing the stated value (text untouched).  Requires an all-true gold
    vector; inject_unrelated is the one pattern that stacks on corrupted
    problems (delegated to `inject_unrelated`).
    """
    if spec.pattern == "inject_unrelated":
        return inject_unrelated(problem, spec.count, seed)
    if problem.gold_veracity is None or any(x != 1 for x in problem.gold_veracity.labels):
        raise DataError("corrupt() needs a clean problem with an all-true gold vector")

    n = len(problem.chain)
    rng = problem_rng(seed, problem.id, salt=_SALT_CORRUPT)

    if spec.pattern == "uniform_prob":
        mask = rng.random(n) < spec.p
        targets = [i for i in range(n) if mask[i]]
    elif spec.pattern == "uniform_exact_half":
        targets = sorted(int(i) for i in rng.choice(n, size=n // 2, replace=False))
    elif spec.pattern in ("front_half", "back_half"):
        mid = (n + 1) // 2  # an odd middle step counts as front
        lo, hi = (0, mid) if spec.pattern == "front_half" else (mid, n)
        if hi <= lo:
            raise DataError(f"{spec.pattern}: the targeted half of a length-{n} chain is empty")
        targets = []
        for _ in range(10_000):
            mask = rng.random(hi - lo) < 0.5
            targets = [lo + i for i in range(hi - lo) if mask[i]]
            if targets:
                break
        else:
            raise RuntimeError("resampling for a non-empty corruption set did not terminate")
    else:  # numeric
        arith_idx = [i for i, s in enumerate(problem.chain.steps) if s.numeric_out is not None]
        if not arith_idx:
            raise DataError("numeric corruption needs arithmetic steps")
        k = max(1, math.floor(spec.fraction * len(arith_idx) + 0.5))
        targets = sorted(int(i) for i in rng.choice(arith_idx, size=k, replace=False))

    steps = list(problem.chain.steps)
    labels = [1] * n
    target_set = set(targets)
    upstream: int | None = None
    for i, step in enumerate(steps):
        if i in target_set and step.kind == "unrelated":
            raise DataError("refusing to corrupt an injected unrelated step")
        if step.numeric_out is not None:
            expected = _expected_value(step, upstream)
            if i in target_set:
                steps[i] = _corrupt_numeric_value(step, expected, rng)
                labels[i] = 0
            elif expected is not None and expected != step.numeric_out:
                # a corrupted value upstream changes what this step should
                # state; untargeted steps carry the error forward and stay
                # locally correct, the same rule the checker applies
                steps[i] = Statement(step.text, step.kind, expected)
            upstream = steps[i].numeric_out
        elif i in target_set:
            steps[i] = Statement(negate_statement(step.text), step.kind)
            labels[i] = 0

    return replace(
        problem,
        chain=ReasoningChain(tuple(steps)),
        gold_veracity=VeracityVector(tuple(labels), problem.gold_veracity.num_classes),
    )


def restore_gold(problem: ReasoningProblem) -> ReasoningProblem:
    """Invert logic corruption using the gold labels; byte-exact round trip."""
    if problem.gold_veracity is None:
        raise DataError("restore_gold needs gold labels")
    steps = []
    for step, label in zip(problem.chain.steps, problem.gold_veracity.labels):
        if label == 2:
            raise DataError("cannot restore a chain with injected steps; drop them first")
        if label == 0:
            if step.numeric_out is not None:
                raise DataError("numeric corruption is not invertible from the gold labels")
            steps.append(Statement(negate_statement(step.text), step.kind))
        else:
            steps.append(step)
    return replace(
        problem,
        chain=ReasoningChain(tuple(steps)),
        gold_veracity=VeracityVector.all_true(len(steps)),
    )


def inject_unrelated(
    problem: ReasoningProblem, count: int, seed: int, pool: tuple[str, ...] | None = None
) -> ReasoningProblem:
    """Insert true-but-irrelevant statements; labels go three-class (2 = unrelated)."""
    texts_pool = pool if pool is not None else unrelated_pool()
    if count < 1:
        raise DataError("count must be >= 1")
    if count > len(texts_pool):
        raise DataError(f"pool has only {len(texts_pool)} statements, wanted {count}")
    rng = problem_rng(seed, problem.id, salt=_SALT_INJECT)
    picked = [texts_pool[int(j)] for j in rng.choice(len(texts_pool), size=count, replace=False)]

    steps = list(problem.chain.steps)
    if problem.gold_veracity is not None:
        labels = [int(x) for x in problem.gold_veracity.labels]
    else:
        labels = [1] * len(steps)
    for text in picked:
        pos = int(rng.integers(len(steps) + 1))
        steps.insert(pos, Statement(text, "unrelated"))
        labels.insert(pos, 2)
    return replace(
        problem,
        chain=ReasoningChain(tuple(steps)),
        gold_veracity=VeracityVector(tuple(labels), num_classes=3),
    )


# ---------------------------------------------------------------------------
# independent labeling: parse, forward-chain, recompute


@dataclass(frozen=True)
class _Claim:
    subject: str
    subject_is_individual: bool
    obj: str
    obj_is_concept: bool
    negated: bool


def _parse_sentence(text: str) -> _Claim | None:
    text = text.strip()
    if not text.endswith("."):
        return None
    words = text[:-1].split()
    if len(words) < 3:
        return None
    if words[0] in ("Every", "Each"):
        if len(words) < 4 or words[2] != "is":
            return None
        subject, is_individual, rest = words[1], False, words[3:]
    elif words[0].lower().endswith("puses"):
        if words[1] != "are":
            return None
        subject, is_individual, rest = _singular(words[0].lower()), False, words[2:]
    else:
        if words[1] != "is":
            return None
        subject, is_individual, rest = words[0], True, words[2:]
    negated = False
    if rest and rest[0] == "not":
        negated = True
        rest = rest[1:]
    if not rest:
        return None
    if rest[0] in ("a", "an"):
        if len(rest) != 2:
            return None
        obj, obj_is_concept = rest[1], True
    elif rest[0].endswith("puses"):
        if len(rest) != 1:
            return None
        obj, obj_is_concept = _singular(rest[0]), True
    else:
        if len(rest) != 1:
            return None
        obj, obj_is_concept = rest[0], False
    return _Claim(subject, is_individual, obj, obj_is_concept, negated)


class _ContextModel:
    """Positive assertions only; negatives contribute nothing under NAF."""

    def __init__(self, context: str) -> None:
        self.concept_edges: dict[str, set[str]] = {}
        self.property_rules: set[tuple[str, str]] = set()
        self.memberships: dict[str, set[str]] = {}
        for sentence in re.split(r"(?<=\.)\s+", context.strip()):
            if not sentence:
                continue
            claim = _parse_sentence(sentence)
            if claim is None or claim.negated:
                continue
            if claim.subject_is_individual:
                if claim.obj_is_concept:
                    self.memberships.setdefault(claim.subject, set()).add(claim.obj)
            elif claim.obj_is_concept:
                self.concept_edges.setdefault(claim.subject, set()).add(claim.obj)
            else:
                self.property_rules.add((claim.subject, claim.obj))

    def reachable(self, concept: str) -> set[str]:
        seen: set[str] = set()
        frontier = [concept]
        while frontier:
            nxt = []
            for c in frontier:
                for d in self.concept_edges.get(c, ()):
                    if d not in seen:
                        seen.add(d)
                        nxt.append(d)
            frontier = nxt
        return seen

    def individual_closure(self, name: str) -> set[str]:
        asserted = self.memberships.get(name, set())
        closure = set(asserted)
        for c in asserted:
            closure |= self.reachable(c)
        return closure

    def entails_positive(self, claim: _Claim) -> bool:
        if claim.subject_is_individual:
            closure = self.individual_closure(claim.subject)
            if claim.obj_is_concept:
                return claim.obj in closure
            return any((c, claim.obj) in self.property_rules for c in closure)
        if claim.obj_is_concept:
            return claim.obj in self.reachable(claim.subject)
        scope = {claim.subject} | self.reachable(claim.subject)
        return any((c, claim.obj) in self.property_rules for c in scope)


@dataclass(frozen=True)
class LabelReport:
    """Checker output: one label per step plus parse diagnostics."""

    vector: VeracityVector
    diagnostics: tuple[str, ...] = ()


def label_veracity(
    context: str, chain: ReasoningChain, pool: tuple[str, ...] | None = None
) -> LabelReport:
    """Label each step independently of how the chain was produced.

    Pool statements get class 2 (three-class output iff any are present).
    Arithmetic steps are checked against a recompute from the nearest upstream
    stated value.  Everything else is parsed and forward-chained against the
    context; a negated statement is true iff its positive form is unprovable.
    Unparseable steps get label 0 and a diagnostic line.
    """
    pool_set = set(pool if pool is not None else unrelated_pool())
    model: _ContextModel | None = None
    labels: list[int] = []
    diagnostics: list[str] = []
    saw_unrelated = False
    upstream: int | None = None

    for i, step in enumerate(chain.steps):
        if step.text in pool_set:
            labels.append(2)
            saw_unrelated = True
            continue
        if step.numeric_out is not None:
            expected = _expected_value(step, upstream)
            if expected is None:
                labels.append(0)
                diagnostics.append(
                    f"step {i}: cannot recompute arithmetic step {step.text!r}"
                )
            else:
                labels.append(1 if step.numeric_out == expected else 0)
            upstream = step.numeric_out
            continue
        claim = _parse_sentence(step.text)
        if claim is None:
            labels.append(0)
            diagnostics.append(f"step {i}: could not parse {step.text!r}")
            continue
        if model is None:
            model = _ContextModel(context)
        entailed = model.entails_positive(replace(claim, negated=False))
        labels.append(1 if entailed != claim.negated else 0)

    vector = VeracityVector(tuple(labels), num_classes=3 if saw_unrelated else 2)
    return LabelReport(vector, tuple(diagnostics))
