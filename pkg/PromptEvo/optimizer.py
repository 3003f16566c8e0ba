"""The (1, lambda) prompt search.

Each iteration expands the incumbent into its full child set, evaluates every
child (generate, paraphrase-filter, classify, score) and keeps the single best
child as the next incumbent. The parent never competes with its children. The
seed and every incumbent join a candidate pool, and the final prompt is the
pool's best entry.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, List, Optional, Tuple

from . import run_log as records
from .backend_api import GenerationParams
from .errors import BackendError, ConfigInvalid, EmptyPool, EmptyText
from .metrics import BleuConfig, ObjectiveScore, bleu_sentence, tally
from .prompt_core import (
    ALL_OPERATIONS,
    DEFAULT_MASK,
    DEFAULT_PLACEHOLDER,
    MaskingOptions,
    Operation,
    Prompt,
    expand_children,
    render,
    tokenize_prompt,
)

logger = logging.getLogger(__name__)

DISQUALIFIED_SCORE = -math.inf

ISEAR_LABELS = ("anger", "disgust", "fear", "guilt", "joy", "sadness", "shame")


class FilterMode(str, Enum):
    PER_TEXT = "PerText"
    PROMPT_AVERAGE = "PromptAverage"
    BOTH = "Both"

    @property
    def drops_texts(self):
        return self in (FilterMode.PER_TEXT, FilterMode.BOTH)

    @property
    def checks_average(self):
        return self in (FilterMode.PROMPT_AVERAGE, FilterMode.BOTH)


@dataclass(frozen=True)
class OptimizerConfig:
    max_iterations: int = 10
    label_set: Tuple[str, ...] = ISEAR_LABELS
    mu: int = 1
    bleu_cfg: BleuConfig = field(default_factory=BleuConfig)
    generation_params: GenerationParams = field(default_factory=GenerationParams)
    text_filter_mode: FilterMode = FilterMode.BOTH
    operations: Tuple[Operation, ...] = ALL_OPERATIONS
    placeholder: str = DEFAULT_PLACEHOLDER
    mask_sentinel: str = DEFAULT_MASK
    # Label rendered into masked prompts; None means the first label.
    context_label: Optional[str] = None
    top_k: int = 5
    rng_seed: Optional[int] = None
    max_workers: int = 4

    def __post_init__(self):
        object.__setattr__(self, "label_set", tuple(self.label_set))
        object.__setattr__(self, "text_filter_mode", FilterMode(self.text_filter_mode))
        object.__setattr__(
            self, "operations", tuple(Operation(op) for op in self.operations)
        )
        if self.max_iterations < 1:
            raise ConfigInvalid("max_iterations must be >= 1")
        if not self.label_set:
            raise ConfigInvalid("label_set must not be empty")
        if len(set(self.label_set)) != len(self.label_set):
            raise ConfigInvalid("label_set contains duplicates")
        if self.mu != 1:
            raise ConfigInvalid("Only a single parent (mu = 1) is supported")
        if not self.operations:
            raise ConfigInvalid("At least one operation must be enabled")
        if self.context_label is not None and self.context_label not in self.label_set:
            raise ConfigInvalid(f"Context label {self.context_label!r} is not a label")
        if self.top_k < 1:
            raise ConfigInvalid("top_k must be >= 1")
        if self.max_workers < 1:
            raise ConfigInvalid("max_workers must be >= 1")
        self.generation_params.validate()

    @property
    def masking(self):
        return MaskingOptions(
            mask_sentinel=self.mask_sentinel,
            context_label=self.context_label or self.label_set[0],
            top_k=self.top_k,
        )


@dataclass(frozen=True)
class ConditionEvaluation:
    """Generated texts of one conditional prompt and what became of them."""

    label: str
    conditional_prompt: str
    texts: Tuple[str, ...] = ()
    bleu: Tuple[Optional[float], ...] = ()
    kept: Tuple[bool, ...] = ()
    verdicts: Tuple[Optional[str], ...] = ()

    @property
    def kept_texts(self):
        return tuple(t for t, k in zip(self.texts, self.kept) if k)

    @property
    def filtered_texts(self):
        return tuple(t for t, k in zip(self.texts, self.kept) if not k)

    def to_dict(self):
        return {
            "label": self.label,
            "conditional_prompt": self.conditional_prompt,
            "texts": list(self.texts),
            "bleu": list(self.bleu),
            "kept": list(self.kept),
            # Unclassified texts have no verdict.
            "verdict": list(self.verdicts) or [None] * len(self.texts),
        }


@dataclass(frozen=True)
class Candidate:
    prompt: Prompt
    conditions: Tuple[ConditionEvaluation, ...]
    score: ObjectiveScore
    warnings: Tuple[str, ...] = ()

    @property
    def value(self):
        return self.score.value

    @property
    def disqualified(self):
        return self.score.disqualified

    @property
    def mean_bleu(self):
        values = [b for c in self.conditions for b in c.bleu if b is not None]
        return sum(values) / len(values) if values else None

    def to_fields(self):
        return {
            "prompt_id": self.prompt.id,
            "prompt_text": self.prompt.text,
            "lineage": self.prompt.lineage.to_dict() if self.prompt.lineage else None,
            "per_condition": [c.to_dict() for c in self.conditions],
            "macro_f1": self.score.macro_f1,
            "per_label_f1": dict(self.score.per_label_f1),
            "n_texts_scored": self.score.n_texts_scored,
            "n_texts_filtered": self.score.n_texts_filtered,
            "mean_bleu": self.mean_bleu,
            "disqualified": self.disqualified,
            "warnings": list(self.warnings),
        }


def _disqualified(prompt, conditions, warnings, n_filtered=0):
    score = ObjectiveScore(macro_f1=0.0, n_texts_filtered=n_filtered, disqualified=True)
    return Candidate(prompt, tuple(conditions), score, tuple(warnings))


def _generate_condition(prompt, label, backends, cfg, warnings):
    conditional = render(prompt, label, cfg.label_set)
    texts = backends.generator.generate_texts(
        conditional.text, cfg.generation_params, seed=cfg.rng_seed
    )
    bleu, kept = [], []
    for text in texts:
        try:
            value = bleu_sentence(text, conditional.text, cfg.bleu_cfg)
        except EmptyText:
            warnings.append(f"Empty text generated for {conditional.text!r}")
            bleu.append(None)
            kept.append(False)
            continue
        bleu.append(value)
        kept.append(not (cfg.text_filter_mode.drops_texts and value > cfg.bleu_cfg.threshold))
    return ConditionEvaluation(label, conditional.text, tuple(texts), tuple(bleu), tuple(kept))


def classify_conditions(conditions, classifier):
    """Classify all kept texts in one batch and attach the verdicts."""
    batch = [text for c in conditions for text in c.kept_texts]
    labels = iter([v.label for v in classifier.classify_texts(batch)] if batch else [])
    classified = []
    for c in conditions:
        verdicts = tuple(next(labels) if k else None for k in c.kept)
        classified.append(
            ConditionEvaluation(
                c.label, c.conditional_prompt, c.texts, c.bleu, c.kept, verdicts
            )
        )
    return tuple(classified)


def score_conditions(conditions, label_set, n_filtered, disqualified=False):
    predictions, gold = [], []
    for c in conditions:
        for verdict, k in zip(c.verdicts, c.kept):
            if k:
                predictions.append(verdict)
                gold.append(c.label)
    return ObjectiveScore.from_tally(
        tally(predictions, gold, label_set), n_filtered, disqualified
    )


def evaluate_prompt(prompt, backends, cfg=OptimizerConfig(), classifier=None):
    """Generate, filter, classify and score one prompt.

    Backend failures disqualify the candidate with a warning. Configuration
    errors propagate.
    """
    classifier = classifier or backends.classifier
    warnings: List[str] = []
    conditions = []
    try:
        for label in cfg.label_set:
            conditions.append(_generate_condition(prompt, label, backends, cfg, warnings))
    except BackendError as e:
        message = f"Generation failed: {type(e).__name__}: {e}"
        logger.warning("%s (%s)", message, prompt.text)
        return _disqualified(prompt, conditions, warnings + [message])

    n_filtered = sum(len(c.filtered_texts) for c in conditions)
    n_kept = sum(len(c.kept_texts) for c in conditions)
    bleu_values = [b for c in conditions for b in c.bleu if b is not None]

    reasons = []
    if n_kept == 0:
        reasons.append("every generated text was filtered")
    if (
        cfg.text_filter_mode.checks_average
        and bleu_values
        and sum(bleu_values) / len(bleu_values) > cfg.bleu_cfg.threshold
    ):
        reasons.append("mean BLEU exceeds the paraphrase threshold")
    if n_kept == 0:
        logger.info("Disqualified %r: %s", prompt.text, "; ".join(reasons))
        return _disqualified(prompt, conditions, warnings, n_filtered)

    try:
        conditions = classify_conditions(conditions, classifier)
    except BackendError as e:
        message = f"Classification failed: {type(e).__name__}: {e}"
        logger.warning("%s (%s)", message, prompt.text)
        return _disqualified(prompt, conditions, warnings + [message], n_filtered)

    if reasons:
        logger.info("Disqualified %r: %s", prompt.text, "; ".join(reasons))
    score = score_conditions(conditions, cfg.label_set, n_filtered, bool(reasons))
    return Candidate(prompt, conditions, score, tuple(warnings))


def rescore(candidate, classifier, cfg=OptimizerConfig()):
    """Score an evaluated candidate's kept texts with another classifier."""
    if candidate.disqualified and not any(c.kept_texts for c in candidate.conditions):
        return candidate
    conditions = classify_conditions(candidate.conditions, classifier)
    score = score_conditions(
        conditions,
        cfg.label_set,
        candidate.score.n_texts_filtered,
        candidate.score.disqualified,
    )
    return Candidate(candidate.prompt, conditions, score, candidate.warnings)


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    parent: Candidate
    children: Tuple[Candidate, ...]
    incumbent: Candidate
    carried_over: bool = False
    warnings: Tuple[str, ...] = ()


def _evaluate_all(prompts, backends, cfg):
    if cfg.max_workers > 1 and len(prompts) > 1:
        with ThreadPoolExecutor(max_workers=cfg.max_workers) as executor:
            return list(executor.map(lambda p: evaluate_prompt(p, backends, cfg), prompts))
    return [evaluate_prompt(p, backends, cfg) for p in prompts]


def run_iteration(parent, backends, cfg=OptimizerConfig(), iteration=1):
    batch = expand_children(
        parent.prompt, backends.proposer, cfg.masking, cfg.operations, cfg.max_workers
    )
    warnings = list(batch.warnings)
    children = tuple(_evaluate_all(list(batch), backends, cfg))

    incumbent = None
    best = DISQUALIFIED_SCORE
    for child in children:
        if child.value > best:
            incumbent, best = child, child.value

    carried_over = incumbent is None
    if carried_over:
        message = f"AllChildrenDisqualified: iteration {iteration} keeps its parent"
        logger.warning(message)
        warnings.append(message)
        incumbent = parent
    return IterationRecord(
        iteration, parent, children, incumbent, carried_over, tuple(warnings)
    )


@dataclass(frozen=True)
class PoolEntry:
    iteration: int
    candidate: Candidate


class CandidatePool:
    """The seed candidate followed by one incumbent per iteration."""

    def __init__(self, entries=()):
        self.entries: List[PoolEntry] = list(entries)

    def add(self, iteration, candidate):
        self.entries.append(PoolEntry(iteration, candidate))

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


def select_one_best(pool):
    """The entry with the greatest score; ties go to the earliest iteration."""
    entries = list(pool)
    if not entries:
        raise EmptyPool("The candidate pool is empty")
    best = entries[0]
    for entry in entries[1:]:
        if entry.candidate.value > best.candidate.value:
            best = entry
    if best.candidate.disqualified:
        logger.warning("Every pool entry is disqualified; returning the seed")
        return entries[0]
    return best


@dataclass
class OptimizationResult:
    final: PoolEntry
    seed: Candidate
    iterations: List[IterationRecord]
    pool: CandidatePool
    run_log: "records.RunLog"
    warnings: Tuple[str, ...] = ()

    @property
    def final_prompt(self):
        return self.final.candidate.prompt


def optimize(
    seed,
    backends,
    cfg=OptimizerConfig(),
    run_log=None,
    progress: Optional[Callable[[IterationRecord], None]] = None,
):
    """Run ``cfg.max_iterations`` iterations from ``seed`` (text or Prompt)."""
    if isinstance(seed, str):
        seed = tokenize_prompt(seed, cfg.placeholder)
    run_log = run_log if run_log is not None else records.RunLog()

    seed_candidate = evaluate_prompt(seed, backends, cfg)
    run_log.append(records.seed_record(seed_candidate))
    pool = CandidatePool()
    pool.add(0, seed_candidate)
    logger.info("Seed %r scored %s", seed.text, seed_candidate.score.macro_f1)

    iterations = []
    parent = seed_candidate
    for i in range(1, cfg.max_iterations + 1):
        record = run_iteration(parent, backends, cfg, iteration=i)
        for child in record.children:
            run_log.append(records.child_record(i, child))
        run_log.append(records.incumbent_record(record))
        pool.add(i, record.incumbent)
        iterations.append(record)
        if progress is not None:
            progress(record)
        parent = record.incumbent

    final = select_one_best(pool)
    warnings = ()
    if final.candidate.disqualified:
        warnings = ("Every pool entry is disqualified; the seed is returned",)
    run_log.append(records.final_record(final, warnings))
    return OptimizationResult(final, seed_candidate, iterations, pool, run_log, warnings)
