"""A deterministic toy world: token proposer, generator and classifier backed by
a JSON fixture, plus the brute-force neighbourhood oracle used to check the
search.

Generation rules:

* the last whitespace token of a conditional prompt is its condition, the rest
  are the mutable tokens;
* for condition ``c`` the first trigger (fixture order) whose token set is
  contained in the mutable tokens and that has templates for ``c`` fires, and
  its templates are emitted;
* otherwise the templates of ``confusion_label`` are emitted;
* ``{prompt}`` in a template is replaced by the conditional prompt.
"""

import hashlib
import logging
import math
import string
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Optional, Tuple

import numpy as np

from . import schemas
from .backend_api import BackendSuite, ClassifierVerdict, GenerationParams, TokenProposal
from .errors import ConfigInvalid, NeighborhoodTooLarge
from .json_loader import JSONLoader
from .json_validator import JSONValidator
from .optimizer import evaluate_prompt
from .prompt_core import DEFAULT_MASK, expand_children

logger = logging.getLogger(__name__)

PROMPT_SLOT = "{prompt}"
DEFAULT_ORACLE_CAP = 10**6


@dataclass(frozen=True)
class ToyLexicon:
    entries: Dict[str, float]
    overrides: Dict[Tuple[str, str], Tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self):
        for token, score in self.entries.items():
            if not math.isfinite(score):
                raise ConfigInvalid(f"Lexicon score for {token!r} is not finite")
        for context, tokens in self.overrides.items():
            if not tokens:
                raise ConfigInvalid(f"Override for context {context} is empty")

    @property
    def vocabulary(self):
        vocab = set(self.entries)
        for tokens in self.overrides.values():
            vocab.update(tokens)
        return vocab

    def ranked(self):
        return sorted(self.entries.items(), key=lambda item: (-item[1], item[0]))

    def propose(self, left, right, top_k):
        override = self.overrides.get((left, right))
        if override:
            return [
                TokenProposal(token, 1.0 / (rank + 1))
                for rank, token in enumerate(override[:top_k])
            ]
        return [TokenProposal(token, score) for token, score in self.ranked()[:top_k]]


@dataclass(frozen=True)
class ToyTrigger:
    tokens: FrozenSet[str]
    templates: Dict[str, Tuple[str, ...]]


@dataclass(frozen=True)
class ToyWorldDefinition:
    labels: Tuple[str, ...]
    lexicon: ToyLexicon
    triggers: Tuple[ToyTrigger, ...]
    templates: Dict[str, Tuple[str, ...]]
    keyword_map: Dict[str, str]
    confusion_label: str
    fallback_label: str
    noise_seed: int = 0
    noise_rate: float = 0.0

    def __post_init__(self):
        labels = set(self.labels)
        for label in self.labels:
            if not self.templates.get(label):
                raise ConfigInvalid(f"Label {label!r} has no emission template")
            if label not in self.keyword_map.values():
                raise ConfigInvalid(f"Label {label!r} has no keyword")
        for keyword, label in self.keyword_map.items():
            if label not in labels:
                raise ConfigInvalid(f"Keyword {keyword!r} maps to unknown label {label!r}")
        for name in ("confusion_label", "fallback_label"):
            if getattr(self, name) not in labels:
                raise ConfigInvalid(f"{name} {getattr(self, name)!r} is not a label")
        vocabulary = self.lexicon.vocabulary
        for trigger in self.triggers:
            outside = sorted(trigger.tokens - vocabulary)
            if outside:
                raise ConfigInvalid(f"Trigger tokens outside the lexicon: {outside}")
            unknown = sorted(set(trigger.templates) - labels)
            if unknown:
                raise ConfigInvalid(f"Trigger templates for unknown labels: {unknown}")
        if not 0.0 <= self.noise_rate < 1.0:
            raise ConfigInvalid("noise_rate must lie in [0, 1)")

    @classmethod
    def from_dict(cls, data):
        JSONValidator.validate(data, schemas.TOYWORLD_SCHEMA, what="Toy world")
        lexicon = data["lexicon"]
        overrides = {
            (o["left"], o["right"]): tuple(o["tokens"]) for o in lexicon.get("overrides", [])
        }
        triggers = tuple(
            ToyTrigger(
                frozenset(t["tokens"]),
                {label: tuple(texts) for label, texts in t["templates"].items()},
            )
            for t in data.get("triggers", [])
        )
        return cls(
            labels=tuple(data["labels"]),
            lexicon=ToyLexicon(dict(lexicon["entries"]), overrides),
            triggers=triggers,
            templates={label: tuple(texts) for label, texts in data["templates"].items()},
            keyword_map={k.lower(): v for k, v in data["keywords"].items()},
            confusion_label=data["confusion_label"],
            fallback_label=data.get("fallback_label", data["confusion_label"]),
            noise_seed=int(data.get("noise_seed", 0)),
            noise_rate=float(data.get("noise_rate", 0.0)),
        )

    @classmethod
    def load(cls, source):
        return cls.from_dict(JSONLoader.load(source))


def derive_seed(*parts):
    """A 32-bit seed that depends only on ``parts``, never on call order."""
    combined = "-".join(str(p) for p in parts)
    return int(hashlib.sha256(combined.encode("utf-8")).hexdigest(), 16) % (2**32 - 1)


class ToyWorld:
    """In-process implementation of all three backend interfaces."""

    def __init__(self, definition, mask_sentinel=DEFAULT_MASK):
        self.definition = definition
        self.mask_sentinel = mask_sentinel

    @classmethod
    def load(cls, source, mask_sentinel=DEFAULT_MASK):
        return cls(ToyWorldDefinition.load(source), mask_sentinel)

    @property
    def labels(self):
        return self.definition.labels

    # -- token proposer ---------------------------------------------------
    def toy_propose(self, masked_text, top_k, mask_sentinel=None):
        mask_sentinel = mask_sentinel or self.mask_sentinel
        tokens = masked_text.split()
        left = right = ""
        if mask_sentinel in tokens:
            i = tokens.index(mask_sentinel)
            left = tokens[i - 1] if i > 0 else ""
            right = tokens[i + 1] if i + 1 < len(tokens) else ""
        return self.definition.lexicon.propose(left, right, top_k)

    propose_tokens = toy_propose

    # -- generator --------------------------------------------------------
    def _split_condition(self, conditional_prompt):
        tokens = conditional_prompt.split()
        if not tokens:
            return (), None
        condition = tokens[-1] if tokens[-1] in self.definition.labels else None
        return tuple(tokens[:-1]), condition

    def fired_trigger(self, conditional_prompt):
        words, condition = self._split_condition(conditional_prompt)
        if condition is None:
            return None
        present = set(words)
        for trigger in self.definition.triggers:
            if condition in trigger.templates and trigger.tokens <= present:
                return trigger
        return None

    def toy_generate(self, conditional_prompt, params=GenerationParams(), seed=None):
        _, condition = self._split_condition(conditional_prompt)
        trigger = self.fired_trigger(conditional_prompt)
        if trigger is not None:
            templates = trigger.templates[condition]
        else:
            templates = self.definition.templates[self.definition.confusion_label]

        texts = [t.replace(PROMPT_SLOT, conditional_prompt) for t in templates]
        texts = texts[: params.num_return]

        if self.definition.noise_rate > 0:
            rng = np.random.default_rng(
                derive_seed(self.definition.noise_seed, seed, conditional_prompt)
            )
            others = sorted(label for label in self.definition.labels if label != condition)
            for i in range(len(texts)):
                if rng.random() < self.definition.noise_rate:
                    other = others[int(rng.integers(len(others)))]
                    texts[i] = self.definition.templates[other][0]
        return texts

    def generate_texts(self, conditional_prompt, params=GenerationParams(), seed=None):
        return self.toy_generate(conditional_prompt, params, seed)

    # -- classifier -------------------------------------------------------
    def toy_classify(self, texts, label_set=None):
        """Leftmost keyword wins. With a ``label_set``, keywords of other labels
        are skipped and the fallback is the world's own fallback if it is in
        the set, else the set's first label."""
        allowed = set(label_set) if label_set is not None else set(self.definition.labels)
        fallback = self.definition.fallback_label
        if fallback not in allowed:
            fallback = label_set[0]

        verdicts = []
        for text in texts:
            label = fallback
            for token in text.lower().split():
                token = token.strip(string.punctuation)
                if self.definition.keyword_map.get(token) in allowed:
                    label = self.definition.keyword_map[token]
                    break
            verdicts.append(ClassifierVerdict(text, label))
        return verdicts

    classify_texts = toy_classify

    def bound_to(self, label_set):
        return LabelBoundClassifier(self, label_set)


class LabelBoundClassifier:
    """The toy classifier restricted to one run's label set."""

    def __init__(self, world, label_set):
        self.world = world
        self.label_set = tuple(label_set)

    def classify_texts(self, texts):
        return self.world.toy_classify(texts, self.label_set)


@dataclass(frozen=True)
class OracleResult:
    best_prompt: object
    best_score: float
    neighborhood_size: int
    depth: int
    best_candidate: Optional[object] = None
    operations: int = 0


def brute_force_best(
    seed_prompt,
    depth,
    world,
    objective_config,
    cap=DEFAULT_ORACLE_CAP,
):
    """Exhaustive search over every prompt within ``depth`` operations of the seed.

    Every branch is kept, unlike the (1, lambda) loop which follows one
    incumbent, so the oracle's best score bounds the optimizer's pool best.
    Ties go to fewer operations, then to the lexicographically smaller text.
    """
    if depth < 0:
        raise ValueError("depth must be >= 0")
    if world.definition.noise_rate != 0:
        raise ConfigInvalid("The oracle needs a noise-free toy world")

    backends = BackendSuite.from_world(world, label_set=objective_config.label_set)
    masking = objective_config.masking

    reached = {seed_prompt.text: (0, seed_prompt)}
    frontier = [seed_prompt]
    for level in range(1, depth + 1):
        next_frontier = []
        for prompt in sorted(frontier, key=lambda p: p.text):
            batch = expand_children(
                prompt, world, masking, objective_config.operations
            )
            for child in batch:
                if child.text in reached:
                    continue
                reached[child.text] = (level, child)
                next_frontier.append(child)
                if len(reached) > cap:
                    raise NeighborhoodTooLarge(
                        f"More than {cap} prompts within depth {depth}"
                    )
        frontier = next_frontier
    logger.info("Oracle neighbourhood: %d prompts at depth %d", len(reached), depth)

    scored = []
    for text, (ops, prompt) in reached.items():
        candidate = evaluate_prompt(prompt, backends, objective_config)
        scored.append(((-candidate.value, ops, text), prompt, candidate))
    (_, ops, _), prompt, candidate = min(scored, key=lambda s: s[0])
    return OracleResult(
        best_prompt=prompt,
        best_score=candidate.value,
        neighborhood_size=len(reached),
        depth=depth,
        best_candidate=candidate,
        operations=ops,
    )

