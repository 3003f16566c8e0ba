"""Token-level prompt representation and the three mutation operators.

A prompt is a whitespace-tokenized sequence of words that ends with exactly one
condition placeholder. Children are derived from a parent by Addition (insert
the proposer's most probable token at a gap), Replacement (swap one word for
the proposer's most probable token) or Removal (drop one word).

A proposer is any object with ``propose_tokens(masked_text, top_k)`` that
returns score-sorted proposals carrying a ``token``.
"""

import hashlib
import logging
import string
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional, Tuple

from .errors import (
    BackendError,
    EmptyPrompt,
    InvalidPosition,
    MultiplePlaceholders,
    PlaceholderNotFinal,
    PlaceholderTargeted,
    ProposerEmpty,
    ProposerError,
    ProposerUnavailable,
    UnknownCondition,
    WouldEmptyPrompt,
    ZeroPlaceholders,
)

logger = logging.getLogger(__name__)

DEFAULT_PLACEHOLDER = "<em>"
DEFAULT_MASK = "<mask>"


class TokenKind(str, Enum):
    WORD = "Word"
    PLACEHOLDER = "Placeholder"


@dataclass(frozen=True)
class PromptToken:
    kind: TokenKind
    surface: str = ""

    def __post_init__(self):
        if self.kind is TokenKind.WORD:
            if not self.surface or any(ch.isspace() for ch in self.surface):
                raise ValueError(f"Invalid word token: {self.surface!r}")
        elif self.surface:
            raise ValueError("Placeholder tokens carry no surface")

    @classmethod
    def word(cls, surface):
        return cls(TokenKind.WORD, surface)

    @classmethod
    def placeholder(cls):
        return cls(TokenKind.PLACEHOLDER)

    @property
    def is_placeholder(self):
        return self.kind is TokenKind.PLACEHOLDER


class Operation(str, Enum):
    ADDITION = "Addition"
    REPLACEMENT = "Replacement"
    REMOVAL = "Removal"

    @property
    def short(self):
        return _SHORT_NAMES[self]


_SHORT_NAMES = {
    Operation.ADDITION: "Add.",
    Operation.REPLACEMENT: "Repl.",
    Operation.REMOVAL: "Rem.",
}

ALL_OPERATIONS = (Operation.ADDITION, Operation.REPLACEMENT, Operation.REMOVAL)


@dataclass(frozen=True)
class OperationDescriptor:
    """One mutation step.

    ``position`` is a gap index for Addition and a word index otherwise.
    Removal carries no token; Addition and Replacement carry exactly one.
    """

    op: Operation
    position: int
    token: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "op", Operation(self.op))
        if self.position < 0:
            raise InvalidPosition(f"Negative position {self.position}")
        if self.op is Operation.REMOVAL and self.token is not None:
            raise ValueError("Removal carries no token")
        if self.op is not Operation.REMOVAL and not self.token:
            raise ValueError(f"{self.op.value} needs a token")

    def describe(self):
        if self.op is Operation.REMOVAL:
            return f"{self.op.short} @{self.position}"
        return f"{self.op.short} @{self.position} {self.token!r}"


@dataclass(frozen=True)
class Lineage:
    parent_id: str
    descriptor: OperationDescriptor
    # Replacement whose proposal equals the replaced word.
    noop: bool = False
    alternates: Tuple[str, ...] = ()

    def to_dict(self):
        return {
            "parent_id": self.parent_id,
            "op": self.descriptor.op.value,
            "position": self.descriptor.position,
            "token": self.descriptor.token,
            "alternates": list(self.alternates),
        }

    @classmethod
    def from_dict(cls, data):
        descriptor = OperationDescriptor(
            Operation(data["op"]), int(data["position"]), data.get("token")
        )
        return cls(
            data["parent_id"], descriptor, alternates=tuple(data.get("alternates", ()))
        )


def prompt_id(text):
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:12]


_PLACEHOLDER_TOKEN = PromptToken.placeholder()


@dataclass(frozen=True)
class Prompt:
    tokens: Tuple[PromptToken, ...]
    lineage: Optional[Lineage] = None
    placeholder: str = DEFAULT_PLACEHOLDER
    id: str = field(default="", compare=False)

    def __post_init__(self):
        tokens = tuple(self.tokens)
        object.__setattr__(self, "tokens", tokens)

        n_placeholders = sum(1 for t in tokens if t.is_placeholder)
        if n_placeholders == 0:
            raise ZeroPlaceholders("Prompt has no condition placeholder")
        if n_placeholders > 1:
            raise MultiplePlaceholders("Prompt has more than one condition placeholder")
        if not tokens[-1].is_placeholder:
            raise PlaceholderNotFinal("The condition placeholder must be the last token")
        if len(tokens) < 2:
            raise EmptyPrompt("Prompt has no words besides the placeholder")
        for t in tokens[:-1]:
            if self.placeholder in t.surface:
                raise MultiplePlaceholders(
                    f"Word {t.surface!r} contains the placeholder {self.placeholder!r}"
                )

        if not self.id:
            object.__setattr__(self, "id", prompt_id(self.text))

    @property
    def words(self):
        return tuple(t.surface for t in self.tokens[:-1])

    @property
    def mutable_token_count(self):
        return len(self.tokens) - 1

    @property
    def text(self):
        return " ".join(self.words + (self.placeholder,))

    def derive(self, words, lineage):
        tokens = tuple(PromptToken.word(w) for w in words) + (_PLACEHOLDER_TOKEN,)
        return Prompt(tokens, lineage=lineage, placeholder=self.placeholder)

    def to_dict(self):
        return {
            "id": self.id,
            "text": self.text,
            "lineage": self.lineage.to_dict() if self.lineage else None,
        }

    def __str__(self):
        return self.text


@dataclass(frozen=True)
class ConditionalPrompt:
    source_prompt_id: str
    condition: str
    text: str


@dataclass(frozen=True)
class MaskingOptions:
    """How masked prompts are phrased for the token proposer."""

    mask_sentinel: str = DEFAULT_MASK
    # Label rendered in place of the placeholder; None keeps the sentinel.
    context_label: Optional[str] = None
    top_k: int = 1


def tokenize_prompt(raw, placeholder_sentinel=DEFAULT_PLACEHOLDER):
    if raw is None or not raw.strip():
        raise EmptyPrompt("Prompt is empty")

    count = raw.count(placeholder_sentinel)
    if count == 0:
        raise ZeroPlaceholders(
            f"Prompt {raw!r} does not contain the placeholder {placeholder_sentinel!r}"
        )
    if count > 1:
        raise MultiplePlaceholders(
            f"Prompt {raw!r} contains the placeholder {placeholder_sentinel!r} {count} times"
        )

    # A sentinel glued to a word becomes its own segment.
    segments = raw.replace(placeholder_sentinel, f" {placeholder_sentinel} ").split()
    words = [s for s in segments if s != placeholder_sentinel]
    if not words:
        raise EmptyPrompt(f"Prompt {raw!r} has no words besides the placeholder")
    if segments[-1] != placeholder_sentinel:
        raise PlaceholderNotFinal(
            f"Placeholder {placeholder_sentinel!r} must be the last token of {raw!r}"
        )

    tokens = tuple(PromptToken.word(w) for w in words) + (_PLACEHOLDER_TOKEN,)
    return Prompt(tokens, placeholder=placeholder_sentinel)


def render(prompt, condition, label_set=None):
    if label_set is not None and condition not in label_set:
        raise UnknownCondition(
            f"Condition {condition!r} is not one of {', '.join(label_set)}"
        )
    text = " ".join(prompt.words + (condition,))
    return ConditionalPrompt(prompt.id, condition, text)


def masked_text(prompt, op, position, masking=MaskingOptions()):
    """The rendered prompt with the target position replaced by the mask."""
    words = list(prompt.words)
    if Operation(op) is Operation.ADDITION:
        _check_gap(prompt, position)
        words.insert(position, masking.mask_sentinel)
    else:
        _check_word_index(prompt, position)
        words[position] = masking.mask_sentinel
    words.append(masking.context_label or prompt.placeholder)
    return " ".join(words)


def _check_gap(prompt, gap):
    if not 0 <= gap <= prompt.mutable_token_count:
        raise InvalidPosition(
            f"Gap {gap} outside [0, {prompt.mutable_token_count}] for {prompt.text!r}"
        )


def _check_word_index(prompt, index):
    if index == prompt.mutable_token_count:
        raise PlaceholderTargeted(f"Index {index} addresses the placeholder")
    if not 0 <= index < prompt.mutable_token_count:
        raise InvalidPosition(
            f"Index {index} outside [0, {prompt.mutable_token_count}) for {prompt.text!r}"
        )


def _clean_proposal(token, prompt, masking):
    segments = (token or "").split()
    if not segments:
        return None
    word = segments[0]
    if all(ch in string.punctuation for ch in word):
        return None
    if prompt.placeholder in word or masking.mask_sentinel in word:
        return None
    return word


def _propose(prompt, proposer, text, masking):
    try:
        proposals = list(proposer.propose_tokens(text, masking.top_k))
    except ProposerError:
        raise
    except BackendError as e:
        raise ProposerUnavailable(f"Proposer failed for {text!r}: {e}") from e

    if not proposals:
        raise ProposerEmpty(f"No proposal returned for {text!r}")
    word = _clean_proposal(proposals[0].token, prompt, masking)
    if word is None:
        raise ProposerEmpty(f"Unusable proposal {proposals[0].token!r} for {text!r}")
    return word, tuple(p.token for p in proposals[1:])


def apply_descriptor(parent, descriptor, alternates=()):
    """Replay one recorded operation on ``parent`` without a proposer."""
    words = list(parent.words)
    noop = False
    if descriptor.op is Operation.ADDITION:
        _check_gap(parent, descriptor.position)
        words.insert(descriptor.position, descriptor.token)
    elif descriptor.op is Operation.REPLACEMENT:
        _check_word_index(parent, descriptor.position)
        noop = words[descriptor.position] == descriptor.token
        words[descriptor.position] = descriptor.token
    else:
        _check_word_index(parent, descriptor.position)
        if len(words) < 2:
            raise WouldEmptyPrompt(f"Removing the only word of {parent.text!r}")
        del words[descriptor.position]
    return parent.derive(words, Lineage(parent.id, descriptor, noop, tuple(alternates)))


def apply_addition(prompt, gap, proposer, masking=MaskingOptions()):
    text = masked_text(prompt, Operation.ADDITION, gap, masking)
    word, alternates = _propose(prompt, proposer, text, masking)
    return apply_descriptor(
        prompt, OperationDescriptor(Operation.ADDITION, gap, word), alternates
    )


def apply_replacement(prompt, index, proposer, masking=MaskingOptions()):
    text = masked_text(prompt, Operation.REPLACEMENT, index, masking)
    word, alternates = _propose(prompt, proposer, text, masking)
    return apply_descriptor(
        prompt, OperationDescriptor(Operation.REPLACEMENT, index, word), alternates
    )


def apply_removal(prompt, index):
    return apply_descriptor(prompt, OperationDescriptor(Operation.REMOVAL, index))


@dataclass(frozen=True)
class ChildBatch:
    """Children of one parent in descriptor order, after deduplication."""

    parent: Prompt
    children: Tuple[Prompt, ...]
    dropped: Tuple[Prompt, ...] = ()
    warnings: Tuple[str, ...] = ()

    def __iter__(self):
        return iter(self.children)

    def __len__(self):
        return len(self.children)

    def __getitem__(self, item):
        return self.children[item]


def child_plan(prompt, operations: Iterable[Operation] = ALL_OPERATIONS):
    """(operation, position) steps in batch order: Additions by gap, then
    Replacements, then Removals by index."""
    operations = {Operation(op) for op in operations}
    n = prompt.mutable_token_count
    plan = []
    if Operation.ADDITION in operations:
        plan += [(Operation.ADDITION, gap) for gap in range(n + 1)]
    if Operation.REPLACEMENT in operations:
        plan += [(Operation.REPLACEMENT, i) for i in range(n)]
    if Operation.REMOVAL in operations and n >= 2:
        plan += [(Operation.REMOVAL, i) for i in range(n)]
    return plan


def expand_children(
    prompt,
    proposer,
    masking=MaskingOptions(),
    operations=ALL_OPERATIONS,
    max_workers=1,
):
    plan = child_plan(prompt, operations)

    def build(step):
        op, position = step
        try:
            if op is Operation.ADDITION:
                return apply_addition(prompt, position, proposer, masking), None
            if op is Operation.REPLACEMENT:
                return apply_replacement(prompt, position, proposer, masking), None
            return apply_removal(prompt, position), None
        except ProposerError as e:
            return None, f"{op.value} at {position} skipped: {type(e).__name__}: {e}"

    if max_workers > 1 and len(plan) > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as executor:
            results = list(executor.map(build, plan))
    else:
        results = [build(step) for step in plan]

    seen = {prompt.text}
    children, dropped, warnings = [], [], []
    for child, warning in results:
        if warning:
            logger.warning(warning)
            warnings.append(warning)
            continue
        if child.lineage.noop or child.text in seen:
            logger.debug("Dropping duplicate child %r", child.text)
            dropped.append(child)
            continue
        seen.add(child.text)
        children.append(child)

    return ChildBatch(prompt, tuple(children), tuple(dropped), tuple(warnings))
