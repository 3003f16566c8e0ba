"""Tests for prompt tokenization, rendering and the three mutation operators."""

import hashlib
import random

import pytest

import PromptEvo as pe
from PromptEvo.backend_api import TokenProposal
from PromptEvo.errors import (
    BackendUnreachable,
    EmptyPrompt,
    InvalidPosition,
    MultiplePlaceholders,
    PlaceholderNotFinal,
    PlaceholderTargeted,
    ProposerEmpty,
    ProposerUnavailable,
    UnknownCondition,
    WouldEmptyPrompt,
    ZeroPlaceholders,
)
from PromptEvo.prompt_core import (
    MaskingOptions,
    OperationDescriptor,
    apply_descriptor,
    child_plan,
    masked_text,
)

JOY = MaskingOptions(context_label="joy")


class TableProposer:
    """Answers known masked texts from a table and everything else with ``default``."""

    def __init__(self, answers=None, default="Please"):
        self.answers = answers or {}
        self.default = default
        self.calls = []

    def propose_tokens(self, masked, top_k):
        self.calls.append(masked)
        token = self.answers.get(masked, self.default)
        return [TokenProposal(token, 1.0), TokenProposal("alt", 0.5)][:top_k]


class FailingProposer:
    def __init__(self, error):
        self.error = error

    def propose_tokens(self, masked, top_k):
        raise self.error


# The operations shown for "Text that expresses <em>".
TABLE_PROPOSER_ANSWERS = {
    "Text <mask> that expresses joy": "string",
    "Text <mask> expresses joy": "a",
}


@pytest.fixture
def text_prompt():
    return pe.tokenize_prompt("Text that expresses <em>")


# ---------------------------------------------------------------------------
# Tokenization and rendering
# ---------------------------------------------------------------------------
class TestTokenize:
    def test_words_and_placeholder(self):
        prompt = pe.tokenize_prompt("Write a text that expresses <em>")
        assert prompt.words == ("Write", "a", "text", "that", "expresses")
        assert prompt.tokens[-1].is_placeholder
        assert prompt.mutable_token_count == 5
        assert prompt.text == "Write a text that expresses <em>"

    def test_id_is_stable_hash_of_text(self):
        prompt = pe.tokenize_prompt("Write a text that expresses <em>")
        expected = hashlib.sha256(prompt.text.encode("utf-8")).hexdigest()[:12]
        assert prompt.id == expected
        assert pe.tokenize_prompt("Write  a text that   expresses <em>").id == expected

    def test_glued_sentinel_is_split(self):
        prompt = pe.tokenize_prompt("Text that expresses<em>")
        assert prompt.words == ("Text", "that", "expresses")

    def test_custom_sentinel(self):
        prompt = pe.tokenize_prompt("Describe [C]", "[C]")
        assert prompt.words == ("Describe",)
        assert prompt.text == "Describe [C]"

    @pytest.mark.parametrize(
        "raw, error",
        [
            ("Write a text", ZeroPlaceholders),
            ("<em> and <em>", MultiplePlaceholders),
            ("<em>", EmptyPrompt),
            ("   ", EmptyPrompt),
            ("", EmptyPrompt),
            ("Text that expresses <em> now", PlaceholderNotFinal),
        ],
    )
    def test_invalid_prompts(self, raw, error):
        with pytest.raises(error) as excinfo:
            pe.tokenize_prompt(raw)
        assert excinfo.value.exit_code == 2


class TestRender:
    def test_render_joy_and_anger(self, text_prompt):
        assert pe.render(text_prompt, "joy").text == "Text that expresses joy"
        assert pe.render(text_prompt, "anger").text == "Text that expresses anger"

    def test_single_word(self):
        rendered = pe.render(pe.tokenize_prompt("Write <em>"), "fear")
        assert rendered.text == "Write fear"
        assert rendered.condition == "fear"

    def test_unknown_condition(self, text_prompt):
        with pytest.raises(UnknownCondition):
            pe.render(text_prompt, "boredom", ("joy", "fear"))

    def test_masked_text_uses_context_label(self, text_prompt):
        assert (
            masked_text(text_prompt, pe.Operation.ADDITION, 1, JOY)
            == "Text <mask> that expresses joy"
        )
        assert (
            masked_text(text_prompt, pe.Operation.REPLACEMENT, 2, MaskingOptions())
            == "Text that <mask> <em>"
        )


# ---------------------------------------------------------------------------
# Operators
# ---------------------------------------------------------------------------
class TestOperators:
    def test_addition(self, text_prompt):
        proposer = TableProposer(TABLE_PROPOSER_ANSWERS)
        child = pe.apply_addition(text_prompt, 1, proposer, JOY)
        assert child.text == "Text string that expresses <em>"
        assert child.lineage.parent_id == text_prompt.id
        assert child.lineage.descriptor == OperationDescriptor(
            pe.Operation.ADDITION, 1, "string"
        )
        assert text_prompt.text == "Text that expresses <em>"

    def test_addition_at_front_and_end(self, text_prompt):
        proposer = TableProposer()
        assert pe.apply_addition(text_prompt, 0, proposer).text == (
            "Please Text that expresses <em>"
        )
        assert pe.apply_addition(text_prompt, 3, proposer).text == (
            "Text that expresses Please <em>"
        )

    def test_replacement(self, text_prompt):
        proposer = TableProposer(TABLE_PROPOSER_ANSWERS)
        masking = MaskingOptions(context_label="joy", top_k=2)
        child = pe.apply_replacement(text_prompt, 1, proposer, masking)
        assert child.text == "Text a expresses <em>"
        assert child.lineage.alternates == ("alt",)

    def test_identical_replacement_is_noop(self, text_prompt):
        child = pe.apply_replacement(text_prompt, 0, TableProposer(default="Text"))
        assert child.lineage.noop
        assert child.text == text_prompt.text

    def test_removal(self, text_prompt):
        assert pe.apply_removal(text_prompt, 1).text == "Text expresses <em>"

    def test_removal_of_article(self):
        prompt = pe.tokenize_prompt("Write in a long text string to expresses <em>")
        assert pe.apply_removal(prompt, 2).text == (
            "Write in long text string to expresses <em>"
        )

    def test_removal_would_empty(self):
        with pytest.raises(WouldEmptyPrompt) as excinfo:
            pe.apply_removal(pe.tokenize_prompt("Write <em>"), 0)
        assert excinfo.value.exit_code == 2

    def test_placeholder_targeted(self, text_prompt):
        with pytest.raises(PlaceholderTargeted):
            pe.apply_removal(text_prompt, 3)
        with pytest.raises(PlaceholderTargeted):
            pe.apply_replacement(text_prompt, 3, TableProposer())

    def test_invalid_positions(self, text_prompt):
        with pytest.raises(InvalidPosition):
            pe.apply_addition(text_prompt, 5, TableProposer())
        with pytest.raises(InvalidPosition):
            pe.apply_removal(text_prompt, 7)
        with pytest.raises(InvalidPosition):
            OperationDescriptor(pe.Operation.REMOVAL, -1)

    def test_proposer_backend_failure(self, text_prompt):
        proposer = FailingProposer(BackendUnreachable("down"))
        with pytest.raises(ProposerUnavailable):
            pe.apply_addition(text_prompt, 0, proposer)

    @pytest.mark.parametrize("token", ["", "...", "<mask>", "a<em>"])
    def test_unusable_proposals(self, text_prompt, token):
        with pytest.raises(ProposerEmpty):
            pe.apply_addition(text_prompt, 0, TableProposer(default=token))

    def test_multiword_proposal_keeps_first_word(self, text_prompt):
        child = pe.apply_addition(text_prompt, 0, TableProposer(default="Please do"))
        assert child.words[0] == "Please"

    def test_descriptor_replays(self, text_prompt):
        child = pe.apply_addition(text_prompt, 1, TableProposer(TABLE_PROPOSER_ANSWERS), JOY)
        replayed = apply_descriptor(text_prompt, child.lineage.descriptor)
        assert replayed.text == child.text
        assert replayed.id == child.id


# ---------------------------------------------------------------------------
# Child expansion
# ---------------------------------------------------------------------------
class TestExpandChildren:
    def test_batch_order_and_table_examples(self, text_prompt):
        batch = pe.expand_children(text_prompt, TableProposer(TABLE_PROPOSER_ANSWERS), JOY)
        texts = [child.text for child in batch]
        assert len(batch) == 10
        assert texts[:4] == [
            "Please Text that expresses <em>",
            "Text string that expresses <em>",
            "Text that Please expresses <em>",
            "Text that expresses Please <em>",
        ]
        assert "Text a expresses <em>" in texts
        assert texts[-3:] == [
            "that expresses <em>",
            "Text expresses <em>",
            "Text that <em>",
        ]

    def test_duplicates_are_dropped(self):
        prompt = pe.tokenize_prompt("go go <em>")
        batch = pe.expand_children(prompt, TableProposer(default="go"))
        texts = [child.text for child in batch]
        # Additions all give "go go go", replacements are no-ops, removals give "go".
        assert texts == ["go go go <em>", "go <em>"]
        assert len(batch.dropped) == 5

    def test_removal_skipped_for_single_word(self):
        prompt = pe.tokenize_prompt("Write <em>")
        ops = [op for op, _ in child_plan(prompt)]
        assert pe.Operation.REMOVAL not in ops
        assert len(ops) == 3

    def test_operation_subset(self, text_prompt):
        batch = pe.expand_children(
            text_prompt, TableProposer(), operations=(pe.Operation.ADDITION,)
        )
        assert len(batch) == 4
        assert {c.lineage.descriptor.op for c in batch} == {pe.Operation.ADDITION}

    def test_failed_proposal_becomes_warning(self, text_prompt):
        batch = pe.expand_children(text_prompt, FailingProposer(BackendUnreachable("down")))
        assert [c.text for c in batch] == [
            "that expresses <em>",
            "Text expresses <em>",
            "Text that <em>",
        ]
        assert len(batch.warnings) == 7
        assert "ProposerUnavailable" in batch.warnings[0]

    def test_threaded_expansion_matches_serial(self, text_prompt):
        proposer = TableProposer(TABLE_PROPOSER_ANSWERS)
        serial = pe.expand_children(text_prompt, proposer, JOY)
        threaded = pe.expand_children(text_prompt, proposer, JOY, max_workers=4)
        assert [c.text for c in serial] == [c.text for c in threaded]


class RandomProposer:
    def __init__(self, rng, vocabulary):
        self.rng = rng
        self.vocabulary = vocabulary

    def propose_tokens(self, masked, top_k):
        return [TokenProposal(self.rng.choice(self.vocabulary), 1.0)]


def test_child_count_law_on_random_prompts():
    rng = random.Random(20240501)
    vocabulary = ["a", "b", "c", "text", "joy", "write"]
    for _ in range(1000):
        words = [rng.choice(vocabulary) for _ in range(rng.randint(1, 6))]
        prompt = pe.tokenize_prompt(" ".join(words) + " <em>")
        batch = pe.expand_children(prompt, RandomProposer(rng, vocabulary))
        t = prompt.mutable_token_count
        texts = [child.text for child in batch]
        assert len(batch) <= 3 * t + 1
        assert len(set(texts)) == len(texts)
        assert prompt.text not in texts
        for child in batch:
            assert child.tokens[-1].is_placeholder
            assert apply_descriptor(prompt, child.lineage.descriptor).text == child.text


def test_distinct_words_keep_every_removal_child():
    rng = random.Random(20240502)
    vocabulary = ["a", "b", "c", "text", "joy", "write", "story", "vivid"]
    for _ in range(500):
        words = rng.sample(vocabulary, rng.randint(2, 6))
        prompt = pe.tokenize_prompt(" ".join(words) + " <em>")
        batch = pe.expand_children(prompt, RandomProposer(rng, vocabulary))
        t = prompt.mutable_token_count
        removals = [c for c in batch if c.lineage.descriptor.op is pe.Operation.REMOVAL]
        assert [c.lineage.descriptor.position for c in removals] == list(range(t))
        assert len({c.text for c in removals}) == t
        assert t <= len(batch) <= 3 * t + 1


def test_removal_then_addition_restores_parent():
    prompt = pe.tokenize_prompt("Write a text that expresses <em>")
    for position, word in enumerate(prompt.words):
        removed = pe.apply_removal(prompt, position)
        restored = apply_descriptor(
            removed, OperationDescriptor(pe.Operation.ADDITION, position, word)
        )
        assert restored.words == prompt.words
        assert restored.id == prompt.id
