"""Tests for the toy world backends and the brute-force oracle."""

import copy
import math
import os

import pytest

import PromptEvo as pe
from PromptEvo.backend_api import GenerationParams
from PromptEvo.errors import ConfigInvalid, NeighborhoodTooLarge
from PromptEvo.sim_world import ToyLexicon, ToyWorldDefinition, derive_seed

ASSETS_DIR = os.path.join(os.path.dirname(__file__), "..", "assets")
TOYWORLD = os.path.join(ASSETS_DIR, "toyworld.json")

# Macro-F1 on the standard world when k of the six non-confusion labels are
# realised: (k + 2 / (8 - k)) / 7.
SEED_SCORE = 0.25 / 7
THREE_LABEL_SCORE = 3.4 / 7

SMALL_WORLD = {
    "labels": ["joy", "fear"],
    "lexicon": {
        "entries": {"happy": 0.9, "dark": 0.4, "Text": 0.1, "that": 0.1, "string": 0.05},
        "overrides": [{"left": "Text", "right": "that", "tokens": ["string"]}],
    },
    "triggers": [
        {
            "tokens": ["happy"],
            "templates": {
                "joy": ["i feel joyful today", "so joyful", "joyful again", "joyful once more"]
            },
        }
    ],
    "templates": {"joy": ["i feel joyful"], "fear": ["i am scared"]},
    "keywords": {"joyful": "joy", "scared": "fear"},
    "confusion_label": "fear",
}


@pytest.fixture(scope="module")
def world():
    return pe.ToyWorld.load(TOYWORLD)


@pytest.fixture
def small_world():
    return pe.ToyWorld(ToyWorldDefinition.from_dict(copy.deepcopy(SMALL_WORLD)))


def noisy_world(rate):
    data = pe.JSONLoader.load(TOYWORLD)
    data["noise_rate"] = rate
    return pe.ToyWorld(ToyWorldDefinition.from_dict(data))


# ---------------------------------------------------------------------------
# Fixture loading
# ---------------------------------------------------------------------------
class TestToyWorldDefinition:
    def test_standard_fixture_loads(self, world):
        assert world.labels == ("anger", "disgust", "fear", "guilt", "joy", "sadness", "shame")
        assert world.definition.fallback_label == "guilt"
        assert len(world.definition.triggers) == 4

    def test_fallback_defaults_to_confusion_label(self, small_world):
        assert small_world.definition.fallback_label == "fear"

    def test_label_without_keyword(self):
        data = copy.deepcopy(SMALL_WORLD)
        del data["keywords"]["scared"]
        with pytest.raises(ConfigInvalid, match="no keyword"):
            ToyWorldDefinition.from_dict(data)

    def test_label_without_template(self):
        data = copy.deepcopy(SMALL_WORLD)
        del data["templates"]["fear"]
        with pytest.raises(ConfigInvalid, match="no emission template"):
            ToyWorldDefinition.from_dict(data)

    def test_trigger_outside_lexicon(self):
        data = copy.deepcopy(SMALL_WORLD)
        data["triggers"][0]["tokens"] = ["sunny"]
        with pytest.raises(ConfigInvalid, match="outside the lexicon"):
            ToyWorldDefinition.from_dict(data)

    @pytest.mark.parametrize("rate", [1.0, -0.1])
    def test_noise_rate_range(self, rate):
        data = copy.deepcopy(SMALL_WORLD)
        data["noise_rate"] = rate
        with pytest.raises(ConfigInvalid):
            ToyWorldDefinition.from_dict(data)

    def test_empty_override_rejected(self):
        data = copy.deepcopy(SMALL_WORLD)
        data["lexicon"]["overrides"][0]["tokens"] = []
        with pytest.raises(ConfigInvalid):
            ToyWorldDefinition.from_dict(data)

    def test_non_finite_score_rejected(self):
        with pytest.raises(ConfigInvalid):
            ToyLexicon({"word": math.inf})


# ---------------------------------------------------------------------------
# Proposer, generator, classifier
# ---------------------------------------------------------------------------
class TestToyPropose:
    def test_context_override(self, small_world):
        proposals = small_world.toy_propose("Text <mask> that expresses joy", 1)
        assert [(p.token, p.score) for p in proposals] == [("string", 1.0)]

    def test_global_ranking(self, small_world):
        assert small_world.toy_propose("<mask> Text joy", 1)[0].token == "happy"

    def test_top_k_larger_than_lexicon(self, small_world):
        tokens = [p.token for p in small_world.toy_propose("<mask> Text joy", 10)]
        assert tokens == ["happy", "dark", "Text", "that", "string"]

    def test_standard_world_prefers_vivid(self, world):
        assert world.toy_propose("Write <mask> text anger", 1)[0].token == "vivid"
        assert world.toy_propose("vivid <mask> Write text anger", 1)[0].token == "story"

    def test_custom_sentinel(self, small_world):
        proposals = small_world.toy_propose("Text [M] that joy", 1, mask_sentinel="[M]")
        assert proposals[0].token == "string"


class TestToyGenerate:
    def test_trigger_templates_up_to_num_return(self, small_world):
        texts = small_world.toy_generate("happy joy", GenerationParams(num_return=3))
        assert texts == ["i feel joyful today", "so joyful", "joyful again"]

    def test_confusion_without_trigger(self, small_world):
        assert small_world.toy_generate("dark joy") == ["i am scared"]
        assert small_world.toy_generate("happy fear") == ["i am scared"]

    def test_trigger_needs_every_token(self, world):
        assert world.toy_generate("Write vivid story joy") == ["i am joyful"]
        assert world.toy_generate("Write vivid joy") == ["i feel guilty"]
        assert world.toy_generate("Write vivid anger") == ["i am furious"]

    def test_trigger_tokens_are_case_sensitive(self, world):
        assert world.toy_generate("Write Vivid anger") == ["i feel guilty"]

    def test_prompt_echo(self, world):
        assert world.toy_generate("Write repeat fear") == ["Write repeat fear"]

    def test_deterministic(self):
        noisy = noisy_world(0.5)
        first = [noisy.toy_generate("Write vivid story joy", seed=s) for s in range(20)]
        second = [noisy.toy_generate("Write vivid story joy", seed=s) for s in range(20)]
        assert first == second

    def test_noise_rate(self):
        noisy = noisy_world(0.2)
        swapped = sum(
            noisy.toy_generate("Write vivid story joy", seed=s) != ["i am joyful"]
            for s in range(1000)
        )
        assert 160 <= swapped <= 240

    def test_swapped_texts_come_from_other_labels(self):
        noisy = noisy_world(0.9)
        other_templates = {
            texts[0] for label, texts in noisy.definition.templates.items() if label != "joy"
        }
        for s in range(50):
            (text,) = noisy.toy_generate("Write vivid story joy", seed=s)
            assert text == "i am joyful" or text in other_templates

    def test_derive_seed_is_stable(self):
        assert derive_seed(7, 1, "Write joy") == derive_seed(7, 1, "Write joy")
        assert derive_seed(7, 1, "Write joy") != derive_seed(7, 2, "Write joy")


class TestToyClassify:
    def test_keyword(self, small_world):
        assert small_world.toy_classify(["i feel joyful today"])[0].label == "joy"

    def test_leftmost_keyword_wins(self, small_world):
        verdicts = small_world.toy_classify(["scared and joyful", "JOYFUL, then scared!"])
        assert [v.label for v in verdicts] == ["fear", "joy"]

    def test_fallback(self, world):
        assert world.toy_classify(["nothing to see"])[0].label == "guilt"

    def test_label_set_skips_other_keywords(self, world):
        texts = ["i feel guilty", "guilty but scared", "i am joyful"]
        verdicts = world.toy_classify(texts, ("joy", "fear"))
        assert [v.label for v in verdicts] == ["joy", "fear", "joy"]

    def test_label_set_keeps_fallback_inside_it(self, world):
        assert world.toy_classify(["i am furious"], ("guilt", "joy"))[0].label == "guilt"

    def test_bound_classifier(self, world):
        classifier = world.bound_to(("fear", "joy"))
        assert [v.label for v in classifier.classify_texts(["i am sad"])] == ["fear"]

    def test_order_aligned(self, world):
        texts = ["i am sad", "i am furious", "i am joyful"]
        labels = [v.label for v in world.toy_classify(texts)]
        reversed_labels = [v.label for v in world.toy_classify(texts[::-1])]
        assert labels == ["sadness", "anger", "joy"]
        assert reversed_labels == labels[::-1]


# ---------------------------------------------------------------------------
# Oracle
# ---------------------------------------------------------------------------
class TestOracle:
    @pytest.fixture(scope="class")
    def seed(self):
        return pe.tokenize_prompt("Write text <em>")

    def test_depth_zero_is_seed(self, world, seed):
        result = pe.brute_force_best(seed, 0, world, pe.OptimizerConfig())
        assert result.best_prompt.text == seed.text
        assert result.neighborhood_size == 1
        assert result.best_score == pytest.approx(SEED_SCORE)

    def test_depth_one(self, world, seed):
        result = pe.brute_force_best(seed, 1, world, pe.OptimizerConfig())
        assert result.neighborhood_size == 8
        assert result.best_score == pytest.approx(THREE_LABEL_SCORE)
        # Five children tie; the lexicographically smallest text wins.
        assert result.best_prompt.text == "Write text vivid <em>"
        assert result.operations == 1

    def test_depth_two(self, world, seed):
        result = pe.brute_force_best(seed, 2, world, pe.OptimizerConfig())
        assert result.best_score == pytest.approx(1.0)
        assert result.operations == 2
        rescored = pe.evaluate_prompt(
            result.best_prompt, pe.BackendSuite.from_world(world), pe.OptimizerConfig()
        )
        assert rescored.value == result.best_score

    def test_neighborhood_cap(self, world, seed):
        with pytest.raises(NeighborhoodTooLarge):
            pe.brute_force_best(seed, 2, world, pe.OptimizerConfig(), cap=5)

    def test_noisy_world_rejected(self, seed):
        with pytest.raises(ConfigInvalid):
            pe.brute_force_best(seed, 1, noisy_world(0.1), pe.OptimizerConfig())

    def test_negative_depth(self, world, seed):
        with pytest.raises(ValueError):
            pe.brute_force_best(seed, -1, world, pe.OptimizerConfig())


def test_two_word_child_set_matches_hand_enumeration(world):
    prompt = pe.tokenize_prompt("Write text <em>")
    batch = pe.expand_children(prompt, world, pe.OptimizerConfig().masking)
    assert [child.text for child in batch] == [
        "vivid Write text <em>",
        "Write vivid text <em>",
        "Write text vivid <em>",
        "vivid text <em>",
        "Write vivid <em>",
        "text <em>",
        "Write <em>",
    ]
