"""Scoring math: sentence-level BLEU for paraphrase detection and macro-F1 for
condition fulfilment."""

import math
import string
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, Tuple

import numpy as np
from sacrebleu.metrics import BLEU
from sklearn.metrics import confusion_matrix

from .errors import EmptyText, LengthMismatch, UnknownLabel


@dataclass(frozen=True)
class BleuConfig:
    max_ngram_order: int = 4
    smoothing_epsilon: float = 1e-9
    threshold: float = 0.2

    def __post_init__(self):
        if self.max_ngram_order < 1:
            raise ValueError("max_ngram_order must be >= 1")
        if not self.smoothing_epsilon > 0:
            raise ValueError("smoothing_epsilon must be positive")
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError("threshold must lie in [0, 1]")


def normalize_text(text):
    """Lowercase, strip trailing punctuation, split on whitespace."""
    return (text or "").lower().strip().rstrip(string.punctuation + " ").split()


@lru_cache(maxsize=None)
def _bleu_metric(max_ngram_order, smoothing_epsilon):
    # Texts arrive pre-normalized; sacrebleu only splits on spaces.
    # effective_order caps n at the candidate length.
    return BLEU(
        lowercase=False,
        tokenize="none",
        smooth_method="floor",
        smooth_value=smoothing_epsilon,
        max_ngram_order=max_ngram_order,
        effective_order=True,
    )


def bleu_sentence(candidate, reference, cfg=BleuConfig()):
    cand_tokens = normalize_text(candidate)
    ref_tokens = normalize_text(reference)
    if not cand_tokens:
        raise EmptyText(f"Candidate {candidate!r} is empty after normalization")
    if not ref_tokens:
        raise EmptyText(f"Reference {reference!r} is empty after normalization")

    metric = _bleu_metric(cfg.max_ngram_order, cfg.smoothing_epsilon)
    score = metric.sentence_score(" ".join(cand_tokens), [" ".join(ref_tokens)]).score
    return min(1.0, max(0.0, score / 100.0))


def is_paraphrase(candidate, conditional_prompt, cfg=BleuConfig()):
    return bleu_sentence(candidate, conditional_prompt, cfg) > cfg.threshold


@dataclass(frozen=True)
class ConfusionTally:
    labels: Tuple[str, ...]
    tp: Tuple[int, ...]
    fp: Tuple[int, ...]
    fn: Tuple[int, ...]
    n_texts: int = 0

    def counts(self, label):
        i = self.labels.index(label)
        return {"tp": self.tp[i], "fp": self.fp[i], "fn": self.fn[i]}

    def to_dict(self):
        return {label: self.counts(label) for label in self.labels}


def tally(predictions, gold, label_set):
    labels = tuple(label_set)
    if len(predictions) != len(gold):
        raise LengthMismatch(
            f"{len(predictions)} predictions but {len(gold)} gold labels"
        )
    unknown = sorted({lab for lab in list(predictions) + list(gold)} - set(labels))
    if unknown:
        raise UnknownLabel(f"Labels outside the label set: {', '.join(unknown)}")

    zeros = (0,) * len(labels)
    if not gold:
        return ConfusionTally(labels, zeros, zeros, zeros, 0)

    # rows: gold, columns: predicted
    matrix = confusion_matrix(list(gold), list(predictions), labels=list(labels))
    tp = np.diag(matrix)
    fp = matrix.sum(axis=0) - tp
    fn = matrix.sum(axis=1) - tp
    return ConfusionTally(
        labels,
        tuple(int(v) for v in tp),
        tuple(int(v) for v in fp),
        tuple(int(v) for v in fn),
        len(gold),
    )


def per_label_f1(t):
    tp = np.asarray(t.tp, dtype=float)
    denom = 2 * tp + np.asarray(t.fp, dtype=float) + np.asarray(t.fn, dtype=float)
    f1 = np.divide(2 * tp, denom, out=np.zeros_like(denom), where=denom > 0)
    return {label: float(v) for label, v in zip(t.labels, f1)}


def macro_f1(t):
    if not t.labels:
        return 0.0
    scores = per_label_f1(t)
    return float(np.mean([scores[label] for label in t.labels]))


@dataclass(frozen=True)
class ObjectiveScore:
    macro_f1: float
    per_label_f1: Dict[str, float] = field(default_factory=dict)
    n_texts_scored: int = 0
    n_texts_filtered: int = 0
    disqualified: bool = False

    @property
    def value(self):
        """Comparison value; disqualified scores lose every comparison."""
        return -math.inf if self.disqualified else self.macro_f1

    @classmethod
    def from_tally(cls, t, n_texts_filtered=0, disqualified=False):
        return cls(
            macro_f1=macro_f1(t),
            per_label_f1=per_label_f1(t),
            n_texts_scored=t.n_texts,
            n_texts_filtered=n_texts_filtered,
            disqualified=disqualified,
        )
