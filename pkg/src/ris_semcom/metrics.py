"""Training loss and BLEU, implemented to match their written definitions.

The loss is the per-word binary cross-entropy evaluated at each target
token's predicted probability, summed over non-pad positions and averaged
over the batch.

BLEU here is not the sacrebleu variant.  The brevity term is
``min(1 - len(candidate) / len(reference), 0)``  -- it penalizes *long*
candidates and never rewards short ones -- and each n-gram precision is
clipped matches over the candidate's total n-gram count.  Scores for a
single order use that order's precision alone (weight 1).
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .autodiff import ShapeError, Tensor, clip, gather_last, log

PROB_FLOOR = 1e-12


@dataclass
class LossInputs:
    """Everything the loss needs for one batch.

    ``probs`` is a (B, L, V) Tensor of predicted next-token probabilities,
    ``target_ids`` the (B, L) true ids, ``pad_mask`` True where the target
    is padding (those positions carry no loss).  The target indicator q is 1
    at each non-pad target id and 0 elsewhere.
    """

    probs: Tensor
    target_ids: np.ndarray
    pad_mask: np.ndarray

    def __post_init__(self):
        self.target_ids = np.asarray(self.target_ids)
        self.pad_mask = np.asarray(self.pad_mask, dtype=bool)
        if self.probs.ndim != 3:
            raise ShapeError(f"probs must be (B, L, V), got {self.probs.shape}")
        if self.target_ids.shape != self.probs.shape[:2]:
            raise ShapeError(
                f"target shape {self.target_ids.shape} does not match probs {self.probs.shape}"
            )
        if self.pad_mask.shape != self.target_ids.shape:
            raise ShapeError(
                f"pad mask shape {self.pad_mask.shape} does not match targets {self.target_ids.shape}"
            )


def cross_entropy_loss(inputs: LossInputs, floor: float = PROB_FLOOR) -> Tensor:
    """Binary cross-entropy at the target token, batch mean.

    Per non-pad position l the term is
    ``-(q * log(p) + (1 - q) * log(1 - p))`` with q = 1 and p the predicted
    probability of the true token, clamped to [floor, 1 - floor].  Terms are
    summed over each sentence and averaged over the batch, so the result is
    a non-negative scalar that stays finite for degenerate predictions.
    """
    p = gather_last(inputs.probs, inputs.target_ids)
    p = clip(p, floor, 1.0 - floor)
    q = 1.0
    term = -(q * log(p) + (1.0 - q) * log(1.0 - p))
    keep = (~inputs.pad_mask).astype(np.float64)
    per_sentence = (term * Tensor(keep)).sum(axis=1)
    return per_sentence.mean()


def ngram_counts(
    tokens: Sequence,
    order: int,
    exclude: frozenset = frozenset(),
) -> Counter:
    """Multiset of contiguous ``order``-grams, after dropping excluded tokens.

    Works on any hashable token type (word strings or integer ids).  A
    sequence shorter than ``order`` has no n-grams.
    """
    if order < 1:
        raise ValueError(f"n-gram order must be >= 1, got {order}")
    kept = [t for t in tokens if t not in exclude]
    return Counter(tuple(kept[i : i + order]) for i in range(len(kept) - order + 1))


@dataclass(frozen=True)
class BleuConfig:
    """Orders and weights for the geometric n-gram mean.

    ``weights`` maps order -> weight; a single entry {n: 1.0} scores that
    order alone.  ``floor`` clamps precisions before the log.  ``exclude``
    lists tokens dropped before counting (the reserved structural ids, when
    scoring id sequences).
    """

    weights: dict = field(default_factory=lambda: {1: 1.0})
    floor: float = PROB_FLOOR
    exclude: frozenset = frozenset()

    def __post_init__(self):
        if not self.weights:
            raise ValueError("BleuConfig needs at least one n-gram order")
        for order, weight in self.weights.items():
            if order < 1:
                raise ValueError(f"n-gram order must be >= 1, got {order}")
            if weight < 0.0:
                raise ValueError(f"n-gram weight must be >= 0, got {weight}")


def _clipped_and_total(reference: Sequence, candidate: Sequence, order: int, exclude) -> tuple[int, int]:
    cand_counts = ngram_counts(candidate, order, exclude)
    ref_counts = ngram_counts(reference, order, exclude)
    clipped = sum(min(count, ref_counts[gram]) for gram, count in cand_counts.items())
    total = sum(cand_counts.values())
    return clipped, total


def _score(ref_len: int, cand_len: int, precisions: Iterable[tuple[float, float]], floor: float) -> float:
    """exp( min(1 - cand_len/ref_len, 0) + sum_i w_i * log(p_i) )."""
    brevity = min(1.0 - cand_len / ref_len, 0.0)
    log_score = brevity + sum(w * math.log(max(p, floor)) for w, p in precisions)
    return math.exp(log_score)


def bleu(reference: Sequence, candidate: Sequence, config: BleuConfig = BleuConfig()) -> float:
    """Sentence-level score in [0, 1].

    An empty candidate (after exclusions) scores 0; an empty reference is a
    caller error.  A candidate identical to its reference scores exactly 1.
    """
    ref = [t for t in reference if t not in config.exclude]
    cand = [t for t in candidate if t not in config.exclude]
    if not ref:
        raise ValueError("BLEU reference is empty after exclusions")
    if not cand:
        return 0.0
    precisions = []
    for order, weight in sorted(config.weights.items()):
        clipped, total = _clipped_and_total(ref, cand, order, frozenset())
        precisions.append((weight, clipped / total if total else 0.0))
    return _score(len(ref), len(cand), precisions, config.floor)


def corpus_bleu(
    pairs: Sequence[tuple[Sequence, Sequence]],
    config: BleuConfig = BleuConfig(),
) -> float:
    """Corpus-level score: counts and lengths are pooled over all pairs
    before the precision ratio and the brevity term are formed."""
    if not pairs:
        raise ValueError("corpus BLEU needs at least one sentence pair")
    ref_len_total = 0
    cand_len_total = 0
    clipped_totals = {order: 0 for order in config.weights}
    cand_totals = {order: 0 for order in config.weights}
    for reference, candidate in pairs:
        ref = [t for t in reference if t not in config.exclude]
        cand = [t for t in candidate if t not in config.exclude]
        if not ref:
            raise ValueError("BLEU reference is empty after exclusions")
        ref_len_total += len(ref)
        cand_len_total += len(cand)
        for order in config.weights:
            clipped, total = _clipped_and_total(ref, cand, order, frozenset())
            clipped_totals[order] += clipped
            cand_totals[order] += total
    if cand_len_total == 0:
        return 0.0
    precisions = []
    for order, weight in sorted(config.weights.items()):
        total = cand_totals[order]
        precisions.append((weight, clipped_totals[order] / total if total else 0.0))
    return _score(ref_len_total, cand_len_total, precisions, config.floor)
