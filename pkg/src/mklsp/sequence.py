"""Linear-chain sequence labeling: joint feature map, Hamming loss, exact
Viterbi / loss-augmented / brute-force decoders.

Feature layout per observation group j: the flat weight index of feature f
conjoined with label y is ``f * k + y``.  The optional transition group (one
weight per label pair, no observation conjunction) uses ``prev * k + cur``
and always sits last in grouped vectors.

All decoders break score ties toward the lexicographically smallest label
sequence: the DP runs backward to get exact suffix values, then the sequence
is rebuilt front to back taking the first argmax at each position.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .corpus import LabelTable, SequenceInstance
from .sparse import GroupedSparseVector
from .templates import (
    OBSERVATION,
    TRANSITION,
    FeatureAlphabet,
    TemplateSpec,
    index_corpus,
    instantiate,
)

BRUTE_FORCE_LIMIT = 1_000_000


@dataclass
class SequenceScorer:
    """Dense view of the weights: per-group emissions (d_j, k) + transitions."""

    emissions: list[np.ndarray]
    transitions: np.ndarray | None
    k: int


@dataclass
class CompiledSequence:
    """A sentence reduced to firing feature ids (-1 where a group is silent)."""

    feats: list[np.ndarray]  # per observation group, int64 array of length l
    gold: np.ndarray | None
    gold_map: GroupedSparseVector | None = field(default=None, repr=False)

    @property
    def length(self) -> int:
        return int(self.feats[0].size) if self.feats else 0


def hamming_loss(gold: Sequence[int], other: Sequence[int]) -> float:
    """Number of positions labeled differently."""
    if len(gold) != len(other):
        raise ValueError("sequences differ in length")
    return float(sum(a != b for a, b in zip(gold, other)))


def _emissions(scorer: SequenceScorer, inst: CompiledSequence) -> np.ndarray:
    l, k = inst.length, scorer.k
    emit = np.zeros((l, k))
    for feats, table in zip(inst.feats, scorer.emissions, strict=True):
        firing = feats >= 0
        if firing.any():
            emit[firing] += table[feats[firing]]
    return emit


def _decode_from_emissions(
    emit: np.ndarray, trans: np.ndarray | None
) -> tuple[list[int], float]:
    l, k = emit.shape
    if trans is None:
        trans = np.zeros((k, k))
    # exact suffix values: suf[t, y] = best score of positions t.. given y at t
    suf = np.empty((l, k))
    suf[l - 1] = emit[l - 1]
    for t in range(l - 2, -1, -1):
        suf[t] = emit[t] + (trans + suf[t + 1][None, :]).max(axis=1)
    labels = [int(np.argmax(suf[0]))]
    total = float(suf[0][labels[0]])
    for t in range(1, l):
        labels.append(int(np.argmax(trans[labels[-1]] + suf[t])))
    return labels, total


def viterbi_decode(scorer: SequenceScorer, inst: CompiledSequence) -> tuple[list[int], float]:
    """Exact argmax labeling and its score."""
    if inst.length == 0:
        return [], 0.0
    return _decode_from_emissions(_emissions(scorer, inst), scorer.transitions)


def loss_augmented_decode(
    scorer: SequenceScorer, inst: CompiledSequence, gold: Sequence[int]
) -> tuple[list[int], float]:
    """Argmax of score(y) + Hamming(gold, y) and that augmented value."""
    if inst.length == 0:
        return [], 0.0
    emit = _emissions(scorer, inst)
    emit += 1.0
    emit[np.arange(inst.length), np.asarray(gold, dtype=np.int64)] -= 1.0
    return _decode_from_emissions(emit, scorer.transitions)


def brute_force_decode(
    scorer: SequenceScorer, inst: CompiledSequence, gold: Sequence[int] | None = None
) -> tuple[list[int], float]:
    """Enumerate all k^l labelings (guarded) with the same tie rule.

    With `gold` given, maximizes the Hamming-augmented score.  Search is in
    lexicographic order keeping strict maxima, so the first optimum found is
    the lexicographically smallest.
    """
    l, k = inst.length, scorer.k
    if l == 0:
        return [], 0.0
    if k**l > BRUTE_FORCE_LIMIT:
        raise ValueError(f"label space {k}^{l} exceeds enumeration guard")
    emit = _emissions(scorer, inst)
    if gold is not None:
        emit += 1.0
        emit[np.arange(l), np.asarray(gold, dtype=np.int64)] -= 1.0
    trans = scorer.transitions
    if trans is None:
        trans = np.zeros((k, k))
    seqs = np.array(list(itertools.product(range(k), repeat=l)), dtype=np.int64)
    totals = emit[0, seqs[:, 0]].copy()
    for t in range(1, l):
        totals += emit[t, seqs[:, t]] + trans[seqs[:, t - 1], seqs[:, t]]
    best = int(np.argmax(totals))
    return [int(y) for y in seqs[best]], float(totals[best])


class SequenceTask:
    """Binds templates, alphabets, and the label set for one model."""

    def __init__(
        self,
        specs: Sequence[TemplateSpec],
        alphabets: Sequence[FeatureAlphabet],
        labels: LabelTable,
        transition: bool,
    ):
        self.specs = [s for s in specs if s.kind == OBSERVATION]
        self.alphabets = list(alphabets)
        self.labels = labels
        self.transition = transition
        if len(self.specs) != len(self.alphabets):
            raise ValueError("one alphabet per observation template required")

    @classmethod
    def build(
        cls,
        specs: Sequence[TemplateSpec],
        corpus: Sequence[SequenceInstance],
        labels: LabelTable,
    ) -> "SequenceTask":
        obs = [s for s in specs if s.kind == OBSERVATION]
        transition = any(s.kind == TRANSITION for s in specs)
        if not obs and not transition:
            raise ValueError("template file defines no feature groups")
        return cls(obs, index_corpus(obs, corpus), labels, transition)

    @property
    def k(self) -> int:
        return len(self.labels)

    @property
    def n_groups(self) -> int:
        return len(self.specs) + (1 if self.transition else 0)

    @property
    def group_ids(self) -> list[str]:
        ids = [s.index for s in self.specs]
        if self.transition:
            ids.append("B")
        return ids

    @property
    def group_dims(self) -> list[int]:
        k = self.k
        dims = [len(a) * k for a in self.alphabets]
        if self.transition:
            dims.append(k * k)
        return dims

    def compile(self, instance: SequenceInstance) -> CompiledSequence:
        tokens = instance.tokens
        l = len(tokens)
        feats = []
        for spec, alphabet in zip(self.specs, self.alphabets, strict=True):
            ids = np.full(l, -1, dtype=np.int64)
            for t in range(l):
                idx = alphabet.lookup(instantiate(spec, tokens, t))
                if idx is not None:
                    ids[t] = idx
            feats.append(ids)
        gold = None
        if instance.labels is not None:
            gold = np.asarray(instance.labels, dtype=np.int64)
        return CompiledSequence(feats, gold)

    def scorer(self, weights: Sequence[np.ndarray]) -> SequenceScorer:
        k = self.k
        emissions = [
            w.reshape(len(a), k) for w, a in zip(weights, self.alphabets, strict=False)
        ]
        trans = weights[-1].reshape(k, k) if self.transition else None
        return SequenceScorer(emissions, trans, k)

    def joint_feature_map(
        self, inst: CompiledSequence, labels: Sequence[int]
    ) -> GroupedSparseVector:
        """Counts of label-conjoined features along `labels` (frequency values)."""
        k = self.k
        l = inst.length
        if len(labels) != l:
            raise ValueError("labeling length does not match the sentence")
        dicts: list[dict[int, float]] = []
        for feats in inst.feats:
            d: dict[int, float] = {}
            for t in range(l):
                f = feats[t]
                if f >= 0:
                    key = int(f) * k + labels[t]
                    d[key] = d.get(key, 0.0) + 1.0
            dicts.append(d)
        if self.transition:
            d = {}
            for t in range(1, l):
                key = labels[t - 1] * k + labels[t]
                d[key] = d.get(key, 0.0) + 1.0
            dicts.append(d)
        return GroupedSparseVector.from_dicts(dicts)

    # --- solver-facing protocol ---

    def gold_output(self, inst: CompiledSequence) -> list[int]:
        if inst.gold is None:
            raise ValueError("instance has no gold labels")
        return [int(y) for y in inst.gold]

    def gold_feature_map(self, inst: CompiledSequence) -> GroupedSparseVector:
        if inst.gold_map is None:
            inst.gold_map = self.joint_feature_map(inst, self.gold_output(inst))
        return inst.gold_map

    def loss(self, gold: Sequence[int], other: Sequence[int]) -> float:
        return hamming_loss(gold, other)

    def most_violated(
        self, weights: Sequence[np.ndarray], inst: CompiledSequence
    ) -> tuple[list[int], float]:
        return loss_augmented_decode(self.scorer(weights), inst, self.gold_output(inst))

    def decode(
        self, weights: Sequence[np.ndarray], inst: CompiledSequence
    ) -> tuple[list[int], float]:
        return viterbi_decode(self.scorer(weights), inst)
