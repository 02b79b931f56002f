"""Learnable parameters, the universal-rule prior, and per-arc potentials.

A candidate arc's potential combines three additive terms:

    encoder score   w . f(x, i, j)
    decoder term    log theta[tag(head)][tag(child)]
    prior bonus     alpha * 1[(tag(head) -> tag(child)) in rules]

The encoder-only variant (just the first term) defines the globally
normalized tree distribution whose partition function and marginals the
inference module computes.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Mapping, Optional, Union

import numpy as np

from .corpus import Sentence, TagVocab
from .features import ArcFeatures, FeatureIndex, extract

NEG_INF = float("-inf")


class ModelError(ValueError):
    """Invalid parameter values or shapes."""


@dataclass
class EncoderWeights:
    """Dense weight vector plus AdaGrad squared-gradient accumulators."""

    w: np.ndarray
    adagrad_accum: np.ndarray

    @classmethod
    def zeros(cls, size: int) -> "EncoderWeights":
        return cls(w=np.zeros(size), adagrad_accum=np.zeros(size))

    def assert_finite(self, context: str = "") -> None:
        if not np.all(np.isfinite(self.w)):
            bad = int(np.flatnonzero(~np.isfinite(self.w))[0])
            raise ModelError(f"non-finite encoder weight at id {bad} {context}".strip())


class DecoderTable:
    """Row-stochastic head-tag -> child-tag reconstruction probabilities.

    Rows cover the full tag vocabulary (the root symbol heads every
    root-attached token, so it has a row too); smoothing keeps every entry
    strictly positive.
    """

    ROW_SUM_TOL = 1e-9

    def __init__(self, theta: np.ndarray):
        theta = np.asarray(theta, dtype=float)
        if theta.ndim != 2 or theta.shape[0] != theta.shape[1]:
            raise ModelError(f"theta must be square, got shape {theta.shape}")
        if not np.all(theta > 0):
            raise ModelError("theta has non-positive entries")
        if not np.allclose(theta.sum(axis=1), 1.0, rtol=0, atol=self.ROW_SUM_TOL):
            raise ModelError("theta rows do not sum to 1")
        self.theta = theta
        self.log_theta = np.log(theta)

    @property
    def size(self) -> int:
        return self.theta.shape[0]

    @classmethod
    def from_counts(cls, counts: np.ndarray, smoothing_eps: float) -> "DecoderTable":
        """Additive smoothing on every cell, then row normalization."""
        if smoothing_eps <= 0:
            raise ModelError(f"smoothing_eps must be > 0, got {smoothing_eps}")
        smoothed = np.asarray(counts, dtype=float) + smoothing_eps
        return cls(smoothed / smoothed.sum(axis=1, keepdims=True))

    @classmethod
    def uniform(cls, size: int) -> "DecoderTable":
        return cls(np.full((size, size), 1.0 / size))


# Universal head -> child attachment preferences over the universal POS
# categories, used as a soft prior on parse trees.
UNIVERSAL_RULES: frozenset[tuple[str, str]] = frozenset(
    {
        ("VERB", "VERB"),
        ("NOUN", "NOUN"),
        ("VERB", "NOUN"),
        ("NOUN", "ADJ"),
        ("VERB", "PRON"),
        ("NOUN", "DET"),
        ("VERB", "ADV"),
        ("NOUN", "NUM"),
        ("VERB", "ADP"),
        ("NOUN", "CONJ"),
        ("ADJ", "ADV"),
        ("ADP", "NOUN"),
    }
)


@dataclass(frozen=True)
class PriorRules:
    """Set of (head-tag, child-tag) pairs receiving the prior bonus.

    Matching happens on universal categories: an optional tag map converts
    fine-grained tags before the membership test. Root arcs never match
    (the root symbol is not a POS category).
    """

    pairs: frozenset[tuple[str, str]]

    @classmethod
    def universal(cls) -> "PriorRules":
        return cls(pairs=UNIVERSAL_RULES)

    @classmethod
    def empty(cls) -> "PriorRules":
        return cls(pairs=frozenset())

    @classmethod
    def from_file(cls, path: Union[str, os.PathLike]) -> "PriorRules":
        """Plain-text rules, one "HEAD CHILD" pair per line; '#' comments."""
        pairs = set()
        with open(os.fspath(path), encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                cols = line.split()
                if len(cols) != 2:
                    raise ModelError(f"{path}:{lineno}: expected 'HEAD CHILD', got {line!r}")
                pairs.add((cols[0], cols[1]))
        return cls(pairs=frozenset(pairs))

    def matches(
        self,
        head_tag: str,
        child_tag: str,
        tag_map: Optional[Mapping[str, str]] = None,
    ) -> bool:
        if tag_map is not None:
            head_tag = tag_map.get(head_tag, head_tag)
            child_tag = tag_map.get(child_tag, child_tag)
        return (head_tag, child_tag) in self.pairs

    def bonus_matrix(
        self, vocab: TagVocab, tag_map: Optional[Mapping[str, str]] = None
    ) -> np.ndarray:
        """0/1 matrix over tag-id pairs; the root row is all zero."""
        size = len(vocab)
        mat = np.zeros((size, size))
        for h in range(size):
            if h == vocab.root_id:
                continue
            for c in range(size):
                if self.matches(vocab.tag(h), vocab.tag(c), tag_map):
                    mat[h, c] = 1.0
        return mat


@dataclass
class Hyperparams:
    """Training configuration; every field is surfaced on the CLI."""

    lambda_: float = 1e-4
    alpha: float = 1.0
    learning_rate: float = 0.1
    smoothing_eps: float = 0.1
    rounds: int = 20
    sgd_epochs: int = 2
    em_iters: int = 2
    seed: int = 0
    soft_em: bool = False

    def __post_init__(self) -> None:
        if self.lambda_ < 0:
            raise ModelError(f"lambda must be >= 0, got {self.lambda_}")
        if self.alpha < 0:
            raise ModelError(f"alpha must be >= 0, got {self.alpha}")
        if self.learning_rate <= 0:
            raise ModelError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.smoothing_eps <= 0:
            raise ModelError(f"smoothing_eps must be > 0, got {self.smoothing_eps}")
        if self.rounds < 0:
            raise ModelError(f"rounds must be >= 0, got {self.rounds}")
        if self.sgd_epochs < 1 or self.em_iters < 1:
            raise ModelError("sgd_epochs and em_iters must be >= 1")


def encoder_score(wts: EncoderWeights, feats: ArcFeatures) -> float:
    """w . f for binary features: the sum of weights of the active ids."""
    if not feats.ids:
        return 0.0
    return float(wts.w[list(feats.ids)].sum())


def arc_potential(
    sent: Sentence,
    i: int,
    j: int,
    wts: EncoderWeights,
    dec: DecoderTable,
    prior: PriorRules,
    alpha: float,
    idx: FeatureIndex,
    vocab: TagVocab,
    tag_map: Optional[Mapping[str, str]] = None,
) -> float:
    """Full potential of arc i -> j: encoder + log decoder + prior bonus."""
    feats = extract(sent, i, j, idx, mode="lookup", vocab=vocab)
    head_tag_id = vocab.root_id if i == 0 else sent.tags[i - 1]
    child_tag_id = sent.tags[j - 1]
    pot = encoder_score(wts, feats) + float(dec.log_theta[head_tag_id, child_tag_id])
    if alpha != 0.0 and i != 0:
        if prior.matches(vocab.tag(head_tag_id), vocab.tag(child_tag_id), tag_map):
            pot += alpha
    return pot


def potential_matrix(
    sent: Sentence,
    wts: EncoderWeights,
    dec: DecoderTable,
    prior: PriorRules,
    alpha: float,
    include: str = "full",
    *,
    idx: FeatureIndex,
    vocab: TagVocab,
    tag_map: Optional[Mapping[str, str]] = None,
) -> np.ndarray:
    """Dense (n+1) x n matrix of arc potentials.

    Row i is the head position (0 = root), column j-1 the child position j.
    Self arcs hold the -inf sentinel. ``include`` selects the encoder-only
    scores ("encoder" / "encoder-only") or the full combined potential
    ("full").
    """
    if include == "encoder-only":
        include = "encoder"
    if include not in ("encoder", "full"):
        raise ModelError(f"unknown include mode {include!r}")
    n = len(sent)
    pot = np.full((n + 1, n), NEG_INF)
    for i in range(n + 1):
        for j in range(1, n + 1):
            if i == j:
                continue
            if include == "encoder":
                feats = extract(sent, i, j, idx, mode="lookup", vocab=vocab)
                pot[i, j - 1] = encoder_score(wts, feats)
            else:
                pot[i, j - 1] = arc_potential(
                    sent, i, j, wts, dec, prior, alpha, idx, vocab, tag_map
                )
    return pot
