"""Coordinate-descent training of the encoder weights and decoder table.

The loss is the negative best-parse log joint likelihood with the rule
prior and an L1 penalty on the encoder weights. Each round alternates
stochastic AdaGrad epochs on w (with a proximal L1 shrink, so weights hit
exact zeros) and best-parse EM iterations on theta.

The best parse y* always comes from the full potentials (encoder +
decoder + prior); the arc expectations that enter the w-gradient come
from the encoder-only distribution, whose normalizer is the only part of
the objective that depends on w.

A soft variant (``soft_em``) replaces the best parse with posterior arc
marginals in both the gradient and the theta update; it exists to compare
against the default, which trains better, and is not the primary path.
"""

from __future__ import annotations

import itertools
import json
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Optional, Sequence, TextIO

import numpy as np

from .corpus import Treebank
from .decode import eisner_decode
from .features import FeatureIndex, arc_range, build_index, extract
from .inference import arc_marginals_projective, log_partition_projective
from .model import (
    NEG_INF,
    DecoderTable,
    EncoderWeights,
    Hyperparams,
    PriorRules,
)


class TrainingError(RuntimeError):
    """Non-finite update or other unrecoverable training failure."""


@dataclass
class TrainState:
    wts: EncoderWeights
    dec: DecoderTable
    round: int = 0
    objective_history: list[float] = field(default_factory=list)
    rng_seed: int = 0
    rng: np.random.Generator = field(default_factory=np.random.default_rng, repr=False)


class _SentenceCache:
    """Per-sentence tensors that stay fixed across training steps."""

    __slots__ = (
        "n",
        "rows",
        "cols",
        "flat_ids",
        "offsets",
        "head_tags",
        "child_tags",
        "head_grid",
        "child_grid",
        "rule_bonus",
    )

    def __init__(self, sent, idx: FeatureIndex, vocab, bonus: np.ndarray):
        n = len(sent)
        self.n = n
        rows, cols = [], []
        flat: list[int] = []
        offsets: list[int] = []
        for i, j in arc_range(n):
            feats = extract(sent, i, j, idx, mode="lookup", vocab=vocab)
            rows.append(i)
            cols.append(j - 1)
            offsets.append(len(flat))
            flat.extend(feats.ids)
            if not feats.ids:
                raise TrainingError(
                    f"arc ({i}, {j}) has no indexed features; the index was not "
                    "built over this corpus"
                )
        self.rows = np.array(rows, dtype=np.intp)
        self.cols = np.array(cols, dtype=np.intp)
        self.flat_ids = np.array(flat, dtype=np.intp)
        self.offsets = np.array(offsets, dtype=np.intp)
        self.head_tags = np.array([vocab.root_id] + list(sent.tags), dtype=np.intp)
        self.child_tags = np.array(sent.tags, dtype=np.intp)
        self.head_grid = np.broadcast_to(self.head_tags[:, None], (n + 1, n))
        self.child_grid = np.broadcast_to(self.child_tags[None, :], (n + 1, n))
        self.rule_bonus = bonus[self.head_grid, self.child_grid]

    def arc_feature_ids(self, arc_idx: int) -> np.ndarray:
        lo = self.offsets[arc_idx]
        hi = self.offsets[arc_idx + 1] if arc_idx + 1 < len(self.offsets) else len(self.flat_ids)
        return self.flat_ids[lo:hi]

    def encoder_matrix(self, w: np.ndarray) -> np.ndarray:
        sums = np.add.reduceat(w[self.flat_ids], self.offsets)
        mat = np.full((self.n + 1, self.n), NEG_INF)
        mat[self.rows, self.cols] = sums
        return mat

    def full_matrix(self, w: np.ndarray, log_theta: np.ndarray, alpha: float) -> np.ndarray:
        mat = self.encoder_matrix(w)
        mat += log_theta[self.head_grid, self.child_grid]
        if alpha != 0.0:
            mat += alpha * self.rule_bonus
        return mat


class Trainer:
    """Owns the corpus-side caches and implements every training step."""

    def __init__(
        self,
        tb: Treebank,
        hp: Hyperparams,
        idx: Optional[FeatureIndex] = None,
        prior: Optional[PriorRules] = None,
        tag_map: Optional[Mapping[str, str]] = None,
    ):
        self.tb = tb
        self.hp = hp
        self.vocab = tb.vocab
        self.idx = idx if idx is not None else build_index(tb)
        self.prior = prior if prior is not None else PriorRules.universal()
        self.tag_map = dict(tag_map) if tag_map else None
        bonus = self.prior.bonus_matrix(self.vocab, self.tag_map)
        self.caches = [
            _SentenceCache(sent, self.idx, self.vocab, bonus) for sent in tb.sentences
        ]

    # -- initialization ---------------------------------------------------

    def informed_init(self) -> TrainState:
        """Zero encoder weights; decoder from one soft harmonic step.

        Each token's candidate heads get weight 1/distance (the root gets
        1/(n+1)); the per-child normalized weights accumulate as soft
        (head-tag, child-tag) counts, which are smoothed and normalized.
        """
        size = len(self.vocab)
        counts = np.zeros((size, size))
        for cache in self.caches:
            n = cache.n
            for j in range(1, n + 1):
                heads = [0] + [i for i in range(1, n + 1) if i != j]
                weights = np.array(
                    [1.0 / (n + 1)] + [1.0 / abs(i - j) for i in heads[1:]]
                )
                weights /= weights.sum()
                for i, p in zip(heads, weights):
                    counts[cache.head_tags[i], cache.child_tags[j - 1]] += p
        dec = DecoderTable.from_counts(counts, self.hp.smoothing_eps)
        wts = EncoderWeights.zeros(self.idx.size)
        return TrainState(
            wts=wts,
            dec=dec,
            round=0,
            objective_history=[],
            rng_seed=self.hp.seed,
            rng=np.random.default_rng(self.hp.seed),
        )

    # -- objective --------------------------------------------------------

    def objective(self, state: TrainState) -> float:
        """Negative best-parse log joint likelihood plus the L1 term.

        Per sentence: -(score_full(y*) - log Z_enc), where score_full(y*)
        already contains the encoder score, the decoder log-probabilities
        and the prior bonus of the best parse. The soft variant integrates
        over trees instead: -(log Z_full - log Z_enc).
        """
        total = self.hp.lambda_ * float(np.abs(state.wts.w).sum())
        for cache in self.caches:
            enc = cache.encoder_matrix(state.wts.w)
            full = cache.full_matrix(state.wts.w, state.dec.log_theta, self.hp.alpha)
            log_z = log_partition_projective(enc)
            if self.hp.soft_em:
                total -= log_partition_projective(full) - log_z
            else:
                _, best = eisner_decode(full)
                total -= best - log_z
        return float(total)

    # -- encoder updates ---------------------------------------------------

    def grad_w_sentence(self, k: int, state: TrainState) -> dict[int, float]:
        """Gradient of the sentence's log-likelihood term wrt w (sparse).

        For every candidate arc the coefficient is (best-parse indicator -
        encoder marginal); the decoder and prior scores do not depend on w
        and contribute nothing beyond selecting the best parse.
        """
        cache = self.caches[k]
        enc = cache.encoder_matrix(state.wts.w)
        mu = arc_marginals_projective(enc).mu
        full = cache.full_matrix(state.wts.w, state.dec.log_theta, self.hp.alpha)
        if self.hp.soft_em:
            coeff = arc_marginals_projective(full).mu - mu
        else:
            tree, _ = eisner_decode(full)
            coeff = -mu
            for j, h in enumerate(tree.heads, start=1):
                coeff[h, j - 1] += 1.0
        grad: dict[int, float] = {}
        for arc_idx in range(len(cache.rows)):
            c = coeff[cache.rows[arc_idx], cache.cols[arc_idx]]
            if c == 0.0:
                continue
            for fid in cache.arc_feature_ids(arc_idx):
                fid = int(fid)
                grad[fid] = grad.get(fid, 0.0) + c
        return grad

    def sgd_epoch(self, state: TrainState) -> TrainState:
        """One AdaGrad pass over a seeded shuffle of the corpus.

        Each touched coordinate takes a gradient step with its own
        accumulator-scaled rate, then an L1 proximal shrink with the same
        rate (soft threshold), so strong regularization zeroes it exactly.
        """
        w = state.wts.w
        accum = state.wts.adagrad_accum
        lr = self.hp.learning_rate
        lam = self.hp.lambda_
        for k in state.rng.permutation(len(self.caches)):
            grad = self.grad_w_sentence(int(k), state)
            if not grad:
                continue
            ids = np.array([fid for fid, g in grad.items() if g != 0.0], dtype=np.intp)
            if ids.size == 0:
                continue
            # loss gradient: negation of the log-likelihood gradient
            g = -np.array([grad[int(fid)] for fid in ids])
            accum[ids] += g * g
            step = lr / np.sqrt(accum[ids])
            w[ids] -= step * g
            if lam > 0.0:
                w[ids] = np.sign(w[ids]) * np.maximum(np.abs(w[ids]) - lam * step, 0.0)
            if not np.all(np.isfinite(w[ids])):
                raise TrainingError(
                    f"non-finite weight after update on sentence {k} "
                    f"(max |grad| = {np.abs(g).max()})"
                )
        return state

    # -- decoder updates ----------------------------------------------------

    def viterbi_em_theta(self, state: TrainState) -> DecoderTable:
        """One EM iteration on theta.

        E-step: best parse of every sentence under the full potentials
        (or, in the soft variant, posterior arc marginals). M-step:
        relative frequency of (head tag, child tag) with additive
        smoothing on every cell.
        """
        size = len(self.vocab)
        counts = np.zeros((size, size))
        for cache in self.caches:
            full = cache.full_matrix(state.wts.w, state.dec.log_theta, self.hp.alpha)
            if self.hp.soft_em:
                mu = arc_marginals_projective(full).mu
                np.add.at(counts, (cache.head_grid, cache.child_grid), mu)
            else:
                tree, _ = eisner_decode(full)
                for j, h in enumerate(tree.heads, start=1):
                    counts[cache.head_tags[h], cache.child_tags[j - 1]] += 1.0
        return DecoderTable.from_counts(counts, self.hp.smoothing_eps)

    # -- outer loop ---------------------------------------------------------

    def run(self, log_stream: Optional[TextIO] = None) -> TrainState:
        """Full coordinate descent from the informed initialization."""
        state = self.informed_init()
        for rnd in range(1, self.hp.rounds + 1):
            started = time.perf_counter()
            for _ in range(self.hp.sgd_epochs):
                self.sgd_epoch(state)
            for _ in range(self.hp.em_iters):
                state.dec = self.viterbi_em_theta(state)
            state.round = rnd
            obj = self.objective(state)
            state.objective_history.append(obj)
            if not np.isfinite(obj):
                raise TrainingError(f"objective became non-finite in round {rnd}")
            if log_stream is not None:
                log_stream.write(
                    json.dumps(
                        {
                            "round": rnd,
                            "objective": obj,
                            "seconds": round(time.perf_counter() - started, 6),
                        }
                    )
                    + "\n"
                )
                log_stream.flush()
        return state


def informed_init(
    tb: Treebank,
    hp: Hyperparams,
    idx: Optional[FeatureIndex] = None,
    prior: Optional[PriorRules] = None,
    tag_map: Optional[Mapping[str, str]] = None,
) -> TrainState:
    return Trainer(tb, hp, idx=idx, prior=prior, tag_map=tag_map).informed_init()


def coordinate_descent(
    tb: Treebank,
    hp: Hyperparams,
    idx: Optional[FeatureIndex] = None,
    prior: Optional[PriorRules] = None,
    tag_map: Optional[Mapping[str, str]] = None,
    log_stream: Optional[TextIO] = None,
) -> TrainState:
    return Trainer(tb, hp, idx=idx, prior=prior, tag_map=tag_map).run(log_stream)


def grid_search(
    tb: Treebank,
    base_hp: Hyperparams,
    grid: Mapping[str, Sequence],
    score_fn: Optional[Callable[[TrainState, "Trainer"], float]] = None,
    idx: Optional[FeatureIndex] = None,
    prior: Optional[PriorRules] = None,
    tag_map: Optional[Mapping[str, str]] = None,
) -> tuple[Hyperparams, list[dict]]:
    """Train once per hyperparameter combination and keep the best.

    ``score_fn(state, trainer)`` should return higher-is-better; the
    default scores by negated final objective. Returns the winning
    Hyperparams and one result record per combination.
    """
    keys = sorted(grid)
    results = []
    best_hp, best_score = None, -np.inf
    for values in itertools.product(*(grid[k] for k in keys)):
        hp = replace(base_hp, **dict(zip(keys, values)))
        trainer = Trainer(tb, hp, idx=idx, prior=prior, tag_map=tag_map)
        state = trainer.run()
        if score_fn is not None:
            score = float(score_fn(state, trainer))
        else:
            score = -state.objective_history[-1] if state.objective_history else 0.0
        results.append({"params": dict(zip(keys, values)), "score": score})
        if best_hp is None or score > best_score:
            best_hp, best_score = hp, score
    assert best_hp is not None
    return best_hp, results
