"""Scikit-learn style estimator wrapping the full training pipeline.

``CRFAutoencoderParser`` is fit on POS-tag sequences (no annotation) and
predicts one head index per token. It follows the sklearn contract:
``__init__`` stores parameters verbatim, ``fit`` learns underscore
attributes, ``get_params``/``set_params``/``clone`` work as usual, so the
parser composes with model-selection utilities from the wider ecosystem.
"""

from __future__ import annotations

import warnings
from typing import Iterable, Mapping, Optional, Sequence, Union

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .corpus import Sentence, TagVocab, Treebank, remap_to_vocab
from .decode import parse_sentence
from .features import build_index
from .model import Hyperparams, PriorRules
from .train import Trainer

TagSequences = Iterable[Sequence[str]]


def _as_tag_sequences(X: TagSequences) -> list[list[str]]:
    """Validate raw input: a non-empty iterable of non-empty tag-string
    sequences (a bare string is almost certainly a mistake)."""
    seqs: list[list[str]] = []
    for k, item in enumerate(X):
        if isinstance(item, str):
            raise ValueError(
                f"sentence {k} is a string; pass a sequence of tag strings"
            )
        toks = list(item)
        if not toks:
            raise ValueError(f"sentence {k} is empty")
        for t in toks:
            if not isinstance(t, str):
                raise ValueError(
                    f"sentence {k} contains a non-string tag {t!r}"
                )
        seqs.append(toks)
    if not seqs:
        raise ValueError("X contains no sentences")
    return seqs


class CRFAutoencoderParser(BaseEstimator):
    """Unsupervised dependency parser over POS-tag sequences.

    A feature-rich, globally normalized arc scorer is trained jointly with
    a head-tag -> child-tag reconstruction table by coordinate descent on
    the best-parse objective, optionally guided by universal attachment
    rules.

    Parameters mirror the CLI: ``alpha`` scales the rule prior,
    ``reg_lambda`` the L1 penalty; ``prior`` is "universal", None, or an
    iterable of (head_tag, child_tag) pairs; ``decoder`` selects the
    projective or arborescence backend at predict time.
    """

    def __init__(
        self,
        *,
        alpha: float = 1.0,
        reg_lambda: float = 1e-4,
        learning_rate: float = 0.1,
        smoothing: float = 0.1,
        rounds: int = 20,
        sgd_epochs: int = 2,
        em_iters: int = 2,
        seed: int = 0,
        prior: Union[str, None, Iterable[tuple[str, str]]] = "universal",
        tag_map: Optional[Mapping[str, str]] = None,
        decoder: str = "eisner",
        soft_em: bool = False,
    ):
        self.alpha = alpha
        self.reg_lambda = reg_lambda
        self.learning_rate = learning_rate
        self.smoothing = smoothing
        self.rounds = rounds
        self.sgd_epochs = sgd_epochs
        self.em_iters = em_iters
        self.seed = seed
        self.prior = prior
        self.tag_map = tag_map
        self.decoder = decoder
        self.soft_em = soft_em

    def _hyperparams(self) -> Hyperparams:
        return Hyperparams(
            lambda_=self.reg_lambda,
            alpha=self.alpha,
            learning_rate=self.learning_rate,
            smoothing_eps=self.smoothing,
            rounds=self.rounds,
            sgd_epochs=self.sgd_epochs,
            em_iters=self.em_iters,
            seed=self.seed,
            soft_em=self.soft_em,
        )

    def _prior_rules(self) -> PriorRules:
        if self.prior is None:
            return PriorRules.empty()
        if isinstance(self.prior, str):
            if self.prior == "universal":
                return PriorRules.universal()
            raise ValueError(f"unknown prior {self.prior!r}")
        return PriorRules(pairs=frozenset((h, c) for h, c in self.prior))

    def _fit_treebank(self, X) -> Treebank:
        if isinstance(X, Treebank):
            return X
        seqs = _as_tag_sequences(X)
        vocab = TagVocab(tag for toks in seqs for tag in toks)
        sentences = [
            Sentence(tags=tuple(vocab.id(t) for t in toks), source_line=f"<memory>:{k}")
            for k, toks in enumerate(seqs)
        ]
        return Treebank(sentences=sentences, vocab=vocab)

    def fit(self, X, y=None) -> "CRFAutoencoderParser":
        """Learn encoder weights and decoder table from tag sequences.

        ``X`` is an iterable of POS-tag sequences (or a Treebank); ``y``
        is ignored (training is unsupervised).
        """
        if self.decoder not in ("eisner", "cle"):
            raise ValueError(f"unknown decoder {self.decoder!r}")
        tb = self._fit_treebank(X)
        trainer = Trainer(
            tb,
            self._hyperparams(),
            idx=build_index(tb),
            prior=self._prior_rules(),
            tag_map=self.tag_map,
        )
        state = trainer.run()
        self.vocab_ = tb.vocab
        self.feature_index_ = trainer.idx
        self.weights_ = state.wts
        self.decoder_table_ = state.dec
        self.prior_rules_ = trainer.prior
        self.objective_history_ = list(state.objective_history)
        self.n_features_in_ = trainer.idx.size
        return self

    def _predict_sentences(self, X) -> list[Sentence]:
        if isinstance(X, Treebank):
            remapped, unseen = remap_to_vocab(X, self.vocab_)
            if unseen:
                warnings.warn(f"unseen tags mapped to <unk>: {sorted(unseen)}")
            return remapped.sentences
        seqs = _as_tag_sequences(X)
        unseen = {t for toks in seqs for t in toks if t not in self.vocab_}
        if unseen:
            warnings.warn(f"unseen tags mapped to <unk>: {sorted(unseen)}")
        return [
            Sentence(tags=tuple(self.vocab_.id_or_unk(t) for t in toks))
            for toks in seqs
        ]

    def predict(self, X) -> list[list[int]]:
        """Head index per token for each sentence (0 = root)."""
        check_is_fitted(self, "weights_")
        out = []
        for sent in self._predict_sentences(X):
            tree, _ = parse_sentence(
                sent,
                self.weights_,
                self.decoder_table_,
                self.prior_rules_,
                self.alpha,
                self.feature_index_,
                self.vocab_,
                decoder=self.decoder,
                tag_map=self.tag_map,
            )
            out.append(list(tree.heads))
        return out

    def score(self, X, y) -> float:
        """Directed attachment accuracy against gold head sequences."""
        pred = self.predict(X)
        gold = [list(heads) for heads in y]
        if len(pred) != len(gold):
            raise ValueError(f"{len(pred)} sentences but {len(gold)} gold head lists")
        correct = total = 0
        for k, (p, g) in enumerate(zip(pred, gold)):
            if len(p) != len(g):
                raise ValueError(f"sentence {k}: {len(p)} tokens but {len(g)} gold heads")
            correct += sum(1 for a, b in zip(p, g) if a == b)
            total += len(p)
        return correct / total
