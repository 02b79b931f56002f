"""Directed dependency accuracy with the short/all length regimes."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Sequence, Union

from .corpus import Treebank
from .decode import ParseTree


class EvalError(ValueError):
    """Misaligned prediction/gold corpora."""


@dataclass
class EvalReport:
    """Token-level (micro-averaged) accuracy per length regime.

    The short regime covers sentences with at most ``max_len`` scored
    tokens; "all" covers every evaluable sentence. Punctuation tokens are
    excluded from both the counts and the length, per corpus policy.
    """

    correct_short: int
    total_short: int
    correct_all: int
    total_all: int
    max_len: int

    @property
    def dda_short(self) -> Optional[float]:
        return self.correct_short / self.total_short if self.total_short else None

    @property
    def dda_all(self) -> Optional[float]:
        return self.correct_all / self.total_all if self.total_all else None

    def as_dict(self) -> dict:
        return {
            "max_len": self.max_len,
            "short": {
                "correct": self.correct_short,
                "total": self.total_short,
                "accuracy": self.dda_short,
            },
            "all": {
                "correct": self.correct_all,
                "total": self.total_all,
                "accuracy": self.dda_all,
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2)

    def format_table(self) -> str:
        def row(label: str, correct: int, total: int) -> str:
            acc = f"{100.0 * correct / total:6.1f}" if total else "     -"
            return f"{label:<12} {correct:>8} {total:>8} {acc}"

        header = f"{'length':<12} {'correct':>8} {'total':>8} {'acc%':>6}"
        return "\n".join(
            [
                header,
                row(f"<= {self.max_len}", self.correct_short, self.total_short),
                row("all", self.correct_all, self.total_all),
            ]
        )


PredHeads = Union[Sequence[int], ParseTree]


def directed_accuracy(
    pred: Sequence[PredHeads],
    gold: Treebank,
    max_len: int = 10,
) -> EvalReport:
    """Fraction of scored tokens whose predicted head equals the gold head.

    ``pred`` must align one-to-one with ``gold``; sentences without a
    valid gold tree are skipped. Raises EvalError on misalignment or when
    nothing is evaluable.
    """
    if len(pred) != len(gold.sentences):
        raise EvalError(
            f"{len(pred)} predictions for {len(gold.sentences)} gold sentences"
        )
    correct_short = total_short = correct_all = total_all = 0
    evaluable = 0
    for k, sent in enumerate(gold.sentences):
        heads = pred[k].heads if isinstance(pred[k], ParseTree) else pred[k]
        if len(heads) != len(sent):
            raise EvalError(
                f"sentence {k}: {len(heads)} predicted heads for {len(sent)} tokens"
            )
        if sent.gold_heads is None or not sent.gold_valid:
            continue
        evaluable += 1
        scored = sent.scored_indices(gold.vocab)
        hits = sum(1 for t in scored if heads[t] == sent.gold_heads[t])
        correct_all += hits
        total_all += len(scored)
        if len(scored) <= max_len:
            correct_short += hits
            total_short += len(scored)
    if evaluable == 0 or total_all == 0:
        raise EvalError("no evaluable sentences (no valid gold trees)")
    return EvalReport(
        correct_short=correct_short,
        total_short=total_short,
        correct_all=correct_all,
        total_all=total_all,
        max_len=max_len,
    )


def compare_treebanks(pred: Treebank, gold: Treebank, max_len: int = 10) -> EvalReport:
    """Score a predicted treebank (heads from its head column) against gold."""
    if len(pred.sentences) != len(gold.sentences):
        raise EvalError(
            f"predicted file has {len(pred.sentences)} sentences, "
            f"gold has {len(gold.sentences)}"
        )
    heads = []
    for k, (p, g) in enumerate(zip(pred.sentences, gold.sentences)):
        if len(p) != len(g):
            raise EvalError(f"sentence {k}: predicted length {len(p)} != gold {len(g)}")
        if p.gold_heads is None:
            raise EvalError(f"sentence {k}: predicted file has no heads")
        heads.append(p.gold_heads)
    return directed_accuracy(heads, gold, max_len=max_len)
