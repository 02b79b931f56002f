"""Shared fixtures: tiny treebanks and random potential matrices."""

from __future__ import annotations

import numpy as np
import pytest

from crfae.corpus import Sentence, TagVocab, Treebank, load_conll

# A 4-token sentence (DET NOUN ADV VERB) whose gold tree hangs the noun
# phrase off the verb: heads (2, 4, 4, 0).
FOUR_TOKEN_BLOCK = """\
1\tSome\tsome\tDET\t_\t_\t2\t_\t_\t_
2\tprices\tprice\tNOUN\t_\t_\t4\t_\t_\t_
3\tsuddenly\tsuddenly\tADV\t_\t_\t4\t_\t_\t_
4\tdropped\tdrop\tVERB\t_\t_\t0\t_\t_\t_
"""


@pytest.fixture
def four_token_file(tmp_path):
    path = tmp_path / "four.conllu"
    path.write_text(FOUR_TOKEN_BLOCK + "\n", encoding="utf-8")
    return path


@pytest.fixture
def four_token_tb(four_token_file):
    return load_conll(four_token_file)


def make_treebank(tag_sequences, gold=None, punct_tags=()):
    """Treebank straight from tag-string sequences (no file round trip)."""
    vocab = TagVocab((t for seq in tag_sequences for t in seq), punct_tags=punct_tags)
    gold = gold if gold is not None else [None] * len(tag_sequences)
    sentences = [
        Sentence(
            tags=tuple(vocab.id(t) for t in seq),
            gold_heads=tuple(g) if g is not None else None,
            source_line=f"<test>:{k}",
        )
        for k, (seq, g) in enumerate(zip(tag_sequences, gold))
    ]
    return Treebank(sentences=sentences, vocab=vocab)


def random_potentials(rng, n, scale=2.0):
    """Random (n+1) x n potential matrix with -inf self arcs."""
    pot = rng.normal(0.0, scale, size=(n + 1, n))
    for j in range(1, n + 1):
        pot[j, j - 1] = -np.inf
    return pot
