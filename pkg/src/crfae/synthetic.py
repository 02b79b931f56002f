"""Deterministic synthetic treebanks from a planted attachment grammar.

The planted grammar mimics the skew of natural POS sequences: a hub tag
that heads most structure and prefers the root, further content tags with
their own preferred children, and rarely-heading function tags. Trees are
grown by attaching each new token to an existing node drawn by headness
weight, with a directional bias, and are linearized projectively.

Everything is driven by one seeded generator: identical arguments produce
identical corpora byte for byte.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Sequence, TextIO, Union

import numpy as np

from .corpus import Treebank
from .model import PriorRules


@dataclass(frozen=True)
class PlantedGrammar:
    """Tag set with root/child tag distributions plus structural knobs.

    ``headness`` weights how often each tag is chosen as an attachment
    site; ``right_bias`` is the probability a child lands to the right of
    its head.
    """

    tags: tuple[str, ...]
    root_probs: tuple[float, ...]
    child_probs: tuple[tuple[float, ...], ...]
    headness: tuple[float, ...]
    right_bias: float = 0.65

    @classmethod
    def skewed(cls, n_tags: int, bias: float = 0.75, right_bias: float = 0.65) -> "PlantedGrammar":
        """Deterministic recipe for any tag set size >= 2.

        The first half of the tags are content-like (T0 the hub), the rest
        function-like: content tag Ti strongly prefers its function
        partner and the next content tag as children; function tags rarely
        head anything. ``bias`` scales how concentrated the child
        distributions are.
        """
        if n_tags < 2:
            raise ValueError(f"need at least 2 tags, got {n_tags}")
        if not 0.0 < bias < 1.0:
            raise ValueError(f"bias must be in (0, 1), got {bias}")
        if not 0.0 <= right_bias <= 1.0:
            raise ValueError(f"right_bias must be in [0, 1], got {right_bias}")
        tags = tuple(f"T{k}" for k in range(n_tags))
        n_content = (n_tags + 1) // 2
        n_function = n_tags - n_content

        root = np.full(n_tags, (1.0 - 0.85) / (n_tags - 1))
        root[0] = 0.85

        child = np.full((n_tags, n_tags), (1.0 - bias) / n_tags)
        for i in range(n_content):
            remaining = bias
            if n_function:
                partner = n_content + (i % n_function)
                child[i, partner] += 0.6 * bias
                remaining = 0.4 * bias
            child[i, (i + 1) % n_content] += remaining
        for i in range(n_content, n_tags):
            # function tags rarely head; when they do, they take content tags
            child[i, :n_content] += bias / n_content
        child /= child.sum(axis=1, keepdims=True)

        headness = np.full(n_tags, 0.5)
        headness[0] = 1.0
        headness[n_content:] = 0.03

        return cls(
            tags=tags,
            root_probs=tuple(root / root.sum()),
            child_probs=tuple(tuple(row) for row in child),
            headness=tuple(headness),
            right_bias=right_bias,
        )

    def preferred_pairs(self) -> list[tuple[str, str]]:
        """The planted (head tag, child tag) preferences: argmax children
        of tags that genuinely head structure (non-negligible headness)
        and have a real preference (above 1.5x uniform mass)."""
        pairs = []
        threshold = 1.5 / len(self.tags)
        head_cut = 0.2 * max(self.headness)
        for k, row in enumerate(self.child_probs):
            if self.headness[k] < head_cut:
                continue
            best = int(np.argmax(row))
            if row[best] > threshold:
                pairs.append((self.tags[k], self.tags[best]))
        return pairs

    def rules(self) -> PriorRules:
        return PriorRules(pairs=frozenset(self.preferred_pairs()))


class _Node:
    __slots__ = ("tag", "left", "right")

    def __init__(self, tag: int):
        self.tag = tag
        self.left: list[_Node] = []
        self.right: list[_Node] = []


def _sample_tree(
    grammar: PlantedGrammar, rng: np.random.Generator, length: int
) -> tuple[list[str], list[int]]:
    """Grow a projective tree of exactly ``length`` tokens.

    The root's single child comes from the root distribution; every
    further token attaches to an existing node drawn by headness weight,
    on a side drawn with the directional bias, with its tag drawn from the
    head's planted child distribution. In-order linearization keeps the
    tree projective.
    """
    k = len(grammar.tags)
    headness = np.array(grammar.headness)
    top = _Node(int(rng.choice(k, p=np.array(grammar.root_probs))))
    nodes = [top]
    while len(nodes) < length:
        site_w = np.array([headness[n.tag] for n in nodes])
        head = nodes[int(rng.choice(len(nodes), p=site_w / site_w.sum()))]
        tag = int(rng.choice(k, p=np.array(grammar.child_probs[head.tag])))
        child = _Node(tag)
        if rng.random() < grammar.right_bias:
            head.right.append(child)
        else:
            head.left.append(child)
        nodes.append(child)

    order: list[_Node] = []

    def visit(node: _Node) -> None:
        for c in node.left:
            visit(c)
        order.append(node)
        for c in node.right:
            visit(c)

    visit(top)
    position = {id(node): pos for pos, node in enumerate(order, start=1)}
    heads = [0] * length
    for node in order:
        for c in node.left + node.right:
            heads[position[id(c)] - 1] = position[id(node)]
    heads[position[id(top)] - 1] = 0
    tags = [grammar.tags[node.tag] for node in order]
    return tags, heads


def generate_sentences(
    n_sentences: int,
    max_len: int,
    grammar: PlantedGrammar,
    seed: int,
) -> list[tuple[list[str], list[int]]]:
    """Sample sentences with lengths uniform on [1, max_len]."""
    if n_sentences < 1:
        raise ValueError(f"need at least one sentence, got {n_sentences}")
    if max_len < 1:
        raise ValueError(f"max_len must be >= 1, got {max_len}")
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n_sentences):
        length = int(rng.integers(1, max_len + 1))
        out.append(_sample_tree(grammar, rng, length))
    return out


def write_sentences(
    sentences: Sequence[tuple[list[str], list[int]]],
    out: Union[str, os.PathLike, TextIO],
) -> None:
    """Emit CoNLL-U blocks with gold heads; the tag doubles as the form."""

    def _emit(fh: TextIO) -> None:
        for tags, heads in sentences:
            for pos, (tag, head) in enumerate(zip(tags, heads), start=1):
                fh.write(
                    "\t".join(
                        [str(pos), tag, "_", tag, "_", "_", str(head), "_", "_", "_"]
                    )
                    + "\n"
                )
            fh.write("\n")

    if hasattr(out, "write"):
        _emit(out)  # type: ignore[arg-type]
    else:
        with open(os.fspath(out), "w", encoding="utf-8") as fh:
            _emit(fh)


def random_attachment_accuracy(tb: Treebank) -> float:
    """Expected directed accuracy of attaching every token to a uniformly
    random candidate head (the exact expectation, not a sample)."""
    expected = 0.0
    total = 0
    for sent in tb.sentences:
        if sent.gold_heads is None or not sent.gold_valid:
            continue
        n = len(sent)
        scored = sent.scored_indices(tb.vocab)
        expected += len(scored) / n  # each token has n candidate heads
        total += len(scored)
    if total == 0:
        raise ValueError("no evaluable sentences")
    return expected / total
