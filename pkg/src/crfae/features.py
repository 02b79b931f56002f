"""Arc feature templates and the string-keyed feature index.

Every candidate arc (head i, child j) instantiates seven indicator
templates over the head tag, child tag, their immediate neighbours, the
arc direction, and the (clipped) linear distance. Features are binary:
an arc's score is the sum of the weights of its instantiated templates.
"""

from __future__ import annotations

from typing import Iterable, NamedTuple, Optional

from .corpus import BOS_TAG, EOS_TAG, ROOT_TAG, Sentence, TagVocab, Treebank

TEMPLATE_COUNT = 7

# Distances above the training-length cap collapse to one bucket so that
# full-length test sentences still hit trained features.
DISTANCE_CLIP = 10


class FeatureError(ValueError):
    """Invalid arc or misuse of the feature index."""


class ArcFeatures(NamedTuple):
    """Sorted, duplicate-free active feature ids for one candidate arc."""

    ids: tuple[int, ...]


class FeatureIndex:
    """Bijection from instantiated template strings to dense feature ids.

    Built once over the training corpus, then frozen: lookups of unseen
    strings return nothing (the feature is simply absent at parse time).
    """

    def __init__(self) -> None:
        self._map: dict[str, int] = {}
        self._frozen = False

    @property
    def size(self) -> int:
        return len(self._map)

    @property
    def frozen(self) -> bool:
        return self._frozen

    def freeze(self) -> "FeatureIndex":
        self._frozen = True
        return self

    def add(self, key: str) -> int:
        if self._frozen:
            raise FeatureError("feature index is frozen")
        fid = self._map.get(key)
        if fid is None:
            fid = len(self._map)
            self._map[key] = fid
        return fid

    def get(self, key: str) -> Optional[int]:
        return self._map.get(key)

    def items(self) -> Iterable[tuple[str, int]]:
        return self._map.items()

    def __contains__(self, key: str) -> bool:
        return key in self._map

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[str, int]]) -> "FeatureIndex":
        idx = cls()
        items = sorted(pairs, key=lambda kv: kv[1])
        for expected, (key, fid) in enumerate(items):
            if fid != expected:
                raise FeatureError(f"feature ids not contiguous at {key!r} -> {fid}")
            idx._map[key] = fid
        return idx.freeze()


def _context_tag(sent: Sentence, vocab: TagVocab, pos: int) -> str:
    """Tag string at a context position; out-of-range positions map to
    boundary symbols (the root position 0 is out of range for contexts)."""
    n = len(sent)
    if pos < 1:
        return BOS_TAG
    if pos > n:
        return EOS_TAG
    return vocab.tag(sent.tags[pos - 1])


def template_strings(sent: Sentence, vocab: TagVocab, i: int, j: int) -> list[str]:
    """All seven template instantiations for arc i -> j."""
    n = len(sent)
    if i == j:
        raise FeatureError(f"self-loop arc ({i}, {j})")
    if not (0 <= i <= n) or not (1 <= j <= n):
        raise FeatureError(f"arc ({i}, {j}) out of range for length {n}")
    dis = min(abs(i - j), DISTANCE_CLIP)
    direction = "R" if j > i else "L"
    pos_i = ROOT_TAG if i == 0 else vocab.tag(sent.tags[i - 1])
    pos_j = vocab.tag(sent.tags[j - 1])
    ctx_im1 = _context_tag(sent, vocab, i - 1)
    ctx_ip1 = _context_tag(sent, vocab, i + 1)
    ctx_jm1 = _context_tag(sent, vocab, j - 1)
    ctx_jp1 = _context_tag(sent, vocab, j + 1)
    tail = f"{dis}|{direction}"
    return [
        f"1:{pos_i}|{tail}",
        f"2:{pos_j}|{tail}",
        f"3:{pos_i}|{pos_j}|{tail}",
        f"4:{pos_i}|{ctx_im1}|{pos_j}|{tail}",
        f"5:{pos_i}|{ctx_ip1}|{pos_j}|{tail}",
        f"6:{pos_i}|{pos_j}|{ctx_jm1}|{tail}",
        f"7:{pos_i}|{pos_j}|{ctx_jp1}|{tail}",
    ]


def extract(
    sent: Sentence,
    i: int,
    j: int,
    idx: FeatureIndex,
    mode: str = "lookup",
    *,
    vocab: TagVocab,
) -> ArcFeatures:
    """Active feature ids for arc i -> j.

    In ``build`` mode unseen strings get fresh ids (always 7 features);
    in ``lookup`` mode unseen strings are dropped.
    """
    if mode not in ("build", "lookup"):
        raise FeatureError(f"unknown mode {mode!r}")
    keys = template_strings(sent, vocab, i, j)
    if mode == "build":
        ids = [idx.add(k) for k in keys]
    else:
        ids = [fid for fid in (idx.get(k) for k in keys) if fid is not None]
    return ArcFeatures(ids=tuple(sorted(set(ids))))


def arc_range(n: int) -> Iterable[tuple[int, int]]:
    """All candidate arcs (i, j) of an n-token sentence, fixed order."""
    for i in range(n + 1):
        for j in range(1, n + 1):
            if i != j:
                yield i, j


def build_index(tb: Treebank) -> FeatureIndex:
    """Index every feature instantiable from any candidate arc of ``tb``."""
    if not tb.sentences:
        raise FeatureError("cannot build a feature index from an empty treebank")
    idx = FeatureIndex()
    for sent in tb.sentences:
        for i, j in arc_range(len(sent)):
            extract(sent, i, j, idx, mode="build", vocab=tb.vocab)
    return idx.freeze()
