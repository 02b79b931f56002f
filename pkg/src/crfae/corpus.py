"""CoNLL treebank reading and writing, tag vocabulary, length filtering.

The model alphabet is POS tags only: column 4 of CoNLL-X (CPOSTAG) and
CoNLL-U (UPOS) files. Gold heads (column 7) are kept for evaluation when
present; training never reads them.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional, Sequence, TextIO, Union

ROOT_TAG = "<root>"
BOS_TAG = "<bos>"
EOS_TAG = "<eos>"
UNK_TAG = "<unk>"

RESERVED_TAGS = (ROOT_TAG, BOS_TAG, EOS_TAG, UNK_TAG)

DEFAULT_PUNCT_TAGS = ("PUNCT",)

# Shared column layout of CoNLL-X and CoNLL-U token lines (0-based).
_COL_ID = 0
_COL_POS = 3
_COL_HEAD = 6
_MIN_COLUMNS = 8


class CorpusError(ValueError):
    """Unreadable or malformed treebank input."""


class TagVocab:
    """Bijective tag-string <-> tag-id map with reserved boundary symbols.

    Ids 0..3 are always the reserved <root>/<bos>/<eos>/<unk> symbols;
    corpus tags follow in first-seen order, so the assignment is
    deterministic for a fixed input file.
    """

    def __init__(self, corpus_tags: Iterable[str], punct_tags: Iterable[str] = DEFAULT_PUNCT_TAGS):
        ordered: list[str] = []
        seen: set[str] = set(RESERVED_TAGS)
        for tag in corpus_tags:
            if tag in RESERVED_TAGS:
                raise CorpusError(f"corpus uses reserved tag symbol {tag!r}")
            if tag not in seen:
                seen.add(tag)
                ordered.append(tag)
        self.tags: tuple[str, ...] = RESERVED_TAGS + tuple(ordered)
        self._index = {tag: i for i, tag in enumerate(self.tags)}
        self.punct_tags = frozenset(punct_tags)
        self.punct_ids = frozenset(
            self._index[t] for t in self.punct_tags if t in self._index
        )

    root_id = 0
    bos_id = 1
    eos_id = 2
    unk_id = 3

    def __len__(self) -> int:
        return len(self.tags)

    def __contains__(self, tag: str) -> bool:
        return tag in self._index

    def id(self, tag: str) -> int:
        try:
            return self._index[tag]
        except KeyError:
            raise CorpusError(f"unknown tag {tag!r}") from None

    def id_or_unk(self, tag: str) -> int:
        return self._index.get(tag, self.unk_id)

    def tag(self, tag_id: int) -> str:
        return self.tags[tag_id]

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, TagVocab)
            and self.tags == other.tags
            and self.punct_tags == other.punct_tags
        )


@dataclass
class Sentence:
    """One POS-tagged sentence; positions are 1..n, head index 0 is the root.

    ``gold_heads`` is None when the input carries no (complete) head
    annotation. ``gold_valid`` is False when heads are present but do not
    form a single tree rooted at 0; such sentences still train (training is
    unsupervised) but are excluded from evaluation.
    """

    tags: tuple[int, ...]
    gold_heads: Optional[tuple[int, ...]] = None
    source_line: str = ""
    gold_valid: bool = True
    # Raw block for faithful re-emission: every original line (comments and
    # multiword/empty-node rows included) plus, per token, its line index.
    block_lines: Optional[tuple[str, ...]] = None
    token_rows: Optional[tuple[int, ...]] = None

    def __len__(self) -> int:
        return len(self.tags)

    def scored_indices(self, vocab: TagVocab) -> list[int]:
        """0-based token indices that count for scoring and length regimes."""
        return [k for k, t in enumerate(self.tags) if t not in vocab.punct_ids]

    def scored_length(self, vocab: TagVocab) -> int:
        return len(self.scored_indices(vocab))


@dataclass
class Treebank:
    sentences: list[Sentence]
    vocab: TagVocab

    def __len__(self) -> int:
        return len(self.sentences)

    def __iter__(self) -> Iterator[Sentence]:
        return iter(self.sentences)


def validate_heads(heads: Sequence[int]) -> bool:
    """True iff ``heads`` encodes a single connected tree rooted at 0."""
    n = len(heads)
    if n == 0:
        return False
    if sum(1 for h in heads if h == 0) != 1:
        return False
    for j, h in enumerate(heads, start=1):
        if h < 0 or h > n or h == j:
            return False
    for j in range(1, n + 1):
        seen = set()
        v = j
        while v != 0:
            if v in seen:
                return False
            seen.add(v)
            v = heads[v - 1]
    return True


def _parse_block(
    lines: list[tuple[int, str]],
    path: str,
    reject_invalid_gold: bool,
) -> tuple[list[str], Optional[tuple[int, ...]], bool, tuple[str, ...], tuple[int, ...], str]:
    """Parse one blank-line-delimited block into tag strings and heads."""
    tags: list[str] = []
    heads: list[Optional[int]] = []
    head_linenos: list[int] = []
    block_lines: list[str] = []
    token_rows: list[int] = []
    first_lineno = lines[0][0]

    for lineno, line in lines:
        block_lines.append(line)
        if line.startswith("#"):
            continue
        cols = line.split("\t")
        if len(cols) < _MIN_COLUMNS:
            raise CorpusError(
                f"{path}:{lineno}: expected >= {_MIN_COLUMNS} tab-separated "
                f"columns, got {len(cols)}"
            )
        tok_id = cols[_COL_ID]
        if "-" in tok_id or "." in tok_id:
            continue  # CoNLL-U multiword token / empty node
        try:
            pos = int(tok_id)
        except ValueError:
            raise CorpusError(f"{path}:{lineno}: non-integer token id {tok_id!r}") from None
        if pos != len(tags) + 1:
            raise CorpusError(
                f"{path}:{lineno}: token id {pos} out of sequence (expected {len(tags) + 1})"
            )
        token_rows.append(len(block_lines) - 1)
        tags.append(cols[_COL_POS])
        head_col = cols[_COL_HEAD]
        if head_col == "_" or head_col == "":
            heads.append(None)
        else:
            try:
                heads.append(int(head_col))
            except ValueError:
                raise CorpusError(
                    f"{path}:{lineno}: non-integer head {head_col!r}"
                ) from None
        head_linenos.append(lineno)

    n = len(tags)
    gold: Optional[tuple[int, ...]] = None
    gold_valid = True
    if n and all(h is not None for h in heads):
        for h, lineno in zip(heads, head_linenos):
            if h < 0 or h > n:  # type: ignore[operator]
                raise CorpusError(f"{path}:{lineno}: head index {h} out of range [0..{n}]")
        gold = tuple(heads)  # type: ignore[arg-type]
        gold_valid = validate_heads(gold)
        if not gold_valid and reject_invalid_gold:
            raise CorpusError(
                f"{path}:{first_lineno}: gold heads do not form a tree rooted at 0"
            )
    return tags, gold, gold_valid, tuple(block_lines), tuple(token_rows), f"{path}:{first_lineno}"


def load_conll(
    path: Union[str, os.PathLike],
    fmt: str = "conllu",
    punct_tags: Iterable[str] = DEFAULT_PUNCT_TAGS,
    reject_invalid_gold: bool = False,
) -> Treebank:
    """Read a CoNLL-X or CoNLL-U file into a Treebank.

    POS comes from column 4, head from column 7 when annotated. Multiword
    and empty-node rows (ids containing '-' or '.') are skipped but kept in
    the raw block so files round-trip.
    """
    if fmt not in ("conllu", "conllx"):
        raise CorpusError(f"unknown format {fmt!r} (expected 'conllu' or 'conllx')")
    path = os.fspath(path)
    try:
        with open(path, encoding="utf-8") as fh:
            raw_lines = fh.read().splitlines()
    except OSError as exc:
        raise CorpusError(f"cannot read {path}: {exc}") from exc

    blocks: list[list[tuple[int, str]]] = []
    current: list[tuple[int, str]] = []
    for lineno, line in enumerate(raw_lines, start=1):
        if line.strip() == "":
            if current:
                blocks.append(current)
                current = []
        else:
            current.append((lineno, line))
    if current:
        blocks.append(current)

    parsed = []
    for block in blocks:
        item = _parse_block(block, path, reject_invalid_gold)
        if item[0]:  # ignore comment-only blocks
            parsed.append(item)
    if not parsed:
        raise CorpusError(f"{path}: no sentences")

    vocab = TagVocab(
        (tag for tags, *_ in parsed for tag in tags), punct_tags=punct_tags
    )
    sentences = [
        Sentence(
            tags=tuple(vocab.id(t) for t in tags),
            gold_heads=gold,
            source_line=src,
            gold_valid=gold_valid,
            block_lines=block_lines,
            token_rows=token_rows,
        )
        for tags, gold, gold_valid, block_lines, token_rows, src in parsed
    ]
    return Treebank(sentences=sentences, vocab=vocab)


def filter_by_length(tb: Treebank, max_len: int) -> Treebank:
    """Keep sentences whose scored (non-punctuation) length is <= max_len."""
    if max_len < 1:
        raise CorpusError(f"max_len must be >= 1, got {max_len}")
    kept = [s for s in tb.sentences if s.scored_length(tb.vocab) <= max_len]
    if not kept:
        raise CorpusError(f"no sentences of length <= {max_len}")
    return Treebank(sentences=kept, vocab=tb.vocab)


def remap_to_vocab(tb: Treebank, vocab: TagVocab) -> tuple[Treebank, set[str]]:
    """Re-encode a treebank under another vocabulary (e.g. a trained model's).

    Tags unknown to ``vocab`` map to its <unk> id; the set of such tag
    strings is returned so callers can warn.
    """
    unseen: set[str] = set()
    sentences = []
    for sent in tb.sentences:
        ids = []
        for t in sent.tags:
            tag = tb.vocab.tag(t)
            if tag not in vocab:
                unseen.add(tag)
            ids.append(vocab.id_or_unk(tag))
        sentences.append(
            Sentence(
                tags=tuple(ids),
                gold_heads=sent.gold_heads,
                source_line=sent.source_line,
                gold_valid=sent.gold_valid,
                block_lines=sent.block_lines,
                token_rows=sent.token_rows,
            )
        )
    return Treebank(sentences=sentences, vocab=vocab), unseen


def _canonical_rows(sent: Sentence, vocab: TagVocab, heads: Optional[Sequence[int]]) -> list[str]:
    rows = []
    for k, tag_id in enumerate(sent.tags):
        tag = vocab.tag(tag_id)
        if heads is not None:
            head = str(heads[k])
        elif sent.gold_heads is not None:
            head = str(sent.gold_heads[k])
        else:
            head = "_"
        rows.append("\t".join([str(k + 1), tag, "_", tag, "_", "_", head, "_", "_", "_"]))
    return rows


def write_conll(
    tb: Treebank,
    out: Union[str, os.PathLike, TextIO],
    pred_heads: Optional[Sequence[Sequence[int]]] = None,
) -> None:
    """Write a treebank in CoNLL format.

    Sentences loaded from a file are re-emitted from their original lines
    (with the head column substituted when ``pred_heads`` is given), so all
    other columns are preserved byte-for-byte. Programmatic sentences get
    canonical rows.
    """
    if pred_heads is not None and len(pred_heads) != len(tb.sentences):
        raise CorpusError(
            f"predicted heads for {len(pred_heads)} sentences, treebank has {len(tb.sentences)}"
        )

    def _emit(fh: TextIO) -> None:
        for k, sent in enumerate(tb.sentences):
            heads = pred_heads[k] if pred_heads is not None else None
            if heads is not None and len(heads) != len(sent):
                raise CorpusError(
                    f"sentence {k}: {len(heads)} predicted heads for {len(sent)} tokens"
                )
            if sent.block_lines is not None and sent.token_rows is not None:
                lines = list(sent.block_lines)
                if heads is not None:
                    for tok_idx, row_idx in enumerate(sent.token_rows):
                        cols = lines[row_idx].split("\t")
                        cols[_COL_HEAD] = str(heads[tok_idx])
                        lines[row_idx] = "\t".join(cols)
                fh.write("\n".join(lines) + "\n\n")
            else:
                fh.write("\n".join(_canonical_rows(sent, tb.vocab, heads)) + "\n\n")

    if hasattr(out, "write"):
        _emit(out)  # type: ignore[arg-type]
    else:
        with open(os.fspath(out), "w", encoding="utf-8") as fh:
            _emit(fh)
