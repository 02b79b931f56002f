"""Feature templates, the frozen index, and the build/lookup contract."""

import numpy as np
import pytest

from crfae.corpus import BOS_TAG, EOS_TAG, ROOT_TAG
from crfae.features import (
    DISTANCE_CLIP,
    FeatureError,
    FeatureIndex,
    TEMPLATE_COUNT,
    arc_range,
    build_index,
    extract,
    template_strings,
)

from conftest import make_treebank


def _expected_templates(tags, i, j):
    """Independent re-derivation of the seven template strings for one arc
    of a sentence given as tag strings (1-based positions)."""
    n = len(tags)

    def at(p):
        if p < 1:
            return BOS_TAG
        if p > n:
            return EOS_TAG
        return tags[p - 1]

    dis = min(abs(i - j), DISTANCE_CLIP)
    d = "R" if j > i else "L"
    pi = ROOT_TAG if i == 0 else tags[i - 1]
    pj = tags[j - 1]
    return {
        f"1:{pi}|{dis}|{d}",
        f"2:{pj}|{dis}|{d}",
        f"3:{pi}|{pj}|{dis}|{d}",
        f"4:{pi}|{at(i - 1)}|{pj}|{dis}|{d}",
        f"5:{pi}|{at(i + 1)}|{pj}|{dis}|{d}",
        f"6:{pi}|{pj}|{at(j - 1)}|{dis}|{d}",
        f"7:{pi}|{pj}|{at(j + 1)}|{dis}|{d}",
    }


class TestTemplates:
    def test_four_token_verb_noun_arc(self, four_token_tb):
        # head 4 (VERB) -> child 2 (NOUN): distance 2, leftward arc
        sent = four_token_tb.sentences[0]
        keys = template_strings(sent, four_token_tb.vocab, 4, 2)
        assert len(keys) == TEMPLATE_COUNT
        assert "3:VERB|NOUN|2|L" in keys
        assert keys == sorted(
            _expected_templates(["DET", "NOUN", "ADV", "VERB"], 4, 2),
            key=keys.index,
        )

    def test_single_token_root_arc(self):
        tb = make_treebank([["X"]])
        keys = template_strings(tb.sentences[0], tb.vocab, 0, 1)
        assert len(keys) == TEMPLATE_COUNT
        assert keys[0] == f"1:{ROOT_TAG}|1|R"
        assert _expected_templates(["X"], 0, 1) == set(keys)
        # contexts around the lone token are boundary symbols
        assert f"6:{ROOT_TAG}|X|{BOS_TAG}|1|R" in keys
        assert f"7:{ROOT_TAG}|X|{EOS_TAG}|1|R" in keys

    def test_self_loop_rejected(self, four_token_tb):
        sent = four_token_tb.sentences[0]
        with pytest.raises(FeatureError, match="self-loop"):
            template_strings(sent, four_token_tb.vocab, 2, 2)

    def test_out_of_range_rejected(self, four_token_tb):
        sent = four_token_tb.sentences[0]
        with pytest.raises(FeatureError):
            template_strings(sent, four_token_tb.vocab, 5, 1)

    def test_distance_clip(self):
        tb = make_treebank([["A"] * 15])
        sent = tb.sentences[0]
        far = template_strings(sent, tb.vocab, 1, 15)
        near = template_strings(sent, tb.vocab, 1, 11)
        assert far[0] == f"1:A|{DISTANCE_CLIP}|R"
        assert far[0] == near[0]

    def test_direction_flag(self, four_token_tb):
        sent = four_token_tb.sentences[0]
        vocab = four_token_tb.vocab
        assert all("|L" in k for k in template_strings(sent, vocab, 3, 1))
        assert all("|R" in k for k in template_strings(sent, vocab, 1, 3))
        assert all("|R" in k for k in template_strings(sent, vocab, 0, 3))


class TestExtract:
    def test_build_mode_always_seven(self, four_token_tb):
        idx = FeatureIndex()
        sent = four_token_tb.sentences[0]
        feats = extract(sent, 4, 2, idx, mode="build", vocab=four_token_tb.vocab)
        assert len(feats.ids) == TEMPLATE_COUNT
        assert list(feats.ids) == sorted(set(feats.ids))

    def test_pure_function(self, four_token_tb):
        idx = build_index(four_token_tb)
        sent = four_token_tb.sentences[0]
        a = extract(sent, 4, 2, idx, mode="lookup", vocab=four_token_tb.vocab)
        b = extract(sent, 4, 2, idx, mode="lookup", vocab=four_token_tb.vocab)
        assert a == b

    def test_lookup_drops_unseen(self, four_token_tb):
        idx = build_index(four_token_tb)
        other = make_treebank([["NOUN", "NOUN"]])
        # NOUN-NOUN arcs never occur in the 4-token corpus, but the child
        # unigram template (2:NOUN|1|R-style) may: only the seen subset comes back.
        feats = extract(other.sentences[0], 1, 2, idx, mode="lookup", vocab=other.vocab)
        assert len(feats.ids) < TEMPLATE_COUNT
        assert all(fid < idx.size for fid in feats.ids)

    def test_frozen_index_rejects_build(self, four_token_tb):
        idx = build_index(four_token_tb)
        sent = four_token_tb.sentences[0]
        with pytest.raises(FeatureError, match="frozen"):
            extract(sent, 4, 2, idx, mode="build", vocab=four_token_tb.vocab)

    def test_bad_mode(self, four_token_tb):
        sent = four_token_tb.sentences[0]
        with pytest.raises(FeatureError, match="mode"):
            extract(sent, 4, 2, FeatureIndex(), mode="both", vocab=four_token_tb.vocab)


class TestBuildIndex:
    def test_single_token_corpus_has_exactly_seven(self):
        tb = make_treebank([["X"]])
        idx = build_index(tb)
        assert idx.size == TEMPLATE_COUNT

    def test_duplicate_sentences_do_not_grow_index(self):
        one = build_index(make_treebank([["A", "B"]]))
        two = build_index(make_treebank([["A", "B"], ["A", "B"]]))
        assert dict(one.items()) == dict(two.items())

    def test_two_tag_length_two_corpus_matches_enumeration(self):
        # All four length-2 sentences over {A, B}; expected size computed by
        # the independent template enumerator over every candidate arc.
        seqs = [["A", "A"], ["A", "B"], ["B", "A"], ["B", "B"]]
        tb = make_treebank(seqs)
        idx = build_index(tb)
        expected = set()
        for seq in seqs:
            for i, j in [(0, 1), (0, 2), (1, 2), (2, 1)]:
                expected |= _expected_templates(seq, i, j)
        assert idx.size == len(expected)
        assert set(k for k, _ in idx.items()) == expected

    def test_ids_contiguous_and_deterministic(self, four_token_tb):
        a = build_index(four_token_tb)
        b = build_index(four_token_tb)
        assert dict(a.items()) == dict(b.items())
        ids = sorted(fid for _, fid in a.items())
        assert ids == list(range(a.size))

    def test_empty_treebank_rejected(self, four_token_tb):
        from crfae.corpus import Treebank

        empty = Treebank(sentences=[], vocab=four_token_tb.vocab)
        with pytest.raises(FeatureError):
            build_index(empty)


class TestFeatureIndexContainer:
    def test_from_pairs_round_trip(self, four_token_tb):
        idx = build_index(four_token_tb)
        clone = FeatureIndex.from_pairs(idx.items())
        assert dict(clone.items()) == dict(idx.items())
        assert clone.frozen

    def test_from_pairs_rejects_gaps(self):
        with pytest.raises(FeatureError, match="contiguous"):
            FeatureIndex.from_pairs([("a", 0), ("b", 2)])

    def test_arc_range_order(self):
        assert list(arc_range(2)) == [(0, 1), (0, 2), (1, 2), (2, 1)]


class TestProperties:
    def test_extract_bounds_random_sentences(self):
        rng = np.random.default_rng(7)
        tags = ["A", "B", "C"]
        seqs = [
            [tags[t] for t in rng.integers(0, 3, size=rng.integers(1, 9))]
            for _ in range(25)
        ]
        tb = make_treebank(seqs)
        idx = build_index(tb)
        for sent in tb.sentences:
            for i, j in arc_range(len(sent)):
                feats = extract(sent, i, j, idx, mode="lookup", vocab=tb.vocab)
                assert len(feats.ids) == TEMPLATE_COUNT  # indexed corpus: all present
                assert list(feats.ids) == sorted(set(feats.ids))
                assert all(0 <= fid < idx.size for fid in feats.ids)
