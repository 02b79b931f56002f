"""sklearn estimator surface: params, validation, fit/predict/score."""

import numpy as np
import pytest
from sklearn.base import clone

from crfae.estimator import CRFAutoencoderParser
from crfae.synthetic import PlantedGrammar, generate_sentences


def _toy_corpus(n=40, seed=0):
    g = PlantedGrammar.skewed(3)
    sents = generate_sentences(n, 6, g, seed=seed)
    X = [tags for tags, _ in sents]
    y = [heads for _, heads in sents]
    return X, y


class TestSklearnContract:
    def test_get_set_params_round_trip(self):
        est = CRFAutoencoderParser(alpha=0.3, rounds=2)
        params = est.get_params()
        assert params["alpha"] == 0.3
        assert params["rounds"] == 2
        est.set_params(alpha=0.7)
        assert est.alpha == 0.7

    def test_clone_preserves_params(self):
        est = CRFAutoencoderParser(rounds=1, seed=3, prior=None)
        cloned = clone(est)
        assert cloned.get_params() == est.get_params()

    def test_unfitted_predict_raises(self):
        from sklearn.exceptions import NotFittedError

        with pytest.raises(NotFittedError):
            CRFAutoencoderParser().predict([["A", "B"]])

    def test_fit_returns_self_and_sets_attributes(self):
        X, _ = _toy_corpus(20)
        est = CRFAutoencoderParser(rounds=1, prior=None)
        assert est.fit(X) is est
        assert est.n_features_in_ == est.feature_index_.size
        assert len(est.objective_history_) == 1
        assert est.weights_.w.shape == (est.n_features_in_,)


class TestValidation:
    def test_string_sentence_rejected(self):
        with pytest.raises(ValueError, match="string"):
            CRFAutoencoderParser(rounds=0).fit(["AB"])

    def test_empty_sentence_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            CRFAutoencoderParser(rounds=0).fit([[]])

    def test_empty_corpus_rejected(self):
        with pytest.raises(ValueError, match="no sentences"):
            CRFAutoencoderParser(rounds=0).fit([])

    def test_non_string_tag_rejected(self):
        with pytest.raises(ValueError, match="non-string"):
            CRFAutoencoderParser(rounds=0).fit([["A", 3]])

    def test_bad_decoder_rejected(self):
        with pytest.raises(ValueError, match="decoder"):
            CRFAutoencoderParser(rounds=0, decoder="mst").fit([["A"]])

    def test_bad_prior_rejected(self):
        with pytest.raises(ValueError, match="prior"):
            CRFAutoencoderParser(rounds=0, prior="builtin").fit([["A"]])


class TestFitPredict:
    def test_predict_shapes_and_validity(self):
        from crfae.decode import check_tree

        X, _ = _toy_corpus(30)
        est = CRFAutoencoderParser(rounds=2, prior=None, seed=0).fit(X)
        pred = est.predict(X[:10])
        assert len(pred) == 10
        for heads, tags in zip(pred, X[:10]):
            assert len(heads) == len(tags)
            check_tree(heads)

    def test_single_token_sentences_head_zero(self):
        X, _ = _toy_corpus(20)
        est = CRFAutoencoderParser(rounds=1, prior=None).fit(X)
        assert est.predict([["T0"]]) == [[0]]

    def test_unseen_tags_warn_and_parse(self):
        X, _ = _toy_corpus(20)
        est = CRFAutoencoderParser(rounds=1, prior=None).fit(X)
        with pytest.warns(UserWarning, match="unseen"):
            pred = est.predict([["ZZZ", "T0"]])
        assert len(pred[0]) == 2

    def test_score_beats_random_on_planted_corpus(self):
        X, y = _toy_corpus(120, seed=1)
        est = CRFAutoencoderParser(
            rounds=3, prior=None, alpha=0.0, seed=0
        ).fit(X)
        acc = est.score(X, y)
        lengths = [len(t) for t in X]
        random_baseline = sum(1.0 for _ in lengths) / sum(lengths)
        assert acc > random_baseline + 0.1

    def test_deterministic_given_seed(self):
        X, _ = _toy_corpus(25)
        a = CRFAutoencoderParser(rounds=2, prior=None, seed=5).fit(X)
        b = CRFAutoencoderParser(rounds=2, prior=None, seed=5).fit(X)
        assert np.array_equal(a.weights_.w, b.weights_.w)
        assert a.objective_history_ == b.objective_history_
        assert a.predict(X[:5]) == b.predict(X[:5])

    def test_decoder_choice_cle(self):
        X, _ = _toy_corpus(20)
        est = CRFAutoencoderParser(rounds=1, prior=None, decoder="cle").fit(X)
        pred = est.predict(X[:5])
        from crfae.decode import check_tree

        for heads in pred:
            check_tree(heads)

    def test_explicit_rule_pairs(self):
        X, _ = _toy_corpus(20)
        est = CRFAutoencoderParser(
            rounds=1, prior=[("T0", "T1")], alpha=1.0
        ).fit(X)
        assert est.prior_rules_.pairs == {("T0", "T1")}

    def test_score_validates_alignment(self):
        X, y = _toy_corpus(10)
        est = CRFAutoencoderParser(rounds=1, prior=None).fit(X)
        with pytest.raises(ValueError):
            est.score(X, y[:-1])
