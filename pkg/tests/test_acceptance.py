"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines and
measured values. Every tolerance is pinned here, not configurable.
"""

import json
import time

import numpy as np
import pytest

from crfae.cli import EXIT_OK, main
from crfae.corpus import load_conll
from crfae.decode import check_tree, cle_decode, eisner_decode, parse_treebank, tree_score
from crfae.evaluation import compare_treebanks, directed_accuracy
from crfae.features import build_index
from crfae.inference import (
    arc_marginals_nonprojective,
    arc_marginals_projective,
    log_partition_nonprojective,
    log_partition_projective,
    oracle_enumerate,
    oracle_marginals,
)
from crfae.model import Hyperparams, PriorRules
from crfae.modelfile import load_model
from crfae.synthetic import random_attachment_accuracy
from crfae.train import Trainer

from conftest import random_potentials

SIZES = (1, 2, 3, 4, 5)
MATRICES_PER_SIZE = 100


def _report(criterion: str, ok: bool, detail: str) -> None:
    print(f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}")


@pytest.fixture(scope="module")
def random_instances():
    """The shared seeded instances for criteria 1 and 2."""
    rng = np.random.default_rng(12345)
    return {
        n: [random_potentials(rng, n) for _ in range(MATRICES_PER_SIZE)]
        for n in SIZES
    }


@pytest.fixture(scope="module")
def enumerated():
    return {
        n: {
            "projective": oracle_enumerate(n, "projective"),
            "nonprojective": oracle_enumerate(n, "nonprojective"),
        }
        for n in SIZES
    }


def _oracle_logz(pot, trees):
    scores = np.array([tree_score(pot, t.heads) for t in trees])
    hi = scores.max()
    return float(hi + np.log(np.exp(scores - hi).sum()))


def _oracle_mu(pot, trees):
    n = pot.shape[1]
    scores = np.array([tree_score(pot, t.heads) for t in trees])
    w = np.exp(scores - scores.max())
    mu = np.zeros((n + 1, n))
    for t, wt in zip(trees, w):
        for j, h in enumerate(t.heads, start=1):
            mu[h, j - 1] += wt
    return mu / w.sum()


def test_criterion_1_oracle_equivalence_inference(random_instances, enumerated):
    started = time.perf_counter()
    worst_z = worst_mu = 0.0
    for n in SIZES:
        for pot in random_instances[n]:
            for space, logz_fn, mu_fn in (
                ("projective", log_partition_projective, arc_marginals_projective),
                ("nonprojective", log_partition_nonprojective, arc_marginals_nonprojective),
            ):
                trees = enumerated[n][space]
                ref_z = _oracle_logz(pot, trees)
                rel = abs(logz_fn(pot) - ref_z) / max(1.0, abs(ref_z))
                worst_z = max(worst_z, rel)
                err = np.abs(mu_fn(pot).mu - _oracle_mu(pot, trees)).max()
                worst_mu = max(worst_mu, err)
    elapsed = time.perf_counter() - started
    ok = worst_z <= 1e-8 and worst_mu <= 1e-8 and elapsed < 30.0
    _report(
        "criterion 1 (inference oracle equivalence)",
        ok,
        f"max logZ rel err {worst_z:.2e} (<=1e-8), max marginal err "
        f"{worst_mu:.2e} (<=1e-8), {elapsed:.1f}s (<30s)",
    )
    assert worst_z <= 1e-8
    assert worst_mu <= 1e-8
    assert elapsed < 30.0


def test_criterion_2_oracle_equivalence_decoding(random_instances, enumerated):
    started = time.perf_counter()
    worst = 0.0
    for n in SIZES:
        for pot in random_instances[n]:
            proj_best = max(
                tree_score(pot, t.heads) for t in enumerated[n]["projective"]
            )
            nonproj_best = max(
                tree_score(pot, t.heads) for t in enumerated[n]["nonprojective"]
            )
            e_tree, e_score = eisner_decode(pot)
            c_tree, c_score = cle_decode(pot)
            check_tree(e_tree.heads, projective=True)
            check_tree(c_tree.heads, projective=False)
            worst = max(worst, abs(e_score - proj_best), abs(c_score - nonproj_best))
    elapsed = time.perf_counter() - started
    ok = worst <= 1e-9 and elapsed < 30.0
    _report(
        "criterion 2 (decoding oracle equivalence)",
        ok,
        f"max score err {worst:.2e} (<=1e-9), all trees valid, {elapsed:.1f}s (<30s)",
    )
    assert worst <= 1e-9
    assert elapsed < 30.0


def test_criterion_3_gradient_check():
    from conftest import make_treebank

    started = time.perf_counter()
    rng = np.random.default_rng(777)
    worst = 0.0
    checked = 0
    for _ in range(20):
        n = int(rng.integers(1, 6))
        tags = [f"T{t}" for t in rng.integers(0, 3, size=n)]
        tb = make_treebank([tags])
        hp = Hyperparams(rounds=1, seed=0, alpha=float(rng.random()))
        trainer = Trainer(tb, hp, prior=PriorRules(pairs=frozenset({("T0", "T1")})))
        state = trainer.informed_init()
        state.wts.w[:] = rng.normal(0, 0.5, size=trainer.idx.size)
        cache = trainer.caches[0]
        tree, _ = eisner_decode(
            cache.full_matrix(state.wts.w, state.dec.log_theta, hp.alpha)
        )
        grad = trainer.grad_w_sentence(0, state)

        def loglik(w):
            enc = cache.encoder_matrix(w)
            return tree_score(enc, tree.heads) - log_partition_projective(enc)

        h = 1e-4
        for fid, analytic in grad.items():
            w_hi = state.wts.w.copy()
            w_lo = state.wts.w.copy()
            w_hi[fid] += h
            w_lo[fid] -= h
            fd = (loglik(w_hi) - loglik(w_lo)) / (2 * h)
            rel = abs(analytic - fd) / max(1.0, abs(analytic), abs(fd))
            worst = max(worst, rel)
            checked += 1
    elapsed = time.perf_counter() - started
    ok = worst <= 1e-5 and elapsed < 60.0
    _report(
        "criterion 3 (gradient finite differences)",
        ok,
        f"{checked} coordinates, max rel err {worst:.2e} (<=1e-5), "
        f"{elapsed:.1f}s (<60s)",
    )
    assert worst <= 1e-5
    assert elapsed < 60.0


def test_criterion_4_marginal_invariants():
    rng = np.random.default_rng(31337)
    worst_col = worst_total = worst_shift = 0.0
    for n in SIZES:
        for _ in range(25):
            pot = random_potentials(rng, n)
            for mu_fn, logz_fn in (
                (arc_marginals_projective, log_partition_projective),
                (arc_marginals_nonprojective, log_partition_nonprojective),
            ):
                marg = mu_fn(pot)
                marg.validate()
                mu = marg.mu
                assert np.all(mu >= -1e-9) and np.all(mu <= 1.0 + 1e-9)
                worst_col = max(worst_col, np.abs(mu.sum(axis=0) - 1.0).max())
                worst_total = max(worst_total, abs(float(mu.sum()) - n))
                c = 1.37
                shifted = np.where(np.isfinite(pot), pot + c, pot)
                worst_shift = max(
                    worst_shift,
                    abs(logz_fn(shifted) - (logz_fn(pot) + n * c)),
                    float(np.abs(mu_fn(shifted).mu - mu).max()),
                )
    ok = worst_col <= 1e-6 and worst_total <= 1e-6 and worst_shift <= 1e-9
    _report(
        "criterion 4 (marginal invariants)",
        ok,
        f"col-norm err {worst_col:.2e} (<=1e-6), total-mass err "
        f"{worst_total:.2e} (<=1e-6), shift err {worst_shift:.2e} (<=1e-9)",
    )
    assert worst_col <= 1e-6
    assert worst_total <= 1e-6
    assert worst_shift <= 1e-9


# -- synthetic-corpus criteria (5, 6, 7) ---------------------------------

TRAIN_ROUNDS = 5


@pytest.fixture(scope="module")
def synth_corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("accept")
    corpus = root / "synth.conllu"
    rules = root / "rules.txt"
    code = main([
        "synth", "--output", str(corpus), "--sentences", "500",
        "--max-len", "10", "--seed", "0", "--rules-out", str(rules),
    ])
    assert code == EXIT_OK
    return corpus, rules


@pytest.fixture(scope="module")
def synth_runs(synth_corpus):
    """Three training runs on the planted corpus: best-parse objective with
    and without the planted prior, and the soft variant."""
    corpus, _ = synth_corpus
    tb = load_conll(corpus)
    idx = build_index(tb)
    started = time.perf_counter()

    def run(alpha, prior, soft):
        hp = Hyperparams(alpha=alpha, rounds=TRAIN_ROUNDS, seed=0, soft_em=soft)
        trainer = Trainer(tb, hp, idx=idx, prior=prior)
        state = trainer.run()
        trees = parse_treebank(tb, state.wts, state.dec, trainer.prior, hp.alpha, idx)
        return directed_accuracy(trees, tb).dda_all, state

    from crfae.synthetic import PlantedGrammar

    planted = PlantedGrammar.skewed(4).rules()
    acc_plain, state_plain = run(0.0, PriorRules.empty(), soft=False)
    acc_prior, _ = run(1.0, planted, soft=False)
    acc_soft, _ = run(0.0, PriorRules.empty(), soft=True)
    elapsed = time.perf_counter() - started
    return {
        "tb": tb,
        "baseline": random_attachment_accuracy(tb),
        "plain": acc_plain,
        "prior": acc_prior,
        "soft": acc_soft,
        "history": state_plain.objective_history,
        "seconds": elapsed,
    }


def test_criterion_5_synthetic_grammar_recovery(synth_runs):
    r = synth_runs
    margin = r["plain"] - r["baseline"]
    ok = margin >= 0.15 and r["prior"] >= r["plain"] and r["seconds"] < 300.0
    _report(
        "criterion 5 (synthetic grammar recovery)",
        ok,
        f"baseline {r['baseline']:.3f}, alpha=0 {r['plain']:.3f} "
        f"(margin {margin:+.3f} >= +0.15), alpha=1+rules {r['prior']:.3f} "
        f"(>= alpha=0), {r['seconds']:.0f}s (<300s)",
    )
    assert margin >= 0.15
    assert r["prior"] >= r["plain"]
    assert r["seconds"] < 300.0


def test_criterion_6_viterbi_vs_soft_direction(synth_runs):
    r = synth_runs
    ok = r["plain"] >= r["soft"]
    _report(
        "criterion 6 (best-parse vs soft objective)",
        ok,
        f"best-parse {r['plain']:.3f} >= soft {r['soft']:.3f}",
    )
    assert r["plain"] >= r["soft"]


def test_objective_soft_monotonicity(synth_runs):
    # supporting train-module invariant on the acceptance corpus
    hist = synth_runs["history"]
    jumps = [hist[i + 1] - hist[i] for i in range(len(hist) - 1)]
    worst = max(jumps) if jumps else 0.0
    ok = worst <= 1e-3
    _report(
        "supporting invariant (objective trend)",
        ok,
        f"max round-over-round increase {worst:.2e} (<=1e-3) across {len(hist)} rounds",
    )
    assert worst <= 1e-3


def test_criterion_7_determinism(synth_corpus, tmp_path):
    corpus, _ = synth_corpus
    models, logs = [], []
    for k in (1, 2):
        model = tmp_path / f"model{k}.json"
        log = tmp_path / f"log{k}.jsonl"
        code = main([
            "train", "--input", str(corpus), "--model-out", str(model),
            "--rounds", "2", "--seed", "0", "--log", str(log),
        ])
        assert code == EXIT_OK
        models.append(model.read_bytes())
        logs.append([
            json.loads(ln)["objective"] for ln in log.read_text().splitlines()
        ])
    ok = models[0] == models[1] and logs[0] == logs[1]
    _report(
        "criterion 7 (determinism)",
        ok,
        f"model files byte-identical: {models[0] == models[1]}; "
        f"objective logs identical: {logs[0] == logs[1]}",
    )
    assert models[0] == models[1]
    assert logs[0] == logs[1]


# -- criterion 8: the documented UD pipeline -----------------------------


def _write_ud_fixture(path):
    """A small UD-style treebank: real UPOS categories, punctuation,
    comments, one multiword row, lengths straddling the short regime."""
    from crfae.synthetic import PlantedGrammar, generate_sentences

    grammar = PlantedGrammar(
        tags=("VERB", "NOUN", "DET", "ADP"),
        root_probs=(0.85, 0.05, 0.05, 0.05),
        child_probs=(
            (0.10, 0.55, 0.05, 0.30),
            (0.05, 0.15, 0.60, 0.20),
            (0.25, 0.25, 0.25, 0.25),
            (0.05, 0.85, 0.05, 0.05),
        ),
        headness=(1.0, 0.6, 0.02, 0.25),
        right_bias=0.65,
    )
    sentences = generate_sentences(60, 13, grammar, seed=9)
    with open(path, "w", encoding="utf-8") as fh:
        for sid, (tags, heads) in enumerate(sentences, start=1):
            fh.write(f"# sent_id = {sid}\n")
            if sid == 1:
                fh.write("1-2\tdunno\t_\t_\t_\t_\t_\t_\t_\t_\n")
            root_child = heads.index(0) + 1
            for pos, (tag, head) in enumerate(zip(tags, heads), start=1):
                fh.write(
                    f"{pos}\tw{pos}\t_\t{tag}\t_\t_\t{head}\t_\t_\t_\n"
                )
            n = len(tags)
            fh.write(f"{n + 1}\t.\t.\tPUNCT\t_\t_\t{root_child}\tpunct\t_\t_\n")
            fh.write("\n")


def test_criterion_8_ud_pipeline_end_to_end(tmp_path, capsys):
    treebank = tmp_path / "ud_sample.conllu"
    _write_ud_fixture(treebank)
    tag_map = tmp_path / "tags.map"
    tag_map.write_text(
        "".join(f"{t} {t}\n" for t in ("VERB", "NOUN", "DET", "ADP", "PUNCT"))
    )
    model = tmp_path / "ud_model.json"
    parsed = tmp_path / "ud_parsed.conllu"

    steps_ok = True
    steps_ok &= main([
        "train", "--input", str(treebank), "--model-out", str(model),
        "--max-len", "10", "--rounds", "3", "--alpha", "1.0",
        "--prior", "builtin", "--tag-map", str(tag_map), "--seed", "0",
    ]) == EXIT_OK
    steps_ok &= main([
        "parse", "--model", str(model), "--input", str(treebank),
        "--output", str(parsed),
    ]) == EXIT_OK
    steps_ok &= main([
        "eval", "--gold", str(treebank), "--pred", str(parsed),
    ]) == EXIT_OK
    out = capsys.readouterr().out
    has_regimes = "<= 10" in out and "all" in out

    # the same report, via the library, for the recorded detail line
    gold = load_conll(treebank)
    pred = load_conll(parsed)
    report = compare_treebanks(pred, gold)
    ok = steps_ok and has_regimes and report.total_short > 0 and report.total_all > report.total_short
    _report(
        "criterion 8 (UD pipeline end to end)",
        ok,
        f"train/parse/eval exit 0: {steps_ok}; report regimes short "
        f"{report.correct_short}/{report.total_short}, all "
        f"{report.correct_all}/{report.total_all} (no threshold asserted)",
    )
    assert steps_ok
    assert has_regimes
    assert report.total_short > 0
    assert report.total_all > report.total_short
