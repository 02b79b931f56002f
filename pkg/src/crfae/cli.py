"""Command-line front door: train models, parse and evaluate corpora,
and generate synthetic treebanks.

Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

from .corpus import (
    DEFAULT_PUNCT_TAGS,
    CorpusError,
    Treebank,
    filter_by_length,
    load_conll,
    remap_to_vocab,
    write_conll,
)
from .decode import DecodeError, parse_treebank
from .evaluation import EvalError, compare_treebanks
from .features import FeatureError, build_index
from .inference import InferenceError
from .model import Hyperparams, ModelError, PriorRules
from .modelfile import ModelFileError, load_model, save_model
from .synthetic import PlantedGrammar, generate_sentences, write_sentences
from .train import TrainingError, coordinate_descent

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2

_DATA_ERRORS = (
    CorpusError,
    DecodeError,
    EvalError,
    FeatureError,
    InferenceError,
    ModelError,
    ModelFileError,
    TrainingError,
    OSError,
)


class _ArgumentParser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; this artifact reserves 2 for data
    errors, so remap usage failures to exit code 1."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _load_tag_map(path: Optional[str]) -> Optional[dict[str, str]]:
    if path is None:
        return None
    mapping: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            cols = line.split()
            if len(cols) != 2:
                raise CorpusError(f"{path}:{lineno}: expected 'FINE UNIVERSAL', got {line!r}")
            mapping[cols[0]] = cols[1]
    return mapping


def _resolve_prior(choice: str) -> PriorRules:
    if choice == "builtin":
        return PriorRules.universal()
    if choice == "none":
        return PriorRules.empty()
    return PriorRules.from_file(choice)


def _punct_tags(args: argparse.Namespace) -> tuple[str, ...]:
    return () if args.score_punct else DEFAULT_PUNCT_TAGS


def _load_treebank(args: argparse.Namespace, path: str) -> Treebank:
    return load_conll(path, fmt=args.format, punct_tags=_punct_tags(args))


def cmd_train(args: argparse.Namespace) -> int:
    tb = _load_treebank(args, args.input)
    if args.max_len > 0:
        tb = filter_by_length(tb, args.max_len)
    prior = _resolve_prior(args.prior)
    tag_map = _load_tag_map(args.tag_map)
    hp = Hyperparams(
        lambda_=args.reg_lambda,
        alpha=args.alpha,
        learning_rate=args.learning_rate,
        smoothing_eps=args.smoothing,
        rounds=args.rounds,
        sgd_epochs=args.sgd_epochs,
        em_iters=args.em_iters,
        seed=args.seed,
        soft_em=args.soft_em,
    )
    idx = build_index(tb)
    log_stream = open(args.log, "w", encoding="utf-8") if args.log else None
    try:
        state = coordinate_descent(
            tb, hp, idx=idx, prior=prior, tag_map=tag_map, log_stream=log_stream
        )
    finally:
        if log_stream is not None:
            log_stream.close()
    save_model(
        args.model_out,
        vocab=tb.vocab,
        idx=idx,
        wts=state.wts,
        dec=state.dec,
        prior=prior,
        hp=hp,
        tag_map=tag_map,
    )
    final = state.objective_history[-1] if state.objective_history else float("nan")
    print(
        f"trained on {len(tb.sentences)} sentences | {idx.size} features | "
        f"rounds {hp.rounds} | final objective {final:.6f}"
    )
    print(f"model written to {args.model_out}")
    return EXIT_OK


def cmd_parse(args: argparse.Namespace) -> int:
    model = load_model(args.model)
    raw = _load_treebank(args, args.input)
    tb, unseen = remap_to_vocab(raw, model.vocab)
    if unseen:
        print(
            f"warning: {len(unseen)} tags unseen in training mapped to <unk>: "
            f"{' '.join(sorted(unseen))}",
            file=sys.stderr,
        )
    trees = parse_treebank(
        tb,
        model.wts,
        model.dec,
        model.prior,
        model.hp.alpha,
        model.idx,
        decoder=args.decoder,
        tag_map=model.tag_map,
    )
    heads = [list(t.heads) for t in trees]
    if args.output == "-":
        write_conll(raw, sys.stdout, pred_heads=heads)
    else:
        write_conll(raw, args.output, pred_heads=heads)
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    gold = _load_treebank(args, args.gold)
    pred = _load_treebank(args, args.pred)
    report = compare_treebanks(pred, gold, max_len=args.max_len)
    print(report.format_table())
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            fh.write(report.to_json() + "\n")
    return EXIT_OK


def cmd_synth(args: argparse.Namespace) -> int:
    try:
        grammar = PlantedGrammar.skewed(
            args.tagset_size, bias=args.bias, right_bias=args.right_bias
        )
        sentences = generate_sentences(args.sentences, args.max_len, grammar, args.seed)
    except ValueError as exc:
        print(f"crfae synth: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    write_sentences(sentences, args.output)
    if args.rules_out:
        with open(args.rules_out, "w", encoding="utf-8") as fh:
            for head, child in sorted(grammar.preferred_pairs()):
                fh.write(f"{head} {child}\n")
    print(f"wrote {len(sentences)} sentences to {args.output}")
    return EXIT_OK


def build_parser() -> _ArgumentParser:
    parser = _ArgumentParser(
        prog="crfae",
        description="Unsupervised dependency parsing with a CRF autoencoder.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common_io(p: _ArgumentParser) -> None:
        p.add_argument("--format", choices=("conllu", "conllx"), default="conllu")
        p.add_argument(
            "--score-punct",
            action="store_true",
            help="count punctuation tokens for scoring and length regimes",
        )

    p_train = sub.add_parser("train", help="learn a model from a CoNLL treebank")
    p_train.add_argument("--input", required=True)
    p_train.add_argument("--model-out", required=True)
    p_train.add_argument(
        "--max-len",
        type=int,
        default=10,
        help="keep training sentences up to this scored length (0 = no filter)",
    )
    p_train.add_argument("--alpha", type=float, default=1.0)
    p_train.add_argument("--lambda", dest="reg_lambda", type=float, default=1e-4)
    p_train.add_argument("--learning-rate", type=float, default=0.1)
    p_train.add_argument("--smoothing", type=float, default=0.1)
    p_train.add_argument("--rounds", type=int, default=20)
    p_train.add_argument("--sgd-epochs", type=int, default=2)
    p_train.add_argument("--em-iters", type=int, default=2)
    p_train.add_argument("--seed", type=int, default=0)
    p_train.add_argument(
        "--prior",
        default="builtin",
        help="'builtin' (universal rules), 'none', or a rules file of HEAD CHILD lines",
    )
    p_train.add_argument("--tag-map", help="file mapping fine tags to universal categories")
    p_train.add_argument("--log", help="JSON-lines training log (round, objective, seconds)")
    p_train.add_argument(
        "--soft-em",
        action="store_true",
        help="marginal-based training variant (for comparison; trains worse)",
    )
    common_io(p_train)
    p_train.set_defaults(func=cmd_train)

    p_parse = sub.add_parser("parse", help="parse a corpus with a trained model")
    p_parse.add_argument("--model", required=True)
    p_parse.add_argument("--input", required=True)
    p_parse.add_argument("--output", required=True, help="output CoNLL path, or - for stdout")
    p_parse.add_argument("--decoder", choices=("eisner", "cle"), default="eisner")
    p_parse.add_argument("--seed", type=int, default=0, help="accepted for uniformity; parsing is deterministic")
    common_io(p_parse)
    p_parse.set_defaults(func=cmd_parse)

    p_eval = sub.add_parser("eval", help="directed accuracy of predictions against gold")
    p_eval.add_argument("--gold", required=True)
    p_eval.add_argument("--pred", required=True)
    p_eval.add_argument("--max-len", type=int, default=10, help="short-regime length cutoff")
    p_eval.add_argument("--json", help="also write the report as JSON to this path")
    p_eval.add_argument("--seed", type=int, default=0, help="accepted for uniformity; evaluation is deterministic")
    common_io(p_eval)
    p_eval.set_defaults(func=cmd_eval)

    p_synth = sub.add_parser("synth", help="write a synthetic treebank with planted structure")
    p_synth.add_argument("--output", required=True)
    p_synth.add_argument("--sentences", type=int, default=500)
    p_synth.add_argument("--max-len", type=int, default=10)
    p_synth.add_argument("--tagset-size", type=int, default=4)
    p_synth.add_argument("--bias", type=float, default=0.75)
    p_synth.add_argument("--right-bias", type=float, default=0.65)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--rules-out", help="also write the planted preferences as a rules file")
    p_synth.set_defaults(func=cmd_synth)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _DATA_ERRORS as exc:
        print(f"crfae {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
