"""Versioned, self-contained JSON model files.

A model file carries everything parsing needs: the tag vocabulary, the
frozen feature index, the nonzero encoder weights, the decoder table, the
prior rules, the tag map and the hyperparameters used. The format is
human-readable on purpose; at POS-alphabet scale the files stay small.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass
from typing import Mapping, Optional, Union

import numpy as np

from .corpus import RESERVED_TAGS, TagVocab
from .features import FeatureIndex
from .model import DecoderTable, EncoderWeights, Hyperparams, PriorRules

MODEL_FORMAT_VERSION = 1


class ModelFileError(ValueError):
    """Unreadable, malformed, or incompatible model file."""


@dataclass
class LoadedModel:
    vocab: TagVocab
    idx: FeatureIndex
    wts: EncoderWeights
    dec: DecoderTable
    prior: PriorRules
    hp: Hyperparams
    tag_map: Optional[dict[str, str]]


def save_model(
    path: Union[str, os.PathLike],
    *,
    vocab: TagVocab,
    idx: FeatureIndex,
    wts: EncoderWeights,
    dec: DecoderTable,
    prior: PriorRules,
    hp: Hyperparams,
    tag_map: Optional[Mapping[str, str]] = None,
) -> None:
    weights = [
        [int(i), float(v)] for i, v in enumerate(wts.w) if v != 0.0
    ]
    payload = {
        "format_version": MODEL_FORMAT_VERSION,
        "hyperparams": asdict(hp),
        "vocab": {
            "tags": list(vocab.tags),
            "punct_tags": sorted(vocab.punct_tags),
        },
        "feature_index": [[key, fid] for key, fid in idx.items()],
        "weights": weights,
        "theta": dec.theta.tolist(),
        "prior_rules": sorted(list(pair) for pair in prior.pairs),
        "tag_map": dict(tag_map) if tag_map else None,
    }
    with open(os.fspath(path), "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")


def load_model(path: Union[str, os.PathLike]) -> LoadedModel:
    try:
        with open(os.fspath(path), encoding="utf-8") as fh:
            payload = json.load(fh)
    except OSError as exc:
        raise ModelFileError(f"cannot read model file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ModelFileError(f"model file {path} is not valid JSON: {exc}") from exc

    version = payload.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise ModelFileError(
            f"model file {path} has format version {version!r}, "
            f"this build reads version {MODEL_FORMAT_VERSION}"
        )
    try:
        tags = payload["vocab"]["tags"]
        if tuple(tags[: len(RESERVED_TAGS)]) != RESERVED_TAGS:
            raise ModelFileError(f"model file {path} has unexpected reserved tags")
        vocab = TagVocab(
            tags[len(RESERVED_TAGS):], punct_tags=payload["vocab"]["punct_tags"]
        )
        idx = FeatureIndex.from_pairs(
            (key, int(fid)) for key, fid in payload["feature_index"]
        )
        w = np.zeros(idx.size)
        for i, v in payload["weights"]:
            w[int(i)] = float(v)
        wts = EncoderWeights(w=w, adagrad_accum=np.zeros(idx.size))
        dec = DecoderTable(np.array(payload["theta"], dtype=float))
        prior = PriorRules(
            pairs=frozenset((h, c) for h, c in payload["prior_rules"])
        )
        hp = Hyperparams(**payload["hyperparams"])
        tag_map = payload.get("tag_map")
    except ModelFileError:
        raise
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise ModelFileError(f"model file {path} is malformed: {exc}") from exc
    if dec.size != len(vocab):
        raise ModelFileError(
            f"model file {path}: theta is {dec.size}x{dec.size} but the "
            f"vocabulary has {len(vocab)} tags"
        )
    return LoadedModel(
        vocab=vocab, idx=idx, wts=wts, dec=dec, prior=prior, hp=hp, tag_map=tag_map
    )
