"""Mini-batch SGD training with validation-accuracy checkpointing.

Plain gradient descent (optional global-norm clipping), a per-epoch seeded
shuffle, and an epoch cap plus optional wallclock cap. After every epoch the
validation accuracy is measured (first-token accuracy for the summary
objective, class accuracy for the classification objective) and the best
checkpoint wins; ties keep the earlier epoch. Deterministic per seed under
the single-threaded numerics the package pins at import.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ..textproc import ClassMap, VerbLexicon, label_record
from . import network, streams
from .params import ModelParams, init_params
from .vocab import END, PAD, START

DEFAULT_VOCAB_SIZE = 10000

VARIANTS = ("attendgru", "ast_attendgru")
OBJECTIVES = ("summary", "action_word")


@dataclass(frozen=True)
class TrainConfig:
    epochs_max: int = 10
    wallclock_max: float | None = None  # seconds
    batch_size: int = 16
    learning_rate: float = 1.0
    hidden: int = 64
    emb: int = 32
    max_code_len: int = 100
    max_ast_len: int = 150
    max_summary_len: int = 13
    seed: int = 0
    mode: str = "standard"
    variant: str = "attendgru"
    objective: str = "summary"
    grad_clip: float | None = 5.0
    vocab_max_size: int = DEFAULT_VOCAB_SIZE

    def __post_init__(self):
        if self.epochs_max < 1:
            raise ValueError("epochs_max must be >= 1")
        for name in ("batch_size", "hidden", "emb", "max_code_len", "max_ast_len", "max_summary_len", "vocab_max_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.mode not in streams.MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.objective not in OBJECTIVES:
            raise ValueError(f"unknown objective {self.objective!r}")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.wallclock_max is not None and self.wallclock_max <= 0:
            raise ValueError("wallclock_max must be positive")
        if self.grad_clip is not None and self.grad_clip <= 0:
            raise ValueError("grad_clip must be positive")


def build_vocabs(train_records, config: TrainConfig) -> network.Vocabs:
    """Vocabularies from the training split only, per condition."""
    code = streams.vocab_for_field(train_records, "code", config.vocab_max_size, config.mode)
    ast = None
    if config.variant == "ast_attendgru":
        ast = streams.vocab_for_field(train_records, "ast", config.vocab_max_size, config.mode)
    summary = streams.vocab_for_field(train_records, "summary", config.vocab_max_size, config.mode)
    return network.Vocabs(code=code, ast=ast, summary=summary)


def _summary_targets(records, config, vocabs):
    """Teacher-forcing arrays: Yin (B,S+1), Ytgt (B,S+1), mask (B,S+1)."""
    S = config.max_summary_len
    B = len(records)
    Yin = np.full((B, S + 1), PAD, dtype=np.int64)
    Ytgt = np.full((B, S + 1), PAD, dtype=np.int64)
    for b, rec in enumerate(records):
        ids = [vocabs.summary.id_of(t) for t in rec.summary_tokens[:S]]
        Yin[b, 0] = START
        Yin[b, 1 : 1 + len(ids)] = ids
        Ytgt[b, : len(ids)] = ids
        Ytgt[b, len(ids)] = END
    mask = (Ytgt != PAD).astype(float)
    return Yin, Ytgt, mask


def _source_arrays(records, config, vocabs):
    Xc = np.array([network.record_ids(r, config, vocabs)[0] for r in records], dtype=np.int64)
    Xa = None
    if config.variant == "ast_attendgru":
        Xa = np.array([network.record_ids(r, config, vocabs)[1] for r in records], dtype=np.int64)
    return Xc, Xa


def _val_accuracy(params, config, val_records, vocabs, gold_first_ids=None, gold_classes=None):
    """First-token accuracy (summary) or class accuracy (action_word)."""
    hits = 0
    for lo in range(0, len(val_records), config.batch_size):
        chunk = val_records[lo : lo + config.batch_size]
        logits = network.first_step_logits(params, config, chunk, vocabs)
        pred = np.argmax(logits, axis=1)
        if gold_first_ids is not None:
            gold = gold_first_ids[lo : lo + len(chunk)]
        else:
            gold = gold_classes[lo : lo + len(chunk)]
        hits += int(np.sum(pred == gold))
    return hits / len(val_records)


def _clip(grads, limit):
    total = 0.0
    for g in grads.values():
        total += float(np.sum(g * g))
    norm = np.sqrt(total)
    if norm > limit:
        scale = limit / norm
        for g in grads.values():
            g *= scale
    return norm


def train(records, split, config: TrainConfig, lexicon: VerbLexicon, class_map: ClassMap, vocabs: network.Vocabs | None = None):
    """Returns (best ModelParams, per-epoch log list)."""
    train_records = split.select(records, "train")
    val_records = split.select(records, "val")
    if not train_records or not val_records:
        raise ValueError("train and validation splits must both be nonempty")
    if vocabs is None:
        vocabs = build_vocabs(train_records, config)
    if config.variant == "ast_attendgru" and vocabs.ast is None:
        raise ValueError("variant needs an ast vocabulary")

    if config.objective == "action_word":
        n_out = class_map.k + 1
        classes = class_map.all_class_names
    else:
        n_out = len(vocabs.summary)
        classes = None
    params = init_params(
        config.variant,
        config.objective,
        config.mode,
        config.emb,
        config.hidden,
        len(vocabs.code),
        len(vocabs.ast) if vocabs.ast is not None else 0,
        len(vocabs.summary),
        n_out,
        config.seed,
        vocab_hashes=vocabs.hashes(),
        classes=classes,
        lengths={
            "max_code_len": config.max_code_len,
            "max_ast_len": config.max_ast_len,
            "max_summary_len": config.max_summary_len,
        },
    )

    Xc, Xa = _source_arrays(train_records, config, vocabs)
    Xc_val_gold_first = None
    gold_classes_val = None
    if config.objective == "summary":
        Yin, Ytgt, tmask = _summary_targets(train_records, config, vocabs)
        Xc_val_gold_first = np.array(
            [vocabs.summary.id_of(r.summary_tokens[0]) for r in val_records], dtype=np.int64
        )
    else:
        cls = np.array([label_record(r, lexicon, class_map) for r in train_records], dtype=np.int64)
        Yin = np.full((len(train_records), 1), START, dtype=np.int64)
        Ytgt = cls[:, None]
        tmask = np.ones((len(train_records), 1))
        gold_classes_val = np.array(
            [label_record(r, lexicon, class_map) for r in val_records], dtype=np.int64
        )

    log = []
    best = None
    best_acc = -1.0
    t0 = time.monotonic()
    stop = False
    for epoch in range(config.epochs_max):
        order = np.random.default_rng([config.seed, epoch]).permutation(len(train_records))
        loss_sum = 0.0
        unit_sum = 0.0
        for bi, lo in enumerate(range(0, len(order), config.batch_size)):
            idx = order[lo : lo + config.batch_size]
            bXa = Xa[idx] if Xa is not None else None
            loss, grads = network.loss_and_grads(
                params, Xc[idx], bXa, Yin[idx], Ytgt[idx], tmask[idx]
            )
            if not np.isfinite(loss):
                raise RuntimeError(f"non-finite loss at epoch {epoch} batch {bi}")
            n_units = float(tmask[idx].sum())
            loss_sum += loss * n_units
            unit_sum += n_units
            if config.grad_clip is not None:
                _clip(grads, config.grad_clip)
            if config.learning_rate:
                for name, arr in params.arrays.items():
                    if name in grads:
                        arr -= config.learning_rate * grads[name]
            if config.wallclock_max is not None and time.monotonic() - t0 > config.wallclock_max:
                stop = True
                break
        acc = _val_accuracy(
            params, config, val_records, vocabs,
            gold_first_ids=Xc_val_gold_first, gold_classes=gold_classes_val,
        )
        log.append(
            {
                "epoch": epoch,
                "train_loss": loss_sum / unit_sum if unit_sum else float("nan"),
                "val_accuracy": acc,
                "seconds": round(time.monotonic() - t0, 3),
            }
        )
        if acc > best_acc:
            best_acc = acc
            best = params.copy()
            best.header["best_epoch"] = epoch
        if stop:
            break
    best.header["val_accuracy"] = best_acc
    return best, log
