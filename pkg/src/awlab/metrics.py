"""Classification metrics, corpus BLEU, and action-word-partitioned BLEU.

Conventions, stamped into every report because they are where cross-paper
comparisons usually go wrong:
  - precision/recall are 0 when their denominator is 0; F1 is 0 when p+r=0;
  - macro averages run over every matrix class ("other" included) unless
    exclude_other is set; weighted averages use gold frequencies;
  - BLEU is corpus-level with clipped counts pooled over all pairs, geometric
    mean over n=1..4, brevity penalty exp(1-r/c) for c<r, and add-one
    smoothing on the n>=2 precisions only (an unsmoothed zero unigram
    precision zeroes the score).
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .textproc import ClassMap, VerbLexicon, extract_action_word

BLEU_VARIANT = "corpus-bleu4-addone-smooth-n2plus"

__all__ = [
    "ConfusionMatrix",
    "EvaluationReport",
    "PartitionedBleuReport",
    "confusion",
    "precision_recall_f",
    "per_word_recall",
    "bleu",
    "aw_partitioned_bleu",
    "render_report_table",
    "confusion_to_tsv",
    "BLEU_VARIANT",
]


@dataclass(frozen=True)
class ConfusionMatrix:
    classes: tuple[str, ...]
    counts: np.ndarray  # rows = gold, columns = predicted

    def __post_init__(self):
        k = len(self.classes)
        if self.counts.shape != (k, k):
            raise ValueError("counts shape must match the class list")
        if np.any(self.counts < 0):
            raise ValueError("counts must be nonnegative")

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def _class_names(class_map) -> tuple[str, ...]:
    if isinstance(class_map, ClassMap):
        return class_map.all_class_names
    return tuple(class_map)


def confusion(gold, pred, class_map) -> ConfusionMatrix:
    """Tally (gold, predicted) class-index pairs into a matrix."""
    names = _class_names(class_map)
    gold = list(gold)
    pred = list(pred)
    if not gold or len(gold) != len(pred):
        raise ValueError("gold and predicted id lists must be nonempty and equal length")
    k = len(names)
    counts = np.zeros((k, k), dtype=np.int64)
    for g, p in zip(gold, pred):
        if not (0 <= g < k and 0 <= p < k):
            raise ValueError(f"class id out of range: gold={g} pred={p} (k={k})")
        counts[g, p] += 1
    return ConfusionMatrix(classes=names, counts=counts)


@dataclass(frozen=True)
class PerClass:
    name: str
    precision: float
    recall: float
    f1: float
    gold_count: int


@dataclass(frozen=True)
class EvaluationReport:
    per_class: tuple[PerClass, ...]
    averaging: str  # which aggregate is the headline
    precision: float
    recall: float
    f1: float
    macro: tuple[float, float, float]
    weighted: tuple[float, float, float]
    exclude_other: bool
    setting: str = ""
    condition: str = ""

    def to_dict(self) -> dict:
        return {
            "setting": self.setting,
            "condition": self.condition,
            "averaging": self.averaging,
            "exclude_other": self.exclude_other,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "macro": list(self.macro),
            "weighted": list(self.weighted),
            "per_class": [
                {
                    "class": c.name,
                    "precision": c.precision,
                    "recall": c.recall,
                    "f1": c.f1,
                    "gold_count": c.gold_count,
                }
                for c in self.per_class
            ],
        }


def _f1(p: float, r: float) -> float:
    return 2 * p * r / (p + r) if p + r else 0.0


def precision_recall_f(
    matrix: ConfusionMatrix,
    averaging: str = "macro",
    exclude_other: bool = False,
    setting: str = "",
    condition: str = "",
) -> EvaluationReport:
    """Per-class and aggregate precision/recall/F1 from a confusion matrix.

    exclude_other drops the trailing class from both averages (it stays in
    the per-class rows); use it when "other" is a filler class, as in the
    two-class diagnostic setting.
    """
    if averaging not in ("macro", "weighted"):
        raise ValueError(f"unknown averaging {averaging!r}")
    if matrix.total == 0:
        raise ValueError("empty confusion matrix")
    counts = matrix.counts
    rows = counts.sum(axis=1)
    cols = counts.sum(axis=0)
    per = []
    for i, name in enumerate(matrix.classes):
        d = float(counts[i, i])
        p = d / cols[i] if cols[i] else 0.0
        r = d / rows[i] if rows[i] else 0.0
        per.append(PerClass(name, p, r, _f1(p, r), int(rows[i])))

    idx = list(range(len(per)))
    if exclude_other:
        idx = idx[:-1]
        if not idx:
            raise ValueError("nothing left to average after excluding the other class")
    mp = float(np.mean([per[i].precision for i in idx]))
    mr = float(np.mean([per[i].recall for i in idx]))
    mf = float(np.mean([per[i].f1 for i in idx]))
    wsum = float(sum(rows[i] for i in idx))
    if wsum:
        wp = float(sum(per[i].precision * rows[i] for i in idx) / wsum)
        wr = float(sum(per[i].recall * rows[i] for i in idx) / wsum)
        wf = float(sum(per[i].f1 * rows[i] for i in idx) / wsum)
    else:
        wp = wr = wf = 0.0
    headline = (mp, mr, mf) if averaging == "macro" else (wp, wr, wf)
    return EvaluationReport(
        per_class=tuple(per),
        averaging=averaging,
        precision=headline[0],
        recall=headline[1],
        f1=headline[2],
        macro=(mp, mr, mf),
        weighted=(wp, wr, wf),
        exclude_other=exclude_other,
        setting=setting,
        condition=condition,
    )


def per_word_recall(matrix: ConfusionMatrix):
    """(stem, gold count, recall) rows, most frequent gold first."""
    if matrix.total == 0:
        raise ValueError("empty confusion matrix")
    rows = matrix.counts.sum(axis=1)
    out = []
    for i, name in enumerate(matrix.classes):
        recall = float(matrix.counts[i, i]) / rows[i] if rows[i] else 0.0
        out.append((name, int(rows[i]), recall))
    out.sort(key=lambda t: (-t[1], t[0]))
    return out


def _ngrams(tokens, n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu(candidates, references, max_n: int = 4) -> float:
    """Corpus BLEU in [0, 1]; see the module docstring for the variant."""
    candidates = [list(c) for c in candidates]
    references = [list(r) for r in references]
    if not candidates or len(candidates) != len(references):
        raise ValueError("need equally many candidates and references, at least one pair")
    if max_n < 1:
        raise ValueError("max_n must be >= 1")
    c_len = sum(len(c) for c in candidates)
    r_len = sum(len(r) for r in references)
    if c_len == 0:
        return 0.0
    log_sum = 0.0
    for n in range(1, max_n + 1):
        match = 0
        total = 0
        for cand, ref in zip(candidates, references):
            cc = _ngrams(cand, n)
            rc = _ngrams(ref, n)
            total += sum(cc.values())
            match += sum(min(cnt, rc[g]) for g, cnt in cc.items())
        if n == 1:
            if match == 0:
                return 0.0
            p = match / total
        else:
            p = (match + 1) / (total + 1)
        log_sum += math.log(p)
    bp = 1.0 if c_len > r_len else math.exp(1.0 - r_len / c_len)
    return bp * math.exp(log_sum / max_n)


@dataclass(frozen=True)
class PartitionedBleuReport:
    bleu_default: float
    bleu_aw_correct: float | None
    bleu_aw_incorrect: float | None
    bleu_aw_forced: float | None
    n_correct: int
    n_incorrect: int
    n_excluded: int
    bleu_variant: str = BLEU_VARIANT
    per_class_sizes: dict | None = None  # ref class -> [n_correct, n_incorrect]

    def to_dict(self) -> dict:
        out = {
            "bleu_variant": self.bleu_variant,
            "bleu_default": self.bleu_default,
            "n_correct": self.n_correct,
            "n_incorrect": self.n_incorrect,
            "n_excluded": self.n_excluded,
        }
        for key in ("bleu_aw_correct", "bleu_aw_incorrect", "bleu_aw_forced"):
            val = getattr(self, key)
            if val is not None:
                out[key] = val
        if self.per_class_sizes is not None:
            out["per_class_sizes"] = self.per_class_sizes
        return out


def _strip_aw(tokens, lexicon):
    """(tokens without the extracted action word, stem or None)."""
    tokens = list(tokens)
    label = extract_action_word(tokens, lexicon)
    if label is None:
        return tokens, None
    out = tokens[: label.position - 1] + tokens[label.position :]
    return out, label.stem


def aw_partitioned_bleu(
    records,
    predictions,
    forced_predictions,
    lexicon: VerbLexicon,
    class_map: ClassMap | None = None,
) -> PartitionedBleuReport:
    """BLEU with action words removed, split by action-word correctness.

    predictions maps record id -> predicted tokens and must cover every
    record; forced_predictions maps record id -> forced-decode tokens and
    must cover the AW-incorrect subset. Records whose reference has no
    extractable action word are excluded and counted. A prediction with no
    extractable action word is scored as AW-incorrect with nothing removed.
    """
    res_c, ref_c = [], []
    res_i, ref_i = [], []
    res_f, ref_f = [], []
    per_class: dict[str, list[int]] = {}
    excluded = 0
    for rec in records:
        if rec.id not in predictions:
            raise ValueError(f"missing prediction for record {rec.id}")
        ref_stripped, ref_stem = _strip_aw(rec.summary_tokens, lexicon)
        if ref_stem is None:
            excluded += 1
            continue
        pred_stripped, pred_stem = _strip_aw(predictions[rec.id], lexicon)
        correct = pred_stem is not None and pred_stem == ref_stem
        if class_map is not None:
            name = class_map.all_class_names[class_map.class_index(ref_stem)]
            per_class.setdefault(name, [0, 0])[0 if correct else 1] += 1
        if correct:
            res_c.append(pred_stripped)
            ref_c.append(ref_stripped)
        else:
            if rec.id not in forced_predictions:
                raise ValueError(f"missing forced prediction for AW-incorrect record {rec.id}")
            res_i.append(pred_stripped)
            ref_i.append(ref_stripped)
            forced_stripped, _ = _strip_aw(forced_predictions[rec.id], lexicon)
            res_f.append(forced_stripped)
            ref_f.append(ref_stripped)
    if not res_c and not res_i:
        raise ValueError("no records with an extractable reference action word")
    return PartitionedBleuReport(
        bleu_default=bleu(res_c + res_i, ref_c + ref_i),
        bleu_aw_correct=bleu(res_c, ref_c) if res_c else None,
        bleu_aw_incorrect=bleu(res_i, ref_i) if res_i else None,
        bleu_aw_forced=bleu(res_f, ref_f) if res_f else None,
        n_correct=len(res_c),
        n_incorrect=len(res_i),
        n_excluded=excluded,
        per_class_sizes=dict(sorted(per_class.items())) if class_map is not None else None,
    )


def render_report_table(report: EvaluationReport) -> str:
    """Aligned text table: per-class rows plus the aggregate lines."""
    name_w = max([len(c.name) for c in report.per_class] + [len("weighted")])
    lines = [
        f"setting={report.setting or '-'} condition={report.condition or '-'} "
        f"averaging={report.averaging} exclude_other={str(report.exclude_other).lower()}",
        f"{'class':<{name_w}}  {'gold':>6}  {'prec':>6}  {'rec':>6}  {'f1':>6}",
    ]
    for c in report.per_class:
        lines.append(
            f"{c.name:<{name_w}}  {c.gold_count:>6}  {c.precision:>6.3f}  {c.recall:>6.3f}  {c.f1:>6.3f}"
        )
    mp, mr, mf = report.macro
    wp, wr, wf = report.weighted
    lines.append(f"{'macro':<{name_w}}  {'':>6}  {mp:>6.3f}  {mr:>6.3f}  {mf:>6.3f}")
    lines.append(f"{'weighted':<{name_w}}  {'':>6}  {wp:>6.3f}  {wr:>6.3f}  {wf:>6.3f}")
    return "\n".join(lines) + "\n"


def confusion_to_tsv(matrix: ConfusionMatrix) -> str:
    """TSV with a header row of predicted classes; rows are gold classes."""
    lines = ["gold\\pred\t" + "\t".join(matrix.classes)]
    for i, name in enumerate(matrix.classes):
        lines.append(name + "\t" + "\t".join(str(int(x)) for x in matrix.counts[i]))
    return "\n".join(lines) + "\n"


def report_jsonl_line(report: EvaluationReport, extra: dict | None = None) -> str:
    obj = report.to_dict()
    if extra:
        obj.update(extra)
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))
