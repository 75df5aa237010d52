"""Metric oracles: confusion/PRF, corpus BLEU, and the partitioned variant."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from awlab import metrics
from awlab.corpus import FunctionRecord
from awlab.metrics import (
    ConfusionMatrix,
    aw_partitioned_bleu,
    bleu,
    confusion,
    confusion_to_tsv,
    per_word_recall,
    precision_recall_f,
    render_report_table,
)
from awlab.textproc import build_class_map, default_lexicon

LEX = default_lexicon()


class TestConfusion:
    def test_row_sums_are_gold_frequencies(self):
        m = confusion([0, 0, 1, 1, 2], [0, 1, 1, 1, 0], ["a", "b", "other"])
        assert m.counts.sum(axis=1).tolist() == [2, 2, 1]
        assert m.total == 5

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError, match="out of range"):
            confusion([0, 3], [0, 0], ["a", "b", "other"])

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError, match="equal length"):
            confusion([0, 1], [0], ["a", "b"])
        with pytest.raises(ValueError, match="nonempty"):
            confusion([], [], ["a", "b"])

    def test_tsv_layout(self):
        m = confusion([0, 1], [1, 1], ["x", "y"])
        text = confusion_to_tsv(m)
        lines = text.strip().split("\n")
        assert lines[0] == "gold\\pred\tx\ty"
        assert lines[1] == "x\t0\t1"
        assert lines[2] == "y\t0\t1"


class TestPrecisionRecallF:
    def _two_class(self):
        # gold [A,A,B,B] pred [A,B,B,B]: pA=1 rA=.5, pB=2/3 rB=1
        return confusion([0, 0, 1, 1], [0, 1, 1, 1], ["A", "B"])

    def test_hand_oracle(self):
        rep = precision_recall_f(self._two_class())
        a, b = rep.per_class
        assert (a.precision, a.recall) == (1.0, 0.5)
        assert a.f1 == pytest.approx(2 / 3)
        assert (b.precision, b.recall) == (pytest.approx(2 / 3), 1.0)
        assert b.f1 == pytest.approx(0.8)
        assert rep.f1 == pytest.approx((2 / 3 + 0.8) / 2)
        assert rep.macro[2] == rep.f1
        assert rep.weighted[2] == pytest.approx((2 / 3 + 0.8) / 2)  # equal gold counts

    def test_zero_denominator_convention(self):
        # class b never gold and never predicted: p = r = f = 0
        m = confusion([0, 0], [0, 0], ["a", "b"])
        rep = precision_recall_f(m)
        assert rep.per_class[1] == metrics.PerClass("b", 0.0, 0.0, 0.0, 0)
        assert rep.macro[2] == pytest.approx(0.5)

    def test_exclude_other(self):
        m = confusion([0, 1, 2, 2], [0, 1, 0, 1], ["a", "b", "other"])
        full = precision_recall_f(m)
        trimmed = precision_recall_f(m, exclude_other=True)
        assert len(full.per_class) == len(trimmed.per_class) == 3
        assert trimmed.exclude_other
        # "other" has recall 0 here, so dropping it raises the macro mean
        assert trimmed.f1 > full.f1
        assert trimmed.macro[0] == pytest.approx((0.5 + 0.5) / 2)

    def test_exclude_other_needs_leftover(self):
        m = confusion([0], [0], ["other"])
        with pytest.raises(ValueError, match="nothing left"):
            precision_recall_f(m, exclude_other=True)

    def test_weighted_headline(self):
        m = confusion([0, 0, 0, 1], [0, 0, 1, 1], ["a", "b"])
        rep = precision_recall_f(m, averaging="weighted")
        assert rep.averaging == "weighted"
        assert rep.f1 == rep.weighted[2] != rep.macro[2]

    def test_unknown_averaging(self):
        with pytest.raises(ValueError, match="unknown averaging"):
            precision_recall_f(self._two_class(), averaging="micro")

    def test_class_permutation_invariance(self):
        # relabeling the classes permutes per-class rows, not the macro value
        m1 = confusion([0, 0, 1, 1], [0, 1, 1, 1], ["A", "B"])
        m2 = confusion([1, 1, 0, 0], [1, 0, 0, 0], ["B", "A"])
        r1 = precision_recall_f(m1)
        r2 = precision_recall_f(m2)
        assert r1.macro == pytest.approx(r2.macro)

    def test_per_word_recall_ordering(self):
        m = confusion([0, 1, 1, 2, 2], [0, 1, 0, 2, 2], ["rare", "mid", "big"])
        rows = per_word_recall(m)
        assert [r[0] for r in rows] == ["big", "mid", "rare"]
        assert rows[0] == ("big", 2, 1.0)
        assert rows[1] == ("mid", 2, 0.5)

    def test_table_renders_all_rows(self):
        text = render_report_table(precision_recall_f(self._two_class()))
        lines = text.strip().split("\n")
        assert len(lines) == 2 + 2 + 2  # header x2, classes, macro+weighted
        assert lines[-2].startswith("macro")
        assert lines[-1].startswith("weighted")


class TestBleu:
    def test_identity_is_one(self):
        assert bleu([["a", "b", "c", "d"]], [["a", "b", "c", "d"]]) == pytest.approx(1.0)

    def test_disjoint_is_zero(self):
        assert bleu([["a", "b"]], [["x", "y"]]) == 0.0

    def test_brevity_penalty_oracle(self):
        # [the cat] vs [the cat sat], max_n=2: both precisions 1 after
        # smoothing, so the score is exactly the brevity penalty exp(-1/2)
        got = bleu([["the", "cat"]], [["the", "cat", "sat"]], max_n=2)
        assert got == pytest.approx(math.exp(1 - 3 / 2), abs=1e-12)

    def test_add_one_smoothing_on_higher_orders(self):
        # c=[a b], r=[a c]: p1 = 1/2 unsmoothed; p2 = (0+1)/(1+1) smoothed;
        # same length so bp = 1
        got = bleu([["a", "b"]], [["a", "c"]], max_n=2)
        assert got == pytest.approx(math.sqrt(0.5 * 0.5), abs=1e-12)

    def test_empty_candidate_corpus_is_zero(self):
        assert bleu([[]], [["a"]]) == 0.0

    def test_input_validation(self):
        with pytest.raises(ValueError, match="at least one pair"):
            bleu([], [])
        with pytest.raises(ValueError, match="at least one pair"):
            bleu([["a"]], [])
        with pytest.raises(ValueError, match="max_n"):
            bleu([["a"]], [["a"]], max_n=0)

    def test_corpus_pooling_differs_from_mean(self):
        # pooled clipped counts weight long pairs more than averaging scores
        pairs = [(["a"], ["a"]), (["x", "y", "z", "w"], ["x", "y", "z", "q"])]
        pooled = bleu([c for c, _ in pairs], [r for _, r in pairs])
        mean = np.mean([bleu([c], [r]) for c, r in pairs])
        assert pooled != pytest.approx(mean)

    @settings(max_examples=60, deadline=None)
    @given(
        st.lists(
            st.lists(st.sampled_from("abcde"), min_size=1, max_size=8),
            min_size=1,
            max_size=5,
        )
    )
    def test_self_bleu_is_one(self, corpus):
        assert bleu(corpus, corpus) == pytest.approx(1.0)

    @settings(max_examples=60, deadline=None)
    @given(
        st.lists(st.sampled_from("ab"), min_size=0, max_size=6),
        st.lists(st.sampled_from("ab"), min_size=1, max_size=6),
    )
    def test_bounds(self, cand, ref):
        assert 0.0 <= bleu([cand], [ref]) <= 1.0


def _rec(rid, summary):
    return FunctionRecord(
        id=rid,
        project_id="p0",
        language="synthetic",
        code_tokens=("int", "f"),
        ast=None,
        summary_tokens=tuple(summary.split()),
    )


class TestPartitionedBleu:
    def _fixture(self):
        records = [
            _rec("a", "gets the value"),
            _rec("b", "sets the state"),
            _rec("c", "the main entry point"),  # no reference action word
        ]
        predictions = {
            "a": ["gets", "the", "value"],  # AW correct
            "b": ["gets", "the", "state"],  # AW incorrect (get vs set)
            "c": ["whatever"],
        }
        forced = {"b": ["sets", "the", "state"]}
        return records, predictions, forced

    def test_partition_counts_and_exclusion(self):
        records, predictions, forced = self._fixture()
        rep = aw_partitioned_bleu(records, predictions, forced, LEX)
        assert (rep.n_correct, rep.n_incorrect, rep.n_excluded) == (1, 1, 1)
        assert rep.bleu_variant == metrics.BLEU_VARIANT

    def test_aw_removed_before_scoring(self):
        records, predictions, forced = self._fixture()
        seen = []
        real = metrics.bleu

        def spy(cands, refs, max_n=4):
            seen.append(([list(c) for c in cands], [list(r) for r in refs]))
            return real(cands, refs, max_n)

        orig = metrics.bleu
        metrics.bleu = spy
        try:
            aw_partitioned_bleu(records, predictions, forced, LEX)
        finally:
            metrics.bleu = orig
        # default, correct, incorrect, forced: every side has its own
        # extracted action word removed
        default_c, default_r = seen[0]
        assert default_c == [["the", "value"], ["the", "state"]]
        assert default_r == [["the", "value"], ["the", "state"]]
        forced_c, forced_r = seen[3]
        assert forced_c == [["the", "state"]]

    def test_default_equals_correct_when_no_incorrect(self):
        records = [_rec("a", "gets the value")]
        rep = aw_partitioned_bleu(records, {"a": ["gets", "the", "value"]}, {}, LEX)
        assert rep.bleu_aw_incorrect is None and rep.bleu_aw_forced is None
        assert rep.bleu_default == rep.bleu_aw_correct == pytest.approx(1.0)

    def test_prediction_without_aw_is_incorrect_unchanged(self):
        records = [_rec("a", "gets the value")]
        preds = {"a": ["the", "quiet", "value"]}
        rep = aw_partitioned_bleu(records, preds, {"a": ["gets", "the", "value"]}, LEX)
        assert rep.n_incorrect == 1 and rep.n_correct == 0
        # nothing was removed from the prediction side
        assert rep.bleu_aw_incorrect == pytest.approx(
            bleu([["the", "quiet", "value"]], [["the", "value"]])
        )

    def test_missing_prediction_raises(self):
        records, predictions, forced = self._fixture()
        del predictions["b"]
        with pytest.raises(ValueError, match="missing prediction for record b"):
            aw_partitioned_bleu(records, predictions, forced, LEX)

    def test_missing_forced_raises(self):
        records, predictions, _ = self._fixture()
        with pytest.raises(ValueError, match="missing forced prediction"):
            aw_partitioned_bleu(records, predictions, {}, LEX)

    def test_all_references_unlabeled_raises(self):
        records = [_rec("a", "the main entry point")]
        with pytest.raises(ValueError, match="no records with an extractable"):
            aw_partitioned_bleu(records, {"a": ["x"]}, {}, LEX)

    def test_per_class_sizes(self):
        records, predictions, forced = self._fixture()
        cmap = build_class_map(["get", "set"], k=2)
        rep = aw_partitioned_bleu(records, predictions, forced, LEX, class_map=cmap)
        assert rep.per_class_sizes == {"get": [1, 0], "set": [0, 1]}
        plain = aw_partitioned_bleu(records, predictions, forced, LEX)
        assert plain.per_class_sizes is None
