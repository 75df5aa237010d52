from pathlib import Path

import pytest

from awlab.textproc import (
    ClassMap,
    VerbLexicon,
    build_class_map,
    default_lexicon,
    derive_setting_view,
    extract_action_word,
    label_record,
    load_class_map,
    save_class_map,
    tokenize_code,
)

DATA = Path(__file__).parent / "data"
LEX = default_lexicon()


class TestTokenizer:
    def test_signature_line_golden(self):
        got = tokenize_code("const char *sctp_cname(const sctp_subtype_t cid)")
        assert got == ["const", "char", "sctp", "cname", "const", "sctp", "subtype", "t", "cid"]

    def test_condition_line_golden(self):
        assert tokenize_code("if (cid.chunk < 0)") == ["if", "cid", "chunk", "0"]

    def test_camel_case_and_underscores_split(self):
        assert tokenize_code("getMaxValue my_var2") == ["get", "max", "value", "my", "var", "2"]

    def test_output_is_lowercase_and_punctuation_free(self):
        for tok in tokenize_code('x->len += strlen("a,b");'):
            assert tok == tok.lower()
            assert tok.isalnum()


class TestExtraction:
    def test_fixture_full_agreement(self):
        rows = 0
        for line in (DATA / "extraction_fixture.tsv").read_text(encoding="utf-8").splitlines():
            if not line or line.startswith("#"):
                continue
            rows += 1
            summary, expect = line.split("\t")
            got = extract_action_word(summary.split(), LEX)
            got_s = "none" if got is None else f"{got.position}:{got.surface}:{got.stem}"
            assert got_s == expect, summary
        assert rows == 50

    def test_empty_summary_rejected(self):
        with pytest.raises(ValueError):
            extract_action_word([], LEX)

    def test_exception_words_are_never_stemmed(self):
        for word in ("is", "to", "if"):
            label = extract_action_word([word, "anything"], LEX)
            assert label.stem == word


def _fixture_map() -> ClassMap:
    classes, counts = [], []
    for line in (DATA / "stem_counts.tsv").read_text(encoding="utf-8").splitlines():
        if not line or line.startswith("#"):
            continue
        stem, count = line.split("\t")
        classes.append(stem)
        counts.append(int(count))
    return ClassMap(tuple(classes), tuple(counts), sum(counts))


class TestClassMap:
    def test_build_orders_by_count_then_stem(self):
        labels = ["b"] * 3 + ["a"] * 3 + ["c"] * 5 + ["d"]
        m = build_class_map(labels, k=3)
        assert m.classes == ("c", "a", "b")
        assert m.counts == (5, 3, 3)
        assert m.total_labeled == 12

    def test_build_needs_enough_distinct_stems(self):
        with pytest.raises(ValueError):
            build_class_map(["a", "a", "b"], k=3)

    def test_unknown_stem_maps_to_other(self):
        m = build_class_map(["a", "a", "b"], k=2)
        assert m.class_index("a") == 0
        assert m.class_index("zzz") == m.other_index == 2
        assert m.all_class_names == ("a", "b", "other")

    def test_round_trip_through_file(self, tmp_path):
        m = _fixture_map()
        save_class_map(m, tmp_path / "cm.txt", comments=["config: {}"])
        back = load_class_map(tmp_path / "cm.txt")
        assert back.classes == m.classes
        assert back.counts == m.counts
        assert back.total_labeled == m.total_labeled


class TestSettingViews:
    def test_top10_keeps_the_ten_most_common(self):
        _, view = derive_setting_view([], _fixture_map(), "top10")
        assert view.classes == (
            "return", "set", "get", "add", "creat", "initi", "test", "remov", "check", "is",
        )

    def test_top10n_excludes_get_set_return(self):
        _, view = derive_setting_view([], _fixture_map(), "top10n")
        assert view.classes == (
            "add", "creat", "initi", "test", "remov", "check", "is", "call", "retriev", "updat",
        )
        for banned in ("get", "set", "return"):
            assert banned not in view.classes

    def test_top40_requires_forty_classes(self):
        m = build_class_map(["a", "a", "b"], k=2)
        with pytest.raises(ValueError):
            derive_setting_view([], m, "top40")

    def test_getset_fixed_order_and_record_filter(self):
        from awlab.corpus import FunctionRecord

        def rec(rid, summary):
            return FunctionRecord(
                id=rid, project_id="p", language="synthetic",
                code_tokens=("x",), ast=None, summary_tokens=tuple(summary.split()),
            )

        records = [
            rec("a", "gets the value"),
            rec("b", "sets the value"),
            rec("c", "returns the value"),
            rec("d", "the main entry point"),
        ]
        kept, view = derive_setting_view(records, _fixture_map(), "getset", LEX)
        assert [r.id for r in kept] == ["a", "b"]
        assert view.classes == ("get", "set")

    def test_unknown_setting_rejected(self):
        with pytest.raises(ValueError):
            derive_setting_view([], _fixture_map(), "top7")


class TestLabelRecord:
    def test_no_action_word_gets_the_other_class(self):
        from awlab.corpus import FunctionRecord

        rec = FunctionRecord(
            id="x", project_id="p", language="synthetic",
            code_tokens=("x",), ast=None, summary_tokens=("the", "main", "loop"),
        )
        m = build_class_map(["get", "set"], k=2)
        assert label_record(rec, LEX, m) == m.other_index


class TestLexicon:
    def test_rejects_uppercase_entries(self):
        with pytest.raises(ValueError):
            VerbLexicon(verbs=frozenset({"Get"}))

    def test_inflection_matching(self):
        assert LEX.is_verb("sorts")
        assert LEX.is_verb("sort")
        assert not LEX.is_verb("sorted3")
