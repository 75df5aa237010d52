"""Vocabularies, checkpoint format, and network decode/attention behavior."""

import math

import numpy as np
import pytest

from awlab.model import network
from awlab.model.params import init_params, load_params, param_order, save_params
from awlab.model.training import TrainConfig, build_vocabs
from awlab.model.vocab import (
    SPECIAL_TOKENS,
    UNK,
    Vocabulary,
    build_vocab,
    load_vocab,
    save_vocab,
)
from awlab.synthgen import TemplateSpec, generate
from awlab.textproc import build_class_map, default_lexicon, extract_action_word

LEX = default_lexicon()


@pytest.fixture(scope="module")
def setup():
    records = generate(TemplateSpec(), 24, seed=13)
    cfg = TrainConfig(
        hidden=8,
        emb=4,
        max_code_len=12,
        max_ast_len=30,
        max_summary_len=8,
        variant="ast_attendgru",
        objective="summary",
        seed=2,
    )
    vocabs = build_vocabs(records, cfg)
    params = init_params(
        "ast_attendgru",
        "summary",
        "standard",
        emb=4,
        hidden=8,
        vocab_code=len(vocabs.code),
        vocab_ast=len(vocabs.ast),
        vocab_summary=len(vocabs.summary),
        n_out=len(vocabs.summary),
        seed=2,
        vocab_hashes=vocabs.hashes(),
    )
    cmap = build_class_map(
        [l.stem for l in (extract_action_word(r.summary_tokens, LEX) for r in records) if l],
        k=5,
    )
    return records, cfg, vocabs, params, cmap


class TestVocabulary:
    def test_rank_by_frequency_then_token(self):
        v = build_vocab([["b", "a", "a", "c", "b"], ["a"]], max_size=10)
        assert v.tokens == SPECIAL_TOKENS + ("a", "b", "c")

    def test_tie_breaks_lexicographic(self):
        v = build_vocab([["beta", "alpha"]], max_size=10)
        assert v.tokens[4:] == ("alpha", "beta")

    def test_max_size_truncates(self):
        v = build_vocab([["a", "a", "b", "b", "c"]], max_size=6)
        assert len(v) == 6
        assert v.tokens[4:] == ("a", "b")

    def test_max_size_floor(self):
        with pytest.raises(ValueError, match="at least 5"):
            build_vocab([["a"]], max_size=4)

    def test_specials_in_input_ignored(self):
        v = build_vocab([["<unk>", "x", "<pad>"]], max_size=10)
        assert v.tokens == SPECIAL_TOKENS + ("x",)

    def test_encode_pads_truncates_unks(self):
        v = build_vocab([["a", "b"]], max_size=10)
        assert v.encode(["a", "zzz"], 4) == [4, UNK, 0, 0]
        assert v.encode(["a", "b", "a"], 2) == [4, 5]

    def test_validation(self):
        with pytest.raises(ValueError, match="special tokens"):
            Vocabulary(tokens=("a", "b", "c", "d"), max_size=10)
        with pytest.raises(ValueError, match="duplicate"):
            Vocabulary(tokens=SPECIAL_TOKENS + ("a", "a"), max_size=10)
        with pytest.raises(ValueError, match="max_size"):
            Vocabulary(tokens=SPECIAL_TOKENS + ("a",), max_size=4)

    def test_round_trip_with_comments(self, tmp_path):
        v = build_vocab([["gets", "the", "value"]], max_size=50)
        p = tmp_path / "v.txt"
        save_vocab(v, p, comments=["config: {}", "corpus_sha256: 00"])
        back = load_vocab(p)
        assert back == v
        assert back.content_hash() == v.content_hash()

    def test_hash_tracks_content(self):
        a = build_vocab([["x"]], max_size=10)
        b = build_vocab([["y"]], max_size=10)
        assert a.content_hash() != b.content_hash()


class TestParams:
    def test_param_order_variants(self):
        plain = param_order("attendgru")
        twin = param_order("ast_attendgru")
        assert "emb_ast" not in plain and not any(n.startswith("enc_ast") for n in plain)
        assert "emb_ast" in twin and "enc_ast_Uh" in twin
        assert plain[0] == "emb_code" and plain[-2:] == ["out_W", "out_b"]

    def _tiny(self, seed=0, variant="attendgru"):
        return init_params(
            variant, "summary", "standard",
            emb=3, hidden=4, vocab_code=7, vocab_ast=6, vocab_summary=9,
            n_out=9, seed=seed,
        )

    def test_init_deterministic(self):
        a, b = self._tiny(seed=5), self._tiny(seed=5)
        assert sorted(a.arrays) == sorted(b.arrays)
        for k in a.arrays:
            np.testing.assert_array_equal(a.arrays[k], b.arrays[k])
        c = self._tiny(seed=6)
        assert any(not np.array_equal(a.arrays[k], c.arrays[k]) for k in a.arrays)

    def test_save_load_save_byte_identity(self, tmp_path):
        p1, p2 = tmp_path / "a.awpm", tmp_path / "b.awpm"
        params = self._tiny(seed=1, variant="ast_attendgru")
        params.header["best_epoch"] = 3
        save_params(params, p1)
        save_params(load_params(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_header_survives(self, tmp_path):
        p = tmp_path / "m.awpm"
        params = self._tiny(seed=2)
        save_params(params, p)
        back = load_params(p)
        assert back.variant == "attendgru"
        assert back.objective == "summary"
        assert back.dims["hidden"] == 4
        for k in params.arrays:
            np.testing.assert_array_equal(back.arrays[k], params.arrays[k])

    def test_refuses_nan(self, tmp_path):
        params = self._tiny()
        params.arrays["out_b"][0] = float("nan")
        with pytest.raises(ValueError, match="non-finite"):
            save_params(params, tmp_path / "bad.awpm")

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "x.awpm"
        p.write_bytes(b"NOPE" + b"\x00" * 16)
        with pytest.raises(ValueError, match="bad magic"):
            load_params(p)

    def test_truncation_detected(self, tmp_path):
        p = tmp_path / "m.awpm"
        save_params(self._tiny(), p)
        data = p.read_bytes()
        p.write_bytes(data[:-8])
        with pytest.raises(ValueError, match="truncated checkpoint"):
            load_params(p)

    def test_vocab_hash_gate(self, tmp_path):
        p = tmp_path / "m.awpm"
        params = init_params(
            "attendgru", "summary", "standard",
            emb=3, hidden=4, vocab_code=7, vocab_ast=0, vocab_summary=9,
            n_out=9, seed=0, vocab_hashes={"code": "aaa", "ast": None, "summary": "bbb"},
        )
        save_params(params, p)
        load_params(p, expected_vocab_hashes={"code": "aaa"})
        with pytest.raises(ValueError, match="hash mismatch for 'code'"):
            load_params(p, expected_vocab_hashes={"code": "zzz"})


class TestCoreMath:
    def test_gru_step_scalar_oracle(self):
        w = {
            "Wz": [[0.5]], "Uz": [[0.3]], "bz": [0.1],
            "Wr": [[-0.2]], "Ur": [[0.4]], "br": [0.0],
            "Wh": [[0.7]], "Uh": [[-0.5]], "bh": [0.2],
        }
        w = {k: np.array(v, dtype=float) for k, v in w.items()}
        out = network.gru_step([1.0], [0.5], w)
        z = 1 / (1 + math.exp(-0.75))
        r = 0.5
        hc = math.tanh(0.7 + (r * 0.5) * -0.5 + 0.2)
        want = (1 - z) * 0.5 + z * hc
        assert out[0] == pytest.approx(want, rel=1e-12)

    def test_attend_oracle(self):
        ctx, w = network.attend([1.0, 0.0], [[1.0, 0.0], [0.0, 1.0], [2.0, 0.0]], [1, 1, 0])
        w0 = 1 / (1 + math.exp(-1))
        assert w[2] == 0.0
        assert w[0] == pytest.approx(w0, rel=1e-12)
        assert float(np.sum(w)) == pytest.approx(1.0, rel=1e-12)
        np.testing.assert_allclose(ctx, [w[0], w[1]], rtol=1e-12)

    def test_attend_all_masked(self):
        with pytest.raises(ValueError, match="every position masked"):
            network.attend([1.0], [[1.0], [2.0]], [0, 0])


class TestLossAndGrads:
    def test_grads_cover_all_params_and_step_reduces_loss(self, setup):
        records, cfg, vocabs, params, _ = setup
        batch = records[:6]
        Xc = np.array([network.record_ids(r, cfg, vocabs)[0] for r in batch])
        Xa = np.array([network.record_ids(r, cfg, vocabs)[1] for r in batch])
        from awlab.model.training import _summary_targets

        Yin, Ytgt, mask = _summary_targets(batch, cfg, vocabs)
        work = params.copy()
        loss1, grads = network.loss_and_grads(work, Xc, Xa, Yin, Ytgt, mask)
        assert loss1 > 0
        assert set(grads) == set(work.arrays)
        for name in work.arrays:
            work.arrays[name] -= 0.5 * grads[name]
        loss2, _ = network.loss_and_grads(work, Xc, Xa, Yin, Ytgt, mask)
        assert loss2 < loss1

    def test_empty_target_mask_rejected(self, setup):
        records, cfg, vocabs, params, _ = setup
        batch = records[:2]
        Xc = np.array([network.record_ids(r, cfg, vocabs)[0] for r in batch])
        Xa = np.array([network.record_ids(r, cfg, vocabs)[1] for r in batch])
        Yin = np.full((2, 3), 1, dtype=np.int64)
        Ytgt = np.zeros((2, 3), dtype=np.int64)
        with pytest.raises(ValueError, match="no unmasked targets"):
            network.loss_and_grads(params, Xc, Xa, Yin, Ytgt, np.zeros((2, 3)))


class TestDecoding:
    def test_batch_matches_single(self, setup):
        records, cfg, vocabs, params, _ = setup
        batch = records[:6]
        together = network.decode_greedy(params, cfg, batch, vocabs)
        singles = [network.decode_greedy(params, cfg, [r], vocabs)[0] for r in batch]
        assert together == singles

    def test_forcing_the_argmax_changes_nothing(self, setup):
        records, cfg, vocabs, params, _ = setup
        r = records[0]
        logits = network.first_step_logits(params, cfg, [r], vocabs)[0]
        tok = vocabs.summary.token_of(int(np.argmax(logits)))
        assert network.force_action_word(r, params, cfg, vocabs, tok) == (
            network.predict_summary(r, params, cfg, vocabs)
        )

    def test_oov_force_emits_unk(self, setup):
        records, cfg, vocabs, params, _ = setup
        out = network.force_action_word(records[0], params, cfg, vocabs, "zz_not_a_token")
        assert out[0] == "<unk>"

    def test_first_step_logits_shape(self, setup):
        records, cfg, vocabs, params, _ = setup
        logits = network.first_step_logits(params, cfg, records[:5], vocabs)
        assert logits.shape == (5, len(vocabs.summary))

    def test_variant_needs_ast(self, setup):
        records, cfg, vocabs, params, _ = setup
        bare = records[0].__class__(**{**records[0].__dict__, "ast": None})
        with pytest.raises(ValueError, match="needs an ast"):
            network.record_ids(bare, cfg, vocabs)


class TestAttentionDump:
    def test_rows_and_labels(self, setup):
        records, cfg, vocabs, params, _ = setup
        r = records[1]
        forced_tok = vocabs.summary.token_of(5)
        rows, cols, M = network.dump_attention(r, params, cfg, vocabs, "code", gold_aw=forced_tok)
        assert rows[0] == forced_tok
        assert M.shape == (len(rows), len(cols))
        assert cols == list(r.code_tokens)[: cfg.max_code_len]
        np.testing.assert_allclose(M.sum(axis=1), 1.0, rtol=1e-12)

    def test_ast_stream_columns(self, setup):
        records, cfg, vocabs, params, _ = setup
        rows, cols, M = network.dump_attention(
            records[1], params, cfg, vocabs, "ast", gold_aw=vocabs.summary.token_of(5)
        )
        assert "(" in cols
        np.testing.assert_allclose(M.sum(axis=1), 1.0, rtol=1e-12)

    def test_forced_first_row_equals_unforced(self, setup):
        # step-1 attention is computed before the emitted token is overridden
        records, cfg, vocabs, params, _ = setup
        r = records[2]
        _, _, free = network.dump_attention(r, params, cfg, vocabs, "code")
        _, _, forced = network.dump_attention(
            r, params, cfg, vocabs, "code", gold_aw=vocabs.summary.token_of(6)
        )
        assert free.shape[0] >= 1 and forced.shape[0] >= 1
        np.testing.assert_array_equal(free[0], forced[0])

    def test_stream_validation(self, setup):
        records, cfg, vocabs, params, _ = setup
        with pytest.raises(ValueError, match="unknown attention stream"):
            network.dump_attention(records[0], params, cfg, vocabs, "bytecode")
        plain_cfg = TrainConfig(
            hidden=8, emb=4, max_code_len=12, max_summary_len=8,
            variant="attendgru", objective="summary", seed=2,
        )
        plain_vocabs = build_vocabs(records, plain_cfg)
        plain = init_params(
            "attendgru", "summary", "standard",
            emb=4, hidden=8, vocab_code=len(plain_vocabs.code), vocab_ast=0,
            vocab_summary=len(plain_vocabs.summary), n_out=len(plain_vocabs.summary), seed=2,
        )
        with pytest.raises(ValueError, match="no ast encoder"):
            network.dump_attention(records[0], plain, plain_cfg, plain_vocabs, "ast")


class TestClassify:
    def test_token_class_vector_other_fallback(self, setup):
        _, _, vocabs, _, cmap = setup
        vec = network.token_class_vector(vocabs.summary, cmap)
        assert vec.shape == (len(vocabs.summary),)
        # specials cannot be stemmed, so they land in the other class
        assert vec[0] == cmap.other_index
        gets = vocabs.summary.id_of("gets")
        assert gets != UNK
        assert vec[gets] == cmap.class_index("get")

    def test_summary_head_distribution(self, setup):
        records, cfg, vocabs, params, cmap = setup
        cls, dist = network.classify_action_word(records[0], params, cfg, vocabs, cmap)
        assert dist.shape == (cmap.k + 1,)
        assert float(dist.sum()) == pytest.approx(1.0, rel=1e-9)
        logits = network.first_step_logits(params, cfg, [records[0]], vocabs)[0]
        vec = network.token_class_vector(vocabs.summary, cmap)
        assert cls == int(vec[int(np.argmax(logits))])

    def test_classification_head_argmax(self, setup):
        records, cfg, vocabs, _, cmap = setup
        head_cfg = TrainConfig(
            hidden=8, emb=4, max_code_len=12, max_ast_len=30, max_summary_len=8,
            variant="ast_attendgru", objective="action_word", seed=2,
        )
        head = init_params(
            "ast_attendgru", "action_word", "standard",
            emb=4, hidden=8, vocab_code=len(vocabs.code), vocab_ast=len(vocabs.ast),
            vocab_summary=len(vocabs.summary), n_out=cmap.k + 1, seed=2,
            classes=cmap.all_class_names,
        )
        cls, dist = network.classify_action_word(records[0], head, head_cfg, vocabs, cmap)
        assert cls == int(np.argmax(dist))
        assert float(dist.sum()) == pytest.approx(1.0, rel=1e-9)
