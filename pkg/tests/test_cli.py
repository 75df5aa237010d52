"""Config resolution and the command-line pipeline end to end."""

import json
import os

import pytest

from awlab import cli
from awlab.config import (
    ExperimentConfig,
    config_json,
    config_to_flat,
    load_config_file,
    resolve_config,
)


class TestConfigResolution:
    def test_defaults(self):
        cfg = resolve_config()
        assert cfg == ExperimentConfig()
        assert cfg.setting == "top40" and cfg.ratios == (0.8, 0.1, 0.1)

    def test_file_overrides_default(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text("# comment\n\nhidden=32\nratios=0.6,0.2,0.2\nwallclock_max=none\n")
        cfg = resolve_config(p)
        assert cfg.hidden == 32
        assert cfg.ratios == (0.6, 0.2, 0.2)
        assert cfg.wallclock_max is None

    def test_flag_overrides_file(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text("hidden=32\n")
        cfg = resolve_config(p, {"hidden": "8", "seed": None})
        assert cfg.hidden == 8
        assert cfg.seed == 0  # None overrides are "not given"

    def test_typed_overrides_pass_through(self):
        cfg = resolve_config(None, {"ratios": (0.5, 0.25, 0.25), "learning_rate": 2.0})
        assert cfg.ratios == (0.5, 0.25, 0.25)
        assert cfg.learning_rate == 2.0

    def test_unknown_key(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text("hiden=32\n")
        with pytest.raises(ValueError, match="line 1: unknown config key 'hiden'"):
            load_config_file(p)
        with pytest.raises(ValueError, match="unknown config key"):
            resolve_config(None, {"hiden": "32"})

    def test_duplicate_key(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text("hidden=32\nhidden=64\n")
        with pytest.raises(ValueError, match="line 2: duplicate config key"):
            load_config_file(p)

    def test_not_key_value(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text("hidden\n")
        with pytest.raises(ValueError, match="expected key=value"):
            load_config_file(p)

    def test_bad_ratios(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text("ratios=0.5,0.5\n")
        with pytest.raises(ValueError, match="three comma-separated"):
            load_config_file(p)

    def test_validation_delegates(self):
        with pytest.raises(ValueError, match="unknown setting"):
            resolve_config(None, {"setting": "top7"})
        with pytest.raises(ValueError, match="unknown condition"):
            resolve_config(None, {"condition": "blurred"})
        with pytest.raises(ValueError, match="summing to 1"):
            resolve_config(None, {"ratios": "0.5,0.4,0.3"})
        with pytest.raises(ValueError, match="epochs_max"):
            resolve_config(None, {"epochs_max": "0"})

    def test_canonical_round_trip(self, tmp_path):
        cfg = resolve_config(
            None,
            {"learning_rate": "2.0", "grad_clip": "none", "ratios": "0.6,0.2,0.2", "hidden": "8"},
        )
        p = tmp_path / "c.cfg"
        p.write_text("".join(f"{k}={v}\n" for k, v in config_to_flat(cfg).items()))
        assert resolve_config(p) == cfg
        flat = json.loads(config_json(cfg))
        assert flat["grad_clip"] == "none"
        assert flat["learning_rate"] == "2.0"
        assert list(flat)[0] == "corpus"


def run_cli(argv):
    return cli.main(argv)


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """One small getset pipeline: synth, build, stats, train, eval."""
    root = tmp_path_factory.mktemp("chain")
    out = root / "out"
    cfgfile = root / "run.cfg"
    cfgfile.write_text(
        "\n".join(
            [
                f"corpus={out / 'corpus.jsonl'}",
                f"out_dir={out}",
                "split_seed=5",
                "setting=getset",
                "condition=standard",
                "classes=2",
                "top_m=10",
                "variant=ast_attendgru",
                "objective=summary",
                "epochs_max=2",
                "learning_rate=2.0",
                "batch_size=8",
                "hidden=8",
                "emb=4",
                "max_code_len=16",
                "max_ast_len=40",
                "max_summary_len=10",
                "seed=1",
            ]
        )
        + "\n"
    )
    cfg = [f"--config", str(cfgfile)]
    assert run_cli(["synth", *cfg, "--n", "40", "--template-classes", "get,set"]) == 0
    assert run_cli(["build", *cfg]) == 0
    assert run_cli(["stats", *cfg]) == 0
    assert run_cli(["train", *cfg]) == 0
    assert run_cli(["eval", *cfg]) == 0
    return root, out, cfg


BASE = "getset.standard.ast_attendgru.summary"


class TestPipelineArtifacts:
    def test_build_outputs(self, pipeline):
        _, out, _ = pipeline
        for name in (
            "corpus.jsonl",
            "corpus.filtered.jsonl",
            "splits.txt",
            "classmap.full.txt",
            "classmap.txt",
            "vocab.code.txt",
            "vocab.ast.txt",
            "vocab.summary.txt",
        ):
            assert (out / name).exists(), name

    def test_corpus_embeds_provenance(self, pipeline):
        _, out, _ = pipeline
        head = (out / "corpus.jsonl").read_text().splitlines()[:2]
        assert head[0].startswith("# config: ")
        embedded = json.loads(head[0][len("# config: ") :])
        assert embedded["setting"] == "getset"
        assert any(l.startswith("# synth: n=40") for l in head)

    def test_stats_json(self, pipeline):
        _, out, _ = pipeline
        obj = json.loads((out / "stats.json").read_text())
        assert set(obj) == {"config", "corpus_sha256", "stats"}
        assert obj["stats"]["n_records"] == 40
        assert obj["stats"]["position_counts"]["1"] + obj["stats"]["position_counts"]["3"] == 40

    def test_train_outputs(self, pipeline):
        _, out, _ = pipeline
        assert (out / f"model.ast_attendgru.summary.awpm").exists()
        log = json.loads((out / "train_log.json").read_text())
        assert log["backend"] in ("cython", "python")
        assert len(log["epochs"]) == 2
        assert {"epoch", "train_loss", "val_accuracy", "seconds"} <= set(log["epochs"][0])
        assert log["config"]["objective"] == "summary"

    def test_eval_outputs(self, pipeline):
        _, out, _ = pipeline
        obj = json.loads((out / f"eval.{BASE}.json").read_text())
        assert obj["n_test"] == 4
        cls = obj["classification"]
        assert cls["exclude_other"] is True  # getset drops the filler class
        assert cls["setting"] == "getset" and cls["condition"] == "standard"
        assert "bleu" in obj and obj["bleu"]["bleu_variant"].startswith("corpus-bleu4")
        # compact jsonl line carries the same object
        line = json.loads((out / f"eval.{BASE}.jsonl").read_text())
        assert line["classification"]["f1"] == cls["f1"]
        txt = (out / f"eval.{BASE}.txt").read_text()
        assert "setting=getset condition=standard" in txt
        tsv = (out / f"confusion.{BASE}.tsv").read_text()
        assert "gold\\pred\t" in tsv
        pw = (out / f"perword.{BASE}.tsv").read_text()
        assert "stem\tgold\trecall" in pw

    def test_eval_jobs_invariant(self, pipeline):
        _, out, cfg = pipeline
        before = (out / f"eval.{BASE}.json").read_bytes()
        assert run_cli(["eval", *cfg, "--jobs", "3"]) == 0
        assert (out / f"eval.{BASE}.json").read_bytes() == before

    def test_bleu_percent_only_touches_text(self, pipeline):
        _, out, cfg = pipeline
        json_before = (out / f"eval.{BASE}.json").read_bytes()
        assert run_cli(["eval", *cfg, "--bleu-percent"]) == 0
        assert (out / f"eval.{BASE}.json").read_bytes() == json_before
        assert "bleu (x100)" in (out / f"eval.{BASE}.txt").read_text()
        # restore the plain-format text report for any later assertions
        assert run_cli(["eval", *cfg]) == 0

    def test_attn_dumps(self, pipeline):
        _, out, cfg = pipeline
        rid = "syn00000"
        assert run_cli(["attn", *cfg, "--record-id", rid, "--stream", "code"]) == 0
        for mode in ("unforced", "forced"):
            path = out / f"attn.{rid}.code.{mode}.tsv"
            assert path.exists()
            lines = [l for l in path.read_text().splitlines() if not l.startswith("#")]
            header = lines[0].split("\t")
            assert header[0] == "emitted"
            for row in lines[1:]:
                cells = row.split("\t")
                assert len(cells) == len(header)
                total = sum(float(x) for x in cells[1:])
                assert total == pytest.approx(1.0, abs=5e-6)

    def test_attn_forced_first_token(self, pipeline):
        _, out, cfg = pipeline
        assert run_cli(["attn", *cfg, "--record-id", "syn00001", "--stream", "ast"]) == 0
        forced = (out / "attn.syn00001.ast.forced.tsv").read_text().splitlines()
        body = [l for l in forced if not l.startswith("#")]
        # syn00001 is a set-class record, so the forced row is its gold verb
        assert body[1].split("\t")[0] == "sets"


class TestFailureModes:
    def test_usage_errors_exit_1(self):
        for argv in ([], ["frobnicate"], ["eval", "--no-such-flag"], ["attn"]):
            with pytest.raises(SystemExit) as exc:
                run_cli(argv)
            assert exc.value.code == 1

    def test_missing_corpus_exit_2(self, tmp_path, capsys):
        assert run_cli(["build", "--corpus", str(tmp_path / "nope.jsonl")]) == 2
        assert "error: corpus not found" in capsys.readouterr().err

    def test_checkpoint_not_found_exit_2(self, pipeline, tmp_path, capsys):
        root, out, cfg = pipeline
        assert run_cli(["eval", *cfg, "--variant", "attendgru"]) == 2
        err = capsys.readouterr().err
        assert "checkpoint not found" in err and "model.attendgru.summary.awpm" in err

    def test_coordinate_guard_exit_2(self, pipeline, capsys):
        _, _, cfg = pipeline
        assert run_cli(["train", *cfg, "--condition", "challenge"]) == 2
        err = capsys.readouterr().err
        assert "out_dir was built for setting=getset condition=standard" in err

    def test_challenge_attendgru_gate(self, pipeline, capsys):
        _, _, cfg = pipeline
        code = run_cli(["train", *cfg, "--condition", "challenge", "--variant", "attendgru"])
        assert code == 2
        assert "excluded under the challenge condition" in capsys.readouterr().err

    def test_attn_unknown_record_exit_2(self, pipeline, capsys):
        _, _, cfg = pipeline
        assert run_cli(["attn", *cfg, "--record-id", "ghost99"]) == 2
        assert "not found in the filtered corpus" in capsys.readouterr().err

    def test_config_error_exit_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.cfg"
        bad.write_text("hidden=abc\n")
        assert run_cli(["stats", "--config", str(bad)]) == 2
        assert "error:" in capsys.readouterr().err

    def test_numeric_failure_exit_3(self, pipeline, monkeypatch, capsys):
        _, _, cfg = pipeline

        def explode(*a, **k):
            raise RuntimeError("non-finite loss at epoch 0 batch 0")

        monkeypatch.setattr(cli, "train", explode)
        assert run_cli(["train", *cfg]) == 3
        assert "numeric failure: non-finite loss" in capsys.readouterr().err

    def test_floating_point_error_exit_3(self, pipeline, monkeypatch, capsys):
        _, _, cfg = pipeline

        def explode(*a, **k):
            raise FloatingPointError("overflow encountered in matmul")

        monkeypatch.setattr(cli, "train", explode)
        assert run_cli(["train", *cfg]) == 3
        assert "numeric failure" in capsys.readouterr().err
