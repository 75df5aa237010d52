"""Command-line pipeline: synth, build, stats, train, eval, attn.

Commands compose through files only. Every output artifact embeds the
resolved config and the content hash of the corpus it came from; partial
outputs go to a temp name and are renamed only on success. Exit codes:
0 success, 1 usage, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import os
import sys

from . import corpus, kernels, metrics, synthgen
from .config import ExperimentConfig, config_json, config_to_flat, resolve_config
from .model import TrainConfig, train
from .model.network import Vocabs, decode_greedy, dump_attention, first_step_logits
from .model.params import load_params, save_params
from .model.training import build_vocabs
from .model.vocab import load_vocab, save_vocab
from .textproc import (
    default_lexicon,
    build_class_map,
    derive_setting_view,
    extract_action_word,
    label_record,
    load_class_map,
    save_class_map,
)

# output file names inside out_dir; eval names carry the run coordinates
FILTERED = "corpus.filtered.jsonl"
SPLITS = "splits.txt"
CLASSMAP_FULL = "classmap.full.txt"
CLASSMAP = "classmap.txt"


def _vocab_file(field: str) -> str:
    return f"vocab.{field}.txt"


def _ckpt_file(cfg: ExperimentConfig) -> str:
    return f"model.{cfg.variant}.{cfg.objective}.awpm"


def _eval_base(cfg: ExperimentConfig) -> str:
    return f"{cfg.setting}.{cfg.condition}.{cfg.variant}.{cfg.objective}"


def _staged(path: str, write_fn) -> None:
    """Write via write_fn(tmp) then rename; never leave partial outputs."""
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    tmp = path + ".tmp"
    try:
        write_fn(tmp)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    os.replace(tmp, path)


def _staged_text(path: str, text: str) -> None:
    def write(tmp):
        with open(tmp, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)

    _staged(path, write)


def _prov_comments(cfg: ExperimentConfig, corpus_sha: str | None) -> list[str]:
    out = [f"config: {config_json(cfg)}"]
    if corpus_sha is not None:
        out.append(f"corpus_sha256: {corpus_sha}")
    return out


def _prov_dict(cfg: ExperimentConfig, corpus_sha: str) -> dict:
    return {"config": config_to_flat(cfg), "corpus_sha256": corpus_sha}


def _pmap(fn, items, jobs: int):
    """Map preserving input order; jobs > 1 fans out to threads."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with concurrent.futures.ThreadPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items))


def _chunks(seq, size: int):
    return [seq[i : i + size] for i in range(0, len(seq), size)]


def _need(path: str, what: str) -> str:
    if not os.path.exists(path):
        raise ValueError(f"{what} not found: {path}")
    return path


def _check_challenge_variant(cfg: ExperimentConfig, allow: bool) -> None:
    # attendgru reads only the code stream, which the challenge condition
    # replaces with the anonymized AST; excluded unless explicitly allowed
    if cfg.condition == "challenge" and cfg.variant == "attendgru" and not allow:
        raise ValueError(
            'variant "attendgru" is excluded under the challenge condition '
            "(pass --allow-attendgru-challenge to run it anyway)"
        )


def _resolve(args) -> ExperimentConfig:
    overrides = {k: getattr(args, k) for k in _CONFIG_KEYS if getattr(args, k, None) is not None}
    return resolve_config(args.config, overrides)


def _check_built_coords(path: str, cfg: ExperimentConfig) -> None:
    """A run directory serves one (setting, condition); reject mixtures."""
    with open(path, encoding="utf-8") as f:
        for line in f:
            if not line.startswith("#"):
                return  # built without provenance; nothing to check
            if line.startswith("# config: "):
                built = json.loads(line[len("# config: ") :])
                if built.get("setting") != cfg.setting or built.get("condition") != cfg.condition:
                    raise ValueError(
                        f"out_dir was built for setting={built.get('setting')}"
                        f" condition={built.get('condition')},"
                        f" config wants setting={cfg.setting} condition={cfg.condition};"
                        " rebuild or use a different out_dir"
                    )
                return


def _load_built(cfg: ExperimentConfig, need_ast: bool):
    """Load the build outputs a training or evaluation run consumes."""
    d = cfg.out_dir
    _check_built_coords(_need(os.path.join(d, FILTERED), "filtered corpus"), cfg)
    recs = corpus.load_corpus(os.path.join(d, FILTERED))
    sha = corpus.corpus_file_hash(os.path.join(d, FILTERED))
    split = corpus.load_split(_need(os.path.join(d, SPLITS), "split file"))
    view = load_class_map(_need(os.path.join(d, CLASSMAP), "class map"))
    ast_vocab = None
    if need_ast:
        ast_vocab = load_vocab(_need(os.path.join(d, _vocab_file("ast")), "ast vocabulary"))
    vocabs = Vocabs(
        code=load_vocab(_need(os.path.join(d, _vocab_file("code")), "code vocabulary")),
        ast=ast_vocab,
        summary=load_vocab(_need(os.path.join(d, _vocab_file("summary")), "summary vocabulary")),
    )
    return recs, sha, split, view, vocabs


def cmd_synth(args) -> int:
    cfg = _resolve(args)
    kwargs = {}
    if args.template_classes is not None:
        kwargs["classes"] = tuple(args.template_classes.split(","))
    spec = synthgen.TemplateSpec(
        subject_fraction=args.subject_fraction,
        plain_accessor_fraction=args.plain_accessor_fraction,
        shuffle_fraction=args.shuffle_fraction,
        **kwargs,
    )
    recs = synthgen.generate(spec, args.n, seed=cfg.seed, projects=args.projects)
    comments = _prov_comments(cfg, None)
    comments.append(
        f"synth: n={args.n} projects={args.projects} classes={','.join(spec.classes)}"
        f" subject_fraction={spec.subject_fraction!r}"
        f" plain_accessor_fraction={spec.plain_accessor_fraction!r}"
        f" shuffle_fraction={spec.shuffle_fraction!r}"
    )
    _staged(cfg.corpus, lambda tmp: corpus.save_corpus(recs, tmp, comments=comments))
    print(f"wrote {len(recs)} records to {cfg.corpus}")
    return 0


def cmd_build(args) -> int:
    cfg = _resolve(args)
    recs = corpus.load_corpus(_need(cfg.corpus, "corpus"))
    in_sha = corpus.corpus_file_hash(cfg.corpus)
    recs = corpus.filter_quality(corpus.drop_autogenerated(recs))
    if not recs:
        raise ValueError("no records survive quality filtering")
    lexicon = default_lexicon()
    labels = _pmap(lambda r: extract_action_word(r.summary_tokens, lexicon), recs, args.jobs)
    stems = [l.stem for l in labels if l is not None]
    full_map = build_class_map(stems, k=cfg.classes)
    view_recs, view = derive_setting_view(recs, full_map, cfg.setting, lexicon)
    if not view_recs:
        raise ValueError(f"no records left under setting {cfg.setting!r}")
    split = corpus.split_by_project(view_recs, seed=cfg.split_seed, ratios=cfg.ratios)
    train_ids = set(split.train_ids)
    vocabs = build_vocabs([r for r in view_recs if r.id in train_ids], cfg.train_config())

    d = cfg.out_dir
    comments = _prov_comments(cfg, in_sha)
    _staged(os.path.join(d, FILTERED), lambda tmp: corpus.save_corpus(view_recs, tmp, comments=comments))
    _staged(os.path.join(d, SPLITS), lambda tmp: corpus.save_split(split, tmp, comments=comments))
    _staged(os.path.join(d, CLASSMAP_FULL), lambda tmp: save_class_map(full_map, tmp, comments=comments))
    _staged(os.path.join(d, CLASSMAP), lambda tmp: save_class_map(view, tmp, comments=comments))
    for field in ("code", "ast", "summary"):
        voc = getattr(vocabs, field)
        if voc is None:
            continue
        _staged(os.path.join(d, _vocab_file(field)), lambda tmp, v=voc: save_vocab(v, tmp, comments=comments))
    covered = sum(view.counts)
    print(f"top-{view.k} coverage: {view.coverage():.4f} ({covered}/{view.total_labeled} labeled records)")
    print(f"built {len(view_recs)} records into {d} (split {len(split.train_ids)}/{len(split.val_ids)}/{len(split.test_ids)})")
    return 0


def cmd_stats(args) -> int:
    cfg = _resolve(args)
    recs = corpus.load_corpus(_need(cfg.corpus, "corpus"))
    sha = corpus.corpus_file_hash(cfg.corpus)
    stats = corpus.corpus_stats(recs, default_lexicon(), top_m=cfg.top_m)
    obj = _prov_dict(cfg, sha)
    obj["stats"] = stats.to_dict()
    _staged_text(os.path.join(cfg.out_dir, "stats.json"), json.dumps(obj, indent=2) + "\n")
    pc = stats.position_counts
    n = stats.n_records
    print(f"records: {n}")
    print(f"with action word: {stats.n_with_action_word} ({stats.has_fraction:.4f})")
    for pos in (1, 2, 3):
        print(f"  position {pos}: {pc[pos]} ({pc[pos] / n:.4f})")
    print(f"  none: {pc['none']} ({pc['none'] / n:.4f})")
    print(f"only verb: {stats.only_verb_count} ({stats.only_verb_fraction:.4f} of labeled)")
    head = ", ".join(f"{s}:{c}" for s, c in stats.top_stems[:10])
    print(f"top stems: {head}")
    return 0


def cmd_train(args) -> int:
    cfg = _resolve(args)
    _check_challenge_variant(cfg, args.allow_attendgru_challenge)
    recs, sha, split, view, vocabs = _load_built(cfg, need_ast=cfg.variant == "ast_attendgru")
    tc = cfg.train_config()
    best, log = train(recs, split, tc, default_lexicon(), view, vocabs=vocabs)
    best.header["provenance"] = _prov_dict(cfg, sha)
    ckpt = os.path.join(cfg.out_dir, _ckpt_file(cfg))
    _staged(ckpt, lambda tmp: save_params(best, tmp))
    log_obj = _prov_dict(cfg, sha)
    log_obj.update(
        {
            "backend": kernels.backend_name(),
            "best_epoch": best.header["best_epoch"],
            "best_val_accuracy": best.header["val_accuracy"],
            "epochs": log,  # per-epoch seconds vary run to run; reports do not
        }
    )
    _staged_text(os.path.join(cfg.out_dir, "train_log.json"), json.dumps(log_obj, indent=2) + "\n")
    print(
        f"trained {cfg.variant}/{cfg.objective}: best epoch {best.header['best_epoch']}"
        f" val_accuracy {best.header['val_accuracy']:.4f}; wrote {ckpt}"
    )
    return 0


def _decode_tokens(params, tc, records, vocabs, jobs: int):
    """Greedy token lists per record id; chunked for the jobs flag."""
    out = {}
    batches = _chunks(records, 32)
    results = _pmap(lambda b: decode_greedy(params, tc, b, vocabs), batches, jobs)
    for batch, ids_list in zip(batches, results):
        for rec, ids in zip(batch, ids_list):
            out[rec.id] = [vocabs.summary.token_of(i) for i in ids]
    return out


def cmd_eval(args) -> int:
    cfg = _resolve(args)
    _check_challenge_variant(cfg, args.allow_attendgru_challenge)
    ckpt = os.path.join(cfg.out_dir, _ckpt_file(cfg))
    if not os.path.exists(ckpt):
        raise ValueError(f"checkpoint not found: {ckpt}")
    recs, sha, split, view, vocabs = _load_built(cfg, need_ast=cfg.variant == "ast_attendgru")
    params = load_params(ckpt, expected_vocab_hashes=vocabs.hashes())
    if params.variant != cfg.variant or params.objective != cfg.objective:
        raise ValueError(
            f"checkpoint is {params.variant}/{params.objective},"
            f" config wants {cfg.variant}/{cfg.objective}"
        )
    lexicon = default_lexicon()
    tc = cfg.train_config()
    test = split.select(recs, "test")
    if not test:
        raise ValueError("empty test part")
    gold = [label_record(r, lexicon, view) for r in test]

    bleu_report = None
    if cfg.objective == "action_word":
        logits_chunks = _pmap(
            lambda b: first_step_logits(params, tc, b, vocabs), _chunks(test, 32), args.jobs
        )
        pred = [int(row.argmax()) for chunk in logits_chunks for row in chunk]
    else:
        preds = _decode_tokens(params, tc, test, vocabs, args.jobs)
        pred = []
        for rec in test:
            label = extract_action_word(preds[rec.id], lexicon)
            pred.append(view.other_index if label is None else view.class_index(label.stem))
        forced = {}

        def _force_one(rec):
            ref = extract_action_word(rec.summary_tokens, lexicon)
            if ref is None:
                return None
            ids = decode_greedy(
                params, tc, [rec], vocabs, forced_first=[vocabs.summary.id_of(ref.surface)]
            )[0]
            return rec.id, [vocabs.summary.token_of(i) for i in ids]

        for item in _pmap(_force_one, test, args.jobs):
            if item is not None:
                forced[item[0]] = item[1]
        bleu_report = metrics.aw_partitioned_bleu(test, preds, forced, lexicon, view)

    matrix = metrics.confusion(gold, pred, view)
    # the two-class diagnostic treats "other" as filler, not a target class
    report = metrics.precision_recall_f(
        matrix,
        averaging="macro",
        exclude_other=cfg.setting == "getset",
        setting=cfg.setting,
        condition=cfg.condition,
    )
    recall_rows = metrics.per_word_recall(matrix)

    obj = _prov_dict(cfg, sha)
    obj.update(
        {
            "backend": kernels.backend_name(),
            "n_test": len(test),
            "classification": report.to_dict(),
            "per_word_recall": [[s, c, r] for s, c, r in recall_rows],
        }
    )
    if bleu_report is not None:
        obj["bleu"] = bleu_report.to_dict()

    fmt = (lambda b: f"{100 * b:.2f}") if args.bleu_percent else (lambda b: f"{b:.4f}")
    lines = [metrics.render_report_table(report)]
    lines.append("per-word recall:")
    for stem, count, rec_val in recall_rows:
        lines.append(f"  {stem}\t{count}\t{rec_val:.4f}")
    if bleu_report is not None:
        scale = " (x100)" if args.bleu_percent else ""
        lines.append(f"bleu{scale} [{bleu_report.bleu_variant}]:")
        lines.append(f"  default   {fmt(bleu_report.bleu_default)}")
        for key in ("bleu_aw_correct", "bleu_aw_incorrect", "bleu_aw_forced"):
            val = getattr(bleu_report, key)
            name = key.removeprefix("bleu_aw_")
            lines.append(f"  {name:<9} " + (fmt(val) if val is not None else "undefined (empty partition)"))
        lines.append(
            f"  partitions: correct={bleu_report.n_correct} incorrect={bleu_report.n_incorrect}"
            f" excluded={bleu_report.n_excluded}"
        )
    text = "\n".join(lines) + "\n"

    d, base = cfg.out_dir, _eval_base(cfg)
    _staged_text(os.path.join(d, f"eval.{base}.json"), json.dumps(obj, indent=2) + "\n")
    _staged_text(
        os.path.join(d, f"eval.{base}.jsonl"),
        json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n",
    )
    prov = "".join(f"# {c}\n" for c in _prov_comments(cfg, sha))
    _staged_text(os.path.join(d, f"eval.{base}.txt"), prov + text)
    _staged_text(os.path.join(d, f"confusion.{base}.tsv"), prov + metrics.confusion_to_tsv(matrix))
    perword = "".join(f"{s}\t{c}\t{r:.6f}\n" for s, c, r in recall_rows)
    _staged_text(os.path.join(d, f"perword.{base}.tsv"), prov + "stem\tgold\trecall\n" + perword)
    sys.stdout.write(text)
    print(f"wrote eval.{base}.json / .jsonl / .txt, confusion and per-word TSVs in {d}")
    return 0


def cmd_attn(args) -> int:
    cfg = _resolve(args)
    ckpt = os.path.join(cfg.out_dir, _ckpt_file(cfg))
    if not os.path.exists(ckpt):
        raise ValueError(f"checkpoint not found: {ckpt}")
    recs, sha, split, view, vocabs = _load_built(cfg, need_ast=cfg.variant == "ast_attendgru")
    params = load_params(ckpt, expected_vocab_hashes=vocabs.hashes())
    by_id = {r.id: r for r in recs}
    if args.record_id not in by_id:
        raise ValueError(f"record id {args.record_id!r} not found in the filtered corpus")
    rec = by_id[args.record_id]
    ref = extract_action_word(rec.summary_tokens, default_lexicon())
    if ref is None:
        raise ValueError(f"record {args.record_id!r} has no extractable action word to force")
    tc = cfg.train_config()
    prov = "".join(f"# {c}\n" for c in _prov_comments(cfg, sha))
    written = []
    for mode, gold_aw in (("unforced", None), ("forced", ref.surface)):
        rows, cols, matrix = dump_attention(rec, params, tc, vocabs, stream=args.stream, gold_aw=gold_aw)
        lines = [prov + f"# record: {rec.id} stream={args.stream} decode={mode}"
                 + (f" forced_token={gold_aw}" if gold_aw else "")]
        lines.append("emitted\t" + "\t".join(cols))
        for label, weights in zip(rows, matrix):
            lines.append(label + "\t" + "\t".join(f"{w:.6f}" for w in weights))
        path = os.path.join(cfg.out_dir, f"attn.{rec.id}.{args.stream}.{mode}.tsv")
        _staged_text(path, "\n".join(lines) + "\n")
        written.append(path)
    print("wrote " + " and ".join(written))
    return 0


_CONFIG_KEYS = tuple(config_to_flat(ExperimentConfig()).keys())


class _Parser(argparse.ArgumentParser):
    """Usage problems exit 1 with a single-line diagnostic."""

    def error(self, message):
        print(f"usage error: {message}", file=sys.stderr)
        sys.exit(1)


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", default=None, metavar="FILE", help="flat key=value config file")
    for key in _CONFIG_KEYS:
        p.add_argument(
            f"--{key.replace('_', '-')}",
            dest=key,
            default=None,
            metavar="V",
            help=f"override config key {key}",
        )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="awlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a synthetic corpus (seed comes from the seed key)")
    _add_config_flags(p)
    p.add_argument("--n", type=int, default=200, help="records to generate (default 200)")
    p.add_argument("--projects", type=int, default=10, help="synthetic projects (default 10)")
    p.add_argument(
        "--template-classes",
        default=None,
        metavar="A,B,...",
        help="restrict generation to these template classes (default: all)",
    )
    p.add_argument("--subject-fraction", type=float, default=0.10)
    p.add_argument("--plain-accessor-fraction", type=float, default=0.25)
    p.add_argument("--shuffle-fraction", type=float, default=0.10)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("build", help="filter corpus, build class maps, splits, vocabularies")
    _add_config_flags(p)
    p.add_argument("--jobs", type=int, default=1, help="parallel workers (default 1)")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("stats", help="action-word statistics for a corpus")
    _add_config_flags(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("train", help="train a model on the built outputs")
    _add_config_flags(p)
    p.add_argument("--allow-attendgru-challenge", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate one (setting, condition) run")
    _add_config_flags(p)
    p.add_argument("--jobs", type=int, default=1, help="parallel workers (default 1)")
    p.add_argument("--allow-attendgru-challenge", action="store_true")
    p.add_argument("--bleu-percent", action="store_true", help="format BLEU x100 in the text report")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("attn", help="attention TSVs (forced and unforced) for one record")
    _add_config_flags(p)
    p.add_argument("--record-id", required=True)
    p.add_argument("--stream", choices=("code", "ast"), default="code")
    p.set_defaults(func=cmd_attn)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError, OSError, json.JSONDecodeError) as e:
        msg = str(e).replace("\n", "; ")
        print(f"error: {msg}", file=sys.stderr)
        return 2
    except (FloatingPointError, ZeroDivisionError) as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return 3
    except RuntimeError as e:
        msg = str(e).replace("\n", "; ")
        if "non-finite" in msg or "overflow" in msg:
            print(f"numeric failure: {msg}", file=sys.stderr)
            return 3
        print(f"error: {msg}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
