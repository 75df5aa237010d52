"""Corpora of function/summary records: load, validate, filter, split, sample.

Records live in JSON-lines files (one object per line, UTF-8, LF) with keys
id, project, language, code_tokens, ast (s-expression string), summary_tokens,
and optional raw_code. Splits are project-disjoint and reproducible across
machines: projects are ordered by a keyed 64-bit FNV-1a hash, then assigned
greedily to the split whose remaining need they best fill.
"""

from __future__ import annotations

import hashlib
import json
import struct
from collections import Counter
from dataclasses import dataclass

from . import astproc
from .textproc import EXCEPTION_WORDS, VerbLexicon, extract_action_word

__all__ = [
    "FunctionRecord",
    "DatasetSplit",
    "ActionWordStats",
    "load_corpus",
    "save_corpus",
    "filter_quality",
    "drop_autogenerated",
    "split_by_project",
    "subsample",
    "corpus_stats",
    "save_split",
    "load_split",
    "corpus_file_hash",
]

LANGUAGES = ("java", "c_cpp", "synthetic")

# challenge placeholders are the only tokens allowed to carry uppercase
_CASE_EXEMPT = {astproc.ID_PLACEHOLDER, astproc.LIT_PLACEHOLDER}

DEFAULT_MIN_SUMMARY = 3
DEFAULT_MAX_SUMMARY = 13
DEFAULT_MAX_CODE = 100
AUTOGEN_PATTERNS = ("generated by", "do not edit")


@dataclass(frozen=True)
class FunctionRecord:
    id: str
    project_id: str
    language: str
    code_tokens: tuple[str, ...]
    ast: astproc.AstNode | None
    summary_tokens: tuple[str, ...]
    raw_code: str | None = None

    def __post_init__(self):
        if self.language not in LANGUAGES:
            raise ValueError(f"record {self.id}: unknown language {self.language!r}")
        for name in ("code_tokens", "summary_tokens"):
            for tok in getattr(self, name):
                if not tok or tok != tok.strip() or any(c.isspace() for c in tok):
                    raise ValueError(f"record {self.id}: bad token {tok!r} in {name}")
                if tok.lower() != tok and tok not in _CASE_EXEMPT:
                    raise ValueError(f"record {self.id}: token not lowercase: {tok!r}")


def _record_from_json(obj: dict, line_no: int) -> FunctionRecord:
    for key in ("id", "project", "language", "code_tokens", "ast", "summary_tokens"):
        if key not in obj:
            raise ValueError(f"line {line_no}: missing field '{key}'")
    ast_text = obj["ast"]
    ast = astproc.parse_sexpr(ast_text) if ast_text else None
    return FunctionRecord(
        id=str(obj["id"]),
        project_id=str(obj["project"]),
        language=obj["language"],
        code_tokens=tuple(obj["code_tokens"]),
        ast=ast,
        summary_tokens=tuple(obj["summary_tokens"]),
        raw_code=obj.get("raw_code"),
    )


def load_corpus(path) -> list[FunctionRecord]:
    records = []
    seen = set()
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise ValueError(f"line {line_no}: malformed JSON ({e.msg})") from e
            try:
                rec = _record_from_json(obj, line_no)
            except ValueError:
                raise
            except Exception as e:  # bad nested shapes surface with the line number
                raise ValueError(f"line {line_no}: malformed record ({e})") from e
            if rec.id in seen:
                raise ValueError(f"duplicate record id {rec.id!r} (line {line_no})")
            seen.add(rec.id)
            records.append(rec)
    return records


def save_corpus(records, path, comments=()) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for c in comments:
            f.write(f"# {c}\n")
        for rec in records:
            obj = {
                "id": rec.id,
                "project": rec.project_id,
                "language": rec.language,
                "code_tokens": list(rec.code_tokens),
                "ast": astproc.serialize_sexpr(rec.ast) if rec.ast is not None else "",
                "summary_tokens": list(rec.summary_tokens),
            }
            if rec.raw_code is not None:
                obj["raw_code"] = rec.raw_code
            f.write(json.dumps(obj, ensure_ascii=False, separators=(",", ":")) + "\n")


def filter_quality(
    records,
    min_summary_len: int = DEFAULT_MIN_SUMMARY,
    max_summary_len: int = DEFAULT_MAX_SUMMARY,
    max_code_len: int = DEFAULT_MAX_CODE,
):
    """Keep records whose summary and code lengths are in range, order kept."""
    if min_summary_len < 1 or max_summary_len < min_summary_len:
        raise ValueError("need 1 <= min_summary_len <= max_summary_len")
    return [
        r
        for r in records
        if min_summary_len <= len(r.summary_tokens) <= max_summary_len
        and 0 < len(r.code_tokens) <= max_code_len
    ]


def drop_autogenerated(records, patterns=AUTOGEN_PATTERNS):
    """Drop records whose raw_code matches a blacklist substring (case-insensitive)."""
    lowered = tuple(p.lower() for p in patterns)
    out = []
    for r in records:
        raw = (r.raw_code or "").lower()
        if any(p in raw for p in lowered):
            continue
        out.append(r)
    return out


@dataclass(frozen=True)
class DatasetSplit:
    train_ids: tuple[str, ...]
    val_ids: tuple[str, ...]
    test_ids: tuple[str, ...]
    seed: int
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1)

    def part(self, name: str) -> tuple[str, ...]:
        return {"train": self.train_ids, "val": self.val_ids, "test": self.test_ids}[name]

    def select(self, records, part: str) -> list[FunctionRecord]:
        wanted = set(self.part(part))
        return [r for r in records if r.id in wanted]


_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


def _fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h


def _project_key(seed: int, project_id: str) -> int:
    """64-bit FNV-1a over the seed (8 bytes little-endian) then the id bytes."""
    payload = struct.pack("<Q", seed & _MASK64) + project_id.encode("utf-8")
    return _fnv1a64(payload)


def split_by_project(records, ratios, seed: int) -> DatasetSplit:
    """Deterministic project-disjoint three-way split.

    Projects are visited in keyed-hash order; each goes to the split whose
    remaining record deficit it can fill the most (ties: the tighter deficit,
    then train > val > test). That keeps small splits reachable even when one
    project dwarfs the rest.
    """
    records = list(records)
    ratios = tuple(float(x) for x in ratios)
    if len(ratios) != 3 or any(x <= 0 for x in ratios):
        raise ValueError("ratios must be three positive fractions")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {sum(ratios)}")

    by_project: dict[str, list[str]] = {}
    for r in records:
        by_project.setdefault(r.project_id, []).append(r.id)
    if len(by_project) < 3:
        raise ValueError(
            f"need >= 3 distinct projects for a project-disjoint split, have {len(by_project)}"
        )

    order = sorted(by_project, key=lambda p: (_project_key(seed, p), p))
    total = len(records)
    targets = [ratio * total for ratio in ratios]
    counts = [0, 0, 0]
    assigned: list[list[str]] = [[], [], []]
    for project in order:
        ids = by_project[project]
        n = len(ids)
        deficits = [targets[i] - counts[i] for i in range(3)]
        useful = [min(max(d, 0.0), n) for d in deficits]
        best = min(range(3), key=lambda i: (-useful[i], deficits[i], i))
        assigned[best].extend(ids)
        counts[best] += n

    in_part = {}
    for part_idx, ids in enumerate(assigned):
        for rid in ids:
            in_part[rid] = part_idx
    ordered_parts: list[list[str]] = [[], [], []]
    for r in records:  # corpus order within each part
        ordered_parts[in_part[r.id]].append(r.id)
    return DatasetSplit(
        train_ids=tuple(ordered_parts[0]),
        val_ids=tuple(ordered_parts[1]),
        test_ids=tuple(ordered_parts[2]),
        seed=seed,
        ratios=ratios,
    )


def subsample(records, n: int, seed: int):
    """n records by seeded uniform choice, original relative order kept."""
    records = list(records)
    if not 0 <= n <= len(records):
        raise ValueError(f"cannot sample {n} of {len(records)} records")
    import random

    indices = list(range(len(records)))
    random.Random(seed).shuffle(indices)
    keep = sorted(indices[:n])
    return [records[i] for i in keep]


@dataclass(frozen=True)
class ActionWordStats:
    n_records: int
    position_counts: dict  # {1: int, 2: int, 3: int, "none": int}
    only_verb_count: int  # records whose action word is their only lexicon verb
    top_stems: tuple  # ((stem, count), ...) most common first

    @property
    def n_with_action_word(self) -> int:
        return self.n_records - self.position_counts["none"]

    @property
    def has_fraction(self) -> float:
        return self.n_with_action_word / self.n_records

    @property
    def only_verb_fraction(self) -> float:
        """Fraction of with-action-word records, matching how it is quoted."""
        n = self.n_with_action_word
        return self.only_verb_count / n if n else 0.0

    def to_dict(self) -> dict:
        return {
            "n_records": self.n_records,
            "n_with_action_word": self.n_with_action_word,
            "has_fraction": self.has_fraction,
            "position_counts": {str(k): v for k, v in self.position_counts.items()},
            "only_verb_count": self.only_verb_count,
            "only_verb_fraction": self.only_verb_fraction,
            "top_stems": [list(t) for t in self.top_stems],
        }


def corpus_stats(records, lexicon: VerbLexicon, top_m: int = 40) -> ActionWordStats:
    """Action-word coverage, position distribution, and top stems.

    "Only verb" counts a with-action-word record none of whose other tokens is
    a lexicon verb; the three exception words never count as extra verbs (they
    are function words everywhere but position 1).
    """
    records = list(records)
    if not records:
        raise ValueError("corpus_stats needs a nonempty corpus")
    positions = {1: 0, 2: 0, 3: 0, "none": 0}
    only_verb = 0
    stems: Counter = Counter()
    for rec in records:
        label = extract_action_word(rec.summary_tokens, lexicon)
        if label is None:
            positions["none"] += 1
            continue
        positions[label.position] += 1
        stems[label.stem] += 1
        aw_index = label.position - 1
        extra = sum(
            1
            for i, tok in enumerate(rec.summary_tokens)
            if i != aw_index and tok not in EXCEPTION_WORDS and lexicon.is_verb(tok)
        )
        if extra == 0:
            only_verb += 1
    top = sorted(stems.items(), key=lambda kv: (-kv[1], kv[0]))[:top_m]
    return ActionWordStats(
        n_records=len(records),
        position_counts=positions,
        only_verb_count=only_verb,
        top_stems=tuple(top),
    )


def save_split(split: DatasetSplit, path, comments=()) -> None:
    """Header line, then train/val/test id lists separated by blank lines."""
    r = split.ratios
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(f"# seed={split.seed} ratios={r[0]:g},{r[1]:g},{r[2]:g}\n")
        for c in comments:
            f.write(f"# {c}\n")
        for i, part in enumerate((split.train_ids, split.val_ids, split.test_ids)):
            if i:
                f.write("\n")
            for rid in part:
                f.write(rid + "\n")


def load_split(path) -> DatasetSplit:
    with open(path, encoding="utf-8") as f:
        header = f.readline().strip()
        if not header.startswith("#"):
            raise ValueError("split file missing header line")
        fields = dict(kv.split("=", 1) for kv in header.lstrip("# ").split())
        seed = int(fields["seed"])
        ratios = tuple(float(x) for x in fields["ratios"].split(","))
        parts: list[list[str]] = [[]]
        for line in f:
            line = line.rstrip("\n")
            if line.startswith("#"):
                continue
            if line == "":
                if len(parts) < 3:
                    parts.append([])
                continue
            parts[-1].append(line)
    while len(parts) < 3:
        parts.append([])
    return DatasetSplit(
        train_ids=tuple(parts[0]),
        val_ids=tuple(parts[1]),
        test_ids=tuple(parts[2]),
        seed=seed,
        ratios=ratios,  # type: ignore[arg-type]
    )


def corpus_file_hash(path) -> str:
    """sha256 of the corpus file bytes, for provenance stamps."""
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()
