"""Tokenization, action-word extraction, and action-word class maps.

The action word of a summary is the verb that broadly classifies what the
function does ("returns ...", "sets ...", "checks ..."), with "is"/"to"/"if"
admitted as honorary action words. Verbs are recognized against a closed,
user-extensible lexicon rather than a POS tagger; matching is stem-based so
inflected surface forms ("sorts", "initializes") hit their base entries.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources

from .stemmer import porter_stem

__all__ = [
    "tokenize_code",
    "porter_stem",
    "VerbLexicon",
    "ActionWordLabel",
    "ClassMap",
    "default_lexicon",
    "load_lexicon",
    "extract_action_word",
    "build_class_map",
    "label_record",
    "derive_setting_view",
    "save_class_map",
    "load_class_map",
]

EXCEPTION_WORDS = ("is", "to", "if")
OTHER_CLASS = "other"

_NON_ALNUM = re.compile(r"[^A-Za-z0-9]+")
# camelCase boundaries: lower->upper, letter->digit, digit->letter
_CAMEL = re.compile(r"(?<=[a-z])(?=[A-Z])|(?<=[A-Za-z])(?=[0-9])|(?<=[0-9])(?=[A-Za-z])")


def tokenize_code(source: str) -> list[str]:
    """Split arbitrary source text into lowercase alphanumeric tokens.

    Non-alphanumeric characters separate tokens and are dropped; camelCase
    boundaries (lower->upper, letter->digit, digit->letter) split further;
    digit runs survive as their own tokens. "convertMp3toWav" gives
    [convert, mp, 3, to, wav].
    """
    out = []
    for chunk in _NON_ALNUM.split(source):
        if not chunk:
            continue
        for piece in _CAMEL.split(chunk):
            if piece:
                out.append(piece.lower())
    return out


def _stemmable(token: str) -> bool:
    return bool(token) and all("a" <= c <= "z" for c in token)


@dataclass(frozen=True)
class VerbLexicon:
    """Closed verb list plus the subject sequences extraction may skip."""

    verbs: frozenset[str]
    simple_subjects: frozenset[tuple[str, ...]] = frozenset(
        {("this", "method"), ("this", "function"), ("it",)}
    )
    _stems: frozenset[str] = field(init=False, repr=False, compare=False, default=frozenset())

    def __post_init__(self):
        for v in self.verbs:
            if v != v.lower():
                raise ValueError(f"lexicon entries must be lowercase: {v!r}")
        stems = frozenset(porter_stem(v) for v in self.verbs if _stemmable(v))
        object.__setattr__(self, "_stems", stems)

    def is_verb(self, token: str) -> bool:
        """Surface or stem membership: 'sorts' matches the entry 'sort'."""
        if token in self.verbs:
            return True
        return _stemmable(token) and porter_stem(token) in self._stems


def load_lexicon(path) -> VerbLexicon:
    """One verb per line, '#' starts a comment, blank lines ignored."""
    verbs = set()
    with open(path, encoding="utf-8") as f:
        for line in f:
            word = line.split("#", 1)[0].strip()
            if word:
                verbs.add(word)
    return VerbLexicon(verbs=frozenset(verbs))


def default_lexicon() -> VerbLexicon:
    """The bundled ~200-verb lexicon."""
    ref = resources.files("awlab.data").joinpath("verbs.txt")
    verbs = set()
    for line in ref.read_text(encoding="utf-8").splitlines():
        word = line.split("#", 1)[0].strip()
        if word:
            verbs.add(word)
    return VerbLexicon(verbs=frozenset(verbs))


@dataclass(frozen=True)
class ActionWordLabel:
    position: int  # 1-based token position, in {1, 2, 3}
    surface: str
    stem: str


def extract_action_word(summary_tokens, lexicon: VerbLexicon) -> ActionWordLabel | None:
    """Find the action word of a summary, or None.

    Rules, in order:
      1. First token "is"/"to"/"if": that token, position 1, never stemmed.
      2. Otherwise the candidate is the first token after an optional
         simple-subject prefix (longest subject match wins); if that token is
         a lexicon verb and sits at position <= 3, it is the action word.
      3. Otherwise there is none.

    Deeper positions are reachable only by consuming a recognized subject:
    "this method sorts the list" yields position 3, but an arbitrary
    non-subject prefix does not license scanning past position 1.
    """
    tokens = list(summary_tokens)
    if not tokens:
        raise ValueError("summary_tokens must be nonempty")
    first = tokens[0]
    if first in EXCEPTION_WORDS:
        return ActionWordLabel(position=1, surface=first, stem=first)
    skip = 0
    for subj in sorted(lexicon.simple_subjects, key=len, reverse=True):
        if tuple(tokens[: len(subj)]) == subj:
            skip = len(subj)
            break
    if skip >= len(tokens) or skip > 2:
        return None
    candidate = tokens[skip]
    if not lexicon.is_verb(candidate):
        return None
    if candidate in EXCEPTION_WORDS:
        return ActionWordLabel(position=skip + 1, surface=candidate, stem=candidate)
    return ActionWordLabel(position=skip + 1, surface=candidate, stem=porter_stem(candidate))


@dataclass(frozen=True)
class ClassMap:
    """Ordered top-k action-word stems plus the implicit trailing "other"."""

    classes: tuple[str, ...]
    counts: tuple[int, ...]
    total_labeled: int = 0

    def __post_init__(self):
        if len(self.classes) != len(self.counts):
            raise ValueError("classes and counts must align")
        if len(set(self.classes)) != len(self.classes):
            raise ValueError("class stems must be distinct")
        if OTHER_CLASS in self.classes:
            raise ValueError('"other" is implicit, not a named class')

    @property
    def k(self) -> int:
        return len(self.classes)

    @property
    def other_index(self) -> int:
        return len(self.classes)

    @property
    def all_class_names(self) -> tuple[str, ...]:
        return self.classes + (OTHER_CLASS,)

    def class_index(self, stem: str) -> int:
        try:
            return self.classes.index(stem)
        except ValueError:
            return self.other_index

    def coverage(self) -> float:
        """Fraction of training labels covered by the named classes."""
        if not self.total_labeled:
            return 0.0
        return sum(self.counts) / self.total_labeled


def build_class_map(labels, k: int) -> ClassMap:
    """Top-k stems by training frequency, ties broken lexicographically."""
    if k < 1:
        raise ValueError("k must be >= 1")
    labels = list(labels)
    if not labels:
        raise ValueError("labels must be nonempty")
    counts = Counter(labels)
    if len(counts) < k:
        raise ValueError(f"need at least {k} distinct stems, have {len(counts)}")
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:k]
    return ClassMap(
        classes=tuple(s for s, _ in ranked),
        counts=tuple(c for _, c in ranked),
        total_labeled=len(labels),
    )


def label_record(record, lexicon: VerbLexicon, class_map: ClassMap) -> int:
    """Gold class index of a record: extracted stem mapped, else "other"."""
    label = extract_action_word(record.summary_tokens, lexicon)
    if label is None:
        return class_map.other_index
    return class_map.class_index(label.stem)


SETTINGS = ("top40", "top10", "top10n", "getset")
_GETSET_EXCLUDED = ("get", "set", "return")


def derive_setting_view(records, class_map: ClassMap, setting: str, lexicon: VerbLexicon | None = None):
    """Project a full class map (and records) onto an evaluation setting.

    top40/top10 keep the most common 40/10 classes (displaced stems fall into
    "other", records untouched). top10n keeps the ten most common classes
    after deleting get/set/return from the ranking. getset keeps the fixed
    class list [get, set] and filters records to those two gold classes; the
    lexicon (default bundled) is needed there to read each gold stem. Views
    inherit the parent's counts; getset's fixed order may break the
    non-increasing-count convention of freshly built maps, by design.
    """
    records = list(records)
    if setting in ("top40", "top10"):
        want = 40 if setting == "top40" else 10
        if class_map.k < want:
            raise ValueError(f"{setting} view needs {want} named classes, map has {class_map.k}")
        view = ClassMap(class_map.classes[:want], class_map.counts[:want], class_map.total_labeled)
        return records, view
    if setting == "top10n":
        kept = [
            (s, c)
            for s, c in zip(class_map.classes, class_map.counts)
            if s not in _GETSET_EXCLUDED
        ]
        if len(kept) < 10:
            raise ValueError("top10n view needs 10 named classes after removing get/set/return")
        kept = kept[:10]
        view = ClassMap(
            tuple(s for s, _ in kept), tuple(c for _, c in kept), class_map.total_labeled
        )
        return records, view
    if setting == "getset":
        for stem in ("get", "set"):
            if stem not in class_map.classes:
                raise ValueError(f'getset view requires class "{stem}" in the map')
        counts = {s: c for s, c in zip(class_map.classes, class_map.counts)}
        view = ClassMap(("get", "set"), (counts["get"], counts["set"]), class_map.total_labeled)
        if lexicon is None:
            lexicon = default_lexicon()
        filtered = []
        for rec in records:
            label = extract_action_word(rec.summary_tokens, lexicon)
            if label is not None and label.stem in ("get", "set"):
                filtered.append(rec)
        return filtered, view
    raise ValueError(f"unknown setting {setting!r}, expected one of {SETTINGS}")


def save_class_map(class_map: ClassMap, path, comments=()) -> None:
    """Ordered "stem<TAB>count" lines; "other" stays implicit."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(f"# total_labeled={class_map.total_labeled}\n")
        for c in comments:
            f.write(f"# {c}\n")
        for stem, count in zip(class_map.classes, class_map.counts):
            f.write(f"{stem}\t{count}\n")


def load_class_map(path) -> ClassMap:
    classes, counts = [], []
    total = 0
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                m = re.search(r"total_labeled=(\d+)", line)
                if m:
                    total = int(m.group(1))
                continue
            stem, count = line.split("\t")
            classes.append(stem)
            counts.append(int(count))
    return ClassMap(tuple(classes), tuple(counts), total)
