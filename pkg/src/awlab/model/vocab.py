"""Token vocabularies with reserved special ids.

Ids 0-3 are fixed: PAD, START, END, UNK. The remaining max_size - 4 slots go
to the most frequent tokens of the training split, ties broken
lexicographically, so two machines building from the same split agree
byte-for-byte.
"""

from __future__ import annotations

import hashlib
from collections import Counter
from dataclasses import dataclass, field

PAD, START, END, UNK = 0, 1, 2, 3
PAD_TOKEN, START_TOKEN, END_TOKEN, UNK_TOKEN = "<pad>", "<s>", "</s>", "<unk>"
SPECIAL_TOKENS = (PAD_TOKEN, START_TOKEN, END_TOKEN, UNK_TOKEN)


@dataclass(frozen=True)
class Vocabulary:
    tokens: tuple[str, ...]  # id -> token, specials first
    max_size: int
    token_to_id: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if self.tokens[:4] != SPECIAL_TOKENS:
            raise ValueError("vocabulary must start with the four special tokens")
        if len(self.tokens) > self.max_size:
            raise ValueError("vocabulary exceeds its max_size")
        mapping = {t: i for i, t in enumerate(self.tokens)}
        if len(mapping) != len(self.tokens):
            raise ValueError("duplicate token in vocabulary")
        object.__setattr__(self, "token_to_id", mapping)

    def __len__(self) -> int:
        return len(self.tokens)

    def id_of(self, token: str) -> int:
        return self.token_to_id.get(token, UNK)

    def token_of(self, idx: int) -> str:
        return self.tokens[idx]

    def encode(self, tokens, length: int) -> list[int]:
        """Ids right-padded (or truncated) to exactly `length`."""
        ids = [self.id_of(t) for t in tokens[:length]]
        return ids + [PAD] * (length - len(ids))

    def content_hash(self) -> str:
        payload = "\n".join(self.tokens).encode("utf-8")
        return hashlib.sha256(payload).hexdigest()


def build_vocab(token_seqs, max_size: int) -> Vocabulary:
    """Vocabulary over an iterable of token sequences (training split only).

    Keeps the max_size - 4 most frequent tokens; ties go to the
    lexicographically smaller token.
    """
    if max_size < 5:
        raise ValueError("max_size must be at least 5 (4 specials + 1 token)")
    counts: Counter = Counter()
    for seq in token_seqs:
        counts.update(seq)
    for special in SPECIAL_TOKENS:
        counts.pop(special, None)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    kept = tuple(tok for tok, _ in ranked[: max_size - 4])
    return Vocabulary(tokens=SPECIAL_TOKENS + kept, max_size=max_size)


def save_vocab(vocab: Vocabulary, path, comments=()) -> None:
    """One token per line in id order; first line records max_size.

    Comment lines after the header start with "# " (tokens cannot contain
    spaces, so the loader can skip them safely).
    """
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(f"# max_size={vocab.max_size}\n")
        for c in comments:
            f.write(f"# {c}\n")
        for tok in vocab.tokens:
            f.write(tok + "\n")


def load_vocab(path) -> Vocabulary:
    with open(path, encoding="utf-8") as f:
        header = f.readline().strip()
        if not header.startswith("# max_size="):
            raise ValueError("vocabulary file missing max_size header")
        max_size = int(header.split("=", 1)[1])
        tokens = tuple(
            line.rstrip("\n")
            for line in f
            if line.rstrip("\n") and not line.startswith("# ")
        )
    return Vocabulary(tokens=tokens, max_size=max_size)
