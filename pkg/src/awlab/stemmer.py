"""Porter stemming, the classic five-step 1980 algorithm.

Implements the rule tables as published (so "abli" -> "able" and no "logi"
rule, the two spots where later C implementations departed). Words of length
1 or 2 are returned unchanged, the conventional guard every faithful
implementation applies. Intended for the action-word pipeline: inputs are
single lowercase ASCII-letter tokens, anything else is rejected.
"""

__all__ = ["porter_stem"]

_VOWELS = "aeiou"


class _Word:
    """Mutable word buffer with the algorithm's measure/ends/replace helpers.

    `self.end` is the index of the last live character; `self.tail` marks the
    start of the candidate suffix after a successful ends() probe.
    """

    def __init__(self, word: str):
        self.b = list(word)
        self.end = len(word) - 1
        self.tail = 0

    def is_consonant(self, i: int) -> bool:
        c = self.b[i]
        if c in _VOWELS:
            return False
        if c == "y":
            # y is a consonant at the front, and after a vowel
            return True if i == 0 else not self.is_consonant(i - 1)
        return True

    def measure(self) -> int:
        """Count of vowel-consonant runs in the stem b[0:tail+1]."""
        n = 0
        i = 0
        limit = self.tail
        while True:
            if i > limit:
                return n
            if not self.is_consonant(i):
                break
            i += 1
        i += 1
        while True:
            while True:
                if i > limit:
                    return n
                if self.is_consonant(i):
                    break
                i += 1
            i += 1
            n += 1
            while True:
                if i > limit:
                    return n
                if not self.is_consonant(i):
                    break
                i += 1
            i += 1

    def vowel_in_stem(self) -> bool:
        return any(not self.is_consonant(i) for i in range(self.tail + 1))

    def double_consonant(self, i: int) -> bool:
        if i < 1 or self.b[i] != self.b[i - 1]:
            return False
        return self.is_consonant(i)

    def cvc(self, i: int) -> bool:
        """consonant-vowel-consonant ending at i, last not w/x/y."""
        if i < 2 or not self.is_consonant(i) or self.is_consonant(i - 1) or not self.is_consonant(i - 2):
            return False
        return self.b[i] not in "wxy"

    def ends(self, s: str) -> bool:
        n = len(s)
        if n > self.end + 1:
            return False
        if self.b[self.end - n + 1 : self.end + 1] != list(s):
            return False
        self.tail = self.end - n
        return True

    def set_suffix(self, s: str) -> None:
        self.b[self.tail + 1 :] = list(s)
        self.end = self.tail + len(s)

    def replace_suffix_if_measure(self, s: str) -> None:
        if self.measure() > 0:
            self.set_suffix(s)

    # The five steps.

    def step1ab(self) -> None:
        if self.b[self.end] == "s":
            if self.ends("sses"):
                self.end -= 2
            elif self.ends("ies"):
                self.set_suffix("i")
            elif self.b[self.end - 1] != "s":
                self.end -= 1
        if self.ends("eed"):
            if self.measure() > 0:
                self.end -= 1
        elif (self.ends("ed") or self.ends("ing")) and self.vowel_in_stem():
            self.end = self.tail
            if self.ends("at"):
                self.set_suffix("ate")
            elif self.ends("bl"):
                self.set_suffix("ble")
            elif self.ends("iz"):
                self.set_suffix("ize")
            elif self.double_consonant(self.end):
                self.end -= 1
                if self.b[self.end] in "lsz":
                    self.end += 1
            elif self.measure() == 1 and self.cvc(self.end):
                self.set_suffix("e")

    def step1c(self) -> None:
        if self.ends("y") and self.vowel_in_stem():
            self.b[self.end] = "i"

    _STEP2 = (
        ("ational", "ate"), ("tional", "tion"), ("enci", "ence"), ("anci", "ance"),
        ("izer", "ize"), ("abli", "able"), ("alli", "al"), ("entli", "ent"),
        ("eli", "e"), ("ousli", "ous"), ("ization", "ize"), ("ation", "ate"),
        ("ator", "ate"), ("alism", "al"), ("iveness", "ive"), ("fulness", "ful"),
        ("ousness", "ous"), ("aliti", "al"), ("iviti", "ive"), ("biliti", "ble"),
    )

    _STEP3 = (
        ("icate", "ic"), ("ative", ""), ("alize", "al"), ("iciti", "ic"),
        ("ical", "ic"), ("ful", ""), ("ness", ""),
    )

    def step2(self) -> None:
        for suffix, repl in self._STEP2:
            if self.ends(suffix):
                self.replace_suffix_if_measure(repl)
                return

    def step3(self) -> None:
        for suffix, repl in self._STEP3:
            if self.ends(suffix):
                self.replace_suffix_if_measure(repl)
                return

    _STEP4 = (
        "al", "ance", "ence", "er", "ic", "able", "ible", "ant", "ement",
        "ment", "ent", "ion", "ou", "ism", "ate", "iti", "ous", "ive", "ize",
    )

    def step4(self) -> None:
        for suffix in self._STEP4:
            if self.ends(suffix):
                if suffix == "ion" and self.b[self.tail] not in "st":
                    continue
                if self.measure() > 1:
                    self.end = self.tail
                return

    def step5(self) -> None:
        self.tail = self.end
        if self.b[self.end] == "e":
            a = self.measure()
            if a > 1 or (a == 1 and not self.cvc(self.end - 1)):
                self.end -= 1
        if self.b[self.end] == "l" and self.double_consonant(self.end) and self.measure() > 1:
            self.end -= 1

    def result(self) -> str:
        return "".join(self.b[: self.end + 1])


def porter_stem(word: str) -> str:
    """Stem one lowercase ASCII word. Raises ValueError on anything else."""
    if not word or not all("a" <= c <= "z" for c in word):
        raise ValueError(f"porter_stem expects a nonempty lowercase ASCII-letter word, got {word!r}")
    if len(word) <= 2:
        return word
    w = _Word(word)
    w.step1ab()
    w.step1c()
    w.step2()
    w.step3()
    w.step4()
    w.step5()
    return w.result()
