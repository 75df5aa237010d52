"""Deterministic synthetic corpora with structurally separable action classes.

Each record is built from a per-class template: getters carry a return node
and no parameters, setters the reverse, and every class leaves a distinct
structural footprint so models can be probed under both the standard and the
structure-only condition. Summaries open with the class verb (inflected), so
extraction recovers the class at position 1; a configurable slice uses the
"this method <verb>" form instead to exercise position-3 extraction.

A deliberate trap: a fraction of getters are plain field accessors whose code
and tree are identical to return-class records. No model can label those from
the input alone, which guarantees a nonempty action-word-incorrect partition
for the partitioned-BLEU diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import astproc
from .corpus import FunctionRecord

__all__ = ["TemplateSpec", "default_spec", "generate", "CLASS_VERBS"]

# class name -> inflected summary verb
CLASS_VERBS = {
    "get": "gets",
    "set": "sets",
    "return": "returns",
    "add": "adds",
    "remove": "removes",
    "initialize": "initializes",
    "check": "checks",
    "is": "is",
    "read": "reads",
    "create": "creates",
}

# nouns for fields/contexts; must stay clear of structure labels and verbs
DEFAULT_POOL = (
    "buffer",
    "bucket",
    "color",
    "depth",
    "entry",
    "items",
    "margin",
    "owner",
    "queue",
    "size",
    "state",
    "title",
    "token",
    "total",
    "value",
    "width",
)

_TYPES = ("int", "long", "float", "string")

# every structure label or keyword the templates emit; the identifier pool
# must be disjoint so the anonymization audit has no false positives
_RESERVED = frozenset(
    (
        "method",
        "type",
        "name",
        "params",
        "param",
        "body",
        "return",
        "assign",
        "call",
        "cond",
        "gt",
        "eq",
        "new",
        "void",
        "bool",
    )
    + _TYPES
)


@dataclass(frozen=True)
class TemplateSpec:
    classes: tuple[str, ...] = tuple(CLASS_VERBS)
    identifier_pool: tuple[str, ...] = DEFAULT_POOL
    type_pool: tuple[str, ...] = _TYPES
    subject_fraction: float = 0.10  # "this method <verb>" summaries
    plain_accessor_fraction: float = 0.25  # getters that mimic return-class code
    shuffle_fraction: float = 0.10  # summaries with field words reordered

    def __post_init__(self):
        if not self.classes:
            raise ValueError("spec needs at least one class")
        for c in self.classes:
            if c not in CLASS_VERBS:
                raise ValueError(f"unknown class in spec: {c!r}")
        if len(set(self.classes)) != len(self.classes):
            raise ValueError("duplicate class in spec")
        if len(self.identifier_pool) < 5:
            raise ValueError("identifier pool too small")
        clash = set(self.identifier_pool) & _RESERVED
        if clash:
            raise ValueError(f"identifier pool collides with structure tokens: {sorted(clash)}")
        for fname in ("subject_fraction", "plain_accessor_fraction", "shuffle_fraction"):
            v = getattr(self, fname)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{fname} must be in [0, 1]")


def default_spec() -> TemplateSpec:
    return TemplateSpec()


def _ids(words):
    return " ".join(f"id:{w}" for w in words)


def _build(cls: str, field, ctx, typ: str, plain: bool):
    """Code tokens, AST text, and the post-verb summary continuation."""
    f = list(field)
    d = list(ctx)
    p = d[0]
    if cls == "get":
        if plain:
            code = [typ, *f, "return", *f]
            ast = f"(method (type {typ}) (name {_ids(f)}) (body (return {_ids(f)})))"
        else:
            code = [typ, "get", *f, "return", *f]
            ast = f"(method (type {typ}) (name id:get {_ids(f)}) (body (return {_ids(f)})))"
        cont = ["the", *f, "of", "the", *d]
    elif cls == "return":
        code = [typ, *f, "return", *f]
        ast = f"(method (type {typ}) (name {_ids(f)}) (body (return {_ids(f)})))"
        cont = ["a", *f, "for", "the", *d]
    elif cls == "set":
        code = ["void", "set", *f, typ, p, *f, p]
        ast = (
            f"(method (type void) (name id:set {_ids(f)})"
            f" (params (param (type {typ}) id:{p}))"
            f" (body (assign {_ids(f)} id:{p})))"
        )
        cont = ["the", *f, "to", "the", "given", *d]
    elif cls == "add":
        code = ["void", "add", *f, typ, p, *f, "append", p]
        ast = (
            f"(method (type void) (name id:add {_ids(f)})"
            f" (params (param (type {typ}) id:{p}))"
            f" (body (call id:append {_ids(f)} id:{p})))"
        )
        cont = ["a", *f, "to", "the", *d, "pile"]
    elif cls == "remove":
        # call takes only the param, so the anonymized tree cannot be
        # mistaken for the add template at any field width
        code = ["void", "remove", *f, typ, p, "erase", p]
        ast = (
            f"(method (type void) (name id:remove {_ids(f)})"
            f" (params (param (type {typ}) id:{p}))"
            f" (body (call id:erase id:{p})))"
        )
        cont = ["the", *f, "from", "the", *d]
    elif cls == "initialize":
        code = ["void", "initialize", *f, *f, "new", typ]
        ast = (
            f"(method (type void) (name id:initialize {_ids(f)})"
            f" (body (assign {_ids(f)} (new (type {typ})))))"
        )
        cont = ["the", *f, "with", "a", *d]
    elif cls == "check":
        code = ["bool", "check", *f, "if", *f, "0"]
        ast = f"(method (type bool) (name id:check {_ids(f)}) (body (cond (gt {_ids(f)} lit:0))))"
        cont = ["whether", "the", *f, "is", "in", "the", *d]
    elif cls == "is":
        code = ["bool", "is", *f, "return", *f, "0"]
        ast = f"(method (type bool) (name id:is {_ids(f)}) (body (return (eq {_ids(f)} lit:0))))"
        cont = ["true", "when", "the", *f, "is", "on", *d]
    elif cls == "read":
        code = [typ, "read", *f, "string", p, *f, "open", p]
        ast = (
            f"(method (type {typ}) (name id:read {_ids(f)})"
            f" (params (param (type string) id:{p}))"
            f" (body (assign {_ids(f)} (call id:open id:{p}))))"
        )
        cont = ["the", *f, "data", "from", "the", *d]
    elif cls == "create":
        code = [typ, "create", *f, "return", "new", typ]
        ast = (
            f"(method (type {typ}) (name id:create {_ids(f)})"
            f" (body (return (new (type {typ})))))"
        )
        cont = ["a", "new", *f, "for", "the", *d]
    else:  # pragma: no cover - spec validation rejects unknown classes
        raise ValueError(f"unknown class {cls!r}")
    return code, ast, cont


def generate(spec: TemplateSpec, n: int, seed: int, projects: int = 10):
    """n records, deterministic per (spec, seed), class-balanced within one.

    Record i gets class i mod k, so counts differ by at most one. Projects are
    blocks of consecutive records, which keeps every project class-balanced
    and project-disjoint splits honest. Each record draws from its own
    counter-based generator, so generation order is irrelevant.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if projects < 3:
        raise ValueError("need at least 3 projects for downstream splits")
    k = len(spec.classes)
    records = []
    for i in range(n):
        cls = spec.classes[i % k]
        rng = np.random.default_rng([seed, i])
        len_f = int(rng.integers(1, 3))  # 1-2 field words
        len_d = int(rng.integers(1, 4))  # 1-3 context words
        words = [str(w) for w in rng.choice(spec.identifier_pool, size=len_f + len_d, replace=False)]
        field, ctx = words[:len_f], words[len_f:]
        typ = str(rng.choice(spec.type_pool))
        subject = bool(rng.random() < spec.subject_fraction)
        plain = cls == "get" and bool(rng.random() < spec.plain_accessor_fraction)
        shuffled = bool(rng.random() < spec.shuffle_fraction)

        code, ast_text, cont = _build(cls, field, ctx, typ, plain)
        if shuffled and len_f > 1:
            # summary names the field words in reverse of the code order
            flipped = list(reversed(field))
            cont = [flipped[field.index(t)] if t in field else t for t in cont]
        summary = (["this", "method"] if subject else []) + [CLASS_VERBS[cls]] + cont
        records.append(
            FunctionRecord(
                id=f"syn{i:05d}",
                project_id=f"proj{(i // k) % projects:02d}",
                language="synthetic",
                code_tokens=tuple(code),
                ast=astproc.parse_sexpr(ast_text),
                summary_tokens=tuple(summary),
            )
        )
    return records
