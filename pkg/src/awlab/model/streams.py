"""Mapping records to model input token streams per condition.

Standard condition: the code stream is the code tokens, the ast stream the
flattened tree. Challenge condition: identifiers are off limits, so *both*
streams are the flattened anonymized tree; the one-encoder variant then sees
structure only, and the two-encoder variant degenerates to two views of it.
"""

from __future__ import annotations

from .. import astproc
from .vocab import Vocabulary, build_vocab

MODES = ("standard", "challenge")
FIELDS = ("code", "ast", "summary")


def source_streams(record, mode: str) -> tuple[tuple[str, ...], tuple[str, ...]]:
    """(code_stream, ast_stream) for one record under the given condition."""
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    if record.ast is not None:
        flat = tuple(astproc.flatten_ast(record.ast))
        anon = tuple(astproc.flatten_ast(astproc.challenge_transform(record.ast)))
    else:
        flat = ()
        anon = ()
    if mode == "challenge":
        if record.ast is None:
            raise ValueError(f"record {record.id}: challenge mode needs an ast")
        return anon, anon
    return tuple(record.code_tokens), flat


def stream_for_field(record, fld: str, mode: str) -> tuple[str, ...]:
    if fld == "summary":
        return tuple(record.summary_tokens)
    code, ast = source_streams(record, mode)
    if fld == "code":
        return code
    if fld == "ast":
        return ast
    raise ValueError(f"unknown field {fld!r}")


def vocab_for_field(records, fld: str, max_size: int, mode: str = "standard") -> Vocabulary:
    """Build a vocabulary from one stream of a record set (training split)."""
    return build_vocab((stream_for_field(r, fld, mode) for r in records), max_size)
