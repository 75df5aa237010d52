"""Model parameters: named float64 arrays plus a provenance header.

Initialization draws uniform(-0.08, 0.08) for every parameter from one seeded
generator, walking the arrays in their canonical enumeration order (the order
init_params creates them), so a (config, seed) pair pins every weight.

Checkpoint format, little-endian throughout:

    magic "AWPM" | u32 version | u32 header_len | header JSON (utf-8)
    then per array, sorted by name:
    u32 name_len | name utf-8 | u32 rank | rank x u64 dims | float64 data

The header records variant, objective, mode, dims, seed, vocabulary content
hashes, and the class list for classification heads. Loading verifies magic,
version, and exact byte counts; saving refuses non-finite values.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

MAGIC = b"AWPM"
FORMAT_VERSION = 1
INIT_SCALE = 0.08

_GATES = ("z", "r", "h")


@dataclass
class ModelParams:
    header: dict
    arrays: dict

    def copy(self) -> "ModelParams":
        return ModelParams(
            header=json.loads(json.dumps(self.header)),
            arrays={k: v.copy() for k, v in self.arrays.items()},
        )

    def check_finite(self) -> None:
        for name, arr in self.arrays.items():
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"non-finite values in parameter {name}")

    @property
    def variant(self) -> str:
        return self.header["variant"]

    @property
    def objective(self) -> str:
        return self.header["objective"]

    @property
    def dims(self) -> dict:
        return self.header["dims"]


def _gru_param_names(prefix: str):
    for g in _GATES:
        yield f"{prefix}_W{g}"
        yield f"{prefix}_U{g}"
        yield f"{prefix}_b{g}"


def param_order(variant: str) -> list[str]:
    """Canonical enumeration order used for initialization."""
    names = ["emb_code"]
    if variant == "ast_attendgru":
        names.append("emb_ast")
    names.append("emb_sum")
    names.extend(_gru_param_names("enc_code"))
    if variant == "ast_attendgru":
        names.extend(_gru_param_names("enc_ast"))
    names.extend(_gru_param_names("dec"))
    names.extend(["out_W", "out_b"])
    return names


def _shapes(variant, emb, hidden, vocab_code, vocab_ast, vocab_summary, n_out):
    n_ctx = 2 if variant == "ast_attendgru" else 1
    shapes = {"emb_code": (vocab_code, emb), "emb_sum": (vocab_summary, emb)}
    if variant == "ast_attendgru":
        shapes["emb_ast"] = (vocab_ast, emb)
    for prefix in ("enc_code", "enc_ast", "dec"):
        if prefix == "enc_ast" and variant != "ast_attendgru":
            continue
        for g in _GATES:
            shapes[f"{prefix}_W{g}"] = (emb, hidden)
            shapes[f"{prefix}_U{g}"] = (hidden, hidden)
            shapes[f"{prefix}_b{g}"] = (hidden,)
    shapes["out_W"] = ((n_ctx + 1) * hidden, n_out)
    shapes["out_b"] = (n_out,)
    return shapes


def init_params(
    variant: str,
    objective: str,
    mode: str,
    emb: int,
    hidden: int,
    vocab_code: int,
    vocab_ast: int,
    vocab_summary: int,
    n_out: int,
    seed: int,
    vocab_hashes: dict | None = None,
    classes=None,
    lengths: dict | None = None,
) -> ModelParams:
    if variant not in ("attendgru", "ast_attendgru"):
        raise ValueError(f"unknown variant {variant!r}")
    if objective not in ("summary", "action_word"):
        raise ValueError(f"unknown objective {objective!r}")
    if min(emb, hidden, vocab_code, vocab_summary, n_out) < 1:
        raise ValueError("all dimensions must be >= 1")
    shapes = _shapes(variant, emb, hidden, vocab_code, vocab_ast, vocab_summary, n_out)
    rng = np.random.default_rng(seed)
    arrays = {
        name: rng.uniform(-INIT_SCALE, INIT_SCALE, size=shapes[name])
        for name in param_order(variant)
    }
    header = {
        "format_version": FORMAT_VERSION,
        "variant": variant,
        "objective": objective,
        "mode": mode,
        "seed": seed,
        "dims": {
            "emb": emb,
            "hidden": hidden,
            "vocab_code": vocab_code,
            "vocab_ast": vocab_ast if variant == "ast_attendgru" else 0,
            "vocab_summary": vocab_summary,
            "n_out": n_out,
        },
        "lengths": dict(lengths or {}),
        "vocab_hashes": dict(vocab_hashes or {}),
        "classes": list(classes) if classes is not None else None,
    }
    return ModelParams(header=header, arrays=arrays)


def save_params(params: ModelParams, path) -> None:
    params.check_finite()
    header_bytes = json.dumps(params.header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<II", FORMAT_VERSION, len(header_bytes)))
        f.write(header_bytes)
        for name in sorted(params.arrays):
            arr = np.ascontiguousarray(params.arrays[name], dtype="<f8")
            name_b = name.encode("utf-8")
            f.write(struct.pack("<I", len(name_b)))
            f.write(name_b)
            f.write(struct.pack("<I", arr.ndim))
            f.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
            f.write(arr.tobytes())


def _read_exact(f, n: int, what: str) -> bytes:
    data = f.read(n)
    if len(data) != n:
        raise ValueError(f"truncated checkpoint while reading {what}")
    return data


def load_params(path, expected_vocab_hashes: dict | None = None) -> ModelParams:
    with open(path, "rb") as f:
        if _read_exact(f, 4, "magic") != MAGIC:
            raise ValueError("not a checkpoint file (bad magic)")
        version, header_len = struct.unpack("<II", _read_exact(f, 8, "version"))
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        header = json.loads(_read_exact(f, header_len, "header").decode("utf-8"))
        arrays = {}
        while True:
            lead = f.read(4)
            if not lead:
                break
            if len(lead) != 4:
                raise ValueError("truncated checkpoint while reading array name length")
            (name_len,) = struct.unpack("<I", lead)
            name = _read_exact(f, name_len, "array name").decode("utf-8")
            (rank,) = struct.unpack("<I", _read_exact(f, 4, f"rank of {name}"))
            dims = struct.unpack(f"<{rank}Q", _read_exact(f, 8 * rank, f"dims of {name}"))
            count = 1
            for d in dims:
                count *= d
            data = _read_exact(f, 8 * count, f"data of {name}")
            arrays[name] = np.frombuffer(data, dtype="<f8").reshape(dims).copy()
    if expected_vocab_hashes:
        stored = header.get("vocab_hashes", {})
        for key, want in expected_vocab_hashes.items():
            have = stored.get(key)
            if have != want:
                raise ValueError(
                    f"vocabulary hash mismatch for {key!r}: checkpoint has {have}, expected {want}"
                )
    return ModelParams(header=header, arrays=arrays)
