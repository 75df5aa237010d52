"""Forward, backward, and decoding for the attention encoder-decoder.

Two variants share everything but the second encoder: the one-encoder model
attends over a single source stream, the two-encoder model attends over code
and flattened-tree streams separately and concatenates the two contexts with
the decoder state before the output projection.

The decoder's initial state is the code encoder's final state. Dot-product
attention throughout. All math is float64; recurrences run on the selected
kernel backend, everything else is plain numpy.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .. import kernels
from ..stemmer import porter_stem
from ..textproc import ClassMap
from . import streams
from .params import ModelParams
from .vocab import END, PAD, START, UNK, Vocabulary

_GATES = ("z", "r", "h")


class Vocabs(NamedTuple):
    code: Vocabulary
    ast: Vocabulary | None
    summary: Vocabulary

    def hashes(self) -> dict:
        return {
            "code": self.code.content_hash(),
            "ast": self.ast.content_hash() if self.ast is not None else None,
            "summary": self.summary.content_hash(),
        }


def gru_step(x, h, weights):
    """One cell update for single vectors; weights maps Wz..bh to arrays."""
    x = np.asarray(x, dtype=float)
    h = np.asarray(h, dtype=float)
    z = _sigmoid(x @ weights["Wz"] + h @ weights["Uz"] + weights["bz"])
    r = _sigmoid(x @ weights["Wr"] + h @ weights["Ur"] + weights["br"])
    hc = np.tanh(x @ weights["Wh"] + (r * h) @ weights["Uh"] + weights["bh"])
    return (1.0 - z) * h + z * hc


def attend(query, keys, mask):
    """Dot-product attention for one query over T keys.

    Returns (context, weights); masked positions get weight exactly 0.
    """
    query = np.asarray(query, dtype=float)
    keys = np.asarray(keys, dtype=float)
    mask = np.asarray(mask, dtype=float)
    if not np.any(mask > 0):
        raise ValueError("attention with every position masked")
    scores = keys @ query
    scores = np.where(mask > 0, scores, -np.inf)
    scores = scores - np.max(scores)
    w = np.exp(scores)
    w = np.where(mask > 0, w, 0.0)
    w = w / np.sum(w)
    return w @ keys, w


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def record_ids(record, config, vocabs: Vocabs):
    """Encoder input ids for one record: (code_ids, ast_ids_or_None)."""
    code_stream, ast_stream = streams.source_streams(record, config.mode)
    code_ids = vocabs.code.encode(code_stream, config.max_code_len)
    if config.variant == "ast_attendgru":
        if not ast_stream:
            raise ValueError(f"record {record.id}: variant needs an ast stream")
        if vocabs.ast is None:
            raise ValueError("variant needs an ast vocabulary")
        return code_ids, vocabs.ast.encode(ast_stream, config.max_ast_len)
    if not code_stream:
        raise ValueError(f"record {record.id}: empty source stream")
    return code_ids, None


def _weights(params: ModelParams, prefix: str) -> dict:
    a = params.arrays
    return {f"{kind}{g}": a[f"{prefix}_{kind}{g}"] for g in _GATES for kind in ("W", "U", "b")}


def _check_ids(X, vocab_size, what):
    if X.size and (X.min() < 0 or X.max() >= vocab_size):
        raise ValueError(f"{what} id out of vocabulary range")


def _input_proj(params, prefix, Xe):
    """G* = Xe @ W* + b* for a (T, B, E) embedded input."""
    T, B, E = Xe.shape
    flat = Xe.reshape(T * B, E)
    a = params.arrays
    out = []
    for g in _GATES:
        G = flat @ a[f"{prefix}_W{g}"] + a[f"{prefix}_b{g}"]
        out.append(np.ascontiguousarray(G.reshape(T, B, -1)))
    return out


def _encode_batch(params, prefix, emb_name, X):
    """Run one encoder over (B, T) ids; returns a cache for backward."""
    B, T = X.shape
    a = params.arrays
    _check_ids(X, a[emb_name].shape[0], prefix)
    Xe = np.ascontiguousarray(a[emb_name][X].transpose(1, 0, 2))  # (T, B, E)
    mask = np.ascontiguousarray((X != PAD).T.astype(float))  # (T, B)
    Gz, Gr, Gh = _input_proj(params, prefix, Xe)
    h0 = np.zeros((B, a[f"{prefix}_Uz"].shape[0]))
    Hs, Z, R, HC = kernels.gru_forward(
        Gz, Gr, Gh, a[f"{prefix}_Uz"], a[f"{prefix}_Ur"], a[f"{prefix}_Uh"], h0, mask
    )
    return {
        "X": X,
        "Xe": Xe,
        "mask": mask,
        "G": (Gz, Gr, Gh),
        "h0": h0,
        "Hs": Hs,
        "Z": Z,
        "R": R,
        "HC": HC,
        "final": Hs[-1],
        "prefix": prefix,
        "emb": emb_name,
    }


def _encoder_backward(params, cache, dH, grads):
    """Accumulate encoder grads given dLoss/dHs; returns dh0."""
    a = params.arrays
    prefix, emb_name = cache["prefix"], cache["emb"]
    Gz, Gr, Gh = cache["G"]
    dGz, dGr, dGh, dh0, dUz, dUr, dUh = kernels.gru_backward(
        np.ascontiguousarray(dH),
        Gz,
        Gr,
        Gh,
        a[f"{prefix}_Uz"],
        a[f"{prefix}_Ur"],
        a[f"{prefix}_Uh"],
        cache["h0"],
        cache["mask"],
        cache["Hs"],
        cache["Z"],
        cache["R"],
        cache["HC"],
    )
    _acc(grads, f"{prefix}_Uz", dUz)
    _acc(grads, f"{prefix}_Ur", dUr)
    _acc(grads, f"{prefix}_Uh", dUh)
    T, B, E = cache["Xe"].shape
    flatXe = cache["Xe"].reshape(T * B, E)
    dXe = np.zeros_like(flatXe)
    for g, dG in zip(_GATES, (dGz, dGr, dGh)):
        flat = dG.reshape(T * B, -1)
        _acc(grads, f"{prefix}_W{g}", flatXe.T @ flat)
        _acc(grads, f"{prefix}_b{g}", flat.sum(axis=0))
        dXe += flat @ a[f"{prefix}_W{g}"].T
    dXe = dXe.reshape(T, B, E).transpose(1, 0, 2)  # back to (B, T, E)
    demb = grads.setdefault(emb_name, np.zeros_like(a[emb_name]))
    np.add.at(demb, cache["X"], dXe)
    return dh0


def _acc(grads, name, value):
    if name in grads:
        grads[name] += value
    else:
        grads[name] = value


def _attention_forward(Q, enc_cache):
    """Batched attention: Q (S, B, H) queries over one encoder's states.

    Returns (ctx (S,B,H), weights (B,S,T)) with hard zeros at masked keys.
    """
    K = enc_cache["Hs"].transpose(1, 0, 2)  # (B, T, H)
    kmask = enc_cache["mask"].T  # (B, T)
    if not np.all(kmask.sum(axis=1) > 0):
        raise ValueError("attention with every position masked")
    Qb = Q.transpose(1, 0, 2)  # (B, S, H)
    scores = np.einsum("bsh,bth->bst", Qb, K)
    scores = np.where(kmask[:, None, :] > 0, scores, -np.inf)
    scores -= scores.max(axis=2, keepdims=True)
    w = np.exp(scores)
    w = np.where(kmask[:, None, :] > 0, w, 0.0)
    w /= w.sum(axis=2, keepdims=True)
    ctx = np.einsum("bst,bth->bsh", w, K)
    return ctx.transpose(1, 0, 2), w


def _attention_backward(dctx, w, Q, enc_cache):
    """Backward of _attention_forward.

    dctx (S,B,H) -> (dQ (S,B,H), dK (T,B,H)); masked keys get zero grad
    because their weights are exactly zero.
    """
    K = enc_cache["Hs"].transpose(1, 0, 2)
    Qb = Q.transpose(1, 0, 2)
    dctxb = dctx.transpose(1, 0, 2)  # (B, S, H)
    dw = np.einsum("bsh,bth->bst", dctxb, K)
    dK = np.einsum("bst,bsh->bth", w, dctxb)
    dscores = w * (dw - np.sum(w * dw, axis=2, keepdims=True))
    dQ = np.einsum("bst,bth->bsh", dscores, K)
    dK += np.einsum("bst,bsh->bth", dscores, Qb)
    return dQ.transpose(1, 0, 2), dK.transpose(1, 0, 2)


def _forward_core(params, Xc, Xa, Yin):
    """Everything up to logits for teacher-forced decoding.

    Yin is (B, S) decoder input ids (START first). Returns (logits (B,S,V),
    cache).
    """
    enc_code = _encode_batch(params, "enc_code", "emb_code", Xc)
    enc_ast = None
    if params.variant == "ast_attendgru":
        enc_ast = _encode_batch(params, "enc_ast", "emb_ast", Xa)

    a = params.arrays
    B, S = Yin.shape
    _check_ids(Yin, a["emb_sum"].shape[0], "decoder input")
    Ye = np.ascontiguousarray(a["emb_sum"][Yin].transpose(1, 0, 2))  # (S, B, E)
    dmask = np.ascontiguousarray((Yin != PAD).T.astype(float))
    Gz, Gr, Gh = _input_proj(params, "dec", Ye)
    S_states, Zd, Rd, HCd = kernels.gru_forward(
        Gz, Gr, Gh, a["dec_Uz"], a["dec_Ur"], a["dec_Uh"], enc_code["final"], dmask
    )
    dec = {
        "X": Yin,
        "Xe": Ye,
        "mask": dmask,
        "G": (Gz, Gr, Gh),
        "h0": enc_code["final"],
        "Hs": S_states,
        "Z": Zd,
        "R": Rd,
        "HC": HCd,
        "prefix": "dec",
        "emb": "emb_sum",
    }

    ctx_code, w_code = _attention_forward(S_states, enc_code)
    parts = [ctx_code]
    w_ast = None
    if enc_ast is not None:
        ctx_ast, w_ast = _attention_forward(S_states, enc_ast)
        parts.append(ctx_ast)
    parts.append(S_states)
    V = np.concatenate(parts, axis=2)  # (S, B, D)
    logits = V @ a["out_W"] + a["out_b"]  # (S, B, n_out)
    cache = {
        "enc_code": enc_code,
        "enc_ast": enc_ast,
        "dec": dec,
        "V": V,
        "w_code": w_code,
        "w_ast": w_ast,
    }
    return logits.transpose(1, 0, 2), cache


def _log_softmax(logits):
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=-1, keepdims=True))


def loss_and_grads(params: ModelParams, Xc, Xa, Yin, Ytgt, tgt_mask):
    """Mean masked cross-entropy and gradients for every parameter.

    Ytgt/tgt_mask are (B, S); the mean is over unmasked targets. Works for
    both objectives: the classification head is the S=1 case with class ids
    as targets.
    """
    logits, cache = _forward_core(params, Xc, Xa, Yin)  # (B, S, V)
    B, S, Vn = logits.shape
    logp = _log_softmax(logits)
    n = float(tgt_mask.sum())
    if n == 0:
        raise ValueError("batch with no unmasked targets")
    picked = np.take_along_axis(logp, Ytgt[..., None], axis=2)[..., 0]
    loss = -float(np.sum(picked * tgt_mask)) / n

    P = np.exp(logp)
    dlogits = P
    np.put_along_axis(
        dlogits, Ytgt[..., None], np.take_along_axis(dlogits, Ytgt[..., None], axis=2) - 1.0, axis=2
    )
    dlogits *= tgt_mask[..., None] / n
    dlogits = dlogits.transpose(1, 0, 2)  # (S, B, V)

    a = params.arrays
    grads: dict = {}
    V = cache["V"]
    Sd, Bd, D = V.shape
    _acc(grads, "out_W", V.reshape(Sd * Bd, D).T @ dlogits.reshape(Sd * Bd, Vn))
    _acc(grads, "out_b", dlogits.reshape(Sd * Bd, Vn).sum(axis=0))
    dV = (dlogits.reshape(Sd * Bd, Vn) @ a["out_W"].T).reshape(Sd, Bd, D)

    H = a["dec_Uz"].shape[0]
    dctx_code = dV[:, :, :H]
    off = H
    dctx_ast = None
    if cache["enc_ast"] is not None:
        dctx_ast = dV[:, :, off : off + H]
        off += H
    dS = dV[:, :, off:].copy()

    S_states = cache["dec"]["Hs"]
    dQ, dK_code = _attention_backward(dctx_code, cache["w_code"], S_states, cache["enc_code"])
    dS += dQ
    dK_ast = None
    if cache["enc_ast"] is not None:
        dQ2, dK_ast = _attention_backward(dctx_ast, cache["w_ast"], S_states, cache["enc_ast"])
        dS += dQ2

    dh0_dec = _encoder_backward(params, cache["dec"], dS, grads)
    # decoder h0 is the code encoder's final (masked) state
    dK_code = dK_code.copy()
    dK_code[-1] += dh0_dec
    _encoder_backward(params, cache["enc_code"], dK_code, grads)
    if cache["enc_ast"] is not None:
        _encoder_backward(params, cache["enc_ast"], dK_ast, grads)
    return loss, grads


def _step_decode(params, h, prev_ids, enc_code, enc_ast):
    """One greedy-decode step: new state, logits, per-encoder weights."""
    a = params.arrays
    x = a["emb_sum"][prev_ids]  # (B, E)
    g = [np.ascontiguousarray(x @ a[f"dec_W{gt}"] + a[f"dec_b{gt}"]) for gt in _GATES]
    h = kernels.gru_cell(g[0], g[1], g[2], a["dec_Uz"], a["dec_Ur"], a["dec_Uh"], h)
    h = np.asarray(h)
    Q = h[None, :, :]
    ctx_code, w_code = _attention_forward(Q, enc_code)
    parts = [ctx_code[0]]
    w_ast = None
    if enc_ast is not None:
        ctx_ast, w_ast = _attention_forward(Q, enc_ast)
        parts.append(ctx_ast[0])
    parts.append(h)
    V = np.concatenate(parts, axis=1)
    logits = V @ a["out_W"] + a["out_b"]
    return h, logits, w_code[:, 0, :], (w_ast[:, 0, :] if w_ast is not None else None)


def _encode_sources(params, config, records, vocabs: Vocabs):
    Xc = np.array([record_ids(r, config, vocabs)[0] for r in records], dtype=np.int64)
    enc_ast = None
    if params.variant == "ast_attendgru":
        Xa = np.array([record_ids(r, config, vocabs)[1] for r in records], dtype=np.int64)
        enc_ast = _encode_batch(params, "enc_ast", "emb_ast", Xa)
    enc_code = _encode_batch(params, "enc_code", "emb_code", Xc)
    return enc_code, enc_ast


def decode_greedy(params, config, records, vocabs: Vocabs, forced_first=None, want_attention=False):
    """Batched greedy decoding from START, optionally forcing token 1.

    forced_first: sequence of summary-vocab ids (one per record) to emit at
    step 1 instead of the argmax; None entries mean unforced. Returns a list
    of token-id lists (END and padding stripped) and, when want_attention,
    per-record per-step attention weight rows for each encoder.
    """
    enc_code, enc_ast = _encode_sources(params, config, records, vocabs)
    B = len(records)
    h = enc_code["final"]
    prev = np.full(B, START, dtype=np.int64)
    done = np.zeros(B, dtype=bool)
    out_ids: list[list[int]] = [[] for _ in range(B)]
    att_code: list[list[np.ndarray]] = [[] for _ in range(B)]
    att_ast: list[list[np.ndarray]] = [[] for _ in range(B)]
    for step in range(config.max_summary_len):
        h, logits, w_code, w_ast = _step_decode(params, h, prev, enc_code, enc_ast)
        chosen = np.argmax(logits, axis=1)
        if step == 0 and forced_first is not None:
            for b, forced in enumerate(forced_first):
                if forced is not None:
                    chosen[b] = forced
        for b in range(B):
            if done[b]:
                continue
            tok = int(chosen[b])
            if tok == END:
                done[b] = True
                continue
            out_ids[b].append(tok)
            if want_attention:
                att_code[b].append(w_code[b])
                if w_ast is not None:
                    att_ast[b].append(w_ast[b])
        if np.all(done):
            break
        prev = chosen
    if want_attention:
        return out_ids, {"code": att_code, "ast": att_ast if enc_ast is not None else None}
    return out_ids


def predict_summary(record, params: ModelParams, config, vocabs: Vocabs) -> list[str]:
    """Greedy summary tokens for one record, without START/END."""
    ids = decode_greedy(params, config, [record], vocabs)[0]
    return [vocabs.summary.token_of(i) for i in ids]


def force_action_word(record, params: ModelParams, config, vocabs: Vocabs, gold_aw: str) -> list[str]:
    """Decode with the first emitted token pinned to gold_aw (UNK if OOV)."""
    forced = vocabs.summary.id_of(gold_aw)
    ids = decode_greedy(params, config, [record], vocabs, forced_first=[forced])[0]
    return [vocabs.summary.token_of(i) for i in ids]


def token_class_vector(vocab: Vocabulary, class_map: ClassMap) -> np.ndarray:
    """Class index per summary-vocab token; unstemmable tokens map to other."""
    out = np.empty(len(vocab), dtype=np.int64)
    for i, tok in enumerate(vocab.tokens):
        try:
            stem = porter_stem(tok)
        except ValueError:
            out[i] = class_map.other_index
            continue
        out[i] = class_map.class_index(stem)
    return out


def first_step_logits(params, config, records, vocabs: Vocabs):
    """Logits of the first decode step (input START) for a record batch."""
    enc_code, enc_ast = _encode_sources(params, config, records, vocabs)
    h = enc_code["final"]
    prev = np.full(len(records), START, dtype=np.int64)
    _, logits, _, _ = _step_decode(params, h, prev, enc_code, enc_ast)
    return logits


def _softmax(x):
    e = np.exp(x - x.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def classify_action_word(record, params: ModelParams, config, vocabs: Vocabs, class_map: ClassMap):
    """(class index, distribution over k+1 classes) for one record.

    A classification head gives both directly. A summary model takes the
    class of the stemmed first greedy token; its distribution is the first
    step's token distribution aggregated by token class, so it still sums
    to one even though its argmax can disagree with the reported class.
    """
    logits = first_step_logits(params, config, [record], vocabs)[0]
    if params.objective == "action_word":
        dist = _softmax(logits)
        return int(np.argmax(dist)), dist
    token_probs = _softmax(logits)
    cls_of = token_class_vector(vocabs.summary, class_map)
    dist = np.zeros(class_map.k + 1)
    np.add.at(dist, cls_of, token_probs)
    first = int(np.argmax(logits))
    return int(cls_of[first]), dist


def dump_attention(record, params: ModelParams, config, vocabs: Vocabs, stream: str = "code", gold_aw: str | None = None):
    """Attention rows per emitted summary token for one encoder stream.

    Returns (row_labels, col_labels, matrix): rows are the emitted tokens
    (forced decoding when gold_aw is given), columns the encoder's real
    (non-pad) source positions. Rows sum to 1.
    """
    if stream not in ("code", "ast"):
        raise ValueError(f"unknown attention stream {stream!r}")
    if stream == "ast" and params.variant != "ast_attendgru":
        raise ValueError("this variant has no ast encoder")
    forced = None
    if gold_aw is not None:
        forced = [vocabs.summary.id_of(gold_aw)]
    ids, att = decode_greedy(params, config, [record], vocabs, forced_first=forced, want_attention=True)
    rows = att[stream][0]
    row_labels = [vocabs.summary.token_of(i) for i in ids[0]]

    code_stream, ast_stream = streams.source_streams(record, config.mode)
    if stream == "code":
        toks = list(code_stream)[: config.max_code_len]
    else:
        toks = list(ast_stream)[: config.max_ast_len]
    n_real = len(toks)
    matrix = np.array([r[:n_real] for r in rows]) if rows else np.zeros((0, n_real))
    return row_labels, toks, matrix
