"""Reference GRU kernels in pure numpy.

The kernels own only the recurrent part. Callers precompute the input
projections G* = X @ W* + b* for the whole sequence, which turns the per-step
work into three small (B,H)x(H,H) products plus elementwise gate math. The
update rule weights the candidate by the update gate:

    z = sigmoid(Gz[t] + h Uz)
    r = sigmoid(Gr[t] + h Ur)
    hc = tanh(Gh[t] + (r*h) Uh)
    h' = (1 - z)*h + z*hc

Masked steps (mask[t] == 0) leave h unchanged, so padded rows carry their
final real state forward and an all-pad row keeps h0.

All arrays are float64 and C-contiguous; shapes are (T, B, H) for sequences,
(H, H) for recurrent weights, (B, H) for states, (T, B) for the mask.
"""

from __future__ import annotations

import numpy as np

__all__ = ["gru_forward", "gru_backward", "gru_cell"]


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def gru_cell(gz, gr, gh, Uz, Ur, Uh, h):
    """One unmasked step from precomputed input projections gz/gr/gh (B,H)."""
    z = _sigmoid(gz + h @ Uz)
    r = _sigmoid(gr + h @ Ur)
    hc = np.tanh(gh + (r * h) @ Uh)
    return (1.0 - z) * h + z * hc


def gru_forward(Gz, Gr, Gh, Uz, Ur, Uh, h0, mask):
    """Run the recurrence over T steps.

    Returns (H, Z, R, HC): the masked hidden states and the raw gate values
    per step, everything the backward pass needs besides the inputs.
    """
    T, B, H = Gz.shape
    Hs = np.empty((T, B, H))
    Z = np.empty((T, B, H))
    R = np.empty((T, B, H))
    HC = np.empty((T, B, H))
    h = h0
    for t in range(T):
        z = _sigmoid(Gz[t] + h @ Uz)
        r = _sigmoid(Gr[t] + h @ Ur)
        hc = np.tanh(Gh[t] + (r * h) @ Uh)
        hnew = (1.0 - z) * h + z * hc
        m = mask[t][:, None]
        h = m * hnew + (1.0 - m) * h
        Hs[t] = h
        Z[t] = z
        R[t] = r
        HC[t] = hc
    return Hs, Z, R, HC


def gru_backward(dH, Gz, Gr, Gh, Uz, Ur, Uh, h0, mask, Hs, Z, R, HC):
    """Backprop through the recurrence.

    dH supplies the upstream gradient for every step's (masked) output state;
    gradient w.r.t. the final state must already be folded into dH[-1].
    Returns (dGz, dGr, dGh, dh0, dUz, dUr, dUh). The dG* feed the caller's
    big input-side matmuls for dX, dW*, db*.
    """
    T, B, H = Gz.shape
    dGz = np.empty((T, B, H))
    dGr = np.empty((T, B, H))
    dGh = np.empty((T, B, H))
    dUz = np.zeros((H, H))
    dUr = np.zeros((H, H))
    dUh = np.zeros((H, H))
    carry = np.zeros((B, H))
    for t in range(T - 1, -1, -1):
        dht = dH[t] + carry
        m = mask[t][:, None]
        carry_masked = dht * (1.0 - m)
        dht = dht * m
        h_prev = Hs[t - 1] if t > 0 else h0
        z = Z[t]
        r = R[t]
        hc = HC[t]

        dhc = dht * z
        dz = dht * (hc - h_prev)
        dh_prev = dht * (1.0 - z)

        dah = dhc * (1.0 - hc * hc)
        dGh[t] = dah
        drh = dah @ Uh.T
        dr = drh * h_prev
        dh_prev += drh * r
        dUh += (r * h_prev).T @ dah

        daz = dz * z * (1.0 - z)
        dGz[t] = daz
        dh_prev += daz @ Uz.T
        dUz += h_prev.T @ daz

        dar = dr * r * (1.0 - r)
        dGr[t] = dar
        dh_prev += dar @ Ur.T
        dUr += h_prev.T @ dar

        carry = dh_prev + carry_masked
    return dGz, dGr, dGh, carry, dUz, dUr, dUh
