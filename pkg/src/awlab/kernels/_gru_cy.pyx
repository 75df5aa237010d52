# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled GRU kernels: same contract as the numpy reference module.

The recurrent matmuls go through BLAS dgemm; gate math is explicit C loops.
Row-major products are expressed as column-major products of the transposes,
so no buffer is ever copied or reordered.
"""

import numpy as np

from libc.math cimport exp, tanh
from scipy.linalg.cython_blas cimport dgemm

__all__ = ["gru_forward", "gru_backward", "gru_cell"]


cdef void _mm_nn(double[:, ::1] A, double[:, ::1] B, double[:, ::1] C, double beta) noexcept nogil:
    # C = A @ B + beta * C, all row-major
    cdef int M = A.shape[0], K = A.shape[1], N = B.shape[1]
    cdef double alpha = 1.0
    cdef char cN = b'N'
    dgemm(&cN, &cN, &N, &M, &K, &alpha, &B[0, 0], &N, &A[0, 0], &K, &beta, &C[0, 0], &N)


cdef void _mm_nt(double[:, ::1] A, double[:, ::1] B, double[:, ::1] C, double beta) noexcept nogil:
    # C = A @ B.T + beta * C, A (M,K), B (N,K), C (M,N)
    cdef int M = A.shape[0], K = A.shape[1], N = B.shape[0]
    cdef double alpha = 1.0
    cdef char cN = b'N', cT = b'T'
    dgemm(&cT, &cN, &N, &M, &K, &alpha, &B[0, 0], &K, &A[0, 0], &K, &beta, &C[0, 0], &N)


cdef void _mm_tn(double[:, ::1] A, double[:, ::1] B, double[:, ::1] C, double beta) noexcept nogil:
    # C = A.T @ B + beta * C, A (K,M), B (K,N), C (M,N)
    cdef int K = A.shape[0], M = A.shape[1], N = B.shape[1]
    cdef double alpha = 1.0
    cdef char cN = b'N', cT = b'T'
    dgemm(&cN, &cT, &N, &M, &K, &alpha, &B[0, 0], &N, &A[0, 0], &M, &beta, &C[0, 0], &N)


cdef inline double _sig(double x) noexcept nogil:
    return 1.0 / (1.0 + exp(-x))


def gru_cell(double[:, ::1] gz, double[:, ::1] gr, double[:, ::1] gh,
             double[:, ::1] Uz, double[:, ::1] Ur, double[:, ::1] Uh,
             double[:, ::1] h):
    cdef Py_ssize_t B = gz.shape[0], H = gz.shape[1], i, j
    out = np.empty((B, H))
    cdef double[:, ::1] az = np.array(gz, copy=True)
    cdef double[:, ::1] ar = np.array(gr, copy=True)
    cdef double[:, ::1] ah = np.array(gh, copy=True)
    cdef double[:, ::1] rh = np.empty((B, H))
    cdef double[:, ::1] o = out
    cdef double z, r, hc
    with nogil:
        _mm_nn(h, Uz, az, 1.0)
        _mm_nn(h, Ur, ar, 1.0)
        for i in range(B):
            for j in range(H):
                rh[i, j] = _sig(ar[i, j]) * h[i, j]
        _mm_nn(rh, Uh, ah, 1.0)
        for i in range(B):
            for j in range(H):
                z = _sig(az[i, j])
                hc = tanh(ah[i, j])
                o[i, j] = (1.0 - z) * h[i, j] + z * hc
    return out


def gru_forward(double[:, :, ::1] Gz, double[:, :, ::1] Gr, double[:, :, ::1] Gh,
                double[:, ::1] Uz, double[:, ::1] Ur, double[:, ::1] Uh,
                double[:, ::1] h0, double[:, ::1] mask):
    cdef Py_ssize_t T = Gz.shape[0], B = Gz.shape[1], H = Gz.shape[2], t, i, j
    Hs_np = np.empty((T, B, H))
    Z_np = np.empty((T, B, H))
    R_np = np.empty((T, B, H))
    HC_np = np.empty((T, B, H))
    cdef double[:, :, ::1] Hs = Hs_np, Z = Z_np, R = R_np, HC = HC_np
    cdef double[:, ::1] h = np.array(h0, copy=True)
    cdef double[:, ::1] az = np.empty((B, H))
    cdef double[:, ::1] ar = np.empty((B, H))
    cdef double[:, ::1] ah = np.empty((B, H))
    cdef double[:, ::1] rh = np.empty((B, H))
    cdef double z, r, hc, hnew, m
    with nogil:
        for t in range(T):
            for i in range(B):
                for j in range(H):
                    az[i, j] = Gz[t, i, j]
                    ar[i, j] = Gr[t, i, j]
                    ah[i, j] = Gh[t, i, j]
            _mm_nn(h, Uz, az, 1.0)
            _mm_nn(h, Ur, ar, 1.0)
            for i in range(B):
                for j in range(H):
                    r = _sig(ar[i, j])
                    R[t, i, j] = r
                    rh[i, j] = r * h[i, j]
            _mm_nn(rh, Uh, ah, 1.0)
            for i in range(B):
                m = 0.0
                for j in range(H):
                    z = _sig(az[i, j])
                    hc = tanh(ah[i, j])
                    Z[t, i, j] = z
                    HC[t, i, j] = hc
                    hnew = (1.0 - z) * h[i, j] + z * hc
                    m = mask[t, i]
                    h[i, j] = m * hnew + (1.0 - m) * h[i, j]
                    Hs[t, i, j] = h[i, j]
    return Hs_np, Z_np, R_np, HC_np


def gru_backward(double[:, :, ::1] dH,
                 double[:, :, ::1] Gz, double[:, :, ::1] Gr, double[:, :, ::1] Gh,
                 double[:, ::1] Uz, double[:, ::1] Ur, double[:, ::1] Uh,
                 double[:, ::1] h0, double[:, ::1] mask,
                 double[:, :, ::1] Hs, double[:, :, ::1] Z, double[:, :, ::1] R,
                 double[:, :, ::1] HC):
    cdef Py_ssize_t T = Gz.shape[0], B = Gz.shape[1], H = Gz.shape[2], t, i, j
    dGz_np = np.empty((T, B, H))
    dGr_np = np.empty((T, B, H))
    dGh_np = np.empty((T, B, H))
    dUz_np = np.zeros((H, H))
    dUr_np = np.zeros((H, H))
    dUh_np = np.zeros((H, H))
    cdef double[:, :, ::1] dGz = dGz_np, dGr = dGr_np, dGh = dGh_np
    cdef double[:, ::1] dUz = dUz_np, dUr = dUr_np, dUh = dUh_np
    cdef double[:, ::1] carry = np.zeros((B, H))
    cdef double[:, ::1] dht = np.empty((B, H))
    cdef double[:, ::1] carry_masked = np.empty((B, H))
    cdef double[:, ::1] dh_prev = np.empty((B, H))
    cdef double[:, ::1] dhc = np.empty((B, H))
    cdef double[:, ::1] dz = np.empty((B, H))
    cdef double[:, ::1] dr = np.empty((B, H))
    cdef double[:, ::1] drh = np.empty((B, H))
    cdef double[:, ::1] rh = np.empty((B, H))
    cdef double[:, ::1] h_prev
    cdef double m, z, r, hc, hp, d
    with nogil:
        for t in range(T - 1, -1, -1):
            if t > 0:
                h_prev = Hs[t - 1]
            else:
                h_prev = h0
            for i in range(B):
                m = mask[t, i]
                for j in range(H):
                    d = dH[t, i, j] + carry[i, j]
                    carry_masked[i, j] = d * (1.0 - m)
                    d = d * m
                    z = Z[t, i, j]
                    hc = HC[t, i, j]
                    hp = h_prev[i, j]
                    dhc[i, j] = d * z
                    dz[i, j] = d * (hc - hp)
                    dh_prev[i, j] = d * (1.0 - z)
                    # through tanh into the candidate pre-activation
                    dGh[t, i, j] = dhc[i, j] * (1.0 - hc * hc)
                    rh[i, j] = R[t, i, j] * hp
            _mm_nt(dGh[t], Uh, drh, 0.0)
            _mm_tn(rh, dGh[t], dUh, 1.0)
            for i in range(B):
                for j in range(H):
                    r = R[t, i, j]
                    hp = h_prev[i, j]
                    dr[i, j] = drh[i, j] * hp
                    dh_prev[i, j] += drh[i, j] * r
                    z = Z[t, i, j]
                    dGz[t, i, j] = dz[i, j] * z * (1.0 - z)
                    dGr[t, i, j] = dr[i, j] * r * (1.0 - r)
            _mm_nt(dGz[t], Uz, dh_prev, 1.0)
            _mm_tn(h_prev, dGz[t], dUz, 1.0)
            _mm_nt(dGr[t], Ur, dh_prev, 1.0)
            _mm_tn(h_prev, dGr[t], dUr, 1.0)
            for i in range(B):
                for j in range(H):
                    carry[i, j] = dh_prev[i, j] + carry_masked[i, j]
    out_carry = np.empty((B, H))
    cdef double[:, ::1] oc = out_carry
    for i in range(B):
        for j in range(H):
            oc[i, j] = carry[i, j]
    return dGz_np, dGr_np, dGh_np, out_carry, dUz_np, dUr_np, dUh_np
