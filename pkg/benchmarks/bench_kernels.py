"""Benchmark the compiled GRU kernels against the pure-numpy fallback.

Runs the same forward+backward workload through both backends, checks they
agree, and reports per-call times and the speedup. The compiled backend is
optional; a missing build is reported, not an error.
"""

import argparse
import time

import numpy as np

from awlab.kernels import _gru_np

try:
    from awlab.kernels import _gru_cy
except ImportError:
    _gru_cy = None


def make_case(rng, T, B, H):
    # recurrent scale < 1 keeps backprop through T steps in a trained-net
    # regime instead of the exploding-gradient one
    G = [rng.standard_normal((T, B, H)) for _ in range(3)]
    U = [rng.standard_normal((H, H)) * 0.08 for _ in range(3)]
    h0 = np.zeros((B, H))
    mask = np.ones((T, B))
    mask[int(T * 0.7) :, B // 2 :] = 0.0  # ragged tail, like padded batches
    dH = rng.standard_normal((T, B, H))
    return G, U, h0, mask, dH


def run(mod, case, reps):
    (Gz, Gr, Gh), (Uz, Ur, Uh), h0, mask, dH = case
    t_f = t_b = 0.0
    out = None
    for _ in range(reps):
        t0 = time.perf_counter()
        Hs, Z, R, HC = mod.gru_forward(Gz, Gr, Gh, Uz, Ur, Uh, h0, mask)
        t_f += time.perf_counter() - t0
        t0 = time.perf_counter()
        out = mod.gru_backward(dH, Gz, Gr, Gh, Uz, Ur, Uh, h0, mask, Hs, Z, R, HC)
        t_b += time.perf_counter() - t0
    return t_f / reps, t_b / reps, Hs, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=50)
    ap.add_argument("--batch", type=int, default=16)
    ap.add_argument("--hidden", type=int, default=64)
    ap.add_argument("--reps", type=int, default=20)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    case = make_case(rng, args.steps, args.batch, args.hidden)
    shape = f"T={args.steps} B={args.batch} H={args.hidden}"

    np_f, np_b, np_hs, np_grads = run(_gru_np, case, args.reps)
    print(f"python backend  {shape}: forward {np_f * 1e3:8.3f} ms  backward {np_b * 1e3:8.3f} ms")

    if _gru_cy is None:
        print("cython backend: not built (pip install -e . compiles it when cython is present)")
        return

    cy_f, cy_b, cy_hs, cy_grads = run(_gru_cy, case, args.reps)
    print(f"cython backend  {shape}: forward {cy_f * 1e3:8.3f} ms  backward {cy_b * 1e3:8.3f} ms")

    worst = np.max(np.abs(np_hs - cy_hs))
    for a, b in zip(np_grads, cy_grads):
        a, b = np.asarray(a), np.asarray(b)
        scale = max(1.0, float(np.max(np.abs(a))))
        worst = max(worst, np.max(np.abs(a - b)) / scale)
    print(f"worst relative |python - cython| over states and gradients: {worst:.3e}")
    print(f"speedup: forward x{np_f / cy_f:.2f}  backward x{np_b / cy_b:.2f}")


if __name__ == "__main__":
    main()
