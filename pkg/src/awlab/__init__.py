"""awlab: a desk-scale laboratory for action-word prediction in code summarization.

Corpus construction, action-word extraction, from-scratch GRU encoder-decoder
baselines, and action-word-partitioned evaluation, all deterministic per seed.
"""

import os

# Training promises bit-identical results per seed under single-threaded
# execution; threaded BLAS reductions would break that. Must happen before
# numpy is first imported anywhere in the process.
for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

__version__ = "0.1.0"
