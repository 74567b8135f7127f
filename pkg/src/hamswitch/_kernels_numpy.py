"""Pure-numpy twin of the numba fidelity kernel, using stacked BLAS matmuls.

Same contract as :func:`hamswitch._kernels_numba.batch_switching_fidelities`;
selected via ``HAMSWITCH_BACKEND=numpy``.
"""

from __future__ import annotations

import numpy as np


def batch_switching_fidelities(evecs, evecs_ct, evals, durations, wdag, n_sys, out):
    B, K = durations.shape
    nh, N = evals.shape
    nB = N // n_sys
    U = np.broadcast_to(np.eye(N, dtype=np.complex128), (B, N, N)).copy()
    for j in range(K):
        h = j % nh
        ph = np.exp(-1j * np.outer(durations[:, j], evals[h]))  # (B, N)
        U = evecs[h] @ (ph[:, :, None] * (evecs_ct[h] @ U))
    blocks = U.reshape(B, n_sys, nB, n_sys, nB)
    q = np.einsum("ts,bsitj->bij", wdag, blocks)
    sv = np.linalg.svd(q, compute_uv=False)
    np.minimum((sv.sum(axis=1) / N) ** 2, 1.0, out=out)
