"""Pure-numpy fallback for the Monte Carlo accumulation kernel."""
from __future__ import annotations

import numpy as np

_CHUNK = 1 << 16


def conj_superop_sums(mats: np.ndarray, buckets: np.ndarray,
                      n_buckets: int) -> tuple[np.ndarray, np.ndarray]:
    """Accumulate conjugation superoperators into per-bucket sums.

    For each 2x2 unitary W the column-stacking superoperator of
    sigma -> W sigma W+ is kron(conj(W), W).  Returns (sums, counts) where
    sums[b] is the 4x4 sum of those superoperators over samples with
    buckets[i] == b and counts[b] is the number of such samples.
    """
    mats = np.ascontiguousarray(mats, dtype=np.complex128)
    buckets = np.ascontiguousarray(buckets, dtype=np.int64)
    n = mats.shape[0]
    sums = np.zeros((n_buckets, 4, 4), dtype=np.complex128)
    counts = np.bincount(buckets, minlength=n_buckets).astype(np.int64)
    for lo in range(0, n, _CHUNK):
        w = mats[lo:lo + _CHUNK]
        b = buckets[lo:lo + _CHUNK]
        # kron(conj(W), W)[(a,c),(b,d)] = conj(W)[a,b] W[c,d]
        k = np.einsum("nab,ncd->nacbd", w.conj(), w).reshape(-1, 4, 4)
        np.add.at(sums, b, k)
    return sums, counts
