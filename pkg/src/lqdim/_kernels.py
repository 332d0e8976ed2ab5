"""Compiled inner loops."""

import numpy as np
from numba import njit


@njit(cache=True)
def direct_convolve_dense(ia, ma, ib, mb, out):
    # Row-major accumulation: out[k] receives its terms in increasing i,
    # which is the order a naive double loop produces.
    for i in range(ia.size):
        a = ma[i]
        base = ia[i]
        for j in range(ib.size):
            out[base + ib[j]] += a * mb[j]
    return out


@njit(cache=True)
def distinct_in_windows(coarse, lo, hi):
    """Number of distinct values of sorted ``coarse[lo[t]:hi[t]]`` for each t."""
    n = coarse.size
    newflag = np.empty(n + 1, dtype=np.int64)
    newflag[0] = 0
    for i in range(n):
        if i == 0 or coarse[i] != coarse[i - 1]:
            newflag[i + 1] = newflag[i] + 1
        else:
            newflag[i + 1] = newflag[i]
    res = np.empty(lo.size, dtype=np.int64)
    for t in range(lo.size):
        a = lo[t]
        b = hi[t]
        if b <= a:
            res[t] = 0
        else:
            # first element of the window always starts a new run
            res[t] = newflag[b] - newflag[a + 1] + 1
    return res
