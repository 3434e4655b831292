"""Compiled inner loops. Falls back to plain Python when numba is missing."""
import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


@njit(cache=True)
def sequential_sweep(indptr, indices, base, gamma, log_t, log_1mt, order):
    """Update responsibilities node by node, in place.

    Each node's row is recomputed from the current rows of every other node,
    so later nodes in ``order`` see the already-updated earlier ones.
    """
    n, k = gamma.shape
    col = np.zeros(k)
    for i in range(n):
        for c in range(k):
            col[c] += gamma[i, c]
    m = np.empty(k)
    s = np.empty(k)
    score = np.empty(k)
    for idx in range(len(order)):
        i = order[idx]
        for c in range(k):
            m[c] = 0.0
        for p in range(indptr[i], indptr[i + 1]):
            j = indices[p]
            for c in range(k):
                m[c] += gamma[j, c]
        for c in range(k):
            s[c] = col[c] - gamma[i, c] - m[c]
            if s[c] < 0.0:
                s[c] = 0.0
        top = -np.inf
        for c in range(k):
            acc = base[i, c]
            for l in range(k):
                acc += m[l] * log_t[c, l] + s[l] * log_1mt[c, l]
            score[c] = acc
            if acc > top:
                top = acc
        total = 0.0
        for c in range(k):
            score[c] = np.exp(score[c] - top)
            total += score[c]
        for c in range(k):
            new = score[c] / total
            col[c] += new - gamma[i, c]
            gamma[i, c] = new
    return gamma
