"""Pure numpy fallback for the compiled kernels (same results, bit for bit)."""

import numpy as np

_CHUNK_CELLS = 1 << 22


def best_split(vals, labs, n_classes, min_leaf):
    rows, n = vals.shape
    best_row, best_pos, best_score = -1, -1, -np.inf
    if n < 2 or rows == 0:
        return best_row, best_pos, best_score
    nl = np.arange(1, n, dtype=np.int64)
    nr = n - nl
    size_ok = (nl >= min_leaf) & (nr >= min_leaf)
    if not size_ok.any():
        return best_row, best_pos, best_score
    for r in range(rows):
        onehot = np.zeros((n, n_classes), dtype=np.int64)
        onehot[np.arange(n), labs[r]] = 1
        left = np.cumsum(onehot, axis=0)
        total = left[-1]
        left = left[:-1]
        right = total - left
        valid = size_ok & (vals[r, :-1] < vals[r, 1:])
        if not valid.any():
            continue
        sl = (left * left).sum(axis=1)
        sr = (right * right).sum(axis=1)
        score = sl.astype(np.float64) / nl.astype(np.float64) + sr.astype(np.float64) / nr.astype(np.float64)
        score[~valid] = -np.inf
        pos = int(np.argmax(score))
        if score[pos] > best_score:
            best_row, best_pos, best_score = r, pos, float(score[pos])
    return best_row, best_pos, best_score


def knn_neighbors(train, queries, k):
    n, p = train.shape
    q = queries.shape[0]
    out = np.empty((q, k), dtype=np.intp)
    chunk = max(1, _CHUNK_CELLS // max(n, 1))
    for start in range(0, q, chunk):
        block = queries[start:start + chunk]
        d = np.zeros((len(block), n))
        for f in range(p):
            t = train[None, :, f] - block[:, None, f]
            d = d + t * t
        kth = np.partition(d, k - 1, axis=1)[:, k - 1]
        for b in range(len(block)):
            cand = np.flatnonzero(d[b] <= kth[b])
            order = np.lexsort((cand, d[b, cand]))
            out[start + b] = cand[order[:k]]
    return out
