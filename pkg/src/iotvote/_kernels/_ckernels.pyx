# cython: language_level=3
"""Compiled split-scan and k-NN kernels.

Arithmetic mirrors ``_pykernels`` operation for operation so both backends
produce bit-identical results (built with -ffp-contract=off).
"""

import numpy as np
cimport numpy as cnp
from libc.stdlib cimport malloc, free
from libc.string cimport memset

cnp.import_array()

ctypedef long long i64


def best_split(const double[:, ::1] vals, const cnp.intp_t[:, ::1] labs,
               Py_ssize_t n_classes, Py_ssize_t min_leaf):
    """Best Gini split over presorted candidate rows.

    Row r of ``vals`` is one feature's values sorted ascending and row r of
    ``labs`` the matching class codes. A split after position i sends
    positions 0..i left. The score  sum(left_c^2)/n_left + sum(right_c^2)/n_right
    is maximised, which minimises weighted child Gini. Ties keep the lowest
    row, then the lowest position. Returns (row, pos, score); row == -1 when
    no admissible split exists.
    """
    cdef Py_ssize_t rows = vals.shape[0]
    cdef Py_ssize_t n = vals.shape[1]
    cdef Py_ssize_t r, i, c, nl, nr
    cdef Py_ssize_t best_row = -1, best_pos = -1
    cdef double best_score = -np.inf
    cdef double score
    cdef i64 sl, sr
    cdef i64 *left
    cdef i64 *right
    if n < 2 or rows == 0:
        return -1, -1, best_score
    left = <i64 *> malloc(n_classes * sizeof(i64))
    right = <i64 *> malloc(n_classes * sizeof(i64))
    if left == NULL or right == NULL:
        free(left)
        free(right)
        raise MemoryError()
    try:
        with nogil:
            for r in range(rows):
                memset(left, 0, n_classes * sizeof(i64))
                memset(right, 0, n_classes * sizeof(i64))
                for i in range(n):
                    right[labs[r, i]] += 1
                sl = 0
                sr = 0
                for c in range(n_classes):
                    sr += right[c] * right[c]
                for i in range(n - 1):
                    c = labs[r, i]
                    sl += 2 * left[c] + 1
                    left[c] += 1
                    sr -= 2 * right[c] - 1
                    right[c] -= 1
                    nl = i + 1
                    nr = n - nl
                    if nr < min_leaf:
                        break
                    if nl < min_leaf or not (vals[r, i] < vals[r, i + 1]):
                        continue
                    score = (<double> sl) / (<double> nl) + (<double> sr) / (<double> nr)
                    if score > best_score:
                        best_score = score
                        best_row = r
                        best_pos = i
    finally:
        free(left)
        free(right)
    return best_row, best_pos, best_score


def knn_neighbors(const double[:, ::1] train, const double[:, ::1] queries, Py_ssize_t k):
    """Indices of the k nearest training rows per query.

    Squared Euclidean distance accumulated feature by feature in index order.
    Neighbours are ordered by (distance, row index), so equal distances
    prefer the lower training row.
    """
    cdef Py_ssize_t n = train.shape[0]
    cdef Py_ssize_t p = train.shape[1]
    cdef Py_ssize_t q = queries.shape[0]
    cdef Py_ssize_t i, j, f, filled, pos, s
    cdef double d, t
    out = np.empty((q, k), dtype=np.intp)
    cdef cnp.intp_t[:, ::1] res = out
    cdef double *bestd = <double *> malloc(k * sizeof(double))
    cdef Py_ssize_t *besti = <Py_ssize_t *> malloc(k * sizeof(Py_ssize_t))
    if bestd == NULL or besti == NULL:
        free(bestd)
        free(besti)
        raise MemoryError()
    try:
        with nogil:
            for i in range(q):
                filled = 0
                for j in range(n):
                    d = 0.0
                    for f in range(p):
                        t = train[j, f] - queries[i, f]
                        d = d + t * t
                    if filled == k and not (d < bestd[k - 1]):
                        continue
                    pos = filled if filled < k else k - 1
                    while pos > 0 and bestd[pos - 1] > d:
                        pos -= 1
                    s = filled if filled < k else k - 1
                    while s > pos:
                        bestd[s] = bestd[s - 1]
                        besti[s] = besti[s - 1]
                        s -= 1
                    bestd[pos] = d
                    besti[pos] = j
                    if filled < k:
                        filled += 1
                for s in range(k):
                    res[i, s] = besti[s]
    finally:
        free(bestd)
        free(besti)
    return out
