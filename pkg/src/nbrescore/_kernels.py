"""Edit-distance kernels: numba-jitted inner loops with a pure-numpy fallback.

Set ``NBRESCORE_PURE_NUMPY=1`` to force the numpy path (also used when numba
is missing).  Both paths implement identical DP recurrences and backtrace
tie-breaking, so they produce bit-identical results; ``benchmarks/`` compares
their throughput.

Op codes in backtrace output: 0 match, 1 substitute, 2 delete, 3 insert
(read along the reference side).  Tie-break order during backtrace: diagonal
first (match/substitute), then deletion, then insertion.
"""

from __future__ import annotations

import os
import warnings

import numpy as np

OP_MATCH = 0
OP_SUB = 1
OP_DEL = 2
OP_INS = 3

_FORCE_NUMPY = os.environ.get("NBRESCORE_PURE_NUMPY", "") not in ("", "0")

if not _FORCE_NUMPY:
    try:
        from numba import njit

        HAVE_NUMBA = True
    except ImportError:  # pragma: no cover - depends on environment
        warnings.warn("numba unavailable, falling back to the numpy kernels")
        HAVE_NUMBA = False
else:
    HAVE_NUMBA = False


# ---------------------------------------------------------------------------
# numpy path


def _cost_matrix_numpy(ref: np.ndarray, hyp: np.ndarray) -> np.ndarray:
    m, n = len(ref), len(hyp)
    matrix = np.empty((m + 1, n + 1), dtype=np.int32)
    js = np.arange(n + 1, dtype=np.int32)
    matrix[0] = js
    prev = matrix[0]
    for i in range(1, m + 1):
        sub = prev[:-1] + (ref[i - 1] != hyp)
        dele = prev[1:] + 1
        best = np.empty(n + 1, dtype=np.int32)
        best[0] = i
        np.minimum(sub, dele, out=best[1:])
        # Fold in the insertion chain: cur[j] = min_k (best[k] + (j - k)).
        cur = np.minimum.accumulate(best - js) + js
        matrix[i] = cur
        prev = cur
    return matrix


def _edit_cost_numpy(ref: np.ndarray, hyp: np.ndarray) -> int:
    m, n = len(ref), len(hyp)
    if m == 0:
        return n
    if n == 0:
        return m
    js = np.arange(n + 1, dtype=np.int32)
    prev = js.copy()
    best = np.empty(n + 1, dtype=np.int32)
    for i in range(1, m + 1):
        best[0] = i
        np.minimum(prev[:-1] + (ref[i - 1] != hyp), prev[1:] + 1, out=best[1:])
        prev = np.minimum.accumulate(best - js) + js
    return int(prev[n])


def _backtrace_python(matrix: np.ndarray, ref: np.ndarray, hyp: np.ndarray) -> np.ndarray:
    i, j = len(ref), len(hyp)
    ops = np.empty(i + j, dtype=np.int8)
    pos = 0
    while i > 0 or j > 0:
        cell = matrix[i, j]
        if i > 0 and j > 0 and cell == matrix[i - 1, j - 1] + (ref[i - 1] != hyp[j - 1]):
            ops[pos] = OP_MATCH if ref[i - 1] == hyp[j - 1] else OP_SUB
            i -= 1
            j -= 1
        elif i > 0 and cell == matrix[i - 1, j] + 1:
            ops[pos] = OP_DEL
            i -= 1
        else:
            ops[pos] = OP_INS
            j -= 1
        pos += 1
    return ops[:pos][::-1].copy()


def _align_ops_numpy(ref: np.ndarray, hyp: np.ndarray) -> np.ndarray:
    return _backtrace_python(_cost_matrix_numpy(ref, hyp), ref, hyp)


# ---------------------------------------------------------------------------
# numba path

if HAVE_NUMBA:

    @njit(cache=True)
    def _edit_cost_numba(ref, hyp):  # pragma: no cover - exercised via dispatch
        m, n = len(ref), len(hyp)
        prev = np.empty(n + 1, dtype=np.int32)
        cur = np.empty(n + 1, dtype=np.int32)
        for j in range(n + 1):
            prev[j] = j
        for i in range(1, m + 1):
            cur[0] = i
            for j in range(1, n + 1):
                if ref[i - 1] == hyp[j - 1]:
                    diag = prev[j - 1]
                else:
                    diag = prev[j - 1] + 1
                best = diag
                if prev[j] + 1 < best:
                    best = prev[j] + 1
                if cur[j - 1] + 1 < best:
                    best = cur[j - 1] + 1
                cur[j] = best
            prev, cur = cur, prev
        return prev[n]

    @njit(cache=True)
    def _align_ops_numba(ref, hyp):  # pragma: no cover - exercised via dispatch
        m, n = len(ref), len(hyp)
        matrix = np.empty((m + 1, n + 1), dtype=np.int32)
        for j in range(n + 1):
            matrix[0, j] = j
        for i in range(1, m + 1):
            matrix[i, 0] = i
            for j in range(1, n + 1):
                if ref[i - 1] == hyp[j - 1]:
                    diag = matrix[i - 1, j - 1]
                else:
                    diag = matrix[i - 1, j - 1] + 1
                best = diag
                if matrix[i - 1, j] + 1 < best:
                    best = matrix[i - 1, j] + 1
                if matrix[i, j - 1] + 1 < best:
                    best = matrix[i, j - 1] + 1
                matrix[i, j] = best

        ops = np.empty(m + n, dtype=np.int8)
        pos = 0
        i, j = m, n
        while i > 0 or j > 0:
            cell = matrix[i, j]
            take_diag = False
            if i > 0 and j > 0:
                step = 0 if ref[i - 1] == hyp[j - 1] else 1
                take_diag = cell == matrix[i - 1, j - 1] + step
            if take_diag:
                ops[pos] = OP_MATCH if ref[i - 1] == hyp[j - 1] else OP_SUB
                i -= 1
                j -= 1
            elif i > 0 and cell == matrix[i - 1, j] + 1:
                ops[pos] = OP_DEL
                i -= 1
            else:
                ops[pos] = OP_INS
                j -= 1
            pos += 1
        return ops[:pos][::-1].copy()


BACKEND = "numba" if HAVE_NUMBA else "numpy"


def edit_cost(ref: np.ndarray, hyp: np.ndarray) -> int:
    """Minimal unit-cost edit distance between two int-encoded sequences."""
    if HAVE_NUMBA:
        return int(_edit_cost_numba(ref, hyp))
    return _edit_cost_numpy(ref, hyp)


def align_ops(ref: np.ndarray, hyp: np.ndarray) -> np.ndarray:
    """Optimal alignment op codes with the deterministic backtrace tie-break."""
    if HAVE_NUMBA:
        return _align_ops_numba(ref, hyp)
    return _align_ops_numpy(ref, hyp)
