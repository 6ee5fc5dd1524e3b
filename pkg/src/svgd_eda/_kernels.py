"""Hot numeric kernels: batched landscape evaluation and exhaustive scan.

Two interchangeable implementations are kept side by side: numba-jitted
loops and pure-numpy vectorized code. Selection order:

* ``SVGD_EDA_BACKEND=numpy`` forces the numpy path;
* ``SVGD_EDA_BACKEND=numba`` requires numba and fails loudly without it;
* unset: numba when importable, numpy otherwise.

Both implementations of each kernel remain importable regardless of the
active backend so tests and benchmarks can compare them directly.
"""

from __future__ import annotations

import os

import numpy as np


def nkd_eval_batch_numpy(links: np.ndarray, tables: np.ndarray, d: int, xs: np.ndarray) -> np.ndarray:
    """Mean table contribution for each row of ``xs`` (shape (b, n))."""
    n, k = links.shape
    idx = xs * (d ** k)
    if k:
        powers = d ** np.arange(k - 1, -1, -1)
        idx = idx + xs[:, links] @ powers
    contrib = tables[np.arange(n)[None, :], idx]
    return contrib.mean(axis=1)


def enum_argmax_numpy(links: np.ndarray, tables: np.ndarray, d: int, n: int) -> np.ndarray:
    """First (lexicographically smallest) maximizer over all d**n solutions."""
    total = d ** n
    powers = d ** np.arange(n - 1, -1, -1, dtype=np.int64)
    chunk = 1 << 16
    best_f = -np.inf
    best_x = np.zeros(n, dtype=np.int64)
    for start in range(0, total, chunk):
        codes = np.arange(start, min(start + chunk, total), dtype=np.int64)
        xs = (codes[:, None] // powers[None, :]) % d
        f = nkd_eval_batch_numpy(links, tables, d, xs)
        i = int(np.argmax(f))  # first occurrence within the chunk
        if f[i] > best_f:
            best_f = float(f[i])
            best_x = xs[i].copy()
    return best_x


try:
    from numba import njit

    HAS_NUMBA = True

    @njit(cache=True)
    def nkd_eval_batch_numba(links, tables, d, xs):
        b, n = xs.shape
        k = links.shape[1]
        out = np.empty(b)
        for s in range(b):
            acc = 0.0
            for i in range(n):
                idx = xs[s, i]
                for j in range(k):
                    idx = idx * d + xs[s, links[i, j]]
                acc += tables[i, idx]
            out[s] = acc / n
        return out

    @njit(cache=True)
    def enum_argmax_numba(links, tables, d, n):
        k = links.shape[1]
        x = np.zeros(n, dtype=np.int64)
        best_x = np.zeros(n, dtype=np.int64)
        best_acc = -1.0  # contributions are non-negative, so any solution beats this
        total = 1
        for _ in range(n):
            total *= d
        for _ in range(total):
            acc = 0.0
            for i in range(n):
                idx = x[i]
                for j in range(k):
                    idx = idx * d + x[links[i, j]]
                acc += tables[i, idx]
            if acc > best_acc:
                best_acc = acc
                best_x[:] = x
            # odometer increment, least-significant digit last => lexicographic scan
            pos = n - 1
            while pos >= 0:
                x[pos] += 1
                if x[pos] == d:
                    x[pos] = 0
                    pos -= 1
                else:
                    break
        return best_x

except ImportError:  # pragma: no cover - exercised only without numba installed
    HAS_NUMBA = False
    nkd_eval_batch_numba = None
    enum_argmax_numba = None


_requested = os.environ.get("SVGD_EDA_BACKEND", "").strip().lower()
if _requested not in ("", "numba", "numpy"):
    raise ValueError(
        f"SVGD_EDA_BACKEND must be 'numba' or 'numpy', got {_requested!r}"
    )
if _requested == "numba" and not HAS_NUMBA:
    raise ImportError("SVGD_EDA_BACKEND=numba but numba is not importable")

if _requested == "numpy" or not HAS_NUMBA:
    BACKEND = "numpy"
    nkd_eval_batch = nkd_eval_batch_numpy
    enum_argmax = enum_argmax_numpy
else:
    BACKEND = "numba"
    nkd_eval_batch = nkd_eval_batch_numba
    enum_argmax = enum_argmax_numba
