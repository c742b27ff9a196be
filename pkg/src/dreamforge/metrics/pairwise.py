"""Pairwise-cosine kernels for the face-consistency score.

The only numeric hot spot in the package: all-pairs dot products over unit
embeddings. Two interchangeable implementations — a numba ``@njit`` loop and
a vectorized numpy path — selected by the ``DREAMFORGE_PAIRWISE_BACKEND``
env var (``auto`` | ``numba`` | ``numpy``, default ``auto``). Both produce
identical results to the sequential double loop; ``benchmarks/pairwise_bench.py``
compares them.
"""

from __future__ import annotations

import os

import numpy as np

ENV_VAR = "DREAMFORGE_PAIRWISE_BACKEND"

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        return wrap if not (args and callable(args[0])) else args[0]


@njit(cache=True)
def _pairwise_upper_numba(embeddings: np.ndarray, out: np.ndarray) -> None:
    n, dim = embeddings.shape
    pos = 0
    for i in range(n):
        for j in range(i + 1, n):
            acc = 0.0
            for k in range(dim):
                acc += embeddings[i, k] * embeddings[j, k]
            out[pos] = acc
            pos += 1


def pairwise_upper_numpy(embeddings: np.ndarray) -> np.ndarray:
    n = embeddings.shape[0]
    gram = embeddings @ embeddings.T
    iu, ju = np.triu_indices(n, k=1)
    return np.ascontiguousarray(gram[iu, ju])


def selected_backend() -> str:
    choice = os.environ.get(ENV_VAR, "auto").strip().lower()
    if choice not in ("auto", "numba", "numpy"):
        raise ValueError(f"{ENV_VAR} must be auto, numba, or numpy; got {choice!r}")
    if choice == "numba" and not HAS_NUMBA:
        raise RuntimeError(f"{ENV_VAR}=numba but numba is not importable")
    if choice == "auto":
        return "numba" if HAS_NUMBA else "numpy"
    return choice


def normalize_rows(embeddings: np.ndarray) -> np.ndarray:
    embeddings = np.asarray(embeddings, dtype=np.float64)
    if embeddings.ndim != 2:
        raise ValueError("embeddings must be a 2-D array")
    norms = np.linalg.norm(embeddings, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise ValueError("zero-norm embedding cannot be normalized")
    return embeddings / norms


def pairwise_cosines(embeddings: np.ndarray) -> np.ndarray:
    """Upper-triangle cosines (i < j, row-major pair order) of unit rows."""
    embeddings = np.ascontiguousarray(embeddings, dtype=np.float64)
    n = embeddings.shape[0]
    if n < 2:
        return np.empty(0, dtype=np.float64)
    if selected_backend() == "numba":
        out = np.empty(n * (n - 1) // 2, dtype=np.float64)
        _pairwise_upper_numba(embeddings, out)
        return out
    return pairwise_upper_numpy(embeddings)


def mean_pairwise_cosine(embeddings: np.ndarray) -> float:
    sims = pairwise_cosines(embeddings)
    if sims.size == 0:
        raise ValueError("need at least 2 embeddings for a pairwise mean")
    return float(sims.sum() / sims.size)
