"""Weighted scatter/gather kernels behind the UV warps.

Both warps reduce to two primitives over a flat texel table of shape (M, C):

* ``scatter_weighted``: ``out[idx[p, k]] += w[p, k] * src[p]`` (splatting, and
  the adjoint of sampling)
* ``gather_weighted``: ``out[p] = sum_k w[p, k] * table[idx[p, k]]`` (sampling,
  and the adjoint of splatting)

Each has a numba kernel and a numpy implementation. The numba path is used when
numba imports and ``POSETRANSFER_NUMBA`` is not set to ``0``. Accumulation is
sequential in pixel order on both paths, so results are deterministic.
"""

import numpy as np

from ._accel import HAS_NUMBA, njit


def bilinear_taps(x, y, res):
    """Four-tap bilinear stencil for continuous grid positions.

    ``x`` and ``y`` are column/row positions in ``[0, res - 1]`` (clamped).
    Returns ``(rows, cols, weights)``, each of shape ``(P, 4)``; at the upper
    border the out-of-range neighbour collapses onto the border texel with
    zero weight.
    """
    x = np.clip(np.asarray(x, dtype=np.float64), 0.0, res - 1)
    y = np.clip(np.asarray(y, dtype=np.float64), 0.0, res - 1)
    x0 = np.floor(x).astype(np.int64)
    y0 = np.floor(y).astype(np.int64)
    x1 = np.minimum(x0 + 1, res - 1)
    y1 = np.minimum(y0 + 1, res - 1)
    fx = x - x0
    fy = y - y0
    rows = np.stack([y0, y0, y1, y1], axis=1)
    cols = np.stack([x0, x1, x0, x1], axis=1)
    w = np.stack(
        [(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy], axis=1
    )
    return rows, cols, w


@njit(cache=True)
def _scatter_numba(out, idx, w, src):
    n, k = idx.shape
    c = src.shape[1]
    for p in range(n):
        for j in range(k):
            t = idx[p, j]
            wt = w[p, j]
            for ch in range(c):
                out[t, ch] += wt * src[p, ch]
    return out


@njit(cache=True)
def _gather_numba(table, idx, w, out):
    n, k = idx.shape
    c = table.shape[1]
    for p in range(n):
        for ch in range(c):
            acc = 0.0
            for j in range(k):
                acc += w[p, j] * table[idx[p, j], ch]
            out[p, ch] = acc
    return out


def _scatter_numpy(out, idx, w, src):
    flat = idx.ravel()
    m = out.shape[0]
    for ch in range(src.shape[1]):
        out[:, ch] += np.bincount(
            flat, weights=(w * src[:, ch, None]).ravel(), minlength=m
        )
    return out


def _gather_numpy(table, idx, w, out):
    out[:] = np.einsum("pk,pkc->pc", w, table[idx])
    return out


def scatter_weighted(n_rows, idx, w, src, backend=None):
    """Accumulate ``w``-weighted rows of ``src`` into a fresh ``(n_rows, C)`` table."""
    src = np.ascontiguousarray(src, dtype=np.float64)
    idx = np.ascontiguousarray(idx, dtype=np.int64)
    w = np.ascontiguousarray(w, dtype=np.float64)
    if src.ndim == 1:
        return scatter_weighted(n_rows, idx, w, src[:, None], backend)[:, 0]
    out = np.zeros((n_rows, src.shape[1]), dtype=np.float64)
    if idx.shape[0] == 0:
        return out
    if _use_numba(backend):
        return _scatter_numba(out, idx, w, src)
    return _scatter_numpy(out, idx, w, src)


def gather_weighted(table, idx, w, backend=None):
    """Return ``sum_k w[:, k] * table[idx[:, k]]`` as a ``(P, C)`` array."""
    table = np.ascontiguousarray(table, dtype=np.float64)
    idx = np.ascontiguousarray(idx, dtype=np.int64)
    w = np.ascontiguousarray(w, dtype=np.float64)
    if table.ndim == 1:
        return gather_weighted(table[:, None], idx, w, backend)[:, 0]
    out = np.empty((idx.shape[0], table.shape[1]), dtype=np.float64)
    if idx.shape[0] == 0:
        return out
    if _use_numba(backend):
        return _gather_numba(table, idx, w, out)
    return _gather_numpy(table, idx, w, out)


def _use_numba(backend):
    if backend is None:
        return HAS_NUMBA
    if backend == "numba":
        if not HAS_NUMBA:
            raise RuntimeError("numba backend requested but numba is unavailable")
        return True
    if backend == "numpy":
        return False
    raise ValueError(f"unknown backend {backend!r}")
