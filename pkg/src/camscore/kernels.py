"""Numerical kernels with two interchangeable backends.

The hot loops (pairwise overlap sums, bilinear resampling) are compiled
with numba by default. Setting ``CAMSCORE_BACKEND=numpy`` selects a pure
numpy fallback; ``CAMSCORE_BACKEND=numba`` forces the compiled path and
raises if numba is unavailable. ``CAMSCORE_WORKERS`` (or
:func:`set_workers`) bounds the numba thread count.

Determinism contract: each pair's pixel reduction runs entirely inside one
worker in a fixed order, and callers reduce the per-pair outputs in flat
pair-index order, so results are independent of how pairs are partitioned
across workers. Min and max sums for a pair come from the same loop so
that identical rows yield bitwise-equal numerator and denominator.
"""

from __future__ import annotations

import os

import numpy as np

BACKEND_ENV = "CAMSCORE_BACKEND"
WORKERS_ENV = "CAMSCORE_WORKERS"

try:
    import numba
    from numba import njit, prange

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only on stripped installs
    HAVE_NUMBA = False


def _pick_backend() -> str:
    choice = os.environ.get(BACKEND_ENV, "").strip().lower()
    if choice in ("numba", "numpy"):
        if choice == "numba" and not HAVE_NUMBA:
            raise ImportError("CAMSCORE_BACKEND=numba but numba is not importable")
        return choice
    return "numba" if HAVE_NUMBA else "numpy"


_ACTIVE = _pick_backend()


def active_backend() -> str:
    """Name of the backend currently in use ("numba" or "numpy")."""
    return _ACTIVE


def set_backend(name: str) -> None:
    """Switch backends at runtime (mainly for benchmarks and tests)."""
    global _ACTIVE
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        raise ImportError("numba backend requested but numba is not importable")
    _ACTIVE = name


def max_workers() -> int:
    """Upper bound on worker threads for the active backend."""
    if _ACTIVE == "numba":
        return int(numba.config.NUMBA_NUM_THREADS)
    return 1


def set_workers(n: int) -> int:
    """Set the worker-thread count, clamped to what the runtime allows.

    Returns the count actually in effect. The numpy backend is always
    single-threaded, so the setting only matters under numba.
    """
    n = int(n)
    if n < 1:
        raise ValueError("worker count must be >= 1")
    if _ACTIVE != "numba":
        return 1
    eff = min(n, max_workers())
    numba.set_num_threads(eff)
    return eff


def _workers_from_env() -> None:
    raw = os.environ.get(WORKERS_ENV)
    if raw:
        try:
            set_workers(int(raw))
        except ValueError:
            pass


# ---------------------------------------------------------------------------
# Pairwise overlap sums. For rows i < j of `stack`:
#   min_out[pair] = sum_p min(stack[i,p], stack[j,p])
#   max_out[pair] = sum_p max(stack[i,p], stack[j,p])
# accumulated in float64 at flat pair index (row-major over i<j, matching
# np.triu_indices(n, k=1)).
# ---------------------------------------------------------------------------

if HAVE_NUMBA:

    @njit(cache=True, parallel=True, fastmath=True)
    def _pair_overlap_sums_numba(stack, min_out, max_out):
        n = stack.shape[0]
        npix = stack.shape[1]
        for i in prange(n - 1):
            # flat index of pair (i, j) is base + j
            base = i * n - i * (i + 1) // 2 - (i + 1)
            for j in range(i + 1, n):
                lo = 0.0
                hi = 0.0
                for p in range(npix):
                    a = stack[i, p]
                    b = stack[j, p]
                    if a < b:
                        lo += a
                        hi += b
                    else:
                        lo += b
                        hi += a
                min_out[base + j] = lo
                max_out[base + j] = hi

    @njit(cache=True)
    def _bilinear_resize_numba(src, out, scale_h, scale_w):
        in_h, in_w = src.shape
        out_h, out_w = out.shape
        for oy in range(out_h):
            sy = (oy + 0.5) * scale_h - 0.5
            if sy < 0.0:
                sy = 0.0
            if sy > in_h - 1.0:
                sy = in_h - 1.0
            y0 = int(sy)
            if y0 > in_h - 2:
                y0 = in_h - 2
            fy = sy - y0
            for ox in range(out_w):
                sx = (ox + 0.5) * scale_w - 0.5
                if sx < 0.0:
                    sx = 0.0
                if sx > in_w - 1.0:
                    sx = in_w - 1.0
                x0 = int(sx)
                if x0 > in_w - 2:
                    x0 = in_w - 2
                fx = sx - x0
                # lerp form keeps constant inputs exactly constant
                a = src[y0, x0]
                top = a + fx * (src[y0, x0 + 1] - a)
                c = src[y0 + 1, x0]
                bot = c + fx * (src[y0 + 1, x0 + 1] - c)
                out[oy, ox] = top + fy * (bot - top)


def _pair_overlap_sums_numpy(stack, min_out, max_out):
    n = stack.shape[0]
    # block the j side to bound temporary memory at ~32 rows
    block = max(1, min(32, n - 1))
    pos = 0
    for i in range(n - 1):
        row = stack[i]
        j = i + 1
        while j < n:
            hi = min(j + block, n)
            chunk = stack[j:hi]
            min_out[pos : pos + hi - j] = np.minimum(row, chunk).sum(axis=1, dtype=np.float64)
            max_out[pos : pos + hi - j] = np.maximum(row, chunk).sum(axis=1, dtype=np.float64)
            pos += hi - j
            j = hi


def _bilinear_resize_numpy(src, out, scale_h, scale_w):
    in_h, in_w = src.shape
    out_h, out_w = out.shape
    sy = np.clip((np.arange(out_h, dtype=np.float64) + 0.5) * scale_h - 0.5, 0.0, in_h - 1.0)
    sx = np.clip((np.arange(out_w, dtype=np.float64) + 0.5) * scale_w - 0.5, 0.0, in_w - 1.0)
    y0 = np.minimum(sy.astype(np.int64), max(in_h - 2, 0))
    x0 = np.minimum(sx.astype(np.int64), max(in_w - 2, 0))
    fy = (sy - y0)[:, None]
    fx = (sx - x0)[None, :]
    y1 = np.minimum(y0 + 1, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)
    s = src.astype(np.float64)
    a = s[np.ix_(y0, x0)]
    top = a + fx * (s[np.ix_(y0, x1)] - a)
    c = s[np.ix_(y1, x0)]
    bot = c + fx * (s[np.ix_(y1, x1)] - c)
    out[:, :] = top + fy * (bot - top)


def pair_overlap_sums(stack: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sums of elementwise minima and maxima over all row pairs i < j.

    `stack` is (n, npix) float32. Returns two flat float64 vectors of
    length n*(n-1)//2 in row-major pair order (the order produced by
    np.triu_indices(n, k=1)).
    """
    stack = np.ascontiguousarray(stack, dtype=np.float32)
    n = stack.shape[0]
    npairs = n * (n - 1) // 2
    min_out = np.zeros(npairs, dtype=np.float64)
    max_out = np.zeros(npairs, dtype=np.float64)
    if n < 2:
        return min_out, max_out
    if _ACTIVE == "numba":
        _pair_overlap_sums_numba(stack, min_out, max_out)
    else:
        _pair_overlap_sums_numpy(stack, min_out, max_out)
    return min_out, max_out


def bilinear_resize_raw(src: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Half-pixel-center bilinear resample of a 2D float32 array.

    Source coordinate for output pixel d is (d + 0.5) * (in/out) - 0.5,
    clamped to the valid range, so a same-shape resize is an exact copy and
    constant maps stay exactly constant. Interpolation runs in float64; the
    result is float32.
    """
    src = np.ascontiguousarray(src, dtype=np.float32)
    in_h, in_w = src.shape
    if out_h == in_h and out_w == in_w:
        return src.copy()
    if in_h == 1 and in_w == 1:
        return np.full((out_h, out_w), src[0, 0], dtype=np.float32)
    out = np.zeros((out_h, out_w), dtype=np.float32)
    scale_h = in_h / out_h
    scale_w = in_w / out_w
    if in_h == 1 or in_w == 1:
        # single row or column: the numba path would index past the short
        # axis, the vectorized path clamps instead
        _bilinear_resize_numpy(src, out, scale_h, scale_w)
        return out
    if _ACTIVE == "numba":
        _bilinear_resize_numba(src, out, scale_h, scale_w)
    else:
        _bilinear_resize_numpy(src, out, scale_h, scale_w)
    return out


_workers_from_env()
