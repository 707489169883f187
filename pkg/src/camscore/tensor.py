"""Heatmap container and elementwise tensor ops shared by all CAM methods."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, TensorError
from .kernels import bilinear_resize_raw


def as_tensor2d(values, *, name: str = "tensor") -> np.ndarray:
    """Validate and convert to a contiguous float32 (h, w) array."""
    arr = np.asarray(values, dtype=np.float32)
    if arr.ndim != 2:
        raise TensorError(f"{name}: expected 2 dimensions, got {arr.ndim}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise TensorError(f"{name}: empty dimension in shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise TensorError(f"{name}: contains NaN or infinity")
    return np.ascontiguousarray(arr)


def as_tensor3d(values, *, name: str = "tensor") -> np.ndarray:
    """Validate and convert to a contiguous float32 (h, w, c) array."""
    arr = np.asarray(values, dtype=np.float32)
    if arr.ndim != 3:
        raise TensorError(f"{name}: expected 3 dimensions, got {arr.ndim}")
    if min(arr.shape) < 1:
        raise TensorError(f"{name}: empty dimension in shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise TensorError(f"{name}: contains NaN or infinity")
    return np.ascontiguousarray(arr)


@dataclass(frozen=True)
class Heatmap:
    """A single-channel attribution map normalized to [0, 1].

    `degenerate` marks maps that were constant before normalization and
    were therefore zeroed; downstream scoring counts pairs involving them
    separately instead of treating 0/0 overlaps as signal.
    """

    values: np.ndarray
    degenerate: bool = False
    image_id: str = ""
    method: str = ""
    extras: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        arr = as_tensor2d(self.values, name="heatmap")
        lo = float(arr.min())
        hi = float(arr.max())
        if lo < 0.0 or hi > 1.0:
            raise TensorError(f"heatmap: values outside [0, 1] (min={lo}, max={hi})")
        object.__setattr__(self, "values", arr)

    @property
    def shape(self) -> tuple:
        return self.values.shape


def minmax_normalize(arr: np.ndarray) -> tuple[np.ndarray, bool]:
    """Rescale to [0, 1] by (x - min) / (max - min).

    Constant inputs map to all zeros with the degenerate flag set. The
    division runs in float64 and the result is emitted as float32 so the
    output is exactly reproducible regardless of the input's provenance.
    """
    arr = as_tensor2d(arr, name="normalize input")
    a64 = arr.astype(np.float64)
    lo = a64.min()
    hi = a64.max()
    if hi == lo:
        return np.zeros_like(arr, dtype=np.float32), True
    out = (a64 - lo) / (hi - lo)
    return out.astype(np.float32), False


def relu(arr: np.ndarray) -> np.ndarray:
    """Copy with negatives clamped to zero."""
    arr = np.asarray(arr)
    return np.maximum(arr, 0)


def relu_inplace(arr: np.ndarray) -> np.ndarray:
    """Clamp negatives to zero in place; returns the same array.

    Caller must hold exclusive access to `arr`.
    """
    arr = np.asarray(arr)
    if not np.isfinite(arr).all():
        raise TensorError("relu input contains NaN or infinity")
    np.maximum(arr, 0, out=arr)
    return arr


def power_emphasis(arr: np.ndarray, alpha: float) -> np.ndarray:
    """Elementwise power x**alpha on a [0, 1] map, sharpening hot regions.

    alpha=1 returns the input unchanged (exact identity, same dtype);
    alpha=2 squares. alpha must be positive.
    """
    if not (alpha > 0):
        raise ParameterError(f"emphasis exponent must be > 0, got {alpha}")
    arr = as_tensor2d(arr, name="emphasis input")
    lo = float(arr.min())
    hi = float(arr.max())
    if lo < 0.0 or hi > 1.0:
        raise TensorError(f"emphasis input outside [0, 1] (min={lo}, max={hi})")
    if alpha == 1.0:
        return arr
    if alpha == 2.0:
        return np.square(arr)
    return np.power(arr, np.float32(alpha))


def normalize_to_heatmap(arr: np.ndarray, *, image_id: str = "", method: str = "") -> Heatmap:
    """minmax_normalize and wrap the result as a Heatmap with its flag."""
    values, degenerate = minmax_normalize(arr)
    return Heatmap(values=values, degenerate=degenerate, image_id=image_id, method=method)


def emphasize(h: Heatmap, alpha: float) -> Heatmap:
    """power_emphasis applied to a Heatmap; metadata and flag carry over."""
    if alpha == 1.0:
        return h
    return Heatmap(
        values=power_emphasis(h.values, alpha),
        degenerate=h.degenerate,
        image_id=h.image_id,
        method=h.method,
    )


def bilinear_resize(arr: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Resample a 2D map to (out_h, out_w) with half-pixel-center bilinear
    interpolation and edge clamping. Same-shape calls return an exact copy.
    """
    if out_h < 1 or out_w < 1:
        raise ParameterError(f"resize target must be positive, got ({out_h}, {out_w})")
    arr = as_tensor2d(arr, name="resize input")
    return bilinear_resize_raw(arr, int(out_h), int(out_w))
