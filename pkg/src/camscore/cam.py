"""Heatmap composition from exported activation/gradient bundles.

Six methods, all model-free: they consume tensors captured by an exporter
and never run inference. Every method ends with ReLU followed by min-max
normalization, so outputs are [0, 1] heatmaps ready for pairwise scoring.

Channel reductions run in float64 via explicit sum() calls (no BLAS) so a
given bundle always composes to the same bits regardless of library
threading.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import MethodRequirementsError, ParameterError, ValidationError
from .tensor import (
    Heatmap,
    as_tensor3d,
    bilinear_resize,
    minmax_normalize,
    normalize_to_heatmap,
)


class CamMethod(str, Enum):
    GRADCAM = "gradcam"
    GRADCAMPP = "gradcampp"
    LAYERCAM = "layercam"
    EIGENCAM = "eigencam"
    SCORECAM = "scorecam"
    MSGRADCAMPP = "msgradcampp"

    @classmethod
    def parse(cls, name: str) -> "CamMethod":
        try:
            return cls(name.strip().lower())
        except ValueError:
            valid = ", ".join(m.value for m in cls)
            raise ParameterError(f"unknown method {name!r}; expected one of: {valid}") from None


GRADIENT_METHODS = frozenset(
    {CamMethod.GRADCAM, CamMethod.GRADCAMPP, CamMethod.LAYERCAM, CamMethod.MSGRADCAMPP}
)


@dataclass(frozen=True)
class ActivationBundle:
    """One image's captured tensors at one layer.

    activations: (h, w, c) float32, channel-last
    gradients: same shape as activations, or None for gradient-free methods
    channel_scores: length-c vector of per-channel forward-pass scores, or None
    """

    layer_id: str
    activations: np.ndarray
    gradients: np.ndarray | None = None
    channel_scores: np.ndarray | None = None
    class_id: int = 0
    image_id: str = ""

    def __post_init__(self):
        acts = as_tensor3d(self.activations, name=f"activations[{self.image_id}]")
        object.__setattr__(self, "activations", acts)
        if self.gradients is not None:
            grads = as_tensor3d(self.gradients, name=f"gradients[{self.image_id}]")
            if grads.shape != acts.shape:
                raise ValidationError(
                    f"gradients shape {grads.shape} != activations shape {acts.shape}"
                    f" for image {self.image_id!r} layer {self.layer_id!r}"
                )
            object.__setattr__(self, "gradients", grads)
        if self.channel_scores is not None:
            scores = np.asarray(self.channel_scores, dtype=np.float32).reshape(-1)
            if scores.shape[0] != acts.shape[2]:
                raise ValidationError(
                    f"channel_scores length {scores.shape[0]} != {acts.shape[2]} channels"
                    f" for image {self.image_id!r} layer {self.layer_id!r}"
                )
            if not np.isfinite(scores).all():
                raise ValidationError(f"channel_scores contain NaN or infinity ({self.image_id!r})")
            object.__setattr__(self, "channel_scores", scores)

    @property
    def spatial_shape(self) -> tuple:
        return self.activations.shape[:2]

    @property
    def channels(self) -> int:
        return self.activations.shape[2]


def _require_gradients(b: ActivationBundle, method: str) -> np.ndarray:
    if b.gradients is None:
        raise MethodRequirementsError(
            f"{method} needs gradients, but bundle {b.image_id!r}/{b.layer_id!r} has none"
        )
    return b.gradients


def _finish(raw: np.ndarray, b: ActivationBundle, method: CamMethod) -> Heatmap:
    # shared tail: ReLU then min-max normalize
    raw = np.maximum(raw, 0.0)
    return normalize_to_heatmap(raw, image_id=b.image_id, method=method.value)


def gradcam(b: ActivationBundle) -> Heatmap:
    """Channel weights are spatial means of the class gradient."""
    grads = _require_gradients(b, "gradcam")
    g = grads.astype(np.float64)
    weights = g.mean(axis=(0, 1))
    combined = (b.activations.astype(np.float64) * weights).sum(axis=2)
    return _finish(combined, b, CamMethod.GRADCAM)


def gradcam_pp(b: ActivationBundle) -> Heatmap:
    """Second-order channel weighting.

    Pixel coefficients a = g^2 / (2 g^2 + sum_spatial(A * g^3)), zero where
    that denominator is zero; channel weight = sum(a * relu(g)).
    """
    grads = _require_gradients(b, "gradcampp")
    g = grads.astype(np.float64)
    a64 = b.activations.astype(np.float64)
    g2 = g * g
    g3 = g2 * g
    denom = 2.0 * g2 + (a64 * g3).sum(axis=(0, 1))
    coeff = np.divide(g2, denom, out=np.zeros_like(g2), where=denom != 0.0)
    alpha = (coeff * np.maximum(g, 0.0)).sum(axis=(0, 1))
    combined = (a64 * alpha).sum(axis=2)
    return _finish(combined, b, CamMethod.GRADCAMPP)


def layercam(b: ActivationBundle) -> Heatmap:
    """Positive gradients gate the activations elementwise, summed over channels."""
    grads = _require_gradients(b, "layercam")
    g = grads.astype(np.float64)
    a64 = b.activations.astype(np.float64)
    combined = (np.maximum(g, 0.0) * a64).sum(axis=2)
    return _finish(combined, b, CamMethod.LAYERCAM)


POWER_ITER_TOL = 1e-10
POWER_ITER_MAX = 1000


def top_right_singular_vector(mat: np.ndarray) -> np.ndarray:
    """First right singular vector of `mat` by power iteration on mat.T @ mat.

    Starts from the uniform vector; if that stalls (e.g. start nearly
    orthogonal to the top eigenvector), restarts once from a fixed-seed
    random vector. Returns a unit-norm float64 vector.
    """
    gram = mat.T @ mat
    c = gram.shape[0]

    def iterate(v):
        for _ in range(POWER_ITER_MAX):
            y = gram @ v
            norm = np.linalg.norm(y)
            if norm == 0.0:
                return v, False
            y /= norm
            if np.abs(y - v).max() <= POWER_ITER_TOL:
                return y, True
            v = y
        return v, False

    v0 = np.full(c, 1.0 / np.sqrt(c), dtype=np.float64)
    v, converged = iterate(v0)
    if not converged:
        rng = np.random.default_rng(0)
        r = rng.standard_normal(c)
        r /= np.linalg.norm(r)
        v, _ = iterate(r)
    return v


def eigencam(b: ActivationBundle) -> Heatmap:
    """Project activations onto their first right singular vector.

    Gradient-free. Sign is fixed so the projected map has non-negative
    mean before the ReLU/normalize tail.
    """
    a64 = b.activations.astype(np.float64)
    h, w, c = a64.shape
    if not a64.any():
        return Heatmap(
            values=np.zeros((h, w), dtype=np.float32),
            degenerate=True,
            image_id=b.image_id,
            method=CamMethod.EIGENCAM.value,
        )
    mat = a64.reshape(h * w, c)
    v1 = top_right_singular_vector(mat)
    raw = (mat @ v1).reshape(h, w)
    if raw.mean() < 0.0:
        raw = -raw
    return _finish(raw, b, CamMethod.EIGENCAM)


def scorecam(b: ActivationBundle) -> Heatmap:
    """Channels weighted by exporter-supplied masked forward-pass scores."""
    if b.channel_scores is None:
        raise MethodRequirementsError(
            f"scorecam needs channel_scores, but bundle {b.image_id!r}/{b.layer_id!r} has none"
        )
    s64 = b.channel_scores.astype(np.float64)
    combined = (b.activations.astype(np.float64) * s64).sum(axis=2)
    return _finish(combined, b, CamMethod.SCORECAM)


def mean_of_resized(maps: list, out_h: int, out_w: int) -> np.ndarray:
    """Resize each [0,1] map to a common shape and average pixelwise."""
    acc = np.zeros((out_h, out_w), dtype=np.float64)
    for m in maps:
        acc += bilinear_resize(m, out_h, out_w).astype(np.float64)
    acc /= len(maps)
    return acc


def ms_gradcam_pp(bundles, out_h: int, out_w: int) -> Heatmap:
    """Multi-layer aggregation: per-layer gradcam_pp maps are resized to a
    common shape, averaged pixelwise, and re-normalized."""
    bundles = list(bundles)
    if not bundles:
        raise ParameterError("msgradcampp needs at least one bundle")
    if out_h < 1 or out_w < 1:
        raise ParameterError(f"output shape must be positive, got ({out_h}, {out_w})")
    for b in bundles:
        _require_gradients(b, "msgradcampp")
    per_layer = [gradcam_pp(b).values for b in bundles]
    mean_map = mean_of_resized(per_layer, out_h, out_w)
    values, degenerate = minmax_normalize(mean_map)
    first = bundles[0]
    return Heatmap(
        values=values,
        degenerate=degenerate,
        image_id=first.image_id,
        method=CamMethod.MSGRADCAMPP.value,
    )


def compose(method: CamMethod, bundle: ActivationBundle) -> Heatmap:
    """Dispatch a single-layer method. msgradcampp needs ms_gradcam_pp instead."""
    if method == CamMethod.GRADCAM:
        return gradcam(bundle)
    if method == CamMethod.GRADCAMPP:
        return gradcam_pp(bundle)
    if method == CamMethod.LAYERCAM:
        return layercam(bundle)
    if method == CamMethod.EIGENCAM:
        return eigencam(bundle)
    if method == CamMethod.SCORECAM:
        return scorecam(bundle)
    raise ParameterError(f"compose() handles single-layer methods; got {method.value}")
