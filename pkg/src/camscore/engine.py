"""Gold-list formation and consistency scoring.

The per-class score is a confidence-weighted mean of pairwise soft-IoU
values over emphasized heatmaps of the class's gold-list images. The
pair loop is the performance core and runs through the kernels module.

Determinism: members are canonicalized by sorted image_id, confidences are
canonicalized by dividing by their maximum (exact under dyadic rescaling of
the inputs), each pair's pixel sums are computed wholly inside one worker,
and the final reductions run in a fixed order. Scores are therefore
bitwise-identical across worker counts and gold-list input orderings.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import ParameterError, ValidationError
from .kernels import pair_overlap_sums
from .tensor import Heatmap, emphasize

DEFAULT_TAU = 0.5
DEFAULT_ALPHA = 2.0


def validate_tau(tau: float) -> float:
    tau = float(tau)
    if not (0.0 < tau < 1.0):
        raise ParameterError(f"tau must lie strictly between 0 and 1, got {tau}")
    return tau


def validate_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not (alpha > 0.0):
        raise ParameterError(f"alpha must be > 0, got {alpha}")
    return alpha


@dataclass(frozen=True)
class GoldMember:
    image_id: str
    confidence: float


@dataclass(frozen=True)
class GoldList:
    """Images of one class whose confidence passes tau at one checkpoint."""

    class_id: int
    checkpoint_id: str
    members: tuple
    tau: float

    def __post_init__(self):
        validate_tau(self.tau)
        members = tuple(
            m if isinstance(m, GoldMember) else GoldMember(str(m[0]), float(m[1]))
            for m in self.members
        )
        seen = set()
        for m in members:
            if m.image_id in seen:
                raise ValidationError(f"duplicate image_id {m.image_id!r} in gold list")
            seen.add(m.image_id)
            if not (0.0 < m.confidence <= 1.0):
                raise ValidationError(
                    f"confidence {m.confidence} for {m.image_id!r} outside (0, 1]"
                )
            if m.confidence < self.tau:
                raise ValidationError(
                    f"confidence {m.confidence} for {m.image_id!r} below tau={self.tau}"
                )
        object.__setattr__(self, "members", members)

    def __len__(self) -> int:
        return len(self.members)

    @property
    def image_ids(self) -> tuple:
        return tuple(m.image_id for m in self.members)

    @property
    def confidences(self) -> np.ndarray:
        return np.array([m.confidence for m in self.members], dtype=np.float64)


def form_gold_list(
    labels: Mapping[str, int],
    confidences: Mapping[str, float],
    class_id: int,
    tau: float = DEFAULT_TAU,
    checkpoint_id: str = "",
) -> GoldList:
    """Select images with true label == class_id and confidence >= tau.

    `labels` and `confidences` must cover exactly the same image_ids;
    member order follows the iteration order of `labels`.
    """
    tau = validate_tau(tau)
    if set(labels.keys()) != set(confidences.keys()):
        only_l = sorted(set(labels) - set(confidences))[:3]
        only_c = sorted(set(confidences) - set(labels))[:3]
        raise ValidationError(
            f"labels/confidences misaligned (labels-only: {only_l}, confidences-only: {only_c})"
        )
    members = []
    for image_id, label in labels.items():
        p = float(confidences[image_id])
        if not (0.0 <= p <= 1.0):
            raise ValidationError(f"confidence {p} for {image_id!r} outside [0, 1]")
        if label == class_id and p >= tau:
            members.append(GoldMember(image_id, p))
    return GoldList(class_id=class_id, checkpoint_id=checkpoint_id, members=tuple(members), tau=tau)


@dataclass(frozen=True)
class ClassConsistencyResult:
    class_id: int
    method: str
    cscore: float
    gold_size: int
    degenerate_pairs: int = 0
    empty_gold: bool = False
    singleton_gold: bool = False

    def __post_init__(self):
        if self.empty_gold and (self.cscore != 0.0 or self.gold_size != 0):
            raise ValidationError("empty_gold result must have cscore 0 and gold_size 0")
        if self.singleton_gold and (self.cscore != 0.0 or self.gold_size != 1):
            raise ValidationError("singleton_gold result must have cscore 0 and gold_size 1")

    @property
    def flags(self) -> tuple:
        out = []
        if self.empty_gold:
            out.append("empty_gold")
        if self.singleton_gold:
            out.append("singleton_gold")
        if self.degenerate_pairs:
            out.append(f"degenerate_pairs={self.degenerate_pairs}")
        return tuple(out)


@dataclass(frozen=True)
class GlobalConsistencyResult:
    method: str
    cscore: float
    per_class: tuple
    supports: tuple
    all_empty: bool = False


def soft_iou(h1: Heatmap, h2: Heatmap) -> float:
    """Sum of elementwise minima over sum of elementwise maxima.

    Both-empty maps (zero union) score 0; see soft_iou_detail for the flag.
    """
    return soft_iou_detail(h1, h2)[0]


def soft_iou_detail(h1: Heatmap, h2: Heatmap) -> tuple[float, bool]:
    """soft_iou plus a flag marking degenerate (zero-union) pairs."""
    a = h1.values if isinstance(h1, Heatmap) else np.asarray(h1, dtype=np.float32)
    b = h2.values if isinstance(h2, Heatmap) else np.asarray(h2, dtype=np.float32)
    if a.shape != b.shape:
        raise ValidationError(f"heatmap shapes differ: {a.shape} vs {b.shape}")
    lo = np.minimum(a, b).sum(dtype=np.float64)
    hi = np.maximum(a, b).sum(dtype=np.float64)
    if hi == 0.0:
        return 0.0, True
    return float(lo / hi), False


def confidence_weights(gold: GoldList) -> np.ndarray:
    """Member confidences normalized to sum to 1 (empty list -> empty vector)."""
    p = gold.confidences
    if p.size == 0:
        return p
    return p / p.sum()


def _canonical_order(gold: GoldList, heatmaps: Sequence) -> tuple:
    if len(heatmaps) != len(gold):
        raise ValidationError(
            f"got {len(heatmaps)} heatmaps for a gold list of {len(gold)} members"
        )
    order = sorted(range(len(gold)), key=lambda i: gold.members[i].image_id)
    return order


def class_cscore(
    heatmaps: Sequence,
    gold: GoldList,
    alpha: float = DEFAULT_ALPHA,
    method: str = "",
) -> ClassConsistencyResult:
    """Confidence-weighted mean pairwise soft-IoU of emphasized heatmaps.

    `heatmaps` is aligned index-for-index with gold.members. Each map is
    emphasized once (x**alpha), pairs are scored with soft-IoU, and the
    score is sum((q_i+q_j) * s_ij) / sum(q_i+q_j) over all pairs i<j,
    where q is the confidence vector scaled by its own maximum (the same
    value as with sum-normalized weights, since the scale cancels).
    Degenerate pairs (both maps all zero) score 0 and are counted.
    """
    alpha = validate_alpha(alpha)
    n = len(gold)
    if n == 0:
        if len(heatmaps) != 0:
            raise ValidationError("heatmaps supplied for an empty gold list")
        return ClassConsistencyResult(
            class_id=gold.class_id, method=method, cscore=0.0, gold_size=0, empty_gold=True
        )
    order = _canonical_order(gold, heatmaps)
    if n == 1:
        # touch the single map so shape/range validation still applies
        _ = emphasize(heatmaps[0], alpha)
        return ClassConsistencyResult(
            class_id=gold.class_id, method=method, cscore=0.0, gold_size=1, singleton_gold=True
        )

    shape = heatmaps[0].values.shape
    stack = np.empty((n, shape[0] * shape[1]), dtype=np.float32)
    conf = np.empty(n, dtype=np.float64)
    for row, idx in enumerate(order):
        h = heatmaps[idx]
        if h.values.shape != shape:
            raise ValidationError(
                f"heatmap shapes differ: {h.values.shape} vs {shape} ({h.image_id!r})"
            )
        stack[row] = emphasize(h, alpha).values.reshape(-1)
        conf[row] = gold.members[idx].confidence

    q = conf / conf.max()
    min_sums, max_sums = pair_overlap_sums(stack)
    s = np.divide(min_sums, max_sums, out=np.zeros_like(min_sums), where=max_sums > 0.0)
    degenerate_pairs = int(np.count_nonzero(max_sums == 0.0))
    ii, jj = np.triu_indices(n, k=1)
    t = q[ii] + q[jj]
    cscore = float(np.sum(t * s) / np.sum(t))
    return ClassConsistencyResult(
        class_id=gold.class_id,
        method=method,
        cscore=cscore,
        gold_size=n,
        degenerate_pairs=degenerate_pairs,
    )


def global_cscore(per_class: Sequence) -> GlobalConsistencyResult:
    """Support-weighted mean of per-class scores.

    Weights are gold sizes over classes with non-empty gold lists; if every
    class is empty the global score is 0 with the all_empty flag.
    """
    per_class = tuple(per_class)
    if not per_class:
        raise ParameterError("global_cscore needs at least one class result")
    methods = {r.method for r in per_class}
    if len(methods) > 1:
        raise ValidationError(f"mixed methods in global aggregation: {sorted(methods)}")
    seen = set()
    for r in per_class:
        if r.class_id in seen:
            raise ValidationError(f"duplicate class_id {r.class_id} in global aggregation")
        seen.add(r.class_id)
    supports = tuple(r.gold_size for r in per_class)
    total = sum(s for s in supports if s > 0)
    if total == 0:
        return GlobalConsistencyResult(
            method=per_class[0].method,
            cscore=0.0,
            per_class=per_class,
            supports=supports,
            all_empty=True,
        )
    num = 0.0
    for r in per_class:
        if r.gold_size > 0:
            num += r.gold_size * r.cscore
    return GlobalConsistencyResult(
        method=per_class[0].method,
        cscore=num / total,
        per_class=per_class,
        supports=supports,
    )


def pairwise_matrix(heatmaps: Sequence, alpha: float = DEFAULT_ALPHA) -> np.ndarray:
    """Symmetric matrix of pairwise soft-IoU values after emphasis.

    Diagonal entries are 1 for non-degenerate maps, 0 for all-zero maps
    (matching the zero-union convention).
    """
    alpha = validate_alpha(alpha)
    n = len(heatmaps)
    if n < 1:
        raise ParameterError("pairwise_matrix needs at least one heatmap")
    shape = heatmaps[0].values.shape
    stack = np.empty((n, shape[0] * shape[1]), dtype=np.float32)
    for row, h in enumerate(heatmaps):
        if h.values.shape != shape:
            raise ValidationError(f"heatmap shapes differ: {h.values.shape} vs {shape}")
        stack[row] = emphasize(h, alpha).values.reshape(-1)
    out = np.zeros((n, n), dtype=np.float64)
    nonzero = stack.sum(axis=1, dtype=np.float64) > 0.0
    np.fill_diagonal(out, np.where(nonzero, 1.0, 0.0))
    if n >= 2:
        min_sums, max_sums = pair_overlap_sums(stack)
        s = np.divide(min_sums, max_sums, out=np.zeros_like(min_sums), where=max_sums > 0.0)
        ii, jj = np.triu_indices(n, k=1)
        out[ii, jj] = s
        out[jj, ii] = s
    return out
