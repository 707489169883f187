"""Checkpoint-series analysis: net score changes and alert detectors.

Three detectors cover the three ways ranking quality (AUC) and explanation
consistency can come apart during training:

- GoldListCollapse: a class's gold list empties while AUC stays high, so
  its score reads 0 for population reasons, not attribution reasons.
- AttributionCollapse: a method's score crashes between consecutive
  sampled checkpoints while AUC is still intact - an early warning that
  can precede classification failure.
- ClassMasking: a large per-class score gap hides inside a healthy-looking
  support-weighted global score.

Detectors are pure functions of the series and return deterministic,
epoch-ordered alert lists.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

from .errors import ParameterError, SeriesLookupError, ValidationError
from .formats import GLOBAL_CLASS_LABEL

DEFAULT_PHASE_BOUNDARY = 20
DEFAULT_AUC_FLOOR = 0.95
DEFAULT_DROP_RATIO = 0.25
DEFAULT_SCORE_FLOOR = 0.10
DEFAULT_GAP_MIN = 0.40

PHASE_EARLY = "TL"
PHASE_LATE = "FT"


class AlertKind(str, Enum):
    GOLD_LIST_COLLAPSE = "GoldListCollapse"
    ATTRIBUTION_COLLAPSE = "AttributionCollapse"
    CLASS_MASKING = "ClassMasking"


def phase_of(epoch: int, boundary: int = DEFAULT_PHASE_BOUNDARY) -> str:
    """Training phase label: early phase through `boundary` inclusive."""
    if epoch < 1:
        raise ParameterError(f"epoch must be >= 1, got {epoch}")
    return PHASE_EARLY if epoch <= boundary else PHASE_LATE


@dataclass(frozen=True)
class ClassCell:
    """One (method, class) score plus its gold-list size at a checkpoint."""

    cscore: float
    gold_size: int


@dataclass
class CheckpointRecord:
    """One evaluated checkpoint: ranking metrics plus consistency scores.

    class_scores maps (method, class_label) -> ClassCell;
    global_scores maps method -> global score.
    """

    epoch: int
    phase: str
    auc: float
    accuracy: float
    class_scores: dict = field(default_factory=dict)
    global_scores: dict = field(default_factory=dict)
    checkpoint_id: str = ""

    def __post_init__(self):
        if self.epoch < 1:
            raise ValidationError(f"epoch must be >= 1, got {self.epoch}")
        if self.phase not in (PHASE_EARLY, PHASE_LATE):
            raise ValidationError(f"phase must be {PHASE_EARLY} or {PHASE_LATE}, got {self.phase!r}")
        if not (0.0 <= self.auc <= 1.0):
            raise ValidationError(f"auc {self.auc} outside [0, 1] at epoch {self.epoch}")
        if not (0.0 <= self.accuracy <= 1.0):
            raise ValidationError(f"accuracy {self.accuracy} outside [0, 1] at epoch {self.epoch}")

    def methods(self) -> tuple:
        seen = dict.fromkeys(m for m, _ in self.class_scores)
        for m in self.global_scores:
            seen.setdefault(m)
        return tuple(seen)

    def classes(self) -> tuple:
        return tuple(dict.fromkeys(c for _, c in self.class_scores))

    def gold_size_of(self, class_label: str) -> int:
        """Gold size for a class; validated identical across methods."""
        sizes = {
            cell.gold_size for (m, c), cell in self.class_scores.items() if c == class_label
        }
        if not sizes:
            raise SeriesLookupError(f"class {class_label!r} absent at epoch {self.epoch}")
        if len(sizes) > 1:
            raise ValidationError(
                f"inconsistent gold sizes {sorted(sizes)} for class {class_label!r}"
                f" at epoch {self.epoch}"
            )
        return sizes.pop()


@dataclass(frozen=True)
class Alert:
    kind: AlertKind
    epoch: int
    method: str | None = None
    class_label: str | None = None
    evidence: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.evidence:
            raise ValidationError("alert emitted without evidence")

    def to_json_obj(self) -> dict:
        return {
            "kind": self.kind.value,
            "epoch": self.epoch,
            "method": self.method,
            "class": self.class_label,
            "evidence": dict(self.evidence),
        }


def _sorted_series(series: Sequence) -> list:
    if not series:
        raise ParameterError("empty checkpoint series")
    ordered = sorted(series, key=lambda r: r.epoch)
    epochs = [r.epoch for r in ordered]
    if len(set(epochs)) != len(epochs):
        dupes = sorted({e for e in epochs if epochs.count(e) > 1})
        raise ValidationError(f"duplicate epochs in series: {dupes}")
    return ordered


def _global_at(record: CheckpointRecord, method: str) -> float:
    try:
        return record.global_scores[method]
    except KeyError:
        raise SeriesLookupError(
            f"no global score for method {method!r} at epoch {record.epoch}"
        ) from None


def net_change(series: Sequence, method: str, e_from: int, e_to: int) -> float:
    """Global score at e_to minus global score at e_from."""
    by_epoch = {r.epoch: r for r in _sorted_series(series)}
    for e in (e_from, e_to):
        if e not in by_epoch:
            raise SeriesLookupError(f"epoch {e} not present in series")
    return _global_at(by_epoch[e_to], method) - _global_at(by_epoch[e_from], method)


def detect_goldlist_collapse(series: Sequence, auc_floor: float = DEFAULT_AUC_FLOOR) -> list:
    """Alert on every (epoch, class) whose gold list is empty while AUC
    stays at or above auc_floor. Low-AUC epochs are skipped: there the
    ranking metric already signals failure, so no dissociation exists."""
    alerts = []
    for record in _sorted_series(series):
        if record.auc < auc_floor:
            continue
        for class_label in record.classes():
            if record.gold_size_of(class_label) == 0:
                alerts.append(
                    Alert(
                        kind=AlertKind.GOLD_LIST_COLLAPSE,
                        epoch=record.epoch,
                        class_label=class_label,
                        evidence={"gold_size": 0, "auc": record.auc},
                    )
                )
    return alerts


def detect_attribution_collapse(
    series: Sequence,
    method: str,
    drop_ratio: float = DEFAULT_DROP_RATIO,
    floor: float = DEFAULT_SCORE_FLOOR,
    auc_floor: float = DEFAULT_AUC_FLOOR,
    class_label: str | None = None,
) -> list:
    """Alert when a method's score crashes between consecutive sampled
    checkpoints while AUC is still intact.

    Fires at checkpoint t when score(t) < drop_ratio * score(t-1), score(t)
    is below `floor`, and auc(t) >= auc_floor. Uses the global score by
    default; pass class_label to track one class instead.
    """
    ordered = _sorted_series(series)
    if len(ordered) < 2:
        raise ParameterError("attribution-collapse detection needs at least 2 checkpoints")

    def score_at(record):
        if class_label is None:
            return _global_at(record, method)
        cell = record.class_scores.get((method, class_label))
        if cell is None:
            raise SeriesLookupError(
                f"no score for ({method!r}, {class_label!r}) at epoch {record.epoch}"
            )
        return cell.cscore

    alerts = []
    for prev, cur in zip(ordered, ordered[1:]):
        s_prev = score_at(prev)
        s_cur = score_at(cur)
        if s_cur < drop_ratio * s_prev and s_cur < floor and cur.auc >= auc_floor:
            alerts.append(
                Alert(
                    kind=AlertKind.ATTRIBUTION_COLLAPSE,
                    epoch=cur.epoch,
                    method=method,
                    class_label=class_label,
                    evidence={
                        "score": s_cur,
                        "prev_score": s_prev,
                        "prev_epoch": prev.epoch,
                        "auc": cur.auc,
                        "drop_ratio": drop_ratio,
                        "floor": floor,
                    },
                )
            )
    return alerts


def detect_class_masking(series: Sequence, method: str, gap_min: float = DEFAULT_GAP_MIN) -> list:
    """Alert when per-class scores at one checkpoint spread by gap_min or
    more. Classes with empty gold lists are excluded (their zeros are a
    population effect, GoldListCollapse territory); at least two populated
    classes must remain for a gap to exist."""
    alerts = []
    for record in _sorted_series(series):
        cells = {
            c: cell
            for (m, c), cell in record.class_scores.items()
            if m == method and cell.gold_size > 0
        }
        if len(cells) < 2:
            continue
        high_class = max(cells, key=lambda c: (cells[c].cscore, c))
        low_class = min(cells, key=lambda c: (cells[c].cscore, c))
        gap = cells[high_class].cscore - cells[low_class].cscore
        if gap >= gap_min:
            alerts.append(
                Alert(
                    kind=AlertKind.CLASS_MASKING,
                    epoch=record.epoch,
                    method=method,
                    evidence={
                        "gap": gap,
                        "high_class": high_class,
                        "high_score": cells[high_class].cscore,
                        "low_class": low_class,
                        "low_score": cells[low_class].cscore,
                    },
                )
            )
    return alerts


def epoch_of_checkpoint(checkpoint_id: str) -> int:
    """Epoch number from a checkpoint id's trailing digits (e.g. "E25" -> 25)."""
    m = re.search(r"(\d+)$", checkpoint_id.strip())
    if not m:
        raise ValidationError(f"checkpoint id {checkpoint_id!r} has no trailing epoch number")
    return int(m.group(1))


def build_series(
    metrics_rows: Sequence,
    score_rows: Sequence,
    boundary: int = DEFAULT_PHASE_BOUNDARY,
) -> list:
    """Join per-epoch metrics with per-checkpoint scores into a series.

    One CheckpointRecord per checkpoint appearing in the score rows; its
    AUC/accuracy come from the metrics row of the matching epoch. Phase
    labels in the metrics must agree with the configured boundary.
    """
    metrics_by_epoch = {r.epoch: r for r in metrics_rows}
    grouped: dict = {}
    for row in score_rows:
        grouped.setdefault(row.checkpoint, []).append(row)

    records = []
    for checkpoint_id, rows in grouped.items():
        epoch = epoch_of_checkpoint(checkpoint_id)
        metrics = metrics_by_epoch.get(epoch)
        if metrics is None:
            raise SeriesLookupError(
                f"checkpoint {checkpoint_id!r} (epoch {epoch}) has no metrics row"
            )
        expected_phase = phase_of(epoch, boundary)
        if metrics.phase != expected_phase:
            raise ValidationError(
                f"epoch {epoch} labeled {metrics.phase!r} but boundary {boundary}"
                f" implies {expected_phase!r}"
            )
        class_scores = {}
        global_scores = {}
        for row in rows:
            if row.class_label == GLOBAL_CLASS_LABEL:
                if row.method in global_scores:
                    raise ValidationError(
                        f"duplicate global row for {row.method!r} at {checkpoint_id!r}"
                    )
                global_scores[row.method] = row.cscore
            else:
                key = (row.method, row.class_label)
                if key in class_scores:
                    raise ValidationError(f"duplicate row {key} at {checkpoint_id!r}")
                if "empty_gold" in row.flags and row.gold_size != 0:
                    raise ValidationError(
                        f"{checkpoint_id!r} {key}: empty_gold flag with gold_size"
                        f" {row.gold_size}"
                    )
                class_scores[key] = ClassCell(cscore=row.cscore, gold_size=row.gold_size)
        records.append(
            CheckpointRecord(
                epoch=epoch,
                phase=metrics.phase,
                auc=metrics.auc,
                accuracy=metrics.accuracy,
                class_scores=class_scores,
                global_scores=global_scores,
                checkpoint_id=checkpoint_id,
            )
        )
    return _sorted_series(records)


def run_all_detectors(
    series: Sequence,
    methods: Sequence,
    auc_floor: float = DEFAULT_AUC_FLOOR,
    drop_ratio: float = DEFAULT_DROP_RATIO,
    floor: float = DEFAULT_SCORE_FLOOR,
    gap_min: float = DEFAULT_GAP_MIN,
) -> list:
    """All three detectors over one series; alerts ordered by (epoch, kind,
    method, class) for stable output."""
    alerts = list(detect_goldlist_collapse(series, auc_floor=auc_floor))
    for method in methods:
        if len(series) >= 2:
            alerts.extend(
                detect_attribution_collapse(
                    series, method, drop_ratio=drop_ratio, floor=floor, auc_floor=auc_floor
                )
            )
        alerts.extend(detect_class_masking(series, method, gap_min=gap_min))
    alerts.sort(key=lambda a: (a.epoch, a.kind.value, a.method or "", a.class_label or ""))
    return alerts
