"""File formats: tensor files, bundle manifests, metrics and score CSVs,
and the alerts JSON document.

Tensor files are raw little-endian 32-bit floats with no header; shapes
live only in the manifest. The manifest is one JSON document per
checkpoint (version 1):

    {
      "version": 1,
      "architecture": "densenet201",
      "checkpoint_id": "E25",
      "target_layers": ["conv5_block32_concat"],
      "class_names": ["Normal", "Pneumonia"],        # optional
      "head_type": "softmax",                        # optional
      "images": [
        {
          "image_id": "img0001",
          "true_label": 0,
          "confidences": [0.93, 0.07],
          "scorecam_baseline": "zeros",              # optional
          "layers": {
            "conv5_block32_concat": {
              "activations":    {"file": "img0001_act.f32", "shape": [7, 7, 1920]},
              "gradients":      {"file": "img0001_grad.f32", "shape": [7, 7, 1920]},  # optional
              "channel_scores": {"file": "img0001_cs.f32", "shape": [1920]}           # optional
            }
          }
        }
      ]
    }

File references are relative to the manifest's directory. Every referenced
file's existence and byte size are checked up front; tensor payloads load
lazily per (image, layer).
"""

from __future__ import annotations

import csv
import json
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .cam import ActivationBundle
from .errors import CsvParseError, ManifestError, ValidationError

MANIFEST_VERSION = 1

METRICS_HEADER = ["epoch", "phase", "auc", "accuracy"]
SCORES_HEADER = ["checkpoint", "method", "class", "cscore", "cscore_full", "gold_size", "flags"]
GLOBAL_CLASS_LABEL = "global"


# ---------------------------------------------------------------------------
# raw tensor files
# ---------------------------------------------------------------------------

def write_f32(path, arr) -> None:
    """Write an array as raw little-endian float32, C order, no header."""
    np.ascontiguousarray(arr, dtype="<f4").tofile(path)


def read_f32(path, shape) -> np.ndarray:
    """Read a raw little-endian float32 file into the given shape."""
    shape = tuple(int(d) for d in shape)
    expected = int(np.prod(shape)) * 4
    actual = os.stat(path).st_size
    if actual != expected:
        raise ManifestError(
            f"{path}: expected {expected} bytes for shape {shape}, found {actual}"
        )
    data = np.fromfile(path, dtype="<f4")
    return data.reshape(shape)


# ---------------------------------------------------------------------------
# bundle manifest
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LayerRef:
    file: str
    shape: tuple


@dataclass(frozen=True)
class ManifestImage:
    image_id: str
    true_label: int
    confidences: tuple
    layers: dict
    scorecam_baseline: str | None = None


@dataclass
class Manifest:
    version: int
    architecture: str
    checkpoint_id: str
    target_layers: tuple
    images: tuple
    base_dir: Path
    class_names: tuple | None = None
    head_type: str | None = None

    def image(self, image_id: str) -> ManifestImage:
        for img in self.images:
            if img.image_id == image_id:
                return img
        raise ManifestError(f"image {image_id!r} not in manifest {self.checkpoint_id!r}")

    def class_label(self, class_id: int) -> str:
        if self.class_names is not None and 0 <= class_id < len(self.class_names):
            return self.class_names[class_id]
        return str(class_id)

    def num_classes(self) -> int:
        return len(self.images[0].confidences) if self.images else 0

    def labels(self) -> dict:
        return {img.image_id: img.true_label for img in self.images}

    def confidences_for(self, class_id: int) -> dict:
        return {img.image_id: img.confidences[class_id] for img in self.images}

    def _ref(self, img: ManifestImage, layer_id: str, kind: str) -> LayerRef | None:
        try:
            refs = img.layers[layer_id]
        except KeyError:
            raise ManifestError(
                f"image {img.image_id!r} has no tensors for layer {layer_id!r}"
            ) from None
        return refs.get(kind)

    def load_bundle(self, image_id: str, layer_id: str) -> ActivationBundle:
        img = self.image(image_id) if not isinstance(image_id, ManifestImage) else image_id
        act_ref = self._ref(img, layer_id, "activations")
        if act_ref is None:
            raise ManifestError(
                f"image {img.image_id!r} layer {layer_id!r} lacks an activations reference"
            )
        activations = read_f32(self.base_dir / act_ref.file, act_ref.shape)
        grad_ref = self._ref(img, layer_id, "gradients")
        gradients = read_f32(self.base_dir / grad_ref.file, grad_ref.shape) if grad_ref else None
        cs_ref = self._ref(img, layer_id, "channel_scores")
        channel_scores = read_f32(self.base_dir / cs_ref.file, cs_ref.shape) if cs_ref else None
        return ActivationBundle(
            layer_id=layer_id,
            activations=activations,
            gradients=gradients,
            channel_scores=channel_scores,
            class_id=img.true_label,
            image_id=img.image_id,
        )

    def bundles_for(self, layer_id: str):
        """Load every image's bundle at one layer, in manifest order."""
        for img in self.images:
            yield self.load_bundle(img.image_id, layer_id)


def _parse_ref(obj, where: str) -> LayerRef:
    if not isinstance(obj, dict) or "file" not in obj or "shape" not in obj:
        raise ManifestError(f"{where}: tensor reference needs 'file' and 'shape'")
    shape = tuple(int(d) for d in obj["shape"])
    if not shape or any(d < 1 for d in shape):
        raise ManifestError(f"{where}: bad shape {shape}")
    return LayerRef(file=str(obj["file"]), shape=shape)


def read_manifest(path) -> Manifest:
    """Load and validate a bundle manifest.

    Checks the version, layer coverage, confidence ranges, and that every
    referenced tensor file exists with the byte size its shape implies.
    Tensor payloads are not read here; use load_bundle / bundles_for.
    """
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise ManifestError(f"manifest not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}: not valid JSON ({exc})") from None

    version = doc.get("version")
    if version != MANIFEST_VERSION:
        raise ManifestError(
            f"{path}: unsupported manifest version {version!r} (expected {MANIFEST_VERSION})"
        )
    target_layers = tuple(str(x) for x in doc.get("target_layers", []))
    if not target_layers:
        raise ManifestError(f"{path}: target_layers must be non-empty")

    base_dir = path.parent
    images = []
    seen_ids = set()
    n_classes = None
    for pos, img_doc in enumerate(doc.get("images", [])):
        where = f"{path} images[{pos}]"
        try:
            image_id = str(img_doc["image_id"])
            true_label = int(img_doc["true_label"])
            confidences = tuple(float(p) for p in img_doc["confidences"])
            layers_doc = img_doc["layers"]
        except (KeyError, TypeError, ValueError) as exc:
            raise ManifestError(f"{where}: {exc!r}") from None
        if image_id in seen_ids:
            raise ManifestError(f"{where}: duplicate image_id {image_id!r}")
        seen_ids.add(image_id)
        if n_classes is None:
            n_classes = len(confidences)
        elif len(confidences) != n_classes:
            raise ManifestError(
                f"{where}: {len(confidences)} confidences, expected {n_classes}"
            )
        if not confidences:
            raise ManifestError(f"{where}: empty confidences")
        for p in confidences:
            if not (0.0 <= p <= 1.0):
                raise ManifestError(f"{where}: confidence {p} outside [0, 1]")
        if not (0 <= true_label < len(confidences)):
            raise ManifestError(f"{where}: true_label {true_label} has no confidence entry")

        layers = {}
        for layer_id, refs_doc in layers_doc.items():
            refs = {}
            for kind in ("activations", "gradients", "channel_scores"):
                if refs_doc.get(kind) is not None:
                    refs[kind] = _parse_ref(refs_doc[kind], f"{where} layer {layer_id!r} {kind}")
            if "activations" not in refs:
                raise ManifestError(f"{where}: layer {layer_id!r} lacks activations")
            act_shape = refs["activations"].shape
            if len(act_shape) != 3:
                raise ManifestError(
                    f"{where}: activations shape {act_shape} for layer {layer_id!r} is not 3-d"
                )
            if "gradients" in refs and refs["gradients"].shape != act_shape:
                raise ManifestError(
                    f"{where}: gradients shape {refs['gradients'].shape} != activations"
                    f" shape {act_shape} for layer {layer_id!r}"
                )
            if "channel_scores" in refs:
                cs_shape = refs["channel_scores"].shape
                if cs_shape != (act_shape[2],):
                    raise ManifestError(
                        f"{where}: channel_scores shape {cs_shape} != ({act_shape[2]},)"
                        f" for layer {layer_id!r}"
                    )
            layers[str(layer_id)] = refs
        for layer_id in target_layers:
            if layer_id not in layers:
                raise ManifestError(
                    f"{where}: image {image_id!r} missing target layer {layer_id!r}"
                )
        # every referenced file must exist with the size its shape implies
        for layer_id, refs in layers.items():
            for kind, ref in refs.items():
                fpath = base_dir / ref.file
                if not fpath.is_file():
                    raise ManifestError(
                        f"{where}: {kind} file {fpath} for layer {layer_id!r} does not exist"
                    )
                expected = int(np.prod(ref.shape)) * 4
                actual = fpath.stat().st_size
                if actual != expected:
                    raise ManifestError(
                        f"{where}: {kind} file {fpath} for image {image_id!r} layer"
                        f" {layer_id!r} holds {actual} bytes, shape {ref.shape} needs {expected}"
                    )
        images.append(
            ManifestImage(
                image_id=image_id,
                true_label=true_label,
                confidences=confidences,
                layers=layers,
                scorecam_baseline=img_doc.get("scorecam_baseline"),
            )
        )

    class_names = doc.get("class_names")
    if class_names is not None:
        class_names = tuple(str(c) for c in class_names)
        if n_classes is not None and len(class_names) != n_classes:
            raise ManifestError(
                f"{path}: {len(class_names)} class_names but {n_classes} confidences per image"
            )
    return Manifest(
        version=version,
        architecture=str(doc.get("architecture", "")),
        checkpoint_id=str(doc.get("checkpoint_id", "")),
        target_layers=target_layers,
        images=tuple(images),
        base_dir=base_dir,
        class_names=class_names,
        head_type=doc.get("head_type"),
    )


# ---------------------------------------------------------------------------
# epoch metrics CSV
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MetricsRow:
    epoch: int
    phase: str
    auc: float
    accuracy: float


def read_epoch_metrics(path) -> list:
    """Parse an epoch,phase,auc,accuracy CSV (fractions, not percentages).

    Epochs must be strictly increasing; every parse problem reports its
    line number.
    """
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvParseError(f"{path}: empty file, expected header "
                                f"{','.join(METRICS_HEADER)}") from None
        if header != METRICS_HEADER:
            raise CsvParseError(
                f"{path} line 1: header {','.join(header)!r} !="
                f" {','.join(METRICS_HEADER)!r}"
            )
        prev_epoch = None
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise CsvParseError(f"{path} line {lineno}: expected 4 fields, got {len(row)}")
            try:
                epoch = int(row[0])
                phase = row[1].strip()
                auc = float(row[2])
                accuracy = float(row[3])
            except ValueError as exc:
                raise CsvParseError(f"{path} line {lineno}: {exc}") from None
            if epoch < 1:
                raise CsvParseError(f"{path} line {lineno}: epoch {epoch} < 1")
            if prev_epoch is not None and epoch <= prev_epoch:
                raise CsvParseError(
                    f"{path} line {lineno}: epoch {epoch} not greater than {prev_epoch}"
                )
            if phase not in ("TL", "FT"):
                raise CsvParseError(f"{path} line {lineno}: phase {phase!r} not TL or FT")
            if not (0.0 <= auc <= 1.0):
                raise CsvParseError(f"{path} line {lineno}: auc {auc} outside [0, 1]")
            if not (0.0 <= accuracy <= 1.0):
                raise CsvParseError(f"{path} line {lineno}: accuracy {accuracy} outside [0, 1]")
            prev_epoch = epoch
            rows.append(MetricsRow(epoch=epoch, phase=phase, auc=auc, accuracy=accuracy))
    return rows


def write_epoch_metrics(path, rows: Sequence) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(METRICS_HEADER)
        for r in rows:
            writer.writerow([r.epoch, r.phase, repr(float(r.auc)), repr(float(r.accuracy))])


# ---------------------------------------------------------------------------
# scores CSV
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScoreRow:
    checkpoint: str
    method: str
    class_label: str
    cscore: float
    gold_size: int
    flags: tuple = field(default_factory=tuple)


def _natural_key(text: str) -> tuple:
    return tuple(int(tok) if tok.isdigit() else tok for tok in re.split(r"(\d+)", text))


def score_rows_sorted(rows: Sequence) -> list:
    return sorted(
        rows, key=lambda r: (_natural_key(r.checkpoint), r.method, _natural_key(r.class_label))
    )


def write_cscore_report(rows: Sequence, path) -> None:
    """Emit score rows as CSV, deterministically ordered.

    The cscore column is fixed 3-decimal (table style); cscore_full keeps
    the round-trip-exact value.
    """
    rows = list(rows)
    if not rows:
        raise ValidationError("refusing to write an empty score report")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SCORES_HEADER)
        for r in score_rows_sorted(rows):
            writer.writerow(
                [
                    r.checkpoint,
                    r.method,
                    r.class_label,
                    f"{r.cscore:.3f}",
                    repr(float(r.cscore)),
                    r.gold_size,
                    ";".join(r.flags),
                ]
            )


def read_cscore_report(path) -> list:
    """Read a scores CSV back; cscore comes from the full-precision column."""
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvParseError(f"{path}: empty file, expected header "
                                f"{','.join(SCORES_HEADER)}") from None
        if header != SCORES_HEADER:
            raise CsvParseError(
                f"{path} line 1: header {','.join(header)!r} != {','.join(SCORES_HEADER)!r}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(SCORES_HEADER):
                raise CsvParseError(
                    f"{path} line {lineno}: expected {len(SCORES_HEADER)} fields, got {len(row)}"
                )
            try:
                cscore = float(row[4])
                gold_size = int(row[5])
            except ValueError as exc:
                raise CsvParseError(f"{path} line {lineno}: {exc}") from None
            if not (0.0 <= cscore <= 1.0):
                raise CsvParseError(f"{path} line {lineno}: cscore {cscore} outside [0, 1]")
            if gold_size < 0:
                raise CsvParseError(f"{path} line {lineno}: negative gold_size")
            flags = tuple(f for f in row[6].split(";") if f)
            rows.append(
                ScoreRow(
                    checkpoint=row[0],
                    method=row[1],
                    class_label=row[2],
                    cscore=cscore,
                    gold_size=gold_size,
                    flags=flags,
                )
            )
    return rows


def write_alerts(path, alerts: Sequence) -> None:
    """Serialize alerts as a JSON array of {kind, epoch, method, class, evidence}."""
    payload = [a.to_json_obj() if hasattr(a, "to_json_obj") else dict(a) for a in alerts]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
