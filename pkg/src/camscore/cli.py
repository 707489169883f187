"""Command-line surface.

Subcommands:
  cam         compose heatmaps for every image in a manifest
  score       per-class and global consistency scores for one checkpoint
  trajectory  join metrics + scores CSVs, run detectors, emit alerts JSON
  fixtures    write the bundled reference-run CSVs

Exit codes: 0 success (alerts are findings, not failures), 2 for bad
input or configuration, 1 for internal errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import fixtures as fixtures_mod
from . import kernels
from .cam import CamMethod, compose, ms_gradcam_pp
from .config import RunConfig
from .engine import class_cscore, form_gold_list, global_cscore, pairwise_matrix
from .errors import CamScoreError, InputError, ManifestError, ValidationError
from .formats import (
    GLOBAL_CLASS_LABEL,
    ScoreRow,
    read_cscore_report,
    read_epoch_metrics,
    read_manifest,
    write_alerts,
    write_cscore_report,
    write_f32,
)
from .tensor import Heatmap
from .trajectory import build_series, run_all_detectors

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_USAGE = 2


def _parse_methods(raw: str) -> tuple:
    return tuple(CamMethod.parse(tok) for tok in raw.split(",") if tok.strip())


def _parse_out_size(raw: str) -> tuple:
    try:
        h, w = raw.lower().split("x")
        return int(h), int(w)
    except ValueError:
        raise InputError(f"--out-size must look like 14x14, got {raw!r}") from None


def _resolve_layer(manifest, layer: str | None) -> str:
    if layer:
        if layer not in manifest.target_layers:
            raise InputError(
                f"layer {layer!r} not among manifest target layers {list(manifest.target_layers)}"
            )
        return layer
    return manifest.target_layers[-1]


def _ms_layer_list(manifest, config: RunConfig) -> tuple:
    return config.ms_layers if config.ms_layers else manifest.target_layers


def _ms_out_size(bundles, override: tuple | None) -> tuple:
    if override:
        return override
    out_h = max(b.spatial_shape[0] for b in bundles)
    out_w = max(b.spatial_shape[1] for b in bundles)
    return out_h, out_w


def _heatmap_for(manifest, image_id: str, method: CamMethod, config: RunConfig,
                 layer: str, out_size: tuple | None) -> Heatmap:
    if method == CamMethod.MSGRADCAMPP:
        bundles = [manifest.load_bundle(image_id, lid) for lid in _ms_layer_list(manifest, config)]
        out_h, out_w = _ms_out_size(bundles, out_size)
        return ms_gradcam_pp(bundles, out_h, out_w)
    return compose(method, manifest.load_bundle(image_id, layer))


def cmd_cam(args) -> int:
    manifest = read_manifest(args.manifest)
    config = RunConfig(
        methods=_parse_methods(args.methods),
        ms_layers=tuple(t for t in args.ms_layers.split(",") if t) if args.ms_layers else (),
    )
    layer = _resolve_layer(manifest, args.layer)
    out_size = _parse_out_size(args.out_size) if args.out_size else None
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    index = {
        "manifest": str(args.manifest),
        "checkpoint_id": manifest.checkpoint_id,
        "layer": layer,
        "maps": [],
    }
    for img in manifest.images:
        for method in config.methods:
            h = _heatmap_for(manifest, img.image_id, method, config, layer, out_size)
            fname = f"{img.image_id}_{method.value}.f32"
            write_f32(out_dir / fname, h.values)
            index["maps"].append(
                {
                    "image_id": img.image_id,
                    "method": method.value,
                    "file": fname,
                    "shape": list(h.values.shape),
                    "degenerate": h.degenerate,
                }
            )
    with open(out_dir / "heatmaps.json", "w", encoding="utf-8") as fh:
        json.dump(index, fh, indent=2)
        fh.write("\n")
    print(f"wrote {len(index['maps'])} heatmaps to {out_dir}")
    return EXIT_OK


def _gold_source(args, manifest):
    """Manifest whose labels/confidences define gold membership."""
    if args.anchor_manifest:
        anchor = read_manifest(args.anchor_manifest)
        missing = [i.image_id for i in anchor.images if i.image_id not in manifest.labels()]
        if missing:
            raise ValidationError(
                f"anchor manifest images absent from scored manifest: {missing[:5]}"
            )
        return anchor
    return manifest


def cmd_score(args) -> int:
    config = RunConfig(
        tau=args.tau,
        alpha=args.alpha,
        methods=_parse_methods(args.methods),
        ms_layers=tuple(t for t in args.ms_layers.split(",") if t) if args.ms_layers else (),
        workers=args.workers,
    )
    if config.workers is not None:
        kernels.set_workers(config.workers)
    manifest = read_manifest(args.manifest)
    if not manifest.images:
        raise ManifestError(f"{args.manifest}: no images to score")
    gold_src = _gold_source(args, manifest)
    layer = _resolve_layer(manifest, args.layer)
    out_size = _parse_out_size(args.out_size) if args.out_size else None
    labels = gold_src.labels()
    n_classes = gold_src.num_classes()

    pairwise_dir = Path(args.pairwise_dir) if args.pairwise_dir else None
    if pairwise_dir:
        pairwise_dir.mkdir(parents=True, exist_ok=True)

    rows = []
    for method in config.methods:
        per_class = []
        for class_id in range(n_classes):
            gold = form_gold_list(
                labels,
                gold_src.confidences_for(class_id),
                class_id,
                tau=config.tau,
                checkpoint_id=manifest.checkpoint_id,
            )
            heatmaps = [
                _heatmap_for(manifest, image_id, method, config, layer, out_size)
                for image_id in gold.image_ids
            ]
            result = class_cscore(heatmaps, gold, alpha=config.alpha, method=method.value)
            per_class.append(result)
            rows.append(
                ScoreRow(
                    checkpoint=manifest.checkpoint_id,
                    method=method.value,
                    class_label=manifest.class_label(class_id),
                    cscore=result.cscore,
                    gold_size=result.gold_size,
                    flags=result.flags,
                )
            )
            if pairwise_dir and result.gold_size >= 1:
                ordered = sorted(range(len(gold)), key=lambda i: gold.members[i].image_id)
                matrix = pairwise_matrix([heatmaps[i] for i in ordered], alpha=config.alpha)
                stem = f"pairwise_{method.value}_class{class_id}"
                np.ascontiguousarray(matrix, dtype="<f8").tofile(pairwise_dir / f"{stem}.f64")
                with open(pairwise_dir / f"{stem}.json", "w", encoding="utf-8") as fh:
                    json.dump(
                        {
                            "method": method.value,
                            "class_id": class_id,
                            "class_label": manifest.class_label(class_id),
                            "image_ids": [gold.members[i].image_id for i in ordered],
                            "file": f"{stem}.f64",
                            "dtype": "<f8",
                            "shape": [len(gold), len(gold)],
                            "alpha": config.alpha,
                        },
                        fh,
                        indent=2,
                    )
                    fh.write("\n")
        g = global_cscore(per_class)
        rows.append(
            ScoreRow(
                checkpoint=manifest.checkpoint_id,
                method=method.value,
                class_label=GLOBAL_CLASS_LABEL,
                cscore=g.cscore,
                gold_size=sum(s for s in g.supports if s > 0),
                flags=("all_empty",) if g.all_empty else (),
            )
        )
        print(f"{manifest.checkpoint_id} {method.value}: global={g.cscore:.3f}")
    write_cscore_report(rows, args.out)
    print(f"wrote {len(rows)} score rows to {args.out}")
    return EXIT_OK


def cmd_trajectory(args) -> int:
    metrics = read_epoch_metrics(args.metrics)
    scores = read_cscore_report(args.scores)
    series = build_series(metrics, scores, boundary=args.boundary)
    if args.methods:
        methods = [m.value for m in _parse_methods(args.methods)]
    else:
        methods = sorted({r.method for r in scores})
    alerts = run_all_detectors(
        series,
        methods,
        auc_floor=args.auc_floor,
        drop_ratio=args.drop_ratio,
        floor=args.score_floor,
        gap_min=args.gap_min,
    )
    for alert in alerts:
        bits = [f"epoch {alert.epoch}", alert.kind.value]
        if alert.method:
            bits.append(alert.method)
        if alert.class_label:
            bits.append(alert.class_label)
        print("ALERT: " + " ".join(bits))
    print(f"{len(series)} checkpoints analysed, {len(alerts)} alerts")
    if args.alerts:
        write_alerts(args.alerts, alerts)
        print(f"wrote alerts to {args.alerts}")
    return EXIT_OK


def cmd_fixtures(args) -> int:
    written = fixtures_mod.write_fixtures(args.out)
    for arch, paths in written.items():
        print(f"{arch}: " + ", ".join(str(p) for p in paths))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="camscore",
        description="Consistency scoring for class-activation heatmaps",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_cam = sub.add_parser("cam", help="compose heatmaps for a manifest")
    p_cam.add_argument("--manifest", required=True)
    p_cam.add_argument("--methods", default="gradcam", help="comma-separated method names")
    p_cam.add_argument("--layer", default=None, help="target layer (default: last in manifest)")
    p_cam.add_argument("--ms-layers", default=None, help="layers for the multi-scale method")
    p_cam.add_argument("--out-size", default=None, help="HxW for the multi-scale method")
    p_cam.add_argument("--out-dir", required=True)
    p_cam.set_defaults(func=cmd_cam)

    p_score = sub.add_parser("score", help="score one checkpoint's manifest")
    p_score.add_argument("--manifest", required=True)
    p_score.add_argument("--tau", type=float, default=0.5)
    p_score.add_argument("--alpha", type=float, default=2.0)
    p_score.add_argument(
        "--methods",
        default="gradcam,gradcampp,layercam,scorecam,eigencam,msgradcampp",
    )
    p_score.add_argument("--layer", default=None)
    p_score.add_argument("--ms-layers", default=None)
    p_score.add_argument("--out-size", default=None)
    p_score.add_argument("--workers", type=int, default=None)
    p_score.add_argument(
        "--anchor-manifest",
        default=None,
        help="take gold membership and confidences from this manifest instead",
    )
    p_score.add_argument(
        "--pairwise-dir",
        default=None,
        help="also write per-(method, class) pairwise overlap matrices here",
    )
    p_score.add_argument("--out", required=True, help="scores CSV path")
    p_score.set_defaults(func=cmd_score)

    p_traj = sub.add_parser("trajectory", help="series analysis and alerts")
    p_traj.add_argument("--metrics", required=True, help="epoch metrics CSV")
    p_traj.add_argument("--scores", required=True, help="scores CSV")
    p_traj.add_argument("--alerts", default=None, help="alerts JSON output path")
    p_traj.add_argument("--methods", default=None)
    p_traj.add_argument("--boundary", type=int, default=20)
    p_traj.add_argument("--auc-floor", type=float, default=0.95)
    p_traj.add_argument("--drop-ratio", type=float, default=0.25)
    p_traj.add_argument("--score-floor", type=float, default=0.10)
    p_traj.add_argument("--gap-min", type=float, default=0.40)
    p_traj.set_defaults(func=cmd_trajectory)

    p_fix = sub.add_parser("fixtures", help="write bundled reference-run CSVs")
    p_fix.add_argument("--out", required=True)
    p_fix.set_defaults(func=cmd_fixtures)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CamScoreError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
