"""Bundled reference trajectories for three example backbones.

Three 30-epoch training runs (a two-phase schedule: epochs 1-20 frozen
backbone, 21-30 fine-tuning) with consistency scores at seven sampled
checkpoints. They exercise every detector: one run empties a class's gold
list mid-fine-tuning while AUC stays high, one run's scorecam consistency
crashes a full checkpoint before its AUC collapses, and one run hides a
large per-class gap inside a healthy global score.

The numbers are encoded verbatim from the source result tables. Note that
the recorded per-method net changes match the score cells exactly, while
the recorded mean changes do not equal the mean of those per-method values
(kept verbatim anyway; the test suite pins the discrepancy).
"""

from __future__ import annotations

from pathlib import Path

from .formats import (
    GLOBAL_CLASS_LABEL,
    MetricsRow,
    ScoreRow,
    write_cscore_report,
    write_epoch_metrics,
)
from .trajectory import build_series, phase_of

ARCHITECTURES = ("densenet201", "inceptionv3", "resnet50v2")

TARGET_LAYERS = {
    "densenet201": "conv5_block32_concat",
    "inceptionv3": "mixed10",
    "resnet50v2": "conv5_block3_out",
}

MS_LAYERS = {
    "densenet201": ("conv3_block12", "pool4", "conv5_block32"),
}

CHECKPOINT_EPOCHS = (1, 5, 10, 15, 20, 25, 30)

METHODS = ("gradcam", "gradcampp", "layercam", "scorecam", "eigencam", "msgradcampp")

CLASS_LABELS = ("Normal", "Pneumonia")

SUPPORTS = {"Normal": 317, "Pneumonia": 855}

# (checkpoint, class) cells whose gold list is empty; all other sampled
# cells carry the full test support of their class
EMPTY_GOLD_CELLS = {
    ("densenet201", 25, "Normal"),
    ("resnet50v2", 30, "Normal"),
}

# per-epoch (auc, accuracy): 30 rows per run, fractions not percentages
EPOCH_METRICS = {
    "densenet201": (
        (0.9184, 0.6160), (0.9656, 0.8464), (0.9657, 0.4548), (0.9804, 0.9096),
        (0.9848, 0.9403), (0.9855, 0.9258), (0.9859, 0.9497), (0.9865, 0.9044),
        (0.9882, 0.9480), (0.9886, 0.9488), (0.9889, 0.9488), (0.9890, 0.9514),
        (0.9893, 0.9531), (0.9893, 0.9480), (0.9903, 0.9079), (0.9890, 0.9573),
        (0.9901, 0.9573), (0.9902, 0.9590), (0.9899, 0.9514), (0.9902, 0.9480),
        (0.9842, 0.2773), (0.9852, 0.2705), (0.9891, 0.2705), (0.9910, 0.8370),
        (0.9867, 0.7295), (0.9844, 0.7295), (0.9931, 0.9693), (0.9927, 0.9676),
        (0.9941, 0.8677), (0.9945, 0.9420),
    ),
    "inceptionv3": (
        (0.8705, 0.6613), (0.9310, 0.6433), (0.9509, 0.6997), (0.9542, 0.8635),
        (0.9592, 0.7833), (0.9626, 0.8046), (0.9602, 0.8549), (0.9641, 0.8413),
        (0.9633, 0.8763), (0.9664, 0.8686), (0.9673, 0.8720), (0.9672, 0.8703),
        (0.9675, 0.8899), (0.9661, 0.8823), (0.9679, 0.8891), (0.9661, 0.8925),
        (0.9678, 0.8788), (0.9676, 0.8746), (0.9684, 0.8882), (0.9680, 0.8933),
        (0.9297, 0.8430), (0.9648, 0.7295), (0.9836, 0.2875), (0.9892, 0.6920),
        (0.9902, 0.9676), (0.9930, 0.3823), (0.9925, 0.8746), (0.9949, 0.9761),
        (0.9943, 0.9462), (0.9949, 0.9462),
    ),
    "resnet50v2": (
        (0.9582, 0.8148), (0.9760, 0.9420), (0.9807, 0.8242), (0.9800, 0.9471),
        (0.9876, 0.9582), (0.9885, 0.9556), (0.9859, 0.9582), (0.9888, 0.9079),
        (0.9894, 0.9471), (0.9892, 0.9352), (0.9908, 0.9505), (0.9909, 0.9428),
        (0.9895, 0.9590), (0.9900, 0.8439), (0.9902, 0.9497), (0.9893, 0.9206),
        (0.9901, 0.9249), (0.9891, 0.9462), (0.9888, 0.9514), (0.9898, 0.9420),
        (0.9876, 0.7986), (0.9807, 0.4249), (0.0287, 0.7099), (0.9885, 0.4445),
        (0.9902, 0.7875), (0.9868, 0.8234), (0.9933, 0.9539), (0.9938, 0.7491),
        (0.9947, 0.9701), (0.1034, 0.7295),
    ),
}

# global support-weighted scores at the seven sampled checkpoints
GLOBAL_CSCORE = {
    "densenet201": {
        "gradcam":     (0.113, 0.168, 0.170, 0.198, 0.197, 0.744, 0.807),
        "gradcampp":   (0.358, 0.461, 0.546, 0.566, 0.549, 0.916, 0.870),
        "layercam":    (0.403, 0.479, 0.569, 0.583, 0.559, 0.915, 0.871),
        "scorecam":    (0.460, 0.563, 0.622, 0.632, 0.630, 0.933, 0.880),
        "eigencam":    (0.635, 0.634, 0.635, 0.636, 0.635, 0.908, 0.846),
        "msgradcampp": (0.322, 0.380, 0.439, 0.460, 0.445, 0.644, 0.618),
    },
    "inceptionv3": {
        "gradcam":     (0.169, 0.242, 0.209, 0.195, 0.196, 0.875, 0.244),
        "gradcampp":   (0.475, 0.508, 0.492, 0.484, 0.485, 0.808, 0.762),
        "layercam":    (0.567, 0.583, 0.572, 0.567, 0.568, 0.802, 0.763),
        "scorecam":    (0.392, 0.386, 0.383, 0.381, 0.379, 0.790, 0.759),
        "eigencam":    (0.758, 0.759, 0.758, 0.757, 0.756, 0.896, 0.852),
        "msgradcampp": (0.419, 0.417, 0.417, 0.415, 0.419, 0.659, 0.654),
    },
    "resnet50v2": {
        "gradcam":     (0.422, 0.387, 0.573, 0.400, 0.385, 0.272, 0.370),
        "gradcampp":   (0.320, 0.613, 0.642, 0.607, 0.593, 0.676, 0.478),
        "layercam":    (0.513, 0.667, 0.681, 0.662, 0.654, 0.675, 0.489),
        "scorecam":    (0.517, 0.698, 0.629, 0.621, 0.612, 0.014, 0.000),
        "eigencam":    (0.589, 0.685, 0.693, 0.692, 0.688, 0.678, 0.495),
        "msgradcampp": (0.313, 0.508, 0.527, 0.508, 0.507, 0.533, 0.409),
    },
}

# per-class scores at the same checkpoints
PER_CLASS_CSCORE = {
    "densenet201": {
        "gradcam": {
            "Normal":    (0.159, 0.593, 0.606, 0.663, 0.664, 0.000, 0.924),
            "Pneumonia": (0.078, 0.007, 0.002, 0.004, 0.014, 0.744, 0.761),
        },
        "gradcampp": {
            "Normal":    (0.424, 0.669, 0.694, 0.728, 0.718, 0.000, 0.918),
            "Pneumonia": (0.310, 0.382, 0.490, 0.498, 0.483, 0.916, 0.851),
        },
        "layercam": {
            "Normal":    (0.471, 0.672, 0.696, 0.729, 0.716, 0.000, 0.919),
            "Pneumonia": (0.352, 0.406, 0.520, 0.522, 0.498, 0.915, 0.852),
        },
        "scorecam": {
            "Normal":    (0.539, 0.621, 0.688, 0.738, 0.714, 0.000, 0.907),
            "Pneumonia": (0.401, 0.541, 0.597, 0.587, 0.597, 0.933, 0.869),
        },
        "eigencam": {
            "Normal":    (0.680, 0.682, 0.688, 0.689, 0.688, 0.000, 0.895),
            "Pneumonia": (0.603, 0.615, 0.615, 0.614, 0.614, 0.908, 0.826),
        },
        "msgradcampp": {
            "Normal":    (0.370, 0.504, 0.535, 0.586, 0.573, 0.000, 0.674),
            "Pneumonia": (0.286, 0.333, 0.402, 0.408, 0.395, 0.644, 0.596),
        },
    },
    "inceptionv3": {
        "gradcam": {
            "Normal":    (0.047, 0.288, 0.380, 0.317, 0.335, 0.840, 0.847),
            "Pneumonia": (0.244, 0.218, 0.138, 0.146, 0.140, 0.887, 0.008),
        },
        "gradcampp": {
            "Normal":    (0.469, 0.542, 0.536, 0.516, 0.509, 0.872, 0.851),
            "Pneumonia": (0.479, 0.491, 0.474, 0.471, 0.475, 0.785, 0.728),
        },
        "layercam": {
            "Normal":    (0.613, 0.642, 0.631, 0.620, 0.623, 0.866, 0.852),
            "Pneumonia": (0.539, 0.553, 0.548, 0.546, 0.546, 0.779, 0.728),
        },
        "scorecam": {
            "Normal":    (0.292, 0.332, 0.303, 0.286, 0.286, 0.845, 0.852),
            "Pneumonia": (0.453, 0.414, 0.416, 0.419, 0.417, 0.770, 0.723),
        },
        "eigencam": {
            "Normal":    (0.770, 0.777, 0.775, 0.774, 0.774, 0.938, 0.922),
            "Pneumonia": (0.750, 0.750, 0.750, 0.750, 0.749, 0.881, 0.825),
        },
        "msgradcampp": {
            "Normal":    (0.393, 0.407, 0.407, 0.400, 0.396, 0.753, 0.759),
            "Pneumonia": (0.435, 0.422, 0.421, 0.421, 0.429, 0.626, 0.613),
        },
    },
    "resnet50v2": {
        "gradcam": {
            "Normal":    (0.333, 0.095, 0.573, 0.455, 0.481, 0.798, 0.000),
            "Pneumonia": (0.463, 0.493, 0.572, 0.379, 0.348, 0.000, 0.370),
        },
        "gradcampp": {
            "Normal":    (0.364, 0.656, 0.662, 0.643, 0.634, 0.798, 0.000),
            "Pneumonia": (0.300, 0.598, 0.635, 0.593, 0.578, 0.613, 0.478),
        },
        "layercam": {
            "Normal":    (0.517, 0.715, 0.711, 0.696, 0.688, 0.798, 0.000),
            "Pneumonia": (0.511, 0.650, 0.669, 0.648, 0.640, 0.611, 0.489),
        },
        "scorecam": {
            "Normal":    (0.508, 0.882, 0.652, 0.645, 0.649, 0.041, 0.000),
            "Pneumonia": (0.521, 0.632, 0.621, 0.611, 0.597, 0.000, 0.000),
        },
        "eigencam": {
            "Normal":    (0.593, 0.745, 0.727, 0.728, 0.723, 0.802, 0.000),
            "Pneumonia": (0.587, 0.664, 0.680, 0.678, 0.675, 0.614, 0.495),
        },
        "msgradcampp": {
            "Normal":    (0.333, 0.495, 0.518, 0.508, 0.508, 0.595, 0.000),
            "Pneumonia": (0.303, 0.512, 0.530, 0.507, 0.507, 0.500, 0.409),
        },
    },
}

# recorded global-score net changes, epoch 20 -> epoch 30, per method;
# these match the cells above exactly
NET_CHANGE_REFERENCE = {
    "densenet201": {
        "gradcam": 0.610, "gradcampp": 0.321, "layercam": 0.312,
        "scorecam": 0.250, "eigencam": 0.211,
    },
    "inceptionv3": {
        "gradcam": 0.048, "gradcampp": 0.277, "layercam": 0.195,
        "scorecam": 0.380, "eigencam": 0.096,
    },
    "resnet50v2": {
        "gradcam": -0.015, "gradcampp": -0.115, "layercam": -0.165,
        "scorecam": -0.612, "eigencam": -0.193,
    },
}

# recorded summary means for the same net changes; kept verbatim even
# though they do NOT equal the mean of NET_CHANGE_REFERENCE (or of the
# cell-derived deltas) under any method subset - see the trajectory tests
MEAN_CHANGE_RECORDED = {
    "densenet201": 0.267,
    "inceptionv3": 0.158,
    "resnet50v2": -0.162,
}


def gold_size(arch: str, epoch: int, class_label: str) -> int:
    if (arch, epoch, class_label) in EMPTY_GOLD_CELLS:
        return 0
    return SUPPORTS[class_label]


def checkpoint_id(epoch: int) -> str:
    return f"E{epoch}"


def metrics_rows(arch: str) -> list:
    rows = []
    for idx, (auc, acc) in enumerate(EPOCH_METRICS[arch]):
        epoch = idx + 1
        rows.append(MetricsRow(epoch=epoch, phase=phase_of(epoch), auc=auc, accuracy=acc))
    return rows


def score_rows(arch: str) -> list:
    rows = []
    for col, epoch in enumerate(CHECKPOINT_EPOCHS):
        cp = checkpoint_id(epoch)
        for method in METHODS:
            supports_here = []
            for class_label in CLASS_LABELS:
                size = gold_size(arch, epoch, class_label)
                supports_here.append(size)
                flags = ("empty_gold",) if size == 0 else ()
                rows.append(
                    ScoreRow(
                        checkpoint=cp,
                        method=method,
                        class_label=class_label,
                        cscore=PER_CLASS_CSCORE[arch][method][class_label][col],
                        gold_size=size,
                        flags=flags,
                    )
                )
            rows.append(
                ScoreRow(
                    checkpoint=cp,
                    method=method,
                    class_label=GLOBAL_CLASS_LABEL,
                    cscore=GLOBAL_CSCORE[arch][method][col],
                    gold_size=sum(supports_here),
                    flags=(),
                )
            )
    return rows


def series(arch: str) -> list:
    """The run's checkpoint series, assembled through the normal pipeline."""
    return build_series(metrics_rows(arch), score_rows(arch))


def write_fixtures(out_dir) -> dict:
    """Write each run's metrics and scores CSVs; returns {arch: (paths)}."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = {}
    for arch in ARCHITECTURES:
        metrics_path = out_dir / f"{arch}_epoch_metrics.csv"
        scores_path = out_dir / f"{arch}_cscores.csv"
        write_epoch_metrics(metrics_path, metrics_rows(arch))
        write_cscore_report(score_rows(arch), scores_path)
        written[arch] = (metrics_path, scores_path)
    return written
