"""camscore: consistency scoring for class-activation heatmaps.

Composes CAM heatmaps from exported activation/gradient bundles, scores
their cross-image consistency per class at each training checkpoint, and
watches checkpoint series for the three ways ranking quality and
explanation consistency come apart.
"""

from .cam import (
    ActivationBundle,
    CamMethod,
    compose,
    eigencam,
    gradcam,
    gradcam_pp,
    layercam,
    ms_gradcam_pp,
    scorecam,
)
from .config import RunConfig
from .engine import (
    ClassConsistencyResult,
    GlobalConsistencyResult,
    GoldList,
    GoldMember,
    class_cscore,
    confidence_weights,
    form_gold_list,
    global_cscore,
    pairwise_matrix,
    soft_iou,
)
from .errors import (
    CamScoreError,
    CsvParseError,
    InputError,
    ManifestError,
    MethodRequirementsError,
    ParameterError,
    SeriesLookupError,
    TensorError,
    ValidationError,
)
from .formats import (
    Manifest,
    MetricsRow,
    ScoreRow,
    read_cscore_report,
    read_epoch_metrics,
    read_f32,
    read_manifest,
    write_alerts,
    write_cscore_report,
    write_f32,
)
from .kernels import active_backend, set_backend, set_workers
from .tensor import (
    Heatmap,
    bilinear_resize,
    minmax_normalize,
    power_emphasis,
    relu_inplace,
)
from .trajectory import (
    Alert,
    AlertKind,
    CheckpointRecord,
    ClassCell,
    build_series,
    detect_attribution_collapse,
    detect_class_masking,
    detect_goldlist_collapse,
    net_change,
    phase_of,
    run_all_detectors,
)

__version__ = "0.1.0"

__all__ = [
    "ActivationBundle",
    "Alert",
    "AlertKind",
    "CamMethod",
    "CamScoreError",
    "CheckpointRecord",
    "ClassCell",
    "ClassConsistencyResult",
    "CsvParseError",
    "GlobalConsistencyResult",
    "GoldList",
    "GoldMember",
    "Heatmap",
    "InputError",
    "Manifest",
    "ManifestError",
    "MethodRequirementsError",
    "MetricsRow",
    "ParameterError",
    "RunConfig",
    "ScoreRow",
    "SeriesLookupError",
    "TensorError",
    "ValidationError",
    "active_backend",
    "bilinear_resize",
    "build_series",
    "class_cscore",
    "compose",
    "confidence_weights",
    "detect_attribution_collapse",
    "detect_class_masking",
    "detect_goldlist_collapse",
    "eigencam",
    "form_gold_list",
    "global_cscore",
    "gradcam",
    "gradcam_pp",
    "layercam",
    "minmax_normalize",
    "ms_gradcam_pp",
    "net_change",
    "pairwise_matrix",
    "phase_of",
    "power_emphasis",
    "read_cscore_report",
    "read_epoch_metrics",
    "read_f32",
    "read_manifest",
    "relu_inplace",
    "run_all_detectors",
    "scorecam",
    "set_backend",
    "set_workers",
    "soft_iou",
    "write_alerts",
    "write_cscore_report",
    "write_f32",
]
