"""Run configuration with the standard defaults."""

from __future__ import annotations

from dataclasses import dataclass, field

from .cam import CamMethod
from .engine import DEFAULT_ALPHA, DEFAULT_TAU, validate_alpha, validate_tau
from .errors import ParameterError
from .trajectory import (
    DEFAULT_AUC_FLOOR,
    DEFAULT_DROP_RATIO,
    DEFAULT_GAP_MIN,
    DEFAULT_PHASE_BOUNDARY,
    DEFAULT_SCORE_FLOOR,
)

DEFAULT_METHODS = (
    CamMethod.GRADCAM,
    CamMethod.GRADCAMPP,
    CamMethod.LAYERCAM,
    CamMethod.SCORECAM,
    CamMethod.EIGENCAM,
    CamMethod.MSGRADCAMPP,
)


@dataclass
class RunConfig:
    """Knobs for scoring and trajectory analysis.

    tau: gold-list confidence threshold, in (0, 1)
    alpha: heatmap emphasis exponent, > 0
    methods: which composition methods to score
    ms_layers: ordered layer ids for the multi-scale method ([] = all
        manifest target layers)
    phase_boundary: last epoch of the early training phase
    workers: worker-thread override (None = runtime default)
    """

    tau: float = DEFAULT_TAU
    alpha: float = DEFAULT_ALPHA
    methods: tuple = DEFAULT_METHODS
    ms_layers: tuple = ()
    phase_boundary: int = DEFAULT_PHASE_BOUNDARY
    auc_floor: float = DEFAULT_AUC_FLOOR
    drop_ratio: float = DEFAULT_DROP_RATIO
    score_floor: float = DEFAULT_SCORE_FLOOR
    gap_min: float = DEFAULT_GAP_MIN
    workers: int | None = None

    def __post_init__(self):
        self.tau = validate_tau(self.tau)
        self.alpha = validate_alpha(self.alpha)
        self.methods = tuple(
            m if isinstance(m, CamMethod) else CamMethod.parse(str(m)) for m in self.methods
        )
        if not self.methods:
            raise ParameterError("methods must be non-empty")
        self.ms_layers = tuple(str(x) for x in self.ms_layers)
        if self.phase_boundary < 1:
            raise ParameterError(f"phase boundary must be >= 1, got {self.phase_boundary}")
        for name in ("auc_floor", "drop_ratio", "score_floor", "gap_min"):
            v = float(getattr(self, name))
            if not (0.0 <= v <= 1.0):
                raise ParameterError(f"{name} must lie in [0, 1], got {v}")
            setattr(self, name, v)
        if self.workers is not None and int(self.workers) < 1:
            raise ParameterError(f"workers must be >= 1, got {self.workers}")
