"""capsel: training-free width selection for U-Nets.

Builds the ordered channel-capped U-Net family, scores each untrained member
by the RMS input gradient of its summed logits on a small unlabeled batch,
and places the capacity-collapse boundary on that curve; the member at the
boundary is the smallest configuration on the stable side.
"""

from .errors import (
    CapselError,
    ConfigurationError,
    DegenerateCurveWarning,
    NumericalError,
    ValidationError,
)
from .family import FamilyConfig, NetConfig, build_family, channel_schedule, param_count
from .network import NetworkInstance, forward, init_network, input_gradient
from .oracle import SyntheticCurveSpec, brute_force_split, finite_diff_gradient, generate_curve
from .pipeline import RunConfig, emit_curve_csv, emit_report, run_selection
from .sensitivity import (
    DEFAULT_MODE,
    MODES,
    TIE_BREAKS,
    SelectionReport,
    SensitivityCurve,
    detect_collapse,
    local_variations,
    normalize_scores,
    sensitivity_score,
    split_objective,
)

__version__ = "0.1.0"

__all__ = [
    "CapselError",
    "ConfigurationError",
    "ValidationError",
    "NumericalError",
    "DegenerateCurveWarning",
    "FamilyConfig",
    "NetConfig",
    "build_family",
    "channel_schedule",
    "param_count",
    "NetworkInstance",
    "init_network",
    "forward",
    "input_gradient",
    "SensitivityCurve",
    "SelectionReport",
    "sensitivity_score",
    "normalize_scores",
    "local_variations",
    "split_objective",
    "detect_collapse",
    "MODES",
    "TIE_BREAKS",
    "DEFAULT_MODE",
    "RunConfig",
    "run_selection",
    "emit_report",
    "emit_curve_csv",
    "SyntheticCurveSpec",
    "brute_force_split",
    "finite_diff_gradient",
    "generate_curve",
    "__version__",
]
