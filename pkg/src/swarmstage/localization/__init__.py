"""Localization stacks: projected gray codes, UWB TDOA, and Kalman fusion."""

from .graycode import (
    GrayFrame,
    decode_projection,
    gray_decode,
    gray_encode,
    simulate_projection,
)
from .tdoa import (
    AnchorConstellation,
    CalibrationResult,
    TdoaFix,
    TdoaMeasurement,
    calibrate_anchors,
    default_constellation,
    simulate_tdoa,
    solve_position_tdoa,
)
from .fusion import (
    FusedEstimate,
    NoiseConfig,
    UwbUpdateResult,
    altitude_from_lidar,
    blend_yaw_rate,
    initial_estimate,
    kf_predict,
    kf_update_uwb,
)
from .report import ErrorReport, error_report, write_error_csv

__all__ = [
    "GrayFrame", "gray_encode", "gray_decode", "simulate_projection",
    "decode_projection",
    "AnchorConstellation", "TdoaMeasurement", "TdoaFix", "CalibrationResult",
    "simulate_tdoa", "solve_position_tdoa", "calibrate_anchors",
    "default_constellation",
    "FusedEstimate", "NoiseConfig", "UwbUpdateResult", "initial_estimate",
    "kf_predict", "kf_update_uwb", "altitude_from_lidar", "blend_yaw_rate",
    "ErrorReport", "error_report", "write_error_csv",
]
