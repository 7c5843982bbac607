"""Charge-flux domain analysis toolkit for memristor reset sweeps.

Pipeline: parse measured (t, v, i) sweeps, integrate them into charge-flux
curves, locate the reset point by intersecting the rise and plateau line
fits, fit the saturating power-law model, compute cycle-to-cycle statistics,
and synthesize sweeps (single or Monte-Carlo ensembles) for round-trip tests.
"""

__version__ = "0.1.0"

from .errors import (
    FitQualityError,
    FlatFluxError,
    ImplausibleResetError,
    NoIntersectionError,
    NoPlateauError,
    QphiError,
    SamplingError,
    TraceFormatError,
    TraceValidationError,
)
from .extraction import (
    ExtractionConfig,
    LineFit,
    ResetPoint,
    detect_plateau,
    detect_substeps,
    extract_reset_point,
    fit_line,
    recover_voltage_current,
    select_rise_window,
)
from .model import (
    ExponentFit,
    ModelParams,
    NormalizedCurve,
    fit_exponent,
    memductance,
    model_charge,
    model_residual,
    normalize_curve,
)
from .simulate import SimConfig, Waveform, generate_waveform, simulate_ensemble, simulate_reset_trace
from .traces import (
    CycleSet,
    SweepSample,
    SweepTrace,
    parse_trace_file,
    split_cycles,
    validate_trace,
    write_trace_csv,
)
from .transform import QPhiCurve, QPhiPoint, integrate_trace, phi_to_time, write_qphi_csv
from .variability import (
    CorrelationMatrix,
    EnsembleRecord,
    Histogram,
    ParameterEnsemble,
    ParameterStats,
    SummaryStats,
    correlation_matrix,
    covariance_matrix,
    normalized_histogram,
    pearson,
    sample_parameters,
    summarize,
)

__all__ = [
    "__version__",
    "QphiError", "TraceFormatError", "TraceValidationError", "NoPlateauError",
    "NoIntersectionError", "ImplausibleResetError", "FitQualityError", "FlatFluxError",
    "SamplingError",
    "SweepSample", "SweepTrace", "CycleSet", "parse_trace_file", "write_trace_csv",
    "split_cycles", "validate_trace",
    "QPhiPoint", "QPhiCurve", "integrate_trace", "phi_to_time", "write_qphi_csv",
    "LineFit", "ExtractionConfig", "ResetPoint", "fit_line", "detect_plateau",
    "detect_substeps", "select_rise_window", "extract_reset_point", "recover_voltage_current",
    "ModelParams", "NormalizedCurve", "ExponentFit", "model_charge", "memductance",
    "normalize_curve", "fit_exponent", "model_residual",
    "EnsembleRecord", "ParameterEnsemble", "SummaryStats", "Histogram",
    "CorrelationMatrix", "ParameterStats", "summarize", "normalized_histogram",
    "pearson", "correlation_matrix", "covariance_matrix", "sample_parameters",
    "Waveform", "SimConfig", "generate_waveform", "simulate_reset_trace", "simulate_ensemble",
]
