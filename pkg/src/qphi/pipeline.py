"""Batch glue: run the transform/extract/fit chain over a cycle set.

Per-cycle failures are collected, not fatal; callers decide how to surface
them (the CLI maps any failure to a partial-failure exit code).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import RunSettings
from .errors import QphiError
from .extraction import ResetPoint, detect_substeps, extract_reset_point
from .model import (
    ExponentFit,
    ModelParams,
    fit_exponent,
    model_residual,
    normalize_curve,
)
from .traces import CycleSet, SweepTrace
from .transform import QPhiCurve, integrate_trace
from .variability import (
    EnsembleRecord,
    ParameterEnsemble,
    SummaryStats,
    summarize_columns,
)


@dataclass
class CycleAnalysis:
    """Everything derived from one cycle."""

    trace: SweepTrace
    curve: QPhiCurve
    reset: ResetPoint
    substep_count: int
    params: ModelParams | None = None
    exponent: ExponentFit | None = None
    residual: float | None = None

    @property
    def cycle_id(self) -> int:
        return self.trace.cycle_id

    @property
    def multi_step(self) -> bool:
        return self.substep_count >= 2


@dataclass
class BatchResult:
    analyses: list[CycleAnalysis] = field(default_factory=list)
    failures: list[tuple[int, str]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


def analyze_cycles(cycles: CycleSet, settings: RunSettings, with_fit: bool = False) -> BatchResult:
    """Extract (and optionally fit) every cycle, collecting per-cycle failures."""
    result = BatchResult()
    for trace in sorted(cycles, key=lambda tr: tr.cycle_id):
        try:
            curve = integrate_trace(trace)
            substeps = detect_substeps(curve, settings.extraction)
            reset = extract_reset_point(curve, trace, settings.extraction)
            analysis = CycleAnalysis(
                trace=trace, curve=curve, reset=reset, substep_count=len(substeps)
            )
            if with_fit:
                normalized = normalize_curve(curve, reset)
                exponent = fit_exponent(normalized, settings.fit_range)
                params = ModelParams(q_rst=reset.q_rst, phi_rst=reset.phi_rst, n=exponent.n)
                analysis.params = params
                analysis.exponent = exponent
                analysis.residual = model_residual(curve, params)
            result.analyses.append(analysis)
        except (QphiError, ValueError) as exc:
            result.failures.append((trace.cycle_id, str(exc)))
    return result


def reset_report(analysis: CycleAnalysis) -> dict:
    """Per-cycle JSON-ready extraction report (fixed field names)."""
    reset = analysis.reset

    def line(fit):
        return {
            "slope": fit.slope,
            "intercept": fit.intercept,
            "rms_residual": fit.rms_residual,
            "index_range": list(fit.index_range),
        }

    return {
        "cycle_id": analysis.cycle_id,
        "phi_rst": reset.phi_rst,
        "q_rst": reset.q_rst,
        "v_rst": reset.v_rst,
        "i_rst": reset.i_rst,
        "t_rst": reset.t_rst,
        "rise_fit": line(reset.rise_fit),
        "plateau_fit": line(reset.plateau_fit),
        "substep_count": analysis.substep_count,
    }


def fit_record(analysis: CycleAnalysis) -> dict:
    """Per-cycle JSON-ready model parameter record."""
    if analysis.params is None or analysis.exponent is None:
        raise ValueError("cycle was analyzed without fitting")
    return {
        "cycle_id": analysis.cycle_id,
        "q_rst": analysis.params.q_rst,
        "phi_rst": analysis.params.phi_rst,
        "n": analysis.params.n,
        "rms_residual": analysis.residual,
        "fit_range": list(analysis.exponent.fit_range),
        "multi_step": analysis.multi_step,
    }


def summarize_resets(analyses: list[CycleAnalysis]) -> SummaryStats:
    """Reset-value summary (mean/std of phi_rst, q_rst, v_rst, i_rst)."""
    return summarize_columns(
        {
            "phi_rst": np.array([a.reset.phi_rst for a in analyses]),
            "q_rst": np.array([a.reset.q_rst for a in analyses]),
            "v_rst": np.array([a.reset.v_rst for a in analyses]),
            "i_rst": np.array([a.reset.i_rst for a in analyses]),
        }
    )


def summarize_fits(analyses: list[CycleAnalysis]) -> SummaryStats:
    """Model-parameter summary (mean/std of phi_rst, q_rst, n)."""
    fitted = [a for a in analyses if a.params is not None]
    return summarize_columns(
        {
            "phi_rst": np.array([a.params.phi_rst for a in fitted]),
            "q_rst": np.array([a.params.q_rst for a in fitted]),
            "n": np.array([a.params.n for a in fitted]),
        }
    )


def ensemble_from_analyses(analyses: list[CycleAnalysis]) -> ParameterEnsemble:
    """ParameterEnsemble over the fitted cycles."""
    records = [
        EnsembleRecord(cycle_id=a.cycle_id, params=a.params, reset=a.reset)
        for a in analyses
        if a.params is not None
    ]
    return ParameterEnsemble(records=records)
