"""Pydantic request/response models for the analysis service."""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field, model_validator

from ..config import RunSettings
from ..extraction import ExtractionConfig
from ..model import DEFAULT_FIT_RANGE
from ..simulate import SimConfig, Waveform


class TracePayload(BaseModel):
    """One cycle as raw sample arrays."""

    cycle_id: int = 0
    t: list[float]
    v: list[float]
    i: list[float]


class ExtractionSettings(BaseModel):
    """Extraction knobs; omitted fields fall back to the library defaults."""

    plateau_slope_fraction: float | None = None
    plateau_min_points: int | None = None
    rise_window_fraction: float | None = None
    max_rms_fraction: float | None = None
    refine_passes: int | None = None
    rise_phi_window: float | None = None
    substep_min_charge_fraction: float | None = None

    def build(self) -> ExtractionConfig:
        overrides = {k: v for k, v in self.model_dump().items() if v is not None}
        return ExtractionConfig(**overrides)


class SimSettings(BaseModel):
    dt: float | None = None
    noise_sigma_q: float = 0.0
    seed: int = 0
    flux_steps: int = 2000
    stop_phi_factor: float | None = None

    def build(self) -> SimConfig:
        return SimConfig(**self.model_dump())


class WaveformSpec(BaseModel):
    kind: Literal["ramp", "sine", "pwl"]
    duration: float = Field(gt=0)
    rate: float | None = None
    amplitude: float | None = None
    frequency: float | None = None
    breakpoints: list[tuple[float, float]] | None = None

    def build(self) -> Waveform:
        return Waveform(
            kind=self.kind,
            duration=self.duration,
            rate=self.rate,
            amplitude=self.amplitude,
            frequency=self.frequency,
            breakpoints=tuple(tuple(p) for p in self.breakpoints or ()),
        )


class ModelParamsPayload(BaseModel):
    q_rst: float = Field(gt=0)
    phi_rst: float = Field(gt=0)
    n: float = Field(gt=0)


class AnalysisRequest(BaseModel):
    """Traces to analyze: raw CSV content (one or several files) or sample arrays."""

    content: str | None = None
    contents: list[str] | None = None
    traces: list[TracePayload] | None = None
    extraction: ExtractionSettings = ExtractionSettings()
    fit_range: tuple[float, float] = DEFAULT_FIT_RANGE

    @model_validator(mode="after")
    def _exactly_one_source(self):
        sources = sum(x is not None for x in (self.content, self.contents, self.traces))
        if sources != 1:
            raise ValueError("provide exactly one of 'content', 'contents' or 'traces'")
        return self

    def settings(self) -> RunSettings:
        return RunSettings(
            extraction=self.extraction.build(), sim=SimConfig(), fit_range=self.fit_range
        )


class LineFitReport(BaseModel):
    slope: float
    intercept: float
    rms_residual: float
    index_range: tuple[int, int]


class ResetReport(BaseModel):
    cycle_id: int
    phi_rst: float
    q_rst: float
    v_rst: float
    i_rst: float
    t_rst: float
    rise_fit: LineFitReport
    plateau_fit: LineFitReport
    substep_count: int


class CycleFailure(BaseModel):
    cycle_id: int
    error: str


class QuantityStatsReport(BaseModel):
    mean: float
    std: float


class ExtractResponse(BaseModel):
    reports: list[ResetReport]
    failures: list[CycleFailure]
    summary: dict[str, QuantityStatsReport]


class FitRecord(BaseModel):
    cycle_id: int
    q_rst: float
    phi_rst: float
    n: float
    rms_residual: float
    fit_range: tuple[float, float]
    multi_step: bool


class FitResponse(BaseModel):
    records: list[FitRecord]
    failures: list[CycleFailure]
    summary: dict[str, QuantityStatsReport]


class IngestRequest(BaseModel):
    content: str
    split_threshold_v: float | None = None


class CycleSummary(BaseModel):
    cycle_id: int
    samples: int


class IngestResponse(BaseModel):
    cycles: list[CycleSummary]
    content: str
    issues: list[str]


class StatsRecord(BaseModel):
    cycle_id: int
    phi_rst: float = Field(gt=0)
    q_rst: float = Field(gt=0)
    n: float = Field(gt=0)
    v_rst: float | None = None
    i_rst: float | None = None


class StatsRequest(BaseModel):
    records: list[StatsRecord]
    bins: int | None = None
    include_vi: bool = False


class HistogramReport(BaseModel):
    edges: list[float]
    counts: list[int]


class CorrelationReport(BaseModel):
    labels: list[str]
    matrix: list[list[float]]


class StatsResponse(BaseModel):
    summary: dict[str, QuantityStatsReport]
    correlation: CorrelationReport
    covariance: list[list[float]]
    histograms: dict[str, HistogramReport]


class SimulateRequest(BaseModel):
    params: ModelParamsPayload
    waveform: WaveformSpec
    sim: SimSettings = SimSettings()
    cycle_id: int = 0


class SimulateResponse(BaseModel):
    content: str
    samples: int
    cycle_id: int


class MonteCarloRequest(BaseModel):
    means: tuple[float, float, float]
    stds: tuple[float, float, float] | None = None
    covariance: list[list[float]] | None = None
    count: int = Field(ge=1)
    waveform: WaveformSpec
    sim: SimSettings = SimSettings()

    @model_validator(mode="after")
    def _exactly_one_spread(self):
        if (self.stds is None) == (self.covariance is None):
            raise ValueError("provide exactly one of 'stds' or 'covariance'")
        return self


class MonteCarloResponse(BaseModel):
    content: str
    cycles: int
    seed: int


class PlotRequest(BaseModel):
    kind: Literal["iv", "qphi", "hist", "scatter", "norm", "params"]
    content: str | None = None
    extraction: ExtractionSettings = ExtractionSettings()
    values: list[float] | None = None
    mean: float | None = None
    bins: int | None = None
    x: list[float] | None = None
    y: list[float] | None = None
    xlabel: str = "x"
    ylabel: str = "y"
    phi_rst: list[float] | None = None
    q_rst: list[float] | None = None
    n: list[float] | None = None
    model_n: float | None = None


class PlotResponse(BaseModel):
    kind: str
    svg: str


class HealthResponse(BaseModel):
    status: str
    version: str
