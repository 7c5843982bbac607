"""FastAPI application wrapping the analysis pipeline.

Whole-request problems (unparseable files, bad generator inputs) map to
HTTP 400; per-cycle extraction failures are embedded in the response so a
batch with one bad sweep still returns the good ones.
"""

from __future__ import annotations

import numpy as np
from fastapi import FastAPI, HTTPException

from .. import __version__
from ..config import RunSettings
from ..errors import QphiError
from ..model import ModelParams, NormalizedCurve, normalize_curve
from ..pipeline import (
    analyze_cycles,
    ensemble_from_analyses,
    fit_record,
    reset_report,
    summarize_fits,
    summarize_resets,
)
from ..plots import (
    plot_histogram,
    plot_iv,
    plot_normalized,
    plot_param_projections,
    plot_qphi,
    plot_scatter,
)
from ..simulate import SimConfig, simulate_ensemble, simulate_reset_trace
from ..traces import CycleSet, SweepTrace, parse_trace_file, split_cycles, validate_trace, write_trace_csv
from ..transform import integrate_trace
from ..variability import (
    ParameterStats,
    correlation_matrix,
    covariance_matrix,
    default_bin_count,
    normalized_histogram,
    pearson,
    sample_parameters,
    summarize,
)
from . import schemas


def _cycles_from_request(req) -> CycleSet:
    if req.content is not None:
        return parse_trace_file(req.content, source="<request>")
    if req.contents is not None:
        traces = []
        for idx, content in enumerate(req.contents):
            traces.extend(parse_trace_file(content, source=f"<request:{idx}>").traces)
        ids = [tr.cycle_id for tr in traces]
        if len(ids) != len(set(ids)):
            # colliding labels across files: relabel sequentially in file order
            for k, tr in enumerate(traces):
                tr.cycle_id = k
        return CycleSet(traces=traces, source="<request>")
    traces = [
        SweepTrace(t=np.array(p.t), v=np.array(p.v), i=np.array(p.i), cycle_id=p.cycle_id)
        for p in req.traces
    ]
    return CycleSet(traces=traces, source="<request>")


def _bad_request(exc: Exception) -> HTTPException:
    return HTTPException(status_code=400, detail=str(exc))


def create_app() -> FastAPI:
    app = FastAPI(
        title="qphi analysis service",
        version=__version__,
        description="Charge-flux domain reset analysis for memristive sweeps",
    )

    @app.get("/health", response_model=schemas.HealthResponse)
    def health() -> schemas.HealthResponse:
        return schemas.HealthResponse(status="ok", version=__version__)

    @app.post("/ingest", response_model=schemas.IngestResponse)
    def ingest(req: schemas.IngestRequest) -> schemas.IngestResponse:
        try:
            cycles = parse_trace_file(req.content, source="<request>")
            if req.split_threshold_v is not None and len(cycles) == 1:
                pieces = split_cycles(cycles.traces[0], req.split_threshold_v)
                cycles = CycleSet(traces=pieces, source=cycles.source)
        except QphiError as exc:
            raise _bad_request(exc) from None
        issues = []
        for trace in cycles:
            for issue in validate_trace(trace):
                issues.append(f"cycle {trace.cycle_id}: {issue.message}")
        return schemas.IngestResponse(
            cycles=[
                schemas.CycleSummary(cycle_id=tr.cycle_id, samples=len(tr)) for tr in cycles
            ],
            content=write_trace_csv(cycles),
            issues=issues,
        )

    @app.post("/extract", response_model=schemas.ExtractResponse)
    def extract(req: schemas.AnalysisRequest) -> schemas.ExtractResponse:
        try:
            cycles = _cycles_from_request(req)
            settings = req.settings()
        except (QphiError, ValueError) as exc:
            raise _bad_request(exc) from None
        batch = analyze_cycles(cycles, settings, with_fit=False)
        summary = {}
        if batch.analyses:
            summary = summarize_resets(batch.analyses).to_dict()
        return schemas.ExtractResponse(
            reports=[reset_report(a) for a in batch.analyses],
            failures=[schemas.CycleFailure(cycle_id=c, error=e) for c, e in batch.failures],
            summary=summary,
        )

    @app.post("/fit", response_model=schemas.FitResponse)
    def fit(req: schemas.AnalysisRequest) -> schemas.FitResponse:
        try:
            cycles = _cycles_from_request(req)
            settings = req.settings()
        except (QphiError, ValueError) as exc:
            raise _bad_request(exc) from None
        batch = analyze_cycles(cycles, settings, with_fit=True)
        summary = {}
        if batch.analyses:
            summary = summarize_fits(batch.analyses).to_dict()
        return schemas.FitResponse(
            records=[fit_record(a) for a in batch.analyses],
            failures=[schemas.CycleFailure(cycle_id=c, error=e) for c, e in batch.failures],
            summary=summary,
        )

    @app.post("/stats", response_model=schemas.StatsResponse)
    def stats(req: schemas.StatsRequest) -> schemas.StatsResponse:
        if len(req.records) < 3:
            raise HTTPException(status_code=400, detail="need at least 3 records for statistics")
        from ..variability import EnsembleRecord, ParameterEnsemble
        from ..extraction import LineFit, ResetPoint

        records = []
        has_vi = all(r.v_rst is not None and r.i_rst is not None for r in req.records)
        for r in req.records:
            reset = None
            if has_vi:
                placeholder = LineFit(0.0, 0.0, 0.0, 0, 2)
                reset = ResetPoint(
                    phi_rst=r.phi_rst, q_rst=r.q_rst, v_rst=r.v_rst, i_rst=r.i_rst,
                    rise_fit=placeholder, plateau_fit=placeholder, t_rst=0.0,
                )
            records.append(
                EnsembleRecord(
                    cycle_id=r.cycle_id,
                    params=ModelParams(q_rst=r.q_rst, phi_rst=r.phi_rst, n=r.n),
                    reset=reset,
                )
            )
        ensemble = ParameterEnsemble(records=records)
        try:
            summary = summarize(ensemble)
            corr = correlation_matrix(ensemble, include_vi=has_vi and req.include_vi)
            cov = covariance_matrix(ensemble)
        except ValueError as exc:
            raise _bad_request(exc) from None
        bins = req.bins if req.bins is not None else default_bin_count(len(ensemble))
        histograms = {}
        for name in ("phi_rst", "q_rst", "n"):
            values = ensemble.column(name)
            hist = normalized_histogram(values, summary[name].mean, bins)
            histograms[name] = schemas.HistogramReport(
                edges=[float(e) for e in hist.edges],
                counts=[int(c) for c in hist.counts],
            )
        return schemas.StatsResponse(
            summary=summary.to_dict(),
            correlation=schemas.CorrelationReport(
                labels=list(corr.labels), matrix=corr.to_nested()
            ),
            covariance=[[float(v) for v in row] for row in cov],
            histograms=histograms,
        )

    @app.post("/simulate", response_model=schemas.SimulateResponse)
    def simulate(req: schemas.SimulateRequest) -> schemas.SimulateResponse:
        try:
            params = ModelParams(
                q_rst=req.params.q_rst, phi_rst=req.params.phi_rst, n=req.params.n
            )
            trace = simulate_reset_trace(
                req.waveform.build(), params, config=req.sim.build(), cycle_id=req.cycle_id
            )
        except (QphiError, ValueError) as exc:
            raise _bad_request(exc) from None
        return schemas.SimulateResponse(
            content=write_trace_csv(trace), samples=len(trace), cycle_id=trace.cycle_id
        )

    @app.post("/montecarlo", response_model=schemas.MonteCarloResponse)
    def montecarlo(req: schemas.MonteCarloRequest) -> schemas.MonteCarloResponse:
        try:
            if req.covariance is not None:
                stats_in = ParameterStats(
                    means=req.means, covariance=np.asarray(req.covariance, dtype=float)
                )
            else:
                stats_in = ParameterStats.from_std(req.means, req.stds)
            cycles = simulate_ensemble(
                stats_in, req.count, req.waveform.build(), config=req.sim.build()
            )
        except (QphiError, ValueError) as exc:
            raise _bad_request(exc) from None
        return schemas.MonteCarloResponse(
            content=write_trace_csv(cycles), cycles=len(cycles), seed=req.sim.seed
        )

    @app.post("/plot", response_model=schemas.PlotResponse)
    def plot(req: schemas.PlotRequest) -> schemas.PlotResponse:
        try:
            svg = _render_plot(req)
        except (QphiError, ValueError) as exc:
            raise _bad_request(exc) from None
        return schemas.PlotResponse(kind=req.kind, svg=svg)

    return app


def _render_plot(req: schemas.PlotRequest) -> str:
    if req.kind in ("iv", "qphi", "norm"):
        if req.content is None:
            raise ValueError(f"plot kind {req.kind!r} needs trace CSV content")
        cycles = parse_trace_file(req.content, source="<request>")
        if req.kind == "iv":
            return plot_iv(list(cycles))
        curves = [integrate_trace(tr) for tr in cycles]
        if req.kind == "qphi":
            return plot_qphi(curves)
        settings = RunSettings(extraction=req.extraction.build(), sim=SimConfig())
        batch = analyze_cycles(cycles, settings, with_fit=True)
        if not batch.analyses:
            raise ValueError("no cycle could be extracted for normalization")
        normalized = [
            normalize_curve(a.curve, a.reset) for a in batch.analyses
        ]
        model_n = req.model_n
        if model_n is None:
            ensemble = ensemble_from_analyses(batch.analyses)
            model_n = float(np.mean(ensemble.column("n")))
        model = ModelParams(q_rst=1.0, phi_rst=1.0, n=model_n)
        return plot_normalized(normalized, model)
    if req.kind == "hist":
        if req.values is None or req.mean is None:
            raise ValueError("plot kind 'hist' needs 'values' and 'mean'")
        bins = req.bins if req.bins is not None else default_bin_count(len(req.values))
        hist = normalized_histogram(np.asarray(req.values), req.mean, bins)
        return plot_histogram(hist, req.xlabel)
    if req.kind == "scatter":
        if req.x is None or req.y is None:
            raise ValueError("plot kind 'scatter' needs 'x' and 'y'")
        r = pearson(req.x, req.y) if len(req.x) >= 3 else None
        return plot_scatter(req.x, req.y, req.xlabel, req.ylabel, pearson_r=r)
    if req.kind == "params":
        if req.phi_rst is None or req.q_rst is None or req.n is None:
            raise ValueError("plot kind 'params' needs 'phi_rst', 'q_rst' and 'n'")
        return plot_param_projections(req.phi_rst, req.q_rst, req.n)
    raise ValueError(f"unknown plot kind {req.kind!r}")


app = create_app()
