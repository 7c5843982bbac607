"""Static SVG plots of sweeps, curves and ensemble statistics.

All output is deterministic: fixed canvas, fixed palette, elements ordered by
cycle id, no timestamps or generated ids, coordinates rounded to 0.01 px.
That makes every plot golden-file testable by byte comparison.
"""

from __future__ import annotations

import numpy as np

from .model import ModelParams, NormalizedCurve, model_charge
from .traces import SweepTrace
from .transform import QPhiCurve
from .variability import Histogram

WIDTH = 640
HEIGHT = 480
MARGIN = {"left": 72, "right": 24, "top": 36, "bottom": 52}

PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)
MODEL_STROKE = "#000000"

PLOT_KINDS = ("iv", "qphi", "hist", "scatter", "norm", "params")


def _fmt(value: float) -> str:
    return f"{value:.2f}"


def _tick_label(value: float) -> str:
    return f"{value:.4g}"


class _Panel:
    """One axes box mapping data coordinates to pixels."""

    def __init__(self, x0, y0, width, height, xlim, ylim):
        self.x0, self.y0 = x0, y0
        self.width, self.height = width, height
        xlo, xhi = xlim
        ylo, yhi = ylim
        if xhi == xlo:
            xlo, xhi = xlo - 0.5, xhi + 0.5
        if yhi == ylo:
            ylo, yhi = ylo - 0.5, yhi + 0.5
        self.xlim = (xlo, xhi)
        self.ylim = (ylo, yhi)

    def px(self, x):
        xlo, xhi = self.xlim
        return self.x0 + (np.asarray(x, dtype=float) - xlo) / (xhi - xlo) * self.width

    def py(self, y):
        ylo, yhi = self.ylim
        return self.y0 + self.height - (np.asarray(y, dtype=float) - ylo) / (yhi - ylo) * self.height

    def frame(self, xlabel: str, ylabel: str, title: str = "") -> list[str]:
        parts = [
            f'<rect x="{_fmt(self.x0)}" y="{_fmt(self.y0)}" width="{_fmt(self.width)}" '
            f'height="{_fmt(self.height)}" fill="none" stroke="#333333" stroke-width="1"/>'
        ]
        for value in np.linspace(*self.xlim, 5):
            x = float(self.px(value))
            parts.append(
                f'<line x1="{_fmt(x)}" y1="{_fmt(self.y0 + self.height)}" x2="{_fmt(x)}" '
                f'y2="{_fmt(self.y0 + self.height + 5)}" stroke="#333333" stroke-width="1"/>'
            )
            parts.append(
                f'<text x="{_fmt(x)}" y="{_fmt(self.y0 + self.height + 18)}" font-size="11" '
                f'text-anchor="middle" font-family="sans-serif">{_tick_label(value)}</text>'
            )
        for value in np.linspace(*self.ylim, 5):
            y = float(self.py(value))
            parts.append(
                f'<line x1="{_fmt(self.x0 - 5)}" y1="{_fmt(y)}" x2="{_fmt(self.x0)}" '
                f'y2="{_fmt(y)}" stroke="#333333" stroke-width="1"/>'
            )
            parts.append(
                f'<text x="{_fmt(self.x0 - 8)}" y="{_fmt(y + 4)}" font-size="11" '
                f'text-anchor="end" font-family="sans-serif">{_tick_label(value)}</text>'
            )
        parts.append(
            f'<text x="{_fmt(self.x0 + self.width / 2)}" y="{_fmt(self.y0 + self.height + 36)}" '
            f'font-size="13" text-anchor="middle" font-family="sans-serif">{xlabel}</text>'
        )
        parts.append(
            f'<text x="{_fmt(self.x0 - 54)}" y="{_fmt(self.y0 + self.height / 2)}" font-size="13" '
            f'text-anchor="middle" font-family="sans-serif" transform="rotate(-90 '
            f'{_fmt(self.x0 - 54)} {_fmt(self.y0 + self.height / 2)})">{ylabel}</text>'
        )
        if title:
            parts.append(
                f'<text x="{_fmt(self.x0 + self.width / 2)}" y="{_fmt(self.y0 - 10)}" '
                f'font-size="14" text-anchor="middle" font-family="sans-serif">{title}</text>'
            )
        return parts

    def polyline(self, x, y, stroke: str, width: float = 1.2) -> str:
        pts = " ".join(
            f"{_fmt(float(px))},{_fmt(float(py))}" for px, py in zip(self.px(x), self.py(y))
        )
        return f'<polyline points="{pts}" fill="none" stroke="{stroke}" stroke-width="{width}"/>'

    def dots(self, x, y, fill: str, radius: float = 2.5) -> list[str]:
        return [
            f'<circle cx="{_fmt(float(px))}" cy="{_fmt(float(py))}" r="{radius}" fill="{fill}"/>'
            for px, py in zip(self.px(x), self.py(y))
        ]


def _document(body: list[str]) -> str:
    head = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">'
    )
    return "\n".join([head, *body, "</svg>"]) + "\n"


def _full_panel(xlim, ylim) -> _Panel:
    return _Panel(
        MARGIN["left"], MARGIN["top"],
        WIDTH - MARGIN["left"] - MARGIN["right"],
        HEIGHT - MARGIN["top"] - MARGIN["bottom"],
        xlim, ylim,
    )


def _limits(arrays) -> tuple[float, float]:
    lo = min(float(np.min(a)) for a in arrays)
    hi = max(float(np.max(a)) for a in arrays)
    return lo, hi


def plot_iv(traces: list[SweepTrace]) -> str:
    """Current-voltage overlay, one polyline per cycle."""
    traces = sorted(traces, key=lambda tr: tr.cycle_id)
    panel = _full_panel(_limits([tr.v for tr in traces]), _limits([tr.i for tr in traces]))
    body = panel.frame("V (V)", "I (A)", "reset sweeps, I-V")
    for idx, tr in enumerate(traces):
        body.append(panel.polyline(tr.v, tr.i, PALETTE[idx % len(PALETTE)]))
    return _document(body)


def plot_qphi(curves: list[QPhiCurve]) -> str:
    """Charge-flux overlay, one polyline per cycle."""
    curves = sorted(curves, key=lambda c: c.source_cycle_id)
    panel = _full_panel(_limits([c.phi for c in curves]), _limits([c.q for c in curves]))
    body = panel.frame("flux (Vs)", "charge (C)", "reset sweeps, Q-phi")
    for idx, c in enumerate(curves):
        body.append(panel.polyline(c.phi, c.q, PALETTE[idx % len(PALETTE)]))
    return _document(body)


def plot_histogram(hist: Histogram, label: str) -> str:
    """Bar chart of a mean-normalized histogram."""
    top = float(np.max(hist.counts)) if hist.counts.size else 1.0
    panel = _full_panel((float(hist.edges[0]), float(hist.edges[-1])), (0.0, max(top, 1.0)))
    body = panel.frame(label, "count", "normalized histogram")
    for k, count in enumerate(hist.counts):
        x0 = float(panel.px(hist.edges[k]))
        x1 = float(panel.px(hist.edges[k + 1]))
        y0 = float(panel.py(count))
        y1 = float(panel.py(0))
        body.append(
            f'<rect x="{_fmt(x0)}" y="{_fmt(y0)}" width="{_fmt(x1 - x0)}" '
            f'height="{_fmt(y1 - y0)}" fill="{PALETTE[0]}" stroke="#333333" stroke-width="0.5"/>'
        )
    return _document(body)


def plot_scatter(x, y, xlabel: str, ylabel: str, pearson_r: float | None = None) -> str:
    """Scatter plot, optionally annotated with the Pearson coefficient."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    panel = _full_panel((float(np.min(x)), float(np.max(x))), (float(np.min(y)), float(np.max(y))))
    body = panel.frame(xlabel, ylabel, f"{ylabel} vs {xlabel}")
    body.extend(panel.dots(x, y, PALETTE[0]))
    if pearson_r is not None:
        body.append(
            f'<text x="{_fmt(panel.x0 + 10)}" y="{_fmt(panel.y0 + 18)}" font-size="13" '
            f'font-family="sans-serif">r = {pearson_r:.3f}</text>'
        )
    return _document(body)


def plot_normalized(curves: list[NormalizedCurve], model: ModelParams | None = None) -> str:
    """Normalized charge-flux overlay with the model drawn darkest on top."""
    curves = sorted(curves, key=lambda c: c.source_cycle_id)
    xlim = _limits([c.phi for c in curves])
    ylim = _limits([c.q for c in curves])
    panel = _full_panel((0.0, max(xlim[1], 1.0)), (0.0, max(ylim[1], 1.0)))
    body = panel.frame("flux / reset flux", "charge / reset charge", "normalized reset curves")
    for idx, c in enumerate(curves):
        body.append(panel.polyline(c.phi, c.q, PALETTE[idx % len(PALETTE)], width=1.0))
    if model is not None:
        grid = np.linspace(0.0, panel.xlim[1], 256)
        unit = ModelParams(q_rst=1.0, phi_rst=1.0, n=model.n)
        body.append(panel.polyline(grid, model_charge(grid, unit), MODEL_STROKE, width=2.0))
    return _document(body)


def plot_param_projections(phi_rst, q_rst, n) -> str:
    """Three 2-D projections of the (phi_rst, q_rst, n) parameter cloud."""
    phi_rst = np.asarray(phi_rst, dtype=float)
    q_rst = np.asarray(q_rst, dtype=float)
    n = np.asarray(n, dtype=float)
    pairs = (
        (phi_rst, q_rst, "phi_rst (Vs)", "q_rst (C)"),
        (phi_rst, n, "phi_rst (Vs)", "n"),
        (q_rst, n, "q_rst (C)", "n"),
    )
    panel_w = (WIDTH - MARGIN["left"] - MARGIN["right"] - 2 * 56) / 3
    body: list[str] = []
    for idx, (x, y, xlabel, ylabel) in enumerate(pairs):
        panel = _Panel(
            MARGIN["left"] + idx * (panel_w + 56), MARGIN["top"],
            panel_w, HEIGHT - MARGIN["top"] - MARGIN["bottom"],
            (float(np.min(x)), float(np.max(x))), (float(np.min(y)), float(np.max(y))),
        )
        body.extend(panel.frame(xlabel, ylabel))
        body.extend(panel.dots(x, y, PALETTE[idx % len(PALETTE)], radius=2.0))
    return _document(body)
