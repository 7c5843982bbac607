"""Reset-point extraction from charge-flux curves.

The reset point is located by fitting one line to the trailing charge plateau
and one to the upper part of the rising branch, then intersecting them. The
reset flux is mapped back through the trace to recover the reset time, voltage
and current. Curves with several partial current drops (multi-step resets)
are handled by taking the first low-slope run as the plateau.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    FitQualityError,
    ImplausibleResetError,
    NoIntersectionError,
    NoPlateauError,
    QphiError,
)
from .traces import SweepTrace
from .transform import QPhiCurve, phi_to_time

# slopes closer than this fraction of the rise slope count as parallel
PARALLEL_TOL = 1e-6
# relative band width used to refine plateau onsets on noiseless data
LEVEL_BAND_FLOOR = 1e-9


@dataclass(frozen=True)
class LineFit:
    """Ordinary least-squares line q = slope*phi + intercept over an index range."""

    slope: float
    intercept: float
    rms_residual: float
    start: int
    stop: int

    @property
    def index_range(self) -> tuple[int, int]:
        return (self.start, self.stop)

    def predict(self, phi):
        return self.slope * np.asarray(phi, dtype=float) + self.intercept


@dataclass(frozen=True)
class ExtractionConfig:
    """Tuning knobs for plateau detection and line fitting.

    The defaults are deliberately conservative: a plateau is any run whose
    local slope drops below 5% of the median pre-reset slope, and the rise
    line is seeded from the trailing quarter of the pre-plateau points and
    then re-anchored to a flux window just below the running intersection
    estimate (``rise_phi_window``, ``refine_passes``). Low-slope runs whose
    charge never reaches ``substep_min_charge_fraction`` of the total span
    are ignored; power-law curves with exponents above one start out flat
    and would otherwise masquerade as reset steps.
    """

    plateau_slope_fraction: float = 0.05
    plateau_min_points: int = 5
    rise_window_fraction: float = 0.25
    max_rms_fraction: float = 0.05
    refine_passes: int = 2
    rise_phi_window: float = 0.12
    substep_min_charge_fraction: float = 0.05

    def __post_init__(self):
        for name in ("plateau_slope_fraction", "rise_window_fraction", "max_rms_fraction",
                     "rise_phi_window", "substep_min_charge_fraction"):
            value = getattr(self, name)
            if not (0.0 < value < 1.0):
                raise ValueError(f"{name} must be in (0, 1), got {value!r}")
        if self.plateau_min_points < 2:
            raise ValueError("plateau_min_points must be >= 2")
        if self.refine_passes < 0:
            raise ValueError("refine_passes must be >= 0")


DEFAULT_CONFIG = ExtractionConfig()


@dataclass(frozen=True)
class ResetPoint:
    """Extracted reset coordinates plus the two line fits that produced them."""

    phi_rst: float
    q_rst: float
    v_rst: float
    i_rst: float
    rise_fit: LineFit
    plateau_fit: LineFit
    t_rst: float


def fit_line(phi, q) -> LineFit:
    """Least-squares line through (phi, q) points with its RMS vertical residual."""
    phi = np.asarray(phi, dtype=float)
    q = np.asarray(q, dtype=float)
    if phi.size < 2:
        raise ValueError(f"need at least 2 points to fit a line, got {phi.size}")
    xc = phi - phi.mean()
    varx = float(np.dot(xc, xc))
    if varx == 0.0:
        raise ValueError("all flux values are equal; the fitted line would be vertical")
    slope = float(np.dot(xc, q) / varx)
    intercept = float(q.mean() - slope * phi.mean())
    resid = q - (slope * phi + intercept)
    rms = float(np.sqrt(np.mean(resid**2)))
    return LineFit(slope=slope, intercept=intercept, rms_residual=rms, start=0, stop=int(phi.size))


def _fit_segment(curve: QPhiCurve, start: int, stop: int) -> LineFit:
    fit = fit_line(curve.phi[start:stop], curve.q[start:stop])
    return LineFit(fit.slope, fit.intercept, fit.rms_residual, start, stop)


def _segment_slopes(curve: QPhiCurve) -> np.ndarray:
    dphi = np.diff(curve.phi)
    dq = np.diff(curve.q)
    with np.errstate(divide="ignore", invalid="ignore"):
        slopes = np.where(dphi > 0, dq / np.where(dphi > 0, dphi, 1.0), np.inf)
    return slopes


def _reference_slope(slopes: np.ndarray) -> float:
    """Median secant slope of the first half of the curve (the rising branch)."""
    head = slopes[: max(1, slopes.size // 2)]
    finite = head[np.isfinite(head)]
    if finite.size == 0:
        return 0.0
    return max(float(np.median(finite)), 0.0)


def _windowed_slopes(curve: QPhiCurve, half_width: int) -> np.ndarray:
    n = len(curve)
    k = np.arange(n)
    lo = np.maximum(k - half_width, 0)
    hi = np.minimum(k + half_width, n - 1)
    dphi = curve.phi[hi] - curve.phi[lo]
    dq = curve.q[hi] - curve.q[lo]
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(dphi > 0, dq / np.where(dphi > 0, dphi, 1.0), np.inf)


def _level_band(curve: QPhiCurve, fit: LineFit) -> float:
    qspan = float(np.max(curve.q) - np.min(curve.q))
    scale = max(qspan, float(np.max(np.abs(curve.q))), 1e-300)
    return max(4.0 * fit.rms_residual, LEVEL_BAND_FLOOR * scale)


def _refine_run_start(curve: QPhiCurve, start: int, stop: int, lower_bound: int,
                      config: ExtractionConfig) -> int:
    """Walk a low-slope run's start back to where the curve leaves the plateau level.

    Slope-based detection lags the true changepoint (windowed slopes mix the
    corner); anchoring on the fitted plateau level recovers it. Exact on
    noiseless data, band-limited under noise.
    """
    interior = min(start + max(config.plateau_min_points, (stop - start) // 10), stop - 2)
    interior = max(interior, start)
    if stop - interior < 2:
        interior = max(stop - 2, start)
    if stop - interior < 2:
        return start
    try:
        level = _fit_segment(curve, interior, stop)
    except ValueError:
        return start
    band = _level_band(curve, level)
    refined = interior
    j = interior - 1
    while j >= lower_bound:
        if curve.q[j] < level.predict(curve.phi[j]) - band:
            break
        refined = j
        j -= 1
    return min(refined, start)


def detect_plateau(curve: QPhiCurve, config: ExtractionConfig = DEFAULT_CONFIG) -> tuple[int, int]:
    """Locate the trailing charge plateau of a curve.

    Returns the half-open index range of the trailing run whose slope
    relative to the curve's end stays below ``plateau_slope_fraction`` times
    the median slope of the first half, refined back to the plateau level.
    Raises NoPlateauError when the device never reset in this sweep.
    """
    n = len(curve)
    if n < config.plateau_min_points + 2:
        raise NoPlateauError(
            f"no plateau: curve has {n} points, need at least {config.plateau_min_points + 2}"
        )
    slopes = _segment_slopes(curve)
    thr = config.plateau_slope_fraction * _reference_slope(slopes)

    # secant slope from each point to the curve end: an aggregate of the whole
    # tail, so it stays readable under measurement noise
    span = curve.phi[-1] - curve.phi[:-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        tail = np.where(span > 0, (curve.q[-1] - curve.q[:-1]) / np.where(span > 0, span, 1.0), np.inf)
    k_max = n - config.plateau_min_points
    qualifying = np.nonzero(np.abs(tail[2 : k_max + 1]) <= thr)[0]
    if qualifying.size == 0:
        raise NoPlateauError()
    start = int(qualifying[0]) + 2
    start = max(_refine_run_start(curve, start, n, 2, config), 2)
    if n - start < config.plateau_min_points:
        raise NoPlateauError()
    return (start, n)


def _merge_runs(curve: QPhiCurve, runs: list[tuple[int, int]], thr: float) -> list[tuple[int, int]]:
    merged = list(runs)
    changed = True
    while changed and len(merged) > 1:
        changed = False
        out = [merged[0]]
        for a, b in merged[1:]:
            pa, pb = out[-1]
            dphi = curve.phi[b - 1] - curve.phi[pa]
            if dphi > 0 and abs((curve.q[b - 1] - curve.q[pa]) / dphi) <= thr:
                out[-1] = (pa, b)
                changed = True
            else:
                out.append((a, b))
        merged = out
    return merged


def detect_substeps(curve: QPhiCurve, config: ExtractionConfig = DEFAULT_CONFIG) -> list[tuple[int, int]]:
    """Find every maximal low-slope run of a curve, in order.

    A multi-step reset yields two or more ranges; a strictly increasing curve
    yields none. The first range is the plateau used for reset extraction,
    so statistics of multi-step cycles follow the first reset event.
    """
    n = len(curve)
    if n < config.plateau_min_points + 2:
        return []
    thr = config.plateau_slope_fraction * _reference_slope(_segment_slopes(curve))
    half_width = max(1, min((n - 1) // 40, 50))
    local = _windowed_slopes(curve, half_width)
    qual = np.abs(local) <= thr

    runs: list[tuple[int, int]] = []
    k = 0
    while k < n:
        if qual[k]:
            j = k
            while j + 1 < n and qual[j + 1]:
                j += 1
            runs.append((k, j + 1))
            k = j + 1
        else:
            k += 1

    runs = _merge_runs(curve, runs, thr)
    runs = [(a, b) for a, b in runs if b - a >= config.plateau_min_points]

    q_min = float(np.min(curve.q))
    q_span = float(np.max(curve.q)) - q_min
    floor = q_min + config.substep_min_charge_fraction * q_span
    runs = [(a, b) for a, b in runs if curve.q[b - 1] >= floor]

    refined: list[tuple[int, int]] = []
    prev_stop = 0
    for a, b in runs:
        a2 = max(_refine_run_start(curve, a, b, prev_stop, config), prev_stop)
        refined.append((a2, b))
        prev_stop = b
    return refined


def select_rise_window(curve: QPhiCurve, plateau_start: int,
                       config: ExtractionConfig = DEFAULT_CONFIG) -> tuple[int, int]:
    """Trailing ``rise_window_fraction`` of the pre-plateau points, at least 2."""
    if plateau_start < 2:
        raise QphiError(
            f"only {plateau_start} points before the plateau; need at least 2 for the rise fit"
        )
    count = max(2, int(plateau_start * config.rise_window_fraction))
    return (plateau_start - count, plateau_start)


def _intersect(rise: LineFit, plateau: LineFit) -> tuple[float, float]:
    dm = rise.slope - plateau.slope
    scale = abs(rise.slope) if rise.slope != 0.0 else abs(plateau.slope)
    if scale == 0.0 or abs(dm) < PARALLEL_TOL * scale:
        raise NoIntersectionError()
    phi_x = (plateau.intercept - rise.intercept) / dm
    q_x = rise.slope * phi_x + rise.intercept
    return float(phi_x), float(q_x)


def _refine_rise_window(curve: QPhiCurve, plateau_start: int, phi_hat: float,
                        config: ExtractionConfig) -> tuple[int, int] | None:
    lo = (1.0 - config.rise_phi_window) * phi_hat
    pre = curve.phi[:plateau_start]
    idx = np.nonzero((pre >= lo) & (pre <= phi_hat))[0]
    if idx.size < 2:
        return None
    a, b = int(idx[0]), int(idx[-1]) + 1
    if b - a < 2 or float(np.ptp(pre[a:b])) == 0.0:
        return None
    return (a, b)


def extract_reset_point(curve: QPhiCurve, trace: SweepTrace,
                        config: ExtractionConfig = DEFAULT_CONFIG) -> ResetPoint:
    """Extract the reset point of a curve derived from ``trace``.

    Fits the plateau and rise lines, intersects them, then maps the reset
    flux back through the trace to interpolate the reset time, voltage and
    current. Multi-step curves use the first low-slope run as the plateau.
    """
    ranges = detect_substeps(curve, config)
    if not ranges:
        raise NoPlateauError()
    if len(ranges) == 1:
        try:
            plateau_range = detect_plateau(curve, config)
        except NoPlateauError:
            plateau_range = ranges[0]
    else:
        plateau_range = ranges[0]
    if plateau_range[1] - plateau_range[0] < 2:
        raise NoPlateauError()

    plateau_fit = _fit_segment(curve, *plateau_range)
    rise_range = select_rise_window(curve, plateau_range[0], config)
    rise_fit = _fit_segment(curve, *rise_range)
    phi_x, q_x = _intersect(rise_fit, plateau_fit)

    for _ in range(config.refine_passes):
        window = _refine_rise_window(curve, plateau_range[0], phi_x, config)
        if window is None or window == rise_fit.index_range:
            break
        rise_fit = _fit_segment(curve, *window)
        new_phi, new_q = _intersect(rise_fit, plateau_fit)
        converged = abs(new_phi - phi_x) <= 1e-12 * max(abs(phi_x), 1e-300)
        phi_x, q_x = new_phi, new_q
        if converged:
            break

    q_span = float(np.max(curve.q) - np.min(curve.q))
    if q_span > 0:
        for name, fit in (("rise", rise_fit), ("plateau", plateau_fit)):
            if fit.rms_residual > config.max_rms_fraction * q_span:
                raise FitQualityError(
                    f"{name} fit rms residual {fit.rms_residual:.3e} exceeds "
                    f"{config.max_rms_fraction:g} of the charge span {q_span:.3e}"
                )

    phi_lo = float(np.min(curve.phi))
    phi_hi = float(np.max(curve.phi))
    if not (phi_lo <= phi_x <= phi_hi):
        raise ImplausibleResetError(
            f"implausible reset point: intersection at phi={phi_x:.6g} Vs lies outside "
            f"the observed span [{phi_lo:.6g}, {phi_hi:.6g}]"
        )
    if phi_x <= 0 or q_x <= 0:
        raise ImplausibleResetError(
            f"implausible reset point: nonpositive intersection (phi={phi_x:.6g}, q={q_x:.6g})"
        )

    t_rst = phi_to_time(curve, trace, phi_x)
    v_rst, i_rst = recover_voltage_current(trace, t_rst)
    return ResetPoint(
        phi_rst=phi_x,
        q_rst=q_x,
        v_rst=v_rst,
        i_rst=i_rst,
        rise_fit=rise_fit,
        plateau_fit=plateau_fit,
        t_rst=t_rst,
    )


def recover_voltage_current(trace: SweepTrace, t_rst: float) -> tuple[float, float]:
    """Linearly interpolate the trace's voltage and current at the reset time."""
    t0, t1 = float(trace.t[0]), float(trace.t[-1])
    if not (t0 <= t_rst <= t1):
        raise QphiError(f"t_rst {t_rst!r} outside the trace time span [{t0!r}, {t1!r}]")
    v = float(np.interp(t_rst, trace.t, trace.v))
    i = float(np.interp(t_rst, trace.t, trace.i))
    return (v, i)
