"""Three-parameter constitutive model of the reset transition.

Charge saturates at the reset charge once the flux reaches the reset flux;
before that it follows a power law of the flux ratio:

    q(phi) = q_rst * min(1, (phi / phi_rst) ** n)

The derivative dq/dphi acts as a flux-dependent memductance, which makes the
relation directly usable as a voltage-controlled device law.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .extraction import ResetPoint
from .transform import QPhiCurve


@dataclass(frozen=True)
class ModelParams:
    """Reset charge (C), reset flux (Vs) and the pre-reset exponent."""

    q_rst: float
    phi_rst: float
    n: float

    def __post_init__(self):
        if not (self.q_rst > 0 and self.phi_rst > 0 and self.n > 0):
            raise ValueError("q_rst, phi_rst and n must all be positive")


def _as_nonnegative_array(phi) -> tuple[np.ndarray, bool]:
    arr = np.asarray(phi, dtype=float)
    if np.any(arr < 0):
        raise ValueError("phi must be nonnegative")
    return arr, arr.ndim == 0


def model_charge(phi, params: ModelParams):
    """Charge at flux ``phi``; exactly q_rst for all phi >= phi_rst.

    Accepts scalars or arrays.
    """
    arr, scalar = _as_nonnegative_array(phi)
    q = params.q_rst * np.minimum(1.0, np.power(arr / params.phi_rst, params.n))
    return float(q) if scalar else q


def memductance(phi, params: ModelParams):
    """dq/dphi in C/(V s): the power-law slope before reset, 0 after.

    At phi == phi_rst the left limit n*q_rst/phi_rst is returned, keeping
    pre-reset simulation continuous through the corner.
    """
    arr, scalar = _as_nonnegative_array(phi)
    ratio = arr / params.phi_rst
    scale = params.n * params.q_rst / params.phi_rst
    with np.errstate(divide="ignore"):
        g = np.where(ratio <= 1.0, scale * np.power(ratio, params.n - 1.0), 0.0)
    return float(g) if scalar else g


@dataclass
class NormalizedCurve:
    """A charge-flux curve scaled so the first reset event sits at (1, 1).

    Multi-step curves keep their later steps, so normalized charge may
    exceed 1.
    """

    phi: np.ndarray
    q: np.ndarray
    source_cycle_id: int = 0

    def __post_init__(self):
        self.phi = np.asarray(self.phi, dtype=float)
        self.q = np.asarray(self.q, dtype=float)

    def __len__(self):
        return self.phi.size


def normalize_curve(curve: QPhiCurve, reset: ResetPoint) -> NormalizedCurve:
    """Divide a curve componentwise by its extracted (phi_rst, q_rst)."""
    if not (reset.phi_rst > 0 and reset.q_rst > 0):
        raise ValueError("reset values must be positive to normalize")
    return NormalizedCurve(
        phi=curve.phi / reset.phi_rst,
        q=curve.q / reset.q_rst,
        source_cycle_id=curve.source_cycle_id,
    )


DEFAULT_FIT_RANGE = (0.10, 0.95)


@dataclass(frozen=True)
class ExponentFit:
    """Fitted exponent with its log-space diagnostics."""

    n: float
    rms_log_residual: float
    point_count: int
    fit_range: tuple[float, float]


def fit_exponent(normalized: NormalizedCurve, fit_range: tuple[float, float] = DEFAULT_FIT_RANGE) -> ExponentFit:
    """Fit the exponent as the OLS slope of ln(q) against ln(phi).

    Uses normalized-flux points inside ``fit_range`` (a subinterval of
    (0, 1), so multi-step curves are fitted only up to the first reset
    event). Exact on noiseless power-law data.
    """
    lo, hi = fit_range
    if not (0.0 < lo < hi < 1.0):
        raise ValueError("fit_range must satisfy 0 < lo < hi < 1")
    mask = (normalized.phi >= lo) & (normalized.phi <= hi)
    count = int(np.count_nonzero(mask))
    if count < 5:
        raise ValueError(f"only {count} points with normalized flux in [{lo}, {hi}]; need >= 5")
    q = normalized.q[mask]
    if np.any(q <= 0):
        raise ValueError("nonpositive charge inside the fit range; cannot take logs")
    x = np.log(normalized.phi[mask])
    y = np.log(q)
    xc = x - x.mean()
    slope = float(np.dot(xc, y) / np.dot(xc, xc))
    resid = y - (y.mean() + slope * xc)
    rms = float(np.sqrt(np.mean(resid**2)))
    return ExponentFit(n=slope, rms_log_residual=rms, point_count=count, fit_range=(lo, hi))


def model_residual(curve: QPhiCurve, params: ModelParams) -> float:
    """RMS of (q_measured - q_model)/q_rst over all points of a curve."""
    if len(curve) == 0:
        raise ValueError("curve is empty")
    predicted = model_charge(np.maximum(curve.phi, 0.0), params)
    rel = (curve.q - predicted) / params.q_rst
    return float(np.sqrt(np.mean(rel**2)))
