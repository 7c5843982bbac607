"""Charge-flux transformation of reset sweeps.

Flux is the cumulative time integral of voltage, charge the cumulative time
integral of current, both by the trapezoid rule (exact on the piecewise-linear
signals instruments record). The first point of every curve is (0, 0).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FlatFluxError, QphiError
from .traces import SweepTrace

QPHI_CSV_HEADER = "phi,q,sample_index"


@dataclass(frozen=True)
class QPhiPoint:
    """One transformed point: flux in volt-seconds, charge in coulombs."""

    phi: float
    q: float
    sample_index: int


@dataclass
class QPhiCurve:
    """Cumulative (flux, charge) curve of one cycle, index-linked to its trace."""

    phi: np.ndarray
    q: np.ndarray
    sample_index: np.ndarray
    source_cycle_id: int = 0

    def __post_init__(self):
        self.phi = np.asarray(self.phi, dtype=float)
        self.q = np.asarray(self.q, dtype=float)
        self.sample_index = np.asarray(self.sample_index, dtype=int)

    def __len__(self):
        return self.phi.size

    def point(self, index: int) -> QPhiPoint:
        return QPhiPoint(float(self.phi[index]), float(self.q[index]), int(self.sample_index[index]))


def cumulative_trapezoid(y: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Cumulative trapezoid integral of y over x, anchored at 0."""
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    increments = 0.5 * (y[1:] + y[:-1]) * np.diff(x)
    return np.concatenate(([0.0], np.cumsum(increments)))


def integrate_trace(trace: SweepTrace) -> QPhiCurve:
    """Transform a sweep into the charge-flux domain.

    Point k holds the trapezoid integrals of v and i over [t_0, t_k]; one
    output point per input sample, point 0 at the origin.
    """
    phi = cumulative_trapezoid(trace.v, trace.t)
    q = cumulative_trapezoid(trace.i, trace.t)
    return QPhiCurve(
        phi=phi,
        q=q,
        sample_index=np.arange(len(trace)),
        source_cycle_id=trace.cycle_id,
    )


def phi_to_time(curve: QPhiCurve, trace: SweepTrace, phi_query: float) -> float:
    """Invert flux back to time by linear interpolation.

    Requires phi_query within [0, max phi] and strictly increasing flux over
    the bracketing segment; a flat segment at the query has no unique inverse.
    """
    phi = curve.phi
    t = trace.t[curve.sample_index]
    phi_max = float(np.max(phi))
    if phi_query < 0.0 or phi_query > phi_max:
        raise QphiError(
            f"phi_query {phi_query!r} outside the observed flux span [0, {phi_max!r}]"
        )
    if phi_query == phi[0]:
        return float(t[0])
    lo = phi[:-1]
    hi = phi[1:]
    brackets = np.nonzero(((lo - phi_query) * (hi - phi_query) <= 0))[0]
    for k in brackets:
        if hi[k] > lo[k]:
            frac = (phi_query - lo[k]) / (hi[k] - lo[k])
            return float(t[k] + frac * (t[k + 1] - t[k]))
        if hi[k] == lo[k] == phi_query:
            raise FlatFluxError(int(k))
    raise QphiError(f"phi_query {phi_query!r} is not bracketed by the curve")


def write_qphi_csv(curve: QPhiCurve) -> str:
    """Serialize a curve as ``phi,q,sample_index`` CSV."""
    lines = [QPHI_CSV_HEADER]
    for k in range(len(curve)):
        lines.append(f"{curve.phi[k]!r},{curve.q[k]!r},{int(curve.sample_index[k])}")
    return "\n".join(lines) + "\n"
