"""Cycle-to-cycle statistics and correlated Monte-Carlo parameter sampling.

Summary statistics use the sample (n-1) standard deviation. Parameter
sampling draws from a multivariate Gaussian over (phi_rst, q_rst, n) and
rejects nonpositive components; each sample derives its randomness from its
own seed-sequence child, so results are bitwise reproducible regardless of
generation order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import SamplingError
from .extraction import ResetPoint
from .model import ModelParams

PARAMETER_LABELS = ("phi_rst", "q_rst", "n")
MAX_DRAWS_PER_SAMPLE = 256


@dataclass(frozen=True)
class EnsembleRecord:
    """Per-cycle model parameters, optionally with the reset point they came from."""

    cycle_id: int
    params: ModelParams
    reset: ResetPoint | None = None


@dataclass
class ParameterEnsemble:
    """Collection of per-cycle parameter records."""

    records: list[EnsembleRecord] = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def column(self, name: str) -> np.ndarray:
        """Values of one quantity across the ensemble (NaN where unavailable)."""
        if name in PARAMETER_LABELS:
            return np.array([getattr(r.params, name) for r in self.records], dtype=float)
        if name in ("v_rst", "i_rst", "t_rst"):
            return np.array(
                [getattr(r.reset, name) if r.reset is not None else np.nan for r in self.records],
                dtype=float,
            )
        raise KeyError(name)

    def parameter_matrix(self) -> np.ndarray:
        """len x 3 array over (phi_rst, q_rst, n)."""
        return np.column_stack([self.column(name) for name in PARAMETER_LABELS])


@dataclass(frozen=True)
class QuantityStats:
    mean: float
    std: float


@dataclass
class SummaryStats:
    """Per-quantity mean and sample standard deviation."""

    quantities: dict[str, QuantityStats]

    def __getitem__(self, name: str) -> QuantityStats:
        return self.quantities[name]

    def to_dict(self) -> dict[str, dict[str, float]]:
        return {k: {"mean": s.mean, "std": s.std} for k, s in self.quantities.items()}


def _stats(values: np.ndarray) -> QuantityStats:
    mean = float(np.mean(values))
    std = float(np.std(values, ddof=1)) if values.size > 1 else 0.0
    return QuantityStats(mean=mean, std=std)


def summarize_columns(columns: dict[str, np.ndarray]) -> SummaryStats:
    """SummaryStats over named value arrays (sample std, zero for singletons)."""
    quantities = {}
    for name, values in columns.items():
        values = np.asarray(values, dtype=float)
        if values.size == 0:
            raise ValueError(f"cannot summarize empty column {name!r}")
        quantities[name] = _stats(values)
    return SummaryStats(quantities=quantities)


def summarize(ensemble: ParameterEnsemble) -> SummaryStats:
    """Mean and sample standard deviation of every available quantity.

    Single-record ensembles report zero deviation. Voltage/current entries
    appear only when reset points are attached to the records.
    """
    if len(ensemble) == 0:
        raise ValueError("cannot summarize an empty ensemble")
    quantities: dict[str, QuantityStats] = {}
    for name in PARAMETER_LABELS:
        quantities[name] = _stats(ensemble.column(name))
    for name in ("v_rst", "i_rst"):
        values = ensemble.column(name)
        if not np.any(np.isnan(values)):
            quantities[name] = _stats(values)
    return SummaryStats(quantities=quantities)


@dataclass
class Histogram:
    """Equal-width histogram of mean-normalized values."""

    edges: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        self.edges = np.asarray(self.edges, dtype=float)
        self.counts = np.asarray(self.counts, dtype=int)


def normalized_histogram(values, mean: float, bin_count: int) -> Histogram:
    """Histogram of values/mean with ``bin_count`` equal-width bins over [min, max]."""
    if mean <= 0:
        raise ValueError("mean must be positive to normalize")
    if bin_count < 1:
        raise ValueError("bin_count must be >= 1")
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        edges = np.linspace(0.0, 1.0, bin_count + 1)
        return Histogram(edges=edges, counts=np.zeros(bin_count, dtype=int))
    norm = values / mean
    lo, hi = float(np.min(norm)), float(np.max(norm))
    if lo == hi:
        lo -= 0.5
        hi += 0.5
    counts, edges = np.histogram(norm, bins=bin_count, range=(lo, hi))
    return Histogram(edges=edges, counts=counts)


def default_bin_count(sample_size: int) -> int:
    """Square-root binning rule."""
    return max(1, int(np.ceil(np.sqrt(max(sample_size, 0)))))


def pearson(x, y) -> float:
    """Pearson product-moment correlation coefficient."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size != y.size:
        raise ValueError(f"length mismatch: {x.size} vs {y.size}")
    if x.size < 3:
        raise ValueError("need at least 3 points for a correlation")
    xc = x - x.mean()
    yc = y - y.mean()
    sx = float(np.dot(xc, xc))
    sy = float(np.dot(yc, yc))
    if sx == 0.0 or sy == 0.0:
        raise ValueError("zero variance input; correlation undefined")
    return float(np.dot(xc, yc) / np.sqrt(sx * sy))


@dataclass
class CorrelationMatrix:
    """Symmetric Pearson matrix over named quantities."""

    labels: tuple[str, ...]
    matrix: np.ndarray

    def to_nested(self) -> list[list[float]]:
        return [[float(v) for v in row] for row in self.matrix]


def correlation_matrix(ensemble: ParameterEnsemble, include_vi: bool = False) -> CorrelationMatrix:
    """Pairwise Pearson coefficients over (phi_rst, q_rst, n) and optionally (v_rst, i_rst)."""
    labels = list(PARAMETER_LABELS)
    if include_vi:
        labels += ["v_rst", "i_rst"]
    columns = [ensemble.column(name) for name in labels]
    size = len(labels)
    out = np.eye(size)
    for a in range(size):
        for b in range(a + 1, size):
            out[a, b] = out[b, a] = pearson(columns[a], columns[b])
    return CorrelationMatrix(labels=tuple(labels), matrix=out)


def covariance_matrix(ensemble: ParameterEnsemble) -> np.ndarray:
    """Sample covariance over (phi_rst, q_rst, n); symmetric positive semidefinite."""
    if len(ensemble) < 3:
        raise ValueError(f"need at least 3 records for a covariance, got {len(ensemble)}")
    return np.cov(ensemble.parameter_matrix(), rowvar=False, ddof=1)


@dataclass(frozen=True)
class ParameterStats:
    """Means and covariance over (phi_rst, q_rst, n), the Monte-Carlo generator inputs."""

    means: tuple[float, float, float]
    covariance: np.ndarray

    @classmethod
    def from_std(cls, means, stds) -> "ParameterStats":
        """Convenience constructor for uncorrelated inputs."""
        stds = np.asarray(stds, dtype=float)
        return cls(means=tuple(float(m) for m in means), covariance=np.diag(stds**2))


def _cholesky_with_jitter(cov: np.ndarray) -> np.ndarray:
    if not np.allclose(cov, cov.T, atol=1e-12 * max(np.abs(cov).max(), 1.0)):
        raise SamplingError("covariance matrix is not symmetric")
    if np.all(cov == 0.0):
        return np.zeros_like(cov)
    scale = float(np.max(np.abs(np.diag(cov)))) or 1.0
    for jitter in (0.0, 1e-12, 1e-10, 1e-8):
        try:
            return np.linalg.cholesky(cov + jitter * scale * np.eye(cov.shape[0]))
        except np.linalg.LinAlgError:
            continue
    raise SamplingError("covariance matrix is not positive semidefinite (jitter exhausted)")


def sample_parameters(stats: ParameterStats, count: int, seed: int) -> ParameterEnsemble:
    """Draw ``count`` parameter triples from a truncated multivariate Gaussian.

    Samples with any nonpositive component are rejected and redrawn from the
    same per-sample stream. An overall rejection rate above 50% aborts: the
    means are then too close to zero for a Gaussian model to make sense.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    cov = np.asarray(stats.covariance, dtype=float)
    if cov.shape != (3, 3):
        raise ValueError(f"covariance must be 3x3 over {PARAMETER_LABELS}, got {cov.shape}")
    chol = _cholesky_with_jitter(cov)
    means = np.asarray(stats.means, dtype=float)

    root = np.random.SeedSequence(entropy=seed)
    children = root.spawn(count)
    records: list[EnsembleRecord] = []
    draws = 0
    for k in range(count):
        rng = np.random.default_rng(children[k])
        for _ in range(MAX_DRAWS_PER_SAMPLE):
            draws += 1
            sample = means + chol @ rng.standard_normal(3)
            if np.all(sample > 0):
                break
        else:
            raise SamplingError(
                f"sample {k}: no positive draw in {MAX_DRAWS_PER_SAMPLE} attempts; "
                "review the generator means and covariance"
            )
        params = ModelParams(q_rst=float(sample[1]), phi_rst=float(sample[0]), n=float(sample[2]))
        records.append(EnsembleRecord(cycle_id=k, params=params))

    rejection_rate = 1.0 - count / draws
    if rejection_rate > 0.5:
        raise SamplingError(
            f"rejection rate {rejection_rate:.1%} exceeds 50%; the means are too close to "
            "zero for a truncated Gaussian model, review the generator parameters"
        )
    return ParameterEnsemble(records=records)
