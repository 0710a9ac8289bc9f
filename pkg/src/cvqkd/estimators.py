"""Covariance and differential-entropy estimation from finite samples.

The entropy estimator is the classic nearest-neighbor construction
(digamma-corrected log of k-th neighbor distances), applied after an
affine whitening of the data so strongly correlated quadrature pairs do
not bias the neighbor search; the whitening log-determinant is added
back. A plain histogram estimator is provided as a fallback. Standard
errors come from 10-fold subsampling.

Estimates are deterministic for a fixed input ordering and jitter seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import digamma, gammaln

from .errors import DegenerateDataError, DomainError, InsufficientDataError
from .rates import Covariance2
from .rates import conditional_variance as rates_conditional_variance

#: jitter magnitude relative to the per-axis sample standard deviation,
#: applied before the neighbor search so exact duplicates do not produce
#: zero distances
JITTER_SCALE = 1e-12

#: subsampling folds used for standard errors
DEFAULT_FOLDS = 10

LOG2 = math.log(2.0)


@dataclass(frozen=True)
class SampleSet:
    """Paired Alice/Bob quadrature outcomes for one quadrature label."""

    a: np.ndarray
    b: np.ndarray
    label: str = "q"

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        b = np.asarray(self.b, dtype=float)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        if a.ndim != 1 or b.ndim != 1 or a.shape != b.shape:
            raise DomainError("sample arrays must be 1-d and of equal length")
        if len(a) < 2:
            raise InsufficientDataError(f"need at least 2 samples, got {len(a)}")
        if not (np.isfinite(a).all() and np.isfinite(b).all()):
            raise DomainError("samples must be finite")
        if self.label not in ("q", "p"):
            raise DomainError(f"label must be 'q' or 'p', got {self.label!r}")

    def __len__(self) -> int:
        return len(self.a)

    @classmethod
    def from_pairs(cls, pairs, label: str = "q") -> "SampleSet":
        arr = np.asarray(list(pairs), dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise DomainError("pairs must be a sequence of (a, b) tuples")
        return cls(arr[:, 0], arr[:, 1], label)


@dataclass(frozen=True)
class EntropyEstimate:
    """A differential-entropy value in bits with estimator metadata."""

    value: float
    std_error: float
    estimator_id: str
    sample_count: int
    neighbor_order: int | None = field(default=None)

    def __post_init__(self):
        if self.std_error < 0:
            raise DomainError("standard error cannot be negative")


def estimate_covariance(s: SampleSet) -> Covariance2:
    """Sample covariance of (a, b) after subtracting sample means,
    population-normalized. A covariance marginally outside the positive-
    semidefinite cone (floating point) is clipped to the boundary."""
    a = s.a - s.a.mean()
    b = s.b - s.b.mean()
    n = len(s)
    var_a = float(a @ a) / n
    var_b = float(b @ b) / n
    cov = float(a @ b) / n
    limit = math.sqrt(var_a * var_b)
    if abs(cov) > limit:
        cov = math.copysign(limit, cov)
    return Covariance2(var_a, var_b, cov)


def _as_matrix(values) -> np.ndarray:
    x = np.asarray(values, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise DomainError("values must be a 1-d sequence or an (n, d) array")
    if not np.isfinite(x).all():
        raise DomainError("values must be finite")
    return x


def _jitter(x: np.ndarray, seed: int) -> np.ndarray:
    scale = x.std(axis=0) * JITTER_SCALE
    if not scale.any():
        raise DegenerateDataError("all samples identical on some axis")
    rng = np.random.default_rng(seed)
    return x + rng.normal(0.0, 1.0, x.shape) * scale


def _whiten(x: np.ndarray) -> tuple[np.ndarray, float]:
    """Map samples to unit covariance; return them with the entropy
    correction (bits) lost by the map, to be added back."""
    x = x - x.mean(axis=0)
    cov = (x.T @ x) / len(x)
    eigval, eigvec = np.linalg.eigh(cov)
    if eigval[0] <= eigval[-1] * 1e-12 or eigval[-1] <= 0:
        raise DegenerateDataError(
            "sample covariance is singular: the data has no spread in some "
            "direction (e.g. one variable is an exact function of the other)")
    y = (x @ eigvec) / np.sqrt(eigval)
    return y, 0.5 * float(np.log2(eigval).sum())


def _knn_entropy_bits(x: np.ndarray, k: int, jitter_seed: int) -> float:
    """Point estimate of the nearest-neighbor entropy (bits) for an
    (n, d) sample matrix."""
    n, d = x.shape
    y, log_det_bits = _whiten(_jitter(x, jitter_seed))
    dist, _ = cKDTree(y).query(y, k=k + 1, workers=-1)
    eps = dist[:, k]
    if not eps.all():
        raise DegenerateDataError(
            f"zero distance to neighbor {k}: data is duplicate-heavy")
    log_unit_ball = (d / 2.0) * math.log(math.pi) - gammaln(d / 2.0 + 1.0)
    nats = (digamma(n) - digamma(k) + log_unit_ball
            + d * float(np.mean(np.log(eps))))
    return nats / LOG2 + log_det_bits


def _fold_std_error(estimates: np.ndarray) -> float:
    return float(estimates.std(ddof=1) / math.sqrt(len(estimates)))


def _knn_with_error(x: np.ndarray, k: int, jitter_seed: int,
                    folds: int) -> tuple[float, float]:
    value = _knn_entropy_bits(x, k, jitter_seed)
    per_fold = np.array([
        _knn_entropy_bits(x[f::folds], k, jitter_seed + 1 + f)
        for f in range(folds)
    ])
    return value, _fold_std_error(per_fold)


def knn_differential_entropy(values, k: int = 4, jitter_seed: int = 0,
                             folds: int = DEFAULT_FOLDS) -> EntropyEstimate:
    """Nearest-neighbor differential entropy of a scalar (or vector)
    sample, in bits.

    Consistent for any distribution with a density; duplicate-heavy data
    degenerates the neighbor distances and raises DegenerateDataError.
    """
    x = _as_matrix(values)
    if k < 1:
        raise DomainError(f"neighbor order must be >= 1, got {k}")
    if len(x) < max(k + 1, folds * (k + 1)):
        raise InsufficientDataError(
            f"need at least {max(k + 1, folds * (k + 1))} samples for "
            f"k={k} with {folds}-fold errors, got {len(x)}")
    value, err = _knn_with_error(x, k, jitter_seed, folds)
    return EntropyEstimate(value, err, "knn", len(x), k)


def histogram_differential_entropy(values, bins: int | None = None) -> EntropyEstimate:
    """Histogram (plug-in) differential entropy of a scalar sample, in
    bits. Coarser than the neighbor estimator; kept as a fallback for
    data where the neighbor search degenerates."""
    x = _as_matrix(values)
    if x.shape[1] != 1:
        raise DomainError("histogram estimator is one-dimensional")
    x = x[:, 0]
    n = len(x)
    if bins is None:
        bins = max(int(round(n ** (1 / 3))), 8)
    counts, edges = np.histogram(x, bins=bins)
    width = edges[1] - edges[0]
    if width <= 0:
        raise DegenerateDataError("all samples identical")
    p = counts[counts > 0] / n
    value = float(-(p * np.log2(p)).sum() + math.log2(width))
    # crude multinomial error on the plug-in term
    err = float(np.sqrt(np.sum(p * (np.log2(p)) ** 2) / n))
    return EntropyEstimate(value, err, "histogram", n)


def conditional_entropy_estimate(s: SampleSet, k: int = 4, jitter_seed: int = 0,
                                 folds: int = DEFAULT_FOLDS) -> EntropyEstimate:
    """H(B|A) in bits, computed as H(A, B) - H(A) with the neighbor
    estimator; the standard error is taken on the per-fold differences so
    the two estimates' shared fluctuations cancel."""
    xy = np.column_stack([s.a, s.b])
    _require_count(s, k, folds)
    if sample_conditional_variance(s) <= 0:
        raise DegenerateDataError("B is an exact linear function of A: "
                                  "conditional spread is zero")
    value = (_knn_entropy_bits(xy, k, jitter_seed)
             - _knn_entropy_bits(s.a[:, None], k, jitter_seed))
    per_fold = np.array([
        _knn_entropy_bits(xy[f::folds], k, jitter_seed + 1 + f)
        - _knn_entropy_bits(s.a[f::folds, None], k, jitter_seed + 1 + f)
        for f in range(folds)
    ])
    return EntropyEstimate(value, _fold_std_error(per_fold), "knn", len(s), k)


def mutual_information_estimate(s: SampleSet, k: int = 4, jitter_seed: int = 0,
                                folds: int = DEFAULT_FOLDS) -> EntropyEstimate:
    """I(A;B) in bits as H(A) + H(B) - H(A, B). Non-negative up to
    estimator error; small negative values on independent data are
    expected scatter."""
    xy = np.column_stack([s.a, s.b])
    _require_count(s, k, folds)

    def mi(sl, seed: int) -> float:
        return (_knn_entropy_bits(s.a[sl, None], k, seed)
                + _knn_entropy_bits(s.b[sl, None], k, seed)
                - _knn_entropy_bits(xy[sl], k, seed))

    value = mi(slice(None), jitter_seed)
    per_fold = np.array([
        mi(slice(f, None, folds), jitter_seed + 1 + f) for f in range(folds)
    ])
    return EntropyEstimate(value, _fold_std_error(per_fold), "knn", len(s), k)


def sample_conditional_variance(s: SampleSet) -> float:
    """Best-linear-estimate residual variance of the samples themselves."""
    return rates_conditional_variance(estimate_covariance(s))


def _require_count(s: SampleSet, k: int, folds: int) -> None:
    if len(s) < folds * (k + 1):
        raise InsufficientDataError(
            f"need at least {folds * (k + 1)} samples, got {len(s)}")
