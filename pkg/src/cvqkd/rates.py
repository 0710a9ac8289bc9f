"""Closed-form information quantities and secret-key-rate lower bounds.

All second moments are expressed in shot-noise units: the variance of one
vacuum quadrature is ``n0`` (1.0 by convention, configurable everywhere).
All entropies and rates are in bits. Every function here is pure.

Conventions for a reverse-reconciliation link, Bob's data making the key:

* ``i_ab``       Alice-Bob mutual information of the Gaussian model,
                 0.5*log2(var_b / cond_var).
* ``i_be_bound`` upper bound on Eve's information per pulse, defined so
                 that ``delta_i_min = i_ab - i_be_bound`` always holds.
* ``delta_i_min`` guaranteed distillable secret bits per pulse given the
                 observed covariance, whatever (non-Gaussian, coherent)
                 attack produced it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

from .errors import DomainError, InconsistentStatisticsError

#: relative slack allowed on the positive-semidefiniteness invariant,
#: so covariances estimated in floating point are not rejected
PSD_RTOL = 1e-9


class ProtocolKind(Enum):
    """Which entanglement-based protocol variant produced the data."""

    SQUEEZED_HOMODYNE = "squeezed_homodyne"
    COHERENT_HETERODYNE = "coherent_heterodyne"


class HeterodyneTransform(Enum):
    """Convention for reconstructing Alice's pre-beam-splitter variance.

    PRINTED is the form the standard closed-form rate expressions print,
    var_a' = 2*(var_a - n0); it recovers the modulation variance, one
    vacuum unit below the physical mode variance. BEAMSPLITTER inverts
    the physical 50:50 split with vacuum, var_a' = 2*var_a - n0, and is
    the one that matches simulated physics (the verification suite
    records this). Both scale the covariance by sqrt(2).
    """

    PRINTED = "printed"
    BEAMSPLITTER = "beamsplitter"


@dataclass(frozen=True)
class Covariance2:
    """Second moments of one zero-mean Alice/Bob quadrature pair."""

    var_a: float
    var_b: float
    cov_ab: float

    def __post_init__(self):
        if not (math.isfinite(self.var_a) and math.isfinite(self.var_b)
                and math.isfinite(self.cov_ab)):
            raise DomainError("covariance entries must be finite")
        if self.var_a < 0 or self.var_b < 0:
            raise DomainError(
                f"variances must be non-negative, got ({self.var_a}, {self.var_b})")
        bound = self.var_a * self.var_b
        if self.cov_ab ** 2 > bound * (1.0 + PSD_RTOL):
            raise InconsistentStatisticsError(
                f"cov_ab^2 = {self.cov_ab ** 2:.6g} exceeds var_a*var_b = {bound:.6g}")


@dataclass(frozen=True)
class RateReport:
    """Key-rate bound plus the intermediate quantities that produced it.

    For covariances of physically realizable states (var_b * cond_var >=
    n0**2) the usual orderings hold: i_be_bound >= 0 and
    delta_i_min_per_pulse <= i_ab. A covariance literal violating that
    product makes i_be_bound negative, which flags the input as not
    quantum-realizable; values are reported as computed, never clamped.
    """

    delta_i_min_per_pulse: float
    delta_i_min_block: float
    i_ab: float
    i_be_bound: float
    cond_var_b_given_a: float
    sifting_applied: bool
    protocol: ProtocolKind
    block_size: int
    cond_var_b_given_a_prime: float | None = None

    def with_sifting(self) -> "RateReport":
        """Halve every per-pulse information rate (random independent
        quadrature choices make Alice and Bob agree half of the time)."""
        return replace(
            self,
            delta_i_min_per_pulse=self.delta_i_min_per_pulse / 2,
            delta_i_min_block=self.delta_i_min_block / 2,
            i_ab=self.i_ab / 2,
            i_be_bound=self.i_be_bound / 2,
            sifting_applied=True,
        )


def gaussian_entropy(variance: float) -> float:
    """Differential entropy in bits of a Gaussian with the given variance,
    0.5*log2(2*pi*e*variance). This is the maximum entropy any
    distribution with that variance can have."""
    if not variance > 0:
        raise DomainError(f"variance must be positive, got {variance}")
    return 0.5 * math.log2(2.0 * math.pi * math.e * variance)


def vacuum_entropy(n0: float = 1.0) -> float:
    """Entropy of one vacuum quadrature (2.047095... bits for n0 = 1)."""
    if not n0 > 0:
        raise DomainError(f"shot-noise unit must be positive, got {n0}")
    return gaussian_entropy(n0)


def conditional_variance(k: Covariance2) -> float:
    """Residual variance of B after the best linear estimate from A:
    var_b - cov_ab**2 / var_a. Never negative; tiny negative floating-point
    residue at the perfectly-correlated boundary is clipped to 0."""
    if k.var_a <= 0:
        raise DomainError("var_a must be positive to condition on A")
    return max(k.var_b - k.cov_ab ** 2 / k.var_a, 0.0)


def gaussian_conditional_entropy(k: Covariance2) -> float:
    """Conditional entropy H(B|A) of the bivariate Gaussian with covariance
    k; equals the entropy of a Gaussian at the conditional variance."""
    cv = conditional_variance(k)
    if cv <= 0:
        raise DomainError("conditional variance is zero: B is a deterministic "
                          "linear function of A")
    return gaussian_entropy(cv)


def gaussian_mutual_information(k: Covariance2) -> float:
    """I(A;B) in bits for the bivariate Gaussian model, 0.5*log2(var_b/cond_var)."""
    cv = conditional_variance(k)
    if cv <= 0 or k.var_b <= 0:
        raise DomainError("mutual information undefined for degenerate covariance")
    return 0.5 * math.log2(k.var_b / cv)


def squeezed_rate_bound(k: Covariance2, n: int, n0: float = 1.0) -> RateReport:
    """Secret-key-rate lower bound for the squeezed-state/homodyne protocol.

    Per pulse: log2(n0 / cond_var). Negative values are returned as-is;
    they mean no secure key at this covariance, which the caller decides
    how to report.
    """
    _check_block_size(n)
    if not n0 > 0:
        raise DomainError(f"shot-noise unit must be positive, got {n0}")
    cv = conditional_variance(k)
    if cv <= 0:
        raise DomainError("conditional variance must be positive for a rate bound")
    per_pulse = math.log2(n0 / cv)
    i_ab = gaussian_mutual_information(k)
    return RateReport(
        delta_i_min_per_pulse=per_pulse,
        delta_i_min_block=n * per_pulse,
        i_ab=i_ab,
        i_be_bound=i_ab - per_pulse,
        cond_var_b_given_a=cv,
        sifting_applied=False,
        protocol=ProtocolKind.SQUEEZED_HOMODYNE,
        block_size=n,
    )


def heterodyne_covariance_transform(
    k_measured: Covariance2,
    n0: float = 1.0,
    transform: HeterodyneTransform = HeterodyneTransform.PRINTED,
) -> Covariance2:
    """Covariance of Alice's pre-beam-splitter mode against Bob, inferred
    from her heterodyne-measured statistics.

    The heterodyne 50:50 split halves the signal and adds half a vacuum
    unit, so the measured Alice variance must exceed n0 to carry any
    signal. See HeterodyneTransform for the two variance conventions; the
    covariance picks up sqrt(2) either way. Raises
    InconsistentStatisticsError when the reconstructed matrix is not
    positive semidefinite (the PRINTED convention does this on exactly the
    statistics a low-loss entangled source produces).
    """
    if not k_measured.var_a > n0:
        raise DomainError(
            f"measured Alice variance {k_measured.var_a} must exceed the "
            f"shot-noise unit {n0} for the heterodyne transform")
    if transform is HeterodyneTransform.PRINTED:
        var_a_prime = 2.0 * (k_measured.var_a - n0)
    else:
        var_a_prime = 2.0 * k_measured.var_a - n0
    return Covariance2(var_a_prime, k_measured.var_b,
                       math.sqrt(2.0) * k_measured.cov_ab)


def coherent_rate_bound(
    k_measured: Covariance2,
    n: int,
    n0: float = 1.0,
    transform: HeterodyneTransform = HeterodyneTransform.PRINTED,
) -> RateReport:
    """Secret-key-rate lower bound for the coherent-state/heterodyne
    protocol, from Alice's measured covariance against Bob.

    Per pulse: log2(n0 / sqrt(cv1 * cv2)) where cv1 conditions Bob on
    Alice's measured data and cv2 on her reconstructed pre-beam-splitter
    mode. Equivalent to the entropy chain
    2*H0 - H_G(B|A) - H_G(B|A'), which the test suite checks against this
    closed form.
    """
    _check_block_size(n)
    if not n0 > 0:
        raise DomainError(f"shot-noise unit must be positive, got {n0}")
    cv1 = conditional_variance(k_measured)
    k_prime = heterodyne_covariance_transform(k_measured, n0, transform)
    cv2 = conditional_variance(k_prime)
    if cv1 <= 0 or cv2 <= 0:
        raise DomainError("both conditional variances must be positive")
    per_pulse = math.log2(n0 / math.sqrt(cv1 * cv2))
    i_ab = gaussian_mutual_information(k_measured)
    return RateReport(
        delta_i_min_per_pulse=per_pulse,
        delta_i_min_block=n * per_pulse,
        i_ab=i_ab,
        i_be_bound=i_ab - per_pulse,
        cond_var_b_given_a=cv1,
        sifting_applied=False,
        protocol=ProtocolKind.COHERENT_HETERODYNE,
        block_size=n,
        cond_var_b_given_a_prime=cv2,
    )


def rate_bound(
    k: Covariance2,
    n: int,
    protocol: ProtocolKind,
    n0: float = 1.0,
    transform: HeterodyneTransform = HeterodyneTransform.PRINTED,
) -> RateReport:
    """Dispatch to the bound matching the protocol."""
    if protocol is ProtocolKind.SQUEEZED_HOMODYNE:
        return squeezed_rate_bound(k, n, n0)
    return coherent_rate_bound(k, n, n0, transform)


def effective_rate(
    i_eff: float,
    k_measured: Covariance2,
    protocol: ProtocolKind,
    n0: float = 1.0,
    transform: HeterodyneTransform = HeterodyneTransform.PRINTED,
) -> float:
    """Per-pulse key rate when reconciliation extracts only i_eff bits per
    pulse of the shared information: i_eff - i_be_bound.

    i_eff = i_ab (perfect reconciliation) recovers the plain bound;
    i_eff above the Gaussian mutual information is impossible and raises.
    """
    report = rate_bound(k_measured, 1, protocol, n0, transform)
    if i_eff < 0:
        raise DomainError(f"reconciled information cannot be negative, got {i_eff}")
    if i_eff > report.i_ab * (1.0 + 1e-12):
        raise DomainError(
            f"reconciled information {i_eff} exceeds the Shannon limit {report.i_ab}")
    return i_eff - report.i_be_bound


def apply_sifting(rate: float) -> float:
    """Rate penalty of random independent quadrature choices: the bases
    agree half of the time, so every information rate is halved."""
    return rate / 2.0


SECURE = "secure"
INSECURE = "insecure"


def conditional_squeezing_check(k: Covariance2, n0: float = 1.0) -> str:
    """Sufficient security condition on second moments alone: the verdict
    is "secure" iff the conditional variance of B given A is below the
    vacuum variance (strictly; the boundary carries zero key rate)."""
    if not n0 > 0:
        raise DomainError(f"shot-noise unit must be positive, got {n0}")
    return SECURE if conditional_variance(k) < n0 else INSECURE


def _check_block_size(n: int) -> None:
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise DomainError(f"block size must be a positive integer, got {n!r}")
