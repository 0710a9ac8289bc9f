"""Machine-checkable certification of the entropy inequalities behind the
key-rate bounds.

Exact checks run on small discrete joint distributions, where every
Shannon quantity is an exact finite sum (the inequalities are
representation-independent, so the discrete surrogates certify the same
chain used for continuous variables). Statistical checks run estimators
on simulated attack data, with 3x the estimator's standard error as
tolerance.

Every report produced from valid inputs must hold; a failed report is a
bug or a broken tolerance, never an expected outcome.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numpy as np

from .errors import CapacityError, ConfigurationError, DomainError, UnphysicalInputError
from .estimators import (
    EntropyEstimate,
    SampleSet,
    conditional_entropy_estimate,
    estimate_covariance,
)
from .rates import (
    HeterodyneTransform,
    ProtocolKind,
    conditional_variance,
    gaussian_conditional_entropy,
    gaussian_entropy,
    heterodyne_covariance_transform,
    squeezed_rate_bound,
    vacuum_entropy,
)
from .simulator import (
    ATTACK_CATALOG,
    SQUEEZING_COUNTEREXAMPLE,
    ChannelModel,
    EprSource,
    SiftingMode,
    run_session,
)

#: absolute tolerance (bits) for exact discrete checks
EXACT_TOL = 1e-9

#: largest probability table accepted for exact enumeration
MAX_TABLE_ENTRIES = 1_000_000


@dataclass(frozen=True)
class InequalityReport:
    """One checked inequality lhs <= rhs, with slack = rhs - lhs."""

    identifier: str
    lhs: float
    rhs: float
    slack: float
    holds: bool
    tolerance: float = EXACT_TOL

    @classmethod
    def check(cls, identifier: str, lhs: float, rhs: float,
              tolerance: float = EXACT_TOL) -> "InequalityReport":
        slack = rhs - lhs
        return cls(identifier, lhs, rhs, slack, bool(slack >= -tolerance), tolerance)

    def as_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------------------
# exact discrete checks

@dataclass(frozen=True)
class DiscreteJoint:
    """Joint law of n Alice symbols and n Bob symbols.

    The table's first n axes index A_1..A_n, the last n axes B_1..B_n.
    """

    n: int
    table: np.ndarray

    def __post_init__(self):
        table = np.asarray(self.table, dtype=float)
        object.__setattr__(self, "table", table)
        if self.n < 1:
            raise ConfigurationError("need at least one pulse component")
        if table.ndim != 2 * self.n:
            raise ConfigurationError(
                f"table must have 2*n = {2 * self.n} axes, got {table.ndim}")
        if (table < 0).any():
            raise DomainError("probabilities must be non-negative")
        total = float(table.sum())
        if abs(total - 1.0) > 1e-12:
            raise DomainError(f"probabilities must sum to 1, got {total!r}")

    @property
    def alice_axes(self) -> tuple[int, ...]:
        return tuple(range(self.n))

    @property
    def bob_axes(self) -> tuple[int, ...]:
        return tuple(range(self.n, 2 * self.n))

    @classmethod
    def random(cls, n: int, alphabet: int, rng: np.random.Generator) -> "DiscreteJoint":
        """Flat-Dirichlet random table."""
        shape = (alphabet,) * (2 * n)
        flat = rng.gamma(1.0, 1.0, int(np.prod(shape)))
        return cls(n, (flat / flat.sum()).reshape(shape))

    @classmethod
    def product(cls, pulse_tables) -> "DiscreteJoint":
        """Independent pulses from per-pulse (a, b) tables."""
        tables = [np.asarray(t, dtype=float) for t in pulse_tables]
        n = len(tables)
        joint = tables[0]
        for t in tables[1:]:
            joint = np.tensordot(joint, t, axes=0)
        # axes currently ordered a1,b1,a2,b2,...; regroup to a1..an,b1..bn
        order = [2 * i for i in range(n)] + [2 * i + 1 for i in range(n)]
        return cls(n, np.transpose(joint, order))


def _entropy_bits(p: np.ndarray) -> float:
    p = p[p > 0]
    return float(-(p * np.log2(p)).sum())


def _marginal(j: DiscreteJoint, keep_axes) -> np.ndarray:
    drop = tuple(ax for ax in range(2 * j.n) if ax not in set(keep_axes))
    return j.table.sum(axis=drop) if drop else j.table


def joint_entropy(j: DiscreteJoint, axes) -> float:
    """Exact Shannon entropy (bits) of the marginal on the given axes."""
    return _entropy_bits(_marginal(j, axes).ravel())


def conditional_entropy(j: DiscreteJoint, target_axes, given_axes) -> float:
    """Exact H(target | given) = H(target, given) - H(given)."""
    target_axes = tuple(target_axes)
    given_axes = tuple(given_axes)
    return (joint_entropy(j, target_axes + given_axes)
            - joint_entropy(j, given_axes))


def _check_capacity(j: DiscreteJoint) -> None:
    if j.table.size > MAX_TABLE_ENTRIES:
        raise CapacityError(
            f"table has {j.table.size} entries; exact enumeration is capped "
            f"at {MAX_TABLE_ENTRIES}")


def check_subadditivity_chain(j: DiscreteJoint) -> list[InequalityReport]:
    """Certify that a joint attack cannot beat the per-pulse accounting:

    1. H(B_vec | A_vec) <= sum_i H(B_i | A_vec)
    2. H(B_i | A_vec) <= H(B_i | A_i) for each i
    3. therefore H(B_vec | A_vec) <= sum_i H(B_i | A_i)
    """
    _check_capacity(j)
    a_axes, b_axes = j.alice_axes, j.bob_axes
    h_joint = conditional_entropy(j, b_axes, a_axes)
    h_bi_given_all = [conditional_entropy(j, (b,), a_axes) for b in b_axes]
    h_bi_given_ai = [conditional_entropy(j, (b,), (a,))
                     for a, b in zip(a_axes, b_axes)]
    reports = [InequalityReport.check(
        "joint-conditional-subadditivity", h_joint, sum(h_bi_given_all))]
    reports += [
        InequalityReport.check(
            f"conditioning-cannot-increase-entropy-pulse-{i}", lhs, rhs)
        for i, (lhs, rhs) in enumerate(zip(h_bi_given_all, h_bi_given_ai))
    ]
    reports.append(InequalityReport.check(
        "individual-attack-conditional-bound", h_joint, sum(h_bi_given_ai)))
    return reports


def check_mixture_lemma(j: DiscreteJoint) -> InequalityReport:
    """Certify the block-averaging step: with (A, B) distributed as the
    uniform mixture of the per-pulse pairs, H(B_vec | A_vec) <= n * H(B | A)."""
    _check_capacity(j)
    shape = j.table.shape
    if len(set(shape[:j.n])) != 1 or len(set(shape[j.n:])) != 1:
        raise ConfigurationError(
            "mixture averaging needs one shared alphabet per side, "
            f"got shapes {shape}")
    pair = np.zeros(( shape[0], shape[j.n] ))
    for i in range(j.n):
        pair += _marginal(j, (i, j.n + i))
    pair /= j.n
    h_mixture_pair = (_entropy_bits(pair.ravel())
                      - _entropy_bits(pair.sum(axis=1)))
    h_joint = conditional_entropy(j, j.bob_axes, j.alice_axes)
    return InequalityReport.check(
        "mixture-individual-attack-bound", h_joint, j.n * h_mixture_pair)


def check_pure_state_entropic_sum(vq: float, vp: float,
                                  n0: float = 1.0) -> InequalityReport:
    """Entropic uncertainty of a pure Gaussian state's two quadratures:
    H(Q) + H(P) >= 2 * H0, with equality exactly for minimum-uncertainty
    marginals vq * vp = n0**2."""
    if not (vq > 0 and vp > 0):
        raise DomainError(f"variances must be positive, got ({vq}, {vp})")
    if vq * vp < n0 ** 2 * (1.0 - 1e-12):
        raise UnphysicalInputError(
            f"variance product {vq * vp:.6g} below the vacuum limit "
            f"{n0 ** 2:.6g}: no physical state has these marginals")
    return InequalityReport.check(
        "vacuum-entropic-uncertainty-sum",
        2.0 * vacuum_entropy(n0),
        gaussian_entropy(vq) + gaussian_entropy(vp),
    )


# ---------------------------------------------------------------------------
# statistical checks

def check_gaussian_dominance(s: SampleSet, k: int = 4,
                             identifier: str = "gaussian-conditional-dominance",
                             estimate: EntropyEstimate | None = None) -> InequalityReport:
    """Empirical H(B|A) cannot exceed the Gaussian conditional entropy of
    the sample covariance, up to 3x the estimator's standard error."""
    if len(s) < 10_000:
        raise DomainError(f"need at least 10000 samples, got {len(s)}")
    if estimate is None:
        estimate = conditional_entropy_estimate(s, k)
    bound = gaussian_conditional_entropy(estimate_covariance(s))
    return InequalityReport.check(identifier, estimate.value, bound,
                                  tolerance=3.0 * estimate.std_error)


# ---------------------------------------------------------------------------
# suites producing the verification manifest

def worst_of(reports: list[InequalityReport], identifier: str) -> InequalityReport:
    """Collapse a family of reports to its tightest member for the manifest."""
    worst = min(reports, key=lambda r: r.slack)
    return InequalityReport(identifier, worst.lhs, worst.rhs, worst.slack,
                            all(r.holds for r in reports), worst.tolerance)


def discrete_suite(seed: int = 0, trials: int = 10_000) -> list[InequalityReport]:
    """Exact checks: random joint laws across block sizes and alphabets,
    the equality and redundancy corner cases, and the pure-state entropic
    sum on a grid of variance pairs."""
    rng = np.random.default_rng(seed)
    reports: list[InequalityReport] = []

    combos = [(2, 2), (2, 3), (3, 2), (3, 3)]
    per_combo = max(trials // len(combos), 1)
    for n, alphabet in combos:
        chain: list[InequalityReport] = []
        mixture: list[InequalityReport] = []
        for _ in range(per_combo):
            j = DiscreteJoint.random(n, alphabet, rng)
            chain.extend(check_subadditivity_chain(j))
            mixture.append(check_mixture_lemma(j))
        reports.append(worst_of(
            chain, f"subadditivity-chain[n={n},alphabet={alphabet},trials={per_combo}]"))
        reports.append(worst_of(
            mixture, f"mixture-bound[n={n},alphabet={alphabet},trials={per_combo}]"))

    # independent pulses: the chain collapses to equalities
    pulse = np.array([[0.4, 0.1], [0.2, 0.3]])
    product = DiscreteJoint.product([pulse, pulse])
    equalities = check_subadditivity_chain(product)
    reports.append(worst_of(equalities, "independent-pulses-chain"))
    slack_cap = max(abs(r.slack) for r in equalities)
    reports.append(InequalityReport.check(
        "independent-pulses-equality", slack_cap, EXACT_TOL, tolerance=0.0))

    # redundant block: B1 = B2 = noisy copy of A1; the per-pulse accounting
    # overcounts, leaving strictly positive slack in the combined bound
    reports.append(InequalityReport.check(
        "redundant-block-strict-slack", 0.25,
        check_subadditivity_chain(_redundant_block())[-1].slack))

    # pure-state entropic sum: equality on the minimum-uncertainty manifold
    grid = np.exp(rng.uniform(np.log(0.05), np.log(20.0), 1000))
    minimum = [check_pure_state_entropic_sum(vq, 1.0 / vq) for vq in grid]
    reports.append(worst_of(minimum, "entropic-sum-minimum-uncertainty"))
    worst_eq = max(abs(r.slack) for r in minimum)
    reports.append(InequalityReport.check(
        "entropic-sum-equality-on-minimum-uncertainty", worst_eq, EXACT_TOL,
        tolerance=0.0))
    thermal = [check_pure_state_entropic_sum(vq, 2.0 / vq + 0.5) for vq in grid]
    reports.append(worst_of(thermal, "entropic-sum-above-minimum-uncertainty"))
    return reports


def _redundant_block() -> DiscreteJoint:
    table = np.zeros((2, 2, 2, 2))
    flip = 0.1
    for a1 in (0, 1):
        for a2 in (0, 1):
            for b in (0, 1):
                p_b = 1.0 - flip if b == a1 else flip
                table[a1, a2, b, b] = 0.25 * p_b
    return DiscreteJoint(2, table)


def statistical_suite(seed: int = 0, pulses: int = 1_000_000,
                      k: int = 4) -> list[InequalityReport]:
    """Estimator-based checks on the attack catalog: Gaussian dominance
    for every noise shape, saturation for the Gaussian shape, strictness
    and the conditional-squeezing counterexample for the displacement
    shape, the conservativeness of the covariance bound, and the
    heterodyne transform cross-check."""
    reports: list[InequalityReport] = []
    names = ["gaussian", "mixture", "uniform", "displacement"]
    for offset, name in enumerate(names):
        cfg = ATTACK_CATALOG[name]
        record = run_session(cfg.source, cfg.channel, ProtocolKind.SQUEEZED_HOMODYNE,
                             n=1, l=pulses, sifting_mode=SiftingMode.QUANTUM_MEMORY,
                             rng_seed=seed + offset)
        samples = record.samples()
        estimate = conditional_entropy_estimate(samples, k)
        k_hat = estimate_covariance(samples)
        h_gauss = gaussian_conditional_entropy(k_hat)
        tol = 3.0 * estimate.std_error

        reports.append(check_gaussian_dominance(
            samples, k, f"gaussian-conditional-dominance[{name}]", estimate))

        if name == "gaussian":
            # Gaussian attacks saturate the bound: slack vanishes within error
            reports.append(InequalityReport.check(
                "gaussian-attack-saturation", abs(h_gauss - estimate.value), tol,
                tolerance=0.0))
        if name == SQUEEZING_COUNTEREXAMPLE:
            reports.extend(_counterexample_reports(samples, estimate, cfg.source))

        # the covariance-only rate bound never exceeds the entropic rate
        entropic_rate = 2.0 * (vacuum_entropy(cfg.source.n0) - estimate.value)
        covariance_rate = squeezed_rate_bound(k_hat, 1, cfg.source.n0).delta_i_min_per_pulse
        reports.append(InequalityReport.check(
            f"covariance-bound-is-conservative[{name}]",
            covariance_rate, entropic_rate, tolerance=2.0 * tol))

    reports.extend(heterodyne_transform_crosscheck(seed=seed + 100,
                                                   pulses=10 * pulses))
    return reports


def _counterexample_reports(samples: SampleSet, estimate: EntropyEstimate,
                            source: EprSource) -> list[InequalityReport]:
    """The displacement attack destroys conditional squeezing while the
    conditional entropy stays below the vacuum entropy."""
    n0 = source.n0
    cond_var = conditional_variance(estimate_covariance(samples))
    tol = 3.0 * estimate.std_error
    return [
        InequalityReport.check(
            "counterexample-conditional-variance-at-least-vacuum",
            n0, cond_var, tolerance=0.0),
        InequalityReport.check(
            "counterexample-conditional-entropy-below-vacuum",
            estimate.value + tol, vacuum_entropy(n0), tolerance=0.0),
    ]


def heterodyne_transform_crosscheck(seed: int = 0, pulses: int = 10_000_000,
                                    v: float = 20.0) -> list[InequalityReport]:
    """Simulate a heterodyne session on a lossless channel, where Alice's
    pre-beam-splitter variance is the source variance itself, and record
    which covariance transform reconstructs it.

    The beam-splitter inversion matches the simulated physics; the printed
    transform reconstructs one shot-noise unit below it, and that deficit
    is recorded as its own check.
    """
    source = EprSource(v)
    record = run_session(source, ChannelModel(1.0, 0.0),
                         ProtocolKind.COHERENT_HETERODYNE, n=1, l=pulses,
                         sifting_mode=SiftingMode.QUANTUM_MEMORY, rng_seed=seed)
    k_hat = estimate_covariance(record.samples())
    # 5 standard errors on the measured variance, propagated through the
    # transform's factor 2
    tolerance = 5.0 * 2.0 * k_hat.var_a * math.sqrt(2.0 / pulses)
    transformed = heterodyne_covariance_transform(
        k_hat, source.n0, HeterodyneTransform.BEAMSPLITTER)
    # the printed transform's variance entry, computed arithmetically:
    # constructing its full matrix fails positive semidefiniteness on
    # exactly these (lossless) statistics, which the last report records
    printed_var = 2.0 * (k_hat.var_a - source.n0)
    return [
        InequalityReport.check(
            "presplit-variance-matches-beamsplitter-transform",
            abs(transformed.var_a - v), tolerance, tolerance=0.0),
        InequalityReport.check(
            "printed-transform-reconstructs-one-unit-below-physical",
            abs(printed_var - (v - source.n0)), tolerance, tolerance=0.0),
        InequalityReport.check(
            "printed-transform-violates-psd-on-lossless-statistics",
            printed_var * k_hat.var_b, transformed.cov_ab ** 2, tolerance=0.0),
    ]


def run_suites(scope: str = "all", seed: int = 0, trials: int = 10_000,
               pulses: int = 1_000_000) -> list[InequalityReport]:
    if scope not in ("discrete", "statistical", "all"):
        raise ConfigurationError(f"unknown verification scope {scope!r}")
    reports: list[InequalityReport] = []
    if scope in ("discrete", "all"):
        reports.extend(discrete_suite(seed, trials))
    if scope in ("statistical", "all"):
        reports.extend(statistical_suite(seed, pulses))
    return reports


def manifest(reports: list[InequalityReport], scope: str, seed: int) -> dict:
    """Machine-readable verification manifest."""
    return {
        "tool": "cvqkd-verify",
        "scope": scope,
        "seed": seed,
        "all_hold": all(r.holds for r in reports),
        "reports": [r.as_dict() for r in reports],
    }
