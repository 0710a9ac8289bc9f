"""Monte Carlo generation of Alice/Bob quadrature data.

Models the entanglement-based picture: an EPR source's twin beams go to
Alice (homodyne, or heterodyne through a 50:50 splitter) and through a
lossy, noisy channel to Bob. Eve appears only through the classical
channel she induces on the (A, B) statistics; noise shapes beyond
Gaussian let her attack carry non-Gaussian structure at identical second
moments.

Randomness: a counter-based Philox generator keyed by the session seed,
split into one substream per chunk of whole blocks (~2**18 pulses), so
generation is reproducible and chunks could run on parallel workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .estimators import SampleSet
from .rates import Covariance2, ProtocolKind

#: target pulses per RNG substream; chunks always hold whole blocks
CHUNK_PULSES = 1 << 18

#: relative tolerance when matching a noise shape's variance to the channel
SHAPE_RTOL = 1e-9

Q, P = 0, 1  # quadrature label codes used in record arrays
LABEL_CHARS = ("q", "p")


# ---------------------------------------------------------------------------
# noise shapes

@dataclass(frozen=True)
class GaussianNoise:
    """Gaussian channel noise; adapts to whatever variance the channel
    declares, and is the shape the covariance bounds implicitly assume."""

    kind = "gaussian"

    @property
    def declared_variance(self):
        return None

    def draw(self, size: int, rng: np.random.Generator, variance: float) -> np.ndarray:
        return rng.normal(0.0, math.sqrt(variance), size)


@dataclass(frozen=True)
class TwoComponentMixture:
    """Zero-mean mixture of two Gaussians with distinct spreads."""

    weights: tuple[float, float]
    variances: tuple[float, float]
    kind = "mixture"

    def __post_init__(self):
        w1, w2 = self.weights
        if w1 < 0 or w2 < 0 or abs(w1 + w2 - 1.0) > 1e-12:
            raise ConfigurationError("mixture weights must be non-negative and sum to 1")
        if min(self.variances) < 0:
            raise ConfigurationError("mixture component variances must be non-negative")

    @property
    def declared_variance(self) -> float:
        return (self.weights[0] * self.variances[0]
                + self.weights[1] * self.variances[1])

    @classmethod
    def matching(cls, variance: float, weight: float = 0.5,
                 ratio: float = 9.0) -> "TwoComponentMixture":
        """Components with spread ratio `ratio` mixed to hit `variance`."""
        v1 = variance / (weight + (1.0 - weight) * ratio)
        return cls((weight, 1.0 - weight), (v1, ratio * v1))

    def draw(self, size, rng, variance):
        pick = rng.random(size) < self.weights[0]
        std = np.where(pick, math.sqrt(self.variances[0]), math.sqrt(self.variances[1]))
        return rng.normal(0.0, 1.0, size) * std


@dataclass(frozen=True)
class UniformNoise:
    """Uniform noise on [-halfwidth, halfwidth]."""

    halfwidth: float
    kind = "uniform"

    def __post_init__(self):
        if self.halfwidth <= 0:
            raise ConfigurationError("halfwidth must be positive")

    @property
    def declared_variance(self) -> float:
        return self.halfwidth ** 2 / 3.0

    @classmethod
    def matching(cls, variance: float) -> "UniformNoise":
        return cls(math.sqrt(3.0 * variance))

    def draw(self, size, rng, variance):
        return rng.uniform(-self.halfwidth, self.halfwidth, size)


@dataclass(frozen=True)
class DiscreteDisplacement:
    """Noise of +magnitude or -magnitude (probability/2 each), else 0.

    Maximally structured: the second moment matches a Gaussian attack
    while the conditional entropy it induces stays far below the Gaussian
    maximum.
    """

    magnitude: float
    probability: float
    kind = "displacement"

    def __post_init__(self):
        if self.magnitude <= 0:
            raise ConfigurationError("displacement magnitude must be positive")
        if not 0.0 < self.probability <= 1.0:
            raise ConfigurationError("displacement probability must be in (0, 1]")

    @property
    def declared_variance(self) -> float:
        return self.probability * self.magnitude ** 2

    @classmethod
    def matching(cls, variance: float, probability: float = 1.0) -> "DiscreteDisplacement":
        return cls(math.sqrt(variance / probability), probability)

    def draw(self, size, rng, variance):
        u = rng.random(size)
        return self.magnitude * (np.sign(u - 0.5) * (np.abs(u - 0.5) < self.probability / 2.0))


NOISE_SHAPES = (GaussianNoise, TwoComponentMixture, UniformNoise, DiscreteDisplacement)


# ---------------------------------------------------------------------------
# source and channel

@dataclass(frozen=True)
class EprSource:
    """Two-mode squeezed vacuum: each half has quadrature variance v, the
    halves are correlated +sqrt(v**2 - n0**2) in q and the opposite in p.
    v = n0 is the vacuum (no entanglement)."""

    v: float
    n0: float = 1.0

    def __post_init__(self):
        if not self.n0 > 0:
            raise ConfigurationError(f"shot-noise unit must be positive, got {self.n0}")
        if self.v < self.n0:
            raise ConfigurationError(
                f"source variance {self.v} below the vacuum variance {self.n0}")

    @property
    def cross_correlation(self) -> float:
        return math.sqrt(self.v ** 2 - self.n0 ** 2)


@dataclass(frozen=True)
class ChannelModel:
    """Transmission t, excess noise eps (referred to the channel input, so
    it appears as t*eps*n0 at Bob), and the distribution of the added
    noise. rho_block correlates the Gaussian noise of the pulses inside
    one block, giving a minimal coherent-attack structure."""

    t: float
    eps: float = 0.0
    shape: object = field(default_factory=GaussianNoise)
    rho_block: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.t <= 1.0:
            raise ConfigurationError(f"transmission must be in (0, 1], got {self.t}")
        if self.eps < 0:
            raise ConfigurationError(f"excess noise must be >= 0, got {self.eps}")
        if not isinstance(self.shape, NOISE_SHAPES):
            raise ConfigurationError(f"unknown noise shape {self.shape!r}")
        if not 0.0 <= self.rho_block < 1.0:
            raise ConfigurationError(f"rho_block must be in [0, 1), got {self.rho_block}")
        if self.rho_block and not isinstance(self.shape, GaussianNoise):
            raise ConfigurationError(
                "intra-block noise correlation is only modeled for Gaussian noise")

    def noise_variance(self, n0: float = 1.0) -> float:
        """Total additive noise variance at Bob: vacuum replacing the lost
        fraction plus the transmitted excess noise."""
        return (1.0 - self.t) * n0 + self.t * self.eps * n0

    def validate_shape(self, n0: float = 1.0) -> None:
        declared = self.shape.declared_variance
        if declared is None:
            return
        target = self.noise_variance(n0)
        if abs(declared - target) > SHAPE_RTOL * max(target, 1.0):
            raise ConfigurationError(
                f"noise shape variance {declared:.6g} does not match the channel's "
                f"(1-t)*n0 + t*eps*n0 = {target:.6g}")


class SiftingMode:
    """How Bob's quadrature choice relates to Alice's."""

    RANDOM_BASIS = "random_basis"
    QUANTUM_MEMORY = "quantum_memory"
    ALL = (RANDOM_BASIS, QUANTUM_MEMORY)


# ---------------------------------------------------------------------------
# elementary sampling operations

def simulate_epr_pulse(src: EprSource, rng: np.random.Generator, size=None):
    """Draw quadrature outcomes (qa, pa, qb0, pb0) of the twin beams before
    the channel. Scalars for size=None, arrays otherwise."""
    m = 1 if size is None else size
    sv = math.sqrt(src.v)
    gain = src.cross_correlation / sv
    residual = src.n0 / sv
    x1, x2, y1, y2 = rng.normal(0.0, 1.0, (4, m))
    qa = sv * x1
    qb0 = gain * x1 + residual * x2
    pa = sv * y1
    pb0 = -gain * y1 + residual * y2
    if size is None:
        return qa[0], pa[0], qb0[0], pb0[0]
    return qa, pa, qb0, pb0


def apply_attack(qb0, pb0, ch: ChannelModel, rng: np.random.Generator,
                 n0: float = 1.0):
    """Send Bob's beam through the channel: attenuate by sqrt(t) and add
    noise drawn from the channel's shape, independently per quadrature."""
    ch.validate_shape(n0)
    qb0 = np.asarray(qb0, dtype=float)
    pb0 = np.asarray(pb0, dtype=float)
    var = ch.noise_variance(n0)
    root_t = math.sqrt(ch.t)
    qb = root_t * qb0 + ch.shape.draw(qb0.shape[0] if qb0.ndim else 1, rng, var).reshape(qb0.shape)
    pb = root_t * pb0 + ch.shape.draw(pb0.shape[0] if pb0.ndim else 1, rng, var).reshape(pb0.shape)
    return qb, pb


def measure_alice(qa, pa, protocol: ProtocolKind, rng: np.random.Generator,
                  n0: float = 1.0, labels=None):
    """Alice's detection.

    Homodyne: measure the labeled quadrature exactly; returns
    (a_measured, labels), drawing uniform labels when none are given.
    Heterodyne: measure both through the 50:50 splitter, each picking up
    an independent vacuum contribution, (value + vacuum)/sqrt(2); returns
    (qa_measured, pa_measured).
    """
    qa = np.atleast_1d(np.asarray(qa, dtype=float))
    pa = np.atleast_1d(np.asarray(pa, dtype=float))
    if protocol is ProtocolKind.SQUEEZED_HOMODYNE:
        if labels is None:
            labels = rng.integers(0, 2, qa.shape[0]).astype(np.uint8)
        return np.where(labels == Q, qa, pa), labels
    root_half = math.sqrt(0.5)
    vac_std = math.sqrt(n0)
    qa_m = (qa + rng.normal(0.0, vac_std, qa.shape)) * root_half
    pa_m = (pa - rng.normal(0.0, vac_std, pa.shape)) * root_half
    return qa_m, pa_m


# ---------------------------------------------------------------------------
# sessions

@dataclass(frozen=True)
class BlockRecord:
    """l blocks of n pulses: measured values, quadrature labels (0=q, 1=p)
    and sifting flags, plus the configuration that generated them. Pulses
    are stored block-major: pulse j of block i sits at index i*n + j."""

    n: int
    l: int
    protocol: ProtocolKind
    sifting_mode: str
    seed: int
    source: EprSource
    channel: ChannelModel
    a: np.ndarray
    b: np.ndarray
    label_a: np.ndarray
    label_b: np.ndarray
    kept: np.ndarray

    def __post_init__(self):
        total = self.n * self.l
        for arr in (self.a, self.b, self.label_a, self.label_b, self.kept):
            if len(arr) != total:
                raise ConfigurationError("record arrays must hold n*l entries")

    @property
    def total_pulses(self) -> int:
        return self.n * self.l

    @property
    def kept_fraction(self) -> float:
        return float(self.kept.mean())

    def samples(self, label: str | None = None) -> SampleSet:
        """Kept pulses as a SampleSet.

        label 'q' or 'p' selects one quadrature. label None pools both by
        flipping the sign of Bob's p values (the EPR correlation is
        anti-symmetric in p, so the flip makes both labels share one
        joint law).
        """
        if label is None:
            keep = self.kept
            sign = np.where(self.label_b == P, -1.0, 1.0)
            return SampleSet(self.a[keep], (sign * self.b)[keep], "q")
        code = LABEL_CHARS.index(label)
        keep = self.kept & (self.label_b == code)
        return SampleSet(self.a[keep], self.b[keep], label)


def run_session(src: EprSource, ch: ChannelModel, protocol: ProtocolKind,
                n: int, l: int, sifting_mode: str = SiftingMode.RANDOM_BASIS,
                rng_seed: int = 0) -> BlockRecord:
    """Generate l blocks of n pulses. Deterministic for a given seed."""
    if n < 1 or l < 1:
        raise ConfigurationError(f"need n >= 1 and l >= 1, got n={n}, l={l}")
    if sifting_mode not in SiftingMode.ALL:
        raise ConfigurationError(f"unknown sifting mode {sifting_mode!r}")
    ch.validate_shape(src.n0)

    blocks_per_chunk = max(1, CHUNK_PULSES // n)
    master = np.random.Philox(rng_seed)
    parts = []
    for chunk, start in enumerate(range(0, l, blocks_per_chunk)):
        blocks = min(blocks_per_chunk, l - start)
        rng = np.random.Generator(master.jumped(chunk))
        parts.append(_generate_chunk(src, ch, protocol, n, blocks, sifting_mode, rng))

    a, b, label_a, label_b, kept = (np.concatenate(cols) for cols in zip(*parts))
    return BlockRecord(n=n, l=l, protocol=protocol, sifting_mode=sifting_mode,
                       seed=rng_seed, source=src, channel=ch,
                       a=a, b=b, label_a=label_a, label_b=label_b, kept=kept)


def _generate_chunk(src, ch, protocol, n, blocks, sifting_mode, rng):
    m = n * blocks
    qa, pa, qb0, pb0 = simulate_epr_pulse(src, rng, size=m)

    label_a = rng.integers(0, 2, m).astype(np.uint8)
    if sifting_mode == SiftingMode.RANDOM_BASIS:
        label_b = rng.integers(0, 2, m).astype(np.uint8)
    else:
        label_b = label_a.copy()
    kept = label_a == label_b

    var = ch.noise_variance(src.n0)
    root_t = math.sqrt(ch.t)
    if ch.rho_block > 0.0 and n > 1:
        qb = root_t * qb0 + _block_correlated_noise(var, ch.rho_block, n, blocks, rng)
        pb = root_t * pb0 + _block_correlated_noise(var, ch.rho_block, n, blocks, rng)
    else:
        qb = root_t * qb0 + ch.shape.draw(m, rng, var)
        pb = root_t * pb0 + ch.shape.draw(m, rng, var)
    b = np.where(label_b == Q, qb, pb)

    if protocol is ProtocolKind.SQUEEZED_HOMODYNE:
        a, _ = measure_alice(qa, pa, protocol, rng, src.n0, labels=label_a)
    else:
        qa_m, pa_m = measure_alice(qa, pa, protocol, rng, src.n0)
        a = np.where(label_a == Q, qa_m, pa_m)
    return a, b, label_a, label_b, kept


def _block_correlated_noise(var, rho, n, blocks, rng):
    """Exchangeable within-block correlation: every pulse's noise shares a
    common block component with weight sqrt(rho)."""
    common = rng.normal(0.0, 1.0, blocks)
    private = rng.normal(0.0, 1.0, n * blocks)
    mixed = (math.sqrt(rho) * np.repeat(common, n)
             + math.sqrt(1.0 - rho) * private)
    return math.sqrt(var) * mixed


def analytic_covariance(src: EprSource, ch: ChannelModel,
                        protocol: ProtocolKind) -> Covariance2:
    """Exact second moments of the kept (sign-pooled) session data, the
    closed-form oracle for the Monte Carlo pipeline. Independent of the
    noise shape by construction."""
    n0 = src.n0
    var_b = ch.t * src.v + (1.0 - ch.t) * n0 + ch.t * ch.eps * n0
    cov = math.sqrt(ch.t) * src.cross_correlation
    if protocol is ProtocolKind.SQUEEZED_HOMODYNE:
        return Covariance2(src.v, var_b, cov)
    return Covariance2((src.v + n0) / 2.0, var_b, cov / math.sqrt(2.0))


# ---------------------------------------------------------------------------
# attack catalog

@dataclass(frozen=True)
class AttackConfig:
    """A named source/channel pair used by the verification suite."""

    name: str
    source: EprSource
    channel: ChannelModel
    note: str = ""


def _catalog() -> dict[str, AttackConfig]:
    v = 20.0
    # noise-only channel (t = 1) with two shot-noise units of excess noise:
    # every shape below carries exactly the same second moments
    t, eps = 1.0, 2.0
    var = (1.0 - t) + t * eps
    entries = [
        AttackConfig("gaussian", EprSource(v), ChannelModel(t, eps),
                     "saturates the Gaussian bounds"),
        AttackConfig("mixture", EprSource(v),
                     ChannelModel(t, eps, TwoComponentMixture.matching(var)),
                     "two-spread Gaussian mixture at matched moments"),
        AttackConfig("uniform", EprSource(v),
                     ChannelModel(t, eps, UniformNoise.matching(var)),
                     "uniform noise at matched moments"),
        AttackConfig("displacement", EprSource(v),
                     ChannelModel(t, eps, DiscreteDisplacement.matching(var)),
                     "destroys conditional squeezing but not entropic squeezing"),
        AttackConfig("gaussian-lossy", EprSource(v), ChannelModel(0.5, 0.0),
                     "3 dB loss, no excess noise"),
    ]
    return {cfg.name: cfg for cfg in entries}


ATTACK_CATALOG = _catalog()

#: the catalogued attack exhibiting conditional variance above the vacuum
#: while the conditional entropy stays below the vacuum entropy
SQUEEZING_COUNTEREXAMPLE = "displacement"
