"""Command-line front end.

Subcommands: ``simulate`` (generate a session record), ``rate`` (key-rate
report from a record or covariance literal), ``verify`` (inequality
certification manifest), ``sweep`` (rate tables over a channel
parameter).

Experiments are configured by a JSON config file (``--config``) whose
keys match the flags; flags win over the file. All randomness flows from
the single seed, outputs carry no timestamps, and reruns with the same
configuration are byte-identical. Relative output paths land in
``$CVQKD_OUT_DIR`` when that variable is set.

Exit status: 0 success, 2 configuration or domain error, 3 parse error,
4 capacity error, 5 verification failure.
"""

from __future__ import annotations

import dataclasses
import json
import os
import sys
from pathlib import Path

import click

from . import records
from .errors import (
    CapacityError,
    ConfigurationError,
    CvqkdError,
    DomainError,
    InconsistentStatisticsError,
    ParseError,
)
from .estimators import estimate_covariance
from .rates import (
    Covariance2,
    HeterodyneTransform,
    ProtocolKind,
    conditional_squeezing_check,
    rate_bound,
)
from .simulator import (
    ChannelModel,
    DiscreteDisplacement,
    EprSource,
    GaussianNoise,
    SiftingMode,
    TwoComponentMixture,
    UniformNoise,
    analytic_covariance,
    run_session,
)
from .verify import manifest as build_manifest
from .verify import run_suites

EXIT_CONFIG = 2
EXIT_PARSE = 3
EXIT_CAPACITY = 4
EXIT_VERIFY = 5

PROTOCOL_NAMES = [p.value for p in ProtocolKind]
TRANSFORM_NAMES = [t.value for t in HeterodyneTransform]


@dataclasses.dataclass
class ExperimentConfig:
    """One reproducible experiment: source, channel, blocks, seed."""

    protocol: str = ProtocolKind.SQUEEZED_HOMODYNE.value
    v: float = 20.0
    t: float = 1.0
    eps: float = 0.0
    shape: str = "gaussian"
    rho_block: float = 0.0
    n: int = 1
    l: int = 100_000
    sifting: str = SiftingMode.RANDOM_BASIS
    seed: int = 0
    beta: float = 1.0
    n0: float = 1.0
    out: str | None = None
    format: str = "csv"

    def __post_init__(self):
        if self.format not in records.FORMATS:
            raise ConfigurationError(f"unknown record format {self.format!r}")
        if self.protocol not in PROTOCOL_NAMES:
            raise ConfigurationError(f"unknown protocol {self.protocol!r}")
        if not 0.0 <= self.beta <= 1.0:
            raise ConfigurationError(
                f"reconciliation efficiency must be in [0, 1], got {self.beta}")
        for name in ("n", "l", "seed"):
            value = getattr(self, name)
            if not float(value).is_integer():
                raise ConfigurationError(f"{name} must be an integer, got {value}")
            setattr(self, name, int(value))

    def source(self) -> EprSource:
        return EprSource(self.v, self.n0)

    def channel(self) -> ChannelModel:
        noise_var = (1.0 - self.t) * self.n0 + self.t * self.eps * self.n0
        return ChannelModel(self.t, self.eps,
                            _resolve_shape(self.shape, noise_var), self.rho_block)

    def protocol_kind(self) -> ProtocolKind:
        return ProtocolKind(self.protocol)


CONFIG_FIELDS = {f.name for f in dataclasses.fields(ExperimentConfig)}

SWEEP_PARAMS = ("t", "eps", "v", "beta")


@dataclasses.dataclass(frozen=True)
class SweepSpec:
    """A grid over one channel parameter, everything else fixed."""

    param: str
    start: float
    stop: float
    steps: int
    base: ExperimentConfig

    def __post_init__(self):
        if self.param not in SWEEP_PARAMS:
            raise ConfigurationError(f"cannot sweep {self.param!r}; "
                                     f"choose one of {', '.join(SWEEP_PARAMS)}")
        if self.steps < 2:
            raise ConfigurationError(f"need at least 2 steps, got {self.steps}")

    def grid(self) -> list[float]:
        return [self.start + (self.stop - self.start) * i / (self.steps - 1)
                for i in range(self.steps)]

    def point(self, value: float) -> tuple[ExperimentConfig, float]:
        """The experiment at one grid value plus the beta to apply."""
        settings = dataclasses.asdict(self.base)
        beta = settings.pop("beta")
        if self.param == "beta":
            beta = value
        else:
            settings[self.param] = value
        try:
            return ExperimentConfig(**settings, beta=beta), beta
        except ConfigurationError as exc:
            raise ConfigurationError(f"{self.param}={value:g}: {exc}") from exc


def _resolve_shape(spec: str, noise_variance: float):
    """Turn a shape spec into a noise-shape object.

    Bare names (gaussian, mixture, uniform, displacement) are fitted to
    the channel's noise variance; a parameterized spec such as
    ``displacement:magnitude=1.4,probability=1.0`` is taken literally and
    must match the channel.
    """
    if ":" in spec:
        return records.shape_from_string(spec)
    if spec == "gaussian":
        return GaussianNoise()
    if noise_variance <= 0:
        raise ConfigurationError(
            f"shape {spec!r} needs a positive channel noise variance; "
            "this channel adds no noise")
    if spec == "mixture":
        return TwoComponentMixture.matching(noise_variance)
    if spec == "uniform":
        return UniformNoise.matching(noise_variance)
    if spec == "displacement":
        return DiscreteDisplacement.matching(noise_variance)
    raise ConfigurationError(f"unknown noise shape {spec!r}")


def load_config(path: str | None, overrides: dict) -> ExperimentConfig:
    """Config file values, overridden by any flag the user actually set."""
    values: dict = {}
    if path is not None:
        try:
            values = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ParseError(f"cannot read config {path}: {exc}") from exc
        unknown = set(values) - CONFIG_FIELDS
        if unknown:
            raise ConfigurationError(
                f"unknown config keys: {', '.join(sorted(unknown))}")
    values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return ExperimentConfig(**values)
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from exc


def resolve_out(path: str) -> Path:
    base = os.environ.get("CVQKD_OUT_DIR")
    p = Path(path)
    if base and not p.is_absolute():
        return Path(base) / p
    return p


def _exit_code(exc: CvqkdError) -> int:
    if isinstance(exc, ParseError):
        return EXIT_PARSE
    if isinstance(exc, CapacityError):
        return EXIT_CAPACITY
    return EXIT_CONFIG


class _Group(click.Group):
    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except CvqkdError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(_exit_code(exc))


@click.group(cls=_Group, context_settings={"help_option_names": ["-h", "--help"]})
def main():
    """Security analysis for continuous-variable QKD."""


_config_options = [
    click.option("--config", type=click.Path(), default=None,
                 help="JSON config file; flags override its values."),
    click.option("--protocol", type=click.Choice(PROTOCOL_NAMES), default=None),
    click.option("--v", type=float, default=None,
                 help="Source quadrature variance (shot-noise units)."),
    click.option("--t", type=float, default=None, help="Channel transmission."),
    click.option("--eps", type=float, default=None,
                 help="Excess noise at the channel input (shot-noise units)."),
    click.option("--shape", default=None,
                 help="Noise shape: gaussian, mixture, uniform, displacement, "
                      "or a parameterized spec like displacement:magnitude=1.4,probability=1.0."),
    click.option("--rho-block", "rho_block", type=float, default=None,
                 help="Intra-block noise correlation (Gaussian shape only)."),
    click.option("--n", type=int, default=None, help="Pulses per block."),
    click.option("--l", type=int, default=None, help="Number of blocks."),
    click.option("--sifting", type=click.Choice(SiftingMode.ALL), default=None),
    click.option("--seed", type=int, default=None),
    click.option("--beta", type=float, default=None,
                 help="Reconciliation efficiency in [0, 1]."),
    click.option("--n0", type=float, default=None, help="Shot-noise unit."),
]


def config_options(cmd):
    for option in reversed(_config_options):
        cmd = option(cmd)
    return cmd


@main.command()
@config_options
@click.option("--out", type=click.Path(), default=None, help="Record file to write.")
@click.option("--format", "fmt", type=click.Choice(records.FORMATS), default=None)
def simulate(config, out, fmt, **overrides):
    """Run a session and write the pulse record."""
    cfg = load_config(config, {**overrides, "out": out, "format": fmt})
    if cfg.out is None:
        raise ConfigurationError("no output path: pass --out or set 'out' in the config")
    record = run_session(cfg.source(), cfg.channel(), cfg.protocol_kind(),
                         cfg.n, cfg.l, cfg.sifting, cfg.seed)
    path = resolve_out(cfg.out)
    records.write_record(record, path, cfg.format)
    click.echo(f"wrote {path} ({cfg.format}, {record.total_pulses} pulses)")
    click.echo(f"kept {int(record.kept.sum())} pulses "
               f"(fraction {record.kept_fraction:.4f}, sifting {cfg.sifting})")
    k = estimate_covariance(record.samples())
    click.echo(f"sample covariance (pooled): var_a={k.var_a:.6g} "
               f"var_b={k.var_b:.6g} cov_ab={k.cov_ab:.6g}")
    ka = analytic_covariance(cfg.source(), cfg.channel(), cfg.protocol_kind())
    click.echo(f"analytic covariance:        var_a={ka.var_a:.6g} "
               f"var_b={ka.var_b:.6g} cov_ab={ka.cov_ab:.6g}")
    # full-precision literal: feeding it to `rate --cov` reproduces the
    # record-based rate exactly
    click.echo(f"covariance literal: {k.var_a!r},{k.var_b!r},{k.cov_ab!r}")


@main.command()
@click.option("--record", "record_path", type=click.Path(), default=None,
              help="Session record file to analyze.")
@click.option("--cov", default=None,
              help="Covariance literal 'var_a,var_b,cov_ab' instead of a record.")
@click.option("--protocol", type=click.Choice(PROTOCOL_NAMES), default=None,
              help="Required with --cov; read from the record otherwise.")
@click.option("--beta", type=float, default=1.0,
              help="Reconciliation efficiency in [0, 1].")
@click.option("--n", type=int, default=None,
              help="Block size for the block rate (record's n by default).")
@click.option("--n0", type=float, default=None)
@click.option("--transform", type=click.Choice(TRANSFORM_NAMES),
              default=HeterodyneTransform.PRINTED.value,
              help="Heterodyne pre-beam-splitter variance convention.")
@click.option("--format", "fmt", type=click.Choice(["text", "json"]), default="text")
@click.option("--out", type=click.Path(), default=None,
              help="Also write the JSON report here.")
def rate(record_path, cov, protocol, beta, n, n0, transform, fmt, out):
    """Key-rate lower bound from a record or a covariance literal."""
    if (record_path is None) == (cov is None):
        raise ConfigurationError("give exactly one of --record or --cov")
    if not 0.0 <= beta <= 1.0:
        raise ConfigurationError(f"beta must be in [0, 1], got {beta}")

    sifted = False
    sample_count = None
    if record_path is not None:
        record = records.read_record(record_path)
        kind = record.protocol if protocol is None else ProtocolKind(protocol)
        shot = record.source.n0 if n0 is None else n0
        block = record.n if n is None else n
        samples = record.samples()
        sample_count = len(samples)
        k = estimate_covariance(samples)
        sifted = record.sifting_mode == SiftingMode.RANDOM_BASIS
    else:
        if protocol is None:
            raise ConfigurationError("--cov needs --protocol")
        kind = ProtocolKind(protocol)
        shot = 1.0 if n0 is None else n0
        block = 1 if n is None else n
        k = _parse_cov(cov)

    try:
        report = rate_bound(k, block, kind, shot, HeterodyneTransform(transform))
    except InconsistentStatisticsError as exc:
        raise InconsistentStatisticsError(
            f"{exc} (the printed variance convention rejects these statistics; "
            f"try --transform beamsplitter)") from exc
    effective = beta * report.i_ab - report.i_be_bound
    if sifted:
        report = report.with_sifting()
        effective /= 2.0
    verdict = "secure key obtainable" if effective > 0 else "no secure key"

    payload = {
        "protocol": kind.value,
        "covariance": {"var_a": k.var_a, "var_b": k.var_b, "cov_ab": k.cov_ab},
        "sample_count": sample_count,
        "n0": shot,
        "block_size": block,
        "cond_var_b_given_a": report.cond_var_b_given_a,
        "cond_var_b_given_a_prime": report.cond_var_b_given_a_prime,
        "conditional_squeezing": conditional_squeezing_check(k, shot),
        "i_ab": report.i_ab,
        "i_be_bound": report.i_be_bound,
        "delta_i_min_per_pulse": report.delta_i_min_per_pulse,
        "delta_i_min_block": report.delta_i_min_block,
        "sifting_applied": report.sifting_applied,
        "beta": beta,
        "effective_rate_per_pulse": effective,
        "verdict": verdict,
    }
    if fmt == "json":
        click.echo(json.dumps(payload, indent=2))
    else:
        _echo_rate_text(payload)
    if out is not None:
        resolve_out(out).write_text(json.dumps(payload, indent=2) + "\n")


def _echo_rate_text(p: dict) -> None:
    k = p["covariance"]
    click.echo(f"protocol: {p['protocol']}")
    if p["sample_count"] is not None:
        click.echo(f"samples: {p['sample_count']} kept pulses")
    click.echo(f"covariance: var_a={k['var_a']:.6g} var_b={k['var_b']:.6g} "
               f"cov_ab={k['cov_ab']:.6g}  (n0={p['n0']:g})")
    click.echo(f"conditional variance B|A: {p['cond_var_b_given_a']:.6g}"
               + (f"   B|A': {p['cond_var_b_given_a_prime']:.6g}"
                  if p["cond_var_b_given_a_prime"] is not None else ""))
    click.echo(f"conditional squeezing: {p['conditional_squeezing']}")
    click.echo(f"I_AB: {p['i_ab']:.6f} bits/pulse   "
               f"I_BE bound: {p['i_be_bound']:.6f} bits/pulse")
    sift = " (sifting factor 1/2 applied)" if p["sifting_applied"] else ""
    click.echo(f"delta_I_min: {p['delta_i_min_per_pulse']:.6f} bits/pulse, "
               f"{p['delta_i_min_block']:.6f} bits/block of n={p['block_size']}{sift}")
    click.echo(f"effective rate at beta={p['beta']:g}: "
               f"{p['effective_rate_per_pulse']:.6f} bits/pulse")
    click.echo(f"verdict: {p['verdict']}")


def _parse_cov(text: str) -> Covariance2:
    parts = text.split(",")
    if len(parts) != 3:
        raise ParseError(f"covariance literal needs 3 comma-separated numbers, "
                         f"got {text!r}")
    try:
        var_a, var_b, cov_ab = (float(x) for x in parts)
    except ValueError as exc:
        raise ParseError(f"bad covariance literal {text!r}: {exc}") from exc
    return Covariance2(var_a, var_b, cov_ab)


@main.command()
@click.option("--scope", type=click.Choice(["discrete", "statistical", "all"]),
              default="all")
@click.option("--seed", type=int, default=0)
@click.option("--trials", type=int, default=10_000,
              help="Random joint laws per exact-check family.")
@click.option("--pulses", type=int, default=1_000_000,
              help="Pulses per simulated attack in the statistical scope.")
@click.option("--out", type=click.Path(), default=None,
              help="Write the verification manifest (JSON) here.")
def verify(scope, seed, trials, pulses, out):
    """Certify the entropy inequalities; exit 5 if any check fails."""
    reports = run_suites(scope, seed, trials, pulses)
    for r in reports:
        status = "PASS" if r.holds else "FAIL"
        click.echo(f"{status} {r.identifier}  slack={r.slack:.6g}")
    doc = build_manifest(reports, scope, seed)
    if out is not None:
        resolve_out(out).write_text(json.dumps(doc, indent=2) + "\n")
    if not doc["all_hold"]:
        failed = [r.identifier for r in reports if not r.holds]
        click.echo(f"verification failed: {', '.join(failed)}", err=True)
        sys.exit(EXIT_VERIFY)
    click.echo(f"all {len(reports)} checks hold")


SWEEP_COLUMNS = (
    "param", "value",
    "delta_i_min_squeezed", "delta_i_min_coherent",
    "i_ab_squeezed", "i_ab_coherent",
    "i_be_bound_squeezed", "i_be_bound_coherent",
    "cond_var_squeezed", "cond_var_coherent",
)


@main.command()
@config_options
@click.option("--param", type=click.Choice(SWEEP_PARAMS), required=True)
@click.option("--start", type=float, required=True)
@click.option("--stop", type=float, required=True)
@click.option("--steps", type=int, required=True)
@click.option("--transform", type=click.Choice(TRANSFORM_NAMES),
              default=HeterodyneTransform.BEAMSPLITTER.value,
              help="Heterodyne convention for the coherent column; the "
                   "beam-splitter inversion keeps it defined on physical channels.")
@click.option("--out", required=True, type=click.Path(), help="CSV table to write.")
@click.option("--plot-out", type=click.Path(), default=None,
              help="Column-oriented JSON for plotting tools.")
def sweep(config, param, start, stop, steps, transform, out, plot_out, **overrides):
    """Rate bounds on a grid of one channel parameter (analytic, no
    simulation; quantum-memory-mode rates, no sifting factor)."""
    spec = SweepSpec(param, start, stop, steps, load_config(config, overrides))
    rows = [_sweep_row(spec, value, HeterodyneTransform(transform))
            for value in spec.grid()]

    lines = [",".join(SWEEP_COLUMNS)]
    for row in rows:
        lines.append(",".join(_csv_cell(row[c]) for c in SWEEP_COLUMNS))
    path = resolve_out(out)
    path.write_text("\n".join(lines) + "\n")
    click.echo(f"wrote {path} ({steps} grid points)")

    if plot_out is not None:
        doc = {
            "param": param,
            "values": [row["value"] for row in rows],
            "series": {c: [r[c] for r in rows] for c in SWEEP_COLUMNS[2:]},
        }
        resolve_out(plot_out).write_text(json.dumps(doc, indent=2) + "\n")
        click.echo(f"wrote {resolve_out(plot_out)}")


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _sweep_row(spec: SweepSpec, value: float,
               transform: HeterodyneTransform) -> dict:
    point, beta = spec.point(value)
    row = {c: None for c in SWEEP_COLUMNS}
    row["param"] = spec.param
    row["value"] = value
    source, channel = point.source(), point.channel()

    k_hom = analytic_covariance(source, channel, ProtocolKind.SQUEEZED_HOMODYNE)
    squeezed = rate_bound(k_hom, point.n, ProtocolKind.SQUEEZED_HOMODYNE, point.n0)
    row["delta_i_min_squeezed"] = beta * squeezed.i_ab - squeezed.i_be_bound
    row["i_ab_squeezed"] = squeezed.i_ab
    row["i_be_bound_squeezed"] = squeezed.i_be_bound
    row["cond_var_squeezed"] = squeezed.cond_var_b_given_a

    k_het = analytic_covariance(source, channel, ProtocolKind.COHERENT_HETERODYNE)
    try:
        coherent = rate_bound(k_het, point.n, ProtocolKind.COHERENT_HETERODYNE,
                              point.n0, transform)
    except DomainError:
        return row
    row["delta_i_min_coherent"] = beta * coherent.i_ab - coherent.i_be_bound
    row["i_ab_coherent"] = coherent.i_ab
    row["i_be_bound_coherent"] = coherent.i_be_bound
    row["cond_var_coherent"] = coherent.cond_var_b_given_a
    return row


if __name__ == "__main__":
    main()
