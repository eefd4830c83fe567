"""Command-line entry point.

Subcommands wire the library into the standard workflows: ``validate``
checks a trial file, ``diagnose`` builds per-(condition, format, domain)
profile tables, ``compare-formats`` scores profile stability across two
formats, ``confirm`` runs the bootstrap hypothesis suite, and ``synth``
generates synthetic trials.

Configuration is a flat key=value file with exactly the RunConfig keys;
every key can be overridden by a same-named flag. Exit codes: 0 success,
1 data error, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .binning import RatingScale
from .bootstrap import default_hypothesis_specs, run_hypothesis_suite
from .errors import ConfigError, DataError, MetadkitError
from .profiles import build_profiles, compare_formats
from .report import ReportBundle
from .synth import SynthConfig, generate
from .trialstore import load_trials, save_trials

EXIT_OK = 0
EXIT_DATA_ERROR = 1
EXIT_CONFIG_ERROR = 2
EXIT_NUMERICAL_ERROR = 3

WORKERS_ENV_VAR = "METADKIT_WORKERS"


@dataclass
class RunConfig:
    """All run parameters; defaults reproduce the standard protocol."""

    trials: str = ""
    n_ratings: int = 4
    n_bins: int = 8
    pad_value: float = 0.5
    seed: int = 42
    n_resamples: int = 10_000
    tost_delta: float = 0.17
    ci_level_confirmatory: float = 0.95
    ci_level_tost: float = 0.90
    binning_scope: str = "per_cell"
    pairing: str = "paired"
    out: str = "out"
    workers: int = 1
    full_precision: bool = False

    def validate(self) -> None:
        if self.n_bins != 2 * self.n_ratings:
            raise ConfigError(f"n_bins must equal 2 * n_ratings "
                              f"({self.n_bins} != 2 * {self.n_ratings})")
        if self.n_ratings < 2:
            raise ConfigError("n_ratings must be >= 2")
        if self.n_resamples < 1:
            raise ConfigError("n_resamples must be >= 1")
        if self.tost_delta <= 0:
            raise ConfigError("tost_delta must be > 0")
        if self.binning_scope not in ("per_cell", "global"):
            raise ConfigError(f"binning_scope must be per_cell or global, "
                              f"got {self.binning_scope!r}")
        if self.pairing not in ("paired", "independent"):
            raise ConfigError(f"pairing must be paired or independent, "
                              f"got {self.pairing!r}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    @property
    def scale(self) -> RatingScale:
        return RatingScale(self.n_ratings)


def parse_kv_file(path: str | Path) -> dict[str, str]:
    """Flat 'key = value' file; blank lines and # comments ignored."""
    values: dict[str, str] = {}
    for line_no, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{line_no}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key] = value
    return values


_BOOL_KEYS = {"full_precision"}


def load_run_config(config_path: str | None, overrides: dict) -> RunConfig:
    """Defaults <- config file <- command-line flags, with type coercion."""
    config = RunConfig()
    known = {f.name: f.type for f in fields(RunConfig)}
    if config_path:
        for key, raw in parse_kv_file(config_path).items():
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            config = replace(config, **{key: _coerce(key, raw)})
    cleaned = {k: v for k, v in overrides.items() if v is not None}
    if "n_ratings" in cleaned and "n_bins" not in cleaned:
        cleaned["n_bins"] = 2 * int(cleaned["n_ratings"])
    if "n_bins" in cleaned and "n_ratings" not in cleaned:
        n_bins = int(cleaned["n_bins"])
        if n_bins % 2:
            raise ConfigError("n_bins must be even")
        cleaned["n_ratings"] = n_bins // 2
    config = replace(config, **cleaned)
    config.validate()
    return config


def _coerce(key: str, raw: str):
    defaults = RunConfig()
    current = getattr(defaults, key)
    if key in _BOOL_KEYS:
        return raw.strip().lower() in ("true", "1", "yes")
    if isinstance(current, bool):
        return raw.strip().lower() in ("true", "1", "yes")
    if isinstance(current, int):
        return int(raw)
    if isinstance(current, float):
        return float(raw)
    return raw


def _default_workers() -> int | None:
    value = os.environ.get(WORKERS_ENV_VAR)
    return int(value) if value else None


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--trials", help="trial file (JSONL or CSV)")
    parser.add_argument("--config", help="flat key=value run configuration file")
    parser.add_argument("--seed", type=int, help="bootstrap seed (default 42)")
    parser.add_argument("--resamples", type=int, dest="n_resamples",
                        help="bootstrap resample count (default 10000)")
    parser.add_argument("--bins", type=int, dest="n_bins",
                        help="number of quantile bins (must be 2 * nratings)")
    parser.add_argument("--nratings", type=int, dest="n_ratings",
                        help="ratings per response side (default 4)")
    parser.add_argument("--delta", type=float, dest="tost_delta",
                        help="TOST equivalence margin (default 0.17)")
    parser.add_argument("--out", help="output directory (default ./out)")
    parser.add_argument("--format", help="restrict analysis to one format")
    parser.add_argument("--workers", type=int, default=_default_workers(),
                        help=f"parallel workers (default ${WORKERS_ENV_VAR} or 1)")
    parser.add_argument("--full-precision", action="store_const", const=True,
                        dest="full_precision", default=None,
                        help="write CSV values at full precision")
    parser.add_argument("--binning-scope", dest="binning_scope",
                        choices=["per_cell", "global"],
                        help="quantile binning scope (default per_cell)")
    parser.add_argument("--pairing", choices=["paired", "independent"],
                        help="contrast resampling mode (default paired)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="metadkit",
        description="Domain-level metacognitive diagnostics from trial-level records.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="load and validate a trial file")
    p.add_argument("--trials", required=True)
    p.add_argument("--format-hint", choices=["jsonl", "csv"])

    p = sub.add_parser("diagnose", help="profile tables per (condition, format)")
    _add_common_flags(p)

    p = sub.add_parser("compare-formats", help="profile stability across two formats")
    _add_common_flags(p)
    p.add_argument("--format-a", required=True)
    p.add_argument("--format-b", required=True)
    p.add_argument("--condition", help="condition to compare (default: the only one)")

    p = sub.add_parser("confirm", help="run the confirmatory hypothesis suite")
    _add_common_flags(p)

    p = sub.add_parser("synth", help="generate synthetic trials")
    p.add_argument("--synth-config", required=True,
                   help="flat key=value synthetic generator configuration")
    p.add_argument("--out", required=True, help="output JSONL path")
    p.add_argument("--seed", type=int, help="override the config seed")
    return parser


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    overrides = {key: getattr(args, key, None) for key in (
        "trials", "seed", "n_resamples", "n_bins", "n_ratings", "tost_delta",
        "out", "workers", "full_precision", "binning_scope", "pairing")}
    return load_run_config(getattr(args, "config", None), overrides)


def _load(config: RunConfig):
    if not config.trials:
        raise ConfigError("no trial file given (use --trials or the config file)")
    return load_trials(config.trials)


def cmd_validate(args: argparse.Namespace) -> int:
    trials = load_trials(args.trials, format_hint=args.format_hint)
    print(f"{len(trials)} trials, {len(trials.question_ids())} questions")
    print(f"conditions: {', '.join(trials.conditions())}")
    print(f"formats: {', '.join(trials.formats())}")
    for domain, count in trials.domain_counts().items():
        print(f"  {domain} {count}")
    return EXIT_OK


def cmd_diagnose(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    trials = _load(config)
    if getattr(args, "format", None):
        trials = trials.filter(format=args.format)
    profiles = build_profiles(trials, scale=config.scale, pad_value=config.pad_value,
                              binning_scope=config.binning_scope)
    bundle = ReportBundle(profiles=tuple(profiles))
    bundle.write(config.out, full_precision=config.full_precision,
                 chart_metrics=("m_ratio", "auroc2"))
    print(f"{len(profiles)} profiles -> {config.out}")
    for p in profiles:
        print(f"  cond {p.condition} {p.format} {p.domain}: n={p.n} "
              f"acc={p.accuracy:.3f} d'={p.d_prime:.3f} meta-d'={p.meta_d:.3f} "
              f"M-ratio={p.m_ratio:.3f} AUROC2={p.auroc2:.3f}")
    if any(not p.fit_converged for p in profiles):
        return EXIT_NUMERICAL_ERROR
    return EXIT_OK


def cmd_compare_formats(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    trials = _load(config)
    conditions = trials.conditions()
    condition = args.condition or (conditions[0] if len(conditions) == 1 else None)
    if condition is None:
        raise ConfigError(f"multiple conditions present ({', '.join(conditions)}); "
                          "pick one with --condition")
    profiles = {}
    for fmt in (args.format_a, args.format_b):
        subset = trials.filter(condition=condition, format=fmt)
        if len(subset) == 0:
            raise DataError(f"no trials for condition {condition!r} format {fmt!r}")
        profiles[fmt] = build_profiles(subset, scale=config.scale,
                                       pad_value=config.pad_value,
                                       binning_scope=config.binning_scope)
    comparison = compare_formats(profiles[args.format_a], profiles[args.format_b])
    all_profiles = profiles[args.format_a] + profiles[args.format_b]
    bundle = ReportBundle(profiles=tuple(all_profiles), comparison=comparison)
    bundle.write(config.out, full_precision=config.full_precision)
    print(f"rho_m_ratio = {comparison.rho_m_ratio:.3f}")
    print(f"rho_auroc2 = {comparison.rho_auroc2:.3f}")
    for move in comparison.rank_moves:
        if move.moved:
            print(f"  {move.metric} {move.domain}: rank {move.rank_a} -> {move.rank_b}")
    return EXIT_OK


def cmd_confirm(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    trials = _load(config)
    if getattr(args, "format", None):
        trials = trials.filter(format=args.format)
    specs = default_hypothesis_specs(tost_delta=config.tost_delta,
                                     ci_confirmatory=config.ci_level_confirmatory,
                                     ci_tost=config.ci_level_tost)
    results = run_hypothesis_suite(trials, specs, n_resamples=config.n_resamples,
                                   seed=config.seed, workers=config.workers,
                                   scale=config.scale, pad_value=config.pad_value,
                                   pairing=config.pairing)
    bundle = ReportBundle(contrasts=tuple(results))
    bundle.write(config.out, full_precision=config.full_precision)
    for r in results:
        print(f"{r.hypothesis_id} {r.domain}: delta={r.delta_hat:+.3f} "
              f"{int(r.ci_level * 100)}% CI [{r.ci_low:.3f}, {r.ci_high:.3f}] "
              f"-> {r.decision}")
    if any(r.flagged_degenerate for r in results):
        return EXIT_NUMERICAL_ERROR
    return EXIT_OK


_SYNTH_LIST_KEYS = {"mix_weights_correct", "mix_means_correct", "mix_sigmas_correct",
                    "mix_weights_incorrect", "mix_means_incorrect", "mix_sigmas_incorrect"}
_SYNTH_INT_KEYS = {"n_trials", "seed"}
_SYNTH_FLOAT_KEYS = {"p_correct", "mu_correct", "mu_incorrect",
                     "sigma_correct", "sigma_incorrect"}


def load_synth_config(path: str | Path) -> SynthConfig:
    raw = parse_kv_file(path)
    kwargs: dict = {}
    valid = {f.name for f in fields(SynthConfig)}
    for key, value in raw.items():
        if key not in valid:
            raise ConfigError(f"unknown synth config key {key!r}")
        if key in _SYNTH_LIST_KEYS:
            kwargs[key] = tuple(float(v) for v in value.split(","))
        elif key in _SYNTH_INT_KEYS:
            kwargs[key] = int(value)
        elif key in _SYNTH_FLOAT_KEYS:
            kwargs[key] = float(value)
        else:
            kwargs[key] = value
    if "n_trials" not in kwargs or "p_correct" not in kwargs:
        raise ConfigError("synth config needs at least n_trials and p_correct")
    return SynthConfig(**kwargs)


def cmd_synth(args: argparse.Namespace) -> int:
    config = load_synth_config(args.synth_config)
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    trials = generate(config)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_trials(trials, out)
    print(f"{len(trials)} trials -> {out}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "validate": cmd_validate,
        "diagnose": cmd_diagnose,
        "compare-formats": cmd_compare_formats,
        "confirm": cmd_confirm,
        "synth": cmd_synth,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA_ERROR
    except MetadkitError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL_ERROR


if __name__ == "__main__":
    sys.exit(main())
