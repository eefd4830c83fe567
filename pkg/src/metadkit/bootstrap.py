"""Question-level bootstrap, percentile CIs, TOST, and the hypothesis suite.

Determinism contract
--------------------
The resampling unit is the question id. Index draws come from numpy's
PCG64 via ``default_rng``; the stream for resample ordinal ``i`` of an
analysis unit is::

    entropy = blake2b("metadkit-bootstrap-v1|<seed>|<domain>|<unit>", 16 bytes)
    rng_i   = default_rng(SeedSequence(entropy, spawn_key=(i,)))

where ``unit`` names the statistic or contrast. Each resample draws n ids
with replacement from the sorted unique question-id list, so the indices
depend only on (seed, domain id list, ordinal) and never on evaluation
order; results are bit-identical for any worker count.

Contrasts are paired by default: one shared id-draw sequence drives both
conditions, matching a same-questions design. Resamples where the
statistic is undefined (one-class resample, too few trials to bin, d' of
exactly zero) are counted and excluded, never retried; more than 1%
undefined flags the result.
"""

from __future__ import annotations

import hashlib
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .binning import RatingScale
from .errors import (
    EmptySet,
    MetadkitWarning,
    MissingCondition,
    OneClassOnly,
    TooFewTrials,
    TooManyDegenerate,
    UnpairedSets,
    WrongCiLevel,
    ZeroDPrime,
)
from .nonparam import accuracy_arrays, auroc2_arrays, nlp_gap_arrays
from .profiles import fit_cell_arrays
from .trialstore import TrialSet, validate_paired

METRICS = ("accuracy", "nlp_gap", "auroc2", "d_prime", "meta_d", "m_ratio")
DEGENERATE_FRACTION_ALARM = 0.01
_DEGENERATE_ERRORS = (OneClassOnly, TooFewTrials, ZeroDPrime, EmptySet)

RULE_CI_LOWER_GT_ZERO = "ci_lower_gt_zero"
RULE_TOST = "tost"


@dataclass(frozen=True)
class BootstrapResult:
    metric: str
    domain: str
    point: float
    ci_low: float
    ci_high: float
    ci_level: float
    n_resamples: int
    seed: int
    degenerate_resample_count: int = 0
    flagged_degenerate: bool = False


@dataclass(frozen=True)
class ContrastResult:
    hypothesis_id: str
    metric: str
    domain: str
    delta_hat: float
    ci_low: float
    ci_high: float
    ci_level: float
    n_resamples: int
    seed: int
    decision: str = ""
    degenerate_resample_count: int = 0
    flagged_degenerate: bool = False
    pairing: str = "paired"
    contrast: str = ""          # condition label, e.g. "2-1"


@dataclass(frozen=True)
class HypothesisSpec:
    id: str
    condition_a: str
    condition_b: str
    domains: tuple[str, ...]
    rule: str
    metric: str = "meta_d"
    delta: float = 0.0
    ci_level: float = 0.95

    def __post_init__(self):
        if self.rule == RULE_TOST and self.delta <= 0:
            raise ValueError("tost rule needs delta > 0")


def default_hypothesis_specs(tost_delta: float = 0.17,
                             ci_confirmatory: float = 0.95,
                             ci_tost: float = 0.90) -> list[HypothesisSpec]:
    """The default four-hypothesis confirmatory suite over conditions 1-4."""
    return [
        HypothesisSpec("H1", "2", "1", ("Science",), RULE_CI_LOWER_GT_ZERO,
                       ci_level=ci_confirmatory),
        HypothesisSpec("H2", "2", "1", ("History", "Arts", "Geography"), RULE_TOST,
                       delta=tost_delta, ci_level=ci_tost),
        HypothesisSpec("H3", "2", "3", ("Science",), RULE_CI_LOWER_GT_ZERO,
                       ci_level=ci_confirmatory),
        HypothesisSpec("H4", "2", "4", ("Science",), RULE_CI_LOWER_GT_ZERO,
                       ci_level=ci_confirmatory),
    ]


def _stream_entropy(seed: int, domain: str, unit: str) -> int:
    key = f"metadkit-bootstrap-v1|{seed}|{domain}|{unit}".encode()
    return int.from_bytes(hashlib.blake2b(key, digest_size=16).digest(), "big")


def _draw_ids(entropy: int, ordinal: int, n_ids: int) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence(entropy, spawn_key=(ordinal,)))
    return rng.integers(0, n_ids, size=n_ids)


def _rows_per_id(trials: TrialSet, ids: list[str]):
    """Row indices of each id, as a flat array when ids map 1:1 to rows."""
    index: dict[str, list[int]] = {qid: [] for qid in ids}
    for row, rec in enumerate(trials.records):
        if rec.question_id in index:
            index[rec.question_id].append(row)
    rows = [np.array(index[qid], dtype=np.int64) for qid in ids]
    if all(len(r) == 1 for r in rows):
        return np.array([r[0] for r in rows], dtype=np.int64)
    return rows


def _gather(rows, draw: np.ndarray) -> np.ndarray:
    if isinstance(rows, np.ndarray):
        return rows[draw]
    return np.concatenate([rows[i] for i in draw])


def metric_value(metric: str, nlp: np.ndarray, correct: np.ndarray,
                 scale: RatingScale = RatingScale(), pad_value: float = 0.5) -> float:
    """One named statistic over raw arrays, re-binning from scratch.

    Raises OneClassOnly / TooFewTrials / ZeroDPrime / EmptySet when the
    statistic is undefined for this sample.
    """
    if metric == "accuracy":
        return accuracy_arrays(correct)
    if metric == "nlp_gap":
        return nlp_gap_arrays(nlp, correct)
    if metric == "auroc2":
        return auroc2_arrays(nlp, correct)
    if metric not in ("d_prime", "meta_d", "m_ratio"):
        raise ValueError(f"unknown metric {metric!r}; choose from {METRICS}")
    if correct.all() or not correct.any():
        raise OneClassOnly("sensitivity metrics need both correctness classes")
    fit = fit_cell_arrays(nlp, correct, scale, pad_value)
    if metric == "d_prime":
        return fit.d_prime
    if fit.d_prime == 0.0:
        raise ZeroDPrime("d' is exactly 0 in this sample")
    return fit.meta_d if metric == "meta_d" else fit.m_ratio


def _eval_chunk(payload: dict, start: int, stop: int) -> np.ndarray:
    """Statistic (or nan) for resample ordinals [start, stop)."""
    out = np.empty(stop - start)
    scale = RatingScale(payload["n_ratings"])
    metric = payload["metric"]
    pad_value = payload["pad_value"]
    contrast = "nlp_b" in payload
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MetadkitWarning)
        for j, ordinal in enumerate(range(start, stop)):
            draw = _draw_ids(payload["entropy"], ordinal, payload["n_ids"])
            try:
                rows_a = _gather(payload["rows_a"], draw)
                stat = metric_value(metric, payload["nlp_a"][rows_a],
                                    payload["correct_a"][rows_a], scale, pad_value)
                if contrast:
                    if payload["paired"]:
                        draw_b = draw
                    else:
                        draw_b = _draw_ids(payload["entropy_b"], ordinal,
                                           payload["n_ids_b"])
                    rows_b = _gather(payload["rows_b"], draw_b)
                    stat -= metric_value(metric, payload["nlp_b"][rows_b],
                                         payload["correct_b"][rows_b], scale, pad_value)
                out[j] = stat
            except _DEGENERATE_ERRORS:
                out[j] = np.nan
    return out


def _run_resamples(payload: dict, n_resamples: int, workers: int) -> np.ndarray:
    if workers <= 1 or n_resamples < 2 * workers:
        return _eval_chunk(payload, 0, n_resamples)
    chunk = max(1, -(-n_resamples // (workers * 4)))
    bounds = [(s, min(s + chunk, n_resamples)) for s in range(0, n_resamples, chunk)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_eval_chunk, payload, s, e) for s, e in bounds]
        parts = [f.result() for f in futures]
    return np.concatenate(parts)


def _percentile_ci(stats: np.ndarray, ci_level: float) -> tuple[float, float]:
    alpha = 1.0 - ci_level
    lo, hi = np.percentile(stats, [100.0 * alpha / 2.0, 100.0 * (1.0 - alpha / 2.0)])
    return float(lo), float(hi)


def _check_degenerate(n_bad: int, n_resamples: int, unit: str) -> bool:
    if n_bad > DEGENERATE_FRACTION_ALARM * n_resamples:
        warnings.warn(
            f"{unit}: {n_bad}/{n_resamples} resamples had an undefined statistic",
            TooManyDegenerate, stacklevel=3)
        return True
    return False


def _single_domain(trials: TrialSet) -> str:
    domains = trials.domains()
    if len(domains) != 1:
        raise ValueError(f"bootstrap needs a single-domain trial set, got {domains}")
    return domains[0]


def bootstrap_metric(trials: TrialSet, metric: str, n_resamples: int = 10_000,
                     seed: int = 42, ci_level: float = 0.95, workers: int = 1,
                     scale: RatingScale = RatingScale(),
                     pad_value: float = 0.5) -> BootstrapResult:
    """Percentile bootstrap CI for one statistic on one domain's trials.

    Each resample draws n question ids with replacement and pushes the
    resulting trial multiset through the full metric pipeline (quantile
    bins recomputed per resample for the model-based metrics).
    """
    if n_resamples < 1:
        raise ValueError("n_resamples must be >= 1")
    domain = _single_domain(trials)
    ids = sorted(set(trials.question_ids()))
    point = metric_value(metric, trials.nlp_values, trials.correct_mask, scale, pad_value)

    payload = {
        "entropy": _stream_entropy(seed, domain, metric),
        "n_ids": len(ids),
        "rows_a": _rows_per_id(trials, ids),
        "nlp_a": trials.nlp_values,
        "correct_a": trials.correct_mask,
        "metric": metric,
        "n_ratings": scale.n_ratings,
        "pad_value": pad_value,
    }
    stats = _run_resamples(payload, n_resamples, workers)
    valid = stats[~np.isnan(stats)]
    n_bad = int(np.isnan(stats).sum())
    flagged = _check_degenerate(n_bad, n_resamples, f"{domain}/{metric}")
    if len(valid) == 0:
        ci_low = ci_high = float("nan")
        flagged = True
    else:
        ci_low, ci_high = _percentile_ci(valid, ci_level)
    return BootstrapResult(metric=metric, domain=domain, point=point,
                           ci_low=ci_low, ci_high=ci_high, ci_level=ci_level,
                           n_resamples=n_resamples, seed=seed,
                           degenerate_resample_count=n_bad, flagged_degenerate=flagged)


def bootstrap_contrast(trials_a: TrialSet, trials_b: TrialSet, metric: str,
                       n_resamples: int = 10_000, seed: int = 42,
                       ci_level: float = 0.95, workers: int = 1,
                       scale: RatingScale = RatingScale(), pad_value: float = 0.5,
                       pairing: str = "paired", unit: str | None = None) -> ContrastResult:
    """Bootstrap CI for metric(a) - metric(b) on one domain.

    With ``pairing="paired"`` (default) one shared id-draw sequence drives
    both sides, which requires the sets to hold the same question ids;
    ``"independent"`` resamples each side from its own id list.
    """
    if pairing not in ("paired", "independent"):
        raise ValueError(f"pairing must be 'paired' or 'independent', got {pairing!r}")
    domain = _single_domain(trials_a)
    domain_b = _single_domain(trials_b)
    if domain != domain_b:
        raise UnpairedSets(f"contrast across domains {domain!r} vs {domain_b!r}")
    if pairing == "paired":
        report = validate_paired(trials_a, trials_b)
        if not report.paired:
            raise UnpairedSets(
                f"paired contrast needs identical question ids; missing={report.missing[:5]} "
                f"extra={report.extra[:5]}")

    unit = unit or _contrast_unit(metric, trials_a, trials_b)
    ids_a = sorted(set(trials_a.question_ids()))
    ids_b = ids_a if pairing == "paired" else sorted(set(trials_b.question_ids()))

    delta_hat = (metric_value(metric, trials_a.nlp_values, trials_a.correct_mask, scale, pad_value)
                 - metric_value(metric, trials_b.nlp_values, trials_b.correct_mask, scale, pad_value))

    payload = {
        "entropy": _stream_entropy(seed, domain, unit),
        "entropy_b": _stream_entropy(seed, domain, unit + "|b"),
        "n_ids": len(ids_a),
        "n_ids_b": len(ids_b),
        "rows_a": _rows_per_id(trials_a, ids_a),
        "rows_b": _rows_per_id(trials_b, ids_b),
        "nlp_a": trials_a.nlp_values,
        "correct_a": trials_a.correct_mask,
        "nlp_b": trials_b.nlp_values,
        "correct_b": trials_b.correct_mask,
        "paired": pairing == "paired",
        "metric": metric,
        "n_ratings": scale.n_ratings,
        "pad_value": pad_value,
    }
    stats = _run_resamples(payload, n_resamples, workers)
    valid = stats[~np.isnan(stats)]
    n_bad = int(np.isnan(stats).sum())
    flagged = _check_degenerate(n_bad, n_resamples, f"{domain}/{unit}")
    if len(valid) == 0:
        ci_low = ci_high = float("nan")
        flagged = True
    else:
        ci_low, ci_high = _percentile_ci(valid, ci_level)
    return ContrastResult(hypothesis_id="", metric=metric, domain=domain,
                          delta_hat=delta_hat, ci_low=ci_low, ci_high=ci_high,
                          ci_level=ci_level, n_resamples=n_resamples, seed=seed,
                          degenerate_resample_count=n_bad, flagged_degenerate=flagged,
                          pairing=pairing, contrast=_contrast_label(trials_a, trials_b))


def _contrast_label(a: TrialSet, b: TrialSet) -> str:
    def tag(s: TrialSet) -> str:
        conditions = "+".join(s.conditions())
        formats = s.formats()
        return conditions if len(formats) == 1 else f"{conditions}@{'+'.join(formats)}"
    return f"{tag(a)}-{tag(b)}"


def _contrast_unit(metric: str, a: TrialSet, b: TrialSet) -> str:
    def tag(s: TrialSet) -> str:
        return "+".join(s.conditions()) + "@" + "+".join(s.formats())
    return f"{metric}|{tag(a)}-{tag(b)}"


def tost(contrast: ContrastResult, delta: float) -> str:
    """Equivalence decision: 90% CI strictly inside (-delta, +delta)."""
    if abs(contrast.ci_level - 0.90) > 1e-9:
        raise WrongCiLevel(f"TOST needs a 90% CI, got {contrast.ci_level}")
    if delta <= 0:
        raise ValueError("delta must be positive")
    equivalent = (-delta < contrast.ci_low) and (contrast.ci_high < delta)
    return "equivalent" if equivalent else "not_equivalent"


def decide(contrast: ContrastResult, rule: str, delta: float = 0.0) -> ContrastResult:
    """Attach the decision implied by (ci_low, ci_high, rule)."""
    if rule == RULE_CI_LOWER_GT_ZERO:
        decision = "supported" if contrast.ci_low > 0.0 else "not_supported"
    elif rule == RULE_TOST:
        decision = tost(contrast, delta)
    else:
        raise ValueError(f"unknown decision rule {rule!r}")
    return replace(contrast, decision=decision)


def run_hypothesis_suite(trials: TrialSet, specs: list[HypothesisSpec],
                         n_resamples: int = 10_000, seed: int = 42,
                         workers: int = 1, scale: RatingScale = RatingScale(),
                         pad_value: float = 0.5,
                         pairing: str = "paired") -> list[ContrastResult]:
    """Evaluate every (spec, domain) contrast and attach decisions."""
    results: list[ContrastResult] = []
    conditions = set(trials.conditions())
    for spec in specs:
        for cond in (spec.condition_a, spec.condition_b):
            if cond not in conditions:
                raise MissingCondition(cond)
        for domain in spec.domains:
            a = trials.filter(condition=spec.condition_a, domain=domain)
            b = trials.filter(condition=spec.condition_b, domain=domain)
            if len(a) == 0 or len(b) == 0:
                raise MissingCondition(
                    f"{spec.condition_a if len(a) == 0 else spec.condition_b} in {domain}")
            unit = f"{spec.metric}|{spec.condition_a}-{spec.condition_b}"
            contrast = bootstrap_contrast(
                a, b, spec.metric, n_resamples=n_resamples, seed=seed,
                ci_level=spec.ci_level, workers=workers, scale=scale,
                pad_value=pad_value, pairing=pairing, unit=unit)
            contrast = replace(contrast, hypothesis_id=spec.id)
            results.append(decide(contrast, spec.rule, spec.delta))
    return results
