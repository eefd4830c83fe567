"""Equal-variance Gaussian SDT primitives and the metacognitive sensitivity fit.

The type-1 stage scores how well a median split of the confidence scale
separates correct from incorrect answers (d' and criterion c from the hit
and false-alarm rates of the upper half of the scale). The type-2 stage
fits meta-d': the sensitivity an ideal observer would need, under the same
equal-variance Gaussian model (sigma = 1 for both classes), to reproduce
the observed response-conditional rating counts. The type-1 criterion is
carried over in relative units, meta_c = c * meta_d / d', and the free
parameters are meta_d plus 2 * (n_ratings - 1) type-2 criteria.

Criteria are parameterized as meta_c minus/plus cumulative sums of
exponentiated gap parameters, which keeps them ordered without constrained
optimization; meta_d itself is the square of an unconstrained parameter,
so it can reach zero but never go negative. The likelihood is maximized
with BFGS on an analytic gradient, with a derivative-free polish when the
gradient at the BFGS solution is not tight.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.special import ndtr, ndtri

from .binning import CountTable
from .errors import (
    DegenerateResponse,
    DegenerateTable,
    NegativeMetaD,
    NumericalError,
    OutOfDomain,
    ZeroDPrime,
)

PROB_CLAMP = 1e-12
LOW_DPRIME_THRESHOLD = 0.5
_SQRT_2PI = np.sqrt(2.0 * np.pi)
MAX_ITERATIONS = 10_000


def phi(x):
    """Standard normal CDF (absolute error below 1e-12)."""
    return ndtr(x)


def phi_inv(p):
    """Inverse standard normal CDF on (0, 1).

    Callers working from empirical rates should clamp to
    [PROB_CLAMP, 1 - PROB_CLAMP] before calling.
    """
    arr = np.asarray(p, dtype=float)
    if np.any(arr <= 0.0) or np.any(arr >= 1.0):
        raise OutOfDomain(f"phi_inv requires p in (0, 1), got {p!r}")
    out = ndtri(arr)
    return float(out) if np.isscalar(p) or arr.ndim == 0 else out


def _npdf(x: np.ndarray) -> np.ndarray:
    return np.exp(-0.5 * x * x) / _SQRT_2PI


@dataclass(frozen=True)
class SdtFit:
    """Full type-1 + type-2 fit for one analysis cell."""

    d_prime: float
    criterion_c: float
    meta_d: float
    meta_c: float
    t2_criteria_r1: tuple[float, ...]   # descending, all < meta_c
    t2_criteria_r2: tuple[float, ...]   # ascending, all > meta_c
    m_ratio: float
    log_likelihood: float
    converged: bool = True
    iterations: int = 0
    low_dprime_warning: bool = False


def m_ratio(fit: SdtFit) -> float:
    """meta_d / d_prime. Raises ZeroDPrime when d' is exactly zero."""
    if fit.d_prime == 0.0:
        raise ZeroDPrime("M-ratio undefined at d' = 0")
    return fit.meta_d / fit.d_prime


def type1_fit(table: CountTable) -> tuple[float, float]:
    """Median-split sensitivity and criterion from a padded count table.

    HR is the upper-half mass of the correct class, FAR the upper-half
    mass of the incorrect class; d' = z(HR) - z(FAR) and
    c = -(z(HR) + z(FAR)) / 2. Rates are clamped away from 0 and 1 before
    the z-transform. A stimulus class that was empty before padding is
    reported via a DegenerateTable warning; the fit still runs on the
    padding mass.
    """
    if not table.padded:
        raise NumericalError("type1_fit requires a padded count table")
    raw_incorrect, raw_correct = table.raw_class_totals()
    if raw_incorrect <= 0 or raw_correct <= 0:
        warnings.warn("a stimulus class has no raw trials; rates come from padding alone",
                      DegenerateTable, stacklevel=2)

    half = table.n_ratings
    total_correct = table.counts_correct.sum()
    total_incorrect = table.counts_incorrect.sum()
    if total_correct <= 0 or total_incorrect <= 0:
        raise NumericalError("both stimulus-class totals must be positive")
    hr = float(table.counts_correct[half:].sum() / total_correct)
    far = float(table.counts_incorrect[half:].sum() / total_incorrect)
    z_hr = float(ndtri(np.clip(hr, PROB_CLAMP, 1.0 - PROB_CLAMP)))
    z_far = float(ndtri(np.clip(far, PROB_CLAMP, 1.0 - PROB_CLAMP)))
    return z_hr - z_far, -0.5 * (z_hr + z_far)


def _criteria(meta_c: float, gaps_r1: np.ndarray, gaps_r2: np.ndarray) -> np.ndarray:
    """Ascending criteria array [r1 side ..., meta_c, ... r2 side]."""
    lower = meta_c - np.cumsum(gaps_r1)[::-1]
    upper = meta_c + np.cumsum(gaps_r2)
    return np.concatenate([lower, [meta_c], upper])


def _cell_probs(criteria: np.ndarray, meta_d: float, k: int) -> np.ndarray:
    """Response-conditional rating probabilities, shape (2, 2k + 2).

    Row 0 is the incorrect class (mean -meta_d / 2), row 1 the correct
    class (+meta_d / 2). Entry [s, b] is the Gaussian mass of bin b
    divided by the mass of bin b's response side. The ratio is what gets
    clamped downstream: p and Q can both underflow at extreme criteria
    while p / Q stays a perfectly ordinary probability, so the divisor is
    floored only against literal zero.
    """
    mus = np.array([-0.5 * meta_d, 0.5 * meta_d])
    z = criteria[None, :] - mus[:, None]
    cdf = ndtr(z)
    p = np.diff(np.concatenate([np.zeros((2, 1)), cdf, np.ones((2, 1))], axis=1), axis=1)
    q1 = cdf[:, k]
    denom = np.concatenate([np.repeat(q1[:, None], k + 1, axis=1),
                            np.repeat((1.0 - q1)[:, None], k + 1, axis=1)], axis=1)
    return p / np.maximum(denom, 1e-300)


def _nll_and_grad(theta: np.ndarray, counts: np.ndarray, cprime: float):
    """Negative mean conditional log-likelihood and its gradient.

    theta = [t, a_1..a_k, b_1..b_k]; meta_d = t**2, criteria gaps are
    exp(a) below meta_c and exp(b) above. The mean (per-trial) scale makes
    the objective invariant under count rescaling.
    """
    n_bins = counts.shape[1]
    k = n_bins // 2 - 1
    t = theta[0]
    ga = np.exp(theta[1:1 + k])
    gb = np.exp(theta[1 + k:1 + 2 * k])
    meta_d = t * t
    meta_c = cprime * meta_d
    crit = _criteria(meta_c, ga, gb)
    m = 2 * k + 1
    total = counts.sum()

    nll = 0.0
    grad = np.zeros(1 + 2 * k)

    # dC/dtheta is shared by both stimulus classes
    dC = np.zeros((m, 1 + 2 * k))
    dC[:, 0] = 2.0 * cprime * t
    for j in range(k):
        # a_j widens every lower criterion whose gap chain includes it
        dC[: k - j, 1 + j] = -ga[j]
        # b_j widens every upper criterion at or beyond position j
        dC[k + 1 + j:, 1 + k + j] = gb[j]

    for s, mu_sign in ((0, -1.0), (1, 1.0)):
        mu = mu_sign * 0.5 * meta_d
        z = crit - mu
        cdf = ndtr(z)
        pdf = _npdf(z)
        p = np.diff(np.concatenate([[0.0], cdf, [1.0]]))
        q1 = max(cdf[k], 1e-300)
        q2 = max(1.0 - cdf[k], 1e-300)
        q = np.concatenate([np.full(k + 1, q1), np.full(k + 1, q2)])

        # the conditional probability p / q is the model quantity: clamp
        # the ratio, never the pieces, or a vanishing response side would
        # contribute log(clamp) - log(clamp) = 0 and extreme criteria
        # would look free
        cond = p / q
        active = cond > PROB_CLAMP
        n_s = counts[s]
        nll -= float(n_s @ np.log(np.maximum(cond, PROB_CLAMP)))

        dmu = np.zeros(1 + 2 * k)
        dmu[0] = mu_sign * t
        dz = dC - dmu[None, :]
        dF = pdf[:, None] * dz
        dp = np.vstack([dF[0:1], np.diff(dF, axis=0), -dF[-1:]])
        n_active = n_s * active
        p_safe = np.where(active, p, 1.0)
        term = (n_active / p_safe) @ dp
        term -= (n_active[: k + 1].sum() / q1) * dF[k]
        term -= (n_active[k + 1:].sum() / q2) * (-dF[k])
        grad -= term

    return nll / total, grad / total


def _nll_fixed_meta_d(ab: np.ndarray, meta_d: float, counts: np.ndarray, cprime: float) -> float:
    """Mean conditional NLL with meta_d held fixed (criteria-only search)."""
    n_bins = counts.shape[1]
    k = n_bins // 2 - 1
    ga = np.exp(ab[:k])
    gb = np.exp(ab[k:])
    crit = _criteria(cprime * meta_d, ga, gb)
    cond = _cell_probs(crit, meta_d, k)
    return -float((counts * np.log(np.maximum(cond, PROB_CLAMP))).sum()) / counts.sum()


def _quantile_criteria(table: CountTable) -> np.ndarray:
    """Criterion estimates from the pooled cumulative bin proportions."""
    pooled = table.counts_incorrect + table.counts_correct
    cum = np.cumsum(pooled)[:-1] / pooled.sum()
    return ndtri(np.clip(cum, PROB_CLAMP, 1.0 - PROB_CLAMP))


def _initial_gaps(table: CountTable) -> tuple[np.ndarray, np.ndarray]:
    est = _quantile_criteria(table)
    k = table.n_ratings - 1
    return _anchored_gaps(est, float(est[k]), k)


def _anchored_gaps(est: np.ndarray, meta_c0: float, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Gap parameters that place the criteria at the quantile estimates
    while the median boundary sits at meta_c0 (gaps on an infeasible side
    collapse to a floor)."""
    mid = k
    gaps_r1 = np.array([meta_c0 - est[mid - 1]]
                       + [est[mid - j] - est[mid - j - 1] for j in range(1, k)])
    gaps_r2 = np.array([est[mid + 1] - meta_c0]
                       + [est[mid + j + 1] - est[mid + j] for j in range(1, k)])
    return np.maximum(gaps_r1, 1e-3), np.maximum(gaps_r2, 1e-3)


def meta_d_fit(table: CountTable, type1: tuple[float, float]) -> SdtFit:
    """Maximum-likelihood meta-d' under the equal-variance model.

    ``type1`` is the (d_prime, criterion_c) pair whose relative criterion
    the type-2 model inherits. Returns the full SdtFit; if the iteration
    cap is hit the best point found is returned with converged=False.
    """
    if not table.padded:
        raise NumericalError("meta_d_fit requires a padded count table")
    d_prime, criterion_c = float(type1[0]), float(type1[1])
    if d_prime == 0.0:
        raise ZeroDPrime("meta-d' fit undefined at d' = 0")
    cprime = criterion_c / d_prime
    k = table.n_ratings - 1

    pad = table.pad_value
    lower_raw = (table.counts_incorrect[: k + 1].sum()
                 + table.counts_correct[: k + 1].sum() - 2 * (k + 1) * pad)
    upper_raw = (table.counts_incorrect[k + 1:].sum()
                 + table.counts_correct[k + 1:].sum() - 2 * (k + 1) * pad)
    if min(lower_raw, upper_raw) <= 1e-12:
        warnings.warn("all raw mass on one response side; type-2 criteria on the "
                      "empty side are weakly identified", DegenerateResponse, stacklevel=2)

    counts = np.vstack([table.counts_incorrect, table.counts_correct])
    est = _quantile_criteria(table)
    meta_d0 = max(abs(d_prime), 0.05)

    iterations = 0
    best_x = best_fun = None
    converged = False

    def run_from(start_meta_d, anchored=False):
        nonlocal best_x, best_fun, iterations, converged
        meta_c0 = cprime * start_meta_d if anchored else float(est[k])
        gaps_r1, gaps_r2 = _anchored_gaps(est, meta_c0, k)
        x0 = np.concatenate([[np.sqrt(start_meta_d)],
                             np.log(gaps_r1), np.log(gaps_r2)])
        res = minimize(_nll_and_grad, x0, args=(counts, cprime), jac=True,
                       method="BFGS",
                       options={"gtol": 1e-9,
                                "maxiter": max(MAX_ITERATIONS - iterations, 1)})
        iterations += int(res.nit)
        x, fun = res.x, res.fun
        grad_norm = float(np.linalg.norm(_nll_and_grad(x, counts, cprime)[1]))
        ok = bool(res.success) or grad_norm <= 1e-7
        if not ok and iterations < MAX_ITERATIONS:
            polish = minimize(lambda p: _nll_and_grad(p, counts, cprime)[0], x,
                              method="Nelder-Mead",
                              options={"fatol": 1e-12, "xatol": 1e-10,
                                       "maxiter": MAX_ITERATIONS - iterations})
            iterations += int(polish.nit)
            if polish.fun <= fun:
                x, fun = polish.x, polish.fun
            grad_norm = float(np.linalg.norm(_nll_and_grad(x, counts, cprime)[1]))
            ok = bool(polish.success) or grad_norm <= 1e-6
        if best_fun is None or fun < best_fun:
            best_x, best_fun, converged = x, fun, ok

    run_from(meta_d0)
    if abs(cprime) > 1.5:
        # a large relative criterion makes meta_c = cprime * meta_d sweep
        # far with meta_d, splitting the surface into basins; restart with
        # the criteria re-anchored onto the quantile estimates per start
        for restart in (0.3, 1.0, 2.5):
            run_from(restart, anchored=True)
    if best_x[0] ** 2 < 1e-6:
        # the squared parameterization makes t = 0 a stationary point even
        # when the likelihood still rises with meta_d; interior restarts
        # distinguish a true boundary optimum from a saddle stall
        for restart in (0.3, max(1.0, 2.0 * meta_d0)):
            run_from(restart)

    t = best_x[0]
    meta_d = float(t * t)
    if meta_d < 1e-6:
        meta_d = 0.0
        warnings.warn("fitted meta-d' is at its lower bound of 0; confidence carried "
                      "no (or anti-) information", NegativeMetaD, stacklevel=2)
    meta_c = cprime * meta_d
    ga = np.exp(best_x[1:1 + k])
    gb = np.exp(best_x[1 + k:])
    crit = _criteria(meta_c, ga, gb)
    log_likelihood = -best_fun * counts.sum()

    return SdtFit(
        d_prime=d_prime,
        criterion_c=criterion_c,
        meta_d=meta_d,
        meta_c=float(meta_c),
        t2_criteria_r1=tuple(float(c) for c in crit[:k][::-1]),
        t2_criteria_r2=tuple(float(c) for c in crit[k + 1:]),
        m_ratio=meta_d / d_prime,
        log_likelihood=float(log_likelihood),
        converged=converged,
        iterations=iterations,
        low_dprime_warning=bool(d_prime < LOW_DPRIME_THRESHOLD),
    )


def predicted_count_table(meta_d: float, type1: tuple[float, float],
                          gaps_r1: np.ndarray | list, gaps_r2: np.ndarray | list,
                          n: float, p_correct: float = 0.5,
                          n_ratings: int = 4) -> CountTable:
    """Exact model-implied count table, scaled to n trials.

    The generative check for the fitter: feeding this table back to
    meta_d_fit with the same ``type1`` must recover ``meta_d``. Criteria
    sit at meta_c = c * meta_d / d' plus/minus the given positive gaps.
    Cells hold expected (fractional) counts; the table is marked padded
    with pad_value 0 so it goes straight into the fit.
    """
    d_prime, criterion_c = float(type1[0]), float(type1[1])
    if d_prime == 0.0:
        raise ZeroDPrime("predicted table undefined at d' = 0")
    k = n_ratings - 1
    gaps_r1 = np.asarray(gaps_r1, dtype=float)
    gaps_r2 = np.asarray(gaps_r2, dtype=float)
    if gaps_r1.shape != (k,) or gaps_r2.shape != (k,) or np.any(gaps_r1 <= 0) or np.any(gaps_r2 <= 0):
        raise ValueError(f"need {k} positive gaps per side")
    meta_c = (criterion_c / d_prime) * meta_d
    crit = _criteria(meta_c, gaps_r1, gaps_r2)
    mus = np.array([-0.5 * meta_d, 0.5 * meta_d])
    cdf = ndtr(crit[None, :] - mus[:, None])
    joint = np.diff(np.concatenate([np.zeros((2, 1)), cdf, np.ones((2, 1))], axis=1), axis=1)
    weights = np.array([1.0 - p_correct, p_correct])
    cells = joint * weights[:, None] * n
    return CountTable(n_ratings=n_ratings, counts_incorrect=cells[0],
                      counts_correct=cells[1], padded=True, pad_value=0.0)
