"""Statistical helpers shared by the experiment suites."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Iterable, Sequence, Tuple

import numpy as np
from scipy import stats

from tpng.core import config
from tpng.core.errors import DomainError, InsufficientSamples

MIN_EXPECTED = 5.0


def _pooled_bins(mean: float, n: int) -> Tuple[np.ndarray, np.ndarray]:
    """Bin edges [lo, hi) over counts whose expected frequency is at least MIN_EXPECTED.

    Returns (lower bounds of bins, expected counts); the first bin absorbs the
    left tail and the last bin the right tail.
    """
    hi = int(stats.poisson.ppf(1 - 1e-12, mean)) + 2
    ks = np.arange(hi + 1)
    expected = n * stats.poisson.pmf(ks, mean)
    expected[-1] = n * stats.poisson.sf(hi - 1, mean)

    bounds = [0]
    acc = []
    running = 0.0
    for k, e in zip(ks, expected):
        running += e
        if running >= MIN_EXPECTED:
            acc.append(running)
            bounds.append(k + 1)
            running = 0.0
    if running > 0 and acc:
        acc[-1] += running
        bounds[-1] = hi + 1
    elif running > 0:
        acc.append(running)
        bounds.append(hi + 1)
    return np.array(bounds[:-1]), np.array(acc)


def poisson_gof(counts: Sequence[int], mean: float) -> Tuple[float, float]:
    """Chi-square goodness of fit of integer counts against Poisson(mean), tails pooled."""
    counts = np.asarray(counts, dtype=int)
    if mean <= 0:
        raise DomainError("Poisson mean must be positive")
    if len(counts) < config.MIN_GOF_SAMPLES:
        raise InsufficientSamples(f"{len(counts)} samples < {config.MIN_GOF_SAMPLES}")
    lows, expected = _pooled_bins(mean, len(counts))
    if len(expected) < 2:
        return 0.0, 1.0
    idx = np.searchsorted(lows, counts, side="right") - 1
    observed = np.bincount(idx, minlength=len(expected)).astype(float)
    expected = expected * observed.sum() / expected.sum()
    res = stats.chisquare(observed, expected)
    return float(res.statistic), float(res.pvalue)


@dataclass(frozen=True)
class EmpiricalTail:
    """n -> fraction of samples >= n."""

    samples: np.ndarray

    def __call__(self, n: float) -> float:
        if len(self.samples) == 0:
            raise InsufficientSamples("empty sample")
        return float(np.mean(self.samples >= n))

    def count(self, n: float) -> int:
        return int(np.sum(self.samples >= n))

    def __len__(self) -> int:
        return len(self.samples)


def empirical_tail(samples: Iterable[float]) -> EmpiricalTail:
    return EmpiricalTail(np.asarray(list(samples), dtype=float))


def exceeds_bound(successes: int, trials: int, bound: float) -> float:
    """One-sided p-value for 'true frequency > bound'; small values reject the bound."""
    if trials == 0:
        raise InsufficientSamples("no trials")
    if bound >= 1.0:
        return 1.0
    return float(stats.binomtest(successes, trials, bound, alternative="greater").pvalue)


def correlation(a: Sequence[float], b: Sequence[float]) -> Tuple[float, float]:
    """Pearson r and its null standard error 1/sqrt(n)."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    if len(a) != len(b) or len(a) < 3:
        raise InsufficientSamples("need paired samples of length >= 3")
    if a.std() == 0 or b.std() == 0:
        return 0.0, 1.0 / np.sqrt(len(a))
    return float(stats.pearsonr(a, b)[0]), 1.0 / float(np.sqrt(len(a)))


def pairwise_correlations(columns: Dict[str, Sequence[float]]) -> Dict[Tuple[str, str], Tuple[float, float]]:
    names = sorted(columns)
    return {
        (x, y): correlation(columns[x], columns[y])
        for i, x in enumerate(names)
        for y in names[i + 1:]
    }


def two_sample_counts(a: Sequence[int], b: Sequence[int]) -> Tuple[float, float]:
    """Chi-square homogeneity test of two integer samples, sparse tails pooled."""
    a, b = np.asarray(a, int), np.asarray(b, int)
    if min(len(a), len(b)) < config.MIN_GOF_SAMPLES:
        raise InsufficientSamples("two-sample test needs more replicas")
    both = np.concatenate([a, b])
    lo, hi = np.quantile(both, [0.05, 0.95]).astype(int)
    edges = np.unique(np.concatenate([[both.min()], np.arange(lo, hi + 1), [both.max() + 1]]))
    table = np.vstack([np.histogram(a, edges)[0], np.histogram(b, edges)[0]])
    table = table[:, table.sum(axis=0) > 0]
    if table.shape[1] < 2:
        return 0.0, 1.0
    res = stats.chi2_contingency(table)
    return float(res[0]), float(res[1])


def anova(groups: Sequence[Sequence[float]]) -> Tuple[float, float]:
    groups = [np.asarray(g, float) for g in groups if len(g) > 1]
    if len(groups) < 2:
        raise InsufficientSamples("ANOVA needs two groups with two samples each")
    res = stats.f_oneway(*groups)
    return float(res.statistic), float(res.pvalue)


def mean_ci(values: Sequence[float], z: float = 1.96) -> Tuple[float, float]:
    values = np.asarray(values, float)
    if len(values) == 0:
        raise InsufficientSamples("empty sample")
    half = z * values.std(ddof=1) / np.sqrt(len(values)) if len(values) > 1 else float("inf")
    return float(values.mean()), float(half)


def trend_non_increasing(errors: Sequence[float], allowed_reversals: int = 1) -> bool:
    reversals = sum(1 for a, b in zip(errors, errors[1:]) if b > a)
    return reversals <= allowed_reversals
