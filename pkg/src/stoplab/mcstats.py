"""Small Monte Carlo statistics helpers shared by the verification suites."""

import math

import numpy as np
from scipy import stats


def clopper_pearson(successes: int, n: int, confidence: float = 0.99) -> tuple[float, float]:
    """Exact two-sided binomial confidence interval for a frequency."""
    if n <= 0:
        raise ValueError("n must be positive")
    alpha = 1.0 - confidence
    lo = 0.0 if successes == 0 else float(stats.beta.ppf(alpha / 2.0, successes, n - successes + 1))
    hi = 1.0 if successes == n else float(stats.beta.ppf(1.0 - alpha / 2.0, successes + 1, n - successes))
    return lo, hi


def binomial_ci_halfwidth(n: int, confidence_sigmas: float = 3.0) -> float:
    """Conservative normal half-width for a frequency: sigmas / (2 sqrt(n))."""
    return confidence_sigmas / (2.0 * math.sqrt(n))


def log_mean_exp(log_values: np.ndarray) -> float:
    """log(mean(exp(v))) without leaving the log domain."""
    m = float(np.max(log_values))
    return m + math.log(float(np.mean(np.exp(log_values - m))))


def bootstrap_upper_quantile(values: np.ndarray, stat=np.mean, n_boot: int = 200,
                             q: float = 0.99, seed: int = 0) -> float:
    """One-sided bootstrap upper confidence bound for a statistic of the sample."""
    rng = np.random.Generator(np.random.Philox(key=seed))
    n = values.shape[0]
    reps = np.empty(n_boot)
    for b in range(n_boot):
        reps[b] = stat(values[rng.integers(0, n, size=n)])
    return float(np.quantile(reps, q))
