"""Stopping rules, the worst-case stopping time, and envelope coverage.

The anytime guarantee states that for every stopping rule tau the stopped
value gap f(x_tau) - f* stays below the envelope U(beta, tau) with
probability at least 1 - 2 beta.  Its sharpness is witnessed by the
adversarial rule that stops at the first envelope violation: coverage under
that rule equals the probability that the whole prefix stays inside the
envelope, so no adapted rule can do worse.  A small exhaustively-enumerable
path tree makes that equivalence checkable exactly.
"""

import math
from dataclasses import dataclass
from enum import Enum
from itertools import product
from typing import Sequence

import numpy as np

from .lyapunov import EnvelopeParams, envelope_U
from .mcstats import clopper_pearson
from .sgdm import Trajectory

__all__ = [
    "RuleKind", "StoppingRule", "evaluate_rule", "adversarial_tau",
    "sup_within_envelope", "coverage", "baseline_envelope",
    "PathTree", "random_tree", "enumerate_stopping_times", "tree_min_coverage",
]


class RuleKind(Enum):
    ITERATE_DELTA = "iterate-delta"
    VALUE_DELTA = "value-delta"
    FIXED_K = "fixed-k"
    FIRST_ENVELOPE_VIOLATION = "first-envelope-violation"


@dataclass(frozen=True)
class StoppingRule:
    """A capped stopping rule; ``k_max`` doubles as the fixed step for FixedK.

    The delta rules trigger at the first k >= 1 whose increment (iterate
    displacement, or value-gap change) falls to ``epsilon`` or below; since
    the recurrence starts from a repeated point (x_1 = x_0), they trigger
    immediately at k = 1 unless epsilon is negative.  The envelope rule stops
    at the first k with f(x_k) - f* > U(beta, k).
    """

    kind: RuleKind
    k_max: int
    epsilon: float | None = None
    envelope: EnvelopeParams | None = None
    beta: float | None = None

    def __post_init__(self):
        if self.k_max < 1:
            raise ValueError("k_max must be >= 1")
        if self.kind in (RuleKind.ITERATE_DELTA, RuleKind.VALUE_DELTA):
            if self.epsilon is None or self.epsilon <= 0.0:
                raise ValueError("delta rules need a positive epsilon")
        if self.kind is RuleKind.FIRST_ENVELOPE_VIOLATION:
            if self.envelope is None or self.beta is None:
                raise ValueError("the envelope rule needs envelope constants and beta")


def evaluate_rule(rule: StoppingRule, traj: Trajectory) -> int:
    """First k in 1..k_max satisfying the rule's predicate, else k_max.

    The decision at k reads only x_0..x_k (and the value gaps they induce),
    so the result is a stopping time of the iterate filtration.
    """
    if traj.K < rule.k_max:
        raise ValueError("trajectory must extend to the rule's k_max")
    if rule.kind is RuleKind.FIXED_K:
        return rule.k_max
    if rule.kind is RuleKind.ITERATE_DELTA:
        steps = np.linalg.norm(np.diff(traj.xs[: rule.k_max + 1], axis=0), axis=-1)
        hits = np.nonzero(steps <= rule.epsilon)[0]
    elif rule.kind is RuleKind.VALUE_DELTA:
        moves = np.abs(np.diff(traj.f_gaps[: rule.k_max + 1]))
        hits = np.nonzero(moves <= rule.epsilon)[0]
    else:
        ks = np.arange(1, rule.k_max + 1)
        U = envelope_U(rule.envelope, rule.beta, ks)
        hits = np.nonzero(traj.f_gaps[1: rule.k_max + 1] > U)[0]
    return int(hits[0]) + 1 if hits.size else rule.k_max


def adversarial_tau(f_gaps: np.ndarray, U: np.ndarray, k0: int) -> np.ndarray:
    """First k <= k0 with f(x_k) - f* > U(k), else k0 + 1, per trajectory.

    ``f_gaps`` has shape (R, >= k0+2) indexed by k from 0; ``U`` is indexed
    the same way (U[0] is unused).  This is the stopping time that makes the
    anytime guarantee tight.
    """
    if f_gaps.shape[-1] < k0 + 2:
        raise ValueError("trajectories must extend to k0 + 1")
    viol = f_gaps[:, 1: k0 + 1] > U[1: k0 + 1]
    first = np.argmax(viol, axis=-1) + 1
    any_viol = np.any(viol, axis=-1)
    return np.where(any_viol, first, k0 + 1)


def sup_within_envelope(f_gaps: np.ndarray, U: np.ndarray, k_hi: int) -> np.ndarray:
    """Boolean per trajectory: f(x_k) - f* <= U(k) for every k in 1..k_hi."""
    return np.all(f_gaps[:, 1: k_hi + 1] <= U[1: k_hi + 1], axis=-1)


def coverage(f_gaps: np.ndarray, U: np.ndarray, taus: np.ndarray, beta: float) -> dict:
    """Fraction of trajectories with f(x_tau) - f* <= U(tau), with exact CI.

    Pass means the Clopper-Pearson 99% lower endpoint clears the guaranteed
    level 1 - 2 beta.
    """
    taus = np.asarray(taus)
    R = f_gaps.shape[0]
    if R < 100:
        raise ValueError("coverage needs an ensemble of at least 100 trajectories")
    within = f_gaps[np.arange(R), taus] <= U[taus]
    hits = int(np.sum(within))
    ci_lo, ci_hi = clopper_pearson(hits, R, 0.99)
    level = 1.0 - 2.0 * beta
    return {
        "frequency": hits / R, "ci_lo": ci_lo, "ci_hi": ci_hi,
        "bound": level, "R": R, "pass": ci_lo >= level or hits == R,
    }


def baseline_envelope(eta_param: float, beta: float, k) -> np.ndarray | float:
    """Union-bound-style reference envelope with unit-normalized constants.

    (1/sqrt(k)) * (1/eta + eta * ln(pi^2 k^2 / (6 beta)) * ln k); its ratio to
    the anytime envelope grows like ln k, which is the comparison of interest.
    """
    if eta_param <= 0.0:
        raise ValueError("eta_param must be positive")
    if not 0.0 < beta < 1.0:
        raise ValueError("beta must lie in (0, 1)")
    k = np.asarray(k, dtype=float)
    val = (1.0 / np.sqrt(k)) * (
        1.0 / eta_param
        + eta_param * np.log(math.pi**2 * k * k / (6.0 * beta)) * np.log(k)
    )
    return float(val) if val.ndim == 0 else val


@dataclass(frozen=True)
class PathTree:
    """A complete binary tree of equally likely value paths.

    ``values[p, k]`` is the observed value-gap on path p at step k (k = 0 is
    the common root).  Path index bits give the branch taken at each step,
    most significant bit first, so two paths share a history prefix of length
    k iff their indices agree in the top k bits.
    """

    values: np.ndarray

    def __post_init__(self):
        n, steps = self.values.shape
        d = steps - 1
        if n != 1 << d or d < 1 or d > 4 or n > 16:
            raise ValueError("tree must be complete binary with <= 4 steps and <= 16 paths")

    @property
    def depth(self) -> int:
        return self.values.shape[1] - 1


def random_tree(depth: int, seed: int, low: float = 0.0, high: float = 1.0) -> PathTree:
    """A random consistent tree: paths sharing a prefix share node values."""
    rng = np.random.Generator(np.random.Philox(key=seed))
    n = 1 << depth
    values = np.empty((n, depth + 1))
    values[:, 0] = rng.uniform(low, high)
    for k in range(1, depth + 1):
        node_vals = rng.uniform(low, high, 1 << k)
        values[:, k] = node_vals[np.arange(n) >> (depth - k)]
    return PathTree(values)


def enumerate_stopping_times(depth: int):
    """Yield every adapted stopping time on the depth-d binary tree as a
    per-path tau array with values in 1..depth.

    A rule consists of one stop/continue decision per interior history node
    at steps 1..depth-1 (2^k nodes at step k), with a forced stop at depth.
    There are 2^(2 + 4 + ... + 2^(depth-1)) such rules: 64 for depth 3.
    """
    n_paths = 1 << depth
    nodes = [(k, h) for k in range(1, depth) for h in range(1 << k)]
    for bits in product((False, True), repeat=len(nodes)):
        stop = dict(zip(nodes, bits))
        taus = np.empty(n_paths, dtype=int)
        for p in range(n_paths):
            tau = depth
            for k in range(1, depth):
                if stop[(k, p >> (depth - k))]:
                    tau = k
                    break
            taus[p] = tau
        yield taus


def tree_min_coverage(tree: PathTree, U: np.ndarray) -> dict:
    """Exhaustive minimum of Pr(value at tau <= U(tau)) over all stopping times.

    Also reports the sup-statement probability Pr(forall k <= depth: value(k)
    <= U(k)) and the coverage of the first-violation rule; the three agree on
    any tree, which is the finite-space form of the tight-envelope
    equivalence.
    """
    n_paths, d = tree.values.shape[0], tree.depth
    best = 1.0
    best_taus = None
    for taus in enumerate_stopping_times(d):
        cov = float(np.mean(tree.values[np.arange(n_paths), taus] <= U[taus]))
        if cov < best:
            best, best_taus = cov, taus.copy()
    sup_prob = float(np.mean(np.all(tree.values[:, 1:] <= U[1: d + 1], axis=-1)))
    adv = adversarial_tau(tree.values, U, d - 1)
    adv_cov = float(np.mean(tree.values[np.arange(n_paths), adv] <= U[adv]))
    return {
        "min_coverage": best, "argmin_taus": best_taus,
        "sup_probability": sup_prob, "adversarial_coverage": adv_cov,
    }
