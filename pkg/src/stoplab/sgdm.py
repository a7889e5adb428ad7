"""Momentum SGD recurrence, step schedules, and trajectory runners.

The recurrence is

    x_{k+1} = x_k + k/(k+2) (x_k - x_{k-1}) - 2 sqrt(eta_k) / ((k+2) sqrt(k)) g_k,
    x_1 = x_0,

with two step schedules: the log^2 schedule eta_k = 1 / (16 L^2 ln^2(k+2))
and the heavier-damped variant eta_k = 1 / (16 L^2 C0' ln^(1+eps)(k+2)).
Natural logarithms throughout.

Two runners are provided.  ``run_ensemble`` materializes full paths (iterates,
stochastic gradients, noise, f-gaps) for pathwise inequality checks at desk
scale.  ``stream_ensemble`` is a generator over per-step records for long runs
where only online statistics are kept.  Both vectorize across trajectories
while giving every trajectory its own counter-based random stream, so results
are bitwise independent of how trajectories are grouped into batches.
"""

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterator, Sequence

import numpy as np

from .errors import DivergenceError
from .noise import NoiseKind, NoiseModel, sample
from .objectives import Objective, eval_objective, grad

DIVERGENCE_RADIUS = 1e12
_NOISE_CHUNK = 1024


class Variant(Enum):
    THEOREM_MAIN = "theorem-main"
    PROPOSITION_EPS = "proposition-eps"


@dataclass(frozen=True)
class ScheduleVariant:
    variant: Variant
    L: float
    epsilon: float | None = None
    c0_prime: float = 100.0

    def __post_init__(self):
        if self.L <= 0:
            raise ValueError("L must be positive")
        if self.variant is Variant.PROPOSITION_EPS:
            if self.epsilon is None or not (0.0 < self.epsilon < 0.5):
                raise ValueError("epsilon must lie in (0, 0.5)")
            if self.c0_prime < 100.0:
                raise ValueError("c0_prime must be >= 100")

    @property
    def log_power(self) -> float:
        """Exponent p in a_k = 1 / (coeff * k * ln^p(k+2))."""
        return 2.0 if self.variant is Variant.THEOREM_MAIN else 1.0 + self.epsilon

    @property
    def a_coefficient_scale(self) -> float:
        """Constant coeff in a_k = 1 / (coeff * k * ln^p(k+2))."""
        base = self.L**2
        if self.variant is Variant.PROPOSITION_EPS:
            base *= self.c0_prime
        return base


def eta(sched: ScheduleVariant, k) -> np.ndarray | float:
    """Learning rate at iteration k (defined for k >= 0); vectorized in k."""
    k = np.asarray(k, dtype=float)
    logs = np.log(k + 2.0)
    out = 1.0 / (16.0 * sched.a_coefficient_scale * logs**sched.log_power)
    return out if out.ndim else float(out)


def a_coeff(sched: ScheduleVariant, k) -> np.ndarray | float:
    """a_k = 16 eta_k / k, the noise-quadratic weight; requires k >= 1."""
    karr = np.asarray(k)
    if np.any(karr < 1):
        raise ValueError("a_coeff requires k >= 1")
    karr = karr.astype(float)
    out = 1.0 / (sched.a_coefficient_scale * karr * np.log(karr + 2.0) ** sched.log_power)
    return out if out.ndim else float(out)


@dataclass
class IterState:
    k: int
    x_prev: np.ndarray
    x_curr: np.ndarray


def initial_state(x0) -> IterState:
    x0 = np.asarray(x0, dtype=float)
    return IterState(k=1, x_prev=x0.copy(), x_curr=x0.copy())


def _step_arrays(k: int, x_prev, x_curr, g, sched: ScheduleVariant):
    momentum = k / (k + 2.0)
    lr = 2.0 * math.sqrt(eta(sched, k)) / ((k + 2.0) * math.sqrt(k))
    return x_curr + momentum * (x_curr - x_prev) - lr * g


def sgdm_step(state: IterState, sched: ScheduleVariant, g) -> IterState:
    """One application of the recurrence; pure function of its inputs."""
    if state.k < 1:
        raise ValueError("the recurrence starts at k = 1")
    g = np.asarray(g, dtype=float)
    if g.shape != state.x_curr.shape:
        raise ValueError("gradient shape must match the iterate shape")
    x_next = _step_arrays(state.k, state.x_prev, state.x_curr, g, sched)
    return IterState(k=state.k + 1, x_prev=state.x_curr.copy(), x_curr=x_next)


@dataclass
class Trajectory:
    """Full realized path of one run: x_0..x_{K+1}, g_k/theta_k for k=1..K."""

    sched: ScheduleVariant
    obj: Objective
    noise: NoiseModel
    seed: int
    xs: np.ndarray       # (K+2, dim)
    gs: np.ndarray       # (K, dim)
    thetas: np.ndarray   # (K, dim)
    f_gaps: np.ndarray   # (K+1,)

    @property
    def K(self) -> int:
        return self.gs.shape[0]

    def x(self, k: int) -> np.ndarray:
        if not 0 <= k <= self.K + 1:
            raise ValueError(f"k must lie in [0, {self.K + 1}]")
        return self.xs[k]

    def g(self, k: int) -> np.ndarray:
        """Realized stochastic gradient at step k (1-based)."""
        if not 1 <= k <= self.K:
            raise ValueError(f"k must lie in [1, {self.K}]")
        return self.gs[k - 1]

    def theta(self, k: int) -> np.ndarray:
        if not 1 <= k <= self.K:
            raise ValueError(f"k must lie in [1, {self.K}]")
        return self.thetas[k - 1]


@dataclass
class EnsembleRecord:
    """Stacked full paths for R trajectories (leading axis = trajectory)."""

    sched: ScheduleVariant
    obj: Objective
    noise: NoiseModel
    seeds: np.ndarray
    xs: np.ndarray       # (R, K+2, dim)
    gs: np.ndarray       # (R, K, dim)
    thetas: np.ndarray   # (R, K, dim)
    f_gaps: np.ndarray   # (R, K+1)

    @property
    def R(self) -> int:
        return self.xs.shape[0]

    @property
    def K(self) -> int:
        return self.gs.shape[1]

    def trajectory(self, i: int) -> Trajectory:
        return Trajectory(
            sched=self.sched, obj=self.obj, noise=self.noise,
            seed=int(self.seeds[i]), xs=self.xs[i], gs=self.gs[i],
            thetas=self.thetas[i], f_gaps=self.f_gaps[i],
        )


def derive_seeds(base_seed: int, n: int) -> np.ndarray:
    """Per-trajectory 64-bit seeds from (base_seed, index), counter style."""
    out = np.empty(n, dtype=np.uint64)
    for i in range(n):
        ss = np.random.SeedSequence(entropy=base_seed, spawn_key=(i,))
        out[i] = ss.generate_state(1, np.uint64)[0]
    return out


def _trajectory_generators(seeds: Sequence[int]):
    return [np.random.Generator(np.random.Philox(key=int(s))) for s in seeds]


@dataclass
class StepRecord:
    """Everything observable at step k of a vectorized ensemble run.

    Arrays carry a leading trajectory axis.  ``E_prev`` is the Lyapunov value
    E(k-1), computable once x_k is known; consumers needing E(K) read it from
    the ``final`` record emitted after the last step.
    """

    k: int
    x_prev: np.ndarray
    x_curr: np.ndarray
    x_next: np.ndarray
    fgap_prev: np.ndarray
    fgap_curr: np.ndarray
    E_prev: np.ndarray
    g: np.ndarray
    theta: np.ndarray


@dataclass
class FinalRecord:
    K: int
    x_last: np.ndarray     # x_{K+1}
    fgap_last: np.ndarray  # f(x_K) - f*
    E_last: np.ndarray     # E(K)


def _lyapunov_value(k: int, x_k, x_k1, fgap_k, sched: ScheduleVariant, x_star):
    """E(k) = ||x_{k+1} + (k+1)(x_{k+1} - x_k) - x*||^2 + 4 sqrt((k+1) eta_k) fgap_k."""
    v = x_k1 + (k + 1.0) * (x_k1 - x_k) - x_star
    sq = np.sum(v * v, axis=-1)
    return sq + 4.0 * math.sqrt((k + 1.0) * eta(sched, k)) * fgap_k


def stream_ensemble(
    obj: Objective,
    noise: NoiseModel,
    sched: ScheduleVariant,
    K: int,
    seeds: Sequence[int],
    x0,
) -> Iterator[StepRecord | FinalRecord]:
    """Yield a StepRecord for k = 1..K, then one FinalRecord.

    Noise for each trajectory comes from its own Philox stream, drawn in step
    chunks; values and order match single-trajectory runs exactly.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    x0 = np.asarray(x0, dtype=float)
    R = len(seeds)
    x_prev = np.broadcast_to(x0, (R, obj.dim)).copy()
    x_curr = x_prev.copy()
    gens = None if noise.kind is NoiseKind.NONE else _trajectory_generators(seeds)
    fgap_prev = eval_objective(obj, x_curr) - obj.min_value
    f_star = obj.min_value
    x_star = obj.minimizer
    noise_block = None
    for k in range(1, K + 1):
        if gens is not None:
            off = (k - 1) % _NOISE_CHUNK
            if off == 0:
                m = min(_NOISE_CHUNK, K - (k - 1))
                noise_block = np.stack([sample(noise, g, m) for g in gens], axis=0)
            theta = noise_block[:, off, :]
        else:
            theta = np.zeros((R, obj.dim))
        fgap_curr = eval_objective(obj, x_curr) - f_star if k > 1 else fgap_prev
        E_prev = _lyapunov_value(k - 1, x_prev, x_curr, fgap_prev, sched, x_star)
        g = grad(obj, x_curr) - theta
        x_next = _step_arrays(k, x_prev, x_curr, g, sched)
        worst = float(np.max(np.abs(x_next)))
        if not worst <= DIVERGENCE_RADIUS:
            raise DivergenceError(k, worst)
        yield StepRecord(
            k=k, x_prev=x_prev, x_curr=x_curr, x_next=x_next,
            fgap_prev=fgap_prev, fgap_curr=fgap_curr, E_prev=E_prev,
            g=g, theta=theta,
        )
        x_prev, x_curr = x_curr, x_next
        fgap_prev = fgap_curr
    fgap_last = eval_objective(obj, x_prev) - f_star
    E_last = _lyapunov_value(K, x_prev, x_curr, fgap_last, sched, x_star)
    yield FinalRecord(K=K, x_last=x_curr, fgap_last=fgap_last, E_last=E_last)


def run_ensemble(
    obj: Objective,
    noise: NoiseModel,
    sched: ScheduleVariant,
    K: int,
    seeds: Sequence[int],
    x0,
) -> EnsembleRecord:
    """Run R trajectories with full path storage."""
    seeds = np.asarray(seeds, dtype=np.uint64)
    R = len(seeds)
    xs = np.empty((R, K + 2, obj.dim))
    gs = np.empty((R, K, obj.dim))
    thetas = np.empty((R, K, obj.dim))
    f_gaps = np.empty((R, K + 1))
    for rec in stream_ensemble(obj, noise, sched, K, seeds, x0):
        if isinstance(rec, FinalRecord):
            f_gaps[:, K] = rec.fgap_last
            xs[:, K + 1] = rec.x_last
            continue
        k = rec.k
        if k == 1:
            xs[:, 0] = rec.x_prev
            f_gaps[:, 0] = rec.fgap_prev
        xs[:, k] = rec.x_curr
        f_gaps[:, k - 1] = rec.fgap_prev
        gs[:, k - 1] = rec.g
        thetas[:, k - 1] = rec.theta
    return EnsembleRecord(
        sched=sched, obj=obj, noise=noise, seeds=seeds,
        xs=xs, gs=gs, thetas=thetas, f_gaps=f_gaps,
    )


def run_trajectory(
    obj: Objective,
    noise: NoiseModel,
    sched: ScheduleVariant,
    K: int,
    seed: int,
    x0,
) -> Trajectory:
    """Run one trajectory; deterministic (bitwise) in the seed."""
    rec = run_ensemble(obj, noise, sched, K, [seed], x0)
    return rec.trajectory(0)
