"""Discrete Lyapunov energy, pathwise decay inequalities, and envelope constants.

The energy at step k is

    E(k) = ||x_{k+1} + (k+1)(x_{k+1} - x_k) - x*||^2
           + 4 sqrt((k+1) eta_k) (f(x_k) - f*),

whose one-step increment is bounded pathwise (for every realized noise draw,
not on average) first by a gradient-form right-hand side and then by the
noise-only decomposition a_k ||theta_k||^2 + sqrt(a_k) <theta_k, phi_k> with
phi_k = k (x_k - x_{k-1}) + (x_k - x*).  The residual functions here return
RHS - LHS, which must stay above a small magnitude-relative negative tolerance
on every step of every run.

Series functions operate on arrays with an optional leading trajectory axis;
``k`` indexes match the underlying path (E at k = 0..K, residuals at 1..K).
"""

import math
from dataclasses import dataclass

import numpy as np

from .objectives import Objective
from .sgdm import ScheduleVariant, Trajectory, Variant, a_coeff, eta
from .series import gamma1 as _gamma1_bracket
from .series import gamma2 as _gamma2_bracket
from .series import riemann_zeta

__all__ = [
    "EnvelopeParams", "LyapunovTrace", "residual_tolerance", "energy_series",
    "phi_series", "lyapunov_E", "phi", "step_residuals", "descent_residual_series",
    "decomposition_residual_series", "check_descent_lemma",
    "check_decomposition", "deep_descent_links", "compute_trace",
    "envelope_constants", "envelope_U", "h_sigma", "riemann_zeta",
]


def _sq_norm(v: np.ndarray) -> np.ndarray:
    """Squared euclidean norm over the last axis.

    Uses compensated accumulation in high dimension, where plain pairwise
    summation could eat into the 1e-9 pathwise tolerances.
    """
    if v.shape[-1] <= 1000:
        return np.sum(v * v, axis=-1)
    total = np.zeros(v.shape[:-1])
    comp = np.zeros(v.shape[:-1])
    for j in range(v.shape[-1]):
        term = v[..., j] * v[..., j] - comp
        t = total + term
        comp = (t - total) - term
        total = t
    return total


def residual_tolerance(E_k, E_km1) -> np.ndarray:
    """Magnitude-relative tolerance 1e-9 (1 + |E(k)| + |E(k-1)|), floored at 1e-12."""
    return np.maximum(1e-9 * (1.0 + np.abs(E_k) + np.abs(E_km1)), 1e-12)


def energy_series(xs, f_gaps, sched: ScheduleVariant, x_star) -> np.ndarray:
    """E(k) for k = 0..K; ``xs`` has shape (..., K+2, dim), f_gaps (..., K+1)."""
    K = xs.shape[-2] - 2
    k = np.arange(0, K + 1, dtype=float)
    v = xs[..., 1:, :] + (k + 1.0)[:, None] * (xs[..., 1:, :] - xs[..., :-1, :]) - x_star
    weight = 4.0 * np.sqrt((k + 1.0) * eta(sched, k))
    return _sq_norm(v) + weight * f_gaps


def phi_series(xs: np.ndarray, x_star) -> np.ndarray:
    """phi_k = k (x_k - x_{k-1}) + (x_k - x*) for k = 1..K+1; shape (..., K+1, dim)."""
    K1 = xs.shape[-2] - 1
    k = np.arange(1, K1 + 1, dtype=float)
    return k[:, None] * (xs[..., 1:, :] - xs[..., :-1, :]) + (xs[..., 1:, :] - x_star)


def lyapunov_E(traj: Trajectory, sched: ScheduleVariant, obj: Objective, k: int) -> float:
    """E(k); requires x_{k+1} to be recorded."""
    if not 0 <= k <= traj.K:
        raise ValueError(f"k must lie in [0, {traj.K}]")
    xk, xk1 = traj.xs[k], traj.xs[k + 1]
    v = xk1 + (k + 1.0) * (xk1 - xk) - obj.minimizer
    return float(_sq_norm(v) + 4.0 * math.sqrt((k + 1.0) * eta(sched, k)) * traj.f_gaps[k])


def phi(traj: Trajectory, k: int) -> np.ndarray:
    """phi_k; a function of x_{k-1}, x_k only."""
    if k < 1:
        raise ValueError("phi is defined for k >= 1")
    return k * (traj.xs[k] - traj.xs[k - 1]) + (traj.xs[k] - traj.obj.minimizer)


def _path_pieces(xs, gs, thetas, f_gaps, sched, obj):
    """Shared per-step quantities for the residual series (k = 1..K)."""
    K = gs.shape[-2]
    E = energy_series(xs, f_gaps, sched, obj.minimizer)     # (..., K+1)
    dE = E[..., 1:] - E[..., :-1]                           # k = 1..K
    phis = phi_series(xs, obj.minimizer)[..., :K, :]        # phi_k, k = 1..K
    k = np.arange(1, K + 1, dtype=float)
    eta_k = np.asarray(eta(sched, k))
    sq = np.sqrt(eta_k / k)
    grad_f = gs + thetas
    return K, E, dE, phis, k, eta_k, sq, grad_f


def descent_residual_series(xs, gs, thetas, f_gaps, sched, obj):
    """RHS - LHS of the per-step energy decay inequality, for k = 1..K.

    RHS = 4 eta_k / k ||g_k||^2 - (2/L) sqrt(eta_k/k) ||grad f(x_k)||^2
          - 2 sqrt(eta_k/k) (f(x_k) - f*) + 4 sqrt(eta_k/k) <theta_k, phi_k>.
    """
    K, E, dE, phis, k, eta_k, sq, grad_f = _path_pieces(xs, gs, thetas, f_gaps, sched, obj)
    rhs = (
        4.0 * eta_k / k * _sq_norm(gs)
        - 2.0 / obj.smoothness * sq * _sq_norm(grad_f)
        - 2.0 * sq * f_gaps[..., 1:]
        + 4.0 * sq * np.sum(thetas * phis, axis=-1)
    )
    return rhs - dE, E


def decomposition_residual_series(xs, gs, thetas, f_gaps, sched, obj):
    """Residuals of the noise-only decomposition and its intermediate form.

    Final form:        a_k ||theta_k||^2 + sqrt(a_k) <theta_k, phi_k>.
    Intermediate form: 8 eta_k/k (||theta_k||^2 + ||grad f(x_k)||^2)
                       - (2/L) sqrt(eta_k/k) ||grad f(x_k)||^2
                       + 4 sqrt(eta_k/k) <theta_k, phi_k>.
    Returns (final_residual, intermediate_residual, E) with k = 1..K.
    """
    K, E, dE, phis, k, eta_k, sq, grad_f = _path_pieces(xs, gs, thetas, f_gaps, sched, obj)
    a_k = np.asarray(a_coeff(sched, np.arange(1, K + 1)))
    inner = np.sum(thetas * phis, axis=-1)
    theta_sq = _sq_norm(thetas)
    rhs_final = a_k * theta_sq + np.sqrt(a_k) * inner
    rhs_mid = (
        8.0 * eta_k / k * (theta_sq + _sq_norm(grad_f))
        - 2.0 / obj.smoothness * sq * _sq_norm(grad_f)
        + 4.0 * sq * inner
    )
    return rhs_final - dE, rhs_mid - dE, E


def check_descent_lemma(traj: Trajectory, sched: ScheduleVariant, obj: Objective, k: int) -> float:
    """Residual of the energy decay inequality at one step."""
    if not 1 <= k <= traj.K:
        raise ValueError(f"k must lie in [1, {traj.K}]")
    res, _ = descent_residual_series(traj.xs, traj.gs, traj.thetas, traj.f_gaps, sched, obj)
    return float(res[k - 1])


def check_decomposition(
    traj: Trajectory, sched: ScheduleVariant, obj: Objective, k: int, intermediate: bool = False
) -> float:
    """Residual of the decomposition inequality at one step.

    ``intermediate=True`` returns instead the residual of the 8 eta_k / k form
    that sits between the lemma and the final decomposition.
    """
    if not 1 <= k <= traj.K:
        raise ValueError(f"k must lie in [1, {traj.K}]")
    fin, mid, _ = decomposition_residual_series(
        traj.xs, traj.gs, traj.thetas, traj.f_gaps, sched, obj
    )
    return float(mid[k - 1] if intermediate else fin[k - 1])


def deep_descent_links(traj: Trajectory, sched: ScheduleVariant, obj: Objective, k: int) -> dict:
    """Verify each link of the energy-decay derivation separately at step k.

    Returns residuals for: the recurrence identity
    (k+2)(x_{k+1}-x_k) - k(x_k - x_{k-1}) = -2 sqrt(eta_k/k) g_k (abs error),
    the raw differencing bound, and the post-substitution bound.  All must be
    >= -tol (identity: <= tol in absolute value).
    """
    if not 1 <= k <= traj.K:
        raise ValueError(f"k must lie in [1, {traj.K}]")
    x_km1, x_k, x_k1 = traj.xs[k - 1], traj.xs[k], traj.xs[k + 1]
    g = traj.g(k)
    x_star = obj.minimizer
    e_k = eta(sched, k)
    sq = math.sqrt(e_k / k)
    E_k = lyapunov_E(traj, sched, obj, k)
    E_km1 = lyapunov_E(traj, sched, obj, k - 1)
    dE = E_k - E_km1
    delta = 2.0 * (x_k1 - x_k) + k * (x_k1 - 2.0 * x_k + x_km1)
    identity_err = float(np.max(np.abs(delta + 2.0 * sq * g)))
    f_diff = traj.f_gaps[k] - traj.f_gaps[k - 1]  # f(x_k) - f(x_{k-1})
    anchor = x_k1 + (k + 1.0) * (x_k1 - x_k) - x_star
    rhs_diff = (
        2.0 * float(delta @ anchor)
        - float(_sq_norm(delta))
        + 4.0 * math.sqrt(k * e_k) * f_diff
        + 2.0 * sq * traj.f_gaps[k]
    )
    rhs_mid1 = (
        -4.0 * sq * float(g @ (x_k + (k + 2.0) * (x_k1 - x_k) - x_star))
        - 4.0 * e_k / k * float(g @ g)
        + 4.0 * math.sqrt(k * e_k) * f_diff
        + 2.0 * sq * traj.f_gaps[k]
    )
    return {
        "recurrence_identity_abs_err": identity_err,
        "differencing_residual": rhs_diff - dE,
        "substituted_residual": rhs_mid1 - dE,
    }


def step_residuals(rec, sched: ScheduleVariant, obj: Objective) -> dict:
    """All per-step inequality residuals from one streamed ensemble record.

    Works on a StepRecord (leading trajectory axis) and returns a dict of
    arrays: the new energy E(k), the three decay residuals, the squared norms
    entering the momentum-vector bound ||phi_{k+1}||^2 <= E(k) and the value
    sandwich 4 sqrt((k+1) eta_k) (f(x_k) - f*) <= E(k), and the per-step
    tolerance.  Matches the full-path series functions to rounding error.
    """
    k = rec.k
    e_k = float(eta(sched, k))
    sq = math.sqrt(e_k / k)
    a_k = float(a_coeff(sched, k))
    x_star = obj.minimizer
    phi_k = k * (rec.x_curr - rec.x_prev) + (rec.x_curr - x_star)
    grad_f = rec.g + rec.theta
    inner = np.sum(rec.theta * phi_k, axis=-1)
    g_sq = _sq_norm(rec.g)
    gf_sq = _sq_norm(grad_f)
    th_sq = _sq_norm(rec.theta)
    v = rec.x_next + (k + 1.0) * (rec.x_next - rec.x_curr) - x_star
    sandwich = 4.0 * math.sqrt((k + 1.0) * e_k) * rec.fgap_curr
    E_k = _sq_norm(v) + sandwich
    dE = E_k - rec.E_prev
    descent = (
        4.0 * e_k / k * g_sq
        - 2.0 / obj.smoothness * sq * gf_sq
        - 2.0 * sq * rec.fgap_curr
        + 4.0 * sq * inner
    ) - dE
    decomp = a_k * th_sq + math.sqrt(a_k) * inner - dE
    decomp_mid = (
        8.0 * e_k / k * (th_sq + gf_sq)
        - 2.0 / obj.smoothness * sq * gf_sq
        + 4.0 * sq * inner
    ) - dE
    phi_next = (k + 1.0) * (rec.x_next - rec.x_curr) + (rec.x_next - x_star)
    return {
        "E": E_k,
        "descent": descent,
        "decomp": decomp,
        "decomp_mid": decomp_mid,
        "phi_sq": _sq_norm(phi_k),
        "phi_next_sq": _sq_norm(phi_next),
        "sandwich_margin": E_k - sandwich,
        "tol": residual_tolerance(E_k, rec.E_prev),
    }


@dataclass
class LyapunovTrace:
    """Per-trajectory instrumentation: E(0..K), phi/a (1..K), residuals (1..K)."""

    E: np.ndarray
    phi: np.ndarray
    a: np.ndarray
    descent_residual: np.ndarray
    decomp_residual: np.ndarray
    decomp_mid_residual: np.ndarray


def compute_trace(traj: Trajectory, sched: ScheduleVariant | None = None,
                  obj: Objective | None = None) -> LyapunovTrace:
    sched = sched or traj.sched
    obj = obj or traj.obj
    desc, E = descent_residual_series(traj.xs, traj.gs, traj.thetas, traj.f_gaps, sched, obj)
    fin, mid, _ = decomposition_residual_series(traj.xs, traj.gs, traj.thetas, traj.f_gaps, sched, obj)
    return LyapunovTrace(
        E=E,
        phi=phi_series(traj.xs, obj.minimizer)[: traj.K],
        a=np.asarray(a_coeff(sched, np.arange(1, traj.K + 1))),
        descent_residual=desc,
        decomp_residual=fin,
        decomp_mid_residual=mid,
    )


@dataclass(frozen=True)
class EnvelopeParams:
    """Constants of the high-probability envelope U(beta, k).

    ``gamma1``/``gamma2`` are certified upper ends of their brackets (the safe
    direction for envelope validity); ``*_tail`` are the bracket widths.
    """

    sched: ScheduleVariant
    sigma: float
    E0: float
    gamma1: float
    gamma2: float
    gamma1_tail: float
    gamma2_tail: float
    C1: float
    C2: float
    B: float = 1.0


def envelope_constants(
    sched: ScheduleVariant, sigma: float, E0: float, tol: float = 1e-6
) -> EnvelopeParams:
    """Assemble C1 = L g2 E0 + L s^2 (1 + s^2 g1 g2) g1 and its slope twin C2."""
    if not (1e-12 < tol < 1e-3):
        raise ValueError("tol must lie in (1e-12, 1e-3)")
    g1_lo, g1_w = _gamma1_bracket(sched, tol)
    g2_lo, g2_w = _gamma2_bracket(sched, sigma, tol)
    g1 = g1_lo + g1_w
    g2 = g2_lo + g2_w
    L = sched.L
    s2 = sigma * sigma
    cross = L * s2 * (1.0 + s2 * g1 * g2) * g1
    return EnvelopeParams(
        sched=sched, sigma=sigma, E0=E0,
        gamma1=g1, gamma2=g2, gamma1_tail=g1_w, gamma2_tail=g2_w,
        C1=L * g2 * E0 + cross, C2=L * g2 + cross,
    )


def envelope_U(params: EnvelopeParams, beta: float, k) -> np.ndarray | float:
    """High-probability envelope value at (beta, k); vectorized in k.

    For the log^2 schedule this is (C1 + C2 ln(1/beta)) ln(k+2) / sqrt(k+1).
    For the eps-schedule the exact sandwich constant carries an extra
    sqrt(C0') from 4 sqrt((k+1) eta_k) = sqrt(k+1) / (L sqrt(C0')
    ln^((1+eps)/2)(k+2)).
    """
    if not (0.0 < beta < 0.5):
        raise ValueError("beta must lie in (0, 0.5)")
    k = np.asarray(k, dtype=float)
    level = params.C1 + params.C2 * math.log(1.0 / beta)
    if params.sched.variant is Variant.THEOREM_MAIN:
        out = level * np.log(k + 2.0) / np.sqrt(k + 1.0)
    else:
        power = (1.0 + params.sched.epsilon) / 2.0
        out = (
            math.sqrt(params.sched.c0_prime)
            * level * np.log(k + 2.0) ** power / np.sqrt(k + 1.0)
        )
    return out if out.ndim else float(out)


def h_sigma(epsilon: float, sigma: float) -> float:
    """exp(sigma^2 zeta(1+eps)) zeta(1+eps)^2, the eps-schedule constant bound."""
    z = riemann_zeta(1.0 + epsilon)
    return math.exp(sigma * sigma * z) * z * z
