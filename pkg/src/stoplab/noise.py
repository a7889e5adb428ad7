"""Gradient-noise generators with certified sub-Gaussian parameters.

Each model carries a certificate sigma for which the conditional
squared-norm MGF satisfies E[exp(||theta||^2 / sigma^2)] <= e.  Calibration
solves the kind's exact MGF identity for the largest raw scale compatible
with the certificate, so the certificate is tight rather than merely valid.
"""

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import CalibrationError, DimensionMismatchError
from .objectives import Objective, grad


class NoiseKind(Enum):
    NONE = "none"
    GAUSSIAN_ISOTROPIC = "gaussian"
    BOUNDED_SPHERE = "bounded_sphere"
    HEAVY_TAIL = "heavy_tail"  # negative testing only; refuses calibration


@dataclass(frozen=True)
class NoiseModel:
    kind: NoiseKind
    dim: int
    sigma_certificate: float
    scale: float


def calibrate(kind: NoiseKind, dim: int, sigma_certificate: float) -> NoiseModel:
    """Build the model with the largest raw scale honoring the certificate.

    GaussianIsotropic uses the chi-square MGF identity
    E[exp(||theta||^2/s'^2)] = (1 - 2 scale^2 / s'^2)^(-d/2); setting it to e
    gives scale^2 = sigma^2 (1 - exp(-2/d)) / 2.  BoundedSphere noise has
    ||theta|| = scale surely, so scale = sigma suffices.
    """
    if dim < 1:
        raise ValueError("dim must be positive")
    if kind is NoiseKind.NONE:
        return NoiseModel(kind, dim, float(sigma_certificate), 0.0)
    if sigma_certificate <= 0:
        raise CalibrationError("sigma_certificate must be positive for noisy kinds")
    if kind is NoiseKind.GAUSSIAN_ISOTROPIC:
        scale = sigma_certificate * math.sqrt((1.0 - math.exp(-2.0 / dim)) / 2.0)
        return NoiseModel(kind, dim, float(sigma_certificate), scale)
    if kind is NoiseKind.BOUNDED_SPHERE:
        return NoiseModel(kind, dim, float(sigma_certificate), float(sigma_certificate))
    raise CalibrationError(f"no finite sub-Gaussian certificate exists for {kind}")


def sample(model: NoiseModel, rng: np.random.Generator, n: int | None = None) -> np.ndarray:
    """Draw noise vectors; shape (dim,) for n=None, else (n, dim).

    Draw order is sequential in the stream, so chunked batch draws reproduce
    the same values as repeated single draws.
    """
    shape = (model.dim,) if n is None else (n, model.dim)
    if model.kind is NoiseKind.NONE:
        return np.zeros(shape)
    z = rng.standard_normal(shape)
    if model.kind is NoiseKind.GAUSSIAN_ISOTROPIC:
        return model.scale * z
    norms = np.sqrt(np.sum(z * z, axis=-1, keepdims=True))
    return model.scale * z / norms


def stochastic_grad(obj: Objective, model: NoiseModel, x, rng: np.random.Generator):
    """Return (g, theta) with g = grad f(x) - theta, theta freshly sampled.

    Both are returned so instrumentation never re-derives theta; the identity
    g + theta = grad f(x) holds bitwise.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != obj.dim or model.dim != obj.dim:
        raise DimensionMismatchError("objective, noise and point dims must agree")
    n = None if x.ndim == 1 else x.shape[0]
    theta = sample(model, rng, n)
    g = grad(obj, x) - theta
    return g, theta


def variance_diagnostic(model: NoiseModel, n_samples: int, rng: np.random.Generator) -> dict:
    """Monte Carlo check of E[||theta||^2] <= sigma^2 (Jensen from the MGF bound)."""
    if n_samples < 100:
        raise ValueError("n_samples must be >= 100")
    sq = np.empty(n_samples)
    chunk = 1 << 16
    for lo in range(0, n_samples, chunk):
        hi = min(lo + chunk, n_samples)
        th = sample(model, rng, hi - lo)
        sq[lo:hi] = np.sum(th * th, axis=-1)
    est = float(np.mean(sq))
    stderr = float(np.std(sq, ddof=1) / math.sqrt(n_samples)) if n_samples > 1 else 0.0
    bound = model.sigma_certificate**2
    return {
        "estimate": est,
        "ci_halfwidth": 3.0 * stderr,
        "bound": bound,
        "pass": est <= bound + 3.0 * stderr + 1e-12,
    }


def mgf_certificate_check(model: NoiseModel, n_samples: int, rng: np.random.Generator) -> dict:
    """Monte Carlo estimate of E[exp(||theta||^2 / sigma^2)] against e.

    One-sided pass rule: estimate <= e * (1 + 3 * relative MC stderr).
    """
    if model.sigma_certificate == 0.0:
        return {"estimate": 1.0, "ci_halfwidth": 0.0, "bound": math.e, "pass": True}
    vals = np.empty(n_samples)
    chunk = 1 << 16
    s2 = model.sigma_certificate**2
    for lo in range(0, n_samples, chunk):
        hi = min(lo + chunk, n_samples)
        th = sample(model, rng, hi - lo)
        vals[lo:hi] = np.exp(np.sum(th * th, axis=-1) / s2)
    est = float(np.mean(vals))
    stderr = float(np.std(vals, ddof=1) / math.sqrt(n_samples))
    return {
        "estimate": est,
        "ci_halfwidth": 3.0 * stderr,
        "bound": math.e,
        "pass": est <= math.e * (1.0 + 3.0 * stderr / max(est, 1e-300)) + 1e-12,
    }
